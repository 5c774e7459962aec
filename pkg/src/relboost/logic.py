"""Typed first-order fact store with argument indexes and conjunction queries.

Constants are interned to integers through a shared :class:`Schema` symbol
table, facts are stored per predicate as tuples of constant ids, and every
argument position carries an index from constant id to the facts containing
it.  Conjunction satisfaction (`satisfiable`) does backtracking search with
existential semantics over those indexes; negated literals use negation as
failure and must be fully bound by the time they are reached.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

from .errors import ClauseError, ParseError, SchemaError

_NAME_RE = re.compile(r"[a-zA-Z_][a-zA-Z0-9_]*$")


@dataclass(frozen=True)
class PredicateSchema:
    """A predicate name with its ordered argument types."""

    name: str
    arg_types: tuple[str, ...]

    @property
    def arity(self) -> int:
        return len(self.arg_types)


@dataclass(frozen=True)
class Variable:
    """A typed first-order variable; identity is (name, type)."""

    name: str
    type: str


@dataclass(frozen=True)
class Constant:
    """An interned constant; `cid` indexes the owning schema's symbol table."""

    cid: int
    type: str


Term = Union[Variable, Constant]


@dataclass(frozen=True)
class GroundAtom:
    """A fully ground atom: predicate name plus interned argument ids."""

    pred: str
    args: tuple[int, ...]


@dataclass(frozen=True)
class Literal:
    """A (possibly negated) atom with variable or constant arguments."""

    pred: str
    terms: tuple[Term, ...]
    negated: bool = False

    def variables(self) -> Iterator[Variable]:
        for t in self.terms:
            if isinstance(t, Variable):
                yield t


class Schema:
    """Entity types, predicate signatures, and the constant symbol table."""

    def __init__(self) -> None:
        self.types: list[str] = []
        self.predicates: dict[str, PredicateSchema] = {}
        self._sym_to_cid: dict[str, int] = {}
        self._symbols: list[str] = []
        self._ctypes: list[str] = []

    # -- declarations ----------------------------------------------------

    def declare_type(self, name: str) -> None:
        if not _NAME_RE.match(name):
            raise SchemaError(f"invalid type name {name!r}")
        if name in self.types:
            raise SchemaError(f"duplicate type {name!r}")
        self.types.append(name)

    def declare_pred(self, name: str, arg_types: Sequence[str]) -> PredicateSchema:
        if not _NAME_RE.match(name):
            raise SchemaError(f"invalid predicate name {name!r}")
        if name in self.predicates:
            raise SchemaError(f"duplicate predicate {name!r}")
        if len(arg_types) < 1:
            raise SchemaError(f"predicate {name!r} must have arity >= 1")
        for t in arg_types:
            if t not in self.types:
                raise SchemaError(f"unknown type {t!r} in predicate {name!r}")
        ps = PredicateSchema(name, tuple(arg_types))
        self.predicates[name] = ps
        return ps

    def pred(self, name: str) -> PredicateSchema:
        try:
            return self.predicates[name]
        except KeyError:
            raise SchemaError(f"unknown predicate {name!r}") from None

    # -- constants -------------------------------------------------------

    def intern(self, symbol: str, type_: str) -> int:
        """Return the id for `symbol`, registering it with `type_` if new.

        A symbol carries exactly one type for the lifetime of the schema.
        """
        cid = self._sym_to_cid.get(symbol)
        if cid is not None:
            if self._ctypes[cid] != type_:
                raise SchemaError(
                    f"constant {symbol!r} is a {self._ctypes[cid]}, not a {type_}"
                )
            return cid
        if not _NAME_RE.match(symbol):
            raise SchemaError(f"invalid constant name {symbol!r}")
        if type_ not in self.types:
            raise SchemaError(f"unknown type {type_!r}")
        cid = len(self._symbols)
        self._sym_to_cid[symbol] = cid
        self._symbols.append(symbol)
        self._ctypes.append(type_)
        return cid

    def constant(self, symbol: str) -> Constant:
        cid = self._sym_to_cid.get(symbol)
        if cid is None:
            raise SchemaError(f"unknown constant {symbol!r}")
        return Constant(cid, self._ctypes[cid])

    def symbol(self, cid: int) -> str:
        return self._symbols[cid]

    def type_of(self, cid: int) -> str:
        return self._ctypes[cid]

    # -- atoms and literals ----------------------------------------------

    def ground(self, pred: str, symbols: Sequence[str]) -> GroundAtom:
        """Build a ground atom, interning its constants against the schema."""
        ps = self.pred(pred)
        if len(symbols) != ps.arity:
            raise SchemaError(
                f"{pred} expects {ps.arity} arguments, got {len(symbols)}"
            )
        args = tuple(self.intern(s, t) for s, t in zip(symbols, ps.arg_types))
        return GroundAtom(pred, args)

    def check_literal(self, lit: Literal) -> None:
        ps = self.pred(lit.pred)
        if len(lit.terms) != ps.arity:
            raise SchemaError(
                f"{lit.pred} expects {ps.arity} arguments, got {len(lit.terms)}"
            )
        for i, (term, want) in enumerate(zip(lit.terms, ps.arg_types)):
            if term.type != want:
                raise SchemaError(
                    f"{lit.pred} argument {i} must be a {want}, got a {term.type}"
                )

    def atom_str(self, atom: GroundAtom) -> str:
        return f"{atom.pred}({','.join(self._symbols[a] for a in atom.args)})"


class FactBase:
    """Duplicate-free set of ground facts with per-argument indexes.

    Mutable while loading; `freeze()` sorts the index buckets (giving the
    deterministic interned-id enumeration order that queries rely on) and
    rejects further writes.  All query methods accept an optional `exclude`
    atom that is treated as absent, which implements the per-example
    leave-one-out masking used during training.
    """

    def __init__(self, schema: Schema) -> None:
        self.schema = schema
        self._facts: dict[str, set[tuple[int, ...]]] = {}
        self._index: dict[str, list[dict[int, list[tuple[int, ...]]]]] = {}
        self._sorted: dict[str, list[tuple[int, ...]]] = {}
        self._freq: dict[tuple[str, int], list[tuple[int, int]]] = {}
        self._frozen = False

    def __len__(self) -> int:
        return sum(len(s) for s in self._facts.values())

    @property
    def frozen(self) -> bool:
        return self._frozen

    def freeze(self) -> "FactBase":
        if not self._frozen:
            for pred, buckets in self._index.items():
                for by_cid in buckets:
                    for lst in by_cid.values():
                        lst.sort()
                self._sorted[pred] = sorted(self._facts[pred])
            self._frozen = True
        return self

    # -- loading ----------------------------------------------------------

    def add(self, atom: GroundAtom) -> "FactBase":
        """Insert one fact; idempotent for duplicates."""
        if self._frozen:
            raise SchemaError("fact base is frozen")
        ps = self.schema.pred(atom.pred)
        if len(atom.args) != ps.arity:
            raise SchemaError(
                f"{atom.pred} expects {ps.arity} arguments, got {len(atom.args)}"
            )
        for i, (cid, want) in enumerate(zip(atom.args, ps.arg_types)):
            got = self.schema.type_of(cid)
            if got != want:
                raise SchemaError(
                    f"{atom.pred} argument {i} must be a {want}, "
                    f"got {self.schema.symbol(cid)!r} ({got})"
                )
        facts = self._facts.setdefault(atom.pred, set())
        if atom.args in facts:
            return self
        facts.add(atom.args)
        buckets = self._index.get(atom.pred)
        if buckets is None:
            buckets = [dict() for _ in range(ps.arity)]
            self._index[atom.pred] = buckets
        for pos, cid in enumerate(atom.args):
            buckets[pos].setdefault(cid, []).append(atom.args)
        return self

    def add_symbols(self, pred: str, symbols: Sequence[str]) -> GroundAtom:
        atom = self.schema.ground(pred, symbols)
        self.add(atom)
        return atom

    # -- queries ----------------------------------------------------------

    def has(self, atom: GroundAtom, exclude: Optional[GroundAtom] = None) -> bool:
        if exclude is not None and atom == exclude:
            return False
        facts = self._facts.get(atom.pred)
        return facts is not None and atom.args in facts

    def __contains__(self, atom: GroundAtom) -> bool:
        return self.has(atom)

    def facts_of(self, pred: str) -> list[tuple[int, ...]]:
        """All facts of a predicate in interned-id order."""
        if self._frozen:
            return self._sorted.get(pred, [])
        return sorted(self._facts.get(pred, ()))

    def bucket(self, pred: str, pos: int, cid: int) -> list[tuple[int, ...]]:
        """Facts of `pred` holding constant `cid` at position `pos`."""
        buckets = self._index.get(pred)
        if buckets is None:
            return []
        return buckets[pos].get(cid, [])

    def const_frequency(self, pred: str, pos: int) -> list[tuple[int, int]]:
        """Constants observed at `pred` position `pos` as (cid, count), most
        frequent first, ties by ascending id."""
        key = (pred, pos)
        cached = self._freq.get(key)
        if cached is not None and self._frozen:
            return cached
        buckets = self._index.get(pred)
        if buckets is None:
            out: list[tuple[int, int]] = []
        else:
            out = sorted(
                ((cid, len(lst)) for cid, lst in buckets[pos].items()),
                key=lambda it: (-it[1], it[0]),
            )
        if self._frozen:
            self._freq[key] = out
        return out

    def atoms(self) -> Iterator[GroundAtom]:
        """All facts as atoms, ordered by predicate name then argument ids."""
        for pred in sorted(self._facts):
            for args in sorted(self._facts[pred]):
                yield GroundAtom(pred, args)


# ---------------------------------------------------------------------------
# Conjunction satisfaction
# ---------------------------------------------------------------------------

# Compiled step kinds: ("chk", pred, argspec) membership test of a literal
# whose arguments are all bound; ("neg", pred, argspec) the same but required
# absent; ("join", pred, argspec, anchor_pos) backtracking enumeration where
# `anchor_pos` is the first bound position (or -1 to scan every fact).
# argspec entries: ("s", slot) read a bound slot, ("n", slot) bind a fresh
# slot, ("c", cid) a constant.


@lru_cache(maxsize=8192)
def _compile(literals: tuple[Literal, ...], root_vars: tuple[Variable, ...], arities: tuple[tuple[str, int], ...]):
    # `arities` is only part of the key so plans from one schema are not
    # reused against another with different signatures.
    del arities
    slots: dict[Variable, int] = {}
    types: dict[str, str] = {}
    for v in root_vars:
        if v.name in types and types[v.name] != v.type:
            raise SchemaError(f"variable {v.name} bound with two types")
        types[v.name] = v.type
        slots[v] = len(slots)
    steps = []
    for lit in literals:
        argspec = []
        fresh = []
        anchor = -1
        for pos, term in enumerate(lit.terms):
            if isinstance(term, Constant):
                argspec.append(("c", term.cid))
                if anchor < 0:
                    anchor = pos
            else:
                prior = types.get(term.name)
                if prior is not None and prior != term.type:
                    raise SchemaError(
                        f"variable {term.name} used as {term.type}, "
                        f"previously {prior}"
                    )
                if term in slots:
                    argspec.append(("s", slots[term]))
                    if anchor < 0:
                        anchor = pos
                elif any(k == "n" and s == slots_tmp for k, s in argspec
                         for slots_tmp in [slots.get(term, -1)]):
                    argspec.append(("s", slots[term]))
                else:
                    if lit.negated:
                        raise ClauseError(
                            f"negated literal {lit.pred} has unbound "
                            f"variable {term.name}"
                        )
                    types[term.name] = term.type
                    slot = len(slots)
                    slots[term] = slot
                    argspec.append(("n", slot))
                    fresh.append(slot)
        if lit.negated:
            steps.append(("neg", lit.pred, tuple(argspec), -1))
        elif not fresh:
            steps.append(("chk", lit.pred, tuple(argspec), -1))
        else:
            steps.append(("join", lit.pred, tuple(argspec), anchor))
    return tuple(steps), dict(slots), len(slots)


def _compile_for(fb: FactBase, literals: Sequence[Literal], binding_vars: Iterable[Variable]):
    lits = tuple(literals)
    for lit in lits:
        fb.schema.check_literal(lit)
    root = tuple(sorted(binding_vars, key=lambda v: (v.name, v.type)))
    arities = tuple(sorted((p.name, p.arity) for p in fb.schema.predicates.values()))
    return _compile(lits, root, arities)


def _execute(fb: FactBase, steps, slots_arr, i, exclude) -> bool:
    if i == len(steps):
        return True
    kind, pred, argspec, anchor = steps[i]
    if kind != "join":
        args = tuple(
            slots_arr[v] if k == "s" else v for k, v in argspec
        )
        present = fb.has(GroundAtom(pred, args), exclude)
        if present == (kind == "chk"):
            return _execute(fb, steps, slots_arr, i + 1, exclude)
        return False
    # join: enumerate candidate facts from the index on the first bound
    # argument, or all facts of the predicate when nothing is bound yet
    if anchor >= 0:
        k, v = argspec[anchor]
        cid = slots_arr[v] if k == "s" else v
        candidates = fb.bucket(pred, anchor, cid)
    else:
        candidates = fb.facts_of(pred)
    excl = exclude is not None and exclude.pred == pred
    for fact in candidates:
        if excl and fact == exclude.args:
            continue
        bound: list[int] = []
        ok = True
        for (k, v), cid in zip(argspec, fact):
            if k == "c":
                if cid != v:
                    ok = False
                    break
            elif k == "s":
                if slots_arr[v] != cid:
                    ok = False
                    break
            else:
                if slots_arr[v] is None:
                    slots_arr[v] = cid
                    bound.append(v)
                elif slots_arr[v] != cid:
                    ok = False
                    break
        if ok and _execute(fb, steps, slots_arr, i + 1, exclude):
            return True
        for s in bound:
            slots_arr[s] = None
    return False


def satisfiable(
    fb: FactBase,
    conjunction: Sequence[Literal],
    binding: Mapping[Variable, Union[int, Constant]],
    exclude: Optional[GroundAtom] = None,
) -> bool:
    """True iff `binding` extends to all variables so that every positive
    literal is a fact and every negated literal is not.

    Literals are processed left to right; candidate facts for a partially
    bound literal come from the index on its first bound argument.  The
    query never mutates the fact base.  `exclude`, when given, names one
    atom treated as absent for the duration of the query.
    """
    steps, slot_of, n = _compile_for(fb, conjunction, binding.keys())
    slots_arr: list[Optional[int]] = [None] * n
    for var, val in binding.items():
        cid = val.cid if isinstance(val, Constant) else val
        if fb.schema.type_of(cid) != var.type:
            raise SchemaError(
                f"binding for {var.name} must be a {var.type}, got "
                f"{fb.schema.symbol(cid)!r}"
            )
        slots_arr[slot_of[var]] = cid
    return _execute(fb, steps, slots_arr, 0, exclude)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

_FACT_RE = re.compile(
    r"^([a-zA-Z_][a-zA-Z0-9_]*)\s*\(\s*([a-zA-Z0-9_,\s]*)\s*\)\s*\.$"
)
_TYPE_RE = re.compile(r"^type\s+([a-zA-Z_][a-zA-Z0-9_]*)\s*\.$")
_PRED_RE = re.compile(
    r"^pred\s+([a-zA-Z_][a-zA-Z0-9_]*)\s*\(\s*([a-zA-Z0-9_,\s]*)\s*\)\s*\.$"
)


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0].strip()
        if line:
            yield lineno, line


def _split_args(body: str, lineno: int, path=None) -> list[str]:
    parts = [p.strip() for p in body.split(",")]
    for p in parts:
        if not _NAME_RE.match(p):
            raise ParseError(f"bad argument {p!r}", path=path, line=lineno)
    return parts


def parse_schema(text: str, path=None) -> Schema:
    """Parse `type name.` and `pred name(t1, t2).` declarations."""
    schema = Schema()
    for lineno, line in _content_lines(text):
        m = _TYPE_RE.match(line)
        if m:
            schema.declare_type(m.group(1))
            continue
        m = _PRED_RE.match(line)
        if m:
            args = _split_args(m.group(2), lineno, path)
            try:
                schema.declare_pred(m.group(1), args)
            except SchemaError as e:
                raise SchemaError(f"{path or '<schema>'}:{lineno}: {e}") from None
            continue
        raise ParseError(f"unrecognized schema line {line!r}", path=path, line=lineno)
    return schema


def serialize_schema(schema: Schema) -> str:
    lines = [f"type {t}." for t in schema.types]
    for name in schema.predicates:
        ps = schema.predicates[name]
        lines.append(f"pred {name}({', '.join(ps.arg_types)}).")
    return "\n".join(lines) + "\n"


def parse_atom_line(line: str, schema: Schema, lineno: int = 0, path=None) -> GroundAtom:
    m = _FACT_RE.match(line)
    if not m:
        raise ParseError(f"malformed fact {line!r}", path=path, line=lineno)
    pred, body = m.group(1), m.group(2)
    args = _split_args(body, lineno, path)
    try:
        return schema.ground(pred, args)
    except SchemaError as e:
        raise SchemaError(f"{path or '<facts>'}:{lineno}: {e}") from None


def parse_facts(text: str, schema: Schema, fb: Optional[FactBase] = None, path=None) -> FactBase:
    """Read one fact per line into `fb` (a fresh FactBase by default)."""
    if fb is None:
        fb = FactBase(schema)
    for lineno, line in _content_lines(text):
        fb.add(parse_atom_line(line, schema, lineno, path))
    return fb


def serialize_facts(fb: FactBase) -> str:
    schema = fb.schema
    return "".join(f"{schema.atom_str(a)}.\n" for a in fb.atoms())


def parse_atoms(text: str, schema: Schema, path=None) -> list[GroundAtom]:
    """Read a file of ground atoms (e.g. the pos/neg example lists)."""
    return [
        parse_atom_line(line, schema, lineno, path)
        for lineno, line in _content_lines(text)
    ]


def serialize_atoms(atoms: Iterable[GroundAtom], schema: Schema) -> str:
    return "".join(f"{schema.atom_str(a)}.\n" for a in atoms)
