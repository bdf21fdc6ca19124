"""Symbols, terms, positions and evaluation.

Terms are immutable and hash-consed only in the weak sense that every node
caches its hash, size and a few content flags. Equality, depth, positions
and leaf scans are iterative; the rewriting helpers (replace_at, substitute,
to_abstract, eval_concrete, eval_abstract, term_leq) recurse once per level,
so they are bounded by the interpreter recursion limit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping, Optional, Union

from src.models.errors import ArityError, InvalidPosition, MixedTermError, TermError
from src.models.lattice import INTERVALS, Interval, Lattice

Position = tuple[int, ...]

BUILTIN_ARITIES: dict[str, int] = {"+": 2, "-": 2, "*": 2, "lub": 2, "glb": 2}
INFIX_OPERATORS = frozenset({"+", "-", "*"})


class SymbolKind(Enum):
    PASSIVE = "passive"
    BUILTIN = "builtin"
    CONCRETE = "concrete"
    ABSTRACT = "abstract"
    VARIABLE = "variable"
    STATE = "state"


LEAF_KINDS = frozenset(
    {SymbolKind.CONCRETE, SymbolKind.ABSTRACT, SymbolKind.VARIABLE, SymbolKind.STATE}
)


@dataclass(frozen=True)
class Symbol:
    """Function symbol, constant, variable or automaton state"""

    name: str
    arity: int
    kind: SymbolKind
    value: Union[int, Interval, None] = None

    def __post_init__(self):
        if self.kind in LEAF_KINDS and self.arity != 0:
            raise ArityError(f"{self.kind.value} symbol {self.name!r} must have arity 0")
        if self.kind is SymbolKind.BUILTIN and BUILTIN_ARITIES.get(self.name) != self.arity:
            raise ArityError(f"Unknown builtin operator {self.name}/{self.arity}")


_FLAG_VAR = 1
_FLAG_CONCRETE = 2
_FLAG_ABSTRACT = 4
_FLAG_OP = 8
_FLAG_STATE = 16
_FLAG_PASSIVE = 32

_KIND_FLAGS = {
    SymbolKind.VARIABLE: _FLAG_VAR,
    SymbolKind.CONCRETE: _FLAG_CONCRETE,
    SymbolKind.ABSTRACT: _FLAG_ABSTRACT,
    SymbolKind.BUILTIN: _FLAG_OP,
    SymbolKind.STATE: _FLAG_STATE,
    SymbolKind.PASSIVE: _FLAG_PASSIVE,
}


@dataclass(frozen=True, eq=False)
class Term:
    """Tree over symbols; `children` length always equals the root arity"""

    root: Symbol
    children: tuple["Term", ...] = ()
    _hash: int = field(init=False, repr=False)
    _size: int = field(init=False, repr=False)
    _flags: int = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.children) != self.root.arity:
            raise ArityError(
                f"{self.root.name} expects {self.root.arity} arguments, got {len(self.children)}"
            )
        flags = _KIND_FLAGS[self.root.kind]
        size = 1
        for child in self.children:
            flags |= child._flags
            size += child._size
        if flags & _FLAG_CONCRETE and flags & _FLAG_ABSTRACT:
            raise MixedTermError("Term mixes concrete integers and lattice constants")
        object.__setattr__(self, "_flags", flags)
        object.__setattr__(self, "_size", size)
        object.__setattr__(
            self, "_hash", hash((self.root, tuple(c._hash for c in self.children)))
        )

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, Term):
            return NotImplemented
        stack = [(self, other)]
        while stack:
            a, b = stack.pop()
            if a is b:
                continue
            if a._hash != b._hash or a._size != b._size or a.root != b.root:
                return False
            stack.extend(zip(a.children, b.children))
        return True

    @property
    def size(self) -> int:
        return self._size

    @property
    def kind(self) -> SymbolKind:
        return self.root.kind

    @property
    def name(self) -> str:
        return self.root.name

    @property
    def is_ground(self) -> bool:
        return not self._flags & _FLAG_VAR

    @property
    def has_ops(self) -> bool:
        return bool(self._flags & _FLAG_OP)

    @property
    def has_states(self) -> bool:
        return bool(self._flags & _FLAG_STATE)

    @property
    def has_concrete(self) -> bool:
        return bool(self._flags & _FLAG_CONCRETE)

    @property
    def has_abstract(self) -> bool:
        return bool(self._flags & _FLAG_ABSTRACT)

    @property
    def has_passive(self) -> bool:
        return bool(self._flags & _FLAG_PASSIVE)

    @property
    def is_variable(self) -> bool:
        return self.root.kind is SymbolKind.VARIABLE

    @property
    def is_constant(self) -> bool:
        """Concrete integer or lattice element leaf"""
        return self.root.kind in (SymbolKind.CONCRETE, SymbolKind.ABSTRACT)

    def depth(self) -> int:
        best = 0
        stack = [(self, 1)]
        while stack:
            term, d = stack.pop()
            best = max(best, d)
            stack.extend((c, d + 1) for c in term.children)
        return best

    def __str__(self) -> str:
        return format_term(self)

    def __repr__(self) -> str:
        return f"Term({format_term(self)})"


# constructors


def num(k: int) -> Term:
    return Term(Symbol(str(k), 0, SymbolKind.CONCRETE, k))


def lat(value: Interval) -> Term:
    return Term(Symbol(str(value), 0, SymbolKind.ABSTRACT, value))


def atom(k: int) -> Term:
    return lat(Interval.atom(k))


def var(name: str) -> Term:
    return Term(Symbol(name, 0, SymbolKind.VARIABLE))


def state(name: str) -> Term:
    return Term(Symbol(name, 0, SymbolKind.STATE))


def app(name: str, *children: Term) -> Term:
    return Term(Symbol(name, len(children), SymbolKind.PASSIVE), tuple(children))


def op(name: str, left: Term, right: Term) -> Term:
    return Term(Symbol(name, 2, SymbolKind.BUILTIN), (left, right))


def format_term(term: Term) -> str:
    root = term.root
    if root.kind is SymbolKind.ABSTRACT:
        return str(root.value)
    if root.kind is SymbolKind.CONCRETE:
        return str(root.value)
    if not term.children:
        return root.name
    if root.kind is SymbolKind.BUILTIN and root.name in INFIX_OPERATORS:
        left, right = (
            f"({format_term(c)})" if c.kind is SymbolKind.BUILTIN and c.name in INFIX_OPERATORS
            else format_term(c)
            for c in term.children
        )
        return f"{left} {root.name} {right}"
    return f"{root.name}({', '.join(format_term(c) for c in term.children)})"


# positions


def positions(term: Term) -> Iterator[Position]:
    """Positions in pre-order, root first"""
    stack: list[tuple[Term, Position]] = [(term, ())]
    while stack:
        current, pos = stack.pop()
        yield pos
        for i in range(len(current.children), 0, -1):
            stack.append((current.children[i - 1], pos + (i,)))


def subterm_at(term: Term, pos: Position) -> Term:
    current = term
    for index in pos:
        if not 1 <= index <= len(current.children):
            raise InvalidPosition(f"Position {pos} is not valid in {term}")
        current = current.children[index - 1]
    return current


def replace_at(term: Term, pos: Position, replacement: Term) -> Term:
    if not pos:
        return replacement
    index = pos[0]
    if not 1 <= index <= len(term.children):
        raise InvalidPosition(f"Position {pos} is not valid in {term}")
    children = list(term.children)
    children[index - 1] = replace_at(children[index - 1], pos[1:], replacement)
    return Term(term.root, tuple(children))


def _leaves(term: Term, kind: SymbolKind) -> Iterator[Term]:
    stack = [term]
    while stack:
        current = stack.pop()
        if current.kind is kind:
            yield current
        stack.extend(current.children)


def variables(term: Term) -> frozenset[str]:
    if term.is_ground:
        return frozenset()
    return frozenset(leaf.name for leaf in _leaves(term, SymbolKind.VARIABLE))


def variable_occurrences(term: Term) -> list[str]:
    return [leaf.name for leaf in _leaves(term, SymbolKind.VARIABLE)]


def substitute(term: Term, binding: Mapping[str, Term]) -> Term:
    """Replace variables by the terms they are bound to; unbound variables stay."""
    if term.is_ground:
        return term
    if term.is_variable:
        return binding.get(term.name, term)
    return Term(term.root, tuple(substitute(c, binding) for c in term.children))


def to_abstract(term: Term, lattice: Lattice = INTERVALS) -> Term:
    """Abstract every concrete integer leaf to its atom."""
    if not term.has_concrete:
        return term
    if term.kind is SymbolKind.CONCRETE:
        return lat(lattice.alpha(term.root.value))
    return Term(term.root, tuple(to_abstract(c, lattice) for c in term.children))


# evaluation


def _apply_concrete(name: str, a: int, b: int) -> Optional[int]:
    if name == "+":
        return a + b
    if name == "-":
        return a - b
    if name == "*":
        return a * b
    return None


def eval_concrete(term: Term) -> Term:
    """Innermost evaluation of every maximal integer/operator subterm."""
    if term.has_abstract:
        raise TermError("eval_concrete expects a term without lattice constants")
    if not term.has_ops:
        return term
    children = tuple(eval_concrete(c) for c in term.children)
    if term.kind is SymbolKind.BUILTIN and all(c.kind is SymbolKind.CONCRETE for c in children):
        value = _apply_concrete(term.name, *(c.root.value for c in children))
        if value is not None:
            return num(value)
    return Term(term.root, children)


def eval_abstract(term: Term, lattice: Lattice = INTERVALS) -> Term:
    """Evaluate interpreted subterms with the lattice's abstract operators."""
    if term.has_concrete:
        term = to_abstract(term, lattice)
    if not term.has_ops:
        return term
    children = tuple(eval_abstract(c, lattice) for c in term.children)
    if term.kind is SymbolKind.BUILTIN and all(c.kind is SymbolKind.ABSTRACT for c in children):
        operator = lattice.operators.get(term.name)
        if operator is not None:
            return lat(operator(*(c.root.value for c in children)))
    return Term(term.root, children)


def abstract_value(term: Term, lattice: Lattice = INTERVALS) -> Optional[Interval]:
    """Lattice value of a fully interpreted term, None otherwise."""
    if term.has_passive or term.has_states or not term.is_ground:
        return None
    evaluated = eval_abstract(term, lattice)
    if evaluated.kind is SymbolKind.ABSTRACT:
        return evaluated.root.value
    return None


def term_leq(s: Term, t: Term, lattice: Lattice = INTERVALS) -> bool:
    """The term ordering: interpreted parts compared by value, passive parts pointwise."""
    vs, vt = abstract_value(s, lattice), abstract_value(t, lattice)
    if vs is not None or vt is not None:
        return vs is not None and vt is not None and lattice.leq(vs, vt)
    if s.root != t.root:
        return False
    return all(term_leq(a, b, lattice) for a, b in zip(s.children, t.children))
