"""Conditional rewrite rules, predicates and approximation equations"""

from __future__ import annotations

import operator
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Iterator, Optional

from src.models.errors import InvalidRule
from src.models.term import SymbolKind, Term, variable_occurrences, variables


class Relation(Enum):
    LT = "<"
    LE = "<="
    GT = ">"
    GE = ">="
    EQ = "="
    NE = "!="

    @classmethod
    def parse(cls, text: str) -> "Relation":
        aliases = {"==": "=", "≤": "<=", "≥": ">=", "≠": "!=", "<>": "!="}
        return cls(aliases.get(text, text))

    def holds(self, left: int, right: int) -> bool:
        return _COMPARATORS[self](left, right)


_COMPARATORS: dict[Relation, Callable[[int, int], bool]] = {
    Relation.LT: operator.lt,
    Relation.LE: operator.le,
    Relation.GT: operator.gt,
    Relation.GE: operator.ge,
    Relation.EQ: operator.eq,
    Relation.NE: operator.ne,
}


@dataclass(frozen=True)
class Predicate:
    """Binary comparison between two arithmetic expressions"""

    relation: Relation
    lhs: Term
    rhs: Term

    @property
    def variables(self) -> frozenset[str]:
        return variables(self.lhs) | variables(self.rhs)

    def __str__(self) -> str:
        return f"{self.lhs} {self.relation.value} {self.rhs}"


def _condition_vars(conditions: tuple[Predicate, ...]) -> frozenset[str]:
    found: frozenset[str] = frozenset()
    for predicate in conditions:
        found |= predicate.variables
    return found


def _format_conditions(conditions: tuple[Predicate, ...]) -> str:
    if not conditions:
        return ""
    return " <= " + " and ".join(str(c) for c in conditions)


@dataclass(frozen=True)
class RewriteRule:
    """l -> r <= c1 and ... and cn, with l left-linear over passive symbols"""

    lhs: Term
    rhs: Term
    conditions: tuple[Predicate, ...] = ()
    name: Optional[str] = None

    def __post_init__(self):
        if self.lhs.is_variable:
            raise InvalidRule(f"Left-hand side of {self} is a variable")
        stack = [self.lhs]
        while stack:
            current = stack.pop()
            if current.kind not in (SymbolKind.PASSIVE, SymbolKind.VARIABLE):
                raise InvalidRule(
                    f"Left-hand side of {self} may only use passive symbols and variables"
                )
            stack.extend(current.children)
        occurrences = variable_occurrences(self.lhs)
        if len(occurrences) != len(set(occurrences)):
            raise InvalidRule(f"Rule {self} is not left-linear")
        lhs_vars = frozenset(occurrences)
        extra = variables(self.rhs) - lhs_vars
        if extra:
            raise InvalidRule(f"Rule {self} introduces variables {sorted(extra)}")
        unbound = _condition_vars(self.conditions) - lhs_vars
        if unbound:
            raise InvalidRule(f"Conditions of {self} use unbound variables {sorted(unbound)}")

    @property
    def variables(self) -> frozenset[str]:
        return variables(self.lhs)

    def __str__(self) -> str:
        prefix = f"{self.name}: " if self.name else ""
        return f"{prefix}{self.lhs} -> {self.rhs}{_format_conditions(self.conditions)}"


@dataclass(frozen=True)
class Equation:
    """u = v <= c; merges the states recognizing u and v when c is satisfiable"""

    u: Term
    v: Term
    conditions: tuple[Predicate, ...] = ()

    def __post_init__(self):
        unbound = _condition_vars(self.conditions) - variables(self.u) - variables(self.v)
        if unbound:
            raise InvalidRule(f"Equation {self} guards unbound variables {sorted(unbound)}")

    def __str__(self) -> str:
        return f"{self.u} = {self.v}{_format_conditions(self.conditions)}"


class _NamedCollection:
    __slots__ = ("name", "_items")

    def __init__(self, name: str, items: Iterable = ()):
        self.name = name
        self._items = tuple(items)

    def __iter__(self) -> Iterator:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __eq__(self, other: object) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        return self.name == other.name and self._items == other._items

    def __hash__(self) -> int:
        return hash((type(self).__name__, self.name, self._items))

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r}, {len(self._items)} entries)"


class TRS(_NamedCollection):
    """Named, ordered list of rewrite rules"""

    @property
    def rules(self) -> tuple[RewriteRule, ...]:
        return self._items


class EquationSet(_NamedCollection):
    """Named, ordered list of approximation equations"""

    @property
    def equations(self) -> tuple[Equation, ...]:
        return self._items
