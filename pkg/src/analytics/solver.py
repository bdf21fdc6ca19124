"""Linear constraint solving over interval boxes.

Rule conditions are turned into linear constraints and intersected with the
box given by the lattice values bound to each variable. Projection onto each
variable uses Fourier-Motzkin elimination over exact rationals; the projected
bounds are then rounded inwards to integers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterable, Mapping, Optional, Union

import structlog

from src.models.automaton import LTA, state_key
from src.models.errors import NonLinearConstraint
from src.models.lattice import NEG_INF, POS_INF, Interval
from src.models.rewriting import Predicate, Relation
from src.models.term import SymbolKind, Term

logger = structlog.get_logger()

Box = dict[str, Interval]
Binding = dict[str, Union[str, Interval]]


@dataclass(frozen=True)
class LinearConstraint:
    """sum(coefficient * variable) <relation> bound"""

    coefficients: tuple[tuple[str, Fraction], ...]
    relation: Relation
    bound: Fraction

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(name for name, _ in self.coefficients)

    def holds(self, point: Mapping[str, int]) -> bool:
        total = sum(c * point[name] for name, c in self.coefficients)
        return _RATIONAL_CHECKS[self.relation](total, self.bound)


_RATIONAL_CHECKS = {
    Relation.LT: lambda x, b: x < b,
    Relation.LE: lambda x, b: x <= b,
    Relation.GT: lambda x, b: x > b,
    Relation.GE: lambda x, b: x >= b,
    Relation.EQ: lambda x, b: x == b,
    Relation.NE: lambda x, b: x != b,
}


def _linearize(term: Term) -> tuple[dict[str, Fraction], Fraction]:
    kind = term.kind
    if kind is SymbolKind.VARIABLE:
        return {term.name: Fraction(1)}, Fraction(0)
    if kind is SymbolKind.CONCRETE:
        return {}, Fraction(term.root.value)
    if kind is SymbolKind.BUILTIN and term.name in ("+", "-", "*"):
        (lc, lk), (rc, rk) = (_linearize(c) for c in term.children)
        if term.name == "*":
            if lc and rc:
                raise NonLinearConstraint(f"{term} multiplies two variables")
            coeffs, scale = (rc, lk) if not lc else (lc, rk)
            return {v: c * scale for v, c in coeffs.items() if c * scale}, lk * rk
        sign = 1 if term.name == "+" else -1
        merged = dict(lc)
        for v, c in rc.items():
            merged[v] = merged.get(v, Fraction(0)) + sign * c
        return {v: c for v, c in merged.items() if c}, lk + sign * rk
    raise NonLinearConstraint(f"{term} is not a linear arithmetic expression")


@dataclass(frozen=True)
class ConstraintSystem:
    constraints: tuple[LinearConstraint, ...] = ()

    @classmethod
    def from_predicates(cls, predicates: Iterable[Predicate]) -> "ConstraintSystem":
        """
        Rewrite every comparison as sum(a_i * x_i) <relation> b

        Raises:
            NonLinearConstraint: a side multiplies variables or uses a non-arithmetic symbol
        """
        constraints = []
        for predicate in predicates:
            left, left_k = _linearize(predicate.lhs)
            right, right_k = _linearize(predicate.rhs)
            coeffs = dict(left)
            for v, c in right.items():
                coeffs[v] = coeffs.get(v, Fraction(0)) - c
            constraints.append(
                LinearConstraint(
                    tuple(sorted((v, c) for v, c in coeffs.items() if c)),
                    predicate.relation,
                    right_k - left_k,
                )
            )
        return cls(tuple(constraints))

    @property
    def variables(self) -> frozenset[str]:
        found: frozenset[str] = frozenset()
        for c in self.constraints:
            found |= c.variables
        return found

    def holds(self, point: Mapping[str, int]) -> bool:
        return all(c.holds(point) for c in self.constraints)


# An inequality sum(a_i * x_i) <= b, coefficients keyed by variable name
_Row = tuple[dict[str, Fraction], Fraction]


def _integral(row: _Row) -> _Row:
    coeffs, bound = row
    scale = 1
    for value in list(coeffs.values()) + [bound]:
        scale = scale * value.denominator // math.gcd(scale, value.denominator)
    return {v: c * scale for v, c in coeffs.items()}, bound * scale


def _rows(system: ConstraintSystem, strict_int: bool) -> list[_Row]:
    pending: list[tuple[_Row, bool]] = []
    for c in system.constraints:
        coeffs = dict(c.coefficients)
        negated = {v: -a for v, a in coeffs.items()}
        if c.relation is Relation.NE:
            continue
        if c.relation in (Relation.LE, Relation.LT, Relation.EQ):
            pending.append(((coeffs, c.bound), c.relation is Relation.LT))
        if c.relation in (Relation.GE, Relation.GT, Relation.EQ):
            pending.append(((negated, -c.bound), c.relation is Relation.GT))
    result: list[_Row] = []
    for (coeffs, bound), strict in pending:
        if strict and strict_int:
            coeffs, bound = _integral((coeffs, bound))
            bound = Fraction(math.ceil(bound) - 1)
        result.append((coeffs, bound))
    return result


def _row_key(row: _Row) -> tuple:
    coeffs, bound = row
    return (tuple(sorted(coeffs.items())), bound)


def _eliminate(rows: list[_Row], name: str) -> list[_Row]:
    positive, negative, rest = [], [], []
    for row in rows:
        a = row[0].get(name, Fraction(0))
        (positive if a > 0 else negative if a < 0 else rest).append(row)
    for pc, pb in positive:
        for nc, nb in negative:
            p, n = pc[name], -nc[name]
            coeffs: dict[str, Fraction] = {}
            for v in set(pc) | set(nc):
                if v == name:
                    continue
                value = pc.get(v, Fraction(0)) * n + nc.get(v, Fraction(0)) * p
                if value:
                    coeffs[v] = value
            rest.append((coeffs, pb * n + nb * p))
    unique = {_row_key(r): r for r in rest}
    return list(unique.values())


def _project(rows: list[_Row], target: str, others: list[str]) -> Optional[tuple[Fraction | float, Fraction | float]]:
    for name in others:
        rows = _eliminate(rows, name)
    lo: Fraction | float = NEG_INF
    hi: Fraction | float = POS_INF
    for coeffs, bound in rows:
        a = coeffs.get(target, Fraction(0))
        if a > 0:
            hi = min(hi, bound / a)
        elif a < 0:
            lo = max(lo, bound / a)
        elif bound < 0:
            return None
    return lo, hi


def solve_box(
    system: ConstraintSystem, box: Mapping[str, Interval], strict_int: bool = False
) -> Optional[Box]:
    """
    Tighten `box` to the constraints

    Strict inequalities are read as their closure unless `strict_int` is set,
    in which case they are first tightened by one integer unit. Disequalities
    never narrow the box.

    Args:
        system: Linear constraints over the box variables
        box: Interval per variable; variables missing from it range over all integers
        strict_int: Tighten strict inequalities to the integers before projecting

    Returns:
        The tightened box, or None when no point satisfies the constraints
    """
    names = sorted(set(box) | system.variables)
    rows = _rows(system, strict_int)
    for name in names:
        value = box.get(name, Interval.top())
        if value.is_bottom:
            return None
        if value.lo != NEG_INF:
            rows.append(({name: Fraction(-1)}, Fraction(-value.lo)))
        if value.hi != POS_INF:
            rows.append(({name: Fraction(1)}, Fraction(value.hi)))
    if not names:
        return {} if all(bound >= 0 for _, bound in rows) else None
    solved: Box = {}
    for name in names:
        bounds = _project(rows, name, [n for n in names if n != name])
        if bounds is None:
            return None
        lo, hi = bounds
        lo_int = lo if lo == NEG_INF else math.ceil(lo)
        hi_int = hi if hi == POS_INF else math.floor(hi)
        if lo_int > hi_int:
            return None
        solved[name] = Interval(lo_int, hi_int)
    return solved


def satisfiable(
    system: ConstraintSystem, box: Mapping[str, Interval], strict_int: bool = False
) -> bool:
    return solve_box(system, box, strict_int) is not None


def binding_key(binding: Mapping[str, Union[str, Interval]]) -> tuple:
    parts = []
    for name in sorted(binding):
        value = binding[name]
        if isinstance(value, Interval):
            parts.append((name, 1, (), value.sort_key()))
        else:
            parts.append((name, 0, state_key(value), ()))
    return tuple(parts)


def solve(
    sigma: Mapping[str, str], a: LTA, system: ConstraintSystem, strict_int: bool = False
) -> list[Binding]:
    """
    Restrict a state substitution to the constraints

    Every combination of lambda values reaching the bound states is solved
    separately. Constrained variables are rebound to their solved interval;
    the others keep their state.
    """
    constrained = sorted(system.variables & set(sigma))
    if not system.constraints:
        return [dict(sigma)]
    choices = []
    for name in constrained:
        values = a.index.lambda_values(sigma[name])
        if not values:
            return []
        choices.append(values)
    results: dict[tuple, Binding] = {}
    for values in product(*choices):
        solved = solve_box(system, dict(zip(constrained, values)), strict_int)
        if solved is None:
            continue
        binding: Binding = dict(sigma)
        for name in constrained:
            binding[name] = solved[name]
        results.setdefault(binding_key(binding), binding)
    logger.debug("Solved conditions", candidates=len(results), variables=constrained)
    return [results[k] for k in sorted(results)]
