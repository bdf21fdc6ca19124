"""Abstract lattices labelling automaton leaves.

The working domain is the lattice of integer intervals with infinite bounds.
A three-element powerset lattice is shipped next to it so that lattice laws
can be checked exhaustively in tests.
"""

from __future__ import annotations

import math
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from itertools import count, islice
from typing import Callable, Generic, Iterable, Iterator, Optional, TypeVar, Union

from src.models.errors import PartitionError

Bound = Union[int, float]
NEG_INF: float = -math.inf
POS_INF: float = math.inf

E = TypeVar("E")


def _check_bound(value: Bound) -> None:
    if isinstance(value, float) and not math.isinf(value):
        raise ValueError(f"Interval bounds must be integers or infinite, got {value!r}")


def _mul_bound(x: Bound, y: Bound) -> Bound:
    # 0 * inf = 0 in endpoint arithmetic
    if x == 0 or y == 0:
        return 0
    return x * y


def bound_text(value: Bound) -> str:
    if value == POS_INF:
        return "+inf"
    if value == NEG_INF:
        return "-inf"
    return str(value)


@dataclass(frozen=True)
class Interval:
    """Closed integer interval; infinite bounds allowed. Bottom is (+inf, -inf)."""

    lo: Bound
    hi: Bound

    def __post_init__(self):
        _check_bound(self.lo)
        _check_bound(self.hi)
        if self.lo == POS_INF and self.hi == NEG_INF:
            return
        if self.lo == POS_INF or self.hi == NEG_INF or self.lo > self.hi:
            raise ValueError(f"Invalid interval bounds ({self.lo}, {self.hi}); use Interval.of()")

    @classmethod
    def of(cls, lo: Bound, hi: Bound) -> "Interval":
        """Build [lo, hi], collapsing empty ranges to Bottom."""
        if lo == POS_INF or hi == NEG_INF or lo > hi:
            return BOTTOM
        return cls(lo, hi)

    @classmethod
    def atom(cls, k: int) -> "Interval":
        return cls(k, k)

    @classmethod
    def top(cls) -> "Interval":
        return TOP

    @classmethod
    def bottom(cls) -> "Interval":
        return BOTTOM

    @property
    def is_bottom(self) -> bool:
        return self.lo == POS_INF

    @property
    def is_atom(self) -> bool:
        return not self.is_bottom and self.lo == self.hi

    @property
    def is_finite(self) -> bool:
        return not self.is_bottom and not math.isinf(self.lo) and not math.isinf(self.hi)

    def contains(self, k: int) -> bool:
        return not self.is_bottom and self.lo <= k <= self.hi

    def leq(self, other: "Interval") -> bool:
        if self.is_bottom:
            return True
        if other.is_bottom:
            return False
        return other.lo <= self.lo and self.hi <= other.hi

    def lub(self, other: "Interval") -> "Interval":
        if self.is_bottom:
            return other
        if other.is_bottom:
            return self
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def glb(self, other: "Interval") -> "Interval":
        if self.is_bottom or other.is_bottom:
            return BOTTOM
        return Interval.of(max(self.lo, other.lo), min(self.hi, other.hi))

    def widen(self, other: "Interval") -> "Interval":
        """Standard interval widening: unstable bounds jump to infinity."""
        if self.is_bottom:
            return other
        if other.is_bottom:
            return self
        lo = self.lo if other.lo >= self.lo else NEG_INF
        hi = self.hi if other.hi <= self.hi else POS_INF
        return Interval(lo, hi)

    def minus(self, others: Iterable["Interval"]) -> list["Interval"]:
        """Set difference as a sorted list of disjoint intervals."""
        if self.is_bottom:
            return []
        pieces = sorted((o for o in others if not o.glb(self).is_bottom), key=Interval.sort_key)
        result = []
        cursor = self.lo
        for piece in pieces:
            if piece.lo > cursor:
                result.append(Interval.of(cursor, piece.lo - 1))
            if piece.hi == POS_INF:
                return [r for r in result if not r.is_bottom]
            cursor = max(cursor, piece.hi + 1)
            if cursor > self.hi:
                return [r for r in result if not r.is_bottom]
        result.append(Interval.of(cursor, self.hi))
        return [r for r in result if not r.is_bottom]

    # abstract arithmetic

    def add(self, other: "Interval") -> "Interval":
        if self.is_bottom or other.is_bottom:
            return BOTTOM
        return Interval(self.lo + other.lo, self.hi + other.hi)

    def sub(self, other: "Interval") -> "Interval":
        if self.is_bottom or other.is_bottom:
            return BOTTOM
        return Interval(self.lo - other.hi, self.hi - other.lo)

    def mul(self, other: "Interval") -> "Interval":
        if self.is_bottom or other.is_bottom:
            return BOTTOM
        products = [
            _mul_bound(a, b) for a in (self.lo, self.hi) for b in (other.lo, other.hi)
        ]
        return Interval(min(products), max(products))

    def sort_key(self) -> tuple[Bound, Bound]:
        return (self.lo, self.hi)

    def display(self, open_lo: bool = False, open_hi: bool = False) -> str:
        """Render the interval, optionally with open finite bounds (]0,... for [1,...)."""
        if self.is_bottom:
            return "bot"
        if self.lo == NEG_INF:
            left = "]-inf"
        elif open_lo:
            left = f"]{self.lo - 1}"
        else:
            left = f"[{self.lo}"
        if self.hi == POS_INF:
            right = "+inf["
        elif open_hi:
            right = f"{self.hi + 1}["
        else:
            right = f"{self.hi}]"
        return f"{left},{right}"

    def __str__(self) -> str:
        return self.display()

    def __repr__(self) -> str:
        return f"Interval({self.display()})"


BOTTOM = Interval(POS_INF, NEG_INF)
TOP = Interval(NEG_INF, POS_INF)

_INTERVAL_RE = re.compile(
    r"^\s*([\[\]])\s*([+-]?(?:inf|\d+))\s*,\s*([+-]?(?:inf|\d+))\s*([\[\]])\s*$"
)


def _parse_bound(text: str) -> Bound:
    if text.lstrip("+-") == "inf":
        return NEG_INF if text.startswith("-") else POS_INF
    return int(text)


def parse_interval(text: str) -> Interval:
    """Parse `[a,b]`, `]a,b]`, `[a,b[`, `]a,b[` or `bot` into a canonical closed interval."""
    if text.strip() == "bot":
        return BOTTOM
    match = _INTERVAL_RE.match(text)
    if match is None:
        raise ValueError(f"Not an interval: {text!r}")
    left, lo_text, hi_text, right = match.groups()
    lo, hi = _parse_bound(lo_text), _parse_bound(hi_text)
    if lo == POS_INF or hi == NEG_INF:
        raise ValueError(f"Interval bounds out of order: {text!r}")
    if left == "]" and not math.isinf(lo):
        lo += 1
    if right == "[" and not math.isinf(hi):
        hi -= 1
    return Interval.of(lo, hi)


@dataclass(frozen=True)
class AtomEnumeration(Generic[E]):
    """Bounded slice of the atoms below a lattice element"""

    atoms: tuple[E, ...]
    truncated: bool


def _interval_atoms(value: Interval) -> Iterator[int]:
    if value.is_bottom:
        return iter(())
    if value.lo != NEG_INF and value.hi != POS_INF:
        return iter(range(int(value.lo), int(value.hi) + 1))
    if value.lo != NEG_INF:
        return count(int(value.lo))
    if value.hi != POS_INF:
        return count(int(value.hi), -1)

    def spiral() -> Iterator[int]:
        yield 0
        for k in count(1):
            yield k
            yield -k

    return spiral()


def atoms_within(value: Interval, cap: int) -> AtomEnumeration[Interval]:
    """At most `cap` atoms below `value`, enumerated from its finite end(s)."""
    taken = list(islice(_interval_atoms(value), cap + 1))
    truncated = len(taken) > cap
    return AtomEnumeration(tuple(Interval.atom(k) for k in taken[:cap]), truncated)


class Lattice(ABC, Generic[E]):
    """Operations an abstract domain must provide to label automaton leaves"""

    name: str

    @abstractmethod
    def bottom(self) -> E: ...

    @abstractmethod
    def top(self) -> E: ...

    @abstractmethod
    def leq(self, a: E, b: E) -> bool: ...

    @abstractmethod
    def lub(self, a: E, b: E) -> E: ...

    @abstractmethod
    def glb(self, a: E, b: E) -> E: ...

    @abstractmethod
    def widen(self, a: E, b: E) -> E: ...

    @abstractmethod
    def alpha(self, k: int) -> E: ...

    @abstractmethod
    def atoms_within(self, value: E, cap: int) -> AtomEnumeration[E]: ...

    @property
    @abstractmethod
    def operators(self) -> dict[str, Callable[[E, E], E]]: ...


class IntervalLattice(Lattice[Interval]):
    """Integer intervals with infinite bounds"""

    name = "interval-int"

    def bottom(self) -> Interval:
        return BOTTOM

    def top(self) -> Interval:
        return TOP

    def leq(self, a: Interval, b: Interval) -> bool:
        return a.leq(b)

    def lub(self, a: Interval, b: Interval) -> Interval:
        return a.lub(b)

    def glb(self, a: Interval, b: Interval) -> Interval:
        return a.glb(b)

    def widen(self, a: Interval, b: Interval) -> Interval:
        return a.widen(b)

    def alpha(self, k: int) -> Interval:
        return Interval.atom(k)

    def atoms_within(self, value: Interval, cap: int) -> AtomEnumeration[Interval]:
        return atoms_within(value, cap)

    @property
    def operators(self) -> dict[str, Callable[[Interval, Interval], Interval]]:
        return {
            "+": Interval.add,
            "-": Interval.sub,
            "*": Interval.mul,
            "lub": Interval.lub,
            "glb": Interval.glb,
        }


class PowersetLattice(Lattice[frozenset]):
    """Subsets of a small universe ordered by inclusion; widening is union."""

    name = "powerset"

    def __init__(self, universe: tuple[str, ...] = ("a", "b", "c")):
        self.universe = universe

    def bottom(self) -> frozenset:
        return frozenset()

    def top(self) -> frozenset:
        return frozenset(self.universe)

    def leq(self, a: frozenset, b: frozenset) -> bool:
        return a <= b

    def lub(self, a: frozenset, b: frozenset) -> frozenset:
        return a | b

    def glb(self, a: frozenset, b: frozenset) -> frozenset:
        return a & b

    def widen(self, a: frozenset, b: frozenset) -> frozenset:
        return a | b

    def alpha(self, k: int) -> frozenset:
        return frozenset({self.universe[k % len(self.universe)]})

    def atoms_within(self, value: frozenset, cap: int) -> AtomEnumeration[frozenset]:
        atoms = [frozenset({x}) for x in self.universe if x in value]
        return AtomEnumeration(tuple(atoms[:cap]), len(atoms) > cap)

    def elements(self) -> list[frozenset]:
        """Every element of the lattice, smallest first"""
        n = len(self.universe)
        return [
            frozenset(x for i, x in enumerate(self.universe) if mask & (1 << i))
            for mask in range(1 << n)
        ]

    @property
    def operators(self) -> dict[str, Callable[[frozenset, frozenset], frozenset]]:
        return {"lub": self.lub, "glb": self.glb}


INTERVALS = IntervalLattice()


@dataclass(frozen=True)
class Partition:
    """Ordered list of pairwise-disjoint intervals covering every atom"""

    blocks: tuple[Interval, ...]

    @classmethod
    def trivial(cls) -> "Partition":
        return cls((TOP,))

    @classmethod
    def parse(cls, text: str) -> "Partition":
        """Parse whitespace-separated interval blocks, e.g. `]-inf,0[ [0,0] ]0,+inf[`."""
        tokens = re.findall(r"[\[\]][^\[\]]*[\[\]]", text)
        if not tokens:
            raise PartitionError(f"No partition blocks in {text!r}")
        partition = cls(tuple(parse_interval(t) for t in tokens))
        partition.validate()
        return partition

    def violation(self) -> Optional[str]:
        """First disjointness or coverage problem, or None when the partition is valid."""
        if not self.blocks:
            return "partition has no blocks"
        for i, block in enumerate(self.blocks):
            if block.is_bottom:
                return f"block {i} is empty"
        for i, first in enumerate(self.blocks):
            for second in self.blocks[i + 1:]:
                if not first.glb(second).is_bottom:
                    return f"blocks {first} and {second} overlap"
        ordered = sorted(self.blocks, key=Interval.sort_key)
        if ordered[0].lo != NEG_INF:
            return f"gap below {ordered[0]}"
        for left, right in zip(ordered, ordered[1:]):
            if right.lo != left.hi + 1:
                return f"gap between {left} and {right}"
        if ordered[-1].hi != POS_INF:
            return f"gap above {ordered[-1]}"
        return None

    def validate(self) -> "Partition":
        problem = self.violation()
        if problem is not None:
            raise PartitionError(problem)
        return self

    def block_of(self, value: Interval) -> list[tuple[Interval, Interval]]:
        """Blocks meeting `value`, each paired with its intersection."""
        pairs = []
        for block in self.blocks:
            part = block.glb(value)
            if not part.is_bottom:
                pairs.append((block, part))
        return pairs

    def index_of(self, value: Interval) -> Optional[int]:
        """Index of the single block containing `value`, if any."""
        for i, block in enumerate(self.blocks):
            if value.leq(block):
                return i
        return None

    def refines(self, coarser: "Partition") -> bool:
        return all(coarser.index_of(block) is not None for block in self.blocks)

    def __str__(self) -> str:
        return " ".join(str(block) for block in self.blocks)
