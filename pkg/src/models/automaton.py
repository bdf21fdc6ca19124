"""Lattice tree automata: transitions, alphabets and the immutable LTA value.

Transitions come in three flavours: lambda transitions `λ -> q` from a lattice
element, ground transitions `f(q1,...,qn) -> q` and epsilon transitions
`q' -> q`. An LTA keeps them canonically sorted so that two automata with the
same content compare (and print) identically.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Optional, Union

from src.models.errors import ArityError, UnknownSymbol
from src.models.lattice import Interval
from src.models.term import BUILTIN_ARITIES

DEFAULT_BUILTINS: dict[str, int] = {"+": 2, "-": 2, "*": 2}

_DIGITS = re.compile(r"(\d+)")


def state_key(name: str) -> tuple:
    """Natural sort key: q2 < q10, q!3 < q!12"""
    parts = _DIGITS.split(name)
    return tuple(int(p) if i % 2 else p for i, p in enumerate(parts))


def sorted_states(states: Iterable[str]) -> list[str]:
    return sorted(states, key=state_key)


@dataclass(frozen=True)
class LambdaTransition:
    """λ -> q"""

    value: Interval
    target: str

    def __post_init__(self):
        if self.value.is_bottom:
            raise ValueError(f"Lambda transition into {self.target} carries bottom")

    @property
    def states(self) -> tuple[str, ...]:
        return (self.target,)

    def sort_key(self) -> tuple:
        return (0, self.value.sort_key(), state_key(self.target))

    def renamed(self, mapping: Mapping[str, str]) -> "LambdaTransition":
        return LambdaTransition(self.value, mapping.get(self.target, self.target))

    def __str__(self) -> str:
        return f"{self.value} -> {self.target}"


@dataclass(frozen=True)
class GroundTransition:
    """f(q1, ..., qn) -> q"""

    head: str
    args: tuple[str, ...]
    target: str

    @property
    def states(self) -> tuple[str, ...]:
        return self.args + (self.target,)

    def sort_key(self) -> tuple:
        return (1, self.head, len(self.args), tuple(state_key(a) for a in self.args), state_key(self.target))

    def renamed(self, mapping: Mapping[str, str]) -> "GroundTransition":
        return GroundTransition(
            self.head,
            tuple(mapping.get(a, a) for a in self.args),
            mapping.get(self.target, self.target),
        )

    def __str__(self) -> str:
        if not self.args:
            return f"{self.head} -> {self.target}"
        return f"{self.head}({', '.join(self.args)}) -> {self.target}"


@dataclass(frozen=True)
class EpsilonTransition:
    """q' -> q"""

    source: str
    target: str

    @property
    def states(self) -> tuple[str, ...]:
        return (self.source, self.target)

    def sort_key(self) -> tuple:
        return (2, state_key(self.source), state_key(self.target))

    def renamed(self, mapping: Mapping[str, str]) -> "EpsilonTransition":
        return EpsilonTransition(
            mapping.get(self.source, self.source), mapping.get(self.target, self.target)
        )

    def __str__(self) -> str:
        return f"{self.source} -> {self.target}"


Transition = Union[LambdaTransition, GroundTransition, EpsilonTransition]


def transition_key(t: Transition) -> tuple:
    return t.sort_key()


@dataclass(frozen=True)
class Alphabet:
    """Passive symbols and builtin operators with their arities"""

    passive: tuple[tuple[str, int], ...] = ()
    builtins: tuple[tuple[str, int], ...] = tuple(sorted(DEFAULT_BUILTINS.items()))

    @classmethod
    def of(cls, passive: Mapping[str, int], builtins: Optional[Mapping[str, int]] = None) -> "Alphabet":
        builtins = DEFAULT_BUILTINS if builtins is None else builtins
        for name, arity in builtins.items():
            if BUILTIN_ARITIES.get(name) != arity:
                raise ArityError(f"Unknown builtin operator {name}/{arity}")
        clash = set(passive) & set(builtins)
        if clash:
            raise ArityError(f"Symbols declared both passive and builtin: {sorted(clash)}")
        return cls(tuple(sorted(passive.items())), tuple(sorted(builtins.items())))

    @cached_property
    def _arities(self) -> dict[str, int]:
        return dict(self.passive) | dict(self.builtins)

    def arity(self, name: str) -> Optional[int]:
        return self._arities.get(name)

    def is_builtin(self, name: str) -> bool:
        return name in dict(self.builtins)

    def is_passive(self, name: str) -> bool:
        return name in dict(self.passive)

    def merged(self, other: "Alphabet") -> "Alphabet":
        passive = dict(self.passive)
        for name, arity in other.passive:
            if passive.setdefault(name, arity) != arity:
                raise ArityError(f"Symbol {name} has arities {passive[name]} and {arity}")
        builtins = dict(self.builtins) | dict(other.builtins)
        return Alphabet.of(passive, builtins)


class AutomatonIndex:
    """Lookup tables derived from an LTA; built once per automaton."""

    def __init__(self, automaton: "LTA"):
        self.lambdas_into: dict[str, list[LambdaTransition]] = defaultdict(list)
        self.ground_into: dict[str, list[GroundTransition]] = defaultdict(list)
        self.ground_by_head: dict[str, list[GroundTransition]] = defaultdict(list)
        self.ground_targets: dict[tuple[str, tuple[str, ...]], set[str]] = defaultdict(set)
        eps_out: dict[str, set[str]] = defaultdict(set)
        for t in automaton.transitions:
            if isinstance(t, LambdaTransition):
                self.lambdas_into[t.target].append(t)
            elif isinstance(t, GroundTransition):
                self.ground_into[t.target].append(t)
                self.ground_by_head[t.head].append(t)
                self.ground_targets[(t.head, t.args)].add(t.target)
            else:
                eps_out[t.source].add(t.target)
        self._alphabet = automaton.alphabet
        self._states = automaton.states
        self.closure: dict[str, frozenset[str]] = {}
        for q in automaton.states:
            seen = {q}
            frontier = [q]
            while frontier:
                current = frontier.pop()
                for nxt in eps_out.get(current, ()):
                    if nxt not in seen:
                        seen.add(nxt)
                        frontier.append(nxt)
            self.closure[q] = frozenset(seen)
        ancestors: dict[str, set[str]] = defaultdict(set)
        for q, reached in self.closure.items():
            for r in reached:
                ancestors[r].add(q)
        self.ancestors: dict[str, frozenset[str]] = {
            q: frozenset(ancestors[q]) for q in automaton.states
        }

    def lambda_values(self, q: str) -> list[Interval]:
        """Distinct lambda values reaching q, epsilon-inherited ones included."""
        values = {t.value for a in self.ancestors.get(q, ()) for t in self.lambdas_into.get(a, ())}
        return sorted(values, key=Interval.sort_key)

    def inherited_ground(self, q: str) -> list[GroundTransition]:
        """Ground transitions whose target epsilon-reaches q"""
        found = [t for a in self.ancestors.get(q, ()) for t in self.ground_into.get(a, ())]
        return sorted(found, key=transition_key)

    def inherited_lambdas(self, q: str) -> list[LambdaTransition]:
        found = [t for a in self.ancestors.get(q, ()) for t in self.lambdas_into.get(a, ())]
        return sorted(found, key=transition_key)

    @cached_property
    def non_numeric(self) -> frozenset[str]:
        """States that may recognize a term with a passive symbol"""
        tainted: set[str] = set()
        changed = True
        while changed:
            changed = False
            for head, transitions in self.ground_by_head.items():
                passive = not self._alphabet.is_builtin(head)
                for t in transitions:
                    if t.target in tainted:
                        continue
                    if passive or any(a in tainted for a in t.args):
                        for q in self.closure.get(t.target, (t.target,)):
                            if q not in tainted:
                                tainted.add(q)
                                changed = True
        return frozenset(tainted)

    def is_numeric(self, q: str) -> bool:
        return q not in self.non_numeric


@dataclass(frozen=True)
class LTA:
    """Lattice tree automaton ⟨F, Q, Qf, Δ⟩ in canonical form"""

    alphabet: Alphabet
    states: frozenset[str]
    finals: frozenset[str]
    transitions: tuple[Transition, ...]

    @classmethod
    def build(
        cls,
        alphabet: Alphabet,
        transitions: Iterable[Transition],
        finals: Iterable[str] = (),
        states: Iterable[str] = (),
    ) -> "LTA":
        """Validate and canonicalize; states are declared ones plus every transition endpoint."""
        ordered = tuple(sorted(set(transitions), key=transition_key))
        all_states = set(states)
        for t in ordered:
            all_states.update(t.states)
            if isinstance(t, GroundTransition):
                arity = alphabet.arity(t.head)
                if arity is None:
                    raise UnknownSymbol(f"Symbol {t.head!r} is not in the alphabet")
                if arity != len(t.args):
                    raise ArityError(f"{t.head} has arity {arity}, transition uses {len(t.args)}")
        final_set = frozenset(finals)
        missing = final_set - all_states
        if missing:
            all_states.update(missing)
        return cls(alphabet, frozenset(all_states), final_set, ordered)

    @classmethod
    def empty(cls, alphabet: Alphabet) -> "LTA":
        return cls(alphabet, frozenset(), frozenset(), ())

    @cached_property
    def index(self) -> AutomatonIndex:
        return AutomatonIndex(self)

    @property
    def lambdas(self) -> list[LambdaTransition]:
        return [t for t in self.transitions if isinstance(t, LambdaTransition)]

    @property
    def grounds(self) -> list[GroundTransition]:
        return [t for t in self.transitions if isinstance(t, GroundTransition)]

    @property
    def epsilons(self) -> list[EpsilonTransition]:
        return [t for t in self.transitions if isinstance(t, EpsilonTransition)]

    def sorted_states(self) -> list[str]:
        return sorted_states(self.states)

    def renamed(self, mapping: Mapping[str, str]) -> "LTA":
        return LTA.build(
            self.alphabet,
            (t.renamed(mapping) for t in self.transitions),
            finals=(mapping.get(q, q) for q in self.finals),
            states=(mapping.get(q, q) for q in self.states),
        )

    def with_transitions(self, transitions: Iterable[Transition]) -> "LTA":
        return LTA.build(self.alphabet, transitions, self.finals, self.states)

    def __str__(self) -> str:
        lines = [f"states {' '.join(self.sorted_states())}", f"final {' '.join(sorted_states(self.finals))}"]
        lines.extend(str(t) for t in self.transitions)
        return "\n".join(lines)


class AutomatonBuilder:
    """Mutable transition table used while a phase grows an automaton"""

    def __init__(self, base: LTA):
        self.alphabet = base.alphabet
        self.states: set[str] = set(base.states)
        self.finals: set[str] = set(base.finals)
        self.transitions: set[Transition] = set(base.transitions)
        self._snapshot: Optional[LTA] = base
        self._grounds: dict[tuple[str, tuple[str, ...]], set[str]] = defaultdict(set)
        for t in base.grounds:
            self._grounds[(t.head, t.args)].add(t.target)

    def add(self, transition: Transition) -> bool:
        if transition in self.transitions:
            return False
        self.transitions.add(transition)
        self.states.update(transition.states)
        if isinstance(transition, GroundTransition):
            self._grounds[(transition.head, transition.args)].add(transition.target)
        self._snapshot = None
        return True

    def discard(self, transition: Transition) -> None:
        if transition in self.transitions:
            self.transitions.remove(transition)
            if isinstance(transition, GroundTransition):
                self._grounds[(transition.head, transition.args)].discard(transition.target)
            self._snapshot = None

    def add_state(self, name: str) -> None:
        if name not in self.states:
            self.states.add(name)
            self._snapshot = None

    def targets(self, head: str, args: tuple[str, ...]) -> frozenset[str]:
        """Direct targets of the ground transitions head(args) -> q"""
        return frozenset(self._grounds.get((head, args), ()))

    def lambdas_at(self, q: str) -> list[LambdaTransition]:
        return [t for t in self.transitions if isinstance(t, LambdaTransition) and t.target == q]

    def build(self) -> LTA:
        if self._snapshot is None:
            self._snapshot = LTA.build(self.alphabet, self.transitions, self.finals, self.states)
        return self._snapshot
