"""Runs, membership and the boolean operations on lattice tree automata"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Optional

import structlog

from src.models.automaton import (
    LTA,
    Alphabet,
    EpsilonTransition,
    GroundTransition,
    LambdaTransition,
    Transition,
    sorted_states,
)
from src.models.errors import NonDeterministicInput, TermError, UnknownSymbol
from src.models.lattice import INTERVALS, Interval, Partition, atoms_within
from src.models.term import SymbolKind, Term, app, lat, op

logger = structlog.get_logger()

# Upper bound on value combinations tried when an operator has state arguments
MAX_VALUE_COMBINATIONS = 256


def _lambda_states(a: LTA, value: Interval) -> set[str]:
    found: set[str] = set()
    for t in a.lambdas:
        if value.leq(t.value):
            found |= a.index.closure[t.target]
    return found


def _value_states(a: LTA, values: list[Interval]) -> set[str]:
    """States whose inherited lambdas cover every value in `values`"""
    result: Optional[set[str]] = None
    for value in values:
        found = _lambda_states(a, value)
        result = found if result is None else result & found
        if not result:
            return set()
    return result or set()


def _node_values(a: LTA, node: Term, children: list[Optional[list[Interval]]]) -> Optional[list[Interval]]:
    kind = node.kind
    if kind is SymbolKind.ABSTRACT:
        return [node.root.value]
    if kind is SymbolKind.CONCRETE:
        return [INTERVALS.alpha(node.root.value)]
    if kind is SymbolKind.STATE:
        if not a.index.is_numeric(node.name):
            return None
        values = a.index.lambda_values(node.name)
        return values or None
    if kind is SymbolKind.BUILTIN:
        operator = INTERVALS.operators.get(node.name)
        if operator is None or any(c is None for c in children):
            return None
        combos = 1
        for c in children:
            combos *= len(c)
        if combos > MAX_VALUE_COMBINATIONS:
            logger.debug(
                "Value combinations capped", operator=node.name, combinations=combos, limit=MAX_VALUE_COMBINATIONS
            )
            return None
        return sorted({operator(*args) for args in product(*children)}, key=Interval.sort_key)
    return None


def reaches(term: Term, a: LTA) -> frozenset[str]:
    """
    States q with term ->* q in a

    Passive structure is read through ground transitions. Interpreted subterms
    (lattice constants, integers and operators over them, including operators
    over states that only carry lattice values) reach every state holding a
    lambda above their value. Epsilon closure is applied after every step.

    Raises:
        UnknownSymbol: a symbol or state leaf is not part of the automaton
        TermError: the term has variables
    """
    if not term.is_ground:
        raise TermError(f"Cannot run non-ground term {term}")
    index = a.index
    memo: dict[int, tuple[frozenset[str], Optional[list[Interval]]]] = {}
    stack: list[tuple[Term, bool]] = [(term, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in memo:
            continue
        if not expanded and node.children:
            stack.append((node, True))
            stack.extend((c, False) for c in node.children)
            continue
        child_results = [memo[id(c)] for c in node.children]
        kind = node.kind
        if kind is SymbolKind.STATE:
            if node.name not in a.states:
                raise UnknownSymbol(f"State {node.name!r} is not in the automaton")
            states: set[str] = set(index.closure[node.name])
        elif kind is SymbolKind.PASSIVE and a.alphabet.arity(node.name) is None:
            raise UnknownSymbol(f"Symbol {node.name!r} is not in the alphabet")
        else:
            states = set()
        values = _node_values(a, node, [r[1] for r in child_results])
        if values is not None and kind is not SymbolKind.STATE:
            states |= _value_states(a, values)
        if kind in (SymbolKind.PASSIVE, SymbolKind.BUILTIN):
            arg_states = [r[0] for r in child_results]
            for t in index.ground_by_head.get(node.name, ()):
                if len(t.args) == len(arg_states) and all(
                    q in s for q, s in zip(t.args, arg_states)
                ):
                    states |= index.closure[t.target]
        memo[id(node)] = (frozenset(states), values)
    return memo[id(term)][0]


def member(term: Term, a: LTA) -> bool:
    return bool(reaches(term, a) & a.finals)


def union(a: LTA, b: LTA) -> LTA:
    """Disjoint union; states are prefixed with L. and R."""
    left = a.renamed({q: f"L.{q}" for q in a.states})
    right = b.renamed({q: f"R.{q}" for q in b.states})
    return LTA.build(
        a.alphabet.merged(b.alphabet),
        left.transitions + right.transitions,
        finals=left.finals | right.finals,
        states=left.states | right.states,
    )


def eliminate_epsilon(a: LTA) -> LTA:
    """Copy every transition into each epsilon-successor of its target, then drop epsilons."""
    if not a.epsilons:
        return a
    closure = a.index.closure
    saturated: set[Transition] = set()
    for t in a.transitions:
        if isinstance(t, EpsilonTransition):
            continue
        for target in closure[t.target]:
            if isinstance(t, LambdaTransition):
                saturated.add(LambdaTransition(t.value, target))
            else:
                saturated.add(GroundTransition(t.head, t.args, target))
    return LTA.build(a.alphabet, saturated, a.finals, a.states)


def reduce(a: LTA) -> LTA:
    """Keep only accessible states, i.e. those recognizing at least one term."""
    marked: set[str] = {t.target for t in a.lambdas}
    marked |= {t.target for t in a.grounds if not t.args}
    changed = True
    while changed:
        changed = False
        for t in a.transitions:
            if isinstance(t, EpsilonTransition):
                if t.source in marked and t.target not in marked:
                    marked.add(t.target)
                    changed = True
            elif isinstance(t, GroundTransition):
                if t.target not in marked and all(q in marked for q in t.args):
                    marked.add(t.target)
                    changed = True
    kept = [t for t in a.transitions if all(q in marked for q in t.states)]
    logger.debug("Reduced automaton", kept_states=len(marked), dropped=len(a.states - marked))
    return LTA.build(a.alphabet, kept, a.finals & marked, marked)


def is_empty(a: LTA) -> bool:
    return not reduce(a).finals


def is_deterministic(a: LTA) -> bool:
    if a.epsilons:
        return False
    if any(len(targets) > 1 for targets in a.index.ground_targets.values()):
        return False
    lambdas = a.lambdas
    for i, first in enumerate(lambdas):
        for second in lambdas[i + 1:]:
            if first.target != second.target and not first.value.glb(second.value).is_bottom:
                return False
    return True


def intersection(a: LTA, b: LTA) -> LTA:
    """Product automaton with states named `p&q`; lambda values meet by glb."""
    a, b = eliminate_epsilon(a), eliminate_epsilon(b)
    transitions: list[Transition] = []
    for left in a.lambdas:
        for right in b.lambdas:
            value = left.value.glb(right.value)
            if not value.is_bottom:
                transitions.append(LambdaTransition(value, f"{left.target}&{right.target}"))
    right_heads = b.index.ground_by_head
    for left in a.grounds:
        for right in right_heads.get(left.head, ()):
            if len(right.args) != len(left.args):
                continue
            transitions.append(
                GroundTransition(
                    left.head,
                    tuple(f"{p}&{q}" for p, q in zip(left.args, right.args)),
                    f"{left.target}&{right.target}",
                )
            )
    finals = {f"{p}&{q}" for p in a.finals for q in b.finals}
    return reduce(LTA.build(a.alphabet.merged(b.alphabet), transitions, finals))


def _fresh_name(base: str, taken: frozenset[str] | set[str]) -> str:
    name = base
    while name in taken:
        name += "'"
    return name


def complement(
    a: LTA, partition: Optional[Partition] = None, alphabet: Optional[Alphabet] = None
) -> LTA:
    """
    Complete the automaton with a sink state and flip its final states

    Completion covers atom leaves block by block and every passive symbol
    combination; terms with builtin operators are outside its scope.

    Raises:
        NonDeterministicInput: the automaton is not deterministic
    """
    if not is_deterministic(a):
        logger.error("Complement needs a deterministic automaton", states=len(a.states))
        raise NonDeterministicInput("complement requires a deterministic automaton")
    partition = partition or Partition.trivial()
    alphabet = a.alphabet if alphabet is None else a.alphabet.merged(alphabet)
    sink = _fresh_name("sink", a.states)
    transitions: list[Transition] = list(a.transitions)
    values = [t.value for t in a.lambdas]
    for block in partition.blocks:
        for piece in block.minus(values):
            transitions.append(LambdaTransition(piece, sink))
    states = sorted_states(a.states | {sink})
    known = a.index.ground_targets
    for name, arity in alphabet.passive:
        for args in product(states, repeat=arity):
            if (name, args) not in known:
                transitions.append(GroundTransition(name, args, sink))
    finals = set(states) - a.finals
    logger.debug("Complemented automaton", sink=sink, transitions=len(transitions))
    return LTA.build(alphabet, transitions, finals, states)


@dataclass(frozen=True)
class InclusionResult:
    included: bool
    approximate: bool
    witness: Optional[Term] = None


def included_in(a: LTA, b: LTA, partition: Optional[Partition] = None) -> InclusionResult:
    """
    Decide L(a) ⊆ L(b) through emptiness of a ∩ complement(b)

    A nondeterministic `b` is determinized first; the answer is then relative to
    that over-approximation and flagged `approximate`.
    """
    approximate = False
    if not is_deterministic(b):
        from src.processing.partitioned import determinize, to_plta

        b = determinize(to_plta(eliminate_epsilon(b), partition or Partition.trivial())).base
        approximate = True
        logger.warning("Inclusion checked against a determinized over-approximation")
    negated = complement(b, partition, alphabet=a.alphabet)
    counter = witness(intersection(a, negated))
    return InclusionResult(counter is None, approximate, counter)


def merge_states(a: LTA, keep: str, drop: str) -> LTA:
    """Replace every occurrence of `drop` by `keep`; epsilon self-loops disappear."""
    if keep == drop:
        return a
    renamed = a.renamed({drop: keep})
    return renamed.with_transitions(
        t
        for t in renamed.transitions
        if not (isinstance(t, EpsilonTransition) and t.source == t.target)
    )


def _term_rank(term: Term) -> tuple[int, str]:
    return (term.size, str(term))


def witness(a: LTA) -> Optional[Term]:
    """Smallest accepted term, or None when the language is empty."""
    closure = a.index.closure
    best: dict[str, Term] = {}

    def offer(target: str, term: Term) -> bool:
        improved = False
        for q in closure[target]:
            current = best.get(q)
            if current is None or _term_rank(term) < _term_rank(current):
                best[q] = term
                improved = True
        return improved

    for t in a.lambdas:
        enumeration = atoms_within(t.value, 1)
        offer(t.target, lat(enumeration.atoms[0]))
    changed = True
    while changed:
        changed = False
        for t in a.grounds:
            if not all(q in best for q in t.args):
                continue
            children = [best[q] for q in t.args]
            if a.alphabet.is_builtin(t.head):
                candidate = op(t.head, *children)
            else:
                candidate = app(t.head, *children)
            changed |= offer(t.target, candidate)
    accepted = [best[q] for q in a.finals if q in best]
    if not accepted:
        return None
    return min(accepted, key=_term_rank)

