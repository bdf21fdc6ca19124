"""Matching terms with variables against automaton states"""

from __future__ import annotations

from typing import Optional

import structlog

from src.analytics.solver import binding_key
from src.models.automaton import LTA
from src.models.term import SymbolKind, Term, to_abstract

logger = structlog.get_logger()

Goal = tuple[Term, str]


def _covered(a: LTA, value, q: str) -> bool:
    return any(value.leq(t.value) for t in a.index.inherited_lambdas(q))


def matching(pattern: Term, a: LTA, q: str) -> list[dict[str, str]]:
    """
    Every substitution σ (variables to states) with pattern σ ->* q

    The goal `pattern ⊴ q` is kept as a disjunction of conjunctions. A goal
    headed by a symbol is unfolded through every transition of that symbol
    into q (or into a state reaching q by epsilon moves); variables bind to
    states; lattice constants are solved when a lambda at the state covers them.
    Branches with a clash are dropped.
    """
    if q not in a.states:
        return []
    pattern = to_abstract(pattern)
    index = a.index
    results: dict[tuple, dict[str, str]] = {}
    worklist: list[tuple[tuple[Goal, ...], dict[str, str]]] = [(((pattern, q),), {})]
    while worklist:
        goals, binding = worklist.pop()
        if not goals:
            results.setdefault(binding_key(binding), binding)
            continue
        (term, state), rest = goals[0], goals[1:]
        kind = term.kind
        if kind is SymbolKind.VARIABLE:
            bound: Optional[str] = binding.get(term.name)
            if bound is None:
                worklist.append((rest, {**binding, term.name: state}))
            elif bound == state:
                worklist.append((rest, binding))
            continue
        if kind is SymbolKind.ABSTRACT:
            if _covered(a, term.root.value, state):
                worklist.append((rest, binding))
            continue
        if kind is SymbolKind.STATE:
            if state in index.closure.get(term.name, ()):
                worklist.append((rest, binding))
            continue
        for t in index.inherited_ground(state):
            if t.head != term.name or len(t.args) != len(term.children):
                continue
            unfolded = tuple(zip(term.children, t.args))
            worklist.append((unfolded + rest, binding))
    ordered = [results[k] for k in sorted(results)]
    logger.debug("Matched pattern", pattern=str(pattern), state=q, solutions=len(ordered))
    return ordered
