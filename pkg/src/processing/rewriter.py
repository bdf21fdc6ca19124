"""Concrete conditional rewriting over integer terms"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import structlog

from src.models.errors import TermError
from src.models.rewriting import TRS, Predicate, RewriteRule
from src.models.term import (
    SymbolKind,
    Term,
    eval_concrete,
    positions,
    replace_at,
    subterm_at,
    substitute,
)

logger = structlog.get_logger()


def predicate_eval(predicate: Predicate, binding: Mapping[str, Term]) -> bool:
    """Evaluate a comparison under `binding`; false when a side is not an integer."""
    try:
        left = eval_concrete(substitute(predicate.lhs, binding))
        right = eval_concrete(substitute(predicate.rhs, binding))
    except TermError:
        return False
    if left.kind is not SymbolKind.CONCRETE or right.kind is not SymbolKind.CONCRETE:
        return False
    return predicate.relation.holds(left.root.value, right.root.value)


def match_concrete(pattern: Term, term: Term) -> Optional[dict[str, Term]]:
    """Syntactic matching of a rule left-hand side against a ground term"""
    binding: dict[str, Term] = {}
    stack = [(pattern, term)]
    while stack:
        p, t = stack.pop()
        if p.is_variable:
            bound = binding.get(p.name)
            if bound is None:
                binding[p.name] = t
            elif bound != t:
                return None
            continue
        if p.root != t.root:
            return None
        stack.extend(zip(p.children, t.children))
    return binding


def _fire(rule: RewriteRule, subterm: Term) -> Optional[Term]:
    if subterm.root != rule.lhs.root:
        return None
    binding = match_concrete(rule.lhs, subterm)
    if binding is None:
        return None
    if not all(predicate_eval(c, binding) for c in rule.conditions):
        return None
    return substitute(rule.rhs, binding)


def rewrite_step(term: Term, trs: TRS) -> frozenset[Term]:
    """All one-step successors, each evaluated at its interpreted positions."""
    successors: set[Term] = set()
    for pos in positions(term):
        subterm = subterm_at(term, pos)
        if subterm.kind is not SymbolKind.PASSIVE:
            continue
        for rule in trs.rules:
            replacement = _fire(rule, subterm)
            if replacement is not None:
                successors.add(eval_concrete(replace_at(term, pos, replacement)))
    return frozenset(successors)


@dataclass(frozen=True)
class ReachResult:
    terms: frozenset[Term]
    truncated: bool


def reachable(
    seeds: Iterable[Term], trs: TRS, step_bound: int, size_bound: int = 10000
) -> ReachResult:
    """
    Breadth-first closure of the seeds under rewrite_step

    Args:
        seeds: Ground start terms
        trs: Rules to apply
        step_bound: Maximum number of rewrite steps from a seed
        size_bound: Stop once this many distinct terms have been collected

    Returns:
        Every term found together with a flag telling whether a bound cut the search
    """
    seen: set[Term] = {eval_concrete(s) for s in seeds}
    frontier = list(seen)
    truncated = False
    for depth in range(step_bound):
        next_frontier: list[Term] = []
        for term in frontier:
            for successor in rewrite_step(term, trs):
                if successor in seen:
                    continue
                if len(seen) >= size_bound:
                    truncated = True
                    break
                seen.add(successor)
                next_frontier.append(successor)
        if not next_frontier:
            break
        frontier = next_frontier
    else:
        truncated = truncated or any(rewrite_step(t, trs) - seen for t in frontier)
    logger.debug("Concrete reachability", terms=len(seen), truncated=truncated)
    return ReachResult(frozenset(seen), truncated)


@dataclass(frozen=True)
class NormalForm:
    term: Term
    steps: int
    complete: bool


def normal_form(term: Term, trs: TRS, max_steps: int = 100000) -> NormalForm:
    """Rewrite leftmost-outermost until no rule applies or the step budget runs out."""
    current = eval_concrete(term)
    for steps in range(max_steps):
        for pos in positions(current):
            subterm = subterm_at(current, pos)
            if subterm.kind is not SymbolKind.PASSIVE:
                continue
            fired = next(
                (r for r in (_fire(rule, subterm) for rule in trs.rules) if r is not None),
                None,
            )
            if fired is not None:
                current = eval_concrete(replace_at(current, pos, fired))
                break
        else:
            return NormalForm(current, steps, True)
    logger.warning("Normal form search hit its step budget", max_steps=max_steps)
    return NormalForm(current, max_steps, False)
