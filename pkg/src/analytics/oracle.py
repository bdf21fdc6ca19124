"""Brute-force ground truth: bounded language enumeration and the Peano benchmark.

Membership here is re-implemented directly from the definition of runs so that
it shares nothing with the indexed engine in processing.automaton_ops.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Optional

import structlog

from src.config import Settings
from src.models.automaton import LTA, EpsilonTransition, GroundTransition, LambdaTransition
from src.models.lattice import Interval
from src.models.rewriting import TRS, RewriteRule
from src.models.term import SymbolKind, Term, abstract_value, app, atom, eval_concrete, num, op, var
from src.processing.rewriter import normal_form

logger = structlog.get_logger()


@dataclass(frozen=True)
class EnumBounds:
    max_depth: int = 3
    atom_lo: int = -10
    atom_hi: int = 10
    max_terms: int = 20000

    def __post_init__(self):
        if self.atom_lo > self.atom_hi:
            raise ValueError("atom_lo must not exceed atom_hi")
        if self.max_depth < 1 or self.max_terms < 1:
            raise ValueError("max_depth and max_terms must be positive")

    @classmethod
    def from_settings(cls, settings: Settings, **overrides) -> "EnumBounds":
        values = {"max_depth": settings.oracle_max_depth, "max_terms": settings.oracle_max_terms}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass(frozen=True)
class Enumeration:
    terms: frozenset[Term]
    truncated: bool


def _saturate(a: LTA, states: set[str]) -> set[str]:
    changed = True
    while changed:
        changed = False
        for t in a.transitions:
            if isinstance(t, EpsilonTransition) and t.source in states and t.target not in states:
                states.add(t.target)
                changed = True
    return states


def naive_states(term: Term, a: LTA) -> set[str]:
    """States reached by `term`, straight from the definition of runs"""
    value: Optional[Interval] = abstract_value(term)
    states: set[str] = set()
    if value is not None:
        for t in a.transitions:
            if isinstance(t, LambdaTransition) and value.leq(t.value):
                states.add(t.target)
    if term.kind in (SymbolKind.PASSIVE, SymbolKind.BUILTIN):
        children = [naive_states(c, a) for c in term.children]
        for t in a.transitions:
            if (
                isinstance(t, GroundTransition)
                and t.head == term.name
                and len(t.args) == len(children)
                and all(q in s for q, s in zip(t.args, children))
            ):
                states.add(t.target)
    return _saturate(a, states)


def naive_member(term: Term, a: LTA) -> bool:
    return bool(naive_states(term, a) & a.finals)


def _passive_heads(a: LTA) -> list[tuple[str, int]]:
    return [(name, arity) for name, arity in a.alphabet.passive]


def enumerate_language(a: LTA, bounds: EnumBounds = EnumBounds()) -> Enumeration:
    """
    Accepted terms over passive symbols and atoms within the bounds, built bottom-up

    Only terms reaching some state are extended, which keeps the search
    exhaustive for accepted terms while pruning dead candidates.
    """
    known: dict[Term, frozenset[str]] = {}
    truncated = False
    for k in range(bounds.atom_lo, bounds.atom_hi + 1):
        leaf = atom(k)
        reached = naive_states(leaf, a)
        if reached:
            known[leaf] = frozenset(reached)
    for name, arity in _passive_heads(a):
        if arity == 0:
            leaf = app(name)
            reached = naive_states(leaf, a)
            if reached:
                known[leaf] = frozenset(reached)
    for depth in range(2, bounds.max_depth + 1):
        layer: dict[Term, frozenset[str]] = {}
        pool = list(known)
        for name, arity in _passive_heads(a):
            if arity == 0:
                continue
            for args in product(pool, repeat=arity):
                if max(t.depth() for t in args) != depth - 1:
                    continue
                candidate = app(name, *args)
                reached = naive_states(candidate, a)
                if reached:
                    layer[candidate] = frozenset(reached)
                if len(known) + len(layer) > bounds.max_terms:
                    truncated = True
                    break
            if truncated:
                break
        known.update(layer)
        if truncated or not layer:
            break
    accepted = frozenset(t for t, states in known.items() if states & a.finals)
    logger.debug("Enumerated language", accepted=len(accepted), explored=len(known), truncated=truncated)
    return Enumeration(accepted, truncated)


def enumerate_language_topdown(a: LTA, bounds: EnumBounds = EnumBounds()) -> Enumeration:
    """Same language as enumerate_language, generated from the final states downwards."""
    sources: dict[str, set[str]] = {q: {q} for q in a.states}
    changed = True
    while changed:
        changed = False
        for t in a.epsilons:
            for q, into in sources.items():
                if t.target in into and t.source not in into:
                    into.add(t.source)
                    changed = True
    memo: dict[tuple[str, int], frozenset[Term]] = {}
    budget = [bounds.max_terms]

    def generate(q: str, depth: int) -> frozenset[Term]:
        key = (q, depth)
        if key in memo:
            return memo[key]
        found: set[Term] = set()
        origins = sources.get(q, {q})
        for t in a.lambdas:
            if t.target in origins:
                lo = max(bounds.atom_lo, t.value.lo)
                hi = min(bounds.atom_hi, t.value.hi)
                found.update(atom(k) for k in range(int(lo), int(hi) + 1) if lo <= hi)
        for t in a.grounds:
            if t.target not in origins or not a.alphabet.is_passive(t.head):
                continue
            if not t.args:
                found.add(app(t.head))
                continue
            if depth <= 1:
                continue
            choices = [generate(p, depth - 1) for p in t.args]
            for args in product(*choices):
                found.add(app(t.head, *args))
                if len(found) > budget[0]:
                    break
        memo[key] = frozenset(found)
        return memo[key]

    accepted: set[Term] = set()
    for q in a.finals:
        accepted |= generate(q, bounds.max_depth)
    truncated = len(accepted) > bounds.max_terms
    return Enumeration(frozenset(accepted), truncated)


# Peano addition over succ/pred numerals

PEANO_SYMBOLS = {"xadd": 2, "succ": 1, "pred": 1, "zero": 0, "result": 1}


def _peano_rules() -> TRS:
    a, b = var("a"), var("b")
    zero = app("zero")

    def succ(t: Term) -> Term:
        return app("succ", t)

    def pred(t: Term) -> Term:
        return app("pred", t)

    def xadd(left: Term, right: Term) -> Term:
        return app("xadd", left, right)

    def result(t: Term) -> Term:
        return app("result", t)

    rules = [
        (xadd(zero, zero), result(zero)),
        (xadd(succ(a), pred(b)), xadd(a, b)),
        (xadd(pred(a), succ(b)), xadd(a, b)),
        (xadd(succ(a), succ(b)), xadd(succ(succ(a)), b)),
        (xadd(pred(a), pred(b)), xadd(pred(pred(a)), b)),
        (xadd(succ(a), zero), result(succ(a))),
        (xadd(pred(a), zero), result(pred(a))),
        (xadd(zero, succ(b)), result(succ(b))),
        (xadd(zero, pred(b)), result(pred(b))),
    ]
    return TRS("peano", [RewriteRule(lhs, rhs) for lhs, rhs in rules])


def numeral(k: int) -> Term:
    """succ^k(zero) for k >= 0, pred^-k(zero) otherwise"""
    head = "succ" if k >= 0 else "pred"
    term = app("zero")
    for _ in range(abs(k)):
        term = app(head, term)
    return term


def numeral_value(term: Term) -> int:
    value = 0
    while term.children:
        value += 1 if term.name == "succ" else -1
        term = term.children[0]
    return value


@dataclass(frozen=True)
class PeanoReport:
    peano_steps: int
    builtin_steps: int
    peano_value: int
    builtin_value: int


def peano_benchmark(x: int, y: int) -> PeanoReport:
    """
    Add two numbers with unary rewrite rules and with the builtin operator

    Args:
        x: First operand, non-negative
        y: Second operand, non-negative

    Returns:
        Rewrite steps and results of both encodings
    """
    if x < 0 or y < 0:
        raise ValueError("peano_benchmark expects non-negative operands")
    outcome = normal_form(app("xadd", numeral(x), numeral(y)), _peano_rules())
    peano_value = numeral_value(outcome.term.children[0]) if outcome.term.name == "result" else 0
    builtin = eval_concrete(op("+", num(x), num(y)))
    logger.info("Peano benchmark", x=x, y=y, peano_steps=outcome.steps, builtin_steps=1)
    return PeanoReport(outcome.steps, 1, peano_value, builtin.root.value)
