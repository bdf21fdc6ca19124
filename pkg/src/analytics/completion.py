"""Tree automata completion with lattice values.

One completion step evaluates builtin operators into lambda values, repairs
every critical pair of the rewrite system, merges states identified by the
approximation equations and evaluates again. Widening keeps the lambda values
of each state from growing forever.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from itertools import product
from typing import Iterable, Optional

import structlog
from pydantic import BaseModel, ConfigDict, Field

from src.analytics.matching import matching
from src.analytics.solver import Binding, ConstraintSystem, binding_key, solve
from src.config import Settings
from src.models.automaton import (
    LTA,
    AutomatonBuilder,
    EpsilonTransition,
    GroundTransition,
    LambdaTransition,
    state_key,
)
from src.models.errors import StepBudgetExhausted
from src.models.lattice import BOTTOM, INTERVALS, Interval, bound_text
from src.models.rewriting import TRS, Equation, EquationSet, Predicate, RewriteRule
from src.models.term import SymbolKind, Term, lat, state, substitute, to_abstract
from src.processing.automaton_ops import intersection, merge_states, reaches, witness

logger = structlog.get_logger()


class CompletionConfig(BaseModel):
    """Knobs of the completion loop"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    max_steps: int = Field(default=50, ge=1)
    widen_after: int = Field(default=3, ge=0)
    equations: EquationSet = Field(default_factory=lambda: EquationSet("none"))
    strict_int: bool = False

    @classmethod
    def from_settings(
        cls, settings: Settings, equations: Optional[EquationSet] = None, **overrides
    ) -> "CompletionConfig":
        """Settings give the defaults; explicit overrides that are not None win."""
        values = {
            "max_steps": settings.max_steps,
            "widen_after": settings.widen_after,
            "strict_int": settings.strict_int,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        if equations is not None:
            values["equations"] = equations
        return cls(**values)


@dataclass(frozen=True)
class TraceRecord:
    step: int
    phase: str
    added: int = 0
    merged: tuple[tuple[str, str], ...] = ()
    widened: tuple[str, ...] = ()

    def to_line(self) -> str:
        merged = ",".join(f"{drop}->{keep}" for keep, drop in self.merged) or "-"
        widened = ",".join(self.widened) or "-"
        return f"step={self.step} phase={self.phase} added={self.added} merged={merged} widened={widened}"


@dataclass
class CompletionState:
    current: LTA
    step: int = 0
    fresh: int = 0
    counters: dict[str, int] = field(default_factory=lambda: defaultdict(int))
    trace: list[TraceRecord] = field(default_factory=list)

    def fresh_state(self, taken: Iterable[str]) -> str:
        taken = set(taken)
        while True:
            self.fresh += 1
            name = f"q!{self.fresh}"
            if name not in taken:
                return name

    def record(self, phase: str, added: int = 0, merged=(), widened=()) -> TraceRecord:
        entry = TraceRecord(self.step, phase, added, tuple(merged), tuple(widened))
        self.trace.append(entry)
        logger.debug("Completion phase", step=entry.step, phase=phase, added=added)
        return entry


def constant_state(value: Interval) -> str:
    """Name of the state dedicated to one lattice constant, e.g. q[1,1]"""
    return f"q[{bound_text(value.lo)},{bound_text(value.hi)}]"


@lru_cache(maxsize=None)
def _constraints(conditions: tuple[Predicate, ...]) -> ConstraintSystem:
    return ConstraintSystem.from_predicates(conditions)


def instantiate(pattern: Term, binding: Binding) -> Term:
    """Replace variables by their state or lattice value and abstract integer constants."""
    terms = {
        name: state(value) if isinstance(value, str) else lat(value)
        for name, value in binding.items()
    }
    return substitute(to_abstract(pattern), terms)


def _state_lub(a: LTA, q: str) -> Interval:
    value = BOTTOM
    for v in a.index.lambda_values(q):
        value = value.lub(v)
    return value


def omega(a: LTA, rule: RewriteRule, q: str, strict_int: bool = False) -> list[Binding]:
    """
    Substitutions for which `rule` fires into q but its right side is not yet recognized there

    Matching yields state substitutions; the conditions then restrict the
    constrained variables to intervals. A variable whose solved interval still
    covers every value of its state is bound back to the state itself.
    """
    system = _constraints(rule.conditions)
    kept: dict[tuple, Binding] = {}
    for sigma in matching(rule.lhs, a, q):
        for binding in solve(sigma, a, system, strict_int):
            for name, value in list(binding.items()):
                if isinstance(value, Interval) and _state_lub(a, sigma[name]).leq(value):
                    binding[name] = sigma[name]
            if q in reaches(instantiate(rule.rhs, binding), a):
                continue
            kept.setdefault(binding_key(binding), binding)
    return [kept[k] for k in sorted(kept)]


def _constant_value(term: Term) -> Interval:
    if term.kind is SymbolKind.CONCRETE:
        return INTERVALS.alpha(term.root.value)
    return term.root.value


def recognized(term: Term, builder: AutomatonBuilder) -> Optional[str]:
    """
    State that already recognizes `term` through its own transitions, if any

    Only structure counts: a constant needs its `q[lo,hi]` lambda and a node
    needs a ground transition over the states of its children. A state whose
    lambda values merely cover a value does not count.
    """
    if term.kind is SymbolKind.STATE:
        return term.name
    if term.is_constant:
        value = _constant_value(term)
        if value.is_bottom:
            return None
        name = constant_state(value)
        return name if LambdaTransition(value, name) in builder.transitions else None
    args = []
    for child in term.children:
        found = recognized(child, builder)
        if found is None:
            return None
        args.append(found)
    targets = builder.targets(term.name, tuple(args))
    return min(targets, key=state_key) if targets else None


def normalize(instance: Term, target: str, builder: AutomatonBuilder, st: CompletionState) -> None:
    """
    Add transitions recognizing `instance` into `target`

    Lattice constants under a symbol get a dedicated state `q[lo,hi]`; other
    arguments reuse a state that structurally recognizes them, or a fresh one.
    """
    if instance.is_constant:
        value = _constant_value(instance)
        if not value.is_bottom:
            builder.add(LambdaTransition(value, target))
        return
    if instance.kind is SymbolKind.STATE:
        if instance.name != target:
            builder.add(EpsilonTransition(instance.name, target))
        return
    args: list[str] = []
    for child in instance.children:
        if child.kind is SymbolKind.STATE:
            args.append(child.name)
        elif child.is_constant:
            value = _constant_value(child)
            if value.is_bottom:
                return
            name = constant_state(value)
            builder.add(LambdaTransition(value, name))
            args.append(name)
        else:
            reached = recognized(child, builder)
            if reached is not None:
                args.append(reached)
            else:
                fresh = st.fresh_state(builder.states)
                builder.add_state(fresh)
                normalize(child, fresh, builder, st)
                args.append(fresh)
    builder.add(GroundTransition(instance.name, tuple(args), target))


def one_step(a: LTA, trs: TRS, st: CompletionState, strict_int: bool = False) -> LTA:
    """
    Repair every critical pair of `a`

    Each repaired state q gets one fresh state q' with q' -> q, and every
    critical pair into q normalizes its right side into that same q'. Pairs
    that share a target therefore share their prime.
    """
    pairs = [
        (rule, q, binding)
        for rule in trs.rules
        for q in a.sorted_states()
        for binding in omega(a, rule, q, strict_int)
    ]
    builder = AutomatonBuilder(a)
    primes: dict[str, str] = {}
    for rule, q, binding in pairs:
        if q not in primes:
            primes[q] = st.fresh_state(builder.states)
            builder.add_state(primes[q])
        normalize(instantiate(rule.rhs, binding), primes[q], builder, st)
        builder.add(EpsilonTransition(primes[q], q))
    result = builder.build()
    logger.debug("Critical pairs repaired", step=st.step, pairs=len(pairs))
    return result


def _shared(left: dict[str, str], right: dict[str, str]) -> Optional[dict[str, str]]:
    for name in left.keys() & right.keys():
        if left[name] != right[name]:
            return None
    return {**left, **right}


def _find_merge(a: LTA, equation: Equation, strict_int: bool) -> Optional[tuple[str, str]]:
    u, v = to_abstract(equation.u), to_abstract(equation.v)
    system = _constraints(equation.conditions)
    states = a.sorted_states()
    left = {q: matching(u, a, q) for q in states}
    right = {q: matching(v, a, q) for q in states}
    for q in states:
        for sigma_u in left[q]:
            for q2 in states:
                if q2 == q:
                    continue
                for sigma_v in right[q2]:
                    sigma = _shared(sigma_u, sigma_v)
                    if sigma is None:
                        continue
                    if solve(sigma, a, system, strict_int):
                        return q, q2
    return None


def apply_equations(
    a: LTA, equations: EquationSet, strict_int: bool = False
) -> tuple[LTA, list[tuple[str, str]]]:
    """
    Merge states identified by the equations until none applies

    Returns:
        The merged automaton and the (kept, dropped) state pairs in merge order
    """
    merges: list[tuple[str, str]] = []
    if not len(equations):
        return a, merges
    while True:
        found = None
        for equation in equations.equations:
            found = _find_merge(a, equation, strict_int)
            if found is not None:
                break
        if found is None:
            return a, merges
        keep, drop = sorted(found, key=state_key)
        logger.debug("Merging states", keep=keep, drop=drop)
        a = merge_states(a, keep, drop)
        merges.append((keep, drop))


def propag(a: LTA) -> list[LambdaTransition]:
    """One evaluation pass: lambdas for builtin transitions whose value is not yet covered."""
    index = a.index
    added: dict[LambdaTransition, None] = {}
    for t in a.grounds:
        operator = INTERVALS.operators.get(t.head)
        if operator is None or not a.alphabet.is_builtin(t.head):
            continue
        choices = [index.lambda_values(q) for q in t.args]
        if not all(choices):
            continue
        covering = index.lambda_values(t.target)
        for values in product(*choices):
            result = operator(*values)
            if result.is_bottom or any(result.leq(c) for c in covering):
                continue
            added.setdefault(LambdaTransition(result, t.target), None)
    return list(added)


@dataclass(frozen=True)
class EvalReport:
    automaton: LTA
    passes: int
    widened: tuple[str, ...]
    additions: dict[str, int]


def evaluate(a: LTA, widen_after: int, force_widen: Iterable[str] = ()) -> EvalReport:
    """
    Iterate propag to a fixpoint, widening states with too many additions

    A state is widened once it received more than `widen_after` lambda values
    during this evaluation, or from the start when listed in `force_widen`.
    Widening replaces all its direct lambdas by old ∇ (old ⊔ new), and the
    state keeps widening from then on.
    """
    widening = set(force_widen) & a.states
    counters: dict[str, int] = defaultdict(int)
    widened: list[str] = []
    passes = 0
    while True:
        passes += 1
        new = propag(a)
        if not new:
            break
        by_target: dict[str, list[Interval]] = defaultdict(list)
        for t in new:
            by_target[t.target].append(t.value)
        builder = AutomatonBuilder(a)
        for target in sorted(by_target, key=state_key):
            values = by_target[target]
            counters[target] += len(values)
            if counters[target] <= widen_after and target not in widening:
                for value in values:
                    builder.add(LambdaTransition(value, target))
                continue
            widening.add(target)
            direct = builder.lambdas_at(target)
            old = BOTTOM
            for t in direct:
                old = old.lub(t.value)
            joined = old
            for value in values:
                joined = joined.lub(value)
            for t in direct:
                builder.discard(t)
            builder.add(LambdaTransition(old.widen(joined), target))
            if target not in widened:
                widened.append(target)
        a = builder.build()
    if widened:
        logger.debug("Widened states", states=widened, passes=passes)
    return EvalReport(a, passes, tuple(widened), dict(counters))


def eval_automaton(a: LTA, cfg: CompletionConfig) -> LTA:
    return evaluate(a, cfg.widen_after).automaton


def _added(before: LTA, after: LTA) -> int:
    return len(set(after.transitions) - set(before.transitions))


@dataclass(frozen=True)
class CompletionResult:
    automaton: LTA
    converged: bool
    steps: int
    trace: tuple[TraceRecord, ...]

    def raise_for_budget(self) -> "CompletionResult":
        if not self.converged:
            raise StepBudgetExhausted(self.steps)
        return self

    def trace_lines(self) -> list[str]:
        return [record.to_line() for record in self.trace]


def complete(a: LTA, trs: TRS, cfg: Optional[CompletionConfig] = None) -> CompletionResult:
    """
    Run completion until two consecutive automata coincide or the step budget runs out

    Args:
        a: Automaton recognizing the initial terms
        trs: Conditional rewrite system
        cfg: Step budget, widening threshold, equations and solver mode

    Returns:
        Result holding the last automaton, whether a fixpoint was reached,
        the number of steps run and the per-phase trace
    """
    cfg = cfg or CompletionConfig()
    st = CompletionState(current=a)
    report = evaluate(a, cfg.widen_after)
    current = report.automaton
    st.record("eval", _added(a, current), widened=report.widened)
    logger.info(
        "Completion started",
        states=len(a.states),
        rules=len(trs),
        equations=len(cfg.equations),
        max_steps=cfg.max_steps,
    )
    converged = False
    steps = 0
    for step in range(1, cfg.max_steps + 1):
        st.step = steps = step
        first = evaluate(current, cfg.widen_after)
        st.record("eval", _added(current, first.automaton), widened=first.widened)
        stepped = one_step(first.automaton, trs, st, cfg.strict_int)
        st.record("one_step", _added(first.automaton, stepped))
        merged, merges = apply_equations(stepped, cfg.equations, cfg.strict_int)
        st.record("equations", merged=merges)
        touched = {keep for keep, _ in merges if keep in merged.states}
        force = touched if step >= cfg.widen_after else set()
        second = evaluate(merged, cfg.widen_after, force)
        for q, n in second.additions.items():
            st.counters[q] += n
        st.record("eval", _added(merged, second.automaton), widened=second.widened)
        following = second.automaton
        logger.info(
            "Completion step finished",
            step=step,
            states=len(following.states),
            transitions=len(following.transitions),
            merged=len(merges),
        )
        if following == current:
            converged = True
            break
        current = st.current = following
    if not converged:
        logger.warning("Completion step budget exhausted", max_steps=cfg.max_steps)
    return CompletionResult(current, converged, steps, tuple(st.trace))


class VerdictKind(str, Enum):
    SAFE = "safe"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    witness: Optional[Term]
    result: CompletionResult

    @property
    def safe(self) -> bool:
        return self.kind is VerdictKind.SAFE


def check_reachability(
    a0: LTA, bad: LTA, trs: TRS, cfg: Optional[CompletionConfig] = None
) -> Verdict:
    """
    Safe when completion converges and its automaton shares no term with `bad`

    The witness of an Unknown verdict is an accepted term of the intersection;
    it may be spurious because completion over-approximates.
    """
    result = complete(a0, trs, cfg)
    if not result.converged:
        logger.warning("Reachability check inconclusive, completion did not converge")
        return Verdict(VerdictKind.UNKNOWN, None, result)
    counterexample = witness(intersection(result.automaton, bad))
    kind = VerdictKind.SAFE if counterexample is None else VerdictKind.UNKNOWN
    logger.info("Reachability verdict", verdict=kind.value, witness=str(counterexample))
    return Verdict(kind, counterexample, result)


__all__ = [
    "CompletionConfig",
    "CompletionResult",
    "CompletionState",
    "TraceRecord",
    "Verdict",
    "VerdictKind",
    "apply_equations",
    "check_reachability",
    "complete",
    "eval_automaton",
    "evaluate",
    "normalize",
    "omega",
    "one_step",
    "propag",
    "recognized",
]
