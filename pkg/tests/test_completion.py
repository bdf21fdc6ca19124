"""
Tests for matching, evaluation, equations and the completion loop
"""

import random
from collections import defaultdict
from pathlib import Path

import pytest
from pydantic import ValidationError

from src.analytics.completion import (
    CompletionConfig,
    CompletionState,
    VerdictKind,
    apply_equations,
    check_reachability,
    complete,
    constant_state,
    eval_automaton,
    evaluate,
    normalize,
    omega,
    one_step,
    propag,
    recognized,
)
from src.analytics.matching import matching
from src.analytics.oracle import EnumBounds, enumerate_language
from src.config import Settings
from src.ingestion.spec_loader import parse_spec
from src.models.automaton import (
    LTA,
    Alphabet,
    AutomatonBuilder,
    EpsilonTransition,
    GroundTransition,
    LambdaTransition,
)
from src.models.errors import StepBudgetExhausted
from src.models.lattice import POS_INF, Interval
from src.models.rewriting import TRS, Equation, EquationSet, Predicate, Relation
from src.models.term import app, atom, num, op, var
from src.processing.automaton_ops import member, reaches
from src.processing.rewriter import normal_form, reachable

GOLDEN_DIR = Path(__file__).parent / "data"
NUMBERS = Alphabet.of({"f": 1, "g": 2})


def _loop_automaton(start: Interval, step: Interval) -> LTA:
    return LTA.build(
        NUMBERS,
        [
            LambdaTransition(start, "q8"),
            LambdaTransition(step, constant_state(step)),
            GroundTransition("+", ("q8", constant_state(step)), "q8"),
        ],
    )


def _colours(a: LTA) -> dict[str, int]:
    """Colour refinement over finals, lambda values and transition shapes"""
    states = a.sorted_states()
    initial = {
        q: (q in a.finals, tuple(sorted(str(t.value) for t in a.lambdas if t.target == q)))
        for q in states
    }
    ranks = {c: i for i, c in enumerate(sorted(set(initial.values())))}
    colour = {q: ranks[initial[q]] for q in states}
    while True:
        entries: dict[str, list[tuple]] = defaultdict(list)
        for t in a.grounds:
            shape = tuple(colour[s] for s in t.states)
            for i, s in enumerate(t.states):
                entries[s].append(("G", t.head, i, shape))
        for t in a.epsilons:
            shape = (colour[t.source], colour[t.target])
            entries[t.source].append(("E", 0, shape))
            entries[t.target].append(("E", 1, shape))
        signature = {q: (colour[q], tuple(sorted(entries[q]))) for q in states}
        ranks = {s: i for i, s in enumerate(sorted(set(signature.values())))}
        refined = {q: ranks[signature[q]] for q in states}
        if len(set(refined.values())) == len(set(colour.values())):
            return refined
        colour = refined


def _relabel(a: LTA) -> LTA:
    colour = _colours(a)
    assert len(set(colour.values())) == len(a.states)
    return a.renamed({q: f"s{colour[q]}" for q in a.states})


def _lambdas_at(a: LTA, q: str) -> set[Interval]:
    return {t.value for t in a.lambdas if t.target == q}


class TestMatching:
    """Test pattern matching against states"""

    def test_variable_binds_state(self, running_spec):
        a0 = running_spec.automaton("A0")
        assert matching(app("f", var("x")), a0, "q2") == [{"x": "q1"}]
        assert matching(app("f", var("x")), a0, "q1") == []

    def test_lattice_constants(self, running_spec):
        a0 = running_spec.automaton("A0")
        assert matching(app("f", atom(1)), a0, "q2") == [{}]
        assert matching(app("f", num(2)), a0, "q2") == [{}]
        assert matching(app("f", atom(3)), a0, "q2") == []

    def test_through_epsilon(self):
        a = LTA.build(
            NUMBERS,
            [
                LambdaTransition(Interval(0, 1), "q1"),
                GroundTransition("f", ("q1",), "q2"),
                EpsilonTransition("q2", "q3"),
            ],
        )
        assert matching(app("f", var("x")), a, "q3") == [{"x": "q1"}]

    def test_shared_variable_needs_same_state(self):
        a = LTA.build(
            NUMBERS,
            [
                LambdaTransition(Interval(0, 1), "q1"),
                LambdaTransition(Interval(5, 6), "q2"),
                GroundTransition("g", ("q1", "q2"), "q3"),
                GroundTransition("g", ("q1", "q1"), "q4"),
            ],
        )
        pattern = app("g", var("x"), var("x"))
        assert matching(pattern, a, "q3") == []
        assert matching(pattern, a, "q4") == [{"x": "q1"}]

    def test_unknown_state(self, running_spec):
        assert matching(app("f", var("x")), running_spec.automaton("A0"), "q9") == []


class TestCriticalPairs:
    """Test omega, normalize and one_step"""

    def test_omega_rebinds_covering_solution(self, running_spec):
        a0 = running_spec.automaton("A0")
        rule_a, _ = running_spec.trs().rules
        assert omega(a0, rule_a, "q2") == [{"x": "q1"}]

    def test_omega_restricts_value(self, running_spec):
        a0 = running_spec.automaton("A0")
        _, rule_b = running_spec.trs().rules
        assert omega(a0, rule_b, "q2") == [{"x": Interval(2, 2)}]
        assert omega(a0, rule_b, "q2", strict_int=True) == []

    def test_one_step_normalizes_right_side(self, running_spec):
        a0 = running_spec.automaton("A0")
        rule_a, _ = running_spec.trs().rules
        st = CompletionState(current=a0)
        stepped = one_step(a0, TRS("A", [rule_a]), st, strict_int=True)
        added = set(stepped.transitions) - set(a0.transitions)
        assert added == {
            LambdaTransition(Interval(1, 1), "q[1,1]"),
            GroundTransition("+", ("q1", "q[1,1]"), "q!3"),
            GroundTransition("f", ("q!3",), "q!2"),
            GroundTransition("cons", ("q1", "q!2"), "q!1"),
            EpsilonTransition("q!1", "q2"),
        }

    def test_one_step_without_pairs(self, running_spec):
        a0 = running_spec.automaton("A0")
        st = CompletionState(current=a0)
        assert one_step(a0, TRS("empty"), st) == a0

    def test_pairs_into_one_state_share_prime(self, running_spec):
        """Test both rules firing into the same state normalize into a single fresh state"""
        cfg = CompletionConfig(max_steps=1, widen_after=3, strict_int=True)
        a1 = complete(running_spec.automaton("A0"), running_spec.trs(), cfg).automaton
        stepped = one_step(a1, running_spec.trs(), CompletionState(current=a1), strict_int=True)
        added = set(stepped.transitions) - set(a1.transitions)
        assert {t for t in added if isinstance(t, EpsilonTransition)} == {EpsilonTransition("q!4", "q!2")}
        assert GroundTransition("cons", ("q[2,2]", "q!5"), "q!4") in added
        assert GroundTransition("cons", ("q[3,3]", "q!7"), "q!4") in added

    def test_normalize_reuses_structure_only(self):
        """Test a state that merely covers a value is not reused for an operator subterm"""
        a = LTA.build(NUMBERS, [LambdaTransition(Interval(0, 10), "qv")], states=["qt", "qu"])
        builder = AutomatonBuilder(a)
        st = CompletionState(current=a)
        instance = app("f", op("+", atom(1), atom(2)))
        assert recognized(instance.children[0], builder) is None
        normalize(instance, "qt", builder, st)
        assert GroundTransition("+", ("q[1,1]", "q[2,2]"), "q!1") in builder.transitions
        assert GroundTransition("f", ("q!1",), "qt") in builder.transitions
        assert GroundTransition("f", ("qv",), "qt") not in builder.transitions
        assert recognized(instance, builder) == "qt"
        normalize(instance, "qu", builder, st)
        assert GroundTransition("f", ("q!1",), "qu") in builder.transitions
        assert "q!2" not in builder.states

    def test_recognized_picks_smallest_target(self):
        a = LTA.build(
            NUMBERS,
            [
                LambdaTransition(Interval(1, 1), "q[1,1]"),
                GroundTransition("f", ("q[1,1]",), "q!7"),
                GroundTransition("f", ("q[1,1]",), "q!13"),
            ],
        )
        builder = AutomatonBuilder(a)
        assert recognized(app("f", atom(1)), builder) == "q!7"
        builder.discard(GroundTransition("f", ("q[1,1]",), "q!7"))
        assert recognized(app("f", atom(1)), builder) == "q!13"
        assert recognized(app("f", atom(2)), builder) is None

    def test_constant_state_names(self):
        assert constant_state(Interval(1, 1)) == "q[1,1]"
        assert constant_state(Interval(5, POS_INF)) == "q[5,+inf]"


class TestEvaluation:
    """Test lambda propagation and widening"""

    def test_propag_single_pass(self):
        a = _loop_automaton(Interval(5, 5), Interval(2, 2))
        assert propag(a) == [LambdaTransition(Interval(7, 7), "q8")]

    def test_self_loop_widens(self):
        report = evaluate(_loop_automaton(Interval(5, 5), Interval(2, 2)), widen_after=3)
        assert _lambdas_at(report.automaton, "q8") == {Interval(5, POS_INF)}
        assert report.widened == ("q8",)

    def test_growing_sum_widens(self):
        a = LTA.build(
            NUMBERS,
            [
                LambdaTransition(Interval(3, 6), "q1"),
                LambdaTransition(Interval(2, 8), "q2"),
                GroundTransition("+", ("q1", "q2"), "q2"),
            ],
        )
        for widen_after in (0, 3):
            report = evaluate(a, widen_after)
            assert _lambdas_at(report.automaton, "q2") == {Interval(2, POS_INF)}
            assert _lambdas_at(report.automaton, "q1") == {Interval(3, 6)}

    def test_forced_widening(self):
        report = evaluate(
            _loop_automaton(Interval(5, 5), Interval(2, 2)), widen_after=10, force_widen={"q8"}
        )
        assert _lambdas_at(report.automaton, "q8") == {Interval(5, POS_INF)}
        assert report.passes == 2

    def test_eval_automaton_uses_config(self):
        a = _loop_automaton(Interval(5, 5), Interval(2, 2))
        widened = eval_automaton(a, CompletionConfig(widen_after=3))
        assert _lambdas_at(widened, "q8") == {Interval(5, POS_INF)}
        assert "q8" in reaches(op("+", atom(5), atom(2)), widened)

    def test_stable_automaton(self, run_automaton):
        report = evaluate(run_automaton, widen_after=3)
        assert report.automaton == run_automaton
        assert report.passes == 1
        assert report.widened == ()

    def test_builtin_loops_stop_within_bound(self):
        """Test widening bounds the number of passes on random operator loops"""
        rng = random.Random(8)
        states = ["q1", "q2", "q3"]
        for _ in range(100):
            widen_after = rng.randint(2, 3)
            transitions = []
            for q in states:
                if rng.random() < 0.8:
                    lo = rng.randint(-5, 5)
                    transitions.append(LambdaTransition(Interval(lo, lo + rng.randint(0, 3)), q))
            constants = []
            for _ in range(rng.randint(1, 2)):
                value = Interval.atom(rng.randint(-3, 3))
                constants.append(constant_state(value))
                transitions.append(LambdaTransition(value, constants[-1]))
            for _ in range(rng.randint(1, 4)):
                args = (rng.choice(states), rng.choice(states + constants))
                transitions.append(GroundTransition(rng.choice(["+", "-"]), args, rng.choice(states)))
            report = evaluate(LTA.build(NUMBERS, transitions), widen_after)
            assert report.passes <= 10 * widen_after, str(report.automaton)
            assert evaluate(report.automaton, widen_after).passes == 1


class TestEquations:
    """Test state merging by guarded equations"""

    def _automaton(self, start: int) -> LTA:
        return LTA.build(
            NUMBERS,
            [
                LambdaTransition(Interval(start, start), "qa"),
                LambdaTransition(Interval(2, 2), "q[2,2]"),
                LambdaTransition(Interval(7, 7), "qb"),
                GroundTransition("+", ("qa", "q[2,2]"), "qb"),
            ],
        )

    def _equations(self) -> EquationSet:
        x = var("x")
        return EquationSet(
            "E", [Equation(x, op("+", x, num(2)), (Predicate(Relation.GE, x, num(5)),))]
        )

    def test_guard_satisfied(self):
        merged, merges = apply_equations(self._automaton(5), self._equations())
        assert merges == [("qa", "qb")]
        assert "qb" not in merged.states
        assert GroundTransition("+", ("qa", "q[2,2]"), "qa") in merged.grounds
        assert _lambdas_at(merged, "qa") == {Interval(5, 5), Interval(7, 7)}

    def test_guard_unsatisfiable(self):
        a = self._automaton(1)
        merged, merges = apply_equations(a, self._equations())
        assert merges == []
        assert merged == a

    def test_no_equations(self, run_automaton):
        assert apply_equations(run_automaton, EquationSet("none")) == (run_automaton, [])


class TestCompletionConfig:
    """Test configuration precedence and validation"""

    def test_overrides_win(self):
        settings = Settings(max_steps=20, widen_after=4)
        cfg = CompletionConfig.from_settings(settings, widen_after=2, strict_int=None)
        assert cfg.max_steps == 20
        assert cfg.widen_after == 2
        assert not cfg.strict_int
        assert len(cfg.equations) == 0

    def test_validation(self):
        with pytest.raises(ValidationError):
            CompletionConfig(max_steps=0)

    def test_spec_config_block(self, running_spec):
        cfg = running_spec.completion_config(Settings())
        assert cfg.strict_int
        assert cfg.widen_after == 3
        assert cfg.equations.name == "E"


class TestRunningExample:
    """Test completion of the list-unfolding rules"""

    @pytest.fixture
    def result(self, running_spec):
        cfg = running_spec.completion_config(Settings())
        return complete(running_spec.automaton("A0"), running_spec.trs(), cfg)

    def test_converges(self, result):
        assert result.converged
        assert result.steps == 6

    def test_matches_golden(self, result):
        """Test the completed automaton equals the recorded one up to state names"""
        golden = parse_spec(GOLDEN_DIR / "running.golden").automaton("completed")
        assert len(result.automaton.states) == len(golden.states)
        completed, expected = _relabel(result.automaton), _relabel(golden)
        assert completed.transitions == expected.transitions
        assert completed.finals == expected.finals

    def test_widened_loop(self, result):
        """Test the merged state counts upwards by two from five"""
        a = result.automaton
        loops = [
            t
            for t in a.grounds
            if t.head == "+"
            and t.args == (t.target, "q[2,2]")
            and Interval(5, POS_INF) in _lambdas_at(a, t.target)
        ]
        assert loops

    def test_equation_applied(self, result):
        merges = [r for r in result.trace if r.phase == "equations" and r.merged]
        assert merges

    def test_deterministic_output(self, running_spec, result):
        cfg = running_spec.completion_config(Settings())
        again = complete(running_spec.automaton("A0"), running_spec.trs(), cfg)
        assert again.automaton == result.automaton
        assert again.trace_lines() == result.trace_lines()

    def test_reachable_terms_accepted(self, running_spec, result):
        """Test every concretely reachable term is in the completed language"""
        seeds = [app("f", num(1)), app("f", num(2))]
        reach = reachable(seeds, running_spec.trs(), 6)
        for term in reach.terms:
            assert member(term, result.automaton), str(term)

    def test_trace_shape(self, result):
        lines = result.trace_lines()
        assert lines[0].startswith("step=0 phase=eval")
        assert len(lines) == 1 + 4 * result.steps

    def test_safe(self, running_spec):
        cfg = running_spec.completion_config(Settings())
        verdict = check_reachability(
            running_spec.automaton("A0"), running_spec.automaton("Bad"), running_spec.trs(), cfg
        )
        assert verdict.kind is VerdictKind.SAFE
        assert verdict.safe
        assert verdict.witness is None


class TestFactorial:
    """Test completion with a builtin product in the rules"""

    @pytest.fixture
    def result(self, factorial_spec):
        cfg = factorial_spec.completion_config(Settings())
        return complete(factorial_spec.automaton(), factorial_spec.trs(), cfg)

    def test_converges(self, result):
        assert result.converged
        assert result.steps == 4

    def test_factorial_values_accepted(self, result):
        for value in (1, 2, 6):
            assert member(atom(value), result.automaton)
        assert not member(atom(0), result.automaton)
        assert not member(atom(-1), result.automaton)

    def test_initial_terms_kept(self, result):
        for k in range(4):
            assert member(app("fact", atom(k)), result.automaton)

    def test_normal_forms_accepted(self, factorial_spec, result):
        for k in range(4):
            outcome = normal_form(app("fact", num(k)), factorial_spec.trs())
            assert member(outcome.term, result.automaton)


class TestBranches:
    """Test guarded branch rules over a bytecode frame"""

    @pytest.fixture
    def result(self, branches_spec):
        cfg = branches_spec.completion_config(Settings())
        return complete(branches_spec.automaton("Init"), branches_spec.trs(), cfg)

    def test_converges(self, result):
        assert result.converged
        assert result.steps == 2

    def test_both_outcomes(self, result):
        main, empty = app("main"), app("empty")
        assert member(app("frame", main, atom(7), empty, empty), result.automaton)
        assert member(app("frame", main, atom(4), empty, empty), result.automaton)
        assert not member(app("frame", main, atom(5), empty, empty), result.automaton)

    def test_safe(self, branches_spec):
        verdict = check_reachability(
            branches_spec.automaton("Init"),
            branches_spec.automaton("Bad"),
            branches_spec.trs(),
            branches_spec.completion_config(Settings()),
        )
        assert verdict.safe


class TestCompletionLoop:
    """Test budget handling and trivial runs"""

    def test_empty_trs_converges_immediately(self, running_spec):
        a0 = running_spec.automaton("A0")
        result = complete(a0, TRS("empty"))
        assert result.converged
        assert result.steps == 1
        assert result.automaton == a0

    def test_budget_exhausted(self, running_spec):
        cfg = CompletionConfig(max_steps=1, widen_after=3, strict_int=True)
        result = complete(running_spec.automaton("A0"), running_spec.trs(), cfg)
        assert not result.converged
        assert result.steps == 1
        with pytest.raises(StepBudgetExhausted):
            result.raise_for_budget()

    def test_unconverged_check_is_unknown(self, running_spec):
        cfg = CompletionConfig(max_steps=1, widen_after=3, strict_int=True)
        verdict = check_reachability(
            running_spec.automaton("A0"), running_spec.automaton("Bad"), running_spec.trs(), cfg
        )
        assert verdict.kind is VerdictKind.UNKNOWN
        assert verdict.witness is None

    @pytest.mark.slow
    def test_phases_never_shrink_language(self, running_spec):
        """Test one_step, equations and evaluation only ever add accepted terms"""
        cfg = running_spec.completion_config(Settings())
        bounds = EnumBounds(max_depth=3, atom_lo=0, atom_hi=6)
        current = running_spec.automaton("A0")
        st = CompletionState(current=current)
        for step in range(1, 4):
            st.step = step
            before = enumerate_language(current, bounds)
            stepped = one_step(current, running_spec.trs(), st, cfg.strict_int)
            merged, _ = apply_equations(stepped, cfg.equations, cfg.strict_int)
            evaluated = eval_automaton(merged, cfg)
            languages = [enumerate_language(x, bounds) for x in (stepped, merged, evaluated)]
            assert not any(e.truncated for e in [before, *languages])
            assert before.terms <= languages[0].terms <= languages[1].terms <= languages[2].terms
            current = evaluated

    @pytest.mark.slow
    @pytest.mark.parametrize("hi", [0, 1, 2, 4, 5])
    def test_factorial_soundness(self, factorial_spec, hi):
        a = LTA.build(
            factorial_spec.alphabet,
            [LambdaTransition(Interval(0, hi), "q1"), GroundTransition("fact", ("q1",), "q2")],
            finals=["q2"],
        )
        result = complete(a, factorial_spec.trs(), CompletionConfig(widen_after=3))
        if not result.converged:
            pytest.skip("completion did not converge within the default budget")
        for k in range(hi + 1):
            for term in reachable([app("fact", num(k))], factorial_spec.trs(), 8).terms:
                assert member(term, result.automaton), str(term)
