"""
Tests for automaton construction, runs and boolean operations
"""

import pytest

from src.models.automaton import (
    LTA,
    Alphabet,
    EpsilonTransition,
    GroundTransition,
    LambdaTransition,
    sorted_states,
)
from src.models.errors import ArityError, NonDeterministicInput, TermError, UnknownSymbol
from src.models.lattice import BOTTOM, NEG_INF, POS_INF, Interval
from src.models.term import app, atom, lat, num, op, state, var
from src.processing.automaton_ops import (
    MAX_VALUE_COMBINATIONS,
    complement,
    eliminate_epsilon,
    included_in,
    intersection,
    is_deterministic,
    is_empty,
    member,
    merge_states,
    reaches,
    reduce,
    union,
    witness,
)


def _interval_run(alphabet: Alphabet, lo: int, hi: int, prefix: str) -> LTA:
    return LTA.build(
        alphabet,
        [
            LambdaTransition(Interval(lo, hi), f"{prefix}1"),
            GroundTransition("f", (f"{prefix}1",), f"{prefix}2"),
        ],
        finals=[f"{prefix}2"],
    )


class TestLTA:
    """Test building automata"""

    def test_states_collected(self, run_automaton):
        assert run_automaton.states == frozenset({"q1", "q2"})
        assert run_automaton.finals == frozenset({"q2"})
        assert len(run_automaton.lambdas) == 1
        assert len(run_automaton.grounds) == 1

    def test_canonical_order(self, unary_alphabet):
        """Test transition order does not change the automaton"""
        transitions = [
            GroundTransition("f", ("q1",), "q2"),
            LambdaTransition(Interval(0, 4), "q1"),
            EpsilonTransition("q2", "q3"),
        ]
        first = LTA.build(unary_alphabet, transitions, finals=["q3"])
        second = LTA.build(unary_alphabet, list(reversed(transitions)), finals=["q3"])
        assert first == second
        assert str(first) == str(second)

    def test_unknown_symbol(self, unary_alphabet):
        with pytest.raises(UnknownSymbol):
            LTA.build(unary_alphabet, [GroundTransition("h", ("q1",), "q2")])

    def test_arity_mismatch(self, unary_alphabet):
        with pytest.raises(ArityError):
            LTA.build(unary_alphabet, [GroundTransition("f", ("q1", "q1"), "q2")])

    def test_bottom_lambda_rejected(self):
        with pytest.raises(ValueError):
            LambdaTransition(BOTTOM, "q1")

    def test_transition_text(self):
        assert str(LambdaTransition(Interval(1, 2), "q1")) == "[1,2] -> q1"
        assert str(GroundTransition("f", ("q1", "q2"), "q")) == "f(q1, q2) -> q"
        assert str(GroundTransition("nil", (), "q")) == "nil -> q"
        assert str(EpsilonTransition("q1", "q2")) == "q1 -> q2"

    def test_natural_state_order(self):
        assert sorted_states(["q10", "q2", "q!12", "q!3"]) == ["q2", "q10", "q!3", "q!12"]


class TestAlphabet:
    """Test alphabet validation"""

    def test_default_builtins(self):
        alphabet = Alphabet.of({"f": 1})
        assert alphabet.is_builtin("+")
        assert alphabet.is_passive("f")
        assert alphabet.arity("*") == 2
        assert alphabet.arity("g") is None

    def test_clash_rejected(self):
        with pytest.raises(ArityError):
            Alphabet.of({"+": 2})

    def test_unknown_builtin_rejected(self):
        with pytest.raises(ArityError):
            Alphabet.of({"f": 1}, {"%": 2})

    def test_merge_conflict(self):
        with pytest.raises(ArityError):
            Alphabet.of({"f": 1}).merged(Alphabet.of({"f": 2}))


class TestRuns:
    """Test reaches and member"""

    def test_member_inside_interval(self, run_automaton):
        assert member(app("f", atom(2)), run_automaton)
        assert member(app("f", lat(Interval(1, 3))), run_automaton)
        assert member(app("f", num(4)), run_automaton)

    def test_non_member(self, run_automaton):
        assert not member(app("f", atom(5)), run_automaton)
        assert not member(app("f", lat(Interval(3, 5))), run_automaton)
        assert not member(atom(2), run_automaton)

    def test_operators_evaluated(self, run_automaton):
        """Test interpreted subterms reach states by value"""
        assert member(app("f", op("+", atom(1), atom(2))), run_automaton)
        assert not member(app("f", op("*", atom(3), atom(2))), run_automaton)

    def test_state_leaves(self, run_automaton):
        assert reaches(app("f", state("q1")), run_automaton) == frozenset({"q2"})
        with pytest.raises(UnknownSymbol):
            reaches(state("q9"), run_automaton)

    def test_non_ground_rejected(self, run_automaton):
        with pytest.raises(TermError):
            reaches(app("f", var("x")), run_automaton)

    def test_unknown_symbol(self, run_automaton):
        with pytest.raises(UnknownSymbol):
            reaches(app("h", atom(1)), run_automaton)

    def test_epsilon_closure(self, unary_alphabet):
        a = LTA.build(
            unary_alphabet,
            [
                LambdaTransition(Interval(0, 4), "q1"),
                GroundTransition("f", ("q1",), "q2"),
                EpsilonTransition("q2", "q3"),
            ],
            finals=["q3"],
        )
        assert reaches(app("f", atom(1)), a) == frozenset({"q2", "q3"})
        assert member(app("f", atom(1)), a)

    def test_operator_over_wide_state_is_capped(self, unary_alphabet):
        """Test an operator whose value combinations exceed the cap stops matching by value"""

        def spread(count: int) -> LTA:
            lambdas = [LambdaTransition(Interval(2 * k, 2 * k), "qa") for k in range(count)]
            return LTA.build(unary_alphabet, lambdas + [LambdaTransition(Interval.top(), "qt")])

        term = op("+", state("qa"), state("qa"))
        assert 16 * 16 <= MAX_VALUE_COMBINATIONS < 17 * 17
        assert reaches(term, spread(16)) == frozenset({"qt"})
        assert reaches(term, spread(17)) == frozenset()


class TestBooleanOperations:
    """Test union, intersection, complement and inclusion"""

    def test_union(self, unary_alphabet):
        a = _interval_run(unary_alphabet, 0, 1, "q")
        b = _interval_run(unary_alphabet, 5, 6, "q")
        u = union(a, b)
        assert "L.q1" in u.states and "R.q1" in u.states
        assert member(app("f", atom(0)), u)
        assert member(app("f", atom(6)), u)
        assert not member(app("f", atom(3)), u)

    def test_intersection(self, run_automaton, unary_alphabet):
        other = _interval_run(unary_alphabet, 3, 9, "p")
        both = intersection(run_automaton, other)
        assert LambdaTransition(Interval(3, 4), "q1&p1") in both.lambdas
        assert member(app("f", atom(3)), both)
        assert not member(app("f", atom(2)), both)
        assert not member(app("f", atom(5)), both)

    def test_disjoint_intersection_is_empty(self, run_automaton, unary_alphabet):
        other = _interval_run(unary_alphabet, 10, 20, "p")
        assert is_empty(intersection(run_automaton, other))
        assert not is_empty(run_automaton)

    def test_complement(self, run_automaton):
        negated = complement(run_automaton)
        assert "sink" in negated.states
        assert LambdaTransition(Interval(NEG_INF, -1), "sink") in negated.lambdas
        assert LambdaTransition(Interval(5, POS_INF), "sink") in negated.lambdas
        assert member(app("f", atom(5)), negated)
        assert member(atom(2), negated)
        assert not member(app("f", atom(2)), negated)

    def test_complement_requires_determinism(self, run_automaton):
        extra = run_automaton.with_transitions(
            list(run_automaton.transitions) + [LambdaTransition(Interval(3, 6), "q3")]
        )
        assert not is_deterministic(extra)
        with pytest.raises(NonDeterministicInput):
            complement(extra)

    def test_included(self, run_automaton, unary_alphabet):
        wider = _interval_run(unary_alphabet, 0, 10, "p")
        result = included_in(run_automaton, wider)
        assert result.included
        assert result.witness is None
        assert not result.approximate

    def test_not_included_with_witness(self, run_automaton, unary_alphabet):
        wider = _interval_run(unary_alphabet, 0, 10, "p")
        result = included_in(wider, run_automaton)
        assert not result.included
        assert result.witness == app("f", atom(5))
        assert member(result.witness, wider)
        assert not member(result.witness, run_automaton)


class TestStructuralOperations:
    """Test epsilon elimination, reduction, merging and witnesses"""

    def test_eliminate_epsilon(self, unary_alphabet):
        a = LTA.build(
            unary_alphabet,
            [LambdaTransition(Interval(1, 1), "p"), EpsilonTransition("p", "r")],
            finals=["r"],
        )
        flat = eliminate_epsilon(a)
        assert not flat.epsilons
        assert LambdaTransition(Interval(1, 1), "r") in flat.lambdas
        assert member(atom(1), flat)

    def test_reduce_drops_inaccessible(self, run_automaton):
        padded = run_automaton.with_transitions(
            list(run_automaton.transitions) + [GroundTransition("f", ("qd",), "q2")]
        )
        assert "qd" in padded.states
        reduced = reduce(padded)
        assert reduced.states == frozenset({"q1", "q2"})
        assert len(reduced.grounds) == 1

    def test_is_empty_without_base_case(self, unary_alphabet):
        a = LTA.build(unary_alphabet, [GroundTransition("g", ("qz", "qz"), "qz")], finals=["qz"])
        assert is_empty(a)
        assert witness(a) is None

    def test_merge_states(self, unary_alphabet):
        a = LTA.build(
            unary_alphabet,
            [
                LambdaTransition(Interval(0, 1), "q1"),
                LambdaTransition(Interval(5, 6), "q3"),
                GroundTransition("f", ("q1",), "q2"),
                GroundTransition("f", ("q3",), "q2"),
            ],
            finals=["q2"],
        )
        merged = merge_states(a, "q1", "q3")
        assert merged.states == frozenset({"q1", "q2"})
        assert len(merged.grounds) == 1
        assert {t.value for t in merged.lambdas} == {Interval(0, 1), Interval(5, 6)}

    def test_witness_is_smallest(self, run_automaton):
        assert witness(run_automaton) == app("f", atom(0))
