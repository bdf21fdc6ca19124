"""
Tests for linear constraint solving over interval boxes
"""

import random
from itertools import product

import pytest

from src.analytics.solver import ConstraintSystem, satisfiable, solve, solve_box
from src.models.automaton import LTA, Alphabet, LambdaTransition
from src.models.errors import NonLinearConstraint
from src.models.lattice import Interval
from src.models.rewriting import Predicate, Relation
from src.models.term import num, op, var


def _system(*predicates) -> ConstraintSystem:
    return ConstraintSystem.from_predicates(predicates)


def _p(relation: str, lhs, rhs) -> Predicate:
    return Predicate(Relation.parse(relation), lhs, rhs)


X, Y = var("x"), var("y")


class TestSolveBox:
    """Test single-box tightening"""

    def test_closure_of_strict_inequalities(self):
        system = _system(_p(">", X, num(3)), _p("<", X, num(7)))
        assert solve_box(system, {"x": Interval(2, 8)}) == {"x": Interval(3, 7)}

    def test_strict_integers(self):
        system = _system(_p(">", X, num(3)), _p("<", X, num(7)))
        assert solve_box(system, {"x": Interval(2, 8)}, strict_int=True) == {"x": Interval(4, 6)}

    def test_strict_upper_bound(self):
        system = _system(_p("<", X, num(3)))
        assert solve_box(system, {"x": Interval(2, 3)}, strict_int=True) == {"x": Interval(2, 2)}
        assert solve_box(system, {"x": Interval(2, 3)}) == {"x": Interval(2, 3)}

    def test_unsatisfiable(self):
        system = _system(_p(">", X, num(5)))
        assert solve_box(system, {"x": Interval(0, 3)}) is None
        assert not satisfiable(system, {"x": Interval(0, 3)})

    def test_two_variables(self):
        """Test projection through Fourier-Motzkin elimination"""
        system = _system(_p("<=", op("+", X, Y), num(4)))
        solved = solve_box(system, {"x": Interval(0, 10), "y": Interval(3, 10)})
        assert solved == {"x": Interval(0, 1), "y": Interval(3, 4)}

    def test_equality(self):
        system = _system(_p("=", X, Y))
        solved = solve_box(system, {"x": Interval(0, 5), "y": Interval(3, 9)})
        assert solved == {"x": Interval(3, 5), "y": Interval(3, 5)}

    def test_scaled_variable(self):
        system = _system(_p("<=", op("*", num(2), X), num(7)))
        assert solve_box(system, {"x": Interval(0, 10)}) == {"x": Interval(0, 3)}

    def test_unbounded_variable(self):
        system = _system(_p(">=", op("-", X, num(2)), num(3)))
        solved = solve_box(system, {})
        assert solved["x"].lo == 5
        assert solved["x"].hi == Interval.top().hi

    def test_disequality_does_not_narrow(self):
        system = _system(_p("!=", X, num(3)))
        assert solve_box(system, {"x": Interval(3, 3)}) == {"x": Interval(3, 3)}

    def test_ground_constraints(self):
        assert solve_box(_system(_p("<", num(1), num(2))), {}) == {}
        assert solve_box(_system(_p("<", num(3), num(2))), {}) is None

    def test_bottom_box(self):
        system = _system(_p("<", X, num(3)))
        assert solve_box(system, {"x": Interval.bottom()}) is None

    def test_nonlinear_rejected(self):
        with pytest.raises(NonLinearConstraint):
            _system(_p("<", op("*", X, Y), num(3)))


class TestSolveSubstitution:
    """Test solving against the lambda values of bound states"""

    def setup_method(self):
        self.automaton = LTA.build(
            Alphabet.of({"f": 1}),
            [
                LambdaTransition(Interval(1, 2), "q1"),
                LambdaTransition(Interval(5, 6), "q1"),
                LambdaTransition(Interval(0, 9), "q2"),
            ],
        )

    def test_each_value_solved_separately(self):
        system = _system(_p("<", X, num(3)))
        assert solve({"x": "q1"}, self.automaton, system) == [{"x": Interval(1, 2)}]

    def test_unconstrained_variables_keep_states(self):
        system = _system(_p(">", X, num(4)))
        assert solve({"x": "q1", "y": "q2"}, self.automaton, system) == [
            {"x": Interval(5, 6), "y": "q2"}
        ]

    def test_no_conditions(self):
        assert solve({"x": "q1"}, self.automaton, ConstraintSystem()) == [{"x": "q1"}]

    def test_state_without_values(self):
        a = self.automaton.with_transitions(list(self.automaton.transitions))
        system = _system(_p("<", X, num(3)))
        assert solve({"x": "q9"}, a, system) == []


@pytest.mark.slow
class TestSolverSoundness:
    """Test every integer solution lies in the solved box"""

    @pytest.mark.parametrize("strict_int", [False, True])
    def test_random_systems(self, strict_int):
        rng = random.Random(2024)
        relations = ["<", "<=", ">", ">=", "="]
        for _ in range(300):
            predicates = []
            for _ in range(rng.randint(1, 3)):
                a, b = rng.randint(-3, 3), rng.randint(-3, 3)
                lhs = op("+", op("*", num(a), X), op("*", num(b), Y))
                predicates.append(_p(rng.choice(relations), lhs, num(rng.randint(-10, 10))))
            system = _system(*predicates)
            box = {}
            for name in ("x", "y"):
                lo = rng.randint(-6, 6)
                box[name] = Interval(lo, lo + rng.randint(0, 6))
            solutions = [
                point
                for point in (
                    {"x": x, "y": y}
                    for x, y in product(
                        range(int(box["x"].lo), int(box["x"].hi) + 1),
                        range(int(box["y"].lo), int(box["y"].hi) + 1),
                    )
                )
                if system.holds(point)
            ]
            solved = solve_box(system, box, strict_int)
            if solved is None:
                assert not solutions
                continue
            for point in solutions:
                assert solved["x"].contains(point["x"])
                assert solved["y"].contains(point["y"])

    def test_three_variable_systems(self):
        """Test 1000 systems over up to three variables against exhaustive enumeration"""
        rng = random.Random(77)
        relations = ["<", "<=", ">", ">=", "=", "!="]
        names = ["x", "y", "z"]
        for _ in range(1000):
            used = names[: rng.randint(1, 3)]
            strict_int = rng.random() < 0.5
            predicates = []
            for _ in range(rng.randint(1, 3)):
                lhs = op("*", num(rng.randint(-20, 20)), var(used[0]))
                for name in used[1:]:
                    lhs = op("+", lhs, op("*", num(rng.randint(-20, 20)), var(name)))
                predicates.append(_p(rng.choice(relations), lhs, num(rng.randint(-20, 20))))
            system = _system(*predicates)
            box = {}
            for name in used:
                lo = rng.randint(-20, 14)
                box[name] = Interval(lo, lo + rng.randint(0, 6))
            ranges = [range(int(box[n].lo), int(box[n].hi) + 1) for n in used]
            solutions = [
                point
                for point in (dict(zip(used, values)) for values in product(*ranges))
                if system.holds(point)
            ]
            solved = solve_box(system, box, strict_int)
            if solved is None:
                assert not solutions, (predicates, box)
                continue
            for point in solutions:
                for name in used:
                    assert solved[name].contains(point[name]), (predicates, box, point)
