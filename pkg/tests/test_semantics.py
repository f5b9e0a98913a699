"""Tests for the brute-force oracle."""

import random

import pytest

from src.core.constraints import Assignment
from src.core.semantics import EvaluationError, Evaluator, evaluate, is_true
from tests.factories import random_instance


class TestOracle:
    """Truth of whole sentences."""

    def test_running_example_is_true(self, ex33):
        """x = a relates to every y, and every y has some E-predecessor."""
        assert is_true(ex33) is True

    def test_false2(self, false2):
        """No element relates to all of d, e and f."""
        assert is_true(false2) is False

    def test_qbfs(self, qbf_false, qbf_true, nonprenex):
        """The QCBF fixtures evaluate as expected."""
        assert is_true(qbf_false) is False
        assert is_true(qbf_true) is True
        assert is_true(nonprenex) is False

    def test_evaluator_is_reusable(self, ex33):
        """Repeated evaluation through one evaluator gives the same answer."""
        evaluator = Evaluator(ex33)
        assert evaluator.is_true() == evaluator.is_true()


class TestEvaluate:
    """Evaluation of subformula occurrences."""

    def test_atom(self, ex33, x_var, y_var):
        """Atoms hold exactly on the relation's tuples."""
        assert evaluate(ex33, 4, {x_var: "a", y_var: "d"}) is True
        assert evaluate(ex33, 4, {x_var: "b", y_var: "d"}) is False

    def test_inner_exists(self, ex33, y_var):
        """Every y has an E-predecessor."""
        for value in ("d", "e", "f"):
            assert evaluate(ex33, 5, {y_var: value}) is True

    def test_forall(self, ex33, x_var):
        """Only a relates to every element of the second sort."""
        assert evaluate(ex33, 2, Assignment.of({x_var: "a"})) is True
        assert evaluate(ex33, 2, {x_var: "b"}) is False
        assert evaluate(ex33, 2, {x_var: "c"}) is False

    def test_wrong_domain(self, ex33, x_var):
        """The assignment must cover exactly the free variables."""
        with pytest.raises(EvaluationError):
            evaluate(ex33, 4, {x_var: "a"})

    def test_wrong_value(self, ex33, x_var):
        """Values come from the variable's universe."""
        with pytest.raises(EvaluationError):
            evaluate(ex33, 2, {x_var: "d"})

    def test_satisfying_constraint(self, ex33, x_var):
        """The constraint defined by index 2 is x = a."""
        constraint = Evaluator(ex33).satisfying_constraint(2)
        assert constraint.variables == {x_var}
        assert constraint.sorted_rows() == [("a",)]

    def test_clause_leaf(self, qbf_false):
        """Clause leaves are disjunctions."""
        x, y = sorted(qbf_false.free_vars(4))
        assert evaluate(qbf_false, 4, {x: "0", y: "1"}) is True
        assert evaluate(qbf_false, 4, {x: "0", y: "0"}) is False


class TestOracleConsistency:
    """The memoized oracle agrees with itself on random sentences."""

    def test_subformula_agreement(self):
        """Root truth equals the satisfying constraint of the root being non-empty."""
        rng = random.Random(7)
        for _ in range(100):
            instance = random_instance(rng)
            evaluator = Evaluator(instance)
            root = evaluator.satisfying_constraint(instance.formula.root)
            assert evaluator.is_true() == (not root.is_empty)
