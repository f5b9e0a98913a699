"""Tests for k-judge-consistency and the saturation oracle."""

import random

import pytest

from src.core.consistency import (
    ConsistencyError,
    ConstraintSystemTable,
    bounded_width_refutation_search,
    is_k_judge_consistent,
    iteration_bound,
    propagate,
    qwidth_consistency_check,
    saturate_minimal_judgements,
    table_keys,
    verify_system,
)
from src.core.constraints import Constraint
from src.core.judgement_proofs import check_proof
from src.core.model import formula_width
from src.core.semantics import is_true
from src.core.translation import qcsp_translation
from tests.factories import random_instance


class TestPropagation:
    """The narrowing fixpoint."""

    def test_false2_needs_width_two(self, false2):
        """The universal elimination only bites once the binary atom is in the table."""
        assert not is_k_judge_consistent(false2, 2)
        assert is_k_judge_consistent(false2, 1)

    def test_true_instance(self, ex33):
        """True instances are consistent at every k."""
        for k in (1, 2, 3):
            assert propagate(ex33, k).consistent

    def test_table_keys(self, ex33):
        """Keys cover every subset of the free variables up to size k."""
        keys = table_keys(ex33, 1)
        assert (3, frozenset()) in keys
        assert all(len(variables) <= 1 for _, variables in keys)
        assert len(table_keys(ex33, 2)) == 1 + 2 + 4 + 4 + 2 + 4

    def test_iteration_bound(self, false2, ex33):
        """Changing passes never exceed the bound."""
        for instance in (false2, ex33):
            for k in (1, 2):
                assert propagate(instance, k).iterations <= iteration_bound(instance, k)

    def test_rule_order_does_not_matter(self, false2, ex33):
        """Both orders reach the same fixpoint."""
        for instance in (false2, ex33):
            forward = propagate(instance, 2, "forward")
            reverse = propagate(instance, 2, "reverse")
            assert forward.consistent == reverse.consistent
            assert forward.table.dump_lines() == reverse.table.dump_lines()

    def test_empty_entries_reported(self, false2):
        """The report names the empty entries."""
        data = propagate(false2, 2).to_dict()
        assert data["consistent"] is False
        assert "2 [x]" in data["empty"]

    def test_bad_k(self, ex33):
        """k is a positive integer."""
        for k in (0, -1, True, 1.5):
            with pytest.raises(ConsistencyError) as excinfo:
                propagate(ex33, k)
            assert excinfo.value.code == "bad-k"

    def test_bad_order(self, ex33):
        """Only the two known orders are accepted."""
        with pytest.raises(ConsistencyError) as excinfo:
            propagate(ex33, 1, "sideways")
        assert excinfo.value.code == "bad-order"


class TestVerifySystem:
    """Checking tables against the constraint-system properties."""

    def test_fixpoint_is_a_system(self, ex33):
        """A consistent fixpoint table passes every check."""
        result = propagate(ex33, 2)
        assert verify_system(ex33, 2, result.table) is None

    def test_missing_keys(self, ex33):
        """Tables must hold exactly the expected keys."""
        assert verify_system(ex33, 2, ConstraintSystemTable(2)).property == "keys"

    def test_empty_entry(self, false2):
        """An inconsistent fixpoint is not a system."""
        result = propagate(false2, 2)
        assert verify_system(false2, 2, result.table).property == "non-empty"

    def test_atom_entry(self, ex33):
        """Atom entries stay inside their relation."""
        table = propagate(ex33, 2).table.copy()
        key = (4, frozenset(ex33.formula.free_vars(4)))
        table[key] = Constraint.full(key[1], ex33.universe)
        violation = verify_system(ex33, 2, table)
        assert violation.property == "alpha"
        assert violation.witness is not None


class TestSaturation:
    """Minimal judgements and bounded-width refutations."""

    def test_minimal_judgements(self, ex33, x_var):
        """The inner occurrence of x is not narrowed by the outer one."""
        saturated = saturate_minimal_judgements(ex33, 2)
        inner = saturated.constraint(6, frozenset({x_var}))
        assert inner.sorted_rows() == [("a",), ("b",), ("c",)]
        assert saturated.constraint(2, frozenset({x_var})).sorted_rows() == [("a",)]
        assert saturated.empty_position() is None
        assert check_proof(ex33, saturated.proof).valid

    def test_refutation_search(self, false2):
        """false2 is refuted at width two but not at width one."""
        proof = bounded_width_refutation_search(false2, 2)
        assert proof is not None
        report = check_proof(false2, proof)
        assert report.valid and report.refutes
        assert report.width <= 2
        assert bounded_width_refutation_search(false2, 1) is None

    def test_bad_k(self, ex33):
        """Saturation checks k too."""
        with pytest.raises(ConsistencyError):
            saturate_minimal_judgements(ex33, 0)


class TestQWidth:
    """Consistency against truth on prenex sentences."""

    def test_prenex_translation(self, qbf_false, qbf_true):
        """Width-two prenex formulas are decided at k = 2."""
        for formula in (qbf_false, qbf_true):
            instance, _ = qcsp_translation(formula)
            report = qwidth_consistency_check(instance, 2)
            assert report.agree
            assert report.to_dict()["oracle_truth"] == is_true(formula)

    def test_not_prenex(self, ex33):
        """The check refuses non-prenex formulas."""
        with pytest.raises(ConsistencyError) as excinfo:
            qwidth_consistency_check(ex33, 2)
        assert excinfo.value.code == "not-prenex"


class TestConsistencySweep:
    """Propagation against saturation and the oracle on random instances."""

    def test_random_instances(self):
        """Propagation agrees with saturation, and with truth once k reaches the width."""
        rng = random.Random(99)
        for _ in range(300):
            instance = random_instance(rng, max_nodes=5)
            truth = is_true(instance)
            for k in (1, 2):
                consistent = propagate(instance, k).consistent
                refutation = bounded_width_refutation_search(instance, k)
                assert consistent == (refutation is None)
                if not consistent:
                    assert not truth
                if k >= formula_width(instance):
                    assert consistent == truth
