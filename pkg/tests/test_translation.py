"""Tests for the translations between clause and judgement proofs."""

import random
from itertools import product

import pytest

from src.core.clause_proofs import ClauseProof, ClauseRule, check_clause_proof
from src.core.clauses import Clause
from src.core.constraints import Assignment
from src.core.judgement_proofs import JudgementProof, Rule, check_proof, generate_refutation
from src.core.model import BOOLEAN_UNIVERSE, NodeKind
from src.core.semantics import is_true
from src.core.translation import (
    TranslationError,
    clause_constraint,
    clause_to_constraint_proof,
    constraint_to_clause_proof,
    qcsp_translation,
)
from tests.factories import random_qbf


@pytest.fixture
def clause_refutation():
    proof = ClauseProof()
    proof.add(ClauseRule.CLAUSE, (), 4, Clause.of("x", "y"))
    proof.add(ClauseRule.UPWARD_FLOW, (0,), 3, Clause.of("x", "y"))
    proof.add(ClauseRule.CLAUSE, (), 5, Clause.of("-x", "y"))
    proof.add(ClauseRule.UPWARD_FLOW, (2,), 3, Clause.of("-x", "y"))
    proof.add(ClauseRule.RESOLVE, (1, 3), 3, Clause.of("y"), "x")
    proof.add(ClauseRule.FORALL_REMOVAL, (4,), 2, Clause())
    proof.add(ClauseRule.UPWARD_FLOW, (5,), 1, Clause())
    return proof


def assert_covers(formula, judgement_proof, clause_proof):
    """Every assignment a judgement excludes falsifies a clause at its location."""
    for step in judgement_proof:
        constraint = step.judgement.constraint
        location = step.judgement.location
        clauses = [
            s.judgement.clause for s in clause_proof if s.judgement.location == location
        ]
        variables = constraint.sorted_variables()
        for values in product(BOOLEAN_UNIVERSE, repeat=len(variables)):
            g = Assignment(tuple(zip(variables, values)))
            if g in constraint.rows:
                continue
            names = g.by_name()
            assert any(clause.is_falsified_by(names) for clause in clauses)


class TestQcspTranslation:
    """Clause leaves become relations over {0,1}."""

    def test_relations(self, qbf_false):
        """Each clause leaf gets its own relation, named after its index."""
        instance, mapping = qcsp_translation(qbf_false)
        assert mapping.relation_names == {4: "C4", 5: "C5"}
        assert mapping.argument_orders[5] == ("x", "y")
        assert instance.formula.node(4).kind is NodeKind.ATOM
        assert instance.formula.node(4).relation == "C4"
        assert instance.structure.interpretation("C5") == {("0", "0"), ("0", "1"), ("1", "1")}

    def test_indices_kept(self, nonprenex):
        """The translated formula has the same indices and free variables."""
        instance, _ = qcsp_translation(nonprenex)
        assert instance.formula.indices == nonprenex.indices
        for index in nonprenex.indices:
            assert instance.formula.free_vars(index) == nonprenex.free_vars(index)

    def test_truth_preserved(self, qbf_false, qbf_true, nonprenex):
        """The instance is true iff the formula is."""
        for formula in (qbf_false, qbf_true, nonprenex):
            instance, _ = qcsp_translation(formula)
            assert is_true(instance) == is_true(formula)

    def test_clause_constraint(self):
        """Only the falsifier is missing."""
        constraint = clause_constraint(Clause.of("x", "-y"))
        assert len(constraint.rows) == 3
        assert clause_constraint(Clause()).is_empty


class TestClauseToConstraint:
    """Clause refutations become judgement refutations."""

    def test_refutation(self, qbf_false, clause_refutation):
        """The translated proof refutes within the length and width bounds."""
        instance, _ = qcsp_translation(qbf_false)
        result = clause_to_constraint_proof(qbf_false, clause_refutation, instance)
        report = check_proof(instance, result)
        assert report.valid and report.refutes
        assert len(result) <= 2 * len(clause_refutation)
        assert result.width <= clause_refutation.width + 1

    def test_judgements_match_clauses(self, qbf_false, clause_refutation):
        """The refutation ends in the empty constraint at the root."""
        result = clause_to_constraint_proof(qbf_false, clause_refutation)
        assert result[-1].judgement.location == 1
        assert result[-1].judgement.constraint == clause_constraint(Clause())

    def test_invalid_input(self, qbf_false):
        """Invalid clause proofs are rejected."""
        proof = ClauseProof()
        proof.add(ClauseRule.CLAUSE, (), 4, Clause.of("-x", "y"))
        with pytest.raises(TranslationError):
            clause_to_constraint_proof(qbf_false, proof)


class TestConstraintToClause:
    """Judgement refutations become clause refutations."""

    def test_refutation(self, qbf_false):
        """The generated refutation translates into a clause refutation."""
        instance, _ = qcsp_translation(qbf_false)
        proof = generate_refutation(instance)
        assert proof is not None
        result = constraint_to_clause_proof(qbf_false, proof, instance)
        report = check_clause_proof(qbf_false, result)
        assert report.valid and report.refutes
        assert result.width <= proof.width
        assert_covers(qbf_false, proof, result)

    def test_nonprenex(self, nonprenex):
        """Non-prenex formulas translate as well."""
        instance, _ = qcsp_translation(nonprenex)
        proof = generate_refutation(instance)
        result = constraint_to_clause_proof(nonprenex, proof, instance)
        assert check_clause_proof(nonprenex, result).refutes
        assert_covers(nonprenex, proof, result)

    def test_invalid_input(self, qbf_false):
        """An empty judgement at a leaf cannot be derived by the atom rule."""
        instance, _ = qcsp_translation(qbf_false)
        broken = JudgementProof()
        broken.add(Rule.ATOM, (), 4, clause_constraint(Clause()))
        with pytest.raises(TranslationError):
            constraint_to_clause_proof(qbf_false, broken, instance)


class TestRoundTripSweep:
    """Random false formulas through both translations."""

    def test_false_formulas(self):
        """Refutations survive translation in both directions within the bounds."""
        rng = random.Random(5)
        checked = 0
        while checked < 200:
            formula = random_qbf(rng)
            if is_true(formula):
                continue
            instance, _ = qcsp_translation(formula)
            proof = generate_refutation(instance)
            assert proof is not None
            clauses = constraint_to_clause_proof(formula, proof, instance)
            assert check_clause_proof(formula, clauses).refutes
            assert_covers(formula, proof, clauses)
            back = clause_to_constraint_proof(formula, clauses, instance)
            report = check_proof(instance, back)
            assert report.valid and report.refutes
            assert len(back) <= 2 * len(clauses)
            checked += 1
