"""Tests for clauses, clause proofs and the resolution closure."""

import random

import pytest

from src.core.clause_proofs import (
    ClauseProof,
    ClauseRule,
    check_clause_proof,
    closure_set,
    prenex_shape,
    qres_closure_derive,
    unfold_tree_like,
)
from src.core.clauses import Clause, ClauseError, Literal, complementary_pivots, resolvent
from src.core.semantics import is_true
from tests.factories import random_prenex_qbf


@pytest.fixture
def refutation():
    """A hand-written refutation of exists x forall y (x or y) and (-x or y)."""
    proof = ClauseProof()
    proof.add(ClauseRule.CLAUSE, (), 4, Clause.of("x", "y"))
    proof.add(ClauseRule.UPWARD_FLOW, (0,), 3, Clause.of("x", "y"))
    proof.add(ClauseRule.CLAUSE, (), 5, Clause.of("-x", "y"))
    proof.add(ClauseRule.UPWARD_FLOW, (2,), 3, Clause.of("-x", "y"))
    proof.add(ClauseRule.RESOLVE, (1, 3), 3, Clause.of("y"), "x")
    proof.add(ClauseRule.FORALL_REMOVAL, (4,), 2, Clause())
    proof.add(ClauseRule.UPWARD_FLOW, (5,), 1, Clause())
    return proof


class TestClauses:
    """Literals, clauses and resolution."""

    def test_parse_literal(self):
        """A leading minus negates."""
        assert Literal.parse("-x") == Literal("x", False)
        assert Literal.parse("x").positive
        for bad in ("-", "--x", ""):
            with pytest.raises(ClauseError) as excinfo:
                Literal.parse(bad)
            assert excinfo.value.code == "bad-literal"

    def test_tautology_rejected(self):
        """A clause mentions a variable at most once."""
        with pytest.raises(ClauseError) as excinfo:
            Clause.of("x", "-x")
        assert excinfo.value.code == "tautological"

    def test_rendering(self):
        """Literals print sorted by variable."""
        assert str(Clause.of("y", "-x")) == "(-x y)"
        assert str(Clause()) == "()"

    def test_falsifier(self):
        """The falsifier sets every literal false."""
        assert Clause.of("x", "-y").falsifier() == {"x": "0", "y": "1"}
        assert Clause.of("x", "-y").is_falsified_by({"x": "0", "y": "1", "z": "0"})
        assert not Clause.of("x").is_falsified_by({})

    def test_satisfying_tuples(self):
        """Every assignment but the falsifier satisfies a clause."""
        rows = Clause.of("x", "-y").satisfying_tuples(["x", "y"])
        assert len(rows) == 3
        assert ("0", "1") not in rows

    def test_resolvent(self):
        """Resolving on the clashing variable drops it."""
        assert resolvent(Clause.of("x", "y"), Clause.of("-x", "y"), "x") == Clause.of("y")
        assert complementary_pivots(Clause.of("x", "-y"), Clause.of("-x", "y")) == ["x", "y"]

    def test_tautological_resolvent(self):
        """Two clashes leave a tautology."""
        with pytest.raises(ClauseError) as excinfo:
            resolvent(Clause.of("x", "y"), Clause.of("-x", "-y"), "x")
        assert excinfo.value.code == "tautological-resolvent"

    def test_pivot_not_complementary(self):
        """The pivot has opposite signs in the premises."""
        with pytest.raises(ClauseError) as excinfo:
            resolvent(Clause.of("x"), Clause.of("x", "y"), "x")
        assert excinfo.value.code == "pivot-not-complementary"


class TestClauseProofChecking:
    """The clause proof checker."""

    def test_refutation_is_valid(self, qbf_false, refutation):
        """The hand-written refutation checks and is tree-like."""
        report = check_clause_proof(qbf_false, refutation)
        assert report.valid
        assert report.refutes
        assert report.tree_like
        assert report.width == 2
        assert report.non_flow_count == 4

    def test_clause_mismatch(self, qbf_false):
        """A clause step reproduces the leaf."""
        proof = ClauseProof()
        proof.add(ClauseRule.CLAUSE, (), 4, Clause.of("-x", "y"))
        assert check_clause_proof(qbf_false, proof).violations[0].code == "clause-mismatch"

    def test_resolve_location_mismatch(self, qbf_false):
        """Resolve premises sit at the conclusion's location."""
        proof = ClauseProof()
        proof.add(ClauseRule.CLAUSE, (), 4, Clause.of("x", "y"))
        proof.add(ClauseRule.CLAUSE, (), 5, Clause.of("-x", "y"))
        proof.add(ClauseRule.RESOLVE, (0, 1), 4, Clause.of("y"), "x")
        assert check_clause_proof(qbf_false, proof).violations[0].code == "location-mismatch"

    def test_flow_past_binder(self, qbf_false):
        """A clause cannot flow above the binder of one of its variables."""
        proof = ClauseProof()
        proof.add(ClauseRule.CLAUSE, (), 4, Clause.of("x", "y"))
        proof.add(ClauseRule.UPWARD_FLOW, (0,), 3, Clause.of("x", "y"))
        proof.add(ClauseRule.UPWARD_FLOW, (1,), 2, Clause.of("x", "y"))
        report = check_clause_proof(qbf_false, proof)
        assert [v.code for v in report.violations] == ["variable-escape"]

    def test_removal_at_existential(self, qbf_false, refutation):
        """Removal at an existential quantifier is rejected."""
        proof = ClauseProof(list(refutation.steps[:6]))
        proof.add(ClauseRule.FORALL_REMOVAL, (5,), 1, Clause())
        assert check_clause_proof(qbf_false, proof).violations[0].code == "not-universal"

    def test_tree_likeness(self, qbf_false):
        """A step used twice makes the proof a DAG."""
        proof = ClauseProof()
        proof.add(ClauseRule.CLAUSE, (), 4, Clause.of("x", "y"))
        proof.add(ClauseRule.UPWARD_FLOW, (0,), 3, Clause.of("x", "y"))
        proof.add(ClauseRule.UPWARD_FLOW, (0,), 3, Clause.of("x", "y"))
        report = check_clause_proof(qbf_false, proof)
        assert report.valid
        assert not report.tree_like


class TestRestructuring:
    """Pruning and unfolding."""

    def test_restricted_to(self, refutation):
        """The first resolvent needs five steps."""
        assert len(refutation.restricted_to(4)) == 5

    def test_unfold_tree_like(self, qbf_false):
        """Unfolding duplicates shared steps."""
        proof = ClauseProof()
        proof.add(ClauseRule.CLAUSE, (), 4, Clause.of("x", "y"))
        proof.add(ClauseRule.UPWARD_FLOW, (0,), 3, Clause.of("x", "y"))
        proof.add(ClauseRule.CLAUSE, (), 5, Clause.of("-x", "y"))
        proof.add(ClauseRule.UPWARD_FLOW, (2,), 3, Clause.of("-x", "y"))
        proof.add(ClauseRule.RESOLVE, (1, 3), 3, Clause.of("y"), "x")
        proof.add(ClauseRule.RESOLVE, (1, 3), 3, Clause.of("y"), "x")
        assert not proof.is_tree_like()
        unfolded = unfold_tree_like(proof)
        assert unfolded.is_tree_like()
        assert len(unfolded) == 5
        assert check_clause_proof(qbf_false, unfolded).valid


class TestClosure:
    """Q-resolution closure and its simulation."""

    def test_prenex_shape(self, qbf_false):
        """The prefix binds x existentially and y universally."""
        shape = prenex_shape(qbf_false)
        assert shape.matrix == 3
        assert shape.leaves == [4, 5]
        assert shape.universal == {"x": False, "y": True}

    def test_not_prenex(self, nonprenex):
        """Closure simulation needs a prenex formula."""
        with pytest.raises(ClauseError) as excinfo:
            qres_closure_derive(nonprenex, Clause())
        assert excinfo.value.code == "not-prenex"

    def test_closure_contents(self, qbf_false):
        """Universal removal and resolution both contribute."""
        closure = closure_set(qbf_false)
        assert Clause.of("x") in closure
        assert Clause.of("y") in closure
        assert Clause() in closure
        assert closure[Clause.of("x", "y")].kind == "input"

    def test_derive_empty_clause(self, qbf_false):
        """The derivation ends in the empty clause at the matrix."""
        proof = qres_closure_derive(qbf_false, Clause())
        assert proof is not None
        report = check_clause_proof(qbf_false, proof)
        assert report.valid and report.refutes
        assert proof[-1].judgement.location == 3
        assert proof[-1].judgement.is_empty

    def test_true_formula_has_no_empty_clause(self, qbf_true):
        """Resolving the true formula only yields tautologies."""
        assert qres_closure_derive(qbf_true, Clause()) is None
        assert len(closure_set(qbf_true)) == 2

    def test_closure_simulation_sweep(self):
        """Whenever the closure holds the empty clause the formula is false and derivable."""
        rng = random.Random(11)
        for _ in range(300):
            formula = random_prenex_qbf(rng)
            for existential in (False, True):
                closure = closure_set(formula, existential)
                if Clause() not in closure:
                    continue
                assert not is_true(formula)
                proof = qres_closure_derive(formula, Clause(), existential)
                assert proof is not None
                report = check_clause_proof(formula, proof)
                assert report.valid and report.refutes
                assert proof[-1].judgement.location == prenex_shape(formula).matrix
