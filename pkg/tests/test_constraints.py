"""Tests for the relational algebra of judgements."""

import pytest

from src.core.constraints import (
    Assignment,
    Constraint,
    ConstraintError,
    EMPTY_ASSIGNMENT,
    forall_eliminate,
    join,
    project,
)
from src.core.model import Variable


def constraint(variables, rows):
    ordered = sorted(variables)
    return Constraint(
        frozenset(ordered), frozenset(Assignment(tuple(zip(ordered, row))) for row in rows)
    )


@pytest.fixture
def relation_e(x_var, y_var):
    return constraint(
        [x_var, y_var], [("a", "d"), ("a", "e"), ("a", "f"), ("b", "e"), ("c", "f")]
    )


class TestAssignment:
    """Canonical assignments."""

    def test_pairs_are_sorted(self, x_var, y_var):
        """Construction order does not matter."""
        first = Assignment(((y_var, "d"), (x_var, "a")))
        second = Assignment.of({x_var: "a", y_var: "d"})
        assert first == second
        assert first.pairs[0][0] == x_var

    def test_duplicate_variable(self, x_var):
        """A variable is bound at most once."""
        with pytest.raises(ConstraintError):
            Assignment(((x_var, "a"), (x_var, "b")))

    def test_restrict_and_extend(self, x_var, y_var):
        """Restriction drops, extension adds or overrides."""
        g = Assignment.of({x_var: "a", y_var: "d"})
        assert g.restrict([x_var]) == Assignment.of({x_var: "a"})
        assert g.extend(y_var, "e")[y_var] == "e"
        assert str(g) == "{x=a,y=d}"


class TestConstraint:
    """Constraint invariants."""

    def test_rows_must_match_domain(self, x_var, y_var):
        """Every row is defined exactly on the variables."""
        with pytest.raises(ConstraintError):
            Constraint(frozenset({x_var, y_var}), frozenset({Assignment.of({x_var: "a"})}))

    def test_unit_is_not_empty(self):
        """(∅, {e}) and (∅, ∅) are different constraints."""
        unit = Constraint.unit()
        empty = Constraint(frozenset(), frozenset())
        assert unit != empty
        assert not unit.is_empty
        assert empty.is_empty
        assert unit.rows == {EMPTY_ASSIGNMENT}

    def test_full(self, x_var, y_var):
        """Full constraints hold the product of the universes."""
        universes = {"e": ("a", "b", "c"), "u": ("d", "e")}
        full = Constraint.full([x_var, y_var], universes.__getitem__)
        assert len(full.rows) == 6
        assert full.width == 2

    def test_str(self, relation_e):
        """Rendering lists variables and sorted rows."""
        assert str(relation_e) == "[x,y] : {(a,d),(a,e),(a,f),(b,e),(c,f)}"


class TestAlgebra:
    """Projection, join, universal elimination and intersection."""

    def test_project(self, relation_e, x_var):
        """Projection to x keeps every first coordinate."""
        assert project(relation_e, [x_var]).sorted_rows() == [("a",), ("b",), ("c",)]

    def test_project_to_empty_set(self, relation_e):
        """Projecting a non-empty constraint to ∅ gives the unit."""
        assert project(relation_e, []) == Constraint.unit()

    def test_project_outside(self, relation_e):
        """Projection onto foreign variables is rejected."""
        with pytest.raises(ConstraintError):
            project(relation_e, [Variable("z", "e")])

    def test_join_shared(self, relation_e, x_var):
        """Joining with a unary constraint selects matching rows."""
        only_b = constraint([x_var], [("b",)])
        assert join(relation_e, only_b).sorted_rows() == [("b", "e")]

    def test_join_disjoint(self, x_var, y_var):
        """Disjoint joins are products."""
        left = constraint([x_var], [("a",), ("b",)])
        right = constraint([y_var], [("d",)])
        assert join(left, right).sorted_rows() == [("a", "d"), ("b", "d")]

    def test_join_units(self, relation_e):
        """The unit is neutral; the empty constraint annihilates."""
        assert join(relation_e, Constraint.unit()) == relation_e
        assert join(relation_e, Constraint(frozenset(), frozenset())).is_empty

    def test_join_sort_conflict(self, x_var):
        """A name with two sorts cannot be joined."""
        left = constraint([x_var], [("a",)])
        right = constraint([Variable("x", "u")], [("d",)])
        with pytest.raises(ConstraintError):
            join(left, right)

    def test_forall_eliminate(self, relation_e, x_var, y_var):
        """Only a relates to all of d, e and f."""
        result = forall_eliminate(relation_e, y_var, ("d", "e", "f"))
        assert result.variables == {x_var}
        assert result.sorted_rows() == [("a",)]

    def test_forall_eliminate_missing(self, relation_e):
        """The eliminated variable must belong to the constraint."""
        with pytest.raises(ConstraintError):
            forall_eliminate(relation_e, Variable("z", "u"), ("d",))
