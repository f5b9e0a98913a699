"""
Brute-force semantic oracle.

Evaluates a subformula occurrence under an assignment of its free variables by
recursion over the tree, enumerating universes at quantifiers. Results are
memoized per (index, assignment restricted to the free variables), which keeps
the evaluation exact and avoids the exponential re-evaluation of shared
sub-assignments.
"""

from typing import Dict, Mapping, Tuple, Union

from src.core.constraints import Assignment, Constraint, EMPTY_ASSIGNMENT
from src.core.model import NodeKind, QcbfFormula, QcInstance, Target, Variable, formula_of
from src.utils.logger import get_logger

logger = get_logger("semantics")


class EvaluationError(Exception):
    """Raised when an assignment does not fit the subformula being evaluated."""

    pass


class Evaluator:
    """Memoizing evaluator for one instance or QCBF formula."""

    def __init__(self, target: Target) -> None:
        self.target = target
        self.formula = formula_of(target)
        self._memo: Dict[Tuple[int, Assignment], bool] = {}

    def universe(self, sort: str) -> Tuple[str, ...]:
        return self.target.universe(sort)

    def evaluate(self, index: int, assignment: Union[Assignment, Mapping[Variable, str]]) -> bool:
        """
        Evaluate the subformula at ``index``.

        Args:
            index: Location in the formula
            assignment: Values for exactly the free variables at ``index``

        Returns:
            Truth value of the subformula under the assignment

        Raises:
            EvaluationError: If the assignment domain or a value is wrong
        """
        if not isinstance(assignment, Assignment):
            assignment = Assignment.of(assignment)
        free = self.formula.free_vars(index)
        if assignment.domain != free:
            raise EvaluationError(
                f"Assignment on {sorted(v.name for v in assignment.domain)} does not match "
                f"free variables {sorted(v.name for v in free)} at index {index}"
            )
        for variable, value in assignment.pairs:
            if value not in self.universe(variable.sort):
                raise EvaluationError(f"{value} is not an element of sort {variable.sort}")
        return self._eval(index, assignment)

    def _eval(self, index: int, assignment: Assignment) -> bool:
        key = (index, assignment)
        cached = self._memo.get(key)
        if cached is not None:
            return cached
        node = self.formula.node(index)
        result: bool
        if node.kind is NodeKind.TRUE:
            result = True
        elif node.kind is NodeKind.ATOM:
            values = assignment.as_dict()
            row = tuple(values[v] for v in node.arguments)
            assert isinstance(self.target, QcInstance)
            result = row in self.target.structure.interpretation(node.relation or "")
        elif node.kind is NodeKind.CLAUSE:
            assert node.clause is not None
            result = node.clause.is_satisfied_by(assignment.by_name())
        elif node.kind is NodeKind.AND:
            result = all(
                self._eval(child, assignment.restrict(self.formula.free_vars(child)))
                for child in node.children
            )
        else:
            assert node.variable is not None
            result = self._eval_quantifier(node.kind, node.variable, node.child, assignment)
        self._memo[key] = result
        return result

    def _eval_quantifier(
        self, kind: NodeKind, variable: Variable, child: int, assignment: Assignment
    ) -> bool:
        child_free = self.formula.free_vars(child)
        if variable not in child_free:
            return self._eval(child, assignment.restrict(child_free))
        outcomes = (
            self._eval(child, assignment.extend(variable, value).restrict(child_free))
            for value in self.universe(variable.sort)
        )
        return any(outcomes) if kind is NodeKind.EXISTS else all(outcomes)

    def satisfying_constraint(self, index: int) -> Constraint:
        """All assignments of the free variables at ``index`` that satisfy it."""
        full = Constraint.full(self.formula.free_vars(index), self.universe)
        rows = frozenset(row for row in full.rows if self._eval(index, row))
        return Constraint(full.variables, rows)

    def is_true(self) -> bool:
        """Truth of the whole sentence."""
        return self._eval(self.formula.root, EMPTY_ASSIGNMENT)


def evaluate(
    target: Target, index: int, assignment: Union[Assignment, Mapping[Variable, str]]
) -> bool:
    """
    Evaluate subformula ``index`` of an instance or QCBF formula under ``assignment``.

    Raises:
        EvaluationError: If the assignment does not fit the free variables at ``index``
    """
    return Evaluator(target).evaluate(index, assignment)


def is_true(target: Union[QcInstance, QcbfFormula]) -> bool:
    verdict = Evaluator(target).is_true()
    logger.debug(f"Oracle verdict: {verdict}")
    return verdict
