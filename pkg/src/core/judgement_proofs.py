"""
Judgement proofs for quantified constraint satisfaction.

A judgement (i, V, F) pins a constraint to formula location i. Proofs are
sequences of judgements, each derived by one of six rules from earlier steps:
atom, projection, join, upward flow, universal elimination and downward flow.
This module checks single steps and whole proofs, extracts the formula that a
derived judgement defines, and generates refutations bottom-up.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Set, Tuple, TypeVar

from src.core.constraints import (
    Assignment,
    Constraint,
    ConstraintError,
    forall_eliminate,
    join,
    project,
)
from src.core.model import And, Exists, Expr, Forall, NodeKind, QcInstance, Variable
from src.utils.logger import get_logger

logger = get_logger("judgement_proofs")


class Rule(Enum):
    """Derivation rules of the judgement proof system."""

    ATOM = "atom"
    PROJECTION = "projection"
    JOIN = "join"
    UPWARD_FLOW = "upward-flow"
    FORALL_ELIMINATION = "forall-elimination"
    DOWNWARD_FLOW = "downward-flow"


PREMISE_COUNTS = {
    Rule.ATOM: 0,
    Rule.PROJECTION: 1,
    Rule.JOIN: 2,
    Rule.UPWARD_FLOW: 1,
    Rule.FORALL_ELIMINATION: 1,
    Rule.DOWNWARD_FLOW: 1,
}


class ProofStepError(Exception):
    """A proof step violates a side condition of its rule."""

    def __init__(self, code: str, message: str, position: Optional[int] = None) -> None:
        super().__init__(message)
        self.code = code
        self.message = message
        self.position = position


@dataclass(frozen=True)
class Judgement:
    """A constraint pinned to a formula location."""

    location: int
    constraint: Constraint

    @property
    def variables(self) -> frozenset:
        return self.constraint.variables

    @property
    def rows(self) -> frozenset:
        return self.constraint.rows

    @property
    def is_empty(self) -> bool:
        return self.constraint.is_empty

    @property
    def width(self) -> int:
        return self.constraint.width

    def __str__(self) -> str:
        return f"({self.location}, {self.constraint})"


@dataclass(frozen=True)
class ProofStep:
    """One derivation step; premises are 0-based positions of earlier steps."""

    rule: Rule
    premises: Tuple[int, ...]
    judgement: Judgement
    variable: Optional[Variable] = None


@dataclass(frozen=True)
class StepViolation:
    """A rejected step in a checked proof."""

    position: int
    code: str
    message: str

    def to_dict(self) -> Dict[str, Any]:
        # Reported with the 1-based numbering used in proof documents
        return {"step": self.position + 1, "code": self.code, "message": self.message}


S = TypeVar("S")


def needed_positions(premises: Sequence[Tuple[int, ...]], position: int) -> List[int]:
    """Positions that ``position`` depends on, including itself, in ascending order."""
    needed: Set[int] = set()
    stack = [position]
    while stack:
        current = stack.pop()
        if current in needed:
            continue
        needed.add(current)
        stack.extend(premises[current])
    return sorted(needed)


def restrict_steps(
    steps: Sequence[S],
    position: int,
    premises_of: Callable[[S], Tuple[int, ...]],
    with_premises: Callable[[S, Tuple[int, ...]], S],
) -> List[S]:
    """Keep only the steps ``position`` depends on, renumbering premises."""
    keep = needed_positions([premises_of(step) for step in steps], position)
    renumber = {old: new for new, old in enumerate(keep)}
    return [
        with_premises(steps[old], tuple(renumber[p] for p in premises_of(steps[old])))
        for old in keep
    ]


@dataclass
class JudgementProof:
    """A finite sequence of judgement derivation steps."""

    steps: List[ProofStep] = field(default_factory=list)

    def add(
        self,
        rule: Rule,
        premises: Tuple[int, ...],
        location: int,
        constraint: Constraint,
        variable: Optional[Variable] = None,
    ) -> int:
        """Append a step and return its position."""
        self.steps.append(ProofStep(rule, premises, Judgement(location, constraint), variable))
        return len(self.steps) - 1

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> Iterator[ProofStep]:
        return iter(self.steps)

    def __getitem__(self, position: int) -> ProofStep:
        return self.steps[position]

    @property
    def length(self) -> int:
        return len(self.steps)

    @property
    def width(self) -> int:
        return max((step.judgement.width for step in self.steps), default=0)

    def first_empty(self) -> Optional[int]:
        for position, step in enumerate(self.steps):
            if step.judgement.is_empty:
                return position
        return None

    def restricted_to(self, position: int) -> "JudgementProof":
        """Prune to the steps that ``position`` depends on."""
        return JudgementProof(
            restrict_steps(
                self.steps,
                position,
                lambda step: step.premises,
                lambda step, premises: replace(step, premises=premises),
            )
        )


@dataclass
class ProofReport:
    """Outcome of checking a whole proof."""

    valid: bool
    width: int
    length: int
    refutes: bool
    violations: List[StepViolation] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "valid": self.valid,
            "width": self.width,
            "length": self.length,
            "refutes": self.refutes,
            "violations": [v.to_dict() for v in self.violations],
        }


def atom_constraint(instance: QcInstance, index: int) -> Constraint:
    """
    Satisfying assignments of the atom at ``index``.

    Repeated variables in the atom select the tuples agreeing on them.
    """
    node = instance.formula.node(index)
    if node.kind is not NodeKind.ATOM:
        raise ProofStepError("not-an-atom", f"Index {index} is not an atom")
    rows = set()
    for row in instance.structure.interpretation(node.relation or ""):
        if len(row) != len(node.arguments):
            continue
        mapping: Dict[Variable, str] = {}
        if all(mapping.setdefault(v, value) == value for v, value in zip(node.arguments, row)):
            rows.add(Assignment.of(mapping))
    return Constraint(frozenset(node.arguments), frozenset(rows))


def check_step(instance: QcInstance, prefix: Sequence[ProofStep], step: ProofStep) -> bool:
    """
    Check one step against the already checked ``prefix``.

    Args:
        instance: Instance the proof is about
        prefix: Earlier steps of the proof
        step: Step to check

    Returns:
        True if every side condition of the step's rule holds

    Raises:
        ProofStepError: Naming the first violated side condition
    """
    formula = instance.formula
    result = step.judgement
    location = result.location
    if location not in formula:
        raise ProofStepError("unknown-location", f"Index {location} is not in the formula")
    if len(step.premises) != PREMISE_COUNTS[step.rule]:
        raise ProofStepError(
            "premise-count",
            f"{step.rule.value} takes {PREMISE_COUNTS[step.rule]} premise(s), "
            f"got {len(step.premises)}",
        )
    for p in step.premises:
        if not 0 <= p < len(prefix):
            raise ProofStepError("premise-order", f"Premise {p + 1} is not an earlier step")
    free = formula.free_vars(location)
    if not result.variables <= free:
        escaped = sorted(v.name for v in result.variables - free)
        raise ProofStepError(
            "variable-escape", f"Variables {escaped} are not free at index {location}"
        )
    premises = [prefix[p].judgement for p in step.premises]
    node = formula.node(location)

    if step.rule is Rule.ATOM:
        expected = atom_constraint(instance, location)
        if result.variables != expected.variables:
            raise ProofStepError(
                "variables-mismatch", "Atom judgement must use the atom's variables"
            )
        _require_rows(result.constraint, expected)
    elif step.rule is Rule.PROJECTION:
        (source,) = premises
        _require_location(source.location, location)
        if not result.variables <= source.variables:
            raise ProofStepError(
                "projection-not-subset", "Projection target is not a subset of the premise"
            )
        _require_rows(result.constraint, project(source.constraint, result.variables))
    elif step.rule is Rule.JOIN:
        left, right = premises
        _require_location(left.location, location)
        _require_location(right.location, location)
        try:
            joined = join(left.constraint, right.constraint)
        except ConstraintError as e:
            raise ProofStepError("sort-conflict", str(e)) from e
        if result.variables != joined.variables:
            raise ProofStepError("variables-mismatch", "Join must cover both premises' variables")
        _require_rows(result.constraint, joined)
    elif step.rule is Rule.UPWARD_FLOW:
        (source,) = premises
        if not formula.is_parent(location, source.location):
            raise ProofStepError(
                "not-parent", f"Index {location} is not the parent of {source.location}"
            )
        _require_same(result.constraint, source.constraint)
    elif step.rule is Rule.DOWNWARD_FLOW:
        (source,) = premises
        if not formula.is_parent(source.location, location):
            raise ProofStepError(
                "not-child", f"Index {location} is not a child of {source.location}"
            )
        _require_same(result.constraint, source.constraint)
    else:
        (source,) = premises
        if node.kind is not NodeKind.FORALL or node.variable is None:
            raise ProofStepError("not-universal", f"Index {location} is not a universal quantifier")
        if source.location != node.child:
            raise ProofStepError(
                "not-parent", f"Index {location} is not the parent of {source.location}"
            )
        y = node.variable
        if step.variable is not None and step.variable != y:
            raise ProofStepError(
                "variable-mismatch", f"Index {location} binds {y.name}, not {step.variable.name}"
            )
        if y not in source.variables:
            raise ProofStepError("variable-not-present", f"{y.name} is not a premise variable")
        expected = forall_eliminate(source.constraint, y, instance.universe(y.sort))
        if result.variables != expected.variables:
            raise ProofStepError("variables-mismatch", f"Elimination must drop exactly {y.name}")
        _require_rows(result.constraint, expected)
    return True


def _require_location(actual: int, expected: int) -> None:
    if actual != expected:
        raise ProofStepError(
            "location-mismatch", f"Premise at index {actual}, expected index {expected}"
        )


def _require_rows(actual: Constraint, expected: Constraint) -> None:
    if actual.rows != expected.rows:
        missing = len(expected.rows - actual.rows)
        extra = len(actual.rows - expected.rows)
        raise ProofStepError(
            "row-mismatch", f"Row set differs ({missing} missing, {extra} unexpected)"
        )


def _require_same(actual: Constraint, expected: Constraint) -> None:
    if actual.variables != expected.variables:
        raise ProofStepError("variables-mismatch", "Flow must keep the variable set")
    _require_rows(actual, expected)


def check_proof(instance: QcInstance, proof: JudgementProof) -> ProofReport:
    """
    Check every step of a proof.

    Returns:
        Report with validity, width, length, whether a valid proof refutes the
        instance, and one violation per rejected step
    """
    violations: List[StepViolation] = []
    for position, step in enumerate(proof.steps):
        try:
            check_step(instance, proof.steps[:position], step)
        except ProofStepError as e:
            violations.append(StepViolation(position, e.code, e.message))
    valid = not violations
    report = ProofReport(
        valid=valid,
        width=proof.width,
        length=proof.length,
        refutes=valid and proof.first_empty() is not None,
        violations=violations,
    )
    logger.info(
        f"Checked judgement proof: valid={report.valid} width={report.width} "
        f"length={report.length} refutes={report.refutes}"
    )
    return report


def extract_defining_formula(instance: QcInstance, proof: JudgementProof, position: int) -> Expr:
    """
    Build a formula defining the constraint derived at ``position``.

    The result has exactly the judgement's variables free, is satisfied by an
    assignment iff the assignment is a row of the judgement, and has width at
    most the width of the proof.

    Raises:
        ProofStepError: If a step up to ``position`` is invalid
    """
    if not 0 <= position < len(proof):
        raise ProofStepError("unknown-step", f"No step {position + 1}", position)
    for p in range(position + 1):
        try:
            check_step(instance, proof.steps[:p], proof.steps[p])
        except ProofStepError as e:
            e.position = p
            raise
    formulas: Dict[int, Expr] = {}
    for p in needed_positions([s.premises for s in proof.steps], position):
        step = proof.steps[p]
        premises = [formulas[q] for q in step.premises]
        if step.rule is Rule.ATOM:
            formulas[p] = instance.formula.to_expr(step.judgement.location)
        elif step.rule is Rule.PROJECTION:
            source = proof.steps[step.premises[0]].judgement
            body = premises[0]
            for v in sorted(source.variables - step.judgement.variables, reverse=True):
                body = Exists(v, body)
            formulas[p] = body
        elif step.rule is Rule.JOIN:
            formulas[p] = And((premises[0], premises[1]))
        elif step.rule is Rule.FORALL_ELIMINATION:
            y = instance.formula.node(step.judgement.location).variable
            assert y is not None
            formulas[p] = Forall(y, premises[0])
        else:
            formulas[p] = premises[0]
    return formulas[position]


def characteristic_proof(instance: QcInstance) -> Tuple[JudgementProof, Dict[int, int]]:
    """
    Derive, bottom-up, a judgement at every location defining exactly that subformula.

    Locations whose subformula is built from ``true`` alone get no judgement.

    Returns:
        The proof and the position of each location's judgement
    """
    formula = instance.formula
    proof = JudgementProof()
    positions: Dict[int, int] = {}

    def constraint_at(position: int) -> Constraint:
        return proof[position].judgement.constraint

    def build(index: int) -> Optional[int]:
        node = formula.node(index)
        position: Optional[int]
        if node.kind is NodeKind.TRUE:
            return None
        if node.kind is NodeKind.ATOM:
            position = proof.add(Rule.ATOM, (), index, atom_constraint(instance, index))
        elif node.kind is NodeKind.AND:
            lifted = []
            for child in node.children:
                below = build(child)
                if below is not None:
                    lifted.append(
                        proof.add(Rule.UPWARD_FLOW, (below,), index, constraint_at(below))
                    )
            if not lifted:
                return None
            position = lifted[0]
            for other in lifted[1:]:
                joined = join(constraint_at(position), constraint_at(other))
                position = proof.add(Rule.JOIN, (position, other), index, joined)
        else:
            assert node.variable is not None
            below = build(node.child)
            if below is None:
                return None
            constraint = constraint_at(below)
            v = node.variable
            if node.kind is NodeKind.EXISTS:
                if v in constraint.variables:
                    constraint = project(constraint, constraint.variables - {v})
                    below = proof.add(Rule.PROJECTION, (below,), node.child, constraint)
                position = proof.add(Rule.UPWARD_FLOW, (below,), index, constraint)
            elif v in constraint.variables:
                eliminated = forall_eliminate(constraint, v, instance.universe(v.sort))
                position = proof.add(Rule.FORALL_ELIMINATION, (below,), index, eliminated, v)
            else:
                position = proof.add(Rule.UPWARD_FLOW, (below,), index, constraint)
        positions[index] = position
        return position

    build(formula.root)
    return proof, positions


def generate_refutation(instance: QcInstance) -> Optional[JudgementProof]:
    """
    Generate a refutation of a false instance.

    Returns:
        A proof whose last step is an empty judgement at the root, of width at
        most the formula width; None when the instance is true
    """
    proof, positions = characteristic_proof(instance)
    root = positions.get(instance.formula.root)
    if root is None or not proof[root].judgement.is_empty:
        logger.info("No refutation: the instance is true")
        return None
    logger.info(f"Generated refutation of length {len(proof)} and width {proof.width}")
    return proof.restricted_to(root)
