"""
Clause judgement proofs for quantified clause formulas (QCBF).

A clause judgement (i, α) pins a clause to a formula location whose free
variables include every variable of α. Five rules derive clause judgements:
clause, resolve, upward flow, universal removal and downward flow. This module
checks clause proofs, simulates Q-resolution by saturating the closure set of a
prenex formula, and unfolds proofs into tree-like form.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, Iterator, List, Optional, Sequence, Set, Tuple

from src.core.clauses import Clause, ClauseError, complementary_pivots, resolvent
from src.core.judgement_proofs import ProofStepError, StepViolation, restrict_steps
from src.core.model import NodeKind, QcbfFormula
from src.utils.logger import get_logger

logger = get_logger("clause_proofs")


class ClauseRule(Enum):
    """Derivation rules of the clause judgement proof system."""

    CLAUSE = "clause"
    RESOLVE = "resolve"
    UPWARD_FLOW = "upward-flow"
    FORALL_REMOVAL = "forall-removal"
    DOWNWARD_FLOW = "downward-flow"


FLOW_RULES = (ClauseRule.UPWARD_FLOW, ClauseRule.DOWNWARD_FLOW)

CLAUSE_PREMISE_COUNTS = {
    ClauseRule.CLAUSE: 0,
    ClauseRule.RESOLVE: 2,
    ClauseRule.UPWARD_FLOW: 1,
    ClauseRule.FORALL_REMOVAL: 1,
    ClauseRule.DOWNWARD_FLOW: 1,
}


@dataclass(frozen=True)
class ClauseJudgement:
    """A clause pinned to a formula location."""

    location: int
    clause: Clause

    @property
    def is_empty(self) -> bool:
        return self.clause.is_empty

    @property
    def width(self) -> int:
        return self.clause.width

    def __str__(self) -> str:
        return f"({self.location}, {self.clause})"


@dataclass(frozen=True)
class ClauseStep:
    """One clause derivation step; ``pivot`` is set for resolve steps."""

    rule: ClauseRule
    premises: Tuple[int, ...]
    judgement: ClauseJudgement
    pivot: Optional[str] = None


@dataclass
class ClauseProof:
    """A finite sequence of clause derivation steps."""

    steps: List[ClauseStep] = field(default_factory=list)

    def add(
        self,
        rule: ClauseRule,
        premises: Tuple[int, ...],
        location: int,
        clause: Clause,
        pivot: Optional[str] = None,
    ) -> int:
        self.steps.append(ClauseStep(rule, premises, ClauseJudgement(location, clause), pivot))
        return len(self.steps) - 1

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> Iterator[ClauseStep]:
        return iter(self.steps)

    def __getitem__(self, position: int) -> ClauseStep:
        return self.steps[position]

    @property
    def length(self) -> int:
        return len(self.steps)

    @property
    def width(self) -> int:
        return max((step.judgement.width for step in self.steps), default=0)

    @property
    def non_flow_count(self) -> int:
        return sum(1 for step in self.steps if step.rule not in FLOW_RULES)

    def is_tree_like(self) -> bool:
        """True iff every step is used as a premise at most once."""
        used: Set[int] = set()
        for step in self.steps:
            for p in step.premises:
                if p in used:
                    return False
                used.add(p)
        return True

    def first_empty(self) -> Optional[int]:
        for position, step in enumerate(self.steps):
            if step.judgement.is_empty:
                return position
        return None

    def restricted_to(self, position: int) -> "ClauseProof":
        """Prune to the steps that ``position`` depends on."""
        return ClauseProof(
            restrict_steps(
                self.steps,
                position,
                lambda step: step.premises,
                lambda step, premises: replace(step, premises=premises),
            )
        )


@dataclass
class ClauseProofReport:
    """Outcome of checking a clause proof."""

    valid: bool
    width: int
    length: int
    refutes: bool
    tree_like: bool
    non_flow_count: int
    violations: List[StepViolation] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "valid": self.valid,
            "width": self.width,
            "length": self.length,
            "refutes": self.refutes,
            "tree_like": self.tree_like,
            "non_flow_count": self.non_flow_count,
            "violations": [v.to_dict() for v in self.violations],
        }


def check_clause_step(formula: QcbfFormula, prefix: Sequence[ClauseStep], step: ClauseStep) -> bool:
    """
    Check one clause step against the earlier steps.

    Raises:
        ProofStepError: Naming the first violated side condition
    """
    result = step.judgement
    location = result.location
    if location not in formula:
        raise ProofStepError("unknown-location", f"Index {location} is not in the formula")
    if len(step.premises) != CLAUSE_PREMISE_COUNTS[step.rule]:
        raise ProofStepError(
            "premise-count",
            f"{step.rule.value} takes {CLAUSE_PREMISE_COUNTS[step.rule]} premise(s), "
            f"got {len(step.premises)}",
        )
    for p in step.premises:
        if not 0 <= p < len(prefix):
            raise ProofStepError("premise-order", f"Premise {p + 1} is not an earlier step")
    free = formula.free_names(location)
    if not result.clause.variables <= free:
        escaped = sorted(result.clause.variables - free)
        raise ProofStepError(
            "variable-escape", f"Variables {escaped} are not free at index {location}"
        )
    premises = [prefix[p].judgement for p in step.premises]
    node = formula.node(location)

    if step.rule is ClauseRule.CLAUSE:
        if node.kind is not NodeKind.CLAUSE:
            raise ProofStepError("not-a-clause", f"Index {location} is not a clause leaf")
        if node.clause != result.clause:
            raise ProofStepError(
                "clause-mismatch", f"Index {location} holds {node.clause}, not {result.clause}"
            )
    elif step.rule is ClauseRule.RESOLVE:
        left, right = premises
        for premise in (left, right):
            if premise.location != location:
                raise ProofStepError(
                    "location-mismatch",
                    f"Premise at index {premise.location}, expected index {location}",
                )
        pivot = step.pivot
        if pivot is None:
            pivots = complementary_pivots(left.clause, right.clause)
            if len(pivots) != 1:
                raise ProofStepError(
                    "pivot-not-complementary",
                    f"{left.clause} and {right.clause} do not clash on exactly one variable",
                )
            pivot = pivots[0]
        try:
            expected = resolvent(left.clause, right.clause, pivot)
        except ClauseError as e:
            raise ProofStepError(e.code, str(e)) from e
        if expected != result.clause:
            raise ProofStepError(
                "clause-mismatch", f"Resolvent is {expected}, step claims {result.clause}"
            )
    elif step.rule is ClauseRule.UPWARD_FLOW:
        (source,) = premises
        if not formula.is_parent(location, source.location):
            raise ProofStepError(
                "not-parent", f"Index {location} is not the parent of {source.location}"
            )
        _require_same_clause(result.clause, source.clause)
    elif step.rule is ClauseRule.DOWNWARD_FLOW:
        (source,) = premises
        if not formula.is_parent(source.location, location):
            raise ProofStepError(
                "not-child", f"Index {location} is not a child of {source.location}"
            )
        _require_same_clause(result.clause, source.clause)
    else:
        (source,) = premises
        if node.kind is not NodeKind.FORALL or node.variable is None:
            raise ProofStepError(
                "not-universal", f"Index {location} is not a universal quantifier"
            )
        if source.location != node.child:
            raise ProofStepError(
                "not-parent", f"Index {location} is not the parent of {source.location}"
            )
        _require_same_clause(result.clause, source.clause.without_variable(node.variable.name))
    return True


def _require_same_clause(actual: Clause, expected: Clause) -> None:
    if actual != expected:
        raise ProofStepError("clause-mismatch", f"Expected {expected}, step claims {actual}")


def check_clause_proof(formula: QcbfFormula, proof: ClauseProof) -> ClauseProofReport:
    """
    Check every step of a clause proof.

    Returns:
        Report with validity, width, length, refutation flag, tree-likeness and
        the number of non-flow judgements
    """
    violations: List[StepViolation] = []
    for position, step in enumerate(proof.steps):
        try:
            check_clause_step(formula, proof.steps[:position], step)
        except ProofStepError as e:
            violations.append(StepViolation(position, e.code, e.message))
    valid = not violations
    report = ClauseProofReport(
        valid=valid,
        width=proof.width,
        length=proof.length,
        refutes=valid and proof.first_empty() is not None,
        tree_like=proof.is_tree_like(),
        non_flow_count=proof.non_flow_count,
        violations=violations,
    )
    logger.info(
        f"Checked clause proof: valid={report.valid} width={report.width} "
        f"length={report.length} refutes={report.refutes} tree_like={report.tree_like}"
    )
    return report


@dataclass(frozen=True)
class ClosureEntry:
    """How a clause entered the closure set."""

    kind: str  # "input", "resolve" or "removal"
    sources: Tuple[Clause, ...] = ()
    leaf: Optional[int] = None
    pivot: Optional[str] = None
    variable: Optional[str] = None


@dataclass
class PrenexShape:
    """Quantifier prefix and clause matrix of a prenex QCBF formula."""

    matrix: int
    leaves: List[int]
    binders: Dict[str, int]  # innermost binding location per variable
    universal: Dict[str, bool]


def prenex_shape(formula: QcbfFormula) -> PrenexShape:
    """
    Split a prenex formula into its prefix and its clause matrix.

    Raises:
        ClauseError: If the formula is not prenex with a flat clause matrix
    """
    matrix = formula.matrix_index()
    node = formula.node(matrix)
    if node.kind is NodeKind.CLAUSE:
        leaves = [matrix]
    elif node.kind is NodeKind.AND and all(
        formula.node(child).kind is NodeKind.CLAUSE for child in node.children
    ):
        leaves = list(node.children)
    else:
        raise ClauseError(
            "not-prenex", "Formula is not a quantifier prefix over a conjunction of clauses"
        )
    binders: Dict[str, int] = {}
    universal: Dict[str, bool] = {}
    for index in formula.quantifier_prefix():
        q = formula.node(index)
        assert q.variable is not None
        binders[q.variable.name] = index
        universal[q.variable.name] = q.kind is NodeKind.FORALL
    return PrenexShape(matrix, leaves, binders, universal)


def closure_set(
    formula: QcbfFormula, existential_pivots_only: bool = False
) -> Dict[Clause, ClosureEntry]:
    """
    Saturate the closure set of a prenex formula.

    The closure contains the matrix clauses and is closed under non-tautological
    resolvents and under removing a universal variable that is the innermost
    quantified variable of the clause.

    Args:
        formula: Prenex QCBF formula
        existential_pivots_only: Restrict resolution to existential pivots

    Returns:
        Map from each clause in the closure to the entry that first produced it
    """
    shape = prenex_shape(formula)
    closure: Dict[Clause, ClosureEntry] = {}
    queue: List[Clause] = []
    for leaf in shape.leaves:
        clause = formula.node(leaf).clause
        assert clause is not None
        if clause not in closure:
            closure[clause] = ClosureEntry("input", leaf=leaf)
            queue.append(clause)
    processed: List[Clause] = []
    while queue:
        current = queue.pop(0)
        derived: List[Tuple[Clause, ClosureEntry]] = []
        removable = _removable_universal(current, shape)
        if removable is not None:
            derived.append(
                (
                    current.without_variable(removable),
                    ClosureEntry("removal", (current,), variable=removable),
                )
            )
        for other in processed:
            for pivot in complementary_pivots(current, other):
                if existential_pivots_only and shape.universal.get(pivot, False):
                    continue
                try:
                    result = resolvent(current, other, pivot)
                except ClauseError:
                    continue
                derived.append((result, ClosureEntry("resolve", (current, other), pivot=pivot)))
        processed.append(current)
        for clause, entry in derived:
            if clause not in closure:
                closure[clause] = entry
                queue.append(clause)
    logger.debug(f"Closure saturated with {len(closure)} clauses")
    return closure


def _removable_universal(clause: Clause, shape: PrenexShape) -> Optional[str]:
    if clause.is_empty:
        return None
    innermost = max(clause.variables, key=lambda name: shape.binders[name])
    return innermost if shape.universal[innermost] else None


def qres_closure_derive(
    formula: QcbfFormula, target: Clause, existential_pivots_only: bool = False
) -> Optional[ClauseProof]:
    """
    Derive ``(c, target)`` at the clause matrix ``c`` if the target is in the closure.

    Inputs become a clause step plus an upward flow to the matrix, resolvents a
    resolve step, and universal removals an upward-flow chain to the binder, a
    removal step, and a downward-flow chain back to the matrix.

    Returns:
        A clause proof ending in ``(c, target)``, or None if the target is not
        in the closure

    Raises:
        ClauseError: If the formula is not prenex
    """
    shape = prenex_shape(formula)
    closure = closure_set(formula, existential_pivots_only)
    if target not in closure:
        logger.info(f"{target} is not in the closure ({len(closure)} clauses)")
        return None
    proof = ClauseProof()
    emitted: Dict[Clause, int] = {}
    c = shape.matrix

    def emit(clause: Clause) -> int:
        if clause in emitted:
            return emitted[clause]
        entry = closure[clause]
        if entry.kind == "input":
            assert entry.leaf is not None
            position = proof.add(ClauseRule.CLAUSE, (), entry.leaf, clause)
            if entry.leaf != c:
                position = proof.add(ClauseRule.UPWARD_FLOW, (position,), c, clause)
        elif entry.kind == "resolve":
            left, right = (emit(source) for source in entry.sources)
            position = proof.add(ClauseRule.RESOLVE, (left, right), c, clause, entry.pivot)
        else:
            assert entry.variable is not None
            (source,) = entry.sources
            position = emit(source)
            binder = shape.binders[entry.variable]
            path = formula.path_to_root(c)
            below_binder = path[: path.index(binder)]
            for location in below_binder[1:]:
                position = proof.add(ClauseRule.UPWARD_FLOW, (position,), location, source)
            position = proof.add(ClauseRule.FORALL_REMOVAL, (position,), binder, clause)
            for location in reversed(below_binder):
                position = proof.add(ClauseRule.DOWNWARD_FLOW, (position,), location, clause)
        emitted[clause] = position
        return position

    final = emit(target)
    logger.info(f"Derived {target} from the closure in {len(proof)} steps")
    return proof.restricted_to(final)


def unfold_tree_like(proof: ClauseProof, position: Optional[int] = None) -> ClauseProof:
    """
    Re-derive ``position`` (the last step by default) without sharing any step.

    Shared sub-derivations are duplicated, so the result is tree-like.
    """
    if position is None:
        position = len(proof) - 1
    unfolded = ClauseProof()

    def copy(p: int) -> int:
        step = proof[p]
        premises = tuple(copy(q) for q in step.premises)
        unfolded.steps.append(replace(step, premises=premises))
        return len(unfolded.steps) - 1

    copy(position)
    return unfolded
