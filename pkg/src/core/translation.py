"""
Translations between quantified clause formulas and constraint instances.

``qcsp_translation`` replaces every clause leaf by an atom over a fresh
relation ``C<index>`` interpreted over the universe {0,1} by the clause's
satisfying assignments, keeping all indices. The two proof translations move
refutations between the clause system and the judgement system while keeping
length and width within fixed bounds of the input.
"""

from dataclasses import dataclass
from itertools import product
from typing import Dict, List, Optional, Tuple

from src.core.clause_proofs import ClauseProof, ClauseRule, check_clause_proof
from src.core.clauses import Clause, FALSE_VALUE, Literal, TRUE_VALUE, resolvent
from src.core.constraints import Assignment, Constraint, forall_eliminate, join, project
from src.core.judgement_proofs import JudgementProof, Rule, check_proof
from src.core.model import (
    BOOLEAN_SORT,
    BOOLEAN_UNIVERSE,
    Node,
    NodeKind,
    QcbfFormula,
    QcFormula,
    QcInstance,
    Signature,
    Structure,
    Variable,
    boolean_variable,
)
from src.utils.logger import get_logger

logger = get_logger("translation")


class TranslationError(Exception):
    """Raised when a proof cannot be translated or a translation bound is exceeded."""

    pass


@dataclass(frozen=True)
class TranslationMap:
    """Relation name and argument order chosen for every clause leaf."""

    relation_names: Dict[int, str]
    argument_orders: Dict[int, Tuple[str, ...]]
    structure: Structure


FLOW_RULE_MAP = {
    Rule.UPWARD_FLOW: ClauseRule.UPWARD_FLOW,
    Rule.DOWNWARD_FLOW: ClauseRule.DOWNWARD_FLOW,
}


def relation_name(index: int) -> str:
    return f"C{index}"


def qcsp_translation(formula: QcbfFormula) -> Tuple[QcInstance, TranslationMap]:
    """
    Translate a QCBF formula into a one-sorted constraint instance over {0,1}.

    Returns:
        The instance (same indices) and the per-clause translation map
    """
    nodes: List[Node] = []
    relations: Dict[str, Tuple[str, ...]] = {}
    interpretations = {}
    names: Dict[int, str] = {}
    orders: Dict[int, Tuple[str, ...]] = {}
    for node in formula.nodes():
        if node.kind is not NodeKind.CLAUSE:
            nodes.append(node)
            continue
        assert node.clause is not None
        name = relation_name(node.index)
        order = tuple(sorted(node.clause.variables))
        names[node.index] = name
        orders[node.index] = order
        relations[name] = (BOOLEAN_SORT,) * len(order)
        interpretations[name] = node.clause.satisfying_tuples(order)
        nodes.append(
            Node(
                node.index,
                NodeKind.ATOM,
                relation=name,
                arguments=tuple(boolean_variable(v) for v in order),
            )
        )
    signature = Signature(frozenset({BOOLEAN_SORT}), relations)
    structure = Structure(signature, {BOOLEAN_SORT: BOOLEAN_UNIVERSE}, interpretations)
    instance = QcInstance(QcFormula(nodes, formula.root), structure)
    logger.debug(f"Translated {len(names)} clause(s) into relations")
    return instance, TranslationMap(names, orders, structure)


def clause_constraint(clause: Clause) -> Constraint:
    """Constraint on the clause's variables holding every assignment except its falsifier."""
    ordered = sorted(clause.variables)
    variables = [boolean_variable(name) for name in ordered]
    rows = frozenset(
        Assignment(tuple(zip(variables, values)))
        for values in clause.satisfying_tuples(ordered)
    )
    return Constraint(frozenset(variables), rows)


def falsifying_assignment(clause: Clause) -> Assignment:
    return Assignment.of({boolean_variable(k): v for k, v in clause.falsifier().items()})


def clause_to_constraint_proof(
    formula: QcbfFormula, proof: ClauseProof, instance: Optional[QcInstance] = None
) -> JudgementProof:
    """
    Translate a clause proof into a judgement proof on the translated instance.

    Every clause judgement (i, α) becomes a judgement (i, vars(α), F) whose only
    missing assignment is the falsifier of α. Resolve steps become a join
    followed by a projection; the other rules map one to one, except that a
    universal removal not touching α becomes an upward flow.

    Raises:
        TranslationError: If the input proof is invalid or a bound is exceeded
    """
    if instance is None:
        instance, _ = qcsp_translation(formula)
    report = check_clause_proof(formula, proof)
    if not report.valid:
        raise TranslationError(f"Input clause proof is invalid: {report.violations[0].message}")
    result = JudgementProof()
    mapped: List[int] = []
    for step in proof.steps:
        location = step.judgement.location
        clause = step.judgement.clause
        premises = tuple(mapped[p] for p in step.premises)
        target = clause_constraint(clause)
        if step.rule is ClauseRule.CLAUSE:
            position = result.add(Rule.ATOM, (), location, target)
        elif step.rule is ClauseRule.RESOLVE:
            left, right = (result[p].judgement.constraint for p in premises)
            joined = join(left, right)
            position = result.add(Rule.JOIN, premises, location, joined)
            position = result.add(
                Rule.PROJECTION, (position,), location, project(joined, target.variables)
            )
        elif step.rule is ClauseRule.UPWARD_FLOW:
            position = result.add(Rule.UPWARD_FLOW, premises, location, target)
        elif step.rule is ClauseRule.DOWNWARD_FLOW:
            position = result.add(Rule.DOWNWARD_FLOW, premises, location, target)
        else:
            y = instance.formula.node(location).variable
            assert y is not None
            source = result[premises[0]].judgement.constraint
            if y in source.variables:
                position = result.add(
                    Rule.FORALL_ELIMINATION,
                    premises,
                    location,
                    forall_eliminate(source, y, BOOLEAN_UNIVERSE),
                    y,
                )
            else:
                position = result.add(Rule.UPWARD_FLOW, premises, location, source)
        if result[position].judgement.constraint != target:
            raise TranslationError(f"Step {len(mapped) + 1} does not define {clause}")
        mapped.append(position)
    if len(result) > 2 * len(proof) or result.width > proof.width + 1:
        raise TranslationError(
            f"Translation exceeded its bounds: length {len(result)} for {len(proof)} steps, "
            f"width {result.width} for width {proof.width}"
        )
    logger.info(f"Translated clause proof of length {len(proof)} into {len(result)} judgements")
    return result


def constraint_to_clause_proof(
    formula: QcbfFormula, proof: JudgementProof, instance: Optional[QcInstance] = None
) -> ClauseProof:
    """
    Translate a judgement proof on the translated instance into a clause proof.

    For each judgement (i, V, F) the produced proof holds clause judgements
    (i, α) with vars(α) ⊆ V such that every assignment on V outside F
    falsifies one of them. Clauses are added per falsified assignment, so a
    judgement contributes at most max(w·2^(w-1), 1) clause judgements where w
    is the proof width.

    Raises:
        TranslationError: If the input proof is invalid or a bound is exceeded
    """
    if instance is None:
        instance, _ = qcsp_translation(formula)
    report = check_proof(instance, proof)
    if not report.valid:
        raise TranslationError(f"Input judgement proof is invalid: {report.violations[0].message}")
    builder = _ClauseProofBuilder(formula)
    covers: List[List[int]] = []
    for step in proof.steps:
        judgement = step.judgement
        location = judgement.location
        constraint = judgement.constraint
        if step.rule is Rule.ATOM:
            clause = formula.node(location).clause
            assert clause is not None
            cover = [builder.proof.add(ClauseRule.CLAUSE, (), location, clause)]
        elif step.rule is Rule.JOIN:
            left, right = step.premises
            cover = list(dict.fromkeys(covers[left] + covers[right]))
        elif step.rule is Rule.PROJECTION:
            source = proof[step.premises[0]].judgement.constraint
            cover = builder.project(
                covers[step.premises[0]], source, constraint.variables, location
            )
        elif step.rule is Rule.FORALL_ELIMINATION:
            source = proof[step.premises[0]].judgement.constraint
            y = formula.node(location).variable
            assert y is not None
            cover = builder.remove(covers[step.premises[0]], source, y, location)
        else:
            cover = builder.flow(
                covers[step.premises[0]],
                constraint,
                location,
                FLOW_RULE_MAP[step.rule],
            )
        cover = builder.normalize(cover, constraint, location)
        covers.append(cover)
    result = builder.proof
    w = proof.width
    budget = len(proof) * max(w * 2 ** (w - 1) if w else 0, 1)
    if len(result) > budget or result.width > w:
        raise TranslationError(
            f"Translation exceeded its bounds: length {len(result)} (budget {budget}), "
            f"width {result.width} for width {w}"
        )
    logger.info(f"Translated judgement proof of length {len(proof)} into {len(result)} clauses")
    return result


def _all_assignments(variables: List[Variable]) -> List[Assignment]:
    return [
        Assignment(tuple(zip(variables, values)))
        for values in product(BOOLEAN_UNIVERSE, repeat=len(variables))
    ]


class _ClauseProofBuilder:
    """Adds clause steps covering the assignments a judgement excludes."""

    def __init__(self, formula: QcbfFormula) -> None:
        self.formula = formula
        self.proof = ClauseProof()

    def clause(self, position: int) -> Clause:
        return self.proof[position].judgement.clause

    def covering(self, cover: List[int], g: Assignment) -> Optional[int]:
        """Position in ``cover`` of the smallest clause falsified by ``g``."""
        values = g.by_name()
        best: Optional[int] = None
        for position in cover:
            clause = self.clause(position)
            if clause.is_falsified_by(values):
                if best is None or clause.width < self.clause(best).width:
                    best = position
        return best

    def project(
        self, cover: List[int], source: Constraint, target: frozenset, location: int
    ) -> List[int]:
        """Eliminate the projected-away variables one at a time by resolution."""
        current = source
        for v in sorted(source.variables - target, reverse=True):
            reduced = project(current, current.variables - {v})
            resolved: Dict[Clause, int] = {}
            next_cover: List[int] = []
            for g in _all_assignments(reduced.sorted_variables()):
                if g in reduced.rows:
                    continue
                v_free = [p for p in cover if v.name not in self.clause(p).variables]
                position = self.covering(v_free, g)
                if position is None:
                    low = self.covering(cover, g.extend(v, FALSE_VALUE))
                    high = self.covering(cover, g.extend(v, TRUE_VALUE))
                    assert low is not None and high is not None
                    merged = resolvent(self.clause(low), self.clause(high), v.name)
                    if merged not in resolved:
                        resolved[merged] = self.proof.add(
                            ClauseRule.RESOLVE, (low, high), location, merged, v.name
                        )
                    position = resolved[merged]
                if position not in next_cover:
                    next_cover.append(position)
            cover = next_cover
            current = reduced
        return cover

    def remove(
        self, cover: List[int], source: Constraint, y: Variable, location: int
    ) -> List[int]:
        """Apply universal removal to the clauses covering each excluded assignment."""
        eliminated = forall_eliminate(source, y, BOOLEAN_UNIVERSE)
        removed: Dict[int, int] = {}
        next_cover: List[int] = []
        for g in _all_assignments(eliminated.sorted_variables()):
            if g in eliminated.rows:
                continue
            extensions = [g.extend(y, value) for value in BOOLEAN_UNIVERSE]
            position = next(
                self.covering(cover, h) for h in extensions if h not in source.rows
            )
            assert position is not None
            if position not in removed:
                clause = self.clause(position).without_variable(y.name)
                removed[position] = self.proof.add(
                    ClauseRule.FORALL_REMOVAL, (position,), location, clause
                )
            if removed[position] not in next_cover:
                next_cover.append(removed[position])
        return next_cover

    def flow(
        self, cover: List[int], constraint: Constraint, location: int, rule: ClauseRule
    ) -> List[int]:
        """Move the clauses covering each excluded assignment to ``location``."""
        moved: Dict[int, int] = {}
        next_cover: List[int] = []
        for g in _all_assignments(constraint.sorted_variables()):
            if g in constraint.rows:
                continue
            position = self.covering(cover, g)
            assert position is not None
            if position not in moved:
                moved[position] = self.proof.add(
                    rule, (position,), location, self.clause(position)
                )
            if moved[position] not in next_cover:
                next_cover.append(moved[position])
        return next_cover

    def normalize(self, cover: List[int], constraint: Constraint, location: int) -> List[int]:
        """
        Replace the covers (v) and (-v) of an empty one-variable judgement by ().

        Flowing the empty clause then costs one step instead of two.
        """
        if constraint.width != 1 or not constraint.is_empty:
            return cover
        if any(self.clause(p).is_empty for p in cover):
            return [p for p in cover if self.clause(p).is_empty][:1]
        (v,) = constraint.variables
        positive = next(p for p in cover if self.clause(p).literal_for(v.name) == Literal(v.name))
        negative = next(
            p for p in cover if self.clause(p).literal_for(v.name) == Literal(v.name, False)
        )
        empty = resolvent(self.clause(positive), self.clause(negative), v.name)
        return [self.proof.add(ClauseRule.RESOLVE, (positive, negative), location, empty, v.name)]
