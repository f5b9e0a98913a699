"""
Equivalence-preserving formula rewrites.

Three rewrites apply at one subformula occurrence: splitting a conjunction
into blocks, moving a quantifier inward over conjuncts not mentioning its
variable, and distributing a universal quantifier over a conjunction.
``prenexify`` goes the other way and pulls every quantifier to the front.
Rewritten formulas are re-indexed in pre-order from 1.
"""

from typing import Iterable, List, Optional, Sequence, Tuple

from src.core.model import (
    And,
    Exists,
    Expr,
    Forall,
    FormulaTree,
    NodeKind,
    QcInstance,
    Variable,
    expr_free_vars,
)
from src.utils.logger import get_logger

logger = get_logger("rewrites")

CONJUNCTION_SPLIT = 1
QUANTIFIER_INWARD = 2
FORALL_DISTRIBUTION = 3


class RewriteError(Exception):
    """A rewrite does not apply at the requested location."""

    def __init__(self, code: str, message: str) -> None:
        super().__init__(message)
        self.code = code


def _conjunction(parts: Sequence[Expr]) -> Expr:
    return parts[0] if len(parts) == 1 else And(tuple(parts))


def _replace(formula: FormulaTree, index: int, at: int, replacement: Expr) -> Expr:
    if index == at:
        return replacement
    node = formula.node(index)
    if node.kind is NodeKind.AND:
        return And(tuple(_replace(formula, c, at, replacement) for c in node.children))
    if node.is_quantifier:
        assert node.variable is not None
        builder = Exists if node.kind is NodeKind.EXISTS else Forall
        return builder(node.variable, _replace(formula, node.child, at, replacement))
    return formula.to_expr(index)


def _split(parts: Tuple[Expr, ...], blocks: Sequence[Sequence[int]]) -> Expr:
    positions = [p for block in blocks for p in block]
    if sorted(positions) != list(range(len(parts))) or len(blocks) < 2:
        raise RewriteError(
            "side-condition", "Blocks must partition the conjuncts into at least two parts"
        )
    if any(not block for block in blocks):
        raise RewriteError("side-condition", "Blocks must be non-empty")
    return And(tuple(_conjunction([parts[p] for p in sorted(block)]) for block in blocks))


def _inward(
    variable: Variable, quantifier: type, parts: Tuple[Expr, ...], inside: Optional[Iterable[int]]
) -> Expr:
    if inside is None:
        chosen = {p for p, part in enumerate(parts) if variable in expr_free_vars(part)}
    else:
        chosen = set(inside)
    if not chosen <= set(range(len(parts))):
        raise RewriteError("side-condition", f"Conjunct positions out of range: {sorted(chosen)}")
    outside = [part for p, part in enumerate(parts) if p not in chosen]
    if not outside and all(variable in expr_free_vars(part) for part in parts):
        raise RewriteError("side-condition", f"{variable.name} is free in every conjunct")
    if not chosen or not outside:
        raise RewriteError("shape", "Both the quantified and the remaining part must be non-empty")
    for part in outside:
        if variable in expr_free_vars(part):
            raise RewriteError(
                "side-condition", f"{variable.name} is free in a conjunct moved outside"
            )
    kept = _conjunction([parts[p] for p in sorted(chosen)])
    return And((quantifier(variable, kept), _conjunction(outside)))


def rewrite(
    formula: FormulaTree,
    rule: int,
    at: int,
    blocks: Optional[Sequence[Sequence[int]]] = None,
    inside: Optional[Iterable[int]] = None,
) -> FormulaTree:
    """
    Apply one rewrite at index ``at``.

    Args:
        formula: Formula to rewrite
        rule: 1 (conjunction split), 2 (quantifier inward) or 3 (forall distribution)
        at: Index of the subformula the rule applies to
        blocks: Rule 1: conjunct positions per block, partitioning the conjuncts
            (default: first conjunct against the rest)
        inside: Rule 2: conjunct positions that stay under the quantifier
            (default: the conjuncts where the variable is free)

    Returns:
        Rewritten formula of the same class, re-indexed from 1

    Raises:
        RewriteError: ``shape`` if the subformula does not match the rule,
            ``side-condition`` if the rule's condition fails
    """
    if at not in formula:
        raise RewriteError("shape", f"Index {at} is not in the formula")
    node = formula.node(at)
    if rule == CONJUNCTION_SPLIT:
        if node.kind is not NodeKind.AND or len(node.children) < 2:
            raise RewriteError("shape", f"Index {at} is not a conjunction of two or more parts")
        parts = tuple(formula.to_expr(c) for c in node.children)
        replacement = _split(parts, blocks if blocks is not None else [[0], range(1, len(parts))])
    elif rule in (QUANTIFIER_INWARD, FORALL_DISTRIBUTION):
        if not node.is_quantifier or formula.node(node.child).kind is not NodeKind.AND:
            raise RewriteError("shape", f"Index {at} is not a quantifier over a conjunction")
        assert node.variable is not None
        body = formula.node(node.child)
        parts = tuple(formula.to_expr(c) for c in body.children)
        quantifier = Exists if node.kind is NodeKind.EXISTS else Forall
        if rule == QUANTIFIER_INWARD:
            replacement = _inward(node.variable, quantifier, parts, inside)
        else:
            if node.kind is not NodeKind.FORALL:
                raise RewriteError("shape", f"Index {at} is not a universal quantifier")
            replacement = And(tuple(Forall(node.variable, part) for part in parts))
    else:
        raise RewriteError("shape", f"Unknown rewrite rule: {rule}")
    result = type(formula).from_expr(_replace(formula, formula.root, at, replacement))
    logger.debug(f"Applied rewrite {rule} at index {at}: {result.node_count} nodes")
    return result


def rewrite_instance(instance: QcInstance, rule: int, at: int, **params) -> QcInstance:
    formula = rewrite(instance.formula, rule, at, **params)
    return QcInstance(formula, instance.structure)  # type: ignore[arg-type]


Prefix = List[Tuple[type, Variable]]


def _pull(expr: Expr) -> Tuple[Prefix, List[Expr]]:
    """Quantifier prefix and flattened matrix conjuncts of ``expr``."""
    if isinstance(expr, (Exists, Forall)):
        prefix, matrix = _pull(expr.body)
        return [(type(expr), expr.variable)] + prefix, matrix
    if not isinstance(expr, And):
        return [], [expr]
    pulled = [_pull(part) for part in expr.parts]
    prefix: Prefix = []
    matrix: List[Expr] = []
    for position, (part_prefix, part_matrix) in enumerate(pulled):
        for _, variable in part_prefix:
            for other, sibling in enumerate(expr.parts):
                if other != position and variable in expr_free_vars(sibling):
                    raise RewriteError(
                        "capture", f"{variable.name} is free in a sibling conjunct"
                    )
            if any(variable == seen for _, seen in prefix):
                raise RewriteError("capture", f"{variable.name} is bound in two conjuncts")
        prefix.extend(part_prefix)
        matrix.extend(part_matrix)
    return prefix, matrix


def prenexify(formula: FormulaTree) -> FormulaTree:
    """
    Pull every quantifier to the front, flattening nested conjunctions.

    Raises:
        RewriteError: ``capture`` if a quantifier cannot pass a sibling conjunct
    """
    prefix, matrix = _pull(formula.to_expr())
    expr: Expr = _conjunction(matrix)
    for quantifier, variable in reversed(prefix):
        expr = quantifier(variable, expr)
    result = type(formula).from_expr(expr)
    logger.debug(f"Prenex form has a prefix of {len(prefix)} quantifier(s)")
    return result
