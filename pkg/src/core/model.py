"""
Core model for qjudge.

Multi-sorted signatures and finite structures, indexed formula trees for
quantified constraint formulas (qc-formulas) and quantified clause formulas
(QCBF), expression builders, free variables, width, and instance validation.

Indices name subformula occurrences. Trees built from expressions are indexed
depth-first in pre-order starting at 1, so the running example
``exists x. forall y. (E(x,y) and exists x. E(x,y))`` gets indices 1..6.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple, Type, TypeVar, Union

from src.core.clauses import Clause
from src.utils.logger import get_logger

logger = get_logger("model")

BOOLEAN_SORT = "bool"
BOOLEAN_UNIVERSE: Tuple[str, ...] = ("0", "1")


class ModelError(Exception):
    """Raised for unknown indices, unknown sorts and malformed trees."""

    pass


@dataclass(frozen=True, order=True)
class Variable:
    """A variable together with its sort."""

    name: str
    sort: str

    def __str__(self) -> str:
        return self.name


def boolean_variable(name: str) -> Variable:
    return Variable(name, BOOLEAN_SORT)


@dataclass
class Signature:
    """Sorts plus relation symbols with their arity words."""

    sorts: FrozenSet[str]
    relations: Dict[str, Tuple[str, ...]] = field(default_factory=dict)

    def arity(self, relation: str) -> Tuple[str, ...]:
        try:
            return self.relations[relation]
        except KeyError:
            raise ModelError(f"Unknown relation: {relation}") from None


@dataclass
class Structure:
    """A finite structure: one universe per sort and an interpretation per relation."""

    signature: Signature
    universes: Dict[str, Tuple[str, ...]]
    interpretations: Dict[str, FrozenSet[Tuple[str, ...]]] = field(default_factory=dict)

    def universe(self, sort: str) -> Tuple[str, ...]:
        try:
            return self.universes[sort]
        except KeyError:
            raise ModelError(f"Unknown sort: {sort}") from None

    def interpretation(self, relation: str) -> FrozenSet[Tuple[str, ...]]:
        return self.interpretations.get(relation, frozenset())

    @property
    def max_universe_size(self) -> int:
        return max((len(elements) for elements in self.universes.values()), default=0)


class NodeKind(Enum):
    """Kinds of formula tree nodes."""

    ATOM = "atom"
    AND = "and"
    EXISTS = "exists"
    FORALL = "forall"
    TRUE = "true"
    CLAUSE = "clause"


QUANTIFIERS = (NodeKind.EXISTS, NodeKind.FORALL)


@dataclass(frozen=True)
class Node:
    """One subformula occurrence."""

    index: int
    kind: NodeKind
    children: Tuple[int, ...] = ()
    variable: Optional[Variable] = None
    relation: Optional[str] = None
    arguments: Tuple[Variable, ...] = ()
    clause: Optional[Clause] = None

    @property
    def is_quantifier(self) -> bool:
        return self.kind in QUANTIFIERS

    @property
    def child(self) -> int:
        """The only child of a quantifier node."""
        if len(self.children) != 1:
            raise ModelError(f"Node {self.index} does not have exactly one child")
        return self.children[0]


# Expression builders


@dataclass(frozen=True)
class Atom:
    relation: str
    arguments: Tuple[Variable, ...] = ()


@dataclass(frozen=True)
class And:
    parts: Tuple["Expr", ...]


@dataclass(frozen=True)
class Exists:
    variable: Variable
    body: "Expr"


@dataclass(frozen=True)
class Forall:
    variable: Variable
    body: "Expr"


@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class ClauseLeaf:
    clause: Clause


Expr = Union[Atom, And, Exists, Forall, Top, ClauseLeaf]


def expr_free_vars(expr: Expr) -> FrozenSet[Variable]:
    """Free variables of an expression."""
    if isinstance(expr, Atom):
        return frozenset(expr.arguments)
    if isinstance(expr, ClauseLeaf):
        return frozenset(boolean_variable(name) for name in expr.clause.variables)
    if isinstance(expr, Top):
        return frozenset()
    if isinstance(expr, And):
        result: Set[Variable] = set()
        for part in expr.parts:
            result |= expr_free_vars(part)
        return frozenset(result)
    return expr_free_vars(expr.body) - {expr.variable}


def render_expr(expr: Expr) -> str:
    """Render an expression in the S-expression syntax of instance documents."""
    if isinstance(expr, Atom):
        return "(atom " + " ".join([expr.relation] + [v.name for v in expr.arguments]) + ")"
    if isinstance(expr, ClauseLeaf):
        return "(clause" + "".join(f" {lit}" for lit in expr.clause.sorted_literals()) + ")"
    if isinstance(expr, Top):
        return "(true)"
    if isinstance(expr, And):
        return "(and " + " ".join(render_expr(part) for part in expr.parts) + ")"
    keyword = "exists" if isinstance(expr, Exists) else "forall"
    binder = expr.variable.name
    if expr.variable.sort != BOOLEAN_SORT:
        binder += f":{expr.variable.sort}"
    return f"({keyword} {binder} {render_expr(expr.body)})"


def _index_expression(expr: Expr, start: int) -> Tuple[List[Node], int]:
    nodes: List[Node] = []
    counter = [start]

    def visit(e: Expr) -> int:
        index = counter[0]
        counter[0] += 1
        if isinstance(e, Atom):
            nodes.append(Node(index, NodeKind.ATOM, relation=e.relation, arguments=e.arguments))
        elif isinstance(e, ClauseLeaf):
            nodes.append(Node(index, NodeKind.CLAUSE, clause=e.clause))
        elif isinstance(e, Top):
            nodes.append(Node(index, NodeKind.TRUE))
        elif isinstance(e, And):
            children = tuple(visit(part) for part in e.parts)
            nodes.append(Node(index, NodeKind.AND, children=children))
        else:
            kind = NodeKind.EXISTS if isinstance(e, Exists) else NodeKind.FORALL
            child = visit(e.body)
            nodes.append(Node(index, kind, children=(child,), variable=e.variable))
        return index

    root = visit(expr)
    nodes.sort(key=lambda n: n.index)
    return nodes, root


@dataclass(frozen=True)
class Violation:
    """One invariant violation found by validation."""

    code: str
    message: str
    location: Optional[str] = None

    def __str__(self) -> str:
        where = f" [{self.location}]" if self.location else ""
        return f"{self.code}{where}: {self.message}"


T = TypeVar("T", bound="FormulaTree")


class FormulaTree:
    """
    Indexed formula tree shared by qc-formulas and QCBF formulas.

    Construction is lenient: duplicate indices, dangling children and shared
    children are recorded and reported by ``structure_violations`` rather than
    rejected, so that malformed documents can be diagnosed.
    """

    def __init__(self, nodes: Iterable[Node], root: int) -> None:
        self._nodes: Dict[int, Node] = {}
        self.duplicate_indices: List[int] = []
        for node in nodes:
            if node.index in self._nodes:
                self.duplicate_indices.append(node.index)
            else:
                self._nodes[node.index] = node
        self.root = root
        self._parents: Dict[int, int] = {}
        self._shared_children: List[int] = []
        for node in self._nodes.values():
            for child in node.children:
                if child in self._parents:
                    self._shared_children.append(child)
                else:
                    self._parents[child] = node.index
        self._free: Dict[int, FrozenSet[Variable]] = {}

    @classmethod
    def from_expr(cls: Type[T], expr: Expr, start: int = 1) -> T:
        """Build a tree from an expression, indexing nodes in pre-order from ``start``."""
        nodes, root = _index_expression(expr, start)
        return cls(nodes, root)

    def __contains__(self, index: object) -> bool:
        return index in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    @property
    def node_count(self) -> int:
        return len(self._nodes)

    @property
    def indices(self) -> List[int]:
        return sorted(self._nodes)

    def nodes(self) -> List[Node]:
        return [self._nodes[i] for i in self.indices]

    def node(self, index: int) -> Node:
        try:
            return self._nodes[index]
        except KeyError:
            raise ModelError(f"Unknown index: {index}") from None

    def parent(self, index: int) -> Optional[int]:
        self.node(index)
        return self._parents.get(index)

    def children(self, index: int) -> Tuple[int, ...]:
        return self.node(index).children

    def is_parent(self, parent: int, child: int) -> bool:
        return child in self._nodes and self._parents.get(child) == parent

    def free_vars(self, index: int) -> FrozenSet[Variable]:
        """
        Free variables of the subformula occurrence at ``index``.

        Raises:
            ModelError: If the index is unknown or the tree below it is malformed
        """
        cached = self._free.get(index)
        if cached is not None:
            return cached
        self.node(index)
        # Iterative post-order so that deep quantifier prefixes do not hit the recursion limit
        stack: List[Tuple[int, bool]] = [(index, False)]
        on_stack: Set[int] = set()
        while stack:
            current, expanded = stack.pop()
            if current in self._free:
                continue
            node = self.node(current)
            if not expanded:
                if current in on_stack:
                    raise ModelError(f"Cycle through index {current}")
                on_stack.add(current)
                stack.append((current, True))
                for child in node.children:
                    if child not in self._free:
                        if child in on_stack:
                            raise ModelError(f"Cycle through index {child}")
                        stack.append((child, False))
                continue
            on_stack.discard(current)
            self._free[current] = self._node_free_vars(node)
        return self._free[index]

    def _node_free_vars(self, node: Node) -> FrozenSet[Variable]:
        if node.kind is NodeKind.ATOM:
            return frozenset(node.arguments)
        if node.kind is NodeKind.CLAUSE:
            clause = node.clause or Clause()
            return frozenset(boolean_variable(name) for name in clause.variables)
        if node.kind is NodeKind.TRUE:
            return frozenset()
        result: Set[Variable] = set()
        for child in node.children:
            result |= self._free[child]
        if node.is_quantifier and node.variable is not None:
            result.discard(node.variable)
        return frozenset(result)

    def free_names(self, index: int) -> FrozenSet[str]:
        return frozenset(v.name for v in self.free_vars(index))

    @property
    def width(self) -> int:
        return max((len(self.free_vars(i)) for i in self._nodes), default=0)

    def is_sentence(self) -> bool:
        return not self.free_vars(self.root)

    def path_to_root(self, index: int) -> List[int]:
        """Indices from ``index`` up to the root, both inclusive."""
        path = [index]
        seen = {index}
        current = self.parent(index)
        while current is not None:
            if current in seen:
                raise ModelError(f"Cycle through index {current}")
            seen.add(current)
            path.append(current)
            current = self._parents.get(current)
        return path

    def is_ancestor(self, upper: int, lower: int) -> bool:
        """True iff ``upper`` is a strict ancestor of ``lower``."""
        return upper != lower and upper in self.path_to_root(lower)

    def depth(self, index: int) -> int:
        return len(self.path_to_root(index)) - 1

    def binder_above(self, index: int, name: str) -> Optional[int]:
        """First strict ancestor of ``index`` quantifying the variable ``name``."""
        for ancestor in self.path_to_root(index)[1:]:
            node = self._nodes[ancestor]
            if node.is_quantifier and node.variable is not None and node.variable.name == name:
                return ancestor
        return None

    def quantifier_prefix(self) -> List[int]:
        """Quantifier nodes on the chain starting at the root, outermost first."""
        prefix = []
        current = self.root
        while self.node(current).is_quantifier:
            prefix.append(current)
            current = self.node(current).child
        return prefix

    def matrix_index(self) -> int:
        """First non-quantifier node below the root's quantifier chain."""
        prefix = self.quantifier_prefix()
        return self.node(prefix[-1]).child if prefix else self.root

    def is_prenex(self) -> bool:
        """True iff no quantifier occurs below the root's quantifier chain."""
        stack = [self.matrix_index()]
        while stack:
            node = self.node(stack.pop())
            if node.is_quantifier:
                return False
            stack.extend(node.children)
        return True

    def variables(self) -> Set[Variable]:
        """Every variable occurring in the tree, bound or free."""
        result: Set[Variable] = set()
        for node in self._nodes.values():
            if node.variable is not None:
                result.add(node.variable)
            result.update(node.arguments)
            if node.clause is not None:
                result.update(boolean_variable(name) for name in node.clause.variables)
        return result

    def to_expr(self, index: Optional[int] = None) -> Expr:
        """Rebuild the expression rooted at ``index`` (the root by default)."""
        node = self.node(self.root if index is None else index)
        if node.kind is NodeKind.ATOM:
            return Atom(node.relation or "", node.arguments)
        if node.kind is NodeKind.CLAUSE:
            return ClauseLeaf(node.clause or Clause())
        if node.kind is NodeKind.TRUE:
            return Top()
        if node.kind is NodeKind.AND:
            return And(tuple(self.to_expr(child) for child in node.children))
        assert node.variable is not None
        builder = Exists if node.kind is NodeKind.EXISTS else Forall
        return builder(node.variable, self.to_expr(node.child))

    def reindexed(self: T, mapping: Dict[int, int]) -> T:
        """Return a copy with every index renamed through ``mapping``."""
        nodes = [
            Node(
                mapping[n.index],
                n.kind,
                tuple(mapping[c] for c in n.children),
                n.variable,
                n.relation,
                n.arguments,
                n.clause,
            )
            for n in self._nodes.values()
        ]
        return type(self)(nodes, mapping[self.root])

    def structure_violations(self) -> List[Violation]:
        """Tree-shape violations: duplicate or dangling indices, sharing, cycles, arities."""
        violations = [
            Violation("duplicate-index", f"Index {i} used twice", str(i))
            for i in self.duplicate_indices
        ]
        if self.root not in self._nodes:
            violations.append(Violation("unknown-root", f"Root {self.root} is not a node"))
            return violations
        if self.root in self._parents:
            violations.append(Violation("root-has-parent", "Root is a child", str(self.root)))
        for child in self._shared_children:
            violations.append(
                Violation("shared-child", f"Index {child} has two parents", str(child))
            )
        for node in self._nodes.values():
            for child in node.children:
                if child not in self._nodes:
                    violations.append(
                        Violation("unknown-child", f"Child {child} is not a node", str(node.index))
                    )
            if not self._arity_ok(node):
                violations.append(
                    Violation(
                        "bad-arity",
                        f"{node.kind.value} node has {len(node.children)} children",
                        str(node.index),
                    )
                )
            if node.is_quantifier and node.variable is None:
                violations.append(
                    Violation("missing-variable", "Quantifier binds nothing", str(node.index))
                )
        if violations:
            return violations
        reachable: Set[int] = set()
        stack = [self.root]
        while stack:
            current = stack.pop()
            if current in reachable:
                violations.append(Violation("cycle", "Tree contains a cycle", str(current)))
                return violations
            reachable.add(current)
            stack.extend(self._nodes[current].children)
        for index in sorted(set(self._nodes) - reachable):
            violations.append(Violation("unreachable", "Node not below the root", str(index)))
        return violations

    @staticmethod
    def _arity_ok(node: Node) -> bool:
        if node.kind is NodeKind.AND:
            return len(node.children) >= 1
        if node.is_quantifier:
            return len(node.children) == 1
        return not node.children

    def sort_violations(self) -> List[Violation]:
        """A variable name must carry one sort throughout the tree."""
        sorts: Dict[str, Set[str]] = {}
        for variable in self.variables():
            sorts.setdefault(variable.name, set()).add(variable.sort)
        return [
            Violation("variable-sorts", f"{name} used with sorts {sorted(found)}", name)
            for name, found in sorted(sorts.items())
            if len(found) > 1
        ]


class QcFormula(FormulaTree):
    """Indexed qc-formula: atoms, conjunction, quantifiers and true."""

    pass


class QcbfFormula(FormulaTree):
    """Indexed quantified clause formula over propositional variables."""

    def universe(self, sort: str) -> Tuple[str, ...]:
        if sort != BOOLEAN_SORT:
            raise ModelError(f"Unknown sort: {sort}")
        return BOOLEAN_UNIVERSE

    def clause_indices(self) -> List[int]:
        return [n.index for n in self.nodes() if n.kind is NodeKind.CLAUSE]


@dataclass
class QcInstance:
    """A qc-sentence together with a finite structure."""

    formula: QcFormula
    structure: Structure

    @property
    def signature(self) -> Signature:
        return self.structure.signature

    def universe(self, sort: str) -> Tuple[str, ...]:
        return self.structure.universe(sort)


Target = Union[QcInstance, QcbfFormula]


def formula_of(target: Union[Target, FormulaTree]) -> FormulaTree:
    return target.formula if isinstance(target, QcInstance) else target


def build_formula(expr: Expr, start: int = 1) -> QcFormula:
    return QcFormula.from_expr(expr, start)


def build_qcbf(expr: Expr, start: int = 1) -> QcbfFormula:
    return QcbfFormula.from_expr(expr, start)


def free_vars(f: Union[Target, FormulaTree], i: int) -> FrozenSet[Variable]:
    """
    Free variables of the subformula occurrence at index ``i``.

    Raises:
        ModelError: If ``i`` is not an index of the formula
    """
    return formula_of(f).free_vars(i)


def formula_width(f: Union[Target, FormulaTree]) -> int:
    """Maximum number of free variables over all subformula occurrences."""
    return formula_of(f).width


def validate_instance(target: Target) -> List[Violation]:
    """
    Collect every invariant violation of an instance or QCBF formula.

    Args:
        target: QcInstance or QcbfFormula

    Returns:
        List of violations; empty when the input is valid
    """
    formula = formula_of(target)
    violations = formula.structure_violations()
    if not violations:
        violations.extend(formula.sort_violations())
    if isinstance(target, QcInstance):
        violations.extend(_structure_violations(target.structure))
        violations.extend(_qc_node_violations(target))
    else:
        violations.extend(_qcbf_node_violations(target))
    if not any(v.code in ("cycle", "unknown-child", "unknown-root") for v in violations):
        if not formula.is_sentence():
            names = sorted(v.name for v in formula.free_vars(formula.root))
            violations.append(Violation("not-a-sentence", f"Free variables at root: {names}"))
    if violations:
        logger.debug(f"Validation found {len(violations)} violation(s)")
    return violations


def _structure_violations(structure: Structure) -> List[Violation]:
    violations: List[Violation] = []
    signature = structure.signature
    for relation, word in sorted(signature.relations.items()):
        for sort in word:
            if sort not in signature.sorts:
                violations.append(
                    Violation("unknown-sort", f"Arity of {relation} uses sort {sort}", relation)
                )
    for sort in sorted(signature.sorts):
        elements = structure.universes.get(sort)
        if not elements:
            violations.append(Violation("empty-universe", f"Sort {sort} has no elements", sort))
        elif len(set(elements)) != len(elements):
            violations.append(Violation("duplicate-element", f"Universe of {sort} repeats", sort))
    for sort in sorted(set(structure.universes) - set(signature.sorts)):
        violations.append(Violation("unknown-sort", f"Universe given for undeclared {sort}", sort))
    for relation, tuples in sorted(structure.interpretations.items()):
        if relation not in signature.relations:
            violations.append(
                Violation("unknown-relation", f"Interpretation of undeclared {relation}", relation)
            )
            continue
        word = signature.relations[relation]
        for row in sorted(tuples):
            if len(row) != len(word):
                violations.append(
                    Violation("tuple-arity", f"{relation} tuple {row} has wrong length", relation)
                )
                continue
            for value, sort in zip(row, word):
                if value not in structure.universes.get(sort, ()):
                    violations.append(
                        Violation(
                            "tuple-sort",
                            f"{relation} tuple {row}: {value} is not in the universe of {sort}",
                            relation,
                        )
                    )
                    break
    return violations


def _qc_node_violations(instance: QcInstance) -> List[Violation]:
    violations: List[Violation] = []
    signature = instance.signature
    for node in instance.formula.nodes():
        where = str(node.index)
        if node.kind is NodeKind.CLAUSE:
            violations.append(Violation("clause-in-qc", "Clause leaf in a qc-formula", where))
        elif node.kind is NodeKind.ATOM:
            relation = node.relation or ""
            if relation not in signature.relations:
                violations.append(Violation("unknown-relation", f"Atom uses {relation}", where))
                continue
            word = signature.relations[relation]
            sorts = tuple(v.sort for v in node.arguments)
            if sorts != word:
                violations.append(
                    Violation(
                        "atom-sorts",
                        f"{relation} expects sorts {list(word)}, got {list(sorts)}",
                        where,
                    )
                )
        elif node.is_quantifier and node.variable is not None:
            if node.variable.sort not in signature.sorts:
                violations.append(
                    Violation(
                        "unknown-sort", f"{node.variable.name} has sort {node.variable.sort}", where
                    )
                )
    return violations


def _qcbf_node_violations(formula: QcbfFormula) -> List[Violation]:
    violations: List[Violation] = []
    for node in formula.nodes():
        where = str(node.index)
        if node.kind in (NodeKind.ATOM, NodeKind.TRUE):
            violations.append(
                Violation("not-a-clause", f"{node.kind.value} leaf in a QCBF formula", where)
            )
        elif node.kind is NodeKind.CLAUSE and node.clause is None:
            violations.append(Violation("not-a-clause", "Clause leaf without literals", where))
        elif node.is_quantifier and node.variable is not None:
            if node.variable.sort != BOOLEAN_SORT:
                violations.append(
                    Violation("unknown-sort", f"{node.variable.name} is not propositional", where)
                )
    return violations
