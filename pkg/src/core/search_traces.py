"""
Located variables, the Detect-Falsity search and its traces.

A located variable pairs a quantifier location with the variable it binds. The
search refutes a QCBF formula by growing a coherent set of located variables
with an assignment, branching on variables (Q-branch), fixing universal
variables (forall-branch), and closing branches at falsified clauses. Its
recursion trees (traces) correspond node for node to the non-flow judgements
of tree-like clause proofs; both directions are compiled here.
"""

import random
from collections import deque
from dataclasses import dataclass, field
from itertools import product
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Set, Tuple

from src.core.clause_proofs import ClauseProof, ClauseRule, check_clause_proof
from src.core.clauses import Clause, complementary_pivots, resolvent
from src.core.model import NodeKind, QcbfFormula
from src.utils.logger import get_logger

logger = get_logger("search_traces")


class TraceError(Exception):
    """A trace or a proof handed to the trace compilers is malformed."""

    def __init__(self, code: str, message: str) -> None:
        super().__init__(message)
        self.code = code
        self.message = message


class SearchLimitExceeded(Exception):
    """The search used up its step budget before reaching a verdict."""

    pass


@dataclass(frozen=True, order=True)
class LocatedVariable:
    """A variable together with the quantifier location binding it."""

    location: int
    variable: str
    universal: bool = False

    def __str__(self) -> str:
        quantifier = "forall" if self.universal else "exists"
        return f"({self.location},{self.variable},{quantifier})"


@dataclass
class TraceNode:
    """A search state (S, a); leaves name the clause they falsify."""

    located: FrozenSet[LocatedVariable]
    assignment: Dict[str, str]
    children: List["TraceNode"] = field(default_factory=list)
    clause_index: Optional[int] = None

    @property
    def variables(self) -> FrozenSet[str]:
        return frozenset(lv.variable for lv in self.located)


@dataclass
class Trace:
    """A rooted search tree."""

    root: TraceNode

    def nodes(self) -> Iterator[TraceNode]:
        """Pre-order walk; shared subtrees are visited once per occurrence."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    @property
    def node_count(self) -> int:
        return sum(1 for _ in self.nodes())

    @property
    def depth(self) -> int:
        best = 0
        stack = [(self.root, 0)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            stack.extend((child, d + 1) for child in node.children)
        return best


@dataclass
class CompileCost:
    """Elementary operations spent compiling between traces and clause proofs."""

    operations: int = 0

    def tick(self, amount: int = 1) -> None:
        self.operations += amount


def located_variables(formula: QcbfFormula) -> List[LocatedVariable]:
    """Every located variable of the formula, by location."""
    result = []
    for node in formula.nodes():
        if node.is_quantifier and node.variable is not None:
            result.append(
                LocatedVariable(node.index, node.variable.name, node.kind is NodeKind.FORALL)
            )
    return result


def follows(formula: QcbfFormula, j: int, lv: LocatedVariable) -> bool:
    """
    True iff ``lv.location`` is a strict ancestor of ``j`` and the variable is free
    at every location below it down to ``j``.
    """
    if j == lv.location or j not in formula:
        return False
    path = formula.path_to_root(j)
    if lv.location not in path:
        return False
    return all(lv.variable in formula.free_names(k) for k in path[: path.index(lv.location)])


def follows_all(formula: QcbfFormula, j: int, located: Iterable[LocatedVariable]) -> bool:
    return all(follows(formula, j, lv) for lv in located)


def coherent(formula: QcbfFormula, located: Iterable[LocatedVariable]) -> bool:
    """True iff any two located variables follow one another in some direction."""
    items = list(located)
    for pos, first in enumerate(items):
        for second in items[pos + 1 :]:
            if not (
                follows(formula, second.location, first)
                or follows(formula, first.location, second)
            ):
                return False
    return True


def lowest_location(formula: QcbfFormula, located: Iterable[LocatedVariable]) -> int:
    """Deepest location of a coherent set."""
    return max((lv.location for lv in located), key=formula.depth)


State = Tuple[FrozenSet[LocatedVariable], Tuple[Tuple[str, str], ...]]
Move = Tuple
Edge = Tuple[Move, Tuple[State, ...]]


def _state(located: FrozenSet[LocatedVariable], values: Dict[str, str]) -> State:
    return located, tuple(sorted(values.items()))


class _FalsitySearch:
    """
    Refutability as a least fixpoint over the (S, a) states reachable from (∅, e).

    States form an AND/OR graph: a state is refuted when one of its moves has
    every target refuted. Falsify moves have no targets, forall-branches one and
    Q-branches two.
    """

    def __init__(
        self, formula: QcbfFormula, rng: Optional[random.Random], max_steps: Optional[int]
    ) -> None:
        self.formula = formula
        self.rng = rng
        self.max_steps = max_steps
        self.steps = 0
        self.located = sorted(
            located_variables(formula), key=lambda lv: (formula.depth(lv.location), lv.location)
        )
        self.clauses: List[Tuple[int, Clause]] = []
        for index in formula.clause_indices():
            clause = formula.node(index).clause
            assert clause is not None
            self.clauses.append((index, clause))
        self._follows: Dict[Tuple[int, LocatedVariable], bool] = {}
        self.edges: Dict[State, List[Edge]] = {}

    def follows(self, j: int, lv: LocatedVariable) -> bool:
        key = (j, lv)
        if key not in self._follows:
            self._follows[key] = follows(self.formula, j, lv)
        return self._follows[key]

    def follows_all(self, j: int, located: Iterable[LocatedVariable]) -> bool:
        return all(self.follows(j, lv) for lv in located)

    def moves(
        self, located: FrozenSet[LocatedVariable], values: Dict[str, str]
    ) -> Iterator[Move]:
        names = frozenset(lv.variable for lv in located)
        for index, clause in self.clauses:
            if (
                clause.variables == names
                and clause.is_falsified_by(values)
                and self.follows_all(index, located)
            ):
                yield ("falsify", index)
        for lv in self.located:
            if lv.universal and self.follows_all(lv.location, located):
                for value in ("0", "1"):
                    yield ("forall", lv, value)
        ordered = sorted(located)
        for lv in self.located:
            if lv in located:
                continue
            if not all(
                self.follows(lv.location, s) or self.follows(s.location, lv) for s in located
            ):
                continue
            # 0: in both halves, 1: only in S0, 2: only in S1
            for choice in product((0, 1, 2), repeat=len(ordered)):
                first = frozenset(s for s, c in zip(ordered, choice) if c != 2)
                second = frozenset(s for s, c in zip(ordered, choice) if c != 1)
                yield ("q", lv, first, second)

    def successors(self, state: State) -> List[Edge]:
        located, pairs = state
        values = dict(pairs)
        edges: List[Edge] = []
        for move in self.moves(located, values):
            if move[0] == "falsify":
                edges.append((move, ()))
            elif move[0] == "forall":
                _, lv, value = move
                edges.append((move, (_state(located | {lv}, {**values, lv.variable: value}),)))
            else:
                _, lv, first, second = move
                halves = []
                for half, value in ((first, "0"), (second, "1")):
                    names = {s.variable for s in half}
                    restricted = {k: v for k, v in values.items() if k in names}
                    restricted[lv.variable] = value
                    halves.append(_state(half | {lv}, restricted))
                edges.append((move, tuple(halves)))
        if self.rng is not None:
            self.rng.shuffle(edges)
        return edges

    def explore(self, root: State) -> None:
        """Breadth-first expansion of every state reachable from ``root``."""
        queue = deque([root])
        seen = {root}
        while queue:
            state = queue.popleft()
            self.steps += 1
            if self.max_steps is not None and self.steps > self.max_steps:
                raise SearchLimitExceeded(f"Search exceeded {self.max_steps} steps")
            edges = self.successors(state)
            self.edges[state] = edges
            for _, targets in edges:
                for target in targets:
                    if target not in seen:
                        seen.add(target)
                        queue.append(target)

    def solve(self) -> Dict[State, Edge]:
        """
        Mark refuted states round by round.

        A state is marked in round r through its first move whose targets were
        all marked before round r, so following the recorded moves always
        descends to earlier rounds and the extracted trace is as shallow as
        possible.
        """
        chosen: Dict[State, Edge] = {}
        changed = True
        while changed:
            settled = set(chosen)
            changed = False
            for state, edges in self.edges.items():
                if state in settled:
                    continue
                for edge in edges:
                    if all(target in settled for target in edge[1]):
                        chosen[state] = edge
                        changed = True
                        break
        return chosen

    def build(
        self, state: State, chosen: Dict[State, Edge], built: Dict[State, TraceNode]
    ) -> TraceNode:
        if state in built:
            return built[state]
        located, pairs = state
        move, targets = chosen[state]
        children = [self.build(target, chosen, built) for target in targets]
        clause_index = move[1] if move[0] == "falsify" else None
        node = TraceNode(located, dict(pairs), children, clause_index)
        built[state] = node
        return node


def detect_falsity(
    formula: QcbfFormula,
    policy: str = "default",
    seed: Optional[int] = None,
    max_steps: Optional[int] = None,
) -> Optional[Trace]:
    """
    Search for a refuting trace with root label (∅, e).

    Every state reachable from the root is expanded once, so the search
    terminates on every formula and finds a trace exactly when one exists.

    Args:
        formula: QCBF formula
        policy: ``default`` (falsify, then forall-branch on the shallowest
            variable, then Q-branch) or ``random`` (shuffled choices)
        seed: Seed for the ``random`` policy
        max_steps: Budget of search states expanded

    Returns:
        A valid trace of minimal depth, or None if no refuting trace exists

    Raises:
        SearchLimitExceeded: If the budget runs out
    """
    rng = random.Random(seed) if policy == "random" else None
    search = _FalsitySearch(formula, rng, max_steps)
    root = _state(frozenset(), {})
    search.explore(root)
    chosen = search.solve()
    logger.info(
        f"Detect-Falsity expanded {search.steps} state(s), {len(chosen)} refuted: "
        f"refuted root={root in chosen}"
    )
    if root not in chosen:
        return None
    return Trace(search.build(root, chosen, {}))


def validate_trace(formula: QcbfFormula, trace: Trace) -> bool:
    """
    Check that every node of a trace is generated by the search rules.

    Raises:
        TraceError: Naming the first violated condition
    """
    valid_located = set(located_variables(formula))
    for node in trace.nodes():
        _check_label(formula, node, valid_located)
        if not node.children:
            _check_leaf(formula, node)
            continue
        if node.clause_index is not None:
            raise TraceError("unexpected-clause", "Only leaves name a falsified clause")
        if len(node.children) == 1:
            _check_forall_branch(formula, node, node.children[0])
        elif len(node.children) == 2:
            _check_q_branch(formula, node, node.children[0], node.children[1])
        else:
            raise TraceError("branching", f"Node has {len(node.children)} children")
    return True


def _label(node: TraceNode) -> str:
    located = ",".join(str(lv) for lv in sorted(node.located))
    values = ",".join(f"{k}={v}" for k, v in sorted(node.assignment.items()))
    return f"S=[{located}] a={{{values}}}"


def _check_label(
    formula: QcbfFormula, node: TraceNode, valid_located: Set[LocatedVariable]
) -> None:
    for lv in node.located:
        if lv not in valid_located:
            raise TraceError("bad-located-variable", f"{lv} is not a located variable")
    if not coherent(formula, node.located):
        raise TraceError("incoherent", f"Located variables are not coherent: {_label(node)}")
    if set(node.assignment) != set(node.variables):
        raise TraceError("assignment-domain", f"Assignment does not match S: {_label(node)}")
    if any(value not in ("0", "1") for value in node.assignment.values()):
        raise TraceError("assignment-value", f"Assignment is not Boolean: {_label(node)}")


def _check_leaf(formula: QcbfFormula, node: TraceNode) -> None:
    index = node.clause_index
    if index is None:
        raise TraceError("missing-clause", f"Leaf names no clause: {_label(node)}")
    if index not in formula or formula.node(index).kind is not NodeKind.CLAUSE:
        raise TraceError("not-a-clause", f"Index {index} is not a clause leaf")
    clause = formula.node(index).clause
    assert clause is not None
    if not follows_all(formula, index, node.located):
        raise TraceError(
            "leaf-does-not-follow", f"Index {index} does not follow {_label(node)}"
        )
    if clause.variables != node.variables:
        raise TraceError("vars-mismatch", f"Clause {clause} does not match {_label(node)}")
    if not clause.is_falsified_by(node.assignment):
        raise TraceError("not-falsified", f"Clause {clause} is not falsified by {_label(node)}")


def _check_forall_branch(formula: QcbfFormula, node: TraceNode, child: TraceNode) -> None:
    added = child.located - node.located
    if not node.located <= child.located or len(added) != 1:
        raise TraceError("not-forall-branch", f"Child does not extend {_label(node)} by one")
    (lv,) = added
    if not lv.universal or not follows_all(formula, lv.location, node.located):
        raise TraceError("not-forall-branch", f"{lv} is not a universal variable following S")
    expected = dict(node.assignment)
    expected[lv.variable] = child.assignment.get(lv.variable, "")
    if child.assignment != expected:
        raise TraceError("not-forall-branch", f"Child assignment does not extend {_label(node)}")


def _check_q_branch(
    formula: QcbfFormula, node: TraceNode, first: TraceNode, second: TraceNode
) -> None:
    added = (first.located - node.located) | (second.located - node.located)
    if len(added) != 1:
        raise TraceError(
            "not-q-branch", f"Children do not branch on one variable: {_label(node)}"
        )
    (lv,) = added
    if lv not in first.located or lv not in second.located:
        raise TraceError("not-q-branch", f"Both children must contain {lv}")
    if not coherent(formula, node.located | {lv}):
        raise TraceError("not-q-branch", f"{lv} is not coherent with {_label(node)}")
    halves = [child.located - {lv} for child in (first, second)]
    if halves[0] | halves[1] != node.located:
        raise TraceError("q-branch-cover", f"Children do not cover S of {_label(node)}")
    seen_values = set()
    for child, half in zip((first, second), halves):
        names = {s.variable for s in half}
        expected = {k: v for k, v in node.assignment.items() if k in names}
        value = child.assignment.get(lv.variable)
        expected[lv.variable] = value or ""
        if child.assignment != expected:
            raise TraceError("q-branch-assignment", "Child assignment is not a restriction")
        seen_values.add(value)
    if seen_values != {"0", "1"}:
        raise TraceError("q-branch-assignment", f"Children must set {lv.variable} to 0 and 1")


def trace_to_proof(
    formula: QcbfFormula, trace: Trace, cost: Optional[CompileCost] = None
) -> ClauseProof:
    """
    Compile a refuting trace into a tree-like clause proof of an empty clause.

    Leaves become clause steps, forall-branches an upward-flow chain plus a
    universal removal, and Q-branches flows to a common location plus a
    resolve step, so the proof has one non-flow judgement per trace node.
    Each node costs a bounded number of walks along root paths, so compiling
    takes O(nodes * indices) operations, counted into ``cost`` when given.

    Raises:
        TraceError: If the trace is invalid or its root label is not (∅, e)
    """
    validate_trace(formula, trace)
    if trace.root.located or trace.root.assignment:
        raise TraceError("root-not-empty", "Refuting traces start from (∅, e)")
    proof = ClauseProof()
    cost = cost if cost is not None else CompileCost()

    def location_of(position: int) -> int:
        return proof[position].judgement.location

    def flow_up(position: int, target: int) -> int:
        clause = proof[position].judgement.clause
        path = formula.path_to_root(location_of(position))
        cost.tick(len(path))
        for location in path[1 : path.index(target) + 1]:
            position = proof.add(ClauseRule.UPWARD_FLOW, (position,), location, clause)
        return position

    def flow_down(position: int, target: int) -> int:
        clause = proof[position].judgement.clause
        path = formula.path_to_root(target)
        cost.tick(len(path))
        for location in reversed(path[: path.index(location_of(position))]):
            position = proof.add(ClauseRule.DOWNWARD_FLOW, (position,), location, clause)
        return position

    def child_of_lowest(located: FrozenSet[LocatedVariable]) -> int:
        cost.tick(len(located))
        return formula.node(lowest_location(formula, located)).child

    def build(node: TraceNode) -> int:
        cost.tick()
        if not node.children:
            assert node.clause_index is not None
            clause = formula.node(node.clause_index).clause
            assert clause is not None
            return proof.add(ClauseRule.CLAUSE, (), node.clause_index, clause)
        if len(node.children) == 1:
            (child,) = node.children
            (lv,) = child.located - node.located
            position = flow_up(build(child), formula.node(lv.location).child)
            clause = proof[position].judgement.clause.without_variable(lv.variable)
            return proof.add(ClauseRule.FORALL_REMOVAL, (position,), lv.location, clause)
        first, second = node.children
        (lv,) = (first.located | second.located) - node.located
        meeting = child_of_lowest(node.located | {lv})
        positions = []
        for child in (first, second):
            position = flow_up(build(child), child_of_lowest(child.located))
            positions.append(flow_down(position, meeting))
        left, right = (proof[p].judgement.clause for p in positions)
        clause = resolvent(left, right, lv.variable)
        return proof.add(ClauseRule.RESOLVE, tuple(positions), meeting, clause, lv.variable)

    build(trace.root)
    logger.info(f"Compiled trace of {trace.node_count} node(s) into {len(proof)} clause step(s)")
    return proof


def proof_to_trace(
    formula: QcbfFormula, proof: ClauseProof, cost: Optional[CompileCost] = None
) -> Trace:
    """
    Compile a tree-like clause proof ending in an empty clause into a trace.

    Every clause judgement (i, α) maps to a node whose located variables are
    the first binders above i of the variables of α and whose assignment is
    the falsifier of α. Flow steps add no node, and neither do universal
    removals whose variable is absent from their premise clause, so the trace
    has as many nodes as the proof has non-flow steps only when every removal
    drops a literal. Proofs compiled from traces always satisfy this.

    Each step looks up the binder of each of its variables along one root
    path, so compiling takes O(steps * indices^2) operations, counted into
    ``cost`` when given.

    Raises:
        TraceError: If the proof is invalid, not tree-like, or its last clause is not empty
    """
    report = check_clause_proof(formula, proof)
    if not report.valid:
        first = report.violations[0]
        raise TraceError("invalid-proof", f"Clause proof is invalid: {first.message}")
    if not report.tree_like:
        raise TraceError("not-tree-like", "Proof reuses a step; unfold it first")
    if not proof.steps or not proof.steps[-1].judgement.is_empty:
        raise TraceError("not-empty", "Proof must end in an empty clause")
    cost = cost if cost is not None else CompileCost()

    def located_for(location: int, clause: Clause) -> FrozenSet[LocatedVariable]:
        cost.tick(len(clause.variables) * (formula.depth(location) + 1))
        located = set()
        for name in clause.variables:
            binder = formula.binder_above(location, name)
            assert binder is not None
            located.add(
                LocatedVariable(binder, name, formula.node(binder).kind is NodeKind.FORALL)
            )
        return frozenset(located)

    def build(position: int) -> TraceNode:
        cost.tick()
        step = proof[position]
        location = step.judgement.location
        clause = step.judgement.clause
        if step.rule is ClauseRule.CLAUSE:
            return TraceNode(located_for(location, clause), clause.falsifier(), [], location)
        if step.rule in (ClauseRule.UPWARD_FLOW, ClauseRule.DOWNWARD_FLOW):
            return build(step.premises[0])
        children = [build(p) for p in step.premises]
        located = located_for(location, clause)
        if step.rule is ClauseRule.FORALL_REMOVAL:
            premise = proof[step.premises[0]].judgement.clause
            if premise.variables == clause.variables:
                return children[0]
            return TraceNode(located, clause.falsifier(), children)
        premises = [proof[p].judgement.clause for p in step.premises]
        pivot = step.pivot or complementary_pivots(premises[0], premises[1])[0]
        union = children[0].located | children[1].located
        if union - located_for(location, Clause.of(pivot)) != located:
            raise TraceError(
                "located-mismatch", f"Premises of step {position + 1} bind variables apart"
            )
        return TraceNode(located, clause.falsifier(), children)

    trace = Trace(build(len(proof) - 1))
    logger.info(
        f"Compiled clause proof of {len(proof)} step(s) into a trace "
        f"of {trace.node_count} node(s)"
    )
    return trace
