"""
k-judge-consistency.

Decides whether an instance has a refutation of width at most k by running
the propagation algorithm over a table of assignment sets, one per location
and variable set of size at most k, and checks fixpoint tables against the
four constraint-system properties. An independent oracle saturates the
minimal derivable judgements of width at most k and reports a refutation
when one exists.
"""

from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Deque, Dict, FrozenSet, Iterator, List, Optional, Set, Tuple

from src.core.constraints import Constraint, forall_eliminate, join, project
from src.core.judgement_proofs import JudgementProof, Rule, atom_constraint
from src.core.model import NodeKind, QcInstance, Variable
from src.core.semantics import is_true
from src.utils.logger import get_logger

logger = get_logger("consistency")

TableKey = Tuple[int, FrozenSet[Variable]]

RULE_ORDERS = ("forward", "reverse")


class ConsistencyError(Exception):
    """Raised for bad consistency parameters or inputs."""

    def __init__(self, code: str, message: str) -> None:
        super().__init__(message)
        self.code = code


class SaturationLimitExceeded(Exception):
    """Judgement saturation produced more steps than allowed."""

    pass


def _key_label(key: TableKey) -> str:
    index, variables = key
    return f"{index} [{','.join(sorted(v.name for v in variables))}]"


class ConstraintSystemTable:
    """Assignment sets indexed by (location, variable set)."""

    def __init__(self, k: int, entries: Optional[Dict[TableKey, Constraint]] = None) -> None:
        self.k = k
        self._entries: Dict[TableKey, Constraint] = dict(entries or {})

    def __getitem__(self, key: TableKey) -> Constraint:
        return self._entries[key]

    def __setitem__(self, key: TableKey, constraint: Constraint) -> None:
        self._entries[key] = constraint

    def __contains__(self, key: object) -> bool:
        return key in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def keys(self) -> List[TableKey]:
        return sorted(self._entries, key=lambda key: (key[0], sorted(v.name for v in key[1])))

    def items(self) -> Iterator[Tuple[TableKey, Constraint]]:
        for key in self.keys():
            yield key, self._entries[key]

    def get(self, index: int, variables: FrozenSet[Variable]) -> Constraint:
        return self._entries[(index, frozenset(variables))]

    def empty_keys(self) -> List[TableKey]:
        return [key for key, constraint in self.items() if constraint.is_empty]

    @property
    def is_consistent(self) -> bool:
        return not any(c.is_empty for c in self._entries.values())

    def copy(self) -> "ConstraintSystemTable":
        return ConstraintSystemTable(self.k, self._entries)

    def dump_lines(self) -> List[str]:
        """One line per entry: ``i [v1,v2] : {rows}``."""
        return [f"{key[0]} {constraint}" for key, constraint in self.items()]


def table_keys(instance: QcInstance, k: int) -> List[TableKey]:
    """Every (i, V) with V a subset of free(i) of size at most k."""
    formula = instance.formula
    keys = []
    for index in formula.indices:
        free = sorted(formula.free_vars(index))
        for size in range(min(k, len(free)) + 1):
            for subset in combinations(free, size):
                keys.append((index, frozenset(subset)))
    return keys


def iteration_bound(instance: QcInstance, k: int) -> int:
    """Upper bound on the number of changing propagation passes."""
    n = len(instance.formula.variables())
    b = instance.structure.max_universe_size
    return instance.formula.node_count * sum(comb(n, j) * b**j for j in range(k + 1))


def _atom_key(instance: QcInstance, index: int, k: int) -> Optional[TableKey]:
    node = instance.formula.node(index)
    if node.kind is not NodeKind.ATOM:
        return None
    variables = frozenset(node.arguments)
    return (index, variables) if len(variables) <= k else None


def initial_table(instance: QcInstance, k: int) -> ConstraintSystemTable:
    """Atom relations at atom keys, all assignments elsewhere."""
    table = ConstraintSystemTable(k)
    for key in table_keys(instance, k):
        index, variables = key
        if _atom_key(instance, index, k) == key:
            table[key] = atom_constraint(instance, index)
        else:
            table[key] = Constraint.full(variables, instance.universe)
    return table


@dataclass(frozen=True)
class _Task:
    """One narrowing rule instance of the propagation algorithm."""

    kind: str
    index: int
    other: int
    small: FrozenSet[Variable]
    large: FrozenSet[Variable]
    variable: Optional[Variable] = None


def _tasks(instance: QcInstance, k: int, keys: List[TableKey]) -> List[_Task]:
    formula = instance.formula
    by_index: Dict[int, List[FrozenSet[Variable]]] = {}
    for index, variables in keys:
        by_index.setdefault(index, []).append(variables)
    tasks = []
    for index in formula.indices:
        sets = by_index.get(index, [])
        for large in sets:
            for small in sets:
                if small < large:
                    tasks.append(_Task("pi", index, index, small, large))
        node = formula.node(index)
        for child in node.children:
            child_sets = set(by_index.get(child, []))
            for variables in sets:
                if variables in child_sets:
                    tasks.append(_Task("lambda", index, child, variables, variables))
            if node.kind is NodeKind.FORALL and node.variable is not None:
                y = node.variable
                for variables in child_sets:
                    if y in variables:
                        tasks.append(_Task("epsilon", index, child, variables - {y}, variables, y))
    return tasks


def _apply(instance: QcInstance, table: ConstraintSystemTable, task: _Task) -> bool:
    changed = False

    def narrow(key: TableKey, rows: FrozenSet) -> None:
        nonlocal changed
        current = table[key]
        if rows != current.rows:
            table[key] = Constraint(current.variables, rows)
            changed = True

    if task.kind == "pi":
        small_key, large_key = (task.index, task.small), (task.index, task.large)
        narrow(small_key, table[small_key].rows & project(table[large_key], task.small).rows)
        allowed = table[small_key].rows
        narrow(
            large_key,
            frozenset(row for row in table[large_key].rows if row.restrict(task.small) in allowed),
        )
    elif task.kind == "lambda":
        upper, lower = (task.index, task.small), (task.other, task.small)
        rows = table[upper].rows & table[lower].rows
        narrow(upper, rows)
        narrow(lower, rows)
    else:
        assert task.variable is not None
        target = (task.index, task.small)
        eliminated = forall_eliminate(
            table[(task.other, task.large)], task.variable, instance.universe(task.variable.sort)
        )
        narrow(target, table[target].rows & eliminated.rows)
    return changed


@dataclass
class PropagationResult:
    """Fixpoint of the propagation algorithm."""

    consistent: bool
    table: ConstraintSystemTable
    iterations: int
    k: int

    def to_dict(self) -> Dict[str, object]:
        return {
            "consistent": self.consistent,
            "k": self.k,
            "iterations": self.iterations,
            "entries": len(self.table),
            "empty": [_key_label(key) for key in self.table.empty_keys()],
        }


def propagate(instance: QcInstance, k: int, order: str = "forward") -> PropagationResult:
    """
    Run the narrowing rules to their fixpoint.

    Args:
        instance: QCSP instance
        k: Width bound, at least 1
        order: ``forward`` or ``reverse`` rule application order

    Returns:
        PropagationResult; consistent iff no entry is empty at the fixpoint

    Raises:
        ConsistencyError: If k < 1 or the order is unknown
    """
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise ConsistencyError("bad-k", f"k must be an integer of at least 1, got {k!r}")
    if order not in RULE_ORDERS:
        raise ConsistencyError("bad-order", f"Unknown rule order: {order}")
    keys = table_keys(instance, k)
    table = initial_table(instance, k)
    tasks = _tasks(instance, k, keys)
    if order == "reverse":
        tasks.reverse()
    logger.debug(f"Propagating k={k}: {len(keys)} entries, {len(tasks)} rule instances")

    iterations = 0
    while True:
        changed = False
        for task in tasks:
            if _apply(instance, table, task):
                changed = True
        if not changed:
            break
        iterations += 1

    result = PropagationResult(table.is_consistent, table, iterations, k)
    logger.info(
        f"Propagation k={k} reached its fixpoint after {iterations} pass(es): "
        f"{'consistent' if result.consistent else 'inconsistent'}"
    )
    return result


def is_k_judge_consistent(instance: QcInstance, k: int) -> bool:
    """True iff the instance has no refutation of width at most k."""
    return propagate(instance, k).consistent


@dataclass(frozen=True)
class SystemViolation:
    """A constraint-system property that a table fails."""

    property: str
    message: str
    witness: Optional[str] = None

    def to_dict(self) -> Dict[str, Optional[str]]:
        return {"property": self.property, "message": self.message, "witness": self.witness}


def _first_extra(actual: Constraint, allowed: FrozenSet) -> Optional[str]:
    extra = sorted(str(row) for row in actual.rows - allowed)
    return extra[0] if extra else None


def verify_system(
    instance: QcInstance, k: int, table: ConstraintSystemTable
) -> Optional[SystemViolation]:
    """
    Check a table against the keying, non-emptiness, atom, restriction,
    child-agreement and universal-narrowing properties.

    Returns:
        None if the table is a k-constraint system, else the first violation
    """
    formula = instance.formula
    expected = set(table_keys(instance, k))
    actual = set(table.keys())
    if expected != actual:
        wrong = sorted(_key_label(key) for key in expected ^ actual)
        return SystemViolation("keys", "Table keys differ from the (i, V) pairs", wrong[0])
    for key, constraint in table.items():
        if constraint.is_empty:
            return SystemViolation("non-empty", f"Entry {_key_label(key)} is empty")
    for index in formula.indices:
        atom_key = _atom_key(instance, index, k)
        if atom_key is not None:
            witness = _first_extra(table[atom_key], atom_constraint(instance, index).rows)
            if witness is not None:
                return SystemViolation(
                    "alpha", f"Entry {_key_label(atom_key)} leaves the relation", witness
                )
    for task in _tasks(instance, k, sorted(expected, key=lambda key: key[0])):
        if task.kind == "pi":
            small = table[(task.index, task.small)]
            restricted = project(table[(task.index, task.large)], task.small)
            if small.rows != restricted.rows:
                witness = sorted(str(row) for row in small.rows ^ restricted.rows)[0]
                return SystemViolation(
                    "pi",
                    f"Entry {_key_label((task.index, task.small))} is not the restriction of "
                    f"{_key_label((task.index, task.large))}",
                    witness,
                )
        elif task.kind == "lambda":
            upper, lower = table[(task.index, task.small)], table[(task.other, task.small)]
            if upper.rows != lower.rows:
                witness = sorted(str(row) for row in upper.rows ^ lower.rows)[0]
                return SystemViolation(
                    "lambda",
                    f"Entries {_key_label((task.index, task.small))} and "
                    f"{_key_label((task.other, task.small))} differ",
                    witness,
                )
        else:
            assert task.variable is not None
            eliminated = forall_eliminate(
                table[(task.other, task.large)],
                task.variable,
                instance.universe(task.variable.sort),
            )
            witness = _first_extra(table[(task.index, task.small)], eliminated.rows)
            if witness is not None:
                return SystemViolation(
                    "epsilon",
                    f"Entry {_key_label((task.index, task.small))} exceeds the universal "
                    f"elimination of {_key_label((task.other, task.large))}",
                    witness,
                )
    return None


@dataclass
class MinimalJudgements:
    """The minimal derivable constraint per (i, V), with one proof deriving all of them."""

    proof: JudgementProof
    best: Dict[TableKey, int] = field(default_factory=dict)

    def constraint(self, index: int, variables: FrozenSet[Variable]) -> Optional[Constraint]:
        position = self.best.get((index, frozenset(variables)))
        return None if position is None else self.proof[position].judgement.constraint

    def empty_position(self) -> Optional[int]:
        empties = [p for p in self.best.values() if self.proof[p].judgement.is_empty]
        return min(empties) if empties else None


def saturate_minimal_judgements(
    instance: QcInstance, k: int, max_judgements: Optional[int] = None
) -> MinimalJudgements:
    """
    Derive, for every (i, V) with |V| ≤ k, the smallest derivable constraint.

    Derivable constraints at a key are closed under join, so the minimal one
    is their intersection; a candidate that is neither a superset nor a subset
    of the current one is joined with it.

    Raises:
        ConsistencyError: If k < 1
        SaturationLimitExceeded: If more than ``max_judgements`` steps are needed
    """
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise ConsistencyError("bad-k", f"k must be an integer of at least 1, got {k!r}")
    formula = instance.formula
    result = MinimalJudgements(JudgementProof())
    proof, best = result.proof, result.best
    pending: Deque[TableKey] = deque()
    queued: Set[TableKey] = set()

    def record(key: TableKey, position: int) -> None:
        if max_judgements is not None and len(proof) > max_judgements:
            raise SaturationLimitExceeded(f"Saturation exceeded {max_judgements} judgements")
        best[key] = position
        if key not in queued:
            queued.add(key)
            pending.append(key)

    def offer(
        key: TableKey,
        rule: Rule,
        premises: Tuple[int, ...],
        candidate: Constraint,
        variable: Optional[Variable] = None,
    ) -> None:
        current = best.get(key)
        held: Optional[Constraint] = None
        if current is not None:
            held = proof[current].judgement.constraint
            if held.rows <= candidate.rows:
                return
        position = proof.add(rule, premises, key[0], candidate, variable)
        if current is not None and held is not None and not candidate.rows <= held.rows:
            position = proof.add(Rule.JOIN, (current, position), key[0], join(held, candidate))
        record(key, position)

    for index in formula.indices:
        key = _atom_key(instance, index, k)
        if key is not None:
            offer(key, Rule.ATOM, (), atom_constraint(instance, index))

    while pending:
        key = pending.popleft()
        queued.discard(key)
        index, variables = key
        position = best[key]
        constraint = proof[position].judgement.constraint
        node = formula.node(index)

        for size in range(len(variables)):
            for subset in combinations(sorted(variables), size):
                target = frozenset(subset)
                offer((index, target), Rule.PROJECTION, (position,), project(constraint, target))
        for (other_index, other_vars), other in list(best.items()):
            if other_index != index or len(variables | other_vars) > k:
                continue
            joined = join(constraint, proof[other].judgement.constraint)
            offer((index, variables | other_vars), Rule.JOIN, (position, other), joined)
        parent = formula.parent(index)
        if parent is not None:
            if variables <= formula.free_vars(parent):
                offer((parent, variables), Rule.UPWARD_FLOW, (position,), constraint)
            upper = formula.node(parent)
            if upper.kind is NodeKind.FORALL and upper.variable in variables:
                y = upper.variable
                assert y is not None
                eliminated = forall_eliminate(constraint, y, instance.universe(y.sort))
                offer(
                    (parent, variables - {y}), Rule.FORALL_ELIMINATION, (position,), eliminated, y
                )
        for child in node.children:
            if variables <= formula.free_vars(child):
                offer((child, variables), Rule.DOWNWARD_FLOW, (position,), constraint)

    logger.info(
        f"Saturated {len(best)} minimal judgement(s) of width ≤ {k} in {len(proof)} step(s)"
    )
    return result


def bounded_width_refutation_search(
    instance: QcInstance, k: int, max_judgements: Optional[int] = None
) -> Optional[JudgementProof]:
    """
    Look for a refutation of width at most k by judgement saturation.

    Returns:
        The refutation pruned to the steps it needs, or None

    Raises:
        SaturationLimitExceeded: If the saturation budget runs out
    """
    saturated = saturate_minimal_judgements(instance, k, max_judgements)
    position = saturated.empty_position()
    if position is None:
        return None
    return saturated.proof.restricted_to(position)


@dataclass(frozen=True)
class QWidthReport:
    """k-judge-consistency compared with the truth of a prenex sentence."""

    consistent: bool
    oracle_truth: bool
    k: int

    @property
    def agree(self) -> bool:
        return self.consistent == self.oracle_truth

    def to_dict(self) -> Dict[str, object]:
        return {
            "consistent": self.consistent,
            "oracle_truth": self.oracle_truth,
            "agree": self.agree,
            "k": self.k,
        }


def qwidth_consistency_check(instance: QcInstance, k: int) -> QWidthReport:
    """
    Compare k-judge-consistency with the oracle on a prenex sentence whose
    Q-width the caller asserts is at most k.

    Raises:
        ConsistencyError: If the formula is not prenex
    """
    if not instance.formula.is_prenex():
        raise ConsistencyError("not-prenex", "Q-width checks need a prenex formula")
    report = QWidthReport(is_k_judge_consistent(instance, k), is_true(instance), k)
    if not report.agree:
        logger.warning(
            f"k={k} consistency ({report.consistent}) disagrees with "
            f"truth ({report.oracle_truth})"
        )
    return report
