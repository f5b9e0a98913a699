"""
Relational algebra of the judgement proof system.

A constraint is a variable set together with a set of assignments defined
exactly on it. Assignments are stored canonically (sorted variable/value pairs)
so that equality of constraints is structural.
"""

from dataclasses import dataclass
from itertools import product
from typing import Callable, Dict, FrozenSet, Iterable, Iterator, List, Mapping, Sequence, Set
from typing import Tuple

from src.core.model import Variable


class ConstraintError(Exception):
    """Raised for ill-formed constraints and illegal algebra operations."""

    pass


@dataclass(frozen=True)
class Assignment:
    """A finite map from variables to element names."""

    pairs: Tuple[Tuple[Variable, str], ...] = ()

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.pairs))
        if ordered != self.pairs:
            object.__setattr__(self, "pairs", ordered)
        if len({v for v, _ in ordered}) != len(ordered):
            raise ConstraintError(f"Assignment binds a variable twice: {self}")

    @classmethod
    def of(cls, mapping: Mapping[Variable, str]) -> "Assignment":
        return cls(tuple(mapping.items()))

    @property
    def domain(self) -> FrozenSet[Variable]:
        return frozenset(v for v, _ in self.pairs)

    def as_dict(self) -> Dict[Variable, str]:
        return dict(self.pairs)

    def by_name(self) -> Dict[str, str]:
        return {v.name: value for v, value in self.pairs}

    def __getitem__(self, variable: Variable) -> str:
        for v, value in self.pairs:
            if v == variable:
                return value
        raise KeyError(variable)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[Variable]:
        return iter(v for v, _ in self.pairs)

    def restrict(self, variables: Iterable[Variable]) -> "Assignment":
        keep = set(variables)
        return Assignment(tuple(p for p in self.pairs if p[0] in keep))

    def extend(self, variable: Variable, value: str) -> "Assignment":
        return Assignment(tuple(p for p in self.pairs if p[0] != variable) + ((variable, value),))

    def merge(self, other: "Assignment") -> "Assignment":
        merged = dict(self.pairs)
        merged.update(other.pairs)
        return Assignment.of(merged)

    def __str__(self) -> str:
        return "{" + ",".join(f"{v.name}={value}" for v, value in self.pairs) + "}"


EMPTY_ASSIGNMENT = Assignment()


@dataclass(frozen=True)
class Constraint:
    """
    A pair (V, F): variables V and a set F of assignments with domain exactly V.

    The empty-domain constraints (∅, ∅) and (∅, {e}) are distinct; the latter is
    the unit of join.
    """

    variables: FrozenSet[Variable]
    rows: FrozenSet[Assignment]

    def __post_init__(self) -> None:
        for row in self.rows:
            if row.domain != self.variables:
                raise ConstraintError(
                    f"Row {row} is not defined exactly on {sorted(v.name for v in self.variables)}"
                )

    @classmethod
    def unit(cls) -> "Constraint":
        return cls(frozenset(), frozenset({EMPTY_ASSIGNMENT}))

    @classmethod
    def full(
        cls, variables: Iterable[Variable], universe: Callable[[str], Sequence[str]]
    ) -> "Constraint":
        """All assignments of the given variables over their sorts' universes."""
        ordered = sorted(set(variables))
        domains = [universe(v.sort) for v in ordered]
        rows = frozenset(
            Assignment(tuple(zip(ordered, values))) for values in product(*domains)
        )
        return cls(frozenset(ordered), rows)

    @property
    def width(self) -> int:
        return len(self.variables)

    @property
    def is_empty(self) -> bool:
        return not self.rows

    def sorted_variables(self) -> List[Variable]:
        return sorted(self.variables)

    def sorted_rows(self) -> List[Tuple[str, ...]]:
        """Rows as value tuples in sorted-variable order."""
        return sorted(tuple(value for _, value in row.pairs) for row in self.rows)

    def __str__(self) -> str:
        names = ",".join(v.name for v in self.sorted_variables())
        rows = ",".join("(" + ",".join(values) + ")" for values in self.sorted_rows())
        return f"[{names}] : {{{rows}}}"


def project(c: Constraint, variables: Iterable[Variable]) -> Constraint:
    """
    Restrict every row of ``c`` to ``variables``.

    Raises:
        ConstraintError: If ``variables`` is not a subset of ``c.variables``
    """
    target = frozenset(variables)
    if not target <= c.variables:
        extra = sorted(v.name for v in target - c.variables)
        raise ConstraintError(f"Cannot project onto variables outside the constraint: {extra}")
    return Constraint(target, frozenset(row.restrict(target) for row in c.rows))


def _check_sorts(left: Iterable[Variable], right: Iterable[Variable]) -> None:
    sorts = {v.name: v.sort for v in left}
    for v in right:
        if v.name in sorts and sorts[v.name] != v.sort:
            raise ConstraintError(
                f"Variable {v.name} has sort {sorts[v.name]} and {v.sort} in a join"
            )


def join(c1: Constraint, c2: Constraint) -> Constraint:
    """
    Join two constraints on their shared variables.

    Raises:
        ConstraintError: If a shared variable name carries two sorts
    """
    _check_sorts(c1.variables, c2.variables)
    shared = c1.variables & c2.variables
    index: Dict[Assignment, List[Assignment]] = {}
    for row in c2.rows:
        index.setdefault(row.restrict(shared), []).append(row)
    rows: Set[Assignment] = set()
    for row in c1.rows:
        for match in index.get(row.restrict(shared), ()):
            rows.add(row.merge(match))
    return Constraint(c1.variables | c2.variables, frozenset(rows))


def forall_eliminate(c: Constraint, y: Variable, universe: Sequence[str]) -> Constraint:
    """
    Universal elimination: keep the restrictions whose every y-extension is a row.

    Args:
        c: Constraint containing ``y``
        y: Variable to eliminate
        universe: Elements of the sort of ``y``

    Raises:
        ConstraintError: If ``y`` is not a variable of ``c``
    """
    if y not in c.variables:
        raise ConstraintError(f"Cannot eliminate {y.name}: not a variable of the constraint")
    rest = c.variables - {y}
    seen: Dict[Assignment, Set[str]] = {}
    for row in c.rows:
        seen.setdefault(row.restrict(rest), set()).add(row[y])
    required = set(universe)
    return Constraint(rest, frozenset(f for f, values in seen.items() if required <= values))
