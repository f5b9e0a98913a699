"""
Propositional clauses and resolution.

Clauses are sets of literals holding at most one literal per variable, so a
clause is never tautological. Boolean values are the strings ``"0"`` and ``"1"``
everywhere in qjudge.
"""

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple

TRUE_VALUE = "1"
FALSE_VALUE = "0"


class ClauseError(Exception):
    """Raised for malformed clauses and illegal resolution steps."""

    def __init__(self, code: str, message: str) -> None:
        super().__init__(message)
        self.code = code


@dataclass(frozen=True, order=True)
class Literal:
    """A propositional variable or its negation."""

    variable: str
    positive: bool = True

    @classmethod
    def parse(cls, text: str) -> "Literal":
        """
        Parse ``x`` or ``-x``.

        Raises:
            ClauseError: If the literal has no variable name
        """
        name = text[1:] if text.startswith("-") else text
        if not name or name.startswith("-"):
            raise ClauseError("bad-literal", f"Malformed literal: {text!r}")
        return cls(name, not text.startswith("-"))

    def negated(self) -> "Literal":
        return Literal(self.variable, not self.positive)

    def satisfied_by(self, value: str) -> bool:
        return value == (TRUE_VALUE if self.positive else FALSE_VALUE)

    def __str__(self) -> str:
        return self.variable if self.positive else f"-{self.variable}"


@dataclass(frozen=True)
class Clause:
    """A disjunction of literals; the empty clause is false."""

    literals: FrozenSet[Literal] = frozenset()

    def __post_init__(self) -> None:
        names = [lit.variable for lit in self.literals]
        if len(set(names)) != len(names):
            raise ClauseError(
                "tautological", f"Clause mentions a variable twice: {self._render(self.literals)}"
            )

    @classmethod
    def of(cls, *literals: str) -> "Clause":
        """Build a clause from literal strings such as ``"x"`` and ``"-y"``."""
        return cls(frozenset(Literal.parse(text) for text in literals))

    @property
    def variables(self) -> FrozenSet[str]:
        return frozenset(lit.variable for lit in self.literals)

    @property
    def width(self) -> int:
        return len(self.literals)

    @property
    def is_empty(self) -> bool:
        return not self.literals

    def literal_for(self, variable: str) -> Optional[Literal]:
        for lit in self.literals:
            if lit.variable == variable:
                return lit
        return None

    def without_variable(self, variable: str) -> "Clause":
        """Return the clause with any literal on ``variable`` dropped."""
        return Clause(frozenset(lit for lit in self.literals if lit.variable != variable))

    def falsifier(self) -> Dict[str, str]:
        """Return the unique assignment on the clause's variables that falsifies it."""
        return {
            lit.variable: FALSE_VALUE if lit.positive else TRUE_VALUE for lit in self.literals
        }

    def is_falsified_by(self, assignment: Mapping[str, str]) -> bool:
        """True iff every literal is assigned and false under ``assignment``."""
        for lit in self.literals:
            value = assignment.get(lit.variable)
            if value is None or lit.satisfied_by(value):
                return False
        return True

    def is_satisfied_by(self, assignment: Mapping[str, str]) -> bool:
        return any(lit.satisfied_by(assignment[lit.variable]) for lit in self.literals)

    def satisfying_tuples(self, order: Iterable[str]) -> FrozenSet[Tuple[str, ...]]:
        """
        Enumerate the satisfying assignments as tuples in the given variable order.

        Args:
            order: Variable names; must be exactly the clause's variables

        Returns:
            Every tuple over {0,1} except the falsifier
        """
        names = list(order)
        falsifier = self.falsifier()
        bad = tuple(falsifier[name] for name in names)
        rows: List[Tuple[str, ...]] = [()]
        for _ in names:
            rows = [row + (value,) for row in rows for value in (FALSE_VALUE, TRUE_VALUE)]
        return frozenset(row for row in rows if row != bad)

    def sorted_literals(self) -> List[Literal]:
        return sorted(self.literals)

    @staticmethod
    def _render(literals: Iterable[Literal]) -> str:
        return "(" + " ".join(str(lit) for lit in sorted(literals)) + ")"

    def __str__(self) -> str:
        return self._render(self.literals)


def complementary_pivots(a: Clause, b: Clause) -> List[str]:
    """Variables occurring positively in one clause and negatively in the other."""
    pivots = []
    for lit in a.literals:
        other = b.literal_for(lit.variable)
        if other is not None and other.positive != lit.positive:
            pivots.append(lit.variable)
    return sorted(pivots)


def resolvent(a: Clause, b: Clause, pivot: str) -> Clause:
    """
    Resolve two clauses on ``pivot``.

    Args:
        a: First clause
        b: Second clause
        pivot: Variable occurring with opposite signs in ``a`` and ``b``

    Returns:
        ``(a minus pivot) union (b minus pivot)``

    Raises:
        ClauseError: If the pivot is not complementary or the result is tautological
    """
    left = a.literal_for(pivot)
    right = b.literal_for(pivot)
    if left is None or right is None or left.positive == right.positive:
        raise ClauseError(
            "pivot-not-complementary", f"{pivot} is not complementary between {a} and {b}"
        )
    merged = (a.literals - {left}) | (b.literals - {right})
    try:
        return Clause(frozenset(merged))
    except ClauseError as e:
        raise ClauseError(
            "tautological-resolvent", f"Resolvent of {a} and {b} on {pivot} is tautological"
        ) from e
