"""
S-expression reader with source positions, and the parse error hierarchy
shared by every qjudge document format.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from src.core.model import Violation

SYMBOL_CHARACTERS = set(
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-:.'"
)


class ParseError(Exception):
    """A document could not be read; carries a 1-based source position when known."""

    def __init__(
        self, message: str, line: Optional[int] = None, column: Optional[int] = None
    ) -> None:
        super().__init__(message)
        self.message = message
        self.line = line
        self.column = column

    def __str__(self) -> str:
        if self.line is None:
            return self.message
        if self.column is None:
            return f"line {self.line}: {self.message}"
        return f"line {self.line}, column {self.column}: {self.message}"


class LexicalError(ParseError):
    """Unexpected character or unbalanced parenthesis."""

    pass


class StructuralError(ParseError):
    """Well-formed tokens in the wrong arrangement."""

    pass


class InstanceValidationError(ParseError):
    """The document parsed, but the object it describes is invalid."""

    def __init__(
        self,
        message: str,
        violations: Sequence[Violation] = (),
        line: Optional[int] = None,
        column: Optional[int] = None,
    ) -> None:
        super().__init__(message, line, column)
        self.violations = list(violations)


@dataclass
class SExpr:
    """A symbol (``text`` set) or a list (``items`` set)."""

    line: int
    column: int
    text: Optional[str] = None
    items: List["SExpr"] = field(default_factory=list)

    @property
    def is_symbol(self) -> bool:
        return self.text is not None

    def head(self) -> Optional[str]:
        """The leading symbol of a list."""
        if self.is_symbol or not self.items or not self.items[0].is_symbol:
            return None
        return self.items[0].text


def parse_sexpr(text: str, first_line: int = 1) -> SExpr:
    """
    Read exactly one S-expression.

    Args:
        text: Source text
        first_line: Line number of the first line of ``text``

    Raises:
        LexicalError: On characters outside symbols and parentheses, or unbalanced input
        StructuralError: If the text holds no expression or more than one
    """
    stack: List[SExpr] = []
    done: List[SExpr] = []
    line, column = first_line, 1
    position = 0
    while position < len(text):
        char = text[position]
        if char == "\n":
            line, column = line + 1, 1
            position += 1
            continue
        if char.isspace():
            position += 1
            column += 1
            continue
        if char == "(":
            stack.append(SExpr(line, column))
        elif char == ")":
            if not stack:
                raise LexicalError("Unbalanced ')'", line, column)
            closed = stack.pop()
            (stack[-1].items if stack else done).append(closed)
        elif char in SYMBOL_CHARACTERS:
            start = position
            while position + 1 < len(text) and text[position + 1] in SYMBOL_CHARACTERS:
                position += 1
            symbol = SExpr(line, column, text[start : position + 1])
            (stack[-1].items if stack else done).append(symbol)
            column += position - start
        else:
            raise LexicalError(f"Unexpected character {char!r}", line, column)
        position += 1
        column += 1
    if stack:
        raise LexicalError("Unclosed '('", stack[-1].line, stack[-1].column)
    if not done:
        raise StructuralError("Expected an expression", first_line, 1)
    if len(done) > 1:
        raise StructuralError("Expected a single expression", done[1].line, done[1].column)
    return done[0]
