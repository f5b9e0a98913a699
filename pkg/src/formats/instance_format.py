"""
Instance documents.

A QCSP document has ``SORTS``, ``RELATIONS``, ``UNIVERSE``, ``TUPLES`` and
``FORMULA`` sections; a QCBF document has only ``FORMULA``. Section headers
sit on their own line and ``#`` starts a comment::

    SORTS
    e u
    RELATIONS
    E : e u
    UNIVERSE
    e = a b c
    u = d e f
    TUPLES
    E : (a,d) (a,e)
    FORMULA
    (exists x:e (forall y:u (atom E x y)))
"""

import hashlib
import re
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple, Union

from src.core.clauses import Clause, ClauseError
from src.core.model import (
    BOOLEAN_SORT,
    And,
    Atom,
    ClauseLeaf,
    Exists,
    Expr,
    Forall,
    QcInstance,
    Signature,
    Structure,
    Target,
    Top,
    Variable,
    build_formula,
    build_qcbf,
    render_expr,
    validate_instance,
)
from src.formats.sexpr import (
    InstanceValidationError,
    ParseError,
    SExpr,
    StructuralError,
    parse_sexpr,
)
from src.utils.logger import get_logger

logger = get_logger("instance_format")

SECTIONS = ("SORTS", "RELATIONS", "UNIVERSE", "TUPLES", "FORMULA")
NAME_PATTERN = re.compile(r"^[A-Za-z_][A-Za-z0-9_'.-]*$")
TUPLE_PATTERN = re.compile(r"\(([^()]*)\)")
TUPLE_LIST_PATTERN = re.compile(r"^(\s*\([^()]*\))*\s*$")

SourceLine = Tuple[int, str]


class _Section:
    def __init__(self, name: str, line: int) -> None:
        self.name = name
        self.line = line
        self.body: List[SourceLine] = []

    def content(self) -> List[SourceLine]:
        return [(number, text.strip()) for number, text in self.body if text.strip()]


def _strip_comment(text: str) -> str:
    return text.split("#", 1)[0].rstrip()


def _sections(text: str) -> Dict[str, _Section]:
    sections: Dict[str, _Section] = {}
    current: Optional[_Section] = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if line.strip() in SECTIONS:
            name = line.strip()
            if name in sections:
                raise StructuralError(f"Section {name} appears twice", number, 1)
            current = _Section(name, number)
            sections[name] = current
        elif line.strip():
            if current is None:
                raise StructuralError("Content before the first section header", number, 1)
            current.body.append((number, line))
    if "FORMULA" not in sections:
        raise StructuralError("Missing FORMULA section")
    return sections


def _split_pair(number: int, text: str, separator: str) -> Tuple[str, str]:
    if separator not in text:
        raise StructuralError(f"Expected '{separator}' in {text!r}", number, 1)
    left, right = text.split(separator, 1)
    name = left.strip()
    if not NAME_PATTERN.match(name):
        raise StructuralError(f"Bad name {name!r}", number, 1)
    return name, right.strip()


def _parse_structure(sections: Dict[str, _Section]) -> Structure:
    sorts: List[str] = []
    for _, text in sections["SORTS"].content() if "SORTS" in sections else []:
        sorts.extend(text.split())

    relations: Dict[str, Tuple[str, ...]] = {}
    for number, text in sections["RELATIONS"].content() if "RELATIONS" in sections else []:
        name, word = _split_pair(number, text, ":")
        if name in relations:
            raise InstanceValidationError(f"Duplicate relation name: {name}", line=number)
        relations[name] = tuple(word.split())

    universes: Dict[str, Tuple[str, ...]] = {}
    for number, text in sections["UNIVERSE"].content() if "UNIVERSE" in sections else []:
        sort, elements = _split_pair(number, text, "=")
        if sort in universes:
            raise InstanceValidationError(f"Universe of {sort} given twice", line=number)
        universes[sort] = tuple(elements.split())

    interpretations: Dict[str, Set[Tuple[str, ...]]] = {}
    for number, text in sections["TUPLES"].content() if "TUPLES" in sections else []:
        name, rest = _split_pair(number, text, ":")
        if not TUPLE_LIST_PATTERN.match(rest):
            raise StructuralError(f"Malformed tuple list for {name}", number, 1)
        rows = interpretations.setdefault(name, set())
        for body in TUPLE_PATTERN.findall(rest):
            values = tuple(v.strip() for v in body.split(",")) if body.strip() else ()
            rows.add(values)

    duplicated = sorted({s for s in sorts if sorts.count(s) > 1})
    if duplicated:
        raise InstanceValidationError(f"Duplicate sort name: {duplicated[0]}")
    signature = Signature(frozenset(sorts), relations)
    return Structure(
        signature, universes, {name: frozenset(rows) for name, rows in interpretations.items()}
    )


def _expect(node: SExpr, count: int, form: str) -> None:
    if len(node.items) != count:
        raise StructuralError(f"Expected {form}", node.line, node.column)


def _binder(node: SExpr, qcbf: bool) -> Variable:
    if not node.is_symbol:
        raise StructuralError("Expected a variable", node.line, node.column)
    text = node.text or ""
    name, _, sort = text.partition(":")
    if not NAME_PATTERN.match(name):
        raise StructuralError(f"Bad variable name {name!r}", node.line, node.column)
    if qcbf:
        if sort and sort != BOOLEAN_SORT:
            raise StructuralError(f"QCBF variables are Boolean, got {sort}", node.line, node.column)
        return Variable(name, BOOLEAN_SORT)
    if not sort:
        raise StructuralError(f"Binder {name} needs a sort", node.line, node.column)
    return Variable(name, sort)


def _formula(node: SExpr, scope: Dict[str, Variable], qcbf: bool) -> Expr:
    head = node.head()
    if head is None:
        raise StructuralError("Expected a formula", node.line, node.column)
    if head in ("exists", "forall"):
        _expect(node, 3, f"({head} variable formula)")
        variable = _binder(node.items[1], qcbf)
        body = _formula(node.items[2], {**scope, variable.name: variable}, qcbf)
        return Exists(variable, body) if head == "exists" else Forall(variable, body)
    if head == "and":
        return And(tuple(_formula(item, scope, qcbf) for item in node.items[1:]))
    if head == "true":
        _expect(node, 1, "(true)")
        return Top()
    if head == "atom":
        if len(node.items) < 2 or not node.items[1].is_symbol:
            raise StructuralError("Expected (atom R v ...)", node.line, node.column)
        arguments = []
        for item in node.items[2:]:
            if not item.is_symbol or item.text not in scope:
                raise StructuralError(f"Unbound variable {item.text}", item.line, item.column)
            arguments.append(scope[item.text or ""])
        return Atom(node.items[1].text or "", tuple(arguments))
    if head == "clause":
        literals = []
        for item in node.items[1:]:
            if not item.is_symbol:
                raise StructuralError("Expected a literal", item.line, item.column)
            literals.append(item.text or "")
        try:
            return ClauseLeaf(Clause.of(*literals))
        except ClauseError as e:
            raise StructuralError(str(e), node.line, node.column) from e
    raise StructuralError(f"Unknown form ({head} ...)", node.line, node.column)


def _formula_section(section: _Section, qcbf: bool) -> Expr:
    if not section.content():
        raise StructuralError("Empty FORMULA section", section.line, 1)
    first = section.body[0][0]
    lines = [""] * (section.body[-1][0] - first + 1)
    for number, text in section.body:
        lines[number - first] = text
    return _formula(parse_sexpr("\n".join(lines), first), {}, qcbf)


def parse_instance(text: str) -> Target:
    """
    Parse an instance document into a QcInstance or a QcbfFormula.

    Raises:
        LexicalError: On bad characters or parentheses in the formula
        StructuralError: On misplaced sections, lines or forms
        InstanceValidationError: If the parsed object violates an invariant
    """
    sections = _sections(text)
    qcbf = set(sections) == {"FORMULA"}
    expr = _formula_section(sections["FORMULA"], qcbf)
    target: Target
    if qcbf:
        target = build_qcbf(expr)
    else:
        target = QcInstance(build_formula(expr), _parse_structure(sections))
    violations = validate_instance(target)
    if violations:
        raise InstanceValidationError(str(violations[0]), violations)
    logger.debug(f"Parsed {'QCBF' if qcbf else 'QCSP'} document: {len(violations)} violation(s)")
    return target


def load_instance(path: Union[str, Path]) -> Target:
    """Read and parse an instance document from disk."""
    file_path = Path(path)
    try:
        text = file_path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"Cannot read {file_path}: {e}") from e
    target = parse_instance(text)
    logger.info(f"Loaded instance from {file_path}")
    return target


def format_instance(target: Target) -> str:
    """Canonical document text; parsing it gives back an equal object."""
    formula = target.formula if isinstance(target, QcInstance) else target
    lines: List[str] = []
    if isinstance(target, QcInstance):
        structure = target.structure
        signature = structure.signature
        lines += ["SORTS", " ".join(sorted(signature.sorts))]
        lines.append("RELATIONS")
        lines += [f"{r} : {' '.join(word)}" for r, word in sorted(signature.relations.items())]
        lines.append("UNIVERSE")
        lines += [f"{s} = {' '.join(structure.universes[s])}" for s in sorted(structure.universes)]
        lines.append("TUPLES")
        for relation in sorted(signature.relations):
            rows = sorted(structure.interpretation(relation))
            rendered = " ".join("(" + ",".join(row) + ")" for row in rows)
            lines.append(f"{relation} : {rendered}".rstrip())
    lines += ["FORMULA", render_expr(formula.to_expr())]
    return "\n".join(lines) + "\n"


def instance_hash(target: Target) -> str:
    """SHA-256 of the canonical document text."""
    return hashlib.sha256(format_instance(target).encode("utf-8")).hexdigest()
