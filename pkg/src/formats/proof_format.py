"""
Proof documents.

Two header lines name the proof system and the SHA-256 of the canonical
instance text; every further line is one step, numbered densely from 1::

    system: qcsp
    instance: 3f1c...
    1: atom [] - @4 vars=[x,y] rows={(a,d),(a,e)}
    2: projection [1] - @4 vars=[x] rows={(a)}
    3: forall-elimination [1] y @2 vars=[x] rows={(a)}

Clause proofs replace ``vars=… rows=…`` with ``clause=(x -y)`` and use the
parameter slot for the resolution pivot.
"""

import re
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple, Type, TypeVar, Union

from src.core.clause_proofs import ClauseProof, ClauseRule
from src.core.clauses import Clause, ClauseError
from src.core.constraints import Assignment, Constraint, ConstraintError
from src.core.judgement_proofs import JudgementProof, Rule
from src.core.model import QcInstance, Target, Variable, formula_of
from src.formats.instance_format import instance_hash
from src.formats.sexpr import StructuralError
from src.utils.logger import get_logger

logger = get_logger("proof_format")

QCSP_SYSTEM = "qcsp"
QCBF_SYSTEM = "qcbf"

STEP_PATTERN = re.compile(
    r"^(?P<number>\d+):\s+(?P<rule>[a-z-]+)\s+\[(?P<premises>[\d,\s]*)\]\s+"
    r"(?P<param>\S+)\s+@(?P<index>\d+)\s+(?P<body>.*)$"
)
JUDGEMENT_BODY = re.compile(r"^vars=\[(?P<vars>[^\]]*)\]\s+rows=\{(?P<rows>.*)\}$")
CLAUSE_BODY = re.compile(r"^clause=\((?P<literals>[^()]*)\)$")
ROW_PATTERN = re.compile(r"\(([^()]*)\)")
HEADER_PATTERN = re.compile(r"^(?P<key>system|instance):\s*(?P<value>\S+)$")

AnyProof = Union[JudgementProof, ClauseProof]
E = TypeVar("E", bound=Enum)


@dataclass
class ProofDocument:
    """A parsed proof together with its header."""

    system: str
    instance_hash: str
    proof: AnyProof

    def matches(self, target: Target) -> bool:
        """True iff the header hash is the hash of ``target``."""
        return self.instance_hash == instance_hash(target)


def system_of(target: Target) -> str:
    return QCSP_SYSTEM if isinstance(target, QcInstance) else QCBF_SYSTEM


def _premises(step_premises: Tuple[int, ...]) -> str:
    return "[" + ",".join(str(p + 1) for p in step_premises) + "]"


def format_proof(proof: AnyProof, target: Target) -> str:
    """Render a proof with a header binding it to ``target``."""
    lines = [f"system: {system_of(target)}", f"instance: {instance_hash(target)}"]
    if isinstance(proof, JudgementProof):
        for number, step in enumerate(proof, start=1):
            param = step.variable.name if step.variable is not None else "-"
            constraint = step.judgement.constraint
            names = ",".join(v.name for v in constraint.sorted_variables())
            rows = ",".join("(" + ",".join(row) + ")" for row in constraint.sorted_rows())
            lines.append(
                f"{number}: {step.rule.value} {_premises(step.premises)} {param} "
                f"@{step.judgement.location} vars=[{names}] rows={{{rows}}}"
            )
    else:
        for number, clause_step in enumerate(proof, start=1):
            pivot = clause_step.pivot or "-"
            lines.append(
                f"{number}: {clause_step.rule.value} {_premises(clause_step.premises)} {pivot} "
                f"@{clause_step.judgement.location} clause={clause_step.judgement.clause}"
            )
    return "\n".join(lines) + "\n"


def _lookup(target: Target, location: int, name: str, number: int) -> Variable:
    formula = formula_of(target)
    if location in formula:
        node = formula.node(location)
        if node.is_quantifier and node.variable is not None and node.variable.name == name:
            return node.variable
    candidates: Dict[str, Variable] = {}
    for variable in sorted(formula.variables()):
        candidates.setdefault(variable.name, variable)
    if location in formula:
        for variable in formula.free_vars(location):
            candidates[variable.name] = variable
    if name not in candidates:
        raise StructuralError(f"Unknown variable {name}", number, 1)
    return candidates[name]


def _constraint(target: Target, location: int, body: str, number: int) -> Constraint:
    match = JUDGEMENT_BODY.match(body)
    if match is None:
        raise StructuralError("Expected vars=[...] rows={...}", number, 1)
    names = [n.strip() for n in match.group("vars").split(",") if n.strip()]
    if len(set(names)) != len(names):
        raise StructuralError("Repeated variable in vars=[...]", number, 1)
    ordered = sorted(_lookup(target, location, name, number) for name in names)
    rows_text = match.group("rows").strip()
    if rows_text and ROW_PATTERN.sub("", rows_text).replace(",", "").strip():
        raise StructuralError("Malformed rows={...}", number, 1)
    rows = set()
    for body_text in ROW_PATTERN.findall(rows_text):
        values = [v.strip() for v in body_text.split(",")] if body_text.strip() else []
        if len(values) != len(ordered):
            raise StructuralError(f"Row ({body_text}) has the wrong length", number, 1)
        rows.add(Assignment(tuple(zip(ordered, values))))
    try:
        return Constraint(frozenset(ordered), frozenset(rows))
    except ConstraintError as e:
        raise StructuralError(str(e), number, 1) from e


def _clause(body: str, number: int) -> Clause:
    match = CLAUSE_BODY.match(body)
    if match is None:
        raise StructuralError("Expected clause=(...)", number, 1)
    try:
        return Clause.of(*match.group("literals").split())
    except ClauseError as e:
        raise StructuralError(str(e), number, 1) from e


def proof_system(text: str) -> str:
    """The ``system:`` header value of a proof document."""
    for raw in text.splitlines():
        match = HEADER_PATTERN.match(raw.split("#", 1)[0].strip())
        if match is not None and match.group("key") == "system":
            return match.group("value")
    raise StructuralError("Proof header has no system: line", 1, 1)


def parse_proof(text: str, target: Target) -> ProofDocument:
    """
    Parse a proof document about ``target``.

    A hash mismatch is not a parse error; callers compare it with
    :meth:`ProofDocument.matches`.

    Raises:
        StructuralError: On a bad header, line, rule name or numbering
    """
    header: Dict[str, str] = {}
    steps: List[Tuple[int, str]] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        match = HEADER_PATTERN.match(line)
        if match is not None and not steps:
            header[match.group("key")] = match.group("value")
        else:
            steps.append((number, line))
    if "system" not in header or "instance" not in header:
        raise StructuralError("Proof header needs system: and instance: lines", 1, 1)
    system = header["system"]
    if system not in (QCSP_SYSTEM, QCBF_SYSTEM):
        raise StructuralError(f"Unknown proof system: {system}", 1, 1)
    if system != system_of(target):
        raise StructuralError(f"A {system} proof does not fit a {system_of(target)} instance")

    proof: AnyProof = JudgementProof() if system == QCSP_SYSTEM else ClauseProof()
    for expected, (number, line) in enumerate(steps, start=1):
        match = STEP_PATTERN.match(line)
        if match is None:
            raise StructuralError("Malformed proof step", number, 1)
        if int(match.group("number")) != expected:
            raise StructuralError(f"Expected step {expected}", number, 1)
        numbers = match.group("premises").replace(" ", "").split(",")
        premises = tuple(int(p) - 1 for p in numbers if p)
        location = int(match.group("index"))
        param: Optional[str] = None if match.group("param") == "-" else match.group("param")
        rule_name = match.group("rule")
        if isinstance(proof, JudgementProof):
            rule = _rule(Rule, rule_name, number)
            variable = _lookup(target, location, param, number) if param else None
            constraint = _constraint(target, location, match.group("body"), number)
            proof.add(rule, premises, location, constraint, variable)
        else:
            clause_rule = _rule(ClauseRule, rule_name, number)
            clause = _clause(match.group("body"), number)
            proof.add(clause_rule, premises, location, clause, param)
    logger.debug(f"Parsed {system} proof with {len(proof)} step(s)")
    return ProofDocument(system, header["instance"], proof)


def _rule(enum_type: Type[E], name: str, number: int) -> E:
    try:
        return enum_type(name)
    except ValueError:
        raise StructuralError(f"Unknown rule: {name}", number, 1) from None
