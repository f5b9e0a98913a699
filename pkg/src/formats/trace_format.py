"""
Trace documents: one search node per line, indented two spaces per level.

    S=[] a={}
      S=[(1,x,exists)] a={x=0}
        S=[(1,x,exists),(2,y,forall)] a={x=0,y=1} falsifies @4
"""

import re
from typing import List, Tuple

from src.core.search_traces import LocatedVariable, Trace, TraceNode
from src.formats.sexpr import StructuralError
from src.utils.logger import get_logger

logger = get_logger("trace_format")

INDENT = "  "
NODE_PATTERN = re.compile(
    r"^S=\[(?P<located>[^\]]*)\]\s+a=\{(?P<values>[^}]*)\}"
    r"(?:\s+falsifies\s+@(?P<index>\d+))?$"
)
LOCATED_PATTERN = re.compile(r"\((\d+),([^,()]+),(forall|exists)\)")
VALUE_PATTERN = re.compile(r"^([^=\s]+)=([^=\s]+)$")


def format_trace(trace: Trace) -> str:
    lines: List[str] = []
    stack: List[Tuple[TraceNode, int]] = [(trace.root, 0)]
    while stack:
        node, depth = stack.pop()
        located = ",".join(str(lv) for lv in sorted(node.located))
        values = ",".join(f"{k}={v}" for k, v in sorted(node.assignment.items()))
        line = f"{INDENT * depth}S=[{located}] a={{{values}}}"
        if node.clause_index is not None:
            line += f" falsifies @{node.clause_index}"
        lines.append(line)
        stack.extend((child, depth + 1) for child in reversed(node.children))
    return "\n".join(lines) + "\n"


def _node(text: str, number: int) -> TraceNode:
    match = NODE_PATTERN.match(text)
    if match is None:
        raise StructuralError("Malformed trace node", number, 1)
    located_text = match.group("located")
    if LOCATED_PATTERN.sub("", located_text).replace(",", "").strip():
        raise StructuralError("Malformed located variable list", number, 1)
    located = frozenset(
        LocatedVariable(int(index), name, quantifier == "forall")
        for index, name, quantifier in LOCATED_PATTERN.findall(located_text)
    )
    assignment = {}
    for item in filter(None, (part.strip() for part in match.group("values").split(","))):
        pair = VALUE_PATTERN.match(item)
        if pair is None:
            raise StructuralError(f"Malformed assignment entry {item!r}", number, 1)
        assignment[pair.group(1)] = pair.group(2)
    index = match.group("index")
    return TraceNode(located, assignment, [], int(index) if index else None)


def parse_trace(text: str) -> Trace:
    """
    Parse a trace document.

    Raises:
        StructuralError: On malformed lines, odd indentation or a missing root
    """
    root = None
    path: List[TraceNode] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        stripped = raw.lstrip(" ")
        spaces = len(raw) - len(stripped)
        if spaces % len(INDENT):
            raise StructuralError("Indentation must be a multiple of two spaces", number, 1)
        depth = spaces // len(INDENT)
        node = _node(stripped.rstrip(), number)
        if depth == 0:
            if root is not None:
                raise StructuralError("A trace has a single root", number, 1)
            root = node
        else:
            if depth > len(path):
                raise StructuralError("Node is indented past its parent", number, spaces + 1)
            path[depth - 1].children.append(node)
        del path[depth:]
        path.append(node)
    if root is None:
        raise StructuralError("Empty trace document")
    trace = Trace(root)
    logger.debug(f"Parsed trace with {trace.node_count} node(s)")
    return trace
