"""
Report rendering for the command-line interface.

Every subcommand produces a plain dictionary. ``render`` turns it into the
human-readable text through a Jinja2 template, or into JSON when requested.
"""

import json
from typing import Any, Dict

from jinja2 import DictLoader, Environment, StrictUndefined, TemplateNotFound

from src.utils.logger import get_logger

logger = get_logger("report")

TEMPLATES: Dict[str, str] = {
    "eval": "{{ 'true' if verdict else 'false' }}\n",
    "check": (
        "{{ 'valid' if valid else 'invalid' }}, width={{ width }}, length={{ length }}"
        "{% if refutes %}, refutes{% endif %}"
        "{% if tree_like is defined and tree_like %}, tree-like{% endif %}\n"
        "{% if not hash_matches %}instance hash mismatch\n{% endif %}"
        "{% for v in violations %}  step {{ v.step }}: {{ v.code }}: {{ v.message }}\n"
        "{% endfor %}"
    ),
    "proof": (
        "{% if found %}{{ summary }}\n{{ document }}"
        "{% else %}{{ none_message }}\n{% endif %}"
    ),
    "trace": (
        "{% if found %}FALSE: refuting trace with {{ nodes }} node(s), depth {{ depth }}\n"
        "{{ document }}{% else %}no refuting trace: the formula is true\n{% endif %}"
    ),
    "consistency": (
        "{{ 'CONSISTENT' if consistent else 'INCONSISTENT' }} (k={{ k }})\n"
        "{% if table is defined %}{% for line in table %}{{ line }}\n{% endfor %}{% endif %}"
        "{% if refutation is defined %}{{ refutation }}{% endif %}"
    ),
    "trace-check": (
        "{{ 'valid' if valid else 'invalid' }} trace, {{ nodes }} node(s)"
        "{% if not valid %}: {{ code }}: {{ message }}{% endif %}\n"
    ),
    "translate": "{{ document }}",
    "convert": "{{ summary }}\n{{ document }}",
    "error": "error: {{ message }}\n",
}

_environment = Environment(
    loader=DictLoader(TEMPLATES),
    undefined=StrictUndefined,
    keep_trailing_newline=True,
    autoescape=False,
)


def render(kind: str, data: Dict[str, Any], as_json: bool = False) -> str:
    """
    Render report data.

    Args:
        kind: Template name (the subcommand)
        data: Report fields
        as_json: Emit JSON instead of text

    Returns:
        Report text ending in a newline
    """
    if as_json:
        return json.dumps({"command": kind, **data}, indent=2, sort_keys=True) + "\n"
    try:
        template = _environment.get_template(kind)
    except TemplateNotFound:
        logger.error(f"No report template for {kind}")
        raise
    return template.render(**data)
