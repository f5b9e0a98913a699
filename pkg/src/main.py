"""
Main entry point for qjudge.

Parses the command line, dispatches to one subcommand, renders its report
and maps the outcome to an exit status: 0 success, 1 invalid input,
2 property violated, 3 resource limit.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

# Add src to path if running from repository root
if __name__ == "__main__":
    root_dir = Path(__file__).parent.parent
    if str(root_dir) not in sys.path:
        sys.path.insert(0, str(root_dir))

from src.core.clause_proofs import (
    ClauseProof,
    check_clause_proof,
    qres_closure_derive,
    unfold_tree_like,
)
from src.core.clauses import Clause, ClauseError
from src.core.consistency import (
    ConsistencyError,
    SaturationLimitExceeded,
    bounded_width_refutation_search,
    propagate,
)
from src.core.judgement_proofs import JudgementProof, check_proof, generate_refutation
from src.core.model import QcbfFormula, QcInstance, Target
from src.core.search_traces import (
    SearchLimitExceeded,
    TraceError,
    detect_falsity,
    proof_to_trace,
    trace_to_proof,
    validate_trace,
)
from src.core.semantics import is_true
from src.core.translation import (
    TranslationError,
    clause_to_constraint_proof,
    constraint_to_clause_proof,
    qcsp_translation,
)
from src.formats.instance_format import format_instance, instance_hash, load_instance
from src.formats.proof_format import QCBF_SYSTEM, format_proof, parse_proof, proof_system
from src.formats.sexpr import ParseError
from src.formats.trace_format import format_trace, parse_trace
from src.utils.config import get_config
from src.utils.logger import Logger, get_audit_logger, get_logger
from src.utils.report import render
from src.utils.validators import ValidationError, Validators

logger = get_logger("main")

EXIT_OK = 0
EXIT_INVALID_INPUT = 1
EXIT_VIOLATED = 2
EXIT_RESOURCE_LIMIT = 3

Outcome = Tuple[str, Dict[str, Any], int]


def setup_logging(verbose: bool = False) -> None:
    """Set log levels from configuration; ``--verbose`` shows INFO on the console."""
    config = get_config()
    level_map = {
        "DEBUG": logging.DEBUG,
        "INFO": logging.INFO,
        "WARNING": logging.WARNING,
        "ERROR": logging.ERROR,
        "CRITICAL": logging.CRITICAL,
    }
    level = level_map.get(str(config.get("logging.level", "WARNING")).upper(), logging.WARNING)
    console = logging.INFO if verbose else level
    Logger().set_level(level, console_level=console)


def _read(path: str) -> str:
    Validators.validate_path(path)
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ValidationError(f"Cannot read {path}: {e}") from e


def _load(path: str) -> Target:
    Validators.validate_path(path)
    target = load_instance(path)
    get_audit_logger().info(f"instance {path} sha256={instance_hash(target)}")
    return target


def _require_qcbf(target: Target, command: str) -> QcbfFormula:
    if not isinstance(target, QcbfFormula):
        raise ValidationError(f"{command} needs a QCBF document")
    return target


def _emit(document: str, output: Optional[str]) -> str:
    """Write ``document`` to ``output`` if given; return what goes into the report."""
    if output is None:
        return document
    Path(output).write_text(document, encoding="utf-8")
    logger.info(f"Wrote {output}")
    return f"written to {output}\n"


def _summary(proof: Any) -> str:
    kind = "judgement" if isinstance(proof, JudgementProof) else "clause"
    return f"FALSE: {kind} refutation with {len(proof)} step(s), width {proof.width}"


def cmd_eval(args: argparse.Namespace) -> Outcome:
    target = _load(args.instance)
    return "eval", {"verdict": is_true(target)}, EXIT_OK


def cmd_check(args: argparse.Namespace) -> Outcome:
    target = _load(args.instance)
    document = parse_proof(_read(args.proof), target)
    if isinstance(document.proof, JudgementProof):
        assert isinstance(target, QcInstance)
        data = check_proof(target, document.proof).to_dict()
    else:
        data = check_clause_proof(_require_qcbf(target, "check"), document.proof).to_dict()
    data["hash_matches"] = document.matches(target)
    valid = data["valid"] and data["hash_matches"]
    return "check", data, EXIT_OK if valid else EXIT_VIOLATED


def cmd_prove(args: argparse.Namespace) -> Outcome:
    target = _load(args.instance)
    proof: Any
    if isinstance(target, QcInstance):
        proof = generate_refutation(target)
    else:
        instance, _ = qcsp_translation(target)
        refutation = generate_refutation(instance)
        if refutation is not None:
            proof = constraint_to_clause_proof(target, refutation, instance)
        else:
            proof = None
    data: Dict[str, Any] = {"found": proof is not None, "none_message": "TRUE: no refutation"}
    if proof is not None:
        data.update(
            summary=_summary(proof),
            length=len(proof),
            width=proof.width,
            document=_emit(format_proof(proof, target), args.output),
        )
    return "proof", data, EXIT_OK


def cmd_refute(args: argparse.Namespace) -> Outcome:
    formula = _require_qcbf(_load(args.instance), "refute")
    config = get_config()
    policy, seed = Validators.parse_policy(args.policy or config.get("search.policy", "default"))
    max_steps = args.max_steps or config.get("search.max_steps", 200000)
    Validators.validate_limit(max_steps, "max-steps")
    trace = detect_falsity(formula, policy, seed, max_steps)
    data: Dict[str, Any] = {"found": trace is not None}
    if trace is not None:
        if args.as_proof:
            text = format_proof(trace_to_proof(formula, trace), formula)
        else:
            text = format_trace(trace)
        data.update(nodes=trace.node_count, depth=trace.depth, document=_emit(text, args.output))
    return "trace", data, EXIT_OK


def cmd_trace(args: argparse.Namespace) -> Outcome:
    formula = _require_qcbf(_load(args.instance), "trace")
    trace = parse_trace(_read(args.trace))
    data: Dict[str, Any] = {"valid": True, "nodes": trace.node_count}
    try:
        validate_trace(formula, trace)
    except TraceError as e:
        data.update(valid=False, code=e.code, message=e.message)
    return "trace-check", data, EXIT_OK if data["valid"] else EXIT_VIOLATED


def cmd_consistency(args: argparse.Namespace) -> Outcome:
    target = _load(args.instance)
    instance = target if isinstance(target, QcInstance) else qcsp_translation(target)[0]
    config = get_config()
    k = args.k if args.k is not None else config.get("consistency.default_k", 2)
    Validators.validate_k(k)
    order = args.order or config.get("consistency.rule_order", "forward")
    result = propagate(instance, k, order)
    data = result.to_dict()
    if args.table:
        data["table"] = result.table.dump_lines()
    if args.refutation and not result.consistent:
        budget = config.get("saturation.max_judgements", 100000)
        Validators.validate_limit(budget, "max-judgements")
        refutation = bounded_width_refutation_search(instance, k, budget)
        if refutation is None:
            raise ConsistencyError("no-refutation", f"No width-{k} refutation found")
        data["refutation"] = _emit(format_proof(refutation, instance), args.output)
    return "consistency", data, EXIT_OK


def cmd_translate(args: argparse.Namespace) -> Outcome:
    formula = _require_qcbf(_load(args.instance), "translate")
    instance, _ = qcsp_translation(formula)
    return "translate", {"document": _emit(format_instance(instance), args.output)}, EXIT_OK


def cmd_simqres(args: argparse.Namespace) -> Outcome:
    formula = _require_qcbf(_load(args.instance), "simqres")
    target = Clause.of(*args.clause.split())
    proof = qres_closure_derive(formula, target, args.existential_pivots)
    data: Dict[str, Any] = {
        "found": proof is not None,
        "none_message": f"{target} is not in the resolution closure",
    }
    if proof is not None:
        data.update(
            summary=f"derived {target} in {len(proof)} step(s), width {proof.width}",
            length=len(proof),
            width=proof.width,
            document=_emit(format_proof(proof, formula), args.output),
        )
    return "proof", data, EXIT_OK


def cmd_convert(args: argparse.Namespace) -> Outcome:
    formula = _require_qcbf(_load(args.instance), "convert")
    instance, _ = qcsp_translation(formula)
    if args.trace is not None:
        clause_proof = trace_to_proof(formula, parse_trace(_read(args.trace)))
        text = format_proof(clause_proof, formula)
        summary = f"clause proof with {len(clause_proof)} step(s)"
    else:
        source = _read(args.proof)
        if proof_system(source) == QCBF_SYSTEM:
            proof = parse_proof(source, formula).proof
            assert isinstance(proof, ClauseProof)
            if args.to == "trace":
                end = proof.first_empty()
                if end is None:
                    raise TraceError("not-empty", "Proof derives no empty clause")
                trace = proof_to_trace(formula, unfold_tree_like(proof, end))
                text = format_trace(trace)
                summary = f"trace with {trace.node_count} node(s)"
            else:
                judgement_proof = clause_to_constraint_proof(formula, proof, instance)
                text = format_proof(judgement_proof, instance)
                summary = f"judgement proof with {len(judgement_proof)} step(s)"
        else:
            parsed = parse_proof(source, instance).proof
            assert isinstance(parsed, JudgementProof)
            clause_proof = constraint_to_clause_proof(formula, parsed, instance)
            text = format_proof(clause_proof, formula)
            summary = f"clause proof with {len(clause_proof)} step(s)"
    return "convert", {"summary": summary, "document": _emit(text, args.output)}, EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace], Outcome]] = {
    "eval": cmd_eval,
    "check": cmd_check,
    "prove": cmd_prove,
    "refute": cmd_refute,
    "trace": cmd_trace,
    "consistency": cmd_consistency,
    "translate": cmd_translate,
    "simqres": cmd_simqres,
    "convert": cmd_convert,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(
        prog="qjudge", description="Proof systems for quantified constraint formulas"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    def command(name: str, help_text: str, output: bool = False) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, parents=[common], help=help_text)
        sub.add_argument("instance", help="instance document (.qcsp or .qcbf)")
        if output:
            sub.add_argument("-o", "--output", help="write the document to a file")
        return sub

    command("eval", "decide truth by brute force")
    command("check", "check a proof document").add_argument("--proof", required=True)
    command("prove", "generate a refutation", output=True)
    refute = command("refute", "search for a refuting trace of a QCBF", output=True)
    refute.add_argument("--policy", help="default or random:<seed>")
    refute.add_argument("--max-steps", type=int, help="search state budget")
    refute.add_argument("--as-proof", action="store_true", help="print the clause proof")
    command("trace", "validate a trace document").add_argument("--trace", required=True)
    consistency = command("consistency", "decide k-judge-consistency", output=True)
    consistency.add_argument("-k", type=int, help="maximum judgement width")
    consistency.add_argument("--order", choices=["forward", "reverse"])
    consistency.add_argument("--table", action="store_true", help="dump the fixpoint table")
    consistency.add_argument(
        "--refutation", action="store_true", help="print a width-k refutation when inconsistent"
    )
    command("translate", "translate a QCBF into a QCSP instance", output=True)
    simqres = command("simqres", "derive a clause of the resolution closure", output=True)
    simqres.add_argument("--clause", default="", help="target literals, empty clause by default")
    simqres.add_argument("--existential-pivots", action="store_true")
    convert = command("convert", "translate between proofs and traces", output=True)
    source = convert.add_mutually_exclusive_group(required=True)
    source.add_argument("--proof")
    source.add_argument("--trace")
    convert.add_argument("--to", choices=["trace", "qcsp"], help="target of a clause proof")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point for the command line.

    Returns:
        Exit code
    """
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    as_json = args.json or bool(get_config().get("output.json", False))
    audit = get_audit_logger()

    try:
        kind, data, code = COMMANDS[args.command](args)
    except (ValidationError, ParseError, ClauseError, ConsistencyError) as e:
        return _fail(args, as_json, str(e), EXIT_INVALID_INPUT)
    except (TranslationError, TraceError) as e:
        return _fail(args, as_json, str(e), EXIT_VIOLATED)
    except (SearchLimitExceeded, SaturationLimitExceeded) as e:
        return _fail(args, as_json, str(e), EXIT_RESOURCE_LIMIT)
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return EXIT_RESOURCE_LIMIT

    sys.stdout.write(render(kind, data, as_json))
    audit.info(f"{args.command} {args.instance}: exit {code}")
    return code


def _fail(args: argparse.Namespace, as_json: bool, message: str, code: int) -> int:
    logger.error(f"{args.command} failed: {message}")
    get_audit_logger().info(f"{args.command} {args.instance}: exit {code} ({message})")
    stream = sys.stdout if as_json else sys.stderr
    stream.write(render("error", {"message": message, "exit": code}, as_json))
    return code


if __name__ == "__main__":
    sys.exit(main())
