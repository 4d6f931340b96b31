import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .corpus import DATA_DIR, CorpusError, RuleBase, StepMismatch, run_derivation
from .grammar import GrammarViolation, format_latex
from .graph import ExportGraph
from .logging import configure_logging
from .meta import MalformedReification, SoFail, so_eval
from .modulo import EquationalTheory, eval_modulo
from .parser import ParseError, parse_strategy, parse_term
from .printer import format_strategy, format_term
from .strategy import DEFAULT_FUEL, FuelExhausted, eval_strategy
from .terms import Term, TermError, UnknownSymbol
from .trace import SCHEMA_VERSION, Trace

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_FUEL = 2
EXIT_INPUT_ERROR = 3


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors are input errors."""

    def error(self, message: str):  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT_ERROR, f"{self.prog}: error: {message}\n")


def read_source(path: Path) -> str:
    """File contents without `#` comment lines."""
    lines = path.read_text().splitlines()
    return "\n".join(line for line in lines if not line.strip().startswith("#"))


def load_context(args) -> RuleBase:
    if getattr(args, "rules", None):
        return RuleBase.load(args.rules)
    return RuleBase(name="empty")


def emit_terms(args, terms: List[Term]) -> None:
    if args.format == "json":
        doc = {"schema": SCHEMA_VERSION, "results": [format_term(t) for t in terms]}
        print(json.dumps(doc, indent=4))
    elif args.format == "latex":
        for t in terms:
            print(format_latex(t))
    else:
        for t in terms:
            print(format_term(t))


def main_parse(args) -> int:
    base = load_context(args)
    text = read_source(args.input)
    if args.strategy:
        strategy = parse_strategy(text, base.ctx, source=str(args.input))
        print(format_strategy(strategy))
        return EXIT_OK
    term = parse_term(text, base.ctx, source=str(args.input))
    base.validate(term)
    emit_terms(args, [base.theory.canonical(term)])
    return EXIT_OK


def main_rewrite(args) -> int:
    base = load_context(args)
    term = parse_term(read_source(args.input), base.ctx, source=str(args.input))
    strategy = parse_strategy(read_source(args.strategy), base.ctx, source=str(args.strategy))

    if args.modulo == "ac":
        theory = base.theory if not base.theory.empty else EquationalTheory.ac("+", "*")
        results = eval_modulo(strategy, [term], theory, args.fuel or DEFAULT_FUEL)
        if not results:
            logger.error("strategy failed on %s", format_term(term))
            return EXIT_FAIL
        emit_terms(args, list(results))
        return EXIT_OK

    result = eval_strategy(strategy, term, args.fuel or DEFAULT_FUEL)
    if result is None:
        logger.error("strategy failed on %s", format_term(term))
        return EXIT_FAIL
    emit_terms(args, [result])
    return EXIT_OK


def write_trace(args, trace: Optional[Trace]) -> None:
    if args.trace_out and trace is not None:
        args.trace_out.write_text(trace.dumps())
        logger.info("trace written to %s", args.trace_out)


def main_derive(args) -> int:
    try:
        report = run_derivation(
            args.model,
            args.pack,
            corpus=args.corpus,
            fuel=args.fuel,
            golden_update=args.golden_update,
            blocks=args.block,
            script_file=args.script,
        )
    except StepMismatch as error:
        write_trace(args, error.trace)
        logger.error("%s\n%s", error, error.diff())
        return EXIT_FAIL

    write_trace(args, report.trace)
    if args.format == "json":
        print(json.dumps(report.as_dict(), indent=4))
    elif args.format == "latex":
        print(report.trace.format_latex() if report.trace else "")
    elif args.format == "dot":
        print(ExportGraph(report).generate_digraph())
    else:
        print(report.format_text())
    return EXIT_OK if report.passed else EXIT_FAIL


def main_extend(args) -> int:
    base = load_context(args)
    strategy = parse_strategy(read_source(args.input), base.ctx, source=str(args.input))
    pi = parse_strategy(read_source(args.so), base.ctx, source=str(args.so))
    result = so_eval(pi, strategy, args.fuel or DEFAULT_FUEL)
    print(format_strategy(result))
    return EXIT_OK


def main_trace(args) -> int:
    trace = Trace.loads(args.input.read_text()).for_block(args.block[0] if args.block else None)
    if args.format == "json":
        print(trace.dumps())
    elif args.format == "latex":
        print(trace.format_latex())
    else:
        print(trace.format_text())
    return EXIT_OK


def main_help(parser, _) -> int:
    parser.print_help()
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    all_arguments = {
        "--block": {
            "default": [],
            "help": "only this block (repeatable)",
            "action": "append",
            "type": int,
        },
        "--corpus": {
            "default": DATA_DIR,
            "help": "corpus directory with rules/, scripts/ and packs/",
            "type": Path,
        },
        "--debug": {"help": "output debug info", "action": "store_true"},
        "--format": {
            "default": "text",
            "help": "output format",
            "choices": ["text", "json", "latex"],
        },
        "--fuel": {"help": f"mu unfoldings allowed per evaluation (default {DEFAULT_FUEL})", "type": int},
        "--golden-update": {
            "help": "rewrite step expectations from the actual run",
            "action": "store_true",
        },
        "--modulo": {"default": "none", "help": "rewrite modulo a theory", "choices": ["none", "ac"]},
        "--pack": {
            "default": [],
            "help": "extension pack to apply (repeatable)",
            "action": "append",
        },
        "--rules": {"help": "rule file", "type": Path},
        "--script": {"help": "replay this block script instead of the corpus scripts", "type": Path},
        "--so": {"help": "second-order strategy file", "type": Path, "required": True},
        "--strategy": {"help": "strategy file", "type": Path},
        "--trace-out": {"help": "write the JSON trace here", "type": Path},
    }

    parser = ArgumentParser(prog="twoscale", add_help=True)
    parser.set_defaults(func=lambda x: main_help(parser, x))
    parser.add_argument("--debug", **all_arguments["--debug"])

    subparsers = parser.add_subparsers()

    parse_parser = subparsers.add_parser("parse", help="parse and print a term or strategy")
    parse_parser.set_defaults(func=main_parse)
    for opt in ["--format", "--rules"]:
        parse_parser.add_argument(opt, **all_arguments[opt])
    parse_parser.add_argument("--strategy", help="the input is a strategy", action="store_true")
    parse_parser.add_argument("input", type=Path, help="term file")

    rewrite_parser = subparsers.add_parser("rewrite", help="apply a strategy to a term")
    rewrite_parser.set_defaults(func=main_rewrite)
    for opt in ["--format", "--fuel", "--modulo", "--rules"]:
        rewrite_parser.add_argument(opt, **all_arguments[opt])
    rewrite_parser.add_argument("--strategy", **{**all_arguments["--strategy"], "required": True})
    rewrite_parser.add_argument("input", type=Path, help="term file")

    derive_parser = subparsers.add_parser("derive", help="replay the derivation blocks")
    derive_parser.set_defaults(func=main_derive)
    for opt in ["--block", "--corpus", "--fuel", "--golden-update", "--pack", "--script", "--trace-out"]:
        derive_parser.add_argument(opt, **all_arguments[opt])
    derive_parser.add_argument("--format", **{**all_arguments["--format"], "choices": ["text", "json", "latex", "dot"]})
    derive_parser.add_argument("model", nargs="?", default="reference", help="model rule base")

    extend_parser = subparsers.add_parser("extend", help="transform a strategy with a second-order strategy")
    extend_parser.set_defaults(func=main_extend)
    for opt in ["--fuel", "--rules", "--so"]:
        extend_parser.add_argument(opt, **all_arguments[opt])
    extend_parser.add_argument("input", type=Path, help="strategy file")

    trace_parser = subparsers.add_parser("trace", help="re-emit a JSON trace")
    trace_parser.set_defaults(func=main_trace)
    for opt in ["--block", "--format"]:
        trace_parser.add_argument(opt, **all_arguments[opt])
    trace_parser.add_argument("input", type=Path, help="trace file written by --trace-out")

    args = parser.parse_args(argv)

    if args.debug:
        configure_logging(logging.DEBUG)
    else:
        configure_logging(logging.INFO)

    if getattr(args, "fuel", None) is not None and args.fuel <= 0:
        logger.error("fuel must be positive: %d", args.fuel)
        return EXIT_INPUT_ERROR

    try:
        return args.func(args)
    except FuelExhausted as error:
        logger.error("%s", error)
        return EXIT_FUEL
    except (StepMismatch, MalformedReification, SoFail) as error:
        logger.error("%s", error)
        return EXIT_FAIL
    except (ParseError, CorpusError, UnknownSymbol, GrammarViolation) as error:
        logger.error("%s", error)
        return EXIT_INPUT_ERROR
    except (TermError, OSError, ValueError) as error:
        logger.error("%s", error)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
