"""Command-line entry point

Results go to standard output; log events go to standard error. Exit codes:
0 success, 1 engine error, 2 negative answer (Unknown verdict, non-member,
not included), 64 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

import structlog
from pydantic import ValidationError

from src import __version__
from src.analytics.completion import check_reachability, complete
from src.analytics.oracle import peano_benchmark
from src.config import LOG_LEVELS, Settings, configure_logging, get_settings
from src.ingestion.serializer import format_automaton
from src.ingestion.spec_loader import SpecFile, parse_spec, parse_term
from src.models.errors import LTAError
from src.models.lattice import Partition
from src.processing.automaton_ops import included_in, intersection, member, reduce, union
from src.processing.partitioned import determinize, minimize, to_plta
from src.visualization.dot import to_dot

logger = structlog.get_logger()

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NEGATIVE = 2
EXIT_USAGE = 64


class UsageError(Exception):
    """Command line could not be understood"""


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def _emit(text: str, out: Optional[str] = None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    Path(out).write_text(text, encoding="utf-8")
    logger.info("Output written", path=out)


def _partition(spec: SpecFile, option: Optional[str]) -> Partition:
    """--partition names a spec file or gives the blocks inline; else the file's own partition"""
    if option is None:
        return spec.partition or Partition.trivial()
    if Path(option).is_file():
        other = parse_spec(option).partition
        if other is None:
            raise UsageError(f"{option} declares no partition")
        return other
    return Partition.parse(option)


def cmd_complete(args: argparse.Namespace, settings: Settings) -> int:
    spec = parse_spec(args.spec)
    cfg = spec.completion_config(
        settings,
        equations=args.equations,
        max_steps=args.max_steps,
        widen_after=args.widen_after,
        strict_int=True if args.strict_int else None,
    )
    result = complete(spec.automaton(args.automaton), spec.trs(args.trs), cfg)
    if args.trace:
        Path(args.trace).write_text("\n".join(result.trace_lines()) + "\n", encoding="utf-8")
        logger.info("Trace written", path=args.trace, records=len(result.trace))
    header = f"# converged={str(result.converged).lower()} steps={result.steps}\n"
    _emit(header + format_automaton(result.automaton, "completed"), args.out)
    return EXIT_OK


def cmd_member(args: argparse.Namespace, settings: Settings) -> int:
    spec = parse_spec(args.automaton_file)
    a = spec.automaton(args.automaton)
    term = parse_term(args.term, a.alphabet)
    accepted = member(term, a)
    sys.stdout.write(f"{str(accepted).lower()}\n")
    return EXIT_OK if accepted else EXIT_NEGATIVE


def cmd_check(args: argparse.Namespace, settings: Settings) -> int:
    spec = parse_spec(args.spec)
    cfg = spec.completion_config(
        settings,
        equations=args.equations,
        max_steps=args.max_steps,
        widen_after=args.widen_after,
        strict_int=True if args.strict_int else None,
    )
    verdict = check_reachability(
        spec.automaton(args.automaton), spec.automaton(args.bad), spec.trs(args.trs), cfg
    )
    line = verdict.kind.value
    if verdict.witness is not None:
        line += f" witness={verdict.witness}"
    elif not verdict.result.converged:
        line += " (completion did not converge)"
    sys.stdout.write(line + "\n")
    return EXIT_OK if verdict.safe else EXIT_NEGATIVE


def cmd_det(args: argparse.Namespace, settings: Settings) -> int:
    spec = parse_spec(args.automaton_file)
    partition = _partition(spec, args.partition)
    result = determinize(to_plta(spec.automaton(args.automaton), partition))
    if args.minimize:
        result = minimize(result)
    _emit(format_automaton(result.base, "determinized", partition), args.out)
    return EXIT_OK


def cmd_min(args: argparse.Namespace, settings: Settings) -> int:
    spec = parse_spec(args.automaton_file)
    partition = _partition(spec, args.partition)
    result = minimize(determinize(to_plta(spec.automaton(args.automaton), partition)))
    _emit(format_automaton(result.base, "minimized", partition), args.out)
    return EXIT_OK


def cmd_reduce(args: argparse.Namespace, settings: Settings) -> int:
    spec = parse_spec(args.automaton_file)
    _emit(format_automaton(reduce(spec.automaton(args.automaton)), "reduced"), args.out)
    return EXIT_OK


def _pair(args: argparse.Namespace):
    return parse_spec(args.left).automaton(), parse_spec(args.right).automaton()


def cmd_union(args: argparse.Namespace, settings: Settings) -> int:
    left, right = _pair(args)
    _emit(format_automaton(union(left, right), "union"), args.out)
    return EXIT_OK


def cmd_inter(args: argparse.Namespace, settings: Settings) -> int:
    left, right = _pair(args)
    _emit(format_automaton(intersection(left, right), "intersection"), args.out)
    return EXIT_OK


def cmd_included(args: argparse.Namespace, settings: Settings) -> int:
    left, right = _pair(args)
    result = included_in(left, right)
    line = str(result.included).lower()
    if result.witness is not None:
        line += f" witness={result.witness}"
    if result.approximate:
        line += " (approximate)"
    sys.stdout.write(line + "\n")
    return EXIT_OK if result.included else EXIT_NEGATIVE


def cmd_dot(args: argparse.Namespace, settings: Settings) -> int:
    spec = parse_spec(args.automaton_file)
    sys.stdout.writelines(to_dot(spec.automaton(args.automaton), args.name))
    return EXIT_OK


def cmd_bench_peano(args: argparse.Namespace, settings: Settings) -> int:
    if args.x < 0 or args.y < 0:
        raise UsageError("bench-peano expects non-negative operands")
    report = peano_benchmark(args.x, args.y)
    sys.stdout.write(
        f"peano_steps={report.peano_steps} builtin_steps={report.builtin_steps} "
        f"peano_value={report.peano_value} builtin_value={report.builtin_value}\n"
    )
    return EXIT_OK


def _completion_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("spec", help="Spec file")
    parser.add_argument("--automaton", help="Initial automaton name (default: first declared)")
    parser.add_argument("--trs", help="Rewrite system name (default: first declared)")
    parser.add_argument("--equations", help="Equation set name (default: first declared)")
    parser.add_argument("--max-steps", type=int, help="Completion step budget")
    parser.add_argument("--widen-after", type=int, help="Evaluation passes before widening")
    parser.add_argument("--strict-int", action="store_true", help="Tighten strict inequalities to integers")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="lta", description="Lattice tree automata and completion")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", type=str.upper, choices=LOG_LEVELS)
    parser.add_argument("--log-json", action="store_true", help="Log JSON lines to stderr")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    def command(
        name: str, handler: Callable[[argparse.Namespace, Settings], int], help_text: str
    ) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, help=help_text)
        sub.set_defaults(handler=handler)
        return sub

    sub = command("complete", cmd_complete, "Run completion and print the resulting automaton")
    _completion_options(sub)
    sub.add_argument("--trace", help="Write the per-phase trace to this file")
    sub.add_argument("--out", help="Write the automaton here instead of stdout")

    sub = command("member", cmd_member, "Test whether an automaton accepts a term")
    sub.add_argument("automaton_file")
    sub.add_argument("term")
    sub.add_argument("--automaton", help="Automaton name inside the file")

    sub = command("check", cmd_check, "Check that no bad term is reachable")
    _completion_options(sub)
    sub.add_argument("--bad", required=True, help="Name of the automaton of bad terms")

    sub = command("det", cmd_det, "Determinize along a partition")
    sub.add_argument("automaton_file")
    sub.add_argument("--automaton")
    sub.add_argument("--partition", help="Spec file declaring a partition, or inline blocks")
    sub.add_argument("--minimize", action="store_true")
    sub.add_argument("--out")

    sub = command("min", cmd_min, "Minimize a deterministic automaton")
    sub.add_argument("automaton_file")
    sub.add_argument("--automaton")
    sub.add_argument("--partition")
    sub.add_argument("--out")

    sub = command("reduce", cmd_reduce, "Drop unreachable states")
    sub.add_argument("automaton_file")
    sub.add_argument("--automaton")
    sub.add_argument("--out")

    for name, handler, help_text in (
        ("union", cmd_union, "Union of two automata"),
        ("inter", cmd_inter, "Intersection of two automata"),
        ("included", cmd_included, "Language inclusion of the first automaton in the second"),
    ):
        sub = command(name, handler, help_text)
        sub.add_argument("left")
        sub.add_argument("right")
        if name != "included":
            sub.add_argument("--out")

    sub = command("dot", cmd_dot, "Print an automaton as a Graphviz digraph")
    sub.add_argument("automaton_file")
    sub.add_argument("--automaton")
    sub.add_argument("--name", default="lta")

    sub = command("bench-peano", cmd_bench_peano, "Compare Peano and builtin addition")
    sub.add_argument("x", type=int)
    sub.add_argument("y", type=int)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    settings = get_settings()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        sys.stderr.write(f"usage error: {e}\n")
        return EXIT_USAGE
    configure_logging(args.log_level or settings.log_level, args.log_json or settings.log_json)
    logger.info("Command started", command=args.command)
    try:
        return args.handler(args, settings)
    except (UsageError, ValidationError) as e:
        sys.stderr.write(f"usage error: {e}\n")
        return EXIT_USAGE
    except (LTAError, OSError) as e:
        logger.error("Command failed", command=args.command, err=str(e))
        sys.stderr.write(f"error: {e}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
