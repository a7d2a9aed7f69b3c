"""Command-line entry point: ``evcheck verify`` and ``evcheck bench``.

Exit codes: 0 SAFE, 1 UNSAFE, 2 UNKNOWN, 3 usage error, 4 input rejected
by the parser, 5 I/O error, 6 internal error, 130 interrupted.  ``bench``
exits 0 once the CSV is written.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .arg import DEFAULT_STATE_BUDGET
from .bench import Scoring, run_bench, write_csv
from .cegar import MODES, REFINEMENTS, TRAVERSALS, Config, cegar
from .cfa import load_problem
from .parser import ParseError

EXIT_SAFE, EXIT_UNSAFE, EXIT_UNKNOWN = 0, 1, 2
EXIT_USAGE, EXIT_PARSE, EXIT_IO, EXIT_INTERNAL = 3, 4, 5, 6
EXIT_INTERRUPTED = 130
VERDICT_EXIT = {"SAFE": EXIT_SAFE, "UNSAFE": EXIT_UNSAFE, "UNKNOWN": EXIT_UNKNOWN}

TRUE_WORDS = {"1", "true", "yes", "on"}
FALSE_WORDS = {"0", "false", "no", "off"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _bool(text: str) -> bool:
    word = text.strip().lower()
    if word in TRUE_WORDS:
        return True
    if word in FALSE_WORDS:
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _positive_int(text: str) -> int:
    try:
        value = int(float(text)) if "e" in text.lower() else int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _analysis_flags(p: argparse.ArgumentParser):
    p.add_argument("--mode", choices=MODES, default="explicit-cegar")
    p.add_argument("--refine", choices=REFINEMENTS, default="prune")
    p.add_argument("--scoped-precision", type=_bool, default=True, metavar="BOOL")
    p.add_argument("--traversal", choices=TRAVERSALS, default="dfs")
    p.add_argument("--state-budget", type=_positive_int, default=DEFAULT_STATE_BUDGET, metavar="N")
    p.add_argument("--max-refinements", type=_positive_int, default=100, metavar="N")
    p.add_argument("--time-limit", type=_positive_float, default=None, metavar="SECONDS")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="evcheck", description="Explicit-value CEGAR model checker.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    verify = sub.add_parser("verify", help="verify a single task")
    verify.add_argument("task", type=Path)
    _analysis_flags(verify)
    verify.add_argument("--witness", type=Path, metavar="PATH", help="write the error path on UNSAFE")
    verify.add_argument("--arg-dump", type=Path, metavar="PATH", help="write the final ARG (graphviz)")

    bench = sub.add_parser("bench", help="run every task listed in a corpus manifest")
    bench.add_argument("corpus", type=Path)
    _analysis_flags(bench)
    bench.add_argument("--csv", type=Path, metavar="PATH", help="output file (default: stdout)")
    bench.add_argument("--jobs", type=_positive_int, default=1, metavar="N")
    defaults = Scoring()
    bench.add_argument("--score-correct-safe", type=int, default=defaults.correct_safe)
    bench.add_argument("--score-correct-unsafe", type=int, default=defaults.correct_unsafe)
    bench.add_argument("--score-false-alarm", type=int, default=defaults.false_alarm)
    bench.add_argument("--score-missed-bug", type=int, default=defaults.missed_bug)
    return parser


def config_from_args(args) -> Config:
    return Config(mode=args.mode, refinement=args.refine, scoped_precision=args.scoped_precision,
                  traversal=args.traversal, state_budget=args.state_budget,
                  max_refinements=args.max_refinements, time_limit=args.time_limit)


def cmd_verify(args, out) -> int:
    problem = load_problem(args.task)
    result = cegar(problem, config_from_args(args))
    verdict = result.verdict
    out.write(f"task: {problem.name}\n")
    out.write(f"refinements: {result.refinements}\n")
    out.write(f"arg nodes: {result.arg_nodes_created} created, {result.peak_arg_nodes} peak\n")
    out.write(f"precision: {len(result.precision.variables())} variables, "
              f"at most {result.precision.max_size()} per location\n")
    out.write(f"time: {result.elapsed * 1000:.0f} ms\n")
    if verdict.witness is not None:
        text = verdict.witness.render()
        if args.witness is not None:
            args.witness.write_text(text, encoding="utf-8")
        else:
            out.write(text)
    if args.arg_dump is not None and result.arg is not None:
        with open(args.arg_dump, "w", encoding="utf-8") as fh:
            result.arg.dump(fh)
    out.write(f"VERDICT: {verdict}\n")
    return VERDICT_EXIT[verdict.kind]


def cmd_bench(args, out) -> int:
    scoring = Scoring(args.score_correct_safe, args.score_correct_unsafe,
                      args.score_false_alarm, args.score_missed_bug)
    results = run_bench(args.corpus, config_from_args(args), scoring, args.jobs)
    if args.csv is not None:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            write_csv(results, fh)
    else:
        write_csv(results, out)
    return 0


def main(argv=None) -> int:
    out, err = sys.stdout, sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        err.write(f"{exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_SAFE if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=err)
    try:
        if args.command == "verify":
            return cmd_verify(args, out)
        return cmd_bench(args, out)
    except ParseError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_PARSE
    except (OSError, UnicodeDecodeError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_IO
    except ValueError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_USAGE
    except KeyboardInterrupt:
        return EXIT_INTERRUPTED
    except Exception as exc:  # noqa: BLE001 - the exit-code contract must stay total
        logging.getLogger(__name__).debug("internal error", exc_info=True)
        err.write(f"internal error: {type(exc).__name__}: {exc}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
