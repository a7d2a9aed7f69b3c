"""CEGAR driver for the explicit-value analysis, plus the full-precision baseline."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

from .arg import (ARG, DEFAULT_STATE_BUDGET, Path, PrecisionNotRefined, StateBudgetExceeded,
                  TimeLimitExceeded, extract_error_path, prune_arg, reach)
from .cfa import VerificationProblem
from .concrete import replay
from .domain import EMPTY, AbstractAssignment, ProgramPrecision, sp
from .refine import is_feasible, path_eliminated, refine, scope_precision
from .syntax import Assign, Nondet, has_nondet

log = logging.getLogger(__name__)

MODES = ("explicit-cegar", "explicit-full")
REFINEMENTS = ("prune", "restart")
TRAVERSALS = ("dfs", "bfs")


@dataclass
class Config:
    mode: str = "explicit-cegar"
    refinement: str = "prune"
    scoped_precision: bool = True
    traversal: str = "dfs"
    state_budget: int = DEFAULT_STATE_BUDGET
    max_refinements: int = 100
    time_limit: Optional[float] = None  # seconds
    check_elimination: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.refinement not in REFINEMENTS:
            raise ValueError(f"refinement must be one of {REFINEMENTS}")
        if self.traversal not in TRAVERSALS:
            raise ValueError(f"traversal must be one of {TRAVERSALS}")
        if self.state_budget <= 0 or self.max_refinements <= 0:
            raise ValueError("budgets must be positive")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ValueError("time limit must be positive")


@dataclass(frozen=True)
class WitnessStep:
    line: int
    op: str
    state: AbstractAssignment


@dataclass
class Witness:
    path: Path
    steps: list
    inputs: list  # one value per nondet leaf executed along the path
    error_line: int
    final: AbstractAssignment
    confirmed: bool  # concrete replay with ``inputs`` reaches the error

    def render(self) -> str:
        """One ``line<TAB>operation<TAB>state`` row per step, then the error row."""
        lines = [f"{s.line}\t{s.op}\t{s.state}" for s in self.steps]
        inputs = ",".join(map(str, self.inputs))
        lines.append(f"{self.error_line}\terror()\t{self.final}\tinputs=[{inputs}] "
                     f"confirmed={'yes' if self.confirmed else 'no'}")
        return "\n".join(lines) + "\n"


def build_witness(problem: VerificationProblem, path: Path) -> Witness:
    """Full-precision replay of a feasible error path with a concrete input vector.

    A ``x := nondet()`` takes the value later forced on ``x`` by an
    equality, if any; unforced inputs default to 0.
    """
    v = EMPTY
    steps = []
    inputs: list[int] = []
    pending: dict[str, int] = {}  # variable -> index of the nondet input it holds
    for step in path.steps:
        op = step.op
        if isinstance(op, Assign):
            pending.pop(op.target, None)
            if has_nondet(op.value):
                if isinstance(op.value, Nondet):
                    pending[op.target] = len(inputs)
                inputs.append(0)
        v = sp(op, v)
        for x in [x for x in pending if x in v]:
            inputs[pending.pop(x)] = v[x]
        steps.append(WitnessStep(step.edge.line, str(op), v))
    confirmed = replay(path.ops, inputs) is not None
    last = path.steps[-1].location if path.steps else path.initial
    return Witness(path, steps, inputs, problem.error_lines.get(last, last.line), v, confirmed)


@dataclass
class Verdict:
    kind: str  # SAFE, UNSAFE, UNKNOWN
    reason: Optional[str] = None
    witness: Optional[Witness] = None

    def __str__(self) -> str:
        return f"UNKNOWN({self.reason})" if self.kind == "UNKNOWN" else self.kind


@dataclass
class AnalysisResult:
    verdict: Verdict
    refinements: int = 0
    arg_nodes_created: int = 0  # cumulative over restarts
    peak_arg_nodes: int = 0
    precision: ProgramPrecision = field(default_factory=ProgramPrecision)
    elapsed: float = 0.0
    refuted_paths: list = field(default_factory=list)
    elimination_violations: int = 0
    arg: Optional[ARG] = None


def cegar(problem: VerificationProblem, config: Optional[Config] = None) -> AnalysisResult:
    """Decide reachability of the problem's error locations."""
    config = config or Config()
    started = time.monotonic()
    deadline = started + config.time_limit if config.time_limit else None
    cfa = problem.cfa
    if config.mode == "explicit-full":
        precision = ProgramPrecision.uniform(cfa.locations, cfa.variables)
    else:
        precision = ProgramPrecision()
    result = AnalysisResult(Verdict("UNKNOWN", "internal"))
    arg = ARG(problem, precision)
    finished_created = 0

    def done(verdict: Verdict) -> AnalysisResult:
        result.verdict = verdict
        result.precision = precision
        result.arg = arg
        result.arg_nodes_created = finished_created + arg.created
        result.peak_arg_nodes = max(result.peak_arg_nodes, arg.peak)
        result.elapsed = time.monotonic() - started
        return result

    try:
        while True:
            budget = config.state_budget - finished_created  # shared across restarts
            outcome = reach(problem, arg, precision, config.traversal, budget, deadline)
            if outcome.exhausted:
                return done(Verdict("SAFE"))
            path = extract_error_path(arg, outcome.target)
            check = is_feasible(path)
            if check.feasible:
                return done(Verdict("UNSAFE", witness=build_witness(problem, path)))
            if config.mode == "explicit-full":
                return done(Verdict("UNKNOWN", "InfeasibleErrorPath"))
            if result.refinements >= config.max_refinements:
                return done(Verdict("UNKNOWN", "MaxRefinementsExceeded"))
            found = refine(path)
            if config.scoped_precision:
                found = scope_precision(found, cfa)
            if found.is_empty():
                return done(Verdict("UNKNOWN", "RefinementFailed"))
            refined = precision | found
            result.refinements += 1
            result.refuted_paths.append(path)
            log.debug("refinement %d: %s", result.refinements, found)
            if config.check_elimination and not path_eliminated(path, refined):
                result.elimination_violations += 1
                precision = refined
                return done(Verdict("UNKNOWN", "PathNotEliminated"))
            if config.refinement == "restart":
                if refined == precision:
                    return done(Verdict("UNKNOWN", "RefinementFailed"))
                precision = refined
                finished_created += arg.created
                result.peak_arg_nodes = max(result.peak_arg_nodes, arg.peak)
                arg = ARG(problem, precision)
            else:
                precision = refined
                try:
                    prune_arg(arg, precision, path)
                except PrecisionNotRefined:
                    return done(Verdict("UNKNOWN", "RefinementFailed"))
    except (StateBudgetExceeded, TimeLimitExceeded) as exc:
        return done(Verdict("UNKNOWN", exc.reason))
