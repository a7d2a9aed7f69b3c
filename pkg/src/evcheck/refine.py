"""Feasibility checking and interpolation-based precision refinement."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .arg import Path
from .cfa import ControlFlowAutomaton, scope_of
from .domain import (EMPTY, AbstractAssignment, ProgramPrecision, conj, drop, restrict, sp,
                     sp_seq)
from .syntax import Assume, Const, Pred, Var

# The interpolant for a prefix that is contradicting on its own.
FALSE_INTERPOLANT = (Assume(Pred("==", Const(0), Const(1))),)


@dataclass(frozen=True)
class Feasibility:
    final: AbstractAssignment  # strongest post of the whole path (contradicting if infeasible)
    pivot: Optional[int] = None  # 1-based index of the first operation yielding a contradiction

    @property
    def feasible(self) -> bool:
        return self.pivot is None


def is_feasible(path) -> Feasibility:
    """Replay a path (or plain operation sequence) with every variable tracked."""
    ops = path.ops if isinstance(path, Path) else list(path)
    v = EMPTY
    for i, op in enumerate(ops, 1):
        v = sp(op, v)
        if v.contradicting:
            return Feasibility(v, i)
    return Feasibility(v)


def interpolate_assignments(vminus: AbstractAssignment, vplus: AbstractAssignment) -> AbstractAssignment:
    """Interpolant for a contradicting pair of assignments, greedily minimized."""
    if vminus.contradicting or vplus.contradicting or not conj(vminus, vplus).contradicting:
        raise ValueError(f"no interpolant: {vminus} and {vplus} must be consistent "
                         "on their own and contradict each other")
    itp = restrict(vminus, vplus.defined())
    for x in sorted(itp.defined()):
        smaller = drop(itp, x)
        if conj(smaller, vplus).contradicting:
            itp = smaller
    return itp


def interpolate(gamma_minus: Sequence, gamma_plus: Sequence) -> tuple:
    """Interpolating constraint sequence ``<[x == c], ...>`` for a contradicting pair."""
    gamma_plus = list(gamma_plus)
    v = sp_seq(gamma_minus, EMPTY)
    if v.contradicting:
        return FALSE_INTERPOLANT
    if not sp_seq(gamma_plus, v).contradicting:
        raise ValueError("sequences are not contradicting")
    for x in sorted(v.defined()):
        weaker = drop(v, x)
        if sp_seq(gamma_plus, weaker).contradicting:
            v = weaker
    return tuple(Assume(Pred("==", Var(x), Const(c))) for x, c in sorted(v.items()))


def interpolant_assignment(gamma) -> AbstractAssignment:
    return sp_seq(gamma, EMPTY)


def refine(path: Path) -> ProgramPrecision:
    """Location-wise precision that suffices to exclude an infeasible path.

    Computes inductive interpolants along the path; a location visited
    several times collects the variables of every visit.
    """
    ops = path.ops
    if not sp_seq(ops, EMPTY).contradicting:
        raise ValueError("cannot refine a feasible path")
    found: dict = {}
    gamma: tuple = ()
    for i in range(len(ops) - 1):
        gamma = interpolate(gamma + (ops[i],), ops[i + 1:])
        tracked = interpolant_assignment(gamma).defined()
        if tracked:
            loc = path.steps[i].location
            found[loc] = found.get(loc, frozenset()) | tracked
    return ProgramPrecision(found)


def scope_precision(precision: ProgramPrecision, cfa: ControlFlowAutomaton) -> ProgramPrecision:
    """Extend every discovered variable to all locations of its scope."""
    out = {}
    for x in sorted(precision.variables()):
        for loc in scope_of(x, cfa):
            out.setdefault(loc, set()).add(x)
    return precision.union(ProgramPrecision(out))


def path_eliminated(path: Path, precision: ProgramPrecision) -> bool:
    """Replay ``path`` under ``precision``: True iff it stops before its last location."""
    v = restrict(EMPTY, precision.at(path.initial))
    for step in path.steps:
        v = sp(step.op, v)
        if v.contradicting:
            return True
        v = restrict(v, precision.at(step.location))
    return False
