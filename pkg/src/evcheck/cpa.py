"""Composite location x explicit-value CPA operators."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .cfa import Edge, Location
from .domain import AbstractAssignment, leq, restrict, sp


@dataclass(frozen=True)
class AbstractState:
    location: Location
    data: AbstractAssignment

    def __str__(self) -> str:
        return f"({self.location}, {self.data})"


def transfer(state: AbstractState, edge: Edge) -> list:
    """Successors of ``state`` along ``edge``; empty when the result is contradicting."""
    if edge.source != state.location:
        raise ValueError(f"edge {edge} does not leave {state.location}")
    if state.data.contradicting:
        return []
    data = sp(edge.op, state.data)
    if data.contradicting:
        return []
    return [AbstractState(edge.target, data)]


def merge_sep(v: AbstractAssignment, w: AbstractAssignment, precision) -> AbstractAssignment:
    return w


def stop_sep(v: AbstractAssignment, reached: Iterable[AbstractAssignment], precision) -> bool:
    if v.contradicting:
        return True  # represents no concrete state
    return any(leq(v, w) for w in reached)


def prec_adjust(v: AbstractAssignment, precision) -> AbstractAssignment:
    return restrict(v, precision)


class ExplicitCPA:
    """Operator bundle used by the reachability algorithm.

    ``merge`` and ``stop`` can be swapped out; ``joins`` tells the
    reachability loop whether merging can ever change a reached state.
    """

    def __init__(self, merge=merge_sep, stop=stop_sep, prec=prec_adjust):
        self.transfer = transfer
        self.merge = merge
        self.stop = stop
        self.prec = prec

    @property
    def joins(self) -> bool:
        return self.merge is not merge_sep
