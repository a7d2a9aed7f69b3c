"""Abstract reachability graph, the CPA reachability algorithm, and pruning."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, TextIO

from .cfa import Edge, Location, VerificationProblem
from .cpa import AbstractState, ExplicitCPA, stop_sep
from .domain import EMPTY, AbstractAssignment, ProgramPrecision, leq, restrict

DEFAULT_STATE_BUDGET = 1_000_000


class StateBudgetExceeded(Exception):
    reason = "StateBudgetExceeded"


class TimeLimitExceeded(Exception):
    reason = "TimeLimitExceeded"


class PrecisionNotRefined(Exception):
    """Pruning found no path node whose precision grows."""


@dataclass(eq=False)
class ArgNode:
    id: int
    state: AbstractState
    precision: frozenset
    parent: Optional[int] = None
    edge: Optional[Edge] = None
    children: dict = field(default_factory=dict)  # CFA edge -> child id
    covered_by: Optional[int] = None
    covers: set = field(default_factory=set)
    target: bool = False

    @property
    def location(self) -> Location:
        return self.state.location

    @property
    def data(self) -> AbstractAssignment:
        return self.state.data


@dataclass(frozen=True)
class PathStep:
    op: object
    location: Location
    node: int
    edge: Edge


@dataclass(frozen=True)
class Path:
    """Program path <(op1, l1), ..., (opn, ln)> starting at ``initial``."""

    initial: Location
    root: int
    steps: tuple

    @property
    def ops(self) -> list:
        return [s.op for s in self.steps]

    @property
    def locations(self) -> list:
        return [s.location for s in self.steps]

    @property
    def nodes(self) -> list:
        return [self.root] + [s.node for s in self.steps]

    def __len__(self) -> int:
        return len(self.steps)

    def __str__(self) -> str:
        return " ".join(f"{s.op}@{s.location}" for s in self.steps) or "<>"


class ARG:
    """Tree of abstract states with precision, plus the reached-set index and waitlist."""

    def __init__(self, problem: VerificationProblem, precision: ProgramPrecision,
                 cpa: Optional[ExplicitCPA] = None):
        self.problem = problem
        self.cpa = cpa or ExplicitCPA()
        self.nodes: dict[int, ArgNode] = {}
        self.waitlist: dict[int, None] = {}  # insertion-ordered set
        self._index: dict[Location, dict[frozenset, dict[AbstractAssignment, int]]] = {}
        self._next_id = 0
        self.created = 0
        self.peak = 0
        pi = precision.at(problem.initial)
        root = self._new_node(AbstractState(problem.initial, self.cpa.prec(EMPTY, pi)), pi, None, None)
        self.root = root.id
        if problem.is_target(problem.initial):
            root.target = True
        else:
            self._index_add(root)
            self.waitlist[root.id] = None

    # bookkeeping
    def _new_node(self, state, precision, parent, edge) -> ArgNode:
        node = ArgNode(self._next_id, state, frozenset(precision), parent, edge)
        self._next_id += 1
        self.nodes[node.id] = node
        self.created += 1
        self.peak = max(self.peak, len(self.nodes))
        if parent is not None:
            self.nodes[parent].children[edge] = node.id
        return node

    def _index_add(self, node: ArgNode):
        groups = self._index.setdefault(node.location, {})
        groups.setdefault(node.data.defined(), {}).setdefault(node.data, node.id)

    def _index_remove(self, node: ArgNode):
        groups = self._index.get(node.location, {})
        group = groups.get(node.data.defined())
        if group is not None and group.get(node.data) == node.id:
            del group[node.data]
            if not group:
                del groups[node.data.defined()]

    def reached_at(self, loc: Location) -> list:
        """Data states of uncovered reached nodes at ``loc``."""
        return [self.nodes[i].data for g in self._index.get(loc, {}).values() for i in g.values()]

    def covering(self, loc: Location, data: AbstractAssignment) -> Optional[int]:
        """Id of a reached node at ``loc`` whose state is weaker than ``data``."""
        if data.contradicting:
            return self.root
        defined = data.defined()
        for keys, group in self._index.get(loc, {}).items():
            if keys <= defined:
                hit = group.get(restrict(data, keys))
                if hit is not None:
                    return hit
        return None

    def push(self, node_id: int):
        self.waitlist.pop(node_id, None)
        self.waitlist[node_id] = None

    def pop(self, traversal: str) -> int:
        if traversal == "bfs":
            node_id = next(iter(self.waitlist))
            del self.waitlist[node_id]
            return node_id
        return self.waitlist.popitem()[0]

    def cover(self, node: ArgNode, by: int):
        node.covered_by = by
        self.nodes[by].covers.add(node.id)

    def remove_subtree(self, top: int):
        doomed = []
        stack = [top]
        while stack:
            n = self.nodes[stack.pop()]
            doomed.append(n)
            stack.extend(n.children.values())
        doomed_ids = {n.id for n in doomed}
        top_node = self.nodes[top]
        if top_node.parent is not None:
            del self.nodes[top_node.parent].children[top_node.edge]
        uncovered = []
        for n in doomed:
            self._index_remove(n)
            self.waitlist.pop(n.id, None)
            if n.covered_by is not None and n.covered_by not in doomed_ids:
                self.nodes[n.covered_by].covers.discard(n.id)
            for c in n.covers:
                if c not in doomed_ids:
                    uncovered.append(c)
            del self.nodes[n.id]
        for c in sorted(uncovered):
            node = self.nodes[c]
            node.covered_by = None
            self._index_add(node)
            self.push(c)

    # queries
    def path_to(self, node_id: int) -> Path:
        return extract_error_path(self, node_id)

    def check_wellformed(self):
        """Raise AssertionError if the tree/coverage invariants are broken."""
        assert self.root in self.nodes
        for n in self.nodes.values():
            if n.id == self.root:
                assert n.parent is None
            else:
                assert n.parent in self.nodes, f"node {n.id} has dangling parent"
                assert self.nodes[n.parent].children.get(n.edge) == n.id
            for e, c in n.children.items():
                assert self.nodes[c].parent == n.id and self.nodes[c].edge == e
            if n.covered_by is not None:
                assert not n.children, f"covered node {n.id} has children"
                cov = self.nodes[n.covered_by]
                assert cov.location == n.location and leq(n.data, cov.data)
                assert n.id not in self.waitlist
        assert set(self.waitlist) <= set(self.nodes)

    def dump(self, out: TextIO):
        """Write the ARG as a graphviz digraph, one node or edge per line."""
        out.write("digraph ARG {\n")
        for n in sorted(self.nodes.values(), key=lambda n: n.id):
            prec = "{" + ", ".join(sorted(n.precision)) + "}"
            extra = ""
            if n.covered_by is not None:
                extra = f" covered_by={n.covered_by}"
            if n.target:
                extra += " target"
            label = f"{n.id} @ {n.location} (line {n.location.line}) {n.data} pi={prec}{extra}"
            out.write(f'  n{n.id} [label="{_escape(label)}"];\n')
        for n in sorted(self.nodes.values(), key=lambda n: n.id):
            for e, c in n.children.items():
                out.write(f'  n{n.id} -> n{c} [label="{_escape(str(e.op))}"];\n')
            if n.covered_by is not None:
                out.write(f"  n{n.id} -> n{n.covered_by} [style=dashed];\n")
        out.write("}\n")


def _escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


@dataclass
class ReachResult:
    target: Optional[int]  # ARG node id of the target state, None when exhausted

    @property
    def exhausted(self) -> bool:
        return self.target is None


def reach(problem: VerificationProblem, arg: ARG, precision: ProgramPrecision,
          traversal: str = "dfs", budget: int = DEFAULT_STATE_BUDGET,
          deadline: Optional[float] = None) -> ReachResult:
    """Expand the ARG frontier until a target state is found or the waitlist is empty.

    ``budget`` caps the number of nodes this ARG has ever created.
    """
    cpa = arg.cpa
    cfa = problem.cfa
    fast_stop = cpa.stop is stop_sep
    if arg.nodes[arg.root].target:
        return ReachResult(arg.root)
    steps = 0
    while arg.waitlist:
        steps += 1
        if deadline is not None and steps % 256 == 0 and time.monotonic() > deadline:
            raise TimeLimitExceeded()
        node = arg.nodes[arg.pop(traversal)]
        for edge in cfa.successors(node.location):
            if edge in node.children:
                continue
            for succ in cpa.transfer(node.state, edge):
                pi = precision.at(succ.location)
                state = AbstractState(succ.location, cpa.prec(succ.data, pi))
                child = arg._new_node(state, pi, node.id, edge)
                if arg.created > budget:
                    raise StateBudgetExceeded()
                if problem.is_target(state.location):
                    child.target = True
                    # the parent may have unexplored edges left
                    arg.push(node.id)
                    return ReachResult(child.id)
                if cpa.joins:
                    _merge_into_reached(arg, child)
                if fast_stop:
                    cover = arg.covering(state.location, state.data)
                else:
                    cover = None
                    if cpa.stop(state.data, arg.reached_at(state.location), pi):
                        cover = _first_covering(arg, state)
                if cover is not None:
                    arg.cover(child, cover)
                else:
                    arg._index_add(child)
                    arg.push(child.id)
    return ReachResult(None)


def _first_covering(arg: ARG, state: AbstractState) -> int:
    for g in arg._index.get(state.location, {}).values():
        for data, i in g.items():
            if leq(state.data, data):
                return i
    return arg.root


def _merge_into_reached(arg: ARG, child: ArgNode):
    for g in list(arg._index.get(child.location, {}).values()):
        for data, i in list(g.items()):
            merged = arg.cpa.merge(child.data, data, child.precision)
            if merged != data:
                old = arg.nodes[i]
                for c in list(old.children.values()):
                    arg.remove_subtree(c)
                arg._index_remove(old)
                old.state = AbstractState(old.location, merged)
                arg._index_add(old)
                arg.push(i)


def extract_error_path(arg: ARG, node_id: int) -> Path:
    steps = []
    seen = set()
    node = arg.nodes[node_id]
    while node.parent is not None:
        if node.id in seen or node.parent not in arg.nodes:
            raise RuntimeError(f"broken parent chain at ARG node {node.id}")
        seen.add(node.id)
        steps.append(PathStep(node.edge.op, node.location, node.id, node.edge))
        node = arg.nodes[node.parent]
    if node.id != arg.root:
        raise RuntimeError(f"parent chain of {node_id} does not end at the root")
    return Path(node.location, node.id, tuple(reversed(steps)))


def prune_arg(arg: ARG, refined: ProgramPrecision, path: Path) -> int:
    """Cut the ARG below the highest path node whose precision grows.

    Returns the id of the node re-inserted into the waitlist.
    """
    for node_id in path.nodes:
        node = arg.nodes[node_id]
        if not refined.at(node.location) <= node.precision:
            break
    else:
        raise PrecisionNotRefined("refinement adds no variable along the path")
    if node.parent is None:
        for c in list(node.children.values()):
            arg.remove_subtree(c)
        node.precision = node.precision | refined.at(node.location)
        node.state = AbstractState(node.location, arg.cpa.prec(node.data, node.precision))
        arg.waitlist.clear()
        arg._index.clear()
        if not node.target:
            arg._index_add(node)
            arg.push(node.id)
        return node.id
    parent = arg.nodes[node.parent]
    arg.remove_subtree(node.id)
    parent.precision = parent.precision | refined.at(parent.location)
    arg.push(parent.id)
    return parent.id
