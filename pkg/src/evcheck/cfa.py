"""Control-flow automata and lowering of parsed programs into them."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from . import parser as P
from .syntax import (Assign, Assume, BinOp, Const, Expr, Neg, Nondet, Operation, Pred, Var, has_nondet,
                     rename_expr, rename_pred)


@dataclass(frozen=True, order=True)
class Location:
    id: int
    line: int = field(compare=False)
    scope: str = field(compare=False)  # function instance, e.g. "main" or "f#2"

    def __str__(self) -> str:
        return f"N{self.id}"


@dataclass(frozen=True)
class Edge:
    source: Location
    op: Operation
    target: Location
    line: int = field(default=0, compare=False)

    def __str__(self) -> str:
        return f"{self.source} -{self.op}-> {self.target}"


@dataclass(frozen=True)
class VarInfo:
    name: str  # qualified name used in operations
    source_name: str
    scope: Optional[str]  # function instance, None for globals


@dataclass
class ControlFlowAutomaton:
    locations: tuple  # Location, sorted by id
    edges: tuple  # Edge
    variables: dict  # qualified name -> VarInfo
    instance_parent: dict  # instance -> enclosing instance (None for main)
    _out: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._out = {loc: [] for loc in self.locations}
        for e in self.edges:
            self._out[e.source].append(e)

    def successors(self, loc: Location) -> list:
        return self._out[loc]

    def location(self, ident: int) -> Location:
        return self.locations[ident]

    def locations_of(self, instance: str) -> frozenset:
        """Locations of ``instance`` including the callees inlined into it."""
        return frozenset(l for l in self.locations if self._within(l.scope, instance))

    def _within(self, scope: str, instance: str) -> bool:
        while scope is not None:
            if scope == instance:
                return True
            scope = self.instance_parent.get(scope)
        return False


@dataclass
class VerificationProblem:
    cfa: ControlFlowAutomaton
    initial: Location
    errors: frozenset
    name: str = "task"
    exit: Optional[Location] = None  # end of main, if reachable
    error_lines: dict = field(default_factory=dict)  # error location -> line of the error() call

    def is_target(self, loc: Location) -> bool:
        return loc in self.errors


def scope_of(variable: str, cfa: ControlFlowAutomaton) -> frozenset:
    """Locations where ``variable`` is in scope (all locations for globals)."""
    try:
        info = cfa.variables[variable]
    except KeyError:
        raise KeyError(f"unknown variable {variable!r}") from None
    if info.scope is None:
        return frozenset(cfa.locations)
    return cfa.locations_of(info.scope)


class _Builder:
    def __init__(self, program: P.Program):
        self.program = program
        self.lines: list[int] = []
        self.scopes: list[str] = []
        self.edges: list[tuple] = []  # (src, op, dst, line) over raw ids
        self.parent: dict[int, int] = {}
        self.errors: dict[int, int] = {}  # raw location -> error() line
        self.instance = "main"
        self.instance_parent: dict[str, Optional[str]] = {"main": None}
        self.counters: dict = {}  # function -> inlined instances, ("nondet", instance) -> temporaries
        self.variables: dict[str, VarInfo] = {}
        self.rename: Callable[[str], str] = lambda n: n
        self.ret_var: Optional[str] = None
        self.exit: int = -1
        self.loops: list[tuple[int, int]] = []  # (head, exit)

    # locations
    def new_loc(self, line: int) -> int:
        self.lines.append(line)
        self.scopes.append(self.instance)
        return len(self.lines) - 1

    def find(self, a: int) -> int:
        while a in self.parent:
            a = self.parent[a]
        return a

    def jump(self, a: int, b: int) -> int:
        """Merge location ``a`` (which has no outgoing edges) into ``b``."""
        a, b = self.find(a), self.find(b)
        if a != b:
            self.parent[a] = b
        return b

    def edge(self, src: int, op: Operation, line: int, dst: Optional[int] = None) -> int:
        if dst is None:
            dst = self.new_loc(line)
        self.edges.append((src, op, dst, line))
        return dst

    def declare(self, name: str, source_name: str, scope: Optional[str]):
        self.variables[name] = VarInfo(name, source_name, scope)

    # conditions
    def cond(self, c, src: int, t: int, f: int, line: int):
        if isinstance(c, Pred):
            p = rename_pred(c, self.rename)
            if has_nondet(p.left) or has_nondet(p.right):
                src, p = self.hoist_nondet(p, src, line)
            self.edge(src, Assume(p), line, t)
            self.edge(src, Assume(p.negate()), line, f)
        elif isinstance(c, P.And):
            mid = self.new_loc(line)
            self.cond(c.left, src, mid, f, line)
            self.cond(c.right, mid, t, f, line)
        elif isinstance(c, P.Or):
            mid = self.new_loc(line)
            self.cond(c.left, src, t, mid, line)
            self.cond(c.right, mid, t, f, line)
        elif isinstance(c, P.Not):
            self.cond(c.operand, src, f, t, line)
        else:
            raise TypeError(c)

    def hoist_nondet(self, p: Pred, src: int, line: int):
        """Move each ``nondet()`` of a predicate into a fresh temporary assigned just before it."""

        def lift(e: Expr) -> Expr:
            nonlocal src
            if isinstance(e, Nondet):
                key = ("nondet", self.instance)
                k = self.counters[key] = self.counters.get(key, 0) + 1
                name = f"{self.instance}::__nondet{k}"
                self.declare(name, f"__nondet{k}", self.instance)
                src = self.edge(src, Assign(name, Nondet()), line)
                return Var(name)
            if isinstance(e, Neg):
                return Neg(lift(e.operand))
            if isinstance(e, BinOp):
                return BinOp(e.op, lift(e.left), lift(e.right))
            return e

        p = Pred(p.op, lift(p.left), lift(p.right))
        return src, p

    # statements
    def expr(self, e: Expr) -> Expr:
        return rename_expr(e, self.rename)

    def block(self, stmts, cur: int) -> int:
        for s in stmts:
            cur = self.stmt(s, cur)
        return cur

    def stmt(self, s, cur: int) -> int:
        if isinstance(s, P.Block):
            return self.block(s.stmts, cur)
        if isinstance(s, P.Decl):
            name = self.rename(s.name)
            self.declare(name, s.name.split("::", 1)[1], self.instance)
            value = self.expr(s.init) if s.init is not None else Nondet()
            return self.edge(cur, Assign(name, value), s.line)
        if isinstance(s, P.AssignStmt):
            return self.edge(cur, Assign(self.rename(s.target), self.expr(s.value)), s.line)
        if isinstance(s, P.CallStmt):
            return self.call(s, cur)
        if isinstance(s, P.If):
            t, f = self.new_loc(s.line), self.new_loc(s.line)
            self.cond(s.cond, cur, t, f, s.line)
            t_end = self.stmt(s.then, t)
            f_end = self.stmt(s.orelse, f) if s.orelse is not None else f
            return self.jump(t_end, f_end)
        if isinstance(s, P.While):
            head = cur
            body, done = self.new_loc(s.line), self.new_loc(s.line)
            self.cond(s.cond, head, body, done, s.line)
            self.loops.append((head, done))
            body_end = self.stmt(s.body, body)
            self.loops.pop()
            self.jump(body_end, head)
            return done
        if isinstance(s, P.Break):
            self.jump(cur, self.loops[-1][1])
            return self.new_loc(s.line)
        if isinstance(s, P.Continue):
            self.jump(cur, self.loops[-1][0])
            return self.new_loc(s.line)
        if isinstance(s, P.Return):
            if s.value is not None and self.ret_var is not None:
                cur = self.edge(cur, Assign(self.ret_var, self.expr(s.value)), s.line)
            self.jump(cur, self.exit)
            return self.new_loc(s.line)
        if isinstance(s, P.ErrorCall):
            self.errors.setdefault(cur, s.line)
            return self.new_loc(s.line)
        if isinstance(s, P.AssumeStmt):
            ok, sink = self.new_loc(s.line), self.new_loc(s.line)
            self.cond(s.cond, cur, ok, sink, s.line)
            return ok
        raise TypeError(f"unknown statement {s!r}")

    def call(self, s: P.CallStmt, cur: int) -> int:
        target = self.rename(s.target) if s.target is not None else None
        if target is not None and target not in self.variables:
            # ``int r = f(...);`` declares r through the call
            self.declare(target, s.target.split("::", 1)[1], self.instance)
        func =self.program.functions.get(s.func)
        if func is None:
            # external function without body: its result is unknown
            if target is None:
                return cur
            return self.edge(cur, Assign(target, Nondet()), s.line)
        args = [self.expr(a) for a in s.args]
        k = self.counters[s.func] = self.counters.get(s.func, 0) + 1
        inst = f"{s.func}#{k}"
        prefix = f"{s.func}::"

        def callee_rename(n: str, inst=inst, prefix=prefix) -> str:
            return inst + "::" + n[len(prefix):] if n.startswith(prefix) else n

        saved = (self.instance, self.rename, self.ret_var, self.exit, self.loops)
        self.instance_parent[inst] = self.instance
        self.instance, self.rename, self.loops = inst, callee_rename, []
        for p, a in zip(func.params, args):
            name = callee_rename(p)
            self.declare(name, p.split("::", 1)[1], inst)
            cur = self.edge(cur, Assign(name, a), s.line)
        self.ret_var = None
        if target is not None:
            self.ret_var = f"{inst}::__ret"
            self.declare(self.ret_var, "__ret", inst)
            cur = self.edge(cur, Assign(self.ret_var, Nondet()), s.line)
        self.exit = self.new_loc(func.end_line)
        end = self.block(func.body.stmts, cur)
        exit_loc = self.jump(end, self.exit)
        ret_var = self.ret_var
        self.instance, self.rename, self.ret_var, self.exit, self.loops = saved
        if target is None:
            return exit_loc
        return self.edge(exit_loc, Assign(target, Var(ret_var)), s.line)

    def build(self) -> VerificationProblem:
        main = self.program.main
        entry = cur = self.new_loc(main.line)
        for g in self.program.globals:
            self.declare(g.name, g.name, None)
            value = g.init if g.init is not None else Const(0)
            cur = self.edge(cur, Assign(g.name, value), g.line)
        for p in main.params:
            self.declare(p, p.split("::", 1)[1], "main")
            cur = self.edge(cur, Assign(p, Nondet()), main.line)
        self.exit = self.new_loc(main.end_line)
        end = self.block(main.body.stmts, cur)
        self.jump(end, self.exit)
        return self.finish(self.find(entry), self.find(self.exit))

    def finish(self, entry: int, exit_: int):
        out: dict[int, list] = {}
        for src, op, dst, line in self.edges:
            out.setdefault(self.find(src), []).append((op, self.find(dst), line))
        reachable = {entry}
        queue = deque([entry])
        while queue:
            a = queue.popleft()
            for _, b, _ in out.get(a, ()):
                if b not in reachable:
                    reachable.add(b)
                    queue.append(b)
        order = sorted(reachable)
        locs = {raw: Location(i, self.lines[raw], self.scopes[raw]) for i, raw in enumerate(order)}
        edges = tuple(Edge(locs[a], op, locs[b], line)
                      for a in order for op, b, line in out.get(a, ()))
        error_lines = {}
        for e, line in self.errors.items():
            if self.find(e) in reachable:
                error_lines.setdefault(locs[self.find(e)], line)
        errors = frozenset(error_lines)
        for e in edges:
            assert e.source not in errors, "error locations have no outgoing edges"
        used = {l.scope for l in locs.values()}
        parents = {i: p for i, p in self.instance_parent.items() if i in used or i == "main"}
        cfa = ControlFlowAutomaton(tuple(locs[r] for r in order), edges, dict(self.variables), parents)
        return VerificationProblem(cfa, locs[entry], errors, exit=locs.get(exit_), error_lines=error_lines)


def build_cfa(program: P.Program, name: str = "task") -> VerificationProblem:
    problem = _Builder(program).build()
    problem.name = name
    return problem


def problem_from_source(source: str, name: str = "task") -> VerificationProblem:
    return build_cfa(P.parse(source), name)


def load_problem(path) -> VerificationProblem:
    path = Path(path)
    source = path.read_text(encoding="utf-8")
    try:
        return problem_from_source(source, path.stem)
    except P.ParseError as exc:
        exc.args = (f"{path}:{exc}",)
        raise
