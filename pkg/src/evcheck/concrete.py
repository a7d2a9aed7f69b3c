"""Concrete semantics: brute-force state enumeration and path replay.

These are the reference oracles the abstract analysis is checked against.
``nondet()`` ranges over a small finite set of values (``[0, 3]`` by
default), and so does a division or modulo by zero.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from . import parser as P
from .cfa import VerificationProblem
from .domain import arith, compare
from .syntax import Assign, Assume, BinOp, Const, Expr, Neg, Nondet, Pred, Var

DEFAULT_RANGE = (0, 1, 2, 3)


class EnumerationLimit(Exception):
    pass


def eval_choices(e: Expr, store, values: Sequence[int]) -> list[int]:
    """All concrete values of ``e`` in ``store`` when every nondet leaf ranges over ``values``."""
    if isinstance(e, Const):
        return [e.value]
    if isinstance(e, Var):
        return [store[e.name]]
    if isinstance(e, Nondet):
        return list(values)
    if isinstance(e, Neg):
        return [-x for x in eval_choices(e.operand, store, values)]
    if isinstance(e, BinOp):
        out = []
        for a in eval_choices(e.left, store, values):
            for b in eval_choices(e.right, store, values):
                r = arith(e.op, a, b)
                if r is None:
                    out.extend(values)
                else:
                    out.append(r)
        return list(dict.fromkeys(out))
    raise TypeError(e)


def eval_concrete(e: Expr, store, next_input: Callable[[], int]) -> Optional[int]:
    """Deterministic evaluation; nondet leaves draw from ``next_input``. ``None`` on division by zero."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return store[e.name]
    if isinstance(e, Nondet):
        return next_input()
    if isinstance(e, Neg):
        inner = eval_concrete(e.operand, store, next_input)
        return None if inner is None else -inner
    if isinstance(e, BinOp):
        a = eval_concrete(e.left, store, next_input)
        b = eval_concrete(e.right, store, next_input)
        if a is None or b is None:
            return None
        return arith(e.op, a, b)
    raise TypeError(e)


def holds(p: Pred, store) -> bool:
    """Truth of a nondet-free predicate in a total store."""
    a = eval_concrete(p.left, store, _no_input)
    b = eval_concrete(p.right, store, _no_input)
    return a is not None and b is not None and compare(p.op, a, b)


def _no_input() -> int:
    raise ValueError("nondet() inside a predicate")


def _freeze(store: dict) -> tuple:
    return tuple(sorted(store.items()))


def _project(store: dict, keep: Callable[[str], bool]) -> tuple:
    return tuple(sorted((x, c) for x, c in store.items() if keep(x)))


def is_observable(name: str) -> bool:
    """Globals and locals of main survive inlining under the same name.

    Temporaries introduced by the lowering (``main::__nondet1``) have no
    source counterpart and are left out.
    """
    if "::__" in name:
        return False
    return "::" not in name or name.startswith("main::")


@dataclass
class Exploration:
    states: int = 0
    error_reached: bool = False
    events: set = field(default_factory=set)  # ("error", line, store) / ("exit", store)

    @property
    def verdict(self) -> str:
        return "UNSAFE" if self.error_reached else "SAFE"


def explore_cfa(problem: VerificationProblem, values: Sequence[int] = DEFAULT_RANGE,
                max_states: int = 2_000_000) -> Exploration:
    """Enumerate every reachable concrete state of the CFA (breadth first)."""
    cfa = problem.cfa
    start = (problem.initial, ())
    seen = {start}
    queue = deque([start])
    result = Exploration()
    while queue:
        loc, frozen = queue.popleft()
        result.states += 1
        store = dict(frozen)
        if problem.is_target(loc):
            result.error_reached = True
            result.events.add(("error", problem.error_lines[loc], _project(store, is_observable)))
            continue
        if loc == problem.exit:
            result.events.add(("exit", _project(store, is_observable)))
        for edge in cfa.successors(loc):
            op = edge.op
            if isinstance(op, Assume):
                if holds(op.pred, store):
                    succs = [(edge.target, frozen)]
                else:
                    succs = []
            else:
                succs = []
                for c in eval_choices(op.value, store, values):
                    nxt = dict(store)
                    nxt[op.target] = c
                    succs.append((edge.target, _freeze(nxt)))
            for s in succs:
                if s not in seen:
                    if len(seen) >= max_states:
                        raise EnumerationLimit(f"more than {max_states} concrete states")
                    seen.add(s)
                    queue.append(s)
    return result


def concrete_verdict(problem: VerificationProblem, values: Sequence[int] = DEFAULT_RANGE,
                     max_states: int = 2_000_000) -> str:
    return explore_cfa(problem, values, max_states).verdict


def replay(ops: Iterable, inputs: Sequence[int]) -> Optional[list]:
    """Execute a constraint sequence concretely, feeding ``inputs`` to nondet leaves.

    Returns the list of stores after each operation, or ``None`` when an
    assumption fails (or a value is undefined).
    """
    it = iter(inputs)
    store: dict = {}
    trace = []
    for op in ops:
        try:
            if isinstance(op, Assign):
                c = eval_concrete(op.value, store, lambda: next(it, 0))
                if c is None:
                    return None
                store = {**store, op.target: c}
            elif not holds(op.pred, store):
                return None
        except KeyError:
            return None
        trace.append(store)
    return trace


# -- source-level interpreter (checks inlining) ------------------------------

class _Blocked(Exception):
    pass


class _ErrorReached(Exception):
    def __init__(self, line):
        self.line = line


class _Break(Exception):
    pass


class _Continue(Exception):
    pass


class _Return(Exception):
    def __init__(self, value):
        self.value = value


class _Interpreter:
    def __init__(self, program: P.Program, choose: Callable[[], int], values: Sequence[int],
                 max_steps: int):
        self.program = program
        self.choose = choose
        self.values = values
        self.steps = max_steps
        self.globals: dict = {}
        self.frames: list[dict] = []

    def lookup(self, name):
        if "::" in name:
            return self.frames[-1][name]
        return self.globals[name]

    def store(self, name, value):
        if "::" in name:
            self.frames[-1][name] = value
        else:
            self.globals[name] = value

    def eval(self, e: Expr) -> int:
        if isinstance(e, Const):
            return e.value
        if isinstance(e, Var):
            return self.lookup(e.name)
        if isinstance(e, Nondet):
            return self.choose()
        if isinstance(e, Neg):
            return -self.eval(e.operand)
        a, b = self.eval(e.left), self.eval(e.right)
        r = arith(e.op, a, b)
        return self.choose() if r is None else r

    def cond(self, c) -> bool:
        if isinstance(c, Pred):
            return compare(c.op, self.eval(c.left), self.eval(c.right))
        if isinstance(c, P.And):
            return self.cond(c.left) and self.cond(c.right)
        if isinstance(c, P.Or):
            return self.cond(c.left) or self.cond(c.right)
        return not self.cond(c.operand)

    def run(self):
        for g in self.program.globals:
            self.globals[g.name] = self.eval(g.init) if g.init is not None else 0
        main = self.program.main
        self.frames.append({p: self.choose() for p in main.params})
        try:
            self.block(main.body.stmts)
        except _Return:
            pass
        return self.observable()

    def observable(self) -> tuple:
        merged = dict(self.globals)
        merged.update(self.frames[0])
        return tuple(sorted(merged.items()))

    def block(self, stmts):
        for s in stmts:
            self.stmt(s)

    def stmt(self, s):
        self.steps -= 1
        if self.steps < 0:
            raise EnumerationLimit("interpreter step limit")
        if isinstance(s, P.Block):
            self.block(s.stmts)
        elif isinstance(s, P.Decl):
            self.store(s.name, self.eval(s.init) if s.init is not None else self.choose())
        elif isinstance(s, P.AssignStmt):
            self.store(s.target, self.eval(s.value))
        elif isinstance(s, P.CallStmt):
            self.call(s)
        elif isinstance(s, P.If):
            if self.cond(s.cond):
                self.stmt(s.then)
            elif s.orelse is not None:
                self.stmt(s.orelse)
        elif isinstance(s, P.While):
            while self.cond(s.cond):
                try:
                    self.stmt(s.body)
                except _Break:
                    break
                except _Continue:
                    continue
        elif isinstance(s, P.Break):
            raise _Break()
        elif isinstance(s, P.Continue):
            raise _Continue()
        elif isinstance(s, P.Return):
            raise _Return(self.eval(s.value) if s.value is not None else None)
        elif isinstance(s, P.ErrorCall):
            raise _ErrorReached(s.line)
        elif isinstance(s, P.AssumeStmt):
            if not self.cond(s.cond):
                raise _Blocked()
        else:
            raise TypeError(s)

    def call(self, s: P.CallStmt):
        func = self.program.functions.get(s.func)
        if func is None:
            if s.target is not None:
                self.store(s.target, self.choose())
            return
        args = [self.eval(a) for a in s.args]
        frame = dict(zip(func.params, args))
        self.frames.append(frame)
        value = None
        try:
            self.block(func.body.stmts)
        except _Return as r:
            value = r.value
        finally:
            self.frames.pop()
        if s.target is not None:
            # falling off the end yields an unknown value
            self.store(s.target, value if value is not None else self.choose())


def interpret_program(program: P.Program, values: Sequence[int] = DEFAULT_RANGE,
                      max_runs: int = 200_000, max_steps: int = 100_000) -> Exploration:
    """Run the program on every sequence of nondet choices; collect observable events."""
    result = Exploration()
    pending: list[list[int]] = [[]]
    runs = 0
    while pending:
        prefix = pending.pop()
        runs += 1
        if runs > max_runs:
            raise EnumerationLimit(f"more than {max_runs} runs")
        made: list[int] = []

        def choose() -> int:
            i = len(made)
            if i < len(prefix):
                v = prefix[i]
            else:
                v = values[0]
                for alt in values[1:]:
                    pending.append(made + [alt])
            made.append(v)
            return v

        interp = _Interpreter(program, choose, values, max_steps)
        try:
            final = interp.run()
            result.events.add(("exit", final))
        except _ErrorReached as e:
            result.error_reached = True
            result.events.add(("error", e.line, interp.observable()))
        except _Blocked:
            pass
        result.states += 1
    return result
