"""Random generator of small, concretely bounded ``.ev`` programs.

Every loop runs a dedicated counter from 0 up to a constant of at most
``max_iterations``; the body never writes the counter.  Inputs come from
``nondet()`` pinned to ``{lo..hi}`` by an ``assume`` over a disjunction of
equalities, so a full-precision path replay sees concrete values only and
agrees with brute-force enumeration over the same range.
"""
from __future__ import annotations

import os
import random
from typing import Optional

SEED_ENV = "EVCHECK_SEED"
DEFAULT_SEED = 20120807


def seed_from_env(default: int = DEFAULT_SEED) -> int:
    value = os.environ.get(SEED_ENV)
    return int(value) if value not in (None, "") else default


class ProgramGenerator:
    def __init__(self, rng: random.Random, max_vars: int = 4, max_iterations: int = 6,
                 nondet_range: tuple = (0, 3), with_functions: bool = True):
        if not 2 <= max_vars <= 4:
            raise ValueError("max_vars must be between 2 and 4")
        self.rng = rng
        self.max_vars = max_vars
        self.max_iterations = max_iterations
        self.lo, self.hi = nondet_range
        self.with_functions = with_functions
        self.lines: list[str] = []

    # expressions
    def atom(self, names) -> str:
        if names and self.rng.random() < 0.7:
            return self.rng.choice(names)
        return str(self.rng.randint(-3, 3))

    def expr(self, names, depth: int = 0) -> str:
        r = self.rng.random()
        if depth >= 1 or r < 0.35:
            return self.atom(names)
        op = self.rng.choice(["+", "+", "-", "*"])
        if op == "*":
            return f"{self.atom(names)} * {self.rng.randint(-2, 2)}"
        return f"{self.atom(names)} {op} {self.expr(names, depth + 1)}"

    def pred(self, names) -> str:
        op = self.rng.choice(["==", "!=", "<", "<=", ">", ">="])
        x = self.rng.choice(names)
        return f"{x} {op} {self.atom([y for y in names if y != x])}"

    def cond(self, names) -> str:
        r = self.rng.random()
        if r < 0.6:
            return self.pred(names)
        if r < 0.8:
            return f"{self.pred(names)} && {self.pred(names)}"
        if r < 0.95:
            return f"{self.pred(names)} || {self.pred(names)}"
        return f"!({self.pred(names)})"

    # statements
    def emit(self, depth: int, text: str):
        self.lines.append("  " * depth + text)

    def statements(self, depth: int, writable, readable, counters, budget: int,
                   calls: bool, error_ok: bool):
        for _ in range(self.rng.randint(1, budget)):
            r = self.rng.random()
            if r < 0.45 or depth >= 3:
                x = self.rng.choice(writable)
                if calls and self.rng.random() < 0.25:
                    self.emit(depth, f"{x} = step({self.atom(readable)});")
                else:
                    self.emit(depth, f"{x} = {self.expr(readable)};")
            elif r < 0.7:
                self.emit(depth, f"if ({self.cond(readable)}) {{")
                self.statements(depth + 1, writable, readable, counters, 2, calls, error_ok)
                if self.rng.random() < 0.5:
                    self.emit(depth, "} else {")
                    self.statements(depth + 1, writable, readable, counters, 2, calls, error_ok)
                self.emit(depth, "}")
            elif r < 0.85 and counters:
                i = counters[0]
                bound = self.rng.randint(1, self.max_iterations)
                self.emit(depth, f"{i} = 0;")
                self.emit(depth, f"while ({i} < {bound}) {{")
                inner = [x for x in writable if x != i] or writable[:0]
                if inner:
                    self.statements(depth + 1, inner, readable, counters[1:], 2, calls, error_ok)
                if inner and self.rng.random() < 0.2:
                    self.emit(depth + 1, f"if ({self.pred(readable)}) {{ break; }}")
                self.emit(depth + 1, f"{i} = {i} + 1;")
                self.emit(depth, "}")
            elif error_ok and self.rng.random() < 0.5:
                self.emit(depth, f"if ({self.cond(readable)}) {{ error(); }}")

    def program(self) -> str:
        self.lines = []
        names = ["a", "b", "c", "d"][: self.rng.randint(2, self.max_vars)]
        counter = names[-1] if self.rng.random() < 0.6 else None
        calls = self.with_functions and self.rng.random() < 0.3
        if calls:
            k = self.rng.randint(-2, 2)
            self.lines += ["int step(int p) {", f"  if (p > {k}) {{", "    return p - 1;", "  }",
                           f"  return p + {self.rng.randint(1, 2)};", "}", ""]
        self.emit(0, "int main() {")
        pinned = " || ".join("{x} == %d" % v for v in range(self.lo, self.hi + 1))
        for x in names:
            if x != counter and self.rng.random() < 0.5:
                self.emit(1, f"int {x} = nondet();")
                self.emit(1, "assume(" + pinned.format(x=x) + ");")
            else:
                self.emit(1, f"int {x} = {self.rng.randint(-2, 2)};")
        data = [x for x in names if x != counter]
        self.statements(1, data, names, [counter] if counter else [], 4, calls, True)
        x = self.rng.choice(data)
        guard = f"{x} == {self.rng.randint(-4, 6)}"
        if self.rng.random() < 0.5:
            guard += f" && {self.pred(names)}"
        self.emit(1, f"if ({guard}) {{")
        self.emit(2, "error();")
        self.emit(1, "}")
        self.emit(1, "return 0;")
        self.emit(0, "}")
        return "\n".join(self.lines) + "\n"


def generate_programs(count: int, seed: Optional[int] = None, **options) -> list[str]:
    """``count`` program texts; the sequence depends only on ``seed`` (or $EVCHECK_SEED)."""
    rng = random.Random(seed_from_env() if seed is None else seed)
    gen = ProgramGenerator(rng, **options)
    return [gen.program() for _ in range(count)]
