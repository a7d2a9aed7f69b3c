"""Explicit-value abstract domain.

An :class:`AbstractAssignment` is a partial map from variable names to
integers.  Absent variables are unknown (top); a single flag marks the
contradicting (bottom) assignment.  All values are immutable.
"""
from __future__ import annotations

from types import MappingProxyType
from typing import Iterable, Mapping, Optional, Union

from .syntax import Assign, Assume, BinOp, Const, Expr, Neg, Nondet, Operation, Pred, Var


class _Top:
    __slots__ = ()

    def __repr__(self) -> str:
        return "TOP"

    def __str__(self) -> str:
        return "⊤"


class _Bottom:
    __slots__ = ()

    def __repr__(self) -> str:
        return "BOTTOM"

    def __str__(self) -> str:
        return "⊥"


TOP = _Top()
BOTTOM = _Bottom()

Value = Union[int, _Top]


class AbstractAssignment:
    """Partial variable assignment in canonical form (no top bindings)."""

    __slots__ = ("_bindings", "contradicting", "_hash")

    def __init__(self, bindings: Optional[Mapping[str, Value]] = None, contradicting: bool = False):
        if contradicting:
            self._bindings = {}
        else:
            self._bindings = {x: c for x, c in (bindings or {}).items() if c is not TOP}
            for x, c in self._bindings.items():
                if not isinstance(c, int) or isinstance(c, bool):
                    raise TypeError(f"binding {x}={c!r} is not an integer")
        self.contradicting = contradicting
        self._hash = None

    @property
    def bindings(self) -> Mapping[str, int]:
        return MappingProxyType(self._bindings)

    def defined(self) -> frozenset:
        return frozenset(self._bindings)

    def __getitem__(self, x: str) -> Value:
        return self._bindings.get(x, TOP)

    def __contains__(self, x: str) -> bool:
        return x in self._bindings

    def __len__(self) -> int:
        return len(self._bindings)

    def items(self):
        return self._bindings.items()

    def __eq__(self, other) -> bool:
        if not isinstance(other, AbstractAssignment):
            return NotImplemented
        return self.contradicting == other.contradicting and self._bindings == other._bindings

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.contradicting, frozenset(self._bindings.items())))
        return self._hash

    def __str__(self) -> str:
        if self.contradicting:
            return "⊥"
        return "{" + ", ".join(f"{x}={c}" for x, c in sorted(self._bindings.items())) + "}"

    def __repr__(self) -> str:
        return f"AbstractAssignment({self})"


EMPTY = AbstractAssignment()
CONTRADICTING = AbstractAssignment(contradicting=True)


def assignment(**bindings: int) -> AbstractAssignment:
    return AbstractAssignment(bindings)


# -- lattice and assignment algebra -----------------------------------------

def is_contradicting(v: AbstractAssignment) -> bool:
    return v.contradicting


def leq(v: AbstractAssignment, w: AbstractAssignment) -> bool:
    """Flat-lattice order: ``v`` is at least as strong as ``w``."""
    if v.contradicting:
        return True
    if w.contradicting or len(w) > len(v):
        return False
    vb = v._bindings
    return all(vb.get(x, TOP) == c for x, c in w._bindings.items())


def join(v: AbstractAssignment, w: AbstractAssignment) -> AbstractAssignment:
    if v.contradicting:
        return w
    if w.contradicting:
        return v
    wb = w._bindings
    return AbstractAssignment({x: c for x, c in v._bindings.items() if wb.get(x, TOP) == c})


def conj(v: AbstractAssignment, w: AbstractAssignment) -> AbstractAssignment:
    if v.contradicting or w.contradicting:
        return CONTRADICTING
    merged = dict(v._bindings)
    for x, c in w._bindings.items():
        if merged.setdefault(x, c) != c:
            return CONTRADICTING
    return AbstractAssignment(merged)


def implies(v: AbstractAssignment, w: AbstractAssignment) -> bool:
    # With top bindings erased this coincides with the lattice order.
    return leq(v, w)


def restrict(v: AbstractAssignment, variables: Iterable[str]) -> AbstractAssignment:
    if v.contradicting:
        return v
    keep = variables if isinstance(variables, (set, frozenset)) else set(variables)
    if all(x in keep for x in v._bindings):
        return v
    return AbstractAssignment({x: c for x, c in v._bindings.items() if x in keep})


def drop(v: AbstractAssignment, x: str) -> AbstractAssignment:
    """``v`` restricted to ``def(v) \\ {x}``."""
    if x not in v._bindings:
        return v
    return AbstractAssignment({y: c for y, c in v._bindings.items() if y != x})


def rename(v: AbstractAssignment, x: str, y: str) -> AbstractAssignment:
    if x not in v:
        raise ValueError(f"cannot rename {x}: not bound in {v}")
    if y in v:
        raise ValueError(f"cannot rename {x} to {y}: {y} already bound in {v}")
    b = dict(v._bindings)
    b[y] = b.pop(x)
    return AbstractAssignment(b)


def models(v: AbstractAssignment, store: Mapping[str, int]) -> bool:
    """True iff the concrete store lies in the concretization of ``v``."""
    if v.contradicting:
        return False
    return all(store[x] == c for x, c in v._bindings.items())


# -- expressions -------------------------------------------------------------

def c_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def c_mod(a: int, b: int) -> int:
    return a - b * c_div(a, b)


def arith(op: str, a: int, b: int) -> Optional[int]:
    """Apply a binary operator; ``None`` for division or modulo by zero."""
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if b == 0:
        return None
    return c_div(a, b) if op == "/" else c_mod(a, b)


def compare(op: str, a: int, b: int) -> bool:
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def _eval(e: Expr, b: Mapping[str, int]) -> Value:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return b.get(e.name, TOP)
    if isinstance(e, BinOp):
        left = _eval(e.left, b)
        if left is TOP:
            return TOP
        right = _eval(e.right, b)
        if right is TOP:
            return TOP
        r = arith(e.op, left, right)
        return TOP if r is None else r
    if isinstance(e, Neg):
        inner = _eval(e.operand, b)
        return TOP if inner is TOP else -inner
    if isinstance(e, Nondet):
        return TOP
    raise TypeError(f"not an expression: {e!r}")


def evaluate(e: Expr, v: AbstractAssignment):
    """Evaluate ``e`` under ``v``: an int, ``TOP``, or ``BOTTOM`` for contradicting ``v``."""
    if v.contradicting:
        return BOTTOM
    return _eval(e, v._bindings)


# -- strongest post ----------------------------------------------------------

def sp_assign(v: AbstractAssignment, target: str, value: Expr) -> AbstractAssignment:
    if v.contradicting:
        return v
    c = _eval(value, v._bindings)
    b = dict(v._bindings)
    if c is TOP:
        if target not in b:
            return v
        del b[target]
    else:
        if b.get(target) == c:
            return v
        b[target] = c
    return AbstractAssignment(b)


def sp_assume(v: AbstractAssignment, p: Pred) -> AbstractAssignment:
    """Strongest post of ``[p]``, deciding satisfiability syntactically.

    Fully evaluable comparisons are decided; ``x == e`` with ``x`` unknown
    and ``e`` evaluable binds ``x``; anything else leaves ``v`` unchanged.
    """
    if v.contradicting:
        return v
    b = v._bindings
    left = _eval(p.left, b)
    right = _eval(p.right, b)
    if left is not TOP and right is not TOP:
        return v if compare(p.op, left, right) else CONTRADICTING
    if p.op == "==":
        if isinstance(p.left, Var) and left is TOP and right is not TOP:
            return AbstractAssignment({**b, p.left.name: right})
        if isinstance(p.right, Var) and right is TOP and left is not TOP:
            return AbstractAssignment({**b, p.right.name: left})
    return v


def sp(op: Operation, v: AbstractAssignment) -> AbstractAssignment:
    if isinstance(op, Assign):
        return sp_assign(v, op.target, op.value)
    if isinstance(op, Assume):
        return sp_assume(v, op.pred)
    raise TypeError(f"not an operation: {op!r}")


def sp_seq(ops: Iterable[Operation], v: AbstractAssignment = EMPTY) -> AbstractAssignment:
    for op in ops:
        if v.contradicting:
            break
        v = sp(op, v)
    return v


# -- precisions --------------------------------------------------------------

Precision = frozenset
NO_VARIABLES: frozenset = frozenset()


class ProgramPrecision:
    """Location-indexed sets of tracked variables; unknown locations track nothing."""

    __slots__ = ("_map",)

    def __init__(self, mapping: Optional[Mapping] = None):
        self._map = {loc: frozenset(vs) for loc, vs in (mapping or {}).items() if vs}

    @classmethod
    def uniform(cls, locations: Iterable, variables: Iterable[str]) -> "ProgramPrecision":
        vs = frozenset(variables)
        return cls({loc: vs for loc in locations})

    def at(self, location) -> frozenset:
        return self._map.get(location, NO_VARIABLES)

    __getitem__ = at

    def union(self, other: "ProgramPrecision") -> "ProgramPrecision":
        merged = dict(self._map)
        for loc, vs in other._map.items():
            merged[loc] = merged.get(loc, NO_VARIABLES) | vs
        return ProgramPrecision(merged)

    __or__ = union

    def add(self, location, variables: Iterable[str]) -> "ProgramPrecision":
        return self.union(ProgramPrecision({location: variables}))

    def locations(self):
        return self._map.keys()

    def items(self):
        return self._map.items()

    def variables(self) -> frozenset:
        out = set()
        for vs in self._map.values():
            out |= vs
        return frozenset(out)

    def is_empty(self) -> bool:
        return not self._map

    def size(self) -> int:
        return sum(len(vs) for vs in self._map.values())

    def max_size(self) -> int:
        return max((len(vs) for vs in self._map.values()), default=0)

    def __le__(self, other: "ProgramPrecision") -> bool:
        return all(vs <= other.at(loc) for loc, vs in self._map.items())

    def __eq__(self, other) -> bool:
        return isinstance(other, ProgramPrecision) and self._map == other._map

    def __hash__(self):
        return hash(frozenset(self._map.items()))

    def __repr__(self) -> str:
        inner = ", ".join(f"{loc}: {{{', '.join(sorted(vs))}}}"
                          for loc, vs in sorted(self._map.items(), key=lambda kv: str(kv[0])))
        return f"ProgramPrecision({inner})"
