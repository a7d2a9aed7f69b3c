"""Expression, predicate and operation types shared by every layer.

Expressions are immutable trees.  Variables are referenced by their
fully qualified name (``main::x``, ``f#2::a``, or a bare global name) once
the program has been lowered to a CFA; the parser produces source names.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union


@dataclass(frozen=True)
class Const:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Nondet:
    def __str__(self) -> str:
        return "nondet()"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"

    def __str__(self) -> str:
        return f"-{_wrap(self.operand)}"


ARITH_OPS = ("+", "-", "*", "/", "%")


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"

    def __post_init__(self):
        if self.op not in ARITH_OPS:
            raise ValueError(f"unknown arithmetic operator {self.op!r}")

    def __str__(self) -> str:
        return f"{_wrap(self.left)} {self.op} {_wrap(self.right)}"


Expr = Union[Const, Var, Nondet, Neg, BinOp]


def _wrap(e: Expr) -> str:
    return f"({e})" if isinstance(e, BinOp) else str(e)


COMPARISONS = ("==", "!=", "<", "<=", ">", ">=")

NEGATED = {"==": "!=", "!=": "==", "<": ">=", ">=": "<", ">": "<=", "<=": ">"}
MIRRORED = {"==": "==", "!=": "!=", "<": ">", ">": "<", "<=": ">=", ">=": "<="}


@dataclass(frozen=True)
class Pred:
    """A single comparison ``left op right``."""

    op: str
    left: Expr
    right: Expr

    def __post_init__(self):
        if self.op not in COMPARISONS:
            raise ValueError(f"unknown comparison {self.op!r}")

    def negate(self) -> "Pred":
        return Pred(NEGATED[self.op], self.left, self.right)

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


@dataclass(frozen=True)
class Assume:
    pred: Pred

    def __str__(self) -> str:
        return f"[{self.pred}]"


@dataclass(frozen=True)
class Assign:
    target: str
    value: Expr

    def __str__(self) -> str:
        return f"{self.target} := {self.value}"


Operation = Union[Assume, Assign]


def expr_vars(e: Expr) -> Iterator[str]:
    if isinstance(e, Var):
        yield e.name
    elif isinstance(e, Neg):
        yield from expr_vars(e.operand)
    elif isinstance(e, BinOp):
        yield from expr_vars(e.left)
        yield from expr_vars(e.right)


def has_nondet(e: Expr) -> bool:
    if isinstance(e, Nondet):
        return True
    if isinstance(e, Neg):
        return has_nondet(e.operand)
    if isinstance(e, BinOp):
        return has_nondet(e.left) or has_nondet(e.right)
    return False


def op_vars(op: Operation) -> set[str]:
    """Variables occurring syntactically in an operation."""
    if isinstance(op, Assign):
        return {op.target, *expr_vars(op.value)}
    return {*expr_vars(op.pred.left), *expr_vars(op.pred.right)}


def rename_expr(e: Expr, mapping) -> Expr:
    """Apply ``mapping`` (callable on names) to every variable in ``e``."""
    if isinstance(e, Var):
        return Var(mapping(e.name))
    if isinstance(e, Neg):
        return Neg(rename_expr(e.operand, mapping))
    if isinstance(e, BinOp):
        return BinOp(e.op, rename_expr(e.left, mapping), rename_expr(e.right, mapping))
    return e


def rename_pred(p: Pred, mapping) -> Pred:
    return Pred(p.op, rename_expr(p.left, mapping), rename_expr(p.right, mapping))
