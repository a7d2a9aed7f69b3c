"""Recursive-descent parser for ``.ev`` programs.

The language is a small C subset: ``int`` globals and locals, assignment,
``if``/``else``, ``while``, ``break``/``continue``/``return``, non-recursive
functions, and the intrinsics ``nondet()``, ``error()`` and ``assume(c)``.
Names are resolved while parsing.  Locals come out qualified with their
function (``main::x``), globals stay bare.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

from .syntax import COMPARISONS, BinOp, Const, Expr, Neg, Nondet, Pred, Var

NONDET_NAMES = {"nondet", "__VERIFIER_nondet_int"}
ERROR_NAMES = {"error", "__VERIFIER_error", "reach_error"}
ASSUME_NAMES = {"assume", "__VERIFIER_assume"}
INTRINSICS = NONDET_NAMES | ERROR_NAMES | ASSUME_NAMES
KEYWORDS = {"int", "void", "if", "else", "while", "break", "continue", "return", "extern"}


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.message = message
        self.line = line
        self.col = col


class UndeclaredVariable(ParseError):
    pass


class RecursiveCall(ParseError):
    pass


# -- AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class And:
    left: "Cond"
    right: "Cond"


@dataclass(frozen=True)
class Or:
    left: "Cond"
    right: "Cond"


@dataclass(frozen=True)
class Not:
    operand: "Cond"


Cond = Union[Pred, And, Or, Not]


@dataclass
class Decl:
    name: str
    init: Optional[Expr]
    line: int


@dataclass
class AssignStmt:
    target: str
    value: Expr
    line: int


@dataclass
class CallStmt:
    """``f(args);`` or ``x = f(args);`` for a user-defined or external function."""

    target: Optional[str]
    func: str
    args: list
    line: int


@dataclass
class If:
    cond: Cond
    then: "Block"
    orelse: Optional["Block"]
    line: int


@dataclass
class While:
    cond: Cond
    body: "Block"
    line: int


@dataclass
class Break:
    line: int


@dataclass
class Continue:
    line: int


@dataclass
class Return:
    value: Optional[Expr]
    line: int


@dataclass
class ErrorCall:
    line: int


@dataclass
class AssumeStmt:
    cond: Cond
    line: int


@dataclass
class Block:
    stmts: list
    line: int


Stmt = Union[Decl, AssignStmt, CallStmt, If, While, Break, Continue, Return, ErrorCall, AssumeStmt, Block]


@dataclass
class Function:
    name: str
    returns_int: bool
    params: list  # qualified names
    body: Block
    line: int
    end_line: int
    locals: list = field(default_factory=list)  # qualified names, params first


@dataclass
class Program:
    globals: list  # list[Decl]
    functions: dict  # name -> Function
    externals: dict  # name -> (returns_int, arity or None)

    @property
    def main(self) -> Function:
        return self.functions["main"]


# -- lexer -------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<num>\d+)
  | (?P<id>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\+\+|--|\+=|-=|\*=|==|!=|<=|>=|&&|\|\||[-+*/%<>=!(){};,])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str  # 'num', 'id', 'op', 'eof'
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind, text = m.lastgroup, m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, text, line, pos - line_start + 1))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# -- raw expressions (before splitting into Expr / Cond) ---------------------

@dataclass(frozen=True)
class _Call:
    name: str
    args: tuple
    tok: Token


@dataclass(frozen=True)
class _Bin:
    op: str
    left: object
    right: object
    tok: Token


@dataclass(frozen=True)
class _Un:
    op: str
    operand: object
    tok: Token


_BINARY_PRECEDENCE = {
    "||": 1,
    "&&": 2,
    "==": 3, "!=": 3,
    "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5,
    "*": 6, "/": 6, "%": 6,
}


class Parser:
    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.i = 0
        self.globals: list[Decl] = []
        self.global_names: set[str] = set()
        self.functions: dict[str, Function] = {}
        self.externals: dict[str, tuple] = {}
        self.calls: list[tuple] = []  # (caller, callee, token, wants value, argc)
        # per-function state
        self.func: Optional[str] = None
        self.scopes: list[dict[str, str]] = []
        self.func_locals: list[str] = []
        self.loop_depth = 0
        self.func_returns_int = True

    # token helpers
    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "id") and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        return self.advance()

    def ident(self) -> Token:
        if self.tok.kind != "id" or self.tok.text in KEYWORDS:
            self.error(f"expected identifier, found {self.tok.text or 'end of input'!r}")
        return self.advance()

    def error(self, message: str, tok: Optional[Token] = None):
        tok = tok or self.tok
        raise ParseError(message, tok.line, tok.col)

    # top level
    def parse_program(self) -> Program:
        while self.tok.kind != "eof":
            self.accept("extern")
            if not (self.at("int") or self.at("void")):
                self.error(f"expected declaration, found {self.tok.text!r}")
            returns_int = self.advance().text == "int"
            name_tok = self.ident()
            if self.at("("):
                self.function(name_tok, returns_int)
            else:
                if not returns_int:
                    self.error("variables must have type int", name_tok)
                self.global_decls(name_tok)
        self.check_calls()
        if "main" not in self.functions:
            raise ParseError("no main function")
        return Program(self.globals, self.functions, self.externals)

    def global_decls(self, name_tok: Token):
        while True:
            name = name_tok.text
            if name in self.global_names or name in INTRINSICS:
                self.error(f"redeclaration of {name!r}", name_tok)
            init = None
            if self.accept("="):
                init = self.expr()
            self.global_names.add(name)
            self.globals.append(Decl(name, init, name_tok.line))
            if not self.accept(","):
                break
            name_tok = self.ident()
        self.expect(";")

    def function(self, name_tok: Token, returns_int: bool):
        name = name_tok.text
        self.expect("(")
        param_names = []
        if self.at("void") and self.peek().text == ")":
            self.advance()
        elif not self.at(")"):
            while True:
                self.expect("int")
                if self.tok.kind == "id" and self.tok.text not in KEYWORDS:
                    param_names.append(self.advance())
                if not self.accept(","):
                    break
        self.expect(")")
        if self.accept(";"):
            if name in INTRINSICS:
                return
            if name in self.functions or name in self.externals:
                self.error(f"redeclaration of function {name!r}", name_tok)
            self.externals[name] = (returns_int, len(param_names) if param_names else None)
            return
        if name in INTRINSICS or name in self.functions:
            self.error(f"redefinition of function {name!r}", name_tok)
        self.externals.pop(name, None)
        self.func = name
        self.func_returns_int = returns_int
        self.scopes = [{}]
        self.func_locals = []
        params = [self.declare(t) for t in param_names]
        body = self.block()
        end_line = self.tokens[self.i - 1].line
        self.functions[name] = Function(name, returns_int, params, body, name_tok.line, end_line,
                                        list(self.func_locals))
        self.func = None

    def declare(self, tok: Token) -> str:
        name = tok.text
        qualified = f"{self.func}::{name}"
        if name in INTRINSICS:
            self.error(f"cannot declare intrinsic {name!r}", tok)
        if qualified in self.func_locals:
            self.error(f"redeclaration of {name!r} in function {self.func!r}", tok)
        self.scopes[-1][name] = qualified
        self.func_locals.append(qualified)
        return qualified

    def resolve(self, tok: Token) -> str:
        for scope in reversed(self.scopes):
            if tok.text in scope:
                return scope[tok.text]
        if tok.text in self.global_names:
            return tok.text
        raise UndeclaredVariable(f"use of undeclared variable {tok.text!r}", tok.line, tok.col)

    # statements
    def block(self) -> Block:
        start = self.expect("{")
        self.scopes.append({})
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.error("unterminated block")
            stmts.extend(self.statement())
        self.expect("}")
        self.scopes.pop()
        return Block(stmts, start.line)

    def statement(self) -> list:
        t = self.tok
        if self.at("{"):
            return [self.block()]
        if self.accept(";"):
            return []
        if self.accept("int"):
            return self.local_decls()
        if self.accept("if"):
            self.expect("(")
            cond = self.cond()
            self.expect(")")
            then = self.as_block(self.statement(), t.line)
            orelse = None
            if self.accept("else"):
                orelse = self.as_block(self.statement(), t.line)
            return [If(cond, then, orelse, t.line)]
        if self.accept("while"):
            self.expect("(")
            cond = self.cond()
            self.expect(")")
            self.loop_depth += 1
            body = self.as_block(self.statement(), t.line)
            self.loop_depth -= 1
            return [While(cond, body, t.line)]
        if self.accept("break") or self.accept("continue"):
            if not self.loop_depth:
                self.error(f"{t.text!r} outside of a loop", t)
            self.expect(";")
            return [Break(t.line) if t.text == "break" else Continue(t.line)]
        if self.accept("return"):
            value = None
            if not self.at(";"):
                value = self.expr()
            self.expect(";")
            if value is not None and not self.func_returns_int:
                self.error("void function returns a value", t)
            return [Return(value, t.line)]
        if t.kind == "id" and t.text not in KEYWORDS:
            return [self.simple_statement()]
        self.error(f"unexpected {t.text or 'end of input'!r}")

    def as_block(self, stmts: list, line: int) -> Block:
        if len(stmts) == 1 and isinstance(stmts[0], Block):
            return stmts[0]
        return Block(stmts, line)

    def local_decls(self) -> list:
        out = []
        while True:
            name_tok = self.ident()
            init = None
            call = None
            if self.accept("="):
                if self.is_call_ahead():
                    call = self.call_parts()
                else:
                    init = self.expr()
            # the declared name is visible only after its initializer
            qualified = self.declare(name_tok)
            if call is not None:
                out.append(CallStmt(qualified, call[0], call[1], name_tok.line))
                self.record_call(call, want_value=True)
            else:
                out.append(Decl(qualified, init, name_tok.line))
            if not self.accept(","):
                break
        self.expect(";")
        return out

    def is_call_ahead(self) -> bool:
        t = self.tok
        return (t.kind == "id" and t.text not in KEYWORDS and t.text not in NONDET_NAMES
                and self.peek().text == "(")

    def call_parts(self):
        name_tok = self.advance()
        self.expect("(")
        args = []
        if not self.at(")"):
            while True:
                args.append(self.expr())
                if not self.accept(","):
                    break
        self.expect(")")
        return name_tok.text, args, name_tok

    def record_call(self, call, want_value: bool):
        callee, args, tok = call
        if callee in ERROR_NAMES or callee in ASSUME_NAMES:
            self.error(f"{callee}() has no value", tok)
        self.calls.append((self.func, callee, tok, want_value, len(args)))

    def simple_statement(self) -> Stmt:
        t = self.tok
        if t.text in ERROR_NAMES and self.peek().text == "(":
            self.advance()
            self.expect("(")
            self.expect(")")
            self.expect(";")
            return ErrorCall(t.line)
        if t.text in ASSUME_NAMES and self.peek().text == "(":
            self.advance()
            self.expect("(")
            cond = self.cond()
            self.expect(")")
            self.expect(";")
            return AssumeStmt(cond, t.line)
        if self.peek().text == "(":
            call = self.call_parts()
            self.expect(";")
            if call[0] in NONDET_NAMES:
                return Block([], t.line)
            self.record_call(call, want_value=False)
            return CallStmt(None, call[0], call[1], t.line)
        target_tok = self.ident()
        target = self.resolve(target_tok)
        if self.accept("++") or self.accept("--"):
            op = "+" if self.tokens[self.i - 1].text == "++" else "-"
            self.expect(";")
            return AssignStmt(target, BinOp(op, Var(target), Const(1)), t.line)
        for compound in ("+=", "-=", "*="):
            if self.accept(compound):
                value = self.expr()
                self.expect(";")
                return AssignStmt(target, BinOp(compound[0], Var(target), value), t.line)
        self.expect("=")
        if self.is_call_ahead():
            call = self.call_parts()
            self.expect(";")
            self.record_call(call, want_value=True)
            return CallStmt(target, call[0], call[1], t.line)
        value = self.expr()
        self.expect(";")
        return AssignStmt(target, value, t.line)

    def check_calls(self):
        for caller, callee, tok, want_value, argc in self.calls:
            if callee in self.functions:
                f = self.functions[callee]
                returns_int, arity = f.returns_int, len(f.params)
            elif callee in self.externals:
                returns_int, arity = self.externals[callee]
            else:
                raise ParseError(f"call to undeclared function {callee!r}", tok.line, tok.col)
            if want_value and not returns_int:
                raise ParseError(f"value of void function {callee!r} used", tok.line, tok.col)
            if callee == "main":
                raise RecursiveCall("main may not be called", tok.line, tok.col)
            if arity is not None and arity != argc:
                raise ParseError(f"{callee!r} expects {arity} argument(s)", tok.line, tok.col)
        graph: dict[str, set[str]] = {}
        for caller, callee, *_ in self.calls:
            if caller is not None and callee in self.functions:
                graph.setdefault(caller, set()).add(callee)
        state: dict[str, int] = {}

        def visit(fn, trail):
            state[fn] = 1
            for callee in sorted(graph.get(fn, ())):
                if state.get(callee) == 1:
                    cycle = " -> ".join(trail + [callee])
                    f = self.functions[callee]
                    raise RecursiveCall(f"recursive call detected: {cycle}", f.line, 1)
                if callee not in state:
                    visit(callee, trail + [callee])
            state[fn] = 2

        for fn in sorted(self.functions):
            if fn not in state:
                visit(fn, [fn])

    # expressions
    def raw(self, min_prec: int = 1):
        left = self.raw_unary()
        while self.tok.kind == "op" and _BINARY_PRECEDENCE.get(self.tok.text, 0) >= min_prec:
            op_tok = self.advance()
            right = self.raw(_BINARY_PRECEDENCE[op_tok.text] + 1)
            left = _Bin(op_tok.text, left, right, op_tok)
        return left

    def raw_unary(self):
        t = self.tok
        if self.accept("-"):
            return _Un("-", self.raw_unary(), t)
        if self.accept("+"):
            return self.raw_unary()
        if self.accept("!"):
            return _Un("!", self.raw_unary(), t)
        if self.accept("("):
            inner = self.raw()
            self.expect(")")
            return inner
        if t.kind == "num":
            self.advance()
            return Const(int(t.text))
        if t.kind == "id" and t.text not in KEYWORDS:
            if self.peek().text == "(":
                name, args, tok = self.call_parts()
                return _Call(name, tuple(args), tok)
            self.advance()
            return Var(self.resolve(t))
        self.error(f"expected expression, found {t.text or 'end of input'!r}")

    def expr(self) -> Expr:
        return self.to_expr(self.raw())

    def cond(self):
        return self.to_cond(self.raw())

    def to_expr(self, r) -> Expr:
        if isinstance(r, (Const, Var, Nondet)):
            return r
        if isinstance(r, (Neg, BinOp)):
            return r
        if isinstance(r, _Call):
            if r.name in NONDET_NAMES and not r.args:
                return Nondet()
            self.error("function calls are only allowed as statements or assignment right-hand sides", r.tok)
        if isinstance(r, _Un):
            if r.op == "-":
                inner = self.to_expr(r.operand)
                if isinstance(inner, Const):
                    return Const(-inner.value)
                return Neg(inner)
            self.error("boolean operator used as arithmetic value", r.tok)
        if isinstance(r, _Bin):
            if r.op in ("+", "-", "*", "/", "%"):
                return BinOp(r.op, self.to_expr(r.left), self.to_expr(r.right))
            self.error(f"boolean operator {r.op!r} used as arithmetic value", r.tok)
        raise AssertionError(r)

    def to_cond(self, r):
        if isinstance(r, _Bin):
            if r.op == "||":
                return Or(self.to_cond(r.left), self.to_cond(r.right))
            if r.op == "&&":
                return And(self.to_cond(r.left), self.to_cond(r.right))
            if r.op in COMPARISONS:
                return Pred(r.op, self.to_expr(r.left), self.to_expr(r.right))
        if isinstance(r, _Un) and r.op == "!":
            return Not(self.to_cond(r.operand))
        return Pred("!=", self.to_expr(r), Const(0))


def parse(source: str) -> Program:
    """Parse ``.ev`` source text into a resolved :class:`Program`."""
    return Parser(source).parse_program()
