"""Recursive-descent parser for the arithmetic used in problem files.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right associative
    atom    := NUMBER | VAR | CONST | FUNC '(' args ')' | '(' expr ')'

Variables are ``x1 .. xn`` (1-based). Evaluation follows IEEE semantics:
``log(-1)`` is NaN and ``1/0`` is +inf.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np


class ExprSyntaxError(ValueError):
    def __init__(self, msg: str, offset: int):
        super().__init__(f"{msg} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprSyntaxError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Node", ...]


Node = Union[Num, Var, Neg, BinOp, Call]

FUNCTIONS = {
    "sin": (1, np.sin), "cos": (1, np.cos), "exp": (1, np.exp), "log": (1, np.log),
    "abs": (1, np.abs), "sqrt": (1, np.sqrt),
    "max": (2, np.maximum), "min": (2, np.minimum),
}
CONSTANTS = {"pi": math.pi}

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
""", re.VERBOSE)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    out, pos = [], 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", len(src[:pos].encode()))
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group(), len(src[:pos].encode())))
        pos = m.end()
    out.append(("end", "", len(src.encode())))
    return out


class _Parser:
    def __init__(self, src: str, n: int | None):
        self.toks = _tokenize(src)
        self.i = 0
        self.n = n

    def peek(self):
        return self.toks[self.i]

    def take(self, text: str | None = None):
        tok = self.toks[self.i]
        if text is not None and tok[1] != text:
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ExprSyntaxError(f"expected {text!r}, found {what}", tok[2])
        self.i += 1
        return tok

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExprSyntaxError(f"unexpected {tok[1]!r}", tok[2])
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, text, off = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            var = re.fullmatch(r"x([1-9]\d*)", text)
            if var:
                idx = int(var.group(1))
                if self.n is not None and idx > self.n:
                    raise UnknownIdentifierError(f"variable {text} exceeds dimension {self.n}", off)
                return Var(idx)
            if text in CONSTANTS:
                return Num(CONSTANTS[text])
            if text in FUNCTIONS:
                arity = FUNCTIONS[text][0]
                self.take("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.take(")")
                if len(args) != arity:
                    raise ExprSyntaxError(f"{text} takes {arity} argument(s), got {len(args)}", off)
                return Call(text, tuple(args))
            raise UnknownIdentifierError(f"unknown identifier {text!r}", off)
        if text == "(":
            node = self.expr()
            self.take(")")
            return node
        what = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {what}", off)


def parse_expr(src: str, n: int | None = None) -> Node:
    """Parse ``src``; with ``n`` given, variables beyond x_n are rejected."""
    return _Parser(src, n).parse()


_BINOPS = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide, "^": np.power}


def eval_expr(node: Node, x) -> float:
    with np.errstate(all="ignore"):
        return float(_eval(node, np.asarray(x, dtype=float)))


def _eval(node: Node, x: np.ndarray) -> np.float64:
    if isinstance(node, Num):
        return np.float64(node.value)
    if isinstance(node, Var):
        return x[node.index - 1]
    if isinstance(node, Neg):
        return -_eval(node.arg, x)
    if isinstance(node, BinOp):
        return _BINOPS[node.op](_eval(node.left, x), _eval(node.right, x))
    return FUNCTIONS[node.name][1](*(_eval(a, x) for a in node.args))


def max_var(node: Node) -> int:
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Neg):
        return max_var(node.arg)
    if isinstance(node, BinOp):
        return max(max_var(node.left), max_var(node.right))
    if isinstance(node, Call):
        return max((max_var(a) for a in node.args), default=0)
    return 0


def to_source(node: Node) -> str:
    """Fully parenthesised source that reparses to the same tree."""
    if isinstance(node, Num):
        return repr(node.value) if node.value >= 0 else f"({node.value!r})"
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Neg):
        return f"(-{to_source(node.arg)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    return f"{node.name}({', '.join(to_source(a) for a in node.args)})"


@dataclass(frozen=True)
class CompiledExpr:
    """Callable wrapper so parsed expressions can serve as problem evaluators."""

    source: str
    ast: Node

    def __call__(self, x) -> float:
        return eval_expr(self.ast, x)
