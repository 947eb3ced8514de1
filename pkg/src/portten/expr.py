"""Element-wise expression language for apply operations.

An apply expression is an assignment ``x = <expr>`` where ``<expr>`` uses the
operands ``x``, ``y``, ``z`` (as many as the arity declares), the scalar
``s``, float literals, ``+ - * /``, unary minus, parentheses and the
functions ``abs exp log sqrt tanh max min``.

The same AST is lowered to OpenCL C by :func:`to_c` and evaluated on host
arrays by :func:`evaluate`, so both backends agree on the grammar.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

OPERANDS = ("x", "y", "z")
SCALAR = "s"

FUNCTIONS = {
    # name: (arity, OpenCL C spelling, numpy ufunc)
    "abs": (1, "fabs", np.abs),
    "exp": (1, "exp", np.exp),
    "log": (1, "log", np.log),
    "sqrt": (1, "sqrt", np.sqrt),
    "tanh": (1, "tanh", np.tanh),
    "max": (2, "fmax", np.fmax),
    "min": (2, "fmin", np.fmin),
}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/(),=]))"
)


class ExpressionError(ValueError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Name:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


@dataclass(frozen=True)
class Assignment:
    target: str
    value: object
    source: str

    def names(self) -> set[str]:
        return _names(self.value)


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExpressionError(f"unexpected character {text[pos:].strip()[:1]!r} in {text!r}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind)))
        pos = m.end()
    tokens.append(("end", ""))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, value: str | None = None):
        tok = self.tokens[self.i]
        if value is not None and tok[1] != value:
            found = tok[1] or "end of expression"
            raise ExpressionError(f"expected {value!r}, found {found!r} in {self.text!r}")
        self.i += 1
        return tok

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return Neg(self.unary())
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.atom()

    def atom(self):
        kind, value = self.take()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if self.peek() == ("op", "("):
                if value not in FUNCTIONS:
                    raise ExpressionError(f"unknown function '{value}'")
                self.take("(")
                args = [self.expr()]
                while self.peek() == ("op", ","):
                    self.take()
                    args.append(self.expr())
                self.take(")")
                if len(args) != FUNCTIONS[value][0]:
                    raise ExpressionError(
                        f"{value}() takes {FUNCTIONS[value][0]} argument(s), got {len(args)}"
                    )
                return Call(value, tuple(args))
            return Name(value)
        if value == "(":
            node = self.expr()
            self.take(")")
            return node
        raise ExpressionError(f"unexpected {value or 'end of expression'!r} in {self.text!r}")


def parse(text: str, arity: int) -> Assignment:
    """Parse and validate ``x = ...`` against ``arity`` declared operands."""
    if not 1 <= arity <= len(OPERANDS):
        raise ExpressionError(f"arity must be 1..{len(OPERANDS)}, got {arity}")
    p = _Parser(text)
    kind, target = p.take()
    if kind != "name" or target != "x":
        raise ExpressionError(f"expression must assign to x: {text!r}")
    p.take("=")
    value = p.expr()
    if p.peek()[0] != "end":
        raise ExpressionError(f"trailing input {p.peek()[1]!r} in {text!r}")
    allowed = set(OPERANDS[:arity]) | {SCALAR}
    for name in sorted(_names(value)):
        if name not in allowed:
            raise ExpressionError(
                f"expression references undeclared operand '{name}' "
                f"(declared: {', '.join(sorted(allowed))})"
            )
    return Assignment(target, value, text)


def _names(node) -> set[str]:
    if isinstance(node, Name):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Neg):
        return _names(node.operand)
    if isinstance(node, BinOp):
        return _names(node.left) | _names(node.right)
    return set().union(*(_names(a) for a in node.args))


def _c_literal(value: float) -> str:
    text = str(np.float32(value))  # shortest text that round-trips in float32
    if "e" not in text and "." not in text and "inf" not in text:
        text += ".0"
    return text + "f"


def to_c(node) -> str:
    """OpenCL C text for an expression node (fully parenthesized)."""
    if isinstance(node, Assignment):
        return to_c(node.value)
    if isinstance(node, Num):
        return _c_literal(node.value)
    if isinstance(node, Name):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_c(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_c(node.left)} {node.op} {to_c(node.right)})"
    return f"{FUNCTIONS[node.func][1]}({', '.join(to_c(a) for a in node.args)})"


_BINOPS = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide}


def evaluate(node, env: dict[str, np.ndarray | np.float32]):
    """Evaluate in float32 over arrays/scalars bound in ``env``."""
    if isinstance(node, Assignment):
        return evaluate(node.value, env)
    if isinstance(node, Num):
        return np.float32(node.value)
    if isinstance(node, Name):
        return env[node.name]
    if isinstance(node, Neg):
        return np.negative(evaluate(node.operand, env))
    if isinstance(node, BinOp):
        with np.errstate(all="ignore"):
            return _BINOPS[node.op](evaluate(node.left, env), evaluate(node.right, env),
                                    dtype=np.float32)
    with np.errstate(all="ignore"):
        return FUNCTIONS[node.func][2](*(evaluate(a, env) for a in node.args), dtype=np.float32)
