"""Recursive-descent parser and exact evaluator for calculator expressions.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := NUMBER | "(" expr ")" | "[" expr "]" | "{" expr "}" | "{" NL-TEXT "}"

A ``{`` whose first non-blank character is a letter opens a natural-language
snippet that runs to the next ``}``; its value comes from the scripted table.
Arithmetic is done in :class:`decimal.Decimal`.
"""

from __future__ import annotations

import decimal
from dataclasses import dataclass
from decimal import Decimal
from typing import Union

from ata.errors import DivisionByZeroError, ExpressionSyntaxError
from ata.tracegen import nl

CLOSERS = {"(": ")", "[": "]", "{": "}"}
OPS = "+-*/"
_ALIASES = {"×": "*", "÷": "/", "−": "-", "–": "-"}
OP_NAMES = {"+": "add", "-": "subtract", "*": "multiply", "/": "divide"}
_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}

_CTX = decimal.Context(prec=28, traps=[decimal.InvalidOperation, decimal.DivisionByZero, decimal.Overflow])


@dataclass(frozen=True)
class Number:
    value: Decimal
    text: str

    def render(self) -> str:
        return self.text


@dataclass(frozen=True)
class BinOp:
    op: str
    left: ExpressionNode
    right: ExpressionNode

    def render(self) -> str:
        return f"{self.left.render()}{self.op}{self.right.render()}"


@dataclass(frozen=True)
class Group:
    bracket: str
    inner: ExpressionNode

    def render(self) -> str:
        return f"{self.bracket}{self.inner.render()}{CLOSERS[self.bracket]}"


@dataclass(frozen=True)
class NLSnippet:
    text: str
    value: Decimal

    def render(self) -> str:
        return "{" + self.text + "}"


ExpressionNode = Union[Number, BinOp, Group, NLSnippet]


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = "".join(_ALIASES.get(ch, ch) for ch in text)
        self.pos = 0

    def skip(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def parse(self) -> ExpressionNode:
        if not self.peek():
            raise ExpressionSyntaxError("empty expression", self.pos)
        node = self.expr()
        if self.peek():
            ch = self.peek()
            what = "unbalanced closing bracket" if ch in ")]}" else f"unexpected {ch!r}"
            raise ExpressionSyntaxError(what, self.pos)
        return node

    def expr(self) -> ExpressionNode:
        node = self.term()
        while self.peek() in ("+", "-") and self.peek():
            op = self.text[self.pos]
            self.pos += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> ExpressionNode:
        node = self.factor()
        while self.peek() in ("*", "/") and self.peek():
            op = self.text[self.pos]
            self.pos += 1
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> ExpressionNode:
        ch = self.peek()
        start = self.pos
        if not ch:
            raise ExpressionSyntaxError("dangling operator: expression ends early", start)
        if ch.isdigit() or ch == ".":
            end = start
            while end < len(self.text) and (self.text[end].isdigit() or self.text[end] == "."):
                end += 1
            literal = self.text[start:end]
            if literal.count(".") > 1 or literal == ".":
                raise ExpressionSyntaxError(f"bad number {literal!r}", start)
            self.pos = end
            return Number(Decimal(literal), literal)
        if ch in CLOSERS:
            self.pos += 1
            if ch == "{":
                self.skip()
                if self.pos < len(self.text) and self.text[self.pos].isalpha():
                    close = self.text.find("}", self.pos)
                    if close < 0:
                        raise ExpressionSyntaxError("unterminated natural-language snippet", start)
                    body = self.text[self.pos : close].strip()
                    self.pos = close + 1
                    return NLSnippet(body, nl.lookup(body))
            inner = self.expr()
            if self.peek() != CLOSERS[ch]:
                found = self.peek() or "end of input"
                raise ExpressionSyntaxError(f"expected {CLOSERS[ch]!r} to close {ch!r}, found {found!r}", self.pos)
            self.pos += 1
            return Group(ch, inner)
        if ch in OPS:
            raise ExpressionSyntaxError(f"dangling operator {ch!r}", start)
        raise ExpressionSyntaxError(f"unexpected {ch!r}", start)


def parse_expression(text: str) -> ExpressionNode:
    return _Parser(text).parse()


def evaluate(node: ExpressionNode) -> Decimal:
    if isinstance(node, Number):
        return node.value
    if isinstance(node, NLSnippet):
        return node.value
    if isinstance(node, Group):
        return evaluate(node.inner)
    left, right = evaluate(node.left), evaluate(node.right)
    if node.op == "+":
        return _CTX.add(left, right)
    if node.op == "-":
        return _CTX.subtract(left, right)
    if node.op == "*":
        return _CTX.multiply(left, right)
    if right == 0:
        raise DivisionByZeroError(f"division by zero in {node.render()!r}")
    return _CTX.divide(left, right)


def eval_expression(text: str) -> Decimal:
    """Parse and evaluate ``text`` exactly (28 significant digits for inexact quotients)."""
    return evaluate(parse_expression(text))


def format_value(value: Decimal) -> str:
    """Canonical text for a value: no exponent, trailing zeros trimmed."""
    if value == value.to_integral_value():
        return str(value.quantize(Decimal(1)))
    text = format(value.normalize(), "f")
    return text


def count_ops(node: ExpressionNode) -> int:
    if isinstance(node, BinOp):
        return 1 + count_ops(node.left) + count_ops(node.right)
    if isinstance(node, Group):
        return count_ops(node.inner)
    return 0


def has_nl(node: ExpressionNode) -> bool:
    if isinstance(node, NLSnippet):
        return True
    if isinstance(node, BinOp):
        return has_nl(node.left) or has_nl(node.right)
    if isinstance(node, Group):
        return has_nl(node.inner)
    return False
