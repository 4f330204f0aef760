"""Scalar coefficient functions as compiled postfix programs.

The model coefficients g, h, b act on the spectrum and must evaluate
identically in the compiled and pure-Python kernels, so they are not plain
Python callables: each one is parsed from a small expression grammar into a
postfix opcode array that both backends execute the same way.

Grammar (case sensitive)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | atom
    atom   := NUMBER | 'x' | '(' expr ')' | ('sqrt' | 'abs') '(' expr ')'

``sqrt`` of a negative value is NaN; wrap the argument in ``abs`` for the
absolute-value extensions the square-root diffusions use.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels

OP_X = 0
OP_ADD = 1
OP_SUB = 2
OP_MUL = 3
OP_DIV = 4
OP_NEG = 5
OP_SQRT = 6
OP_ABS = 7
OP_CONST_BASE = 8

_MAX_STACK = 16


class ExpressionError(ValueError):
    """Raised for syntax errors or unsupported constructs in an expression."""


class _Parser:
    def __init__(self, text):
        self.text = text
        self.pos = 0
        self.codes = []
        self.consts = []

    def error(self, msg):
        raise ExpressionError(f"{msg} at position {self.pos} in {self.text!r}")

    def peek(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def emit_const(self, value):
        self.consts.append(float(value))
        self.codes.append(OP_CONST_BASE + len(self.consts) - 1)

    def parse(self):
        self.expr()
        if self.peek():
            self.error("unexpected trailing input")
        return self.codes, self.consts

    def expr(self):
        self.term()
        while True:
            c = self.peek()
            if c == "+":
                self.pos += 1
                self.term()
                self.codes.append(OP_ADD)
            elif c == "-":
                self.pos += 1
                self.term()
                self.codes.append(OP_SUB)
            else:
                return

    def term(self):
        self.unary()
        while True:
            c = self.peek()
            if c == "*":
                self.pos += 1
                self.unary()
                self.codes.append(OP_MUL)
            elif c == "/":
                self.pos += 1
                self.unary()
                self.codes.append(OP_DIV)
            else:
                return

    def unary(self):
        if self.peek() == "-":
            self.pos += 1
            self.unary()
            self.codes.append(OP_NEG)
        else:
            self.atom()

    def atom(self):
        c = self.peek()
        if c == "(":
            self.pos += 1
            self.expr()
            if self.peek() != ")":
                self.error("expected ')'")
            self.pos += 1
            return
        if c.isalpha():
            start = self.pos
            while self.pos < len(self.text) and self.text[self.pos].isalpha():
                self.pos += 1
            name = self.text[start:self.pos]
            if name == "x":
                self.codes.append(OP_X)
                return
            if name in ("sqrt", "abs"):
                if self.peek() != "(":
                    self.error(f"expected '(' after {name}")
                self.pos += 1
                self.expr()
                if self.peek() != ")":
                    self.error("expected ')'")
                self.pos += 1
                self.codes.append(OP_SQRT if name == "sqrt" else OP_ABS)
                return
            self.error(f"unknown name {name!r}")
        if c.isdigit() or c == ".":
            start = self.pos
            while self.pos < len(self.text) and (self.text[self.pos].isdigit()
                                                 or self.text[self.pos] in ".eE"
                                                 or (self.text[self.pos] in "+-"
                                                     and self.text[self.pos - 1] in "eE")):
                self.pos += 1
            try:
                value = float(self.text[start:self.pos])
            except ValueError:
                self.pos = start
                self.error("bad number literal")
            self.emit_const(value)
            return
        self.error("expected a value")


def _stack_depth(codes):
    depth = 0
    peak = 0
    for c in codes:
        if c >= OP_CONST_BASE or c == OP_X:
            depth += 1
        elif c in (OP_ADD, OP_SUB, OP_MUL, OP_DIV):
            depth -= 1
        peak = max(peak, depth)
        if depth < 1:
            raise ExpressionError("malformed program (stack underflow)")
    if depth != 1:
        raise ExpressionError("malformed program (unbalanced stack)")
    return peak


@dataclass(frozen=True)
class ScalarFn:
    """A scalar function compiled to a postfix program.

    ``expr`` is the canonical source text; ``codes``/``consts`` are what the
    kernels execute.
    """

    expr: str
    codes: np.ndarray = field(repr=False, compare=False)
    consts: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def parse(cls, text):
        codes, consts = _Parser(text).parse()
        if _stack_depth(codes) > _MAX_STACK:
            raise ExpressionError(f"expression too deep: {text!r}")
        return cls(expr=text,
                   codes=np.asarray(codes, dtype=np.int32),
                   consts=np.asarray(consts, dtype=np.float64))

    @classmethod
    def constant(cls, value):
        return cls.parse(repr(float(value)))

    def squared(self):
        """The pointwise square, as a program evaluating self twice."""
        n = len(self.consts)
        codes2 = list(self.codes)
        for c in self.codes:
            codes2.append(int(c) + n if c >= OP_CONST_BASE else int(c))
        codes2.append(OP_MUL)
        if _stack_depth(codes2) > _MAX_STACK:
            raise ExpressionError(f"squared expression too deep: {self.expr!r}")
        return ScalarFn(expr=f"({self.expr})*({self.expr})",
                        codes=np.asarray(codes2, dtype=np.int32),
                        consts=np.concatenate([self.consts, self.consts])
                        if n else self.consts)

    def __call__(self, x):
        return kernels.eval_program(self.codes, self.consts, float(x))

    def program(self):
        """(codes, consts) pair as the kernels expect it."""
        return self.codes, self.consts
