"""Tiny arithmetic expression grammar for reaction-term definitions.

Grammar (informal):

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right-associative
    atom    := NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')'

Identifiers are either variables (``s`` for scalar reactions, ``xi1``,
``xi2``, ... for gradient-dependent ones) or one of the functions
``abs``, ``min``, ``max``, ``exp``, ``log``.  Evaluation is vectorized
over numpy arrays.
"""

from __future__ import annotations

import re

import numpy as np

_FUNCTIONS = {
    "abs": (1, np.abs),
    "exp": (1, np.exp),
    "log": (1, np.log),
    "min": (2, np.minimum),
    "max": (2, np.maximum),
}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


class ExpressionError(ValueError):
    """Raised for malformed expressions; carries the offending position."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ExpressionError(f"unexpected character {stripped[0]!r}", pos)
        if m.group("num") is not None:
            tokens.append(("num", float(m.group("num")), m.start("num")))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class Expression:
    """Parsed arithmetic expression over a fixed set of variable names."""

    def __init__(self, source, variables):
        self.source = source
        self.variables = tuple(variables)
        self._ast = _Parser(source, set(self.variables)).parse()

    def __call__(self, **env):
        """Evaluate with keyword arrays/scalars, e.g. ``expr(s=values)``."""
        missing = set(self.variables) - env.keys()
        if missing:
            raise ExpressionError(
                f"missing variable(s) {sorted(missing)} for {self.source!r}", 0
            )
        return _eval(self._ast, env)

    def __repr__(self):
        return f"Expression({self.source!r}, variables={self.variables})"


class _Parser:
    def __init__(self, text, variables):
        self.text = text
        self.variables = variables
        self.tokens = _tokenize(text)
        self.i = 0

    def parse(self):
        node = self._expr()
        kind, value, pos = self.tokens[self.i]
        if kind != "end":
            raise ExpressionError(f"unexpected trailing token {value!r}", pos)
        return node

    def _peek(self):
        return self.tokens[self.i]

    def _advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def _expr(self):
        node = self._term()
        while self._peek()[:2] in (("op", "+"), ("op", "-")):
            op = self._advance()[1]
            node = ("add" if op == "+" else "sub", node, self._term())
        return node

    def _term(self):
        node = self._unary()
        while self._peek()[:2] in (("op", "*"), ("op", "/")):
            op = self._advance()[1]
            node = ("mul" if op == "*" else "div", node, self._unary())
        return node

    def _unary(self):
        if self._peek()[:2] == ("op", "-"):
            self._advance()
            return ("neg", self._unary())
        return self._power()

    def _power(self):
        base = self._atom()
        if self._peek()[:2] == ("op", "^"):
            self._advance()
            return ("pow", base, self._unary())
        return base

    def _atom(self):
        kind, value, pos = self._advance()
        if kind == "num":
            return ("const", value)
        if kind == "ident":
            if self._peek()[:2] == ("op", "("):
                return self._call(value, pos)
            if value not in self.variables:
                raise ExpressionError(f"unknown identifier {value!r}", pos)
            return ("var", value)
        if (kind, value) == ("op", "("):
            node = self._expr()
            self._expect(")")
            return node
        raise ExpressionError(f"unexpected token {value!r}", pos)

    def _call(self, name, pos):
        if name not in _FUNCTIONS:
            raise ExpressionError(f"unknown function {name!r}", pos)
        arity, _ = _FUNCTIONS[name]
        self._expect("(")
        args = [self._expr()]
        while self._peek()[:2] == ("op", ","):
            self._advance()
            args.append(self._expr())
        self._expect(")")
        if len(args) != arity:
            raise ExpressionError(
                f"{name} expects {arity} argument(s), got {len(args)}", pos
            )
        return ("call", name, args)

    def _expect(self, op):
        kind, value, pos = self._advance()
        if (kind, value) != ("op", op):
            raise ExpressionError(f"expected {op!r}, found {value!r}", pos)


def _eval(node, env):
    op = node[0]
    if op == "const":
        return node[1]
    if op == "var":
        return env[node[1]]
    if op == "neg":
        return -_eval(node[1], env)
    if op == "call":
        _, fn = _FUNCTIONS[node[1]]
        return fn(*(_eval(a, env) for a in node[2]))
    a = _eval(node[1], env)
    b = _eval(node[2], env)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    if op == "pow":
        return np.power(a, b)
    raise AssertionError(f"unhandled node {op}")
