"""
Pratt parser for the expression DSL.

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' int)?
    base   := number | ident | ident '[' int ']' | ident '[' int ']' '(' expr ')'
            | '(' expr ')' | 'exp(' expr ')' | 'log(' expr ')'

u and x are reserved for lattice variables (u[k], x[k]) and, without a bracket,
for the continuous variables; h is the reserved spacing.
"""

import re
from typing import Iterator, List, NamedTuple

import sympy as sp

from .errors import ParseError, UnknownSymbolError
from .expr import H, LATTICE_STEMS, lattice_function, lattice_var

FUNCTIONS = {"exp": sp.exp, "log": sp.log}


class Token(NamedTuple):
    kind: str
    text: str
    line: int
    column: int


_TOKEN = re.compile(
    r"(?P<space>[ \t\r]+)|(?P<newline>\n)"
    r"|(?P<num>\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*'*)"
    r"|(?P<op>\*\*|[-+*/^()\[\]=])"
)

_BINDING_POWER = {"=": 0, "+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
_PREFIX_POWER = 25
_IMPLICIT_POWER = 25


def tokenize(text: str) -> Iterator[Token]:
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        column = pos - line_start + 1
        if match is None:
            raise ParseError(f"Unexpected character {text[pos]!r}", line, column, text)
        kind = match.lastgroup
        if kind == "newline":
            line, line_start = line + 1, match.end()
        elif kind != "space":
            value = match.group()
            yield Token(kind, "^" if value == "**" else value, line, column)
        pos = match.end()
    yield Token("eof", "", line, pos - line_start + 1)


class Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: List[Token] = list(tokenize(text))
        self.pos = 0

    def error(self, message: str, token: Token, cls=ParseError) -> ParseError:
        return cls(message, token.line, token.column, self.text)

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        if token.kind != "eof":
            self.pos += 1
        return token

    def expect(self, text: str) -> Token:
        token = self.advance()
        if token.text != text or token.kind == "eof":
            found = "end of input" if token.kind == "eof" else repr(token.text)
            raise self.error(f"Expected {text!r} but found {found}", token)
        return token

    def lbp(self, token: Token) -> int:
        if token.kind == "op":
            return _BINDING_POWER.get(token.text, 0)
        return 0

    def expression(self, rbp: int = 0) -> sp.Expr:
        left = self.nud(self.advance())
        while rbp < self.lbp(self.peek()):
            left = self.led(self.advance(), left)
        return left

    def nud(self, token: Token) -> sp.Expr:
        if token.kind == "num":
            value = sp.Rational(token.text)
            nxt = self.peek()
            if nxt.kind == "ident" or nxt.text == "(":
                return value * self.expression(_IMPLICIT_POWER)
            return value
        if token.kind == "ident":
            return self.identifier(token)
        if token.text == "(":
            inner = self.expression(0)
            self.expect(")")
            return inner
        if token.text == "-":
            return -self.expression(_PREFIX_POWER)
        if token.text == "+":
            return self.expression(_PREFIX_POWER)
        found = "end of input" if token.kind == "eof" else repr(token.text)
        raise self.error(f"Unexpected {found}", token)

    def led(self, token: Token, left: sp.Expr) -> sp.Expr:
        if token.text == "+":
            return left + self.expression(10)
        if token.text == "-":
            return left - self.expression(10)
        if token.text == "*":
            return left * self.expression(20)
        if token.text == "/":
            return left / self.expression(20)
        if token.text == "^":
            at = self.peek()
            exponent = self.expression(29)
            if not exponent.is_Integer:
                raise self.error(f"Exponent must be an integer, got {exponent}", at)
            return left**exponent
        raise self.error(f"Unexpected {token.text!r}", token)

    def offset(self) -> int:
        sign = 1
        token = self.advance()
        if token.text in ("-", "+"):
            sign = -1 if token.text == "-" else 1
            token = self.advance()
        if token.kind != "num" or not token.text.isdigit():
            raise self.error("Expected an integer offset", token)
        self.expect("]")
        return sign * int(token.text)

    def identifier(self, token: Token) -> sp.Expr:
        name = token.text
        stem = name.rstrip("'")
        order = len(name) - len(stem)
        nxt = self.peek()

        if nxt.text == "[":
            self.advance()
            offset = self.offset()
            if self.peek().text == "(":
                if stem in LATTICE_STEMS:
                    raise self.error(f"Lattice variable {stem} cannot be applied", token, UnknownSymbolError)
                self.advance()
                arg = self.expression(0)
                self.expect(")")
                return lattice_function(stem, offset, order)(arg)
            if stem in LATTICE_STEMS and not order:
                return lattice_var(stem, offset)
            raise self.error(
                f"Unknown symbol category {name}[{offset}]: use u[k], x[k] or an applied function f[k](...)",
                token,
                UnknownSymbolError,
            )

        if order:
            raise self.error(f"Derivative symbol {name} needs an offset and an argument", token, UnknownSymbolError)

        if nxt.text == "(":
            if name not in FUNCTIONS:
                raise self.error(f"Unknown function {name}", token, UnknownSymbolError)
            self.advance()
            arg = self.expression(0)
            self.expect(")")
            return FUNCTIONS[name](arg)

        if name in FUNCTIONS:
            raise self.error(f"Function {name} needs an argument", token, UnknownSymbolError)
        if name == "h":
            return H
        return sp.Symbol(name)

    def parse(self) -> sp.Expr:
        e = self.expression(0)
        token = self.peek()
        if token.kind != "eof":
            raise self.error(f"Unexpected {token.text!r}", token)
        return e

    def parse_equation(self) -> sp.Expr:
        lhs = self.expression(0)
        token = self.peek()
        if token.text == "=":
            self.advance()
            rhs = self.expression(0)
            token = self.peek()
            if token.kind != "eof":
                raise self.error(f"Unexpected {token.text!r}", token)
            return lhs - rhs
        if token.kind != "eof":
            raise self.error(f"Unexpected {token.text!r}", token)
        return lhs


def parse(text: str) -> sp.Expr:
    return Parser(text).parse()


def parse_equation(text: str) -> sp.Expr:
    """Parse "lhs = rhs" (or a bare expression) into lhs - rhs."""
    return Parser(text).parse_equation()
