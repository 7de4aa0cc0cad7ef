"""Recursive-descent parser for the co-safe LTL text grammar.

Grammar (precedence unary > U > & > |, U right-associative, & and |
left-associative)::

    or_expr    := and_expr ('|' and_expr)*
    and_expr   := until_expr ('&' until_expr)*
    until_expr := unary_expr ('U' until_expr)?
    unary_expr := '!' IDENT | 'X' unary_expr | 'F' unary_expr | atom
    atom       := 'true' | 'false' | IDENT | '(' or_expr ')'

Negation is accepted only directly on an identifier, which keeps every
accepted formula in the co-safe fragment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import (
    Alphabet,
    And,
    Eventually,
    FALSE,
    Formula,
    LtlError,
    Next,
    Not,
    Or,
    TRUE,
    Until,
)


class FormulaSyntaxError(LtlError):
    def __init__(self, message: str, position: int, expected: tuple[str, ...] = ()):
        self.position = position
        self.expected = expected
        detail = f" (expected {', '.join(expected)})" if expected else ""
        super().__init__(f"{message} at position {position}{detail}")


class NegationNotOnLiteral(LtlError):
    def __init__(self, position: int):
        self.position = position
        super().__init__(
            f"'!' must be applied directly to a proposition (position {position})"
        )


@dataclass(frozen=True, slots=True)
class _Token:
    kind: str
    text: str
    pos: int


_TOKEN_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|[&|!()]|\S")
_KEYWORDS = {"X": "NEXT", "F": "EVENTUALLY", "U": "UNTIL", "true": "TRUE", "false": "FALSE"}
_SYMBOLS = {"&": "AND", "|": "OR", "!": "NOT", "(": "LPAREN", ")": "RPAREN"}


def _lex(text: str) -> list[_Token]:
    tokens = []
    for m in _TOKEN_RE.finditer(text):
        lexeme = m.group(0)
        if lexeme in _SYMBOLS:
            kind = _SYMBOLS[lexeme]
        elif lexeme in _KEYWORDS:
            kind = _KEYWORDS[lexeme]
        elif re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", lexeme):
            kind = "IDENT"
        else:
            raise FormulaSyntaxError(f"unexpected character {lexeme!r}", m.start())
        tokens.append(_Token(kind, lexeme, m.start()))
    tokens.append(_Token("END", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, alphabet: Alphabet):
        self.tokens = _lex(text)
        self.alphabet = alphabet
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise FormulaSyntaxError(
                f"unexpected token {tok.text or '<end>'!r}", tok.pos, (what,)
            )
        return self.advance()

    def parse(self) -> Formula:
        phi = self.or_expr()
        tok = self.peek()
        if tok.kind != "END":
            raise FormulaSyntaxError(
                f"unexpected token {tok.text!r}", tok.pos, ("end of input",)
            )
        return phi

    def or_expr(self) -> Formula:
        phi = self.and_expr()
        while self.peek().kind == "OR":
            self.advance()
            phi = Or(phi, self.and_expr())
        return phi

    def and_expr(self) -> Formula:
        phi = self.until_expr()
        while self.peek().kind == "AND":
            self.advance()
            phi = And(phi, self.until_expr())
        return phi

    def until_expr(self) -> Formula:
        phi = self.unary_expr()
        if self.peek().kind == "UNTIL":
            self.advance()
            return Until(phi, self.until_expr())
        return phi

    def unary_expr(self) -> Formula:
        tok = self.peek()
        if tok.kind == "NOT":
            self.advance()
            ident = self.peek()
            if ident.kind != "IDENT":
                raise NegationNotOnLiteral(ident.pos)
            self.advance()
            return Not(self.alphabet.prop(ident.text))
        if tok.kind == "NEXT":
            self.advance()
            return Next(self.unary_expr())
        if tok.kind == "EVENTUALLY":
            self.advance()
            return Eventually(self.unary_expr())
        return self.atom()

    def atom(self) -> Formula:
        tok = self.advance()
        if tok.kind == "TRUE":
            return TRUE
        if tok.kind == "FALSE":
            return FALSE
        if tok.kind == "IDENT":
            return self.alphabet.prop(tok.text)
        if tok.kind == "LPAREN":
            phi = self.or_expr()
            self.expect("RPAREN", "')'")
            return phi
        raise FormulaSyntaxError(
            f"unexpected token {tok.text or '<end>'!r}",
            tok.pos,
            ("'true'", "'false'", "proposition", "'!'", "'X'", "'F'", "'('"),
        )


def parse(text: str, alphabet: Alphabet) -> Formula:
    """Parse a formula over the given alphabet.

    Raises FormulaSyntaxError, UnknownProposition or NegationNotOnLiteral.
    """
    return _Parser(text, alphabet).parse()


def infer_alphabet(text: str) -> Alphabet:
    """Alphabet of the identifiers in a formula text, in order of appearance."""
    names: list[str] = []
    for tok in _lex(text):
        if tok.kind == "IDENT" and tok.text not in names:
            names.append(tok.text)
    return Alphabet(names)
