"""Tokenizer and operator-precedence term reader for the Prolog-like syntax."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .terms import (INFIX_OPS, ITE, NIL, PREFIX_OPS, RESERVED, Int, Struct,
                    Term, Var, make_list)

SYMBOL_CHARS = set("+-*/\\^<>=~:.?@#&$")
SOLO_CHARS = set("!;")
PUNCT = set("()[],|")


class ParseError(Exception):
    """Syntax or well-formedness error, optionally carrying a source position."""

    def __init__(self, message: str, line: Optional[int] = None, col: Optional[int] = None):
        self.message = message
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line is not None else ""
        super().__init__(where + message)


@dataclass
class Token:
    kind: str  # var | atom | qatom | int | punct | end | eof
    text: str
    line: int
    col: int
    end_line: int
    end_col: int
    space_before: bool


def tokenize(text: str) -> list[Token]:
    tokens = []
    i, line, col = 0, 1, 1
    n = len(text)
    space = True

    def advance(k: int) -> None:
        nonlocal i, line, col
        for _ in range(k):
            if text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        c = text[i]
        if c.isspace():
            advance(1)
            space = True
            continue
        if c == "%":
            while i < n and text[i] != "\n":
                advance(1)
            space = True
            continue
        if c == "/" and text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end < 0:
                raise ParseError("unterminated block comment", line, col)
            advance(end + 2 - i)
            space = True
            continue
        start_line, start_col, start = line, col, i
        if c.isdigit():
            while i < n and text[i].isdigit():
                advance(1)
            kind = "int"
        elif c.isalpha() or c == "_":
            while i < n and (text[i].isalnum() or text[i] == "_"):
                advance(1)
            kind = "var" if (c.isupper() or c == "_") else "atom"
        elif c == "'":
            advance(1)
            chars = []
            while True:
                if i >= n:
                    raise ParseError("unterminated quoted atom", start_line, start_col)
                ch = text[i]
                if ch == "\\" and i + 1 < n:
                    chars.append(text[i + 1])
                    advance(2)
                elif ch == "'":
                    if i + 1 < n and text[i + 1] == "'":
                        chars.append("'")
                        advance(2)
                    else:
                        advance(1)
                        break
                else:
                    chars.append(ch)
                    advance(1)
            tokens.append(Token("qatom", "".join(chars), start_line, start_col, line, col, space))
            space = False
            continue
        elif c == "." and (i + 1 >= n or text[i + 1].isspace() or text[i + 1] == "%"):
            advance(1)
            kind = "end"
        elif c in PUNCT:
            advance(1)
            kind = "punct"
        elif c in SOLO_CHARS:
            advance(1)
            kind = "atom"
        elif c in SYMBOL_CHARS:
            while i < n and text[i] in SYMBOL_CHARS:
                if text[i] == "." and (i + 1 >= n or text[i + 1].isspace() or text[i + 1] == "%"):
                    break
                advance(1)
            kind = "atom"
        else:
            raise ParseError(f"unexpected character {c!r}", line, col)
        tokens.append(Token(kind, text[start:i], start_line, start_col, line, col, space))
        space = False
    tokens.append(Token("eof", "", line, col, line, col, True))
    return tokens


class TermReader:
    """Reads a sequence of clause terms (each terminated by ``.``)."""

    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0
        self.anon = 0

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def error(self, message: str, tok: Optional[Token] = None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(message, tok.line, tok.col)

    def expect(self, kind: str, text: str) -> Token:
        tok = self.next()
        if tok.kind != kind or tok.text != text:
            found = tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}", tok)
        return tok

    def at_eof(self) -> bool:
        return self.peek().kind == "eof"

    def read_clause(self) -> Term:
        self.anon = 0
        term = self.parse(1200)
        tok = self.next()
        if tok.kind != "end":
            found = tok.text or "end of input"
            raise self.error(f"operator expected, found {found!r}", tok)
        return term

    def read_all(self) -> list[Term]:
        terms = []
        while not self.at_eof():
            terms.append(self.read_clause())
        return terms

    # -- precedence climbing ------------------------------------------------

    def _infix(self, tok: Token):
        if tok.kind == "atom" and tok.text in INFIX_OPS:
            return tok.text
        if tok.kind == "punct" and tok.text == ",":
            return ","
        return None

    def parse(self, max_prec: int) -> Term:
        left, left_prec = self.parse_primary(max_prec)
        while True:
            tok = self.peek()
            op = self._infix(tok)
            if op is None:
                break
            prio, kind = INFIX_OPS[op]
            left_max = prio if kind == "yfx" else prio - 1
            right_max = prio if kind == "xfy" else prio - 1
            if prio > max_prec or left_prec > left_max:
                break
            self.next()
            right = self.parse(right_max)
            left = Struct(op, (left, right), _join(left, right))
            left_prec = prio
        return left

    def _starts_term(self, tok: Token) -> bool:
        if tok.kind in ("var", "int", "qatom"):
            return True
        if tok.kind == "punct":
            return tok.text in ("(", "[")
        if tok.kind == "atom":
            return tok.text not in INFIX_OPS or tok.text in PREFIX_OPS
        return False

    def parse_primary(self, max_prec: int):
        tok = self.next()
        span = (tok.line, tok.col, tok.end_line, tok.end_col)
        if tok.kind == "int":
            return Int(int(tok.text), span), 0
        if tok.kind == "var":
            name = tok.text
            if name == "_":
                self.anon += 1
                name = f"_{self.anon}"
            return Var(name, span), 0
        if tok.kind == "punct" and tok.text == "(":
            inner = self.parse(1200)
            close = self.expect("punct", ")")
            return _respan(inner, (tok.line, tok.col, close.end_line, close.end_col)), 0
        if tok.kind == "punct" and tok.text == "[":
            return self._parse_list(tok), 0
        if tok.kind == "atom" and tok.text == "if":
            cond = self.parse(1100)
            self.expect("atom", "then")
            then = self.parse(1100)
            self.expect("atom", "else")
            else_ = self.parse(1100)
            return Struct(ITE, (cond, then, else_), _join_span(span, else_.span)), 0
        if tok.kind in ("atom", "qatom"):
            if tok.kind == "atom" and tok.text in RESERVED:
                raise self.error(f"unexpected {tok.text!r}", tok)
            name = tok.text
            nxt = self.peek()
            is_prefix = tok.kind == "atom" and name in PREFIX_OPS
            if name == "-" and nxt.kind == "int" and not nxt.space_before:
                self.next()
                return Int(-int(nxt.text), (tok.line, tok.col, nxt.end_line, nxt.end_col)), 0
            if nxt.kind == "punct" and nxt.text == "(" and (not nxt.space_before or not is_prefix):
                self.next()
                args = [self.parse(999)]
                while self.peek().kind == "punct" and self.peek().text == ",":
                    self.next()
                    args.append(self.parse(999))
                close = self.expect("punct", ")")
                return Struct(name, tuple(args), (tok.line, tok.col, close.end_line, close.end_col)), 0
            if is_prefix and self._starts_term(nxt) and not (nxt.kind == "atom" and nxt.text in INFIX_OPS and nxt.text not in PREFIX_OPS):
                prio, kind = PREFIX_OPS[name]
                arg_max = prio if kind == "fy" else prio - 1
                if prio > max_prec:
                    prio, arg_max = 999, 999
                arg = self.parse(arg_max)
                return Struct(name, (arg,), _join_span(span, arg.span)), prio
            prec = 0
            if tok.kind == "atom" and (name in INFIX_OPS or name in PREFIX_OPS):
                prec = min(max(INFIX_OPS.get(name, (0,))[0], PREFIX_OPS.get(name, (0,))[0]), max_prec)
            return Struct(name, (), span), prec
        found = tok.text or "end of input"
        raise self.error(f"unexpected {found!r}", tok)

    def _parse_list(self, open_tok: Token) -> Term:
        if self.peek().kind == "punct" and self.peek().text == "]":
            close = self.next()
            return Struct(NIL, (), (open_tok.line, open_tok.col, close.end_line, close.end_col))
        items = [self.parse(999)]
        tail = None
        while True:
            tok = self.peek()
            if tok.kind == "punct" and tok.text == ",":
                self.next()
                items.append(self.parse(999))
            elif tok.kind == "punct" and tok.text == "|":
                self.next()
                tail = self.parse(999)
                break
            else:
                break
        close = self.expect("punct", "]")
        result = make_list(items, tail)
        return _respan(result, (open_tok.line, open_tok.col, close.end_line, close.end_col))


def _join_span(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return (a[0], a[1], b[2], b[3])


def _join(left: Term, right: Term):
    return _join_span(left.span, right.span)


def _respan(term: Term, span) -> Term:
    if isinstance(term, Struct):
        return Struct(term.name, term.args, span)
    if isinstance(term, Int):
        return Int(term.value, span)
    return Var(term.name, span)


def parse_term(text: str) -> Term:
    """Parse a single term; a trailing ``.`` is optional."""
    reader = TermReader(text)
    term = reader.parse(1200)
    tok = reader.next()
    if tok.kind == "end":
        tok = reader.next()
    if tok.kind != "eof":
        raise reader.error(f"unexpected {tok.text!r} after term", tok)
    return term


def read_terms(text: str) -> list[Term]:
    return TermReader(text).read_all()
