"""Terms of the object language: variables, integers and compound terms.

Lists use the fixed cons functor ``'[|]'/2`` with the atom ``[]`` as
terminator, so ``[1,2]`` is ``'[|]'(1, '[|]'(2, []))``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Union

CONS = "[|]"
NIL = "[]"
ITE = "$ite"  # term-level carrier for `if C then T else E`

Span = tuple  # (start_line, start_col, end_line, end_col), 1-based, end exclusive


@dataclass(frozen=True)
class Var:
    name: str
    span: Optional[Span] = field(default=None, compare=False, repr=False)

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Int:
    value: int
    span: Optional[Span] = field(default=None, compare=False, repr=False)

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Struct:
    name: str
    args: tuple = ()
    span: Optional[Span] = field(default=None, compare=False, repr=False)

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def indicator(self) -> tuple[str, int]:
        return (self.name, len(self.args))

    def __str__(self) -> str:
        return format_term(self)


Term = Union[Var, Int, Struct]


def atom(name: str) -> Struct:
    return Struct(name, ())


def make_list(items: Iterable[Term], tail: Optional[Term] = None) -> Term:
    items = list(items)
    result = tail if tail is not None else Struct(NIL)
    for item in reversed(items):
        result = Struct(CONS, (item, result))
    return result


def list_items(term: Term) -> Optional[list]:
    """Return the elements of a proper list, or None if ``term`` is not one."""
    items = []
    while isinstance(term, Struct) and term.name == CONS and term.arity == 2:
        items.append(term.args[0])
        term = term.args[1]
    if isinstance(term, Struct) and term.name == NIL and term.arity == 0:
        return items
    return None


def term_vars(term: Term) -> Iterator[str]:
    """Yield variable names in left-to-right order (duplicates included)."""
    if isinstance(term, Var):
        yield term.name
    elif isinstance(term, Struct):
        for arg in term.args:
            yield from term_vars(arg)


def is_ground(term: Term) -> bool:
    if isinstance(term, Var):
        return False
    if isinstance(term, Struct):
        return all(is_ground(a) for a in term.args)
    return True


def substitute(term: Term, env: dict) -> Term:
    """Replace bound variables by their values; free variables are kept."""
    if isinstance(term, Var):
        return env.get(term.name, term)
    if isinstance(term, Struct) and term.args:
        return Struct(term.name, tuple(substitute(a, env) for a in term.args), term.span)
    return term


def rename_vars(term: Term, mapping: dict) -> Term:
    if isinstance(term, Var):
        new = mapping.get(term.name)
        return Var(new, term.span) if new is not None else term
    if isinstance(term, Struct) and term.args:
        return Struct(term.name, tuple(rename_vars(a, mapping) for a in term.args), term.span)
    return term


def strip_spans(term: Term) -> Term:
    if isinstance(term, Var):
        return Var(term.name)
    if isinstance(term, Int):
        return Int(term.value)
    return Struct(term.name, tuple(strip_spans(a) for a in term.args))


# -- printing ---------------------------------------------------------------

# name -> (priority, type); mirrors the parser's table
INFIX_OPS = {
    ":-": (1200, "xfx"),
    "--->": (1179, "xfy"),
    ";": (1100, "xfy"),
    ",": (1000, "xfy"),
    "=": (700, "xfx"),
    "\\=": (700, "xfx"),
    "<": (700, "xfx"),
    ">": (700, "xfx"),
    "=<": (700, "xfx"),
    ">=": (700, "xfx"),
    "is": (700, "xfx"),
    "+": (500, "yfx"),
    "-": (500, "yfx"),
    "*": (400, "yfx"),
    "//": (400, "yfx"),
    "mod": (400, "yfx"),
}
PREFIX_OPS = {
    ":-": (1200, "fx"),
    "pred": (1150, "fx"),
    "mode": (1150, "fx"),
    "type": (1150, "fx"),
    "not": (900, "fy"),
    "-": (200, "fy"),
}
RESERVED = {"if", "then", "else"}

_PLAIN_ATOM = re.compile(r"^[a-z][A-Za-z0-9_]*$")
_SYMBOL_ATOM = re.compile(r"^[+\-*/\\^<>=~:.?@#&$]+$")


def format_atom(name: str) -> str:
    if name == NIL:
        return name
    if name in RESERVED:
        return "'" + name + "'"
    if _PLAIN_ATOM.match(name) or _SYMBOL_ATOM.match(name):
        return name
    return "'" + name.replace("\\", "\\\\").replace("'", "\\'") + "'"


def format_term(term: Term, max_priority: int = 1200) -> str:
    if isinstance(term, Var):
        return term.name
    if isinstance(term, Int):
        if term.value < 0 and max_priority < 200:
            return "(" + str(term.value) + ")"
        return str(term.value)
    if term.name == ITE and term.arity == 3:
        cond, then, else_ = (format_term(a, 1100) for a in term.args)
        return "(if " + cond + " then " + then + " else " + else_ + ")"
    items = list_items(term) if term.name == CONS else None
    if term.name == CONS and term.arity == 2:
        if items is not None:
            return "[" + ", ".join(format_term(i, 999) for i in items) + "]"
        heads = []
        cur = term
        while isinstance(cur, Struct) and cur.name == CONS and cur.arity == 2:
            heads.append(cur.args[0])
            cur = cur.args[1]
        return ("[" + ", ".join(format_term(h, 999) for h in heads)
                + " | " + format_term(cur, 999) + "]")
    if term.arity == 2 and term.name in INFIX_OPS:
        prio, kind = INFIX_OPS[term.name]
        left_max = prio if kind == "yfx" else prio - 1
        right_max = prio if kind == "xfy" else prio - 1
        left = format_term(term.args[0], left_max)
        right = format_term(term.args[1], right_max)
        sep = ", " if term.name == "," else " " + term.name + " "
        text = left + sep + right
        return "(" + text + ")" if prio > max_priority else text
    if term.arity == 1 and term.name in PREFIX_OPS and term.name != "-":
        prio, kind = PREFIX_OPS[term.name]
        arg_max = prio if kind == "fy" else prio - 1
        text = term.name + " " + format_term(term.args[0], arg_max)
        return "(" + text + ")" if prio > max_priority else text
    name = format_atom(term.name)
    if not term.args:
        if term.name in INFIX_OPS or term.name in PREFIX_OPS:
            return "(" + name + ")" if max_priority < 1200 else name
        return name
    return name + "(" + ", ".join(format_term(a, 999) for a in term.args) + ")"
