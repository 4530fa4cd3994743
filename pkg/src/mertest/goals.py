"""Goal representation, conversion from terms and pretty printing."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Union

from .syntax import ParseError
from .terms import ITE, Int, Struct, Term, Var, format_term, term_vars

# Calls whose arguments are literal payloads, exempt from flattening and
# from mode analysis (apart from the plan variable of the switch goals).
INSTRUMENT_CALLS = {("log", 1), ("$switch", 2), ("$batch", 2)}


@dataclass(frozen=True)
class Unify:
    left: Term
    right: Term
    span: Optional[tuple] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple = ()
    span: Optional[tuple] = field(default=None, compare=False, repr=False)

    @property
    def indicator(self) -> tuple[str, int]:
        return (self.name, len(self.args))


@dataclass(frozen=True)
class Conj:
    goals: tuple
    span: Optional[tuple] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Disj:
    goals: tuple
    span: Optional[tuple] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Not:
    goal: "Goal"
    span: Optional[tuple] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class IfThenElse:
    cond: "Goal"
    then: "Goal"
    else_: "Goal"
    span: Optional[tuple] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Label:
    """A program point of the labelled form; executes as a no-op."""
    id: int


Goal = Union[Unify, Call, Conj, Disj, Not, IfThenElse, Label]

TRUE = Call("true")


def conj(goals: Sequence[Goal], span=None) -> Conj:
    """Build a conjunction, splicing nested conjunctions."""
    flat = []
    for g in goals:
        if isinstance(g, Conj):
            flat.extend(g.goals)
        else:
            flat.append(g)
    return Conj(tuple(flat), span)


def as_conj(goal: Goal) -> Conj:
    return goal if isinstance(goal, Conj) else Conj((goal,), getattr(goal, "span", None))


def term_to_goal(term: Term) -> Goal:
    """Convert a parsed body term into a goal tree."""
    span = term.span
    if isinstance(term, Var):
        raise ParseError(f"variable {term.name} used as a goal", *(span[:2] if span else (None, None)))
    if isinstance(term, Int):
        raise ParseError(f"integer {term.value} used as a goal", *(span[:2] if span else (None, None)))
    name, args = term.name, term.args
    if name == "," and len(args) == 2:
        return conj([term_to_goal(args[0]), term_to_goal(args[1])], span)
    if name == ";" and len(args) == 2:
        parts = []
        for side in (args[0], args[1]):
            g = term_to_goal(side)
            if isinstance(g, Disj) and side is args[1]:
                parts.extend(g.goals)
            else:
                parts.append(g)
        return Disj(tuple(as_conj(p) for p in parts), span)
    if name == "not" and len(args) == 1:
        return Not(as_conj(term_to_goal(args[0])), span)
    if name == ITE and len(args) == 3:
        c, t, e = (as_conj(term_to_goal(a)) for a in args)
        return IfThenElse(c, t, e, span)
    if name == "=" and len(args) == 2:
        left, right = args
        if not isinstance(left, Var) and isinstance(right, Var):
            left, right = right, left
        return Unify(left, right, span)
    return Call(name, tuple(args), span)


def goal_to_term(goal: Goal) -> Term:
    if isinstance(goal, Unify):
        return Struct("=", (goal.left, goal.right))
    if isinstance(goal, Call):
        return Struct(goal.name, goal.args)
    if isinstance(goal, Label):
        return Struct("log", (Int(goal.id),))
    if isinstance(goal, Conj):
        if not goal.goals:
            return Struct("true")
        terms = [goal_to_term(g) for g in goal.goals]
        result = terms[-1]
        for t in reversed(terms[:-1]):
            result = Struct(",", (t, result))
        return result
    if isinstance(goal, Disj):
        terms = [goal_to_term(g) for g in goal.goals]
        result = terms[-1]
        for t in reversed(terms[:-1]):
            result = Struct(";", (t, result))
        return result
    if isinstance(goal, Not):
        return Struct("not", (goal_to_term(goal.goal),))
    if isinstance(goal, IfThenElse):
        return Struct(ITE, (goal_to_term(goal.cond), goal_to_term(goal.then), goal_to_term(goal.else_)))
    raise TypeError(goal)


def atomic_vars(goal: Goal) -> Iterator[str]:
    """Variables of an atomic goal, skipping literal instrumentation payloads."""
    if isinstance(goal, Unify):
        yield from term_vars(goal.left)
        yield from term_vars(goal.right)
    elif isinstance(goal, Call):
        if goal.indicator == ("$switch", 2):
            yield from term_vars(goal.args[1])
        elif goal.indicator == ("log", 1):
            return
        else:
            for a in goal.args:
                yield from term_vars(a)


def goal_vars(goal: Goal) -> set:
    out: set = set()
    _collect_vars(goal, out)
    return out


def _collect_vars(goal: Goal, out: set) -> None:
    if isinstance(goal, (Unify, Call)):
        out.update(atomic_vars(goal))
    elif isinstance(goal, (Conj, Disj)):
        for g in goal.goals:
            _collect_vars(g, out)
    elif isinstance(goal, Not):
        _collect_vars(goal.goal, out)
    elif isinstance(goal, IfThenElse):
        _collect_vars(goal.cond, out)
        _collect_vars(goal.then, out)
        _collect_vars(goal.else_, out)


def subgoals(goal: Goal) -> Iterator[Goal]:
    """Pre-order traversal over all goals."""
    yield goal
    if isinstance(goal, (Conj, Disj)):
        for g in goal.goals:
            yield from subgoals(g)
    elif isinstance(goal, Not):
        yield from subgoals(goal.goal)
    elif isinstance(goal, IfThenElse):
        yield from subgoals(goal.cond)
        yield from subgoals(goal.then)
        yield from subgoals(goal.else_)


def strip_goal_spans(goal: Goal) -> Goal:
    from .terms import strip_spans
    if isinstance(goal, Unify):
        return Unify(strip_spans(goal.left), strip_spans(goal.right))
    if isinstance(goal, Call):
        return Call(goal.name, tuple(strip_spans(a) for a in goal.args))
    if isinstance(goal, Conj):
        return Conj(tuple(strip_goal_spans(g) for g in goal.goals))
    if isinstance(goal, Disj):
        return Disj(tuple(strip_goal_spans(g) for g in goal.goals))
    if isinstance(goal, Not):
        return Not(strip_goal_spans(goal.goal))
    if isinstance(goal, IfThenElse):
        return IfThenElse(strip_goal_spans(goal.cond), strip_goal_spans(goal.then),
                          strip_goal_spans(goal.else_))
    return goal


# -- layout printer -----------------------------------------------------------

class GoalWriter:
    """Prints goals one per line and records the span of every printed goal.

    ``spans`` maps ``id(goal)`` to ``(start_line, start_col, end_line, end_col)``
    relative to the text produced so far (1-based, end exclusive).
    """

    def __init__(self, indent: str = "    ", label_text=None):
        self.lines: list[str] = []
        self.current = ""
        self.indent = indent
        self.spans: dict = {}
        self.label_text = label_text or (lambda goal: f"log({goal.id})")

    def pos(self) -> tuple[int, int]:
        return (len(self.lines) + 1, len(self.current) + 1)

    def write(self, text: str) -> None:
        self.current += text

    def newline(self) -> None:
        self.lines.append(self.current)
        self.current = ""

    def text(self) -> str:
        lines = self.lines + ([self.current] if self.current else [])
        return "\n".join(lines) + ("\n" if lines else "")

    def goal(self, goal: Goal, depth: int) -> None:
        """Write ``goal`` starting on the current line at the given depth."""
        start = self.pos()
        pad = self.indent * depth
        if isinstance(goal, Conj):
            goals = goal.goals or (TRUE,)
            for i, g in enumerate(goals):
                if i:
                    self.write(",")
                    self.newline()
                    self.write(pad)
                self.goal(g, depth)
        elif isinstance(goal, Disj):
            self.write("(")
            for i, d in enumerate(goal.goals):
                self.newline()
                if i:
                    self.write(pad + ";")
                    self.newline()
                self.write(pad + self.indent)
                self.goal(d, depth + 1)
            self.newline()
            self.write(pad + ")")
        elif isinstance(goal, Not):
            self.write("not (")
            self.newline()
            self.write(pad + self.indent)
            self.goal(goal.goal, depth + 1)
            self.newline()
            self.write(pad + ")")
        elif isinstance(goal, IfThenElse):
            self.write("( if")
            for keyword, part in (("", goal.cond), ("then", goal.then), ("else", goal.else_)):
                if keyword:
                    self.newline()
                    self.write(pad + keyword)
                self.newline()
                self.write(pad + self.indent)
                self.goal(part, depth + 1)
            self.newline()
            self.write(pad + ")")
        elif isinstance(goal, Label):
            self.write(self.label_text(goal))
        else:
            self.write(format_term(goal_to_term(goal), 999))
        end = self.pos()
        self.spans[id(goal)] = (start[0], start[1], end[0], end[1])


def format_goal(goal: Goal, depth: int = 1) -> str:
    writer = GoalWriter()
    writer.goal(goal, depth)
    return writer.text().rstrip("\n")
