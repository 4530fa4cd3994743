"""Programs: type, predicate and mode declarations plus clauses."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .goals import (INSTRUMENT_CALLS, Call, Conj, GoalWriter, as_conj,
                    strip_goal_spans, subgoals, term_to_goal)
from .syntax import ParseError, read_terms
from .terms import CONS, NIL, Struct, Term, Var, format_term, strip_spans


class Determinism(enum.Enum):
    DET = "det"
    SEMIDET = "semidet"
    MULTI = "multi"
    NONDET = "nondet"

    @property
    def can_fail(self) -> bool:
        return self in (Determinism.SEMIDET, Determinism.NONDET)

    @property
    def at_most_one(self) -> bool:
        return self in (Determinism.DET, Determinism.SEMIDET)


@dataclass(frozen=True)
class TypeExpr:
    name: str
    params: tuple = ()

    @property
    def is_var(self) -> bool:
        return self.name[:1].isupper() or self.name[:1] == "_"

    def __str__(self) -> str:
        if not self.params:
            return self.name
        return f"{self.name}({', '.join(str(p) for p in self.params)})"


@dataclass
class TypeDef:
    name: str
    params: tuple
    constructors: list  # [(functor, (TypeExpr, ...))]


@dataclass(frozen=True)
class ModeDecl:
    arg_modes: tuple  # "in" / "out" per argument
    determinism: Determinism

    def __str__(self) -> str:
        return f"({', '.join(self.arg_modes)}) is {self.determinism.value}"


@dataclass
class Clause:
    head_args: tuple
    body: Conj
    span: Optional[tuple] = None


@dataclass
class PredicateDef:
    name: str
    arity: int
    clauses: list = field(default_factory=list)
    modes: list = field(default_factory=list)
    type_sig: Optional[tuple] = None

    @property
    def indicator(self) -> tuple[str, int]:
        return (self.name, self.arity)


@dataclass
class Program:
    type_defs: dict = field(default_factory=dict)
    predicates: dict = field(default_factory=dict)  # (name, arity) -> PredicateDef


BUILTIN_TYPES = {
    "int": TypeDef("int", (), []),
    "list": TypeDef("list", (TypeExpr("T"),), [
        (NIL, ()),
        (CONS, (TypeExpr("T"), TypeExpr("list", (TypeExpr("T"),)))),
    ]),
}

# name/arity -> description; `=` is parsed into a unification goal
BUILTINS = {
    ("true", 0), ("fail", 0),
    ("<", 2), (">", 2), ("=<", 2), (">=", 2), ("\\=", 2),
    ("is", 2), ("length", 2), ("throw", 1), ("print", 1),
} | INSTRUMENT_CALLS


def is_builtin(indicator) -> bool:
    return tuple(indicator) in BUILTINS


def _pos(term: Term):
    return term.span[:2] if term.span else (None, None)


def term_to_type(term: Term) -> TypeExpr:
    if isinstance(term, Var):
        return TypeExpr(term.name)
    if isinstance(term, Struct):
        if term.name == CONS and term.arity == 2:
            # `[T]` is not type syntax; only `list(T)` is accepted
            raise ParseError("list syntax is not a type", *_pos(term))
        return TypeExpr(term.name, tuple(term_to_type(a) for a in term.args))
    raise ParseError(f"invalid type {format_term(term)}", *_pos(term))


def _check_type_arity(tx: TypeExpr, type_defs: dict, where) -> None:
    if tx.is_var:
        return
    tdef = type_defs.get(tx.name) or BUILTIN_TYPES.get(tx.name)
    if tdef is None:
        raise ParseError(f"unknown type {tx.name}", *where)
    if len(tdef.params) != len(tx.params):
        raise ParseError(f"type {tx.name} expects {len(tdef.params)} parameter(s)", *where)
    for p in tx.params:
        _check_type_arity(p, type_defs, where)


def _parse_type_decl(term: Term, program: Program) -> None:
    if not (isinstance(term, Struct) and term.name == "--->" and term.arity == 2):
        raise ParseError("expected `:- type Name ---> Constructors`", *_pos(term))
    head_decl, body = term.args
    if not (isinstance(head_decl, Struct) and head_decl.name == "type" and head_decl.arity == 1):
        raise ParseError("malformed type declaration", *_pos(term))
    head = head_decl.args[0]
    if not isinstance(head, Struct):
        raise ParseError("type name must be an atom or compound", *_pos(head))
    params = tuple(term_to_type(p) for p in head.args)
    if not all(p.is_var and not p.params for p in params):
        raise ParseError("type parameters must be variables", *_pos(head))
    alternatives = []
    while isinstance(body, Struct) and body.name == ";" and body.arity == 2:
        alternatives.append(body.args[0])
        body = body.args[1]
    alternatives.append(body)
    constructors = []
    for alt in alternatives:
        if not isinstance(alt, Struct):
            raise ParseError("constructor must be an atom or compound", *_pos(alt))
        constructors.append((alt.name, tuple(term_to_type(a) for a in alt.args)))
    if head.name in program.type_defs:
        raise ParseError(f"duplicate type declaration {head.name}", *_pos(head))
    program.type_defs[head.name] = TypeDef(head.name, params, constructors)


def _predicate(program: Program, name: str, arity: int) -> PredicateDef:
    key = (name, arity)
    if key not in program.predicates:
        program.predicates[key] = PredicateDef(name, arity)
    return program.predicates[key]


def parse_program(text: str, check_calls: bool = True) -> Program:
    """Parse program text into a :class:`Program`.

    Raises :class:`ParseError` on syntax errors, duplicate mode declarations,
    head arity mismatches and (when ``check_calls``) undefined predicates.
    """
    program = Program()
    declared_arity: dict = {}
    type_terms = []
    for term in read_terms(text):
        if isinstance(term, Struct) and term.name == ":-" and term.arity == 1:
            decl = term.args[0]
            if isinstance(decl, Struct) and decl.name == "pred" and decl.arity == 1:
                head = decl.args[0]
                if not isinstance(head, Struct):
                    raise ParseError("malformed pred declaration", *_pos(decl))
                pred = _predicate(program, head.name, head.arity)
                if pred.type_sig is not None:
                    raise ParseError(f"duplicate pred declaration {head.name}/{head.arity}", *_pos(head))
                pred.type_sig = tuple(term_to_type(a) for a in head.args)
                type_terms.append((pred.type_sig, _pos(head)))
                declared_arity.setdefault(head.name, set()).add(head.arity)
            elif isinstance(decl, Struct) and decl.name == "mode" and decl.arity == 1:
                _parse_mode_decl(decl.args[0], program, declared_arity)
            elif isinstance(decl, Struct) and decl.name == "--->":
                _parse_type_decl(decl, program)
            else:
                raise ParseError("unknown declaration", *_pos(term))
            continue
        if isinstance(term, Struct) and term.name == ":-" and term.arity == 2:
            head, body_term = term.args
            body = as_conj(term_to_goal(body_term))
        else:
            head, body = term, Conj((Call("true"),))
        if not isinstance(head, Struct):
            raise ParseError("clause head must be an atom or compound term", *_pos(head))
        if head.name in (",", ";", "=", "not") or is_builtin(head.indicator):
            raise ParseError(f"cannot define builtin {head.name}/{head.arity}", *_pos(head))
        pred = _predicate(program, head.name, head.arity)
        pred.clauses.append(Clause(tuple(head.args), body, term.span))

    for sig, where in type_terms:
        for tx in sig:
            _check_type_arity(tx, program.type_defs, where)
    for (name, arity), pred in program.predicates.items():
        arities = declared_arity.get(name)
        if pred.clauses and arities and arity not in arities:
            span = pred.clauses[0].span
            raise ParseError(
                f"clause head arity mismatch: {name}/{arity} (declared {name}/{min(arities)})",
                *(span[:2] if span else (None, None)))
    if check_calls:
        check_undefined(program)
    return program


def _parse_mode_decl(decl: Term, program: Program, declared_arity: dict) -> None:
    if not (isinstance(decl, Struct) and decl.name == "is" and decl.arity == 2):
        raise ParseError("expected `:- mode p(...) is Det`", *_pos(decl))
    head, det = decl.args
    if not isinstance(head, Struct) or not isinstance(det, Struct) or det.args:
        raise ParseError("malformed mode declaration", *_pos(decl))
    try:
        determinism = Determinism(det.name)
    except ValueError:
        raise ParseError(f"unknown determinism {det.name}", *_pos(det)) from None
    modes = []
    for a in head.args:
        if not (isinstance(a, Struct) and a.name in ("in", "out") and not a.args):
            raise ParseError("argument mode must be `in` or `out`", *_pos(a))
        modes.append(a.name)
    arities = declared_arity.get(head.name)
    if arities and head.arity not in arities:
        raise ParseError(f"mode declaration arity mismatch for {head.name}/{head.arity}", *_pos(head))
    pred = _predicate(program, head.name, head.arity)
    mode = ModeDecl(tuple(modes), determinism)
    if any(m.arg_modes == mode.arg_modes for m in pred.modes):
        raise ParseError(f"duplicate mode declaration for {head.name}/{head.arity}", *_pos(head))
    pred.modes.append(mode)


def check_undefined(program: Program) -> None:
    for pred in program.predicates.values():
        for clause in pred.clauses:
            for g in subgoals(clause.body):
                if isinstance(g, Call) and not is_builtin(g.indicator) \
                        and g.indicator not in program.predicates:
                    where = g.span[:2] if g.span else (None, None)
                    raise ParseError(f"undefined predicate {g.name}/{len(g.args)}", *where)


# -- printing -----------------------------------------------------------------

def format_type_def(tdef: TypeDef) -> str:
    head = tdef.name
    if tdef.params:
        head += "(" + ", ".join(str(p) for p in tdef.params) + ")"
    alts = []
    for name, args in tdef.constructors:
        if name == CONS and len(args) == 2:
            alts.append(f"[{args[0]} | {args[1]}]")
        elif args:
            alts.append(f"{format_term(Struct(name))}({', '.join(str(a) for a in args)})")
        else:
            alts.append(format_term(Struct(name)))
    return f":- type {head} ---> {' ; '.join(alts)}."


def format_head(name: str, args) -> str:
    return format_term(Struct(name, tuple(args)))


def format_clause(name: str, clause: Clause, writer: Optional[GoalWriter] = None) -> str:
    writer = writer or GoalWriter()
    writer.write(format_head(name, clause.head_args))
    body = clause.body
    if len(body.goals) == 1 and body.goals[0] == Call("true"):
        writer.write(".")
    else:
        writer.write(" :-")
        writer.newline()
        writer.write(writer.indent)
        writer.goal(body, 1)
        writer.write(".")
    writer.newline()
    return writer.text()


def format_pred_decls(pred: PredicateDef, name: Optional[str] = None) -> list:
    name = name or pred.name
    lines = []
    if pred.type_sig is not None:
        sig = ", ".join(str(t) for t in pred.type_sig)
        lines.append(f":- pred {format_atom_head(name)}({sig})." if sig else f":- pred {format_atom_head(name)}.")
    for m in pred.modes:
        args = f"({', '.join(m.arg_modes)})" if m.arg_modes else ""
        lines.append(f":- mode {format_atom_head(name)}{args} is {m.determinism.value}.")
    return lines


def format_atom_head(name: str) -> str:
    return format_term(Struct(name))


def format_program(program: Program) -> str:
    writer = GoalWriter()
    for tdef in program.type_defs.values():
        writer.write(format_type_def(tdef))
        writer.newline()
    if program.type_defs:
        writer.newline()
    for pred in program.predicates.values():
        for line in format_pred_decls(pred):
            writer.write(line)
            writer.newline()
        for clause in pred.clauses:
            format_clause(pred.name, clause, writer)
        writer.newline()
    return writer.text()


def strip_program_spans(program: Program) -> Program:
    """Copy of ``program`` without source positions, for structural comparison."""
    out = Program(dict(program.type_defs), {})
    for key, pred in program.predicates.items():
        clauses = [Clause(tuple(strip_spans(a) for a in c.head_args), strip_goal_spans(c.body))
                   for c in pred.clauses]
        out.predicates[key] = PredicateDef(pred.name, pred.arity, clauses, list(pred.modes), pred.type_sig)
    return out
