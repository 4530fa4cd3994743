"""A small type checker used by the ``type(V, T)`` test assertion.

Types of query variables are inferred from the signatures of the predicates
they are passed to, from constructor declarations and from integer and list
literals.  Type variables are unified; there is no subtyping.
"""
from __future__ import annotations

import itertools
from typing import Optional

from .goals import Call, Conj, Disj, Goal, IfThenElse, Not, Unify
from .program import BUILTIN_TYPES, Program, TypeExpr
from .terms import CONS, NIL, Int, Struct, Term, Var


class TypeClash(Exception):
    pass


class _Subst:
    def __init__(self):
        self.map: dict = {}
        self._ids = itertools.count()

    def fresh(self) -> TypeExpr:
        return TypeExpr(f"_T{next(self._ids)}")

    def resolve(self, t: TypeExpr) -> TypeExpr:
        while t.is_var and t.name in self.map:
            t = self.map[t.name]
        if t.params:
            return TypeExpr(t.name, tuple(self.resolve(p) for p in t.params))
        return t

    def unify(self, a: TypeExpr, b: TypeExpr) -> None:
        a, b = self.resolve(a), self.resolve(b)
        if a.is_var:
            if a != b:
                if _occurs(a.name, b):
                    raise TypeClash(f"{a} occurs in {b}")
                self.map[a.name] = b
            return
        if b.is_var:
            self.unify(b, a)
            return
        if a.name != b.name or len(a.params) != len(b.params):
            raise TypeClash(f"{a} vs {b}")
        for x, y in zip(a.params, b.params):
            self.unify(x, y)


def _occurs(name: str, t: TypeExpr) -> bool:
    if t.is_var:
        return t.name == name
    return any(_occurs(name, p) for p in t.params)


def _instantiate(types, subst: _Subst) -> tuple:
    mapping: dict = {}

    def inst(t: TypeExpr) -> TypeExpr:
        if t.is_var:
            if t.name not in mapping:
                mapping[t.name] = subst.fresh()
            return mapping[t.name]
        return TypeExpr(t.name, tuple(inst(p) for p in t.params))

    return tuple(inst(t) for t in types)


class TypeInference:
    def __init__(self, program: Program):
        self.type_defs = dict(BUILTIN_TYPES)
        self.type_defs.update(program.type_defs)
        self.signatures = {key: p.type_sig for key, p in program.predicates.items()
                           if p.type_sig is not None}
        self.constructors: dict = {}
        for tdef in self.type_defs.values():
            for name, args in tdef.constructors:
                result = TypeExpr(tdef.name, tdef.params)
                self.constructors.setdefault((name, len(args)), []).append((args, result))
        self.subst = _Subst()
        self.vars: dict = {}

    def var_type(self, name: str) -> TypeExpr:
        if name not in self.vars:
            self.vars[name] = self.subst.fresh()
        return self.vars[name]

    def term(self, term: Term) -> TypeExpr:
        if isinstance(term, Var):
            return self.var_type(term.name)
        if isinstance(term, Int):
            return TypeExpr("int")
        candidates = self.constructors.get((term.name, term.arity), [])
        if len(candidates) != 1:
            # unknown or overloaded constructor: give up on this subterm
            for a in term.args:
                self.term(a)
            return self.subst.fresh()
        arg_types, result = candidates[0]
        inst = _instantiate(arg_types + (result,), self.subst)
        for a, t in zip(term.args, inst[:-1]):
            self.subst.unify(self.term(a), t)
        return inst[-1]

    def goal(self, goal: Goal) -> None:
        if isinstance(goal, Unify):
            self.subst.unify(self.term(goal.left), self.term(goal.right))
        elif isinstance(goal, Call):
            sig = self.signatures.get(goal.indicator)
            if sig is not None:
                for a, t in zip(goal.args, _instantiate(sig, self.subst)):
                    self.subst.unify(self.term(a), t)
            elif goal.indicator in (("<", 2), (">", 2), ("=<", 2), (">=", 2), ("is", 2)):
                for a in goal.args:
                    if isinstance(a, (Var, Int)):
                        self.subst.unify(self.term(a), TypeExpr("int"))
            elif goal.indicator == ("length", 2):
                self.subst.unify(self.term(goal.args[0]), TypeExpr("list", (self.subst.fresh(),)))
                self.subst.unify(self.term(goal.args[1]), TypeExpr("int"))
        elif isinstance(goal, (Conj, Disj)):
            for g in goal.goals:
                self.goal(g)
        elif isinstance(goal, Not):
            self.goal(goal.goal)
        elif isinstance(goal, IfThenElse):
            self.goal(goal.cond)
            self.goal(goal.then)
            self.goal(goal.else_)

    def type_of(self, name: str) -> TypeExpr:
        return self.subst.resolve(self.var_type(name))


def infer_var_types(goals, program: Program) -> dict:
    """Map every variable of ``goals`` to its inferred type (type variables
    remain where nothing constrains a variable).  Raises :class:`TypeClash`."""
    inf = TypeInference(program)
    for g in goals:
        inf.goal(g)
    return {name: inf.type_of(name) for name in inf.vars}


def compatible(inferred: TypeExpr, declared: TypeExpr) -> bool:
    subst = _Subst()
    try:
        subst.unify(inferred, declared)
    except TypeClash:
        return False
    return True


def value_has_type(value: Term, t: TypeExpr, program: Optional[Program] = None) -> bool:
    """Whether a ground term is a member of type ``t`` (type variables accept anything)."""
    type_defs = dict(BUILTIN_TYPES)
    if program is not None:
        type_defs.update(program.type_defs)
    return _member(value, t, type_defs)


def _member(value: Term, t: TypeExpr, type_defs: dict) -> bool:
    if t.is_var:
        return True
    if t.name == "int" and not t.params:
        return isinstance(value, Int)
    if t.name == "list" and len(t.params) == 1:
        while isinstance(value, Struct) and value.name == CONS and value.arity == 2:
            if not _member(value.args[0], t.params[0], type_defs):
                return False
            value = value.args[1]
        return isinstance(value, Struct) and value.name == NIL and value.arity == 0
    tdef = type_defs.get(t.name)
    if tdef is None or not isinstance(value, Struct):
        return False
    binding = {p.name: a for p, a in zip(tdef.params, t.params)}
    for name, args in tdef.constructors:
        if name == value.name and len(args) == value.arity:
            return all(_member(v, _apply(a, binding), type_defs) for v, a in zip(value.args, args))
    return False


def _apply(t: TypeExpr, binding: dict) -> TypeExpr:
    if t.is_var:
        return binding.get(t.name, t)
    return TypeExpr(t.name, tuple(_apply(p, binding) for p in t.params))
