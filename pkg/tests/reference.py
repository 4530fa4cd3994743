"""An independent reference interpreter used as a test oracle.

It works on the parsed clauses directly, with no mode analysis: variables
are real logic variables, clauses are renamed apart at each call, and the
resolvent is a flat goal list.  The selection rule picks the leftmost goal
that can run, delaying builtins, negations and conditions until their
inputs are ground, so it accepts goals in any order.
"""
from __future__ import annotations

import itertools

from mertest.goals import Call, Conj, Disj, IfThenElse, Not, Unify
from mertest.terms import Int, Struct, Var, list_items


class Floundered(Exception):
    pass


def walk(t, s):
    while isinstance(t, Var) and t.name in s:
        t = s[t.name]
    return t


def resolve(t, s):
    t = walk(t, s)
    if isinstance(t, Struct) and t.args:
        return Struct(t.name, tuple(resolve(a, s) for a in t.args))
    return t


def free_vars(t, s, out):
    t = walk(t, s)
    if isinstance(t, Var):
        out.add(t.name)
    elif isinstance(t, Struct):
        for a in t.args:
            free_vars(a, s, out)
    return out


def occurs(name, t, s):
    t = walk(t, s)
    if isinstance(t, Var):
        return t.name == name
    if isinstance(t, Struct):
        return any(occurs(name, a, s) for a in t.args)
    return False


def unify(a, b, s):
    a, b = walk(a, s), walk(b, s)
    if isinstance(a, Var):
        if isinstance(b, Var) and a.name == b.name:
            return s
        if occurs(a.name, b, s):
            return None
        return {**s, a.name: b}
    if isinstance(b, Var):
        return unify(b, a, s)
    if isinstance(a, Int) or isinstance(b, Int):
        return s if isinstance(a, Int) and isinstance(b, Int) and a.value == b.value else None
    if a.name != b.name or len(a.args) != len(b.args):
        return None
    for x, y in zip(a.args, b.args):
        s = unify(x, y, s)
        if s is None:
            return None
    return s


def arith(t, s):
    t = walk(t, s)
    if isinstance(t, Int):
        return t.value
    x, y = (arith(a, s) for a in t.args) if t.arity == 2 else (arith(t.args[0], s), None)
    if t.arity == 1:
        return -x
    if t.name == "+":
        return x + y
    if t.name == "-":
        return x - y
    if t.name == "*":
        return x * y
    if t.name == "//":
        return abs(x) // abs(y) * (1 if (x >= 0) == (y >= 0) else -1)
    return x - y * (x // y)


def goal_vars(g, s, out):
    if isinstance(g, Unify):
        free_vars(g.left, s, out)
        free_vars(g.right, s, out)
    elif isinstance(g, Call):
        for a in g.args:
            free_vars(a, s, out)
    elif isinstance(g, (Conj, Disj)):
        for x in g.goals:
            goal_vars(x, s, out)
    elif isinstance(g, Not):
        goal_vars(g.goal, s, out)
    elif isinstance(g, IfThenElse):
        for x in (g.cond, g.then, g.else_):
            goal_vars(x, s, out)
    return out


def rename(g, suffix):
    def rt(t):
        if isinstance(t, Var):
            return Var(t.name + suffix)
        if isinstance(t, Struct) and t.args:
            return Struct(t.name, tuple(rt(a) for a in t.args))
        return t

    if isinstance(g, Unify):
        return Unify(rt(g.left), rt(g.right))
    if isinstance(g, Call):
        return Call(g.name, tuple(rt(a) for a in g.args))
    if isinstance(g, Conj):
        return Conj(tuple(rename(x, suffix) for x in g.goals))
    if isinstance(g, Disj):
        return Disj(tuple(rename(x, suffix) for x in g.goals))
    if isinstance(g, Not):
        return Not(rename(g.goal, suffix))
    if isinstance(g, IfThenElse):
        return IfThenElse(rename(g.cond, suffix), rename(g.then, suffix), rename(g.else_, suffix))
    return g


BUILTIN_TESTS = {"<", ">", "=<", ">=", "\\="}


class Reference:
    def __init__(self, program):
        self.program = program
        self.ids = itertools.count()

    def solve(self, goals, s, keep):
        """Yield substitutions; ``keep`` are variables visible to the caller."""
        goals = list(goals)
        if not goals:
            yield s
            return
        for i, g in enumerate(goals):
            if self._ready(g, i, goals, s, keep):
                rest = goals[:i] + goals[i + 1:]
                yield from self._step(g, rest, s, keep)
                return
        raise Floundered(goals)

    def _outside(self, i, goals, s, keep):
        out = set()
        for j, g in enumerate(goals):
            if j != i:
                goal_vars(g, s, out)
        for k in keep:
            free_vars(Var(k), s, out)
        return out

    def _ready(self, g, i, goals, s, keep):
        if isinstance(g, (Unify, Conj, Disj)):
            return True
        if isinstance(g, Call):
            if g.name in BUILTIN_TESTS:
                return not goal_vars(g, s, set())
            if g.name == "is":
                return not free_vars(g.args[1], s, set())
            if g.name == "length":
                return not free_vars(g.args[0], s, set())
            return True
        if isinstance(g, Not):
            return not (goal_vars(g, s, set()) & self._outside(i, goals, s, keep))
        if isinstance(g, IfThenElse):
            outside = self._outside(i, goals, s, keep) | goal_vars(g.else_, s, set())
            return not (goal_vars(g.cond, s, set()) & outside)
        return True

    def _step(self, g, rest, s, keep):
        if isinstance(g, Unify):
            s2 = unify(g.left, g.right, s)
            if s2 is not None:
                yield from self.solve(rest, s2, keep)
        elif isinstance(g, Conj):
            yield from self.solve(list(g.goals) + rest, s, keep)
        elif isinstance(g, Disj):
            for d in g.goals:
                yield from self.solve([d] + rest, s, keep)
        elif isinstance(g, Not):
            inner_keep = keep | self._outside(-1, rest, s, keep)
            for _ in self.solve([g.goal], s, inner_keep):
                return
            yield from self.solve(rest, s, keep)
        elif isinstance(g, IfThenElse):
            inner_keep = keep | self._outside(-1, rest + [g.then], s, keep)
            found = False
            for s2 in self.solve([g.cond], s, inner_keep):
                found = True
                yield from self.solve([g.then] + rest, s2, keep)
            if not found:
                yield from self.solve([g.else_] + rest, s, keep)
        elif isinstance(g, Call):
            yield from self._call(g, rest, s, keep)

    def _call(self, g, rest, s, keep):
        name, n = g.name, len(g.args)
        if name == "true" and n == 0:
            yield from self.solve(rest, s, keep)
        elif name == "fail" and n == 0:
            return
        elif name in BUILTIN_TESTS:
            a, b = resolve(g.args[0], s), resolve(g.args[1], s)
            if name == "\\=":
                ok = unify(a, b, {}) is None
            else:
                x, y = arith(a, s), arith(b, s)
                ok = {"<": x < y, ">": x > y, "=<": x <= y, ">=": x >= y}[name]
            if ok:
                yield from self.solve(rest, s, keep)
        elif name == "is":
            s2 = unify(g.args[0], Int(arith(g.args[1], s)), s)
            if s2 is not None:
                yield from self.solve(rest, s2, keep)
        elif name == "length":
            s2 = unify(g.args[1], Int(len(list_items(resolve(g.args[0], s)))), s)
            if s2 is not None:
                yield from self.solve(rest, s2, keep)
        else:
            pred = self.program.predicates[(name, n)]
            for clause in pred.clauses:
                suffix = f"#{next(self.ids)}"
                head = [rename(Unify(Var("_"), a), suffix).right for a in clause.head_args]
                s2 = s
                for a, h in zip(g.args, head):
                    s2 = unify(a, h, s2)
                    if s2 is None:
                        break
                if s2 is not None:
                    yield from self.solve([rename(clause.body, suffix)] + rest, s2, keep)


def reference_solutions(program, query_goals, out_vars):
    """Solutions of ``query_goals`` as a list of tuples of resolved terms."""
    ref = Reference(program)
    keep = set(out_vars)
    return [tuple(resolve(Var(v), s) for v in out_vars) for s in ref.solve(query_goals, {}, keep)]
