"""Backtracking interpreter over mode-checked procedures.

Solutions are produced lazily by generators, depth first, clause order,
left to right.  Bindings map variable names to ground terms; each call
runs in its own binding environment, so no renaming apart is needed.
"""
from __future__ import annotations

import enum
import sys
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, TextIO

from .coverage.switches import (BatchPlan, mark_and_batch, plan_from_term,
                                plan_to_term, tree_from_term)
from .goals import Call, Conj, Disj, Goal, IfThenElse, Label, Not, Unify
from .terms import Int, Struct, Term, Var, atom, format_term, list_items, make_list, substitute

INT_MIN = -(2 ** 63)
INT_MAX = 2 ** 63 - 1


class ExceptionPolicy(enum.Enum):
    CATCH_ALL = "catch_all"
    PROPAGATE = "propagate"


class LogicError(Exception):
    """An exception thrown by the object program (or by the engine on its behalf)."""

    def __init__(self, term: Term, stack: tuple = ()):
        self.term = term
        self.stack = stack
        super().__init__(format_term(term))


class InternalError(Exception):
    pass


@dataclass
class Solution:
    bindings: dict  # variable name -> ground term, in query variable order

    def __getitem__(self, name: str) -> Term:
        return self.bindings[name]


@dataclass
class EngineOutcome:
    solutions: list = field(default_factory=list)
    exception: Optional[Term] = None

    @property
    def kind(self) -> str:
        return "exception" if self.exception is not None else "solutions"


def unify(a: Term, b: Term, bindings: dict) -> Optional[dict]:
    """Extend ``bindings`` so that ``a`` and ``b`` are equal, or return None.

    Free variables may only be bound to ground terms; unifying two free
    variables is an instantiation error.
    """
    env = dict(bindings)
    if _unify(a, b, env):
        return env
    return None


def _deref(t: Term, env: dict) -> Term:
    if isinstance(t, Var) and t.name in env:
        return env[t.name]
    return t


def _unify(a: Term, b: Term, env: dict) -> bool:
    a = _deref(a, env)
    b = _deref(b, env)
    if isinstance(a, Var):
        if isinstance(b, Var):
            if a.name == b.name:
                return True
            raise LogicError(Struct("instantiation_error", (atom(a.name), atom(b.name))))
        b = substitute(b, env)
        if not _is_ground(b):
            raise LogicError(Struct("instantiation_error", (atom(a.name),)))
        env[a.name] = b
        return True
    if isinstance(b, Var):
        return _unify(b, a, env)
    if isinstance(a, Int) or isinstance(b, Int):
        return isinstance(a, Int) and isinstance(b, Int) and a.value == b.value
    if a.name != b.name or len(a.args) != len(b.args):
        return False
    # bind ground sides first so that mixed patterns resolve in one pass
    pending = []
    for x, y in zip(a.args, b.args):
        x, y = _deref(x, env), _deref(y, env)
        if _is_ground(x) or _is_ground(y):
            if not _unify(x, y, env):
                return False
        else:
            pending.append((x, y))
    for x, y in pending:
        if not _unify(x, y, env):
            return False
    return True


def _is_ground(t: Term) -> bool:
    if isinstance(t, Var):
        return False
    if isinstance(t, Struct):
        return all(_is_ground(a) for a in t.args)
    return True


def _throw(name: str, *args: Term) -> LogicError:
    return LogicError(Struct(name, tuple(args)) if args else atom(name))


def eval_arith(term: Term, env: dict) -> int:
    term = _deref(term, env)
    if isinstance(term, Int):
        return term.value
    if isinstance(term, Var):
        raise _throw("instantiation_error", atom(term.name))
    if term.arity == 2 and term.name in ("+", "-", "*", "//", "mod"):
        x = eval_arith(term.args[0], env)
        y = eval_arith(term.args[1], env)
        if term.name == "+":
            r = x + y
        elif term.name == "-":
            r = x - y
        elif term.name == "*":
            r = x * y
        else:
            if y == 0:
                raise _throw("division_by_zero")
            if term.name == "//":
                r = abs(x) // abs(y) * (1 if (x >= 0) == (y >= 0) else -1)
            else:
                r = x - y * (x // y)
    elif term.arity == 1 and term.name == "-":
        r = -eval_arith(term.args[0], env)
    else:
        raise _throw("type_error", atom("evaluable"), term)
    if not INT_MIN <= r <= INT_MAX:
        raise _throw("overflow")
    return r


class Engine:
    """Solves goals against a set of procedures.

    ``trace_sink`` receives the id of every :class:`Label` goal executed;
    ``log_sink`` receives ``("L", id)`` / ``("B", ids)`` events from the
    instrumentation builtins.
    """

    def __init__(self, procs, trace_sink: Optional[Callable] = None,
                 log_sink: Optional[Callable] = None, out: Optional[TextIO] = None,
                 allow_print: bool = True):
        self.procs = {p.proc_name: p for p in procs}
        self.trace_sink = trace_sink
        self.log_sink = log_sink
        self.out = out
        self.allow_print = allow_print
        self.stack: list = []

    # -- goals ---------------------------------------------------------------

    def solve_goal(self, goal: Goal, env: dict, checked: bool = True) -> Iterator[dict]:
        if isinstance(goal, Conj):
            yield from self._conj(goal.goals, 0, env, checked)
        elif isinstance(goal, Unify):
            try:
                result = unify(goal.left, goal.right, env)
            except LogicError as exc:
                raise LogicError(exc.term, tuple(self.stack)) from None
            if result is not None:
                yield result
        elif isinstance(goal, Call):
            yield from self._call(goal, env, checked)
        elif isinstance(goal, Label):
            if self.trace_sink is not None:
                self.trace_sink(goal.id)
            yield env
        elif isinstance(goal, Disj):
            for d in goal.goals:
                yield from self.solve_goal(d, env, checked)
        elif isinstance(goal, Not):
            for _ in self.solve_goal(goal.goal, env, checked):
                return
            yield env
        elif isinstance(goal, IfThenElse):
            found = False
            for env1 in self.solve_goal(goal.cond, env, checked):
                found = True
                yield from self.solve_goal(goal.then, env1, checked)
            if not found:
                yield from self.solve_goal(goal.else_, env, checked)
        else:
            raise TypeError(goal)

    def _conj(self, goals: tuple, i: int, env: dict, checked: bool) -> Iterator[dict]:
        if i == len(goals):
            yield env
            return
        if i == len(goals) - 1:
            yield from self.solve_goal(goals[i], env, checked)
            return
        for env1 in self.solve_goal(goals[i], env, checked):
            yield from self._conj(goals, i + 1, env1, checked)

    def _call(self, goal: Call, env: dict, checked: bool) -> Iterator[dict]:
        proc = self.procs.get(goal.name)
        if proc is None or proc.arity != len(goal.args):
            yield from self._builtin(goal, env)
            return
        callee_env = {}
        outs = []
        for hv, mode, arg in zip(proc.head_vars, proc.arg_modes, goal.args):
            if mode == "in":
                value = substitute(arg, env)
                if not _is_ground(value):
                    raise LogicError(Struct("instantiation_error", (atom(proc.proc_name),)), tuple(self.stack))
                callee_env[hv] = value
            else:
                outs.append((hv, arg))
        det = proc.determinism
        self.stack.append(proc.proc_name)
        count = 0
        try:
            for result in self.solve_goal(proc.body, callee_env, True):
                count += 1
                if checked and count > 1 and det.at_most_one:
                    raise LogicError(Struct("determinism_error", (atom(proc.proc_name), atom("multiple_solutions"))),
                                     tuple(self.stack))
                out_env = dict(env)
                for hv, arg in outs:
                    if hv not in result:
                        raise InternalError(f"{proc.proc_name}: output {hv} unbound at success")
                    self.stack.pop()
                    try:
                        ok = _unify(arg, result[hv], out_env)
                    finally:
                        self.stack.append(proc.proc_name)
                    if not ok:
                        break
                else:
                    self.stack.pop()
                    try:
                        yield out_env
                    finally:
                        self.stack.append(proc.proc_name)
            if checked and count == 0 and not det.can_fail:
                raise LogicError(Struct("determinism_error", (atom(proc.proc_name), atom("failed"))),
                                 tuple(self.stack))
        finally:
            self.stack.pop()

    # -- builtins ------------------------------------------------------------

    def _builtin(self, goal: Call, env: dict) -> Iterator[dict]:
        name, args = goal.name, goal.args
        n = len(args)
        try:
            if (name, n) == ("true", 0):
                yield env
            elif (name, n) == ("fail", 0):
                return
            elif n == 2 and name in ("<", ">", "=<", ">="):
                x, y = eval_arith(args[0], env), eval_arith(args[1], env)
                ok = {"<": x < y, ">": x > y, "=<": x <= y, ">=": x >= y}[name]
                if ok:
                    yield env
            elif (name, n) == ("\\=", 2):
                if unify(args[0], args[1], env) is None:
                    yield env
            elif (name, n) == ("is", 2):
                value = Int(eval_arith(args[1], env))
                result = unify(args[0], value, env)
                if result is not None:
                    yield result
            elif (name, n) == ("length", 2):
                items = list_items(substitute(args[0], env))
                if items is None:
                    raise _throw("type_error", atom("list"), substitute(args[0], env))
                result = unify(args[1], Int(len(items)), env)
                if result is not None:
                    yield result
            elif (name, n) == ("throw", 1):
                value = substitute(args[0], env)
                if not _is_ground(value):
                    raise _throw("instantiation_error", atom("throw"))
                raise LogicError(value)
            elif (name, n) == ("print", 1):
                if not self.allow_print:
                    raise _throw("io_not_allowed")
                if self.out is not None:
                    self.out.write(format_term(substitute(args[0], env)) + "\n")
                else:
                    sys.stdout.write(format_term(substitute(args[0], env)) + "\n")
                yield env
            elif (name, n) == ("log", 1):
                if self.log_sink is not None:
                    self.log_sink(("L", _deref(args[0], env).value))
                yield env
            elif (name, n) == ("$switch", 2):
                plan = self._switch_plan(substitute(args[0], env))
                if plan.pre and self.log_sink is not None:
                    self.log_sink(("B", plan.pre))
                result = unify(args[1], plan_to_term(plan), env)
                if result is not None:
                    yield result
            elif (name, n) == ("$batch", 2):
                plan = plan_from_term(substitute(args[0], env))
                seq = plan.batches.get(_deref(args[1], env).value)
                if seq and self.log_sink is not None:
                    self.log_sink(("B", seq))
                yield env
            else:
                raise _throw("existence_error", Struct("/", (atom(name), Int(n))))
        except LogicError as exc:
            if exc.stack:
                raise
            raise LogicError(exc.term, tuple(self.stack)) from None

    @staticmethod
    def _switch_plan(tree_term: Term) -> BatchPlan:
        tree = tree_from_term(tree_term)
        return mark_and_batch(tree, evaluate_edges(tree, {}))


def evaluate_edges(tree, env: dict) -> dict:
    """Outcome of every edge reachable through succeeding unifications.

    Each root-to-leaf path is simulated on its own copy of the bindings; the
    switch prefix consists of unifications only, so this is side-effect free.
    """
    kids = tree.children()
    outcomes: dict = {}

    def visit(node: int, bindings: dict) -> None:
        for e in kids.get(node, ()):
            if e.goal is None:
                outcomes[(e.src, e.dst)] = True
                visit(e.dst, bindings)
                continue
            try:
                result = unify(e.goal.left, e.goal.right, bindings)
            except LogicError:
                result = None
            outcomes[(e.src, e.dst)] = result is not None
            if result is not None:
                visit(e.dst, result)

    for root in tree.roots:
        visit(root, dict(env))
    return outcomes


def solve(query: Goal, procs, limit: Optional[int] = None,
          policy: ExceptionPolicy = ExceptionPolicy.CATCH_ALL,
          trace_sink: Optional[Callable] = None, bindings: Optional[dict] = None,
          output_vars: Optional[list] = None, log_sink: Optional[Callable] = None,
          out: Optional[TextIO] = None, allow_print: bool = True) -> EngineOutcome:
    """Enumerate solutions of ``query`` (a scheduled goal).

    Calls made directly by the query are observed, not contract-checked;
    determinism contracts are enforced on calls made from procedure bodies.
    Under ``PROPAGATE`` a thrown exception escapes as :class:`LogicError`.
    """
    from .goals import goal_vars
    engine = Engine(procs, trace_sink=trace_sink, log_sink=log_sink, out=out, allow_print=allow_print)
    env = dict(bindings or {})
    if output_vars is None:
        output_vars = [v for v in _ordered_vars(query) if v not in env]
    outcome = EngineOutcome()
    if limit is not None and limit <= 0:
        return outcome
    try:
        for result in engine.solve_goal(query, env, checked=False):
            missing = [v for v in output_vars if v not in result]
            if missing:
                raise InternalError(f"query variable {missing[0]} unbound at success")
            outcome.solutions.append(Solution({v: result[v] for v in output_vars}))
            if limit is not None and len(outcome.solutions) >= limit:
                break
    except LogicError as exc:
        if policy is ExceptionPolicy.PROPAGATE:
            raise
        outcome.exception = exc.term
    return outcome


def _ordered_vars(goal: Goal) -> list:
    from .goals import subgoals, atomic_vars
    seen: list = []
    for g in subgoals(goal):
        if isinstance(g, (Unify, Call)):
            for v in atomic_vars(g):
                if v not in seen:
                    seen.append(v)
    return seen
