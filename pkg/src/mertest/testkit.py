"""Test suites: parsing, execution and the assertion algebra.

A suite is a sequence of ``test(Name, [Goals], [Assertions]).`` terms.  The
code of a test is run through the engine; assertions are conditions over the
solutions it produces.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, TextIO

from .engine import ExceptionPolicy, LogicError, solve
from .goals import Call, Conj, Disj, Goal, IfThenElse, Not, Unify, subgoals, term_to_goal
from .modes import CalleeMode, ModeError, RenamingTable, compile_query, select_mode
from .program import Determinism, Program, term_to_type
from .syntax import ParseError, read_terms
from .terms import Int, Struct, Term, Var, format_term, list_items, term_vars
from .types import TypeClash, compatible, infer_var_types, value_has_type


class TestSuiteError(Exception):
    """A suite that cannot be run as a whole (bad execution mode, mode errors)."""
    __test__ = False


class RenamingError(Exception):
    pass


class AssertionKind(enum.Enum):
    EXPECT_SUCCEED = "succeed"
    EXPECT_FAIL = "fail"
    EXPECT_EXCEPTION = "exception"
    TRUE = "true"
    SOME_TRUE = "some_true"
    ALL_TRUE = "all_true"
    TRUE_NTH = "true_nth"
    CARDINALITY = "solutions_cardinality"
    TYPE_DECL = "type"
    LIMIT = "limit"


EXPECTATIONS = (AssertionKind.EXPECT_SUCCEED, AssertionKind.EXPECT_FAIL, AssertionKind.EXPECT_EXCEPTION)
ENUMERATING = (AssertionKind.SOME_TRUE, AssertionKind.ALL_TRUE, AssertionKind.TRUE_NTH,
               AssertionKind.CARDINALITY)


@dataclass
class Assertion:
    kind: AssertionKind
    cond: Optional[Conj] = None
    n: Optional[int] = None
    var: Optional[str] = None  # cardinality variable or type-declared variable
    type: Optional[object] = None
    text: str = ""


@dataclass
class TestCase:
    __test__ = False  # keep pytest from collecting this class

    name: str
    code: tuple
    assertions: list = field(default_factory=list)
    span: Optional[tuple] = None

    def expected(self) -> AssertionKind:
        for a in self.assertions:
            if a.kind in EXPECTATIONS:
                return a.kind
        return AssertionKind.EXPECT_SUCCEED

    def limit(self) -> Optional[int]:
        for a in self.assertions:
            if a.kind is AssertionKind.LIMIT:
                return a.n
        return None


class Status(enum.Enum):
    SUCCEEDED = "succeeded"
    CONDITION_FAILED = "condition_failed"
    FAILED_FAILURE = "failed_failure"
    FAILED_EXCEPTION = "failed_exception"
    FAILED_UNEXPECTED_SUCCESS = "failed_unexpected_success"


@dataclass
class TestOutcome:
    __test__ = False

    name: str
    status: Status
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status is Status.SUCCEEDED


class ExecMode(enum.Enum):
    MULTI = "multi"
    IO = "io"


FAILURE_TEXT = "failed because of failure (instead of {})"


# -- parsing -------------------------------------------------------------------

def _where(term: Term):
    return term.span[:2] if term.span else (None, None)


def _int_arg(term: Term, what: str, minimum: int = 1) -> int:
    if not isinstance(term, Int) or term.value < minimum:
        raise ParseError(f"{what} expects an integer >= {minimum}", *_where(term))
    return term.value


def _cond(term: Term) -> Conj:
    goal = term_to_goal(term)
    return goal if isinstance(goal, Conj) else Conj((goal,), getattr(goal, "span", None))


def parse_assertion(term: Term) -> Assertion:
    text = format_term(term)
    if not isinstance(term, Struct):
        raise ParseError(f"not an assertion: {text}", *_where(term))
    key = (term.name, term.arity)
    a = term.args
    if key in (("succeed", 0), ("fail", 0), ("exception", 0)):
        return Assertion(AssertionKind(term.name), text=text)
    if key == ("true", 1):
        return Assertion(AssertionKind.TRUE, cond=_cond(a[0]), text=text)
    if key in (("true", 2), ("true_nth", 2)):
        return Assertion(AssertionKind.TRUE_NTH, cond=_cond(a[1]), n=_int_arg(a[0], "true/2"), text=text)
    if key == ("some_true", 1):
        return Assertion(AssertionKind.SOME_TRUE, cond=_cond(a[0]), text=text)
    if key == ("all_true", 1):
        return Assertion(AssertionKind.ALL_TRUE, cond=_cond(a[0]), text=text)
    if key == ("solutions_cardinality", 1):
        if isinstance(a[0], Var):
            return Assertion(AssertionKind.CARDINALITY, var=a[0].name, text=text)
        return Assertion(AssertionKind.CARDINALITY, n=_int_arg(a[0], "solutions_cardinality", 0), text=text)
    if key == ("type", 2):
        if not isinstance(a[0], Var):
            raise ParseError("type/2 expects a variable", *_where(a[0]))
        return Assertion(AssertionKind.TYPE_DECL, var=a[0].name, type=term_to_type(a[1]), text=text)
    if key == ("limit", 1):
        return Assertion(AssertionKind.LIMIT, n=_int_arg(a[0], "limit"), text=text)
    raise ParseError(f"unknown assertion {term.name}/{term.arity}", *_where(term))


def parse_testsuite(text: str) -> list:
    cases: list = []
    names: set = set()
    for term in read_terms(text):
        if not (isinstance(term, Struct) and term.name == "test" and term.arity == 3):
            raise ParseError("expected test(Name, [Goals], [Assertions])", *_where(term))
        name_t, code_t, asserts_t = term.args
        if isinstance(name_t, Struct) and not name_t.args:
            name = name_t.name
        elif isinstance(name_t, Int):
            name = str(name_t.value)
        else:
            raise ParseError("test name must be an atom", *_where(name_t))
        if name in names:
            raise ParseError(f"duplicate test name {name}", *_where(name_t))
        names.add(name)
        code_items = list_items(code_t)
        if not code_items:
            raise ParseError(f"test {name}: code must be a non-empty list of goals", *_where(code_t))
        assert_items = list_items(asserts_t)
        if assert_items is None:
            raise ParseError(f"test {name}: assertions must be a list", *_where(asserts_t))
        assertions = [parse_assertion(t) for t in assert_items]
        if sum(a.kind is AssertionKind.LIMIT for a in assertions) > 1:
            raise ParseError(f"test {name}: duplicate limit", *_where(asserts_t))
        if len({a.kind for a in assertions if a.kind in EXPECTATIONS}) > 1:
            raise ParseError(f"test {name}: conflicting expected behaviour", *_where(asserts_t))
        cases.append(TestCase(name, tuple(term_to_goal(t) for t in code_items), assertions, term.span))
    return cases


# -- renaming ---------------------------------------------------------------------

def _rename_goal(goal: Goal, bound: set, table: dict) -> tuple:
    """Returns ``(renamed goal, bound after)`` or None when not yet executable."""
    if isinstance(goal, Unify):
        lv, rv = set(term_vars(goal.left)), set(term_vars(goal.right))
        if lv <= bound or rv <= bound:
            return goal, bound | lv | rv
        return None
    if isinstance(goal, Call):
        candidates = table.get(goal.indicator)
        args_bound = [set(term_vars(a)) <= bound for a in goal.args]
        if candidates is None:
            return goal, bound | {v for a in goal.args for v in term_vars(a)}
        chosen = select_mode(candidates, args_bound)
        if chosen is None:
            return None
        ties = [c for c in candidates if c.modes == chosen.modes]
        if len(ties) > 1:
            raise RenamingError(f"ambiguous renaming for {goal.name}/{len(goal.args)}: "
                                + ", ".join(c.proc_name for c in ties))
        return Call(chosen.proc_name, goal.args, goal.span), bound | {v for a in goal.args for v in term_vars(a)}
    if isinstance(goal, Conj):
        goals, after = _rename_conj(goal.goals, bound, table)
        return Conj(tuple(goals), goal.span), after
    if isinstance(goal, Disj):
        parts = [_rename_conj(d.goals, bound, table) for d in goal.goals]
        after = set.intersection(*(p[1] for p in parts)) if parts else set(bound)
        return Disj(tuple(Conj(tuple(p[0])) for p in parts), goal.span), after
    if isinstance(goal, Not):
        inner, _ = _rename_conj(goal.goal.goals, bound, table)
        return Not(Conj(tuple(inner)), goal.span), bound
    if isinstance(goal, IfThenElse):
        c, cb = _rename_conj(goal.cond.goals, bound, table)
        t, tb = _rename_conj(goal.then.goals, cb, table)
        e, eb = _rename_conj(goal.else_.goals, bound, table)
        return IfThenElse(Conj(tuple(c)), Conj(tuple(t)), Conj(tuple(e)), goal.span), tb & eb
    return goal, bound


def _rename_conj(goals, bound: set, table: dict) -> tuple:
    # greedy in source order, as the scheduler does; results keep source order
    pending = list(enumerate(goals))
    done: dict = {}
    bound = set(bound)
    while pending:
        for k, (i, g) in enumerate(pending):
            result = _rename_goal(g, bound, table)
            if result is not None:
                done[i], bound = result
                del pending[k]
                break
        else:
            # leave the rest untouched; mode analysis reports the problem
            for i, g in pending:
                done[i] = g
            break
    return [done[i] for i in range(len(goals))], bound


def renaming_callees(table: RenamingTable, procs: list) -> dict:
    """Candidate modes per original ``(name, arity)`` built from the table rows."""
    by_name = {p.proc_name: p for p in procs}
    seen: set = set()
    callees: dict = {}
    for e in table.entries:
        key = (e.name, e.arity, e.mode_index)
        if key in seen:
            raise RenamingError(f"ambiguous renaming: {e.name}/{e.arity} mode {e.mode_index} listed twice")
        seen.add(key)
        proc = by_name.get(e.new_name)
        if proc is None:
            continue
        callees.setdefault((e.name, e.arity), []).append(
            CalleeMode(proc.arg_modes, proc.proc_name, proc.determinism))
    return callees


def apply_renaming(cases: list, table: RenamingTable, procs: list) -> list:
    """Rewrite calls in test code and conditions to the renamed procedures.

    The mode of each call is inferred from the instantiation reached by
    running the code left to right, and chosen with the same rule as
    mode analysis uses for call sites.
    """
    callees = renaming_callees(table, procs)
    if not callees:
        return list(cases)
    out = []
    for case in cases:
        code, bound = _rename_conj(case.code, set(), callees)
        assertions = []
        for a in case.assertions:
            if a.cond is not None:
                extra = {x.var for x in case.assertions if x.kind is AssertionKind.CARDINALITY and x.var}
                cond, _ = _rename_conj(a.cond.goals, bound | extra, callees)
                a = Assertion(a.kind, Conj(tuple(cond)), a.n, a.var, a.type, a.text)
            assertions.append(a)
        out.append(TestCase(case.name, tuple(code), assertions, case.span))
    return out


# -- execution -------------------------------------------------------------------

@dataclass
class SuiteContext:
    """Everything needed to run test cases against compiled procedures."""
    procs: list
    callees: dict
    program: Optional[Program] = None
    mode: ExecMode = ExecMode.MULTI
    policy: ExceptionPolicy = ExceptionPolicy.CATCH_ALL
    default_limit: Optional[int] = None
    out: Optional[TextIO] = None
    log_sink: Optional[object] = None
    trace_sink: Optional[object] = None


def _code_vars(goals) -> list:
    seen: list = []
    for g in goals:
        for sub in subgoals(g):
            if isinstance(sub, (Unify, Call)):
                for a in (sub.left, sub.right) if isinstance(sub, Unify) else sub.args:
                    for v in term_vars(a):
                        if v not in seen and not v.startswith("_"):
                            seen.append(v)
    return seen


_DET_BUILTINS = {("true", 0), ("is", 2), ("length", 2), ("print", 1), ("throw", 1)}


def check_exec_mode(case: TestCase, compiled: Conj, ctx: SuiteContext) -> None:
    """Raise :class:`TestSuiteError` if ``case`` violates the execution mode."""
    dets = {p.proc_name: p.determinism for p in ctx.procs}
    goals = list(subgoals(compiled))
    for a in case.assertions:
        if a.cond is not None:
            goals.extend(subgoals(a.cond))
    for g in goals:
        if not isinstance(g, Call):
            continue
        if ctx.mode is ExecMode.MULTI and g.indicator == ("print", 1):
            raise TestSuiteError(f"test {case.name}: print/1 is only allowed in io mode")
    if ctx.mode is ExecMode.IO:
        for g in subgoals(compiled):
            if isinstance(g, (Disj, Not, IfThenElse)):
                raise TestSuiteError(f"test {case.name}: io mode requires det code")
            if isinstance(g, Call):
                det = dets.get(g.name)
                ok = det is Determinism.DET if det is not None else g.indicator in _DET_BUILTINS
                if not ok:
                    raise TestSuiteError(f"test {case.name}: io mode requires det code, "
                                         f"{g.name}/{len(g.args)} is not det")


def compile_case(case: TestCase, ctx: SuiteContext) -> Conj:
    try:
        return compile_query(case.code, ctx.callees)
    except ModeError as exc:
        raise TestSuiteError(f"test {case.name}: {exc.message}") from None


def _holds(cond: Conj, env: dict, ctx: SuiteContext) -> bool:
    try:
        query = compile_query(cond.goals, ctx.callees, bound=set(env))
    except ModeError as exc:
        raise TestSuiteError(f"condition: {exc.message}") from None
    outcome = solve(query, ctx.procs, limit=1, policy=ExceptionPolicy.PROPAGATE, bindings=env,
                    output_vars=[], log_sink=ctx.log_sink, trace_sink=ctx.trace_sink, out=ctx.out,
                    allow_print=ctx.mode is ExecMode.IO)
    return bool(outcome.solutions)


def _check_type(a: Assertion, case: TestCase, solutions: list, ctx: SuiteContext) -> bool:
    if ctx.program is not None:
        try:
            inferred = infer_var_types(case.code, ctx.program)
        except TypeClash:
            return False
        t = inferred.get(a.var)
        if t is not None and not compatible(t, a.type):
            return False
    for env in solutions:
        if a.var in env and not value_has_type(env[a.var], a.type, ctx.program):
            return False
    return True


def evaluate_testcase(case: TestCase, ctx: SuiteContext) -> TestOutcome:
    compiled = compile_case(case, ctx)
    check_exec_mode(case, compiled, ctx)
    expected = case.expected()
    kinds = {a.kind for a in case.assertions}
    limit = case.limit() or ctx.default_limit
    if limit is None and not kinds & set(ENUMERATING):
        limit = 1
    if ctx.mode is ExecMode.IO:
        limit = 1
    outcome = solve(compiled, ctx.procs, limit=limit, policy=ctx.policy,
                    output_vars=_code_vars(case.code), log_sink=ctx.log_sink,
                    trace_sink=ctx.trace_sink, out=ctx.out, allow_print=ctx.mode is ExecMode.IO)
    want = {AssertionKind.EXPECT_SUCCEED: "success", AssertionKind.EXPECT_FAIL: "failure",
            AssertionKind.EXPECT_EXCEPTION: "exception"}[expected]
    if outcome.exception is not None:
        if expected is AssertionKind.EXPECT_EXCEPTION:
            return TestOutcome(case.name, Status.SUCCEEDED, "exception as expected")
        return TestOutcome(case.name, Status.FAILED_EXCEPTION,
                           f"failed because of exception {format_term(outcome.exception)} (instead of {want})")
    solutions = [dict(s.bindings) for s in outcome.solutions]
    if not solutions:
        if expected is AssertionKind.EXPECT_FAIL:
            return TestOutcome(case.name, Status.SUCCEEDED, "failed as expected")
        return TestOutcome(case.name, Status.FAILED_FAILURE, FAILURE_TEXT.format(want))
    if expected is not AssertionKind.EXPECT_SUCCEED:
        return TestOutcome(case.name, Status.FAILED_UNEXPECTED_SUCCESS,
                           f"failed because of success (instead of {want})")
    try:
        failed = _first_failing(case, solutions, ctx)
    except LogicError as exc:
        if ctx.policy is ExceptionPolicy.PROPAGATE:
            raise
        return TestOutcome(case.name, Status.FAILED_EXCEPTION,
                           f"failed because of exception {format_term(exc.term)} in a condition")
    if failed is not None:
        return TestOutcome(case.name, Status.CONDITION_FAILED, f"condition failed: {failed.text}")
    n = len(solutions)
    return TestOutcome(case.name, Status.SUCCEEDED, f"{n} solution{'s' if n != 1 else ''}")


def _first_failing(case: TestCase, solutions: list, ctx: SuiteContext) -> Optional[Assertion]:
    extra: dict = {}  # variables bound by assertions, e.g. the cardinality N

    def env(sol: dict) -> dict:
        merged = dict(sol)
        merged.update(extra)
        return merged

    for a in case.assertions:
        k = a.kind
        if k is AssertionKind.TRUE:
            ok = _holds(a.cond, env(solutions[0]), ctx)
        elif k is AssertionKind.SOME_TRUE:
            ok = any(_holds(a.cond, env(s), ctx) for s in solutions)
        elif k is AssertionKind.ALL_TRUE:
            ok = all(_holds(a.cond, env(s), ctx) for s in solutions)
        elif k is AssertionKind.TRUE_NTH:
            ok = len(solutions) >= a.n and _holds(a.cond, env(solutions[a.n - 1]), ctx)
        elif k is AssertionKind.CARDINALITY:
            count = len(solutions)
            if a.var is None:
                ok = count == a.n
            elif a.var in extra or a.var in solutions[0]:
                ok = env(solutions[0])[a.var] == Int(count)
            else:
                extra[a.var] = Int(count)
                ok = True
        elif k is AssertionKind.TYPE_DECL:
            ok = _check_type(a, case, solutions, ctx)
        else:
            continue
        if not ok:
            return a
    return None


def run_suite(cases: list, ctx: SuiteContext) -> list:
    """Evaluate every case in order.  Suite-level problems are raised before
    anything runs."""
    for case in cases:
        check_exec_mode(case, compile_case(case, ctx), ctx)
    return [evaluate_testcase(case, ctx) for case in cases]


def render_text_report(outcomes: list) -> str:
    lines = []
    for o in outcomes:
        line = f"{o.name}: {o.status.value}"
        if o.detail:
            line += f" - {o.detail}"
        lines.append(line + "\n")
    passed = sum(o.passed for o in outcomes)
    lines.append(f"{passed}/{len(outcomes)} passed\n")
    return "".join(lines)
