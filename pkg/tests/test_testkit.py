import io

import pytest

from conftest import FIXTURES
from mertest.coverage.instrument import instrument, instrumented_source
from mertest.engine import ExceptionPolicy, LogicError
from mertest.goals import Call, subgoals
from mertest.modes import callee_table, compile_program, procedure_callees
from mertest.program import TypeExpr, parse_program
from mertest.syntax import ParseError
from mertest.testkit import (AssertionKind, ExecMode, Status, SuiteContext, TestCase,
                             TestOutcome, TestSuiteError, apply_renaming, evaluate_testcase,
                             parse_testsuite, render_text_report, run_suite)

REVERSE_BROKEN = """
:- pred append(list(T), list(T), list(T)).
:- mode append(in, in, out) is det.
append([], Y, Y).
append([E|Es], Y, [E|Zs]) :- append(Es, Y, Zs).
:- pred reverse(list(T), list(T)).
:- mode reverse(in, out) is det.
reverse([], []).
"""


def context(source, **kw):
    prog = parse_program(source)
    procs, _ = compile_program(prog)
    return SuiteContext(procs, callee_table(prog), prog, **kw)


@pytest.fixture(scope="module")
def lists():
    return (FIXTURES / "lists.m").read_text()


def run_one(source, text, **kw):
    (case,) = parse_testsuite(text)
    return evaluate_testcase(case, context(source, **kw))


def test_parse_example_one():
    (case,) = parse_testsuite("test(t1, [reverse([1,2],L)], [true(L=[2,1])]).")
    assert case.name == "t1"
    assert [g.name for g in case.code] == ["reverse"]
    assert [a.kind for a in case.assertions] == [AssertionKind.TRUE]


def test_parse_example_two():
    text = "test(t3, [member(X,[1,2,3,4])], [solutions_cardinality(N),true(N>3),all_true(X<5)])."
    (case,) = parse_testsuite(text)
    kinds = [a.kind for a in case.assertions]
    assert kinds == [AssertionKind.CARDINALITY, AssertionKind.TRUE, AssertionKind.ALL_TRUE]
    assert case.assertions[0].var == "N"


def test_parse_type_assertion():
    (case,) = parse_testsuite("test(t4, [append(L1,L2,[1,2,3])], [type(L2,list(int))]).")
    assert case.assertions[0].type == TypeExpr("list", (TypeExpr("int"),))


def test_duplicate_limit():
    with pytest.raises(ParseError, match="duplicate limit"):
        parse_testsuite("test(x,[p],[limit(2),limit(3)]).")


def test_unknown_assertion():
    with pytest.raises(ParseError, match="unknown assertion"):
        parse_testsuite("test(x,[p],[sometimes(X)]).")


def test_duplicate_test_name():
    with pytest.raises(ParseError, match="duplicate test name"):
        parse_testsuite("test(x,[p],[]).\ntest(x,[q],[]).")


def test_conflicting_expectations():
    with pytest.raises(ParseError, match="conflicting"):
        parse_testsuite("test(x,[p],[fail, exception]).")


def test_empty_code_rejected():
    with pytest.raises(ParseError):
        parse_testsuite("test(x,[],[]).")


def test_true_nth_needs_positive_index():
    with pytest.raises(ParseError):
        parse_testsuite("test(x,[p],[true(0, X = 1)]).")


def test_example_suite_passes(lists):
    cases = parse_testsuite((FIXTURES / "lists_suite.t").read_text())
    outcomes = run_suite(cases, context(lists))
    assert [o.status for o in outcomes] == [Status.SUCCEEDED] * 5


def test_broken_reverse_fails_by_failure():
    out = run_one(REVERSE_BROKEN, "test(t1, [reverse([1,2],L)], [true(L=[2,1])]).")
    assert out.status is Status.FAILED_FAILURE
    assert out.detail == "failed because of failure (instead of success)"


def test_limit_restricts_some_true(lists):
    text = "test(t, [member(X,[1,3,4,2])], [limit(1), some_true(X>1)])."
    assert run_one(lists, text).status is Status.CONDITION_FAILED
    text = "test(t, [member(X,[1,3,4,2])], [limit(2), some_true(X>1)])."
    assert run_one(lists, text).status is Status.SUCCEEDED


def test_true_checks_first_solution_only(lists):
    assert run_one(lists, "test(t, [member(X,[1,3])], [true(X=3)]).").status is Status.CONDITION_FAILED
    assert run_one(lists, "test(t, [member(X,[1,3])], [true(X=1)]).").status is Status.SUCCEEDED


def test_true_nth(lists):
    assert run_one(lists, "test(t, [member(X,[1,3])], [true(2, X=3)]).").status is Status.SUCCEEDED
    out = run_one(lists, "test(t, [member(X,[1,3])], [true(3, X=3)]).")
    assert out.status is Status.CONDITION_FAILED and "true(3" in out.detail


def test_cardinality_constant(lists):
    assert run_one(lists, "test(t, [member(X,[1,3])], [solutions_cardinality(2)]).").passed
    assert not run_one(lists, "test(t, [member(X,[1,3])], [solutions_cardinality(3)]).").passed


def test_cardinality_binds_variable_for_later_assertions(lists):
    text = "test(t, [member(X,[1,2,3,4])], [solutions_cardinality(N), true(N > 4)])."
    out = run_one(lists, text)
    assert out.status is Status.CONDITION_FAILED and "N > 4" in out.detail


def test_all_true_names_assertion(lists):
    out = run_one(lists, "test(t, [member(X,[1,9])], [all_true(X < 5)]).")
    assert out.detail == "condition failed: all_true(X < 5)"


def test_expected_failure(lists):
    assert run_one(lists, "test(t, [member(7,[1,2])], [fail]).").passed
    out = run_one(lists, "test(t, [member(1,[1,2])], [fail]).")
    assert out.status is Status.FAILED_UNEXPECTED_SUCCESS


def test_zero_solutions_dominates_all_true(lists):
    out = run_one(lists, "test(t, [member(X,[])], [all_true(X < 5)]).")
    assert out.status is Status.FAILED_FAILURE


def test_exception_from_code(lists):
    out = run_one(lists, "test(t, [throw(e)], []).")
    assert out.status is Status.FAILED_EXCEPTION and "e" in out.detail


def test_expected_exception(lists):
    assert run_one(lists, "test(t, [throw(e)], [exception, all_true(fail)]).").passed
    out = run_one(lists, "test(t, [member(1,[1])], [exception]).")
    assert out.status is Status.FAILED_UNEXPECTED_SUCCESS
    out = run_one(lists, "test(t, [member(2,[1])], [exception]).")
    assert out.status is Status.FAILED_FAILURE


def test_exception_in_condition_is_treated_like_code(lists):
    out = run_one(lists, "test(t, [member(X,[1])], [true(throw(bad))]).")
    assert out.status is Status.FAILED_EXCEPTION


def test_debug_policy_propagates(lists):
    with pytest.raises(LogicError):
        run_one(lists, "test(t, [throw(e)], []).", policy=ExceptionPolicy.PROPAGATE)


def test_type_declaration_checked(lists):
    ok = "test(t4, [append(L1,L2,[1,2,3])], [type(L2,list(int))])."
    assert run_one(lists, ok).passed
    bad = "test(t4, [append(L1,L2,[1,2,3])], [type(L2,int)])."
    out = run_one(lists, bad)
    assert out.status is Status.CONDITION_FAILED and "type(L2, int)" in out.detail


def test_print_rejected_in_multi_mode(lists):
    with pytest.raises(TestSuiteError, match="io mode"):
        run_one(lists, "test(t, [print(hello)], []).")


def test_io_mode_prints(lists):
    buf = io.StringIO()
    out = run_one(lists, "test(t, [reverse([1,2],L), print(L)], []).", mode=ExecMode.IO, out=buf)
    assert out.passed and buf.getvalue() == "[2, 1]\n"


def test_io_mode_requires_det(lists):
    with pytest.raises(TestSuiteError, match="det"):
        run_one(lists, "test(t, [member(X,[1,2])], []).", mode=ExecMode.IO)


def test_suite_level_error_before_execution(lists):
    buf = io.StringIO()
    cases = parse_testsuite("test(a, [print(one)], []).\ntest(b, [print(two)], []).")
    with pytest.raises(TestSuiteError):
        run_suite(cases, context(lists, out=buf))
    assert buf.getvalue() == ""


def test_report_summary():
    outcomes = [TestOutcome(f"t{i}", Status.SUCCEEDED) for i in range(3)]
    assert render_text_report(outcomes).splitlines()[-1] == "3/3 passed"
    assert render_text_report([]) == "0/0 passed\n"


def test_report_failure_line():
    line = render_text_report([TestOutcome("t1", Status.FAILED_FAILURE,
                                           "failed because of failure (instead of success)")])
    assert "t1: failed_failure - failed because of failure (instead of success)" in line


def test_report_is_deterministic(lists):
    cases = parse_testsuite((FIXTURES / "lists_suite.t").read_text())
    a = render_text_report(run_suite(cases, context(lists)))
    b = render_text_report(run_suite(cases, context(lists)))
    assert a == b


# -- renaming ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def instrumented(lists):
    prog = parse_program(lists)
    procs, table = compile_program(prog)
    inst, _ = instrument(procs, prog.type_defs)
    inst_prog = parse_program(instrumented_source(inst, prog.type_defs))
    inst_procs, _ = compile_program(inst_prog, rename=False)
    return inst_prog, inst_procs, table


def _calls(case):
    return [g.name for goal in case.code for g in subgoals(goal) if isinstance(g, Call)]


def test_renaming_selects_mode(instrumented):
    _, procs, table = instrumented
    (case,) = apply_renaming(parse_testsuite("test(t, [member(X,[1,2])], [])."), table, procs)
    assert _calls(case) == ["member__m1"]
    (case,) = apply_renaming(parse_testsuite("test(t, [member(1,[1,2])], [])."), table, procs)
    assert _calls(case) == ["member__m0"]


def test_renaming_follows_left_to_right_instantiation(instrumented):
    _, procs, table = instrumented
    text = "test(t, [append(A, B, [1,2]), append(A, B, C)], [])."
    (case,) = apply_renaming(parse_testsuite(text), table, procs)
    assert _calls(case) == ["append__m1", "append__m0"]


def test_empty_table_is_identity(instrumented):
    from mertest.modes import RenamingTable
    _, procs, _ = instrumented
    cases = parse_testsuite("test(t, [member(X,[1,2])], []).")
    assert apply_renaming(cases, RenamingTable(), procs) == cases


def test_unknown_call_unchanged(instrumented):
    _, procs, table = instrumented
    (case,) = apply_renaming(parse_testsuite("test(t, [length([1], N)], [])."), table, procs)
    assert _calls(case) == ["length"]


def test_renamed_suite_gives_same_outcomes(lists, instrumented):
    inst_prog, procs, table = instrumented
    cases = parse_testsuite((FIXTURES / "lists_suite.t").read_text())
    plain = run_suite(cases, context(lists))
    renamed = apply_renaming(cases, table, procs)
    events = []
    ctx = SuiteContext(procs, procedure_callees(procs), inst_prog, log_sink=events.append)
    assert run_suite(renamed, ctx) == plain
    assert events
