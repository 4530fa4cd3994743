from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from corpus import random_program
from harness import compile_all, oracle_counts, solution_key
from mertest.coverage.instrument import (CounterMeta, MetaEntry, instrument, instrumented_source,
                                         is_instrumented, label_program, labelled_source,
                                         naive_instrument, switch_trees)
from mertest.goals import Call, Label, subgoals
from mertest.modes import check_determinism, compile_program
from mertest.program import parse_program


@pytest.fixture
def dispatch(dispatch_source):
    prog = parse_program(dispatch_source)
    procs, _ = compile_program(prog)
    return prog, procs


def _labels(procs):
    return [g.id for p in procs for g in subgoals(p.body) if isinstance(g, Label)]


def test_labels_dense_in_textual_order(lists_source):
    procs, _ = compile_program(parse_program(lists_source))
    labelled, meta = label_program(procs)
    labels = _labels(labelled)
    assert labels == list(range(1, len(labels) + 1))
    assert meta.labels() == set(labels)


def test_single_goal_body():
    procs, _ = compile_program(parse_program(":- mode p(out) is det.\np(X) :- X = 1.\n"))
    labelled, meta = label_program(procs)
    assert _labels(labelled) == [1, 2]
    kinds = {(e.enter, e.exit, e.kind) for e in meta.entries}
    assert kinds == {(1, 2, "goal"), (1, 2, "procedure")}


def test_every_label_belongs_to_a_goal_entry(lists_source):
    procs, _ = compile_program(parse_program(lists_source))
    labelled, meta = label_program(procs)
    bordered = set()
    for e in meta.entries:
        if e.kind != "procedure":
            bordered |= {e.enter, e.exit}
    assert bordered == set(_labels(labelled))


def test_meta_round_trip(dispatch):
    _, procs = dispatch
    _, meta = label_program(procs)
    assert CounterMeta.loads(meta.dumps()) == meta


def test_meta_rejects_bad_kind():
    with pytest.raises(ValueError):
        CounterMeta.loads("1\t2\tloop\tp\t-\t-\n")


def test_meta_entry_kinds(dispatch):
    _, procs = dispatch
    _, meta = label_program(procs)
    dsp = [e for e in meta.entries if e.proc_name == "dispatch__m0"]
    assert [e.kind for e in dsp].count("switch") == 2
    assert sum(e.kind == "procedure" for e in dsp) == 1


def test_meta_spans_point_into_labelled_source(dispatch):
    prog, procs = dispatch
    labelled, meta = label_program(procs, prog.type_defs)
    lines = labelled_source(labelled, prog.type_defs).splitlines()
    for e in meta.entries:
        if e.kind == "goal":
            sl, sc, el, ec = e.span
            assert sl == el
            text = lines[sl - 1][sc - 1:ec - 1]
            assert text and not text.startswith("log(") and not text.endswith(",")


def test_naive_logging_breaks_det_switch(dispatch):
    _, procs = dispatch
    labelled, _ = label_program(procs)
    diags = check_determinism(naive_instrument(labelled))
    assert diags and all("regular disjunction in det procedure dispatch__m0" in d.message for d in diags)


def test_batched_logging_keeps_det_switch(dispatch):
    _, procs = dispatch
    inst, _ = instrument(procs)
    assert check_determinism(inst) == []


def test_batch_goals_at_leaves(dispatch):
    _, procs = dispatch
    inst, _ = instrument(procs)
    dsp = next(p for p in inst if p.proc_name == "dispatch__m0")
    batches = [g.args[1].value for g in subgoals(dsp.body) if isinstance(g, Call) and g.name == "$batch"]
    logs = [g.args[0].value for g in subgoals(dsp.body) if isinstance(g, Call) and g.name == "log"]
    switches = [g for g in subgoals(dsp.body) if isinstance(g, Call) and g.name == "$switch"]
    # fragment numbering shifted by the procedure's opening label
    assert batches == [3, 9, 12]
    assert logs == [1, 4, 13, 14, 15, 16]
    assert len(switches) == 1


def test_no_disjunction_means_plain_logs():
    procs, _ = compile_program(parse_program(":- mode p(in, out) is det.\np(X, Y) :- Y = X.\n"))
    inst, _ = instrument(procs)
    assert [g.name for g in subgoals(inst[0].body) if isinstance(g, Call)] == ["log", "log"]


def test_regular_disjunction_in_nondet_keeps_plain_logs():
    src = ":- mode p(in, out) is nondet.\np(X, Y) :- ( Y = X ; Y = 1 ).\n"
    procs, _ = compile_program(parse_program(src))
    inst, _ = instrument(procs)
    names = {g.name for g in subgoals(inst[0].body) if isinstance(g, Call)}
    assert names == {"log"}


def test_switch_under_negation_is_logged_per_label():
    src = (":- mode p(in) is semidet.\n"
           "p(X) :- not (( X = a ; X = b )).\n")
    procs, _ = compile_program(parse_program(src))
    assert switch_trees(label_program(procs)[0][0]) == {}
    _, meta = label_program(procs)
    assert any("negation" in e.note for e in meta.entries if e.kind == "switch")


def test_instrumented_program_detected(dispatch):
    prog, procs = dispatch
    inst, _ = instrument(procs)
    assert is_instrumented(inst)
    assert not is_instrumented(prog)
    assert is_instrumented(parse_program(instrumented_source(inst, prog.type_defs)))


@pytest.mark.parametrize("x", ["f", "g", "h(3)"])
def test_dispatch_counts_match_oracle(dispatch_source, x):
    c = compile_all(dispatch_source)
    trace, replayed, r1, r2 = oracle_counts(c, f"dispatch({x}, Out)")
    assert trace == replayed
    assert [s.bindings for s in r1.solutions] == [s.bindings for s in r2.solutions]


def test_list_library_counts_match_oracle(lists_source):
    c = compile_all(lists_source)
    for q in ["member(X, [1,3,4,2])", "member(3, [1,2,3])", "member(5, [1,2])",
              "append(A, B, [1,2,3])", "append([1], [2], L)", "reverse([1,2,3], R)"]:
        trace, replayed, _, _ = oracle_counts(c, q)
        assert trace == replayed, q


@given(seed=st.integers(0, 100_000))
@settings(max_examples=40, deadline=None)
def test_batched_counts_match_trace(seed):
    gp = random_program(seed)
    c = compile_all(gp.source)
    for q in gp.queries:
        trace, replayed, r1, r2 = oracle_counts(c, q)
        assert trace == replayed
        assert solution_key(r1) == solution_key(r2)
