import pytest
from hypothesis import given, strategies as st

from mertest.syntax import ParseError, parse_term, read_terms
from mertest.terms import CONS, NIL, Int, Struct, Var, format_term, list_items, make_list, strip_spans


def test_list_sugar_expands_to_cons():
    t = parse_term("[1,2]")
    assert t == Struct(CONS, (Int(1), Struct(CONS, (Int(2), Struct(NIL)))))


def test_compound_with_variable():
    assert parse_term("h(Arg)") == Struct("h", (Var("Arg"),))


def test_variable():
    assert parse_term("X") == Var("X")


def test_list_with_tail():
    assert parse_term("[a, b | T]") == make_list([Struct("a"), Struct("b")], Var("T"))


def test_operator_precedence():
    assert parse_term("X is 1 + 2 * 3") == Struct("is", (Var("X"), Struct("+", (
        Int(1), Struct("*", (Int(2), Int(3)))))))


def test_negative_integer_literal():
    assert parse_term("f(-3)") == Struct("f", (Int(-3),))


def test_if_then_else_term():
    t = parse_term("( if X > 1 then Y = a else Y = b )")
    assert t.name == "$ite" and t.arity == 3


def test_anonymous_variables_are_distinct():
    t = parse_term("f(_, _)")
    assert t.args[0] != t.args[1]


def test_comments_are_skipped():
    terms = read_terms("% line\np(a). /* block\n comment */ q(b).")
    assert [strip_spans(t) for t in terms] == [Struct("p", (Struct("a"),)), Struct("q", (Struct("b"),))]


def test_quoted_atom():
    assert parse_term("'hello world'") == Struct("hello world")


def test_syntax_error_has_position():
    with pytest.raises(ParseError) as info:
        read_terms("p(a.\n")
    assert info.value.line == 1


def test_missing_end_dot():
    with pytest.raises(ParseError):
        read_terms("p(a)")


def test_spans_recorded():
    t = parse_term("f(X,\n  g(Y))")
    assert t.span[:2] == (1, 1)
    assert t.args[1].span[:2] == (2, 3)


atoms = st.sampled_from(["a", "b", "foo", "[]", "hello world", "x1", "+", "if"])
ints = st.integers(min_value=-1000, max_value=1000).map(Int)
variables = st.sampled_from(["X", "Y", "Zs", "_G1"]).map(Var)


def _compound(children):
    names = st.sampled_from(["f", "g", "h", "=", "+", "-", "*", ",", ";", "is", "<", "not", "'q r'"])
    return st.one_of(
        st.tuples(names, st.lists(children, min_size=1, max_size=3)).map(
            lambda p: Struct(p[0].strip("'"), tuple(p[1]))),
        st.lists(children, max_size=3).map(make_list),
        st.tuples(st.lists(children, min_size=1, max_size=2), variables).map(
            lambda p: make_list(p[0], p[1])),
    )


terms = st.recursive(st.one_of(atoms.map(Struct), ints, variables), _compound, max_leaves=12)


@given(terms)
def test_format_then_parse_round_trips(term):
    assert strip_spans(parse_term(format_term(term))) == term


def test_list_items_rejects_partial_list():
    assert list_items(make_list([Int(1)], Var("T"))) is None
