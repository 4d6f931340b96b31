import random

import pytest

from tests.unit.generators import VARIABLES, random_ac_term, random_strategy, random_term
from twoscale.grammar import mk_B, mk_equals, mk_integral, mk_partial, mk_trace
from twoscale.parser import SyntaxContext, parse_condition, parse_strategy, parse_term
from twoscale.printer import format_condition, format_strategy, format_term, invert_macros
from twoscale.strategy import Rule, alpha_equal, outer_most, repeat, seq_all, top_down
from twoscale.terms import Var, app, const, make_list


def test_infix_parentheses():
    a, b, c = const("a"), const("b"), const("c")
    assert format_term(app("*", app("+", a, b), c)) == "(a + b) * c"
    assert format_term(app("+", a, app("*", b, c))) == "a + b * c"
    assert format_term(app("-", a, app("-", b, c))) == "a - (b - c)"
    assert format_term(app("-", app("-", a, b), c)) == "a - b - c"


def test_lists_and_variables():
    assert format_term(make_list([const("a"), Var("x")])) == "[a, ?x]"
    assert format_term(make_list([])) == "[]"


@pytest.mark.parametrize("seed", range(200))
def test_printed_terms_parse_back(seed):
    rng = random.Random(seed)
    t = random_ac_term(rng, 5) if seed % 2 else random_term(rng, 5, variables=VARIABLES)
    assert parse_term(format_term(t)) == t


def test_operator_shortcuts():
    u, x, y = Var("u"), Var("x"), Var("y")
    assert format_term(mk_integral(u, x)) == "Int(?u, ?x)"
    assert format_term(mk_partial(u, x)) == "D(?u, ?x)"
    assert format_term(mk_trace(u, x, y)) == "Tr(?u, ?x, ?y)"
    assert format_term(mk_B(u, make_list([y]), x, const("eps"))) == "B(?u, [?y], ?x, eps)"
    assert format_term(mk_equals(u, const("0"))) == "Eq(?u, 0)"
    assert format_term(mk_integral(u, x), shortcuts=False).startswith("Oper(Integral, ?u, [?x]")


def test_shortcuts_parse_back_in_grammar_mode():
    ctx = SyntaxContext(grammar=True)
    t = mk_equals(mk_integral(mk_partial(Var("u"), Var("x")), Var("x")), const("0"))
    assert parse_term(format_term(t), ctx) == t


def test_macros_fold_back():
    u = app("f", const("a"))
    macros = invert_macros({"u": u, "leaf": const("b")})
    assert macros == {u: "u"}
    assert format_term(app("g", u, const("b")), macros) == "g($u, b)"
    assert format_term(app("*", app("+", const("a"), const("b")), const("c")), {app("+", const("a"), const("b")): "s"}) == "$s * c"


def test_strategies():
    r = Rule(app("f", Var("x")), Var("x"), name="drop")
    assert format_strategy(r) == "rule(f(?x), ?x)"
    assert format_strategy(r, named=True) == "drop"
    assert format_strategy(top_down(r)) == "topdown(rule(f(?x), ?x))"
    assert format_strategy(repeat(r), named=True) == "repeat(drop)"
    assert format_strategy(outer_most(r)) == "outermost(rule(f(?x), ?x))"
    assert format_strategy(seq_all([r, r, r]), named=True) == "seq(drop, drop, drop)"


@pytest.mark.parametrize("seed", range(200))
def test_printed_strategies_parse_back(seed):
    s = random_strategy(random.Random(seed))
    assert alpha_equal(parse_strategy(format_strategy(s)), s)


def test_conditions():
    text = "empty(theta(?c)) and not (?x in {a, b})"
    cond = parse_condition(text)
    assert format_condition(cond) == text
    assert parse_condition(format_condition(cond)) == cond
    mixed = parse_condition("(?x = a or ?x = b) and ?y != c")
    assert format_condition(mixed) == "(?x = a or ?x = b) and ?y != c"
