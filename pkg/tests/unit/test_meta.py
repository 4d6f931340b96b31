import random

import pytest

from tests.unit.generators import random_strategy
from twoscale.meta import IDENTITY, MalformedReification, SoFail, reflect, reify, so_compose, so_eval
from twoscale.parser import parse_strategy, parse_term
from twoscale.strategy import (
    Child,
    Choice,
    Eta,
    FixVar,
    Mu,
    Rule,
    Seq,
    Some,
    UnboundFixVar,
    alpha_equal,
    eval_strategy,
    repeat,
    rules_of,
    top_down,
)
from twoscale.terms import Var, app, const

DROP = Rule(app("f", Var("x")), Var("x"), name="drop")


def test_reify_rule():
    assert reify(DROP) == app("rule", app("f", const("@x")), const("@x"))
    guarded = Rule(app("f", Var("x")), Var("x"), app("neq", Var("x"), const("a")))
    assert reify(guarded) == app(
        "crule", app("f", const("@x")), const("@x"), app("neq", const("@x"), const("a"))
    )


def test_reify_combinators():
    s = Mu("X", Choice(DROP, Some(FixVar("X"))))
    assert reify(s) == app("mu", const("#X"), app("choice", reify(DROP), app("some", const("#X"))))
    assert reify(Child(2, Eta(DROP))) == app("child", const("2"), app("eta", reify(DROP)))
    assert reify(Seq(DROP, DROP)) == app("seq", reify(DROP), reify(DROP))


@pytest.mark.parametrize("seed", range(200))
def test_reflect_inverts_reify(seed):
    s = random_strategy(random.Random(seed))
    assert reflect(reify(s)) == s


@pytest.mark.parametrize(
    "term, position",
    [
        (Var("s"), ()),
        (const("@x"), ()),
        (app("seq", reify(DROP), const("junk")), (2,)),
        (app("child", const("0"), reify(DROP)), (1,)),
        (app("mu", const("X"), reify(DROP)), (1,)),
        (app("rule", const("#X"), const("a")), (1,)),
        (app("eta", app("frob", reify(DROP))), (1,)),
    ],
)
def test_malformed(term, position):
    with pytest.raises(MalformedReification) as error:
        reflect(term)
    assert error.value.position == position


def test_so_rewrites_rules():
    pi = parse_strategy("eta(outermost(rule(d(?w), d2(?w, i))))")
    s = Rule(app("d", Var("u")), const("0"), name="d_const")
    result = so_eval(pi, s)
    assert result == Rule(app("d2", Var("u"), const("i")), const("0"))
    assert isinstance(result, Rule)
    assert result.name == "d_const"


def test_so_rewrites_inside_fixed_points():
    pi = parse_strategy("outermost(rule(a, c))")
    s = top_down(Rule(const("a"), const("b"), name="ab"))
    result = so_eval(pi, s)
    assert result == top_down(Rule(const("c"), const("b")))
    assert [r.name for r in rules_of(result)] == ["ab"]


def test_so_failure():
    with pytest.raises(SoFail):
        so_eval(parse_strategy("rule(nothing, anything)"), DROP)


def test_so_result_must_be_a_strategy():
    with pytest.raises(MalformedReification):
        so_eval(parse_strategy("rule(rule(?l, ?r), ?l)"), DROP)


def test_so_needs_a_closed_strategy():
    with pytest.raises(UnboundFixVar):
        so_eval(IDENTITY, Some(FixVar("X")))


def test_identity():
    s = top_down(DROP)
    assert so_eval(IDENTITY, s) == s


def test_compose():
    first = parse_strategy("eta(outermost(rule(a, b)))")
    second = parse_strategy("eta(outermost(rule(b, c)))")
    assert so_compose(first, second) == Seq(first, second)
    s = Rule(app("f", const("a")), const("a"))
    assert so_eval(so_compose(first, second), s) == Rule(app("f", const("c")), const("c"))


def test_quoted_strategies_are_terms():
    assert parse_term("quote(topdown(rule(f(?x), ?x)))") == reify(top_down(DROP))


SCALE = parse_strategy("rule(T(D(?u, x), Omega), eps^-1*D(T(?u, Omega), y), x in Omega)")
INDEX_DERIVATIVES = parse_strategy("eta(outermost(rule(D(?v, ?z), D(?v, idx(?z, i)))))")
INDEX_REGION = parse_strategy("eta(outermost(rule(Omega, Omegaj)))")


def test_independent_extensions_commute():
    indexed = so_eval(INDEX_DERIVATIVES, SCALE)
    assert indexed == parse_strategy(
        "rule(T(D(?u, idx(x, i)), Omega), eps^-1*D(T(?u, Omega), idx(y, i)), x in Omega)"
    )
    restricted = so_eval(INDEX_REGION, SCALE)
    assert restricted == parse_strategy("rule(T(D(?u, x), Omegaj), eps^-1*D(T(?u, Omegaj), y), x in Omegaj)")
    both = parse_strategy("rule(T(D(?u, idx(x, i)), Omegaj), eps^-1*D(T(?u, Omegaj), idx(y, i)), x in Omegaj)")
    assert so_eval(INDEX_REGION, indexed) == both
    assert so_eval(INDEX_DERIVATIVES, restricted) == both
    assert so_eval(so_compose(INDEX_DERIVATIVES, INDEX_REGION), SCALE) == both
    assert so_eval(so_compose(INDEX_REGION, INDEX_DERIVATIVES), SCALE) == both


KRONECKER = (
    "lchoice(topdown(rule(D(idx(?x, ?i), idx(?y, ?j)), delta(?i, ?j), ?x = ?y)), "
    "topdown(rule(delta(?i, ?j), 1, ?i = ?j)), topdown(rule(delta(?i, ?j), 0, ?i != ?j)))"
)


def test_extension_replaces_a_strategy():
    unit = parse_strategy("topdown(rule(D(?x, ?x), 1))")
    pi = parse_strategy(f"topdown(rule(quote(topdown(rule(D(?x, ?x), 1))), quote(normalizer({KRONECKER}))))")
    result = so_eval(pi, unit)
    assert alpha_equal(result, parse_strategy(f"normalizer({KRONECKER})"))
    simplify = repeat(result.body.first)
    t = parse_term("D(idx(x, i), idx(x, j)) + D(idx(x, i), idx(x, i))")
    assert eval_strategy(simplify, t) == parse_term("0 + 1")
    assert eval_strategy(unit, parse_term("D(x, x)")) == const("1")
