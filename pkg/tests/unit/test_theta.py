import logging
import random

import pytest

from tests.unit.generators import random_model_text
from twoscale.corpus import RuleBase
from twoscale.grammar import (
    INDEXED_FUN,
    INDEXED_VAR,
    mk_B,
    mk_equals,
    mk_fun,
    mk_integral,
    mk_partial,
    mk_reg,
    mk_sum,
    mk_T,
    mk_Tstar,
    mk_trace,
    mk_var,
)
from twoscale.modulo import EquationalTheory
from twoscale.parser import parse_condition, parse_term
from twoscale.terms import MEM, App, Var, app, const, make_list
from twoscale.theta import ConditionEvaluator, GuardViolated, IllTyped, theta

OMEGA = mk_reg("Omega", [1])
OMEGA1 = mk_reg("Omega1", [1])
GAMMA1 = mk_reg("Gamma1", [1])
X = mk_var("x", OMEGA)
Y = mk_var("y", OMEGA1)
YG = mk_var("y", GAMMA1)
EPS = const("eps")
U = mk_fun("u", [X])
U1 = mk_fun("u1", [X, Y])
V = mk_fun("v", [X])


def test_leaves():
    assert theta(X) == {X}
    assert theta(U) == {X}
    assert theta(U1) == {X, Y}
    assert theta(EPS) == set()
    assert theta(const("-1")) == set()
    assert theta(app("*", EPS, U1)) == {X, Y}


def test_indexed():
    assert theta(App(INDEXED_VAR, (X, const("i")))) == {X}
    assert theta(App(INDEXED_FUN, (U1, const("i")))) == {X, Y}


def test_integral_removes_its_variable():
    assert theta(mk_integral(U1, Y)) == {X}
    assert theta(mk_integral(mk_integral(U1, Y), X)) == set()


def test_derivative():
    assert theta(mk_partial(U1, Y)) == {X, Y}


def test_derivative_of_independent_term(caplog):
    with caplog.at_level(logging.WARNING):
        assert theta(mk_partial(U, Y)) == set()
    assert "independent of its variable" in caplog.text


def test_restriction_gives_its_codomain():
    assert theta(mk_trace(U1, Y, YG)) == {YG}


def test_two_scale_operators():
    t = mk_T(U, X, make_list([X, Y]), EPS)
    assert theta(t) == {X, Y}
    assert theta(mk_Tstar(U1, make_list([X, Y]), X, EPS)) == {X}
    assert theta(mk_B(V, make_list([X, Y]), X, EPS)) == {X}


@pytest.mark.parametrize(
    "build",
    [
        lambda: mk_T(mk_fun("w", [Y]), X, make_list([X, Y]), EPS),
        lambda: mk_Tstar(EPS, make_list([X, Y]), X, EPS),
        lambda: mk_B(mk_fun("w"), make_list([X, Y]), X, EPS),
    ],
)
def test_guard(build):
    with pytest.raises(GuardViolated):
        theta(build())


def test_sum_and_equation():
    i = mk_var("i", OMEGA1)
    assert theta(mk_sum(mk_fun("w", [X, i]), i)) == {X}
    assert theta(mk_equals(U, mk_integral(U1, X))) == {X, Y}


def test_ill_typed():
    with pytest.raises(IllTyped):
        theta(Var("u"))
    with pytest.raises(IllTyped):
        theta(OMEGA)


def holds(text, **sigma):
    return ConditionEvaluator().holds(parse_condition(text), sigma)


def test_conditions():
    assert holds("empty(theta(?c))", c=EPS)
    assert not holds("empty(theta(?c))", c=U)
    assert holds("disjoint(theta(?c), theta(?x))", c=EPS, x=X)
    assert holds("subset(theta(?x), theta(?u))", x=X, u=U1)
    assert holds("?x in theta(?u)", x=Y, u=U1)
    assert holds("theta(?u) = {?x, ?y}", u=U1, x=Y, y=X)
    assert holds("occurs(?x, ?u)", x=X, u=U1)
    assert holds("not occurs(?y, ?u) and ?u != ?x", y=Y, u=U, x=X)
    assert holds("false or true")


def test_equality_is_modulo_theory():
    cond = parse_condition("?a = ?b")
    sigma = {"a": app("+", EPS, const("kappa")), "b": app("+", const("kappa"), EPS)}
    assert not ConditionEvaluator().holds(cond, sigma)
    assert ConditionEvaluator(EquationalTheory.ac("+")).holds(cond, sigma)


def test_condition_errors():
    with pytest.raises(IllTyped):
        ConditionEvaluator().holds(parse_condition("empty(theta(?c))"), {})
    with pytest.raises(IllTyped):
        ConditionEvaluator().evaluate(app("maybe", EPS))
    with pytest.raises(IllTyped):
        ConditionEvaluator().holds(parse_condition("subset(?a, theta(?a))"), {"a": U})


@pytest.fixture(scope="module")
def reference():
    return RuleBase.load("reference")


@pytest.mark.parametrize("seed", range(200))
def test_memory_is_transparent(reference, seed):
    t = parse_term(random_model_text(random.Random(seed)), reference.ctx)
    assert theta(App(MEM, (t, make_list([const("a")])))) == theta(t)


@pytest.mark.parametrize("seed", range(200))
def test_integral_binds_its_variable(reference, seed):
    rng = random.Random(seed)
    t = parse_term(random_model_text(rng), reference.ctx)
    x = reference.ctx.macros[rng.choice(["x", "xs", "x1"])]
    bound = theta(mk_integral(t, x))
    assert x not in bound
    assert bound == theta(t) - {x}
