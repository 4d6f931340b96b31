import random

import pytest

from tests.unit.generators import VARIABLES, random_linear_pattern, random_term
from twoscale import __version__
from twoscale.terms import (
    MEM,
    App,
    ArityMismatch,
    InvalidPosition,
    NoMatch,
    Signature,
    Symbol,
    UnknownSymbol,
    Var,
    app,
    apply_subst,
    const,
    depth,
    erase_mem,
    list_items,
    make_list,
    match_at_root,
    numeral,
    occurs,
    positions,
    replace_at,
    size,
    subterm_at,
    subterms,
    try_match,
    vars_of,
)

SEEDS = range(200)


def test_version():
    assert __version__ == "0.1.0"


def test_arity_is_checked():
    with pytest.raises(ArityMismatch):
        App(Symbol("f", 2), (const("a"),))


def test_negative_arity():
    with pytest.raises(ValueError):
        Symbol("f", -1)


def test_terms_are_values():
    assert app("f", const("a")) == app("f", const("a"))
    assert hash(app("f", const("a"))) == hash(app("f", const("a")))
    assert app("f", const("a")) != app("f", const("b"))
    assert const("f") != app("f", const("a"))


def test_size_and_depth():
    t = app("g", app("f", const("a")), Var("x"))
    assert size(t) == 4
    assert depth(t) == 3
    assert vars_of(t) == {"x"}
    assert size(const("a")) == 1
    assert depth(Var("x")) == 1


def test_lists():
    items = [const("a"), numeral(1), Var("x")]
    assert list_items(make_list(items)) == items
    assert list_items(make_list([])) == []
    assert list_items(app("cons", const("a"), const("b"))) is None


def test_subterm_and_replace():
    t = app("g", app("f", const("a")), const("b"))
    assert subterm_at(t, ()) == t
    assert subterm_at(t, (1, 1)) == const("a")
    assert replace_at(t, (1, 1), const("c")) == app("g", app("f", const("c")), const("b"))
    assert replace_at(t, (), const("c")) == const("c")


@pytest.mark.parametrize("position", [(3,), (0,), (1, 2), (2, 1)])
def test_invalid_position(position):
    t = app("g", app("f", const("a")), const("b"))
    with pytest.raises(InvalidPosition):
        subterm_at(t, position)
    with pytest.raises(InvalidPosition):
        replace_at(t, position, const("c"))


def test_positions_are_preorder():
    t = app("g", app("f", const("a")), const("b"))
    assert list(positions(t)) == [(), (1,), (1, 1), (2,)]
    assert [subterm_at(t, p) for p in positions(t)] == list(subterms(t))


@pytest.mark.parametrize("seed", SEEDS)
def test_positions_count_nodes(seed):
    t = random_term(random.Random(seed), 5, variables=VARIABLES)
    assert len(list(positions(t))) == size(t)


@pytest.mark.parametrize("seed", SEEDS)
def test_replace_at_own_subterm_is_identity(seed):
    rng = random.Random(seed)
    t = random_term(rng, 5)
    position = rng.choice(list(positions(t)))
    assert replace_at(t, position, subterm_at(t, position)) == t


@pytest.mark.parametrize("seed", SEEDS)
def test_replace_then_read_back(seed):
    rng = random.Random(seed)
    t = random_term(rng, 5)
    s = random_term(rng, 3)
    position = rng.choice(list(positions(t)))
    assert subterm_at(replace_at(t, position, s), position) == s


@pytest.mark.parametrize("seed", SEEDS)
def test_match_instance_of_pattern(seed):
    rng = random.Random(seed)
    pattern = random_linear_pattern(rng)
    sigma = {name: random_term(rng, 3) for name in vars_of(pattern)}
    subject = apply_subst(sigma, pattern)
    found = match_at_root(pattern, subject)
    assert apply_subst(found, pattern) == subject
    assert set(found) == vars_of(pattern)


def test_nonlinear_match():
    pattern = app("g", Var("x"), Var("x"))
    assert try_match(pattern, app("g", const("a"), const("a"))) == {"x": const("a")}
    assert try_match(pattern, app("g", const("a"), const("b"))) is None
    with pytest.raises(NoMatch):
        match_at_root(pattern, app("g", const("a"), const("b")))


def test_match_checks_heads():
    assert try_match(app("f", Var("x")), app("g", const("a"), const("a"))) is None
    assert try_match(const("a"), const("b")) is None


def test_occurs():
    t = app("g", app("f", const("a")), const("b"))
    assert occurs(const("a"), t)
    assert occurs(app("f", const("a")), t)
    assert not occurs(const("c"), t)


def test_signature():
    sig = Signature()
    sig.declare("f", 1)
    assert "f" in sig
    assert sig.symbol("f", 1) == Symbol("f", 1)
    assert sig.symbol("-12", 0) == Symbol("-12", 0)
    with pytest.raises(UnknownSymbol):
        sig.symbol("g", 1)
    with pytest.raises(ArityMismatch):
        sig.symbol("f", 2)
    with pytest.raises(ArityMismatch):
        sig.declare("f", 2)


def test_signature_check():
    sig = Signature({"f": 1, "a": 0})
    sig.check(app("f", const("a")))
    with pytest.raises(UnknownSymbol):
        sig.check(app("f", const("b")))


def test_erase_mem():
    t = app("f", App(MEM, (const("a"), make_list([const("b")]))))
    assert erase_mem(t) == app("f", const("a"))
    assert erase_mem(Var("x")) == Var("x")


def random_subst(rng):
    return {v: random_term(rng, 3) for v in VARIABLES if rng.random() < 0.7}


@pytest.mark.parametrize("seed", SEEDS)
def test_substitution_is_a_homomorphism(seed):
    rng = random.Random(seed)
    t1 = random_term(rng, 4, variables=VARIABLES)
    t2 = random_term(rng, 4, variables=VARIABLES)
    sigma = random_subst(rng)
    g = app("g", t1, t2)
    assert apply_subst(sigma, g) == app("g", apply_subst(sigma, t1), apply_subst(sigma, t2))
    assert vars_of(apply_subst(sigma, g)) == vars_of(g) - set(sigma)


@pytest.mark.parametrize("seed", SEEDS)
def test_substitutions_compose(seed):
    rng = random.Random(seed)
    t = random_term(rng, 4, variables=VARIABLES)
    first = {v: random_term(rng, 3, variables=VARIABLES) for v in VARIABLES if rng.random() < 0.7}
    second = random_subst(rng)
    composed = {v: apply_subst(second, s) for v, s in first.items()}
    composed.update({v: s for v, s in second.items() if v not in first})
    assert apply_subst(second, apply_subst(first, t)) == apply_subst(composed, t)
