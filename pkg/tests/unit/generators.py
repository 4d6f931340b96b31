import random
from typing import List, Sequence, Tuple

from twoscale.strategy import Choice, Child, Eta, FixVar, Mu, Rule, Seq, Some, Strategy
from twoscale.terms import App, Symbol, Term, Var

SYMBOLS: Sequence[Symbol] = (
    Symbol("a", 0),
    Symbol("b", 0),
    Symbol("c", 0),
    Symbol("f", 1),
    Symbol("g", 2),
    Symbol("h", 3),
)

AC_SYMBOLS: Sequence[Symbol] = (Symbol("+", 2), Symbol("*", 2))

VARIABLES: Sequence[str] = ("x", "y", "z")


def random_term(
    rng: random.Random,
    depth: int = 4,
    *,
    symbols: Sequence[Symbol] = SYMBOLS,
    variables: Sequence[str] = (),
) -> Term:
    leaves = [s for s in symbols if s.arity == 0]
    if depth <= 1 or rng.random() < 0.25:
        if variables and rng.random() < 0.3:
            return Var(rng.choice(list(variables)))
        return App(rng.choice(leaves))
    head = rng.choice([s for s in symbols if s.arity > 0])
    return App(head, tuple(random_term(rng, depth - 1, symbols=symbols, variables=variables) for _ in range(head.arity)))


def random_ac_term(rng: random.Random, depth: int = 4) -> Term:
    return random_term(rng, depth, symbols=tuple(SYMBOLS) + tuple(AC_SYMBOLS))


def random_linear_pattern(rng: random.Random, depth: int = 3, *, symbols: Sequence[Symbol] = SYMBOLS) -> Term:
    """Pattern in which every rewrite variable occurs at most once."""
    counter = [0]

    def _walk(d: int) -> Term:
        if d <= 1 or rng.random() < 0.3:
            if rng.random() < 0.5:
                counter[0] += 1
                return Var(f"v{counter[0]}")
            return App(rng.choice([s for s in symbols if s.arity == 0]))
        head = rng.choice([s for s in symbols if s.arity > 0])
        return App(head, tuple(_walk(d - 1) for _ in range(head.arity)))

    return _walk(depth)


def random_rule(rng: random.Random) -> Rule:
    lhs = random_term(rng, 3, variables=VARIABLES)
    rhs_vars = sorted(n.name for n in _vars(lhs))
    rhs = random_term(rng, 3, variables=rhs_vars)
    return Rule(lhs, rhs)


def _vars(t: Term) -> List[Var]:
    if isinstance(t, Var):
        return [t]
    return [v for c in t.children for v in _vars(c)]


def random_strategy(rng: random.Random, depth: int = 4, bound: Tuple[str, ...] = ()) -> Strategy:
    """Closed strategy over random rules; recursion only under Some or Child."""
    if depth <= 1 or rng.random() < 0.2:
        return random_rule(rng)
    choice = rng.randrange(7)
    if choice == 0:
        return Seq(random_strategy(rng, depth - 1, bound), random_strategy(rng, depth - 1, bound))
    if choice == 1:
        return Choice(random_strategy(rng, depth - 1, bound), random_strategy(rng, depth - 1, bound))
    if choice == 2:
        return Eta(random_strategy(rng, depth - 1, bound))
    if choice == 3:
        if bound and rng.random() < 0.5:
            return Some(FixVar(rng.choice(list(bound))))
        return Some(random_strategy(rng, depth - 1, bound))
    if choice == 4:
        return Child(rng.randint(1, 3), random_strategy(rng, depth - 1, bound))
    name = f"X{len(bound) + 1}"
    return Mu(name, Choice(random_strategy(rng, depth - 1, bound + (name,)), Some(FixVar(name))))


def random_ac_pattern(rng: random.Random, depth: int = 3) -> Term:
    return random_linear_pattern(rng, depth, symbols=tuple(SYMBOLS) + tuple(AC_SYMBOLS))


def shuffle_ac(rng: random.Random, t: Term, heads: Sequence[str] = ("+", "*")) -> Term:
    """An AC-equal variant of t: operands permuted and regrouped at random."""
    if isinstance(t, Var) or not t.children:
        return t
    if t.head.name in heads and t.head.arity == 2:
        operands = [shuffle_ac(rng, o, heads) for o in _operands(t, t.head)]
        rng.shuffle(operands)
        while len(operands) > 1:
            i = rng.randrange(len(operands) - 1)
            operands[i : i + 2] = [App(t.head, (operands[i], operands[i + 1]))]
        return operands[0]
    return App(t.head, tuple(shuffle_ac(rng, c, heads) for c in t.children))


def _operands(t: Term, head: Symbol) -> List[Term]:
    if isinstance(t, App) and t.head == head:
        return _operands(t.children[0], head) + _operands(t.children[1], head)
    return [t]


MODEL_FUNCTIONS: Sequence[str] = ("$ue", "$ae", "$fe", "$u0", "$u1", "$v", "$v0", "$w", "$a0", "$f0", "$u0s", "$phi")
MODEL_VARIABLES: Sequence[Tuple[str, str]] = (("$x", "$xG"), ("$xs", "$xsG"), ("$x1", "$x1G"))


def random_model_text(rng: random.Random, depth: int = 3) -> str:
    """Function expression over the reference macros, in the canonical syntax."""
    if depth <= 1 or rng.random() < 0.25:
        return rng.choice(list(MODEL_FUNCTIONS) + ["eps", "kappa0", "2"])
    variable, boundary = rng.choice(list(MODEL_VARIABLES))
    kind = rng.randrange(6)
    if kind == 0:
        return f"{random_model_text(rng, depth - 1)} + {random_model_text(rng, depth - 1)}"
    if kind == 1:
        return f"({random_model_text(rng, depth - 1)})*({random_model_text(rng, depth - 1)})"
    if kind == 2:
        return f"D({random_model_text(rng, depth - 1)}, {variable})"
    if kind == 3:
        return f"Int({random_model_text(rng, depth - 1)}, {variable})"
    if kind == 4:
        return f"Tr({random_model_text(rng, depth - 1)}, {variable}, {boundary})"
    return f"-1*{random_model_text(rng, depth - 1)}"
