import logging
from typing import List, Optional

from .strategy import (
    DEFAULT_FUEL,
    Child,
    Choice,
    Eta,
    Evaluator,
    FixVar,
    Mu,
    Rule,
    Seq,
    Some,
    Strategy,
    alpha_equal,
    check_closed,
    rules_of,
)
from .terms import App, Position, Symbol, Term, TermError, Var, const, is_numeral, numeral

logger = logging.getLogger(__name__)

__all__ = [
    "IDENTITY",
    "MalformedReification",
    "SoFail",
    "alpha_equal",
    "reflect",
    "reify",
    "so_compose",
    "so_eval",
]

RULE = Symbol("rule", 2)
CRULE = Symbol("crule", 3)
SEQ = Symbol("seq", 2)
CHOICE = Symbol("choice", 2)
ETA = Symbol("eta", 1)
SOME = Symbol("some", 1)
CHILD = Symbol("child", 2)
MU = Symbol("mu", 2)

REWRITE_PREFIX = "@"
FIX_PREFIX = "#"


class MalformedReification(TermError):
    def __init__(self, position: Position, term: Term) -> None:
        self.position = tuple(position)
        self.term = term
        super().__init__(f"not a reified strategy at {list(self.position)}: {term}")


class SoFail(TermError):
    def __init__(self, strategy: Strategy) -> None:
        self.strategy = strategy
        super().__init__(f"second-order strategy failed: {strategy}")


def reify_term(t: Term) -> Term:
    if isinstance(t, Var):
        return const(REWRITE_PREFIX + t.name)
    if not t.children:
        return t
    return App(t.head, tuple(reify_term(c) for c in t.children))


def reify(s: Strategy) -> Term:
    """The strategy as a term; rewrite and fixed-point variables become constants."""
    if isinstance(s, Rule):
        if s.cond is None:
            return App(RULE, (reify_term(s.lhs), reify_term(s.rhs)))
        return App(CRULE, (reify_term(s.lhs), reify_term(s.rhs), reify_term(s.cond)))
    if isinstance(s, Seq):
        return App(SEQ, (reify(s.first), reify(s.second)))
    if isinstance(s, Choice):
        return App(CHOICE, (reify(s.first), reify(s.second)))
    if isinstance(s, Eta):
        return App(ETA, (reify(s.body),))
    if isinstance(s, Some):
        return App(SOME, (reify(s.body),))
    if isinstance(s, Child):
        return App(CHILD, (numeral(s.index), reify(s.body)))
    if isinstance(s, FixVar):
        return const(FIX_PREFIX + s.name)
    if isinstance(s, Mu):
        return App(MU, (const(FIX_PREFIX + s.name), reify(s.body)))
    raise TypeError(f"not a strategy: {s!r}")


def reflect_term(t: Term, position: Position = ()) -> Term:
    if isinstance(t, Var):
        raise MalformedReification(position, t)
    if not t.children:
        if t.name.startswith(REWRITE_PREFIX) and len(t.name) > 1:
            return Var(t.name[1:])
        if t.name.startswith(FIX_PREFIX):
            raise MalformedReification(position, t)
        return t
    return App(t.head, tuple(reflect_term(c, position + (i,)) for i, c in enumerate(t.children, start=1)))


def _fix_name(t: Term, position: Position) -> Optional[str]:
    if isinstance(t, App) and not t.children and t.name.startswith(FIX_PREFIX) and len(t.name) > 1:
        return t.name[1:]
    return None


def reflect(t: Term, position: Position = ()) -> Strategy:
    if isinstance(t, Var):
        raise MalformedReification(position, t)
    if not t.children:
        name = _fix_name(t, position)
        if name is None:
            raise MalformedReification(position, t)
        return FixVar(name)

    def sub(index: int) -> Strategy:
        return reflect(t.children[index - 1], position + (index,))

    def term(index: int) -> Term:
        return reflect_term(t.children[index - 1], position + (index,))

    try:
        if t.head == RULE:
            return Rule(term(1), term(2))
        if t.head == CRULE:
            return Rule(term(1), term(2), term(3))
    except TermError as error:
        if isinstance(error, MalformedReification):
            raise
        raise MalformedReification(position, t) from error
    if t.head == SEQ:
        return Seq(sub(1), sub(2))
    if t.head == CHOICE:
        return Choice(sub(1), sub(2))
    if t.head == ETA:
        return Eta(sub(1))
    if t.head == SOME:
        return Some(sub(1))
    if t.head == CHILD:
        index = t.children[0]
        if not is_numeral(index) or int(index.name) < 1:  # type: ignore[union-attr]
            raise MalformedReification(position + (1,), index)
        return Child(int(index.name), sub(2))  # type: ignore[union-attr]
    if t.head == MU:
        name = _fix_name(t.children[0], position + (1,))
        if name is None:
            raise MalformedReification(position + (1,), t.children[0])
        return Mu(name, sub(2))
    raise MalformedReification(position, t)


def _restore_names(result: Strategy, source: Strategy) -> Strategy:
    """Carry rule names over when the transformation kept the number of rules."""
    names = [r.name for r in rules_of(source)]
    if len(names) != len(list(rules_of(result))):
        return result
    queue: List[str] = list(names)

    def _walk(s: Strategy) -> Strategy:
        if isinstance(s, Rule):
            return Rule(s.lhs, s.rhs, s.cond, name=queue.pop(0))
        if isinstance(s, Seq):
            return Seq(_walk(s.first), _walk(s.second))
        if isinstance(s, Choice):
            return Choice(_walk(s.first), _walk(s.second))
        if isinstance(s, Eta):
            return Eta(_walk(s.body))
        if isinstance(s, Some):
            return Some(_walk(s.body))
        if isinstance(s, Child):
            return Child(s.index, _walk(s.body))
        if isinstance(s, Mu):
            return Mu(s.name, _walk(s.body))
        return s

    return _walk(result)


def so_eval(pi: Strategy, s: Strategy, fuel: int = DEFAULT_FUEL) -> Strategy:
    """Run a second-order strategy on the reified form of s and reflect the result."""
    check_closed(s)
    reified = reify(s)
    result = Evaluator(fuel=fuel).run(pi, reified)
    if result is None:
        raise SoFail(pi)
    transformed = reflect(result)
    if transformed != s:
        logger.debug("second-order strategy rewrote %s", s)
    return _restore_names(transformed, s)


def so_compose(first: Strategy, second: Strategy) -> Strategy:
    """Apply `first`, then `second`."""
    return Seq(first, second)


# Leaves every strategy unchanged: its rule matches no reified strategy.
IDENTITY: Strategy = Eta(Rule(const("@@never"), const("@@never")))
