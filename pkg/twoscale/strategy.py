import collections
import dataclasses
import logging
import sys
from typing import Callable, Dict, FrozenSet, Iterator, List, Optional, Sequence, Union

from .terms import MEM, App, Substitution, Term, TermError, apply_subst, is_mem, try_match, vars_of

logger = logging.getLogger(__name__)

DEFAULT_FUEL = 10_000

# Nested Mu unfoldings recurse once per iteration of a loop.
RECURSION_LIMIT = 20_000

ConditionCheck = Callable[[Term, Substitution], bool]


class UnboundFixVar(TermError):
    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"fixed-point variable {name} is not bound by an enclosing mu")


class FuelExhausted(TermError):
    def __init__(self, fuel: int) -> None:
        self.fuel = fuel
        super().__init__(f"fuel exhausted after {fuel} mu unfoldings")


class UnsafeRule(TermError):
    def __init__(self, name: str, extra: FrozenSet[str]) -> None:
        self.name = name
        self.extra = extra
        super().__init__(
            f"rule {name or '<anonymous>'} introduces variables {sorted(extra)} absent from its left side"
        )


class _Node:
    """Structural hash cached at construction; strategies are hashed constantly."""

    _hash: int

    def _fields(self) -> tuple:
        raise NotImplementedError

    def __post_init__(self) -> None:
        object.__setattr__(self, "_hash", hash((type(self).__name__,) + self._fields()))

    def __hash__(self) -> int:
        return self._hash


@dataclasses.dataclass(frozen=True)
class Rule(_Node):
    lhs: Term
    rhs: Term
    cond: Optional[Term] = None
    name: str = dataclasses.field(default="", compare=False)
    _hash: int = dataclasses.field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        allowed = vars_of(self.lhs)
        extra = vars_of(self.rhs) - allowed
        if self.cond is not None:
            extra |= vars_of(self.cond) - allowed
        if extra:
            raise UnsafeRule(self.name, frozenset(extra))
        super().__post_init__()

    def _fields(self) -> tuple:
        return (self.lhs, self.rhs, self.cond)

    def __str__(self) -> str:
        from .printer import format_strategy  # pylint: disable=import-outside-toplevel

        return format_strategy(self)


@dataclasses.dataclass(frozen=True)
class Seq(_Node):
    first: "Strategy"
    second: "Strategy"
    _hash: int = dataclasses.field(init=False, repr=False, compare=False)

    def _fields(self) -> tuple:
        return (self.first, self.second)


@dataclasses.dataclass(frozen=True)
class Choice(_Node):
    first: "Strategy"
    second: "Strategy"
    _hash: int = dataclasses.field(init=False, repr=False, compare=False)

    def _fields(self) -> tuple:
        return (self.first, self.second)


@dataclasses.dataclass(frozen=True)
class Eta(_Node):
    body: "Strategy"
    _hash: int = dataclasses.field(init=False, repr=False, compare=False)

    def _fields(self) -> tuple:
        return (self.body,)


@dataclasses.dataclass(frozen=True)
class Some(_Node):
    body: "Strategy"
    _hash: int = dataclasses.field(init=False, repr=False, compare=False)

    def _fields(self) -> tuple:
        return (self.body,)


@dataclasses.dataclass(frozen=True)
class Child(_Node):
    index: int
    body: "Strategy"
    _hash: int = dataclasses.field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError(f"child index must be positive: {self.index}")
        super().__post_init__()

    def _fields(self) -> tuple:
        return (self.index, self.body)


@dataclasses.dataclass(frozen=True)
class FixVar(_Node):
    name: str
    _hash: int = dataclasses.field(init=False, repr=False, compare=False)

    def _fields(self) -> tuple:
        return (self.name,)


@dataclasses.dataclass(frozen=True)
class Mu(_Node):
    name: str
    body: "Strategy"
    _hash: int = dataclasses.field(init=False, repr=False, compare=False)

    def _fields(self) -> tuple:
        return (self.name, self.body)


Strategy = Union[Rule, Seq, Choice, Eta, Some, Child, FixVar, Mu]


@dataclasses.dataclass(frozen=True)
class Binding:
    """One frame of the fixed-point environment: name bound to a Mu and its defining scope."""

    name: str
    mu: Mu
    scope: Optional["Binding"]
    outer: Optional["Binding"]


Env = Optional[Binding]


def lookup(env: Env, name: str) -> Binding:
    frame = env
    while frame is not None:
        if frame.name == name:
            return frame
        frame = frame.outer
    raise UnboundFixVar(name)


def free_fix_vars(s: Strategy) -> FrozenSet[str]:
    if isinstance(s, FixVar):
        return frozenset([s.name])
    if isinstance(s, Mu):
        return free_fix_vars(s.body) - {s.name}
    if isinstance(s, (Seq, Choice)):
        return free_fix_vars(s.first) | free_fix_vars(s.second)
    if isinstance(s, (Eta, Some, Child)):
        return free_fix_vars(s.body)
    return frozenset()


def check_closed(s: Strategy) -> None:
    free = free_fix_vars(s)
    if free:
        raise UnboundFixVar(sorted(free)[0])


def children_of(s: Strategy) -> List[Strategy]:
    if isinstance(s, (Seq, Choice)):
        return [s.first, s.second]
    if isinstance(s, (Eta, Some, Child, Mu)):
        return [s.body]
    return []


def rules_of(s: Strategy) -> Iterator[Rule]:
    """Rules in left-to-right order of appearance."""
    if isinstance(s, Rule):
        yield s
        return
    for child in children_of(s):
        yield from rules_of(child)


def mu_depth(s: Strategy) -> int:
    inner = max((mu_depth(c) for c in children_of(s)), default=0)
    return inner + 1 if isinstance(s, Mu) else inner


def seq_all(strategies: Sequence[Strategy]) -> Strategy:
    """Right-folded sequence of one or more strategies."""
    if not strategies:
        raise ValueError("empty sequence")
    result = strategies[-1]
    for s in reversed(strategies[:-1]):
        result = Seq(s, result)
    return result


def choice_all(strategies: Sequence[Strategy]) -> Strategy:
    if not strategies:
        raise ValueError("empty choice")
    result = strategies[-1]
    for s in reversed(strategies[:-1]):
        result = Choice(s, result)
    return result


def _fresh(s: Strategy, base: str = "X") -> str:
    taken = set(_bound_and_free(s))
    name = base
    counter = 1
    while name in taken:
        counter += 1
        name = f"{base}{counter}"
    return name


def _bound_and_free(s: Strategy) -> Iterator[str]:
    if isinstance(s, (FixVar, Mu)):
        yield s.name
    for child in children_of(s):
        yield from _bound_and_free(child)


def top_down(s: Strategy) -> Mu:
    x = _fresh(s)
    return Mu(x, Choice(s, Some(FixVar(x))))


def bottom_up(s: Strategy) -> Mu:
    x = _fresh(s)
    return Mu(x, Choice(Some(FixVar(x)), s))


def outer_most(s: Strategy) -> Mu:
    """Outermost redexes first, then keep going inside each rewritten subterm."""
    x = _fresh(s)
    return Mu(x, Choice(Seq(s, Eta(Some(FixVar(x)))), Some(FixVar(x))))


def inner_most(s: Strategy) -> Mu:
    x = _fresh(s)
    return Mu(x, Choice(Seq(Some(FixVar(x)), Eta(s)), s))


def outer_most_literal(s: Strategy) -> Mu:
    x = _fresh(s)
    return Mu(x, Seq(s, Some(FixVar(x))))


def inner_most_literal(s: Strategy) -> Mu:
    x = _fresh(s)
    return Mu(x, Seq(Some(FixVar(x)), s))


def normalizer(s: Strategy) -> Mu:
    """The literal loop: it can only end in Fail or FuelExhausted."""
    x = _fresh(s)
    return Mu(x, Seq(s, FixVar(x)))


def repeat(s: Strategy) -> Mu:
    x = _fresh(s)
    return Mu(x, Eta(Seq(s, FixVar(x))))


DERIVED: Dict[str, Callable[[Strategy], Mu]] = {
    "topdown": top_down,
    "bottomup": bottom_up,
    "outermost": outer_most,
    "innermost": inner_most,
    "outermost_literal": outer_most_literal,
    "innermost_literal": inner_most_literal,
    "normalizer": normalizer,
    "repeat": repeat,
}


def _default_conditions(cond: Term, sigma: Substitution) -> bool:
    from .theta import ConditionEvaluator  # pylint: disable=import-outside-toplevel

    return ConditionEvaluator().holds(cond, sigma)


class Evaluator:
    """Single-valued strategy semantics; None stands for Fail."""

    def __init__(
        self,
        *,
        fuel: int = DEFAULT_FUEL,
        memory: bool = False,
        conditions: Optional[ConditionCheck] = None,
    ) -> None:
        if fuel <= 0:
            raise ValueError(f"fuel must be positive: {fuel}")
        self.budget = fuel
        self.remaining = fuel
        self.memory = memory
        self.conditions = conditions or _default_conditions
        self.fired: collections.Counter = collections.Counter()

    def run(self, s: Strategy, t: Term) -> Optional[Term]:
        check_closed(s)
        if sys.getrecursionlimit() < RECURSION_LIMIT:
            sys.setrecursionlimit(RECURSION_LIMIT)
        return self.apply(s, t, None)

    def unfold(self) -> None:
        if self.remaining <= 0:
            raise FuelExhausted(self.budget)
        self.remaining -= 1

    def apply(self, s: Strategy, t: Term, env: Env) -> Optional[Term]:
        if self.memory and is_mem(t):
            assert isinstance(t, App)
            current = self.apply(s, t.children[0], env)
            if current is None:
                return None
            return App(MEM, (current, t.children[1]))

        if isinstance(s, Rule):
            return self.apply_rule(s, t)
        if isinstance(s, Seq):
            first = self.apply(s.first, t, env)
            if first is None:
                return None
            return self.apply(s.second, first, env)
        if isinstance(s, Choice):
            first = self.apply(s.first, t, env)
            if first is not None:
                return first
            return self.apply(s.second, t, env)
        if isinstance(s, Eta):
            result = self.apply(s.body, t, env)
            return t if result is None else result
        if isinstance(s, Some):
            return self.apply_some(s, t, env)
        if isinstance(s, Child):
            return self.apply_child(s, t, env)
        if isinstance(s, Mu):
            self.unfold()
            return self.apply(s.body, t, Binding(s.name, s, env, env))
        if isinstance(s, FixVar):
            frame = lookup(env, s.name)
            self.unfold()
            return self.apply(frame.mu.body, t, Binding(frame.name, frame.mu, frame.scope, frame.scope))
        raise TypeError(f"not a strategy: {s!r}")

    def apply_rule(self, rule: Rule, t: Term) -> Optional[Term]:
        sigma = try_match(rule.lhs, t)
        if sigma is None:
            return None
        if rule.cond is not None and not self.conditions(rule.cond, sigma):
            return None
        if rule.name:
            self.fired[rule.name] += 1
        return apply_subst(sigma, rule.rhs)

    def apply_some(self, s: Some, t: Term, env: Env) -> Optional[Term]:
        if not isinstance(t, App) or not t.children:
            return None
        succeeded = False
        children = []
        for child in t.children:
            result = self.apply(s.body, child, env)
            if result is None:
                children.append(child)
            else:
                succeeded = True
                children.append(result)
        if not succeeded:
            return None
        return App(t.head, tuple(children))

    def apply_child(self, s: Child, t: Term, env: Env) -> Optional[Term]:
        if not isinstance(t, App) or s.index > len(t.children):
            return None
        result = self.apply(s.body, t.children[s.index - 1], env)
        if result is None:
            return None
        children = list(t.children)
        children[s.index - 1] = result
        return App(t.head, tuple(children))


def eval_strategy(
    s: Strategy,
    t: Term,
    fuel: int = DEFAULT_FUEL,
    *,
    conditions: Optional[ConditionCheck] = None,
) -> Optional[Term]:
    return Evaluator(fuel=fuel, conditions=conditions).run(s, t)


# Where the argument of each derived form sits inside the Mu body.
DERIVED_ARGUMENT: Dict[str, Sequence[str]] = {
    "topdown": ("first",),
    "bottomup": ("second",),
    "outermost": ("first", "first"),
    "innermost": ("second",),
    "outermost_literal": ("first",),
    "innermost_literal": ("second",),
    "normalizer": ("first",),
    "repeat": ("body", "first"),
}


def alpha_normalize(s: Strategy, renaming: Optional[Dict[str, str]] = None) -> Strategy:
    """Rename fixed-point binders to X1, X2, ... in order of appearance."""
    counter = [0]

    def _walk(node: Strategy, names: Dict[str, str]) -> Strategy:
        if isinstance(node, Mu):
            counter[0] += 1
            fresh = f"X{counter[0]}"
            return Mu(fresh, _walk(node.body, {**names, node.name: fresh}))
        if isinstance(node, FixVar):
            return FixVar(names.get(node.name, node.name))
        if isinstance(node, Seq):
            return Seq(_walk(node.first, names), _walk(node.second, names))
        if isinstance(node, Choice):
            return Choice(_walk(node.first, names), _walk(node.second, names))
        if isinstance(node, Eta):
            return Eta(_walk(node.body, names))
        if isinstance(node, Some):
            return Some(_walk(node.body, names))
        if isinstance(node, Child):
            return Child(node.index, _walk(node.body, names))
        return node

    return _walk(s, dict(renaming or {}))


def alpha_equal(a: Strategy, b: Strategy) -> bool:
    return alpha_normalize(a) == alpha_normalize(b)


def recognize_derived(s: Mu) -> Optional[tuple]:
    """(name, argument) when s is one of the derived traversals, else None."""
    for name, path in DERIVED_ARGUMENT.items():
        node: object = s.body
        for attr in path:
            node = getattr(node, attr, None)
        if node is None or isinstance(node, (FixVar, int)):
            continue
        assert not isinstance(node, str)
        if s.name in free_fix_vars(node):  # type: ignore[arg-type]
            continue
        if alpha_equal(DERIVED[name](node), s):  # type: ignore[arg-type]
            return name, node
    return None
