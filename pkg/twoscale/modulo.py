import collections
import dataclasses
import functools
import itertools
import logging
import sys
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple

from multiset import FrozenMultiset

from .strategy import (
    DEFAULT_FUEL,
    RECURSION_LIMIT,
    Binding,
    Child,
    Choice,
    ConditionCheck,
    Env,
    Eta,
    FixVar,
    FuelExhausted,
    Mu,
    Rule,
    Seq,
    Some,
    Strategy,
    check_closed,
    lookup,
)
from .terms import (
    MEM,
    App,
    Substitution,
    Symbol,
    Term,
    TermError,
    Var,
    apply_subst,
    sort_key,
    try_match,
    vars_of,
)
from .theta import ConditionEvaluator, IllTyped

logger = logging.getLogger(__name__)

AC_SPLIT_LIMIT = 10_000


class UnsupportedAxiom(TermError):
    def __init__(self, axiom: object) -> None:
        self.axiom = axiom
        super().__init__(f"only associativity and commutativity axioms are supported: {axiom}")


class AcSplitLimit(TermError):
    def __init__(self, site: Term, limit: int) -> None:
        self.site = site
        self.limit = limit
        super().__init__(f"more than {limit} operand splits while matching at {site}")


class ConditionIllTyped(IllTyped):
    pass


@dataclasses.dataclass(frozen=True)
class EquationalTheory:
    """Per-symbol associativity and commutativity flags."""

    assoc: FrozenSet[str] = frozenset()
    comm: FrozenSet[str] = frozenset()

    def __post_init__(self) -> None:
        for name in self.assoc | self.comm:
            if name == MEM.name:
                raise UnsupportedAxiom(f"{name} cannot be associative or commutative")

    @classmethod
    def ac(cls, *names: str) -> "EquationalTheory":
        return cls(frozenset(names), frozenset(names))

    @classmethod
    def from_axioms(cls, axioms: Iterable[Tuple[Term, Term]]) -> "EquationalTheory":
        assoc, comm = set(), set()
        for lhs, rhs in axioms:
            shape = _axiom_shape(lhs, rhs)
            if shape is None:
                raise UnsupportedAxiom(f"{lhs} = {rhs}")
            kind, name = shape
            (assoc if kind == "A" else comm).add(name)
        return cls(frozenset(assoc), frozenset(comm))

    @property
    def empty(self) -> bool:
        return not self.assoc and not self.comm

    def merge(self, other: "EquationalTheory") -> "EquationalTheory":
        return EquationalTheory(self.assoc | other.assoc, self.comm | other.comm)

    def is_ac(self, head: Symbol) -> bool:
        return head.arity == 2 and head.name in self.assoc and head.name in self.comm

    def is_assoc(self, head: Symbol) -> bool:
        return head.arity == 2 and head.name in self.assoc

    def is_comm(self, head: Symbol) -> bool:
        return head.arity == 2 and head.name in self.comm

    def canonical(self, t: Term) -> Term:
        if self.empty:
            return t
        return _canonical(t, self)


def _axiom_shape(lhs: Term, rhs: Term) -> Optional[Tuple[str, str]]:
    if not isinstance(lhs, App) or not isinstance(rhs, App) or lhs.head != rhs.head or lhs.head.arity != 2:
        return None
    head = lhs.head
    a, b = lhs.children
    if isinstance(a, Var) and isinstance(b, Var) and a != b and rhs.children == (b, a):
        return "C", head.name
    # f(f(x, y), z) = f(x, f(y, z)) in either orientation
    for left, right in ((lhs, rhs), (rhs, lhs)):
        inner, z = left.children
        x, inner_right = right.children
        if not (isinstance(inner, App) and inner.head == head and isinstance(inner_right, App) and inner_right.head == head):
            continue
        if inner.children[0] == x and (inner.children[1], z) == inner_right.children:
            names = [x, inner.children[1], z]
            if all(isinstance(n, Var) for n in names) and len(set(names)) == 3:
                return "A", head.name
    return None


def flatten(t: Term, head: Symbol) -> List[Term]:
    """Operands of a nest of `head` applications, left to right."""
    if isinstance(t, App) and t.head == head:
        return flatten(t.children[0], head) + flatten(t.children[1], head)
    return [t]


def rebuild(head: Symbol, operands: Sequence[Term], theory: EquationalTheory) -> Term:
    """Left-nested application of `head` over operands, sorted when `head` commutes."""
    ops = list(operands)
    if theory.is_comm(head):
        ops.sort(key=sort_key)
    result = ops[0]
    for operand in ops[1:]:
        result = App(head, (result, operand))
    return result


@functools.lru_cache(maxsize=1 << 16)
def _canonical(t: Term, theory: EquationalTheory) -> Term:
    if isinstance(t, Var) or not t.children:
        return t
    children = tuple(_canonical(c, theory) for c in t.children)
    if theory.is_assoc(t.head):
        operands = [op for c in children for op in flatten(c, t.head)]
        return rebuild(t.head, operands, theory)
    if theory.is_comm(t.head):
        return App(t.head, tuple(sorted(children, key=sort_key)))
    if all(a is b for a, b in zip(children, t.children)):
        return t
    return App(t.head, children)


def ac_canonical(t: Term, theory: EquationalTheory) -> Term:
    return theory.canonical(t)


def operands_of(t: Term, theory: EquationalTheory) -> List[Term]:
    """Children as seen by traversals: the flattened operand list under an associative symbol."""
    if isinstance(t, Var):
        return []
    if theory.is_assoc(t.head):
        return flatten(t, t.head)
    return list(t.children)


def with_operands(t: App, operands: Sequence[Term], theory: EquationalTheory) -> Term:
    if theory.is_assoc(t.head):
        return theory.canonical(rebuild(t.head, operands, theory))
    return theory.canonical(App(t.head, tuple(operands)))


class Matcher:
    """All substitutions making the pattern equal to the subject modulo the theory."""

    def __init__(self, theory: EquationalTheory, limit: int = AC_SPLIT_LIMIT) -> None:
        self.theory = theory
        self.limit = limit
        self.splits = 0

    def match(self, pattern: Term, subject: Term, sigma: Substitution) -> Iterator[Substitution]:
        if isinstance(pattern, Var):
            bound = sigma.get(pattern.name)
            if bound is None:
                yield {**sigma, pattern.name: subject}
            elif bound == subject:
                yield sigma
            return
        if not isinstance(subject, App) or subject.head != pattern.head:
            return
        head = pattern.head
        if self.theory.is_ac(head):
            yield from self.match_ac(flatten(pattern, head), FrozenMultiset(flatten(subject, head)), sigma, subject)
        elif self.theory.is_assoc(head):
            yield from self.match_assoc(flatten(pattern, head), flatten(subject, head), sigma, head)
        elif self.theory.is_comm(head):
            orders = {subject.children, subject.children[::-1]}
            for children in sorted(orders, key=lambda cs: tuple(sort_key(c) for c in cs)):
                yield from self.match_children(pattern.children, children, sigma)
        else:
            yield from self.match_children(pattern.children, subject.children, sigma)

    def match_children(
        self, patterns: Sequence[Term], subjects: Sequence[Term], sigma: Substitution
    ) -> Iterator[Substitution]:
        if not patterns:
            yield sigma
            return
        for partial in self.match(patterns[0], subjects[0], sigma):
            yield from self.match_children(patterns[1:], subjects[1:], partial)

    def match_ac(
        self, patterns: List[Term], remaining: FrozenMultiset, sigma: Substitution, site: App
    ) -> Iterator[Substitution]:
        head = site.head
        if not patterns:
            if not remaining:
                yield sigma
            return
        if len(remaining) < len(patterns):
            return

        for index, pattern in enumerate(patterns):
            if not isinstance(pattern, Var):
                rest = patterns[:index] + patterns[index + 1 :]
                for candidate in sorted(remaining.distinct_elements(), key=sort_key):
                    for partial in self.match(pattern, candidate, sigma):
                        yield from self.match_ac(rest, remaining - FrozenMultiset([candidate]), partial, site)
                return

        for index, pattern in enumerate(patterns):
            assert isinstance(pattern, Var)
            if pattern.name in sigma:
                value = FrozenMultiset(flatten(sigma[pattern.name], head))
                if value <= remaining:
                    yield from self.match_ac(patterns[:index] + patterns[index + 1 :], remaining - value, sigma, site)
                return

        first = patterns[0]
        assert isinstance(first, Var)
        if len(patterns) == 1:
            yield {**sigma, first.name: rebuild(head, sorted(remaining, key=sort_key), self.theory)}
            return
        elements = sorted(remaining.distinct_elements(), key=sort_key)
        counts = [remaining[e] for e in elements]
        for picks in itertools.product(*(range(c + 1) for c in counts)):
            taken = sum(picks)
            if taken == 0 or len(remaining) - taken < len(patterns) - 1:
                continue
            self.splits += 1
            if self.splits > self.limit:
                raise AcSplitLimit(site, self.limit)
            chosen = [e for e, n in zip(elements, picks) for _ in range(n)]
            value = rebuild(head, chosen, self.theory)
            yield from self.match_ac(
                patterns[1:], remaining - FrozenMultiset(chosen), {**sigma, first.name: value}, site
            )

    def match_assoc(
        self, patterns: List[Term], subjects: List[Term], sigma: Substitution, head: Symbol
    ) -> Iterator[Substitution]:
        if not patterns:
            if not subjects:
                yield sigma
            return
        if len(subjects) < len(patterns):
            return
        first, rest = patterns[0], patterns[1:]
        if isinstance(first, Var) and first.name in sigma:
            ops = flatten(sigma[first.name], head)
            if subjects[: len(ops)] == ops:
                yield from self.match_assoc(rest, subjects[len(ops) :], sigma, head)
            return
        if isinstance(first, Var):
            for k in range(1, len(subjects) - len(rest) + 1):
                value = rebuild(head, subjects[:k], self.theory)
                yield from self.match_assoc(rest, subjects[k:], {**sigma, first.name: value}, head)
            return
        for partial in self.match(first, subjects[0], sigma):
            yield from self.match_assoc(rest, subjects[1:], partial, head)


def _subst_key(sigma: Substitution) -> tuple:
    return tuple((name, sort_key(value)) for name, value in sorted(sigma.items()))


def match_modulo(pattern: Term, subject: Term, theory: EquationalTheory) -> List[Substitution]:
    """Every matching substitution, deduplicated and in a deterministic order."""
    if theory.empty:
        sigma = try_match(pattern, subject)
        return [] if sigma is None else [sigma]
    matcher = Matcher(theory)
    found: Dict[tuple, Substitution] = {}
    for sigma in matcher.match(theory.canonical(pattern), theory.canonical(subject), {}):
        found.setdefault(_subst_key(sigma), sigma)
    if matcher.splits:
        logger.debug("%d operand splits matching %s", matcher.splits, pattern)
    return [found[k] for k in sorted(found)]


@dataclasses.dataclass(frozen=True)
class TermSet:
    """Finite set of terms, each kept in canonical form."""

    terms: FrozenSet[Term] = frozenset()

    @classmethod
    def of(cls, terms: Iterable[Term], theory: Optional[EquationalTheory] = None) -> "TermSet":
        theory = theory or EquationalTheory()
        return cls(frozenset(theory.canonical(t) for t in terms))

    def __iter__(self) -> Iterator[Term]:
        return iter(sorted(self.terms, key=sort_key))

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, t: object) -> bool:
        return t in self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def union(self, other: "TermSet") -> "TermSet":
        return TermSet(self.terms | other.terms)

    def contains(self, t: Term, theory: EquationalTheory) -> bool:
        return theory.canonical(t) in self.terms

    def first(self) -> Term:
        """Smallest member in the canonical order."""
        return min(self.terms, key=sort_key)


class ModuloEvaluator:
    """Set-valued strategy semantics modulo an equational theory; the empty set stands for Fail."""

    def __init__(
        self,
        theory: Optional[EquationalTheory] = None,
        *,
        fuel: int = DEFAULT_FUEL,
        memory: bool = False,
        conditions: Optional[ConditionCheck] = None,
    ) -> None:
        if fuel <= 0:
            raise ValueError(f"fuel must be positive: {fuel}")
        self.theory = theory or EquationalTheory()
        self.budget = fuel
        self.remaining = fuel
        self.memory = memory
        self.conditions = conditions or ConditionEvaluator(self.theory).holds
        self.fired: collections.Counter = collections.Counter()
        self.memo: Dict[Tuple[Strategy, Env, Term], FrozenSet[Term]] = {}

    def run(self, s: Strategy, ts: Iterable[Term]) -> TermSet:
        check_closed(s)
        if sys.getrecursionlimit() < RECURSION_LIMIT:
            sys.setrecursionlimit(RECURSION_LIMIT)
        result: FrozenSet[Term] = frozenset()
        for t in ts:
            result |= self.apply(s, self.theory.canonical(t), None)
        return TermSet(result)

    def unfold(self) -> None:
        if self.remaining <= 0:
            raise FuelExhausted(self.budget)
        self.remaining -= 1

    def apply(self, s: Strategy, t: Term, env: Env) -> FrozenSet[Term]:
        key = (s, env, t)
        cached = self.memo.get(key)
        if cached is not None:
            return cached
        result = self._apply(s, t, env)
        self.memo[key] = result
        return result

    def _apply(self, s: Strategy, t: Term, env: Env) -> FrozenSet[Term]:
        if self.memory and isinstance(t, App) and t.head == MEM:
            inner = self.apply(s, t.children[0], env)
            return frozenset(App(MEM, (r, t.children[1])) for r in inner)

        if isinstance(s, Rule):
            return self.apply_rule(s, t)
        if isinstance(s, Seq):
            out: FrozenSet[Term] = frozenset()
            for middle in sorted(self.apply(s.first, t, env), key=sort_key):
                out |= self.apply(s.second, middle, env)
            return out
        if isinstance(s, Choice):
            first = self.apply(s.first, t, env)
            return first if first else self.apply(s.second, t, env)
        if isinstance(s, Eta):
            return self.apply(s.body, t, env) or frozenset([t])
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

    def apply_rule(self, rule: Rule, t: Term) -> FrozenSet[Term]:
        results = set()
        for sigma in match_modulo(rule.lhs, t, self.theory):
            if rule.cond is not None:
                try:
                    if not self.conditions(rule.cond, sigma):
                        continue
                except IllTyped as error:
                    if isinstance(error, ConditionIllTyped):
                        raise
                    raise ConditionIllTyped(error.condition, error.reason) from error
            results.add(self.theory.canonical(apply_subst(sigma, rule.rhs)))
        if results and rule.name:
            self.fired[rule.name] += 1
            logger.debug("rule %s fired, %d results", rule.name, len(results))
        return frozenset(results)

    def apply_some(self, s: Some, t: Term, env: Env) -> FrozenSet[Term]:
        if not isinstance(t, App) or not t.children:
            return frozenset()
        operands = operands_of(t, self.theory)
        options: List[List[Term]] = []
        succeeded = False
        for operand in operands:
            results = self.apply(s.body, operand, env)
            if results:
                succeeded = True
                options.append(sorted(results, key=sort_key))
            else:
                options.append([operand])
        if not succeeded:
            return frozenset()
        return frozenset(with_operands(t, combo, self.theory) for combo in itertools.product(*options))

    def apply_child(self, s: Child, t: Term, env: Env) -> FrozenSet[Term]:
        if not isinstance(t, App):
            return frozenset()
        operands = operands_of(t, self.theory)
        if s.index > len(operands):
            return frozenset()
        out = set()
        for result in self.apply(s.body, operands[s.index - 1], env):
            replaced = list(operands)
            replaced[s.index - 1] = result
            out.add(with_operands(t, replaced, self.theory))
        return frozenset(out)


def eval_modulo(
    s: Strategy,
    ts: Iterable[Term],
    theory: Optional[EquationalTheory] = None,
    fuel: int = DEFAULT_FUEL,
    *,
    memory: bool = False,
    conditions: Optional[ConditionCheck] = None,
) -> TermSet:
    return ModuloEvaluator(theory, fuel=fuel, memory=memory, conditions=conditions).run(s, ts)


def eval_conditional(
    rule: Rule,
    t: Term,
    theory: Optional[EquationalTheory] = None,
    conditions: Optional[ConditionCheck] = None,
) -> TermSet:
    """Results of one conditional rule at the root; the empty set when no match passes."""
    if vars_of(t):
        raise ValueError(f"subject must be ground: {t}")
    evaluator = ModuloEvaluator(theory, conditions=conditions)
    return TermSet(evaluator.apply_rule(rule, evaluator.theory.canonical(t)))


def eval_mem(s: Strategy, t: Term, fuel: int = DEFAULT_FUEL) -> Optional[Term]:
    from .strategy import Evaluator  # pylint: disable=import-outside-toplevel

    return Evaluator(fuel=fuel, memory=True).run(s, t)
