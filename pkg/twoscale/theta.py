import functools
import logging
from typing import Callable, FrozenSet, Optional

from .grammar import BOT_F, FUN, INDEXED_FUN, INDEXED_REG, INDEXED_VAR, OPER, OPS, REG, VAR, oper_parts
from .terms import MEM, App, Substitution, Term, TermError, Var, apply_subst, is_ground, list_items, occurs

logger = logging.getLogger(__name__)

VarSet = FrozenSet[Term]

EMPTY: VarSet = frozenset()


class GuardViolated(TermError):
    def __init__(self, operator: str, term: Term) -> None:
        self.operator = operator
        self.term = term
        super().__init__(f"{operator} applied outside its domain: {term}")


class IllTyped(TermError):
    def __init__(self, condition: Term, reason: str = "") -> None:
        self.condition = condition
        self.reason = reason
        super().__init__(f"ill-typed condition {condition}" + (f": {reason}" if reason else ""))


def _union(terms: Optional[list]) -> VarSet:
    result: FrozenSet[Term] = EMPTY
    for item in terms or []:
        result |= theta(item)
    return result


@functools.lru_cache(maxsize=1 << 14)
def theta(t: Term) -> VarSet:
    """Set of mathematical variables the expression depends on."""
    if isinstance(t, Var):
        raise IllTyped(t, "rewrite variables have no dependencies")
    if t.head == VAR:
        return frozenset({t})
    if t.head == INDEXED_VAR:
        return theta(t.children[0])
    if t.head in (REG, INDEXED_REG):
        raise IllTyped(t, "regions are not expressions")
    if not t.children or t == BOT_F:
        return EMPTY
    if t.head == MEM:
        return theta(t.children[0])
    if t.head == FUN:
        return _union(list_items(t.children[1]))
    if t.head == INDEXED_FUN:
        return theta(t.children[0])
    if t.head.name == "cons" and t.head.arity == 2:
        return _union(list_items(t))
    if t.head.arity == 2 and t.name in OPS:
        return theta(t.children[0]) | theta(t.children[1])
    if t.head == OPER:
        return _theta_operator(t)
    return _union(list(t.children))


def _theta_operator(t: App) -> VarSet:
    parts = oper_parts(t)
    if parts is None:
        raise IllTyped(t, "malformed operator")
    name, arg, dom, codom, _ = parts
    if name == "Equals":
        return _union(list_items(arg))
    inner = theta(arg)
    domain = _union(dom)
    codomain = _union(codom)
    if name == "Integral":
        return inner - domain
    if name == "Partial":
        if domain <= inner:
            return inner
        logger.warning("derivative of a term independent of its variable: %s", t)
        return EMPTY
    if name == "Restriction":
        return codomain
    if name in ("T", "Tstar", "B"):
        if not domain & inner:
            raise GuardViolated(name, t)
        return (inner - domain) | codomain
    if name == "Sum":
        return inner - domain
    return inner


def _set_of(expr: Term, canonical: Callable[[Term], Term]) -> FrozenSet[Term]:
    if isinstance(expr, App) and expr.name == "theta" and expr.head.arity == 1:
        return frozenset(canonical(v) for v in theta(expr.children[0]))
    if isinstance(expr, App) and expr.name == "set" and expr.head.arity == 1:
        items = list_items(expr.children[0])
        if items is None:
            raise IllTyped(expr, "set literal is not a list")
        return frozenset(canonical(i) for i in items)
    raise IllTyped(expr, "expected a set expression")


def _is_set(expr: Term) -> bool:
    return isinstance(expr, App) and expr.name in ("theta", "set") and expr.head.arity == 1


class ConditionEvaluator:
    """Decides instantiated conditions; equality is modulo the theory's canonical form."""

    def __init__(self, theory: Optional[object] = None) -> None:
        self.theory = theory

    def canonical(self, t: Term) -> Term:
        if self.theory is None:
            return t
        return self.theory.canonical(t)  # type: ignore[attr-defined]

    def holds(self, cond: Term, sigma: Substitution) -> bool:
        closed = apply_subst(sigma, cond)
        if not is_ground(closed):
            raise IllTyped(closed, "unbound rewrite variables")
        return self.evaluate(closed)

    def evaluate(self, c: Term) -> bool:
        assert isinstance(c, App)
        name, arity = c.name, c.head.arity
        if name == "true" and arity == 0:
            return True
        if name == "false" and arity == 0:
            return False
        if name == "and" and arity == 2:
            return self.evaluate(c.children[0]) and self.evaluate(c.children[1])
        if name == "or" and arity == 2:
            return self.evaluate(c.children[0]) or self.evaluate(c.children[1])
        if name == "not" and arity == 1:
            return not self.evaluate(c.children[0])
        if name in ("eq", "neq") and arity == 2:
            left, right = c.children
            if _is_set(left) or _is_set(right):
                same = _set_of(left, self.canonical) == _set_of(right, self.canonical)
            else:
                same = self.canonical(left) == self.canonical(right)
            return same if name == "eq" else not same
        if name == "in" and arity == 2:
            return self.canonical(c.children[0]) in _set_of(c.children[1], self.canonical)
        if name == "disjoint" and arity == 2:
            return not _set_of(c.children[0], self.canonical) & _set_of(c.children[1], self.canonical)
        if name == "subset" and arity == 2:
            return _set_of(c.children[0], self.canonical) <= _set_of(c.children[1], self.canonical)
        if name == "empty" and arity == 1:
            return not _set_of(c.children[0], self.canonical)
        if name == "occurs" and arity == 2:
            return occurs(self.canonical(c.children[0]), self.canonical(c.children[1]))
        raise IllTyped(c, "unknown connective")
