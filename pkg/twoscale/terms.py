import dataclasses
import functools
import logging
import re
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

logger = logging.getLogger(__name__)

NUMERAL = re.compile(r"-?[0-9]+")

Position = Tuple[int, ...]


class TermError(Exception):
    """Base of every engine error."""


class ArityMismatch(TermError):
    def __init__(self, symbol: "Symbol", got: int) -> None:
        self.symbol = symbol
        self.got = got
        super().__init__(f"{symbol.name}/{symbol.arity} applied to {got} arguments")


class NoMatch(TermError):
    def __init__(self, pattern: "Term", subject: "Term") -> None:
        self.pattern = pattern
        self.subject = subject
        super().__init__(f"{pattern} does not match {subject}")


class InvalidPosition(TermError):
    def __init__(self, term: "Term", position: Sequence[int]) -> None:
        self.term = term
        self.position = tuple(position)
        super().__init__(f"position {list(self.position)} is not valid in {term}")


class UnknownSymbol(TermError):
    def __init__(self, name: str, arity: Optional[int] = None) -> None:
        self.name = name
        self.arity = arity
        where = f"{name}/{arity}" if arity is not None else name
        super().__init__(f"unknown symbol: {where}")


@dataclasses.dataclass(frozen=True)
class Symbol:
    name: str
    arity: int

    def __post_init__(self) -> None:
        if self.arity < 0:
            raise ValueError(f"negative arity for {self.name}")

    def __str__(self) -> str:
        return f"{self.name}/{self.arity}"


@dataclasses.dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


@dataclasses.dataclass(frozen=True)
class App:
    head: Symbol
    children: Tuple["Term", ...] = ()
    _hash: int = dataclasses.field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not isinstance(self.children, tuple):
            object.__setattr__(self, "children", tuple(self.children))
        if len(self.children) != self.head.arity:
            raise ArityMismatch(self.head, len(self.children))
        object.__setattr__(self, "_hash", hash((self.head, self.children)))

    def __hash__(self) -> int:
        return self._hash

    @property
    def name(self) -> str:
        return self.head.name

    def __str__(self) -> str:
        from .printer import format_term  # pylint: disable=import-outside-toplevel

        return format_term(self)


Term = Union[Var, App]
Substitution = Dict[str, Term]

NIL = App(Symbol("nil", 0))
CONS = Symbol("cons", 2)


def make_app(head: Symbol, children: Sequence[Term]) -> App:
    return App(head, tuple(children))


def app(name: str, *children: Term) -> App:
    return App(Symbol(name, len(children)), tuple(children))


def const(name: str) -> App:
    return App(Symbol(name, 0))


def numeral(value: int) -> App:
    return const(str(value))


def is_numeral(t: Term) -> bool:
    return isinstance(t, App) and not t.children and NUMERAL.fullmatch(t.name) is not None


def make_list(items: Iterable[Term]) -> App:
    result = NIL
    for item in reversed(list(items)):
        result = App(CONS, (item, result))
    return result


def list_items(t: Term) -> Optional[List[Term]]:
    """Items of a cons/nil list, or None when t is not a proper list."""
    items = []
    while isinstance(t, App) and t.head == CONS:
        items.append(t.children[0])
        t = t.children[1]
    if t != NIL:
        return None
    return items


def is_ground(t: Term) -> bool:
    if isinstance(t, Var):
        return False
    return all(is_ground(c) for c in t.children)


def vars_of(t: Term) -> FrozenSet[str]:
    found = set()

    def _walk(node: Term) -> None:
        if isinstance(node, Var):
            found.add(node.name)
            return
        for child in node.children:
            _walk(child)

    _walk(t)
    return frozenset(found)


def size(t: Term) -> int:
    if isinstance(t, Var):
        return 1
    return 1 + sum(size(c) for c in t.children)


def depth(t: Term) -> int:
    if isinstance(t, Var) or not t.children:
        return 1
    return 1 + max(depth(c) for c in t.children)


def symbols_of(t: Term) -> FrozenSet[Symbol]:
    found = set()

    def _walk(node: Term) -> None:
        if isinstance(node, App):
            found.add(node.head)
            for child in node.children:
                _walk(child)

    _walk(t)
    return frozenset(found)


@functools.lru_cache(maxsize=1 << 16)
def sort_key(t: Term) -> tuple:
    """Total order on terms used for canonical forms and deterministic output."""
    if isinstance(t, Var):
        return (0, t.name)
    if is_numeral(t):
        return (1, int(t.name))
    return (2, t.name, t.head.arity, tuple(sort_key(c) for c in t.children))


def match_at_root(pattern: Term, subject: Term) -> Substitution:
    sigma: Substitution = {}
    if not _match_into(pattern, subject, sigma):
        raise NoMatch(pattern, subject)
    return sigma


def try_match(pattern: Term, subject: Term) -> Optional[Substitution]:
    sigma: Substitution = {}
    if _match_into(pattern, subject, sigma):
        return sigma
    return None


def _match_into(pattern: Term, subject: Term, sigma: Substitution) -> bool:
    if isinstance(pattern, Var):
        bound = sigma.get(pattern.name)
        if bound is None:
            sigma[pattern.name] = subject
            return True
        return bound == subject
    if not isinstance(subject, App) or subject.head != pattern.head:
        return False
    return all(_match_into(p, s, sigma) for p, s in zip(pattern.children, subject.children))


def apply_subst(sigma: Substitution, t: Term) -> Term:
    if not sigma:
        return t
    if isinstance(t, Var):
        return sigma.get(t.name, t)
    if not t.children:
        return t
    children = tuple(apply_subst(sigma, c) for c in t.children)
    if all(a is b for a, b in zip(children, t.children)):
        return t
    return App(t.head, children)


def make_subst(bindings: Dict[str, Term]) -> Substitution:
    """Drop identity bindings so that no variable maps to itself."""
    return {k: v for k, v in bindings.items() if v != Var(k)}


def subterm_at(t: Term, position: Sequence[int]) -> Term:
    node = t
    for index in position:
        if isinstance(node, Var) or not 1 <= index <= len(node.children):
            raise InvalidPosition(t, position)
        node = node.children[index - 1]
    return node


def replace_at(t: Term, position: Sequence[int], s: Term) -> Term:
    if not position:
        return s
    index = position[0]
    if isinstance(t, Var) or not 1 <= index <= len(t.children):
        raise InvalidPosition(t, position)
    children = list(t.children)
    try:
        children[index - 1] = replace_at(children[index - 1], position[1:], s)
    except InvalidPosition as error:
        raise InvalidPosition(t, position) from error
    return App(t.head, tuple(children))


def positions(t: Term) -> Iterator[Position]:
    """Pre-order enumeration of every valid position, root first."""
    yield ()
    if isinstance(t, App):
        for index, child in enumerate(t.children, start=1):
            for sub in positions(child):
                yield (index,) + sub


def subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, App):
        for child in t.children:
            yield from subterms(child)


def occurs(needle: Term, haystack: Term) -> bool:
    return any(s == needle for s in subterms(haystack))


@dataclasses.dataclass
class Signature:
    """Declared function symbols; numerals are always admitted as constants."""

    arities: Dict[str, int] = dataclasses.field(default_factory=dict)

    def declare(self, name: str, arity: int) -> None:
        known = self.arities.get(name)
        if known is not None and known != arity:
            raise ArityMismatch(Symbol(name, known), arity)
        self.arities[name] = arity

    def update(self, other: "Signature") -> None:
        for name, arity in other.arities.items():
            self.declare(name, arity)

    def __contains__(self, name: str) -> bool:
        return name in self.arities

    def symbol(self, name: str, arity: int) -> Symbol:
        if NUMERAL.fullmatch(name) and arity == 0:
            return Symbol(name, 0)
        known = self.arities.get(name)
        if known is None:
            raise UnknownSymbol(name, arity)
        if known != arity:
            raise ArityMismatch(Symbol(name, known), arity)
        return Symbol(name, arity)

    def check(self, t: Term) -> None:
        for node in subterms(t):
            if isinstance(node, App):
                self.symbol(node.name, node.head.arity)

    def copy(self) -> "Signature":
        return Signature(dict(self.arities))


MEM = Symbol("Mem", 2)


def is_mem(t: Term) -> bool:
    return isinstance(t, App) and t.head == MEM


def erase_mem(t: Term) -> Term:
    """Drop every memory wrapper, keeping the current (first) child."""
    if isinstance(t, Var):
        return t
    if t.head == MEM:
        return erase_mem(t.children[0])
    if not t.children:
        return t
    return App(t.head, tuple(erase_mem(c) for c in t.children))
