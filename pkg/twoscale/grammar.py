import dataclasses
import enum
import itertools
import logging
import re
from typing import TYPE_CHECKING, Callable, Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from .terms import (
    MEM,
    NIL,
    App,
    Position,
    Signature,
    Symbol,
    Term,
    TermError,
    Var,
    const,
    is_numeral,
    list_items,
    make_list,
    sort_key,
    vars_of,
)

if TYPE_CHECKING:
    from .strategy import Rule

logger = logging.getLogger(__name__)

REG = Symbol("Reg", 5)
FUN = Symbol("Fun", 4)
VAR = Symbol("Var", 2)
BC = Symbol("BC", 3)
OPER = Symbol("Oper", 5)
INDEXED_REG = Symbol("IndexedReg", 2)
INDEXED_VAR = Symbol("IndexedVar", 2)
INDEXED_FUN = Symbol("IndexedFun", 2)

CONSTRUCTORS = (REG, FUN, VAR, BC, OPER, INDEXED_REG, INDEXED_VAR, INDEXED_FUN, MEM, Symbol("cons", 2))

OPS = ("+", "-", "*", "/", "^")
TYPES = ("Unknown", "Test", "Known", "bot_Type")
BC_KINDS = ("d", "n", "pd", "apd", "t")
BOT_R = const("bot_R")
BOT_F = const("bot_F")

DEFAULT_OPERATORS = ("Integral", "Partial", "Restriction", "T", "Tstar", "B", "Sum", "Equals")


class Kind(enum.Enum):
    REGION = "R"
    FUNCTION = "F"
    VARIABLE = "V"
    BCOND = "C"
    ANY = "*"

    def admits(self, other: "Kind") -> bool:
        """Whether a term of kind `other` may stand where `self` is expected."""
        if self is Kind.ANY or other is Kind.ANY:
            return True
        return self is other or (self is Kind.FUNCTION and other is Kind.VARIABLE)


# What a rewrite variable in a slot may be bound to.
SLOT_KINDS: Dict[Kind, FrozenSet[Kind]] = {
    Kind.REGION: frozenset({Kind.REGION}),
    Kind.FUNCTION: frozenset({Kind.FUNCTION, Kind.VARIABLE}),
    Kind.VARIABLE: frozenset({Kind.VARIABLE}),
    Kind.BCOND: frozenset({Kind.BCOND}),
    Kind.ANY: frozenset({Kind.REGION, Kind.FUNCTION, Kind.VARIABLE, Kind.BCOND}),
}


class GrammarViolation(TermError):
    def __init__(self, position: Position, expected: str, term: Term) -> None:
        self.position = tuple(position)
        self.expected = expected
        self.term = term
        super().__init__(f"at {list(self.position)}: expected {expected}, found {term}")


class NotClosed(TermError):
    def __init__(self, rule: "Rule", witness: Dict[str, Kind], reason: str) -> None:
        self.rule = rule
        self.witness = witness
        self.reason = reason
        assignment = ", ".join(f"?{k}:{v.value}" for k, v in sorted(witness.items()))
        super().__init__(f"rule {rule.name or rule.lhs} leaves the grammar under {{{assignment}}}: {reason}")


@dataclasses.dataclass
class GrammarSignature:
    """Name pools of the grammar. Empty pools admit any name in their slot."""

    regions: Set[str] = dataclasses.field(default_factory=set)
    variables: Set[str] = dataclasses.field(default_factory=set)
    functions: Set[str] = dataclasses.field(default_factory=set)
    operators: Set[str] = dataclasses.field(default_factory=lambda: set(DEFAULT_OPERATORS))
    constants: Set[str] = dataclasses.field(default_factory=set)
    # Pool names used as applied symbols, e.g. O/1; every other pool name is nullary.
    arities: Dict[str, int] = dataclasses.field(default_factory=dict)

    def __post_init__(self) -> None:
        pools = self.pools()
        for (a, names_a), (b, names_b) in itertools.combinations(pools.items(), 2):
            overlap = names_a & names_b
            if overlap:
                raise GrammarViolation((), f"disjoint {a} and {b} pools", const(sorted(overlap)[0]))

    def pools(self) -> Dict[str, Set[str]]:
        return {
            "region": self.regions,
            "variable": self.variables,
            "function": self.functions,
            "operator": self.operators,
            "constant": self.constants,
        }

    def declare(self, pool: str, names: Iterable[str]) -> None:
        target = self.pools()[pool]
        for name in names:
            for other, existing in self.pools().items():
                if other != pool and name in existing:
                    raise GrammarViolation((), f"{pool} name not already a {other} name", const(name))
            target.add(name)

    def admits(self, pool: str, name: str) -> bool:
        names = self.pools()[pool]
        return not names or name in names

    def signature(self) -> Signature:
        """Term signature holding the constructors, fixed symbols and every pool name."""
        sig = Signature()
        for symbol in CONSTRUCTORS:
            sig.declare(symbol.name, symbol.arity)
        sig.declare("nil", 0)
        for op in OPS:
            sig.declare(op, 2)
        for name in TYPES + BC_KINDS + ("bot_R", "bot_F"):
            sig.declare(name, 0)
        for pool in self.pools().values():
            for name in pool:
                if name not in sig:
                    sig.declare(name, self.arities.get(name, 0))
        return sig


class Validator:
    """Syntax-directed membership check; rewrite variables take their sort from `sorts`."""

    def __init__(
        self,
        gsig: Optional[GrammarSignature] = None,
        sorts: Optional[Dict[str, Kind]] = None,
        slots: Optional[Dict[str, List[Kind]]] = None,
    ) -> None:
        self.gsig = gsig or GrammarSignature()
        self.sorts = sorts or {}
        self.slots = slots

    def infer(self, t: Term, pos: Position = ()) -> Kind:
        if isinstance(t, Var):
            if self.slots is not None:
                self.slots.setdefault(t.name, []).append(Kind.ANY)
            return self.sorts.get(t.name, Kind.ANY)
        if t.head == MEM:
            kind = self.infer(t.children[0], pos + (1,))
            if kind is Kind.ANY:
                kind = self.infer(t.children[1], pos + (2,))
            else:
                self.check(t.children[1], kind, pos + (2,))
            return kind
        if t.head in (REG, INDEXED_REG):
            kind = Kind.REGION
        elif t.head in (VAR, INDEXED_VAR):
            kind = Kind.VARIABLE
        elif t.head == BC:
            kind = Kind.BCOND
        else:
            kind = Kind.FUNCTION
        self.check(t, kind, pos)
        return kind

    def check(self, t: Term, expected: Kind, pos: Position) -> None:
        if isinstance(t, Var):
            if self.slots is not None:
                self.slots.setdefault(t.name, []).append(expected)
            sort = self.sorts.get(t.name, Kind.ANY)
            if not expected.admits(sort):
                raise GrammarViolation(pos, _kind_name(expected), t)
            return
        if t.head == MEM:
            self.check(t.children[0], expected, pos + (1,))
            self.check(t.children[1], expected, pos + (2,))
            return
        checker = {
            Kind.REGION: self.check_region,
            Kind.FUNCTION: self.check_function,
            Kind.VARIABLE: self.check_variable,
            Kind.BCOND: self.check_bcond,
        }[expected]
        checker(t, pos)

    def check_list(self, t: Term, expected: Kind, pos: Position) -> List[Term]:
        items: List[Term] = []
        node = t
        here = pos
        while isinstance(node, App) and node.head.name == "cons" and node.head.arity == 2:
            self.check(node.children[0], expected, here + (1,))
            items.append(node.children[0])
            node = node.children[1]
            here = here + (2,)
        if isinstance(node, Var):
            return items
        if node != NIL:
            raise GrammarViolation(here, f"list of {_kind_name(expected)}", node)
        return items

    def check_name(self, t: Term, pool: str, pos: Position) -> None:
        if isinstance(t, Var):
            return
        if t.children or not self.gsig.admits(pool, t.name):
            raise GrammarViolation(pos, f"{pool} name", t)

    def check_index(self, t: Term, pos: Position) -> None:
        if isinstance(t, Var) or is_numeral(t):
            return
        if t.head in (VAR, INDEXED_VAR):
            self.check_variable(t, pos)
            return
        if not t.children:
            return
        raise GrammarViolation(pos, "index", t)

    def check_region(self, t: Term, pos: Position) -> None:
        if t.head == INDEXED_REG:
            self.check(t.children[0], Kind.REGION, pos + (1,))
            self.check_index(t.children[1], pos + (2,))
            return
        if t.head != REG:
            raise GrammarViolation(pos, _kind_name(Kind.REGION), t)
        name, directions, subregions, boundary, normal = t.children
        self.check_name(name, "region", pos + (1,))
        self.check_directions(directions, pos + (2,))
        self.check_list(subregions, Kind.REGION, pos + (3,))
        if boundary != BOT_R:
            self.check(boundary, Kind.REGION, pos + (4,))
        if normal != BOT_F:
            self.check(normal, Kind.FUNCTION, pos + (5,))

    def check_directions(self, t: Term, pos: Position) -> None:
        if isinstance(t, Var):
            return
        items = list_items(t)
        if items is None:
            raise GrammarViolation(pos, "list of directions", t)
        values = []
        for index, item in enumerate(items):
            if isinstance(item, Var):
                continue
            if not is_numeral(item) or int(item.name) < 1:
                raise GrammarViolation(pos + (2,) * index + (1,), "positive direction", item)
            values.append(int(item.name))
        if values != sorted(values):
            raise GrammarViolation(pos, "ascending directions", t)

    def check_variable(self, t: Term, pos: Position) -> None:
        if t.head == INDEXED_VAR:
            self.check(t.children[0], Kind.VARIABLE, pos + (1,))
            self.check_index(t.children[1], pos + (2,))
            return
        if t.head != VAR:
            raise GrammarViolation(pos, _kind_name(Kind.VARIABLE), t)
        self.check_name(t.children[0], "variable", pos + (1,))
        self.check(t.children[1], Kind.REGION, pos + (2,))

    def check_bcond(self, t: Term, pos: Position) -> None:
        if t.head != BC:
            raise GrammarViolation(pos, _kind_name(Kind.BCOND), t)
        kind, where, imposed = t.children
        if not isinstance(kind, Var) and (kind.children or kind.name not in BC_KINDS):
            raise GrammarViolation(pos + (1,), "boundary condition kind", kind)
        self.check(where, Kind.REGION, pos + (2,))
        if imposed != BOT_F:
            self.check(imposed, Kind.FUNCTION, pos + (3,))

    def check_function(self, t: Term, pos: Position) -> None:
        assert isinstance(t, App)
        if t == BOT_F or is_numeral(t):
            return
        if t.head in (VAR, INDEXED_VAR):
            self.check_variable(t, pos)
            return
        if t.head.arity == 2 and t.name in OPS:
            self.check(t.children[0], Kind.FUNCTION, pos + (1,))
            self.check(t.children[1], Kind.FUNCTION, pos + (2,))
            return
        if t.head == FUN:
            name, variables, bcs, kind = t.children
            self.check_name(name, "function", pos + (1,))
            self.check_list(variables, Kind.VARIABLE, pos + (2,))
            self.check_list(bcs, Kind.BCOND, pos + (3,))
            if not isinstance(kind, Var) and (kind.children or kind.name not in TYPES):
                raise GrammarViolation(pos + (4,), "type tag", kind)
            return
        if t.head == INDEXED_FUN:
            self.check(t.children[0], Kind.FUNCTION, pos + (1,))
            self.check_index(t.children[1], pos + (2,))
            return
        if t.head == OPER:
            self.check_operator(t, pos)
            return
        if not t.children:
            if self.gsig.admits("constant", t.name) and t.name not in TYPES + BC_KINDS:
                return
            raise GrammarViolation(pos, "constant", t)
        if t.name in self.gsig.functions or (not self.gsig.functions and t.name not in _RESERVED):
            for index, child in enumerate(t.children, start=1):
                self.check(child, Kind.FUNCTION, pos + (index,))
            return
        raise GrammarViolation(pos, _kind_name(Kind.FUNCTION), t)

    def check_operator(self, t: App, pos: Position) -> None:
        name, arg, domain, codomain, params = t.children
        if not isinstance(name, Var) and (name.children or name.name not in self.gsig.operators):
            raise GrammarViolation(pos + (1,), "operator name", name)
        if isinstance(arg, App) and arg.head.name == "cons":
            self.check_list(arg, Kind.FUNCTION, pos + (2,))
        else:
            self.check(arg, Kind.FUNCTION, pos + (2,))
        self.check_list(domain, Kind.VARIABLE, pos + (3,))
        self.check_list(codomain, Kind.VARIABLE, pos + (4,))
        self.check_list(params, Kind.FUNCTION, pos + (5,))


_RESERVED = frozenset(s.name for s in CONSTRUCTORS) | {"nil", "theta", "set"}


def _kind_name(kind: Kind) -> str:
    return {
        Kind.REGION: "region term",
        Kind.FUNCTION: "function term",
        Kind.VARIABLE: "variable term",
        Kind.BCOND: "boundary condition",
        Kind.ANY: "grammar term",
    }[kind]


def validate(t: Term, gsig: Optional[GrammarSignature] = None, sorts: Optional[Dict[str, Kind]] = None) -> Kind:
    return Validator(gsig, sorts).infer(t)


def is_valid(t: Term, gsig: Optional[GrammarSignature] = None) -> bool:
    try:
        validate(t, gsig)
    except GrammarViolation:
        return False
    return True


def _expect(t: Term, kind: Kind) -> Term:
    Validator().check(t, kind, ())
    return t


def mk_reg(name: str, directions: Iterable[int], subregions: Iterable[Term] = (), boundary: Term = BOT_R, normal: Term = BOT_F) -> App:
    """Region term; directions are sorted and subregions deduplicated."""
    subs = sorted(set(subregions), key=sort_key)
    return App(
        REG,
        (const(name), make_list(const(str(d)) for d in sorted(set(directions))), make_list(subs), boundary, normal),
    )


def mk_fun(name: str, variables: Iterable[Term] = (), bcs: Iterable[Term] = (), kind: str = "Unknown") -> App:
    return App(FUN, (const(name), make_list(variables), make_list(bcs), const(kind)))


def mk_var(name: str, region: Term) -> App:
    return App(VAR, (const(name), region))


def mk_bc(kind: str, where: Term, imposed: Term = BOT_F) -> App:
    return App(BC, (const(kind), where, imposed))


def mk_oper(name: str, arg: Term, domain: Iterable[Term], codomain: Iterable[Term], params: Iterable[Term]) -> App:
    return App(OPER, (const(name), arg, make_list(domain), make_list(codomain), make_list(params)))


def mk_integral(u: Term, x: Term) -> App:
    return mk_oper("Integral", _expect(u, Kind.FUNCTION), [_expect(x, Kind.VARIABLE)], [], [])


def mk_partial(u: Term, x: Term) -> App:
    return mk_oper("Partial", _expect(u, Kind.FUNCTION), [_expect(x, Kind.VARIABLE)], [x], [])


def mk_trace(u: Term, x: Term, x_prime: Term) -> App:
    return mk_oper(
        "Restriction", _expect(u, Kind.FUNCTION), [_expect(x, Kind.VARIABLE)], [_expect(x_prime, Kind.VARIABLE)], []
    )


def _variables(vs: Term) -> List[Term]:
    items = list_items(vs)
    if items is None:
        raise GrammarViolation((), "list of variable terms", vs)
    return [_expect(v, Kind.VARIABLE) for v in items]


def mk_T(u: Term, x: Term, fast: Term, eps: Term) -> App:  # pylint: disable=invalid-name
    return mk_oper(
        "T", _expect(u, Kind.FUNCTION), [_expect(x, Kind.VARIABLE)], _variables(fast), [_expect(eps, Kind.FUNCTION)]
    )


def mk_Tstar(v: Term, fast: Term, x: Term, eps: Term) -> App:  # pylint: disable=invalid-name
    return mk_oper(
        "Tstar", _expect(v, Kind.FUNCTION), _variables(fast), [_expect(x, Kind.VARIABLE)], [_expect(eps, Kind.FUNCTION)]
    )


def mk_B(v: Term, fast: Term, x: Term, eps: Term) -> App:  # pylint: disable=invalid-name
    return mk_oper(
        "B", _expect(v, Kind.FUNCTION), _variables(fast), [_expect(x, Kind.VARIABLE)], [_expect(eps, Kind.FUNCTION)]
    )


def mk_sum(u: Term, i: Term) -> App:
    return mk_oper("Sum", _expect(u, Kind.FUNCTION), [_expect(i, Kind.VARIABLE)], [], [])


def mk_equals(lhs: Term, rhs: Term) -> App:
    return App(OPER, (const("Equals"), make_list([lhs, rhs]), NIL, NIL, NIL))


# Constructor names the parser expands in grammar mode, keyed by (name, arity).
SHORTCUTS: Dict[Tuple[str, int], Callable[..., App]] = {
    ("Int", 2): mk_integral,
    ("D", 2): mk_partial,
    ("Tr", 3): mk_trace,
    ("T", 4): mk_T,
    ("Tstar", 4): mk_Tstar,
    ("B", 4): mk_B,
    ("Sum", 2): mk_sum,
    ("Eq", 2): mk_equals,
}


def oper_parts(t: Term) -> Optional[Tuple[str, Term, List[Term], List[Term], List[Term]]]:
    """(name, argument, domain, codomain, params) of an Oper node with proper lists."""
    if not isinstance(t, App) or t.head != OPER:
        return None
    name, arg, dom, codom, params = t.children
    lists = [list_items(dom), list_items(codom), list_items(params)]
    if isinstance(name, Var) or name.children or any(items is None for items in lists):
        return None
    return name.name, arg, lists[0], lists[1], lists[2]  # type: ignore[return-value]


def closure_check(rule: "Rule", gsig: Optional[GrammarSignature] = None) -> None:
    """Check that every instance of the rule maps grammar terms to grammar terms of the same kind."""
    slots: Dict[str, List[Kind]] = {}
    Validator(gsig, slots=slots).infer(rule.lhs)

    names = sorted(vars_of(rule.lhs))
    allowed: List[List[Kind]] = []
    for name in names:
        if name not in slots:
            # bound only in name, direction or list-tail positions
            allowed.append([Kind.ANY])
            continue
        kinds = set(SLOT_KINDS[Kind.ANY])
        for slot in slots[name]:
            kinds &= SLOT_KINDS[slot]
        allowed.append(sorted(kinds, key=lambda k: k.value))

    checked = 0
    for assignment in itertools.product(*allowed):
        sorts = dict(zip(names, assignment))
        try:
            lhs_kind = validate(rule.lhs, gsig, sorts)
        except GrammarViolation:
            continue
        checked += 1
        try:
            rhs_kind = validate(rule.rhs, gsig, sorts)
        except GrammarViolation as error:
            raise NotClosed(rule, sorts, str(error)) from error
        if not (rhs_kind is lhs_kind or (lhs_kind is Kind.FUNCTION and rhs_kind is Kind.VARIABLE)):
            raise NotClosed(rule, sorts, f"{_kind_name(lhs_kind)} rewritten to {_kind_name(rhs_kind)}")
    logger.debug("closure of %s checked under %d assignments", rule.name or rule.lhs, checked)


GREEK = {
    "alpha",
    "beta",
    "gamma",
    "delta",
    "eta",
    "theta",
    "kappa",
    "lambda",
    "mu",
    "nu",
    "xi",
    "rho",
    "sigma",
    "tau",
    "phi",
    "psi",
    "omega",
    "Gamma",
    "Omega",
    "Theta",
    "Psi",
}

_NAME_PARTS = re.compile(r"^([A-Za-z]+?)(_s|_?[0-9]+)?$")


def latex_name(name: str) -> str:
    if name == "eps":
        return r"\varepsilon"
    if name.lstrip("-").isdigit():
        return name
    match = _NAME_PARTS.match(name)
    if match is None:
        return r"\mathrm{" + name.replace("_", r"\_") + "}"
    stem, suffix = match.groups()
    text = "\\" + stem if stem in GREEK else stem
    if suffix == "_s":
        return text + r"^{\sharp}"
    if suffix:
        return text + "^{" + suffix.lstrip("_") + "}"
    return text


_LATEX_PREC = {"+": 1, "-": 1, "*": 2, "/": 3, "^": 4}


def format_latex(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if not t.children:
        return latex_name(t.name)
    if t.head in (REG, VAR, FUN):
        name = t.children[0]
        text = format_latex(name)
        if t.head == FUN:
            args = list_items(t.children[1]) or []
            if args:
                text += "(" + ", ".join(format_latex(a) for a in args) + ")"
        return text
    if t.head in (INDEXED_REG, INDEXED_VAR, INDEXED_FUN):
        return "{" + format_latex(t.children[0]) + "}_{" + format_latex(t.children[1]) + "}"
    if t.head == MEM:
        return r"\mathbb{M}(" + format_latex(t.children[0]) + ", " + format_latex(t.children[1]) + ")"
    if t.head.name == "cons":
        return "(" + ", ".join(format_latex(i) for i in list_items(t) or [t]) + ")"
    if t.head.arity == 2 and t.name in OPS:
        return _latex_infix(t)
    parts = oper_parts(t)
    if parts is not None:
        return _latex_operator(*parts)
    return latex_name(t.name) + "(" + ", ".join(format_latex(c) for c in t.children) + ")"


def _latex_infix(t: App) -> str:
    left, right = t.children
    if t.name == "/":
        return r"\frac{" + format_latex(left) + "}{" + format_latex(right) + "}"
    prec = _LATEX_PREC[t.name]

    def wrap(child: Term, strict: bool) -> str:
        text = format_latex(child)
        if isinstance(child, App) and child.head.arity == 2 and child.name in OPS and child.name != "/":
            inner = _LATEX_PREC[child.name]
            if inner < prec or (strict and inner == prec):
                return r"\left(" + text + r"\right)"
        return text

    if t.name == "^":
        return "{" + wrap(left, True) + "}^{" + format_latex(right) + "}"
    op = r" \, " if t.name == "*" else f" {t.name} "
    return wrap(left, False) + op + wrap(right, True)


def _region_of(x: Term) -> Optional[Term]:
    while isinstance(x, App) and x.head == INDEXED_VAR:
        x = x.children[0]
    if isinstance(x, App) and x.head == VAR:
        return x.children[1]
    return None


def _latex_operator(name: str, arg: Term, dom: List[Term], codom: List[Term], params: List[Term]) -> str:
    body = format_latex(arg)
    if name == "Integral" and dom:
        region = _region_of(dom[0])
        under = "_{" + format_latex(region) + "}" if region is not None else ""
        return r"\int" + under + " " + body + r" \, d" + format_latex(dom[0])
    if name == "Partial" and dom:
        return r"\frac{\partial " + body + r"}{\partial " + format_latex(dom[0]) + "}"
    if name == "Restriction":
        return r"\mathrm{tr}(" + body + ")"
    if name == "T":
        return "T(" + body + ")"
    if name == "Tstar":
        return "T^{*}(" + body + ")"
    if name == "B":
        return "B(" + body + ")"
    if name == "Sum" and dom:
        return r"\sum_{" + format_latex(dom[0]) + "} " + body
    if name == "Equals":
        sides = list_items(arg)
        if sides is not None and len(sides) == 2:
            return format_latex(sides[0]) + " = " + format_latex(sides[1])
    return r"\mathrm{" + name + "}(" + body + ")"


def print_expr(t: Term, fmt: str = "canonical", macros: Optional[Dict[Term, str]] = None) -> str:
    if fmt == "latex":
        return format_latex(t)
    if fmt != "canonical":
        raise ValueError(f"unknown format: {fmt}")
    from .printer import format_term  # pylint: disable=import-outside-toplevel

    return format_term(t, macros)
