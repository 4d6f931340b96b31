import logging
from typing import Dict, List, Mapping, Optional

from .strategy import (
    Child,
    Choice,
    Eta,
    FixVar,
    Mu,
    Rule,
    Seq,
    Some,
    Strategy,
    recognize_derived,
)
from .terms import CONS, NIL, App, Term, Var, list_items

logger = logging.getLogger(__name__)

INFIX = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}

CONDITION_INFIX = {"eq": "=", "neq": "!=", "in": "in"}

Macros = Mapping[Term, str]


def _is_infix(t: Term) -> bool:
    return isinstance(t, App) and t.head.arity == 2 and t.name in INFIX


def _shortcut(t: App, macros: Optional[Macros]) -> Optional[str]:
    """Print grammar operator nodes with the constructor names the parser expands."""
    if t.name != "Oper" or t.head.arity != 5:
        return None
    name, arg, dom, codom, params = t.children
    if not isinstance(name, App) or name.children:
        return None
    dom_items = list_items(dom)
    codom_items = list_items(codom)
    param_items = list_items(params)
    if dom_items is None or codom_items is None or param_items is None:
        return None

    def f(x: Term) -> str:
        return format_term(x, macros)

    def lst(items: List[Term]) -> str:
        return "[" + ", ".join(f(i) for i in items) + "]"

    shape = (len(dom_items), len(codom_items), len(param_items))
    if name.name == "Integral" and shape == (1, 0, 0):
        return f"Int({f(arg)}, {f(dom_items[0])})"
    if name.name == "Partial" and shape == (1, 1, 0) and dom_items[0] == codom_items[0]:
        return f"D({f(arg)}, {f(dom_items[0])})"
    if name.name == "Restriction" and shape == (1, 1, 0):
        return f"Tr({f(arg)}, {f(dom_items[0])}, {f(codom_items[0])})"
    if name.name == "T" and len(dom_items) == 1 and len(param_items) == 1:
        return f"T({f(arg)}, {f(dom_items[0])}, {lst(codom_items)}, {f(param_items[0])})"
    if name.name in ("Tstar", "B") and len(codom_items) == 1 and len(param_items) == 1:
        return f"{name.name}({f(arg)}, {lst(dom_items)}, {f(codom_items[0])}, {f(param_items[0])})"
    if name.name == "Sum" and shape == (1, 0, 0):
        return f"Sum({f(arg)}, {f(dom_items[0])})"
    if name.name == "Equals" and shape == (0, 0, 0):
        sides = list_items(arg)
        if sides is not None and len(sides) == 2:
            return f"Eq({f(sides[0])}, {f(sides[1])})"
    return None


def format_term(t: Term, macros: Optional[Macros] = None, *, shortcuts: bool = True) -> str:
    if macros and t in macros:
        return "$" + macros[t]
    if isinstance(t, Var):
        return f"?{t.name}"
    if not t.children:
        return "[]" if t == NIL else t.name
    if t.head == CONS:
        items = list_items(t)
        if items is not None:
            return "[" + ", ".join(format_term(i, macros, shortcuts=shortcuts) for i in items) + "]"
    if _is_infix(t):
        prec = INFIX[t.name]
        left, right = t.children
        left_text = format_term(left, macros, shortcuts=shortcuts)
        right_text = format_term(right, macros, shortcuts=shortcuts)
        if _is_infix(left) and INFIX[left.name] < prec and not (macros and left in macros):  # type: ignore[union-attr]
            left_text = f"({left_text})"
        if _is_infix(right) and INFIX[right.name] <= prec and not (macros and right in macros):  # type: ignore[union-attr]
            right_text = f"({right_text})"
        return f"{left_text} {t.name} {right_text}"
    if shortcuts:
        short = _shortcut(t, macros)
        if short is not None:
            return short
    args = ", ".join(format_term(c, macros, shortcuts=shortcuts) for c in t.children)
    return f"{t.name}({args})"


def format_condition(c: Term, macros: Optional[Macros] = None) -> str:
    if isinstance(c, App):
        if c.name in CONDITION_INFIX and c.head.arity == 2:
            left, right = c.children
            return f"{format_set(left, macros)} {CONDITION_INFIX[c.name]} {format_set(right, macros)}"
        if c.name in ("and", "or") and c.head.arity == 2:
            parts = []
            for child in c.children:
                text = format_condition(child, macros)
                if isinstance(child, App) and child.name in ("and", "or") and child.name != c.name:
                    text = f"({text})"
                parts.append(text)
            return f" {c.name} ".join(parts)
        if c.name == "not" and c.head.arity == 1:
            inner = c.children[0]
            text = format_condition(inner, macros)
            if isinstance(inner, App) and inner.name in ("and", "or", "eq", "neq", "in"):
                text = f"({text})"
            return f"not {text}"
        if c.name in ("disjoint", "subset", "occurs") and c.head.arity == 2:
            return f"{c.name}({format_set(c.children[0], macros)}, {format_set(c.children[1], macros)})"
        if c.name == "empty" and c.head.arity == 1:
            return f"empty({format_set(c.children[0], macros)})"
        if c.name in ("true", "false") and not c.children:
            return c.name
    return format_term(c, macros)


def format_set(s: Term, macros: Optional[Macros] = None) -> str:
    if isinstance(s, App) and s.name == "theta" and s.head.arity == 1:
        return f"theta({format_term(s.children[0], macros)})"
    if isinstance(s, App) and s.name == "set" and s.head.arity == 1:
        items = list_items(s.children[0]) or []
        return "{" + ", ".join(format_term(i, macros) for i in items) + "}"
    return format_term(s, macros)


def format_strategy(s: Strategy, macros: Optional[Macros] = None, *, named: bool = False) -> str:
    if isinstance(s, Rule):
        if named and s.name:
            return s.name
        lhs = format_term(s.lhs, macros)
        rhs = format_term(s.rhs, macros)
        if s.cond is None:
            return f"rule({lhs}, {rhs})"
        return f"rule({lhs}, {rhs}, {format_condition(s.cond, macros)})"
    if isinstance(s, Seq):
        parts = [s.first]
        rest: Strategy = s.second
        while isinstance(rest, Seq):
            parts.append(rest.first)
            rest = rest.second
        parts.append(rest)
        return "seq(" + ", ".join(format_strategy(p, macros, named=named) for p in parts) + ")"
    if isinstance(s, Choice):
        parts = [s.first]
        rest = s.second
        while isinstance(rest, Choice):
            parts.append(rest.first)
            rest = rest.second
        parts.append(rest)
        return "lchoice(" + ", ".join(format_strategy(p, macros, named=named) for p in parts) + ")"
    if isinstance(s, Eta):
        return f"eta({format_strategy(s.body, macros, named=named)})"
    if isinstance(s, Some):
        return f"some({format_strategy(s.body, macros, named=named)})"
    if isinstance(s, Child):
        return f"child({s.index}, {format_strategy(s.body, macros, named=named)})"
    if isinstance(s, FixVar):
        return s.name
    if isinstance(s, Mu):
        derived = recognize_derived(s)
        if derived is not None:
            name, inner = derived
            return f"{name}({format_strategy(inner, macros, named=named)})"
        return f"mu({s.name}, {format_strategy(s.body, macros, named=named)})"
    raise TypeError(f"not a strategy: {s!r}")


def invert_macros(macros: Dict[str, Term]) -> Dict[Term, str]:
    """Term-to-name table for folding macros back while printing; largest terms win."""
    inverted: Dict[Term, str] = {}
    for name, term in sorted(macros.items()):
        if isinstance(term, App) and term.children:
            inverted.setdefault(term, name)
    return inverted
