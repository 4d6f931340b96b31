import dataclasses
import logging
import re
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import pyparsing as pp

from . import grammar, meta
from .strategy import (
    DERIVED,
    Child,
    Eta,
    FixVar,
    Mu,
    Rule,
    Some,
    Strategy,
    UnboundFixVar,
    choice_all,
    seq_all,
)
from .terms import App, Signature, Symbol, Term, TermError, Var, const, make_list

logger = logging.getLogger(__name__)

pp.ParserElement.enable_packrat()


class ParseError(TermError):
    def __init__(self, message: str, line: int, column: int, source: str = "") -> None:
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        where = f"{source}:" if source else ""
        super().__init__(f"{where}{line}:{column}: {message}")


@dataclasses.dataclass
class Raw:
    """Syntax node produced by the grammar, resolved against a context afterwards."""

    kind: str
    value: str = ""
    args: List[Any] = dataclasses.field(default_factory=list)
    loc: int = 0


@dataclasses.dataclass
class SyntaxContext:
    """Everything a piece of text may refer to: symbols, macros, named rules and strategies."""

    signature: Optional[Signature] = None
    macros: Dict[str, Term] = dataclasses.field(default_factory=dict)
    grammar: bool = False
    rules: Dict[str, Rule] = dataclasses.field(default_factory=dict)
    strategies: Dict[str, Strategy] = dataclasses.field(default_factory=dict)

    def copy(self) -> "SyntaxContext":
        return SyntaxContext(
            signature=self.signature.copy() if self.signature else None,
            macros=dict(self.macros),
            grammar=self.grammar,
            rules=dict(self.rules),
            strategies=dict(self.strategies),
        )


def _raw(kind: str) -> Callable:
    def action(s: str, loc: int, toks: pp.ParseResults) -> Raw:
        if kind in ("app", "list", "set"):
            if kind == "app":
                return Raw(kind, toks[0], list(toks[1]), loc)
            return Raw(kind, args=list(toks[0]), loc=loc)
        return Raw(kind, toks[0], loc=loc)

    return action


def _fold_infix(s: str, loc: int, toks: pp.ParseResults) -> Raw:
    items = toks[0]
    acc = items[0]
    for op, right in zip(items[1::2], items[2::2]):
        acc = Raw("op", op, [acc, right], loc)
    return acc


def _keyword_call(kind: str) -> Callable:
    def action(s: str, loc: int, toks: pp.ParseResults) -> Raw:
        return Raw(kind, toks[0], list(toks[1:]), loc)

    return action


LPAR, RPAR, LBRACK, RBRACK, LBRACE, RBRACE, COMMA = map(pp.Suppress, "()[]{},")
IDENT = pp.Regex(r"[A-Za-z_][A-Za-z0-9_]*")
NUM = pp.Regex(r"-?[0-9]+")
RVAR = pp.Regex(r"\?[A-Za-z_][A-Za-z0-9_]*").set_parse_action(lambda s, loc, toks: Raw("var", toks[0][1:], loc=loc))
MACRO = pp.Regex(r"\$[A-Za-z_][A-Za-z0-9_]*").set_parse_action(
    lambda s, loc, toks: Raw("macro", toks[0][1:], loc=loc)
)
REIFIED = pp.Regex(r"[@#][A-Za-z_][A-Za-z0-9_]*").set_parse_action(_raw("const"))

TERM = pp.Forward()
STRATEGY = pp.Forward()
_QUOTE = (pp.Keyword("quote") + LPAR + STRATEGY + RPAR).set_parse_action(_keyword_call("quote"))
_CALL = (IDENT + LPAR + pp.Group(pp.Optional(pp.delimited_list(TERM))) + RPAR).set_parse_action(_raw("app"))
_LIST = (LBRACK + pp.Group(pp.Optional(pp.delimited_list(TERM))) + RBRACK).set_parse_action(_raw("list"))
_ATOM = (
    _QUOTE
    | _CALL
    | _LIST
    | NUM.copy().set_parse_action(_raw("num"))
    | RVAR
    | MACRO
    | REIFIED
    | IDENT.copy().set_parse_action(_raw("ident"))
)
TERM <<= pp.infix_notation(
    _ATOM,
    [
        (pp.Literal("^"), 2, pp.OpAssoc.LEFT, _fold_infix),
        (pp.one_of("* /"), 2, pp.OpAssoc.LEFT, _fold_infix),
        (pp.one_of("+ -"), 2, pp.OpAssoc.LEFT, _fold_infix),
    ],
)

_SET = (
    (pp.Keyword("theta") + LPAR + TERM + RPAR).set_parse_action(_keyword_call("theta"))
    | (LBRACE + pp.Group(pp.Optional(pp.delimited_list(TERM))) + RBRACE).set_parse_action(_raw("set"))
)
_OPERAND = _SET | TERM
_COMPARISON = (_OPERAND + (pp.one_of("!= =") | pp.Keyword("in")) + _OPERAND).set_parse_action(
    lambda s, loc, toks: Raw("cmp", toks[1], [toks[0], toks[2]], loc)
)
_CATOM = (
    pp.Keyword("true").set_parse_action(_raw("true"))
    | pp.Keyword("false").set_parse_action(_raw("false"))
    | (pp.one_of("disjoint subset occurs", as_keyword=True) + LPAR + _OPERAND + COMMA + _OPERAND + RPAR).set_parse_action(
        _keyword_call("pred")
    )
    | (pp.Keyword("empty") + LPAR + _OPERAND + RPAR).set_parse_action(_keyword_call("pred"))
    | _COMPARISON
)


def _fold_not(s: str, loc: int, toks: pp.ParseResults) -> Raw:
    return Raw("not", "not", [toks[0][1]], loc)


CONDITION = pp.infix_notation(
    _CATOM,
    [
        (pp.Keyword("not"), 1, pp.OpAssoc.RIGHT, _fold_not),
        (pp.Keyword("and"), 2, pp.OpAssoc.LEFT, _fold_infix),
        (pp.Keyword("or"), 2, pp.OpAssoc.LEFT, _fold_infix),
    ],
)

_RULE = (
    pp.Keyword("rule") + LPAR + TERM + COMMA + TERM + pp.Optional(COMMA + CONDITION) + RPAR
).set_parse_action(_keyword_call("rule"))
_NARY = (pp.one_of("seq lchoice", as_keyword=True) + LPAR + pp.delimited_list(STRATEGY) + RPAR).set_parse_action(
    _keyword_call("nary")
)
_UNARY = (
    pp.one_of("eta some " + " ".join(DERIVED), as_keyword=True) + LPAR + STRATEGY + RPAR
).set_parse_action(_keyword_call("unary"))
_CHILD = (pp.Keyword("child") + LPAR + NUM + COMMA + STRATEGY + RPAR).set_parse_action(_keyword_call("child"))
_MU = (pp.Keyword("mu") + LPAR + IDENT + COMMA + STRATEGY + RPAR).set_parse_action(_keyword_call("mu"))
_NAME = IDENT.copy().set_parse_action(_raw("name"))
STRATEGY <<= _RULE | _NARY | _UNARY | _CHILD | _MU | _NAME

RULE_BODY = TERM + pp.Suppress("->") + TERM


class Resolver:
    """Turns raw syntax into terms and strategies, checking symbols against the context."""

    def __init__(self, ctx: SyntaxContext, text: str, source: str = "", line_offset: int = 0) -> None:
        self.ctx = ctx
        self.text = text
        self.source = source
        self.line_offset = line_offset

    def error(self, message: str, loc: int) -> ParseError:
        return ParseError(
            message, pp.lineno(loc, self.text) + self.line_offset, pp.col(loc, self.text), self.source
        )

    def symbol(self, name: str, arity: int) -> Symbol:
        if self.ctx.signature is None:
            return Symbol(name, arity)
        return self.ctx.signature.symbol(name, arity)

    def term(self, raw: Raw) -> Term:
        if raw.kind == "var":
            return Var(raw.value)
        if raw.kind == "num":
            return const(raw.value)
        if raw.kind == "const":
            return const(raw.value)
        if raw.kind == "macro":
            if raw.value not in self.ctx.macros:
                raise self.error(f"undefined macro ${raw.value}", raw.loc)
            return self.ctx.macros[raw.value]
        if raw.kind == "ident":
            return App(self.symbol(raw.value, 0))
        if raw.kind == "quote":
            return meta.reify(self.strategy(raw.args[0]))
        if raw.kind == "list":
            return make_list(self.term(a) for a in raw.args)
        if raw.kind == "op":
            return App(self.symbol(raw.value, 2), tuple(self.term(a) for a in raw.args))
        if raw.kind == "app":
            children = [self.term(a) for a in raw.args]
            if self.ctx.grammar:
                declared = (
                    self.ctx.signature is not None
                    and self.ctx.signature.arities.get(raw.value) == len(children)
                )
                shortcut = grammar.SHORTCUTS.get((raw.value, len(children)))
                if shortcut is not None and not declared:
                    return shortcut(*children)
            return App(self.symbol(raw.value, len(children)), tuple(children))
        raise self.error(f"expected a term, found {raw.kind}", raw.loc)

    def set_expr(self, raw: Raw) -> Term:
        if raw.kind == "theta":
            return App(Symbol("theta", 1), (self.term(raw.args[0]),))
        if raw.kind == "set":
            return App(Symbol("set", 1), (make_list(self.term(a) for a in raw.args),))
        return self.term(raw)

    def condition(self, raw: Raw) -> Term:
        if raw.kind in ("true", "false"):
            return App(Symbol(raw.kind, 0))
        if raw.kind == "cmp":
            head = {"=": "eq", "!=": "neq", "in": "in"}[raw.value]
            return App(Symbol(head, 2), tuple(self.set_expr(a) for a in raw.args))
        if raw.kind == "pred":
            return App(Symbol(raw.value, len(raw.args)), tuple(self.set_expr(a) for a in raw.args))
        if raw.kind == "not":
            return App(Symbol("not", 1), (self.condition(raw.args[0]),))
        if raw.kind == "op" and raw.value in ("and", "or"):
            return App(Symbol(raw.value, 2), tuple(self.condition(a) for a in raw.args))
        raise self.error(f"expected a condition, found {raw.kind}", raw.loc)

    def strategy(self, raw: Raw, bound: Tuple[str, ...] = ()) -> Strategy:
        if raw.kind == "rule":
            lhs = self.term(raw.args[0])
            rhs = self.term(raw.args[1])
            cond = self.condition(raw.args[2]) if len(raw.args) > 2 else None
            return Rule(lhs, rhs, cond)
        if raw.kind == "nary":
            parts = [self.strategy(a, bound) for a in raw.args]
            return seq_all(parts) if raw.value == "seq" else choice_all(parts)
        if raw.kind == "unary":
            body = self.strategy(raw.args[0], bound)
            if raw.value == "eta":
                return Eta(body)
            if raw.value == "some":
                return Some(body)
            return DERIVED[raw.value](body)
        if raw.kind == "child":
            return Child(int(raw.args[0]), self.strategy(raw.args[1], bound))
        if raw.kind == "mu":
            name = raw.args[0]
            return Mu(name, self.strategy(raw.args[1], bound + (name,)))
        if raw.kind == "name":
            if raw.value in bound:
                return FixVar(raw.value)
            if raw.value in self.ctx.rules:
                return self.ctx.rules[raw.value]
            if raw.value in self.ctx.strategies:
                return self.ctx.strategies[raw.value]
            raise UnboundFixVar(raw.value)
        raise self.error(f"expected a strategy, found {raw.kind}", raw.loc)


def _parse(element: pp.ParserElement, text: str, source: str, line_offset: int) -> pp.ParseResults:
    try:
        return element.parse_string(text, parse_all=True)
    except pp.ParseException as error:
        raise ParseError(str(error.msg), error.lineno + line_offset, error.col, source) from error


def parse_term(text: str, ctx: Optional[SyntaxContext] = None, *, source: str = "", line_offset: int = 0) -> Term:
    ctx = ctx or SyntaxContext()
    toks = _parse(TERM, text, source, line_offset)
    return Resolver(ctx, text, source, line_offset).term(toks[0])


def parse_condition(
    text: str, ctx: Optional[SyntaxContext] = None, *, source: str = "", line_offset: int = 0
) -> Term:
    ctx = ctx or SyntaxContext()
    toks = _parse(CONDITION, text, source, line_offset)
    return Resolver(ctx, text, source, line_offset).condition(toks[0])


def parse_strategy(
    text: str, ctx: Optional[SyntaxContext] = None, *, source: str = "", line_offset: int = 0
) -> Strategy:
    ctx = ctx or SyntaxContext()
    toks = _parse(STRATEGY, text, source, line_offset)
    return Resolver(ctx, text, source, line_offset).strategy(toks[0])


def parse_rule(
    text: str,
    ctx: Optional[SyntaxContext] = None,
    *,
    name: str = "",
    cond: Optional[str] = None,
    source: str = "",
    line_offset: int = 0,
) -> Rule:
    """`lhs -> rhs`, with the condition given separately (the `cond:` clause of a rule file)."""
    ctx = ctx or SyntaxContext()
    toks = _parse(RULE_BODY, text, source, line_offset)
    resolver = Resolver(ctx, text, source, line_offset)
    condition = None
    if cond is not None:
        condition = parse_condition(cond, ctx, source=source, line_offset=line_offset)
    return Rule(resolver.term(toks[0]), resolver.term(toks[1]), condition, name=name)


_STATEMENT = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*([^:=]*?)\s*([:=])\s*(.*)$")
_CLAUSE = re.compile(r"^\s*([A-Za-z_]+):\s*(.*)$")


@dataclasses.dataclass
class Statement:
    keyword: str
    head: str
    body: str
    line: int
    clauses: Dict[str, str] = dataclasses.field(default_factory=dict)
    clause_lines: Dict[str, int] = dataclasses.field(default_factory=dict)

    @property
    def label(self) -> str:
        """`name` out of a `name [category]` head."""
        return self.head.split("[", 1)[0].strip()

    @property
    def category(self) -> Optional[str]:
        match = re.search(r"\[([^\]]*)\]", self.head)
        return match.group(1).strip() if match else None


def split_statements(
    text: str, *, clauses: Sequence[str] = ("cond", "expect", "generalize"), source: str = ""
) -> List[Statement]:
    """Statements start in column 0; indented lines continue them; `#` lines are comments."""
    statements: List[Statement] = []
    current: Optional[Statement] = None
    clause: Optional[str] = None

    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if not line[0].isspace():
            match = _STATEMENT.match(line)
            if match is None:
                raise ParseError(f"unable to parse: {line}", number, 1, source)
            keyword, head, _, rest = match.groups()
            current = Statement(keyword=keyword, head=head, body=rest, line=number)
            statements.append(current)
            clause = None
            continue
        if current is None:
            raise ParseError("continuation line without a statement", number, 1, source)
        sub = _CLAUSE.match(line)
        if sub is not None and sub.group(1) in clauses:
            clause = sub.group(1)
            current.clauses[clause] = sub.group(2)
            current.clause_lines[clause] = number
        elif clause is not None:
            current.clauses[clause] += "\n" + line
        else:
            current.body += "\n" + line

    return statements


def split_names(body: str) -> List[str]:
    return [item.strip() for item in body.replace("\n", " ").split(",") if item.strip()]
