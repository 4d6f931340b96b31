import dataclasses
import logging
import re
import time
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .grammar import GrammarSignature, closure_check, oper_parts, validate
from .meta import MalformedReification, SoFail, so_eval
from .modulo import EquationalTheory, ModuloEvaluator, TermSet
from .parser import (
    ParseError,
    Statement,
    SyntaxContext,
    parse_rule,
    parse_strategy,
    parse_term,
    split_names,
    split_statements,
)
from .printer import format_strategy, format_term, invert_macros
from .report import BlockResult, Report
from .strategy import DEFAULT_FUEL, Evaluator, Rule, Strategy, seq_all
from .terms import App, Position, Signature, Term, TermError, Var, list_items, vars_of
from .trace import StepSeverity, Trace, TraceStep

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"

# Reified step strategies unfold far more often than the rules they name.
SO_FUEL = 100_000

CATEGORIES = ("usual", "specialized", "auxiliary")

POOLS = {"reg": "region", "var": "variable", "fun": "function", "oper": "operator", "const": "constant"}


class CorpusError(TermError):
    def __init__(self, path: Union[Path, str, None], message: str) -> None:
        self.path = path
        self.message = message
        super().__init__(f"{path or '<corpus>'}: {message}")


class StepMismatch(TermError):
    def __init__(self, block: int, step: int, expected: Term, actual: TermSet) -> None:
        self.block = block
        self.step = step
        self.expected = expected
        self.actual = actual
        self.trace: Optional[Trace] = None
        super().__init__(f"block {block} step {step}: expected term not among {len(actual)} result(s)")

    def diff(self) -> str:
        """Expected against the closest result, reduced to the first differing subterms."""
        if not self.actual:
            return f"expected {format_term(self.expected)}\nactual   <fail>"
        candidates = [first_difference(self.expected, t) for t in self.actual]
        position, want, got = max(candidates, key=lambda c: len(c[0]))
        return f"at {list(position)}\nexpected {format_term(want)}\nactual   {format_term(got)}"


class NotAnEquation(TermError):
    def __init__(self, term: Term, reason: str = "not an Equals term") -> None:
        self.term = term
        self.reason = reason
        super().__init__(f"{reason}: {term}")


def first_difference(a: Term, b: Term, position: Position = ()) -> Tuple[Position, Term, Term]:
    if isinstance(a, App) and isinstance(b, App) and a.head == b.head and a != b:
        for index, (x, y) in enumerate(zip(a.children, b.children), start=1):
            if x != y:
                return first_difference(x, y, position + (index,))
    return position, a, b


def replace_subterm(t: Term, old: Term, new: Term) -> Term:
    if t == old:
        return new
    if isinstance(t, Var) or not t.children:
        return t
    return App(t.head, tuple(replace_subterm(c, old, new) for c in t.children))


def _parse_range(text: str) -> List[int]:
    match = re.fullmatch(r"\s*(\d+)\s*(?:-\s*(\d+))?\s*", text)
    if match is None:
        raise ValueError(f"not a range: {text}")
    first = int(match.group(1))
    last = int(match.group(2) or first)
    return list(range(first, last + 1))


@dataclasses.dataclass
class RuleBase:
    """Named conditional rules with their categories, plus the syntax they are written in."""

    name: str
    ctx: SyntaxContext = dataclasses.field(default_factory=SyntaxContext)
    gsig: Optional[GrammarSignature] = None
    theory: EquationalTheory = dataclasses.field(default_factory=EquationalTheory)
    categories: Dict[str, str] = dataclasses.field(default_factory=dict)
    seeds: Dict[str, Term] = dataclasses.field(default_factory=dict)
    path: Optional[Path] = None

    @property
    def rules(self) -> Dict[str, Rule]:
        return self.ctx.rules

    @property
    def strategies(self) -> Dict[str, Strategy]:
        return self.ctx.strategies

    def add(self, rule: Rule, category: str = "usual", *, replace: bool = False) -> None:
        if not rule.name:
            raise CorpusError(self.path, "rules in a rule base need a name")
        if rule.name in self.ctx.rules and not replace:
            raise CorpusError(self.path, f"duplicate rule name {rule.name}")
        if category not in CATEGORIES:
            raise CorpusError(self.path, f"rule {rule.name}: unknown category {category}")
        if self.gsig is not None:
            closure_check(rule, self.gsig)
        self.ctx.rules[rule.name] = rule
        self.categories[rule.name] = category

    def copy(self) -> "RuleBase":
        return dataclasses.replace(
            self,
            ctx=self.ctx.copy(),
            gsig=dataclasses.replace(
                self.gsig,
                regions=set(self.gsig.regions),
                variables=set(self.gsig.variables),
                functions=set(self.gsig.functions),
                operators=set(self.gsig.operators),
                constants=set(self.gsig.constants),
                arities=dict(self.gsig.arities),
            )
            if self.gsig
            else None,
            categories=dict(self.categories),
            seeds=dict(self.seeds),
        )

    def include(self, other: "RuleBase", *, replace: bool = False) -> None:
        """Take over everything `other` declares; with `replace`, its rules win on name clashes."""
        if other.gsig is not None:
            if self.gsig is None:
                self.gsig = GrammarSignature()
                self.ctx.grammar = True
            for pool, names in other.gsig.pools().items():
                self.gsig.declare(pool, names - self.gsig.pools()[pool])
            self.gsig.arities.update(other.gsig.arities)
        if other.ctx.signature is not None:
            if self.ctx.signature is None:
                self.ctx.signature = Signature()
            self.ctx.signature.update(other.ctx.signature)
        self.ctx.grammar = self.ctx.grammar or other.ctx.grammar
        for name, term in other.ctx.macros.items():
            self.ctx.macros.setdefault(name, term)
        for name, rule in other.rules.items():
            if name in self.rules and not replace:
                raise CorpusError(self.path, f"rule {name} defined in both {self.name} and {other.name}")
            self.ctx.rules[name] = rule
            self.categories[name] = other.categories.get(name, "usual")
        self.ctx.strategies.update(other.strategies)
        self.theory = self.theory.merge(other.theory)
        for name, seed in other.seeds.items():
            self.seeds.setdefault(name, seed)

    def merged(self, *others: "RuleBase") -> "RuleBase":
        result = self.copy()
        for other in others:
            result.include(other)
        return result

    def validate(self, t: Term) -> None:
        if self.gsig is not None:
            validate(t, self.gsig)

    def inventory(self) -> Dict[str, int]:
        counts = {c: 0 for c in CATEGORIES}
        for category in self.categories.values():
            counts[category] += 1
        return counts

    @classmethod
    def parse(
        cls, text: str, *, name: str, source: str = "", search: Sequence[Path] = (DATA_DIR / "rules",)
    ) -> "RuleBase":
        base = cls(name=name, path=Path(source) if source else None)
        _RuleFileReader(base, source, search).read(text)
        logger.debug("rule base %s: %d rules, %s", name, len(base.rules), base.inventory())
        return base

    @classmethod
    def load(cls, name: Union[str, Path], search: Optional[Sequence[Path]] = None) -> "RuleBase":
        search = list(search or [DATA_DIR / "rules"])
        path = Path(name)
        if not path.suffix:
            for directory in search:
                candidate = directory / f"{name}.rules"
                if candidate.exists():
                    path = candidate
                    break
        if not path.exists():
            raise CorpusError(path, "no such rule file")
        return cls.parse(path.read_text(), name=path.stem, source=str(path), search=[path.parent] + search)


class _RuleFileReader:
    """Statement handlers of a rule file, applied in file order."""

    def __init__(self, base: RuleBase, source: str, search: Sequence[Path]) -> None:
        self.base = base
        self.source = source
        self.search = list(search)

    def read(self, text: str) -> None:
        for statement in split_statements(text, clauses=("cond",), source=self.source):
            handler = getattr(self, f"on_{statement.keyword}", None)
            if handler is None:
                raise CorpusError(self.source, f"line {statement.line}: unknown statement {statement.keyword}")
            try:
                handler(statement)
            except (ParseError, TermError, ValueError) as error:
                if isinstance(error, CorpusError):
                    raise
                where = f"line {statement.line}"
                if statement.keyword == "rule":
                    where += f", rule {statement.label}"
                raise CorpusError(self.source, f"{where}: {error}") from error

    @property
    def ctx(self) -> SyntaxContext:
        return self.base.ctx

    def refresh_signature(self) -> None:
        if self.base.gsig is None:
            return
        if self.ctx.signature is None:
            self.ctx.signature = Signature()
        self.ctx.signature.update(self.base.gsig.signature())

    def on_import(self, statement: Statement) -> None:
        for name in split_names(statement.body):
            self.base.include(RuleBase.load(name, self.search))
        self.refresh_signature()

    def on_grammar(self, statement: Statement) -> None:
        if statement.body.strip() not in ("on", "true", "yes"):
            return
        if self.base.gsig is None:
            self.base.gsig = GrammarSignature()
        self.ctx.grammar = True
        self.refresh_signature()

    def on_signature(self, statement: Statement) -> None:
        if self.ctx.signature is None:
            self.ctx.signature = Signature()
        for item in split_names(statement.body):
            name, _, arity = item.partition("/")
            self.ctx.signature.declare(name.strip(), int(arity or 0))

    def declare_pool(self, statement: Statement) -> None:
        if self.base.gsig is None:
            raise CorpusError(self.source, f"line {statement.line}: {statement.keyword} needs grammar: on")
        names = []
        for item in split_names(statement.body):
            name, _, arity = item.partition("/")
            names.append(name.strip())
            if arity:
                self.base.gsig.arities[name.strip()] = int(arity)
        self.base.gsig.declare(POOLS[statement.keyword], names)
        self.refresh_signature()

    on_reg = on_var = on_fun = on_oper = on_const = declare_pool

    def on_ac(self, statement: Statement) -> None:
        self.base.theory = self.base.theory.merge(EquationalTheory.ac(*split_names(statement.body)))

    def on_assoc(self, statement: Statement) -> None:
        names = frozenset(split_names(statement.body))
        self.base.theory = self.base.theory.merge(EquationalTheory(assoc=names))

    def on_comm(self, statement: Statement) -> None:
        names = frozenset(split_names(statement.body))
        self.base.theory = self.base.theory.merge(EquationalTheory(comm=names))

    def on_axiom(self, statement: Statement) -> None:
        lhs, sep, rhs = statement.body.partition("=")
        if not sep:
            raise ValueError(f"axiom needs lhs = rhs: {statement.body}")
        axiom = (parse_term(lhs, self.ctx), parse_term(rhs, self.ctx))
        self.base.theory = self.base.theory.merge(EquationalTheory.from_axioms([axiom]))

    def on_let(self, statement: Statement) -> None:
        self.ctx.macros[statement.label] = parse_term(
            statement.body, self.ctx, source=self.source, line_offset=statement.line - 1
        )

    def on_rule(self, statement: Statement) -> None:
        rule = parse_rule(
            statement.body,
            self.ctx,
            name=statement.label,
            cond=statement.clauses.get("cond"),
            source=self.source,
            line_offset=statement.line - 1,
        )
        self.base.add(rule, statement.category or "usual")

    def on_strategy(self, statement: Statement) -> None:
        self.ctx.strategies[statement.label] = parse_strategy(
            statement.body, self.ctx, source=self.source, line_offset=statement.line - 1
        )

    def on_seed(self, statement: Statement) -> None:
        seed = parse_term(statement.body, self.ctx, source=self.source, line_offset=statement.line - 1)
        self.base.validate(seed)
        self.base.seeds[statement.label or "model"] = seed


def result_to_rules(
    equation: Term,
    orientation: str = "ltr",
    *,
    name: str = "",
    generalize: Sequence[Tuple[Term, Var]] = (),
    gsig: Optional[GrammarSignature] = None,
    theory: Optional[EquationalTheory] = None,
) -> List[Rule]:
    """Orient a proven equation into a rule; the designated ground subterms become variables."""
    parts = oper_parts(equation)
    if parts is None or parts[0] != "Equals":
        raise NotAnEquation(equation)
    sides = list_items(parts[1])
    if sides is None or len(sides) != 2:
        raise NotAnEquation(equation, "Equals needs exactly two sides")
    if vars_of(equation):
        raise NotAnEquation(equation, "equation is not ground")
    if orientation not in ("ltr", "rtl"):
        raise ValueError(f"orientation must be ltr or rtl: {orientation}")

    lhs, rhs = sides if orientation == "ltr" else sides[::-1]
    for old, new in generalize:
        lhs = replace_subterm(lhs, old, new)
        rhs = replace_subterm(rhs, old, new)

    theory = theory or EquationalTheory()
    if theory.canonical(lhs) == theory.canonical(rhs):
        logger.warning("export %s is the trivial equation %s, skipped", name or "<anonymous>", format_term(lhs))
        return []

    rule = Rule(theory.canonical(lhs), theory.canonical(rhs), name=name)
    if gsig is not None:
        closure_check(rule, gsig)
    return [rule]


@dataclasses.dataclass
class ScriptStep:
    number: int
    strategy: str
    expected: Term
    line: int = 0
    expect_lines: Tuple[int, int] = (0, 0)
    source: str = ""
    updated: bool = False


@dataclasses.dataclass
class Export:
    name: str
    step: int
    orientation: str = "ltr"
    category: str = "specialized"
    generalize: List[Tuple[Term, Var]] = dataclasses.field(default_factory=list)


@dataclasses.dataclass
class DerivationScript:
    """One lemma: a seed, the steps that rewrite it and the results handed to later blocks."""

    block: int
    seed: Term
    steps: List[ScriptStep]
    title: str = ""
    exports: List[Export] = dataclasses.field(default_factory=list)
    fuel: Optional[int] = None
    memory: bool = False
    path: Optional[Path] = None
    macros: Dict[str, Term] = dataclasses.field(default_factory=dict)
    # Set by extension packs: applied to every step strategy before it runs.
    transform: Optional[Callable[[Strategy], Strategy]] = None
    final: Optional[Term] = None

    def step(self, number: int) -> ScriptStep:
        for step in self.steps:
            if step.number == number:
                return step
        raise CorpusError(self.path, f"block {self.block} has no step {number}")

    @classmethod
    def parse(
        cls,
        text: str,
        ctx: SyntaxContext,
        *,
        source: str = "",
        overrides: Optional[Dict[str, Term]] = None,
    ) -> "DerivationScript":
        lines = text.splitlines()
        ctx = ctx.copy()
        overrides = dict(overrides or {})
        ctx.macros.update(overrides)
        local: Dict[str, Term] = {}

        block: Optional[int] = None
        title = ""
        seed: Optional[Term] = None
        included_seed: Optional[Term] = None
        fuel: Optional[int] = None
        memory = False
        steps: List[ScriptStep] = []
        exports: List[Export] = []

        statements = split_statements(text, source=source)
        for index, statement in enumerate(statements):
            keyword = statement.keyword
            offset = statement.line - 1
            try:
                if keyword == "block":
                    block = int(statement.body)
                elif keyword == "title":
                    title = statement.body.strip()
                elif keyword == "rules":
                    pass
                elif keyword == "fuel":
                    fuel = int(statement.body)
                    if fuel <= 0:
                        raise ValueError(f"fuel must be positive: {fuel}")
                elif keyword == "memory":
                    memory = statement.body.strip() in ("on", "true", "yes")
                elif keyword == "let":
                    if statement.label not in overrides:
                        local[statement.label] = parse_term(statement.body, ctx, source=source, line_offset=offset)
                        ctx.macros[statement.label] = local[statement.label]
                elif keyword == "seed":
                    seed = parse_term(statement.body, ctx, source=source, line_offset=offset)
                elif keyword == "step":
                    if "expect" not in statement.clauses:
                        raise ValueError(f"step {statement.label} has no expect clause")
                    start = statement.clause_lines["expect"]
                    end = _clause_end(lines, statements, index)
                    steps.append(
                        ScriptStep(
                            number=int(statement.label),
                            strategy=statement.body.strip(),
                            expected=parse_term(
                                statement.clauses["expect"], ctx, source=source, line_offset=start - 1
                            ),
                            line=statement.line,
                            expect_lines=(start, end),
                            source=source,
                        )
                    )
                elif keyword == "export":
                    exports.append(_parse_export(statement, ctx, source))
                elif keyword == "include":
                    other, numbers = _parse_include(statement.body)
                    directory = Path(source).parent if source else DATA_DIR / "scripts"
                    included = cls.load(directory / f"{other}.script", ctx, overrides={**overrides, **local})
                    steps.extend(included.step(n) for n in numbers)
                    included_seed = included.seed
                else:
                    raise ValueError(f"unknown statement {keyword}")
            except (ParseError, TermError, ValueError) as error:
                if isinstance(error, CorpusError):
                    raise
                raise CorpusError(source, f"line {statement.line}: {error}") from error

        if block is None:
            raise CorpusError(source, "missing block number")
        seed = seed or included_seed
        if seed is None:
            raise CorpusError(source, f"block {block} has no seed")
        numbers = [s.number for s in steps]
        if len(set(numbers)) != len(numbers):
            raise CorpusError(source, f"block {block} repeats a step number")
        for export in exports:
            if export.step not in numbers:
                raise CorpusError(source, f"export {export.name} refers to missing step {export.step}")

        return cls(
            block=block,
            seed=seed,
            steps=steps,
            title=title,
            exports=exports,
            fuel=fuel,
            memory=memory,
            path=Path(source) if source else None,
            macros=ctx.macros,
        )

    @classmethod
    def load(cls, path: Path, ctx: SyntaxContext, overrides: Optional[Dict[str, Term]] = None) -> "DerivationScript":
        if not path.exists():
            raise CorpusError(path, "no such script")
        return cls.parse(path.read_text(), ctx, source=str(path), overrides=overrides)

    def save(self) -> int:
        """Write updated expectations back into the script file; returns how many were written."""
        own = [s for s in self.steps if s.updated and self.path is not None and s.source == str(self.path)]
        if not own or self.path is None:
            return 0
        lines = self.path.read_text().splitlines()
        macros = invert_macros(self.macros)
        for step in sorted(own, key=lambda s: s.expect_lines[0], reverse=True):
            start, end = step.expect_lines
            lines[start - 1 : end] = ["  expect: " + format_term(step.expected, macros)]
        self.path.write_text("\n".join(lines) + "\n")
        logger.info("updated %d expectation(s) in %s", len(own), self.path)
        return len(own)


def _clause_end(lines: List[str], statements: List[Statement], index: int) -> int:
    end = statements[index + 1].line - 1 if index + 1 < len(statements) else len(lines)
    while end > statements[index].clause_lines["expect"]:
        stripped = lines[end - 1].strip()
        if stripped and not stripped.startswith("#"):
            break
        end -= 1
    return end


def _parse_export(statement: Statement, ctx: SyntaxContext, source: str) -> Export:
    match = re.fullmatch(r"\s*step\s+(\d+)\s*(ltr|rtl)?\s*", statement.body)
    if match is None:
        raise ValueError(f"export needs 'step N [ltr|rtl]': {statement.body}")
    pairs = []
    for item in statement.clauses.get("generalize", "").split(";"):
        if not item.strip():
            continue
        old, sep, new = item.partition("->")
        variable = parse_term(new, ctx, source=source)
        if not sep or not isinstance(variable, Var):
            raise ValueError(f"generalize needs 'term -> ?var': {item.strip()}")
        pairs.append((parse_term(old, ctx, source=source), variable))
    return Export(
        name=statement.label,
        step=int(match.group(1)),
        orientation=match.group(2) or "ltr",
        category=statement.category or "specialized",
        generalize=pairs,
    )


def _parse_include(body: str) -> Tuple[str, List[int]]:
    match = re.fullmatch(r"\s*(\w+)\s+steps?\s+([\d\s-]+)", body)
    if match is None:
        raise ValueError(f"include needs 'NAME steps A-B': {body}")
    return match.group(1), _parse_range(match.group(2))


def load_scripts(directory: Path, ctx: SyntaxContext) -> List[DerivationScript]:
    scripts = [DerivationScript.load(path, ctx) for path in sorted(directory.glob("block*.script"))]
    scripts.sort(key=lambda s: s.block)
    logger.debug("loaded %d block scripts from %s", len(scripts), directory)
    return scripts


def run_block(
    script: DerivationScript,
    rules: RuleBase,
    imports: Iterable[RuleBase] = (),
    *,
    fuel: Optional[int] = None,
    golden_update: bool = False,
    model: str = "reference",
) -> Tuple[Term, Trace]:
    """Replay one block; every step must reach its expected term."""
    base = rules.merged(*imports)
    theory = base.theory
    current = theory.canonical(script.seed)
    base.validate(current)
    trace = Trace(model)

    for step in script.steps:
        strategy = parse_strategy(step.strategy, base.ctx, source=step.source, line_offset=step.line - 1)
        if script.transform is not None:
            strategy = script.transform(strategy)
        evaluator = ModuloEvaluator(theory, fuel=fuel or script.fuel or DEFAULT_FUEL, memory=script.memory)
        results = evaluator.run(strategy, [current])
        expected = theory.canonical(step.expected)
        severity = StepSeverity.INFO
        note = ""
        if expected not in results:
            if not golden_update or not results:
                error = StepMismatch(script.block, step.number, expected, results)
                error.trace = trace
                raise error
            expected = results.first()
            step.expected = expected
            step.updated = True
            severity = StepSeverity.WARNING
            note = f"expectation replaced, {len(results)} result(s)"
        base.validate(expected)
        trace.append(
            TraceStep(
                block=script.block,
                step=step.number,
                strategy=format_strategy(strategy, named=True),
                before=format_term(current),
                after=format_term(expected),
                rules_fired=dict(evaluator.fired),
                results=len(results),
                severity=severity,
                note=note,
            )
        )
        logger.debug("block %d step %d: %d result(s)", script.block, step.number, len(results))
        current = expected

    if script.final is not None and theory.canonical(script.final) != current:
        last = script.steps[-1].number if script.steps else 0
        error = StepMismatch(script.block, last, theory.canonical(script.final), TermSet.of([current]))
        error.trace = trace
        raise error
    return current, trace


@dataclasses.dataclass
class ExtensionPack:
    """Second-order strategies and rule deltas turning the reference derivation into a variant."""

    name: str
    status: str = "stub"
    blocks: List[int] = dataclasses.field(default_factory=list)
    so: Dict[str, Strategy] = dataclasses.field(default_factory=dict)
    transform: List[str] = dataclasses.field(default_factory=list)
    terms: Optional[Strategy] = None
    rules: Optional[RuleBase] = None
    seed: Optional[Term] = None
    finals: Dict[int, Term] = dataclasses.field(default_factory=dict)
    # Unfolding budget for the transformed blocks, when it must exceed the scripts' own.
    fuel: Optional[int] = None
    path: Optional[Path] = None

    @property
    def replayable(self) -> bool:
        return self.status == "replayable"

    def composite(self) -> Optional[Strategy]:
        if not self.transform:
            return None
        return seq_all([self.so[name] for name in self.transform])

    @classmethod
    def parse(cls, text: str, *, name: str, base: RuleBase, source: str = "") -> "ExtensionPack":
        pack = cls(name=name, path=Path(source) if source else None)
        directory = Path(source).parent if source else DATA_DIR / "packs" / name
        ctx = base.ctx.copy()

        for statement in split_statements(text, source=source):
            keyword = statement.keyword
            offset = statement.line - 1
            try:
                if keyword == "name":
                    pack.name = statement.body.strip()
                elif keyword == "status":
                    pack.status = statement.body.strip()
                    if pack.status not in ("replayable", "stub"):
                        raise ValueError(f"status must be replayable or stub: {pack.status}")
                elif keyword == "blocks":
                    pack.blocks = _parse_range(statement.body)
                elif keyword == "rules":
                    path = directory / statement.body.strip()
                    if not path.exists():
                        raise CorpusError(path, "no such rule file")
                    pack.rules = RuleBase.parse(
                        path.read_text(),
                        name=f"{pack.name}.{path.stem}",
                        source=str(path),
                        search=[path.parent, DATA_DIR / "rules"],
                    )
                    delta = base.copy()
                    delta.include(pack.rules, replace=True)
                    ctx = delta.ctx
                elif keyword == "let":
                    ctx.macros[statement.label] = parse_term(statement.body, ctx, source=source, line_offset=offset)
                elif keyword == "so":
                    pack.so[statement.label] = parse_strategy(statement.body, ctx, source=source, line_offset=offset)
                elif keyword == "transform":
                    pack.transform = split_names(statement.body)
                    missing = [n for n in pack.transform if n not in pack.so]
                    if missing:
                        raise ValueError(f"undefined second-order strategies {missing}")
                elif keyword == "terms":
                    pack.terms = parse_strategy(statement.body, ctx, source=source, line_offset=offset)
                elif keyword == "seed":
                    pack.seed = parse_term(statement.body, ctx, source=source, line_offset=offset)
                elif keyword == "fuel":
                    pack.fuel = int(statement.body)
                    if pack.fuel <= 0:
                        raise ValueError(f"fuel must be positive: {pack.fuel}")
                elif keyword == "final":
                    pack.finals[int(statement.label)] = parse_term(
                        statement.body, ctx, source=source, line_offset=offset
                    )
                else:
                    raise ValueError(f"unknown statement {keyword}")
            except (ParseError, TermError, ValueError) as error:
                if isinstance(error, CorpusError):
                    raise
                raise CorpusError(source, f"line {statement.line}: {error}") from error

        if pack.replayable and not set(range(1, 5)) <= set(pack.finals):
            raise CorpusError(source, f"replayable pack {pack.name} lacks final terms for blocks 1-4")
        return pack

    @classmethod
    def load(cls, name: Union[str, Path], base: RuleBase, packs: Optional[Path] = None) -> "ExtensionPack":
        path = Path(name)
        if not path.exists():
            path = (packs or DATA_DIR / "packs") / str(name)
        if path.is_dir():
            path = path / "pack.def"
        if not path.exists():
            raise CorpusError(path, "no such extension pack")
        return cls.parse(path.read_text(), name=path.parent.name, base=base, source=str(path))


def _transform_named(pi: Strategy, name: str, s: Strategy) -> Strategy:
    try:
        return so_eval(pi, s, SO_FUEL)
    except (MalformedReification, SoFail):
        logger.error("second-order transformation of %s failed", name)
        raise


def apply_extension(
    pack: ExtensionPack, base_scripts: Sequence[DerivationScript], base_rules: RuleBase
) -> Tuple[List[DerivationScript], RuleBase]:
    """Pass every rule and step strategy through the pack's second-order strategies."""
    rules = base_rules.copy()
    if pack.rules is not None:
        rules.include(pack.rules, replace=True)

    pi = pack.composite()
    if pi is not None:
        for name, rule in list(rules.rules.items()):
            transformed = _transform_named(pi, name, rule)
            if not isinstance(transformed, Rule):
                raise CorpusError(pack.path, f"rule {name} did not stay a rule under {pack.name}")
            rules.add(
                Rule(transformed.lhs, transformed.rhs, transformed.cond, name=name),
                rules.categories[name],
                replace=True,
            )
        for name, strategy in list(rules.strategies.items()):
            rules.strategies[name] = _transform_named(pi, name, strategy)
    if pack.seed is not None:
        rules.seeds["model"] = pack.seed

    def on_terms(t: Term) -> Term:
        if pack.terms is None:
            return t
        result = Evaluator(fuel=pack.fuel or DEFAULT_FUEL).run(pack.terms, t)
        return rules.theory.canonical(t if result is None else result)

    def on_strategy(s: Strategy) -> Strategy:
        return s if pi is None else so_eval(pi, s, SO_FUEL)

    scripts = []
    for script in base_scripts:
        if pack.blocks and script.block not in pack.blocks:
            continue
        steps = [dataclasses.replace(s, expected=on_terms(s.expected)) for s in script.steps]
        final = pack.finals.get(script.block, script.final)
        scripts.append(
            dataclasses.replace(
                script,
                seed=on_terms(script.seed),
                steps=steps,
                transform=on_strategy if pi is not None else script.transform,
                final=final,
                fuel=max(script.fuel or DEFAULT_FUEL, pack.fuel) if pack.fuel else script.fuel,
            )
        )
    logger.info("pack %s applied: %d script(s), %d rule(s)", pack.name, len(scripts), len(rules.rules))
    return scripts, rules


def run_derivation(
    model: str = "reference",
    packs: Sequence[str] = (),
    *,
    corpus: Path = DATA_DIR,
    fuel: Optional[int] = None,
    golden_update: bool = False,
    blocks: Optional[Sequence[int]] = None,
    script_file: Optional[Path] = None,
) -> Report:
    """Replay the blocks in order, handing each block's exports to the blocks after it.

    `script_file` replaces the corpus scripts by that single block script.
    """
    rules = RuleBase.load(model, [corpus / "rules"])
    if script_file is not None:
        scripts = [DerivationScript.load(script_file, rules.ctx)]
    else:
        scripts = load_scripts(corpus / "scripts", rules.ctx)
    applied = []
    for name in packs:
        pack = ExtensionPack.load(name, rules, corpus / "packs")
        if not pack.replayable:
            logger.warning("pack %s is a stub, not replayed", pack.name)
            continue
        scripts, rules = apply_extension(pack, scripts, rules)
        applied.append(pack.name)
    if blocks:
        scripts = [s for s in scripts if s.block in blocks]

    seed = rules.seeds.get("model")
    if seed is not None:
        rules.validate(seed)
        logger.info("model seed: %s", format_term(seed))
    report = Report(
        model=model,
        packs=applied,
        seed=format_term(seed) if seed is not None else "",
        inventory=rules.inventory(),
    )
    exports = RuleBase(name="exports", gsig=rules.gsig, theory=rules.theory)
    exports.ctx.grammar = rules.ctx.grammar
    trace = Trace(model)

    for script in scripts:
        logger.info("block %d: %s", script.block, script.title)
        started = time.monotonic()
        try:
            final, block_trace = run_block(
                script, rules, [exports], fuel=fuel, golden_update=golden_update, model=model
            )
        except StepMismatch as error:
            if error.trace is not None:
                trace.extend(error.trace)
            error.trace = trace
            report.add(BlockResult.failed(script.block, script.title, error.step, str(error)))
            raise
        trace.extend(block_trace)
        for export in script.exports:
            equation = rules.theory.canonical(script.step(export.step).expected)
            for rule in result_to_rules(
                equation,
                export.orientation,
                name=export.name,
                generalize=export.generalize,
                gsig=rules.gsig,
                theory=rules.theory,
            ):
                exports.add(rule, export.category)
                report.exports[rule.name] = script.block
        report.add(
            BlockResult(
                block=script.block,
                title=script.title,
                passed=True,
                steps=len(script.steps),
                final=format_term(final),
                fired=block_trace.fired(),
                seconds=time.monotonic() - started,
            )
        )
        logger.info("block %d passed in %.2fs", script.block, report.blocks[-1].seconds)

    if golden_update:
        report.updated = sum(s.save() for s in scripts)
    report.trace = trace
    return report
