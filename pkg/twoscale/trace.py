import dataclasses
import datetime
import json
import logging
from enum import Enum
from typing import Dict, List, Optional

import dateutil.parser

from .grammar import format_latex
from .parser import ParseError, SyntaxContext, parse_term

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class StepSeverity(Enum):
    INFO = "info"
    WARNING = "warning"
    ERROR = "error"


@dataclasses.dataclass(eq=True)
class TraceStep:
    """One replayed step; terms are kept in canonical text so the record is JSON as is."""

    block: int
    step: int
    strategy: str
    before: str
    after: str
    rules_fired: Dict[str, int]
    results: int = 1
    severity: StepSeverity = StepSeverity.INFO
    note: str = ""

    def as_dict(self) -> dict:
        obj = self.__dict__.copy()

        if self.severity == StepSeverity.INFO:
            obj.pop("severity")
        if not self.note:
            obj.pop("note")

        for k, v in obj.items():
            if isinstance(v, Enum):
                obj[k] = str(v.value)
        obj["rules_fired"] = dict(sorted(self.rules_fired.items()))

        return obj

    @classmethod
    def from_dict(cls, obj: dict) -> "TraceStep":
        return cls(
            block=int(obj["block"]),
            step=int(obj["step"]),
            strategy=obj["strategy"],
            before=obj["before"],
            after=obj["after"],
            rules_fired={k: int(v) for k, v in obj.get("rules_fired", {}).items()},
            results=int(obj.get("results", 1)),
            severity=StepSeverity(obj.get("severity", "info")),
            note=obj.get("note", ""),
        )


@dataclasses.dataclass
class Trace:
    model: str
    steps: List[TraceStep] = dataclasses.field(default_factory=list)
    created: datetime.datetime = dataclasses.field(
        default_factory=lambda: datetime.datetime.now(datetime.timezone.utc)
    )

    def append(self, step: TraceStep) -> None:
        self.steps.append(step)

    def extend(self, other: "Trace") -> None:
        self.steps.extend(other.steps)

    def blocks(self) -> List[int]:
        return sorted({s.block for s in self.steps})

    def for_block(self, block: Optional[int]) -> "Trace":
        if block is None:
            return self
        return Trace(self.model, [s for s in self.steps if s.block == block], self.created)

    def fired(self) -> Dict[str, int]:
        totals: Dict[str, int] = {}
        for step in self.steps:
            for name, count in step.rules_fired.items():
                totals[name] = totals.get(name, 0) + count
        return dict(sorted(totals.items()))

    def as_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "model": self.model,
            "created": self.created.isoformat(),
            "steps": [s.as_dict() for s in self.steps],
        }

    def dumps(self) -> str:
        return json.dumps(self.as_dict(), indent=4)

    @classmethod
    def loads(cls, text: str) -> "Trace":
        obj = json.loads(text)
        schema = obj.get("schema")
        if schema != SCHEMA_VERSION:
            raise ValueError(f"unsupported trace schema: {schema!r}")
        return cls(
            model=obj.get("model", ""),
            steps=[TraceStep.from_dict(s) for s in obj.get("steps", [])],
            created=dateutil.parser.isoparse(obj["created"]),
        )

    def format_text(self) -> str:
        lines = []
        for block in self.blocks():
            lines.append(f"Block {block}")
            for step in self.for_block(block).steps:
                fired = ", ".join(f"{k}x{v}" for k, v in sorted(step.rules_fired.items())) or "-"
                lines.append(f"  Step {step.step}. {step.strategy}  [{fired}]")
                lines.append(f"    => {step.after}")
                if step.note:
                    lines.append(f"    ({step.note})")
        return "\n".join(lines)

    def format_latex(self) -> str:
        """Lemma-style rendering: one itemized proof per block, one equation per step."""
        ctx = SyntaxContext(grammar=True)
        out = []
        for block in self.blocks():
            out.append(f"\\paragraph{{Block {block}}}")
            out.append("\\begin{itemize}")
            for step in self.for_block(block).steps:
                try:
                    body = format_latex(parse_term(step.after, ctx))
                except ParseError:
                    logger.warning("step %d.%d is not printable as LaTeX", block, step.step)
                    body = "\\text{" + step.after.replace("_", "\\_") + "}"
                fired = ", ".join(sorted(step.rules_fired)).replace("_", "\\_")
                out.append(f"\\item \\textbf{{Step {step.step}.}} {fired} $\\Longrightarrow$")
                out.append("\\begin{equation*}")
                out.append(body)
                out.append("\\end{equation*}")
            out.append("\\end{itemize}")
        return "\n".join(out)
