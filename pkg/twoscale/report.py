import dataclasses
import datetime
import logging
from typing import TYPE_CHECKING, Dict, List, Optional

if TYPE_CHECKING:
    from .trace import Trace

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class BlockResult:
    block: int
    title: str
    passed: bool
    steps: int
    final: str = ""
    fired: Dict[str, int] = dataclasses.field(default_factory=dict)
    seconds: float = 0.0
    error: str = ""

    @classmethod
    def failed(cls, block: int, title: str, step: int, error: str) -> "BlockResult":
        return cls(block=block, title=title, passed=False, steps=step, error=error)

    def as_dict(self) -> dict:
        obj = self.__dict__.copy()
        if not self.error:
            obj.pop("error")
        obj["seconds"] = round(self.seconds, 3)
        return obj


@dataclasses.dataclass
class Report:
    """Outcome of a derivation replay: one entry per block, in replay order."""

    model: str
    packs: List[str] = dataclasses.field(default_factory=list)
    # The model statement the blocks derive from, in canonical syntax.
    seed: str = ""
    blocks: List[BlockResult] = dataclasses.field(default_factory=list)
    inventory: Dict[str, int] = dataclasses.field(default_factory=dict)
    # Exported rule name -> block that produced it.
    exports: Dict[str, int] = dataclasses.field(default_factory=dict)
    updated: int = 0
    trace: Optional["Trace"] = None
    created: datetime.datetime = dataclasses.field(
        default_factory=lambda: datetime.datetime.now(datetime.timezone.utc)
    )

    def add(self, result: BlockResult) -> None:
        self.blocks.append(result)

    @property
    def passed(self) -> bool:
        return bool(self.blocks) and all(b.passed for b in self.blocks)

    @property
    def seconds(self) -> float:
        return sum(b.seconds for b in self.blocks)

    def fired(self) -> Dict[str, int]:
        totals: Dict[str, int] = {}
        for block in self.blocks:
            for name, count in block.fired.items():
                totals[name] = totals.get(name, 0) + count
        return dict(sorted(totals.items()))

    def consumers(self) -> Dict[int, List[int]]:
        """Producing block -> blocks that fired one of its exported rules."""
        edges: Dict[int, List[int]] = {}
        for block in self.blocks:
            for name in block.fired:
                producer = self.exports.get(name)
                if producer is not None and producer != block.block:
                    targets = edges.setdefault(producer, [])
                    if block.block not in targets:
                        targets.append(block.block)
        return edges

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "packs": self.packs,
            "seed": self.seed,
            "created": self.created.isoformat(),
            "passed": self.passed,
            "seconds": round(self.seconds, 3),
            "blocks": [b.as_dict() for b in self.blocks],
            "inventory": self.inventory,
            "fired": self.fired(),
            "exports": self.exports,
        }

    def format_text(self) -> str:
        passed = sum(1 for b in self.blocks if b.passed)
        packs = f" + {', '.join(self.packs)}" if self.packs else ""
        lines = [f"{self.model}{packs}: {passed}/{len(self.blocks)} blocks passed in {self.seconds:.2f}s"]
        if self.seed:
            lines.append(f"  seed: {self.seed}")
        for block in self.blocks:
            status = "ok" if block.passed else "FAILED"
            lines.append(f"  block {block.block} [{status}] {block.title}")
            if block.final:
                lines.append(f"    {block.final}")
            if block.error:
                lines.append(f"    {block.error}")
        if self.updated:
            lines.append(f"  {self.updated} expectation(s) rewritten")
        return "\n".join(lines)
