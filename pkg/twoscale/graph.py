import dataclasses
import logging
from typing import Dict, List, Set, Tuple

from .report import BlockResult, Report

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class ExportGraph:
    """Which block's exported rules each block of a replay consumed."""

    def __init__(self, report: Report) -> None:
        self.report = report
        self.blocks: Dict[int, BlockResult] = {b.block: b for b in report.blocks}

    def get_block_label(self, block: BlockResult) -> str:
        label = f"block {block.block}"
        notes = [f"+{block.seconds:.03f}s", f"{block.steps} steps"]

        if not block.passed:
            notes.append("*FAILED*")

        label += " (" + " ".join(notes) + ")"
        return label

    def walk_export_dependencies(self) -> Set[Tuple[int, int, str]]:
        """(producer, consumer, rule) for every exported rule fired downstream."""
        deps = set()
        seen = set()

        def _walk_dependencies(block: BlockResult) -> None:
            if block.block in seen:
                return

            seen.add(block.block)

            for name in block.fired:
                producer = self.report.exports.get(name)
                if producer is None or producer == block.block:
                    continue
                deps.add((producer, block.block, name))
                source = self.blocks.get(producer)
                if source is not None:
                    _walk_dependencies(source)

        for block in self.report.blocks:
            _walk_dependencies(block)

        return deps

    def as_dict(self) -> dict:
        edges: Dict[str, List[str]] = {}
        for producer, consumer, name in sorted(self.walk_export_dependencies()):
            edges.setdefault(str(producer), []).append(f"{consumer}:{name}")
        return {"model": self.report.model, "edges": edges}

    def generate_digraph(self) -> str:
        lines = [f'digraph "{self.report.model}" {{', "  rankdir=LR;"]

        for block in self.report.blocks:
            shape = "Mdiamond" if block is self.report.blocks[-1] else "box"
            lines.append(f'  "{self.get_block_label(block)}" [shape={shape}];')

        for producer, consumer, name in sorted(self.walk_export_dependencies()):
            source = self.blocks.get(producer)
            target = self.blocks.get(consumer)
            if source is None or target is None:
                continue
            color = "red" if not target.passed else "green"
            lines.append(
                f'  "{self.get_block_label(source)}"->"{self.get_block_label(target)}"'
                f' [label="{name}",color="{color}"];'
            )

        lines.append("}")
        return "\n".join(lines)
