"""
Good-layout collection: the per-graph best-known layout acting as the "real"
distribution for the discriminator.

Entries only ever change through strict improvement, so each graph's stored
value is non-increasing over time.
"""

import json
import logging
import os
from collections import Counter
from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, Iterable, Iterator, List, Optional

from .criteria import CriterionSpec, CriterionValue, better_than, evaluate
from .errors import ParseError, ValidationError
from .geometry import Layout, load_layout, save_layout
from .utils import atomic_write_text, default_logger

if TYPE_CHECKING:
    from .dataset import GraphSample

MANIFEST_VERSION = 1
VERIFY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class CollectionEntry:
    layout: Layout
    value: CriterionValue
    provenance: str

    @property
    def stress(self) -> float:
        return self.value.stress


class LayoutCollection:
    """
    Per-graph best layouts under a criterion spec.

    Args:
        spec: criterion every entry was evaluated under
        logger: Logger instance to use (default: built-in logging)
    """

    def __init__(self, spec: CriterionSpec, logger: Optional[logging.Logger] = None):
        self.spec = spec
        self.logger = logger or default_logger
        self.entries: Dict[str, CollectionEntry] = {}
        self.failures: Dict[str, Dict[str, str]] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, graph_id: str) -> bool:
        return graph_id in self.entries

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self.entries))

    def get(self, graph_id: str) -> Optional[CollectionEntry]:
        return self.entries.get(graph_id)

    def put(self, graph_id: str, layout: Layout, value: CriterionValue, provenance: str) -> None:
        """Unconditionally store an entry (seeding or collection building)."""
        self.entries[graph_id] = CollectionEntry(layout=layout, value=value, provenance=provenance)

    def offer(self, graph_id: str, layout: Layout, value: CriterionValue, provenance: str) -> bool:
        """Replace the stored entry iff the offered layout is strictly better."""
        incumbent = self.entries.get(graph_id)
        if incumbent is not None and not better_than(value, incumbent.value):
            return False
        self.put(graph_id, layout, value, provenance)
        return True

    def record_failure(self, graph_id: str, source: str, message: str) -> None:
        self.failures.setdefault(graph_id, {})[source] = message

    def values(self) -> Dict[str, float]:
        return {graph_id: self.entries[graph_id].value.value for graph_id in self}

    def mean_value(self) -> float:
        values = list(self.values().values())
        return sum(values) / len(values) if values else float('nan')

    def composition(self) -> Dict[str, float]:
        """Percentage of entries contributed by each provenance."""
        if not self.entries:
            return {}
        counts = Counter(entry.provenance for entry in self.entries.values())
        total = len(self.entries)
        return {name: 100.0 * counts[name] / total for name in sorted(counts)}

    def covers(self, graph_ids: Iterable[str]) -> List[str]:
        """Graph ids without an entry."""
        return [graph_id for graph_id in graph_ids if graph_id not in self.entries]

    def copy(self) -> "LayoutCollection":
        clone = LayoutCollection(self.spec, self.logger)
        clone.entries = dict(self.entries)
        clone.failures = {k: dict(v) for k, v in self.failures.items()}
        return clone

    def save(self, path: str, layout_dir: Optional[str] = None) -> None:
        """Write layout files and the JSON manifest (layout paths relative to it)."""
        base = os.path.dirname(os.path.abspath(path))
        layout_dir = layout_dir or os.path.join(base, "layouts")
        entries = {}
        for graph_id in self:
            entry = self.entries[graph_id]
            layout_path = os.path.join(layout_dir, f"{graph_id}.txt")
            save_layout(entry.layout, layout_path)
            entries[graph_id] = {
                "layout": os.path.relpath(layout_path, base),
                "method": entry.provenance,
                "value": entry.value.value,
                "stress": entry.value.stress,
                "components": entry.value.components,
                "scales": entry.value.scales,
            }
        manifest = {
            "version": MANIFEST_VERSION,
            "criterion": self.spec.to_dict(),
            "composition": self.composition(),
            "entries": entries,
            "failures": self.failures,
        }
        atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        self.logger.info(f"💾 Collection saved: {len(entries)} entries -> {path}")

    @classmethod
    def load(
        cls,
        path: str,
        samples: Optional[Iterable["GraphSample"]] = None,
        logger: Optional[logging.Logger] = None,
    ) -> "LayoutCollection":
        """
        Load a manifest. With ``samples``, every stored value is re-evaluated
        and a mismatch raises ValidationError.
        """
        logger = logger or default_logger
        try:
            with open(path, 'r') as f:
                manifest = json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f"malformed collection manifest {path}: {e}") from None
        except OSError as e:
            raise ParseError(f"cannot read collection manifest {path}: {e}") from None

        if manifest.get('version', MANIFEST_VERSION) != MANIFEST_VERSION:
            logger.warning(f"Collection manifest version {manifest.get('version')} differs from {MANIFEST_VERSION}")
        if 'criterion' not in manifest:
            raise ParseError(f"collection manifest {path} has no criterion")
        collection = cls(CriterionSpec.from_dict(manifest['criterion']), logger)
        collection.failures = manifest.get('failures', {})

        base = os.path.dirname(os.path.abspath(path))
        for graph_id, record in manifest.get('entries', {}).items():
            try:
                layout = load_layout(os.path.join(base, record['layout']))
                value = CriterionValue(
                    value=float(record['value']),
                    components={k: float(v) for k, v in record.get('components', {}).items()},
                    stress=float(record['stress']),
                    scales={k: float(v) for k, v in record.get('scales', {}).items()},
                )
            except (KeyError, TypeError, ValueError) as e:
                raise ParseError(f"malformed collection entry {graph_id}: {e}") from None
            collection.put(graph_id, Layout(layout.positions, graph_id=graph_id), value, record.get('method', 'unknown'))

        if samples is not None:
            collection.verify(samples)
        return collection

    def verify(self, samples: Iterable["GraphSample"]) -> None:
        """Re-evaluate stored layouts and check the recorded values."""
        for sample in samples:
            entry = self.entries.get(sample.graph_id)
            if entry is None:
                continue
            if entry.layout.node_count != sample.graph.node_count:
                raise ValidationError(
                    f"collection layout for {sample.graph_id} has {entry.layout.node_count} rows, "
                    f"graph has {sample.graph.node_count} nodes")
            fresh = evaluate(self.spec, entry.layout, sample.graph, sample.distances,
                             init=sample.init, scales=entry.value.scales or None)
            if abs(fresh.value - entry.value.value) > VERIFY_TOLERANCE * max(1.0, abs(fresh.value)):
                raise ValidationError(
                    f"stored value {entry.value.value} for {sample.graph_id} does not match "
                    f"re-evaluated value {fresh.value}")
