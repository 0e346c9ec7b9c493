"""
Symmetric-percent-change comparison of layout methods.

``Evaluator.compare`` lays out every test graph with every method (one worker
thread per (method, graph) job), evaluates each criterion and assembles, per
criterion, a benchmark × model matrix of average SPC.
"""

import asyncio
import csv
import io
import json
import logging
import math
import os
import re
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .baselines import LayoutMethod
from .criteria import CriterionSpec, evaluate
from .dataset import GraphSample
from .errors import AdvLayoutError, ArgumentError, DomainError, EmptyTestSet
from .geometry import Layout
from .render import render_heatmap_svg
from .utils import atomic_write_text, default_logger

FAILURE_FLAG_FRACTION = 0.05
REPORT_VERSION = 1


def spc(lambda_f: float, lambda_b: float) -> float:
    """100·(λ_f − λ_b)/max(λ_f, λ_b); negative means the first method is better. spc(0, 0) = 0."""
    if lambda_f < 0 or lambda_b < 0:
        raise DomainError(f"criterion values must be non-negative, got {lambda_f}, {lambda_b}")
    denominator = max(lambda_f, lambda_b)
    if denominator == 0:
        return 0.0
    return 100.0 * (lambda_f - lambda_b) / denominator


def average_spc(per_graph: Sequence[float]) -> float:
    if not per_graph:
        raise EmptyTestSet("average SPC over an empty test set")
    return sum(per_graph) / len(per_graph)


@dataclass
class SPCCell:
    model: str
    benchmark: str
    criterion: str
    samples: Dict[str, float] = field(default_factory=dict)
    failures: int = 0
    flagged: bool = False

    @property
    def value(self) -> Optional[float]:
        return average_spc(list(self.samples.values())) if self.samples else None


@dataclass
class SPCReport:
    """Average-SPC matrices per criterion plus absolute means and timing."""

    models: List[str]
    benchmarks: List[str]
    criteria: List[str]
    test_size: int
    cells: Dict[Tuple[str, str, str], SPCCell] = field(default_factory=dict)
    absolute: Dict[str, Dict[str, Optional[float]]] = field(default_factory=dict)
    timing: Dict[str, float] = field(default_factory=dict)
    failures: Dict[str, Dict[str, str]] = field(default_factory=dict)

    def cell(self, model: str, benchmark: str, criterion: str) -> SPCCell:
        return self.cells[(criterion, benchmark, model)]

    def matrix(self, criterion: str) -> List[List[Optional[float]]]:
        """Rows are benchmarks, columns are models."""
        return [[self.cell(m, b, criterion).value for m in self.models] for b in self.benchmarks]

    def flagged_cells(self) -> List[SPCCell]:
        return [c for c in self.cells.values() if c.flagged]

    def to_dict(self) -> Dict[str, Any]:
        cells = []
        for (criterion, benchmark, model), cell in sorted(self.cells.items()):
            cells.append({
                "criterion": criterion,
                "benchmark": benchmark,
                "model": model,
                "average_spc": cell.value,
                "failures": cell.failures,
                "flagged": cell.flagged,
                "samples": cell.samples,
            })
        return {
            "version": REPORT_VERSION,
            "models": self.models,
            "benchmarks": self.benchmarks,
            "criteria": self.criteria,
            "test_size": self.test_size,
            "cells": cells,
            "absolute": self.absolute,
            "failures": self.failures,
        }


def _file_label(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label)


class Evaluator:
    """
    Runs layout methods over a test set and compares them by SPC.

    Args:
        logger: Logger instance to use (default: built-in logging)
        workers: maximum concurrent layout jobs
    """

    def __init__(self, logger: Optional[logging.Logger] = None, workers: int = 4):
        if workers < 1:
            raise ArgumentError("workers must be at least 1")
        self.logger = logger or default_logger
        self.workers = workers

    @staticmethod
    def _timed(method: LayoutMethod, sample: GraphSample) -> Tuple[Layout, float]:
        start = time.perf_counter()
        layout = method.produce(sample)
        return layout, time.perf_counter() - start

    async def run_method(
        self,
        method: LayoutMethod,
        samples: Sequence[GraphSample],
        semaphore: Optional[asyncio.Semaphore] = None,
    ) -> Tuple[Dict[str, Layout], Dict[str, str], float]:
        """Layouts by graph id, failures by graph id, and mean seconds per layout."""
        semaphore = semaphore or asyncio.Semaphore(self.workers)

        async def job(sample: GraphSample):
            async with semaphore:
                return await asyncio.to_thread(self._timed, method, sample)

        results = await asyncio.gather(*(job(s) for s in samples), return_exceptions=True)
        layouts: Dict[str, Layout] = {}
        failures: Dict[str, str] = {}
        seconds: List[float] = []
        for sample, result in zip(samples, results):
            if isinstance(result, AdvLayoutError):
                self.logger.warning(f"⚠️ {method.name} failed on {sample.graph_id}: {result}")
                failures[sample.graph_id] = str(result)
            elif isinstance(result, BaseException):
                raise result
            else:
                layouts[sample.graph_id], elapsed = result
                seconds.append(elapsed)
        return layouts, failures, (sum(seconds) / len(seconds) if seconds else float('nan'))

    def _values(
        self,
        method: str,
        layouts: Dict[str, Layout],
        samples: Sequence[GraphSample],
        spec: CriterionSpec,
        failures: Dict[str, str],
    ) -> Dict[str, float]:
        values = {}
        for sample in samples:
            layout = layouts.get(sample.graph_id)
            if layout is None:
                continue
            try:
                value = evaluate(spec, layout, sample.graph, sample.distances, init=sample.init).value
                # criteria are non-negative; clear rounding residue such as a -1e-17 KL
                values[sample.graph_id] = max(0.0, value)
            except AdvLayoutError as e:
                self.logger.warning(f"⚠️ {spec.label} undefined for {method} on {sample.graph_id}: {e}")
                failures.setdefault(sample.graph_id, str(e))
        return values

    async def compare(
        self,
        models: Sequence[LayoutMethod],
        benchmarks: Sequence[LayoutMethod],
        samples: Sequence[GraphSample],
        criteria: Sequence[CriterionSpec],
    ) -> SPCReport:
        """
        Per (model, benchmark, criterion): per-graph SPC and its average.
        Graphs where either method failed are excluded from the cell; a cell
        missing more than 5% of the test set is flagged.
        """
        if not samples:
            raise EmptyTestSet("comparison needs at least one test graph")
        if not models or not benchmarks or not criteria:
            raise ArgumentError("compare needs models, benchmarks and criteria")

        methods: Dict[str, LayoutMethod] = {}
        for method in list(models) + list(benchmarks):
            methods.setdefault(method.name, method)
        names = list(methods)

        self.logger.info(f"🔄 Laying out {len(samples)} graphs with {len(names)} methods")
        semaphore = asyncio.Semaphore(self.workers)
        runs = await asyncio.gather(*(self.run_method(methods[n], samples, semaphore) for n in names))
        layouts = {name: run[0] for name, run in zip(names, runs)}
        failures = {name: dict(run[1]) for name, run in zip(names, runs)}
        timing = {name: run[2] for name, run in zip(names, runs)}

        report = SPCReport(
            models=[m.name for m in models],
            benchmarks=[b.name for b in benchmarks],
            criteria=[spec.label for spec in criteria],
            test_size=len(samples),
            timing=timing,
        )
        for spec in criteria:
            values = {name: self._values(name, layouts[name], samples, spec, failures[name]) for name in names}
            report.absolute[spec.label] = {
                name: (sum(v.values()) / len(v) if v else None) for name, v in values.items()
            }
            for benchmark in report.benchmarks:
                for model in report.models:
                    cell = SPCCell(model=model, benchmark=benchmark, criterion=spec.label)
                    for sample in samples:
                        gid = sample.graph_id
                        if gid in values[model] and gid in values[benchmark]:
                            cell.samples[gid] = spc(values[model][gid], values[benchmark][gid])
                        else:
                            cell.failures += 1
                    cell.flagged = cell.failures > FAILURE_FLAG_FRACTION * len(samples)
                    if cell.flagged:
                        self.logger.warning(
                            f"⚠️ {spec.label}: {model} vs {benchmark} missing {cell.failures}/{len(samples)} graphs")
                    report.cells[(spec.label, benchmark, model)] = cell
        report.failures = {name: f for name, f in failures.items() if f}
        self.logger.info(f"✅ Comparison complete: {len(report.cells)} cells")
        return report


def _csv_value(value: Optional[float]) -> str:
    return "" if value is None or not math.isfinite(value) else f"{value:.6f}"


def matrix_csv(report: SPCReport, criterion: str) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["benchmark"] + report.models)
    for benchmark, row in zip(report.benchmarks, report.matrix(criterion)):
        writer.writerow([benchmark] + [_csv_value(v) for v in row])
    return buffer.getvalue()


def absolute_csv(report: SPCReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    methods = list(dict.fromkeys(report.models + report.benchmarks))
    writer.writerow(["method"] + report.criteria)
    for method in methods:
        writer.writerow([method] + [_csv_value(report.absolute[c].get(method)) for c in report.criteria])
    return buffer.getvalue()


def write_report(report: SPCReport, out_dir: str, heatmap: bool = True,
                 logger: Optional[logging.Logger] = None) -> List[str]:
    """
    Write spc_<criterion>.csv, absolute.csv, report.json, timing.csv and
    optional heatmaps. Everything but timing.csv is deterministic.
    """
    logger = logger or default_logger
    written = []

    def emit(name: str, content: str) -> None:
        path = os.path.join(out_dir, name)
        atomic_write_text(path, content)
        written.append(path)

    for criterion in report.criteria:
        label = _file_label(criterion)
        emit(f"spc_{label}.csv", matrix_csv(report, criterion))
        if heatmap:
            emit(f"spc_{label}.svg", render_heatmap_svg(
                report.matrix(criterion), report.benchmarks, report.models, title=f"average SPC: {criterion}"))
    emit("absolute.csv", absolute_csv(report))
    emit("report.json", json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["method", "mean_seconds"])
    for method, seconds in report.timing.items():
        writer.writerow([method, _csv_value(seconds)])
    emit("timing.csv", buffer.getvalue())
    logger.info(f"💾 Report written to {out_dir} ({len(written)} files)")
    return written
