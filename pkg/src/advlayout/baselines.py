"""
Classical layout methods and good-layout collection building.

PivotMDS seeds the generator, and together with SGD stress majorization,
Fruchterman-Reingold and uniform random placement forms the method pool used
to build good-layout collections and as evaluation benchmarks.
"""

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .collection import LayoutCollection
from .criteria import CriterionSpec, better_than, evaluate, initial_scales, NORMALIZATION_INITIAL
from .errors import AdvLayoutError, ArgumentError
from .geometry import Layout
from .graph import DistanceMatrix, Graph
from .utils import default_logger, derive_seed, make_rng

if TYPE_CHECKING:
    from .dataset import GraphSample

PMDS_PIVOTS = 50
PMDS_ITERS = 200
PMDS_TOLERANCE = 1e-9
SGD_ETA_MIN = 0.01
COINCIDENT_EPS = 1e-12


def random_layout(g: Graph, seed: int = 0) -> Layout:
    """Uniform positions in the unit square."""
    rng = make_rng(seed, "random_layout")
    return Layout(rng.random((g.node_count, 2)))


def _select_pivots(d: np.ndarray, count: int, rng: np.random.Generator) -> List[int]:
    """Max-min pivot sampling from a random start node."""
    n = d.shape[0]
    pivots = [int(rng.integers(n))]
    nearest = d[pivots[0]].astype(float)
    while len(pivots) < count:
        nxt = int(np.argmax(nearest))
        pivots.append(nxt)
        nearest = np.minimum(nearest, d[nxt])
    return pivots


def _power_iteration(
    m: np.ndarray,
    rng: np.random.Generator,
    iters: int,
    against: Optional[np.ndarray] = None,
) -> np.ndarray:
    v = rng.standard_normal(m.shape[0])
    if against is not None:
        v -= (v @ against) * against
    v /= np.linalg.norm(v)
    for _ in range(iters):
        nxt = m @ v
        if against is not None:
            nxt -= (nxt @ against) * against
        norm = np.linalg.norm(nxt)
        if norm == 0.0:
            break
        nxt /= norm
        converged = abs(1.0 - abs(float(nxt @ v))) < PMDS_TOLERANCE
        v = nxt
        if converged:
            break
    return v


def pivot_mds(
    g: Graph,
    d: DistanceMatrix,
    pivots: int = PMDS_PIVOTS,
    iters: int = PMDS_ITERS,
    seed: int = 0,
) -> Layout:
    """
    PivotMDS: double-centered squared pivot distances projected onto their top
    two singular directions, found by power iteration.

    Args:
        pivots: pivot count, clamped to N
        iters: power-iteration cap per direction
    """
    if pivots < 2:
        raise ArgumentError(f"pivots must be at least 2, got {pivots}")
    rng = make_rng(seed, "pivot_mds")
    n = g.node_count
    k = min(pivots, n)
    chosen = _select_pivots(d.d, k, rng)

    sq = d.d[:, chosen].astype(float) ** 2
    c = -0.5 * (sq - sq.mean(axis=0, keepdims=True) - sq.mean(axis=1, keepdims=True) + sq.mean())
    ctc = c.T @ c

    axes = []
    first = _power_iteration(ctc, rng, iters)
    axes.append(first)
    axes.append(_power_iteration(ctc, rng, iters, against=first))

    columns = []
    for v in axes:
        coordinate = c @ v
        mu = float(coordinate @ coordinate)
        columns.append(coordinate * mu ** -0.25 if mu > 0 else coordinate)
    return Layout(np.column_stack(columns))


def stress_sgd(
    g: Graph,
    d: DistanceMatrix,
    init: Layout,
    epochs: int = 30,
    seed: int = 0,
) -> Layout:
    """
    Stress majorization by stochastic pairwise updates with an exponentially
    annealed step size η_t = η_0·exp(−t·ln(η_0/η_min)/epochs).
    """
    if epochs < 1:
        raise ArgumentError(f"epochs must be at least 1, got {epochs}")
    rng = make_rng(seed, "stress_sgd")
    x = np.array(init.positions, dtype=float)
    i_idx, j_idx, dij = d.pairs()
    pairs = list(zip(i_idx.tolist(), j_idx.tolist(), dij.tolist()))

    eta_0 = float(dij.max()) ** 2
    decay = math.log(eta_0 / SGD_ETA_MIN) / epochs if eta_0 > SGD_ETA_MIN else 0.0
    for t in range(epochs):
        eta = eta_0 * math.exp(-t * decay)
        order = rng.permutation(len(pairs))
        for idx in order:
            i, j, dist_ij = pairs[idx]
            delta = x[i] - x[j]
            norm = math.hypot(delta[0], delta[1])
            if norm < COINCIDENT_EPS:
                delta = rng.normal(scale=1e-6, size=2)
                norm = math.hypot(delta[0], delta[1])
            mu = min(1.0, eta / (dist_ij * dist_ij))
            r = (mu * (norm - dist_ij) / 2.0 / norm) * delta
            x[i] -= r
            x[j] += r
    return Layout(x)


def fruchterman_reingold(
    g: Graph,
    init: Layout,
    iters: int = 100,
    seed: int = 0,
    k: float = 1.0,
) -> Layout:
    """
    Force simulation with attraction d²/k along edges, repulsion k²/d between
    all pairs and a linearly cooling displacement cap.
    """
    rng = make_rng(seed, "fruchterman_reingold")
    x = np.array(init.positions, dtype=float)
    n = g.node_count
    adjacency = g.adjacency.astype(float)
    span = float(np.max(x.max(axis=0) - x.min(axis=0))) if n else 0.0
    t0 = 0.1 * max(math.sqrt(n), span)

    for step in range(iters):
        delta = x[:, None, :] - x[None, :, :]
        dist = np.linalg.norm(delta, axis=2)
        np.fill_diagonal(dist, np.inf)
        coincident = dist < COINCIDENT_EPS
        if np.any(coincident):
            x = x + rng.normal(scale=1e-6, size=x.shape)
            continue
        repulsion = (k * k / dist ** 2)[:, :, None] * delta
        np.fill_diagonal(dist, 0.0)
        attraction = (adjacency * dist / k)[:, :, None] * delta
        force = repulsion.sum(axis=1) - attraction.sum(axis=1)

        temperature = t0 * (1.0 - step / iters)
        length = np.linalg.norm(force, axis=1)
        capped = np.minimum(length, temperature)
        scale = np.divide(capped, length, out=np.zeros_like(length), where=length > 0)
        x = x + force * scale[:, None]
    return Layout(x)


@dataclass(frozen=True)
class LayoutMethod:
    """A named layout producer over prepared graph samples."""

    name: str
    produce: Callable[["GraphSample"], Layout]


def baseline_method(name: str, seed: int = 0, epochs: int = 30, iters: int = 100) -> LayoutMethod:
    """Built-in method by name: pmds, stress_sgd, fr or random."""

    def sub_seed(sample: "GraphSample") -> int:
        return derive_seed(seed, f"{name}:{sample.graph_id}")

    if name == "pmds":
        return LayoutMethod(name, lambda s: pivot_mds(s.graph, s.distances, seed=sub_seed(s)))
    if name == "stress_sgd":
        return LayoutMethod(name, lambda s: stress_sgd(
            s.graph, s.distances, pivot_mds(s.graph, s.distances, seed=sub_seed(s)), epochs, sub_seed(s)))
    if name == "fr":
        return LayoutMethod(name, lambda s: fruchterman_reingold(
            s.graph, random_layout(s.graph, sub_seed(s)), iters, sub_seed(s)))
    if name == "random":
        return LayoutMethod(name, lambda s: random_layout(s.graph, sub_seed(s)))
    raise ArgumentError(f"unknown baseline method: {name}")


BASELINE_NAMES = ("pmds", "stress_sgd", "fr", "random")


def build_collection(
    samples: Iterable["GraphSample"],
    spec: CriterionSpec,
    methods: Sequence[LayoutMethod],
    logger: Optional[logging.Logger] = None,
) -> LayoutCollection:
    """
    Keep, per graph, the best layout among all methods under ``better_than``.

    Method failures are recorded per graph; the batch continues.
    """
    if not methods:
        raise ArgumentError("build_collection needs at least one method")
    logger = logger or default_logger
    collection = LayoutCollection(spec, logger)

    for sample in samples:
        scales: Optional[Dict[str, float]] = None
        if spec.normalization == NORMALIZATION_INITIAL:
            scales = initial_scales(spec, sample.init, sample.graph, sample.distances)
        for method in methods:
            try:
                layout = method.produce(sample)
                value = evaluate(spec, layout, sample.graph, sample.distances, scales=scales)
            except AdvLayoutError as e:
                logger.warning(f"Method {method.name} failed on {sample.graph_id}: {e}")
                collection.record_failure(sample.graph_id, method.name, str(e))
                continue
            incumbent = collection.get(sample.graph_id)
            if incumbent is None or better_than(value, incumbent.value):
                collection.put(sample.graph_id, layout, value, method.name)

    for method_name, share in collection.composition().items():
        logger.info(f"Collection composition: {method_name} {share:.2f}%")
    return collection
