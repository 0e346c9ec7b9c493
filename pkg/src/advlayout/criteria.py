"""
Aesthetic criteria for straight-line layouts.

Every criterion is lower-is-better. ``evaluate`` combines weighted criteria,
optionally normalizing each term by its value on the graph's initial layout.
"""

import json
import math
import os
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple, Union

import numpy as np

from .errors import ArgumentError, DegenerateLayout, MissingInitialLayout, ParseError, ValidationError
from .geometry import LayoutLike, as_layout, canonicalize, crossing_angles
from .graph import DistanceMatrix, Graph

STRESS = "stress"
XING = "xing"
XANGLE = "xangle"
IANGLE = "iangle"
NODEOCC = "nodeocc"
EDGEUNI = "edgeuni"
TSNE = "tsne"
CRITERIA = (STRESS, XING, XANGLE, IANGLE, NODEOCC, EDGEUNI, TSNE)

NORMALIZATION_NONE = "none"
NORMALIZATION_INITIAL = "per_graph_initial"

COMBINED_WEIGHTS: Dict[str, float] = {
    STRESS: 0.2,
    XING: 0.05,
    XANGLE: 0.1,
    IANGLE: 0.1,
    NODEOCC: 0.2,
    EDGEUNI: 0.15,
    TSNE: 0.2,
}

NODEOCC_RADIUS = 0.1
SCALE_FLOOR = 1e-9
TIE_EPS = 1e-12


def stress(x: LayoutLike, d: DistanceMatrix) -> float:
    """Σ_{i<j} (‖X_i − X_j‖ − d_ij)² / d_ij²."""
    positions = as_layout(x).positions
    i, j, dij = d.pairs()
    dist = np.linalg.norm(positions[i] - positions[j], axis=1)
    return float(np.sum((dist - dij) ** 2 / dij ** 2))


def crossing_count(x: LayoutLike, g: Graph) -> int:
    return int(crossing_angles(as_layout(x).positions, g.edges).size)


def crossing_angle_penalty(x: LayoutLike, g: Graph) -> float:
    """Mean over crossings of (π/2 − θ)/(π/2); 0 without crossings."""
    angles = crossing_angles(as_layout(x).positions, g.edges)
    if angles.size == 0:
        return 0.0
    half_pi = math.pi / 2
    return float(np.mean((half_pi - angles) / half_pi))


def angular_resolution_penalty(x: LayoutLike, g: Graph) -> float:
    """Mean over nodes of degree ≥ 2 of (2π/deg − θ_min)/(2π/deg)."""
    positions = as_layout(x).positions
    terms = []
    for node in range(g.node_count):
        neighbors = g.neighbors(node)
        degree = len(neighbors)
        if degree < 2:
            continue
        delta = positions[neighbors] - positions[node]
        angles = np.sort(np.arctan2(delta[:, 1], delta[:, 0]))
        gaps = np.diff(np.concatenate([angles, angles[:1] + 2 * math.pi]))
        ideal = 2 * math.pi / degree
        terms.append((ideal - float(gaps.min())) / ideal)
    return float(np.mean(terms)) if terms else 0.0


def node_occlusion(x: LayoutLike, radius: float = NODEOCC_RADIUS) -> int:
    """Unordered node pairs closer than radius."""
    if radius <= 0:
        raise ArgumentError(f"radius must be positive, got {radius}")
    positions = as_layout(x).positions
    i, j = np.triu_indices(positions.shape[0], k=1)
    dist = np.linalg.norm(positions[i] - positions[j], axis=1)
    return int(np.count_nonzero(dist < radius))


def edge_uniformity(x: LayoutLike, g: Graph) -> float:
    """Coefficient of variation (population std / mean) of edge lengths."""
    positions = as_layout(x).positions
    e = np.asarray(g.edges, dtype=np.int64)
    lengths = np.linalg.norm(positions[e[:, 0]] - positions[e[:, 1]], axis=1)
    mean = float(lengths.mean())
    if mean <= 0.0:
        raise DegenerateLayout("mean edge length is zero")
    return float(lengths.std() / mean)


def tsne_divergence(x: LayoutLike, d: DistanceMatrix) -> float:
    """
    KL(P‖Q) between a Gaussian affinity over graph distances and a Student-t
    affinity over layout distances, both normalized over unordered pairs.
    A single pair always matches, so two-node graphs score 0.
    """
    positions = as_layout(x).positions
    if positions.shape[0] < 3:
        return 0.0
    i, j, dij = d.pairs()
    sigma = float(dij.mean())
    p = np.exp(-dij ** 2 / (2 * sigma ** 2))
    p = p / p.sum()
    sq = np.sum((positions[i] - positions[j]) ** 2, axis=1)
    q = 1.0 / (1.0 + sq)
    q = q / q.sum()
    support = p > 0
    if np.any(q[support] <= 0):
        raise DegenerateLayout("layout affinity underflowed to zero on a pair with positive graph affinity")
    return float(np.sum(p[support] * np.log(p[support] / q[support])))


def _raw(criterion: str, x, g: Graph, d: DistanceMatrix, radius: float) -> float:
    if criterion == STRESS:
        return stress(x, d)
    if criterion == XING:
        return float(crossing_count(x, g))
    if criterion == XANGLE:
        return crossing_angle_penalty(x, g)
    if criterion == IANGLE:
        return angular_resolution_penalty(x, g)
    if criterion == NODEOCC:
        return float(node_occlusion(x, radius))
    if criterion == EDGEUNI:
        return edge_uniformity(x, g)
    if criterion == TSNE:
        return tsne_divergence(x, d)
    raise ArgumentError(f"unknown criterion: {criterion}")


@dataclass(frozen=True)
class CriterionSpec:
    """Weighted combination of criteria; see module docstring."""

    terms: Tuple[Tuple[str, float], ...]
    normalization: str = NORMALIZATION_NONE
    canonicalize: bool = True
    radius: float = NODEOCC_RADIUS
    name: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.terms:
            raise ValidationError("criterion spec needs at least one term")
        ids = [criterion for criterion, _ in self.terms]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"duplicate criterion ids in {ids}")
        for criterion, weight in self.terms:
            if criterion not in CRITERIA:
                raise ValidationError(f"unknown criterion: {criterion}")
            if not math.isfinite(weight) or weight < 0:
                raise ValidationError(f"weight for {criterion} must be finite and non-negative")
        if self.normalization not in (NORMALIZATION_NONE, NORMALIZATION_INITIAL):
            raise ValidationError(f"unknown normalization: {self.normalization}")

    @classmethod
    def single(cls, criterion: str, canonicalize: bool = True) -> "CriterionSpec":
        return cls(terms=((criterion, 1.0),), canonicalize=canonicalize, name=criterion)

    @classmethod
    def combined(cls) -> "CriterionSpec":
        return cls(
            terms=tuple(COMBINED_WEIGHTS.items()),
            normalization=NORMALIZATION_INITIAL,
            name="combined",
        )

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if len(self.terms) == 1:
            return self.terms[0][0]
        return "+".join(criterion for criterion, _ in self.terms)

    @property
    def weights(self) -> Dict[str, float]:
        return dict(self.terms)

    def scaled(self, factor: float) -> "CriterionSpec":
        return CriterionSpec(
            terms=tuple((c, w * factor) for c, w in self.terms),
            normalization=self.normalization,
            canonicalize=self.canonicalize,
            radius=self.radius,
            name=self.name,
        )

    def to_dict(self) -> Dict:
        data = {"terms": dict(self.terms), "normalization": self.normalization}
        if not self.canonicalize:
            data["canonicalize"] = False
        if self.radius != NODEOCC_RADIUS:
            data["radius"] = self.radius
        if self.name:
            data["name"] = self.name
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "CriterionSpec":
        try:
            terms = data["terms"]
            return cls(
                terms=tuple((str(k), float(v)) for k, v in terms.items()),
                normalization=data.get("normalization", NORMALIZATION_NONE),
                canonicalize=bool(data.get("canonicalize", True)),
                radius=float(data.get("radius", NODEOCC_RADIUS)),
                name=data.get("name"),
            )
        except (KeyError, AttributeError, TypeError, ValueError) as e:
            raise ParseError(f"malformed criterion spec: {e}") from None


def load_criterion(token: Union[str, os.PathLike]) -> CriterionSpec:
    """Criterion from a JSON file, a criterion id, or 'combined'."""
    token_str = os.fspath(token)
    if token_str == "combined":
        return CriterionSpec.combined()
    if token_str in CRITERIA:
        return CriterionSpec.single(token_str)
    try:
        with open(token_str, 'r') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed criterion spec {token_str}: {e}") from None
    except OSError as e:
        raise ParseError(f"cannot read criterion spec {token_str}: {e}") from None
    spec = CriterionSpec.from_dict(data)
    if spec.name is None and len(spec.terms) > 1:
        spec = CriterionSpec(spec.terms, spec.normalization, spec.canonicalize, spec.radius,
                             name=os.path.splitext(os.path.basename(token_str))[0])
    return spec


@dataclass(frozen=True)
class CriterionValue:
    """Combined value plus the raw components and stress used for tie-breaking."""

    value: float
    components: Dict[str, float] = field(default_factory=dict)
    stress: float = 0.0
    scales: Dict[str, float] = field(default_factory=dict)


def initial_scales(spec: CriterionSpec, init: LayoutLike, g: Graph, d: DistanceMatrix) -> Dict[str, float]:
    """Per-term normalizers: raw value on the initial layout, floored at 1e-9."""
    layout = canonicalize(init, d) if spec.canonicalize else as_layout(init)
    return {
        criterion: max(_raw(criterion, layout, g, d, spec.radius), SCALE_FLOOR)
        for criterion, _ in spec.terms
    }


def evaluate(
    spec: CriterionSpec,
    x: LayoutLike,
    g: Graph,
    d: DistanceMatrix,
    init: Optional[LayoutLike] = None,
    scales: Optional[Mapping[str, float]] = None,
) -> CriterionValue:
    """
    Evaluate a criterion spec on a layout.

    Args:
        init: initial layout, required for per_graph_initial normalization
            unless precomputed ``scales`` are given
        scales: per-term normalizers from ``initial_scales``
    """
    layout = canonicalize(x, d) if spec.canonicalize else as_layout(x)
    components = {criterion: _raw(criterion, layout, g, d, spec.radius) for criterion, _ in spec.terms}
    layout_stress = components[STRESS] if STRESS in components else stress(layout, d)

    if spec.normalization == NORMALIZATION_INITIAL:
        if scales is None:
            if init is None:
                raise MissingInitialLayout("per_graph_initial normalization needs the initial layout")
            scales = initial_scales(spec, init, g, d)
        scales = {criterion: float(scales[criterion]) for criterion, _ in spec.terms}
    else:
        scales = {}

    value = 0.0
    for criterion, weight in spec.terms:
        raw = components[criterion]
        value += weight * (raw / scales[criterion] if scales else raw)
    return CriterionValue(value=value, components=components, stress=layout_stress, scales=dict(scales))


def better_than(a: CriterionValue, b: CriterionValue) -> bool:
    """Strictly lower value wins; values within 1e-12 fall back to lower stress."""
    if abs(a.value - b.value) <= TIE_EPS:
        return a.stress < b.stress
    return a.value < b.value
