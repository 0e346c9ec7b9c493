"""
Layouts, canonicalization and planar geometry primitives.

Canonicalization is translation to the centroid, PCA rotation (pure rotation,
determinant +1) and the stress-optimal uniform rescale, applied in that order.
"""

import json
import math
import os
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DegenerateLayout, ParseError, ValidationError
from .graph import DistanceMatrix, Edge
from .utils import atomic_write_text, format_float

ORIENTATION_EPS = 1e-12
ISOTROPY_EPS = 1e-12
SIGN_EPS = 1e-6


@dataclass(frozen=True, eq=False)
class Layout:
    """N×2 node positions; row i is the position of node i."""

    positions: np.ndarray
    graph_id: Optional[str] = field(default=None)

    def __post_init__(self) -> None:
        positions = np.array(self.positions, dtype=float)
        if positions.ndim != 2 or positions.shape[1] != 2:
            raise ValidationError(f"layout must be N×2, got shape {positions.shape}")
        if not np.all(np.isfinite(positions)):
            raise ValidationError("layout has non-finite coordinates")
        positions.setflags(write=False)
        object.__setattr__(self, 'positions', positions)

    @property
    def node_count(self) -> int:
        return int(self.positions.shape[0])

    def with_positions(self, positions: np.ndarray) -> "Layout":
        return Layout(positions, graph_id=self.graph_id)

    def allclose(self, other: "Layout", atol: float = 1e-9) -> bool:
        return self.positions.shape == other.positions.shape and bool(
            np.allclose(self.positions, other.positions, rtol=0.0, atol=atol)
        )


LayoutLike = Union[Layout, np.ndarray, Sequence[Sequence[float]]]


def as_layout(x: LayoutLike) -> Layout:
    return x if isinstance(x, Layout) else Layout(np.asarray(x, dtype=float))


class Canonicalization(NamedTuple):
    """Parameters of the canonical transform: (X - center) @ rotation * scale."""

    center: np.ndarray
    rotation: np.ndarray
    scale: float


def translate_to_origin(x: LayoutLike) -> Layout:
    x = as_layout(x)
    return x.with_positions(x.positions - x.positions.mean(axis=0))


def pca_rotation_matrix(centered: np.ndarray) -> np.ndarray:
    """
    2×2 rotation whose first column is the first principal direction.

    Degenerate isotropic covariance gives the identity. The axis sign is fixed
    by making the first node (by index) with a non-negligible principal
    coordinate positive, so rotated copies of a layout share one canonical form.
    """
    cov = centered.T @ centered / max(centered.shape[0], 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    lam_small, lam_large = float(eigvals[0]), float(eigvals[1])
    if lam_large <= 0.0 or (lam_large - lam_small) <= ISOTROPY_EPS * lam_large:
        return np.eye(2)

    v1 = eigvecs[:, 1].copy()
    proj = centered @ v1
    limit = SIGN_EPS * float(np.max(np.abs(proj)))
    significant = np.flatnonzero(np.abs(proj) > limit)
    if significant.size and proj[significant[0]] < 0:
        v1 = -v1
    v2 = np.array([-v1[1], v1[0]])
    return np.column_stack([v1, v2])


def pca_rotate(x: LayoutLike) -> Layout:
    x = as_layout(x)
    return x.with_positions(x.positions @ pca_rotation_matrix(x.positions))


def optimal_scale(x: LayoutLike, d: DistanceMatrix) -> float:
    """Unique minimizer s of stress(s·X) over uniform scalings."""
    positions = as_layout(x).positions
    i, j, dij = d.pairs()
    dist = np.linalg.norm(positions[i] - positions[j], axis=1)
    numerator = float(np.sum(dist / dij))
    denominator = float(np.sum(dist ** 2 / dij ** 2))
    if denominator <= 0.0:
        raise DegenerateLayout("all node positions coincide; optimal scale is undefined")
    return numerator / denominator


def optimal_rescale(x: LayoutLike, d: DistanceMatrix) -> Layout:
    x = as_layout(x)
    return x.with_positions(x.positions * optimal_scale(x, d))


def canonical_transform(x: LayoutLike, d: DistanceMatrix) -> Canonicalization:
    positions = as_layout(x).positions
    center = positions.mean(axis=0)
    centered = positions - center
    rotation = pca_rotation_matrix(centered)
    scale = optimal_scale(centered @ rotation, d)
    return Canonicalization(center=center, rotation=rotation, scale=scale)


def canonicalize(x: LayoutLike, d: DistanceMatrix) -> Layout:
    """Translation, then PCA rotation, then optimal rescale."""
    return optimal_rescale(pca_rotate(translate_to_origin(x)), d)


class Crossing(NamedTuple):
    point: Tuple[float, float]
    acute_angle: float


def orientation(a: Sequence[float], b: Sequence[float], c: Sequence[float]) -> int:
    """+1 counter-clockwise, -1 clockwise, 0 collinear within ORIENTATION_EPS."""
    value = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if value > ORIENTATION_EPS:
        return 1
    if value < -ORIENTATION_EPS:
        return -1
    return 0


def acute_angle(d1: Sequence[float], d2: Sequence[float]) -> float:
    cross = d1[0] * d2[1] - d1[1] * d2[0]
    dot = d1[0] * d2[0] + d1[1] * d2[1]
    return math.atan2(abs(cross), abs(dot))


def segment_intersection(p1, p2, p3, p4) -> Optional[Crossing]:
    """
    Proper interior crossing of segments p1p2 and p3p4.

    Shared or touching endpoints, collinear overlaps and disjoint segments
    return None.
    """
    o1 = orientation(p1, p2, p3)
    o2 = orientation(p1, p2, p4)
    o3 = orientation(p3, p4, p1)
    o4 = orientation(p3, p4, p2)
    if o1 * o2 != -1 or o3 * o4 != -1:
        return None

    d1 = (p2[0] - p1[0], p2[1] - p1[1])
    d2 = (p4[0] - p3[0], p4[1] - p3[1])
    denom = d1[0] * d2[1] - d1[1] * d2[0]
    t = ((p3[0] - p1[0]) * d2[1] - (p3[1] - p1[1]) * d2[0]) / denom
    point = (p1[0] + t * d1[0], p1[1] + t * d1[1])
    return Crossing(point=point, acute_angle=acute_angle(d1, d2))


def crossing_angles(positions: np.ndarray, edges: Sequence[Edge]) -> np.ndarray:
    """Acute angles of every properly crossing edge pair (vectorized pair scan)."""
    m = len(edges)
    if m < 2:
        return np.zeros(0)
    e = np.asarray(edges, dtype=np.int64)
    a, b = np.triu_indices(m, k=1)
    ea, eb = e[a], e[b]
    disjoint = (
        (ea[:, 0] != eb[:, 0]) & (ea[:, 0] != eb[:, 1])
        & (ea[:, 1] != eb[:, 0]) & (ea[:, 1] != eb[:, 1])
    )
    ea, eb = ea[disjoint], eb[disjoint]
    p1, p2 = positions[ea[:, 0]], positions[ea[:, 1]]
    p3, p4 = positions[eb[:, 0]], positions[eb[:, 1]]

    def orient(a_, b_, c_):
        value = (b_[:, 0] - a_[:, 0]) * (c_[:, 1] - a_[:, 1]) - (b_[:, 1] - a_[:, 1]) * (c_[:, 0] - a_[:, 0])
        return np.where(value > ORIENTATION_EPS, 1, np.where(value < -ORIENTATION_EPS, -1, 0))

    proper = (orient(p1, p2, p3) * orient(p1, p2, p4) == -1) & (orient(p3, p4, p1) * orient(p3, p4, p2) == -1)
    d1 = (p2 - p1)[proper]
    d2 = (p4 - p3)[proper]
    cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    dot = np.sum(d1 * d2, axis=1)
    return np.arctan2(np.abs(cross), np.abs(dot))


def parse_layout_text(text: str) -> Layout:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"line {lineno}: expected 'x y', got {line!r}")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise ParseError(f"line {lineno}: coordinates must be decimal floats") from None
    if not rows:
        raise ParseError("empty layout file")
    return Layout(np.array(rows))


def parse_layout_json(text: str) -> Layout:
    try:
        data = json.loads(text)
        positions = np.array(data['positions'], dtype=float)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise ParseError(f"malformed layout JSON: {e}") from None
    return Layout(positions)


def format_layout_text(x: Layout) -> str:
    return "".join(f"{format_float(px)} {format_float(py)}\n" for px, py in x.positions)


def load_layout(path: Union[str, os.PathLike]) -> Layout:
    try:
        with open(path, 'r') as f:
            text = f.read()
    except OSError as e:
        raise ParseError(f"cannot read layout file {path}: {e}") from None
    if os.fspath(path).endswith('.json'):
        return parse_layout_json(text)
    return parse_layout_text(text)


def save_layout(x: Layout, path: Union[str, os.PathLike]) -> None:
    if os.fspath(path).endswith('.json'):
        content = json.dumps({"positions": x.positions.tolist()}) + "\n"
    else:
        content = format_layout_text(x)
    atomic_write_text(path, content)
