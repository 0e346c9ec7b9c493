"""
Static SVG output: layout drawings and SPC heatmaps.

Documents are built with ElementTree so output is deterministic: fixed
attribute order, two-decimal coordinates and no timestamps.
"""

import logging
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError
from .geometry import Layout, LayoutLike, as_layout
from .graph import Graph
from .utils import default_logger

SVG_NS = "http://www.w3.org/2000/svg"
DEGENERATE_COMMENT = " warning: degenerate layout, all nodes coincide "


@dataclass(frozen=True)
class RenderOptions:
    width_px: int = 600
    node_radius: float = 4.0
    edge_width: float = 1.0
    margin: float = 20.0
    node_color: str = "#1f77b4"
    edge_color: str = "#555555"

    def __post_init__(self) -> None:
        if self.width_px <= 0:
            raise ValidationError("width_px must be positive")
        if self.node_radius <= 0 or self.edge_width <= 0:
            raise ValidationError("node_radius and edge_width must be positive")
        if self.margin < 0 or 2 * self.margin >= self.width_px:
            raise ValidationError("margin must be non-negative and leave room for the drawing")


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _document(width: float, height: float) -> ET.Element:
    return ET.Element("svg", {
        "xmlns": SVG_NS,
        "width": _fmt(width),
        "height": _fmt(height),
        "viewBox": f"0 0 {_fmt(width)} {_fmt(height)}",
    })


def _serialize(root: ET.Element) -> str:
    return ET.tostring(root, encoding="unicode") + "\n"


def viewport_positions(x: LayoutLike, opts: RenderOptions) -> np.ndarray:
    """
    Map layout coordinates into a square viewport of side ``width_px``: one
    uniform scale for both axes, centered, y pointing up.
    """
    positions = as_layout(x).positions
    lo = positions.min(axis=0)
    hi = positions.max(axis=0)
    span = float(np.max(hi - lo))
    side = opts.width_px
    center = (lo + hi) / 2.0
    if span == 0.0:
        return np.tile([side / 2.0, side / 2.0], (positions.shape[0], 1))
    scale = (side - 2.0 * opts.margin) / span
    px = side / 2.0 + (positions[:, 0] - center[0]) * scale
    py = side / 2.0 - (positions[:, 1] - center[1]) * scale
    return np.column_stack([px, py])


def render_svg(
    x: Layout,
    g: Graph,
    opts: Optional[RenderOptions] = None,
    logger: Optional[logging.Logger] = None,
) -> str:
    """Edges as <line>, nodes as <circle>; byte-identical for identical input."""
    opts = opts or RenderOptions()
    logger = logger or default_logger
    x = as_layout(x)
    if x.node_count != g.node_count:
        raise ValidationError(f"layout has {x.node_count} rows, graph has {g.node_count} nodes")
    side = float(opts.width_px)
    root = _document(side, side)
    positions = viewport_positions(x, opts)

    if np.all(positions == positions[0]):
        logger.warning("⚠️ Degenerate layout: all nodes coincide, rendering a single node")
        root.append(ET.Comment(DEGENERATE_COMMENT))
        ET.SubElement(root, "circle", {
            "cx": _fmt(side / 2.0), "cy": _fmt(side / 2.0),
            "r": _fmt(opts.node_radius), "fill": opts.node_color,
        })
        return _serialize(root)

    edges = ET.SubElement(root, "g", {"stroke": opts.edge_color, "stroke-width": _fmt(opts.edge_width)})
    for u, v in g.edges:
        ET.SubElement(edges, "line", {
            "x1": _fmt(positions[u, 0]), "y1": _fmt(positions[u, 1]),
            "x2": _fmt(positions[v, 0]), "y2": _fmt(positions[v, 1]),
        })
    nodes = ET.SubElement(root, "g", {"fill": opts.node_color})
    for i in range(g.node_count):
        ET.SubElement(nodes, "circle", {
            "cx": _fmt(positions[i, 0]), "cy": _fmt(positions[i, 1]), "r": _fmt(opts.node_radius),
        })
    return _serialize(root)


def _heat_color(value: Optional[float]) -> str:
    """Blue for negative SPC (model better), red for positive, white at 0."""
    if value is None or not math.isfinite(value):
        return "#cccccc"
    t = max(-1.0, min(1.0, value / 100.0))
    fade = int(round(255 * (1.0 - abs(t))))
    if t < 0:
        return f"#{fade:02x}{fade:02x}ff"
    return f"#ff{fade:02x}{fade:02x}"


def render_heatmap_svg(
    matrix: Sequence[Sequence[Optional[float]]],
    row_labels: Sequence[str],
    col_labels: Sequence[str],
    title: str = "",
    cell_px: int = 60,
) -> str:
    """Annotated matrix of percentages (rows: benchmarks, columns: models)."""
    if len(matrix) != len(row_labels) or any(len(row) != len(col_labels) for row in matrix):
        raise ValidationError("heatmap matrix does not match its labels")
    label_w, header_h = 120, 40
    width = label_w + cell_px * len(col_labels)
    height = header_h + cell_px * len(row_labels)
    root = _document(width, height)
    text_style = {"font-family": "sans-serif", "font-size": "11", "text-anchor": "middle"}
    if title:
        heading = ET.SubElement(root, "text", {"x": _fmt(width / 2.0), "y": "12", **text_style})
        heading.text = title
    for j, label in enumerate(col_labels):
        cell = ET.SubElement(root, "text", {"x": _fmt(label_w + (j + 0.5) * cell_px), "y": "32", **text_style})
        cell.text = label
    for i, label in enumerate(row_labels):
        y0 = header_h + i * cell_px
        row_text = ET.SubElement(root, "text", {"x": _fmt(label_w / 2.0), "y": _fmt(y0 + cell_px / 2.0), **text_style})
        row_text.text = label
        for j, value in enumerate(matrix[i]):
            x0 = label_w + j * cell_px
            ET.SubElement(root, "rect", {
                "x": _fmt(x0), "y": _fmt(y0), "width": _fmt(cell_px), "height": _fmt(cell_px),
                "fill": _heat_color(value), "stroke": "#ffffff",
            })
            annotation = ET.SubElement(root, "text", {
                "x": _fmt(x0 + cell_px / 2.0), "y": _fmt(y0 + cell_px / 2.0), **text_style})
            annotation.text = "n/a" if value is None else f"{value:.2f}%"
    return _serialize(root)
