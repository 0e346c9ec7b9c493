"""
Prepared graph samples: graph, distances and the generator's initial layout.
"""

import os
from dataclasses import dataclass
from typing import List, Sequence, Tuple

from .baselines import pivot_mds, random_layout
from .errors import ArgumentError, ParseError
from .geometry import Layout
from .graph import (
    EDGE_LIST,
    GRAPHML_SUBSET,
    DistanceMatrix,
    Graph,
    load_graph,
    random_graph,
    save_graph,
    shortest_paths,
)
from .utils import derive_seed

INIT_PMDS = "pmds"
INIT_RANDOM = "random"


@dataclass(frozen=True)
class GraphSample:
    graph_id: str
    graph: Graph
    distances: DistanceMatrix
    init: Layout

    @property
    def node_count(self) -> int:
        return self.graph.node_count


def initial_layout(graph_id: str, graph: Graph, distances: DistanceMatrix, init: str, seed: int) -> Layout:
    """PMDS (default) or uniform random generator input."""
    if init == INIT_PMDS:
        layout = pivot_mds(graph, distances, seed=derive_seed(seed, f"pmds:{graph_id}"))
    elif init == INIT_RANDOM:
        layout = random_layout(graph, derive_seed(seed, f"init:{graph_id}"))
    else:
        raise ArgumentError(f"unknown init: {init}")
    return Layout(layout.positions, graph_id=graph_id)


def prepare_sample(graph_id: str, graph: Graph, init: str = INIT_PMDS, seed: int = 0) -> GraphSample:
    distances = shortest_paths(graph)
    return GraphSample(graph_id, graph, distances, initial_layout(graph_id, graph, distances, init, seed))


def prepare_dataset(
    graphs: Sequence[Tuple[str, Graph]],
    init: str = INIT_PMDS,
    seed: int = 0,
) -> List[GraphSample]:
    return [prepare_sample(graph_id, graph, init, seed) for graph_id, graph in graphs]


def generate_graphs(
    count: int,
    n_min: int,
    n_max: int,
    extra_fraction: float,
    seed: int,
) -> List[Tuple[str, Graph]]:
    """Synthetic dataset; graph i uses the sub-seed derived from (seed, i)."""
    width = max(4, len(str(count - 1)))
    return [
        (f"g{i:0{width}d}", random_graph((n_min, n_max), extra_fraction, derive_seed(seed, f"graph{i}")))
        for i in range(count)
    ]


def graph_format(path: str) -> str:
    return GRAPHML_SUBSET if path.endswith(('.graphml', '.xml')) else EDGE_LIST


def load_graph_dir(directory: str) -> List[Tuple[str, Graph]]:
    """All graphs in a directory, ids taken from file stems, sorted by id."""
    if not os.path.isdir(directory):
        raise ParseError(f"graph directory not found: {directory}")
    graphs = []
    for filename in sorted(os.listdir(directory)):
        if filename.startswith('.') or not filename.endswith(('.txt', '.graphml', '.xml')):
            continue
        path = os.path.join(directory, filename)
        graphs.append((os.path.splitext(filename)[0], load_graph(path, graph_format(path))))
    if not graphs:
        raise ParseError(f"no graph files in {directory}")
    return graphs


def write_graph_dir(graphs: Sequence[Tuple[str, Graph]], directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    for graph_id, graph in graphs:
        save_graph(graph, os.path.join(directory, f"{graph_id}.txt"))
