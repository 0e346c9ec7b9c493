"""
advlayout - graph layouts from a self-challenging adversarial generator.

A GNN generator learns to lay out graphs against a discriminator that compares
its output with a per-graph collection of good layouts; whenever the generator
beats a stored example under the chosen aesthetic criterion, the example is
replaced, so the target keeps improving during training.
"""

from .baselines import build_collection, fruchterman_reingold, pivot_mds, random_layout, stress_sgd
from .collection import LayoutCollection
from .criteria import CriterionSpec, CriterionValue, better_than, evaluate, load_criterion
from .dataset import GraphSample, prepare_dataset
from .errors import AdvLayoutError
from .evaluation import Evaluator, SPCReport, average_spc, spc
from .geometry import Layout, canonicalize
from .graph import DistanceMatrix, Graph, random_graph, shortest_paths
from .neural import ArchConfig, ModelState, generate, load_checkpoint, save_checkpoint
from .pipeline import Config, collect, compare, draw, generate_dataset, load_samples, train_model
from .render import RenderOptions, render_svg
from .trainer import TrainConfig, Trainer, rgan_d_loss, rgan_g_loss

__version__ = "0.3.0"

__all__ = [
    "AdvLayoutError",
    "ArchConfig",
    "Config",
    "CriterionSpec",
    "CriterionValue",
    "DistanceMatrix",
    "Evaluator",
    "Graph",
    "GraphSample",
    "Layout",
    "LayoutCollection",
    "ModelState",
    "RenderOptions",
    "SPCReport",
    "TrainConfig",
    "Trainer",
    "average_spc",
    "better_than",
    "build_collection",
    "canonicalize",
    "collect",
    "compare",
    "draw",
    "evaluate",
    "fruchterman_reingold",
    "generate",
    "generate_dataset",
    "load_checkpoint",
    "load_criterion",
    "load_samples",
    "pivot_mds",
    "prepare_dataset",
    "random_graph",
    "random_layout",
    "render_svg",
    "rgan_d_loss",
    "rgan_g_loss",
    "save_checkpoint",
    "shortest_paths",
    "spc",
    "stress_sgd",
    "train_model",
]
