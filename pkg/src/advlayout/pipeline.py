"""
advlayout pipeline - main API with convenience functions.

The core functionality is split across:

- graph.py / geometry.py: graphs, layouts and their file formats
- criteria.py: quantitative aesthetic criteria
- baselines.py: classical layout methods and collection building
- neural.py / trainer.py: the generator, discriminator and training loop
- evaluation.py: SPC comparison reports
- cli.py: command-line interface

API Levels:
1. Simple functions: generate_dataset(), collect(), train_model(), draw(), compare()
2. Config object: shared seed, logger and worker count
3. Trainer / Evaluator: full control

Example:
    config = Config(seed=7)
    samples = load_samples("graphs/", config=config)
    collection = collect(samples, ["pmds", "fr"], CriterionSpec.single("stress"), config=config)
    result = train_model(samples, TrainConfig(epochs=50, seed=7), collection=collection, config=config)
"""

import asyncio
import json
import logging
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .baselines import BASELINE_NAMES, LayoutMethod, baseline_method, build_collection
from .collection import LayoutCollection
from .criteria import CriterionSpec
from .dataset import (
    INIT_PMDS,
    GraphSample,
    generate_graphs,
    initial_layout,
    load_graph_dir,
    prepare_dataset,
    write_graph_dir,
)
from .errors import ParseError, ValidationError
from .evaluation import Evaluator, SPCReport
from .geometry import Layout, load_layout, save_layout
from .neural import CHECKPOINT_FORMAT, ArchConfig, ModelState, generate, load_checkpoint
from .trainer import TrainConfig, Trainer, TrainResult
from .utils import default_logger

LAYOUT_SUFFIXES = ('.txt', '.json')
INIT_PROVIDED = "provided"


@dataclass
class Config:
    """Settings shared by pipeline operations."""
    seed: int = 0
    logger: Optional[logging.Logger] = None
    workers: int = 4
    init: str = INIT_PMDS
    # Generator inputs for checkpoint methods; None keeps what the model was trained with.
    model_seed: Optional[int] = None
    model_init: Optional[str] = None

    @property
    def log(self) -> logging.Logger:
        return self.logger or default_logger

    def create_trainer(self, train_cfg: TrainConfig) -> Trainer:
        """Create a Trainer with this configuration's logger."""
        return Trainer(train_cfg, logger=self.logger)

    def create_evaluator(self) -> Evaluator:
        """Create an Evaluator with this configuration."""
        return Evaluator(logger=self.logger, workers=self.workers)


def load_train_config(path: str) -> Tuple[ArchConfig, TrainConfig]:
    """train.json: {"arch": {ArchConfig fields}, "train": {TrainConfig fields}}."""
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed training config {path}: {e}") from None
    except OSError as e:
        raise ParseError(f"cannot read training config {path}: {e}") from None
    if not isinstance(data, dict):
        raise ParseError(f"training config {path} must be a JSON object")
    unknown = set(data) - {"arch", "train"}
    if unknown:
        raise ValidationError(f"unknown training config sections: {sorted(unknown)}")
    try:
        return ArchConfig.from_dict(data.get("arch", {})), TrainConfig.from_dict(data.get("train", {}))
    except TypeError as e:
        raise ValidationError(f"invalid training config: {e}") from None


def load_layout_dir(directory: str) -> Dict[str, Layout]:
    """Layouts keyed by file stem."""
    if not os.path.isdir(directory):
        raise ParseError(f"layout directory not found: {directory}")
    layouts = {}
    for filename in sorted(os.listdir(directory)):
        stem, suffix = os.path.splitext(filename)
        if suffix in LAYOUT_SUFFIXES and not filename.startswith('.'):
            layouts[stem] = load_layout(os.path.join(directory, filename))
    return layouts


def write_layout_dir(layouts: Dict[str, Layout], directory: str) -> None:
    for graph_id in sorted(layouts):
        save_layout(layouts[graph_id], os.path.join(directory, f"{graph_id}.txt"))


def load_samples(
    graph_dir: str,
    init_dir: Optional[str] = None,
    config: Optional[Config] = None,
) -> List[GraphSample]:
    """
    Prepared samples for every graph in a directory. Initial layouts are
    computed (PMDS or random per ``config.init``) unless ``init_dir`` holds them.
    """
    config = config or Config()
    samples = prepare_dataset(load_graph_dir(graph_dir), init=config.init, seed=config.seed)
    if init_dir is None:
        return samples
    provided = load_layout_dir(init_dir)
    overridden = []
    for sample in samples:
        layout = provided.get(sample.graph_id)
        if layout is None:
            raise ValidationError(f"no initial layout for {sample.graph_id} in {init_dir}")
        if layout.node_count != sample.node_count:
            raise ValidationError(
                f"initial layout for {sample.graph_id} has {layout.node_count} rows, graph has {sample.node_count}")
        overridden.append(GraphSample(sample.graph_id, sample.graph, sample.distances,
                                      Layout(layout.positions, graph_id=sample.graph_id)))
    return overridden


def model_method(
    name: str,
    state: ModelState,
    seed: Optional[int] = None,
    init: Optional[str] = None,
) -> LayoutMethod:
    """
    Inference with a trained generator; only the generator is used.

    Generator inputs are rebuilt with the seed and init method stored in the
    checkpoint, so the layouts match what ``draw`` writes for it. An explicit
    ``seed`` or ``init`` overrides them; ``init="provided"`` uses each sample's
    own initial layout.
    """
    trained = state.train_config
    seed = int(trained.get("seed", 0)) if seed is None else seed
    init = init or trained.get("init", INIT_PMDS)

    def produce(sample: GraphSample) -> Layout:
        x0 = sample.init if init == INIT_PROVIDED else initial_layout(
            sample.graph_id, sample.graph, sample.distances, init, seed)
        return generate(state.generator, sample.graph, sample.distances, x0)

    return LayoutMethod(name, produce)


def layouts_method(name: str, directory: str) -> LayoutMethod:
    """Precomputed layouts read from a directory."""
    layouts = load_layout_dir(directory)

    def produce(sample: GraphSample) -> Layout:
        layout = layouts.get(sample.graph_id)
        if layout is None:
            raise ValidationError(f"{name} has no layout for {sample.graph_id}")
        return layout

    return LayoutMethod(name, produce)


def _is_checkpoint(path: str) -> bool:
    if not os.path.isfile(path):
        return False
    try:
        with open(path, 'r') as f:
            return json.load(f).get("format") == CHECKPOINT_FORMAT
    except (OSError, ValueError, AttributeError):
        return False


def resolve_method(token: str, config: Optional[Config] = None) -> LayoutMethod:
    """
    A method from a command-line token: a baseline name, a checkpoint file,
    a checkpoint directory, or a directory of layouts. ``name=token`` renames.
    """
    config = config or Config()
    name, _, target = token.partition("=")
    if not target:
        name, target = "", token
    if target in BASELINE_NAMES:
        return LayoutMethod(name or target, baseline_method(target, seed=config.seed).produce)
    checkpoint = os.path.join(target, "checkpoint.json") if os.path.isdir(target) else target
    label = name or os.path.basename(os.path.normpath(target))
    if _is_checkpoint(checkpoint):
        return model_method(label, load_checkpoint(checkpoint), config.model_seed, config.model_init)
    if os.path.isdir(target):
        return layouts_method(label, target)
    raise ParseError(f"not a baseline, checkpoint or layout directory: {target}")


def generate_dataset(
    count: int,
    n_min: int,
    n_max: int,
    extra_fraction: float,
    out_dir: Optional[str] = None,
    config: Optional[Config] = None,
):
    """Synthetic connected graphs, optionally written as edge lists."""
    config = config or Config()
    graphs = generate_graphs(count, n_min, n_max, extra_fraction, config.seed)
    if out_dir:
        write_graph_dir(graphs, out_dir)
        config.log.info(f"💾 Wrote {len(graphs)} graphs to {out_dir}")
    return graphs


def run_baseline(method: str, samples: Sequence[GraphSample], config: Optional[Config] = None) -> Dict[str, Layout]:
    config = config or Config()
    producer = baseline_method(method, seed=config.seed)
    return {s.graph_id: Layout(producer.produce(s).positions, graph_id=s.graph_id) for s in samples}


def collect(
    samples: Sequence[GraphSample],
    methods: Sequence[str],
    spec: CriterionSpec,
    config: Optional[Config] = None,
) -> LayoutCollection:
    """Good-layout collection over baseline names and/or layout directories."""
    config = config or Config()
    resolved = [resolve_method(token, config) for token in methods]
    return build_collection(samples, spec, resolved, logger=config.log)


def train_model(
    samples: Sequence[GraphSample],
    train_cfg: TrainConfig,
    arch: Optional[ArchConfig] = None,
    collection: Optional[LayoutCollection] = None,
    state: Optional[ModelState] = None,
    checkpoint_dir: Optional[str] = None,
    config: Optional[Config] = None,
) -> TrainResult:
    config = config or Config()
    return config.create_trainer(train_cfg).train(samples, arch=arch, collection=collection, state=state,
                                                  checkpoint_dir=checkpoint_dir)


def draw(state: ModelState, samples: Sequence[GraphSample]) -> Dict[str, Layout]:
    """Generator layouts for every sample."""
    return {s.graph_id: generate(state.generator, s.graph, s.distances, s.init) for s in samples}


def compare(
    models: Sequence[str],
    benchmarks: Sequence[str],
    samples: Sequence[GraphSample],
    criteria: Sequence[CriterionSpec],
    config: Optional[Config] = None,
) -> SPCReport:
    """Synchronous wrapper around Evaluator.compare for method tokens."""
    config = config or Config()
    model_methods = [resolve_method(token, config) for token in models]
    benchmark_methods = [resolve_method(token, config) for token in benchmarks]
    evaluator = config.create_evaluator()
    return asyncio.run(evaluator.compare(model_methods, benchmark_methods, samples, criteria))
