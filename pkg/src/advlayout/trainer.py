"""
Self-challenging relativistic GAN training.

Each epoch trains the discriminator on k minibatches with the generator frozen,
then the generator on k minibatches with the discriminator frozen, and finally
offers every generated layout to the good-layout collection, which keeps it
only if it is strictly better under the training criterion.
"""

import csv
import io
import logging
import math
import os
from dataclasses import dataclass, field, fields
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .collection import LayoutCollection
from .criteria import STRESS, CriterionSpec, evaluate
from .dataset import INIT_PMDS, INIT_RANDOM, GraphSample
from .errors import AdvLayoutError, ArgumentError, NonFiniteLoss, ValidationError
from .neural import (
    ArchConfig,
    ModelState,
    adamw_step,
    discriminator_forward,
    generate,
    generator_forward,
    save_checkpoint,
)
from .utils import atomic_write_text, default_logger, derive_seed, make_rng

BOOTSTRAP_COLLECTION = "collection"
BOOTSTRAP_SELF = "self"
REPLACEMENT_STRICT = "strict_improve"

HISTORY_COLUMNS = (
    "epoch", "d_loss", "g_loss", "mean_collection_value", "mean_generated_value", "replacements", "lr",
)
CHECKPOINT_FILE = "checkpoint.json"
HISTORY_FILE = "history.csv"
COLLECTION_FILE = "collection.json"

Score = Union[float, Tensor]


def rgan_d_loss(score_r: Score, score_f: Score) -> Score:
    """−ln σ(score_r − score_f), as softplus(score_f − score_r)."""
    if isinstance(score_r, Tensor) or isinstance(score_f, Tensor):
        return ad.softplus(ad.sub(score_f, score_r))
    return float(np.logaddexp(0.0, float(score_f) - float(score_r)))


def rgan_g_loss(score_r: Score, score_f: Score) -> Score:
    """−ln σ(score_f − score_r)."""
    return rgan_d_loss(score_f, score_r)


@dataclass
class TrainConfig:
    epochs: int = 200
    minibatch_size: int = 16
    d_steps_per_epoch: Optional[int] = None
    lr: float = 0.001
    lr_decay: float = 0.997
    weight_decay: float = 0.99
    seed: int = 0
    criterion: CriterionSpec = field(default_factory=lambda: CriterionSpec.single(STRESS))
    bootstrap: str = BOOTSTRAP_COLLECTION
    replacement: str = REPLACEMENT_STRICT
    self_challenge: bool = True
    checkpoint_every: int = 10
    init: str = INIT_PMDS

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValidationError("epochs must be non-negative")
        if self.minibatch_size < 1:
            raise ValidationError("minibatch_size must be positive")
        if self.d_steps_per_epoch is not None and self.d_steps_per_epoch < 0:
            raise ValidationError("d_steps_per_epoch must be non-negative")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValidationError("lr_decay must be in (0, 1]")
        if not 0.0 < self.weight_decay <= 1.0:
            raise ValidationError("weight_decay must be in (0, 1]")
        if self.lr <= 0:
            raise ValidationError("lr must be positive")
        if self.checkpoint_every < 1:
            raise ValidationError("checkpoint_every must be positive")
        if self.bootstrap not in (BOOTSTRAP_COLLECTION, BOOTSTRAP_SELF):
            raise ValidationError(f"unknown bootstrap: {self.bootstrap}")
        if self.replacement != REPLACEMENT_STRICT:
            raise ValidationError(f"unknown replacement rule: {self.replacement}")
        if self.init not in (INIT_PMDS, INIT_RANDOM):
            raise ValidationError(f"unknown init: {self.init}")

    def steps_per_phase(self, dataset_size: int) -> int:
        """k: configured, or one pass over the dataset per phase."""
        if self.d_steps_per_epoch is not None:
            return self.d_steps_per_epoch
        return math.ceil(dataset_size / self.minibatch_size)

    def to_dict(self) -> Dict[str, Any]:
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data["criterion"] = self.criterion.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown train config keys: {sorted(unknown)}")
        values = dict(data)
        if isinstance(values.get("criterion"), Mapping):
            values["criterion"] = CriterionSpec.from_dict(values["criterion"])
        try:
            return cls(**values)
        except TypeError as e:
            raise ValidationError(f"invalid train config: {e}") from None


@dataclass
class EpochStats:
    d_loss: float
    g_loss: float
    d_losses: List[float] = field(default_factory=list)
    g_losses: List[float] = field(default_factory=list)


class _ChallengeOutcome(NamedTuple):
    replacements: int
    generated: Dict[str, float]
    failures: Dict[str, str]

    @property
    def mean_generated_value(self) -> float:
        values = list(self.generated.values())
        return sum(values) / len(values) if values else float('nan')


@dataclass
class TrainResult:
    state: ModelState
    collection: LayoutCollection
    history: List[Dict[str, Any]]


def _finite_or_none(value: float) -> Optional[float]:
    return value if value is not None and math.isfinite(value) else None


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else float('nan')


def _tensor_mean(terms: List[Tensor]) -> Tensor:
    total = terms[0]
    for term in terms[1:]:
        total = ad.add(total, term)
    return ad.scalar_mul(total, 1.0 / len(terms))


def minibatches(order: np.ndarray, size: int, count: int) -> List[List[int]]:
    """``count`` consecutive minibatches cycling through ``order``."""
    n = len(order)
    if n == 0:
        return []
    size = min(size, n)
    return [[int(order[(step * size + j) % n]) for j in range(size)] for step in range(count)]


def write_history_csv(history: Sequence[Mapping[str, Any]], path: str) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(HISTORY_COLUMNS)
    for record in history:
        row = []
        for column in HISTORY_COLUMNS:
            value = record.get(column)
            row.append("" if value is None else repr(value) if isinstance(value, float) else value)
        writer.writerow(row)
    atomic_write_text(path, buffer.getvalue())


class Trainer:
    """
    Runs training epochs and self-challenge updates for one model.

    Args:
        cfg: training configuration
        logger: Logger instance to use (default: built-in logging)
    """

    def __init__(self, cfg: TrainConfig, logger: Optional[logging.Logger] = None):
        self.cfg = cfg
        self.logger = logger or default_logger

    def _phase_loss(
        self,
        state: ModelState,
        collection: LayoutCollection,
        batch: Sequence[GraphSample],
        train_generator: bool,
    ) -> Optional[Tensor]:
        tape = Tape()
        gen_params = state.generator.bind(tape, trainable=train_generator)
        dis_params = state.discriminator.bind(tape, trainable=not train_generator)
        bound = gen_params if train_generator else dis_params
        arch = state.arch
        losses = []
        for sample in batch:
            entry = collection.get(sample.graph_id)
            if entry is None:
                raise ValidationError(f"collection has no layout for {sample.graph_id}")
            g, d = sample.graph, sample.distances
            try:
                fake = generator_forward(gen_params, arch, g, d, sample.init, tape)
                score_f = discriminator_forward(dis_params, arch, g, d, fake, tape)
                score_r = discriminator_forward(dis_params, arch, g, d, tape.constant(entry.layout.positions), tape)
            except AdvLayoutError as e:
                self.logger.warning(f"⚠️ Skipping {sample.graph_id} in minibatch: {e}")
                continue
            loss = rgan_g_loss(score_r, score_f) if train_generator else rgan_d_loss(score_r, score_f)
            losses.append(loss)
        if not losses:
            return None
        mean_loss = _tensor_mean(losses)
        if not math.isfinite(mean_loss.item()):
            phase = "generator" if train_generator else "discriminator"
            raise NonFiniteLoss(f"non-finite {phase} loss at epoch {state.epoch + 1}")

        grads = tape.backward(mean_loss)
        net = state.generator if train_generator else state.discriminator
        opt = state.gen_opt if train_generator else state.dis_opt
        net.params = adamw_step(net.params, {name: grads[t] for name, t in bound.items()}, opt)
        return mean_loss

    def train_epoch(
        self,
        state: ModelState,
        collection: LayoutCollection,
        dataset: Sequence[GraphSample],
    ) -> EpochStats:
        """
        One epoch: k discriminator steps, then k generator steps, then one LR
        decay. On failure the pre-epoch parameters are restored.
        """
        missing = collection.covers(sample.graph_id for sample in dataset)
        if missing:
            raise ValidationError(f"collection does not cover {len(missing)} graph(s), e.g. {missing[0]}")
        epoch = state.epoch + 1
        k = self.cfg.steps_per_phase(len(dataset))
        rng = make_rng(derive_seed(self.cfg.seed, f"epoch{epoch}"))
        d_batches = minibatches(rng.permutation(len(dataset)), self.cfg.minibatch_size, k)
        g_batches = minibatches(rng.permutation(len(dataset)), self.cfg.minibatch_size, k)

        snapshot = state.copy()
        d_losses: List[float] = []
        g_losses: List[float] = []
        try:
            for batch in d_batches:
                loss = self._phase_loss(state, collection, [dataset[i] for i in batch], train_generator=False)
                if loss is not None:
                    d_losses.append(loss.item())
            for batch in g_batches:
                loss = self._phase_loss(state, collection, [dataset[i] for i in batch], train_generator=True)
                if loss is not None:
                    g_losses.append(loss.item())
        except AdvLayoutError:
            state.generator.params = snapshot.generator.params
            state.discriminator.params = snapshot.discriminator.params
            state.gen_opt = snapshot.gen_opt
            state.dis_opt = snapshot.dis_opt
            raise

        state.gen_opt.decay_lr()
        state.dis_opt.decay_lr()
        state.epoch = epoch
        return EpochStats(_mean(d_losses), _mean(g_losses), d_losses, g_losses)

    def self_challenge_update(
        self,
        collection: LayoutCollection,
        state: ModelState,
        dataset: Sequence[GraphSample],
        spec: Optional[CriterionSpec] = None,
        replace: bool = True,
    ) -> _ChallengeOutcome:
        """
        Generate a layout per graph and offer it to the collection. Only strictly
        better layouts replace the stored example. With ``replace`` false the
        generated values are measured but the collection is left alone.
        """
        spec = spec or collection.spec
        provenance = f"generator@epoch {state.epoch}"
        replacements = 0
        generated: Dict[str, float] = {}
        failures: Dict[str, str] = {}
        for sample in dataset:
            entry = collection.get(sample.graph_id)
            try:
                layout = generate(state.generator, sample.graph, sample.distances, sample.init)
                value = evaluate(spec, layout, sample.graph, sample.distances, init=sample.init,
                                 scales=(entry.value.scales or None) if entry else None)
            except AdvLayoutError as e:
                self.logger.warning(f"⚠️ Generation failed for {sample.graph_id}: {e}")
                failures[sample.graph_id] = str(e)
                collection.record_failure(sample.graph_id, provenance, str(e))
                continue
            generated[sample.graph_id] = value.value
            if replace and collection.offer(sample.graph_id, layout, value, provenance):
                replacements += 1
        return _ChallengeOutcome(replacements, generated, failures)

    def bootstrap_collection(
        self,
        state: ModelState,
        dataset: Sequence[GraphSample],
        spec: CriterionSpec,
    ) -> LayoutCollection:
        """Initial good examples produced by the untrained generator itself."""
        collection = LayoutCollection(spec, self.logger)
        for sample in dataset:
            try:
                layout = generate(state.generator, sample.graph, sample.distances, sample.init)
                provenance = f"generator@epoch {state.epoch}"
                value = evaluate(spec, layout, sample.graph, sample.distances, init=sample.init)
            except AdvLayoutError as e:
                self.logger.warning(f"⚠️ Bootstrap generation failed for {sample.graph_id}, using init: {e}")
                layout, provenance = sample.init, "init"
                value = evaluate(spec, layout, sample.graph, sample.distances, init=sample.init)
            collection.put(sample.graph_id, layout, value, provenance)
        return collection

    def _history_row(
        self,
        state: ModelState,
        collection: LayoutCollection,
        outcome: _ChallengeOutcome,
        stats: Optional[EpochStats],
    ) -> Dict[str, Any]:
        return {
            "epoch": state.epoch,
            "d_loss": _finite_or_none(stats.d_loss) if stats else None,
            "g_loss": _finite_or_none(stats.g_loss) if stats else None,
            "mean_collection_value": _finite_or_none(collection.mean_value()),
            "mean_generated_value": _finite_or_none(outcome.mean_generated_value),
            "replacements": outcome.replacements,
            "lr": state.gen_opt.lr,
            "collection_values": collection.values(),
        }

    def save(self, state: ModelState, collection: LayoutCollection, checkpoint_dir: str) -> None:
        save_checkpoint(state, os.path.join(checkpoint_dir, CHECKPOINT_FILE))
        write_history_csv(state.history, os.path.join(checkpoint_dir, HISTORY_FILE))
        collection.save(os.path.join(checkpoint_dir, COLLECTION_FILE))

    def train(
        self,
        dataset: Sequence[GraphSample],
        arch: Optional[ArchConfig] = None,
        collection: Optional[LayoutCollection] = None,
        state: Optional[ModelState] = None,
        checkpoint_dir: Optional[str] = None,
    ) -> TrainResult:
        """
        Full training loop. The input collection is copied, never mutated.

        Args:
            arch: network sizes for a fresh model (ignored when ``state`` is given)
            collection: good layouts to start from; required when resuming, and
                unless bootstrap is "self" for a fresh model
            state: model to resume from
            checkpoint_dir: where checkpoint, history CSV and collection are written
        """
        cfg = self.cfg
        dataset = list(dataset)
        if not dataset:
            raise ArgumentError("training dataset is empty")
        resuming = state is not None
        if state is None:
            state = ModelState.initial(arch or ArchConfig(), cfg.seed, cfg.lr, cfg.lr_decay, cfg.weight_decay)
        state.train_config = cfg.to_dict()

        if collection is None and cfg.bootstrap == BOOTSTRAP_SELF and not resuming:
            collection = self.bootstrap_collection(state, dataset, cfg.criterion)
            self.logger.info(f"🔄 Bootstrapped collection from the generator for {len(collection)} graphs")
        elif collection is None:
            if resuming:
                raise ArgumentError("resuming needs the collection saved with the checkpoint")
            raise ArgumentError("bootstrap 'collection' needs an initial collection")
        else:
            missing = collection.covers(sample.graph_id for sample in dataset)
            if missing:
                raise ValidationError(f"collection does not cover {len(missing)} graph(s), e.g. {missing[0]}")
            collection = collection.copy()

        if not state.history:
            outcome = self.self_challenge_update(collection, state, dataset, cfg.criterion, replace=False)
            state.history.append(self._history_row(state, collection, outcome, None))

        for _ in range(cfg.epochs):
            try:
                stats = self.train_epoch(state, collection, dataset)
            except AdvLayoutError as e:
                self.logger.error(f"❌ Epoch {state.epoch + 1} failed: {e}")
                if checkpoint_dir:
                    self.save(state, collection, checkpoint_dir)
                raise
            outcome = self.self_challenge_update(collection, state, dataset, cfg.criterion,
                                                 replace=cfg.self_challenge)
            row = self._history_row(state, collection, outcome, stats)
            state.history.append(row)
            self.logger.info(
                f"🔄 Epoch {state.epoch}: d_loss={stats.d_loss:.4f} g_loss={stats.g_loss:.4f} "
                f"collection={collection.mean_value():.4f} generated={outcome.mean_generated_value:.4f} "
                f"replacements={outcome.replacements}")
            if checkpoint_dir and state.epoch % cfg.checkpoint_every == 0:
                self.save(state, collection, checkpoint_dir)
                self.logger.info(f"💾 Checkpoint saved at epoch {state.epoch}")

        if checkpoint_dir:
            self.save(state, collection, checkpoint_dir)
        self.logger.info(f"✅ Training finished at epoch {state.epoch}")
        return TrainResult(state, collection, state.history)
