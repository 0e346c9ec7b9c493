"""
Tests for the relativistic losses, training epochs and self-challenge updates.
"""

import csv
import math
import os
import sys
import tempfile
from unittest.mock import patch

import numpy as np
import pytest

sys.path.insert(0, 'src')

from advlayout import autodiff as ad
from advlayout.autodiff import Tape
from advlayout.baselines import baseline_method, build_collection
from advlayout.criteria import CriterionSpec, CriterionValue, evaluate
from advlayout.dataset import generate_graphs, prepare_dataset
from advlayout.errors import ArgumentError, NonFiniteLoss, ValidationError
from advlayout.neural import ArchConfig, ModelState, checkpoint_text, generate, load_checkpoint
from advlayout.trainer import (
    BOOTSTRAP_SELF,
    CHECKPOINT_FILE,
    COLLECTION_FILE,
    HISTORY_COLUMNS,
    HISTORY_FILE,
    TrainConfig,
    Trainer,
    minibatches,
    rgan_d_loss,
    rgan_g_loss,
)

TINY = ArchConfig(gen_layers=2, gen_dim=4, dis_layers=1, dis_dim=4)
STRESS_SPEC = CriterionSpec.single("stress")


@pytest.fixture
def samples():
    return prepare_dataset(generate_graphs(4, 6, 8, 0.3, seed=1), seed=1)


@pytest.fixture
def collection(samples):
    return build_collection(samples, STRESS_SPEC, [baseline_method("random", seed=1)])


def params_equal(a, b):
    return all(np.array_equal(a[name], b[name]) for name in a)


def test_losses_at_equal_scores():
    assert rgan_d_loss(0.0, 0.0) == pytest.approx(math.log(2.0))
    assert rgan_g_loss(0.0, 0.0) == pytest.approx(math.log(2.0))


def test_losses_match_direct_formula():
    assert rgan_d_loss(20.0, 0.0) == pytest.approx(math.log1p(math.exp(-20.0)), rel=1e-9)
    rng = np.random.default_rng(0)
    for r, f in rng.uniform(-5, 5, size=(50, 2)):
        direct = -math.log(1.0 / (1.0 + math.exp(-(r - f))))
        assert rgan_d_loss(r, f) == pytest.approx(direct, abs=1e-12)
        assert rgan_g_loss(r, f) == rgan_d_loss(f, r)


def test_losses_are_stable_for_large_scores():
    assert rgan_d_loss(1e4, -1e4) == pytest.approx(0.0, abs=1e-300)
    assert rgan_d_loss(-1e4, 1e4) == pytest.approx(2e4)
    assert math.isfinite(rgan_g_loss(1e4, -1e4))


def test_loss_gradient_on_tape():
    tape = Tape()
    r = tape.variable(np.array([[0.3]]))
    f = tape.variable(np.array([[-0.4]]))
    loss = rgan_d_loss(r, f)
    grads = tape.backward(loss)
    sigma = 1.0 / (1.0 + math.exp(-(f.item() - r.item())))
    assert loss.item() == pytest.approx(rgan_d_loss(0.3, -0.4))
    assert grads[r][0, 0] == pytest.approx(-sigma)
    assert grads[f][0, 0] == pytest.approx(sigma)


def test_minibatches_cycle():
    assert minibatches(np.array([2, 0, 1]), 2, 3) == [[2, 0], [1, 2], [0, 1]]
    assert minibatches(np.array([1, 0]), 5, 1) == [[1, 0]]
    assert minibatches(np.array([], dtype=int), 2, 3) == []


def test_train_config_validation():
    assert TrainConfig(minibatch_size=4).steps_per_phase(10) == 3
    assert TrainConfig(d_steps_per_epoch=7).steps_per_phase(10) == 7
    for bad in ({"epochs": -1}, {"minibatch_size": 0}, {"lr_decay": 1.5}, {"weight_decay": 0.0},
                {"lr": 0.0}, {"bootstrap": "external"}, {"replacement": "always"}, {"init": "spectral"},
                {"checkpoint_every": 0}):
        with pytest.raises(ValidationError):
            TrainConfig(**bad)
    with pytest.raises(ValidationError):
        TrainConfig.from_dict({"epochs": 3, "momentum": 0.9})


def test_train_config_dict_round_trip():
    cfg = TrainConfig(epochs=3, seed=9, criterion=CriterionSpec.combined(), bootstrap=BOOTSTRAP_SELF)
    restored = TrainConfig.from_dict(cfg.to_dict())
    assert restored == cfg


def test_epoch_without_steps_only_decays_learning_rate(samples, collection):
    trainer = Trainer(TrainConfig(d_steps_per_epoch=0, lr_decay=0.5))
    state = ModelState.initial(TINY, seed=0, lr=0.01, lr_decay=0.5)
    before = state.copy()
    trainer.train_epoch(state, collection, samples)
    assert params_equal(state.generator.params, before.generator.params)
    assert params_equal(state.discriminator.params, before.discriminator.params)
    assert state.gen_opt.lr == pytest.approx(0.005)
    assert state.epoch == 1


def test_phases_freeze_the_other_network(samples, collection):
    trainer = Trainer(TrainConfig(minibatch_size=2))
    state = ModelState.initial(TINY, seed=0)
    before = state.copy()

    trainer._phase_loss(state, collection, samples[:2], train_generator=False)
    assert params_equal(state.generator.params, before.generator.params)
    assert not params_equal(state.discriminator.params, before.discriminator.params)
    assert state.gen_opt.step == 0 and state.dis_opt.step == 1

    after_d = state.copy()
    trainer._phase_loss(state, collection, samples[:2], train_generator=True)
    assert params_equal(state.discriminator.params, after_d.discriminator.params)
    assert not params_equal(state.generator.params, after_d.generator.params)


def test_train_epoch_is_deterministic(samples, collection):
    trainer = Trainer(TrainConfig(minibatch_size=2, seed=3))
    a = ModelState.initial(TINY, seed=3)
    b = ModelState.initial(TINY, seed=3)
    stats_a = trainer.train_epoch(a, collection, samples)
    stats_b = trainer.train_epoch(b, collection, samples)
    assert stats_a.d_losses == stats_b.d_losses
    assert stats_a.g_losses == stats_b.g_losses
    assert len(stats_a.d_losses) == 2
    assert checkpoint_text(a) == checkpoint_text(b)


def test_non_finite_loss_restores_parameters(samples, collection):
    trainer = Trainer(TrainConfig(minibatch_size=2))
    state = ModelState.initial(TINY, seed=0)
    before = state.copy()

    def nan_loss(score_r, score_f):
        return ad.scalar_mul(ad.sub(score_f, score_r), float('nan'))

    with patch('advlayout.trainer.rgan_g_loss', nan_loss):
        with pytest.raises(NonFiniteLoss):
            trainer.train_epoch(state, collection, samples)
    assert params_equal(state.generator.params, before.generator.params)
    assert params_equal(state.discriminator.params, before.discriminator.params)
    assert state.dis_opt.step == 0
    assert state.epoch == 0


def test_train_epoch_needs_full_collection(samples, collection):
    partial = collection.copy()
    del partial.entries[samples[0].graph_id]
    with pytest.raises(ValidationError):
        Trainer(TrainConfig()).train_epoch(ModelState.initial(TINY, 0), partial, samples)


def test_self_challenge_never_replaces_better_entries(samples, collection):
    trainer = Trainer(TrainConfig())
    state = ModelState.initial(TINY, seed=0)
    unbeatable = collection.copy()
    for gid in unbeatable:
        entry = unbeatable.get(gid)
        unbeatable.put(gid, entry.layout, CriterionValue(-1.0, stress=-1.0), "oracle")
    outcome = trainer.self_challenge_update(unbeatable, state, samples)
    assert outcome.replacements == 0
    assert set(unbeatable.composition()) == {"oracle"}
    assert len(outcome.generated) == len(samples)


def test_self_challenge_replaces_worse_entries(samples, collection):
    trainer = Trainer(TrainConfig())
    state = ModelState.initial(TINY, seed=0)
    beatable = collection.copy()
    for gid in beatable:
        entry = beatable.get(gid)
        beatable.put(gid, entry.layout, CriterionValue(1e9, stress=1e9), "placeholder")
    outcome = trainer.self_challenge_update(beatable, state, samples)
    assert outcome.replacements == len(samples)
    assert beatable.composition() == {"generator@epoch 0": 100.0}
    for sample in samples:
        assert beatable.get(sample.graph_id).value.value == outcome.generated[sample.graph_id]


def test_self_challenge_tie_keeps_incumbent(samples):
    trainer = Trainer(TrainConfig())
    state = ModelState.initial(TINY, seed=0)
    tied = build_collection(samples, STRESS_SPEC, [baseline_method("random", seed=2)])
    for sample in samples:
        layout = generate(state.generator, sample.graph, sample.distances, sample.init)
        tied.put(sample.graph_id, layout, evaluate(STRESS_SPEC, layout, sample.graph, sample.distances), "earlier")
    outcome = trainer.self_challenge_update(tied, state, samples)
    assert outcome.replacements == 0
    assert tied.composition() == {"earlier": 100.0}


def test_train_with_zero_epochs(samples, collection):
    result = Trainer(TrainConfig(epochs=0)).train(samples, arch=TINY, collection=collection)
    assert len(result.history) == 1
    assert result.history[0]["epoch"] == 0
    assert result.history[0]["replacements"] == 0
    assert result.collection.values() == collection.values()


def test_training_keeps_collection_monotone(samples, collection):
    original = collection.values()
    result = Trainer(TrainConfig(epochs=5, minibatch_size=2, seed=4, lr=0.01)).train(
        samples, arch=TINY, collection=collection)
    assert [row["epoch"] for row in result.history] == [0, 1, 2, 3, 4, 5]
    for earlier, later in zip(result.history, result.history[1:]):
        for gid, value in later["collection_values"].items():
            assert value <= earlier["collection_values"][gid]
    assert collection.values() == original
    assert result.state.epoch == 5


def test_training_is_deterministic(samples, collection):
    cfg = TrainConfig(epochs=2, minibatch_size=2, seed=6)
    a = Trainer(cfg).train(samples, arch=TINY, collection=collection)
    b = Trainer(cfg).train(samples, arch=TINY, collection=collection)
    assert checkpoint_text(a.state) == checkpoint_text(b.state)
    assert a.collection.values() == b.collection.values()


def test_training_writes_checkpoint_files(samples, collection):
    with tempfile.TemporaryDirectory() as temp_dir:
        cfg = TrainConfig(epochs=2, minibatch_size=2, checkpoint_every=1, seed=1)
        result = Trainer(cfg).train(samples, arch=TINY, collection=collection, checkpoint_dir=temp_dir)
        for name in (CHECKPOINT_FILE, HISTORY_FILE, COLLECTION_FILE):
            assert os.path.exists(os.path.join(temp_dir, name))

        with open(os.path.join(temp_dir, HISTORY_FILE)) as f:
            rows = list(csv.reader(f))
        assert tuple(rows[0]) == HISTORY_COLUMNS
        assert len(rows) == 4
        assert rows[1][1] == ""

        loaded = load_checkpoint(os.path.join(temp_dir, CHECKPOINT_FILE))
        assert loaded.epoch == 2
        assert loaded.train_config["seed"] == 1
        assert checkpoint_text(loaded) == checkpoint_text(result.state)


def test_resume_continues_history(samples, collection):
    first = Trainer(TrainConfig(epochs=1, minibatch_size=2)).train(samples, arch=TINY, collection=collection)
    resumed = Trainer(TrainConfig(epochs=1, minibatch_size=2)).train(
        samples, collection=first.collection, state=first.state)
    assert [row["epoch"] for row in resumed.history] == [0, 1, 2]


def test_resume_after_self_bootstrap_keeps_collection(samples):
    cfg = TrainConfig(epochs=3, minibatch_size=2, seed=2, lr=0.01, bootstrap=BOOTSTRAP_SELF)
    first = Trainer(cfg).train(samples, arch=TINY)
    before = first.collection.values()

    resumed = Trainer(TrainConfig(epochs=1, minibatch_size=2, seed=2, lr=0.01, bootstrap=BOOTSTRAP_SELF)).train(
        samples, collection=first.collection, state=first.state)
    assert set(resumed.collection.values()) == set(before)
    for gid, value in resumed.collection.values().items():
        assert value <= before[gid]
    assert first.collection.values() == before


def test_resume_without_collection_is_rejected(samples, collection):
    first = Trainer(TrainConfig(epochs=1, minibatch_size=2)).train(samples, arch=TINY, collection=collection)
    with pytest.raises(ArgumentError):
        Trainer(TrainConfig(epochs=1, bootstrap=BOOTSTRAP_SELF)).train(samples, state=first.state)


def test_bootstrap_self_needs_no_collection(samples):
    result = Trainer(TrainConfig(epochs=1, minibatch_size=2, bootstrap=BOOTSTRAP_SELF)).train(samples, arch=TINY)
    assert len(result.collection) == len(samples)
    assert result.history[0]["mean_collection_value"] == pytest.approx(result.history[0]["mean_generated_value"])


def test_train_argument_errors(samples):
    with pytest.raises(ArgumentError):
        Trainer(TrainConfig(epochs=1)).train(samples, arch=TINY)
    with pytest.raises(ArgumentError):
        Trainer(TrainConfig(epochs=1, bootstrap=BOOTSTRAP_SELF)).train([], arch=TINY)
