"""
Longer training runs; enabled with ADVLAYOUT_SLOW=1.
"""

import os
import sys

import pytest

sys.path.insert(0, 'src')

from advlayout.baselines import baseline_method, build_collection
from advlayout.criteria import CriterionSpec
from advlayout.dataset import generate_graphs, prepare_dataset
from advlayout.neural import ArchConfig
from advlayout.trainer import BOOTSTRAP_SELF, TrainConfig, Trainer

pytestmark = [
    pytest.mark.slow,
    pytest.mark.skipif(os.environ.get("ADVLAYOUT_SLOW") != "1", reason="set ADVLAYOUT_SLOW=1 to run"),
]

SPEC = CriterionSpec.single("stress")


def test_collection_stays_monotone_over_fifty_epochs():
    samples = prepare_dataset(generate_graphs(12, 8, 12, 0.35, seed=21), seed=21)
    collection = build_collection(samples, SPEC, [baseline_method("random", seed=21)])
    arch = ArchConfig(gen_layers=3, gen_dim=8, dis_layers=2, dis_dim=8)
    result = Trainer(TrainConfig(epochs=50, minibatch_size=4, seed=21, lr=0.005)).train(
        samples, arch=arch, collection=collection)
    for earlier, later in zip(result.history, result.history[1:]):
        for gid, value in later["collection_values"].items():
            assert value <= earlier["collection_values"][gid]
    assert result.history[-1]["mean_collection_value"] <= result.history[0]["mean_collection_value"]


def test_self_bootstrapped_training_improves_the_generator():
    samples = prepare_dataset(generate_graphs(30, 10, 20, 0.35, seed=0), seed=0)
    result = Trainer(TrainConfig(epochs=200, minibatch_size=16, seed=0, bootstrap=BOOTSTRAP_SELF)).train(
        samples, arch=ArchConfig())
    start = result.history[0]["mean_generated_value"]
    end = result.history[-1]["mean_generated_value"]
    assert end <= 0.9 * start
