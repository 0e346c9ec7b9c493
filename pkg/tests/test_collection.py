"""
Tests for the good-layout collection and its manifest files.
"""

import json
import os
import sys
import tempfile

import numpy as np
import pytest

sys.path.insert(0, 'src')

from advlayout.baselines import baseline_method, build_collection
from advlayout.collection import LayoutCollection
from advlayout.criteria import CriterionSpec, CriterionValue
from advlayout.dataset import generate_graphs, prepare_dataset
from advlayout.errors import ParseError, ValidationError
from advlayout.geometry import Layout, save_layout

SPEC = CriterionSpec.single("stress")


def layout(n=3, offset=0.0):
    return Layout(np.arange(2 * n, dtype=float).reshape(n, 2) + offset)


@pytest.fixture
def samples():
    return prepare_dataset(generate_graphs(3, 6, 8, 0.3, seed=2), seed=2)


def test_offer_requires_strict_improvement():
    collection = LayoutCollection(SPEC)
    assert collection.offer("g", layout(), CriterionValue(2.0, stress=2.0), "a")
    assert not collection.offer("g", layout(), CriterionValue(3.0, stress=0.0), "b")
    assert not collection.offer("g", layout(), CriterionValue(2.0, stress=2.0), "c")
    assert collection.offer("g", layout(), CriterionValue(2.0, stress=1.0), "d")
    assert collection.offer("g", layout(), CriterionValue(1.0, stress=5.0), "e")
    assert collection.get("g").provenance == "e"
    assert collection.values() == {"g": 1.0}


def test_composition_and_coverage():
    collection = LayoutCollection(SPEC)
    for gid, source in (("a", "pmds"), ("b", "pmds"), ("c", "fr"), ("d", "pmds")):
        collection.put(gid, layout(), CriterionValue(1.0), source)
    assert collection.composition() == {"fr": 25.0, "pmds": 75.0}
    assert collection.covers(["a", "x", "c", "y"]) == ["x", "y"]
    assert list(collection) == ["a", "b", "c", "d"]
    assert "a" in collection and "x" not in collection
    assert collection.mean_value() == 1.0


def test_copy_is_independent():
    collection = LayoutCollection(SPEC)
    collection.put("a", layout(), CriterionValue(1.0), "pmds")
    clone = collection.copy()
    clone.offer("a", layout(), CriterionValue(0.5), "generator")
    clone.record_failure("b", "fr", "boom")
    assert collection.get("a").provenance == "pmds"
    assert not collection.failures


def test_save_load_and_verify(samples):
    collection = build_collection(samples, SPEC, [baseline_method("pmds"), baseline_method("random")])
    collection.record_failure("g0000", "fr", "diverged")
    with tempfile.TemporaryDirectory() as temp_dir:
        path = os.path.join(temp_dir, "collection.json")
        collection.save(path)
        assert len(os.listdir(os.path.join(temp_dir, "layouts"))) == len(samples)

        loaded = LayoutCollection.load(path, samples)
        assert loaded.values() == collection.values()
        assert loaded.composition() == collection.composition()
        assert loaded.failures == {"g0000": {"fr": "diverged"}}
        for gid in collection:
            assert np.array_equal(loaded.get(gid).layout.positions, collection.get(gid).layout.positions)
            assert loaded.get(gid).stress == collection.get(gid).stress

        with open(path) as f:
            manifest = json.load(f)
        assert manifest["criterion"] == SPEC.to_dict()
        assert manifest["entries"]["g0000"]["layout"] == os.path.join("layouts", "g0000.txt")


def test_tampered_layout_fails_verification(samples):
    collection = build_collection(samples, SPEC, [baseline_method("pmds")])
    with tempfile.TemporaryDirectory() as temp_dir:
        path = os.path.join(temp_dir, "collection.json")
        collection.save(path)
        entry = collection.get("g0001")
        save_layout(Layout(entry.layout.positions * np.array([3.0, 1.0])), os.path.join(temp_dir, "layouts", "g0001.txt"))
        LayoutCollection.load(path)
        with pytest.raises(ValidationError):
            LayoutCollection.load(path, samples)


def test_verify_rejects_wrong_node_count(samples):
    collection = LayoutCollection(SPEC)
    collection.put(samples[0].graph_id, layout(n=samples[0].node_count + 1), CriterionValue(0.0), "x")
    with pytest.raises(ValidationError):
        collection.verify(samples)


def test_malformed_manifests():
    with tempfile.TemporaryDirectory() as temp_dir:
        path = os.path.join(temp_dir, "collection.json")
        with pytest.raises(ParseError):
            LayoutCollection.load(path)

        with open(path, 'w') as f:
            f.write("[1, 2")
        with pytest.raises(ParseError):
            LayoutCollection.load(path)

        with open(path, 'w') as f:
            json.dump({"version": 1, "entries": {}}, f)
        with pytest.raises(ParseError):
            LayoutCollection.load(path)

        with open(path, 'w') as f:
            json.dump({"version": 1, "criterion": SPEC.to_dict(), "entries": {"g": {"layout": "missing.txt"}}}, f)
        with pytest.raises(ParseError):
            LayoutCollection.load(path)
