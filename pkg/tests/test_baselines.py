"""
Tests for the classical layout methods and collection building.
"""

import math
import sys

import numpy as np
import pytest

sys.path.insert(0, 'src')

from advlayout.baselines import (
    BASELINE_NAMES,
    LayoutMethod,
    baseline_method,
    build_collection,
    fruchterman_reingold,
    pivot_mds,
    random_layout,
    stress_sgd,
)
from advlayout.criteria import CriterionSpec, better_than, evaluate, stress
from advlayout.dataset import generate_graphs, prepare_dataset
from advlayout.errors import ArgumentError, DegenerateLayout
from advlayout.geometry import Layout
from advlayout.graph import (
    complete_graph,
    grid_graph,
    path_graph,
    random_graph,
    shortest_paths,
    star_graph,
)

STRESS_SPEC = CriterionSpec.single("stress")


def canonical_stress(x, g):
    return evaluate(STRESS_SPEC, x, g, shortest_paths(g)).value


def test_random_layout_is_seeded():
    g = path_graph(5)
    assert np.array_equal(random_layout(g, 3).positions, random_layout(g, 3).positions)
    assert not np.array_equal(random_layout(g, 3).positions, random_layout(g, 4).positions)


def test_pivot_mds_orders_a_path():
    g = path_graph(10)
    x = pivot_mds(g, shortest_paths(g), seed=1).positions
    steps = np.diff(x[:, 0])
    assert np.all(steps > 0) or np.all(steps < 0)


def test_pivot_mds_recovers_a_triangle():
    g = complete_graph(3)
    assert canonical_stress(pivot_mds(g, shortest_paths(g)), g) < 1e-6


def test_pivot_mds_beats_random_on_a_grid():
    g = grid_graph(6, 6)
    pmds = canonical_stress(pivot_mds(g, shortest_paths(g), seed=0), g)
    for seed in range(5):
        assert pmds < canonical_stress(random_layout(g, seed), g)


def test_pivot_mds_rejects_too_few_pivots():
    g = path_graph(4)
    with pytest.raises(ArgumentError):
        pivot_mds(g, shortest_paths(g), pivots=1)


def test_stress_sgd_straightens_a_path():
    g = path_graph(3)
    d = shortest_paths(g)
    x = stress_sgd(g, d, random_layout(g, 2), epochs=30, seed=2)
    assert stress(x, d) < 1e-2


def test_stress_sgd_keeps_an_ideal_triangle():
    g = complete_graph(3)
    ideal = Layout([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]])
    x = stress_sgd(g, shortest_paths(g), ideal, epochs=10)
    assert x.allclose(ideal, atol=1e-9)


def test_stress_sgd_reduces_stress():
    improvements = []
    for seed in range(10):
        g = random_graph(15, 0.3, seed=seed)
        d = shortest_paths(g)
        init = random_layout(g, seed)
        improvements.append(stress(init, d) - stress(stress_sgd(g, d, init, seed=seed), d))
    assert np.median(improvements) > 0
    assert all(i > 0 for i in improvements)


def test_stress_sgd_rejects_zero_epochs():
    g = path_graph(3)
    with pytest.raises(ArgumentError):
        stress_sgd(g, shortest_paths(g), random_layout(g), epochs=0)


def test_fruchterman_reingold_edge_length():
    g = path_graph(2)
    x = fruchterman_reingold(g, random_layout(g, 5), seed=5).positions
    assert np.linalg.norm(x[0] - x[1]) == pytest.approx(1.0, rel=0.1)


def test_fruchterman_reingold_balances_a_star():
    g = star_graph(4)
    x = fruchterman_reingold(g, random_layout(g, 1), iters=200, seed=1).positions
    spokes = np.linalg.norm(x[1:] - x[0], axis=1)
    assert np.all(np.abs(spokes - spokes.mean()) <= 0.15 * spokes.mean())


def test_fruchterman_reingold_is_finite_and_deterministic():
    g = random_graph(20, 0.35, seed=3)
    init = random_layout(g, 3)
    a = fruchterman_reingold(g, init, seed=3)
    b = fruchterman_reingold(g, init, seed=3)
    assert np.all(np.isfinite(a.positions))
    assert np.array_equal(a.positions, b.positions)


def test_baseline_methods_by_name():
    sample = prepare_dataset(generate_graphs(1, 6, 6, 0.2, seed=0))[0]
    for name in BASELINE_NAMES:
        method = baseline_method(name, seed=4)
        assert method.name == name
        assert method.produce(sample).node_count == 6
    with pytest.raises(ArgumentError):
        baseline_method("spring")


def test_build_collection_keeps_the_best_method():
    samples = prepare_dataset(generate_graphs(50, 6, 10, 0.3, seed=7), seed=7)
    methods = [baseline_method(name, seed=7, epochs=10, iters=30) for name in BASELINE_NAMES]
    collection = build_collection(samples, STRESS_SPEC, methods)
    assert len(collection) == len(samples)
    assert sum(collection.composition().values()) == pytest.approx(100.0)

    for sample in samples:
        values = {m.name: evaluate(STRESS_SPEC, m.produce(sample), sample.graph, sample.distances) for m in methods}
        best = None
        for name in BASELINE_NAMES:
            if best is None or better_than(values[name], values[best]):
                best = name
        entry = collection.get(sample.graph_id)
        assert entry.provenance == best
        assert entry.value.value == values[best].value
        assert not any(better_than(value, entry.value) for value in values.values())


def test_build_collection_records_failures():
    samples = prepare_dataset(generate_graphs(3, 6, 8, 0.3, seed=1), seed=1)

    def broken(sample):
        raise DegenerateLayout("all nodes coincide")

    collection = build_collection(samples, STRESS_SPEC, [LayoutMethod("broken", broken), baseline_method("random")])
    assert collection.composition() == {"random": 100.0}
    assert set(collection.failures) == {s.graph_id for s in samples}
    assert all("broken" in f for f in collection.failures.values())
    with pytest.raises(ArgumentError):
        build_collection(samples, STRESS_SPEC, [])
