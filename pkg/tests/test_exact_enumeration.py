import math
from functools import lru_cache

import numpy as np
import pytest

from dimer_model import BoundaryCondition, DimerConfig, ModelParams, log_weight, validate
from exact_enumeration import (ConfigEnsemble, EventPredicate, LocalObservable, chessboard_check,
                               chessboard_seminorm, count_configs, enumerate_configs, expectation,
                               partition_function, rp_check, split_prefixes)
from lattice import EdgeId, Isometry, Rect, block_transforms
from model_errors import GeometryError, GuardrailError

rp_tol = 1e-10
cb_rtol = 1e-10


def test_counts_on_small_windows():
    assert count_configs(Rect.anchored(0, 0, 2, 2), BoundaryCondition.vacant()) == 7
    assert count_configs(Rect.anchored(0, 0, 2, 2), BoundaryCondition.periodic()) == 17
    assert count_configs(Rect.anchored(0, 0, 3, 1), BoundaryCondition.vacant()) == 3


def _matching_count(W, H):
    """Matchings of the W x H torus graph by removing the lowest free vertex"""
    n = W * H
    neighbours = [set() for _ in range(n)]
    for x in range(W):
        for y in range(H):
            v = x * H + y
            for u in (((x + 1) % W) * H + y, x * H + (y + 1) % H):
                neighbours[v].add(u)
                neighbours[u].add(v)

    @lru_cache(maxsize=None)
    def count(free):
        if not free:
            return 1
        v = (free & -free).bit_length() - 1
        rest = free & ~(1 << v)
        total = count(rest)
        for u in neighbours[v]:
            if rest >> u & 1:
                total += count(rest & ~(1 << u))
        return total

    return count((1 << n) - 1)


def test_torus_count_matches_matching_recursion():
    expected = _matching_count(4, 4)
    assert expected == 41025
    assert count_configs(Rect.anchored(0, 0, 4, 4), BoundaryCondition.periodic()) == expected


def test_enumeration_yields_distinct_valid_configs():
    window = Rect.anchored(0, 0, 3, 2)
    configs = list(enumerate_configs(window, BoundaryCondition.vacant()))
    assert len(configs) == len(set(configs))
    assert all(validate(cfg) for cfg in configs)


def test_partition_function_matches_direct_sum():
    window = Rect.anchored(0, 0, 3, 2)
    bc = BoundaryCondition.vacant()
    p = ModelParams(1.3, 0.2, 0.8)
    direct = math.fsum(math.exp(log_weight(cfg, window, p)) for cfg in enumerate_configs(window, bc))
    assert np.isclose(partition_function(window, bc, p), direct, rtol=1e-12)


def test_split_prefixes_partition_the_tree():
    window = Rect.anchored(0, 0, 3, 3)
    bc = BoundaryCondition.vacant()
    p = ModelParams(1.0, 0.0, 1.0)
    parts = [ConfigEnsemble(window, bc, p, prefix) for prefix in split_prefixes(window, bc, 3)]
    assert sum(len(e) for e in parts) == count_configs(window, bc)
    total = math.fsum(e.partition_function() for e in parts)
    assert np.isclose(total, partition_function(window, bc, p), rtol=1e-12)


def test_parallel_partition_function_agrees():
    window = Rect.anchored(0, 0, 3, 3)
    bc = BoundaryCondition.vacant()
    p = ModelParams(1.0, 0.0, 1.0)
    assert np.isclose(partition_function(window, bc, p, workers=2, depth=3),
                      partition_function(window, bc, p), rtol=1e-12)


def test_constraint_restricts_the_sum():
    torus = Rect.anchored(0, 0, 2, 2)
    bc = BoundaryCondition.periodic()
    p = ModelParams(1.0, 0.0, 1.0)
    empty_only = partition_function(torus, bc, p, constraint=lambda cfg: cfg.dimer_count() == 0)
    assert np.isclose(empty_only, math.exp(4 * p.log_vacancy_weight))
    R = Rect.anchored(0, 0, 1, 1)
    full = EventPredicate.full(R)
    assert np.isclose(partition_function(torus, bc, p, constraint=full), partition_function(torus, bc, p))


def test_guardrail_on_large_windows():
    with pytest.raises(GuardrailError):
        ConfigEnsemble(Rect.anchored(0, 0, 6, 6), BoundaryCondition.periodic(), ModelParams(1.0, 0.0, 1.0))


def test_ensemble_expectation_matches_callable_expectation():
    torus = Rect.anchored(0, 0, 2, 4)
    bc = BoundaryCondition.periodic()
    p = ModelParams(1.0, 0.0, 1.0)
    ensemble = ConfigEnsemble(torus, bc, p)
    direct = expectation(torus, bc, p, lambda cfg: cfg.dimer_count())
    assert np.isclose(ensemble.expectation(ensemble.occ.sum(axis=1)), direct, rtol=1e-12)
    assert np.isclose(ensemble.probabilities().sum(), 1.0)


def test_local_observable_from_function():
    R = Rect.anchored(0, 0, 1, 1)
    f = LocalObservable.from_function(R, lambda pat: 1.0 if pat.vacant(next(iter(R.vertices()))) else -1.0)
    assert len(f.table) == 1 << len(R.edges())
    assert f.table[0] == 1.0


def test_local_observable_must_stay_in_its_rectangle():
    R = Rect.anchored(0, 0, 2, 1)
    with pytest.raises(GeometryError):
        LocalObservable.from_function(R, lambda pat: float(pat.occupied(EdgeId(5, 0))))
    with pytest.raises(GeometryError):
        EventPredicate.from_function(R, lambda pat: pat.vacant(EdgeId(1, 4).endpoints()[0]))


def test_local_observable_ignores_edges_outside_its_rectangle():
    R = Rect.anchored(0, 0, 2, 1)
    rng = np.random.default_rng(3)
    f = LocalObservable(R, rng.normal(size=1 << len(R.edges())))
    torus = Rect.anchored(0, 0, 4, 4)
    cfg = DimerConfig.from_edges(torus, BoundaryCondition.periodic(), [EdgeId(0, 1)])
    before = f.evaluate(cfg)
    for e in (EdgeId(1, 4), EdgeId(5, 2), EdgeId(6, 5)):
        cfg.set_edge(e, True)
    assert f.evaluate(cfg) == before


@pytest.mark.parametrize("torus, tau", [
    (Rect.anchored(0, 0, 4, 2), Isometry.reflection_x(3)),
    (Rect.anchored(0, 0, 2, 4), Isometry.reflection_y(3)),
])
def test_reflection_positivity(torus, tau):
    rng = np.random.default_rng(3)
    R = Rect.anchored(0, 0, 2, 2)
    p = ModelParams(1.0, 0.0, 1.0)
    ensemble = ConfigEnsemble(torus, BoundaryCondition.periodic(), p)
    for _ in range(20):
        f = LocalObservable(R, rng.choice([-1.0, 1.0], size=1 << len(R.edges())))
        assert rp_check(f, R, torus, tau, p, ensemble) >= -rp_tol


def test_rp_check_rejects_translations():
    R = Rect.anchored(0, 0, 2, 2)
    torus = Rect.anchored(0, 0, 4, 2)
    f = LocalObservable(R, np.ones(1 << len(R.edges())))
    with pytest.raises(GeometryError):
        rp_check(f, R, torus, Isometry.translation(2, 0), ModelParams(1.0, 0.0, 1.0))


def test_chessboard_estimate_k1():
    rng = np.random.default_rng(5)
    R = Rect.anchored(0, 0, 1, 1)
    torus = Rect.anchored(0, 0, 4, 4)
    p = ModelParams(1.0, 0.0, 1.0)
    ensemble = ConfigEnsemble(torus, BoundaryCondition.periodic(), p)
    group = block_transforms(R, torus)
    for _ in range(10):
        chosen = rng.choice(len(group), size=3, replace=False)
        events = {group[c]: EventPredicate(R, rng.random(1 << len(R.edges())) < 0.6) for c in chosen}
        lhs, rhs = chessboard_check(events, R, torus, p, 1, ensemble)
        assert lhs <= rhs * (1.0 + cb_rtol)


def test_chessboard_estimate_k2():
    rng = np.random.default_rng(9)
    R = Rect.anchored(0, 0, 1, 1)
    torus = Rect.anchored(0, 0, 2, 2)
    p = ModelParams(1.0, 0.0, 1.0)
    ensemble = ConfigEnsemble(torus, BoundaryCondition.periodic(), p)
    group = block_transforms(R, torus)
    for _ in range(5):
        events = {iso: EventPredicate(R, rng.random(1 << (2 * len(R.edges()))) < 0.6, k=2) for iso in group[:2]}
        lhs, rhs = chessboard_check(events, R, torus, p, 2, ensemble)
        assert lhs <= rhs * (1.0 + cb_rtol)


def test_seminorm_of_full_event_is_one():
    R = Rect.anchored(0, 0, 1, 1)
    torus = Rect.anchored(0, 0, 2, 2)
    value = chessboard_seminorm(EventPredicate.full(R), R, torus, ModelParams(1.0, 0.0, 1.0))
    assert np.isclose(value, 1.0)
