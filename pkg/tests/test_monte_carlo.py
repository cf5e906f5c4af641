import itertools
import math

import numpy as np
import pytest

from dimer_model import BoundaryCondition, DimerConfig, ModelParams, energy_delta, validate
from exact_enumeration import ConfigEnsemble
from lattice import EdgeId, Rect
from model_errors import GeometryError, ModelError
from monte_carlo import (ChainSpec, autocorrelation, block_horizontal_density, integrated_autocorr_time,
                         kernel_energy_delta, make_rng, run, run_chains, sample_pairs, sample_pairs_spaced,
                         snapshot_spacing, transition_probability)

balance_rtol = 1e-12


def _spec(size=4, sweeps=50, **kw):
    kw.setdefault("burn_in", 10)
    kw.setdefault("measure_every", 1)
    return ChainSpec(Rect.anchored(0, 0, size, size), ModelParams(1.0, 0.0, 1.0), 17, sweeps, **kw)


def test_rng_streams_are_keyed_by_chain_index():
    a = make_rng(5, 0).random(4)
    assert np.array_equal(a, make_rng(5, 0).random(4))
    assert not np.array_equal(a, make_rng(5, 1).random(4))


@pytest.mark.parametrize("size", [2, 4])
def test_kernel_delta_matches_model_delta(size):
    torus = Rect.anchored(0, 0, size, size)
    p = ModelParams(1.3, 0.4, 0.9)
    cfg = DimerConfig.from_edges(torus, BoundaryCondition.periodic(), [EdgeId(0, 1)])
    for e in cfg.stored_edges():
        if not cfg.occupied(e) and not cfg.insertable(e):
            continue
        assert np.isclose(kernel_energy_delta(cfg, e, p), energy_delta(cfg, e, p), atol=1e-12)


def test_detailed_balance_on_smallest_torus():
    p = ModelParams(1.0, 0.0, 1.0)
    ensemble = ConfigEnsemble(Rect.anchored(0, 0, 2, 2), BoundaryCondition.periodic(), p)
    configs = list(ensemble.configs())
    checked = 0
    for i, j in itertools.combinations(range(len(configs)), 2):
        if int((ensemble.occ[i] != ensemble.occ[j]).sum()) != 1:
            assert transition_probability(configs[i], configs[j], p) == 0.0
            continue
        forward = math.exp(ensemble.log_w[i]) * transition_probability(configs[i], configs[j], p)
        backward = math.exp(ensemble.log_w[j]) * transition_probability(configs[j], configs[i], p)
        assert abs(forward - backward) <= balance_rtol * max(forward, backward)
        checked += 1
    assert checked > 0


def test_run_is_deterministic():
    spec = _spec()
    first, second = run(spec), run(spec)
    assert first.rows == second.rows
    assert first.final == second.final
    assert first.to_jsonl() == second.to_jsonl()


def test_run_preserves_hard_core_with_all_moves():
    spec = _spec(init="packed_vertical", p_pivot=0.3, p_slide=0.3, check_every=1)
    record = run(spec)
    assert validate(record.final)
    rates = record.acceptance
    assert set(rates) == {"flip", "pivot", "slide"}
    assert all(r is None or 0.0 <= r <= 1.0 for r in rates.values())


def test_measurement_rows_and_snapshots():
    spec = _spec(sweeps=20, burn_in=5, measure_every=2, snapshot_every=5, anneal=[(0.5, 4)])
    record = run(spec)
    phases = [row["phase"] for row in record.rows]
    assert phases.count("anneal") == 2
    assert phases.count("measure") == 10
    assert len(record.snapshots) == 4
    summary = record.summary()
    assert set(summary) == {"n_horizontal", "n_vertical", "n_vacancies", "n_broken", "energy", "rb_horizontal"}
    row = record.rows[-1]
    assert row["n_vacancies"] == 16 - 2 * (row["n_horizontal"] + row["n_vertical"])


def test_chain_spec_validation():
    with pytest.raises(ModelError):
        _spec(init="checkerboard")
    with pytest.raises(GeometryError):
        ChainSpec(Rect.anchored(0, 0, 3, 4), ModelParams(1.0, 0.0, 1.0), 1, 10, init="packed_vertical")
    with pytest.raises(ModelError):
        _spec(p_pivot=0.7, p_slide=0.5)


def test_run_chains_matches_serial_runs():
    specs = [_spec(sweeps=10, chain_index=k) for k in range(3)]
    records = run_chains(specs, threads=1)
    assert [r.spec.chain_index for r in records] == [0, 1, 2]
    assert records[1].rows == run(specs[1]).rows


def test_sample_pairs_shape():
    pairs = sample_pairs(_spec(sweeps=10), 2)
    assert len(pairs) == 2
    for sigma, sigma_prime in pairs:
        assert sigma.window == sigma_prime.window


def test_autocorrelation_helpers():
    assert np.allclose(autocorrelation(np.ones(10)), 0.0)
    rng = np.random.default_rng(0)
    white = rng.normal(size=4000)
    assert autocorrelation(white)[0] == pytest.approx(1.0)
    assert integrated_autocorr_time(white) < 2.0
    walk = np.cumsum(white)
    assert integrated_autocorr_time(walk) > 10.0


@pytest.mark.slow
def test_sampler_means_match_enumeration():
    p = ModelParams(1.0, 0.0, 1.0)
    torus = Rect.anchored(0, 0, 4, 4)
    ensemble = ConfigEnsemble(torus, BoundaryCondition.periodic(), p)
    exact_broken = ensemble.expectation(ensemble.n_broken)
    exact_dimers = ensemble.expectation(ensemble.occ.sum(axis=1))
    record = run(ChainSpec(torus, p, 2024, 200_000, burn_in=1000, measure_every=10))
    summary = record.summary()
    dimers = record.series("n_horizontal") + record.series("n_vertical")
    se = dimers.std(ddof=1) / math.sqrt(len(dimers) / integrated_autocorr_time(dimers))
    assert abs(dimers.mean() - exact_dimers) <= 3.0 * se
    assert abs(summary["n_broken"]["mean"] - exact_broken) <= 3.0 * summary["n_broken"]["stderr"]


@pytest.mark.slow
def test_pivot_and_slide_moves_keep_the_gibbs_measure():
    p = ModelParams(2.0, 0.0, 1.0)
    torus = Rect.anchored(0, 0, 4, 4)
    ensemble = ConfigEnsemble(torus, BoundaryCondition.periodic(), p)
    exact = {"dimers": ensemble.expectation(ensemble.occ.sum(axis=1)),
             "n_broken": ensemble.expectation(ensemble.n_broken)}
    record = run(ChainSpec(torus, p, 99, 200_000, burn_in=1000, measure_every=10, p_pivot=0.45, p_slide=0.45))
    rates = record.acceptance
    assert rates["pivot"] and rates["slide"]
    series = {"dimers": record.series("n_horizontal") + record.series("n_vertical"),
              "n_broken": record.series("n_broken")}
    for name, x in series.items():
        se = x.std(ddof=1) / math.sqrt(len(x) / integrated_autocorr_time(x))
        assert abs(x.mean() - exact[name]) <= 4.0 * se, name


def test_snapshot_spacing_and_spaced_pairs():
    with pytest.raises(ModelError):
        snapshot_spacing(run(_spec(sweeps=10, snapshot_every=5)))
    spec = _spec(sweeps=40, measure_every=2)
    pairs, spacings = sample_pairs_spaced(spec, 30)
    assert len(pairs) == 30 and all(s >= 1 for s in spacings)
    per_source = [len(range(0, 20, s)) for s in spacings]
    assert sum(per_source[:-1]) < 30 <= sum(per_source)
    first = run(spec.replace(snapshot_every=2, chain_index=0))
    second = run(spec.replace(snapshot_every=2, chain_index=1))
    assert spacings[0] == max(snapshot_spacing(first), snapshot_spacing(second))
    for k in range(min(per_source[0], 30)):
        sigma, sigma_prime = pairs[k]
        assert np.array_equal(sigma.occ_v, first.snapshots[k * spacings[0]].occ_v)
        assert np.array_equal(sigma_prime.occ_h, second.snapshots[k * spacings[0]].occ_h)


def test_block_horizontal_density_on_packed_torus():
    # aligned blocks reach an occupied edge two ways, shifted blocks one way, both at energy 4a
    cfg = DimerConfig.packed(Rect.anchored(0, 0, 8, 8), "vertical")
    values = [block_horizontal_density(cfg, ModelParams(beta, 0.0, 1.0)) for beta in (4.0, 5.0, 6.0)]
    for beta, value in zip((4.0, 5.0, 6.0), values):
        assert value == pytest.approx(1.5 * math.exp(-4.0 * beta), rel=1e-2)
    assert values[0] > values[1] > values[2] > 0.0
    assert cfg.dimer_count() == 32 and not cfg.occ_h.any()


@pytest.mark.slow
def test_block_horizontal_density_averages_to_horizontal_density():
    p = ModelParams(1.3, 0.4, 0.8)
    torus = Rect.anchored(0, 0, 4, 4)
    ensemble = ConfigEnsemble(torus, BoundaryCondition.periodic(), p)
    horizontal = [c for c, e in enumerate(ensemble.edges) if e.horizontal]
    exact = ensemble.expectation(ensemble.occ[:, horizontal].sum(axis=1)) / 16.0
    block = ensemble.expectation([block_horizontal_density(cfg, p) for cfg in ensemble.configs()])
    assert block == pytest.approx(exact, rel=1e-10)
