import math

import pytest

from dimer_model import DimerConfig, ModelParams
from disagreement import (PairSample, SealScales, alpha1_fit, component_diameters, conditional_frequencies,
                          confinement_check, connection_stats, ddag_components, delta, line_components,
                          sealed, sealed_grid, spans_window)
from lattice import EdgeId, Rect
from model_errors import ModelError, PreconditionError
from oracle_suite import column_offset_pair, confinement_examples, packed_pair

fit_tol = 1e-9


def test_delta_of_column_offset():
    pair = column_offset_pair()
    assert len(pair.delta) == 7
    assert all(e.vertical and e.dx == 10 for e in pair.delta)
    assert delta(pair.sigma_prime, pair.sigma) == pair.delta
    assert len(pair.components()) == 1


def test_identical_samples_have_empty_delta():
    sigma, sigma_prime = packed_pair(8, 8)
    assert PairSample(sigma, sigma_prime).delta == set()


def test_ddag_joins_colinear_edges_two_apart():
    edges = {EdgeId(1, 0), EdgeId(5, 0)}
    assert len(line_components(edges)) == 2
    assert len(ddag_components(edges)) == 1


def test_component_geometry():
    pair = column_offset_pair()
    torus = pair.sigma.window
    assert component_diameters(pair.components(), torus) == [7]
    assert not spans_window(pair.components()[0], torus)


def test_confinement_on_constructed_examples():
    for pair, anchor, scales in confinement_examples():
        assert sealed(pair.sigma, pair.sigma_prime, anchor, scales)
        assert confinement_check(pair, anchor, scales) == []


def test_confinement_needs_a_sealed_rectangle():
    torus = Rect.anchored(0, 0, 12, 32)
    pair = PairSample(DimerConfig.packed(torus, "horizontal"), DimerConfig.packed(torus, "horizontal"))
    with pytest.raises(PreconditionError):
        confinement_check(pair, (4, 8), SealScales(1, 2, 4))


def test_sealed_grid_on_packed_pair():
    sigma, sigma_prime = packed_pair(12, 32)
    rows = sealed_grid(PairSample(sigma, sigma_prime), SealScales(1, 2, 4))
    assert len(rows) == 12
    assert all(r["sealed"] and r["sigma0"] and r["sigma0_prime"] for r in rows)
    freq = conditional_frequencies(rows)
    assert freq["sigma1_given_sigma0"] == 1.0 and freq["n_sigma0"] == 24
    assert freq["sigma2_given_sigma1"] == 1.0 and freq["n_sigma1"] == 12


def test_conditional_frequencies_without_events():
    row = {"sigma0": False, "sigma0_prime": False, "sigma1": False, "sigma1_prime": True, "sigma2": False}
    freq = conditional_frequencies([row])
    assert math.isnan(freq["sigma1_given_sigma0"]) and freq["n_sigma0"] == 0
    assert math.isnan(freq["sigma2_given_sigma1"])


def test_seal_scales_clamping():
    params = ModelParams(6.0, 0.0, 1.0)
    assert SealScales.for_model(params, 1, 1.0, 4, 32).c_scale == 2
    assert SealScales.for_model(params, 1, 1.0, 4, 16).c_scale == 1
    assert SealScales.for_model(ModelParams(0.1, 0.0, 1.0), 1, 1.0, 4, 32).c_scale == 1
    with pytest.raises(ModelError):
        SealScales(1, 1, 2)


def test_connection_stats():
    pairs = [column_offset_pair()]
    hit = connection_stats(pairs, {EdgeId(10, 17)}, {EdgeId(10, 29)})
    assert hit["hits"] == 1 and hit["p_hat"] == 1.0
    miss = connection_stats(pairs, {EdgeId(10, 17)}, {EdgeId(2, 1)})
    assert miss["p_hat"] == 0.0
    assert 0.0 <= miss["lower"] <= miss["upper"] <= 1.0
    with pytest.raises(ModelError):
        connection_stats([], set(), set())


def _synthetic_rows(C, cx, cy, dxs, dys):
    return [{"dx": dx, "dy": dy, "n": 100, "p_hat": C * math.exp(-cx * dx - cy * dy)} for dx in dxs for dy in dys]


def test_alpha1_fit_recovers_rates():
    fit = alpha1_fit(_synthetic_rows(0.5, 0.7, 0.2, range(3), range(3)))
    assert abs(fit["C"] - 0.5) < fit_tol
    assert abs(fit["c_x"] - 0.7) < fit_tol
    assert abs(fit["c_y"] - 0.2) < fit_tol
    assert abs(fit["anisotropy"] - 3.5) < 1e-6
    assert not fit["degenerate"]


def test_alpha1_fit_degenerate_direction():
    fit = alpha1_fit(_synthetic_rows(0.5, 0.7, 0.2, [0], range(4)))
    assert fit["degenerate_x"] and not fit["degenerate_y"]
    assert math.isnan(fit["c_x"]) and math.isnan(fit["anisotropy"])
    assert abs(fit["c_y"] - 0.2) < fit_tol
    assert alpha1_fit([])["degenerate"]
