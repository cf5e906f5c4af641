import math

import numpy as np
import pytest

from dimer_model import ModelParams
from model_errors import ModelError
from transfer_matrix import (Transfer1D, char_poly, correlation_length, eigenvalue_expansions, fullpacked_lower_bound,
                             log_z_vacant, spectrum, transfer_table, z_fullpacked, z_periodic_1d, z_vacant,
                             z_vacant_enumerated)

TRIPLES = [(beta, lam, a) for beta in (0.5, 1.0, 2.0) for lam, a in ((0.0, 1.0), (-0.5, 1.0), (1.0, 0.5))]
ratio_rtol = 1e-10
poly_tol = 1e-14
vieta_tol = 1e-10


def test_transfer_entries():
    p = ModelParams(1.0, 0.0, 1.0)
    T = Transfer1D(p).entries
    assert np.isclose(T[0, 0], p.vacancy_weight)
    assert np.isclose(T[1, 0], math.exp(-0.5))
    assert np.isclose(T[0, 2], math.exp(-1.0))
    assert T[2, 1] == 1.0 and T[1, 2] == 1.0


@pytest.mark.parametrize("triple", TRIPLES)
def test_enumerated_segment_ratio_is_constant(triple):
    p = ModelParams(*triple)
    ratios = [z_vacant_enumerated(L, p) / z_vacant(L, p) for L in (2, 4, 6, 8)]
    assert np.allclose(ratios, ratios[0], rtol=ratio_rtol, atol=0.0)
    assert np.isclose(ratios[0], p.vacancy_weight)


def test_char_poly_matches_determinant():
    rng = np.random.default_rng(7)
    for _ in range(100):
        p = ModelParams(rng.uniform(1.0, 3.0), rng.uniform(0.0, 1.0), rng.uniform(1.0, 2.0))
        T = Transfer1D(p).entries
        minors = sum(T[i, i] * T[j, j] - T[i, j] * T[j, i] for i, j in ((0, 1), (0, 2), (1, 2)))
        det = -T[0, 0] + T[0, 2] * T[1, 0]
        coeffs = char_poly(p)
        assert coeffs[0] == 1.0
        assert abs(-np.trace(T) - coeffs[1]) <= poly_tol
        assert abs(minors - coeffs[2]) <= poly_tol
        assert abs(-det - coeffs[3]) <= poly_tol
        assert np.isclose(np.linalg.det(T), det, rtol=1e-12)


def test_vieta_identities():
    rng = np.random.default_rng(11)
    for _ in range(100):
        p = ModelParams(rng.uniform(1.0, 3.0), rng.uniform(0.0, 1.0), rng.uniform(1.0, 2.0))
        s = spectrum(p)
        A = p.vacancy_weight
        x1, x2, x3 = s.roots
        assert x1 > x2 > x3
        assert abs(x1 + x2 + x3 - A) <= vieta_tol
        assert abs(x1 * x2 + x1 * x3 + x2 * x3 + 1.0) <= vieta_tol
        assert abs(x1 * x2 * x3 - (s.epsilon - A)) <= vieta_tol


def test_unperturbed_roots():
    p = ModelParams(1.0, 0.0, 1.0)
    s = spectrum(p, epsilon=0.0)
    assert np.allclose(s.roots, (1.0, p.vacancy_weight, -1.0), atol=1e-12)


def test_expansion_residual_slope():
    betas = np.linspace(4.0, 12.0, 17)
    logs = []
    for beta in betas:
        p = ModelParams(beta, 0.0, 1.0)
        logs.append(math.log(abs(spectrum(p).x1 - (1.0 + 0.5 / p.ell0))))
    slope = np.polyfit(betas, logs, 1)[0]
    assert abs(slope + 2.0) <= 0.2


def test_expansions_are_leading_order():
    p = ModelParams(6.0, 0.0, 1.0)
    s = spectrum(p)
    approx = eigenvalue_expansions(p)
    for exact, guess in zip(s.roots, approx):
        assert abs(exact - guess) < 1.0 / p.ell0
    assert correlation_length(p) > 0.0


def test_z_vacant_log_space_and_periodic_trace():
    p = ModelParams(2.0, 0.5, 1.0)
    for L in (2, 10, 40):
        assert np.isclose(log_z_vacant(L, p), math.log(z_vacant(L, p)), rtol=1e-12)
    s = spectrum(p)
    assert np.isclose(z_periodic_1d(6, p), sum(x ** 6 for x in s.roots), rtol=1e-10)


def test_fullpacked_bound():
    for triple in TRIPLES:
        p = ModelParams(*triple)
        for L in range(4, 13, 2):
            assert z_fullpacked(L, p) >= fullpacked_lower_bound(L, p)


def test_segment_lengths_must_be_even():
    p = ModelParams(1.0, 0.0, 1.0)
    with pytest.raises(ModelError):
        z_vacant(3, p)
    with pytest.raises(ModelError):
        z_fullpacked(2, p)


def test_transfer_table_columns():
    rows = transfer_table([ModelParams(1.0, 0.0, 1.0)], [2, 4])
    assert list(rows[0])[:8] == ["beta", "lambda", "a", "x1", "x2", "x3", "xi", "ell0"]
    assert "z_vacant_4" in rows[0] and "residual_3" in rows[0]
