"""
One-dimensional transfer-matrix theory
نظرية مصفوفة الانتقال أحادية البعد - الطيف وطول الترابط ودوال التجزئة

Basis order is (|0>, |l>, |r>). T[i][j] weighs the step from window state i
to window state j: the vertex between two consecutive edges and the link
centred on the second one.
"""

import logging
import math

import numpy as np

from dimer_model import BoundaryCondition, PeriodicPattern
from exact_enumeration import partition_function
from lattice import Rect
from model_errors import ModelError, SpectrumError

logger = logging.getLogger(__name__)

NEWTON_STEPS = 2
IMAG_TOLERANCE = 1e-9


class Transfer1D:
    """مصفوفة الانتقال - The 3x3 transfer matrix and its parameters"""

    def __init__(self, params):
        self.params = params
        A = params.vacancy_weight
        C = params.link_weight
        self.entries = np.array([
            [A, 0.0, math.exp(-params.beta * (params.lam + 2.0 * params.a) / 2.0)],
            [C, 0.0, 1.0],
            [0.0, 1.0, 0.0],
        ])

    def power(self, n):
        """T^n by iterated multiplication"""
        result = np.eye(3)
        for _ in range(n):
            result = result @ self.entries
        return result

    def __repr__(self):
        return f"Transfer1D({self.params!r})"


class Spectrum1D:
    """طيف المصفوفة - Eigenvalues x1 > x2 > x3 with their cubic residuals"""

    def __init__(self, roots, residuals, epsilon):
        self.x1, self.x2, self.x3 = roots
        self.residuals = residuals
        self.epsilon = epsilon

    @property
    def roots(self):
        return (self.x1, self.x2, self.x3)

    def __repr__(self):
        return f"Spectrum1D(x1={self.x1:.12g}, x2={self.x2:.12g}, x3={self.x3:.12g})"


# ==================== Characteristic polynomial ====================

def char_poly(params):
    """كثيرة الحدود المميزة - Coefficients (c3, c2, c1, c0) of det(xI - T)"""
    A = params.vacancy_weight
    eps = math.exp(-params.log_ell0)
    return (1.0, -A, -1.0, A - eps)


def _cubic(x, A, eps):
    # (x^2 - 1)(x - A) - eps, factored for accuracy near +-1
    return (x - 1.0) * (x + 1.0) * (x - A) - eps


def _cubic_slope(x, A):
    return 3.0 * x * x - 2.0 * A * x - 1.0


def spectrum(params, epsilon=None):
    """
    الطيف - Roots of the characteristic cubic from companion-matrix estimates
    polished by Newton steps. epsilon overrides exp(-beta(lambda+3a)/2),
    so epsilon=0 gives the unperturbed cubic with roots {1, A, -1}.
    """
    A = params.vacancy_weight
    eps = math.exp(-params.log_ell0) if epsilon is None else float(epsilon)
    estimates = np.roots([1.0, -A, -1.0, A - eps])
    if np.max(np.abs(estimates.imag)) > IMAG_TOLERANCE:
        raise SpectrumError(f"characteristic cubic has non-real roots for {params!r}")
    roots = []
    for x in sorted(estimates.real, reverse=True):
        for _ in range(NEWTON_STEPS):
            slope = _cubic_slope(x, A)
            if slope != 0.0:
                x -= _cubic(x, A, eps) / slope
        roots.append(float(x))
    residuals = tuple(abs(_cubic(x, A, eps)) for x in roots)
    for x, r in zip(roots, residuals):
        if r > 1e-12 * max(1.0, abs(x) ** 3):
            logger.warning("cubic residual %.3g at root %.15g exceeds tolerance", r, x)
    return Spectrum1D(tuple(roots), residuals, eps)


def eigenvalue_expansions(params):
    """التوسعات الرئيسية - Leading-order approximations of (x1, x2, x3)"""
    A = params.vacancy_weight
    inv_ell0 = math.exp(-params.log_ell0)
    return (1.0 + 0.5 * inv_ell0, A - inv_ell0, -1.0 + 0.5 * inv_ell0)


def correlation_length(params):
    s = spectrum(params)
    return 1.0 / math.log(abs(s.x1 / s.x3))


def ell0(params):
    return params.ell0


# ==================== 1D partition functions ====================

def _check_length(L, minimum):
    if L < minimum or L % 2:
        raise ModelError(f"segment length must be even and at least {minimum}, got {L}")


def z_vacant(L, params):
    """<0| T^(L+1) |0> by repeated matrix-vector products"""
    _check_length(L, 2)
    T = Transfer1D(params).entries
    vec = np.array([1.0, 0.0, 0.0])
    for _ in range(L + 1):
        vec = T @ vec
    return float(vec[0])


def log_z_vacant(L, params):
    """log <0| T^(L+1) |0>, renormalizing at each step"""
    _check_length(L, 2)
    T = Transfer1D(params).entries
    vec = np.array([1.0, 0.0, 0.0])
    log_scale = 0.0
    for _ in range(L + 1):
        vec = T @ vec
        norm = float(np.max(np.abs(vec)))
        vec /= norm
        log_scale += math.log(norm)
    return log_scale + math.log(vec[0])


def z_periodic_1d(L, params):
    """trace(T^L), the partition function of a ring of L sites"""
    if L < 2:
        raise ModelError(f"ring length must be at least 2, got {L}")
    return float(np.trace(Transfer1D(params).power(L)))


def segment_window(L):
    """نافذة المقطع - The height-one window [-1/2, L-1/2] x [-1/2, 1/2]"""
    return Rect(-1, -1, L, 1)


def z_vacant_enumerated(L, params):
    """
    Vacant-boundary 1D partition function by enumeration. The height-one
    window also counts the 2L always-vacant vertices in rows y = +-1, whose
    weight is divided out.
    """
    _check_length(L, 2)
    z2d = partition_function(segment_window(L), BoundaryCondition.vacant(), params)
    return z2d / params.vacancy_weight ** (2 * L)


def z_fullpacked(L, params):
    """
    Partition function of the segment with the fully packed boundary:
    dimers (0,1), (2,3), ... outside the segment in every row.
    """
    _check_length(L, 4)
    bc = BoundaryCondition.prescribed(PeriodicPattern.row_packed())
    return partition_function(segment_window(L), bc, params)


def fullpacked_lower_bound(L, params):
    return 1.0 + L * L / (16.0 * params.ell0 ** 2)


# دوال مساعدة للاستدعاء المباشر
def transfer_table(params_list, lengths):
    """جدول الانتقال - One row per parameter triple, as written by the transfer subcommand"""
    rows = []
    for params in params_list:
        s = spectrum(params)
        row = {
            "beta": params.beta, "lambda": params.lam, "a": params.a,
            "x1": s.x1, "x2": s.x2, "x3": s.x3,
            "xi": 1.0 / math.log(abs(s.x1 / s.x3)), "ell0": params.ell0,
        }
        for L in lengths:
            row[f"z_vacant_{L}"] = z_vacant(L, params)
        row.update({f"residual_{i + 1}": r for i, r in enumerate(s.residuals)})
        rows.append(row)
    return rows
