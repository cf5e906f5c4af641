"""
Exact enumeration oracle
التعداد الدقيق - دوال التجزئة والتوقعات وفحوص الانعكاس الإيجابي ولوحة الشطرنج

Every valid configuration of a small window or torus is produced exactly
once by a backtracking walk over the stored edges in lexicographic order.
The walk feeds a ConfigEnsemble (occupancy matrix plus log-weights) on
which partition functions, Gibbs expectations, chessboard seminorms and
product-measure checks are evaluated.
"""

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from dimer_model import BoundaryCondition, DimerConfig, PRESCRIBED, VACANT, potential_supports
from lattice import block_transforms, incident_edges, wrap_edge, wrap_vertex
from model_errors import GeometryError, GuardrailError

logger = logging.getLogger(__name__)

MAX_EDGES = 40
MAX_LOCAL_BITS = 16


# ==================== Backtracking ====================

def _candidates(window, bc):
    """
    الحواف المرشحة - Stored edges with their endpoint bitmasks, dropping
    edges the boundary condition can never allow.
    """
    cfg = DimerConfig.empty(window, bc)
    stored = cfg.stored_edges()
    if len(stored) > MAX_EDGES:
        raise GuardrailError(f"{len(stored)} stored edges exceed the limit of {MAX_EDGES}", window)
    vertex_ids = {}
    candidates = []
    for e in stored:
        mask = 0
        allowed = True
        for v in e.endpoints():
            if bc.is_periodic:
                v = wrap_vertex(v, window)
            elif not window.contains_vertex(v):
                if bc.variant == VACANT:
                    allowed = False
                elif bc.variant == PRESCRIBED and any(bc.pattern.occupied(f) for f in incident_edges(v)
                                                       if not window.contains_edge(f)):
                    allowed = False
            mask |= 1 << vertex_ids.setdefault(v, len(vertex_ids))
        if allowed:
            candidates.append((e, mask))
    return stored, candidates


def _assignments(candidates, prefix=()):
    """Depth-first walk yielding a bitmask over candidates per valid configuration."""
    used, bits = 0, 0
    for i, take in enumerate(prefix):
        if take:
            mask = candidates[i][1]
            if used & mask:
                return
            used |= mask
            bits |= 1 << i
    n = len(candidates)
    stack = [(len(prefix), used, bits)]
    while stack:
        i, used, bits = stack.pop()
        if i == n:
            yield bits
            continue
        mask = candidates[i][1]
        if not used & mask:
            stack.append((i + 1, used | mask, bits | (1 << i)))
        stack.append((i + 1, used, bits))


def split_prefixes(window, bc, depth):
    """تقسيم العمل - Valid assignments of the first depth candidate edges"""
    _, candidates = _candidates(window, bc)
    head = candidates[:depth]
    prefixes = []
    for bits in _assignments(head):
        prefixes.append(tuple(bool((bits >> i) & 1) for i in range(len(head))))
    return prefixes


# ==================== Ensembles ====================

class ConfigEnsemble:
    """
    مجموعة الإعدادات - All configurations of (window, bc) as a boolean
    occupancy matrix over the stored edges, with their log-weights.
    """

    def __init__(self, window, bc, params, prefix=()):
        self.window = window
        self.bc = bc
        self.params = params
        self.edges, candidates = _candidates(window, bc)
        self.column = {e: c for c, e in enumerate(self.edges)}
        bit_rows = np.fromiter(_assignments(candidates, prefix), dtype=np.int64)
        cand_cols = np.array([self.column[e] for e, _ in candidates], dtype=np.int64)
        self.occ = np.zeros((len(bit_rows), len(self.edges)), dtype=np.bool_)
        if len(candidates):
            shifts = np.arange(len(candidates), dtype=np.int64)
            self.occ[:, cand_cols] = ((bit_rows[:, None] >> shifts) & 1).astype(np.bool_)
        self.log_w = self._log_weights()
        logger.debug("enumerated %d configurations on %r (%s)", len(self), window, bc.token())

    def __len__(self):
        return self.occ.shape[0]

    # ---------- columns ----------

    def edge_values(self, e):
        """Occupancy of edge e across all configurations (constant outside the window)."""
        if self.bc.is_periodic:
            return self.occ[:, self.column[wrap_edge(e, self.window)]]
        if e in self.column:
            return self.occ[:, self.column[e]]
        return np.full(len(self), self.bc.outside_occupied(e), dtype=np.bool_)

    def _log_weights(self):
        sites, middles = potential_supports(self.window, self.bc.is_periodic)
        n_vac = np.zeros(len(self), dtype=np.int64)
        for v in sites:
            covered = np.zeros(len(self), dtype=np.bool_)
            for f in incident_edges(v):
                covered |= self.edge_values(f)
            n_vac += ~covered
        n_broken = np.zeros(len(self), dtype=np.int64)
        for f in middles:
            n_broken += self.edge_values(f.colinear(-1)) != self.edge_values(f.colinear(1))
        self.n_vac, self.n_broken = n_vac, n_broken
        return n_vac * self.params.log_vacancy_weight + n_broken * self.params.log_link_weight

    # ---------- measures ----------

    def partition_function(self, mask=None):
        log_w = self.log_w if mask is None else self.log_w[np.asarray(mask, dtype=np.bool_)]
        return math.fsum(sorted(np.exp(log_w).tolist(), reverse=True))

    def probabilities(self):
        shifted = np.exp(self.log_w - self.log_w.max())
        return shifted / math.fsum(sorted(shifted.tolist(), reverse=True))

    def expectation(self, values):
        terms = self.probabilities() * np.asarray(values, dtype=np.float64)
        return math.fsum(terms.tolist())

    def config(self, i):
        cfg = DimerConfig.empty(self.window, self.bc)
        for c in np.nonzero(self.occ[i])[0]:
            cfg.set_edge(self.edges[c], True)
        return cfg

    def configs(self):
        for i in range(len(self)):
            yield self.config(i)

    def pattern_index(self, local_edges, iso=None):
        """فهرس النمط المحلي - Bit pattern of local edges (mapped by iso) per configuration"""
        index = np.zeros(len(self), dtype=np.int64)
        for b, e in enumerate(local_edges):
            image = e if iso is None else iso.apply_edge(e)
            index |= self.edge_values(image).astype(np.int64) << b
        return index


def enumerate_configs(window, bc):
    """
    تعداد كل الإعدادات - Stream every valid configuration exactly once, in
    the deterministic order of the backtracking walk.
    """
    edges, candidates = _candidates(window, bc)
    for bits in _assignments(candidates):
        cfg = DimerConfig.empty(window, bc)
        for i, (e, _) in enumerate(candidates):
            if (bits >> i) & 1:
                cfg.set_edge(e, True)
        yield cfg


def count_configs(window, bc):
    _, candidates = _candidates(window, bc)
    return sum(1 for _ in _assignments(candidates))


def _subtree_sum(window, bc, params, prefix):
    return ConfigEnsemble(window, bc, params, prefix).partition_function()


def partition_function(window, bc, params, constraint=None, workers=None, depth=4):
    """
    دالة التجزئة - Sum of weights, optionally restricted to configurations
    satisfying constraint (an EventPredicate or a callable on DimerConfig).
    With workers > 1 the search tree is split on its first depth edges and
    the subtrees are summed in a process pool.
    """
    if workers and workers > 1 and constraint is None:
        prefixes = split_prefixes(window, bc, depth)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_subtree_sum, *zip(*[(window, bc, params, p) for p in prefixes])))
        return math.fsum(sorted(parts, reverse=True))
    ensemble = ConfigEnsemble(window, bc, params)
    if constraint is None:
        return ensemble.partition_function()
    return ensemble.partition_function(constraint_mask(ensemble, constraint))


def constraint_mask(ensemble, constraint):
    if isinstance(constraint, LocalObservable):
        return constraint.evaluate_ensemble(ensemble).astype(np.bool_)
    return np.array([bool(constraint(cfg)) for cfg in ensemble.configs()], dtype=np.bool_)


def expectation(window, bc, params, f):
    """توقع جيبس - Gibbs expectation of a callable observable on DimerConfig"""
    ensemble = ConfigEnsemble(window, bc, params)
    return ensemble.expectation([f(cfg) for cfg in ensemble.configs()])


# ==================== Local events ====================

class LocalPattern:
    """نمط محلي - Edge occupancies of one rectangle, read through the event's frame"""

    def __init__(self, rect, bits):
        self.rect = rect
        self._bits = bits

    def occupied(self, e):
        if e not in self._bits:
            raise GeometryError("observable read an edge outside its locality rectangle", e)
        return self._bits[e]

    def covered(self, v):
        return any(self.occupied(f) for f in incident_edges(v))

    def vacant(self, v):
        return not self.covered(v)


class LocalObservable:
    """
    دالة محلية - A real function of the edges whose midpoints lie in rect,
    stored as a lookup table over all local patterns (k configurations at once).
    """

    def __init__(self, rect, table, k=1):
        self.rect = rect
        self.k = k
        self.local_edges = rect.edges()
        self.table = np.asarray(table, dtype=np.float64)
        if len(self.table) != 1 << (k * len(self.local_edges)):
            raise GeometryError("lookup table size does not match the locality rectangle", rect)

    @classmethod
    def from_function(cls, rect, fn, k=1):
        local_edges = rect.edges()
        n = len(local_edges)
        if n * k > MAX_LOCAL_BITS:
            raise GuardrailError(f"{n * k} local bits exceed {MAX_LOCAL_BITS}", rect)
        table = np.empty(1 << (n * k), dtype=np.float64)
        for index in range(len(table)):
            patterns = [
                LocalPattern(rect, {e: bool((index >> (t * n + b)) & 1) for b, e in enumerate(local_edges)})
                for t in range(k)
            ]
            table[index] = fn(*patterns)
        return cls(rect, table, k)

    def evaluate(self, *cfgs, iso=None):
        n = len(self.local_edges)
        index = 0
        for t, cfg in enumerate(cfgs):
            for b, e in enumerate(self.local_edges):
                image = e if iso is None else iso.apply_edge(e)
                if cfg.occupied(image):
                    index |= 1 << (t * n + b)
        return self.table[index]

    def evaluate_ensemble(self, ensemble, iso=None):
        if self.k != 1:
            raise GeometryError("ensemble evaluation needs a single-configuration observable", self.rect)
        return self.table[ensemble.pattern_index(self.local_edges, iso)]


class EventPredicate(LocalObservable):
    """حدث محلي - An R-local event, i.e. a 0/1-valued local observable"""

    def __init__(self, rect, table, k=1):
        super().__init__(rect, np.asarray(table, dtype=np.bool_).astype(np.float64), k)

    @classmethod
    def from_function(cls, rect, fn, k=1):
        base = LocalObservable.from_function(rect, lambda *p: 1.0 if fn(*p) else 0.0, k)
        return cls(rect, base.table, k)

    @classmethod
    def full(cls, rect, k=1):
        return cls(rect, np.ones(1 << (k * len(rect.edges()))), k)

    def negation(self):
        return EventPredicate(self.rect, 1.0 - self.table, self.k)

    def __call__(self, cfg):
        return bool(self.evaluate(cfg))


# ==================== Reflection positivity & chessboard ====================

def _check_torus(window, bc):
    if not bc.is_periodic:
        raise GeometryError("chessboard quantities are defined for periodic tori", window)


def _product_expectation(ensemble, factors, k):
    """
    (⊗ mu)(prod of factors) for factors = [(observable, iso)], each observable
    reading k configurations; the k-fold product is iterated lazily over the
    first k-1 coordinates and vectorized over the last.
    """
    probs = ensemble.probabilities()
    n = len(factors[0][0].local_edges) if factors else 0
    indices = [ensemble.pattern_index(obs.local_edges, iso) for obs, iso in factors]
    if k == 1:
        prod = np.ones(len(ensemble))
        for (obs, _), idx in zip(factors, indices):
            prod *= obs.table[idx]
        return math.fsum((probs * prod).tolist())
    terms = []
    for head in itertools.product(range(len(ensemble)), repeat=k - 1):
        head_weight = float(np.prod(probs[list(head)]))
        if head_weight == 0.0:
            continue
        prod = np.ones(len(ensemble))
        for (obs, _), idx in zip(factors, indices):
            offset = 0
            for t, i in enumerate(head):
                offset |= int(idx[i]) << (t * n)
            prod *= obs.table[offset | (idx << ((k - 1) * n))]
        terms.append(head_weight * math.fsum((probs * prod).tolist()))
    return math.fsum(terms)


def chessboard_seminorm(event, R, torus, params, k=1, ensemble=None):
    """
    شبه نظيم لوحة الشطرنج - (⊗ mu_per)(prod over tau of tau E)^(1/|T|)
    for an R-local event disseminated over the reflection group of R.
    """
    ensemble = ensemble or ConfigEnsemble(torus, BoundaryCondition.periodic(), params)
    _check_torus(torus, ensemble.bc)
    transforms = block_transforms(R, torus)
    value = _product_expectation(ensemble, [(event, iso) for iso in transforms], k)
    return max(value, 0.0) ** (1.0 / len(transforms))


def chessboard_check(events, R, torus, params, k=1, ensemble=None):
    """
    فحص تقدير لوحة الشطرنج - events maps isometries of the reflection group
    to R-local events; returns (lhs, rhs) with lhs the joint probability and
    rhs the product of the individual seminorms.
    """
    ensemble = ensemble or ConfigEnsemble(torus, BoundaryCondition.periodic(), params)
    group = set(block_transforms(R, torus))
    for iso in events:
        if iso not in group:
            raise GeometryError(f"{iso!r} is not in the reflection group of {R!r}", R)
    lhs = _product_expectation(ensemble, list((event, iso) for iso, event in events.items()), k)
    rhs = 1.0
    for event in events.values():
        rhs *= chessboard_seminorm(event, R, torus, params, k, ensemble)
    return lhs, rhs


def rp_check(f, R, torus, tau, params, ensemble=None):
    """
    فحص الانعكاس الإيجابي - mu_per(f * tau f) on a torus that is R doubled
    across the reflection plane of tau.
    """
    doubled_x = torus.K == 2 * R.K and torus.L == R.L
    doubled_y = torus.K == R.K and torus.L == 2 * R.L
    if not (doubled_x or doubled_y) or tau.kind != "reflection":
        raise GeometryError("reflection positivity needs R doubled by a reflection", R)
    if tau.compose(tau) != type(tau)():
        raise GeometryError("tau must be an involution", R)
    image = tau.apply_rect(R)
    if (image.x0d - R.x0d) % (2 * torus.K) == 0 and (image.y0d - R.y0d) % (2 * torus.L) == 0:
        raise GeometryError("tau must map R onto the other half of the torus", R)
    ensemble = ensemble or ConfigEnsemble(torus, BoundaryCondition.periodic(), params)
    return _product_expectation(ensemble, [(f, None), (f, tau)], 1)
