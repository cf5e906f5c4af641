"""
Two-sample disagreement analysis
تحليل الاختلاف بين عينتين - مجموعات الاختلاف والمكونات والمستطيلات المختومة

Anchors are lattice vertices: the sealed rectangle of an anchor (ax, ay) is
the N*a_scale x N*c_scale rectangle whose lower-left vertex is (ax, ay).
"""

import logging
import math
from collections import deque

import numpy as np

from lattice import EdgeId, Rect, UnionFind, VertexId, ddag_neighbors, incident_edges, line_neighbors, wrap_edge
from model_errors import GeometryError, ModelError, PreconditionError
from order_parameters import wilson_interval

logger = logging.getLogger(__name__)


class SealScales:
    """مقاييس الختم - (a_scale, c_scale, N) with rectangle width N*a_scale and height N*c_scale"""

    def __init__(self, a_scale, c_scale, N=4):
        if N <= 2:
            raise ModelError(f"margin N must exceed 2, got {N}")
        if a_scale < 1 or c_scale < 1:
            raise ModelError(f"sealing scales must be positive, got {a_scale}, {c_scale}")
        self.a_scale = int(a_scale)
        self.c_scale = int(c_scale)
        self.N = int(N)

    @property
    def width(self):
        return self.N * self.a_scale

    @property
    def height(self):
        return self.N * self.c_scale

    @classmethod
    def for_model(cls, params, a_scale, c_const, N, torus_height):
        """c_scale = max(1, round(c * ell0 / N)), clamped so that three rectangles fit under the torus height"""
        c_scale = max(1, int(round(c_const * params.ell0 / N)))
        while c_scale > 1 and 3 * N * c_scale >= torus_height:
            c_scale -= 1
        return cls(a_scale, c_scale, N)

    def as_dict(self):
        return {"a_scale": self.a_scale, "c_scale": self.c_scale, "N": self.N}

    def __repr__(self):
        return f"SealScales(a={self.a_scale}, c={self.c_scale}, N={self.N})"


def _check_pair(sigma, sigma_prime):
    if sigma.window != sigma_prime.window or sigma.bc != sigma_prime.bc:
        raise GeometryError("configurations live on different geometries", (sigma.window, sigma_prime.window))


def _canonical(cfg, e):
    return wrap_edge(e, cfg.window) if cfg.bc.is_periodic else e


# ==================== Delta sets ====================

def delta(sigma, sigma_prime, region=None):
    """مجموعة الاختلاف - Edges whose occupancy differs, restricted to region"""
    _check_pair(sigma, sigma_prime)
    if region is None:
        hx, hy = sigma.h_origin
        vx, vy = sigma.v_origin
        diff_h = np.nonzero(sigma.occ_h != sigma_prime.occ_h)
        diff_v = np.nonzero(sigma.occ_v != sigma_prime.occ_v)
        found = {EdgeId(2 * (i + hx) + 1, 2 * (j + hy)) for i, j in zip(*diff_h)}
        found |= {EdgeId(2 * (i + vx), 2 * (j + vy) + 1) for i, j in zip(*diff_v)}
        return found
    return {_canonical(sigma, e) for e in region.edges() if sigma.occupied(e) != sigma_prime.occupied(e)}


class PairSample:
    """زوج العينات - Two configurations on one geometry and their disagreement set"""

    def __init__(self, sigma, sigma_prime):
        _check_pair(sigma, sigma_prime)
        self.sigma = sigma
        self.sigma_prime = sigma_prime
        self.delta = delta(sigma, sigma_prime)
        self._components = None

    @property
    def torus(self):
        return self.sigma.window if self.sigma.bc.is_periodic else None

    def components(self):
        if self._components is None:
            self._components = ddag_components(self.delta, self.torus)
        return self._components

    def __repr__(self):
        return f"PairSample({self.sigma.window!r}, |delta|={len(self.delta)})"


def _components_with(delta_set, neighbors, torus):
    members = set(delta_set)
    uf = UnionFind(members)
    for e in members:
        for f in neighbors(e):
            if torus is not None:
                f = wrap_edge(f, torus)
            if f in members:
                uf.union(e, f)
    return uf.groups()


def ddag_components(delta_set, torus=None):
    """مكونات ‡ - Components under line-graph adjacency plus colinear distance two"""
    return _components_with(delta_set, ddag_neighbors, torus)


def line_components(delta_set, torus=None):
    return _components_with(delta_set, line_neighbors, torus)


# ==================== Sealing ====================

def _check_room(cfg, scales, strict=False):
    if not cfg.bc.is_periodic:
        return
    W, H = cfg.window.K, cfg.window.L
    too_short = 3 * scales.height >= H if strict else 3 * scales.height > H
    if 3 * scales.width > W or too_short:
        raise GeometryError(f"torus {W}x{H} cannot hold the sealing rectangles for {scales!r}", cfg.window)


def _covered_vertically(cfg, v):
    _, up, _, down = incident_edges(v)
    return cfg.occupied(up) or cfg.occupied(down)


def _sigma0(cfg, anchor, scales):
    A, C = scales.width, scales.height
    for left in (anchor.x - A, anchor.x + A):
        for y in range(anchor.y - C, anchor.y + 2 * C):
            if not any(_covered_vertically(cfg, VertexId(x, y)) for x in range(left, left + A)):
                return False
    return True


def central_slab(anchor, scales):
    return Rect.anchored(anchor.x, anchor.y - scales.height, scales.width, 3 * scales.height)


def _sigma1(cfg, anchor, scales):
    slab = central_slab(anchor, scales)
    for e in slab.padded(1).edges():
        if e.horizontal and cfg.occupied(e) and slab.meets_edge(e):
            return False
    return True


def _column_sealed(sigma, sigma_prime, x, y_lo, y_hi):
    """A coincident vacancy or vertical dimer among the vertices x, y_lo..y_hi"""
    for y in range(y_lo, y_hi + 1):
        v = VertexId(x, y)
        if not sigma.covered(v) and not sigma_prime.covered(v):
            return True
        if y < y_hi:
            e = EdgeId(2 * x, 2 * y + 1)
            if sigma.occupied(e) and sigma_prime.occupied(e):
                return True
    return False


def _sigma2(sigma, sigma_prime, anchor, scales):
    A, C = scales.width, scales.height
    for base in (anchor.y - C, anchor.y + C):
        for x in range(anchor.x, anchor.x + A):
            if not _column_sealed(sigma, sigma_prime, x, base, base + C - 1):
                return False
    return True


def sealing_events(sigma, sigma_prime, anchor, scales):
    """أحداث الختم - (Sigma0 sigma, Sigma0 sigma', Sigma1 sigma, Sigma1 sigma', Sigma2)"""
    _check_pair(sigma, sigma_prime)
    _check_room(sigma, scales)
    anchor = VertexId(*anchor)
    return (
        _sigma0(sigma, anchor, scales),
        _sigma0(sigma_prime, anchor, scales),
        _sigma1(sigma, anchor, scales),
        _sigma1(sigma_prime, anchor, scales),
        _sigma2(sigma, sigma_prime, anchor, scales),
    )


def sealed(sigma, sigma_prime, anchor, scales):
    _, _, s1, s1_prime, s2 = sealing_events(sigma, sigma_prime, anchor, scales)
    return s1 and s1_prime and s2


def sealed_rect(anchor, scales):
    return Rect.anchored(anchor[0], anchor[1], scales.width, scales.height)


def confinement_check(pair, anchor, scales):
    """
    فحص الحصر - For every disagreement edge in the sealed rectangle, members of
    its ‡-component outside its own column and the three-rectangle band.
    Returns (seed edge, offending edge) pairs.
    """
    anchor = VertexId(*anchor)
    _check_room(pair.sigma, scales, strict=True)
    if not sealed(pair.sigma, pair.sigma_prime, anchor, scales):
        raise PreconditionError("the rectangle is not sealed", anchor)
    S = sealed_rect(anchor, scales)
    lo_d = 2 * (anchor.y - scales.height) - 1
    hi_d = 2 * (anchor.y + 2 * scales.height) - 1
    cfg = pair.sigma
    seeds = [e for e in S.edges() if _canonical(cfg, e) in pair.delta]
    violations = []
    for seed in seeds:
        seen = {seed}
        queue = deque([seed])
        while queue:
            e = queue.popleft()
            if not (e.vertical and e.dx == seed.dx and lo_d < e.dy < hi_d):
                violations.append((seed, _canonical(cfg, e)))
                continue
            for f in ddag_neighbors(e):
                if f not in seen and _canonical(cfg, f) in pair.delta:
                    seen.add(f)
                    queue.append(f)
    if violations:
        logger.warning("%d confinement violations at anchor %s", len(violations), anchor)
    return violations


def sealed_grid(pair, scales):
    """شبكة الختم - Sealing events at every anchor of the (N a, N c) lattice of the torus"""
    torus = pair.sigma.window
    _check_room(pair.sigma, scales)
    ox, oy = torus.origin
    rows = []
    for gx in range(torus.K // scales.width):
        for gy in range(torus.L // scales.height):
            anchor = VertexId(ox + gx * scales.width, oy + gy * scales.height)
            s0, s0p, s1, s1p, s2 = sealing_events(pair.sigma, pair.sigma_prime, anchor, scales)
            rows.append({
                "anchor_x": anchor.x, "anchor_y": anchor.y,
                "sigma0": s0, "sigma0_prime": s0p, "sigma1": s1, "sigma1_prime": s1p, "sigma2": s2,
                "sealed": s1 and s1p and s2,
            })
    return rows


def conditional_frequencies(grid_rows):
    """P(Sigma1 | Sigma0) per sample and P(Sigma2 | Sigma1 in both)"""
    s0 = [(r["sigma0"], r["sigma1"]) for r in grid_rows] + [(r["sigma0_prime"], r["sigma1_prime"]) for r in grid_rows]
    given0 = [s1 for has0, s1 in s0 if has0]
    given1 = [r["sigma2"] for r in grid_rows if r["sigma1"] and r["sigma1_prime"]]
    return {
        "sigma1_given_sigma0": (sum(given0) / len(given0)) if given0 else float("nan"),
        "n_sigma0": len(given0),
        "sigma2_given_sigma1": (sum(given1) / len(given1)) if given1 else float("nan"),
        "n_sigma1": len(given1),
    }


# ==================== Component geometry ====================

def _vertex_coords(component):
    xs, ys = set(), set()
    for e in component:
        for v in e.endpoints():
            xs.add(v.x)
            ys.add(v.y)
    return xs, ys


def _extent(values, period=None):
    """Smallest arc (or interval) length covering the values"""
    ordered = sorted(values)
    if period is None or len(ordered) < 2:
        return ordered[-1] - ordered[0]
    ordered = sorted({(v - ordered[0]) % period for v in ordered})
    gaps = [b - a for a, b in zip(ordered, ordered[1:])] + [period - ordered[-1] + ordered[0]]
    return period - max(gaps)


def component_diameters(components, torus=None):
    """أقطار المكونات - Sup-norm diameter of each component's vertex set"""
    diameters = []
    for comp in components:
        xs, ys = _vertex_coords(comp)
        px, py = (torus.K, torus.L) if torus is not None else (None, None)
        diameters.append(max(_extent(xs, px), _extent(ys, py)))
    return diameters


def spans_window(component, torus):
    """The component touches every column or every row of the torus"""
    xs, ys = _vertex_coords(component)
    cols = {(x - torus.origin[0]) % torus.K for x in xs}
    rows = {(y - torus.origin[1]) % torus.L for y in ys}
    return len(cols) == torus.K or len(rows) == torus.L


# ==================== Connection probabilities ====================

def _connected(components, A, B):
    for comp in components:
        members = set(comp)
        if members & A and members & B:
            return True
    return False


def connection_stats(pairs, A, B, confidence=0.95):
    """احتمال الاتصال - Fraction of pairs in which A and B meet one ‡-component of delta"""
    if not pairs:
        raise ModelError("connection statistics need at least one pair")
    torus = pairs[0].torus
    if any(p.sigma.window != pairs[0].sigma.window for p in pairs):
        raise GeometryError("pairs live on different geometries")
    A = {wrap_edge(e, torus) if torus is not None else e for e in A}
    B = {wrap_edge(e, torus) if torus is not None else e for e in B}
    hits = sum(1 for p in pairs if _connected(p.components(), A, B))
    lower, upper = wilson_interval(hits, len(pairs), confidence)
    return {"p_hat": hits / float(len(pairs)), "lower": lower, "upper": upper, "n": len(pairs), "hits": hits}


def connection_probability(pairs, A, B):
    return connection_stats(pairs, A, B)["p_hat"]


def connection_profile(pairs, base_edge, displacements):
    """One stats row per displacement (sx, sy) of base_edge"""
    rows = []
    for sx, sy in displacements:
        target = EdgeId(base_edge.dx + 2 * sx, base_edge.dy + 2 * sy)
        row = connection_stats(pairs, {base_edge}, {target})
        row.update({"dx": sx, "dy": sy})
        rows.append(row)
    return rows


def alpha1_fit(rows):
    """
    Weighted least squares of log p = log C - c_x |dx| - c_y |dy| with
    weights n p / (1 - p); rows with p in {0, 1} are dropped. A direction
    with a single distinct distance is reported as degenerate and not fitted.
    """
    used = [r for r in rows if 0.0 < r["p_hat"] < 1.0]
    result = {"n_points": len(used), "degenerate_x": True, "degenerate_y": True,
              "c_x": float("nan"), "c_y": float("nan"), "C": float("nan"), "anisotropy": float("nan")}
    if len(used) < 2:
        result["degenerate"] = True
        return result
    p = np.array([r["p_hat"] for r in used])
    n = np.array([r["n"] for r in used], dtype=float)
    ax = np.array([abs(r["dx"]) for r in used], dtype=float)
    ay = np.array([abs(r["dy"]) for r in used], dtype=float)
    result["degenerate_x"] = len(set(ax)) < 2
    result["degenerate_y"] = len(set(ay)) < 2
    columns = [np.ones_like(p)]
    names = ["log_C"]
    if not result["degenerate_x"]:
        columns.append(-ax)
        names.append("c_x")
    if not result["degenerate_y"]:
        columns.append(-ay)
        names.append("c_y")
    design = np.column_stack(columns)
    sqrt_w = np.sqrt(n * p / (1.0 - p))
    target = np.log(p)
    coef, *_ = np.linalg.lstsq(design * sqrt_w[:, None], target * sqrt_w, rcond=None)
    fitted = dict(zip(names, coef))
    result["C"] = math.exp(fitted["log_C"])
    result["c_x"] = float(fitted.get("c_x", float("nan")))
    result["c_y"] = float(fitted.get("c_y", float("nan")))
    if not (result["degenerate_x"] or result["degenerate_y"]) and result["c_y"] != 0.0:
        result["anisotropy"] = result["c_x"] / result["c_y"]
    result["residuals"] = (target - design @ coef).tolist()
    result["degenerate"] = result["degenerate_x"] and result["degenerate_y"]
    return result
