"""
Mesoscopic order parameters
معاملات الترتيب - العصي والتقسيم الصحيح وشبكات Psi والتسرب

A dual edge is named by the doubled midpoint of the lattice edge it
bisects; it is vertical when that lattice edge is horizontal. A vertical
stick edge bisects a horizontal edge whose two endpoints are both covered
by vertical dimers (and symmetrically for horizontal stick edges).
"""

import logging
from collections import Counter, deque
from typing import NamedTuple

import numpy as np
from scipy.stats import norm

from lattice import BOX, BOXTIMES, EdgeId, Rect, VertexId, components, incident_edges, step_offsets
from model_errors import GeometryError

logger = logging.getLogger(__name__)

VERTICAL = "V"
HORIZONTAL = "H"
DEFAULT_N = 4
EPSILON_0 = 1.0 / 21.0


class DualEdge(NamedTuple):
    """حافة ثنائية - Dual edge named by the doubled midpoint of the edge it crosses"""
    dx: int
    dy: int

    @property
    def vertical(self):
        return self.dx % 2 == 1

    @property
    def orientation(self):
        return VERTICAL if self.vertical else HORIZONTAL

    @property
    def bisected(self):
        return EdgeId(self.dx, self.dy)

    def endpoints_d(self):
        """Doubled coordinates of the two dual vertices, lower-left first."""
        if self.vertical:
            return (self.dx, self.dy - 1), (self.dx, self.dy + 1)
        return (self.dx - 1, self.dy), (self.dx + 1, self.dy)


def dual_of(e):
    return DualEdge(e.dx, e.dy)


# ==================== Stick edges & sticks ====================

def covered_by(cfg, v, orientation):
    """Vertex v is an endpoint of a dimer of the given orientation."""
    e_right, e_up, e_left, e_down = incident_edges(v)
    if orientation == VERTICAL:
        return cfg.occupied(e_up) or cfg.occupied(e_down)
    return cfg.occupied(e_right) or cfg.occupied(e_left)


def is_stick_edge(cfg, d):
    f = d.bisected
    u, v = f.endpoints()
    return covered_by(cfg, u, d.orientation) and covered_by(cfg, v, d.orientation)


def stick_edges(cfg, region=None):
    """حواف العصي - Stick edges whose midpoint lies in region (default: the window)"""
    region = region or cfg.window
    return [dual_of(f) for f in region.edges() if is_stick_edge(cfg, dual_of(f))]


def stick_arrays(cfg):
    """
    مصفوفات العصي - On a torus, S_v[c, r] marks the vertical dual edge between
    vertex columns c and c+1 in row r; S_h[c, r] the horizontal dual edge
    between rows r and r+1 in column c (indices relative to the origin).
    """
    if not cfg.bc.is_periodic:
        raise GeometryError("stick arrays are computed on tori", cfg.window)
    cov_v = cfg.occ_v | np.roll(cfg.occ_v, 1, axis=1)
    cov_h = cfg.occ_h | np.roll(cfg.occ_h, 1, axis=0)
    s_v = cov_v & np.roll(cov_v, -1, axis=0)
    s_h = cov_h & np.roll(cov_h, -1, axis=1)
    return s_v, s_h


def stick_conflicts(cfg, region=None):
    """Dual vertices touched by stick edges of both orientations (always empty for valid configurations)"""
    if cfg.bc.is_periodic and region is None:
        s_v, s_h = stick_arrays(cfg)
        # dual vertex (c+1/2, r+1/2) ends s_v[c, r], s_v[c, r+1], s_h[c, r], s_h[c+1, r]
        touched_v = s_v | np.roll(s_v, -1, axis=1)
        touched_h = s_h | np.roll(s_h, -1, axis=0)
        ox, oy = cfg.window.origin
        return {(2 * (ox + c) + 1, 2 * (oy + r) + 1) for c, r in zip(*np.nonzero(touched_v & touched_h))}
    touched = {VERTICAL: set(), HORIZONTAL: set()}
    for d in stick_edges(cfg, region):
        touched[d.orientation].update(d.endpoints_d())
    return touched[VERTICAL] & touched[HORIZONTAL]


class Stick:
    """
    عصا - Maximal run of stick edges. axis is the doubled dual coordinate
    across the run, start/end the doubled extent along it. A cyclic stick
    wraps a whole torus line and has no ends.
    """

    def __init__(self, orientation, axis, start, end, cyclic=False):
        if end - start < 2:
            raise GeometryError("a stick has at least one dual edge", (axis, start, end))
        self.orientation = orientation
        self.axis = axis
        self.start = start
        self.end = end
        self.cyclic = cyclic

    @property
    def length(self):
        return (self.end - self.start) // 2

    def edges(self):
        mids = range(self.start + 1, self.end, 2)
        if self.orientation == VERTICAL:
            return [DualEdge(self.axis, m) for m in mids]
        return [DualEdge(m, self.axis) for m in mids]

    def translated(self, sxd, syd):
        if self.orientation == VERTICAL:
            return Stick(VERTICAL, self.axis + sxd, self.start + syd, self.end + syd, self.cyclic)
        return Stick(HORIZONTAL, self.axis + syd, self.start + sxd, self.end + sxd, self.cyclic)

    def __eq__(self, other):
        return isinstance(other, Stick) and (self.orientation, self.axis, self.start, self.end, self.cyclic) == \
            (other.orientation, other.axis, other.start, other.end, other.cyclic)

    def __hash__(self):
        return hash((self.orientation, self.axis, self.start, self.end, self.cyclic))

    def __repr__(self):
        tag = ", cyclic" if self.cyclic else ""
        return f"Stick({self.orientation}, axis={self.axis}, [{self.start}, {self.end}], len={self.length}{tag})"


def _runs(flags):
    """Maximal runs of True in a linear sequence, as (first, last) index pairs."""
    runs = []
    first = None
    for k, flag in enumerate(flags):
        if flag and first is None:
            first = k
        elif not flag and first is not None:
            runs.append((first, k - 1))
            first = None
    if first is not None:
        runs.append((first, len(flags) - 1))
    return runs


def _cyclic_runs(flags):
    """Maximal runs on a cycle; wrapping runs continue past the last index."""
    if all(flags):
        return None
    pivot = flags.index(False)
    rotated = flags[pivot:] + flags[:pivot]
    return [((a + pivot), (b + pivot)) for a, b in _runs(rotated)]


def _line_sticks(orientation, axis, coords, flags, cyclic, period_d):
    """Build sticks along one dual line from per-edge flags at midpoints coords."""
    found = []
    if cyclic:
        runs = _cyclic_runs(flags)
        if runs is None:
            return [Stick(orientation, axis, coords[0] - 1, coords[0] - 1 + period_d, cyclic=True)]
        n = len(flags)
        for a, b in runs:
            start = coords[a % n] - 1 + (a // n) * period_d
            end = coords[b % n] + 1 + (b // n) * period_d
            if a >= n:
                start -= period_d
                end -= period_d
            found.append(Stick(orientation, axis, start, end))
        return found
    for a, b in _runs(flags):
        found.append(Stick(orientation, axis, coords[a] - 1, coords[b] + 1))
    return found


def sticks(cfg, region=None):
    """
    العصي - Maximal runs of stick edges, ordered by orientation, axis, start.
    On a torus (region omitted) runs wrap around; otherwise they are cut at
    the region boundary.
    """
    wrap = cfg.bc.is_periodic and region is None
    region = region or cfg.window
    marked = set(stick_edges(cfg, region))
    found = []
    xs = range(region.x0d, region.x1d + 1)
    ys = range(region.y0d, region.y1d + 1)
    for axis in xs:
        if axis % 2 == 1:
            coords = [y for y in ys if y % 2 == 0]
            flags = [DualEdge(axis, y) in marked for y in coords]
            found += _line_sticks(VERTICAL, axis, coords, flags, wrap, 2 * region.L)
    for axis in ys:
        if axis % 2 == 1:
            coords = [x for x in xs if x % 2 == 0]
            flags = [DualEdge(x, axis) in marked for x in coords]
            found += _line_sticks(HORIZONTAL, axis, coords, flags, wrap, 2 * region.K)
    if wrap:
        # drop duplicates of boundary lines that coincide on the torus
        found = [s for s in found if (region.x0d < s.axis if s.orientation == VERTICAL else region.y0d < s.axis)]
    return found


def stick_length_histogram(stick_list):
    """مدرج الأطوال - Counts of stick lengths per orientation"""
    hist = {VERTICAL: Counter(), HORIZONTAL: Counter()}
    for s in stick_list:
        hist[s.orientation][s.length] += 1
    return hist


# ==================== Division ====================

class Segment:
    """قطعة موجهة - Axis-parallel segment {axis} x [start, end] in doubled coordinates"""

    def __init__(self, orientation, axis, start, end):
        self.orientation = orientation
        self.axis = axis
        self.start = start
        self.end = end

    @classmethod
    def of(cls, stick):
        if stick.cyclic:
            return cls(stick.orientation, stick.axis, float("-inf"), float("inf"))
        return cls(stick.orientation, stick.axis, stick.start, stick.end)

    def __repr__(self):
        return f"Segment({self.orientation}, axis={self.axis}, [{self.start}, {self.end}])"


def divides(seg, R):
    """يقسم - Strictly inside R across, covering R along (endpoints excluded across)"""
    if isinstance(seg, Stick):
        seg = Segment.of(seg)
    if seg.orientation == VERTICAL:
        return R.x0d < seg.axis < R.x1d and seg.start <= R.y0d and R.y1d <= seg.end
    return R.y0d < seg.axis < R.y1d and seg.start <= R.x0d and R.x1d <= seg.end


def properly_divides(seg, R, N=DEFAULT_N):
    return divides(seg, R) and divides(seg, R.shrunk(N))


def _images(stick, torus):
    if torus is None:
        return [stick]
    shifts_x = range(-2, 3)
    shifts_y = [0] if (stick.cyclic and stick.orientation == VERTICAL) else range(-2, 3)
    if stick.cyclic and stick.orientation == HORIZONTAL:
        shifts_x = [0]
    return [stick.translated(2 * torus.K * m, 2 * torus.L * n) for m in shifts_x for n in shifts_y]


# ==================== Psi grids ====================

class PsiGrid:
    """شبكة Psi - Grid points whose KN x LN rectangle is properly divided"""

    def __init__(self, K, L, N, orientation, points, shape):
        self.scaleK = K
        self.scaleL = L
        self.N = N
        self.orientation = orientation
        self.points = frozenset(points)
        self.shape = shape

    def rect_at(self, point, origin=(0, 0)):
        return Rect.anchored(origin[0] + point[0] * self.scaleK, origin[1] + point[1] * self.scaleL,
                             self.scaleK * self.N, self.scaleL * self.N)

    def mask(self):
        """Boolean array of shape self.shape marking the grid points"""
        out = np.zeros(self.shape, dtype=np.bool_)
        for x, y in self.points:
            out[x, y] = True
        return out

    def __len__(self):
        return len(self.points)

    def __repr__(self):
        return f"PsiGrid({self.orientation}, {self.scaleK}x{self.scaleL}, N={self.N}, {len(self.points)} points)"


def _grid_shape(torus, K, L, N):
    if torus.K % K or torus.L % L:
        raise GeometryError(f"grid scale {K}x{L} must divide the torus", torus)
    if K * N > torus.K or L * N > torus.L:
        raise GeometryError(f"rectangles {K * N}x{L * N} do not fit the torus", torus)
    if N <= 2:
        raise GeometryError(f"margin N must exceed 2, got {N}")
    return torus.K // K, torus.L // L


def _window_all(flags, length, axis):
    """For each start index, whether flags[start .. start+length-1] (cyclic along axis) are all set."""
    total = np.zeros(flags.shape, dtype=np.int64)
    for t in range(length):
        total += np.roll(flags, -t, axis=axis)
    return total == length


def psi_grid(cfg, K, L, N=DEFAULT_N, orientation=VERTICAL, method="direct"):
    """
    شبكة Psi - Points (x, y) such that a stick of the given orientation
    properly divides the KN x LN rectangle anchored at (xK - 1/2, yL - 1/2),
    with torus wraparound. method 'direct' scans the stick-edge arrays,
    'sticks' tests every stick against every rectangle.
    """
    torus = cfg.window
    gx, gy = _grid_shape(torus, K, L, N)
    if method == "sticks":
        return _psi_from_sticks(cfg, K, L, N, orientation, (gx, gy))
    s_v, s_h = stick_arrays(cfg)
    if orientation == VERTICAL:
        covered = _window_all(s_v, L * N, axis=1)[:, 0::L]
        cols = (np.arange(gx)[:, None] * K + np.arange(K, K * N - K - 1)[None, :]) % torus.K
        mask = covered[cols].any(axis=1)
    else:
        covered = _window_all(s_h, K * N, axis=0)[0::K, :]
        rows = (np.arange(gy)[:, None] * L + np.arange(L, L * N - L - 1)[None, :]) % torus.L
        mask = covered[:, rows].any(axis=2)
    points = [VertexId(int(x), int(y)) for x, y in zip(*np.nonzero(mask))]
    return PsiGrid(K, L, N, orientation, points, (gx, gy))


def _psi_from_sticks(cfg, K, L, N, orientation, shape):
    torus = cfg.window
    ox, oy = torus.origin
    grid = PsiGrid(K, L, N, orientation, (), shape)
    candidates = [s for s in sticks(cfg) if s.orientation == orientation]
    points = []
    for x in range(shape[0]):
        for y in range(shape[1]):
            R = grid.rect_at((x, y), (ox, oy))
            if any(properly_divides(img, R, N) for s in candidates for img in _images(s, torus)):
                points.append(VertexId(x, y))
    return PsiGrid(K, L, N, orientation, points, shape)


def box_adjacent_pairs(first, second):
    """أزواج متجاورة - Points of first Box-adjacent to a point of second, with wraparound"""
    gx, gy = first.shape
    if second.shape != first.shape:
        raise GeometryError(f"grid shapes differ: {first.shape} and {second.shape}")
    mine, theirs = first.mask(), second.mask()
    hits = []
    for sx, sy in step_offsets(BOX):
        both = mine & np.roll(theirs, (-sx, -sy), axis=(0, 1))
        hits += [(VertexId(int(x), int(y)), VertexId(int(x + sx) % gx, int(y + sy) % gy))
                 for x, y in zip(*np.nonzero(both))]
    return hits


# ==================== Percolation ====================

def percolation_report(grid, domain=None):
    """
    تقرير التسرب - Box components of the grid points within the domain
    (default: the grid's own fundamental domain, unrolled) with spanning flags.
    """
    gx, gy = domain or grid.shape
    points = [p for p in grid.points if 0 <= p[0] < gx and 0 <= p[1] < gy]
    parts = components(points, BOX)
    sizes = sorted((len(c) for c in parts), reverse=True)
    spans_h = any({p[0] for p in c} >= {0, gx - 1} for c in parts)
    spans_v = any({p[1] for p in c} >= {0, gy - 1} for c in parts)
    return {
        "component_sizes": sizes,
        "n_components": len(parts),
        "spans_horizontally": spans_h,
        "spans_vertically": spans_v,
        "largest_fraction": (sizes[0] / float(gx * gy)) if sizes else 0.0,
    }


def wilson_interval(successes, n, confidence=0.95):
    """فاصل ويلسون - Wilson score interval for a binomial proportion"""
    if n == 0:
        return 0.0, 1.0
    z = norm.ppf(0.5 + confidence / 2.0)
    p = successes / float(n)
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2.0 * n)) / denom
    half = z * np.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def escapes(point_set, u, d, domain=None):
    """
    Boxtimes path in the complement of point_set from u to sup-distance d,
    staying inside domain (gx, gy) when given.
    """
    u = VertexId(*u)
    blocked = {VertexId(*p) for p in point_set}
    if u in blocked:
        return False
    if d <= 0:
        return True
    seen = {u}
    queue = deque([u])
    while queue:
        p = queue.popleft()
        for sx, sy in step_offsets(BOXTIMES):
            q = VertexId(p.x + sx, p.y + sy)
            if q in seen or q in blocked:
                continue
            if domain is not None and not (0 <= q.x < domain[0] and 0 <= q.y < domain[1]):
                continue
            if max(abs(q.x - u.x), abs(q.y - u.y)) >= d:
                return True
            seen.add(q)
            queue.append(q)
    return False


def escape_probability(samples, u, d, domain=None, confidence=0.95):
    """احتمال الهروب - Fraction of samples with an escaping path, with Wilson interval"""
    if d < 1:
        raise GeometryError(f"escape distance must be at least 1, got {d}")
    hits = sum(1 for s in samples if escapes(s, u, d, domain))
    lower, upper = wilson_interval(hits, len(samples), confidence)
    return {"estimate": hits / float(len(samples)) if samples else 0.0,
            "lower": lower, "upper": upper, "n": len(samples)}


def rarity_estimate(samples, domain, block_sizes=(1, 2)):
    """
    تقدير الندرة - For B = complement of each sample within domain, the
    largest P(A in B)^(1/|A|) over translates of k x k blocks A.
    """
    gx, gy = domain
    masks = np.ones((len(samples), gx, gy), dtype=np.bool_)
    for s, points in enumerate(samples):
        for p in points:
            if 0 <= p[0] < gx and 0 <= p[1] < gy:
                masks[s, p[0], p[1]] = False
    result = {}
    for k in block_sizes:
        best = 0.0
        for x in range(gx - k + 1):
            for y in range(gy - k + 1):
                inside = masks[:, x:x + k, y:y + k].all(axis=(1, 2)).mean()
                best = max(best, float(inside) ** (1.0 / (k * k)))
        result[k] = best
    epsilon = max(result.values()) if result else 0.0
    return {"per_block": result, "epsilon": epsilon, "below_epsilon_0": epsilon < EPSILON_0}
