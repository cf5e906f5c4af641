"""
Square-lattice geometry in doubled coordinates
هندسة الشبكة المربعة - الحواف والرؤوس والمستطيلات والتحويلات

Every half-integer quantity is stored doubled, so all predicates are exact
integer comparisons. An edge is named by its doubled midpoint: horizontal
iff dx is odd, vertical iff dy is odd.
"""

from typing import NamedTuple

import networkx.utils as nx_utils

from model_errors import GeometryError


BOX = "box"
BOXTIMES = "boxtimes"

_BOX_STEPS = ((1, 0), (0, 1), (-1, 0), (0, -1))
_BOXTIMES_STEPS = tuple((dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1) if (dx, dy) != (0, 0))


# ==================== Vertices & Edges ====================

class VertexId(NamedTuple):
    """رأس في Z^2 - A vertex of the square lattice"""
    x: int
    y: int


class EdgeId(NamedTuple):
    """حافة بإحداثيات مضاعفة - An edge named by its doubled midpoint"""
    dx: int
    dy: int

    @property
    def horizontal(self):
        return self.dx % 2 == 1

    @property
    def vertical(self):
        return self.dy % 2 == 1

    def is_valid(self):
        return (self.dx % 2) != (self.dy % 2)

    def endpoints(self):
        """طرفا الحافة - The two lattice vertices of the edge, lower-left first"""
        if self.horizontal:
            return VertexId((self.dx - 1) // 2, self.dy // 2), VertexId((self.dx + 1) // 2, self.dy // 2)
        return VertexId(self.dx // 2, (self.dy - 1) // 2), VertexId(self.dx // 2, (self.dy + 1) // 2)

    def colinear(self, k):
        """الحافة المستقيمة رقم k - The k-th colinear edge along the edge's own axis"""
        if self.horizontal:
            return EdgeId(self.dx + 2 * k, self.dy)
        return EdgeId(self.dx, self.dy + 2 * k)


def edge_between(u, v):
    """الحافة بين رأسين متجاورين - Edge joining two Box-adjacent vertices"""
    if abs(u.x - v.x) + abs(u.y - v.y) != 1:
        raise GeometryError("vertices are not adjacent", (u, v))
    return EdgeId(u.x + v.x, u.y + v.y)


def incident_edges(v):
    """الحواف الأربع الواقعة على رأس - The four edges at v, ordered E, N, W, S"""
    return [
        EdgeId(2 * v.x + 1, 2 * v.y),
        EdgeId(2 * v.x, 2 * v.y + 1),
        EdgeId(2 * v.x - 1, 2 * v.y),
        EdgeId(2 * v.x, 2 * v.y - 1),
    ]


def line_neighbors(e):
    """الجيران في مخطط الخطوط - The six edges sharing a vertex with e"""
    neighbors = set()
    for v in e.endpoints():
        neighbors.update(incident_edges(v))
    neighbors.discard(e)
    return sorted(neighbors)


def ddag_neighbors(e):
    """
    الجيران في مخطط الخطوط الموسع - Line-graph neighbours of e plus the two
    colinear edges separated from e by exactly one edge.
    """
    if not e.is_valid():
        raise GeometryError("edge midpoint must have exactly one odd coordinate", e)
    neighbors = set(line_neighbors(e))
    neighbors.add(e.colinear(2))
    neighbors.add(e.colinear(-2))
    return sorted(neighbors)


# ==================== Rectangles ====================

class Rect:
    """مستطيل مغلق بزوايا نصف صحيحة - Closed rectangle with half-integer corners"""

    __slots__ = ("x0d", "y0d", "K", "L")

    def __init__(self, x0d, y0d, K, L):
        if x0d % 2 != 1 or y0d % 2 != 1:
            raise GeometryError("rectangle corners must be half-integers (odd doubled coordinates)", (x0d, y0d))
        if K < 1 or L < 1:
            raise GeometryError(f"rectangle dimensions must be positive, got {K}x{L}", (x0d, y0d))
        self.x0d = x0d
        self.y0d = y0d
        self.K = K
        self.L = L

    @classmethod
    def anchored(cls, x, y, K, L):
        """المستطيل ذو الزاوية (x-1/2, y-1/2) - Rectangle with lower-left corner (x-1/2, y-1/2)"""
        return cls(2 * x - 1, 2 * y - 1, K, L)

    @property
    def x1d(self):
        return self.x0d + 2 * self.K

    @property
    def y1d(self):
        return self.y0d + 2 * self.L

    @property
    def width(self):
        return self.K

    @property
    def height(self):
        return self.L

    @property
    def area(self):
        return self.K * self.L

    @property
    def origin(self):
        """أول رأس داخلي - Lowest-left lattice vertex inside the rectangle"""
        return VertexId((self.x0d + 1) // 2, (self.y0d + 1) // 2)

    def contains_d(self, pxd, pyd):
        return self.x0d <= pxd <= self.x1d and self.y0d <= pyd <= self.y1d

    def contains_vertex(self, v):
        return self.contains_d(2 * v.x, 2 * v.y)

    def contains_edge(self, e):
        """منتصف الحافة داخل المستطيل - Edge midpoint lies in the closed rectangle"""
        return self.contains_d(e.dx, e.dy)

    def encloses_edge(self, e):
        """الحافة بكاملها داخل المستطيل - Both endpoints of e lie in the rectangle"""
        return all(self.contains_vertex(v) for v in e.endpoints())

    def meets_segment(self, ad, bd):
        """تقاطع قطعة مع المستطيل - Closed segment (doubled endpoints) meets the rectangle"""
        lo_x, hi_x = min(ad[0], bd[0]), max(ad[0], bd[0])
        lo_y, hi_y = min(ad[1], bd[1]), max(ad[1], bd[1])
        return lo_x <= self.x1d and hi_x >= self.x0d and lo_y <= self.y1d and hi_y >= self.y0d

    def meets_edge(self, e):
        u, v = e.endpoints()
        return self.meets_segment((2 * u.x, 2 * u.y), (2 * v.x, 2 * v.y))

    def vertices(self):
        ox, oy = self.origin
        return [VertexId(ox + i, oy + j) for i in range(self.K) for j in range(self.L)]

    def edges(self):
        """كل الحواف ذات المنتصف داخل المستطيل - All edges with midpoint in the closed rectangle"""
        found = []
        for dx in range(self.x0d, self.x1d + 1):
            for dy in range(self.y0d, self.y1d + 1):
                if (dx % 2) != (dy % 2):
                    found.append(EdgeId(dx, dy))
        return found

    def translated(self, sxd, syd):
        return Rect(self.x0d + sxd, self.y0d + syd, self.K, self.L)

    def padded(self, p):
        """توسيع بمقدار p من كل جهة - Grow by p lattice units on each side"""
        return Rect(self.x0d - 2 * p, self.y0d - 2 * p, self.K + 2 * p, self.L + 2 * p)

    def shrunk(self, N):
        """المستطيل المركزي المصغر - Concentric rectangle scaled by 1 - 2/N"""
        if self.K % N or self.L % N:
            raise GeometryError(f"{self.K}x{self.L} rectangle is not divisible by N={N}", self)
        mx, my = self.K // N, self.L // N
        if self.K - 2 * mx < 1 or self.L - 2 * my < 1:
            raise GeometryError(f"shrinking by N={N} leaves an empty rectangle", self)
        return Rect(self.x0d + 2 * mx, self.y0d + 2 * my, self.K - 2 * mx, self.L - 2 * my)

    def is_block_of(self, other):
        return other.K % (2 * self.K) == 0 and other.L % (2 * self.L) == 0

    def key(self):
        return (self.x0d, self.y0d, self.K, self.L)

    def __eq__(self, other):
        return isinstance(other, Rect) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"Rect(corner=({self.x0d}/2, {self.y0d}/2), {self.K}x{self.L})"


# ==================== Torus wrapping ====================

def _wrap_d(value, start, period_d):
    return start + (value - start) % period_d


def wrap_vertex(v, torus):
    """ارجاع الرأس الى الحلقة - Reduce a vertex onto the torus fundamental domain"""
    ox, oy = torus.origin
    return VertexId(ox + (v.x - ox) % torus.K, oy + (v.y - oy) % torus.L)


def wrap_edge(e, torus):
    """ارجاع الحافة الى الحلقة - Reduce an edge onto the torus fundamental domain"""
    ox, oy = torus.origin
    return EdgeId(_wrap_d(e.dx, 2 * ox, 2 * torus.K), _wrap_d(e.dy, 2 * oy, 2 * torus.L))


def torus_edges(torus):
    """حواف الحلقة - One representative per torus edge, lexicographic"""
    ox, oy = torus.origin
    edges = []
    for i in range(torus.K):
        for j in range(torus.L):
            edges.append(EdgeId(2 * (ox + i) + 1, 2 * (oy + j)))
            edges.append(EdgeId(2 * (ox + i), 2 * (oy + j) + 1))
    return sorted(edges)


# ==================== Isometries ====================

class Isometry:
    """
    تحويل متساوي القياس - Affine map x -> sx*x + tx, y -> sy*y + ty acting on
    doubled coordinates, with sx, sy in {+1, -1}.
    """

    __slots__ = ("sx", "tx", "sy", "ty")

    def __init__(self, sx=1, tx=0, sy=1, ty=0):
        if sx not in (1, -1) or sy not in (1, -1):
            raise GeometryError("isometry scales must be +1 or -1")
        if tx % 2 or ty % 2:
            raise GeometryError("isometry offsets must preserve the half-integer grid", (tx, ty))
        self.sx, self.tx, self.sy, self.ty = sx, tx, sy, ty

    @classmethod
    def translation(cls, vx, vy):
        """ازاحة بمتجه صحيح - Translation by an integer lattice vector"""
        return cls(1, 2 * vx, 1, 2 * vy)

    @classmethod
    def reflection_x(cls, cd):
        """انعكاس حول خط عمودي - Reflection across the vertical line x = cd/2"""
        return cls(-1, 2 * cd, 1, 0)

    @classmethod
    def reflection_y(cls, cd):
        """انعكاس حول خط أفقي - Reflection across the horizontal line y = cd/2"""
        return cls(1, 0, -1, 2 * cd)

    @property
    def kind(self):
        if self.sx == 1 and self.sy == 1:
            return "identity" if self.tx == 0 and self.ty == 0 else "translation"
        return "reflection"

    def apply_d(self, xd, yd):
        return self.sx * xd + self.tx, self.sy * yd + self.ty

    def apply_edge(self, e):
        return EdgeId(*self.apply_d(e.dx, e.dy))

    def apply_vertex(self, v):
        xd, yd = self.apply_d(2 * v.x, 2 * v.y)
        return VertexId(xd // 2, yd // 2)

    def apply_rect(self, r):
        ax, ay = self.apply_d(r.x0d, r.y0d)
        bx, by = self.apply_d(r.x1d, r.y1d)
        return Rect(min(ax, bx), min(ay, by), r.K, r.L)

    def compose(self, other):
        """التركيب self بعد other - The map applying other first, then self"""
        return Isometry(self.sx * other.sx, self.sx * other.tx + self.tx,
                        self.sy * other.sy, self.sy * other.ty + self.ty)

    def __eq__(self, other):
        return isinstance(other, Isometry) and (self.sx, self.tx, self.sy, self.ty) == (other.sx, other.tx, other.sy, other.ty)

    def __hash__(self):
        return hash((self.sx, self.tx, self.sy, self.ty))

    def __repr__(self):
        return f"Isometry({self.kind}, x->{self.sx}x{self.tx:+d}, y->{self.sy}y{self.ty:+d})"


def _axis_map(start_d, size, m):
    # image of [start, start+size] onto the m-th grid translate
    if m % 2 == 0:
        return 1, 2 * m * size
    return -1, 2 * start_d + 2 * (m + 1) * size


def block_transforms(R, torus):
    """
    مجموعة الانعكاسات للكتلة - The reflection group of R modulo the torus
    periods: one isometry per grid translate R + (mK, nL), each a product of
    reflections across the grid lines of R.
    """
    if not R.is_block_of(torus):
        raise GeometryError(f"{R!r} is not a block of {torus!r}", R)
    transforms = []
    for m in range(torus.K // R.K):
        sx, tx = _axis_map(R.x0d, R.K, m)
        for n in range(torus.L // R.L):
            sy, ty = _axis_map(R.y0d, R.L, n)
            transforms.append(Isometry(sx, tx, sy, ty))
    return transforms


# ==================== Connectivity ====================

class UnionFind(nx_utils.UnionFind):
    """اتحاد-بحث - networkx disjoint sets with sorted component listing"""

    def groups(self):
        """المكونات مرتبة - Components as sorted lists, ordered by their smallest member"""
        return sorted((sorted(group) for group in self.to_sets()), key=lambda g: g[0])


def step_offsets(connectivity):
    if connectivity == BOX:
        return _BOX_STEPS
    if connectivity == BOXTIMES:
        return _BOXTIMES_STEPS
    raise GeometryError(f"unknown connectivity '{connectivity}'")


def components(points, connectivity=BOX, period=None):
    """
    المكونات المتصلة - Connected components of a finite point set under Box
    (1-norm) or Boxtimes (sup-norm) steps. With period=(px, py) steps wrap
    around a px-by-py torus of grid indices.
    """
    steps = step_offsets(connectivity)
    point_set = {VertexId(*p) for p in points}
    uf = UnionFind(point_set)
    for p in point_set:
        for sx, sy in steps:
            q = VertexId(p.x + sx, p.y + sy)
            if period is not None:
                q = VertexId(q.x % period[0], q.y % period[1])
            if q in point_set:
                uf.union(p, q)
    return uf.groups()
