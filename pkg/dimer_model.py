"""
Monomer-dimer configurations and the shifted Heilmann-Lieb Hamiltonian
نموذج المونومر-ثنائي - الإعدادات وشروط الحدود والطاقة

The energy is a sum of vacancy potentials (one per vertex, (lambda+a)/2 when
the vertex is vacant) and broken-link potentials (one per middle edge f,
a/2 when exactly one of the colinear neighbours f-1, f+1 is occupied).
On a window the potentials whose support meets the closed window are
counted; on a torus one representative per translation class.
"""

import logging
import math
from functools import lru_cache

import numpy as np

from lattice import EdgeId, Rect, VertexId, incident_edges, torus_edges, wrap_edge, wrap_vertex
from model_errors import GeometryError, InvalidMoveError, ModelError

logger = logging.getLogger(__name__)

PERIODIC = "periodic"
VACANT = "vacant"
PRESCRIBED = "prescribed"


# ==================== Parameters ====================

class ModelParams:
    """معاملات النموذج - Inverse temperature, chemical potential and attraction"""

    __slots__ = ("beta", "lam", "a")

    def __init__(self, beta, lam, a):
        if not beta > 0:
            raise ModelError(f"beta must be positive, got {beta}")
        if not a > 0:
            raise ModelError(f"attraction a must be positive, got {a}")
        self.beta = float(beta)
        self.lam = float(lam)
        self.a = float(a)

    @property
    def log_vacancy_weight(self):
        return -self.beta * (self.lam + self.a) / 2.0

    @property
    def log_link_weight(self):
        return -self.beta * self.a / 2.0

    @property
    def vacancy_weight(self):
        return math.exp(self.log_vacancy_weight)

    @property
    def link_weight(self):
        return math.exp(self.log_link_weight)

    @property
    def log_ell0(self):
        return self.beta * (self.lam + 3.0 * self.a) / 2.0

    @property
    def ell0(self):
        return math.exp(self.log_ell0)

    @property
    def nematic_regime(self):
        return self.lam + self.a > 0 and self.a > self.lam / 3.0

    def with_beta(self, beta):
        return ModelParams(beta, self.lam, self.a)

    def as_dict(self):
        return {"beta": self.beta, "lambda": self.lam, "a": self.a}

    def __eq__(self, other):
        return isinstance(other, ModelParams) and (self.beta, self.lam, self.a) == (other.beta, other.lam, other.a)

    def __hash__(self):
        return hash((self.beta, self.lam, self.a))

    def __repr__(self):
        return f"ModelParams(beta={self.beta}, lambda={self.lam}, a={self.a})"


# ==================== Boundary conditions ====================

class PeriodicPattern:
    """
    نمط دوري مرجعي - Reference configuration repeated with period (px, py).
    Edges are stored reduced into the doubled cell [0, 2px) x [0, 2py).
    """

    def __init__(self, px, py, edges=()):
        if not (1 <= px <= 4 and 1 <= py <= 4):
            raise ModelError(f"pattern periods must lie in 1..4, got ({px}, {py})")
        self.px = px
        self.py = py
        self.edges = frozenset(EdgeId(e[0] % (2 * px), e[1] % (2 * py)) for e in edges)
        for e in self.edges:
            if not e.is_valid():
                raise ModelError("pattern edge has invalid parity", e)
        for i in range(px):
            for j in range(py):
                covering = [f for f in incident_edges(VertexId(i, j)) if self.occupied(f)]
                if len(covering) > 1:
                    raise ModelError("reference pattern violates hard-core", VertexId(i, j))

    @classmethod
    def row_packed(cls):
        """صفوف معبأة - Horizontal dimers (0,1), (2,3), ... in every row"""
        return cls(2, 1, [EdgeId(1, 0)])

    @classmethod
    def column_packed(cls):
        """أعمدة معبأة - Vertical dimers (0,1), (2,3), ... in every column"""
        return cls(1, 2, [EdgeId(0, 1)])

    def occupied(self, e):
        return EdgeId(e.dx % (2 * self.px), e.dy % (2 * self.py)) in self.edges

    def descriptor(self):
        body = ",".join(f"{e.dx}/{e.dy}" for e in sorted(self.edges))
        return f"{self.px}:{self.py}:{body}"

    @classmethod
    def from_descriptor(cls, text):
        try:
            px, py, body = text.split(":", 2)
            edges = []
            for item in filter(None, body.split(",")):
                dx, dy = item.split("/")
                edges.append(EdgeId(int(dx), int(dy)))
            return cls(int(px), int(py), edges)
        except ValueError as exc:
            raise ModelError(f"malformed pattern descriptor '{text}'") from exc

    def __eq__(self, other):
        return isinstance(other, PeriodicPattern) and (self.px, self.py, self.edges) == (other.px, other.py, other.edges)

    def __hash__(self):
        return hash((self.px, self.py, self.edges))

    def __repr__(self):
        return f"PeriodicPattern({self.descriptor()})"


class BoundaryCondition:
    """شرط الحدود - Periodic, vacant, or prescribed by a periodic pattern"""

    def __init__(self, variant, pattern=None):
        if variant not in (PERIODIC, VACANT, PRESCRIBED):
            raise ModelError(f"unknown boundary condition '{variant}'")
        if (variant == PRESCRIBED) != (pattern is not None):
            raise ModelError("a reference pattern is required exactly for prescribed boundaries")
        self.variant = variant
        self.pattern = pattern

    @classmethod
    def periodic(cls):
        return cls(PERIODIC)

    @classmethod
    def vacant(cls):
        return cls(VACANT)

    @classmethod
    def prescribed(cls, pattern):
        return cls(PRESCRIBED, pattern)

    @property
    def is_periodic(self):
        return self.variant == PERIODIC

    def outside_occupied(self, e):
        return self.variant == PRESCRIBED and self.pattern.occupied(e)

    def token(self):
        if self.variant == PRESCRIBED:
            return f"PRESCRIBED:{self.pattern.descriptor()}"
        return self.variant.upper()

    @classmethod
    def from_token(cls, token):
        upper = token.upper()
        if upper == "PERIODIC":
            return cls.periodic()
        if upper == "VACANT":
            return cls.vacant()
        if upper.startswith("PRESCRIBED:"):
            return cls.prescribed(PeriodicPattern.from_descriptor(token.split(":", 1)[1]))
        raise ModelError(f"unknown boundary token '{token}'")

    def __eq__(self, other):
        return isinstance(other, BoundaryCondition) and (self.variant, self.pattern) == (other.variant, other.pattern)

    def __hash__(self):
        return hash((self.variant, self.pattern))

    def __repr__(self):
        return f"BoundaryCondition({self.token()})"


# ==================== Configurations ====================

class ValidationResult:
    """نتيجة التحقق - ok, or a vertex witnessing a hard-core violation"""

    __slots__ = ("ok", "vertex")

    def __init__(self, vertex=None):
        self.vertex = vertex
        self.ok = vertex is None

    def __bool__(self):
        return self.ok

    def __repr__(self):
        return "ok" if self.ok else f"violation({self.vertex.x}, {self.vertex.y})"


class DimerConfig:
    """
    إعداد الثنائيات - Edge occupancy on a window plus its boundary condition.

    Periodic windows store every torus edge: occ_h[i, j] is the edge from
    vertex (ox+i, oy+j) to the right, occ_v[i, j] the edge upwards. Other
    windows store exactly the edges whose midpoint lies in the closed window.
    """

    def __init__(self, window, bc, occ_h=None, occ_v=None):
        self.window = window
        self.bc = bc
        ox, oy = window.origin
        if bc.is_periodic and (window.K < 2 or window.L < 2):
            raise GeometryError("tori need width and height of at least 2", window)
        if bc.is_periodic:
            self.h_origin, h_shape = (ox, oy), (window.K, window.L)
            self.v_origin, v_shape = (ox, oy), (window.K, window.L)
        else:
            self.h_origin, h_shape = (ox - 1, oy), (window.K + 1, window.L)
            self.v_origin, v_shape = (ox, oy - 1), (window.K, window.L + 1)
        self.occ_h = np.zeros(h_shape, dtype=np.bool_) if occ_h is None else np.asarray(occ_h, dtype=np.bool_)
        self.occ_v = np.zeros(v_shape, dtype=np.bool_) if occ_v is None else np.asarray(occ_v, dtype=np.bool_)
        if self.occ_h.shape != h_shape or self.occ_v.shape != v_shape:
            raise GeometryError("occupancy arrays do not match the window", window)

    # ---------- construction ----------

    @classmethod
    def empty(cls, window, bc):
        return cls(window, bc)

    @classmethod
    def from_edges(cls, window, bc, edges):
        cfg = cls(window, bc)
        for e in edges:
            cfg.set_edge(e, True)
        return cfg

    @classmethod
    def packed(cls, torus, orientation):
        """تعبئة كاملة على حلقة - Fully packed torus, 'vertical' or 'horizontal'"""
        if torus.K % 2 or torus.L % 2:
            raise GeometryError("packed initial states need an even torus", torus)
        cfg = cls(torus, BoundaryCondition.periodic())
        if orientation == "vertical":
            cfg.occ_v[:, 0::2] = True
        elif orientation == "horizontal":
            cfg.occ_h[0::2, :] = True
        else:
            raise ModelError(f"unknown packing orientation '{orientation}'")
        return cfg

    def copy(self):
        return DimerConfig(self.window, self.bc, self.occ_h.copy(), self.occ_v.copy())

    # ---------- edge access ----------

    def _index(self, e):
        if self.bc.is_periodic:
            e = wrap_edge(e, self.window)
        elif not self.window.contains_edge(e):
            return None
        if e.horizontal:
            return self.occ_h, (e.dx - 1) // 2 - self.h_origin[0], e.dy // 2 - self.h_origin[1]
        return self.occ_v, e.dx // 2 - self.v_origin[0], (e.dy - 1) // 2 - self.v_origin[1]

    def occupied(self, e):
        slot = self._index(e)
        if slot is None:
            return self.bc.outside_occupied(e)
        arr, i, j = slot
        return bool(arr[i, j])

    def set_edge(self, e, value):
        slot = self._index(e)
        if slot is None:
            raise GeometryError("edge is not stored in this window", e)
        arr, i, j = slot
        arr[i, j] = value

    def stored_edges(self):
        """الحواف الحرة - Every stored edge, lexicographic by doubled coordinates"""
        if self.bc.is_periodic:
            return torus_edges(self.window)
        return self.window.edges()

    def occupied_edges(self):
        hx, hy = self.h_origin
        vx, vy = self.v_origin
        edges = [EdgeId(2 * (i + hx) + 1, 2 * (j + hy)) for i, j in zip(*np.nonzero(self.occ_h))]
        edges += [EdgeId(2 * (i + vx), 2 * (j + vy) + 1) for i, j in zip(*np.nonzero(self.occ_v))]
        return sorted(edges)

    def dimer_count(self):
        return int(self.occ_h.sum() + self.occ_v.sum())

    def covered(self, v):
        return any(self.occupied(f) for f in incident_edges(v))

    def in_window(self, v):
        return self.bc.is_periodic or self.window.contains_vertex(v)

    def insertable(self, e):
        """قابلية الإضافة - e is unoccupied and both endpoints are free"""
        if self.occupied(e):
            return False
        for v in e.endpoints():
            if not self.in_window(v) and self.bc.variant == VACANT:
                return False
            if self.covered(v):
                return False
        return True

    def key(self):
        return (self.window.key(), self.bc, self.occ_h.tobytes(), self.occ_v.tobytes())

    def __eq__(self, other):
        return isinstance(other, DimerConfig) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"DimerConfig({self.window!r}, {self.bc.token()}, dimers={self.dimer_count()})"

    # ---------- text format ----------

    def to_text(self):
        """التسلسل النصي - Header 'W H BC [X0D Y0D]' then one 'dx dy' line per dimer"""
        header = f"{self.window.K} {self.window.L} {self.bc.token()}"
        if (self.window.x0d, self.window.y0d) != (-1, -1):
            header += f" {self.window.x0d} {self.window.y0d}"
        lines = [header] + [f"{e.dx} {e.dy}" for e in self.occupied_edges()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        rows = [line.split() for line in text.splitlines() if line.strip()]
        if not rows or len(rows[0]) not in (3, 5):
            raise ModelError("configuration header must read 'W H BC [X0D Y0D]'")
        head = rows[0]
        try:
            x0d, y0d = (int(head[3]), int(head[4])) if len(head) == 5 else (-1, -1)
            K, L = int(head[0]), int(head[1])
        except ValueError:
            raise ModelError("configuration header has non-integer fields", " ".join(head))
        window = Rect(x0d, y0d, K, L)
        bc = BoundaryCondition.from_token(head[2])
        edges = []
        for n, row in enumerate(rows[1:], start=2):
            if len(row) != 2:
                raise ModelError(f"malformed edge line {n}: expected 'dx dy'", " ".join(row))
            try:
                e = EdgeId(int(row[0]), int(row[1]))
            except ValueError:
                raise ModelError(f"malformed edge line {n}: non-integer coordinates", " ".join(row))
            if not e.is_valid():
                raise ModelError("edge line has invalid parity", e)
            edges.append(e)
        return cls.from_edges(window, bc, edges)


def validate(cfg):
    """التحقق من شرط النواة الصلبة - ok, or the first vertex covered twice"""
    for e in cfg.occupied_edges():
        for v in e.endpoints():
            if cfg.bc.variant == VACANT and not cfg.in_window(v):
                return ValidationResult(v)
            if sum(cfg.occupied(f) for f in incident_edges(v)) > 1:
                return ValidationResult(wrap_vertex(v, cfg.window) if cfg.bc.is_periodic else v)
    return ValidationResult()


# ==================== Defects ====================

def vacancies(cfg, region):
    return [v for v in region.vertices() if not cfg.covered(v)]


def is_broken_link(cfg, f):
    return cfg.occupied(f.colinear(-1)) != cfg.occupied(f.colinear(1))


def broken_links(cfg, region):
    """الروابط المكسورة - Edges in region next to exactly one colinear dimer"""
    return [f for f in region.edges() if is_broken_link(cfg, f)]


@lru_cache(maxsize=256)
def potential_supports(window, periodic):
    """
    دعائم الكمونات - The counted vacancy sites and broken-link middle edges.
    Torus: one per vertex and one per edge. Window: those whose support
    meets the closed window.
    """
    if periodic:
        return tuple(window.vertices()), tuple(torus_edges(window))
    grown = window.padded(1)
    sites = tuple(v for v in grown.vertices() if any(window.contains_edge(f) for f in incident_edges(v)))
    middles = tuple(
        f for f in grown.edges()
        if window.contains_edge(f) or window.contains_edge(f.colinear(-1)) or window.contains_edge(f.colinear(1))
    )
    return sites, middles


def _check_window(cfg, lam_rect):
    if cfg.bc.is_periodic:
        if lam_rect != cfg.window:
            raise GeometryError("periodic energy requires the torus itself as the volume", lam_rect)
    elif not (cfg.window.x0d <= lam_rect.x0d and cfg.window.y0d <= lam_rect.y0d
              and lam_rect.x1d <= cfg.window.x1d and lam_rect.y1d <= cfg.window.y1d):
        raise GeometryError("volume must lie inside the stored window", lam_rect)


def defect_counts(cfg, lam_rect):
    """عدد العيوب المحسوبة - (counted vacancies, counted broken links) for volume lam_rect"""
    _check_window(cfg, lam_rect)
    sites, middles = potential_supports(lam_rect, cfg.bc.is_periodic)
    n_vac = sum(1 for v in sites if not cfg.covered(v))
    n_broken = sum(1 for f in middles if is_broken_link(cfg, f))
    return n_vac, n_broken


def energy(cfg, lam_rect, params):
    n_vac, n_broken = defect_counts(cfg, lam_rect)
    return (params.lam + params.a) / 2.0 * n_vac + params.a / 2.0 * n_broken


def log_weight(cfg, lam_rect, params):
    n_vac, n_broken = defect_counts(cfg, lam_rect)
    return n_vac * params.log_vacancy_weight + n_broken * params.log_link_weight


def weight(cfg, lam_rect, params):
    return math.exp(log_weight(cfg, lam_rect, params))


def energy_delta(cfg, e, params):
    """
    فرق الطاقة المحلي - Energy change of toggling edge e (delete if occupied,
    insert otherwise), from the two endpoint vacancy potentials and the
    broken-link potentials centred on the colinear neighbours of e.
    """
    removing = cfg.occupied(e)
    if not removing and not cfg.insertable(e):
        raise InvalidMoveError("insertion would violate hard-core", e)
    if not cfg.bc.is_periodic and not cfg.window.contains_edge(e):
        raise InvalidMoveError("edge is fixed by the boundary condition", e)

    same = (lambda f: wrap_edge(f, cfg.window) == wrap_edge(e, cfg.window)) if cfg.bc.is_periodic else (lambda f: f == e)

    def after(f):
        return (not removing) if same(f) else cfg.occupied(f)

    delta_vac = 2 if removing else -2
    seen = set()
    delta_broken = 0
    for k in (-1, 1):
        middle = e.colinear(k)
        tag = wrap_edge(middle, cfg.window) if cfg.bc.is_periodic else middle
        if tag in seen:
            continue
        seen.add(tag)
        lo, hi = middle.colinear(-1), middle.colinear(1)
        before_fires = cfg.occupied(lo) != cfg.occupied(hi)
        after_fires = after(lo) != after(hi)
        delta_broken += int(after_fires) - int(before_fires)
    return (params.lam + params.a) / 2.0 * delta_vac + params.a / 2.0 * delta_broken


def apply_toggle(cfg, e):
    """تطبيق الحركة - Toggle e in place after checking the move is legal"""
    if not cfg.occupied(e) and not cfg.insertable(e):
        raise InvalidMoveError("insertion would violate hard-core", e)
    cfg.set_edge(e, not cfg.occupied(e))


# ==================== Observables ====================

def linked_pairs(cfg):
    """أزواج مرتبطة - Colinear dimer pairs separated by exactly one edge (torus)"""
    return sum(1 for e in cfg.occupied_edges() if cfg.occupied(e.colinear(2)))


def formal_hamiltonian(cfg, params):
    """-lambda |sigma| - a (number of links), on a torus"""
    if not cfg.bc.is_periodic:
        raise GeometryError("the formal Hamiltonian is defined on tori", cfg.window)
    return -params.lam * cfg.dimer_count() - params.a * linked_pairs(cfg)


def dimer_densities(cfg):
    """كثافات الثنائيات - Fraction of occupied vertical/horizontal edges and vacant vertices"""
    n_vertices = cfg.window.area
    vertical = float(cfg.occ_v.sum()) / cfg.occ_v.size
    horizontal = float(cfg.occ_h.sum()) / cfg.occ_h.size
    if cfg.bc.is_periodic:
        vacant = 1.0 - 2.0 * cfg.dimer_count() / n_vertices
    else:
        vacant = len(vacancies(cfg, cfg.window)) / n_vertices
    return {"vertical": vertical, "horizontal": horizontal, "vacancy": vacant}


def vertical_edge_partition(cfg, e):
    """
    تصنيف حافة عمودية - 'E1' if e or a colinear neighbour is occupied,
    'E2' if a horizontal dimer touches an endpoint, 'E3' if an endpoint is vacant.
    """
    if not e.vertical:
        raise GeometryError("edge must be vertical", e)
    if cfg.occupied(e) or cfg.occupied(e.colinear(-1)) or cfg.occupied(e.colinear(1)):
        return "E1"
    for v in e.endpoints():
        if any(cfg.occupied(f) for f in incident_edges(v) if f.horizontal):
            return "E2"
    return "E3"
