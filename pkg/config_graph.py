"""
Configuration graphs of vacant-boundary windows
مخططات الإعدادات - بناء المخطط الثنائي وتصنيف الحواف والمكونات الفرعية والضغط

Dual vertices are stored as doubled coordinates (both odd). The graph lives
on the closed window padded by one unit on each side. A dual edge is present
unless the lattice edge it crosses is a dimer or the middle of a link.
"""

import logging

import networkx as nx

from dimer_model import VACANT, is_broken_link
from lattice import EdgeId, VertexId
from model_errors import GeometryError, ModelError, PreconditionError
from order_parameters import HORIZONTAL, VERTICAL, DualEdge, Segment, sticks

logger = logging.getLogger(__name__)

LABEL_STICK = "s"
LABEL_BROKEN = "b"
LABEL_VACANCY = "v"
LABEL_BOTH = "bv"


def surrounding_dual_vertices(v):
    """The four dual vertices around lattice vertex v"""
    return [(2 * v.x + sx, 2 * v.y + sy) for sx in (-1, 1) for sy in (-1, 1)]


def _is_link_middle(cfg, f):
    return cfg.occupied(f.colinear(-1)) and cfg.occupied(f.colinear(1))


def edge_label(cfg, f):
    """وسم الحافة - Label of the dual edge crossing f, or None if it is blocked"""
    if cfg.occupied(f) or _is_link_middle(cfg, f):
        return None
    vacancy = any(not cfg.covered(u) for u in f.endpoints())
    broken = is_broken_link(cfg, f)
    if vacancy and broken:
        return LABEL_BOTH
    if vacancy:
        return LABEL_VACANCY
    if broken:
        return LABEL_BROKEN
    return LABEL_STICK


class ConfigGraph:
    """
    مخطط الإعداد - Labelled dual graph of a vacant-boundary configuration.

    graph holds dual vertices in the padded window; every edge carries its
    label and the crossed lattice edge. vacancies and broken_links list the
    defects that belong to the graph.
    """

    def __init__(self, cfg, lam=None):
        if cfg.bc.variant != VACANT:
            raise PreconditionError("configuration graphs need the vacant boundary condition", cfg.bc.token())
        lam = lam or cfg.window
        if lam != cfg.window:
            raise GeometryError("the volume must be the stored window", lam)
        self.cfg = cfg
        self.window = lam
        self.outer = lam.padded(1)
        self.graph = nx.Graph()
        self._build()
        if not nx.is_connected(self.graph):
            raise ModelError("configuration graph is disconnected", lam)
        self.vacancies = [v for v in self.outer_vertices() if not cfg.covered(v) and self._holds_vacancy(v)]
        self.broken_links = [f for _, _, f in self.graph.edges(data="edge") if is_broken_link(cfg, f)]
        self.sticks = sticks(cfg, self.outer)

    def _build(self):
        outer = self.outer
        nodes = [(xd, yd) for xd in range(outer.x0d, outer.x1d + 1, 2) for yd in range(outer.y0d, outer.y1d + 1, 2)]
        self.graph.add_nodes_from(nodes)
        for xd, yd in nodes:
            for nxd, nyd in ((xd + 2, yd), (xd, yd + 2)):
                if nxd > outer.x1d or nyd > outer.y1d:
                    continue
                f = EdgeId((xd + nxd) // 2, (yd + nyd) // 2)
                label = edge_label(self.cfg, f)
                if label is not None:
                    self.graph.add_edge((xd, yd), (nxd, nyd), label=label, edge=f)

    def outer_vertices(self):
        """Lattice vertices strictly inside the padded window"""
        ox, oy = self.outer.origin
        return [VertexId(ox + i, oy + j) for i in range(self.outer.K) for j in range(self.outer.L)]

    def _holds_vacancy(self, v):
        a, b, c, d = surrounding_dual_vertices(v)
        # a=(-,-) b=(-,+) c=(+,-) d=(+,+)
        return all(self.graph.has_edge(p, q) for p, q in ((a, b), (a, c), (b, d), (c, d)))

    @property
    def v_count(self):
        return len(self.vacancies)

    @property
    def b_count(self):
        return len(self.broken_links)

    def log_weight(self, params):
        return self.v_count * params.log_vacancy_weight + self.b_count * params.log_link_weight

    def labels(self):
        return {(p, q): label for p, q, label in self.graph.edges(data="label")}

    def dump(self):
        """One line per dual edge: x1d y1d x2d y2d LABEL"""
        lines = []
        for p, q, label in self.graph.edges(data="label"):
            p, q = sorted((p, q))
            lines.append(f"{p[0]} {p[1]} {q[0]} {q[1]} {label}")
        return "\n".join(sorted(lines)) + "\n"

    def __repr__(self):
        return (f"ConfigGraph({self.window!r}, |V|={self.graph.number_of_nodes()}, "
                f"|E|={self.graph.number_of_edges()}, v={self.v_count}, b={self.b_count})")


def build(cfg, lam=None):
    return ConfigGraph(cfg, lam)


# ==================== Sub-components ====================

def _is_stick_of(graph, p, q, orientation):
    data = graph.edges[p, q]
    if data["label"] != LABEL_STICK:
        return False
    return DualEdge(*data["edge"]).orientation == orientation


def _oriented_parts(graph, orientation):
    """Nontrivial components after removing stick edges of the other orientation"""
    other = HORIZONTAL if orientation == VERTICAL else VERTICAL
    kept = nx.Graph()
    kept.add_nodes_from(graph.nodes)
    kept.add_edges_from((p, q) for p, q in graph.edges if not _is_stick_of(graph, p, q, other))
    return [set(c) for c in nx.connected_components(kept) if len(c) > 1]


class SubComponents:
    """المكونات الفرعية - Vertical and horizontal sub-components as dual-vertex sets"""

    def __init__(self, vertical, horizontal):
        self.vertical = vertical
        self.horizontal = horizontal

    @property
    def k_ver(self):
        return len(self.vertical)

    @property
    def k_hor(self):
        return len(self.horizontal)

    @property
    def k(self):
        return self.k_ver + self.k_hor

    def as_tuple(self):
        return self.k_ver, self.k_hor, self.k

    def __repr__(self):
        return f"SubComponents(k_ver={self.k_ver}, k_hor={self.k_hor})"


def sub_component_sets(G):
    graph = G.graph if isinstance(G, (ConfigGraph, CompressedGraph)) else G
    return SubComponents(_oriented_parts(graph, VERTICAL), _oriented_parts(graph, HORIZONTAL))


def sub_components(G):
    """(k_ver, k_hor, k)"""
    return sub_component_sets(G).as_tuple()


# ==================== Compression ====================

class CompressedGraph:
    """المخطط المضغوط - Each stick replaced by one s-edge between its endpoints"""

    def __init__(self, graph, source):
        self.graph = graph
        self.source = source

    @property
    def counts(self):
        return sub_components(self)

    def __repr__(self):
        return f"CompressedGraph(|V|={self.graph.number_of_nodes()}, |E|={self.graph.number_of_edges()})"


def _stick_end_vertices(stick):
    if stick.orientation == VERTICAL:
        return (stick.axis, stick.start), (stick.axis, stick.end)
    return (stick.start, stick.axis), (stick.end, stick.axis)


def compress(G):
    graph = G.graph.copy()
    for stick in G.sticks:
        if stick.length < 2:
            continue
        first, last = _stick_end_vertices(stick)
        inner = [d.endpoints_d()[1] for d in stick.edges()[:-1]]
        graph.remove_nodes_from(inner)
        graph.add_edge(first, last, label=LABEL_STICK, edge=stick.edges()[0].bisected, length=stick.length)
    return CompressedGraph(graph, G)


# ==================== Event membership ====================

def _stick_region(cfg):
    return None if cfg.bc.is_periodic else cfg.window.padded(1)


def in_EM(cfg, M):
    """No stick longer than M"""
    if M < 1:
        raise ModelError(f"stick length bound must be at least 1, got {M}")
    return all(s.length <= M for s in sticks(cfg, _stick_region(cfg)))


def _contained(stick, seg):
    if stick.orientation != seg.orientation or stick.axis != seg.axis:
        return False
    inner = Segment.of(stick)
    return seg.start <= inner.start and inner.end <= seg.end


def in_EMA(cfg, M, segments):
    """Every stick longer than M lies inside one of the given segments"""
    if M < 1:
        raise ModelError(f"stick length bound must be at least 1, got {M}")
    segments = list(segments)
    return all(any(_contained(s, seg) for seg in segments)
               for s in sticks(cfg, _stick_region(cfg)) if s.length > M)


# ==================== Combinatorial checks ====================

def defect_lower_bound_check(G, M):
    """(2M+1) b(G) + (8M+5) v(G) >= Area of the padded window"""
    return (2 * M + 1) * G.b_count + (8 * M + 5) * G.v_count >= G.outer.area


def component_bound(v, b):
    if b < 2 * v:
        return b / 2.0 + 1.0
    return 2.0 * v / 3.0 + b / 6.0 + 1.0


def component_bound_check(G, parts=None):
    """k(G) against the bound from v(G) and b(G); holds for configurations with a dimer"""
    parts = parts or sub_component_sets(G)
    return parts.k <= component_bound(G.v_count, G.b_count)


def _members(G, part):
    vac = {v for v in G.vacancies if all(p in part for p in surrounding_dual_vertices(v))}
    broken = set()
    for p, q, f in G.graph.edges(data="edge"):
        if p in part and q in part and is_broken_link(G.cfg, f):
            broken.add(f)
    return vac, broken


def defect_chasing_violations(G, parts=None):
    """
    تتبع العيوب - Intersecting vertical/horizontal sub-component pairs that
    share neither (two broken links and a vacancy) nor six broken links.
    """
    if G.cfg.dimer_count() == 0:
        return []
    parts = parts or sub_component_sets(G)
    violations = []
    for A in parts.vertical:
        vac_a, broken_a = _members(G, A)
        for B in parts.horizontal:
            if not A & B:
                continue
            vac_b, broken_b = _members(G, B)
            shared_vac = len(vac_a & vac_b)
            shared_broken = len(broken_a & broken_b)
            if not ((shared_vac >= 1 and shared_broken >= 2) or shared_broken >= 6):
                violations.append((min(A), min(B), shared_vac, shared_broken))
    return violations
