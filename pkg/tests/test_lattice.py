import numpy as np
import pytest
from scipy import ndimage

from lattice import (BOX, BOXTIMES, EdgeId, Isometry, Rect, UnionFind, VertexId, block_transforms, components,
                     ddag_neighbors, edge_between, incident_edges, line_neighbors, torus_edges, wrap_edge,
                     wrap_vertex)
from model_errors import GeometryError


def test_edge_orientation_and_endpoints():
    e = EdgeId(1, 0)
    assert e.horizontal and not e.vertical
    assert e.endpoints() == (VertexId(0, 0), VertexId(1, 0))
    f = EdgeId(0, 1)
    assert f.vertical
    assert f.endpoints() == (VertexId(0, 0), VertexId(0, 1))
    assert not EdgeId(1, 1).is_valid()


def test_edge_between_and_incident_edges():
    assert edge_between(VertexId(2, 3), VertexId(3, 3)) == EdgeId(5, 6)
    assert set(incident_edges(VertexId(0, 0))) == {EdgeId(1, 0), EdgeId(0, 1), EdgeId(-1, 0), EdgeId(0, -1)}
    with pytest.raises(GeometryError):
        edge_between(VertexId(0, 0), VertexId(1, 1))


def test_line_and_ddag_neighbors():
    e = EdgeId(1, 0)
    assert len(line_neighbors(e)) == 6
    ddag = ddag_neighbors(e)
    assert len(ddag) == 8
    assert EdgeId(5, 0) in ddag and EdgeId(-3, 0) in ddag
    assert EdgeId(3, 0) in ddag


def test_rect_anchored_geometry():
    R = Rect.anchored(0, 0, 3, 2)
    assert (R.x0d, R.y0d, R.x1d, R.y1d) == (-1, -1, 5, 3)
    assert R.origin == VertexId(0, 0)
    assert len(R.vertices()) == 6
    # closed rectangle: 4x2 horizontal midpoints, 3x3 vertical midpoints
    assert len(R.edges()) == 4 * 2 + 3 * 3
    assert R.contains_vertex(VertexId(2, 1))
    assert not R.contains_vertex(VertexId(3, 1))


def test_rect_rejects_integer_corners():
    with pytest.raises(GeometryError):
        Rect(0, -1, 2, 2)


def test_shrunk_and_padded():
    R = Rect.anchored(0, 0, 8, 8)
    inner = R.shrunk(4)
    assert inner == Rect.anchored(2, 2, 4, 4)
    assert R.padded(1) == Rect.anchored(-1, -1, 10, 10)
    with pytest.raises(GeometryError):
        Rect.anchored(0, 0, 6, 8).shrunk(4)


def test_wrapping():
    torus = Rect.anchored(0, 0, 4, 4)
    assert wrap_vertex(VertexId(5, -1), torus) == VertexId(1, 3)
    assert wrap_edge(EdgeId(-1, 0), torus) == EdgeId(7, 0)
    assert len(torus_edges(torus)) == 2 * 16


def test_reflection_is_involution():
    tau = Isometry.reflection_x(3)
    assert tau.compose(tau) == Isometry()
    assert tau.apply_rect(Rect.anchored(0, 0, 2, 2)) == Rect.anchored(2, 0, 2, 2)
    assert Isometry.translation(1, 2).kind == "translation"


def test_block_transforms_cover_the_torus():
    R = Rect.anchored(0, 0, 1, 1)
    torus = Rect.anchored(0, 0, 4, 4)
    group = block_transforms(R, torus)
    assert len(group) == 16
    images = {iso.apply_rect(R) for iso in group}
    assert len(images) == 16
    with pytest.raises(GeometryError):
        block_transforms(Rect.anchored(0, 0, 3, 1), torus)


def test_union_find_groups():
    uf = UnionFind(range(5))
    uf.union(0, 3)
    uf.union(3, 4)
    assert uf.groups() == [[0, 3, 4], [1], [2]]
    uf.union(1, 9)
    assert uf[9] == uf[1]
    assert uf.groups() == [[0, 3, 4], [1, 9], [2]]
    assert UnionFind().groups() == []


def test_components_box_and_boxtimes():
    points = [(0, 0), (1, 1), (3, 3)]
    assert len(components(points, BOX)) == 3
    assert len(components(points, BOXTIMES)) == 2
    assert len(components([(0, 0), (3, 0)], BOX, period=(4, 4))) == 1


@pytest.mark.parametrize("connectivity, structure", [(BOX, None), (BOXTIMES, np.ones((3, 3), dtype=int))])
def test_components_match_ndimage_label(connectivity, structure):
    rng = np.random.default_rng(7)
    grid = rng.random((12, 9)) < 0.45
    points = list(zip(*np.nonzero(grid)))
    _, expected = ndimage.label(grid, structure=structure)
    assert len(components(points, connectivity)) == expected
