import numpy as np
import pytest

from dimer_model import BoundaryCondition, DimerConfig, ModelParams
from lattice import EdgeId, Rect, VertexId
from model_errors import GeometryError
from monte_carlo import ChainSpec, run
from order_parameters import (EPSILON_0, HORIZONTAL, VERTICAL, DualEdge, PsiGrid, Segment, Stick, box_adjacent_pairs,
                              divides, escape_probability, escapes, is_stick_edge, percolation_report,
                              properly_divides, psi_grid, rarity_estimate, stick_conflicts, stick_edges,
                              stick_length_histogram, sticks, wilson_interval)


def _packed_with_gap():
    # packed vertical 8x8 torus with the dimer covering (3, 2)-(3, 3) removed
    cfg = DimerConfig.packed(Rect.anchored(0, 0, 8, 8), "vertical")
    cfg.set_edge(EdgeId(6, 5), False)
    return cfg


def test_dual_edge_geometry():
    d = DualEdge(1, 0)
    assert d.vertical and d.orientation == VERTICAL
    assert d.endpoints_d() == ((1, -1), (1, 1))
    assert DualEdge(0, 1).endpoints_d() == ((-1, 1), (1, 1))


def test_sticks_on_vacant_window():
    window = Rect.anchored(0, 0, 2, 2)
    cfg = DimerConfig.from_edges(window, BoundaryCondition.vacant(), [EdgeId(0, 1), EdgeId(2, 1)])
    assert is_stick_edge(cfg, DualEdge(1, 0))
    assert set(stick_edges(cfg)) == {DualEdge(1, 0), DualEdge(1, 2)}
    assert sticks(cfg) == [Stick(VERTICAL, 1, -1, 3)]
    assert sticks(cfg)[0].length == 2


def test_packed_torus_has_cyclic_vertical_sticks():
    cfg = DimerConfig.packed(Rect.anchored(0, 0, 8, 8), "vertical")
    found = sticks(cfg)
    assert len(found) == 8
    assert all(s.cyclic and s.orientation == VERTICAL and s.length == 8 for s in found)


def test_gap_cuts_two_sticks():
    hist = stick_length_histogram(sticks(_packed_with_gap()))
    assert hist[VERTICAL] == {8: 6, 6: 2}
    assert not hist[HORIZONTAL]


def test_divides_and_properly_divides():
    R = Rect.anchored(0, 0, 4, 4)
    long_stick = Segment(VERTICAL, 3, -1, 7)
    assert divides(long_stick, R)
    assert properly_divides(long_stick, R, 4)
    short = Segment(VERTICAL, 3, -1, 5)
    assert not divides(short, R)
    edge_hugging = Segment(VERTICAL, -1, -3, 9)
    assert not divides(edge_hugging, R)
    off_centre = Segment(VERTICAL, 1, -1, 7)
    assert divides(off_centre, R) and not properly_divides(off_centre, R, 4)


def test_psi_grid_on_packed_torus():
    cfg = DimerConfig.packed(Rect.anchored(0, 0, 8, 8), "vertical")
    ver = psi_grid(cfg, 1, 1, 4, VERTICAL)
    hor = psi_grid(cfg, 1, 1, 4, HORIZONTAL)
    assert len(ver) == 64 and len(hor) == 0
    report = percolation_report(ver)
    assert report["n_components"] == 1
    assert report["spans_horizontally"] and report["spans_vertically"]
    assert report["largest_fraction"] == 1.0
    assert box_adjacent_pairs(ver, hor) == []


def test_psi_grid_with_gap():
    cfg = _packed_with_gap()
    ver = psi_grid(cfg, 1, 1, 4, VERTICAL)
    assert len(ver) == 64 - 2 * 5
    assert VertexId(1, 0) not in ver.points
    assert VertexId(1, 4) in ver.points
    assert ver.points == psi_grid(cfg, 1, 1, 4, VERTICAL, method="sticks").points


def test_psi_methods_agree_on_sampled_configs():
    spec = ChainSpec(Rect.anchored(0, 0, 8, 8), ModelParams(2.0, 0.0, 1.0), 3, 40, burn_in=20,
                     init="packed_vertical", snapshot_every=10)
    for cfg in run(spec).snapshots:
        assert not stick_conflicts(cfg)
        for orientation in (VERTICAL, HORIZONTAL):
            direct = psi_grid(cfg, 2, 2, 4, orientation)
            via_sticks = psi_grid(cfg, 2, 2, 4, orientation, method="sticks")
            assert direct.points == via_sticks.points
        ver = psi_grid(cfg, 1, 1, 4, VERTICAL)
        hor = psi_grid(cfg, 1, 1, 4, HORIZONTAL)
        assert not (ver.points & hor.points)
        assert box_adjacent_pairs(ver, hor) == []


@pytest.mark.parametrize("K", [1, 2])
def test_psi_methods_agree_on_horizontal_packing(K):
    cfg = DimerConfig.packed(Rect.anchored(0, 0, 8, 8), "horizontal")
    cfg.set_edge(EdgeId(5, 8), False)
    for orientation in (VERTICAL, HORIZONTAL):
        assert psi_grid(cfg, K, K, 4, orientation).points == psi_grid(cfg, K, K, 4, orientation, "sticks").points
    assert len(psi_grid(cfg, K, K, 4, HORIZONTAL)) > 0


def test_box_adjacent_pairs_wrap_around_the_grid():
    ver = PsiGrid(1, 1, 4, VERTICAL, [VertexId(0, 0), VertexId(2, 2)], (4, 4))
    hor = PsiGrid(1, 1, 4, HORIZONTAL, [VertexId(3, 0), VertexId(1, 1)], (4, 4))
    assert box_adjacent_pairs(ver, hor) == [(VertexId(0, 0), VertexId(3, 0))]
    assert sorted(box_adjacent_pairs(hor, ver)) == [(VertexId(3, 0), VertexId(0, 0))]
    assert ver.mask().sum() == 2 and ver.mask()[2, 2]
    with pytest.raises(GeometryError):
        box_adjacent_pairs(ver, PsiGrid(1, 1, 4, HORIZONTAL, [], (2, 4)))


def test_psi_grid_rejects_bad_scales():
    cfg = DimerConfig.packed(Rect.anchored(0, 0, 8, 8), "vertical")
    with pytest.raises(GeometryError):
        psi_grid(cfg, 3, 1, 4)
    with pytest.raises(GeometryError):
        psi_grid(cfg, 4, 4, 4)


def test_stick_conflicts_on_windows():
    window = Rect.anchored(0, 0, 3, 3)
    cfg = DimerConfig.from_edges(window, BoundaryCondition.vacant(), [EdgeId(0, 1), EdgeId(2, 1), EdgeId(3, 4)])
    assert stick_conflicts(cfg, window.padded(1)) == set()


def test_wilson_interval():
    assert wilson_interval(0, 0) == (0.0, 1.0)
    lo, hi = wilson_interval(5, 10)
    assert lo < 0.5 < hi
    assert np.isclose(0.5 - lo, hi - 0.5)


def test_escapes():
    assert escapes(set(), (0, 0), 2)
    ring = {(x, y) for x in (-1, 0, 1) for y in (-1, 0, 1) if (x, y) != (0, 0)}
    assert not escapes(ring, (0, 0), 2)
    assert not escapes({(0, 0)}, (0, 0), 1)
    result = escape_probability([set(), ring], (0, 0), 2)
    assert result["estimate"] == 0.5 and result["n"] == 2


def test_rarity_estimate():
    full = {(x, y) for x in range(4) for y in range(4)}
    assert rarity_estimate([full], (4, 4))["epsilon"] == 0.0
    loose = rarity_estimate([set()], (4, 4))
    assert loose["epsilon"] == 1.0
    assert not loose["below_epsilon_0"]
    assert EPSILON_0 == pytest.approx(1.0 / 21.0)
