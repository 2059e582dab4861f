import numpy as np
import pytest

from cbising.contour import (
    bad_pattern_count,
    boundary,
    contour_energy_identity,
    is_bad_block,
    line_sum_bounds,
    perturb,
    verify_lemma_hb,
)
from cbising.geometry import cell_board, config_const, strip
from cbising.model import ModelParams, reference_configs

P11 = ModelParams(1.0, 1.0, 1.0)


def test_perturb_involution_and_edge_cases():
    rng = np.random.default_rng(0)
    g = cell_board(2, 2, 2)
    c = rng.choice([-1, 1], size=(g.H, g.W)).astype(np.int8)
    assert (perturb(c, []) == c).all()
    assert (perturb(c, [(t1, t2) for t1 in range(g.W) for t2 in range(g.H)]) == -c).all()
    for _ in range(100):
        mask = rng.random(g.n_sites) < 0.4
        assert (perturb(perturb(c, mask), mask) == c).all()


def test_boundary_counts():
    g = cell_board(1, 1, 4)
    b = boundary(g, [(1, 1)])
    assert (b.horizontal_edges, b.vertical_edges, b.total) == (2, 2, 4)
    # every listed edge has exactly one endpoint in V
    v = {(1, 1)}
    for e in b.edges:
        assert (e[0] in v) != (e[1] in v)
    # doubled wrap bonds on the 2x2 torus
    assert boundary(cell_board(1, 1, 2), [(0, 0)]).total == 4
    # one full row: 2W vertical edges
    b = boundary(g, [(t1, 2) for t1 in range(4)])
    assert b.total == 8 and b.horizontal_edges == 0


def test_contour_identity_examples():
    g2 = cell_board(1, 1, 2)
    d, c = contour_energy_identity(g2, P11, [(1, 0)])
    assert d == c == 8.0 - 2.0
    # one negative-field cell of the 3x2 cell-board on its minimal torus
    g32 = cell_board(3, 2, 2)
    cell = [(t1, t2) for t1 in range(3, 6) for t2 in range(2)]
    d, c = contour_energy_identity(g32, P11, cell)
    assert d == c == 2.0 * 10 - 12.0


def test_contour_identity_random():
    rng = np.random.default_rng(1)
    g = cell_board(2, 2, 2)
    for _ in range(500):
        mask = rng.random(g.n_sites) < 0.5
        d, c = contour_energy_identity(g, P11, mask)
        assert abs(d - c) <= 1e-12 * max(1.0, abs(d))


def test_line_sums():
    g = cell_board(1, 1, 2)
    # full horizontal circle sums to zero
    rep = line_sum_bounds(g, [(0, 0), (1, 0)])
    assert rep.verdict and rep.details["closed_runs_zero"]
    # a run of length L1 inside one cell is tight
    g31 = cell_board(3, 1, 2)
    rep = line_sum_bounds(g31, [(0, 0), (1, 0), (2, 0)])
    assert rep.verdict and rep.details["worst_horizontal"] == 3.0
    # exhaustive over all V on the 2x2 torus
    for mask_bits in range(16):
        v = [i for i in range(4) if (mask_bits >> i) & 1]
        assert line_sum_bounds(g, v).verdict
    # strips: vertical bound h*L, horizontal family skipped
    gs = strip(2, 4).sub_torus_2x2()
    for mask_bits in range(0, 256, 7):
        v = [i for i in range(8) if (mask_bits >> i) & 1]
        assert line_sum_bounds(gs, v).verdict


def test_lemma_hb_minimum_1x1():
    rep = verify_lemma_hb(cell_board(1, 1, 2), P11)
    assert rep.verdict
    assert rep.details["min_delta"] == 6.0
    assert rep.details["bound_4cP"] == 6.0  # bound is tight
    assert rep.details["min_boundary"] == 4
    assert rep.details["argmin_V"] == [[1, 0]]  # single flip at a -h site


def test_single_site_flip_algebra():
    # a single-site flip costs 8J +- 2h, always above 4c_P
    for L1, L2 in ((1, 1), (2, 1), (3, 2)):
        g = cell_board(L1, L2, 2)
        ratio = L1 * L2 / (L1 + L2)
        thr = 2.0 / L1 + 2.0 / L2
        h = 0.9 * thr
        d_worst = 8.0 - 2.0 * h
        assert d_worst >= 4.0 * (2.0 - h * ratio) - 1e-12


@pytest.mark.parametrize("L1,L2", [(2, 1), (2, 2)])
@pytest.mark.parametrize("frac", [0.5, 0.9])
def test_lemma_hb_other_cells(L1, L2, frac):
    thr = 2.0 / L1 + 2.0 / L2
    rep = verify_lemma_hb(cell_board(L1, L2, 2), ModelParams(1.0, frac * thr, 1.0))
    assert rep.verdict, rep.details
    assert rep.details["min_boundary"] >= 4


def test_lemma_hb_full_3x2_sweep():
    # 2^24 - 2 subsets, incremental updates keep this fast
    rep = verify_lemma_hb(cell_board(3, 2, 2), P11, chunk_bits=6)
    assert rep.verdict
    assert rep.details["subsets"] == (1 << 24) - 2


def test_lemma_hb_vacuous_above_threshold():
    rep = verify_lemma_hb(cell_board(1, 1, 2), ModelParams(1.0, 5.0, 1.0))
    assert rep.verdict and rep.details["vacuous"]


def test_strip_lemma_hb_analogue():
    # min perturbation cost >= 4(2J - hL) on the 2 x 2L torus
    for L in (1, 2):
        h = 0.5 * 2.0 / L
        geom = strip(L, 4).sub_torus_2x2()
        rep = verify_lemma_hb(geom, ModelParams(1.0, h, 1.0))
        assert rep.verdict, (L, rep.details)
        assert rep.details["bound_4cP"] == 4.0 * (2.0 - h * L)


def test_bad_blocks():
    g = cell_board(2, 2, 2)
    refs = reference_configs(g)
    for c in g.block_coords():
        assert not is_bad_block(g, refs["plus"], c)
        assert is_bad_block(g, refs["cellboard"], c)  # blocks straddle cells
    assert bad_pattern_count(4) == 14
    gd = cell_board(2, 1, 4)
    assert not is_bad_block(gd, config_const(gd, -1), ("h1", 0, 0))
