import math

import numpy as np
import pytest

from cbising.geometry import apply_reflection, cell_board, config_const, strip
from cbising.model import (
    ModelParams,
    classify_ground_states,
    energy,
    energy_delta_flip,
    reference_configs,
    theory_constants,
)

P11 = ModelParams(J=1.0, h=1.0, beta=1.0)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(J=0.0, h=1.0, beta=1.0)
    with pytest.raises(ValueError):
        ModelParams(J=1.0, h=-0.5, beta=1.0)
    with pytest.raises(ValueError):
        ModelParams(J=1.0, h=1.0, beta=-1.0)


def test_energy_reference_values():
    g = cell_board(3, 2, 2)  # 24 sites
    assert energy(g, P11, config_const(g, 1)) == -48.0
    g2 = cell_board(1, 1, 2)
    sc = reference_configs(g2)["cellboard"]
    assert energy(g2, P11, sc) == 8.0 - 4.0  # all bonds antiparallel, field aligned


def test_plus_minus_energies_equal():
    for geom in (cell_board(1, 1, 2), cell_board(3, 2, 2), strip(2, 4)):
        refs = reference_configs(geom)
        assert energy(geom, P11, refs["plus"]) == energy(geom, P11, refs["minus"])


def test_delta_flip_examples():
    g = cell_board(1, 1, 2)
    plus = config_const(g, 1)
    # (1, 0) has field sign -1: four incident bond slots plus the field term
    assert energy_delta_flip(g, P11, plus, (1, 0)) == 8.0 - 2.0
    # flip twice nets zero
    c = plus.copy()
    d1 = energy_delta_flip(g, P11, c, (0, 1))
    c[1, 0] *= -1
    d2 = energy_delta_flip(g, P11, c, (0, 1))
    assert d1 + d2 == 0.0


def test_delta_flip_matches_recomputation():
    rng = np.random.default_rng(12)
    g = cell_board(2, 1, 4)
    c = rng.choice([-1, 1], size=(g.H, g.W)).astype(np.int8)
    e = energy(g, P11, c)
    for _ in range(1000):
        t1 = int(rng.integers(0, g.W))
        t2 = int(rng.integers(0, g.H))
        d = energy_delta_flip(g, P11, c, (t1, t2))
        c[t2, t1] *= -1
        e_new = energy(g, P11, c)
        assert abs((e + d) - e_new) <= 1e-12 * max(1.0, abs(e_new))
        e = e_new


def test_flip_path_oracle():
    # energy equals the initial energy plus accumulated single-flip deltas
    rng = np.random.default_rng(4)
    g = cell_board(3, 2, 2)
    start = config_const(g, 1)
    target = rng.choice([-1, 1], size=(g.H, g.W)).astype(np.int8)
    c = start.copy()
    acc = energy(g, P11, c)
    for t2 in range(g.H):
        for t1 in range(g.W):
            if c[t2, t1] != target[t2, t1]:
                acc += energy_delta_flip(g, P11, c, (t1, t2))
                c[t2, t1] *= -1
    assert abs(acc - energy(g, P11, target)) <= 1e-12 * max(1.0, abs(acc))


def test_theory_constants_cellboard():
    g = cell_board(3, 2, 2)
    tc = theory_constants(g, P11)
    assert math.isclose(tc.peierls_c, 2.0 - 1.2)
    assert math.isclose(tc.threshold, 2.0 / 3.0 + 1.0)
    g1 = cell_board(1, 1, 2)
    tc1 = theory_constants(g1, P11, c=9.0)
    expect = 8.0 * (8.0 * math.log(2.0) + math.log(90.0)) / 1.5
    assert math.isclose(tc1.beta0, expect, rel_tol=1e-12)
    assert math.isclose(tc1.beta_prime,
                        4.0 * (6.0 * math.log(2.0) + 2.0 * math.log(90.0)) / 1.5,
                        rel_tol=1e-12)


def test_theory_constants_strip_and_vacuous():
    gs = strip(2, 4)
    tc = theory_constants(gs, P11)
    assert math.isclose(tc.threshold, 1.0)
    assert tc.beta0 is None
    below = ModelParams(1.0, 0.5, 1.0)  # h below the 2J/L threshold
    tc_b = theory_constants(gs, below, strip_k=3.0)
    assert math.isclose(tc_b.beta0, 3.0 / tc_b.peierls_c)
    # beta0 undefined at h >= threshold
    tc2 = theory_constants(cell_board(1, 1, 2), ModelParams(1.0, 4.0, 1.0))
    assert tc2.beta0 is None and tc2.peierls_c <= 0


def test_beta0_denominator_is_peierls_constant():
    for L1, L2 in ((1, 1), (2, 1), (3, 2)):
        g = cell_board(L1, L2, 2)
        p = ModelParams(1.0, 0.3, 1.0)
        tc = theory_constants(g, p, c=9.0)
        num = 8.0 * ((g.n_block_sites + 4) * math.log(2.0) + math.log(90.0))
        assert math.isclose(tc.beta0 * tc.peierls_c, num, rel_tol=1e-12)


def test_global_symmetry_flip_reflect():
    # H(sigma) = H(-theta_Q1(sigma)): the field is antisymmetric under the
    # Q1 reflection, exhaustively on 2x2 and sampled on larger tori
    g = cell_board(1, 1, 2)
    q1 = g.q_plane(1)
    from cbising.geometry import config_from_bits

    for bits in range(16):
        c = config_from_bits(g, bits)
        c2 = -apply_reflection(g, q1, c)
        assert energy(g, P11, c) == energy(g, P11, c2)
    rng = np.random.default_rng(5)
    for geom in (cell_board(3, 2, 2), strip(1, 4)):
        plane = geom.q_plane(1) if geom.kind == "cellboard" else geom.q_plane(2)
        for _ in range(50):
            c = rng.choice([-1, 1], size=(geom.H, geom.W)).astype(np.int8)
            c2 = -apply_reflection(geom, plane, c)
            assert energy(geom, P11, c) == energy(geom, P11, c2)


def test_field_aligned_wins_above_threshold():
    for L1, L2 in ((1, 1), (2, 2), (3, 2), (1, 3)):
        g = cell_board(L1, L2, 2)
        thr = 2.0 / L1 + 2.0 / L2
        for h, expect_lower in ((0.5 * thr, False), (1.5 * thr, True)):
            p = ModelParams(1.0, h, 1.0)
            refs = reference_configs(g)
            diff = energy(g, p, refs["cellboard"]) - energy(g, p, refs["plus"])
            assert (diff < 0) == expect_lower


def test_classify_ground_states():
    g = cell_board(1, 1, 2)
    assert classify_ground_states(g, ModelParams(1, 1, 0)).label == "two_symmetric"
    assert classify_ground_states(g, ModelParams(1, 5, 0)).label == "field_aligned"
    r = classify_ground_states(g, ModelParams(1, 4, 0))
    assert r.label == "degenerate"
    # the two constants and the field-aligned state all tie at threshold
    flat = g.field_array.ravel()
    cb_bits = sum(1 << i for i in range(4) if flat[i] > 0)
    assert {0, 15, cb_bits} <= set(r.minimizers)


def test_classify_guard():
    with pytest.raises(ValueError):
        classify_ground_states(cell_board(3, 2, 4), P11)
