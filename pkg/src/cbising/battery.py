"""The desk-scale certification battery.

Twelve checks covering every finite inequality behind the
phase-coexistence argument plus finite-size Monte Carlo evidence.  Each
`criterion_*` function returns one parent report whose children are the
individual inequalities; `run_battery` drives them all with fixed seeds
so reruns are bit-identical up to timing fields.
"""

from __future__ import annotations

import math

import numpy as np

from .contour import verify_lemma_hb
from .exact import (
    BlockEvent,
    exact_ensemble,
    exact_moments,
    log_partition_enumerate,
    log_partition_transfer,
    two_point_probability,
    verify_chessboard,
    verify_lemma_per,
    verify_prop2,
    verify_rp,
    verify_symmetry_identity,
    verify_two_point_bound,
)
from .geometry import ModelGeometry, cell_board, strip
from .mc import ChainSpec, conditional_measures, mean_with_error, run_chain
from .model import ModelParams, classify_ground_states, theory_constants
from .report import VerificationReport, timed


def _parent(name: str, children: list[VerificationReport], seconds: float,
            inputs: dict | None = None, details: dict | None = None) -> VerificationReport:
    return VerificationReport(
        name=name, inputs=inputs or {}, lhs=None, rhs=None, tolerance=None,
        verdict=all(c.passed for c in children), seconds=seconds,
        details=details or {}, children=children)


def _leaf(name: str, lhs: float, rhs: float, tol: float, verdict: bool,
          seconds: float = 0.0, **details) -> VerificationReport:
    return VerificationReport(name=name, inputs={}, lhs=lhs, rhs=rhs,
                              tolerance=tol, verdict=bool(verdict),
                              seconds=seconds, details=details)


# ---------------------------------------------------------------------------

def criterion_oracles(seed: int = 0) -> VerificationReport:
    """C1: log Z by enumeration vs transfer matrix to 1e-10 relative."""
    out = {}
    children = []
    with timed(out):
        tori = [cell_board(1, 1, 2), cell_board(1, 1, 4), cell_board(3, 2, 2),
                strip(1, 4)]
        for geom in tori:
            for beta in (0.5, 2.0):
                params = ModelParams(1.0, 1.0, beta)
                t = {}
                with timed(t):
                    a = log_partition_enumerate(geom, params)
                    b = log_partition_transfer(geom, params)
                rel = abs(a - b) / max(1.0, abs(a))
                children.append(_leaf(
                    f"logZ[{geom.describe()},beta={beta}]", rel, 1e-10, 1e-10,
                    rel <= 1e-10, t["seconds"], enumerate_logZ=a, transfer_logZ=b))
    return _parent("c01_oracle_equivalence", children, out["seconds"])


def criterion_rp(seed: int = 0) -> VerificationReport:
    """C2: RP Gram symmetry and positivity for every block-cutting plane
    on the 2x2 and 4x2 tori at beta in {0, 0.5, 1, 2, 5}."""
    out = {}
    children = []
    with timed(out):
        for geom in (cell_board(1, 1, 2), cell_board(2, 1, 2)):
            for beta in (0.0, 0.5, 1.0, 2.0, 5.0):
                ens = exact_ensemble(geom, ModelParams(1.0, 1.0, beta))
                for plane in geom.planes():
                    r = verify_rp(ens, plane)
                    r.name = f"{geom.describe()},beta={beta}:{r.name}"
                    children.append(r)
    return _parent("c02_reflection_positivity", children, out["seconds"])


def _random_assignments(geom: ModelGeometry, rng, max_blocks: int = 4):
    coords = list(geom.block_coords())
    nb = geom.n_block_sites
    mm = int(rng.integers(1, min(max_blocks, len(coords)) + 1))
    picks = rng.choice(len(coords), size=mm, replace=False)
    out = []
    for p in picks:
        adm = rng.integers(0, 2, size=1 << nb).astype(np.uint8)
        if not adm.any():
            adm[int(rng.integers(0, 1 << nb))] = 1
        out.append((coords[int(p)], BlockEvent(nb, adm)))
    return out


def criterion_chessboard(seed: int = 0) -> VerificationReport:
    """C3: 50 seeded random block-event assignments per torus and beta;
    the chessboard inequality must hold every time."""
    out = {}
    children = []
    with timed(out):
        for geom in (cell_board(1, 1, 2), cell_board(1, 1, 4)):
            for beta in (0.5, 2.0):
                rng = np.random.default_rng(seed + 1000 * geom.N + int(10 * beta))
                ens = exact_ensemble(geom, ModelParams(1.0, 1.0, beta))
                worst = -math.inf
                t = {}
                fails = 0
                with timed(t):
                    for _ in range(50):
                        rep = verify_chessboard(ens, _random_assignments(geom, rng))
                        if not rep.verdict:
                            fails += 1
                        if rep.rhs > 0:
                            worst = max(worst, rep.details["log_lhs"] - rep.details["log_rhs"])
                children.append(_leaf(
                    f"chessboard[{geom.describe()},beta={beta}]",
                    fails, 0, 0, fails == 0, t["seconds"],
                    trials=50, worst_log_gap=worst))
    return _parent("c03_chessboard_estimate", children, out["seconds"])


def criterion_prop2(seed: int = 0, slow: bool = False) -> VerificationReport:
    """C4: z(bad) <= 2^(B1B2) exp(-beta c_P) with the per-pattern route on
    the 2x2 torus at beta in {1, 2, 4}; with --slow also the double-block
    bound on the 8x4 torus."""
    out = {}
    children = []
    with timed(out):
        geom = cell_board(1, 1, 2)
        for beta in (1.0, 2.0, 4.0):
            ens = exact_ensemble(geom, ModelParams(1.0, 1.0, beta))
            rep = verify_prop2(ens)
            rep.name = f"beta={beta}:{rep.name}"
            children.append(rep)
        if slow:
            ens = exact_ensemble(cell_board(2, 1, 4), ModelParams(1.0, 1.0, 2.0))
            rep = verify_prop2(ens)
            rep.name = "8x4_star:" + rep.name
            children.append(rep)
    return _parent("c04_bad_block_bound", children, out["seconds"])


def criterion_lemma_per(seed: int = 0) -> VerificationReport:
    """C5: the tiled energy identity, exhaustively on the 1x1- and
    2x1-cell tori at N=4 and on 100 seeded random 3x2-cell patterns."""
    out = {}
    children = []
    params = ModelParams(1.0, 1.0, 1.0)
    with timed(out):
        for geom in (cell_board(1, 1, 4), cell_board(2, 1, 4)):
            t = {}
            worst = 0.0
            ok = True
            with timed(t):
                for pat in range(1 << geom.n_block_sites):
                    r = verify_lemma_per(geom, params, pat)
                    worst = max(worst, abs(r.lhs - r.rhs))
                    ok &= r.verdict
            children.append(_leaf(f"all_patterns[{geom.describe()}]",
                                  worst, 0.0, 1e-10, ok, t["seconds"],
                                  patterns=1 << geom.n_block_sites))
        geom = cell_board(3, 2, 4)
        rng = np.random.default_rng(seed + 5)
        t = {}
        worst = 0.0
        ok = True
        with timed(t):
            for _ in range(100):
                pat = int(rng.integers(0, 1 << geom.n_block_sites))
                r = verify_lemma_per(geom, params, pat)
                worst = max(worst, abs(r.lhs - r.rhs))
                ok &= r.verdict
        children.append(_leaf(f"random_patterns[{geom.describe()}]",
                              worst, 0.0, 1e-10, ok, t["seconds"], patterns=100))
    return _parent("c05_tiled_energy_identity", children, out["seconds"])


def criterion_lemma_hb(seed: int = 0, slow: bool = False) -> VerificationReport:
    """C6: exhaustive Peierls sweeps on minimal tori: exact minimum
    6 = 4 c_P for 1x1 cells at J=h=1; 2x1 and 2x2 cells at 50% and 90%
    of threshold; with --slow the 3x2-cell (2^24 subsets) sweep."""
    out = {}
    children = []
    with timed(out):
        rep = verify_lemma_hb(cell_board(1, 1, 2), ModelParams(1.0, 1.0, 1.0))
        exact6 = rep.details["min_delta"] == 6.0 and rep.details["bound_4cP"] == 6.0
        rep.verdict = bool(rep.verdict and exact6)
        rep.name = "cells1x1:" + rep.name
        children.append(rep)
        for L1, L2 in ((2, 1), (2, 2)):
            geom = cell_board(L1, L2, 2)
            thr = 2.0 / L1 + 2.0 / L2
            for frac in (0.5, 0.9):
                rep = verify_lemma_hb(geom, ModelParams(1.0, frac * thr, 1.0))
                rep.name = f"cells{L1}x{L2},h={frac:.0%}thr:" + rep.name
                children.append(rep)
        if slow:
            rep = verify_lemma_hb(cell_board(3, 2, 2), ModelParams(1.0, 1.0, 1.0),
                                  chunk_bits=6)
            rep.name = "cells3x2_full_sweep:" + rep.name
            children.append(rep)
    return _parent("c06_peierls_sweep", children, out["seconds"])


def criterion_ground_states(seed: int = 0) -> VerificationReport:
    """C7: exhaustive minimisation reproduces the ground-state diagram:
    both constants below threshold, the field-aligned state above, a tie
    at threshold."""
    out = {}
    children = []
    with timed(out):
        for L1, L2 in ((1, 1), (2, 1), (2, 2)):
            geom = cell_board(L1, L2, 2)
            thr = 2.0 / L1 + 2.0 / L2
            for h, expect in ((0.5 * thr, "two_symmetric"),
                              (1.5 * thr, "field_aligned"),
                              (thr, "degenerate")):
                t = {}
                with timed(t):
                    got = classify_ground_states(geom, ModelParams(1.0, h, 0.0))
                children.append(_leaf(
                    f"cells{L1}x{L2},h={h:g}", 0.0, 0.0, 0.0,
                    got.label == expect, t["seconds"],
                    expected=expect, got=got.label,
                    min_energy=got.min_energy, n_minimizers=got.n_minimizers))
    return _parent("c07_ground_states", children, out["seconds"])


def criterion_corollary1(seed: int = 0) -> VerificationReport:
    """C8: the parity gauge map carries the 4x4 1x1-cell model onto the
    antiferromagnet exactly, over all 2^16 configurations."""
    from .variants import verify_corollary1

    out = {}
    children = []
    with timed(out):
        geom = cell_board(1, 1, 4)
        for h in (1.0, 3.0):
            rep = verify_corollary1(geom, 1.0, h)
            rep.name = f"h={h:g}:{rep.name}"
            children.append(rep)
    return _parent("c08_antiferro_equivalence", children, out["seconds"])


def criterion_symmetry(seed: int = 0) -> VerificationReport:
    """C9: mu(block +1) = mu(block -1) = (1 - mu(bad))/2 to 1e-12."""
    out = {}
    children = []
    with timed(out):
        for geom in (cell_board(1, 1, 2), cell_board(1, 1, 4), strip(1, 4)):
            for beta in (0.5, 2.0):
                ens = exact_ensemble(geom, ModelParams(1.0, 1.0, beta))
                rep = verify_symmetry_identity(ens)
                rep.name = f"{geom.describe()},beta={beta}:{rep.name}"
                children.append(rep)
    return _parent("c09_symmetry_identity", children, out["seconds"])


def criterion_mc_exact(seed: int = 0) -> VerificationReport:
    """C10: Metropolis means of m and H on the 2x4 cell-board torus match
    exact enumeration within 3 standard errors at 1e6 sweeps."""
    out = {}
    children = []
    with timed(out):
        geom = cell_board(1, 2, 2)  # 2x4 torus
        params = ModelParams(1.0, 1.0, 1.0)
        ens = exact_ensemble(geom, params)
        exact_h, exact_m = exact_moments(ens)
        spec = ChainSpec(geom, params, sweeps=1_000_000, init="random",
                         burn_in=10_000, thin=1, seed=seed + 77)
        trace = run_chain(spec)
        mm, m_se, m_tau = mean_with_error(trace.m)
        hh, h_se, h_tau = mean_with_error(trace.energy)
        children.append(_leaf("mean_m", abs(mm - exact_m), 3 * m_se, 0.0,
                              abs(mm - exact_m) <= 3 * m_se, trace.seconds,
                              mc=mm, exact=exact_m, se=m_se, tau=m_tau))
        children.append(_leaf("mean_H", abs(hh - exact_h), 3 * h_se, 0.0,
                              abs(hh - exact_h) <= 3 * h_se, 0.0,
                              mc=hh, exact=exact_h, se=h_se, tau=h_tau))
    return _parent("c10_mc_vs_exact", children, out["seconds"],
                   inputs={"geometry": geom.to_json_dict(),
                           "params": params.to_json_dict(), "seed": seed + 77})


def criterion_coexistence(seed: int = 0) -> VerificationReport:
    """C11: pinned-chain conditional probabilities exceed 1/2 by at least
    5 standard errors at beta=2 on the 16x16 cell-board and strips tori;
    at beta=0.1 the init dependence vanishes within 3 standard errors."""
    out = {}
    children = []
    with timed(out):
        for gi, (geom, tag) in enumerate(((cell_board(1, 1, 16), "cellboard"),
                                          (strip(1, 16), "strip"))):
            params = ModelParams(1.0, 1.0, 2.0)
            base = ChainSpec(geom, params, sweeps=12_000, burn_in=2_000,
                             thin=1, seed=seed + 31, chain_id=gi)
            s, t = (0, 0), (geom.W // 2, 0)
            t0 = {}
            with timed(t0):
                cond = conditional_measures(geom, params, s, t, base)
            ok_p = cond.margin_plus() >= 5 * cond.se_plus and cond.p_plus > 0.5
            ok_m = cond.margin_minus() >= 5 * cond.se_minus and cond.p_minus > 0.5
            children.append(_leaf(f"{tag}_plus_branch", cond.p_plus, 0.5, 0.0,
                                  ok_p, t0["seconds"], se=cond.se_plus,
                                  n_samples=cond.n_samples))
            children.append(_leaf(f"{tag}_minus_branch", cond.p_minus, 0.5, 0.0,
                                  ok_m, 0.0, se=cond.se_minus))
            sym = abs(cond.p_plus - cond.p_minus)
            sym_se = 3 * math.hypot(cond.se_plus, cond.se_minus)
            children.append(_leaf(f"{tag}_branch_symmetry", sym, sym_se, 0.0,
                                  sym <= sym_se + 1e-12, 0.0))

        geom = cell_board(1, 1, 16)
        params = ModelParams(1.0, 1.0, 0.1)
        t1 = {}
        with timed(t1):
            means = {}
            for cid, init in enumerate(("plus", "minus")):
                spec = ChainSpec(geom, params, sweeps=12_000, init=init,
                                 burn_in=2_000, seed=seed + 47, chain_id=cid)
                tr = run_chain(spec)
                means[init] = mean_with_error(tr.m)
        gap = abs(means["plus"][0] - means["minus"][0])
        bound = 3 * math.hypot(means["plus"][1], means["minus"][1])
        children.append(_leaf("high_temperature_init_independence", gap, bound,
                              0.0, gap <= bound, t1["seconds"],
                              mean_plus=means["plus"][0],
                              mean_minus=means["minus"][0]))
    return _parent("c11_coexistence_evidence", children, out["seconds"])


def criterion_two_point(seed: int = 0) -> VerificationReport:
    """C12: the exact two-point probability decays monotonically in beta
    on the 4x4 torus and satisfies its closed-form bound at beta=4, c=9."""
    out = {}
    children = []
    with timed(out):
        geom = cell_board(1, 1, 4)
        s, t = (0, 0), (2, 2)
        vals = []
        tmono = {}
        with timed(tmono):
            for beta in (0.0, 1.0, 2.0, 4.0):
                ens = exact_ensemble(geom, ModelParams(1.0, 1.0, beta))
                vals.append(two_point_probability(ens, s, t))
        mono = all(vals[i + 1] <= vals[i] * (1 + 1e-12) for i in range(len(vals) - 1))
        children.append(_leaf("monotone_decay", max(vals), vals[0], 0.0, mono,
                              tmono["seconds"], values=vals,
                              betas=[0.0, 1.0, 2.0, 4.0]))
        ens = exact_ensemble(geom, ModelParams(1.0, 1.0, 4.0))
        rep = verify_two_point_bound(ens, s, t, c=9.0)
        children.append(rep)
    return _parent("c12_two_point_decay", children, out["seconds"])


# ---------------------------------------------------------------------------

CRITERIA = {
    1: ("c01_oracle_equivalence", criterion_oracles),
    2: ("c02_reflection_positivity", criterion_rp),
    3: ("c03_chessboard_estimate", criterion_chessboard),
    4: ("c04_bad_block_bound", criterion_prop2),
    5: ("c05_tiled_energy_identity", criterion_lemma_per),
    6: ("c06_peierls_sweep", criterion_lemma_hb),
    7: ("c07_ground_states", criterion_ground_states),
    8: ("c08_antiferro_equivalence", criterion_corollary1),
    9: ("c09_symmetry_identity", criterion_symmetry),
    10: ("c10_mc_vs_exact", criterion_mc_exact),
    11: ("c11_coexistence_evidence", criterion_coexistence),
    12: ("c12_two_point_decay", criterion_two_point),
}


def run_battery(select=None, seed: int = 0, slow: bool = False,
                progress=None) -> list[VerificationReport]:
    """Run the selected criteria (all by default) and return their parent
    reports.  `progress` is an optional callable fed one line per check."""
    picks = sorted(select) if select else sorted(CRITERIA)
    reports = []
    for idx in picks:
        name, fn = CRITERIA[idx]
        if fn in (criterion_prop2, criterion_lemma_hb):
            rep = fn(seed=seed, slow=slow)
        else:
            rep = fn(seed=seed)
        reports.append(rep)
        if progress:
            progress(rep.oneline())
    return reports
