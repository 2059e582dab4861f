"""The antiferromagnet equivalence and the alternating-strips battery.

The site-parity gauge map Psi (flip spins where t1 + t2 is odd) carries
the 1x1-cell model onto the uniform-field antiferromagnet with J_a = -J,
h_a = h, preserving energies configuration by configuration, hence the
two models share a partition function and Psi-conjugate Gibbs measures.

The strips model is just another geometry kind: every engine (exact,
contour, Monte Carlo) is generic over ModelGeometry, so its verification
battery re-runs the identical machinery with threshold 2J/L.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .exact import (
    BlockEvent,
    GuardError,
    exact_ensemble,
    verify_chessboard,
    verify_lemma_per,
    verify_prop2,
    verify_rp,
    verify_symmetry_identity,
)
from .contour import verify_lemma_hb
from .geometry import ModelGeometry, GeometryError
from .model import ModelParams, bond_sum
from .report import VerificationReport, timed


@dataclass(frozen=True)
class AntiferroParams:
    """Antiferromagnetic coupling J_a < 0 with a uniform field h_a."""

    J_a: float
    h_a: float

    def __post_init__(self):
        if not self.J_a < 0:
            raise ValueError("antiferromagnetic coupling J_a must be negative")


def _psi_signs(geom: ModelGeometry) -> np.ndarray:
    t1 = np.arange(geom.W)
    t2 = np.arange(geom.H)
    par = (t1[None, :] + t2[:, None]) % 2
    return np.where(par == 0, 1, -1).astype(np.int8)


def psi_transform(geom: ModelGeometry, config: np.ndarray) -> np.ndarray:
    """Flip the spins on odd-parity sites; an involution, needs both torus
    dimensions even so the parity pattern survives the wrap."""
    if geom.W % 2 or geom.H % 2:
        raise GeometryError("the parity gauge map needs even torus dimensions")
    return (np.asarray(config) * _psi_signs(geom)).astype(np.int8)


def antiferro_energy(geom: ModelGeometry, af: AntiferroParams, config: np.ndarray) -> float:
    if geom.W % 2 or geom.H % 2:
        raise GeometryError("the antiferromagnet comparison needs even dimensions")
    config = np.asarray(config)
    if config.shape != (geom.H, geom.W):
        raise ValueError("configuration shape does not match the torus")
    return -af.J_a * bond_sum(config) - af.h_a * float(config.sum())


def _antiferro_energies(geom: ModelGeometry, af: AntiferroParams) -> np.ndarray:
    """Energies of every configuration under the antiferromagnetic
    Hamiltonian, indexed by packed-bit id."""
    n = geom.n_sites
    spins0 = np.full(n, -1, np.int8)
    free = np.arange(n, dtype=np.int64)
    field = np.full(n, af.h_a, dtype=np.float64)
    return _kernels.energies_table(spins0, float(af.J_a), field,
                                   geom.neighbor_table, free)


def verify_corollary1(geom: ModelGeometry, J: float, h: float) -> VerificationReport:
    """Exhaustively check H_antiferro(Psi(sigma); -J, h) equals the
    1x1-cell energy H(sigma; J, h) for every configuration."""
    if geom.kind != "cellboard" or geom.L1 != 1 or geom.L2 != 1:
        raise GeometryError("the equivalence is for the 1x1-cell model")
    if geom.n_sites > 16:
        raise GuardError("exhaustive equivalence check limited to 16 spins")
    out = {}
    with timed(out):
        from .exact import all_config_energies

        params = ModelParams(J=J, h=h, beta=1.0)
        e_cb = all_config_energies(geom, params)
        e_af = _antiferro_energies(geom, AntiferroParams(J_a=-J, h_a=h))
        psi = _psi_signs(geom).ravel()
        psi_mask = 0
        for i in range(geom.n_sites):
            if psi[i] < 0:
                psi_mask |= 1 << i
        idx = np.arange(e_cb.size, dtype=np.int64) ^ psi_mask
        worst = float(np.abs(e_af[idx] - e_cb).max())
        verdict = worst < 1e-12
    return VerificationReport(
        name="antiferro_equivalence",
        inputs={"geometry": geom.to_json_dict(), "J": J, "h": h},
        lhs=worst, rhs=0.0, tolerance=1e-12, verdict=bool(verdict),
        seconds=out["seconds"],
        details={"n_configs": int(e_cb.size)},
    )


# ---------------------------------------------------------------------------
# strips battery
# ---------------------------------------------------------------------------

def verify_strip_model(geom: ModelGeometry, params: ModelParams,
                       seed: int = 0, n_chessboard: int = 10,
                       c: float = 9.0) -> VerificationReport:
    """Run the full verification battery on a strips-field torus:
    reflection positivity for every block-cutting plane, the symmetry
    identity, seeded random chessboard checks, the bad-block bound with
    threshold 2J/L, the tiled-energy identity, and the exhaustive
    Peierls sweep on the minimal 2 x 2L torus."""
    if geom.kind != "strip":
        raise GeometryError("verify_strip_model needs a strip geometry")
    out = {}
    children: list[VerificationReport] = []
    with timed(out):
        ens = exact_ensemble(geom, params)
        for plane in geom.planes():
            children.append(verify_rp(ens, plane))
        children.append(verify_symmetry_identity(ens))

        rng = np.random.default_rng(seed)
        nb = geom.n_block_sites
        coords = list(geom.block_coords())
        for _ in range(n_chessboard):
            mm = int(rng.integers(1, min(4, len(coords)) + 1))
            picks = rng.choice(len(coords), size=mm, replace=False)
            assignments = []
            for p in picks:
                adm = rng.integers(0, 2, size=1 << nb).astype(np.uint8)
                if not adm.any():
                    adm[int(rng.integers(0, 1 << nb))] = 1
                assignments.append((coords[int(p)], BlockEvent(nb, adm)))
            children.append(verify_chessboard(ens, assignments))

        children.append(verify_prop2(ens, c=c))

        pattern = int(rng.integers(0, 1 << nb))
        children.append(verify_lemma_per(geom, params, pattern))

        children.append(verify_lemma_hb(geom.sub_torus_2x2(), params))

        verdict = all(ch.passed for ch in children)
    return VerificationReport(
        name="strip_battery",
        inputs={"geometry": geom.to_json_dict(), "params": params.to_json_dict(),
                "seed": seed},
        lhs=None, rhs=None, tolerance=None, verdict=bool(verdict),
        seconds=out["seconds"],
        details={"threshold": 2.0 * params.J / geom.L2,
                 "peierls_c": 2.0 * params.J - params.h * geom.L2,
                 "bad_pattern_bound": f"2^{nb}",
                 "n_checks": len(children)},
        children=children,
    )
