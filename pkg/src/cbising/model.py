"""Hamiltonians, Gibbs weights, and closed-form theory constants.

Energies use the directed-bond convention of :mod:`cbising.geometry`:

    H(sigma) = -J * sum_{(s, s+e1), (s, s+e2)} sigma(s) sigma(s')
               - h * sum_s field_sign(s) sigma(s)

Energies are small integer combinations of J and h, so double precision
is exact at desk scale; identity checks elsewhere use 1e-12 relative
tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ModelGeometry, config_const


@dataclass(frozen=True)
class ModelParams:
    """Coupling J > 0, field magnitude h >= 0, inverse temperature beta >= 0."""

    J: float
    h: float
    beta: float

    def __post_init__(self):
        if not self.J > 0:
            raise ValueError("coupling J must be positive")
        if self.h < 0:
            raise ValueError("field magnitude h must be non-negative")
        if self.beta < 0:
            raise ValueError("inverse temperature beta must be non-negative")

    def with_beta(self, beta: float) -> "ModelParams":
        return ModelParams(self.J, self.h, beta)

    def to_json_dict(self) -> dict:
        return {"J": self.J, "h": self.h, "beta": self.beta}


def bond_sum(config: np.ndarray) -> int:
    """Sum of sigma(s)*sigma(s') over the directed right/up bonds."""
    c = np.asarray(config, dtype=np.int64)
    return int((c * np.roll(c, -1, axis=1)).sum() + (c * np.roll(c, -1, axis=0)).sum())


def energy(geom: ModelGeometry, params: ModelParams, config: np.ndarray) -> float:
    config = np.asarray(config)
    if config.shape != (geom.H, geom.W):
        raise ValueError("configuration shape does not match the torus")
    field = (geom.field_array.astype(np.int64) * config).sum()
    return -params.J * bond_sum(config) - params.h * float(field)


def energy_delta_flip(geom: ModelGeometry, params: ModelParams, config: np.ndarray,
                      site: tuple[int, int]) -> float:
    """Energy change of flipping one spin; matches full recomputation."""
    t1, t2 = site
    i = geom.site_index(t1, t2)
    flat = np.asarray(config).ravel()
    s = float(flat[i])
    nsum = float(flat[geom.neighbor_table[i]].sum())
    return 2.0 * params.J * s * nsum + 2.0 * params.h * geom.field_sign(t1, t2) * s


def reference_configs(geom: ModelGeometry) -> dict[str, np.ndarray]:
    """The constant configurations and the field-aligned one."""
    return {
        "plus": config_const(geom, 1),
        "minus": config_const(geom, -1),
        "cellboard": geom.field_array.copy(),
    }


# ---------------------------------------------------------------------------
# theory constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TheoryConstants:
    """Closed-form constants of the phase-coexistence bounds.

    peierls_c: energy cost per unit contour length of perturbing a
        constant ground state (2J - h*L1*L2/(L1+L2); 2J - h*L for strips).
    threshold: field magnitude above which the field-aligned state wins
        (2J/L1 + 2J/L2; 2J/L for strips).
    beta0: inverse temperature above which coexistence is certified via
        the union bound over bad-block counts; None when undefined
        (h >= threshold, or strip geometry without an explicit k).
    beta_prime: the tighter two-point-bound variant of beta0.
    c: combinatorial contour-counting constant (default 9).
    """

    peierls_c: float
    threshold: float
    beta0: float | None
    beta_prime: float | None
    c: float
    block_sites: int
    kind: str

    def to_json_dict(self) -> dict:
        return {
            "peierls_c": self.peierls_c,
            "threshold": self.threshold,
            "beta0": self.beta0,
            "beta_prime": self.beta_prime,
            "c": self.c,
            "block_sites": self.block_sites,
            "kind": self.kind,
        }


def theory_constants(geom: ModelGeometry, params: ModelParams, c: float = 9.0,
                     strip_k: float | None = None) -> TheoryConstants:
    J, h = params.J, params.h
    bb = geom.n_block_sites
    if geom.kind == "cellboard":
        L1, L2 = geom.L1, geom.L2
        c_p = 2.0 * J - h * L1 * L2 / (L1 + L2)
        threshold = 2.0 * J / L1 + 2.0 * J / L2
    else:
        L = geom.L2
        c_p = 2.0 * J - h * L
        threshold = 2.0 * J / L
    beta0 = beta_prime = None
    if c_p > 0:
        if geom.kind == "cellboard":
            beta0 = 8.0 * ((bb + 4) * math.log(2.0) + math.log(c * (c + 1))) / c_p
            beta_prime = 4.0 * ((bb + 2) * math.log(2.0) + 2.0 * math.log(c * (c + 1))) / c_p
        elif strip_k is not None:
            beta0 = strip_k / c_p
    return TheoryConstants(c_p, threshold, beta0, beta_prime, c, bb, geom.kind)


# ---------------------------------------------------------------------------
# ground states on the minimal torus
# ---------------------------------------------------------------------------

GROUND_STATE_GUARD = 24  # sites; exhaustive minimisation beyond this is refused


@dataclass(frozen=True)
class GroundStateReport:
    label: str  # "two_symmetric" | "field_aligned" | "degenerate"
    min_energy: float
    minimizers: tuple[int, ...]  # packed configurations
    n_minimizers: int

    def to_json_dict(self) -> dict:
        shown = self.minimizers[:16]
        return {
            "label": self.label,
            "min_energy": self.min_energy,
            "n_minimizers": self.n_minimizers,
            "minimizers": list(shown),
        }


def classify_ground_states(geom: ModelGeometry, params: ModelParams,
                           tol: float = 1e-9) -> GroundStateReport:
    """Exhaustively minimise the energy over all configurations and label
    the minimiser set: the two constants below threshold, the
    field-aligned state above it, anything else is degenerate."""
    from .exact import all_config_energies  # local import to avoid a cycle

    if geom.n_sites > GROUND_STATE_GUARD:
        raise ValueError(f"ground-state classification limited to {GROUND_STATE_GUARD} sites")
    energies = all_config_energies(geom, params)
    emin = float(energies.min())
    scale = max(1.0, abs(emin))
    minim = np.flatnonzero(energies <= emin + tol * scale)
    mins = set(int(v) for v in minim)

    n = geom.n_sites
    plus_bits = (1 << n) - 1
    minus_bits = 0
    cb_bits = 0
    flat = geom.field_array.ravel()
    for i in range(n):
        if flat[i] > 0:
            cb_bits |= 1 << i

    if mins == {plus_bits, minus_bits}:
        label = "two_symmetric"
    elif mins == {cb_bits}:
        label = "field_aligned"
    else:
        label = "degenerate"
    return GroundStateReport(label, emin, tuple(sorted(mins)), len(mins))
