"""Exact finite-torus statistical mechanics.

Partition functions, event probabilities, the chessboard quantities
z(A) = mu(intersection over blocks of propagated A)^(1/N^2), and the
certified verifications: reflection positivity of the torus Gibbs
measure, the chessboard estimate, the bad-block bounds, and the tiled
energy identity.

All probability arithmetic happens in the log domain with running
log-sum-exp, so inverse temperatures up to ~50 work without underflow.
Enumeration walks configurations in Gray-code order with O(1)
incremental energy updates (numba kernels); the transfer-matrix route is
an independent oracle computing Z from a product of per-column
2^H x 2^H matrices with per-step rescaling.

Guards (raise GuardError beyond): 28 free spins for enumeration, column
height 20 for the transfer matrix, 2^16 Gram dimension and 20 torus
sites for the reflection-positivity check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import _kernels
from .geometry import (
    DOUBLE_KINDS,
    GeometryError,
    ModelGeometry,
    ReflectionPlane,
    tile_configuration,
    tile_double_configuration,
)
from .model import ModelParams, energy, theory_constants
from .report import VerificationReport, timed

GUARD_FREE_SPINS = 28
GUARD_TM_HEIGHT = 20
GUARD_RP_SITES = 20
GUARD_GRAM_SITES = 16
GUARD_PREDICATE_SPINS = 20

RP_SYM_TOL = 1e-12
RP_EIG_TOL = 1e-9
CHESSBOARD_TOL = 1e-9


class GuardError(ValueError):
    """A request exceeds the desk-scale enumeration guards."""


def _chunk_bits(n_free: int) -> int:
    return 6 if n_free >= 18 else 0


def _logsumexp_pair(vmax: float, s0: float) -> float:
    if s0 <= 0.0 or vmax == -np.inf:
        return -np.inf
    return vmax + math.log(s0)


# ---------------------------------------------------------------------------
# block events
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BlockEvent:
    """A set of admissible block patterns (bit k of a pattern is site k of
    the base block in its canonical order; bit set means spin +1)."""

    n_bits: int
    admissible: np.ndarray  # uint8[2^n_bits]

    def __post_init__(self):
        a = np.ascontiguousarray(self.admissible, dtype=np.uint8)
        if a.size != 1 << self.n_bits:
            raise ValueError("admissible mask size does not match the block")
        if not a.any():
            raise ValueError("block events must be non-empty")
        object.__setattr__(self, "admissible", a)

    @classmethod
    def full(cls, n_bits: int) -> "BlockEvent":
        return cls(n_bits, np.ones(1 << n_bits, np.uint8))

    @classmethod
    def single(cls, pattern: int, n_bits: int) -> "BlockEvent":
        a = np.zeros(1 << n_bits, np.uint8)
        a[pattern] = 1
        return cls(n_bits, a)

    @classmethod
    def from_patterns(cls, patterns, n_bits: int) -> "BlockEvent":
        a = np.zeros(1 << n_bits, np.uint8)
        for p in patterns:
            a[p] = 1
        return cls(n_bits, a)

    @classmethod
    def bad(cls, n_bits: int) -> "BlockEvent":
        """Restriction not constant: every pattern except the two constants."""
        a = np.ones(1 << n_bits, np.uint8)
        a[0] = 0
        a[(1 << n_bits) - 1] = 0
        return cls(n_bits, a)

    @property
    def n_admissible(self) -> int:
        return int(self.admissible.sum())

    @property
    def is_single(self) -> bool:
        return self.n_admissible == 1

    @property
    def single_pattern(self) -> int:
        return int(np.flatnonzero(self.admissible)[0])

    def patterns(self):
        return [int(p) for p in np.flatnonzero(self.admissible)]

    def cache_key(self) -> bytes:
        return self.admissible.tobytes()


def _ref_pi_sites(geom: ModelGeometry, ref) -> np.ndarray:
    """Resolve a block reference: (n, m) for a block, (kind, i, j) for a
    double block."""
    if len(ref) == 2:
        return geom.block_pi_sites(ref[0], ref[1])
    kind, i, j = ref
    return geom.double_pi_sites(kind, i, j)


# ---------------------------------------------------------------------------
# enumeration core
# ---------------------------------------------------------------------------

_EMPTY_I64 = np.zeros(0, np.int64)
_EMPTY_U8 = np.zeros(0, np.uint8)


def _normalize_pins(geom: ModelGeometry, pinned) -> dict[int, int]:
    out: dict[int, int] = {}
    if not pinned:
        return out
    for key, val in pinned.items():
        if isinstance(key, tuple):
            t1, t2 = key
            if not (0 <= t1 < geom.W and 0 <= t2 < geom.H):
                raise ValueError(f"pin site {key} out of range")
            idx = geom.site_index(t1, t2)
        else:
            idx = int(key)
        if not 0 <= idx < geom.n_sites:
            raise ValueError(f"pin site {key} out of range")
        if val not in (-1, 1):
            raise ValueError("pinned spins must be +-1")
        if out.get(idx, val) != val:
            raise ValueError(f"conflicting pins at site {key}")
        out[idx] = val
    return out


def _enum_core(geom: ModelGeometry, beta: float, J: float, field_flat: np.ndarray,
               pins: dict[int, int], assignments=None, chunk_bits: int | None = None):
    """Gray-code sweep over configurations consistent with `pins`,
    restricted to those satisfying every (pi_sites, admissible) pair in
    `assignments`.  Returns (log_weight_sum, count, mean_H, mean_m)."""
    n = geom.n_sites
    spins0 = np.full(n, -1, np.int8)
    for i, s in pins.items():
        spins0[i] = s
    free = np.array([i for i in range(n) if i not in pins], np.int64)
    if free.size > GUARD_FREE_SPINS:
        raise GuardError(f"{free.size} free spins exceed the enumeration guard "
                         f"({GUARD_FREE_SPINS})")

    if assignments:
        blk_sites = np.concatenate([s for s, _ in assignments]).astype(np.int64)
        blk_off = np.cumsum([0] + [s.size for s, _ in assignments]).astype(np.int64)
        adm = np.concatenate([a for _, a in assignments]).astype(np.uint8)
        adm_off = np.cumsum([0] + [a.size for _, a in assignments]).astype(np.int64)
        pos = {int(site): j for j, site in enumerate(free)}
        per_free: list[list[tuple[int, int]]] = [[] for _ in range(free.size)]
        for b, (sites, _) in enumerate(assignments):
            for k, site in enumerate(sites):
                j = pos.get(int(site))
                if j is not None:
                    per_free[j].append((b, k))
        inc_off = np.zeros(free.size + 1, np.int64)
        inc_blk: list[int] = []
        inc_bit: list[int] = []
        for j, lst in enumerate(per_free):
            for b, k in lst:
                inc_blk.append(b)
                inc_bit.append(k)
            inc_off[j + 1] = len(inc_blk)
        inc_blk = np.array(inc_blk, np.int64) if inc_blk else _EMPTY_I64
        inc_bit = np.array(inc_bit, np.int64) if inc_bit else _EMPTY_I64
    else:
        blk_sites = _EMPTY_I64
        blk_off = np.zeros(1, np.int64)
        adm = _EMPTY_U8
        adm_off = np.zeros(1, np.int64)
        inc_off = np.zeros(free.size + 1, np.int64)
        inc_blk = _EMPTY_I64
        inc_bit = _EMPTY_I64

    cb = _chunk_bits(free.size) if chunk_bits is None else min(chunk_bits, free.size)
    vmax, s0, sh, sm, cnt = _kernels.enum_reduce(
        spins0, float(beta), float(J), field_flat, geom.neighbor_table, free,
        blk_sites, blk_off, adm, adm_off, inc_off, inc_blk, inc_bit,
        n, cb)
    logw = _logsumexp_pair(vmax, s0)
    if cnt == 0:
        return -np.inf, 0, math.nan, math.nan
    return logw, int(cnt), sh / s0, sm / s0


def _field_flat(geom: ModelGeometry, params: ModelParams) -> np.ndarray:
    return params.h * geom.field_array.ravel().astype(np.float64)


def log_partition_enumerate(geom: ModelGeometry, params: ModelParams,
                            pinned=None) -> float:
    """log Z by exhaustive Gray-code enumeration (respecting pins)."""
    pins = _normalize_pins(geom, pinned)
    logw, _, _, _ = _enum_core(geom, params.beta, params.J, _field_flat(geom, params), pins)
    return logw


def all_config_energies(geom: ModelGeometry, params: ModelParams) -> np.ndarray:
    """Energies of every configuration, indexed by the packed-bit id
    (bit i of the id = spin +1 at flat site i)."""
    n = geom.n_sites
    if n > 24:
        raise GuardError("energy tables limited to 24 sites")
    spins0 = np.full(n, -1, np.int8)
    free = np.arange(n, dtype=np.int64)
    return _kernels.energies_table(spins0, float(params.J), _field_flat(geom, params),
                                   geom.neighbor_table, free)


def log_partition_transfer(geom: ModelGeometry, params: ModelParams) -> float:
    """log Z from a product of per-column transfer matrices.

    Column c carries its vertical bonds, its field term, and the
    horizontal bonds to column c+1; matrices repeat with the field
    period along axis 1.  Each step rescales by the max entry, so the
    product never over- or underflows.
    """
    W, H = geom.W, geom.H
    if H > GUARD_TM_HEIGHT:
        raise GuardError(f"column height {H} exceeds the transfer-matrix guard "
                         f"({GUARD_TM_HEIGHT})")
    beta, J, h = params.beta, params.J, params.h
    nst = 1 << H
    bits = (np.arange(nst)[:, None] >> np.arange(H)[None, :]) & 1
    sv = (2 * bits - 1).astype(np.float64)  # (state, row) spins
    vert = J * (sv * np.roll(sv, -1, axis=1)).sum(axis=1)
    horiz = J * (sv @ sv.T)

    period = 2 * geom.p1 if geom.kind == "cellboard" else 1
    mats = []
    for c in range(min(period, W)):
        fc = h * geom.field_array[:, c].astype(np.float64)
        expo = beta * (vert + sv @ fc)[:, None] + beta * horiz
        k = float(expo.max())
        mats.append((np.exp(expo - k), k))

    log_acc = 0.0
    prod = None
    for c in range(W):
        m, k = mats[c % len(mats)]
        prod = m.copy() if prod is None else prod @ m
        log_acc += k
        a = float(prod.max())
        prod /= a
        log_acc += math.log(a)
    return log_acc + math.log(float(np.trace(prod)))


# ---------------------------------------------------------------------------
# ensembles and event probabilities
# ---------------------------------------------------------------------------

@dataclass
class ExactEnsemble:
    """A finite-torus Gibbs measure with its (log) partition function.

    method is "enumerate" when the free-spin count fits the guard, else
    "transfer" (unpinned tori whose column height fits); probabilities of
    general events need the enumerate method, but single-pattern
    numerators work either way.
    """

    geom: ModelGeometry
    params: ModelParams
    log_z: float
    pinned: dict[int, int] = dc_field(default_factory=dict)
    method: str = "enumerate"

    @property
    def n_free(self) -> int:
        return self.geom.n_sites - len(self.pinned)

    def inputs_dict(self) -> dict:
        d = {"geometry": self.geom.to_json_dict(), "params": self.params.to_json_dict()}
        if self.pinned:
            d["pinned"] = {str(k): v for k, v in self.pinned.items()}
        return d


def exact_ensemble(geom: ModelGeometry, params: ModelParams, pinned=None) -> ExactEnsemble:
    pins = _normalize_pins(geom, pinned)
    n_free = geom.n_sites - len(pins)
    if n_free <= GUARD_FREE_SPINS:
        field = _field_flat(geom, params)
        log_z, _, _, _ = _enum_core(geom, params.beta, params.J, field, pins)
        return ExactEnsemble(geom, params, log_z, pins, "enumerate")
    if not pins and geom.H <= GUARD_TM_HEIGHT:
        return ExactEnsemble(geom, params, log_partition_transfer(geom, params),
                             pins, "transfer")
    raise GuardError("torus too large for both enumeration and the transfer matrix")


def exact_moments(ens: ExactEnsemble) -> tuple[float, float]:
    """Exact (<H>, <m>) of the ensemble (enumeration route)."""
    pins = dict(ens.pinned)
    _, _, mh, mm = _enum_core(ens.geom, ens.params.beta, ens.params.J,
                              _field_flat(ens.geom, ens.params), pins)
    return mh, mm


def _log_event_probability(ens: ExactEnsemble, assignments) -> float:
    """log mu(event) for an intersection of propagated block events.

    Constraint pruning: every bit on which all admissible patterns of an
    event agree pins its site outright, and the event is reduced to the
    remaining bits.  Single-pattern events therefore cost one energy
    evaluation and work even on transfer-matrix-backed ensembles.
    """
    geom = ens.geom
    pins = dict(ens.pinned)
    general = []
    for ref, ev in assignments:
        sites = _ref_pi_sites(geom, ref)
        if ev.n_bits != sites.size:
            raise ValueError("event size does not match the block")
        pats = np.flatnonzero(ev.admissible)
        if pats.size == ev.admissible.size:
            continue  # the full event constrains nothing
        and_mask = int(pats[0])
        or_mask = int(pats[0])
        for p in pats[1:]:
            and_mask &= int(p)
            or_mask |= int(p)
        loose = []
        for k, site in enumerate(sites):
            if (or_mask >> k) & 1 and not (and_mask >> k) & 1:
                loose.append(k)
                continue
            want = 1 if (and_mask >> k) & 1 else -1
            prev = pins.get(int(site))
            if prev is not None and prev != want:
                return -np.inf
            pins[int(site)] = want
        if loose:
            reduced = np.zeros(1 << len(loose), np.uint8)
            for p in pats:
                rp = 0
                for j, k in enumerate(loose):
                    rp |= ((int(p) >> k) & 1) << j
                reduced[rp] = 1
            general.append((sites[np.array(loose)], reduced))
    logw, _, _, _ = _enum_core(geom, ens.params.beta, ens.params.J,
                               _field_flat(geom, ens.params), pins, general)
    return logw - ens.log_z


def event_probability(ens: ExactEnsemble, event) -> float:
    """mu(event); `event` is either a predicate over spin configurations
    or a list of (block_ref, BlockEvent) pairs (block_ref = (n, m) or
    (kind, i, j) for double blocks)."""
    if callable(event):
        return _predicate_probability(ens, event)
    return float(np.exp(_log_event_probability(ens, event)))


def _predicate_probability(ens: ExactEnsemble, predicate) -> float:
    geom, params = ens.geom, ens.params
    pins = dict(ens.pinned)
    n = geom.n_sites
    spins0 = np.full(n, -1, np.int8)
    for i, s in pins.items():
        spins0[i] = s
    free = np.array([i for i in range(n) if i not in pins], np.int64)
    if free.size > GUARD_PREDICATE_SPINS:
        raise GuardError("predicate events are limited to "
                         f"{GUARD_PREDICATE_SPINS} free spins")
    energies = _kernels.energies_table(spins0, float(params.J),
                                       _field_flat(geom, params),
                                       geom.neighbor_table, free)
    sel = []
    spins = spins0.copy()
    for mask in range(energies.size):
        for j in range(free.size):
            spins[free[j]] = -spins0[free[j]] if (mask >> j) & 1 else spins0[free[j]]
        if predicate(spins.reshape(geom.H, geom.W)):
            sel.append(mask)
    if not sel:
        return 0.0
    lw = -params.beta * energies[np.array(sel)]
    vmax = float(lw.max())
    return float(np.exp(vmax + math.log(np.exp(lw - vmax).sum()) - ens.log_z))


# ---------------------------------------------------------------------------
# chessboard quantities
# ---------------------------------------------------------------------------

def log_z_quantity(ens: ExactEnsemble, event: BlockEvent) -> float:
    geom = ens.geom
    if event.is_single:
        tiled = tile_configuration(geom, event.single_pattern)
        logp = -ens.params.beta * energy(geom, ens.params, tiled) - ens.log_z
    else:
        assignments = [((n, m), event) for (n, m) in geom.block_coords()]
        logp = _log_event_probability(ens, assignments)
    return logp / geom.n_blocks


def z_quantity(ens: ExactEnsemble, event: BlockEvent) -> float:
    """z(A) = mu(propagated A on every block)^(1/N^2)."""
    return float(np.exp(log_z_quantity(ens, event)))


def log_z_double(ens: ExactEnsemble, kind: str, event: BlockEvent) -> float:
    geom = ens.geom
    geom._check_double_kind(kind)
    if geom.N % 4:
        raise GeometryError("double-block quantities need N to be a multiple of 4")
    if event.is_single:
        tiled = tile_double_configuration(geom, kind, event.single_pattern)
        logp = -ens.params.beta * energy(geom, ens.params, tiled) - ens.log_z
    else:
        assignments = [((kind, i, j), event) for (i, j) in geom.double_coords(kind)]
        logp = _log_event_probability(ens, assignments)
    return logp / geom.n_double_blocks()


def z_double(ens: ExactEnsemble, kind: str, event: BlockEvent) -> float:
    """The double-block analogue of z, exponent 2/N^2."""
    return float(np.exp(log_z_double(ens, kind, event)))


# ---------------------------------------------------------------------------
# reflection positivity
# ---------------------------------------------------------------------------

def left_half_sites(geom: ModelGeometry, plane: ReflectionPlane):
    """Flat indices of the left torus half for `plane`, plus their mirror
    images in matching order.  The halves share the line sites for
    through-site reflections."""
    dim = geom.W if plane.axis == 1 else geom.H
    coords = [x for x in range(dim) if (2 * x - plane.two_offset) % (2 * dim) <= dim]
    if plane.axis == 1:
        left = [t2 * geom.W + x for t2 in range(geom.H) for x in coords]
    else:
        left = [y * geom.W + t1 for y in coords for t1 in range(geom.W)]
    left = np.array(left, np.int64)
    mirr = np.empty_like(left)
    for k, idx in enumerate(left):
        t1, t2 = geom.site_coords(int(idx))
        r1, r2 = geom.reflect_site(plane, t1, t2)
        mirr[k] = geom.site_index(r1, r2)
    return left, mirr


def _require_plane(geom: ModelGeometry, plane: ReflectionPlane):
    ps = {(p.axis, p.two_offset) for p in geom.planes()}
    if (plane.axis, plane.two_offset % (2 * (geom.W if plane.axis == 1 else geom.H))) not in ps:
        raise GeometryError("plane is not one of the block-cutting reflection lines")


def rp_gram_matrix(ens: ExactEnsemble, plane: ReflectionPlane) -> np.ndarray:
    """Gram matrix M[a, b] = E[f_a * (f_b o reflection)] over the
    indicator basis of left-half configurations.  Any bounded left-half
    function is a linear combination of the f_a, so positivity of M is
    equivalent to reflection positivity for all of them."""
    geom, params = ens.geom, ens.params
    if ens.pinned:
        raise ValueError("reflection positivity is defined for the unpinned measure")
    _require_plane(geom, plane)
    if geom.n_sites > GUARD_RP_SITES:
        raise GuardError(f"RP check limited to {GUARD_RP_SITES} torus sites")
    left, mirr = left_half_sites(geom, plane)
    if left.size > GUARD_GRAM_SITES:
        raise GuardError("Gram dimension exceeds the 2^16 guard")
    energies = all_config_energies(geom, params)
    lw = -params.beta * energies
    w = np.exp(lw - ens.log_z)
    masks = np.arange(energies.size, dtype=np.int64)
    pid_l = np.zeros(energies.size, np.int64)
    pid_r = np.zeros(energies.size, np.int64)
    for k in range(left.size):
        pid_l |= ((masks >> int(left[k])) & 1) << k
        pid_r |= ((masks >> int(mirr[k])) & 1) << k
    dim = 1 << left.size
    gram = np.zeros((dim, dim))
    np.add.at(gram, (pid_l, pid_r), w)
    return gram


def verify_rp(ens: ExactEnsemble, plane: ReflectionPlane) -> VerificationReport:
    """Certify both reflection-positivity conditions for one plane:
    Gram symmetry and positive semi-definiteness within roundoff."""
    out = {}
    with timed(out):
        gram = rp_gram_matrix(ens, plane)
        sym_err = float(np.abs(gram - gram.T).max())
        sym = 0.5 * (gram + gram.T)
        if gram.shape[0] <= 2048:
            eigs = np.linalg.eigvalsh(sym)
            min_eig = float(eigs[0])
            norm = float(np.abs(eigs).max())
            psd_ok = min_eig >= -RP_EIG_TOL * norm
        else:
            norm = float(np.abs(sym).sum(axis=1).max())  # upper bound
            shift = RP_EIG_TOL * norm
            try:
                np.linalg.cholesky(sym + shift * np.eye(sym.shape[0]))
                psd_ok = True
                min_eig = -shift  # certified lower bound only
            except np.linalg.LinAlgError:
                psd_ok = False
                min_eig = float("nan")
        verdict = sym_err <= RP_SYM_TOL and psd_ok
    return VerificationReport(
        name=f"rp[axis={plane.axis},two_offset={plane.two_offset}]",
        inputs=ens.inputs_dict(),
        lhs=min_eig, rhs=-RP_EIG_TOL * norm, tolerance=RP_EIG_TOL,
        verdict=verdict, seconds=out["seconds"],
        details={"sym_error": sym_err, "sym_tol": RP_SYM_TOL,
                 "gram_dim": gram.shape[0], "norm": norm,
                 "through": plane.through},
    )


def cauchy_schwarz_check(ens: ExactEnsemble, plane: ReflectionPlane,
                         n_trials: int = 20, seed: int = 0) -> VerificationReport:
    """Spot-check E[f theta(g)]^2 <= E[f theta(f)] E[g theta(g)] on random
    bounded functions of the left half."""
    out = {}
    with timed(out):
        gram = rp_gram_matrix(ens, plane)
        rng = np.random.default_rng(seed)
        worst = -np.inf
        for _ in range(n_trials):
            f = rng.standard_normal(gram.shape[0])
            g = rng.standard_normal(gram.shape[0])
            lhs = float(f @ gram @ g) ** 2
            rhs = float(f @ gram @ f) * float(g @ gram @ g)
            worst = max(worst, lhs - rhs)
        verdict = worst <= 1e-9 * max(1.0, abs(rhs))
    return VerificationReport(
        name=f"cauchy_schwarz[axis={plane.axis},two_offset={plane.two_offset}]",
        inputs=ens.inputs_dict(), lhs=worst, rhs=0.0, tolerance=1e-9,
        verdict=verdict, seconds=out["seconds"],
        details={"trials": n_trials, "seed": seed},
    )


# ---------------------------------------------------------------------------
# chessboard estimate
# ---------------------------------------------------------------------------

def verify_chessboard(ens: ExactEnsemble, assignments) -> VerificationReport:
    """Check mu(intersection of propagated events at the given blocks)
    <= product of z over the events.  assignments: list of ((n, m), BlockEvent)
    with distinct block coordinates."""
    coords = [tuple(ref) for ref, _ in assignments]
    if len(set(coords)) != len(coords):
        raise ValueError("chessboard assignments must use distinct blocks")
    out = {}
    with timed(out):
        log_lhs = _log_event_probability(ens, assignments)
        cache: dict[bytes, float] = {}
        log_rhs = 0.0
        for _, ev in assignments:
            key = ev.cache_key()
            if key not in cache:
                cache[key] = log_z_quantity(ens, ev)
            log_rhs += cache[key]
        lhs = float(np.exp(log_lhs))
        rhs = float(np.exp(log_rhs))
        verdict = (log_lhs == -np.inf) or (log_lhs <= log_rhs + math.log1p(CHESSBOARD_TOL))
    return VerificationReport(
        name=f"chessboard[m={len(assignments)}]",
        inputs=ens.inputs_dict(), lhs=lhs, rhs=rhs, tolerance=CHESSBOARD_TOL,
        verdict=verdict, seconds=out["seconds"],
        details={"log_lhs": log_lhs, "log_rhs": log_rhs,
                 "blocks": [list(c) for c in coords]},
    )


def verify_symmetry_identity(ens: ExactEnsemble, block: tuple[int, int] = (0, 0)
                             ) -> VerificationReport:
    """The torus-measure symmetry: mu(block all +1) = mu(block all -1)
    = (1 - mu(block bad)) / 2, exactly up to roundoff.  It follows from
    reflecting through the axis line bisecting the block and flipping all
    spins, which negates the field pattern."""
    geom = ens.geom
    nb = geom.n_block_sites
    out = {}
    with timed(out):
        p_plus = event_probability(ens, [(block, BlockEvent.single((1 << nb) - 1, nb))])
        p_minus = event_probability(ens, [(block, BlockEvent.single(0, nb))])
        p_bad = event_probability(ens, [(block, BlockEvent.bad(nb))])
        err = max(abs(p_plus - p_minus), abs(p_plus - (1.0 - p_bad) / 2.0))
        verdict = err <= 1e-12
    return VerificationReport(
        name=f"symmetry_identity[block={block[0]},{block[1]}]",
        inputs=ens.inputs_dict(),
        lhs=err, rhs=0.0, tolerance=1e-12, verdict=bool(verdict),
        seconds=out["seconds"],
        details={"p_plus": p_plus, "p_minus": p_minus, "p_bad": p_bad},
    )


# ---------------------------------------------------------------------------
# bad-block bounds
# ---------------------------------------------------------------------------

def verify_prop2(ens: ExactEnsemble, c: float = 9.0) -> VerificationReport:
    """Bad-block bounds: z(R) <= 2^(B1*B2) * exp(-beta*c_P) plus the
    per-pattern route z(B(pattern)) <= exp(-beta*c_P) for every bad
    pattern, and (when double blocks exist and N % 4 == 0) the
    double-block analogue with 4^(B1*B2).

    When c_P <= 0 the bounds are vacuous; they are reported as such, not
    failed.  On tori too large to enumerate, z(R) is replaced by its
    sub-additive upper bound (the sum of per-pattern values), which still
    certifies the inequality.
    """
    geom, params = ens.geom, ens.params
    tc = theory_constants(geom, params, c=c)
    c_p = tc.peierls_c
    vacuous = c_p <= 0
    bb = geom.n_block_sites
    out = {}
    children = []
    with timed(out):
        log_rhs = bb * math.log(2.0) - params.beta * c_p
        bad = BlockEvent.bad(bb)
        # per-pattern route
        per_out = {}
        with timed(per_out):
            worst_logz = -np.inf
            worst_pat = None
            log_sum = -np.inf
            for pat in bad.patterns():
                lz = log_z_quantity(ens, BlockEvent.single(pat, bb))
                if lz > worst_logz:
                    worst_logz, worst_pat = lz, pat
                log_sum = np.logaddexp(log_sum, lz)
            per_rhs = -params.beta * c_p
            per_ok = vacuous or worst_logz <= per_rhs + 1e-12 * max(1.0, abs(per_rhs))
        children.append(VerificationReport(
            name="per_pattern", inputs={}, lhs=float(np.exp(worst_logz)),
            rhs=float(np.exp(per_rhs)), tolerance=1e-12, verdict=bool(per_ok),
            seconds=per_out["seconds"],
            details={"worst_pattern": worst_pat, "n_bad_patterns": bad.n_admissible,
                     "vacuous": vacuous}))

        if ens.method == "enumerate" and ens.n_free <= GUARD_FREE_SPINS:
            log_lhs = log_z_quantity(ens, bad)
            lhs_kind = "exact"
        else:
            log_lhs = float(log_sum)
            lhs_kind = "subadditive_upper_bound"
        main_ok = vacuous or log_lhs <= log_rhs + 1e-12 * max(1.0, abs(log_rhs))

        for kind in geom.double_kinds():
            if geom.N % 4:
                continue
            star_out = {}
            with timed(star_out):
                nb2 = geom.n_double_sites
                log_star_sum = -np.inf
                for pat in BlockEvent.bad(nb2).patterns():
                    lz = log_z_double(ens, kind, BlockEvent.single(pat, nb2))
                    log_star_sum = np.logaddexp(log_star_sum, lz)
                log_star_rhs = bb * math.log(4.0) - params.beta * c_p
                star_ok = vacuous or log_star_sum <= log_star_rhs + 1e-12 * max(1.0, abs(log_star_rhs))
            children.append(VerificationReport(
                name=f"double_block[{kind}]", inputs={},
                lhs=float(np.exp(log_star_sum)), rhs=float(np.exp(log_star_rhs)),
                tolerance=1e-12, verdict=bool(star_ok), seconds=star_out["seconds"],
                details={"route": "subadditive_per_pattern", "vacuous": vacuous}))

    return VerificationReport(
        name="bad_block_bound",
        inputs=ens.inputs_dict(),
        lhs=float(np.exp(log_lhs)), rhs=float(np.exp(log_rhs)), tolerance=1e-12,
        verdict=bool(main_ok), seconds=out["seconds"],
        details={"peierls_c": c_p, "vacuous": vacuous, "lhs_kind": lhs_kind,
                 "theory": tc.to_json_dict()},
        children=children,
    )


# ---------------------------------------------------------------------------
# tiled energy identity
# ---------------------------------------------------------------------------

def verify_lemma_per(geom: ModelGeometry, params: ModelParams,
                     block_pattern) -> VerificationReport:
    """The tiled configuration's torus energy equals (N/2)^2 times its
    energy on the minimal 2x2-block torus."""
    out = {}
    with timed(out):
        tiled = tile_configuration(geom, block_pattern)
        lhs = energy(geom, params, tiled)
        sub = geom.sub_torus_2x2()
        window = np.ascontiguousarray(tiled[: sub.H, : sub.W])
        rhs = (geom.N // 2) ** 2 * energy(sub, params, window)
        tol = 1e-10
        verdict = abs(lhs - rhs) <= tol * max(1.0, abs(lhs), abs(rhs))
    pat = int(block_pattern) if isinstance(block_pattern, (int, np.integer)) else None
    return VerificationReport(
        name="tiled_energy_identity",
        inputs={"geometry": geom.to_json_dict(), "params": params.to_json_dict(),
                "pattern": pat},
        lhs=lhs, rhs=rhs, tolerance=1e-10, verdict=verdict, seconds=out["seconds"],
    )


# ---------------------------------------------------------------------------
# two-point probabilities
# ---------------------------------------------------------------------------

def two_point_probability(ens: ExactEnsemble, s: tuple[int, int],
                          t: tuple[int, int]) -> float:
    """mu(sigma(s) = +1, sigma(t) = -1) by exact enumeration."""
    geom = ens.geom
    si, ti = geom.site_index(*s), geom.site_index(*t)
    if si == ti:
        raise ValueError("two-point probability needs distinct sites")
    pins = dict(ens.pinned)
    for idx, want in ((si, 1), (ti, -1)):
        prev = pins.get(idx)
        if prev is not None and prev != want:
            return 0.0
        pins[idx] = want
    logw, _, _, _ = _enum_core(geom, ens.params.beta, ens.params.J,
                               _field_flat(geom, ens.params), pins)
    return float(np.exp(logw - ens.log_z))


def verify_two_point_bound(ens: ExactEnsemble, s, t, c: float = 9.0) -> VerificationReport:
    """Compare the exact two-point probability against its closed-form
    bound 2c(c+1) 2^(B1B2/2) exp(-beta*c_P/8)."""
    out = {}
    with timed(out):
        p = two_point_probability(ens, s, t)
        tc = theory_constants(ens.geom, ens.params, c=c)
        rhs = (2.0 * c * (c + 1) * 2.0 ** (ens.geom.n_block_sites / 2.0)
               * math.exp(-ens.params.beta * tc.peierls_c / 8.0))
        verdict = tc.peierls_c <= 0 or p <= rhs * (1 + 1e-12)
    return VerificationReport(
        name="two_point_bound", inputs=ens.inputs_dict(),
        lhs=p, rhs=rhs, tolerance=1e-12, verdict=bool(verdict), seconds=out["seconds"],
        details={"s": list(s), "t": list(t), "c": c, "peierls_c": tc.peierls_c},
    )
