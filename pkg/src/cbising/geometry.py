"""Torus geometry for Ising models with a periodic external field.

Two field layouts live on a W x H torus of sites (t1, t2), 0 <= t1 < W,
0 <= t2 < H, with all site arithmetic modulo (W, H):

* ``cellboard``: rectangular L1 x L2 cells whose field signs alternate
  like a checkerboard of cells (+ on cell (n, m) when n + m is even);
  dims are (N*L1, N*L2) with N even so the total field is zero.
* ``strip``: full-width horizontal strips of height L, + on even strips;
  dims are (N, N*L).

Conventions fixed here and relied on by every other module:

* Spin configurations are int8 arrays of shape (H, W) with entries +-1,
  indexed ``config[t2, t1]``; the flat (row-major) index of a site is
  ``t2*W + t1`` and doubles as its bit position when a configuration is
  packed into an integer (bit set <=> spin +1).
* Energy sums run over the 2*W*H directed bonds "right" and "up" from
  each site.  On a torus dimension of exactly 2 this counts the doubled
  wrap bonds with multiplicity 2, which is what makes the minimal
  2-cells-per-axis torus energies exact identities.
* Reflection-line offsets are stored doubled (``two_offset = 2*offset``)
  so half-integer positions stay exact integers.  A line reflects
  through sites when ``two_offset`` is even and through bonds when odd.

The reflection lines along axis i sit at offsets n*p_i + (p_i - 1)/2,
where p_i is the block step (the cell side L_i, or 1 and L for strips).
They cut the torus into N x N congruent blocks of B1 x B2 sites each,
B_i = p_i for even p_i and p_i + 1 for odd p_i; for odd p_i adjacent
blocks share one boundary line of sites.  Internally all sites use
canonical [0, W) x [0, H) coordinates; the base block (0, 0) is anchored
so that it contains the site (0, 0), with its offsets running over
[-(p+1)//2, (p-1)//2] for odd p and [-p//2, p//2 - 1] for even p.

A block configuration is copied to block (n, m) by the propagation
operator: translate by (n*p1, m*p2) after reflecting through the axis
lines Q1 = {t1 = -1/2} / Q2 = {t2 = -1/2} whenever the corresponding
block *index* is odd.  (For even p_i the raw translation coordinate
n*p_i is always even, so the parity that makes reflections between
adjacent blocks consistent is the parity of the block index, not of the
coordinate.)  Propagating one block configuration to every block tiles
the torus; the result is consistent on shared boundary lines and has
period 2 in the block index.

Double blocks glue two disjoint adjacent blocks along an even-p axis:
kinds "h1"/"h2" extend by +-(p1, 0) and exist when p1 is even, "v1"/"v2"
analogously along axis 2.  Their anchors step by twice the block step on
the doubled axis, so N must be a multiple of 4 for a consistent
double-block tiling.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

DOUBLE_KINDS = ("h1", "h2", "v1", "v2")


class GeometryError(ValueError):
    """Invalid lattice sizes, parities, or block/plane requests."""


@dataclass(frozen=True)
class ReflectionPlane:
    """A reflection line orthogonal to one lattice axis.

    axis: 1 (line of constant t1) or 2 (constant t2).
    two_offset: twice the line offset, reduced modulo 2*dim.
    through: "sites" if the line passes through lattice sites, else "bonds".
    """

    axis: int
    two_offset: int
    through: str

    @property
    def offset(self) -> float:
        return self.two_offset / 2.0


def _axis_offsets(p: int) -> range:
    """Site offsets of the base block along one axis (block step p)."""
    if p % 2 == 0:
        return range(-p // 2, p // 2)
    return range(-(p + 1) // 2, (p - 1) // 2 + 1)


def _axis_block_len(p: int) -> int:
    return p if p % 2 == 0 else p + 1


@dataclass(frozen=True)
class ModelGeometry:
    """Immutable torus geometry: field layout plus block/plane structure."""

    kind: str  # "cellboard" | "strip"
    N: int
    L1: int = 0  # cell sides (cellboard); strip stores the strip height in L2
    L2: int = 0

    def __post_init__(self):
        if self.kind not in ("cellboard", "strip"):
            raise GeometryError(f"unknown geometry kind {self.kind!r}")
        if self.kind == "cellboard":
            if self.L1 < 1 or self.L2 < 1:
                raise GeometryError("cell sides must be positive")
        else:
            if self.L2 < 1:
                raise GeometryError("strip height must be positive")
        if self.N < 2 or self.N % 2:
            raise GeometryError("torus scale N must be even and >= 2")

    # -- sizes ---------------------------------------------------------

    @property
    def p1(self) -> int:
        """Block step along axis 1."""
        return self.L1 if self.kind == "cellboard" else 1

    @property
    def p2(self) -> int:
        return self.L2

    @property
    def W(self) -> int:
        return self.N * self.p1

    @property
    def H(self) -> int:
        return self.N * self.p2

    @property
    def dims(self) -> tuple[int, int]:
        return (self.W, self.H)

    @property
    def n_sites(self) -> int:
        return self.W * self.H

    @property
    def B1(self) -> int:
        return _axis_block_len(self.p1)

    @property
    def B2(self) -> int:
        return _axis_block_len(self.p2)

    @property
    def n_block_sites(self) -> int:
        return self.B1 * self.B2

    @property
    def n_blocks(self) -> int:
        return self.N * self.N

    # -- sites and field -----------------------------------------------

    def site_index(self, t1: int, t2: int) -> int:
        return (t2 % self.H) * self.W + (t1 % self.W)

    def site_coords(self, idx: int) -> tuple[int, int]:
        return (idx % self.W, idx // self.W)

    def field_sign(self, t1: int, t2: int) -> int:
        t1 %= self.W
        t2 %= self.H
        if self.kind == "cellboard":
            par = (t1 // self.L1 + t2 // self.L2) % 2
        else:
            par = (t2 // self.L2) % 2
        return 1 if par == 0 else -1

    @cached_property
    def field_array(self) -> np.ndarray:
        """(H, W) array of field signs; read-only."""
        t1 = np.arange(self.W)
        t2 = np.arange(self.H)
        if self.kind == "cellboard":
            par = (t1[None, :] // self.L1 + t2[:, None] // self.L2) % 2
        else:
            par = np.broadcast_to((t2[:, None] // self.L2) % 2, (self.H, self.W))
        arr = np.where(par == 0, 1, -1).astype(np.int8)
        arr.flags.writeable = False
        return arr

    @cached_property
    def neighbor_table(self) -> np.ndarray:
        """(n_sites, 4) flat indices [right, left, up, down]; read-only.

        Wrap neighbours repeat when a dimension equals 2, which realises
        the doubled-bond multiplicity of the energy convention.
        """
        W, H = self.W, self.H
        idx = np.arange(self.n_sites).reshape(H, W)
        out = np.empty((self.n_sites, 4), dtype=np.int64)
        out[:, 0] = np.roll(idx, -1, axis=1).ravel()
        out[:, 1] = np.roll(idx, 1, axis=1).ravel()
        out[:, 2] = np.roll(idx, -1, axis=0).ravel()
        out[:, 3] = np.roll(idx, 1, axis=0).ravel()
        out.flags.writeable = False
        return out

    # -- reflection lines ------------------------------------------------

    def planes(self, axis: int | None = None) -> list[ReflectionPlane]:
        """The block-cutting reflection lines, per axis or both."""
        out = []
        for ax, p, dim in ((1, self.p1, self.W), (2, self.p2, self.H)):
            if axis is not None and ax != axis:
                continue
            through = "sites" if p % 2 else "bonds"
            for n in range(dim // p):
                out.append(ReflectionPlane(ax, (2 * n * p + p - 1) % (2 * dim), through))
        return out

    def q_plane(self, axis: int) -> ReflectionPlane:
        """The line {t_axis = -1/2} bisecting the base block."""
        dim = self.W if axis == 1 else self.H
        return ReflectionPlane(axis, 2 * dim - 1, "bonds")

    def reflect_site(self, plane: ReflectionPlane, t1: int, t2: int) -> tuple[int, int]:
        if plane.axis == 1:
            return ((plane.two_offset - t1) % self.W, t2 % self.H)
        return (t1 % self.W, (plane.two_offset - t2) % self.H)

    # -- blocks ----------------------------------------------------------

    def block_coords(self):
        for m in range(self.N):
            for n in range(self.N):
                yield (n, m)

    def block_sites(self, n: int, m: int) -> list[tuple[int, int]]:
        """Canonical sites of block (n, m), axis-2-major order."""
        if not (0 <= n < self.N and 0 <= m < self.N):
            raise GeometryError(f"block coordinate ({n}, {m}) out of range")
        t1o, t2o = n * self.p1, m * self.p2
        return [
            ((a + t1o) % self.W, (b + t2o) % self.H)
            for b in _axis_offsets(self.p2)
            for a in _axis_offsets(self.p1)
        ]

    def block_pi_sites(self, n: int, m: int) -> np.ndarray:
        """Flat site indices that receive the bits of a propagated block
        configuration: entry k is where pattern bit k of the base block
        lands under the propagation to block (n, m)."""
        if not (0 <= n < self.N and 0 <= m < self.N):
            raise GeometryError(f"block coordinate ({n}, {m}) out of range")
        t1o, t2o = n * self.p1, m * self.p2
        flip1, flip2 = n % 2 == 1, m % 2 == 1
        out = np.empty(self.n_block_sites, dtype=np.int64)
        k = 0
        for b in _axis_offsets(self.p2):
            bb = -b - 1 if flip2 else b
            for a in _axis_offsets(self.p1):
                aa = -a - 1 if flip1 else a
                out[k] = ((bb + t2o) % self.H) * self.W + (aa + t1o) % self.W
                k += 1
        return out

    # -- double blocks ---------------------------------------------------

    def double_kinds(self) -> tuple[str, ...]:
        kinds = []
        if self.p1 % 2 == 0:
            kinds += ["h1", "h2"]
        if self.p2 % 2 == 0:
            kinds += ["v1", "v2"]
        return tuple(kinds)

    def _check_double_kind(self, kind: str):
        if kind not in DOUBLE_KINDS:
            raise GeometryError(f"unknown double-block kind {kind!r}")
        if kind not in self.double_kinds():
            raise GeometryError(f"double-block kind {kind!r} needs an even block step on its axis")

    @property
    def n_double_sites(self) -> int:
        return 2 * self.n_block_sites

    def n_double_blocks(self) -> int:
        return self.N * self.N // 2

    def double_coords(self, kind: str):
        """Anchor indices (i, j): i steps by 2*p on the doubled axis."""
        self._check_double_kind(kind)
        if kind.startswith("h"):
            for j in range(self.N):
                for i in range(self.N // 2):
                    yield (i, j)
        else:
            for j in range(self.N // 2):
                for i in range(self.N):
                    yield (i, j)

    def _double_offsets(self, kind: str) -> list[tuple[int, int]]:
        """Ordered site offsets of the base double block (two block copies)."""
        base = [(a, b) for b in _axis_offsets(self.p2) for a in _axis_offsets(self.p1)]
        shift = {
            "h1": (self.p1, 0),
            "h2": (-self.p1, 0),
            "v1": (0, self.p2),
            "v2": (0, -self.p2),
        }[kind]
        return base + [(a + shift[0], b + shift[1]) for a, b in base]

    def double_block_sites(self, kind: str, i: int, j: int) -> list[tuple[int, int]]:
        """Canonical sites of the double block anchored at index (i, j)."""
        self._check_double_kind(kind)
        t1o, t2o = self._double_anchor(kind, i, j)
        return [((a + t1o) % self.W, (b + t2o) % self.H) for a, b in self._double_offsets(kind)]

    def _double_anchor(self, kind: str, i: int, j: int) -> tuple[int, int]:
        if kind == "h1":
            return (2 * i * self.p1, j * self.p2)
        if kind == "h2":
            return ((2 * i + 1) * self.p1, j * self.p2)
        if kind == "v1":
            return (i * self.p1, 2 * j * self.p2)
        return (i * self.p1, (2 * j + 1) * self.p2)

    def double_pi_sites(self, kind: str, i: int, j: int) -> np.ndarray:
        """Like block_pi_sites for a propagated double-block pattern.

        Along the doubled axis the reflection is through the line that
        bisects the double block (a block-cutting line); along the other
        axis it is the usual Q reflection.  Reflections apply when the
        respective anchor index is odd.
        """
        self._check_double_kind(kind)
        horizontal = kind.startswith("h")
        t1o, t2o = self._double_anchor(kind, i, j)
        # reflection x -> 2c - x about the double-block centre c
        if kind == "h1":
            two_c = self.p1 - 1
        elif kind == "h2":
            two_c = -self.p1 - 1
        elif kind == "v1":
            two_c = self.p2 - 1
        else:
            two_c = -self.p2 - 1
        flip_d = (i if horizontal else j) % 2 == 1
        flip_o = (j if horizontal else i) % 2 == 1
        out = np.empty(self.n_double_sites, dtype=np.int64)
        for k, (a, b) in enumerate(self._double_offsets(kind)):
            if horizontal:
                aa = two_c - a if flip_d else a
                bb = -b - 1 if flip_o else b
            else:
                aa = -a - 1 if flip_o else a
                bb = two_c - b if flip_d else b
            out[k] = ((bb + t2o) % self.H) * self.W + (aa + t1o) % self.W
        return out

    # -- misc ------------------------------------------------------------

    def sub_torus_2x2(self) -> "ModelGeometry":
        """The 2p1 x 2p2 torus carrying the minimal period of any tiled
        block configuration, with the same field layout."""
        return ModelGeometry(self.kind, 2, self.L1, self.L2)

    def to_json_dict(self) -> dict:
        d = {"kind": self.kind, "N": self.N, "dims": [self.W, self.H]}
        if self.kind == "cellboard":
            d["L1"], d["L2"] = self.L1, self.L2
        else:
            d["L"] = self.L2
        return d

    def describe(self) -> str:
        if self.kind == "cellboard":
            return f"cellboard(L1={self.L1},L2={self.L2},N={self.N})"
        return f"strip(L={self.L2},N={self.N})"


def cell_board(L1: int, L2: int, N: int) -> ModelGeometry:
    return ModelGeometry("cellboard", N, L1, L2)


def strip(L: int, N: int) -> ModelGeometry:
    if N % 4:
        raise GeometryError("strip torus scale N must be a multiple of 4")
    return ModelGeometry("strip", N, 0, L)


def build_geometry(kind: str, N: int, L1: int | None = None, L2: int | None = None,
                   L: int | None = None) -> ModelGeometry:
    """Build a geometry from CLI-style arguments."""
    if kind == "cellboard":
        if L1 is None or L2 is None:
            raise GeometryError("cellboard geometry needs L1 and L2")
        return cell_board(L1, L2, N)
    if kind == "strip":
        if L is None:
            raise GeometryError("strip geometry needs L")
        return strip(L, N)
    raise GeometryError(f"unknown geometry kind {kind!r}")


# ---------------------------------------------------------------------------
# spin configurations
# ---------------------------------------------------------------------------

def config_const(geom: ModelGeometry, value: int) -> np.ndarray:
    return np.full((geom.H, geom.W), value, dtype=np.int8)


def config_from_bits(geom: ModelGeometry, bits: int) -> np.ndarray:
    n = geom.n_sites
    flat = np.array([1 if (bits >> i) & 1 else -1 for i in range(n)], dtype=np.int8)
    return flat.reshape(geom.H, geom.W)


def config_to_bits(config: np.ndarray) -> int:
    bits = 0
    for i, s in enumerate(np.asarray(config).ravel()):
        if s > 0:
            bits |= 1 << i
    return bits


def pattern_to_spins(pattern: int, n_bits: int) -> np.ndarray:
    return np.array([1 if (pattern >> k) & 1 else -1 for k in range(n_bits)], dtype=np.int8)


def spins_to_pattern(spins) -> int:
    p = 0
    for k, s in enumerate(spins):
        if s > 0:
            p |= 1 << k
    return p


def apply_reflection(geom: ModelGeometry, plane: ReflectionPlane, config: np.ndarray) -> np.ndarray:
    """The reflected configuration: value at s is taken from the mirror
    image of s.  An involution for every lattice-aligned line."""
    if plane.axis not in (1, 2):
        raise GeometryError(f"bad plane axis {plane.axis}")
    config = np.asarray(config)
    if config.shape != (geom.H, geom.W):
        raise GeometryError("configuration shape does not match the torus")
    if plane.axis == 1:
        src = (plane.two_offset - np.arange(geom.W)) % geom.W
        return np.ascontiguousarray(config[:, src])
    src = (plane.two_offset - np.arange(geom.H)) % geom.H
    return np.ascontiguousarray(config[src, :])


def propagate(geom: ModelGeometry, block: tuple[int, int], block_spins) -> tuple[np.ndarray, np.ndarray]:
    """Propagate a block configuration to block (n, m).

    block_spins: +-1 sequence in base-block order (or packed int).
    Returns (flat site indices, spin values) of the partial configuration.
    """
    n, m = block
    if isinstance(block_spins, (int, np.integer)):
        block_spins = pattern_to_spins(int(block_spins), geom.n_block_sites)
    vals = np.asarray(block_spins, dtype=np.int8).ravel()
    if vals.size != geom.n_block_sites:
        raise GeometryError("block configuration has the wrong number of sites")
    return geom.block_pi_sites(n, m), vals.copy()


def propagate_inverse(geom: ModelGeometry, block: tuple[int, int], config: np.ndarray) -> int:
    """Pull the restriction of a torus configuration on block (n, m) back
    to a base-block pattern (inverse of the propagation bijection)."""
    sites = geom.block_pi_sites(*block)
    flat = np.asarray(config).ravel()
    p = 0
    for k, s in enumerate(sites):
        if flat[s] > 0:
            p |= 1 << k
    return p


def _tile(geom: ModelGeometry, coords, pi_sites, vals: np.ndarray) -> np.ndarray:
    flat = np.zeros(geom.n_sites, dtype=np.int8)
    for c in coords:
        sites = pi_sites(*c)
        placed = flat[sites]
        clash = (placed != 0) & (placed != vals)
        if clash.any():
            raise GeometryError("inconsistent overlap while tiling; propagation bug")
        flat[sites] = vals
    assert (flat != 0).all()
    return flat.reshape(geom.H, geom.W)


def tile_configuration(geom: ModelGeometry, block_spins) -> np.ndarray:
    """Full torus configuration agreeing with the propagated block
    configuration on every block (checks consistency on overlaps)."""
    if isinstance(block_spins, (int, np.integer)):
        block_spins = pattern_to_spins(int(block_spins), geom.n_block_sites)
    vals = np.asarray(block_spins, dtype=np.int8).ravel()
    if vals.size != geom.n_block_sites:
        raise GeometryError("block configuration has the wrong number of sites")
    return _tile(geom, geom.block_coords(), geom.block_pi_sites, vals)


def tile_double_configuration(geom: ModelGeometry, kind: str, double_spins) -> np.ndarray:
    """Tile the torus with a propagated double-block configuration."""
    geom._check_double_kind(kind)
    if geom.N % 4:
        raise GeometryError("double-block tilings need N to be a multiple of 4")
    if isinstance(double_spins, (int, np.integer)):
        double_spins = pattern_to_spins(int(double_spins), geom.n_double_sites)
    vals = np.asarray(double_spins, dtype=np.int8).ravel()
    if vals.size != geom.n_double_sites:
        raise GeometryError("double-block configuration has the wrong number of sites")
    return _tile(geom, geom.double_coords(kind),
                 lambda i, j: geom.double_pi_sites(kind, i, j), vals)


def restrict_to_2x2(geom: ModelGeometry, config: np.ndarray) -> np.ndarray:
    """Restrict a (2p1, 2p2)-periodic configuration to the minimal torus."""
    sub = geom.sub_torus_2x2()
    return np.ascontiguousarray(np.asarray(config)[: sub.H, : sub.W])
