"""Numba kernels: Gray-code enumeration, subset sweeps, Metropolis updates.

Configuration masks use bit j for the j-th entry of the free-site list,
bit value 1 meaning "flipped relative to the start state".  Gray-code
order visits mask g(k) = k ^ (k >> 1); step k flips bit ctz(k), so the
energy, spin sum, and per-block pattern ids are all maintained in O(1)
per configuration.  Sweeps are partitioned into contiguous Gray ranges
(fixed top bits); partial accumulators are merged in index order, so
results are bit-identical for a fixed partition count.

The Monte Carlo kernel draws its uniforms from a stateless counter-based
generator (splitmix64 finalizer of key ^ mix(counter)), keyed by
(seed, chain id) and counted by (sweep, site): chains are reproducible
regardless of scheduling.
"""

from __future__ import annotations

import numpy as np
from numba import config as _numba_config
from numba import njit, prange

# the sandboxed TBB runtime predates what numba wants; omp is fine
_numba_config.THREADING_LAYER = "omp"

U64 = np.uint64
_NEG_INF = -np.inf


@njit(cache=True, inline="always")
def _ctz64(k):
    c = 0
    while ((k >> c) & 1) == 0:
        c += 1
    return c


@njit(cache=True, inline="always")
def _delta_flip(spins, u, J, field, nbr):
    s = spins[u]
    nsum = spins[nbr[u, 0]] + spins[nbr[u, 1]] + spins[nbr[u, 2]] + spins[nbr[u, 3]]
    return 2.0 * J * s * nsum + 2.0 * field[u] * s


@njit(cache=True)
def energy_of(spins, J, field, nbr):
    """-J * sum over directed right/up bonds - sum field*sigma."""
    e = 0.0
    for u in range(field.size):
        e -= J * spins[u] * (spins[nbr[u, 0]] + spins[nbr[u, 2]])
        e -= field[u] * spins[u]
    return e


@njit(cache=True, parallel=True)
def enum_reduce(spins0, beta, J, field, nbr, free,
                blk_sites, blk_off, adm, adm_off,
                inc_off, inc_blk, inc_bit, n_m, chunk_bits):
    """Sweep all 2^len(free) configurations reachable from spins0.

    Accumulates, over configurations whose every listed block pattern is
    admissible, the scaled sums needed for log-sum-exp of exp(-beta*E)
    plus energy and magnetisation moments.

    Returns (vmax, s0, sh, sm, count): log of the summed weight is
    vmax + log(s0); <H> = sh/s0; <m> = sm/s0; count admitted configs.
    """
    F = free.size
    nb = blk_off.size - 1
    if chunk_bits > F:
        chunk_bits = F
    nchunks = 1 << chunk_bits
    per = 1 << (F - chunk_bits)

    vmax_a = np.full(nchunks, _NEG_INF)
    s0_a = np.zeros(nchunks)
    sh_a = np.zeros(nchunks)
    sm_a = np.zeros(nchunks)
    cnt_a = np.zeros(nchunks, np.int64)

    for ci in prange(nchunks):
        spins = spins0.copy()
        start = ci * per
        g0 = start ^ (start >> 1)
        for j in range(F):
            if (g0 >> j) & 1:
                spins[free[j]] = -spins[free[j]]
        e = energy_of(spins, J, field, nbr)
        ssum = 0
        for u in range(spins.size):
            ssum += spins[u]
        pid = np.zeros(nb, np.int64)
        viol = 0
        for b in range(nb):
            p = 0
            for q in range(blk_off[b], blk_off[b + 1]):
                if spins[blk_sites[q]] > 0:
                    p |= 1 << (q - blk_off[b])
            pid[b] = p
            if adm[adm_off[b] + p] == 0:
                viol += 1

        vmax = _NEG_INF
        s0 = 0.0
        sh = 0.0
        sm = 0.0
        cnt = 0
        for k in range(per):
            if k > 0:
                j = _ctz64(k)
                u = free[j]
                e += _delta_flip(spins, u, J, field, nbr)
                spins[u] = -spins[u]
                ssum += 2 * spins[u]
                for q in range(inc_off[j], inc_off[j + 1]):
                    b = inc_blk[q]
                    was = np.int64(adm[adm_off[b] + pid[b]])
                    pid[b] ^= 1 << inc_bit[q]
                    viol += was - np.int64(adm[adm_off[b] + pid[b]])
            if viol == 0:
                v = -beta * e
                m = ssum / n_m
                if v <= vmax:
                    w = np.exp(v - vmax)
                    s0 += w
                    sh += e * w
                    sm += m * w
                else:
                    r = np.exp(vmax - v)
                    s0 = s0 * r + 1.0
                    sh = sh * r + e
                    sm = sm * r + m
                    vmax = v
                cnt += 1
        vmax_a[ci] = vmax
        s0_a[ci] = s0
        sh_a[ci] = sh
        sm_a[ci] = sm
        cnt_a[ci] = cnt

    # deterministic merge in chunk order
    vmax = _NEG_INF
    for ci in range(nchunks):
        if vmax_a[ci] > vmax:
            vmax = vmax_a[ci]
    s0 = 0.0
    sh = 0.0
    sm = 0.0
    cnt = 0
    if vmax > _NEG_INF:
        for ci in range(nchunks):
            if s0_a[ci] > 0.0 or cnt_a[ci] > 0:
                r = np.exp(vmax_a[ci] - vmax)
                s0 += s0_a[ci] * r
                sh += sh_a[ci] * r
                sm += sm_a[ci] * r
            cnt += cnt_a[ci]
    return vmax, s0, sh, sm, cnt


@njit(cache=True)
def energies_table(spins0, J, field, nbr, free):
    """Energies of all 2^len(free) configurations, indexed by the Gray
    mask (bit j of the index = free site j flipped from spins0)."""
    F = free.size
    out = np.empty(1 << F)
    spins = spins0.copy()
    e = energy_of(spins, J, field, nbr)
    g = 0
    out[0] = e
    for k in range(1, 1 << F):
        j = _ctz64(k)
        u = free[j]
        e += _delta_flip(spins, u, J, field, nbr)
        spins[u] = -spins[u]
        g ^= 1 << j
        out[g] = e
    return out


@njit(cache=True, parallel=True)
def min_perturbation(J, hfield, nbr, c_p, chunk_bits):
    """Scan every proper non-empty flip region V on the torus.

    The cost of flipping V inside the all-plus state is
    dH = 2*J*|dV| + 2*sum_{s in V} h(s), with |dV| counted over the 2n
    directed bonds.  Tracks the minimum dH, the minimum Peierls slack
    dH - c_p*|dV|, their argmin masks, and the minimum |dV|.
    """
    n = hfield.size
    if chunk_bits > n:
        chunk_bits = n
    nchunks = 1 << chunk_bits
    per = 1 << (n - chunk_bits)

    md_a = np.full(nchunks, np.inf)
    am_a = np.zeros(nchunks, np.int64)
    ms_a = np.full(nchunks, np.inf)
    as_a = np.zeros(nchunks, np.int64)
    mb_a = np.full(nchunks, np.int64(1) << 62, np.int64)

    for ci in prange(nchunks):
        in_v = np.zeros(n, np.int8)
        start = ci * per
        g = start ^ (start >> 1)
        size = 0
        for j in range(n):
            if (g >> j) & 1:
                in_v[j] = 1
                size += 1
        cut = 0
        hs = 0.0
        for u in range(n):
            if in_v[u]:
                hs += hfield[u]
                if in_v[nbr[u, 0]] == 0:
                    cut += 1
                if in_v[nbr[u, 2]] == 0:
                    cut += 1
            else:
                if in_v[nbr[u, 0]] == 1:
                    cut += 1
                if in_v[nbr[u, 2]] == 1:
                    cut += 1

        min_d = np.inf
        arg_d = np.int64(0)
        min_s = np.inf
        arg_s = np.int64(0)
        min_b = np.int64(1) << 62
        for k in range(per):
            if k > 0:
                u = _ctz64(k)
                for q in range(4):
                    w = nbr[u, q]
                    if in_v[w] == in_v[u]:
                        cut += 1
                    else:
                        cut -= 1
                if in_v[u]:
                    in_v[u] = 0
                    hs -= hfield[u]
                    size -= 1
                else:
                    in_v[u] = 1
                    hs += hfield[u]
                    size += 1
                g ^= 1 << u
            if size == 0 or size == n:
                continue
            dh = 2.0 * J * cut + 2.0 * hs
            if dh < min_d:
                min_d = dh
                arg_d = g
            sl = dh - c_p * cut
            if sl < min_s:
                min_s = sl
                arg_s = g
            if cut < min_b:
                min_b = cut
        md_a[ci] = min_d
        am_a[ci] = arg_d
        ms_a[ci] = min_s
        as_a[ci] = arg_s
        mb_a[ci] = min_b

    min_d = np.inf
    arg_d = np.int64(0)
    min_s = np.inf
    arg_s = np.int64(0)
    min_b = np.int64(1) << 62
    for ci in range(nchunks):
        if md_a[ci] < min_d:
            min_d = md_a[ci]
            arg_d = am_a[ci]
        if ms_a[ci] < min_s:
            min_s = ms_a[ci]
            arg_s = as_a[ci]
        if mb_a[ci] < min_b:
            min_b = mb_a[ci]
    return min_d, arg_d, min_s, arg_s, min_b


# ---------------------------------------------------------------------------
# counter-based RNG + Metropolis
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _mix64(z):
    z = (z + U64(0x9E3779B97F4A7C15)) & U64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)) & U64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)) & U64(0xFFFFFFFFFFFFFFFF)
    return z ^ (z >> U64(31))


@njit(cache=True, inline="always")
def _u01(key, ctr):
    z = _mix64(key ^ _mix64(ctr))
    return (z >> U64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def metropolis_run(spins, nbr, field, J, beta, sweeps, burn_in, thin, key,
                   active, n_real, n_m, e_init,
                   blk_sites, blk_off, track,
                   m_out, e_out, bad_out, track_out):
    """Raster-scan single-site Metropolis; records one sample per `thin`
    sweeps after burn-in.  `spins` may carry one extra frozen boundary
    entry past index n_real; `active` masks updatable sites."""
    e = e_init
    ssum = 0
    for u in range(n_m):
        ssum += spins[u]
    nb = blk_off.size - 1
    si = 0
    for sweep in range(sweeps):
        base = U64(sweep) * U64(n_real)
        for u in range(n_real):
            if active[u] == 0:
                continue
            d = _delta_flip(spins, u, J, field, nbr)
            if d <= 0.0 or _u01(key, base + U64(u)) < np.exp(-beta * d):
                spins[u] = -spins[u]
                e += d
                ssum += 2 * spins[u]
        if sweep >= burn_in and (sweep - burn_in) % thin == thin - 1:
            m_out[si] = ssum / n_m
            e_out[si] = e
            if nb > 0:
                bad = 0
                for b in range(nb):
                    s0 = spins[blk_sites[blk_off[b]]]
                    for q in range(blk_off[b] + 1, blk_off[b + 1]):
                        if spins[blk_sites[q]] != s0:
                            bad += 1
                            break
                bad_out[si] = bad / nb
            for t in range(track.size):
                track_out[si, t] = spins[track[t]]
            si += 1
    return si
