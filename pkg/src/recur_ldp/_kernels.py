"""Numba kernels: seeded symbol generation, backward scans, window codes.

All randomness comes from SplitMix64 (a 64-bit counter generator with a
strong finalizer).  Per-trial seeds are derived with ``mix64(master, index)``
so trials are order-independent and can be partitioned across threads
without changing any output.  Kernels are ``nogil`` so thread pools get real
parallelism.

Model kinds are encoded as integers: 0 = iid, 1 = markov, 2 = constant,
3 = periodic.  Unused parameter slots are passed as empty arrays.
"""

from __future__ import annotations

import numpy as np
from numba import njit

KIND_IID = 0
KIND_MARKOV = 1
KIND_CONSTANT = 2
KIND_PERIODIC = 3

_GOLD = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True, nogil=True, inline="always")
def _finalize(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True, inline="always")
def _next_u01(state):
    # advance the SplitMix64 counter; returns (state, uniform in [0, 1))
    state = state + _GOLD
    return state, float((_finalize(state) >> np.uint64(11))) * _U53


@njit(cache=True, nogil=True)
def mix64(master_seed, index):
    """Derive the seed of trial `index` from a master seed (fixed mixing)."""
    z = _finalize(np.uint64(master_seed) + _GOLD * (np.uint64(index) + np.uint64(1)))
    return _finalize(z ^ np.uint64(master_seed))


def finalize_array(z: np.ndarray) -> np.ndarray:
    """Vectorized numpy mirror of the SplitMix64 finalizer (uint64 wraparound)."""
    z = z.astype(np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def mix64_array(master_seed: int, indices: np.ndarray) -> np.ndarray:
    """Vectorized numpy mirror of mix64 over an array of trial indices."""
    master = np.uint64(master_seed)
    z = finalize_array(master + _GOLD * (indices.astype(np.uint64) + np.uint64(1)))
    return finalize_array(z ^ master)


@njit(cache=True, nogil=True, inline="always")
def _pick(cdf, u):
    # smallest s with u < cdf[s]; cdf[-1] == 1.0 and u < 1.0
    lo = 0
    hi = cdf.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if u < cdf[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True, nogil=True)
def fill_sequence(kind, iid_cdf, trans_cdf, stat_cdf, const_symbol, pattern, out, seed):
    """Fill `out` with a stationary sample path of the model (uint8 symbols)."""
    state = np.uint64(seed)
    if kind == KIND_IID:
        for i in range(out.size):
            state, u = _next_u01(state)
            out[i] = _pick(iid_cdf, u)
    elif kind == KIND_MARKOV:
        state, u = _next_u01(state)
        cur = _pick(stat_cdf, u)
        out[0] = cur
        for i in range(1, out.size):
            state, u = _next_u01(state)
            cur = _pick(trans_cdf[cur], u)
            out[i] = cur
    elif kind == KIND_CONSTANT:
        for i in range(out.size):
            out[i] = const_symbol
    else:  # periodic: stationary law = uniformly random phase of the pattern
        plen = pattern.size
        phase = int(_finalize(np.uint64(seed)) % np.uint64(plen))
        for i in range(out.size):
            out[i] = pattern[(phase + i) % plen]


@njit(cache=True, nogil=True)
def fill_past_markov(rev_cdf, anchor, out, seed):
    """Fill `out` (forward order) with a Markov past ending just before `anchor`.

    Symbols are drawn backward from the anchor state using the row cdfs of
    the time-reversed kernel, then stored so that out[-1] is adjacent to the
    anchor.
    """
    state = np.uint64(seed)
    cur = anchor
    for i in range(out.size - 1, -1, -1):
        state, u = _next_u01(state)
        cur = _pick(rev_cdf[cur], u)
        out[i] = cur


@njit(cache=True, nogil=True)
def first_match(data, block_start, n, limit):
    """Smallest shift j in 1..limit with data[block_start-j:+n] equal to the
    block at block_start; 0 when no shift matches.  Overlap with the block
    (j < n) is allowed."""
    for j in range(1, limit + 1):
        p = block_start - j
        ok = True
        for k in range(n):
            if data[p + k] != data[block_start + k]:
                ok = False
                break
        if ok:
            return j
    return 0


@njit(cache=True, nogil=True)
def longest_prefix_match(data, block_start, m, avail):
    """Longest j <= avail such that the j-prefix at block_start reappears at
    block_start-k for some k in 1..m.  avail is the number of symbols
    available from block_start; j == avail means the best match was still
    alive when the data ran out."""
    best = 0
    for k in range(1, m + 1):
        src = block_start - k
        j = 0
        while j < avail and data[src + j] == data[block_start + j]:
            j += 1
        if j > best:
            best = j
            if best == avail:
                break
    return best


@njit(cache=True, nogil=True)
def window_codes(data, n, base):
    """Rolling base-`base` codes of every n-window of `data` (uint64).

    Exact (collision-free) whenever base**n fits in 63 bits; otherwise the
    natural uint64 wraparound makes this a hash and candidates need exact
    confirmation.
    """
    m = data.size - n + 1
    codes = np.empty(m, dtype=np.uint64)
    a = np.uint64(base)
    top = np.uint64(1)
    for _ in range(n - 1):
        top = top * a
    c = np.uint64(0)
    for k in range(n):
        c = c * a + np.uint64(data[k])
    codes[0] = c
    for p in range(1, m):
        c = (c - np.uint64(data[p - 1]) * top) * a + np.uint64(data[p + n - 1])
        codes[p] = c
    return codes


@njit(cache=True, nogil=True)
def mc_recurrence_hits(kind, iid_cdf, trans_cdf, stat_cdf, const_symbol, pattern,
                       n, past, limit, count_lower, master_seed, lo, hi, out_hits):
    """Monte Carlo deviation trials for recurrence times.

    Each trial t in [lo, hi) gets seed mix64(master_seed, t), generates a
    fresh realization of past+n symbols and scans shifts 1..limit.
    count_lower=0 counts "no match" (recurrence exceeds limit), 1 counts
    "match found" (recurrence within limit).
    """
    data = np.empty(past + n, dtype=np.uint8)
    for t in range(lo, hi):
        seed = mix64(master_seed, np.uint64(t))
        fill_sequence(kind, iid_cdf, trans_cdf, stat_cdf, const_symbol, pattern, data, seed)
        j = first_match(data, past, n, limit)
        if count_lower == 1:
            out_hits[t] = 1 if j != 0 else 0
        else:
            out_hits[t] = 1 if j == 0 else 0


@njit(cache=True, nogil=True)
def conditional_recurrences(kind, iid_cdf, rev_cdf, block, past, master_seed, lo, hi, out_r):
    """Recurrence of a fixed block over freshly sampled conditional pasts.

    The block is pinned; only the past (length `past`) is resampled per trial
    (iid past, or Markov past drawn backward from block[0] with the reversed
    kernel).  out_r[t] = R, or 0 when no shift within `past` matches.
    """
    n = block.size
    data = np.empty(past + n, dtype=np.uint8)
    for k in range(n):
        data[past + k] = block[k]
    for t in range(lo, hi):
        seed = mix64(master_seed, np.uint64(t))
        if kind == KIND_IID:
            state = np.uint64(seed)
            for i in range(past):
                state, u = _next_u01(state)
                data[i] = _pick(iid_cdf, u)
        else:
            fill_past_markov(rev_cdf, block[0], data[:past], seed)
        out_r[t] = first_match(data, past, n, past)


@njit(cache=True, nogil=True)
def mc_aep_hits(kind, iid_cdf, trans_cdf, stat_cdf, log2_iid, log2_trans, log2_stat,
                n, h_bits, delta, master_seed, lo, hi, out_hits):
    """Monte Carlo trials of the event |-log2 P(block)/n - H| > delta
    for iid / markov models."""
    buf = np.empty(n, dtype=np.uint8)
    empty8 = np.empty(0, dtype=np.uint8)
    for t in range(lo, hi):
        seed = mix64(master_seed, np.uint64(t))
        fill_sequence(kind, iid_cdf, trans_cdf, stat_cdf, 0, empty8, buf, seed)
        if kind == KIND_IID:
            lp = 0.0
            for i in range(n):
                lp += log2_iid[buf[i]]
        else:
            lp = log2_stat[buf[0]]
            for i in range(1, n):
                lp += log2_trans[buf[i - 1], buf[i]]
        out_hits[t] = 1 if abs(-lp / n - h_bits) > delta else 0
