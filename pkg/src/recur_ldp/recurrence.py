"""Recurrence times and match lengths on finite realizations.

A :class:`Realization` is a symbol array split at ``origin``: indices up to
and including ``origin`` are the past, the present block starts at
``origin + 1``.  The recurrence time of the length-n present block is the
smallest backward shift j >= 1 at which the block reappears; shifts may
overlap the block itself (j < n).  The match length over a past window of
size m is the longest present prefix that reappears starting within the last
m positions.

Finite data censors both quantities: a recurrence not found within the
scanned window is reported as censored rather than silently truncated, and a
match still alive when the future runs out is reported as future-limited.

Two scanners are provided: a naive backward scan (the reference) and an
indexed scanner built on rolling window codes with exact confirmation; they
return identical results on all inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import _kernels


class InsufficientPast(ValueError):
    """The realization's past window is smaller than the scan requires."""


class Undecidable(ValueError):
    """Censoring prevents evaluating the requested predicate."""


@dataclass(frozen=True, eq=False)
class Realization:
    """Symbol array with a designated origin separating past from present.

    ``data[origin]`` is the last past symbol; the present block starts at
    ``data[origin + 1]``.  Requires at least one past and one present symbol.
    """
    data: np.ndarray
    origin: int

    def __post_init__(self):
        d = np.ascontiguousarray(np.asarray(self.data, dtype=np.uint8))
        d.flags.writeable = False
        object.__setattr__(self, "data", d)
        if not 0 <= self.origin <= d.size - 2:
            raise ValueError(
                f"origin {self.origin} leaves no past or no present in {d.size} symbols")

    @classmethod
    def from_past_present(cls, past, present) -> "Realization":
        past = np.asarray(past, dtype=np.uint8)
        present = np.asarray(present, dtype=np.uint8)
        return cls(np.concatenate([past, present]), past.size - 1)

    @property
    def past_length(self) -> int:
        return self.origin + 1

    @property
    def future_length(self) -> int:
        return self.data.size - self.origin - 1

    def block(self, n: int) -> np.ndarray:
        if n < 1 or n > self.future_length:
            raise ValueError(f"block length {n} not available (future has {self.future_length})")
        return self.data[self.origin + 1:self.origin + 1 + n]


@dataclass(frozen=True)
class RecurrenceOutcome:
    """Recurrence value for a length-n block, or a censored-at-window marker.

    ``r`` is the recurrence shift when found, else None; ``window`` is the
    scanned shift budget, so a censored outcome certifies R > window.
    """
    n: int
    r: Optional[int]
    window: int

    @property
    def found(self) -> bool:
        return self.r is not None

    @property
    def censored(self) -> bool:
        return self.r is None


@dataclass(frozen=True)
class MatchLengthOutcome:
    """Match length over a size-m past window.

    ``future_limited`` means the best match was still extending when the
    future ran out, so the true match length is >= ``length``.
    """
    m: int
    length: int
    future_limited: bool


def _check_query(real: Realization, n: int, j_max: int) -> None:
    if n < 1:
        raise ValueError(f"block length must be >= 1, got {n}")
    if real.future_length < n:
        raise ValueError(
            f"present has {real.future_length} symbols, block length {n} requested")
    if j_max < 1:
        raise ValueError(f"j_max must be >= 1, got {j_max}")
    if real.past_length < j_max:
        raise InsufficientPast(
            f"past has {real.past_length} symbols, scan to shift {j_max} requested")


def recurrence_naive(real: Realization, n: int, j_max: int) -> RecurrenceOutcome:
    """Reference scanner: try shifts j = 1, 2, ... j_max in order.

    Expected cost is O(R_n) symbol comparisons thanks to early mismatch exit.
    """
    _check_query(real, n, j_max)
    j = int(_kernels.first_match(real.data, real.origin + 1, n, j_max))
    return RecurrenceOutcome(n=n, r=j if j > 0 else None, window=j_max)


def _bits_per_symbol(base: int) -> int:
    return int(base - 1).bit_length() if base > 1 else 1


def batched_recurrences(data: np.ndarray, first_block_start: int, count: int,
                        n: int, j_max: int) -> np.ndarray:
    """Recurrence shifts for `count` consecutive block starts on one array.

    Entry i is the recurrence of the n-block starting at
    ``first_block_start + i`` scanned over shifts 1..j_max, or -1 when
    censored.  Matches :func:`recurrence_naive` per block.  Implementation:
    rolling window codes over the shared region, candidate lookup per query,
    exact confirmation of every accepted candidate.
    """
    data = np.ascontiguousarray(data, dtype=np.uint8)
    if first_block_start - j_max < 0:
        raise InsufficientPast(
            f"first block at {first_block_start} cannot scan {j_max} shifts back")
    end = first_block_start + count - 1 + n
    if end > data.size:
        raise ValueError("realization too short for the requested block range")
    lo = first_block_start - j_max
    region = data[lo:end]
    base = max(2, int(region.max()) + 1)
    wrapped = n * _bits_per_symbol(base) > 62
    codes = _kernels.window_codes(region, n, base)
    starts_rel = np.arange(j_max, j_max + count)
    qcodes = codes[starts_rel]
    mask = np.isin(codes, qcodes)
    cand = np.nonzero(mask)[0]
    ccodes = codes[cand]
    order = np.lexsort((cand, ccodes))
    sc = ccodes[order]
    sp = cand[order]
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        s = int(starts_rel[i])
        c = qcodes[i]
        a = int(np.searchsorted(sc, c, side="left"))
        b = int(np.searchsorted(sc, c, side="right"))
        seg = sp[a:b]
        idx = int(np.searchsorted(seg, s, side="left")) - 1
        r = -1
        floor_pos = s - j_max
        while idx >= 0 and seg[idx] >= floor_pos:
            p = int(seg[idx])
            if np.array_equal(region[p:p + n], region[s:s + n]):
                r = s - p
                break
            if not wrapped:  # codes are exact: equal code implies equal window
                raise AssertionError("exact window codes disagreed with symbols")
            idx -= 1
        out[i] = r
    return out


def recurrence_indexed(real: Realization, n: int, j_max: int) -> RecurrenceOutcome:
    """Accelerated scanner; identical output to :func:`recurrence_naive`."""
    _check_query(real, n, j_max)
    r = int(batched_recurrences(real.data, real.origin + 1, 1, n, j_max)[0])
    return RecurrenceOutcome(n=n, r=r if r > 0 else None, window=j_max)


def exceeds_threshold(real: Realization, n: int, t: float, boundary: str = "strict") -> bool:
    """Decide the deviation event "recurrence of the n-block exceeds t".

    boundary="strict" decides R_n > t (the default); boundary="weak" decides
    R_n >= t.  Both reduce to "no shift within an integer limit matches":
    strict uses floor(t), weak uses ceil(t) - 1.  Requires past of at least
    ceil(t) + n so the predicate is decidable without knowing R_n exactly.
    """
    if n < 1:
        raise ValueError(f"block length must be >= 1, got {n}")
    if real.future_length < n:
        raise ValueError(
            f"present has {real.future_length} symbols, block length {n} requested")
    if t < 0:
        raise ValueError(f"threshold must be >= 0, got {t}")
    need = int(np.ceil(t)) + n
    if real.past_length < need:
        raise InsufficientPast(
            f"past has {real.past_length} symbols, {need} required for threshold {t}")
    limit = threshold_scan_limit(t, boundary)
    if limit == 0:
        return True
    return int(_kernels.first_match(real.data, real.origin + 1, n, limit)) == 0


def threshold_scan_limit(t: float, boundary: str = "strict") -> int:
    """Largest shift that must be match-free for the event to hold.

    strict (R > t): floor(t).  weak (R >= t): ceil(t) - 1.
    """
    if boundary == "strict":
        limit = int(np.floor(t))
    elif boundary == "weak":
        limit = int(np.ceil(t)) - 1
    else:
        raise ValueError(f'boundary must be "strict" or "weak", got {boundary!r}')
    return max(0, limit)


def match_length(real: Realization, m: int) -> MatchLengthOutcome:
    """Longest present prefix reappearing within the last m past positions.

    Candidate copies may run into the present block.  When the best match is
    still alive at the end of the available future the outcome is
    future-limited (the true length is right-censored at the data boundary).
    """
    if m < 1:
        raise ValueError(f"past window m must be >= 1, got {m}")
    if real.past_length < m:
        raise InsufficientPast(f"past has {real.past_length} symbols, window {m} requested")
    avail = real.future_length
    best = int(_kernels.longest_prefix_match(real.data, real.origin + 1, m, avail))
    return MatchLengthOutcome(m=m, length=best, future_limited=(best == avail))


def duality_holds(real: Realization, n: int, m: int) -> bool:
    """Check the recurrence/match-length duality (R_n > m iff L_m < n).

    Needs past >= m and future >= n to decide both sides; otherwise raises
    :class:`Undecidable`.  Used as a test predicate; always true.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    if real.past_length < m or real.future_length < n:
        raise Undecidable(
            f"needs past >= {m} and future >= {n}, have "
            f"{real.past_length} and {real.future_length}")
    r_gt_m = int(_kernels.first_match(real.data, real.origin + 1, n, m)) == 0
    best = int(_kernels.longest_prefix_match(real.data, real.origin + 1, m, n))
    l_lt_n = best < n
    return r_gt_m == l_lt_n


# ---------------------------------------------------------------------------
# Debug dump/load: raw bytes plus a small JSON header
# ---------------------------------------------------------------------------

def dump_realization(real: Realization, path) -> None:
    """Write raw symbol bytes to `path` and {origin, alphabet_size} to
    `path`.json."""
    path = Path(path)
    path.write_bytes(real.data.tobytes())
    header = {"origin": int(real.origin), "alphabet_size": int(real.data.max()) + 1}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(header), encoding="utf-8")


def load_realization(path) -> Realization:
    path = Path(path)
    header = json.loads(path.with_suffix(path.suffix + ".json").read_text(encoding="utf-8"))
    data = np.frombuffer(path.read_bytes(), dtype=np.uint8)
    return Realization(data, int(header["origin"]))
