"""Deviation probabilities of recurrence statistics: Monte Carlo estimation,
exponential-rate fitting, the exact Cramer rate oracle for iid sources, exact
typical-set tails, and the conditional return-time law checks.

Every Monte Carlo estimate is a pure function of (model, parameters,
master_seed): trial t uses the derived seed mix64(master_seed, t), so totals
are independent of evaluation order and of the thread count.  Confidence
intervals are 95% Wilson intervals, which stay honest when hits are rare.

Threshold boundary handling: the deviation event "log2(R_n)/n > H + eps"
compares the integer R_n with the real threshold t = 2**(n*(H+eps)).  The
default convention is strict on R_n (R > t, scan limit floor(t)); the weak
convention (R >= t) is exposed via the `boundary` flag.  The two differ only
when R lands exactly on an integer threshold, an event of probability about
2**(-n*H).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, stats
from scipy.special import logsumexp

from . import _kernels, sources
from .recurrence import threshold_scan_limit

SIDE_UPPER = "upper"
SIDE_LOWER = "lower"
SIDE_AEP = "aep"
SIDE_MATCH_UPPER = "match_upper"
SIDE_MATCH_LOWER = "match_lower"

THRESHOLD_GUARD = 2 ** 30
ENUMERATION_GUARD = 2 ** 22
Z95 = 1.959963984540054


class ThresholdTooLarge(ValueError):
    """The per-trial past implied by the threshold exceeds the memory guard."""


class EpsilonExceedsEntropy(ValueError):
    """Lower-tail deviation is undefined for epsilon at or above the entropy rate."""


class InsufficientPoints(ValueError):
    """Fewer than three usable points for a rate fit."""


class TooLargeToEnumerate(ValueError):
    """The block space is too large for exact enumeration."""


class BlockZeroProbability(sources.ZeroProbability):
    """The conditioning block has probability zero."""


def wilson_interval(hits: int, trials: int, z: float = Z95):
    """95% Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    phat = hits / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class TailEstimate:
    """Monte Carlo estimate of one deviation probability with provenance.

    For the match sides, ``n`` carries the past-window size m and
    ``threshold_t`` the match-length threshold; for the aep side
    ``threshold_t`` repeats delta.
    """
    n: int
    epsilon: float
    side: str
    trials: int
    hit_count: int
    p_hat: float
    ci_low: float
    ci_high: float
    threshold_t: float
    master_seed: int


@dataclass(frozen=True)
class RateFit:
    """Least-squares exponential decay fit of ln(p_hat) against n."""
    epsilon: float
    side: str
    points: tuple
    slope_nats: float
    intercept: float
    r_squared: float
    excluded_zero_points: int


@dataclass(frozen=True)
class CramerRate:
    """Legendre-transform rate of the information density -ln p(X_1).

    ``degenerate`` marks a pmf with almost-surely constant information
    (uniform pmf): the rate is 0 at the mean and infinite elsewhere.
    """
    level_nats: float
    rate_nats: float
    argmax_lambda: float
    degenerate: bool


@dataclass(frozen=True)
class KimResult:
    """Conditional exponential-law check for a fixed block."""
    ks_distance: float
    mean_u: float
    censored: int
    found: int


@dataclass(frozen=True)
class KacResult:
    """Conditional mean return time versus the reciprocal block probability."""
    mean_rn: float
    target: float
    rel_err: float
    censored: int
    found: int


def _run_hit_chunks(run_chunk, trials: int, threads: int) -> np.ndarray:
    hits = np.zeros(trials, dtype=np.uint8)
    threads = max(1, int(threads))
    if threads == 1 or trials < 2 * threads:
        run_chunk(0, trials, hits)
        return hits
    bounds = np.linspace(0, trials, threads + 1).astype(np.int64)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futs = [pool.submit(run_chunk, int(bounds[i]), int(bounds[i + 1]), hits)
                for i in range(threads)]
        for f in futs:
            f.result()
    return hits


def _tail_estimate(side, n, epsilon, trials, master_seed, threshold, hits) -> TailEstimate:
    hit_count = int(hits.sum())
    lo, hi = wilson_interval(hit_count, trials)
    return TailEstimate(n=int(n), epsilon=float(epsilon), side=side, trials=int(trials),
                        hit_count=hit_count, p_hat=hit_count / trials,
                        ci_low=lo, ci_high=hi, threshold_t=float(threshold),
                        master_seed=int(master_seed))


def mc_tail_upper(model, n: int, epsilon: float, trials: int, master_seed: int,
                  threads: int = 1, boundary: str = "strict") -> TailEstimate:
    """P(log2(R_n)/n > H + eps): fresh realization per trial, exact decision.

    The per-trial past is ceil(t) + n with t = 2**(n*(H+eps)), so the event
    is decided without censoring ambiguity.
    """
    h = sources.entropy_rate(model)
    t = 2.0 ** (n * (h + epsilon))
    if t > THRESHOLD_GUARD:
        raise ThresholdTooLarge(
            f"threshold 2^({n}*({h:.5f}+{epsilon})) = {t:.3e} exceeds the guard {THRESHOLD_GUARD}")
    limit = threshold_scan_limit(t, boundary)
    past = int(math.ceil(t)) + n
    kind, iid_cdf, trans_cdf, stat_cdf, sym, pattern = sources._kernel_params(model)

    def chunk(lo, hi, out):
        _kernels.mc_recurrence_hits(kind, iid_cdf, trans_cdf, stat_cdf, sym, pattern,
                                    n, past, limit, 0, np.uint64(master_seed), lo, hi, out)

    hits = _run_hit_chunks(chunk, trials, threads)
    return _tail_estimate(SIDE_UPPER, n, epsilon, trials, master_seed, t, hits)


def mc_tail_lower(model, n: int, epsilon: float, trials: int, master_seed: int,
                  threads: int = 1, boundary: str = "strict") -> TailEstimate:
    """P(log2(R_n)/n < H - eps); requires eps <= H so t = 2**(n*(H-eps)) >= 1.

    Strict boundary counts R_n <= ceil(t)-1 (i.e. R_n < t); the weak variant
    counts R_n <= floor(t).
    """
    h = sources.entropy_rate(model)
    if epsilon > h:
        raise EpsilonExceedsEntropy(
            f"lower tail needs epsilon <= H; got epsilon={epsilon}, H={h:.5f}")
    t = 2.0 ** (n * (h - epsilon))
    if t > THRESHOLD_GUARD:
        raise ThresholdTooLarge(
            f"threshold {t:.3e} exceeds the guard {THRESHOLD_GUARD}")
    if boundary == "strict":
        limit = int(math.ceil(t)) - 1
    elif boundary == "weak":
        limit = int(math.floor(t))
    else:
        raise ValueError(f'boundary must be "strict" or "weak", got {boundary!r}')
    limit = max(0, limit)
    past = int(math.ceil(t)) + n
    kind, iid_cdf, trans_cdf, stat_cdf, sym, pattern = sources._kernel_params(model)

    def chunk(lo, hi, out):
        _kernels.mc_recurrence_hits(kind, iid_cdf, trans_cdf, stat_cdf, sym, pattern,
                                    n, past, limit, 1, np.uint64(master_seed), lo, hi, out)

    hits = _run_hit_chunks(chunk, trials, threads)
    return _tail_estimate(SIDE_LOWER, n, epsilon, trials, master_seed, t, hits)


def _int_if_integral(x: float) -> Optional[int]:
    return int(x) if float(x).is_integer() else None


def mc_tail_match(model, m: int, epsilon: float, side: str, trials: int,
                  master_seed: int, threads: int = 1) -> TailEstimate:
    """Deviation tails of the match-length ratio log2(m)/L_m.

    upper counts L_m < log2(m)/(H+eps); lower counts L_m > log2(m)/(H-eps).
    Both are decided exactly through the recurrence duality
    (L_m < n  iff  R_n > m), so each trial scans a threshold recurrence.
    """
    if m < 2:
        raise ValueError(f"m must be >= 2, got {m}")
    if side not in ("upper", "lower"):
        raise ValueError(f'side must be "upper" or "lower", got {side!r}')
    h = sources.entropy_rate(model)
    log2m = math.log2(m)
    if side == "lower":
        if epsilon >= h:
            raise EpsilonExceedsEntropy(
                f"match lower tail needs epsilon < H; got epsilon={epsilon}, H={h:.5f}")
        x = log2m / (h - epsilon)
        # L_m > x  iff  L_m >= floor(x)+1  iff  R_{floor(x)+1} <= m
        n_scan = int(math.floor(x)) + 1
        count_lower = 1
    else:
        x = log2m / (h + epsilon)
        # L_m < x  iff  L_m < n  iff  R_n > m, with n = ceil(x) (x non-integral) or x
        xi = _int_if_integral(x)
        n_scan = xi if xi is not None else int(math.ceil(x))
        count_lower = 0
    if m > THRESHOLD_GUARD:
        raise ThresholdTooLarge(f"m = {m} exceeds the guard {THRESHOLD_GUARD}")
    past = m + n_scan
    kind, iid_cdf, trans_cdf, stat_cdf, sym, pattern = sources._kernel_params(model)

    def chunk(lo, hi, out):
        _kernels.mc_recurrence_hits(kind, iid_cdf, trans_cdf, stat_cdf, sym, pattern,
                                    n_scan, past, m, count_lower,
                                    np.uint64(master_seed), lo, hi, out)

    hits = _run_hit_chunks(chunk, trials, threads)
    side_name = SIDE_MATCH_UPPER if side == "upper" else SIDE_MATCH_LOWER
    return _tail_estimate(side_name, m, epsilon, trials, master_seed, x, hits)


def mc_tail_aep(model, n: int, delta: float, trials: int, master_seed: int,
                threads: int = 1) -> TailEstimate:
    """Monte Carlo estimate of P(|-log2 P(X_1^n)/n - H| > delta)."""
    h = sources.entropy_rate(model)
    if isinstance(model, sources.ConstantSource):
        # every sampled block is the constant block: -log2 P / n = 0 = H
        hits = np.zeros(trials, dtype=np.uint8)
        if abs(0.0 - h) > delta:  # pragma: no cover - h is 0
            hits[:] = 1
        return _tail_estimate(SIDE_AEP, n, delta, trials, master_seed, delta, hits)
    if isinstance(model, sources.PeriodicSource):
        # a trial samples a phase; its block probability is (matching phases)/L
        L = model.pattern.size
        idx = np.arange(n)
        blocks = [model.pattern[(phase + idx) % L].tobytes() for phase in range(L)]
        counts = {b: blocks.count(b) for b in set(blocks)}
        phase_outside = np.array(
            [abs(math.log2(L / counts[b]) / n - h) > delta for b in blocks])
        seeds = _kernels.mix64_array(master_seed, np.arange(trials, dtype=np.uint64))
        phases = (_kernels.finalize_array(seeds) % np.uint64(L)).astype(np.intp)
        hits = phase_outside[phases].astype(np.uint8)
        return _tail_estimate(SIDE_AEP, n, delta, trials, master_seed, delta, hits)
    kind, iid_cdf, trans_cdf, stat_cdf, _, _ = sources._kernel_params(model)
    if isinstance(model, sources.IIDSource):
        log2_iid = np.log2(model.pmf)
        log2_trans = np.empty((0, 0))
        log2_stat = np.empty(0)
    else:
        log2_iid = np.empty(0)
        with np.errstate(divide="ignore"):
            log2_trans = np.log2(model.transition)
            log2_stat = np.log2(model.stationary)

    def chunk(lo, hi, out):
        _kernels.mc_aep_hits(kind, iid_cdf, trans_cdf, stat_cdf,
                             log2_iid, log2_trans, log2_stat,
                             n, h, delta, np.uint64(master_seed), lo, hi, out)

    hits = _run_hit_chunks(chunk, trials, threads)
    return _tail_estimate(SIDE_AEP, n, delta, trials, master_seed, delta, hits)


def aep_tail_exact(model, n: int, delta: float) -> float:
    """Exact probability that a length-n block falls outside the
    delta-typical set (|-log2 P/n - H| > delta, strict).

    IID binary models use the binomial shortcut (probability depends only on
    the count of ones), valid to n = 10^4; other models enumerate all
    alphabet_size**n blocks up to the 2^22 guard.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    h = sources.entropy_rate(model)
    if isinstance(model, sources.ConstantSource):
        return 0.0
    if isinstance(model, sources.PeriodicSource):
        L = model.pattern.size
        idx = np.arange(n)
        seen = {}
        for phase in range(L):
            blk = model.pattern[(phase + idx) % L].tobytes()
            seen[blk] = seen.get(blk, 0) + 1
        return float(sum(cnt / L for cnt in seen.values()
                         if abs(math.log2(L / cnt) / n - h) > delta))
    if isinstance(model, sources.IIDSource) and model.alphabet_size == 2:
        if n > 10_000:
            raise TooLargeToEnumerate(f"binomial shortcut limited to n <= 10^4, got {n}")
        k = np.arange(n + 1)
        lp = k * math.log2(model.pmf[1]) + (n - k) * math.log2(model.pmf[0])
        outside = np.abs(-lp / n - h) > delta
        return float(stats.binom.pmf(k[outside], n, model.pmf[1]).sum())
    size = model.alphabet_size
    if n * math.log2(size) > math.log2(ENUMERATION_GUARD):
        raise TooLargeToEnumerate(
            f"{size}^{n} blocks exceed the enumeration guard {ENUMERATION_GUARD}")
    if isinstance(model, sources.IIDSource):
        log2_start = np.log2(model.pmf)
        log2_step = np.tile(np.log2(model.pmf), (size, 1))
    elif isinstance(model, sources.MarkovSource):
        with np.errstate(divide="ignore"):
            log2_start = np.log2(model.stationary)
            log2_step = np.log2(model.transition)
    else:
        raise sources.ModelUnsupported(f"unknown model type {type(model).__name__}")
    logp = log2_start.copy()
    last = np.arange(size, dtype=np.intp)
    for _ in range(n - 1):
        logp = (logp[:, None] + log2_step[last]).ravel()
        last = np.tile(np.arange(size, dtype=np.intp), last.size)
    with np.errstate(invalid="ignore"):
        outside = np.abs(-logp / n - h) > delta
    return float(np.sum(np.exp2(logp[outside & np.isfinite(logp)])))


def cramer_rate_iid(pmf, level_a_nats: float) -> CramerRate:
    """Legendre transform rate I(a) = sup_l [l*a - ln sum_i p_i^(1-l)].

    The supremum is located numerically on l in [-50, 50] with 1e-10
    tolerance (the cumulant function is smooth and convex).  Levels outside
    the support of -ln p(X) report an infinite rate; a uniform pmf is
    degenerate (constant information) and reports rate 0 at a = ln(size) and
    infinity elsewhere.
    """
    pmf = sources._validate_pmf(np.asarray(pmf, dtype=float))
    a = float(level_a_nats)
    lnp = np.log(pmf)
    y = -lnp
    ymin, ymax = float(y.min()), float(y.max())
    if ymax - ymin < 1e-12:
        ok = abs(a - ymax) <= 1e-9
        return CramerRate(level_nats=a, rate_nats=0.0 if ok else math.inf,
                          argmax_lambda=0.0 if ok else math.nan, degenerate=True)
    if a < ymin - 1e-12 or a > ymax + 1e-12:
        return CramerRate(level_nats=a, rate_nats=math.inf,
                          argmax_lambda=math.nan, degenerate=False)

    def neg_g(lam: float) -> float:
        return logsumexp((1.0 - lam) * lnp) - lam * a

    res = optimize.minimize_scalar(neg_g, bounds=(-50.0, 50.0), method="bounded",
                                   options={"xatol": 1e-10})
    rate = max(0.0, -float(res.fun))
    return CramerRate(level_nats=a, rate_nats=rate,
                      argmax_lambda=float(res.x), degenerate=False)


def aep_rate_anchor(pmf, eps_bits: float) -> float:
    """Two-sided typical-set decay rate in nats:
    min(I((H+eps)*ln2), I((H-eps)*ln2)) for an iid pmf."""
    pmf = np.asarray(pmf, dtype=float)
    h_nats = float(-(pmf * np.log(pmf)).sum())
    up = cramer_rate_iid(pmf, h_nats + eps_bits * math.log(2.0)).rate_nats
    dn = cramer_rate_iid(pmf, h_nats - eps_bits * math.log(2.0)).rate_nats
    return min(up, dn)


def fit_rate(points: Sequence, epsilon: float, side: str) -> RateFit:
    """Least-squares line through (n, ln p_hat); slope_nats is the fitted
    decay rate.  Points with hit_count < 5 are excluded (no continuity
    corrections); at least 3 usable points are required.
    """
    pts = list(points)
    usable = [(float(n), float(p)) for (n, p, hc) in pts if hc >= 5 and p > 0]
    excluded = len(pts) - len(usable)
    if len(usable) < 3:
        raise InsufficientPoints(
            f"{len(usable)} usable points (hit_count >= 5), need at least 3")
    ns = np.array([n for n, _ in usable])
    lps = np.log(np.array([p for _, p in usable]))
    slope, intercept = np.polyfit(ns, lps, 1)
    resid = lps - (slope * ns + intercept)
    ss_res = float((resid ** 2).sum())
    ss_tot = float(((lps - lps.mean()) ** 2).sum())
    if ss_tot <= 1e-30:
        r2 = 1.0 if ss_res <= 1e-24 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return RateFit(epsilon=float(epsilon), side=side, points=tuple(usable),
                   slope_nats=float(-slope), intercept=float(intercept),
                   r_squared=float(r2), excluded_zero_points=excluded)


def _conditional_r_samples(model, block, samples: int, master_seed: int,
                           u_max: float, threads: int) -> tuple:
    try:
        bp = sources.block_probability(model, block)
    except sources.ZeroProbability as exc:
        raise BlockZeroProbability(str(exc)) from exc
    blk = np.asarray(block, dtype=np.uint8)
    if isinstance(model, sources.ConstantSource):
        # the conditional past is deterministic; every sample recurs at shift 1
        return np.ones(samples, dtype=np.int64), bp.probability
    if not isinstance(model, (sources.IIDSource, sources.MarkovSource)):
        raise sources.ModelUnsupported(
            f"conditional sampling is not defined for {type(model).__name__}")
    past = int(math.ceil(u_max / bp.probability))
    if past + blk.size > THRESHOLD_GUARD:
        raise ThresholdTooLarge(
            f"conditional past {past} exceeds the guard {THRESHOLD_GUARD}")
    if isinstance(model, sources.IIDSource):
        kind = _kernels.KIND_IID
        iid_cdf = np.cumsum(model.pmf)
        iid_cdf[-1] = 1.0
        rev_cdf = np.empty((0, 0))
    else:
        kind = _kernels.KIND_MARKOV
        iid_cdf = np.empty(0)
        rev = sources.time_reversed_transition(model)
        rev_cdf = np.cumsum(rev, axis=1)
        rev_cdf[:, -1] = 1.0
    out = np.zeros(samples, dtype=np.int64)
    threads = max(1, int(threads))

    def chunk(lo, hi):
        _kernels.conditional_recurrences(kind, iid_cdf, rev_cdf, blk, past,
                                         np.uint64(master_seed), lo, hi, out)

    if threads == 1 or samples < 2 * threads:
        chunk(0, samples)
    else:
        bounds = np.linspace(0, samples, threads + 1).astype(np.int64)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = [pool.submit(chunk, int(bounds[i]), int(bounds[i + 1]))
                    for i in range(threads)]
            for f in futs:
                f.result()
    return out, bp.probability


def kim_check(model, block, samples: int, master_seed: int,
              u_max: float = 10.0, threads: int = 1) -> KimResult:
    """Conditional exponential-law check: resample the past with the block
    pinned, form U = R_n * P(block) over found recurrences, and measure the
    Kolmogorov-Smirnov distance to the unit-rate exponential.

    The past window ceil(u_max / P(block)) captures U up to u_max; larger
    recurrences are counted as censored (they should be a sub-0.1% sliver).
    Conditioning by construction is valid because R_n is a function of
    (past, block) alone, so no rejection sampling is needed.
    """
    rs, p = _conditional_r_samples(model, block, samples, master_seed, u_max, threads)
    found = rs[rs > 0]
    censored = int(samples - found.size)
    if found.size == 0:
        raise ArithmeticError("no recurrence found in any sample; past window too small")
    u = found.astype(np.float64) * p
    ks = float(stats.kstest(u, "expon").statistic)
    return KimResult(ks_distance=ks, mean_u=float(u.mean()),
                     censored=censored, found=int(found.size))


def kac_check(model, block, samples: int, master_seed: int,
              u_max: float = 10.0, threads: int = 1) -> KacResult:
    """Conditional mean recurrence versus the reciprocal block probability
    (the return-time identity for stationary ergodic sources)."""
    rs, p = _conditional_r_samples(model, block, samples, master_seed, u_max, threads)
    found = rs[rs > 0]
    censored = int(samples - found.size)
    if found.size == 0:
        raise ArithmeticError("no recurrence found in any sample; past window too small")
    mean_rn = float(found.mean())
    target = 1.0 / p
    return KacResult(mean_rn=mean_rn, target=target,
                     rel_err=abs(mean_rn - target) / target,
                     censored=censored, found=int(found.size))
