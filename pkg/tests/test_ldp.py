"""Monte Carlo tails, exact typical-set tails, the rate oracle and the
conditional return-time checks."""

import itertools
import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import logsumexp

import recur_ldp as rl

BERN03 = rl.IIDSource([0.7, 0.3])
UNIFORM = rl.IIDSource([0.5, 0.5])
FLIP01 = rl.MarkovSource([[0.9, 0.1], [0.1, 0.9]])
CONST = rl.ConstantSource(0)


class TestWilson:
    def test_formula_by_hand(self):
        z = 1.959963984540054
        lo, hi = rl.wilson_interval(5, 100)
        denom = 1 + z * z / 100
        center = (0.05 + z * z / 200) / denom
        half = z * math.sqrt(0.05 * 0.95 / 100 + z * z / 40000) / denom
        assert abs(lo - (center - half)) < 1e-15
        assert abs(hi - (center + half)) < 1e-15

    def test_zero_hits_lower_is_zero(self):
        lo, hi = rl.wilson_interval(0, 1000)
        assert lo < 1e-15 and 0 < hi < 0.01

    def test_all_hits(self):
        lo, hi = rl.wilson_interval(50, 50)
        assert hi == 1.0 and lo > 0.9


class TestTailUpper:
    def test_constant_source_never_exceeds(self):
        est = rl.mc_tail_upper(CONST, 6, 0.5, 2000, master_seed=1)
        assert est.hit_count == 0

    def test_vacuous_threshold_always_hits(self):
        est = rl.mc_tail_upper(UNIFORM, 5, -1.5, 2000, master_seed=1)
        assert est.p_hat == 1.0

    def test_uniform_exponential_anchor(self):
        # sanity anchor exp(-t * 2^-n), not ground truth
        est = rl.mc_tail_upper(UNIFORM, 8, 0.25, 20000, master_seed=7)
        assert abs(est.p_hat - math.exp(-4)) < 0.01
        assert est.ci_low <= est.p_hat <= est.ci_high

    def test_threshold_guard(self):
        with pytest.raises(rl.ThresholdTooLarge):
            rl.mc_tail_upper(UNIFORM, 64, 0.25, 100, master_seed=1)

    def test_thread_count_does_not_change_result(self):
        a = rl.mc_tail_upper(BERN03, 8, 0.15, 20000, master_seed=3, threads=1)
        b = rl.mc_tail_upper(BERN03, 8, 0.15, 20000, master_seed=3, threads=4)
        assert a == b

    def test_boundary_conventions_differ_at_integer(self):
        # constant source, t = 1: strict counts R > 1 (never), weak R >= 1 (always)
        strict = rl.mc_tail_upper(CONST, 4, 0.0, 500, master_seed=1, boundary="strict")
        weak = rl.mc_tail_upper(CONST, 4, 0.0, 500, master_seed=1, boundary="weak")
        assert strict.p_hat == 0.0 and weak.p_hat == 1.0


class TestTailLower:
    def test_uniform_anchor(self):
        est = rl.mc_tail_lower(UNIFORM, 8, 0.25, 20000, master_seed=7)
        assert abs(est.p_hat - (1 - math.exp(-64 / 256))) < 0.015

    def test_epsilon_exceeds_entropy(self):
        with pytest.raises(rl.EpsilonExceedsEntropy):
            rl.mc_tail_lower(rl.PeriodicSource([0, 1]), 5, 0.5, 100, master_seed=1)
        with pytest.raises(rl.EpsilonExceedsEntropy):
            rl.mc_tail_lower(CONST, 5, 0.5, 100, master_seed=1)

    def test_epsilon_equal_entropy_gives_zero(self):
        # t = 1: the event R < 1 is impossible
        h = rl.entropy_rate(BERN03)
        est = rl.mc_tail_lower(BERN03, 6, h, 500, master_seed=1)
        assert est.p_hat == 0.0

    def test_monotone_in_epsilon_within_cis(self):
        small = rl.mc_tail_upper(BERN03, 8, 0.10, 20000, master_seed=9)
        large = rl.mc_tail_upper(BERN03, 8, 0.25, 20000, master_seed=9)
        assert small.p_hat >= large.p_hat - (small.ci_high - small.ci_low)


class TestTailMatch:
    def test_duality_transfer_same_event(self):
        # m = floor(2^(n(H+eps))) makes the match event identical to R_n > m
        n, eps = 10, 0.25
        m = int(2.0 ** (n * (1.0 + eps)))
        up = rl.mc_tail_upper(UNIFORM, n, eps, 30000, master_seed=5)
        mt = rl.mc_tail_match(UNIFORM, m, eps, "upper", 30000, master_seed=6)
        assert mt.side == "match_upper"
        assert mt.ci_low <= up.ci_high and up.ci_low <= mt.ci_high  # CIs overlap

    def test_constant_upper_never_hits(self):
        est = rl.mc_tail_match(CONST, 64, 0.5, "upper", 500, master_seed=2)
        assert est.hit_count == 0

    def test_lower_epsilon_guard(self):
        with pytest.raises(rl.EpsilonExceedsEntropy):
            rl.mc_tail_match(CONST, 16, 0.25, "lower", 100, master_seed=1)

    def test_lower_side_runs(self):
        est = rl.mc_tail_match(UNIFORM, 256, 0.3, "lower", 5000, master_seed=8)
        assert est.side == "match_lower"
        assert 0.0 <= est.p_hat <= 1.0


class TestAepExact:
    def test_uniform_degenerate_zero(self):
        assert rl.aep_tail_exact(UNIFORM, 10, 0.1) == 0.0

    def test_binomial_shortcut_matches_enumeration(self):
        # n small enough to enumerate directly
        n, d = 10, 0.2
        h = rl.entropy_rate(BERN03)
        total = 0.0
        for blk in itertools.product((0, 1), repeat=n):
            bp = rl.block_probability(BERN03, blk)
            if abs(-bp.log2_probability / n - h) > d:
                total += bp.probability
        assert abs(rl.aep_tail_exact(BERN03, n, d) - total) < 1e-12

    def test_markov_enumeration_against_brute_force(self):
        n, d = 12, 0.2
        h = rl.entropy_rate(FLIP01)
        total = 0.0
        for blk in itertools.product((0, 1), repeat=n):
            bp = rl.block_probability(FLIP01, blk)
            if abs(-bp.log2_probability / n - h) > d:
                total += bp.probability
        assert abs(rl.aep_tail_exact(FLIP01, n, d) - total) < 1e-9

    def test_large_n_binomial(self):
        p = rl.aep_tail_exact(BERN03, 2000, 0.1)
        assert 0.0 < p < 1e-10  # deep in the exponential regime

    def test_enumeration_guard(self):
        with pytest.raises(rl.TooLargeToEnumerate):
            rl.aep_tail_exact(FLIP01, 40, 0.1)

    def test_constant_and_periodic(self):
        assert rl.aep_tail_exact(CONST, 8, 0.05) == 0.0
        # periodic (0,1): every block has probability 1/2 -> -log2 P/n = 1/n
        per = rl.PeriodicSource([0, 1])
        assert rl.aep_tail_exact(per, 8, 0.2) == 0.0   # 1/8 < 0.2
        assert rl.aep_tail_exact(per, 4, 0.2) == 1.0   # 1/4 > 0.2

    def test_mc_agrees_with_exact_within_ci(self):
        exact = rl.aep_tail_exact(BERN03, 10, 0.2)
        est = rl.mc_tail_aep(BERN03, 10, 0.2, 20000, master_seed=13)
        assert est.ci_low <= exact <= est.ci_high
        exact_m = rl.aep_tail_exact(FLIP01, 12, 0.2)
        est_m = rl.mc_tail_aep(FLIP01, 12, 0.2, 20000, master_seed=14)
        assert est_m.ci_low <= exact_m <= est_m.ci_high


class TestCramer:
    def test_uniform_is_degenerate(self):
        r = rl.cramer_rate_iid([0.5, 0.5], math.log(2))
        assert r.degenerate and r.rate_nats == 0.0
        r2 = rl.cramer_rate_iid([0.5, 0.5], 0.9)
        assert r2.degenerate and math.isinf(r2.rate_nats)

    def test_rate_vanishes_at_mean(self):
        a = 0.3 * -math.log(0.3) + 0.7 * -math.log(0.7)
        r = rl.cramer_rate_iid([0.7, 0.3], a)
        assert r.rate_nats < 1e-10
        assert abs(r.argmax_lambda) < 1e-4

    def test_against_grid_search_oracle(self):
        pmf = np.array([0.7, 0.3])
        lnp = np.log(pmf)
        for a in (0.45, 0.61, 0.75, 0.9, 1.1):
            lam = np.linspace(-50, 50, 2_000_001)
            g = lam * a - logsumexp((1 - lam[:, None]) * lnp[None, :], axis=1)
            want = g.max()
            got = rl.cramer_rate_iid(pmf, a).rate_nats
            assert abs(got - max(want, 0.0)) < 1e-7

    def test_outside_support_is_infinite(self):
        assert math.isinf(rl.cramer_rate_iid([0.7, 0.3], 0.1).rate_nats)
        assert math.isinf(rl.cramer_rate_iid([0.7, 0.3], 5.0).rate_nats)

    def test_convex_and_nonnegative(self):
        pmf = [0.6, 0.3, 0.1]
        levels = np.linspace(0.55, 2.2, 12)
        rates = [rl.cramer_rate_iid(pmf, a).rate_nats for a in levels]
        assert all(r >= 0 for r in rates)
        mids = [(rates[i - 1] + rates[i + 1]) / 2 - rates[i] for i in range(1, 11)]
        assert all(m >= -1e-9 for m in mids)

    def test_anchor_takes_minimum_side(self):
        h_nats = -(0.7 * math.log(0.7) + 0.3 * math.log(0.3))
        up = rl.cramer_rate_iid([0.7, 0.3], h_nats + 0.2 * math.log(2)).rate_nats
        dn = rl.cramer_rate_iid([0.7, 0.3], h_nats - 0.2 * math.log(2)).rate_nats
        anchor = rl.aep_rate_anchor([0.7, 0.3], 0.2)
        assert abs(anchor - min(up, dn)) < 1e-9


class TestFitRate:
    def test_exact_exponential(self):
        pts = [(n, math.exp(-0.3 * n), 1000) for n in range(8, 17)]
        fit = rl.fit_rate(pts, 0.1, "upper")
        assert abs(fit.slope_nats - 0.3) < 1e-12
        assert fit.r_squared == 1.0

    def test_noisy_exponential(self):
        rng = np.random.default_rng(3)
        pts = [(n, 0.7 * math.exp(-0.3 * n) * (1 + 0.1 * (2 * rng.random() - 1)), 1000)
               for n in range(8, 17)]
        fit = rl.fit_rate(pts, 0.1, "upper")
        assert abs(fit.slope_nats - 0.3) < 0.05

    def test_insufficient_points(self):
        with pytest.raises(rl.InsufficientPoints):
            rl.fit_rate([(8, 0.1, 3), (10, 0.05, 4), (12, 0.02, 2)], 0.1, "upper")

    def test_excluded_counting(self):
        pts = [(8, 0.1, 100), (10, 0.05, 100), (12, 0.02, 100), (14, 0.0, 0)]
        fit = rl.fit_rate(pts, 0.1, "upper")
        assert fit.excluded_zero_points == 1
        assert len(fit.points) == 3


class TestLemmaArithmetic:
    def test_exponential_bound_inequality_grid(self):
        # p1*e^(-p2 n) + q1*e^(-q2 n) <= (p1+q1)*e^(-min(p2,q2) n)
        rng = np.random.default_rng(19)
        p1, p2, q1, q2 = (rng.uniform(0.01, 10, size=(4, 10000)))
        n = rng.integers(1, 60, size=10000)
        lhs = p1 * np.exp(-p2 * n) + q1 * np.exp(-q2 * n)
        rhs = (p1 + q1) * np.exp(-np.minimum(p2, q2) * n)
        assert np.all(lhs <= rhs * (1 + 1e-12))


class TestUnionBoundTransfer:
    def test_average_tail_below_sum_of_window_tails(self):
        # Q windows: P(J_n > H+eps) <= Q * P(single-window deviation)
        h = rl.entropy_rate(BERN03)
        eps = 0.3
        sch = rl.QSchedule(0.5, 1.0)  # Q(8) = 4
        q = sch.q(8)
        hits = 0
        seeds = 500
        for s in range(seeds):
            rep = rl.jn_for_model(BERN03, 8, sch, seed=s, w_max=4096)
            hits += rep.estimate_bits > h + eps
        p_j = hits / seeds
        single = rl.mc_tail_upper(BERN03, 8, eps, 20000, master_seed=77)
        slack = 3 * math.sqrt(p_j * (1 - p_j) / seeds + 1e-6)
        assert p_j <= q * single.ci_high + slack


class TestKimKac:
    def test_kim_nonoverlapping_block(self):
        res = rl.kim_check(UNIFORM, [0, 0, 0, 0, 0, 0, 1], 4000, master_seed=3)
        assert abs(res.mean_u - 1.0) < 3 * (1.0 / math.sqrt(4000))
        assert res.ks_distance < 0.09
        assert res.censored < 0.001 * 4000

    def test_kim_overlap_increases_distance(self):
        a = rl.kim_check(UNIFORM, [0, 0, 0, 0, 0, 0, 1], 4000, master_seed=3)
        b = rl.kim_check(UNIFORM, [0, 0, 0, 0, 0, 0, 0], 4000, master_seed=3)
        assert b.ks_distance > a.ks_distance

    def test_kac_uniform(self):
        res = rl.kac_check(UNIFORM, [0, 0, 0], 20000, master_seed=5)
        assert res.target == 8.0
        assert res.rel_err < 0.05

    def test_kac_markov(self):
        res = rl.kac_check(FLIP01, [0, 1], 20000, master_seed=5)
        assert abs(res.target - 20.0) < 1e-9
        assert res.rel_err < 0.05

    def test_kac_constant_exact(self):
        res = rl.kac_check(CONST, [0, 0, 0], 100, master_seed=1)
        assert res.mean_rn == 1.0 and res.target == 1.0 and res.rel_err == 0.0

    def test_block_zero_probability(self):
        with pytest.raises(rl.BlockZeroProbability):
            rl.kim_check(rl.MarkovSource([[0, 1], [1, 0]]), [0, 0], 100, master_seed=1)

    def test_thread_count_invariance(self):
        a = rl.kac_check(UNIFORM, [0, 0, 0], 10000, master_seed=5, threads=1)
        b = rl.kac_check(UNIFORM, [0, 0, 0], 10000, master_seed=5, threads=4)
        assert a == b

    def test_deterministic(self):
        a = rl.kim_check(UNIFORM, [0, 1, 1], 2000, master_seed=9)
        b = rl.kim_check(UNIFORM, [0, 1, 1], 2000, master_seed=9)
        assert a == b
