"""Shifted-window estimator and its match-length dual."""

import math

import numpy as np
import pytest

import recur_ldp as rl
from recur_ldp.estimators import FLAG_BIASED, FLAG_EXACT, FLAG_LOWER_BOUND

BERN03 = rl.IIDSource([0.7, 0.3])
SQUARED = rl.QSchedule(1.0, 2.0)
SINGLE = rl.QSchedule(1e-9, 1.0)  # Q(n) = 1 for desk-scale n


class TestSchedule:
    def test_default_quadratic(self):
        assert SQUARED.q(8) == 64 and SQUARED.q(20) == 400

    def test_minimum_one(self):
        assert rl.QSchedule(0.001, 1.0).q(3) == 1

    def test_validation(self):
        with pytest.raises(ValueError):
            rl.QSchedule(-1.0, 2.0)
        with pytest.raises(ValueError):
            rl.QSchedule(1.0, 0.0)


class TestEstimateJn:
    def test_constant_source_zero_exact(self):
        rep = rl.jn_for_model(rl.ConstantSource(0), 6, SQUARED, seed=3, w_max=64)
        assert rep.estimate_bits == 0.0
        assert rep.flag == FLAG_EXACT and rep.censored_count == 0

    def test_periodic_01_quarter_exact(self):
        rep = rl.jn_for_model(rl.PeriodicSource([0, 1]), 4, SQUARED, seed=5, w_max=64)
        assert rep.estimate_bits == 0.25
        assert rep.q == 16 and rep.flag == FLAG_EXACT

    def test_shift_consistency_single_window(self):
        data = rl.generate(BERN03, 3000, seed=9)
        real = rl.Realization(data, 999)
        rep = rl.estimate_Jn(real, 8, SINGLE, w_max=1000)
        shifted = rl.Realization(data, 1000)
        out = rl.recurrence_naive(shifted, 8, 1000)
        assert rep.q == 1
        assert rep.estimate_bits == math.log2(out.r) / 8

    def test_deterministic(self):
        a = rl.jn_for_model(BERN03, 10, SQUARED, seed=123, w_max=4096)
        b = rl.jn_for_model(BERN03, 10, SQUARED, seed=123, w_max=4096)
        assert a == b

    def test_nonnegative(self):
        for seed in range(10):
            rep = rl.jn_for_model(BERN03, 8, SQUARED, seed=seed, w_max=512)
            assert rep.estimate_bits >= 0.0

    def test_censoring_flag_and_imputation(self):
        # tiny window forces censored windows on a uniform source
        data = rl.generate(rl.IIDSource([0.5, 0.5]), 4000, seed=4)
        real = rl.Realization(data, 99)
        rep = rl.estimate_Jn(real, 12, SQUARED, w_max=100)
        assert rep.censored_count > 0
        assert rep.flag == FLAG_LOWER_BOUND

    def test_imputation_monotone_in_w_max(self):
        data = rl.generate(rl.IIDSource([0.5, 0.5]), 40000, seed=4)
        real = rl.Realization(data, 19999)
        prev = -1.0
        for w in (100, 400, 1600, 6400):
            rep = rl.estimate_Jn(real, 12, SQUARED, w_max=w)
            assert rep.estimate_bits >= prev
            prev = rep.estimate_bits

    def test_insufficient_data(self):
        data = rl.generate(BERN03, 200, seed=1)
        with pytest.raises(rl.InsufficientData):
            rl.estimate_Jn(rl.Realization(data, 99), 8, SQUARED, w_max=500)
        with pytest.raises(rl.InsufficientData):
            rl.estimate_Jn(rl.Realization(data, 189), 8, SQUARED, w_max=100)

    def test_mc_self_check_small(self):
        # scaled-down convergence sanity; the acceptance suite runs the full one
        h = rl.entropy_rate(BERN03)
        vals = [rl.jn_for_model(BERN03, 12, SQUARED, seed=s, w_max=8079).estimate_bits
                for s in range(30)]
        assert abs(np.mean(vals) - h) < 0.15


class TestMatchDual:
    def test_constant_future_limited_value(self):
        # single window, future at the shifted origin is 64
        data = rl.generate(rl.ConstantSource(0), 8 + 1 + 64, seed=2)
        rep = rl.estimate_match_dual(rl.Realization(data, 7), 8, 1)
        assert rep.estimate_bits == math.log2(8) / 64
        assert rep.flag == FLAG_BIASED

    def test_periodic_hand_value(self):
        data = rl.generate(rl.PeriodicSource([0, 1]), 4 + 1 + 64, seed=11)
        rep = rl.estimate_match_dual(rl.Realization(data, 3), 4, 1)
        assert rep.estimate_bits == 2 / 64
        assert rep.flag == FLAG_BIASED and rep.censored_count == 1

    def test_uniform_self_check(self):
        m = 2 ** 12
        vals = []
        for seed in range(40):
            data = rl.generate(rl.IIDSource([0.5, 0.5]), m + 64 + 400, seed=seed)
            rep = rl.estimate_match_dual(rl.Realization(data, m - 1), m, 64)
            vals.append(rep.estimate_bits)
        assert abs(np.mean(vals) - 1.0) < 0.15

    def test_insufficient_data(self):
        data = rl.generate(BERN03, 64, seed=1)
        with pytest.raises(rl.InsufficientData):
            rl.estimate_match_dual(rl.Realization(data, 15), 64, 4)
        with pytest.raises(rl.InsufficientData):
            rl.estimate_match_dual(rl.Realization(data, 59), 8, 10)


class TestSweep:
    def test_deterministic_and_thread_independent(self):
        reports1, summary1 = rl.convergence_sweep(
            BERN03, [8, 10], SQUARED, seeds=range(4), w_max=1024, threads=1)
        reports3, summary3 = rl.convergence_sweep(
            BERN03, [8, 10], SQUARED, seeds=range(4), w_max=1024, threads=3)
        assert reports1 == reports3
        assert summary1 == summary3

    def test_summary_contents(self):
        reports, summary = rl.convergence_sweep(
            rl.ConstantSource(0), [4, 6], SQUARED, seeds=[1, 2, 3], w_max=32)
        assert summary[4]["mean"] == 0.0 and summary[4]["std"] == 0.0
        assert len(reports) == 6
        assert all(r.seed is not None for r in reports)

    def test_w_max_callable(self):
        reports, _ = rl.convergence_sweep(
            BERN03, [6, 8], SQUARED, seeds=[1], w_max=lambda n: 64 * n)
        assert len(reports) == 2


class TestDefaultWindow:
    def test_formula_and_cap(self):
        h = rl.entropy_rate(BERN03)
        n = 8
        assert rl.default_w_max(BERN03, n) == math.ceil(2 ** (n * (h + 1))) + n
        assert rl.default_w_max(BERN03, 40) == 2 ** 26
        assert rl.default_w_max(BERN03, 40, cap=1000) == 1000

    def test_zero_entropy_models(self):
        assert rl.default_w_max(rl.ConstantSource(0), 10) == 2 ** 10 + 10
