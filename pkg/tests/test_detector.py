import logging

import numpy as np
import pytest
from scipy import stats

from ris_isac import numerics
from ris_isac.channel import RisPhases
from ris_isac.config import ScenarioConfig
from ris_isac.detector import (
    H0, H1, ClutterSubspace, DetectorSpec, ReceiverModel, batch_statistic, binomial_ci,
    build_test_matrix, calibrate_threshold, check_trials, detect, detection_rate,
    estimate_clutter_subspace, exceedance_rate, simulate_received, test_statistic, threshold_from_sample,
    tie_weight,
)
from ris_isac.errors import DimensionMismatch, InsufficientTrials, NotPSD, SingularInnerBlock, ZeroClutter
from ris_isac.sensing import target_covariance

from conftest import crandn, random_channel_set, random_psd


def naive_T(R, U, sigma2):
    K = R.shape[0]
    Mi = np.linalg.inv(R + sigma2 * np.eye(K))
    T = np.eye(K) / sigma2 - Mi
    if U is not None and U.shape[1]:
        T += Mi @ U @ np.linalg.inv(U.conj().T @ Mi @ U) @ U.conj().T @ Mi - U @ U.conj().T / sigma2
    return T


class TestSubspace:
    def test_rank_one(self, rng):
        v = crandn(rng, 5)
        sub = estimate_clutter_subspace(np.outer(v, v.conj()))
        assert sub.r == 1 and not sub.capped
        assert abs(abs(np.vdot(sub.U[:, 0], v)) - np.linalg.norm(v)) < 1e-10

    def test_isotropic_caps(self, caplog):
        with caplog.at_level(logging.WARNING):
            sub = estimate_clutter_subspace(np.eye(4))
        assert sub.r == 3 and sub.capped
        assert "capped" in caplog.text

    def test_fixed_rank(self, rng):
        assert estimate_clutter_subspace(random_psd(rng, 6), rank=2).r == 2

    def test_energy_rule(self):
        lam = np.diag([10.0, 5.0, 0.1, 0.01])
        assert estimate_clutter_subspace(lam, 0.995).r == 3
        assert estimate_clutter_subspace(lam, 0.99).r == 2
        assert estimate_clutter_subspace(lam, 0.6).r == 1

    def test_scenario_subspace(self):
        from ris_isac.harness import Scenario

        cfg = ScenarioConfig(scattering_samples=20_000)
        a, b = Scenario(cfg).subspace, Scenario(cfg).subspace
        assert a.r == b.r
        np.testing.assert_array_equal(a.U, b.U)
        assert np.abs(a.U.conj().T @ a.U - np.eye(a.r)).max() < 1e-10

    def test_errors(self):
        with pytest.raises(ZeroClutter):
            estimate_clutter_subspace(np.zeros((3, 3)))
        with pytest.raises(NotPSD):
            estimate_clutter_subspace(np.diag([1.0, -0.5]))


class TestTestMatrix:
    def test_no_target_no_clutter(self):
        assert np.abs(build_test_matrix(np.zeros((3, 3)), None, 2.0)).max() < 1e-15

    def test_no_target_with_clutter(self, rng):
        sub = estimate_clutter_subspace(random_psd(rng, 4, 2))
        assert np.abs(build_test_matrix(np.zeros((4, 4)), sub, 0.5)).max() < 1e-12

    def test_naive_inverse_oracle(self, rng):
        R = random_psd(rng, 4)
        U = estimate_clutter_subspace(random_psd(rng, 4, 2), rank=2).U
        np.testing.assert_allclose(build_test_matrix(R, U, 0.7), naive_T(R, U, 0.7), atol=1e-9)
        np.testing.assert_allclose(build_test_matrix(R, None, 0.7), naive_T(R, None, 0.7), atol=1e-9)

    def test_annihilates_clutter(self, rng):
        R = random_psd(rng, 6)
        sub = estimate_clutter_subspace(random_psd(rng, 6, 3), rank=3)
        T = build_test_matrix(R, sub, 1.0)
        assert np.linalg.norm(T @ sub.U) < 1e-10 * np.linalg.norm(T)

    def test_errors(self, rng):
        R = random_psd(rng, 3)
        with pytest.raises(DimensionMismatch):
            build_test_matrix(R, np.ones((4, 1)), 1.0)
        with pytest.raises(ValueError):
            build_test_matrix(R, None, 0.0)
        u = crandn(rng, 3)[:, None]
        with pytest.raises(SingularInnerBlock):
            build_test_matrix(R, np.hstack([u, u]), 1.0)


class TestStatistic:
    def test_zeros(self):
        assert test_statistic(np.zeros((3, 2)), np.eye(2)) == 0.0

    def test_identity(self):
        assert test_statistic([[1, 1]], np.eye(2)) == pytest.approx(2.0)

    def test_loop_oracle(self, rng):
        Y = crandn(rng, 5, 4)
        T = random_psd(rng, 4) - random_psd(rng, 4)
        ref = sum((Y[l].conj() @ T @ Y[l]).real for l in range(5))
        assert abs(test_statistic(Y, T) - ref) < 1e-12 * max(1, abs(ref))
        batch = batch_statistic(np.stack([Y, 2 * Y]), T)
        np.testing.assert_allclose(batch, [ref, 4 * ref], rtol=1e-12)

    def test_shape_error(self):
        with pytest.raises(DimensionMismatch):
            test_statistic(np.ones((2, 3)), np.eye(2))

    def test_detect_boundary(self):
        T = np.eye(2)
        assert detect([[1, 1]], DetectorSpec(T, 2.0, 1e-3, 1))
        assert not detect(np.zeros((1, 2)), DetectorSpec(T, 0.5, 1e-3, 1))


@pytest.fixture
def receiver(rng):
    ch = random_channel_set(rng, K=4, N=2)
    ph = RisPhases.random(2, rng)
    p = crandn(rng, 4)
    p /= np.linalg.norm(p)
    sub = estimate_clutter_subspace(ch.R_clutter, rank=1)
    return ch, ph, p, sub


class TestReceiver:
    def test_pure_noise(self, receiver, rng):
        ch, ph, p, sub = receiver
        model = ReceiverModel(ch, ph, p, (1, 1, 1), sub, -np.inf, 2.0, 5)
        Y = model.sample(rng, 20_000, H0)
        power = np.mean(np.abs(Y) ** 2)
        # per-sample |y|^2 has std sigma2, so the mean is within 3 standard errors
        assert abs(power - 2.0) < 3 * 2.0 / np.sqrt(Y.size)

    def test_null_reduction(self, receiver):
        ch, ph, p, sub = receiver
        model = ReceiverModel(ch, ph, p, (0, 0, 0), sub, 10.0, 1.0, 3)
        T = build_test_matrix(target_covariance(ch, ph, p, (1, 1, 1)), sub, 1.0)
        s0 = model.statistics(np.random.default_rng(1), 10_000, H0, T)
        s1 = model.statistics(np.random.default_rng(2), 10_000, H1, T)
        assert stats.ks_2samp(s0, s1).pvalue > 1e-3

    def test_clutter_power(self):
        from ris_isac.harness import Scenario

        cfg = ScenarioConfig(scattering_samples=20_000)
        sc = Scenario(cfg)
        ch = sc.channels(-40)
        model = ReceiverModel(ch, RisPhases.zeros(cfg.N), np.ones(cfg.K) / 6, cfg.betas, sc.subspace, 20.0, 1.0, 1)
        Y = model.sample(np.random.default_rng(0), 100_000, H0)
        noise = 1.0 * cfg.K
        clutter = np.mean(np.sum(np.abs(Y[:, 0]) ** 2, axis=1)) - noise
        assert clutter / (cfg.sigma2 * cfg.K) == pytest.approx(100, rel=0.05)

    def test_simulate_received_shape(self, receiver, rng):
        ch, ph, p, _ = receiver
        assert simulate_received(ch, ph, p, (1, 1, 1), H1, 20, 1.0, 5, rng).shape == (5, 4)
        with pytest.raises(ValueError):
            simulate_received(ch, ph, p, (1, 1, 1), "H2", 20, 1.0, 5, rng)

    def test_h1_exceeds_h0(self, receiver):
        ch, ph, p, sub = receiver
        betas = (50, 50, 50)
        model = ReceiverModel(ch, ph, p, betas, sub, 20.0, 1.0, 5)
        T = build_test_matrix(target_covariance(ch, ph, p, betas), sub, 1.0)
        gamma = calibrate_threshold(model, T, 0.01, 5000, master_seed=1).threshold
        pd = detection_rate(model, T, gamma, 2000, master_seed=1, key=(9,))
        pfa = detection_rate(model, T, gamma, 2000, master_seed=1, key=(8,), hypothesis=H0)
        assert pd > pfa + 0.2


class TestCalibration:
    def test_median(self, rng):
        x = rng.standard_normal(10_001)
        assert threshold_from_sample(x, 0.5) == np.median(x)

    def test_trial_floor(self):
        check_trials(1e-3, 50_000)
        with pytest.raises(InsufficientTrials):
            check_trials(1e-3, 49_999)

    def test_binomial_ci(self):
        lo, hi = binomial_ci(200, 200_000)
        assert lo < 1e-3 < hi
        assert 0.00085 < lo and hi < 0.00116

    def test_deterministic(self, receiver):
        ch, ph, p, sub = receiver
        model = ReceiverModel(ch, ph, p, (1, 1, 1), sub, 20.0, 1.0, 2)
        T = build_test_matrix(target_covariance(ch, ph, p, (1, 1, 1)), sub, 1.0)
        a = calibrate_threshold(model, T, 0.01, 6000, master_seed=3, chunk_size=1000)
        b = calibrate_threshold(model, T, 0.01, 6000, master_seed=3, chunk_size=1000, threads=3)
        assert a.threshold == b.threshold
        c = calibrate_threshold(model, T, 0.01, 6000, master_seed=4, chunk_size=1000)
        assert c.threshold != a.threshold

    @pytest.mark.slow
    def test_false_alarm_band(self):
        from ris_isac.harness import Scenario

        cfg = ScenarioConfig(scattering_samples=20_000)
        st = Scenario(cfg).setups(-40)["optimized"]
        cal = calibrate_threshold(st.model, st.T, 1e-3, 200_000, master_seed=5, validation_trials=200_000)
        assert 0.00055 <= cal.realized_pfa <= 0.0015
        assert cal.ci[0] <= 1e-3 <= cal.ci[1]

    def test_degenerate_statistic_keeps_alpha(self, receiver):
        ch, ph, p, sub = receiver
        model = ReceiverModel(ch, ph, p, (1, 1, 1), sub, 20.0, 1.0, 2)
        T = np.zeros((4, 4), dtype=complex)
        cal = calibrate_threshold(model, T, 0.05, 2000, master_seed=0)
        assert cal.threshold == 0.0 and cal.tie_weight == pytest.approx(0.05)
        assert cal.realized_pfa == pytest.approx(0.05)
        assert detection_rate(model, T, 0.0, 500, master_seed=0, tie_weight=cal.tie_weight) == pytest.approx(0.05)

    def test_tie_weight_continuous(self, rng):
        x = rng.standard_normal(5000)
        g = threshold_from_sample(x, 0.01)
        assert tie_weight(x, g, 0.01) == 1.0
        assert exceedance_rate(x, g) == np.count_nonzero(x >= g) / x.size
