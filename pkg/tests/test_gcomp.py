import math

import numpy as np
import pytest

from conftest import FIXTURE_X, random_dataset
from gcomprobust import (
    TrialDataset,
    estimate_theta,
    estimate_theta_augmented,
    fit_logistic,
    gcomp_estimate,
    predict_all_arms,
    robust_vhat,
)
from gcomprobust.errors import NegativeVariance, TooFewSubjects

FIXTURE_THETA = np.array([0.465722356461, 0.698657228179])
FIXTURE_VHAT = np.array([[0.473474810647, 0.12547170871], [0.12547170871, 0.467376095827]])


def vhat_oracle(mu, y, arm, pi):
    """Direct transcription of the five component statistics via np.var / np.cov."""
    k = mu.shape[1]
    v = np.zeros((k, k))
    for t in range(k):
        in_t = arm == t + 1
        s2_r = np.var(y[in_t] - mu[in_t, t], ddof=1)
        q_ytt = np.cov(y[in_t], mu[in_t, t])[0, 1]
        s2_mu = np.var(mu[:, t], ddof=1)
        v[t, t] = s2_r / pi[t] + 2 * q_ytt - s2_mu
        for s in range(t + 1, k):
            in_s = arm == s + 1
            q_yts = np.cov(y[in_t], mu[in_t, s])[0, 1]
            q_yst = np.cov(y[in_s], mu[in_s, t])[0, 1]
            q_mu = np.cov(mu[:, t], mu[:, s])[0, 1]
            v[t, s] = v[s, t] = q_yts + q_yst - q_mu
    return v


def negative_variance_data():
    x1 = np.linspace(-0.3, 0.3, 20)
    y1 = np.zeros(20)
    y1[15] = 1
    x2 = np.linspace(-8, 8, 30)
    y2 = (x2 > 0).astype(float)
    y2[[12, 17]] = 1 - y2[[12, 17]]
    arm = np.r_[np.ones(20, int), 2 * np.ones(30, int)]
    return TrialDataset(arm, np.r_[y1, y2], np.r_[x1, x2][:, None], [0.5, 0.5])


class TestTheta:
    def test_no_covariates_is_arm_proportion(self, rng):
        data = random_dataset(rng, p=0, k=3)
        theta = estimate_theta(fit_logistic(data), data)
        np.testing.assert_allclose(theta, [data.outcome[data.arm == t].mean() for t in (1, 2, 3)], atol=1e-12)

    def test_fixture(self, fixture_data):
        fit = fit_logistic(fixture_data)
        theta = estimate_theta(fit, fixture_data)
        np.testing.assert_allclose(theta, FIXTURE_THETA, atol=1e-9)
        by_hand = [
            np.mean([1 / (1 + math.exp(-(fit.beta_arm[t] + fit.beta_cov[0] * x))) for x in FIXTURE_X])
            for t in range(2)
        ]
        np.testing.assert_allclose(theta, by_hand, rtol=1e-14)

    def test_in_unit_interval(self, rng):
        for _ in range(20):
            data = random_dataset(rng)
            theta = estimate_theta(fit_logistic(data), data)
            assert np.all((theta > 0) & (theta < 1))


class TestAugmented:
    def test_equals_plain_estimator_at_mle(self, rng):
        for _ in range(100):
            data = random_dataset(rng)
            fit = fit_logistic(data)
            np.testing.assert_allclose(estimate_theta_augmented(fit, data), estimate_theta(fit, data),
                                       atol=1e-10, rtol=0)

    def test_differs_away_from_mle(self, fixture_data):
        fit = fit_logistic(fixture_data)
        bumped = fit.with_beta(fit.beta_arm + np.array([0.3, -0.2]))
        diff = estimate_theta_augmented(bumped, fixture_data) - estimate_theta(bumped, fixture_data)
        assert np.all(np.abs(diff) > 1e-3)

    def test_fixture_term_by_term(self, fixture_data):
        fit = fit_logistic(fixture_data).with_beta(np.array([-0.5, 0.5]), np.array([1.0]))
        mu = predict_all_arms(fit, fixture_data)
        n = 12
        expected = []
        for t in range(2):
            pi_hat = np.sum(fixture_data.arm == t + 1) / n
            total = 0.0
            for i in range(n):
                ind = 1.0 if fixture_data.arm[i] == t + 1 else 0.0
                total += ind / pi_hat * (fixture_data.outcome[i] - mu[i, t]) + mu[i, t]
            expected.append(total / n)
        np.testing.assert_allclose(estimate_theta_augmented(fit, fixture_data), expected, rtol=1e-13)


class TestRobustVhat:
    def test_fixture_frozen(self, fixture_data):
        vhat = robust_vhat(fit_logistic(fixture_data), fixture_data)
        np.testing.assert_allclose(vhat, FIXTURE_VHAT, atol=1e-8)

    def test_matches_oracle_random(self, rng):
        for _ in range(30):
            data = random_dataset(rng)
            fit = fit_logistic(data)
            mu = predict_all_arms(fit, data)
            for source in ("design", "empirical"):
                pi = data.pi if source == "design" else data.arm_counts / data.n_subjects
                np.testing.assert_allclose(robust_vhat(fit, data, source),
                                           vhat_oracle(mu, data.outcome, data.arm, pi), atol=1e-12)

    def test_no_covariates_diagonal(self, rng):
        data = random_dataset(rng, p=0, k=3)
        vhat = robust_vhat(fit_logistic(data), data)
        expected = [np.var(data.outcome[data.arm == t], ddof=1) / data.pi[t - 1] for t in (1, 2, 3)]
        np.testing.assert_allclose(np.diag(vhat), expected, rtol=1e-10)
        np.testing.assert_allclose(vhat - np.diag(np.diag(vhat)), 0, atol=1e-14)

    def test_no_covariates_two_sample_se(self, rng):
        data = random_dataset(rng, p=0, k=2, n=150)
        vhat = robust_vhat(fit_logistic(data), data)
        n = data.n_subjects
        se = math.sqrt((vhat[0, 0] - 2 * vhat[0, 1] + vhat[1, 1]) / n)
        s2 = [np.var(data.outcome[data.arm == t], ddof=1) for t in (1, 2)]
        assert se == pytest.approx(math.sqrt(s2[0] / (n * data.pi[0]) + s2[1] / (n * data.pi[1])), rel=1e-10)

    def test_symmetric(self, rng):
        for _ in range(20):
            data = random_dataset(rng)
            vhat = robust_vhat(fit_logistic(data), data)
            assert np.array_equal(vhat, vhat.T)

    def test_order_and_affine_invariance(self, rng):
        data = random_dataset(rng, p=2, k=3)
        base = robust_vhat(fit_logistic(data), data)
        perm = rng.permutation(data.n_subjects)
        shuffled = TrialDataset(data.arm[perm], data.outcome[perm], data.covariates[perm], data.pi)
        np.testing.assert_allclose(robust_vhat(fit_logistic(shuffled), shuffled), base, atol=1e-8)
        rescaled = TrialDataset(data.arm, data.outcome, (data.covariates + 3.0) / 0.4, data.pi)
        np.testing.assert_allclose(robust_vhat(fit_logistic(rescaled), rescaled), base, atol=1e-8)

    def test_negative_variance_is_surfaced(self):
        data = negative_variance_data()
        with pytest.raises(NegativeVariance) as info:
            robust_vhat(fit_logistic(data), data)
        assert info.value.arm == 1 and info.value.value < 0

    def test_too_few_subjects(self):
        with pytest.raises(TooFewSubjects):
            TrialDataset.from_arrays([1, 2, 2, 2], [1, 0, 1, 0])

    def test_pi_source_validated(self, fixture_data):
        with pytest.raises(ValueError):
            robust_vhat(fit_logistic(fixture_data), fixture_data, pi_source="guess")

    def test_design_and_empirical_coincide_when_balanced(self, fixture_data):
        fit = fit_logistic(fixture_data)
        np.testing.assert_array_equal(robust_vhat(fit, fixture_data, "design"),
                                      robust_vhat(fit, fixture_data, "empirical"))


def test_gcomp_estimate_bundle(fixture_data):
    est = gcomp_estimate(fixture_data)
    np.testing.assert_allclose(est.theta, FIXTURE_THETA, atol=1e-9)
    np.testing.assert_allclose(est.vhat, FIXTURE_VHAT, atol=1e-8)
    assert est.n == 12 and est.pi_source == "design"
    np.testing.assert_allclose(est.arm_se, np.sqrt(np.diag(FIXTURE_VHAT) / 12), atol=1e-8)
