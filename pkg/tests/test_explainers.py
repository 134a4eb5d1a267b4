import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from smoothlime.exceptions import DimensionMismatch, RankDeficient
from smoothlime.explainers import (AttributionVector, CLime, ExpectedExplanation, SmoothGrad,
                                   clime, clime_from_samples, clime_ridge,
                                   expected_explanation_mc, explanation_distance, ols_fit,
                                   oracle_standard_error, smoothgrad, smoothgrad_from_samples)
from smoothlime.functions import (CallableFunction, LinearCombination, LinearFunction,
                                  QuadraticFunction)
from smoothlime.sampling import PerturbationConfig, derive_seed, gaussian_perturbations


def square_first(d=2):
    A = np.zeros((d, d))
    A[0, 0] = 1.0
    return QuadraticFunction(A)


def const(d, c=0.3):
    return LinearFunction(np.zeros(d), c)


class TestSmoothGrad:
    def test_linear_is_exact(self, rng):
        theta = rng.normal(size=4)
        for s2 in (0.01, 1.0, 100.0):
            out = smoothgrad(LinearFunction(theta, 2.0), PerturbationConfig(rng.normal(size=4), s2, 50, 1))
            np.testing.assert_allclose(out.weights, theta, rtol=0, atol=1e-12)

    def test_constant_is_zero(self):
        out = smoothgrad(const(3), PerturbationConfig(np.ones(3), 1.0, 20, 0))
        np.testing.assert_array_equal(out.weights, 0.0)

    def test_stein_square(self):
        # E[grad x1^2] = [2 x1, 0]; MC sd of component 1 is 2/sqrt(n)
        x = np.array([1.7, -0.4])
        out = smoothgrad(square_first(), PerturbationConfig(x, 1.0, 10**5, 3))
        assert np.linalg.norm(out.weights - [2 * x[0], 0]) <= 0.02 * 2 * x[0]

    def test_metadata(self):
        out = smoothgrad(const(2), PerturbationConfig([0.0, 1.0], 0.5, 7, 9))
        assert (out.method, out.n, out.seed, out.sigma2) == ("smoothgrad", 7, 9, 0.5)


class TestOls:
    def test_exact_linear(self, rng):
        A = rng.normal(size=(12, 3))
        theta, c = np.array([0.5, -1.0, 2.0]), 0.7
        fit = ols_fit(A, A @ theta + c)
        np.testing.assert_allclose(fit.weights, theta, atol=1e-9)
        assert fit.intercept == pytest.approx(c, abs=1e-9)
        assert fit.residual_mse <= 1e-18

    def test_constant_labels(self, rng):
        fit = ols_fit(rng.normal(size=(10, 2)), np.full(10, 0.4))
        np.testing.assert_allclose(fit.weights, 0.0, atol=1e-15)
        assert fit.intercept == pytest.approx(0.4)

    def test_quadratic_labels_match_explicit_inverse(self, rng):
        A = rng.normal(size=(50, 3))
        y = A[:, 0] ** 2 - 0.5 * A[:, 1] * A[:, 2] + A[:, 2]
        D = np.hstack([A, np.ones((50, 1))])
        beta = np.linalg.inv(D.T @ D) @ D.T @ y
        fit = ols_fit(A, y)
        np.testing.assert_allclose(fit.weights, beta[:3], rtol=1e-9, atol=1e-12)
        assert fit.intercept == pytest.approx(beta[3], rel=1e-9)
        assert fit.residual_mse == pytest.approx(np.mean((y - D @ beta) ** 2), rel=1e-9)

    def test_rank_deficient(self, rng):
        A = rng.normal(size=(10, 1)) @ np.ones((1, 3))   # all columns identical
        with pytest.raises(RankDeficient):
            ols_fit(A, rng.normal(size=10))

    def test_too_few_rows(self, rng):
        with pytest.raises(RankDeficient, match="n >= 4"):
            ols_fit(rng.normal(size=(3, 3)), rng.normal(size=3))


class TestClime:
    def test_linear_exact(self, rng):
        theta = rng.normal(size=5)
        for s2 in (0.01, 1.0, 100.0):
            for seed in range(3):
                out = clime(LinearFunction(theta, -1.0), PerturbationConfig(rng.normal(size=5), s2, 6, seed))
                np.testing.assert_allclose(out.weights, theta, atol=1e-9)

    def test_constant_zero(self):
        out = clime(const(3), PerturbationConfig(np.zeros(3), 1.0, 30, 2))
        np.testing.assert_allclose(out.weights, 0.0, atol=1e-14)

    def test_needs_d_plus_one(self):
        with pytest.raises(RankDeficient, match="clime_ridge"):
            clime(const(3), PerturbationConfig(np.zeros(3), 1.0, 3, 0))

    def test_close_to_smoothgrad_on_trained_model(self, sim_model, sim_data):
        dists = []
        for i, x in enumerate(sim_data.X_test[:50]):
            sg = smoothgrad(sim_model, PerturbationConfig(x, 1.0, 1000, derive_seed(5, 1, i)))
            cl = clime(sim_model, PerturbationConfig(x, 1.0, 1000, derive_seed(5, 2, i)))
            dists.append(explanation_distance(sg, cl, "L1"))
        assert np.mean(dists) <= 0.1

    def test_stein_square(self):
        x = np.array([-2.2, 0.9])
        out = clime(square_first(), PerturbationConfig(x, 1.0, 10**5, 4))
        assert np.linalg.norm(out.weights - [2 * x[0], 0]) <= 0.02 * abs(2 * x[0])


class TestRidge:
    def test_zero_lambda_equals_clime(self, sim_model):
        cfg = PerturbationConfig([0.3, -0.2], 1.0, 200, 17)
        a = clime(sim_model, cfg).weights
        b = clime_ridge(sim_model, cfg, 0.0).weights
        assert np.max(np.abs(a - b)) <= 1e-10

    def test_huge_lambda_shrinks(self, sim_model):
        out = clime_ridge(sim_model, PerturbationConfig([0.3, -0.2], 1.0, 200, 17), 1e9)
        assert np.all(np.abs(out.weights) <= 1e-6)

    def test_closed_form_half(self):
        # (Sigma + lambda I)^-1 Sigma theta = theta * s2 / (s2 + lambda) = theta / 2
        theta = np.array([1.0, -2.0, 0.5])
        out = clime_ridge(LinearFunction(theta, 0.3), PerturbationConfig(np.ones(3), 1.0, 10**5, 6), 1.0)
        np.testing.assert_allclose(out.weights, theta / 2, rtol=0.05)

    def test_handles_fewer_samples_than_features(self):
        out = clime_ridge(LinearFunction([1.0, 2.0, 3.0]), PerturbationConfig(np.zeros(3), 1.0, 2, 0), 0.5)
        assert np.all(np.isfinite(out.weights))

    def test_negative_lambda(self):
        with pytest.raises(ValueError):
            clime_ridge(const(2), PerturbationConfig(np.zeros(2), 1.0, 10, 0), -1.0)


class TestOracle:
    def test_linear(self):
        theta = np.array([0.5, -1.5])
        x, s2, n = np.array([1.0, 2.0]), 0.5, 10**5
        out = expected_explanation_mc(LinearFunction(theta, 1.0), x, s2, n, 1)
        se = oracle_standard_error(LinearFunction(theta, 1.0), x, s2, n, 1)
        assert np.all(np.abs(out.weights - theta) <= 5 * se)

    def test_constant(self):
        out = expected_explanation_mc(const(2), [0.0, 0.0], 1.0, 10**4, 1)
        np.testing.assert_allclose(out.weights, 0.0, atol=1e-12)

    def test_stein_square(self):
        x = np.array([2.5, -1.0])
        out = expected_explanation_mc(square_first(), x, 1.0, 10**5, 2)
        assert np.linalg.norm(out.weights - [5.0, 0.0]) <= 0.02 * 5.0

    def test_general_covariance_closed_form(self, rng):
        # closed form Sigma^-1 cov(a, f(a)) with a correlated Sigma and f(a) = a1^2:
        # cov(a, a1^2) = 2 x1 Sigma[:, 0]  =>  Sigma^-1 cov = [2 x1, 0, 0]
        x = np.array([1.3, -0.2, 0.7])
        M = rng.normal(size=(3, 3))
        Sigma = M @ M.T + np.eye(3)
        A = x + rng.normal(size=(400000, 3)) @ np.linalg.cholesky(Sigma).T
        y = A[:, 0] ** 2
        cov = ((A - A.mean(0)) * (y - y.mean())[:, None]).mean(0)
        np.testing.assert_allclose(np.linalg.solve(Sigma, cov), [2 * x[0], 0, 0], atol=0.1)


class TestDistance:
    def test_values(self):
        a = AttributionVector([1.0, 0.0], "smoothgrad", 1, 0)
        b = AttributionVector([0.0, 1.0], "clime", 1, 0)
        assert explanation_distance(a, a) == 0
        assert explanation_distance(a, b, "L1") == 2.0
        assert explanation_distance([3.0, 0.0], [0.0, 4.0], "L2") == 5.0

    def test_mismatch(self):
        with pytest.raises(DimensionMismatch):
            explanation_distance([1.0], [1.0, 2.0])


class TestSharedSampleProperties:
    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), alpha=st.floats(-5, 5), beta=st.floats(-5, 5))
    def test_linearity(self, seed, alpha, beta):
        rng = np.random.default_rng(seed)
        d = 3
        f = QuadraticFunction(rng.normal(size=(d, d)), rng.normal(size=d), 0.5)
        g = CallableFunction(lambda X: np.sin(X).sum(axis=1), lambda X: np.cos(X))
        h = LinearCombination(f, g, alpha, beta)
        A = gaussian_perturbations(PerturbationConfig(rng.normal(size=d), 1.0, 64, seed))
        for explain in (smoothgrad_from_samples, clime_from_samples):
            lhs = explain(h, A)
            rhs = alpha * explain(f, A) + beta * explain(g, A)
            assert np.max(np.abs(lhs - rhs)) <= 1e-10

    def test_proportionality_direction(self, rng):
        theta = rng.normal(size=6)
        unit = theta / np.linalg.norm(theta)
        cfg = PerturbationConfig(rng.normal(size=6), 2.0, 20, 3)
        for out in (smoothgrad(LinearFunction(theta), cfg), clime(LinearFunction(theta), cfg)):
            np.testing.assert_allclose(out.weights / np.linalg.norm(out.weights), unit, atol=1e-9)
            assert np.linalg.norm(out.weights) / np.linalg.norm(theta) == pytest.approx(1.0, abs=1e-9)


class TestSerialization:
    def test_json_schema(self):
        out = smoothgrad(LinearFunction([1.0, 2.0]), PerturbationConfig([0.5, 0.5], 1.0, 10, 4))
        doc = json.loads(out.to_json())
        assert set(doc) == {"method", "x", "sigma2", "n", "seed", "weights"}
        assert doc["method"] == "smoothgrad" and doc["x"] == [0.5, 0.5]
        back = AttributionVector.from_dict(doc)
        np.testing.assert_array_equal(back.weights, out.weights)

    def test_rejects_unknown_method(self):
        with pytest.raises(ValueError):
            AttributionVector([1.0], "shap", 1, 0)


class TestEstimators:
    def test_get_params_clone(self, sim_model):
        est = CLime(sim_model, sigma2=0.5, n_samples=100, alpha=0.1, random_state=3)
        params = est.get_params()
        assert params["sigma2"] == 0.5 and params["alpha"] == 0.1
        assert clone(est).get_params()["n_samples"] == 100

    def test_transform_rows_use_derived_seeds(self, sim_model, sim_data):
        X = sim_data.X_test[:4]
        est = SmoothGrad(sim_model, sigma2=1.0, n_samples=300, random_state=8).fit(X)
        W = est.transform(X)
        assert W.shape == X.shape
        expected = smoothgrad(sim_model, PerturbationConfig(X[2], 1.0, 300, derive_seed(8, 2)))
        np.testing.assert_array_equal(W[2], expected.weights)

    def test_explainers_agree_on_linear(self):
        f = LinearFunction([2.0, -1.0], 0.5)
        X = np.array([[0.0, 1.0], [3.0, -2.0]])
        for est in (SmoothGrad(f, n_samples=20), CLime(f, n_samples=20)):
            np.testing.assert_allclose(est.fit().transform(X), [[2.0, -1.0]] * 2, atol=1e-9)
        oracle = ExpectedExplanation(f, n_samples=10**4).fit().transform(X)
        np.testing.assert_allclose(oracle, [[2.0, -1.0]] * 2, atol=0.05)

    def test_fit_validates(self):
        with pytest.raises(ValueError):
            SmoothGrad(None).fit()
        with pytest.raises(ValueError):
            SmoothGrad(const(2), sigma2=0).fit()
