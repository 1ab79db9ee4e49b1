import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bgm.errors import ConstantColumn, DimensionMismatch
from bgm.glm import (
    GlmFamily,
    LambdaRule,
    fold_assignment,
    kkt_residual,
    lambda_max,
    lasso_linear,
    lasso_logistic,
    logistic_objective,
    select_lambda,
    soft_threshold,
    standardize_columns,
)

from conftest import orthonormal_design


class TestStandardize:
    def test_affine_example(self):
        d = standardize_columns(np.array([[1.0], [2.0], [3.0]]))
        # population sd of [1, 2, 3] is sqrt(2/3)
        np.testing.assert_allclose(d.values[:, 0], np.array([-1, 0, 1]) / np.sqrt(2 / 3))
        assert d.column_means[0] == pytest.approx(2.0)
        assert d.column_scales[0] == pytest.approx(np.sqrt(2 / 3))

    def test_idempotent(self, rng):
        d = standardize_columns(rng.normal(3, 5, size=(50, 4)))
        again = standardize_columns(d.values)
        np.testing.assert_allclose(again.values, d.values, atol=1e-10)

    def test_constant_column(self):
        with pytest.raises(ConstantColumn) as info:
            standardize_columns(np.array([[1.0, 5.0], [2.0, 5.0], [4.0, 5.0]]))
        assert info.value.column == 1

    @pytest.mark.parametrize("bad", [np.empty((0, 3)), np.ones((1, 2)), np.ones(4)])
    def test_bad_shapes(self, bad):
        with pytest.raises(DimensionMismatch):
            standardize_columns(bad)

    @given(st.integers(2, 40), st.integers(1, 6), st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_invariants(self, n, p, seed):
        raw = np.random.default_rng(seed).normal(10, 3, size=(n, p))
        d = standardize_columns(raw)
        assert np.all(np.abs(d.values.mean(axis=0)) < 1e-10)
        assert np.all(np.abs(d.values.std(axis=0) - 1) < 1e-8)
        assert np.all(d.column_scales > 0)

    def test_back_transform(self, rng):
        raw = rng.normal(2, 4, size=(30, 3))
        d = standardize_columns(raw)
        b = np.array([0.5, -1.0, 2.0])
        raw_b, raw_b0 = d.to_original_scale(b, 0.3)
        np.testing.assert_allclose(raw @ raw_b + raw_b0, d.values @ b + 0.3, atol=1e-10)


class TestSoftThreshold:
    def test_examples(self):
        assert soft_threshold(3.0, 1.0) == 2.0
        assert soft_threshold(-0.5, 1.0) == 0.0
        assert soft_threshold(-3.0, 1.0) == -2.0

    @given(st.floats(-1e6, 1e6))
    def test_identity_at_zero(self, z):
        assert soft_threshold(z, 0.0) == z

    def test_negative_lambda(self):
        with pytest.raises(ValueError):
            soft_threshold(1.0, -0.1)


class TestLassoLinear:
    @pytest.mark.parametrize("lam", [0.01, 0.1, 0.3])
    def test_orthonormal_closed_form(self, lam):
        x = orthonormal_design(80, 6, seed=1)
        rng = np.random.default_rng(2)
        y = x @ np.array([1.0, -0.5, 0.2, 0.0, 0.05, 0.4]) + 3.0 + rng.standard_normal(80)
        fit = lasso_linear(x, y, lam)
        expected = soft_threshold(x.T @ y / 80, lam)
        assert fit.converged
        np.testing.assert_allclose(fit.coefficients, expected, atol=1e-6)
        assert fit.intercept == pytest.approx(y.mean(), abs=1e-6)

    def test_full_shrinkage(self, linear_problem):
        x, y, _ = linear_problem
        fit = lasso_linear(x, y, lambda_max(x, y) * 1.0001)
        assert np.all(fit.coefficients == 0.0)
        assert fit.intercept == pytest.approx(y.mean())

    def test_least_squares_at_zero_penalty(self, linear_problem):
        x, y, _ = linear_problem
        fit = lasso_linear(x, y, 0.0)
        a = np.column_stack([np.ones(x.n), x.values])
        ols = np.linalg.solve(a.T @ a, a.T @ y)
        assert fit.converged
        np.testing.assert_allclose(fit.coefficients, ols[1:], atol=1e-6)
        assert fit.intercept == pytest.approx(ols[0], abs=1e-6)

    @pytest.mark.parametrize("lam", [0.0, 0.02, 0.1, 0.5])
    def test_kkt(self, linear_problem, lam):
        x, y, _ = linear_problem
        fit = lasso_linear(x, y, lam)
        assert fit.converged
        assert kkt_residual(x, y, fit) <= 1e-6

    def test_objective_monotone(self, linear_problem):
        x, y, _ = linear_problem
        fit = lasso_linear(x, y, 0.05)
        diffs = np.diff(fit.objective_trace)
        assert np.all(diffs <= 1e-12 * np.abs(fit.objective_trace[:-1]))

    def test_warm_equals_cold(self, linear_problem):
        x, y, _ = linear_problem
        cold = lasso_linear(x, y, 0.05)
        start = lasso_linear(x, y, 0.2)
        warm = lasso_linear(x, y, 0.05, warm_start=start)
        np.testing.assert_allclose(warm.coefficients, cold.coefficients, atol=1e-5)

    def test_deterministic(self, linear_problem):
        x, y, _ = linear_problem
        a = lasso_linear(x, y, 0.07)
        b = lasso_linear(x, y, 0.07)
        assert a.coefficients.tobytes() == b.coefficients.tobytes()
        assert a.intercept == b.intercept

    def test_iteration_cap_flags(self, linear_problem):
        x, y, _ = linear_problem
        with pytest.warns(UserWarning):
            fit = lasso_linear(x, y, 0.001, max_sweeps=2)
        assert not fit.converged
        assert np.isfinite(fit.objective)

    def test_response_length(self, linear_problem):
        x, y, _ = linear_problem
        with pytest.raises(DimensionMismatch):
            lasso_linear(x, y[:-1], 0.1)


def _grid_search_logistic(x, y, lam, box=4.0, points=41, rounds=14):
    """Coarse-to-fine grid minimization of the penalized logistic loss over (b0, b1, b2)."""
    centre = np.zeros(3)
    half = box
    for _ in range(rounds):
        axes = [np.linspace(c - half, c + half, points) for c in centre]
        b0, b1, b2 = np.meshgrid(*axes, indexing="ij")
        eta = b0[..., None] + b1[..., None] * x[:, 0] + b2[..., None] * x[:, 1]
        obj = np.mean(np.logaddexp(0, eta) - y * eta, axis=-1) + lam * (np.abs(b1) + np.abs(b2))
        k = np.unravel_index(np.argmin(obj), obj.shape)
        centre = np.array([b0[k], b1[k], b2[k]])
        half *= 0.5
    return centre


class TestLassoLogistic:
    def test_null_model(self, logistic_problem):
        x, y, _ = logistic_problem
        fit = lasso_logistic(x, y, lambda_max(x, y) * 1.0001)
        assert np.all(fit.coefficients == 0.0)
        ybar = y.mean()
        assert fit.intercept == pytest.approx(np.log(ybar / (1 - ybar)), abs=1e-8)

    @pytest.mark.parametrize("seed,lam", [(0, 0.02), (1, 0.05), (2, 0.1), (3, 0.0)])
    def test_grid_search_oracle(self, seed, lam):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((20, 2))
        y = (rng.random(20) < 1 / (1 + np.exp(-(x @ [1.0, -0.7])))).astype(float)
        if y.min() == y.max():
            y[0] = 1 - y[0]
        if lam == 0.0:
            # keep the unpenalized problem bounded: flip a point to avoid separation
            y[np.argmax(x[:, 0])] = 0.0
            y[np.argmin(x[:, 0])] = 1.0
        fit = lasso_logistic(x, y, lam)
        oracle = _grid_search_logistic(x, y, lam)
        np.testing.assert_allclose([fit.intercept, *fit.coefficients], oracle, atol=1e-3)

    @pytest.mark.parametrize("lam", [0.01, 0.03, 0.1])
    def test_kkt(self, logistic_problem, lam):
        x, y, _ = logistic_problem
        fit = lasso_logistic(x, y, lam)
        assert fit.converged
        assert kkt_residual(x, y, fit) <= 1e-6

    @given(st.integers(0, 10_000), st.floats(0.005, 0.2))
    @settings(max_examples=25, deadline=None)
    def test_outer_descent(self, seed, lam):
        rng = np.random.default_rng(seed)
        x = standardize_columns(rng.standard_normal((60, 8)))
        y = (rng.random(60) < 0.5).astype(float)
        y[:2] = [0.0, 1.0]
        fit = lasso_logistic(x, y, lam)
        assert np.all(np.diff(fit.objective_trace) <= 1e-12)
        assert fit.objective == pytest.approx(
            logistic_objective(x.values, y, fit.coefficients, fit.intercept, lam))

    def test_warm_equals_cold(self, logistic_problem):
        x, y, _ = logistic_problem
        cold = lasso_logistic(x, y, 0.02)
        warm = lasso_logistic(x, y, 0.02, warm_start=lasso_logistic(x, y, 0.08))
        np.testing.assert_allclose(warm.coefficients, cold.coefficients, atol=1e-5)

    def test_rejects_non_binary(self, logistic_problem):
        x, y, _ = logistic_problem
        bad = y.copy()
        bad[0] = 2
        with pytest.raises(ValueError):
            lasso_logistic(x, bad, 0.1)
        with pytest.raises(ValueError):
            lasso_logistic(x, np.ones_like(y), 0.1)


class TestSelectLambda:
    def test_fixed(self, linear_problem):
        x, y, _ = linear_problem
        assert select_lambda(x, y, "linear", LambdaRule.fixed(0.05)) == 0.05

    def test_deterministic(self, linear_problem):
        x, y, _ = linear_problem
        rule = LambdaRule.cross_validated(folds=5, grid_size=20, seed=3)
        assert select_lambda(x, y, "linear", rule) == select_lambda(x, y, "linear", rule)

    def test_within_grid(self, logistic_problem):
        x, y, _ = logistic_problem
        lam = select_lambda(x, y, GlmFamily.LOGISTIC, LambdaRule.cross_validated(5, 20))
        lmax = lambda_max(x, y)
        assert 0.01 * lmax * (1 - 1e-9) <= lam <= lmax * (1 + 1e-9)

    def test_null_signal_gives_sparse_model(self):
        sizes = []
        for seed in range(10):
            rng = np.random.default_rng(100 + seed)
            x = standardize_columns(rng.standard_normal((100, 40)))
            y = rng.standard_normal(100)
            lam = select_lambda(x, y, "linear", LambdaRule.cross_validated(seed=seed))
            sizes.append(np.count_nonzero(lasso_linear(x, y, lam).coefficients))
        # a CV-minimizing penalty admits a few noise variables at most on average
        assert np.mean(sizes) <= 4

    def test_fold_assignment_balanced(self):
        a = fold_assignment(103, 10, seed=1)
        counts = np.bincount(a)
        assert counts.max() - counts.min() <= 1
        assert np.array_equal(a, fold_assignment(103, 10, seed=1))

    @pytest.mark.parametrize("kwargs", [dict(mode="fixed", value=-1.0), dict(folds=1),
                                        dict(grid_size=5), dict(grid_ratio=1.5),
                                        dict(mode="other")])
    def test_rule_validation(self, kwargs):
        with pytest.raises(ValueError):
            LambdaRule(**kwargs)
