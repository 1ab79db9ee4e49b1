"""
Sparse GLM estimation: column standardization, L1-penalized linear and
logistic regression by coordinate descent, and penalty selection.

All coefficients are on the scale of the matrix handed to the solver.
The solvers accept a ``StandardizedDesign``, any object exposing a
``values`` matrix (e.g. a mirror design), or a plain 2-d array.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    ConstantColumn,
    ConvergenceWarning,
    DimensionMismatch,
    SeparationDetected,
    SolverError,
)

LINEAR_TOL = 1e-7
LINEAR_MAX_SWEEPS = 10_000
LOGISTIC_OUTER_TOL = 1e-6
LOGISTIC_INNER_TOL = 1e-7
LOGISTIC_MAX_OUTER = 100
LOGISTIC_MAX_INNER = 1_000
_MIN_WEIGHT = 1e-5
_SATURATION = 1e-10


@dataclass(frozen=True)
class StandardizedDesign:
    """Column-centred, unit-variance covariate matrix.

    ``values[:, j] = (raw[:, j] - column_means[j]) / column_scales[j]``
    with the population (divide by n) standard deviation.
    """

    values: np.ndarray
    column_means: np.ndarray
    column_scales: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def to_original_scale(self, coefficients, intercept=0.0):
        """Map standardized-scale coefficients back to raw covariate units."""
        coefficients = np.asarray(coefficients, dtype=float)
        raw = coefficients / self.column_scales
        return raw, float(intercept - np.dot(raw, self.column_means))


def standardize_columns(raw) -> StandardizedDesign:
    x = np.asarray(raw, dtype=float)
    if x.ndim != 2 or x.size == 0:
        raise DimensionMismatch("expected a non-empty 2-d matrix")
    n = x.shape[0]
    if n < 2:
        raise DimensionMismatch("need at least two rows to standardize")
    means = x.mean(axis=0)
    centred = x - means
    scales = np.sqrt((centred**2).mean(axis=0))
    for j, (s, mu) in enumerate(zip(scales, means)):
        if not s > 1e-12 * max(1.0, abs(mu)):
            raise ConstantColumn(j)
    values = np.asfortranarray(centred / scales)
    # a second pass removes the rounding left by the first
    values -= values.mean(axis=0)
    values /= np.sqrt((values**2).mean(axis=0))
    return StandardizedDesign(values, means, scales)


class GlmFamily(str, enum.Enum):
    LINEAR = "linear"
    LOGISTIC = "logistic"

    def mean(self, eta):
        eta = np.asarray(eta, dtype=float)
        if self is GlmFamily.LINEAR:
            return eta
        return _sigmoid(eta)

    def loss(self, y, eta):
        """Average negative log-likelihood (squared error / 2 for linear)."""
        y = np.asarray(y, dtype=float)
        eta = np.asarray(eta, dtype=float)
        if self is GlmFamily.LINEAR:
            return 0.5 * np.mean((y - eta) ** 2)
        return np.mean(np.logaddexp(0.0, eta) - y * eta)

    def deviance(self, y, eta):
        """Total deviance of held-out observations."""
        y = np.asarray(y, dtype=float)
        eta = np.asarray(eta, dtype=float)
        if self is GlmFamily.LINEAR:
            return float(np.sum((y - eta) ** 2))
        return float(2.0 * np.sum(np.logaddexp(0.0, eta) - y * eta))


def _sigmoid(eta):
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def as_family(family) -> GlmFamily:
    return family if isinstance(family, GlmFamily) else GlmFamily(str(family).lower())


@dataclass
class LassoFit:
    coefficients: np.ndarray
    intercept: float
    lam: float
    iterations: int
    converged: bool
    objective: float
    family: GlmFamily = GlmFamily.LINEAR
    objective_trace: np.ndarray = field(default=None, repr=False)

    def linear_predictor(self, x):
        return _as_matrix(x) @ self.coefficients + self.intercept


def soft_threshold(z, lam):
    """sign(z) * max(|z| - lam, 0); works elementwise on arrays."""
    if np.any(np.asarray(lam) < 0):
        raise ValueError("lambda must be nonnegative")
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


def _as_matrix(design):
    x = getattr(design, "values", design)
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise DimensionMismatch("design must be a 2-d matrix")
    return x


def _check_response(x, y):
    y = np.ascontiguousarray(y, dtype=float).ravel()
    if y.shape[0] != x.shape[0]:
        raise DimensionMismatch(f"response has length {y.shape[0]}, design has {x.shape[0]} rows")
    if not np.all(np.isfinite(y)):
        raise ValueError("response contains non-finite values")
    return y


def _start(warm_start, m):
    intercept = None
    if warm_start is None:
        return np.zeros(m), intercept
    if isinstance(warm_start, LassoFit):
        intercept = warm_start.intercept
        warm_start = warm_start.coefficients
    beta = np.array(warm_start, dtype=float).ravel()
    if beta.shape[0] != m:
        raise DimensionMismatch(f"warm start has {beta.shape[0]} coefficients, design has {m} columns")
    return beta, intercept


def lasso_linear(design, response, lam, warm_start=None, *, tol=LINEAR_TOL,
                 max_sweeps=LINEAR_MAX_SWEEPS) -> LassoFit:
    """L1-penalized least squares with an unpenalized intercept.

    Minimizes ``(1/2n)||y - b0 - X b||^2 + lam * ||b||_1``. Convergence
    means a full sweep moved no coefficient by ``tol`` or more.
    """
    x = np.asfortranarray(_as_matrix(design))
    y = _check_response(x, response)
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    n, m = x.shape
    beta, b0 = _start(warm_start, m)
    if b0 is None:
        b0 = float(np.mean(y - x @ beta))
    trace = np.empty(max_sweeps)
    b0, sweeps, converged = _kernels.weighted_cd(
        x, y, np.ones(n), float(lam), beta, float(b0), max_sweeps, tol, trace)
    fit = LassoFit(beta, float(b0), float(lam), int(sweeps), bool(converged),
                   float(trace[sweeps - 1]), GlmFamily.LINEAR, trace[:sweeps].copy())
    if not converged:
        warnings.warn(f"lasso_linear did not converge in {max_sweeps} sweeps", ConvergenceWarning)
    return fit


def logistic_objective(x, y, beta, b0, lam):
    eta = x @ beta + b0
    return float(np.mean(np.logaddexp(0.0, eta) - y * eta) + lam * np.sum(np.abs(beta)))


def lasso_logistic(design, response, lam, warm_start=None, *, tol=LOGISTIC_OUTER_TOL,
                   max_outer=LOGISTIC_MAX_OUTER, max_inner=LOGISTIC_MAX_INNER) -> LassoFit:
    """L1-penalized logistic regression by proximal Newton (IRLS + CD).

    Each outer step solves the penalized weighted least-squares
    approximation by coordinate descent, then backtracks toward the
    previous iterate until the penalized objective does not increase.
    """
    x = np.asfortranarray(_as_matrix(design))
    y = _check_response(x, response)
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("logistic response must be coded 0/1")
    if y.min() == y.max():
        raise ValueError("logistic response needs both classes present")
    n, m = x.shape
    beta, b0 = _start(warm_start, m)
    if b0 is None:
        ybar = y.mean()
        b0 = float(np.log(ybar / (1.0 - ybar))) if not beta.any() else 0.0

    obj = logistic_objective(x, y, beta, b0, lam)
    trace = [obj]
    inner_trace = np.empty(max_inner)
    converged = False
    outer = 0
    while outer < max_outer:
        outer += 1
        eta = x @ beta + b0
        prob = _sigmoid(eta)
        w = np.maximum(prob * (1.0 - prob), _MIN_WEIGHT)
        z = eta + (y - prob) / w
        new_beta = beta.copy()
        new_b0, _, _ = _kernels.weighted_cd(
            x, z, w, float(lam), new_beta, float(b0), max_inner, LOGISTIC_INNER_TOL, inner_trace)
        step = 1.0
        cand_beta, cand_b0 = new_beta, new_b0
        cand_obj = logistic_objective(x, y, cand_beta, cand_b0, lam)
        for _ in range(30):
            if cand_obj <= obj:
                break
            step *= 0.5
            cand_beta = beta + step * (new_beta - beta)
            cand_b0 = b0 + step * (new_b0 - b0)
            cand_obj = logistic_objective(x, y, cand_beta, cand_b0, lam)
        else:
            cand_beta, cand_b0, cand_obj = beta, b0, obj
        change = max(np.max(np.abs(cand_beta - beta), initial=0.0), abs(cand_b0 - b0))
        beta, b0, obj = cand_beta, float(cand_b0), cand_obj
        trace.append(obj)
        if change < tol:
            converged = True
            break

    fit = LassoFit(beta, b0, float(lam), outer, converged, obj, GlmFamily.LOGISTIC,
                   np.asarray(trace))
    prob = _sigmoid(x @ beta + b0)
    if np.all((prob < _SATURATION) | (prob > 1.0 - _SATURATION)):
        fit.converged = False
        raise SeparationDetected("fitted probabilities saturated for all observations", fit)
    if not converged:
        warnings.warn(f"lasso_logistic did not converge in {max_outer} outer steps",
                      ConvergenceWarning)
    return fit


def fit_lasso(design, response, family, lam, warm_start=None) -> LassoFit:
    family = as_family(family)
    if family is GlmFamily.LINEAR:
        return lasso_linear(design, response, lam, warm_start)
    return lasso_logistic(design, response, lam, warm_start)


def kkt_residual(design, response, fit: LassoFit) -> float:
    """Largest violation of the lasso optimality conditions at ``fit``.

    Zero coefficients need ``|x_j'r/n| <= lam``; nonzero ones need
    ``x_j'r/n = lam * sign(b_j)``, where ``r`` is the response minus
    the fitted mean. The intercept condition ``sum(r) = 0`` is included.
    """
    x = _as_matrix(design)
    y = np.asarray(response, dtype=float)
    r = y - fit.family.mean(x @ fit.coefficients + fit.intercept)
    grad = x.T @ r / x.shape[0]
    b = fit.coefficients
    nz = b != 0
    viol = np.where(nz, np.abs(grad - fit.lam * np.sign(b)),
                    np.maximum(np.abs(grad) - fit.lam, 0.0))
    return float(max(np.max(viol, initial=0.0), abs(np.mean(r))))


def lambda_max(design, response) -> float:
    """Smallest penalty at which every slope is zero (both families)."""
    x = _as_matrix(design)
    y = np.asarray(response, dtype=float)
    xc = x - x.mean(axis=0)
    return float(np.max(np.abs(xc.T @ (y - y.mean()))) / x.shape[0])


@dataclass(frozen=True)
class LambdaRule:
    """How the penalty level is chosen.

    ``mode`` is ``"fixed"`` (use ``value``) or ``"cv"`` (K-fold
    cross-validation over a log-spaced grid from ``lambda_max`` down to
    ``grid_ratio * lambda_max``).
    """

    mode: str = "cv"
    value: float = None
    folds: int = 10
    grid_size: int = 50
    grid_ratio: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.mode == "fixed":
            if self.value is None or not self.value >= 0:
                raise ValueError("fixed lambda must be >= 0")
        elif self.mode == "cv":
            if self.folds < 2:
                raise ValueError("need at least 2 folds")
            if self.grid_size < 10:
                raise ValueError("grid_size must be >= 10")
            if not 0 < self.grid_ratio < 1:
                raise ValueError("grid_ratio must lie in (0, 1)")
        else:
            raise ValueError(f"unknown lambda mode {self.mode!r}")

    @classmethod
    def fixed(cls, value):
        return cls(mode="fixed", value=float(value))

    @classmethod
    def cross_validated(cls, folds=10, grid_size=50, grid_ratio=0.01, seed=0):
        return cls(mode="cv", folds=folds, grid_size=grid_size, grid_ratio=grid_ratio, seed=seed)


def lambda_grid(lam_max, grid_size, grid_ratio):
    return lam_max * np.logspace(0.0, np.log10(grid_ratio), grid_size)


def fold_assignment(n, folds, seed):
    rng = np.random.default_rng(seed)
    assign = np.empty(n, dtype=np.int64)
    assign[rng.permutation(n)] = np.arange(n) % folds
    return assign


def cv_deviance(design, response, family, grid, folds, seed):
    """Pooled held-out deviance per observation for each grid value."""
    family = as_family(family)
    x = _as_matrix(design)
    y = np.asarray(response, dtype=float)
    n = x.shape[0]
    assign = fold_assignment(n, folds, seed)
    dev = np.zeros(len(grid))
    for k in range(folds):
        test = assign == k
        train = ~test
        xtr = np.asfortranarray(x[train])
        ytr = y[train]
        if family is GlmFamily.LOGISTIC and ytr.min() == ytr.max():
            raise SolverError(f"fold {k}: training data contains a single class")
        fit = None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            for i, lam in enumerate(grid):
                fit = fit_lasso(xtr, ytr, family, lam, warm_start=fit)
                dev[i] += family.deviance(y[test], fit.linear_predictor(x[test]))
    return dev / n


def select_lambda(design, response, family, rule: LambdaRule = None) -> float:
    rule = LambdaRule() if rule is None else rule
    if rule.mode == "fixed":
        return float(rule.value)
    lam_max = lambda_max(design, response)
    if lam_max == 0.0:
        return 0.0
    grid = lambda_grid(lam_max, rule.grid_size, rule.grid_ratio)
    dev = cv_deviance(design, response, family, grid, rule.folds, rule.seed)
    return float(grid[int(np.argmin(dev))])
