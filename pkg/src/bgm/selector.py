"""
Self-guiding bi-Gaussian mirror statistics and the data-adaptive cutoff.

Given mirror scores (W1, W2) and an initial coefficient estimate b,
each feature gets a weight gamma_j = (|b_j| + 1)^(-kappa) and a statistic
M_j = W1_j - gamma_j * W2_j. The false-discovery estimate at threshold t
counts the negative tail #{M < -t} plus the asymmetry correction
#{t <= M < t / gamma}, relative to #{M > t}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidKappa, InvalidThreshold
from .glm import LambdaRule, as_family, fit_lasso, select_lambda
from .mirrors import FeatureMirrorScores, compute_all_scores

DEFAULT_KAPPA_GRID = tuple(float(k) for k in range(1, 11))


@dataclass(frozen=True)
class WeightVector:
    gamma: np.ndarray
    kappa: float
    source_beta: np.ndarray


def estimate_weights(beta_hat, kappa) -> WeightVector:
    if not kappa >= 1:
        raise InvalidKappa(f"kappa must be >= 1, got {kappa}")
    b = np.asarray(beta_hat, dtype=float)
    return WeightVector((np.abs(b) + 1.0) ** (-float(kappa)), float(kappa), b)


@dataclass(frozen=True)
class BgmStatVector:
    m_hat: np.ndarray
    weights: WeightVector
    scores: FeatureMirrorScores

    @property
    def gamma(self):
        return self.weights.gamma

    @property
    def w2(self):
        return self.scores.w2


def bgm_statistics(scores: FeatureMirrorScores, weights: WeightVector) -> BgmStatVector:
    g = weights.gamma
    if not (scores.w1.shape == scores.w2.shape == g.shape):
        raise DimensionMismatch("scores and weights have different lengths")
    return BgmStatVector(scores.w1 - g * scores.w2, weights, scores)


def fdp_components(stats: BgmStatVector, t):
    """Counts (V1, V2, V3, denominator) at threshold ``t``.

    V3 is the boundary term dropped from the cutoff ratio; it is returned
    for diagnostics only.
    """
    if not t > 0:
        raise InvalidThreshold(f"threshold must be positive, got {t}")
    m, g, w2 = stats.m_hat, stats.gamma, stats.w2
    upper = t / g
    v1 = int(np.count_nonzero(m < -t))
    v2 = int(np.count_nonzero((m >= t) & (m < upper)))
    v3 = int(np.count_nonzero((m >= upper) & (m <= upper + (1.0 / g - g) * w2)))
    denom = max(int(np.count_nonzero(m > t)), 1)
    return v1, v2, v3, denom


def threshold_candidates(stats: BgmStatVector):
    """One representative threshold per cell on which the FDP estimate is constant.

    The counts in the cutoff ratio only change where t crosses some |M_j|
    (tails and the lower edge of the V2 window) or some gamma_j * M_j
    (upper edge of the V2 window, since M_j < t/gamma_j iff t > gamma_j M_j).
    With these breakpoints sorted as 0 < b_1 < ... < b_K, the cells are
    (0, b_1), {b_1}, (b_1, b_2), {b_2}, ... and each open interval is
    represented by its midpoint. Cells at or beyond max(M) select
    nothing and are left out.
    """
    m = np.asarray(stats.m_hat, dtype=float)
    g = np.asarray(stats.gamma, dtype=float)
    top = m.max(initial=0.0)
    if top <= 0:
        return np.empty(0)
    pos = m > 0
    b = np.unique(np.concatenate((np.abs(m[m != 0]), (g * m)[pos & (g < 1)])))
    b = b[(b > 0) & (b < top)]
    edges = np.concatenate(([0.0], b, [top]))
    mids = 0.5 * (edges[:-1] + edges[1:])
    cand = np.empty(mids.size + b.size)
    cand[0::2] = mids
    cand[1::2] = b
    return cand


@dataclass
class CutoffResult:
    tau: float
    q: float
    fdp_curve: list = field(default_factory=list, repr=False)

    @property
    def feasible(self):
        return math.isfinite(self.tau)


def compute_cutoff(stats: BgmStatVector, q) -> CutoffResult:
    """Smallest t > 0 with (V1 + V2) / max(#{M > t}, 1) <= q.

    When the feasible region starts with an open interval the infimum is
    not attained; the interval midpoint is reported, which selects the
    same features as any other point of the interval. ``tau`` is +inf
    when no threshold that selects at least one feature is feasible.
    """
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    curve = []
    tau = math.inf
    for t in threshold_candidates(stats):
        v1, v2, v3, denom = fdp_components(stats, t)
        ratio = (v1 + v2) / denom
        curve.append((float(t), v1, v2, v3, denom, ratio))
        if ratio <= q and tau == math.inf:
            tau = float(t)
    return CutoffResult(tau, float(q), curve)


def selected_set(m_hat, tau):
    if not math.isfinite(tau):
        return ()
    return tuple(int(j) for j in np.flatnonzero(np.asarray(m_hat) > tau))


@dataclass
class KappaRecord:
    kappa: float
    tau: float
    selected: tuple
    stats: BgmStatVector = field(repr=False)
    cutoff: CutoffResult = field(repr=False)

    @property
    def size(self):
        return len(self.selected)


@dataclass
class BgmSelection:
    records: list
    kappa_max: float
    final_selected: tuple
    beta_hat: np.ndarray = field(default=None, repr=False)
    scores: FeatureMirrorScores = field(default=None, repr=False)
    lam: float = None
    q: float = None

    @property
    def best(self) -> KappaRecord:
        return next(r for r in self.records if r.kappa == self.kappa_max)

    @property
    def tau(self):
        return self.best.tau


def select_from_scores(scores: FeatureMirrorScores, beta_hat, kappa_grid, q) -> BgmSelection:
    """The per-kappa loop: weights, statistics, cutoff, selection, argmax.

    Ties in selection size go to the smallest kappa.
    """
    kappa_grid = _check_grid(kappa_grid)
    records = []
    for kappa in kappa_grid:
        stats = bgm_statistics(scores, estimate_weights(beta_hat, kappa))
        cut = compute_cutoff(stats, q)
        records.append(KappaRecord(kappa, cut.tau, selected_set(stats.m_hat, cut.tau), stats, cut))
    best = max(records, key=lambda r: r.size)  # first maximum = smallest kappa
    return BgmSelection(records, best.kappa, best.selected,
                        np.asarray(beta_hat, dtype=float), scores, q=float(q))


def _check_grid(kappa_grid):
    grid = [float(k) for k in kappa_grid]
    if not grid:
        raise InvalidKappa("kappa grid is empty")
    if any(k < 1 for k in grid):
        raise InvalidKappa("kappa values must be >= 1")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidKappa("kappa grid must be strictly increasing")
    return grid


def self_guiding_select(design, response, family, kappa_grid=DEFAULT_KAPPA_GRID, q=0.1,
                        master_seed=0, lambda_rule: LambdaRule = None, lam=None,
                        kind="product", n_jobs=1) -> BgmSelection:
    """Full selection pipeline on a standardized design.

    One penalty level (chosen by ``lambda_rule`` unless ``lam`` is given)
    is used for the initial fit and every mirror fit. Mirror scores are
    computed once and shared by all kappa values.
    """
    family = as_family(family)
    kappa_grid = _check_grid(kappa_grid)
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    if lam is None:
        lam = select_lambda(design, response, family, lambda_rule)
    initial = fit_lasso(design, response, family, lam)
    scores = compute_all_scores(design, response, family, lam, master_seed,
                                initial_beta=initial.coefficients, kind=kind, n_jobs=n_jobs)
    sel = select_from_scores(scores, initial.coefficients, kappa_grid, q)
    sel.lam = float(lam)
    return sel


def symmetric_baseline_select(design, response, family, q=0.1, master_seed=0,
                              lambda_rule: LambdaRule = None, lam=None, kind="product",
                              n_jobs=1) -> BgmSelection:
    """Same pipeline with every weight fixed at 1 (symmetric statistics)."""
    family = as_family(family)
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    if lam is None:
        lam = select_lambda(design, response, family, lambda_rule)
    initial = fit_lasso(design, response, family, lam)
    scores = compute_all_scores(design, response, family, lam, master_seed,
                                initial_beta=initial.coefficients, kind=kind, n_jobs=n_jobs)
    sel = select_from_scores(scores, np.zeros(scores.p), [1.0], q)
    sel.lam = float(lam)
    return sel
