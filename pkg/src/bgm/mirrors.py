"""
Gaussian feature mirrors.

For feature j and copy m in {1, 2}, the column X_j is replaced by the
pair (X_j + zeta, X_j - zeta) with zeta ~ N(0, I_n), the augmented
model is refit, and the two leading coefficients are combined into a
nonnegative mirror score.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceWarning, DimensionMismatch, MirrorFitError
from .glm import StandardizedDesign, as_family, fit_lasso

# keeps mirror substreams apart from any other use of the same master seed
_MIRROR_STREAM = 0x6D6972


@dataclass(frozen=True)
class MirrorNoise:
    feature_index: int
    zeta1: np.ndarray
    zeta2: np.ndarray
    stream_seed: tuple

    def swapped(self) -> "MirrorNoise":
        return MirrorNoise(self.feature_index, self.zeta2, self.zeta1, self.stream_seed)


def noise_stream(master_seed, j, copy):
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(_MIRROR_STREAM, int(j), int(copy)))
    return np.random.default_rng(ss)


def draw_mirror_noise(j, n, master_seed) -> MirrorNoise:
    if n < 1:
        raise ValueError("n must be positive")
    z1 = noise_stream(master_seed, j, 1).standard_normal(n)
    z2 = noise_stream(master_seed, j, 2).standard_normal(n)
    return MirrorNoise(int(j), z1, z2, (int(master_seed), int(j)))


@dataclass(frozen=True)
class MirrorDesign:
    """n x (p+1) matrix with columns (X_j + zeta, X_j - zeta, X_{-j})."""

    values: np.ndarray
    feature_index: int
    copy: int

    def original_column(self, j):
        """Map a column of the original design to its position here."""
        if j == self.feature_index:
            raise ValueError("feature j is split across the first two columns")
        return j + 2 if j < self.feature_index else j + 1


def build_mirror_design(design, noise: MirrorNoise, copy) -> MirrorDesign:
    x = np.asarray(getattr(design, "values", design), dtype=float)
    n, p = x.shape
    j = noise.feature_index
    if copy not in (1, 2):
        raise ValueError("copy must be 1 or 2")
    zeta = noise.zeta1 if copy == 1 else noise.zeta2
    if zeta.shape != (n,):
        raise DimensionMismatch(f"noise has length {zeta.shape[0]}, design has {n} rows")
    if not 0 <= j < p:
        raise DimensionMismatch(f"feature index {j} outside 0..{p - 1}")
    out = np.empty((n, p + 1), order="F")
    out[:, 0] = x[:, j] + zeta
    out[:, 1] = x[:, j] - zeta
    out[:, 2:j + 2] = x[:, :j]
    out[:, j + 2:] = x[:, j + 1:]
    return MirrorDesign(out, j, copy)


def mirror_warm_start(initial_beta, j):
    """Initial full-model coefficients with b_j split evenly onto the mirror pair."""
    b = np.asarray(initial_beta, dtype=float)
    return np.concatenate(([b[j] / 2.0, b[j] / 2.0], b[:j], b[j + 1:]))


def fit_mirror_pair(design, response, family, j, noise: MirrorNoise, lam, warm_start=None):
    """Fit both augmented models for feature j.

    Returns ``(beta_plus_1, beta_minus_1, beta_plus_2, beta_minus_2)``.
    ``warm_start`` is an initial length-p coefficient vector for the
    unaugmented model.
    """
    family = as_family(family)
    start = None if warm_start is None else mirror_warm_start(warm_start, j)
    out = []
    for copy in (1, 2):
        md = build_mirror_design(design, noise, copy)
        try:
            fit = fit_lasso(md, response, family, lam, warm_start=start)
        except Exception as exc:
            raise MirrorFitError(j, copy, exc) from exc
        out.extend(fit.coefficients[:2])
    return tuple(float(v) for v in out)


def score(beta_plus, beta_minus, kind="product"):
    """Nonnegative mirror score from one pair of mirror coefficients."""
    bp = np.asarray(beta_plus, dtype=float)
    bm = np.asarray(beta_minus, dtype=float)
    if kind == "product":
        return 4.0 * np.abs(bp * bm)
    if kind == "sum":
        return np.abs(bp) + np.abs(bm)
    raise ValueError(f"unknown score kind {kind!r}")


@dataclass(frozen=True)
class FeatureMirrorScores:
    w1: np.ndarray
    w2: np.ndarray
    beta_plus1: np.ndarray
    beta_minus1: np.ndarray
    beta_plus2: np.ndarray
    beta_minus2: np.ndarray
    noise_seeds: tuple
    kind: str = "product"

    @property
    def p(self):
        return self.w1.shape[0]

    @classmethod
    def from_coefficients(cls, coefs, noise_seeds, kind="product"):
        c = np.asarray(coefs, dtype=float).reshape(-1, 4)
        return cls(score(c[:, 0], c[:, 1], kind), score(c[:, 2], c[:, 3], kind),
                   c[:, 0].copy(), c[:, 1].copy(), c[:, 2].copy(), c[:, 3].copy(),
                   tuple(noise_seeds), kind)


def compute_all_scores(design: StandardizedDesign, response, family, lam, master_seed,
                       initial_beta=None, kind="product", n_jobs=1) -> FeatureMirrorScores:
    """Mirror scores for every feature.

    Per-feature work only depends on (design, response, lam, master_seed, j)
    so the result does not depend on ``n_jobs`` or execution order.
    """
    x = np.asarray(getattr(design, "values", design), dtype=float)
    n, p = x.shape

    def one(j):
        noise = draw_mirror_noise(j, n, master_seed)
        return fit_mirror_pair(x, response, family, j, noise, lam, initial_beta)

    coefs = np.empty((p, 4))
    failures = {}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        if n_jobs == 1:
            results = []
            for j in range(p):
                try:
                    results.append(one(j))
                except MirrorFitError as exc:
                    failures[j] = exc
                    results.append(None)
        else:
            with ThreadPoolExecutor(max_workers=n_jobs) as pool:
                futures = [pool.submit(one, j) for j in range(p)]
                results = []
                for j, fut in enumerate(futures):
                    try:
                        results.append(fut.result())
                    except MirrorFitError as exc:
                        failures[j] = exc
                        results.append(None)
    if failures:
        first = next(iter(failures.values()))
        raise MirrorFitError(first.feature, first.copy,
                             f"{len(failures)} feature(s) failed; first: {first.cause}")
    nonconv = sum(1 for w in caught if issubclass(w.category, ConvergenceWarning))
    if nonconv:
        warnings.warn(f"{nonconv} mirror fit(s) hit the iteration cap", ConvergenceWarning)
    for j, r in enumerate(results):
        coefs[j] = r
    seeds = tuple((int(master_seed), j) for j in range(p))
    return FeatureMirrorScores.from_coefficients(coefs, seeds, kind)
