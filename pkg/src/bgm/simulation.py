"""
Simulation harness: block-Toeplitz Gaussian covariates, sparse linear
and logistic signals, and replicate-level FDP / power evaluation.

Every replicate draws from its own seed substream keyed by
(master_seed, replicate_id), so outcomes do not depend on which other
replicates were run or in which order.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.linalg import toeplitz

from .errors import BgmError, IndexOutOfRange, InvalidSpec, NotPSD
from .glm import GlmFamily, LambdaRule, as_family, fit_lasso, select_lambda, standardize_columns
from .mirrors import compute_all_scores
from .selector import DEFAULT_KAPPA_GRID, select_from_scores

log = logging.getLogger(__name__)

N_BLOCKS = 10
_REPLICATE_STREAM = 0x73696D
_X, _BETA, _Y, _CV, _MIRROR = range(5)


@dataclass(frozen=True)
class BlockToeplitzSpec:
    p: int
    rho: float

    def __post_init__(self):
        if self.p <= 0 or self.p % N_BLOCKS:
            raise InvalidSpec(f"p must be a positive multiple of {N_BLOCKS}, got {self.p}")
        if self.block_size < 2:
            raise InvalidSpec("block size p/10 must be at least 2")
        if not 0 < self.rho < 1:
            raise InvalidSpec(f"rho must lie in (0, 1), got {self.rho}")

    @property
    def block_size(self):
        return self.p // N_BLOCKS


def toeplitz_block(block_size, rho):
    """Unit diagonal, entry (a, b) = (p' - |a-b| - 1) * rho / (p' - 1) off it."""
    k = np.arange(block_size)
    first = (block_size - k - 1) * rho / (block_size - 1)
    first[0] = 1.0
    return toeplitz(first)


def build_block_toeplitz(spec: BlockToeplitzSpec) -> np.ndarray:
    block = toeplitz_block(spec.block_size, spec.rho)
    return np.kron(np.eye(N_BLOCKS), block)


def cholesky_factor(cov):
    cov = np.asarray(cov, dtype=float)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    try:
        return np.linalg.cholesky(cov + 1e-10 * np.eye(cov.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise NotPSD("covariance is not positive semidefinite") from exc


def sample_mvn(cov, n, seed) -> np.ndarray:
    """n rows i.i.d. N(0, cov) as Z @ L' with L the Cholesky factor."""
    chol = cholesky_factor(cov)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = rng.standard_normal((n, chol.shape[0]))
    return z @ chol.T


@dataclass(frozen=True)
class GroundTruth:
    h1_indices: tuple
    beta: np.ndarray

    @property
    def p(self):
        return self.beta.shape[0]


def signal_floor(delta, p, n):
    return delta * math.sqrt(math.log(p) / n)


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _support(p, s, rng):
    if not 0 <= s <= p:
        raise InvalidSpec(f"need 0 <= s <= p, got s={s}, p={p}")
    return np.sort(rng.choice(p, size=s, replace=False))


def gen_beta_linear(p, s, delta, n, seed) -> GroundTruth:
    """Non-null coefficients uniform on [floor, floor + 0.2], floor = delta*sqrt(log p / n)."""
    rng = _rng(seed)
    idx = _support(p, s, rng)
    lo = signal_floor(delta, p, n)
    beta = np.zeros(p)
    beta[idx] = rng.uniform(lo, lo + 0.2, size=s)
    return GroundTruth(tuple(int(j) for j in idx), beta)


def gen_beta_logistic(p, s, delta, n, seed) -> GroundTruth:
    rng = _rng(seed)
    idx = _support(p, s, rng)
    beta = np.zeros(p)
    beta[idx] = signal_floor(delta, p, n)
    return GroundTruth(tuple(int(j) for j in idx), beta)


def gen_response(design_rows, truth: GroundTruth, family, seed) -> np.ndarray:
    family = as_family(family)
    rng = _rng(seed)
    eta = np.asarray(design_rows, dtype=float) @ truth.beta
    if family is GlmFamily.LINEAR:
        return eta + rng.standard_normal(eta.shape[0])
    prob = family.mean(eta)
    return (rng.random(eta.shape[0]) < prob).astype(float)


def evaluate_fdp_power(selected, truth: GroundTruth):
    sel = set(int(j) for j in selected)
    if any(j < 0 or j >= truth.p for j in sel):
        raise IndexOutOfRange(f"selected indices must lie in 0..{truth.p - 1}")
    h1 = set(truth.h1_indices)
    fdp = len(sel - h1) / max(len(sel), 1)
    power = len(sel & h1) / max(len(h1), 1)
    return fdp, power


@dataclass(frozen=True)
class SimScenario:
    family: GlmFamily
    n: int
    p: int
    s: int
    delta: float
    rho: float
    q: float = 0.1
    replicates: int = 50
    master_seed: int = 0
    kappa_grid: tuple = DEFAULT_KAPPA_GRID
    lambda_rule: LambdaRule = field(default_factory=LambdaRule)

    def __post_init__(self):
        object.__setattr__(self, "family", as_family(self.family))
        BlockToeplitzSpec(self.p, self.rho)
        if not 0 <= self.s <= self.p:
            raise InvalidSpec("need 0 <= s <= p")
        if not 0 < self.q < 1:
            raise InvalidSpec("q must lie in (0, 1)")
        if self.replicates < 0:
            raise InvalidSpec("replicates must be nonnegative")

    def with_(self, **changes) -> "SimScenario":
        return replace(self, **changes)

    def params(self):
        d = asdict(self)
        d.pop("lambda_rule")
        d.pop("kappa_grid")
        d["family"] = self.family.value
        return d


PRESETS = {
    "linear-paper": dict(family="linear", n=400, p=1000, s=50, delta=3.0, rho=0.5, replicates=50),
    "linear-desk": dict(family="linear", n=300, p=300, s=30, delta=3.0, rho=0.5, replicates=30),
    "logistic-paper": dict(family="logistic", n=600, p=1000, s=20, delta=9.0, rho=0.2,
                           replicates=100),
    "logistic-desk": dict(family="logistic", n=400, p=200, s=10, delta=9.0, rho=0.2,
                          replicates=30),
}


def preset(name, **overrides) -> SimScenario:
    try:
        base = dict(PRESETS[name])
    except KeyError:
        raise InvalidSpec(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    base.update(overrides)
    return SimScenario(**base)


@dataclass
class ReplicateOutcome:
    replicate_id: int
    method: str
    selected: tuple
    fdp: float
    power: float
    tau: float
    kappa_max: float
    wall_time: float = field(default=0.0, compare=False)
    error: str = None

    @property
    def failed(self):
        return self.error is not None


@dataclass
class ReplicateData:
    x: object
    y: np.ndarray
    truth: GroundTruth
    mirror_seed: int
    cv_seed: int


def replicate_stream(master_seed, replicate_id, purpose):
    ss = np.random.SeedSequence(int(master_seed),
                                spawn_key=(_REPLICATE_STREAM, int(replicate_id), purpose))
    return np.random.default_rng(ss)


def replicate_data(scenario: SimScenario, replicate_id, chol=None) -> ReplicateData:
    """Covariates, truth and response for one replicate (standardized design)."""
    if chol is None:
        chol = cholesky_factor(build_block_toeplitz(BlockToeplitzSpec(scenario.p, scenario.rho)))
    z = replicate_stream(scenario.master_seed, replicate_id, _X).standard_normal(
        (scenario.n, scenario.p))
    raw = z @ chol.T
    gen = gen_beta_linear if scenario.family is GlmFamily.LINEAR else gen_beta_logistic
    truth = gen(scenario.p, scenario.s, scenario.delta, scenario.n,
                replicate_stream(scenario.master_seed, replicate_id, _BETA))
    y = gen_response(raw, truth, scenario.family,
                     replicate_stream(scenario.master_seed, replicate_id, _Y))
    x = standardize_columns(raw)
    seeds = replicate_stream(scenario.master_seed, replicate_id, _MIRROR).integers(0, 2**63, 2)
    return ReplicateData(x, y, truth, int(seeds[0]), int(seeds[1]))


METHODS = ("bgm", "symmetric_baseline")


def _normalize_methods(method):
    if isinstance(method, str):
        method = [method]
    aliases = {"baseline": "symmetric_baseline", "both": None}
    out = []
    for m in method:
        m = aliases.get(m, m)
        if m is None:
            out.extend(METHODS)
        elif m in METHODS:
            out.append(m)
        else:
            raise InvalidSpec(f"unknown method {m!r}")
    return list(dict.fromkeys(out))


def run_replicate(scenario: SimScenario, replicate_id, method="bgm", chol=None):
    """One replicate; several methods share the same fits and mirror scores."""
    methods = _normalize_methods(method)
    start = time.perf_counter()
    data = replicate_data(scenario, replicate_id, chol)
    rule = scenario.lambda_rule
    if rule.mode == "cv":
        rule = replace(rule, seed=data.cv_seed)
    lam = select_lambda(data.x, data.y, scenario.family, rule)
    initial = fit_lasso(data.x, data.y, scenario.family, lam)
    scores = compute_all_scores(data.x, data.y, scenario.family, lam, data.mirror_seed,
                                initial_beta=initial.coefficients)
    outcomes = []
    for m in methods:
        if m == "bgm":
            sel = select_from_scores(scores, initial.coefficients, scenario.kappa_grid, scenario.q)
        else:
            sel = select_from_scores(scores, np.zeros(scenario.p), [1.0], scenario.q)
        fdp, power = evaluate_fdp_power(sel.final_selected, data.truth)
        outcomes.append(ReplicateOutcome(replicate_id, m, sel.final_selected, fdp, power,
                                         sel.tau, sel.kappa_max))
    elapsed = time.perf_counter() - start
    for o in outcomes:
        o.wall_time = elapsed
    return outcomes


@dataclass
class Summary:
    method: str
    replicates: int
    failures: int
    mean_fdp: float = math.nan
    sd_fdp: float = math.nan
    mean_power: float = math.nan
    sd_power: float = math.nan

    @property
    def defined(self):
        return self.replicates > 0


def summarize(outcomes, method) -> Summary:
    rows = [o for o in sorted(outcomes, key=lambda o: o.replicate_id) if o.method == method]
    ok = [o for o in rows if not o.failed]
    summ = Summary(method, len(ok), len(rows) - len(ok))
    if ok:
        fdp = np.array([o.fdp for o in ok])
        power = np.array([o.power for o in ok])
        ddof = 1 if len(ok) > 1 else 0
        summ.mean_fdp = float(fdp.mean())
        summ.sd_fdp = float(fdp.std(ddof=ddof))
        summ.mean_power = float(power.mean())
        summ.sd_power = float(power.std(ddof=ddof))
    return summ


def run_replicates(scenario: SimScenario, method="bgm", replicate_ids=None, progress=None):
    """Run replicates and summarize per method.

    Returns ``(outcomes, summaries)`` where ``summaries`` maps method name
    to a ``Summary``. Failed replicates are recorded with ``error`` set
    and excluded from the summary.
    """
    methods = _normalize_methods(method)
    ids = range(scenario.replicates) if replicate_ids is None else replicate_ids
    chol = cholesky_factor(build_block_toeplitz(BlockToeplitzSpec(scenario.p, scenario.rho)))
    outcomes = []
    for rid in ids:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                outcomes.extend(run_replicate(scenario, rid, methods, chol))
        except BgmError as exc:
            log.warning("replicate %d failed: %s", rid, exc)
            for m in methods:
                outcomes.append(ReplicateOutcome(rid, m, (), math.nan, math.nan, math.nan,
                                                 math.nan, error=str(exc)))
        if progress is not None:
            progress(rid)
    return outcomes, {m: summarize(outcomes, m) for m in methods}
