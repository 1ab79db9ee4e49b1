"""Command-line entry point: ``bgm select | simulate | report``.

Settings are resolved as built-in defaults, then ``--config`` (a JSON
object keyed by long option names, dashes or underscores), then explicit
command-line flags.

Exit codes: 0 success, 2 configuration or parse error, 3 solver
failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import io
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import BgmError, ConfigError, ParseError, SolverError
from .glm import LambdaRule, as_family, standardize_columns
from .io import DatasetFile, ResultRecord, atomic_write, load_dataset, write_report
from .selector import self_guiding_select
from .simulation import PRESETS, preset, run_replicates

log = logging.getLogger("bgm")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4

SUMMARY_COLUMNS = ("preset", "family", "n", "p", "s", "delta", "rho", "q", "method",
                   "mean_fdp", "sd_fdp", "mean_power", "sd_power", "replicates", "failures")
DETAIL_COLUMNS = ("preset", "delta", "rho", "method", "replicate_id", "fdp", "power",
                  "n_selected", "tau", "kappa_max", "error")

DEFAULTS = {
    "select": dict(family="linear", q=0.1, kappa="1:10", lam="cv", seed=0, out=None,
                   delimiter=",", no_header=False, response=None, response_col=None,
                   data=None, jobs=1, cv_folds=10, cv_grid=50, cv_ratio=0.01),
    "simulate": dict(preset="linear-desk", delta=None, rho=None, reps=None, seed=0,
                     method="bgm", out=None, detail=None, n=None, p=None, s=None, q=0.1,
                     kappa="1:10"),
    "report": dict(input=None, format="csv", out=None),
}


def parse_kappa_grid(text):
    """'1:10' -> 1..10, '1:10:2' -> 1,3,..,9, '1,2,5' -> [1, 2, 5]."""
    if isinstance(text, (list, tuple)):
        grid = [float(k) for k in text]
    else:
        text = str(text).strip()
        try:
            if ":" in text:
                parts = [float(v) for v in text.split(":")]
                if len(parts) not in (2, 3):
                    raise ValueError
                lo, hi = parts[:2]
                step = parts[2] if len(parts) == 3 else 1.0
                if step <= 0:
                    raise ValueError
                grid = list(np.arange(lo, hi + step / 2, step).round(12))
            else:
                grid = [float(v) for v in text.split(",")]
        except ValueError:
            raise ConfigError(f"cannot parse kappa grid {text!r}") from None
    if not grid or min(grid) < 1 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("kappa grid must be non-empty, strictly increasing and >= 1")
    return [float(k) for k in grid]


def parse_float_list(text, name):
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse {name} list {text!r}") from None


def parse_lambda(text, folds=10, grid=50, ratio=0.01, seed=0):
    if str(text).lower() == "cv":
        try:
            return LambdaRule.cross_validated(int(folds), int(grid), float(ratio), int(seed))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    try:
        return LambdaRule.fixed(float(text))
    except ValueError:
        raise ConfigError(f"--lambda must be 'cv' or a nonnegative number, got {text!r}") from None


def _check_q(q):
    q = float(q)
    if not 0 < q < 1:
        raise ConfigError(f"q must lie in (0, 1), got {q}")
    return q


@dataclass
class RunConfig:
    command: str
    family: str = "linear"
    q: float = 0.1
    kappa_grid: list = field(default_factory=lambda: [float(k) for k in range(1, 11)])
    seed: int = 0
    lambda_rule: LambdaRule = field(default_factory=LambdaRule)
    out: str = None
    fmt: str = "json"
    dataset: DatasetFile = None
    jobs: int = 1

    def __post_init__(self):
        if self.command not in ("select", "simulate", "report"):
            raise ConfigError(f"unknown command {self.command!r}")
        self.q = _check_q(self.q)
        self.kappa_grid = parse_kappa_grid(self.kappa_grid)
        try:
            self.family = as_family(self.family).value
        except ValueError:
            raise ConfigError(f"family must be 'linear' or 'logistic', got {self.family!r}") from None
        if self.fmt not in ("json", "csv"):
            raise ConfigError(f"unknown format {self.fmt!r}")


def _rule_dict(rule: LambdaRule):
    if rule.mode == "fixed":
        return {"mode": "fixed", "value": rule.value}
    return {"mode": "cv", "folds": rule.folds, "grid_size": rule.grid_size,
            "grid_ratio": rule.grid_ratio, "seed": rule.seed}


def run_select(config: RunConfig) -> ResultRecord:
    started = datetime.datetime.now(datetime.timezone.utc)
    t0 = time.perf_counter()
    raw, y, names = load_dataset(config.dataset, config.family)
    design = standardize_columns(raw)
    if config.family == "linear":
        y = y - y.mean()
    sel = self_guiding_select(design, y, config.family, config.kappa_grid, config.q,
                              master_seed=config.seed, lambda_rule=config.lambda_rule,
                              n_jobs=config.jobs)
    best = sel.best
    original, _ = design.to_original_scale(sel.beta_hat)
    chosen = set(sel.final_selected)
    features = []
    for j in range(design.p):
        features.append({
            "index": j + 1,
            "name": names[j],
            "beta_hat": float(sel.beta_hat[j]),
            "beta_hat_original": float(original[j]),
            "w1": float(sel.scores.w1[j]),
            "w2": float(sel.scores.w2[j]),
            "gamma": float(best.stats.gamma[j]),
            "m_hat": float(best.stats.m_hat[j]),
            "selected": j in chosen,
        })
    path = [{"kappa": r.kappa, "tau": None if not math.isfinite(r.tau) else r.tau,
             "size": r.size} for r in sel.records]
    return ResultRecord(
        family=config.family, q=config.q, kappa_grid=config.kappa_grid, seed=config.seed,
        lambda_rule=_rule_dict(config.lambda_rule), lam=sel.lam, kappa_max=sel.kappa_max,
        tau=sel.tau, n=design.n, p=design.p,
        selected=[j + 1 for j in sel.final_selected],
        selected_names=[names[j] for j in sel.final_selected],
        kappa_path=path, features=features, software_version=__version__,
        timestamp={"started": started.isoformat(),
                   "elapsed_seconds": round(time.perf_counter() - t0, 3)},
    )


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def simulate_rows(preset_name, deltas, rhos, method, reps, seed, overrides, progress=None):
    """Summary and detail rows for every (delta, rho) point and method."""
    summary, detail = [], []
    for delta in deltas:
        for rho in rhos:
            kw = dict(overrides, delta=delta, rho=rho, master_seed=seed)
            if reps is not None:
                kw["replicates"] = reps
            scenario = preset(preset_name, **kw)
            outcomes, summaries = run_replicates(scenario, method, progress=progress)
            for m, summ in summaries.items():
                summary.append({
                    "preset": preset_name, "family": scenario.family.value, "n": scenario.n,
                    "p": scenario.p, "s": scenario.s, "delta": delta, "rho": rho,
                    "q": scenario.q, "method": m, "mean_fdp": summ.mean_fdp,
                    "sd_fdp": summ.sd_fdp, "mean_power": summ.mean_power,
                    "sd_power": summ.sd_power, "replicates": summ.replicates,
                    "failures": summ.failures,
                })
            for o in outcomes:
                detail.append({
                    "preset": preset_name, "delta": delta, "rho": rho, "method": o.method,
                    "replicate_id": o.replicate_id, "fdp": o.fdp, "power": o.power,
                    "n_selected": len(o.selected), "tau": o.tau, "kappa_max": o.kappa_max,
                    "error": o.error or "",
                })
    return summary, detail


def rows_to_csv(rows, columns):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def build_parser():
    parser = argparse.ArgumentParser(prog="bgm", description="FDR-controlled variable selection "
                                     "with self-guiding bi-Gaussian mirrors.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    p = sub.add_parser("select", help="select features from a CSV dataset")
    p.add_argument("--config", help="JSON file with option values")
    p.add_argument("--data", default=S, help="covariate CSV file")
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--response", default=S, help="separate one-column response CSV")
    grp.add_argument("--response-col", default=S,
                     help="response column name or 1-based index (default: last column)")
    p.add_argument("--family", default=S, choices=["linear", "logistic"])
    p.add_argument("--q", type=float, default=S, help="target FDR level (default 0.1)")
    p.add_argument("--kappa", default=S, help="kappa grid, e.g. 1:10 or 1,2,4 (default 1:10)")
    p.add_argument("--lambda", dest="lam", default=S, help="'cv' or a fixed penalty")
    p.add_argument("--cv-folds", type=int, default=S)
    p.add_argument("--cv-grid", type=int, default=S)
    p.add_argument("--cv-ratio", type=float, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--delimiter", default=S)
    p.add_argument("--no-header", action="store_true", default=S)
    p.add_argument("--jobs", type=int, default=S, help="threads for the mirror fits")
    p.add_argument("--out", default=S, help="result JSON path (default: stdout)")

    p = sub.add_parser("simulate", help="run the simulation design and summarize FDP/power")
    p.add_argument("--config", help="JSON file with option values")
    p.add_argument("--preset", default=S, choices=sorted(PRESETS))
    p.add_argument("--delta", default=S, help="comma-separated signal amplitudes")
    p.add_argument("--rho", default=S, help="comma-separated correlation factors")
    p.add_argument("--reps", type=int, default=S)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--p", type=int, default=S)
    p.add_argument("--s", type=int, default=S)
    p.add_argument("--q", type=float, default=S)
    p.add_argument("--kappa", default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--method", default=S, choices=["bgm", "baseline", "both"])
    p.add_argument("--detail", default=S, help="optional per-replicate CSV path")
    p.add_argument("--out", default=S, help="summary CSV path (default: stdout)")

    p = sub.add_parser("report", help="render a saved result as CSV or JSON")
    p.add_argument("--config", help="JSON file with option values")
    p.add_argument("--in", dest="input", default=S)
    p.add_argument("--format", default=S)
    p.add_argument("--out", default=S, help="output path (default: stdout)")
    return parser


def resolve_options(args):
    """Defaults, then the config file, then explicit flags."""
    opts = dict(DEFAULTS[args.command])
    if args.config:
        with open(args.config) as fh:
            try:
                cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{args.config}: {exc.msg}", exc.lineno, exc.colno) from None
        if not isinstance(cfg, dict):
            raise ConfigError("config file must contain a JSON object")
        for key, value in cfg.items():
            key = key.replace("-", "_")
            key = {"lambda": "lam", "in": "input"}.get(key, key)
            if key not in opts:
                raise ConfigError(f"unknown config key {key!r} for {args.command}")
            opts[key] = value
    for key, value in vars(args).items():
        if key in opts:
            opts[key] = value
    return opts


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write(out, text)


def _response_column(value):
    """User-facing column numbers are 1-based; DatasetFile takes 0-based ones."""
    if value is None or (isinstance(value, str) and not value.strip().isdigit()):
        return value
    k = int(value)
    if k < 1:
        raise ConfigError(f"--response-col numbers start at 1, got {k}")
    return k - 1


def cmd_select(o):
    if not o["data"]:
        raise ConfigError("--data is required")
    q = _check_q(o["q"])
    rule = parse_lambda(o["lam"], o["cv_folds"], o["cv_grid"], o["cv_ratio"], o["seed"])
    dataset = DatasetFile(o["data"], o["delimiter"], not o["no_header"],
                          _response_column(o["response_col"]), o["response"])
    config = RunConfig("select", o["family"], q, o["kappa"], int(o["seed"]), rule,
                       o["out"], "json", dataset, int(o["jobs"]))
    record = run_select(config)
    _emit(record.to_json(), o["out"])
    log.info("selected %d of %d features", len(record.selected), record.p)


def cmd_simulate(o):
    q = _check_q(o["q"])
    base = PRESETS.get(o["preset"])
    if base is None:
        raise ConfigError(f"unknown preset {o['preset']!r}")
    deltas = parse_float_list(o["delta"] if o["delta"] is not None else base["delta"], "delta")
    rhos = parse_float_list(o["rho"] if o["rho"] is not None else base["rho"], "rho")
    overrides = {k: int(o[k]) for k in ("n", "p", "s") if o[k] is not None}
    overrides["q"] = q
    overrides["kappa_grid"] = tuple(parse_kappa_grid(o["kappa"]))
    reps = None if o["reps"] is None else int(o["reps"])
    summary, detail = simulate_rows(o["preset"], deltas, rhos, o["method"], reps,
                                    int(o["seed"]), overrides,
                                    progress=lambda r: log.debug("replicate %d done", r))
    if o["detail"]:
        atomic_write(o["detail"], rows_to_csv(detail, DETAIL_COLUMNS))
    _emit(rows_to_csv(summary, SUMMARY_COLUMNS), o["out"])


def cmd_report(o):
    if not o["input"]:
        raise ConfigError("--in is required")
    if o["format"] not in ("json", "csv"):
        raise ConfigError(f"unknown format {o['format']!r}; use 'json' or 'csv'")
    with open(o["input"]) as fh:
        record = ResultRecord.from_json(fh.read())
    if o["out"] is None:
        from .io import feature_table_csv
        sys.stdout.write(record.to_json() if o["format"] == "json" else feature_table_csv(record))
    else:
        write_report(record, o["out"], o["format"])


COMMANDS = {"select": cmd_select, "simulate": cmd_simulate, "report": cmd_report}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](resolve_options(args))
    except (ConfigError, ParseError) as exc:
        print(f"bgm: [{exc.origin}] {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"bgm: [{exc.origin}] solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except BgmError as exc:
        print(f"bgm: [{exc.origin}] {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, TypeError) as exc:
        print(f"bgm: [config] {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"bgm: [io] {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
