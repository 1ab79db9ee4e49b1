"""Dataset ingestion, result records and report writers."""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadResponseValues, ConfigError, ParseError, RaggedRows

SCHEMA_VERSION = 1

# top-level keys of the JSON result, in emission order
RESULT_FIELDS = (
    "schema_version",
    "software_version",
    "family",
    "q",
    "kappa_grid",
    "seed",
    "lambda_rule",
    "lambda",
    "kappa_max",
    "tau",
    "n",
    "p",
    "selected",
    "selected_names",
    "kappa_path",
    "features",
    "timestamp",
)

FEATURE_FIELDS = (
    "index",
    "name",
    "beta_hat",
    "beta_hat_original",
    "w1",
    "w2",
    "gamma",
    "m_hat",
    "selected",
)


@dataclass(frozen=True)
class DatasetFile:
    path: str
    delimiter: str = ","
    has_header: bool = True
    response_column: object = None  # name or 0-based index
    response_path: str = None


def _read_rows(path, delimiter):
    try:
        with open(path, newline="") as fh:
            return list(csv.reader(fh, delimiter=delimiter))
    except OSError:
        raise
    except csv.Error as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _parse_matrix(rows, path, first_line):
    width = len(rows[0]) if rows else 0
    out = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        line = first_line + i
        if len(row) != width or any(cell.strip() == "" for cell in row):
            raise RaggedRows(f"{path}: expected {width} non-empty fields, got a short row", line)
        for k, cell in enumerate(row):
            try:
                out[i, k] = float(cell)
            except ValueError:
                raise ParseError(f"{path}: cannot parse {cell!r} as a number", line, k + 1) from None
    if not np.all(np.isfinite(out)):
        raise ParseError(f"{path}: non-finite values present")
    return out


def load_dataset(spec: DatasetFile, family="linear"):
    """Returns ``(raw matrix, response, column names)``."""
    rows = [r for r in _read_rows(spec.path, spec.delimiter) if r]
    if not rows:
        raise ParseError(f"{spec.path}: empty file")
    first_line = 1
    if spec.has_header:
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
        first_line = 2
    else:
        names = [f"x{k + 1}" for k in range(len(rows[0]))]
    if not rows:
        raise ParseError(f"{spec.path}: no data rows")
    data = _parse_matrix(rows, spec.path, first_line)
    if data.shape[1] != len(names):
        raise RaggedRows(f"{spec.path}: header has {len(names)} fields, data has {data.shape[1]}", 1)

    if spec.response_path is not None:
        if spec.response_column is not None:
            raise ConfigError("give either a response column or a response file, not both")
        resp_rows = [r for r in _read_rows(spec.response_path, spec.delimiter) if r]
        try:
            float(resp_rows[0][0])
            start = 1
        except (ValueError, IndexError):
            resp_rows = resp_rows[1:]
            start = 2
        y = _parse_matrix(resp_rows, spec.response_path, start)
        if y.shape[1] != 1:
            raise ParseError(f"{spec.response_path}: response file must have one column")
        y = y[:, 0]
        if y.shape[0] != data.shape[0]:
            raise RaggedRows(f"response has {y.shape[0]} rows, data has {data.shape[0]}")
        x = data
    else:
        col = spec.response_column
        if col is None:
            col = data.shape[1] - 1
        elif isinstance(col, str) and not col.lstrip("-").isdigit():
            if col not in names:
                raise ConfigError(f"response column {col!r} not in header")
            col = names.index(col)
        col = int(col)
        if not -data.shape[1] <= col < data.shape[1]:
            raise ConfigError(f"response column {col} out of range")
        col %= data.shape[1]
        y = data[:, col]
        x = np.delete(data, col, axis=1)
        names = names[:col] + names[col + 1:]
    if x.shape[1] == 0:
        raise ParseError(f"{spec.path}: no covariate columns")
    if str(family) in ("logistic", "GlmFamily.LOGISTIC") or getattr(family, "value", None) == "logistic":
        bad = np.flatnonzero((y != 0) & (y != 1))
        if bad.size:
            raise BadResponseValues(
                f"logistic response must be 0/1, found {y[bad[0]]:g}", int(bad[0]) + first_line)
    return x, y, names


def _num(v):
    """JSON-safe float: non-finite values become null."""
    v = float(v)
    return v if math.isfinite(v) else None


@dataclass
class ResultRecord:
    """Serializable outcome of one selection run (1-based feature indices)."""

    family: str
    q: float
    kappa_grid: list
    seed: int
    lambda_rule: dict
    lam: float
    kappa_max: float
    tau: float
    n: int
    p: int
    selected: list
    selected_names: list
    kappa_path: list
    features: list
    software_version: str = ""
    timestamp: dict = field(default_factory=dict)

    def to_dict(self):
        d = {
            "schema_version": SCHEMA_VERSION,
            "software_version": self.software_version,
            "family": self.family,
            "q": self.q,
            "kappa_grid": list(self.kappa_grid),
            "seed": self.seed,
            "lambda_rule": self.lambda_rule,
            "lambda": self.lam,
            "kappa_max": self.kappa_max,
            "tau": _num(self.tau),
            "n": self.n,
            "p": self.p,
            "selected": list(self.selected),
            "selected_names": list(self.selected_names),
            "kappa_path": self.kappa_path,
            "features": self.features,
            "timestamp": self.timestamp,
        }
        assert tuple(d) == RESULT_FIELDS
        return d

    @classmethod
    def from_dict(cls, d):
        missing = set(RESULT_FIELDS) - set(d)
        if missing:
            raise ParseError(f"result record missing fields: {sorted(missing)}")
        if d["schema_version"] != SCHEMA_VERSION:
            raise ParseError(f"unsupported schema version {d['schema_version']}")
        tau = d["tau"]
        return cls(
            family=d["family"], q=d["q"], kappa_grid=d["kappa_grid"], seed=d["seed"],
            lambda_rule=d["lambda_rule"], lam=d["lambda"], kappa_max=d["kappa_max"],
            tau=math.inf if tau is None else tau, n=d["n"], p=d["p"],
            selected=d["selected"], selected_names=d["selected_names"],
            kappa_path=d["kappa_path"], features=d["features"],
            software_version=d["software_version"], timestamp=d["timestamp"],
        )

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text):
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from exc


def atomic_write(path, text):
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def feature_table_csv(record: ResultRecord):
    import io as _io

    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FEATURE_FIELDS)
    for f in record.features:
        writer.writerow([_csv_cell(f[k]) for k in FEATURE_FIELDS])
    return buf.getvalue()


def _csv_cell(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def write_report(record: ResultRecord, path, fmt="json"):
    if fmt == "json":
        text = record.to_json()
    elif fmt == "csv":
        text = feature_table_csv(record)
    else:
        raise ConfigError(f"unknown report format {fmt!r}; use 'json' or 'csv'")
    atomic_write(path, text)
    return path
