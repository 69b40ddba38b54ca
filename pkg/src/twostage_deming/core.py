"""Domain types, CSV ingestion and weight incorporation."""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence, TextIO, Union

import numpy as np

from .errors import InsufficientDataError, ParseError, ValidationError

SCENARIOS = ("A", "B", "C")
WLS = "WLS"

SECOND_STAGE_COLUMNS = ("x", "y", "var_x", "var_y")
FIRST_STAGE_COLUMNS = ("z", "w", "var_z", "var_w")

MIN_OBSERVATIONS = 3


@dataclass(frozen=True)
class FirstStageRecord:
    """Raw-scale pair (z, w) with the variances of their first-stage errors."""

    z: float
    w: float
    var_z: float
    var_w: float
    weight: float = 1.0

    def __post_init__(self):
        _check_row(self.z, self.w, self.var_z, self.var_w, self.weight)


@dataclass(frozen=True)
class Observation:
    """Second-stage (transformed) pair with error variances."""

    x: float
    y: float
    var_x: float
    var_y: float
    weight: float = 1.0

    def __post_init__(self):
        _check_row(self.x, self.y, self.var_x, self.var_y, self.weight)


def _check_row(a, b, va, vb, weight, row=None):
    for v in (a, b, va, vb, weight):
        if not math.isfinite(v):
            raise ValidationError("non-finite value", row)
    if va < 0 or vb < 0:
        raise ValidationError("negative variance", row)
    if weight <= 0:
        raise ValidationError("weight must be positive", row)


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered, immutable collection of observations stored column-wise.

    Columns are read-only float arrays so a dataset can be shared freely
    between fits and bootstrap workers.
    """

    x: np.ndarray
    y: np.ndarray
    var_x: np.ndarray
    var_y: np.ndarray
    weight: np.ndarray = None

    def __post_init__(self):
        x = _frozen(self.x)
        n = x.shape[0]
        cols = {"x": x}
        for name in ("y", "var_x", "var_y"):
            cols[name] = _frozen(getattr(self, name))
        w = np.ones(n) if self.weight is None else self.weight
        cols["weight"] = _frozen(w)
        for name, col in cols.items():
            if col.ndim != 1 or col.shape[0] != n:
                raise ValidationError(f"column {name!r} has the wrong shape")
            object.__setattr__(self, name, col)
        bad = ~np.isfinite(np.column_stack(list(cols.values()))).all(axis=1)
        if bad.any():
            raise ValidationError("non-finite value", int(np.argmax(bad)) + 1)
        for name in ("var_x", "var_y"):
            neg = cols[name] < 0
            if neg.any():
                raise ValidationError(f"negative {name}", int(np.argmax(neg)) + 1)
        nonpos = cols["weight"] <= 0
        if nonpos.any():
            raise ValidationError("weight must be positive", int(np.argmax(nonpos)) + 1)

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    def __len__(self):
        return self.n

    @property
    def observations(self) -> list[Observation]:
        return [
            Observation(*map(float, row))
            for row in zip(self.x, self.y, self.var_x, self.var_y, self.weight)
        ]

    @classmethod
    def from_observations(cls, observations: Iterable[Observation]) -> "Dataset":
        obs = list(observations)
        return cls(
            x=[o.x for o in obs],
            y=[o.y for o in obs],
            var_x=[o.var_x for o in obs],
            var_y=[o.var_y for o in obs],
            weight=[o.weight for o in obs],
        )

    @property
    def eff_var_x(self) -> np.ndarray:
        """Variance of x after dividing by the row weight."""
        return self.var_x / self.weight

    @property
    def eff_var_y(self) -> np.ndarray:
        return self.var_y / self.weight

    def take(self, index) -> "Dataset":
        index = np.asarray(index)
        return Dataset(
            self.x[index], self.y[index], self.var_x[index], self.var_y[index], self.weight[index]
        )

    def with_variances(self, var_x=None, var_y=None) -> "Dataset":
        return Dataset(
            self.x,
            self.y,
            self.var_x if var_x is None else np.broadcast_to(var_x, self.x.shape),
            self.var_y if var_y is None else np.broadcast_to(var_y, self.x.shape),
            self.weight,
        )

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for col in (self.x, self.y, self.var_x, self.var_y, self.weight):
            h.update(np.ascontiguousarray(col, dtype="<f8").tobytes())
        return h.hexdigest()[:16]

    def to_csv(self, dest: Optional[TextIO] = None) -> str:
        """Write the dataset in the second-stage CSV schema.

        Floats are written with ``repr`` so that re-parsing is exact.
        """
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([*SECOND_STAGE_COLUMNS, "weight"])
        for row in zip(self.x, self.y, self.var_x, self.var_y, self.weight):
            writer.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if dest is not None:
            dest.write(text)
        return text


def require_min_size(dataset: Dataset, minimum: int = MIN_OBSERVATIONS):
    if dataset.n < minimum:
        raise InsufficientDataError(
            f"at least {minimum} observations are required, got {dataset.n}"
        )


@dataclass(frozen=True, eq=False)
class DemingFit:
    """Result of any straight-line estimator in this package.

    ``lam`` is the error-variance ratio Var(x error) / Var(y error) for the
    unknown (non first-stage) error components. ``scenario`` is one of
    ``"A"``, ``"B"``, ``"C"`` or ``"WLS"`` for the least-squares baseline.
    """

    beta0: float
    beta1: float
    sigma2: float = 0.0
    lam: float = 1.0
    cov_params: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))
    loglik: Optional[float] = None
    residual_sd: float = 0.0
    scenario: str = "A"
    n_iterations: int = 0
    converged: bool = True
    cov_method: Optional[str] = None
    boundary: bool = False
    n: int = 0
    fingerprint: Optional[str] = None

    def __post_init__(self):
        cov = _frozen(self.cov_params).reshape(2, 2)
        object.__setattr__(self, "cov_params", cov)

    def predict(self, x):
        return self.beta0 + self.beta1 * np.asarray(x, dtype=float)

    def with_cov(self, cov_params, method: str) -> "DemingFit":
        return replace(self, cov_params=np.asarray(cov_params, dtype=float), cov_method=method)

    def to_dict(self) -> dict:
        return {
            "beta0": float(self.beta0),
            "beta1": float(self.beta1),
            "sigma2": float(self.sigma2),
            "lambda": float(self.lam),
            "cov_params": [float(v) for v in self.cov_params.ravel()],
            "loglik": None if self.loglik is None else float(self.loglik),
            "residual_sd": float(self.residual_sd),
            "scenario": self.scenario,
            "n_iterations": int(self.n_iterations),
            "converged": bool(self.converged),
            "cov_method": self.cov_method,
            "boundary": bool(self.boundary),
            "n": int(self.n),
            "fingerprint": self.fingerprint,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "DemingFit":
        try:
            return cls(
                beta0=float(d["beta0"]),
                beta1=float(d["beta1"]),
                sigma2=float(d.get("sigma2", 0.0)),
                lam=float(d.get("lambda", 1.0)),
                cov_params=np.asarray(d.get("cov_params", [0.0] * 4), dtype=float),
                loglik=None if d.get("loglik") is None else float(d["loglik"]),
                residual_sd=float(d.get("residual_sd", 0.0)),
                scenario=str(d.get("scenario", "A")),
                n_iterations=int(d.get("n_iterations", 0)),
                converged=bool(d.get("converged", True)),
                cov_method=d.get("cov_method"),
                boundary=bool(d.get("boundary", False)),
                n=int(d.get("n", 0)),
                fingerprint=d.get("fingerprint"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"invalid fit artifact: {exc}") from exc


@dataclass(frozen=True, eq=False)
class TrueValueEstimates:
    X_hat: np.ndarray
    Y_hat: np.ndarray
    d: np.ndarray


@dataclass(frozen=True)
class SimpleDemingSummary:
    u: float
    q: float
    p: float
    x_bar: float
    y_bar: float


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

Source = Union[str, os.PathLike, TextIO]


def _open_text(source: Source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8")
    return source


def _read_table(source: Source, required: Sequence[str], optional: Sequence[str], schema):
    schema = dict(schema or {})
    fh = _open_text(source)
    try:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty input: header row missing") from None
        colmap = {}
        for name in (*required, *optional):
            col = schema.get(name, name)
            if col in header:
                colmap[name] = header.index(col)
            elif name in required:
                raise ParseError(f"missing required column {col!r}", row=1)
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            values = {}
            for name, idx in colmap.items():
                try:
                    cell = raw[idx].strip()
                    values[name] = float(cell)
                except (IndexError, ValueError):
                    raise ParseError("malformed number", row=lineno, column=schema.get(name, name)) from None
            rows.append((lineno, values))
    finally:
        if fh is not source:
            fh.close()
    return header, rows


def _columns(rows, names, defaults):
    out = {name: [] for name in names}
    for lineno, values in rows:
        for name in names:
            out[name].append(values.get(name, defaults.get(name)))
    return out


def _validate_rows(rows, a, b, va, vb):
    for lineno, v in rows:
        weight = v.get("weight", 1.0)
        _check_row(v[a], v[b], v[va], v[vb], weight, row=lineno)


def parse_dataset(source: Source, schema: Optional[Mapping[str, str]] = None) -> Dataset:
    """Read a second-stage CSV (``x,y,var_x,var_y[,weight]``).

    ``schema`` optionally maps canonical column names onto header names in the
    file, e.g. ``{"x": "log_bleed"}``. Rows are kept in file order; a missing
    weight column means every weight is 1.
    """
    _, rows = _read_table(source, SECOND_STAGE_COLUMNS, ("weight",), schema)
    _validate_rows(rows, *SECOND_STAGE_COLUMNS)
    if len(rows) < MIN_OBSERVATIONS:
        raise InsufficientDataError(
            f"at least {MIN_OBSERVATIONS} data rows are required, got {len(rows)}"
        )
    cols = _columns(rows, (*SECOND_STAGE_COLUMNS, "weight"), {"weight": 1.0})
    return Dataset(**cols)


def parse_first_stage(source: Source, schema: Optional[Mapping[str, str]] = None) -> list[FirstStageRecord]:
    """Read a raw-scale CSV (``z,w,var_z,var_w[,weight]``)."""
    _, rows = _read_table(source, FIRST_STAGE_COLUMNS, ("weight",), schema)
    _validate_rows(rows, *FIRST_STAGE_COLUMNS)
    if len(rows) < MIN_OBSERVATIONS:
        raise InsufficientDataError(
            f"at least {MIN_OBSERVATIONS} data rows are required, got {len(rows)}"
        )
    return [
        FirstStageRecord(v["z"], v["w"], v["var_z"], v["var_w"], v.get("weight", 1.0))
        for _, v in rows
    ]


def sniff_schema(source: Source) -> str:
    """Return ``"first_stage"`` or ``"second_stage"`` from the header row."""
    fh = _open_text(source)
    try:
        header = next(csv.reader(fh), [])
    finally:
        if fh is not source:
            fh.close()
    header = {h.strip() for h in header}
    if set(FIRST_STAGE_COLUMNS) <= header:
        return "first_stage"
    if set(SECOND_STAGE_COLUMNS) <= header:
        return "second_stage"
    raise ParseError(
        "header must contain either x,y,var_x,var_y or z,w,var_z,var_w", row=1
    )


def apply_weights(dataset: Dataset) -> Dataset:
    """Fold weights into the variances: var <- var / weight, weight <- 1."""
    if np.any(dataset.weight <= 0):
        raise ValidationError("weight must be positive")
    if np.all(dataset.weight == 1.0):
        return dataset
    return Dataset(
        dataset.x,
        dataset.y,
        dataset.eff_var_x,
        dataset.eff_var_y,
        np.ones(dataset.n),
    )
