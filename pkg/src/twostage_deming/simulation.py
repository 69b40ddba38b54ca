"""Synthetic data under the A/B/C error models and coverage studies."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import WLS, Dataset, FirstStageRecord
from .errors import DemingError, ValidationError
from .inference import bootstrap_fit, fit_estimator

X_LAWS = ("uniform", "normal")
VAR_LAWS = ("constant", "uniform", "proportional")
WEIGHT_LAWS = ("constant", "integers")
MAX_FAIL = 0.05


@dataclass(frozen=True)
class SimulationSpec:
    """Generative model for one synthetic dataset.

    Laws are small tuples: ``x_law`` is ``("uniform", a, b)`` or
    ``("normal", mu, s)``; variance laws are ``("constant", v)``,
    ``("uniform", lo, hi)`` or ``("proportional", c)`` (``c * |X|``);
    ``weight_law`` is ``("constant", w)`` or ``("integers", lo, hi)``.

    Known variances describe a single unit; the realised first-stage errors
    have variance ``var / weight``, the same rule the estimators apply.
    The extra errors are ``eps ~ N(0, sigma2)`` on x and
    ``delta ~ N(0, sigma2 / lam)`` on y.
    """

    n: int = 300
    beta0: float = 0.0
    beta1: float = 1.0
    x_law: tuple = ("uniform", 0.0, 4.0)
    var_x_law: tuple = ("constant", 0.1)
    var_y_law: tuple = ("constant", 0.1)
    sigma2: float = 0.0
    lam: float = 1.0
    weight_law: tuple = ("constant", 1.0)
    seed: int = 0

    def __post_init__(self):
        if self.n < 3:
            raise ValidationError("simulation needs n >= 3")
        if self.x_law[0] not in X_LAWS:
            raise ValidationError(f"unknown x law {self.x_law[0]!r}")
        for law in (self.var_x_law, self.var_y_law):
            if law[0] not in VAR_LAWS:
                raise ValidationError(f"unknown variance law {law[0]!r}")
            if any(p < 0 for p in law[1:]):
                raise ValidationError("variance law parameters must be non-negative")
        if self.weight_law[0] not in WEIGHT_LAWS:
            raise ValidationError(f"unknown weight law {self.weight_law[0]!r}")
        if any(p <= 0 for p in self.weight_law[1:]):
            raise ValidationError("weights must be positive")
        if self.sigma2 < 0:
            raise ValidationError("sigma2 must be non-negative")
        if not self.lam > 0:
            raise ValidationError("lambda must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("x_law", "var_x_law", "var_y_law", "weight_law"):
            d[k] = list(d[k])
        return d


@dataclass(frozen=True, eq=False)
class Truth:
    beta0: float
    beta1: float
    X: np.ndarray
    Y: np.ndarray


def _draw_var(law, X, rng, n):
    kind = law[0]
    if kind == "constant":
        return np.full(n, float(law[1]))
    if kind == "uniform":
        return rng.uniform(law[1], law[2], n)
    return float(law[1]) * np.abs(X)


def generate_dataset(spec: SimulationSpec):
    """Draw one dataset; returns ``(Dataset, Truth)``. Deterministic in ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    if spec.x_law[0] == "uniform":
        X = rng.uniform(spec.x_law[1], spec.x_law[2], n)
    else:
        X = rng.normal(spec.x_law[1], spec.x_law[2], n)
    Y = spec.beta0 + spec.beta1 * X
    var_x = _draw_var(spec.var_x_law, X, rng, n)
    var_y = _draw_var(spec.var_y_law, X, rng, n)
    if spec.weight_law[0] == "constant":
        weight = np.full(n, float(spec.weight_law[1]))
    else:
        weight = rng.integers(int(spec.weight_law[1]), int(spec.weight_law[2]) + 1, n).astype(float)
    e_x = rng.standard_normal(n) * np.sqrt(var_x / weight)
    e_y = rng.standard_normal(n) * np.sqrt(var_y / weight)
    eps = rng.standard_normal(n) * math.sqrt(spec.sigma2)
    delta = rng.standard_normal(n) * math.sqrt(spec.sigma2 / spec.lam)
    data = Dataset(X + e_x + eps, Y + e_y + delta, var_x, var_y, weight)
    return data, Truth(spec.beta0, spec.beta1, X, Y)


# ---------------------------------------------------------------------------
# Grouped-proportion first stage
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroupCount:
    k: int
    n_trials: int
    weight: float = 1.0

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValidationError("n_trials must be at least 1")
        if not 0 <= self.k <= self.n_trials:
            raise ValidationError(f"k={self.k} outside [0, n_trials={self.n_trials}]")
        if not self.weight > 0:
            raise ValidationError("weight must be positive")


@dataclass(frozen=True)
class ProportionEstimate:
    p: float
    var: float
    weight: float
    floored: bool


def estimate_group_proportions(groups: Sequence[GroupCount]) -> list[ProportionEstimate]:
    """Binomial estimate ``k/n`` with variance ``p(1-p)/n`` per group.

    Boundary proportions (0 or 1) would get a zero variance; they receive
    ``0.5 / n**2`` instead and are flagged.
    """
    out = []
    for g in groups:
        p = g.k / g.n_trials
        var = p * (1.0 - p) / g.n_trials
        floored = g.k in (0, g.n_trials)
        if floored:
            var = 0.5 / g.n_trials**2
        out.append(ProportionEstimate(p, var, g.weight, floored))
    return out


def first_stage_from_groups(groups_z: Sequence[GroupCount], groups_w: Sequence[GroupCount]) -> list[FirstStageRecord]:
    """Pair two per-group outcome counts into first-stage records.

    The record weight is taken from ``groups_z``; both lists must describe the
    same groups in the same order.
    """
    if len(groups_z) != len(groups_w):
        raise ValidationError("both outcome lists must cover the same groups")
    ez = estimate_group_proportions(groups_z)
    ew = estimate_group_proportions(groups_w)
    return [FirstStageRecord(a.p, b.p, a.var, b.var, a.weight) for a, b in zip(ez, ew)]


# ---------------------------------------------------------------------------
# Coverage studies
# ---------------------------------------------------------------------------


def _covers(ci, truth) -> bool:
    tol = 1e-9 * max(1.0, abs(truth))
    return ci[0] - tol <= truth <= ci[1] + tol


@dataclass(frozen=True, eq=False)
class CoverageReport:
    spec: SimulationSpec
    estimator: str
    M: int
    B: int
    level: float
    summary: dict  # estimator label -> metrics
    estimates: list = field(default_factory=list)  # per replicate rows

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "estimator": self.estimator,
            "M": self.M,
            "B": self.B,
            "level": self.level,
            "summary": self.summary,
        }


ESTIMATE_COLUMNS = (
    "replicate", "method", "beta0", "beta1", "ci_beta0_lo", "ci_beta0_hi",
    "ci_beta1_lo", "ci_beta1_hi", "covers_beta0", "covers_beta1",
)


def run_coverage_study(
    spec: SimulationSpec,
    estimator: str = "B",
    *,
    M: int = 200,
    B: int = 200,
    level: float = 0.95,
    include_wls: bool = True,
    min_replicates: int = 50,
) -> CoverageReport:
    """Simulate ``M`` datasets, bootstrap each fit, and tally CI coverage.

    Replicate ``m`` derives its data seed and bootstrap seed from
    ``(spec.seed, m)`` alone, so a replicate's result does not depend on
    ``M`` or on execution order. Fit failures are counted and
    skipped; more than 5% of failures raises.
    """
    if M < min_replicates:
        raise ValidationError(f"coverage studies need at least {min_replicates} replicates")
    methods = [estimator] + ([WLS] if include_wls and estimator != WLS else [])
    rows = []
    failed = {m: 0 for m in methods}
    for m in range(M):
        data_seed, boot_seed = (int(v) for v in np.random.SeedSequence([spec.seed, m]).generate_state(2))
        data, truth = generate_dataset(replace(spec, seed=data_seed))
        for method in methods:
            try:
                point = fit_estimator(data, method, spec.lam)
                boot = bootstrap_fit(data, method, lam=spec.lam, B=B, seed=boot_seed, level=level, point=point)
            except DemingError:
                failed[method] += 1
                continue
            rows.append({
                "replicate": m,
                "method": method,
                "beta0": point.beta0,
                "beta1": point.beta1,
                "ci_beta0_lo": boot.ci_beta0[0],
                "ci_beta0_hi": boot.ci_beta0[1],
                "ci_beta1_lo": boot.ci_beta1[0],
                "ci_beta1_hi": boot.ci_beta1[1],
                "covers_beta0": _covers(boot.ci_beta0, truth.beta0),
                "covers_beta1": _covers(boot.ci_beta1, truth.beta1),
            })
    summary = {}
    for method in methods:
        sel = [r for r in rows if r["method"] == method]
        if failed[method] > MAX_FAIL * M:
            raise DemingError(f"{failed[method]} of {M} {method} fits failed")
        k = max(len(sel), 1)
        summary[method] = {
            "n_ok": len(sel),
            "n_failed": failed[method],
            "coverage_beta0": sum(r["covers_beta0"] for r in sel) / k,
            "coverage_beta1": sum(r["covers_beta1"] for r in sel) / k,
            "mean_width_beta0": float(np.mean([r["ci_beta0_hi"] - r["ci_beta0_lo"] for r in sel])) if sel else math.nan,
            "mean_width_beta1": float(np.mean([r["ci_beta1_hi"] - r["ci_beta1_lo"] for r in sel])) if sel else math.nan,
            "mean_beta0": float(np.mean([r["beta0"] for r in sel])) if sel else math.nan,
            "mean_beta1": float(np.mean([r["beta1"] for r in sel])) if sel else math.nan,
        }
    if estimator != WLS and include_wls:
        by_rep = {}
        for r in rows:
            by_rep.setdefault(r["replicate"], {})[r["method"]] = r["beta1"]
        pairs = [v for v in by_rep.values() if len(v) == 2]
        summary["attenuation_fraction"] = (
            sum(abs(v[WLS]) < abs(v[estimator]) for v in pairs) / len(pairs) if pairs else math.nan
        )
    return CoverageReport(spec, estimator, M, B, level, summary, rows)

