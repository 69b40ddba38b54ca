"""Bootstrap inference and prediction intervals."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from .core import WLS, Dataset, DemingFit, require_min_size
from .deming_ls import (
    fit_generalized_deming,
    fit_simple_deming,
    fit_wls,
    simple_deming_batch,
    wls_batch,
    york_batch,
)
from .errors import DemingError, UsageError

DEFAULT_B = 200
MAX_FAIL_FRACTION = 0.05
PI_MODES = ("individual", "mean", "mse")


def child_seed(seed: int, index: int) -> np.random.SeedSequence:
    """Independent RNG stream for replicate ``index`` of a run seeded ``seed``."""
    return np.random.SeedSequence([int(seed), int(index)])


def fit_estimator(dataset: Dataset, scenario: str, lam: float = 1.0) -> DemingFit:
    """Point fit for a scenario label (``A``, ``B``, ``C`` or ``WLS``)."""
    if scenario == "A":
        return fit_simple_deming(dataset, lam)
    if scenario == "B":
        return fit_generalized_deming(dataset)
    if scenario == "C":
        from .deming_mle import fit_mle_deming

        return fit_mle_deming(dataset, lam, n_boot=0)
    if scenario == WLS:
        return fit_wls(dataset)
    raise UsageError(f"unknown estimator {scenario!r}")


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    replicates: np.ndarray  # (B, 3): beta0, beta1, sigma2; NaN rows for failures
    cov_params: np.ndarray
    ci_beta0: tuple
    ci_beta1: tuple
    B: int
    seed: int
    level: float
    n_failed: int
    warning: bool
    estimator: str = "B"
    weighted: bool = False

    def to_dict(self, include_replicates: bool = False) -> dict:
        d = {
            "estimator": self.estimator,
            "B": self.B,
            "seed": self.seed,
            "level": self.level,
            "weighted_resample": self.weighted,
            "n_failed": self.n_failed,
            "warning": self.warning,
            "cov_params": [float(v) for v in np.ravel(self.cov_params)],
            "ci_beta0": [float(v) for v in self.ci_beta0],
            "ci_beta1": [float(v) for v in self.ci_beta1],
        }
        if include_replicates:
            d["replicates"] = self.replicates.tolist()
        return d


def resample_indices(n: int, B: int, seed: int, weights=None) -> np.ndarray:
    """``(B, n)`` row indices; replicate r draws from its own child stream."""
    p = None if weights is None else np.asarray(weights, float) / np.sum(weights)
    idx = np.empty((B, n), dtype=np.intp)
    for r in range(B):
        rng = np.random.default_rng(child_seed(seed, r))
        idx[r] = rng.choice(n, size=n, replace=True, p=p) if p is not None else rng.integers(0, n, n)
    return idx


def _replicate_fits(dataset: Dataset, idx: np.ndarray, estimator: str, lam: float) -> np.ndarray:
    x, y = dataset.x[idx], dataset.y[idx]
    out = np.full((idx.shape[0], 3), np.nan)
    if estimator == "A":
        b0, b1 = simple_deming_batch(x, y, lam)
        out[:, 0], out[:, 1], out[:, 2] = b0, b1, 0.0
    elif estimator == "B":
        res = york_batch(x, y, dataset.eff_var_x[idx], dataset.eff_var_y[idx])
        ok = res["converged"]
        out[ok, 0] = res["beta0"][ok]
        out[ok, 1] = res["beta1"][ok]
        out[ok, 2] = 0.0
    elif estimator == WLS:
        b0, b1, _, _ = wls_batch(x, y, dataset.weight[idx])
        out[:, 0], out[:, 1], out[:, 2] = b0, b1, 0.0
    elif estimator == "C":
        from .deming_mle import fit_mle_deming

        for r, rows in enumerate(idx):
            try:
                f = fit_mle_deming(dataset.take(rows), lam, n_boot=0)
            except DemingError:
                continue
            out[r] = f.beta0, f.beta1, f.sigma2
    else:
        raise UsageError(f"unknown estimator {estimator!r}")
    out[~np.all(np.isfinite(out), axis=1)] = np.nan
    return out


def percentile_interval(values, level: float):
    alpha = 1.0 - level
    lo, hi = np.quantile(values, [alpha / 2, 1 - alpha / 2])
    return float(lo), float(hi)


def bootstrap_fit(
    dataset: Dataset,
    estimator: str = "B",
    *,
    lam: float = 1.0,
    B: int = DEFAULT_B,
    seed: int = 0,
    level: float = 0.95,
    weighted_resample: bool = False,
    point: Optional[DemingFit] = None,
) -> BootstrapResult:
    """Row-resampling bootstrap of a straight-line estimator.

    Each replicate draws ``n`` rows with replacement (weights travel with
    their rows) and refits. Percentile intervals at ``level``;
    ``cov_params`` is the empirical covariance of the replicate coefficients.
    Replicates that fail to fit are dropped and counted; a failure fraction
    above 5% sets ``warning``.
    """
    if B < 50:
        raise UsageError("the bootstrap needs B >= 50 replicates")
    if not 0 < level < 1:
        raise UsageError("level must lie in (0, 1)")
    require_min_size(dataset)
    if point is None:
        point = fit_estimator(dataset, estimator, lam)  # errors here are fatal
    idx = resample_indices(dataset.n, B, seed, dataset.weight if weighted_resample else None)
    reps = _replicate_fits(dataset, idx, estimator, lam)
    good = reps[np.all(np.isfinite(reps), axis=1)]
    n_failed = B - good.shape[0]
    if good.shape[0] < 2:
        raise DemingError("fewer than two bootstrap replicates could be fitted")
    warn = n_failed / B > MAX_FAIL_FRACTION
    if warn:
        warnings.warn(f"{n_failed} of {B} bootstrap replicates failed", RuntimeWarning, stacklevel=2)
    return BootstrapResult(
        replicates=reps,
        cov_params=np.cov(good[:, :2], rowvar=False, ddof=1),
        ci_beta0=percentile_interval(good[:, 0], level),
        ci_beta1=percentile_interval(good[:, 1], level),
        B=B,
        seed=seed,
        level=level,
        n_failed=int(n_failed),
        warning=bool(warn),
        estimator=estimator,
        weighted=weighted_resample,
    )


# ---------------------------------------------------------------------------
# Prediction intervals
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PredictionResult:
    x_new: np.ndarray
    var_x_new: np.ndarray
    y_hat: np.ndarray
    var_y_new: np.ndarray
    components: tuple  # (parameter term, x-propagation term, e_y term)
    lower: np.ndarray
    upper: np.ndarray
    level: float
    df: int
    mode: str


def prediction_variance(fit: DemingFit, cov_params, x_new, var_x_new, var_e_y):
    """Variance of a new response at ``x_new`` and its three components.

    ``(1, x) C (1, x)' + (beta1**2 + Var(beta1)) * var_x_new + var_e_y``.
    Returns ``(total, (param_term, x_term, ey_term))``; inputs broadcast.
    """
    C = np.asarray(cov_params, dtype=float).reshape(2, 2)
    x_new = np.asarray(x_new, dtype=float)
    var_x_new = np.asarray(var_x_new, dtype=float)
    var_e_y = np.asarray(var_e_y, dtype=float)
    if np.any(var_x_new < 0) or np.any(var_e_y < 0):
        raise UsageError("variances must be non-negative")
    param = C[0, 0] + 2.0 * C[0, 1] * x_new + C[1, 1] * x_new * x_new
    xterm = (fit.beta1**2 + C[1, 1]) * var_x_new
    eterm = var_e_y + 0.0 * x_new
    total = param + xterm + eterm
    if not np.all(np.isfinite(total)):
        raise UsageError("prediction variance is not finite (missing covariance?)")
    return total, (param, xterm, eterm)


def t_multiplier(level: float, n: int) -> float:
    return float(stats.t.ppf(1 - (1 - level) / 2, n - 2))


def prediction_interval(
    fit: DemingFit,
    cov_params,
    x_new,
    var_x_new,
    var_e_y,
    level: float = 0.95,
    n: Optional[int] = None,
    mode: str = "individual",
) -> PredictionResult:
    """``y_hat +- t(1 - alpha/2, n - 2) * sqrt(var_y_new)``."""
    if not 0 < level < 1:
        raise UsageError("level must lie in (0, 1)")
    n = fit.n if n is None else n
    if n < 3:
        raise UsageError("prediction intervals need n >= 3")
    if mode not in PI_MODES:
        raise UsageError(f"unknown PI mode {mode!r}")
    total, comps = prediction_variance(fit, cov_params, x_new, var_x_new, var_e_y)
    y_hat = fit.predict(x_new)
    half = t_multiplier(level, n) * np.sqrt(total)
    return PredictionResult(
        x_new=np.asarray(x_new, dtype=float),
        var_x_new=np.broadcast_to(np.asarray(var_x_new, dtype=float), np.shape(total)),
        y_hat=y_hat,
        var_y_new=total,
        components=comps,
        lower=y_hat - half,
        upper=y_hat + half,
        level=level,
        df=n - 2,
        mode=mode,
    )


def data_summary(dataset: Dataset) -> dict:
    """Centre values of the first-stage SDs (effective variances)."""
    sx = np.sqrt(dataset.eff_var_x)
    sy = np.sqrt(dataset.eff_var_y)
    return {
        "n": dataset.n,
        "mean_sd_x": float(np.mean(sx)),
        "mean_sd_y": float(np.mean(sy)),
        "median_sd_x": float(np.median(sx)),
        "median_sd_y": float(np.median(sy)),
    }


def _extra_variances(fit: DemingFit):
    """Unknown-error variances (x, y) implied by the fit's scenario."""
    if fit.scenario == "A":
        # vertical residual variance = Var(delta) + beta1**2 Var(eps)
        s2d = fit.residual_sd**2
        denom = 1.0 + fit.lam * fit.beta1**2
        return fit.lam * s2d / denom, s2d / denom
    if fit.scenario == "C":
        return fit.sigma2, fit.sigma2 / fit.lam
    return 0.0, 0.0


def pi_variances(fit: DemingFit, mode: str, *, var_x=None, var_y=None, weight=None, summary=None, center="mean"):
    """``(var_x_new, var_e_y)`` for a PI mode.

    ``individual`` uses the supplied per-point variances, ``mean`` the squared
    centre (mean or median) of the first-stage SDs from ``summary``, ``mse``
    the WLS mean squared error divided by the point's weight. WLS fits always
    take ``var_x_new = 0``; Scenario A/C fits add their unknown-error
    variances.
    """
    if mode not in PI_MODES:
        raise UsageError(f"unknown PI mode {mode!r}")
    if center not in ("mean", "median"):
        raise UsageError("center must be 'mean' or 'median'")
    is_wls = fit.scenario == WLS
    if mode == "mse":
        if not is_wls:
            raise UsageError("the mse PI mode applies to WLS fits only")
        w = 1.0 if weight is None else np.asarray(weight, dtype=float)
        return 0.0 * w, fit.residual_sd**2 / w
    if mode == "mean":
        if summary is None:
            raise UsageError("the mean PI mode needs a first-stage SD summary")
        vx = summary[f"{center}_sd_x"] ** 2
        vy = summary[f"{center}_sd_y"] ** 2
    else:
        if var_y is None or (var_x is None and not is_wls):
            raise UsageError("the individual PI mode needs per-point variances")
        vx = var_x if var_x is not None else 0.0
        vy = var_y
    vx = np.asarray(vx, dtype=float)
    vy = np.asarray(vy, dtype=float)
    if is_wls:
        return 0.0 * vx, vy
    if fit.scenario == "A":
        ex, ey = _extra_variances(fit)
        return 0.0 * vx + ex, 0.0 * vy + ey
    ex, ey = _extra_variances(fit)
    return vx + ex, vy + ey


def pi_coverage(
    dataset: Dataset,
    fit: DemingFit,
    mode: str = "individual",
    level: float = 0.95,
    cov_params=None,
    center: str = "mean",
) -> float:
    """Weighted share of observations whose y falls inside its own PI."""
    cov = fit.cov_params if cov_params is None else cov_params
    vx, vy = pi_variances(
        fit,
        mode,
        var_x=dataset.eff_var_x,
        var_y=dataset.eff_var_y,
        weight=dataset.weight,
        summary=data_summary(dataset),
        center=center,
    )
    pi = prediction_interval(fit, cov, dataset.x, vx, vy, level=level, n=dataset.n, mode=mode)
    inside = (dataset.y >= pi.lower) & (dataset.y <= pi.upper)
    return float(np.sum(dataset.weight * inside) / np.sum(dataset.weight))
