"""Least-squares straight-line estimators.

* :func:`fit_simple_deming` -- constant error-variance ratio (Scenario A).
* :func:`fit_generalized_deming` -- known per-observation variances, solved
  by the York/Williamson fixed-point iteration (Scenario B).
* :func:`fit_wls` -- weighted least squares of y on x, ignoring both error
  variances; kept as the attenuation-prone baseline.

The ``*_batch`` helpers operate on stacked ``(B, n)`` arrays and are what the
bootstrap uses; the public fits are thin wrappers around them so a single fit
and a bootstrap replicate follow exactly the same arithmetic.
"""

from __future__ import annotations

import math

import numpy as np

from .core import WLS, Dataset, DemingFit, SimpleDemingSummary, TrueValueEstimates, require_min_size
from .errors import ConvergenceError, DegenerateFitError, SingularWeightError
from .likelihood import profile_true_values, profiled_kernel

YORK_TOL = 1e-12
YORK_MAX_ITER = 500


def _residual_sd(dataset: Dataset, beta0, beta1) -> float:
    d = dataset.y - beta0 - beta1 * dataset.x
    return math.sqrt(float(np.sum(d * d)) / (dataset.n - 2))


# ---------------------------------------------------------------------------
# Simple Deming
# ---------------------------------------------------------------------------


def simple_summary(dataset: Dataset) -> SimpleDemingSummary:
    x_bar = float(np.mean(dataset.x))
    y_bar = float(np.mean(dataset.y))
    dx = dataset.x - x_bar
    dy = dataset.y - y_bar
    return SimpleDemingSummary(
        u=float(np.sum(dx * dx)),
        q=float(np.sum(dy * dy)),
        p=float(np.sum(dx * dy)),
        x_bar=x_bar,
        y_bar=y_bar,
    )


def _simple_slope(u, q, p, lam):
    # Positive-root solution of the Deming quadratic. Where lam*q - u < 0 the
    # algebraically identical form 2p / (S - A) avoids cancellation.
    A = lam * q - u
    S = np.sqrt(A * A + 4.0 * lam * p * p)
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (A + S) / (2.0 * lam * p)
        stable = 2.0 * p / (S - A)
    return np.where(A >= 0, direct, stable)


def simple_deming_batch(x, y, lam):
    """Vectorised simple Deming over the last axis. Returns (beta0, beta1)."""
    x_bar = x.mean(axis=-1)
    y_bar = y.mean(axis=-1)
    dx = x - x_bar[..., None]
    dy = y - y_bar[..., None]
    u = (dx * dx).sum(axis=-1)
    q = (dy * dy).sum(axis=-1)
    p = (dx * dy).sum(axis=-1)
    b1 = _simple_slope(u, q, p, lam)
    return y_bar - b1 * x_bar, b1


def _jackknife_simple(dataset: Dataset, lam: float) -> np.ndarray:
    """Leave-one-out covariance of (beta0, beta1), computed in O(n)."""
    n = dataset.n
    x = dataset.x - np.mean(dataset.x)
    y = dataset.y - np.mean(dataset.y)
    sx, sy = x.sum(), y.sum()
    sxx, syy, sxy = (x * x).sum(), (y * y).sum(), (x * y).sum()
    m = n - 1
    lx = (sx - x) / m
    ly = (sy - y) / m
    u = (sxx - x * x) - m * lx * lx
    q = (syy - y * y) - m * ly * ly
    p = (sxy - x * y) - m * lx * ly
    b1 = _simple_slope(u, q, p, lam)
    with np.errstate(invalid="ignore", over="ignore"):
        b0 = (ly + np.mean(dataset.y)) - b1 * (lx + np.mean(dataset.x))
    theta = np.column_stack([b0, b1])
    if not np.all(np.isfinite(theta)):
        return np.full((2, 2), np.nan)
    centred = theta - theta.mean(axis=0)
    return (n - 1) / n * centred.T @ centred


def fit_simple_deming(dataset: Dataset, lam: float = 1.0) -> DemingFit:
    """Deming fit with a fixed ratio ``lam = Var(x error) / Var(y error)``.

    Per-observation variances are ignored. ``cov_params`` is the jackknife
    covariance of the two coefficients.

    Raises
    ------
    DegenerateFitError
        If all x are equal or the sample covariance of x and y is zero.
    """
    require_min_size(dataset)
    if not (lam > 0 and math.isfinite(lam)):
        raise DegenerateFitError("lambda must be positive and finite")
    s = simple_summary(dataset)
    if s.u == 0:
        raise DegenerateFitError("all x values are equal")
    if s.p == 0:
        raise DegenerateFitError("zero x-y covariance: Deming slope is undefined")
    beta1 = float(_simple_slope(s.u, s.q, s.p, lam))
    beta0 = s.y_bar - beta1 * s.x_bar
    return DemingFit(
        beta0=beta0,
        beta1=beta1,
        sigma2=0.0,
        lam=lam,
        cov_params=_jackknife_simple(dataset, lam),
        loglik=None,
        residual_sd=_residual_sd(dataset, beta0, beta1),
        scenario="A",
        n_iterations=0,
        converged=True,
        cov_method="jackknife",
        n=dataset.n,
        fingerprint=dataset.fingerprint(),
    )


def estimate_true_values(dataset: Dataset, fit: DemingFit) -> TrueValueEstimates:
    """Estimated true points lying on the fitted line.

    For a simple Deming fit this is the ratio-weighted projection of each
    point on the line; for B/C fits the per-observation variances (plus the
    extra sigma2 component) set the projection direction instead.
    """
    d = dataset.y - (fit.beta0 + fit.beta1 * dataset.x)
    if fit.scenario == "A":
        denom = 1.0 + fit.lam * fit.beta1**2
        X_hat = dataset.x + fit.lam * fit.beta1 * d / denom
    else:
        X_hat = profile_true_values(dataset, fit.beta0, fit.beta1, fit.sigma2, fit.lam)
    Y_hat = fit.beta0 + fit.beta1 * X_hat
    if not (np.all(np.isfinite(X_hat)) and np.all(np.isfinite(Y_hat))):
        raise DegenerateFitError("non-finite true-value estimates")
    return TrueValueEstimates(X_hat=X_hat, Y_hat=Y_hat, d=d)


# ---------------------------------------------------------------------------
# Generalized Deming (York / Williamson)
# ---------------------------------------------------------------------------


def ols_slope_batch(x, y):
    dx = x - x.mean(axis=-1, keepdims=True)
    dy = y - y.mean(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (dx * dy).sum(axis=-1) / (dx * dx).sum(axis=-1)


def york_batch(x, y, u, v, beta1=None, tol=YORK_TOL, max_iter=YORK_MAX_ITER):
    """Fixed-point iteration for the generalized Deming slope.

    Arrays have shape ``(..., n)``; ``u``/``v`` are the x/y error variances.
    Each leading-index problem iterates independently and is frozen once its
    relative slope change drops below ``tol``.

    Returns a dict with ``beta0``, ``beta1``, ``iterations``, ``converged``
    and the final ``w``, ``z``, ``x_bar``.
    """
    x, y, u, v = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, y, u, v)))
    shape = x.shape[:-1]
    b = ols_slope_batch(x, y) if beta1 is None else np.broadcast_to(beta1, shape)
    b = np.array(b, dtype=float)
    active = np.ones(shape, dtype=bool)
    iterations = np.zeros(shape, dtype=int)
    with np.errstate(divide="ignore", invalid="ignore"):
        for it in range(1, max_iter + 1):
            w = 1.0 / (v + (b * b)[..., None] * u)
            sw = w.sum(axis=-1)
            xb = (w * x).sum(axis=-1) / sw
            yb = (w * y).sum(axis=-1) / sw
            xp = x - xb[..., None]
            yp = y - yb[..., None]
            z = w * (v * xp + b[..., None] * u * yp)
            b_new = (w * z * yp).sum(axis=-1) / (w * z * xp).sum(axis=-1)
            step = np.abs(b_new - b) / np.maximum(1.0, np.abs(b_new))
            b = np.where(active, b_new, b)
            iterations = np.where(active, it, iterations)
            active = active & ~(step < tol)
            if not np.any(active):
                break
        # final quantities at the converged slope
        w = 1.0 / (v + (b * b)[..., None] * u)
        sw = w.sum(axis=-1)
        xb = (w * x).sum(axis=-1) / sw
        yb = (w * y).sum(axis=-1) / sw
        xp = x - xb[..., None]
        yp = y - yb[..., None]
        z = w * (v * xp + b[..., None] * u * yp)
    return {
        "beta0": yb - b * xb,
        "beta1": b,
        "x_bar": xb,
        "y_bar": yb,
        "w": w,
        "z": z,
        "iterations": iterations,
        "converged": ~active & np.isfinite(b),
    }


def williamson_cov(w, z, x_bar):
    """Coefficient covariance from the York/Williamson least-squares solution.

    Adjusted abscissae ``x_bar + z_i`` are re-centred with the weights ``w``;
    Var(slope) is the inverse weighted sum of squares of those and the
    intercept variance follows the usual straight-line algebra.
    """
    sw = w.sum(axis=-1)
    x_adj = x_bar[..., None] + z
    xa_bar = (w * x_adj).sum(axis=-1) / sw
    ua = x_adj - xa_bar[..., None]
    var_b1 = 1.0 / (w * ua * ua).sum(axis=-1)
    var_b0 = 1.0 / sw + xa_bar**2 * var_b1
    cov = -xa_bar * var_b1
    return np.stack([np.stack([var_b0, cov], -1), np.stack([cov, var_b1], -1)], -2)


def chi2_objective(dataset: Dataset, beta0, beta1, X, u=None, v=None) -> float:
    """Generalized Deming sum of squares for explicit true x-values ``X``."""
    u = dataset.eff_var_x if u is None else u
    v = dataset.eff_var_y if v is None else v
    X = np.asarray(X, dtype=float)
    return float(np.sum((dataset.x - X) ** 2 / u + (dataset.y - beta0 - beta1 * X) ** 2 / v))


def profiled_chi2(dataset: Dataset, beta0, beta1, u=None, v=None) -> float:
    """:func:`chi2_objective` minimised over X in closed form."""
    u = dataset.eff_var_x if u is None else u
    v = dataset.eff_var_y if v is None else v
    d = dataset.y - beta0 - beta1 * dataset.x
    return float(np.sum(d * d / (v + beta1 * beta1 * u)))


def _check_generalized_inputs(dataset: Dataset, u, v):
    both_zero = (u == 0) & (v == 0)
    if np.any(both_zero):
        raise SingularWeightError(
            f"observation {int(np.argmax(both_zero)) + 1} has var_x = var_y = 0; "
            "generalized Deming weights are undefined"
        )
    if np.ptp(dataset.x) == 0:
        raise DegenerateFitError("all x values are equal")


def fit_generalized_deming(dataset: Dataset, *, u=None, v=None, beta1_init=None) -> DemingFit:
    """Generalized Deming regression with known per-observation variances.

    Parameters
    ----------
    dataset : Dataset
        Variances are divided by the row weights before use.
    u, v : array_like, optional
        Override the x/y error variances (used by the Scenario C solver,
        which adds its extra variance component before calling this).
    beta1_init : float, optional
        Starting slope; defaults to the OLS slope of y on x.

    Returns
    -------
    DemingFit
        ``scenario="B"``; ``cov_params`` from the Williamson equations;
        ``loglik`` is the Gaussian kernel at sigma2 = 0 when every variance
        is strictly positive, otherwise ``None``.
    """
    require_min_size(dataset)
    u = dataset.eff_var_x if u is None else np.asarray(u, dtype=float)
    v = dataset.eff_var_y if v is None else np.asarray(v, dtype=float)
    _check_generalized_inputs(dataset, u, v)
    res = york_batch(dataset.x, dataset.y, u, v, beta1=beta1_init)
    beta1 = float(res["beta1"])
    beta0 = float(res["beta0"])
    if not np.isfinite(beta1):
        raise DegenerateFitError("generalized Deming slope is not finite")
    if not bool(res["converged"]):
        raise ConvergenceError(
            f"York iteration did not converge in {YORK_MAX_ITER} iterations",
            last={"beta0": beta0, "beta1": beta1},
        )
    cov = williamson_cov(res["w"], res["z"], res["x_bar"])
    loglik = None
    if np.all(u > 0) and np.all(v > 0):
        loglik = profiled_kernel(dataset.x, dataset.y, u, v, beta0, beta1)
    return DemingFit(
        beta0=beta0,
        beta1=beta1,
        sigma2=0.0,
        lam=1.0,
        cov_params=cov,
        loglik=loglik,
        residual_sd=_residual_sd(dataset, beta0, beta1),
        scenario="B",
        n_iterations=int(res["iterations"]),
        converged=True,
        cov_method="williamson",
        n=dataset.n,
        fingerprint=dataset.fingerprint(),
    )


# ---------------------------------------------------------------------------
# Weighted least squares baseline
# ---------------------------------------------------------------------------


def wls_batch(x, y, w):
    """Weighted LS of y on x over the last axis. Returns (beta0, beta1, scale, cov)."""
    sw = w.sum(axis=-1)
    xb = (w * x).sum(axis=-1) / sw
    yb = (w * y).sum(axis=-1) / sw
    dx = x - xb[..., None]
    dy = y - yb[..., None]
    sxx = (w * dx * dx).sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        b1 = (w * dx * dy).sum(axis=-1) / sxx
    b0 = yb - b1 * xb
    n = x.shape[-1]
    e = y - b0[..., None] - b1[..., None] * x
    scale = (w * e * e).sum(axis=-1) / (n - 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        var_b1 = scale / sxx
        var_b0 = scale * (1.0 / sw + xb * xb / sxx)
        c = -scale * xb / sxx
    cov = np.stack([np.stack([var_b0, c], -1), np.stack([c, var_b1], -1)], -2)
    return b0, b1, scale, cov


def fit_wls(dataset: Dataset) -> DemingFit:
    """Weighted least squares of y on x using only the row weights.

    ``residual_sd`` is the square root of the weighted mean squared error
    (the per-unit-weight error variance); ``cov_params`` is that scale times
    ``(X' W X)^-1``.
    """
    require_min_size(dataset)
    if np.ptp(dataset.x) == 0:
        raise DegenerateFitError("all x values are equal")
    b0, b1, scale, cov = wls_batch(dataset.x, dataset.y, dataset.weight)
    return DemingFit(
        beta0=float(b0),
        beta1=float(b1),
        sigma2=0.0,
        lam=1.0,
        cov_params=cov,
        loglik=None,
        residual_sd=math.sqrt(float(scale)),
        scenario=WLS,
        n_iterations=0,
        converged=True,
        cov_method="wls",
        n=dataset.n,
        fingerprint=dataset.fingerprint(),
    )
