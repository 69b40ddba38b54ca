"""Scenario C: known per-observation variances plus an unknown extra variance.

The model is ``x = X + e_x + eps``, ``y = Y + e_y + delta`` with
``eps ~ N(0, sigma2)`` and ``delta ~ N(0, sigma2 / lam)``. Parameters
(beta0, beta1, sigma2, X_1..X_n) are estimated by maximising the Gaussian
kernel in :mod:`twostage_deming.likelihood` with block-coordinate ascent:

1. (X, beta) given sigma2. Alternating the closed-form X profile with the
   weighted regression of y on X converges to the York fixed point with
   total variances ``sigma2 + var_x`` and ``sigma2/lam + var_y``, so the
   York solver is used for this block directly.
2. sigma2 given the rest. A bracketing root solve of the sigma2 score, with
   X and beta re-profiled at every trial value; a log-spaced scan over
   ``[0, sigma2_max]`` supplies brackets and guards against secondary maxima.

Blocks alternate until the relative log-likelihood change drops below 1e-10.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .core import Dataset, DemingFit, require_min_size
from .deming_ls import _residual_sd, fit_generalized_deming, fit_simple_deming, york_batch
from .errors import ConvergenceError, DegenerateFitError, DemingError
from .likelihood import (
    mle_log_likelihood,
    profile_true_values,
    profiled_kernel,
    score,
)

__all__ = [
    "MleState",
    "fit_mle_deming",
    "mle_log_likelihood",
    "profile_true_values",
]

LOGLIK_RTOL = 1e-10
MAX_ITER = 1000
SCAN_POINTS = 64


@dataclass
class MleState:
    beta0: float
    beta1: float
    sigma2: float
    X_hat: np.ndarray
    loglik: float
    iteration: int = 0
    trace: list = field(default_factory=list)


class _Problem:
    """Cached arrays for one dataset/lambda pair."""

    def __init__(self, dataset: Dataset, lam: float):
        self.dataset = dataset
        self.lam = lam
        self.x = dataset.x
        self.y = dataset.y
        self.vx = dataset.eff_var_x
        self.vy = dataset.eff_var_y
        spread = max(float(np.var(self.x)), lam * float(np.var(self.y)))
        self.s2_max = 10.0 * spread if spread > 0 else 1.0
        # sigma2 = 0 is admissible only when every kernel denominator stays positive
        if np.all(self.vx > 0) and np.all(self.vy > 0):
            self.s2_min = 0.0
        else:
            self.s2_min = 1e-12 * self.s2_max

    def totals(self, s2):
        s2 = np.asarray(s2, dtype=float)[..., None]
        return s2 + self.vx, s2 / self.lam + self.vy

    def profile(self, s2, beta1=None):
        """York solution at each sigma2 (scalar or 1-d array)."""
        u, v = self.totals(s2)
        res = york_batch(self.x, self.y, u, v, beta1=beta1)
        d = self.y - res["beta0"][..., None] - res["beta1"][..., None] * self.x
        with np.errstate(divide="ignore", invalid="ignore"):
            ll = -0.5 * np.sum(np.log(u) + np.log(v) + d * d / (v + res["beta1"][..., None] ** 2 * u), axis=-1)
        ll = np.where(res["converged"] & np.isfinite(ll), ll, -np.inf)
        return res["beta0"], res["beta1"], ll, res["iterations"]

    def loglik(self, b0, b1, s2):
        u, v = self.totals(s2)
        return profiled_kernel(self.x, self.y, u, v, b0, b1)

    def sigma2_score(self, s2, beta1):
        b0, b1, _, _ = self.profile(s2, beta1)
        b0, b1 = float(b0), float(b1)
        X = profile_true_values(self.dataset, b0, b1, s2, self.lam)
        return score(self.dataset, b0, b1, s2, self.lam, X)[2]


def _initial_sigma2(prob: _Problem, start: DemingFit) -> float:
    resid_var = start.residual_sd**2
    b1sq = start.beta1**2
    excess = resid_var - float(np.mean(prob.vy)) - b1sq * float(np.mean(prob.vx))
    s2 = max(excess, 1e-12) / (1.0 / prob.lam + b1sq)
    return float(min(max(s2, prob.s2_min), prob.s2_max))


def _update_sigma2(prob: _Problem, s2_now: float, beta1: float):
    """Safeguarded maximisation of the profiled log-likelihood in sigma2."""
    lo, hi = prob.s2_min, prob.s2_max
    tail = np.geomspace(max(lo, hi * 1e-10), hi, SCAN_POINTS)
    grid = np.unique(np.concatenate([[lo], tail, [s2_now]]))
    _, b1s, lls, _ = prob.profile(grid, beta1)
    k = int(np.argmax(lls))
    if not np.isfinite(lls[k]):
        raise ConvergenceError("profiled likelihood is not finite anywhere on [0, sigma2_max]")
    if k == 0:
        # maximum at the lower edge; a negative score there confirms the boundary
        return float(grid[0]), float(b1s[0])
    left = grid[k - 1]
    right = grid[min(k + 1, len(grid) - 1)]
    b1k = float(b1s[k])
    g = lambda s: prob.sigma2_score(s, b1k)
    g_left, g_right = g(left), g(right)
    if g_left > 0 > g_right:
        s2 = brentq(g, left, right, xtol=1e-15 * max(1.0, hi), rtol=4 * np.finfo(float).eps, maxiter=200)
    else:
        opt = minimize_scalar(
            lambda s: -float(prob.profile(s, b1k)[2]),
            bounds=(left, right),
            method="bounded",
            options={"xatol": 1e-14 * max(1.0, hi)},
        )
        s2 = float(opt.x)
    s2 = float(s2)
    # keep the best of the refined point and the scanned node
    _, b1r, llr, _ = prob.profile(s2, b1k)
    if float(llr) < lls[k]:
        return float(grid[k]), b1k
    return s2, float(b1r)


def fit_mle_deming(
    dataset: Dataset,
    lam: float = 1.0,
    *,
    fix_sigma2: Optional[float] = None,
    n_boot: int = 200,
    seed: int = 0,
    return_state: bool = False,
):
    """Maximum-likelihood generalized Deming fit (Scenario C).

    Parameters
    ----------
    dataset : Dataset
        Variances are divided by the row weights before use.
    lam : float
        Fixed ratio Var(eps) / Var(delta) of the extra error components.
    fix_sigma2 : float, optional
        Hold sigma2 at this value and skip its update (nesting checks).
    n_boot : int
        Bootstrap replicates for ``cov_params``; 0 leaves it as NaN.
    seed : int
        Bootstrap seed.
    return_state : bool
        Also return the final :class:`MleState` (with the per-iteration trace).

    Returns
    -------
    DemingFit
        ``scenario="C"``. ``boundary`` is set when sigma2 sits at its lower
        bound, i.e. the data do not support an extra variance component and
        Scenario B is the better description.
    """
    require_min_size(dataset)
    if not (lam > 0 and math.isfinite(lam)):
        raise DegenerateFitError("lambda must be positive and finite")
    if np.ptp(dataset.x) == 0:
        raise DegenerateFitError("all x values are equal")
    prob = _Problem(dataset, lam)

    try:
        start = fit_generalized_deming(dataset)
    except DemingError:
        start = fit_simple_deming(dataset, lam)
    if fix_sigma2 is not None:
        s2 = float(fix_sigma2)
        if s2 < 0:
            raise DegenerateFitError("fixed sigma2 must be non-negative")
    else:
        s2 = _initial_sigma2(prob, start)
    b0, b1 = start.beta0, start.beta1

    try:
        ll = prob.loglik(b0, b1, s2)
    except DemingError:
        ll = -np.inf
    state = MleState(b0, b1, s2, profile_true_values(dataset, b0, b1, s2, lam), ll)
    state.trace.append((b0, b1, s2, ll))

    converged = False
    for it in range(1, MAX_ITER + 1):
        # block 1: true values and coefficients at the current sigma2
        rb0, rb1, rll, _ = prob.profile(s2, b1)
        if not np.isfinite(rll):
            raise ConvergenceError(
                "coefficient update failed", last=state, trace=state.trace
            )
        b0, b1 = float(rb0), float(rb1)
        # block 2: sigma2 with X and beta re-profiled
        if fix_sigma2 is None:
            s2, b1 = _update_sigma2(prob, s2, b1)
            rb0, rb1, _, _ = prob.profile(s2, b1)
            b0, b1 = float(rb0), float(rb1)
        new_ll = prob.loglik(b0, b1, s2)
        state.trace.append((b0, b1, s2, new_ll))
        change = abs(new_ll - ll)
        ll = new_ll
        state.iteration = it
        if change <= LOGLIK_RTOL * max(1.0, abs(ll)):
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"Scenario C likelihood did not converge in {MAX_ITER} iterations",
            last=state,
            trace=state.trace,
        )

    state.beta0, state.beta1, state.sigma2, state.loglik = b0, b1, s2, ll
    state.X_hat = profile_true_values(dataset, b0, b1, s2, lam)
    boundary = fix_sigma2 is None and s2 <= prob.s2_min

    fit = DemingFit(
        beta0=b0,
        beta1=b1,
        sigma2=s2,
        lam=lam,
        cov_params=np.full((2, 2), np.nan),
        loglik=ll,
        residual_sd=_residual_sd(dataset, b0, b1),
        scenario="C",
        n_iterations=state.iteration,
        converged=True,
        cov_method=None,
        boundary=bool(boundary),
        n=dataset.n,
        fingerprint=dataset.fingerprint(),
    )
    if n_boot:
        from .inference import bootstrap_fit

        boot = bootstrap_fit(dataset, "C", lam=lam, B=n_boot, seed=seed, point=fit)
        fit = fit.with_cov(boot.cov_params, "bootstrap")
    return (fit, state) if return_state else fit
