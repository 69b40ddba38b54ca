"""Gaussian log-likelihood kernel shared by the Scenario B and C estimators.

The kernel treats the true x-values as free parameters::

    -1/2 * sum[ log a_i + log b_i + (x_i - X_i)**2 / a_i
                + (y_i - beta0 - beta1 X_i)**2 / b_i ]

with ``a_i = sigma2 + var_x_i`` and ``b_i = sigma2 / lam + var_y_i`` (effective,
weight-divided variances). ``lam`` is Var(x error) / Var(y error) for the extra
unknown error pair, matching the ratio used by the simple Deming fit.
"""

from __future__ import annotations

import numpy as np

from .core import Dataset
from .errors import SingularLikelihoodError


def total_variances(dataset: Dataset, sigma2: float, lam: float):
    a = sigma2 + dataset.eff_var_x
    b = sigma2 / lam + dataset.eff_var_y
    return a, b


def mle_log_likelihood(dataset: Dataset, beta0, beta1, sigma2, lam, X_hat) -> float:
    """Evaluate the kernel (additive constants dropped)."""
    if sigma2 < 0:
        raise SingularLikelihoodError("sigma2 must be non-negative")
    if not lam > 0:
        raise SingularLikelihoodError("lambda must be positive")
    a, b = total_variances(dataset, sigma2, lam)
    if np.any(a <= 0) or np.any(b <= 0):
        raise SingularLikelihoodError("zero variance denominator in the likelihood")
    X = np.asarray(X_hat, dtype=float)
    rx = dataset.x - X
    ry = dataset.y - beta0 - beta1 * X
    return float(-0.5 * np.sum(np.log(a) + np.log(b) + rx * rx / a + ry * ry / b))


def profile_true_values(dataset: Dataset, beta0, beta1, sigma2, lam) -> np.ndarray:
    """Closed-form maximiser of the kernel over each X_i."""
    a, b = total_variances(dataset, sigma2, lam)
    return (dataset.x * b + beta1 * a * (dataset.y - beta0)) / (b + beta1 * beta1 * a)


def profiled_log_likelihood(dataset: Dataset, beta0, beta1, sigma2, lam) -> float:
    """Kernel with every X_i replaced by its maximiser.

    Equivalent to ``mle_log_likelihood(..., profile_true_values(...))`` but
    written in terms of the vertical residuals.
    """
    a, b = total_variances(dataset, sigma2, lam)
    return profiled_kernel(dataset.x, dataset.y, a, b, beta0, beta1)


def profiled_kernel(x, y, a, b, beta0, beta1) -> float:
    """Profiled kernel for explicit total variances ``a`` (x) and ``b`` (y)."""
    if np.any(a <= 0) or np.any(b <= 0):
        raise SingularLikelihoodError("zero variance denominator in the likelihood")
    d = y - beta0 - beta1 * x
    return float(-0.5 * np.sum(np.log(a) + np.log(b) + d * d / (b + beta1 * beta1 * a)))


def score(dataset: Dataset, beta0, beta1, sigma2, lam, X_hat):
    """Analytic partial derivatives of the kernel.

    Returns ``(d_beta0, d_beta1, d_sigma2, d_X)`` where ``d_X`` is an array.
    """
    a, b = total_variances(dataset, sigma2, lam)
    X = np.asarray(X_hat, dtype=float)
    rx = dataset.x - X
    ry = dataset.y - beta0 - beta1 * X
    d_b0 = np.sum(ry / b)
    d_b1 = np.sum(ry * X / b)
    d_X = rx / a + beta1 * ry / b
    d_s2 = -0.5 * np.sum(1 / a + (1 / lam) / b - (rx / a) ** 2 - (1 / lam) * (ry / b) ** 2)
    return float(d_b0), float(d_b1), float(d_s2), d_X
