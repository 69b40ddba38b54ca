"""Choosing between the A/B/C error structures."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import stats

from .core import Dataset, DemingFit
from .errors import SingularWeightError, UsageError

DEFAULT_THRESHOLDS = (0.1, 0.8)


@dataclass(frozen=True)
class ScenarioDiagnostics:
    r_value: float
    selected: str
    lrt_statistic: Optional[float] = None
    lrt_p_value: Optional[float] = None
    thresholds: Tuple[float, float] = DEFAULT_THRESHOLDS
    forced: bool = False

    def to_dict(self) -> dict:
        r = self.r_value
        return {
            "r_value": "inf" if math.isinf(r) else float(r),
            "selected": self.selected,
            "lrt_statistic": self.lrt_statistic,
            "lrt_p_value": self.lrt_p_value,
            "thresholds": list(self.thresholds),
            "forced": self.forced,
        }


def compute_r_criterion(dataset: Dataset, scenario_b_fit: DemingFit) -> float:
    """Mean first-stage SD of y over the residual SD of the Scenario B fit.

    Uses weight-divided variances. A perfect Scenario B fit (zero residual
    scatter) returns ``inf``.
    """
    if scenario_b_fit.scenario != "B":
        raise UsageError("the r criterion needs a Scenario B fit")
    mean_sd = float(np.mean(np.sqrt(dataset.eff_var_y)))
    if scenario_b_fit.residual_sd == 0:
        return math.inf
    return mean_sd / scenario_b_fit.residual_sd


def select_scenario(r: float, thresholds: Tuple[float, float] = DEFAULT_THRESHOLDS) -> str:
    low, high = thresholds
    if not 0 <= low < high:
        raise UsageError(f"thresholds must satisfy 0 <= low < high, got {thresholds}")
    if r < low:
        return "A"
    if r >= high:
        return "B"
    return "C"


def likelihood_ratio_test(fit_restricted: DemingFit, fit_full: DemingFit):
    """LRT of a nested pair (B inside C) against chi-square with 1 df.

    Returns ``(statistic, p_value)``. The statistic is floored at zero.
    The naive reference distribution ignores that sigma2 = 0 sits on the
    boundary, so the p-value is conservative.
    """
    if fit_restricted.loglik is None or fit_full.loglik is None:
        raise UsageError("both fits need a log-likelihood")
    fr, ff = fit_restricted.fingerprint, fit_full.fingerprint
    if fr is not None and ff is not None and fr != ff:
        raise UsageError("fits were computed on different datasets")
    stat = max(0.0, 2.0 * (fit_full.loglik - fit_restricted.loglik))
    return stat, float(stats.chi2.sf(stat, df=1))


def diagnose(
    dataset: Dataset,
    lam: float = 1.0,
    thresholds: Tuple[float, float] = DEFAULT_THRESHOLDS,
    run_lrt: bool = True,
):
    """Scenario B pre-fit, r criterion, optional LRT against Scenario C.

    Returns ``(diagnostics, fit_b, fit_c)``; either fit may be ``None`` when
    it cannot be computed. A column of all-zero first-stage variances forces
    Scenario A.
    """
    from .deming_ls import fit_generalized_deming
    from .deming_mle import fit_mle_deming

    zero_col = np.all(dataset.var_x == 0) or np.all(dataset.var_y == 0)
    try:
        fit_b = fit_generalized_deming(dataset)
    except SingularWeightError:
        if not zero_col:
            raise
        fit_b = None
    if fit_b is None:
        return ScenarioDiagnostics(0.0, "A", thresholds=tuple(thresholds), forced=True), None, None

    r = compute_r_criterion(dataset, fit_b)
    selected = "A" if zero_col else select_scenario(r, thresholds)
    stat = p = None
    fit_c = None
    if run_lrt and fit_b.loglik is not None:
        fit_c = fit_mle_deming(dataset, lam, n_boot=0)
        stat, p = likelihood_ratio_test(fit_b, fit_c)
    diag = ScenarioDiagnostics(
        r_value=r,
        selected=selected,
        lrt_statistic=stat,
        lrt_p_value=p,
        thresholds=tuple(thresholds),
        forced=bool(zero_col),
    )
    return diag, fit_b, fit_c
