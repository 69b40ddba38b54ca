import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import random_dataset
from oracles import generalized_deming_oracle, simple_deming_oracle
from twostage_deming import Dataset, DemingFit, estimate_true_values, fit_generalized_deming, fit_simple_deming, fit_wls
from twostage_deming.deming_ls import chi2_objective, profiled_chi2, york_batch
from twostage_deming.errors import DegenerateFitError, SingularWeightError


def make(x, y, vx=1.0, vy=1.0, w=None):
    x = np.asarray(x, float)
    return Dataset(x, y, np.broadcast_to(vx, x.shape), np.broadcast_to(vy, x.shape), w)


# -- simple Deming ------------------------------------------------------------


@pytest.mark.parametrize("lam", [0.01, 1.0, 50.0])
def test_collinear_points_exact(lam):
    fit = fit_simple_deming(make([0, 1, 2], [1, 3, 5]), lam)
    assert fit.beta0 == pytest.approx(1.0, abs=1e-12)
    assert fit.beta1 == pytest.approx(2.0, abs=1e-12)
    assert fit.residual_sd == pytest.approx(0.0, abs=1e-12)


def test_three_point_example_matches_oracle(three_points):
    fit = fit_simple_deming(three_points, 1.0)
    assert fit.beta1 == pytest.approx(1.5388, abs=1e-4)
    assert fit.beta0 == pytest.approx(0.1279, abs=1e-4)
    b0, b1, _ = simple_deming_oracle(three_points.x, three_points.y, 1.0)
    assert abs(fit.beta0 - b0) < 1e-6 and abs(fit.beta1 - b1) < 1e-6


def test_small_lambda_gives_ols(three_points):
    assert fit_simple_deming(three_points, 1e-8).beta1 == pytest.approx(1.5, rel=1e-6)


def test_degenerate_inputs():
    with pytest.raises(DegenerateFitError):
        fit_simple_deming(make([1, 1, 1], [0, 1, 2]))
    with pytest.raises(DegenerateFitError):
        fit_simple_deming(make([0, 1, 2, 3], [1, 0, 0, 1]))


def test_true_values_projection():
    fit = DemingFit(0.0, 1.0, lam=1.0, scenario="A")
    tv = estimate_true_values(make([1.0], [3.0]), fit)
    assert tv.X_hat[0] == pytest.approx(2.0)
    assert tv.Y_hat[0] == pytest.approx(2.0)


def test_point_on_line_is_its_own_true_value():
    fit = DemingFit(1.0, 2.0, lam=3.0, scenario="A")
    tv = estimate_true_values(make([0.5, 2.0], [2.0, 5.0]), fit)
    np.testing.assert_allclose(tv.d, 0.0)
    np.testing.assert_allclose(tv.X_hat, [0.5, 2.0])


def test_jackknife_covariance_is_psd(three_points):
    data = random_dataset(np.random.default_rng(3), 25, hetero=False)
    cov = fit_simple_deming(data).cov_params
    assert np.all(np.linalg.eigvalsh(cov) >= -1e-14)


cloud = st.lists(
    st.tuples(st.floats(-10, 10, allow_nan=False), st.floats(-10, 10, allow_nan=False)), min_size=3, max_size=15
)
lams = st.floats(1e-3, 1e3)


def _usable(pts):
    x, y = np.array(pts).T
    dx, dy = x - x.mean(), y - y.mean()
    return abs(np.sum(dx * dy)) > 1e-3 and np.sum(dx * dx) > 1e-3 and np.sum(dy * dy) > 1e-3


@given(cloud, lams)
@settings(max_examples=100, deadline=None)
def test_swap_symmetry(pts, lam):
    assume(_usable(pts))
    x, y = np.array(pts).T
    f = fit_simple_deming(make(x, y), lam)
    g = fit_simple_deming(make(y, x), 1.0 / lam)
    assert f.beta1 * g.beta1 == pytest.approx(1.0, rel=1e-10)


@given(cloud, lams, st.floats(0.1, 10), st.floats(0.1, 10))
@settings(max_examples=100, deadline=None)
def test_scale_equivariance(pts, lam, a, b):
    assume(_usable(pts))
    x, y = np.array(pts).T
    f = fit_simple_deming(make(x, y), lam)
    # lam is Var(x error)/Var(y error), so it picks up a**2 / b**2
    g = fit_simple_deming(make(a * x, b * y), lam * a * a / (b * b))
    assert g.beta1 == pytest.approx(f.beta1 * b / a, rel=1e-10)


def test_lambda_limits(three_points):
    s = three_points
    dx, dy = s.x - s.x.mean(), s.y - s.y.mean()
    u, q, p = dx @ dx, dy @ dy, dx @ dy
    assert fit_simple_deming(s, 1e-8).beta1 == pytest.approx(p / u, rel=1e-4)
    assert fit_simple_deming(s, 1e8).beta1 == pytest.approx(q / p, rel=1e-4)


# -- generalized Deming ---------------------------------------------------------


def test_collinear_generalized_has_zero_objective():
    data = make([0, 1, 2, 3], [1, 3, 5, 7], [0.1, 0.4, 0.2, 0.3], [0.3, 0.1, 0.2, 0.5])
    fit = fit_generalized_deming(data)
    assert fit.beta1 == pytest.approx(2.0, abs=1e-12)
    assert profiled_chi2(data, fit.beta0, fit.beta1) == pytest.approx(0.0, abs=1e-20)


def test_unit_variances_match_simple(three_points):
    assert fit_generalized_deming(three_points).beta1 == pytest.approx(fit_simple_deming(three_points, 1.0).beta1, abs=1e-10)


@pytest.mark.parametrize("lam", [0.25, 1.0, 4.0])
def test_generalized_nests_simple(lam):
    data = random_dataset(np.random.default_rng(11), 8)
    n = data.n
    g = fit_generalized_deming(data, u=np.ones(n), v=np.full(n, 1.0 / lam))
    s = fit_simple_deming(data, lam)
    assert abs(g.beta0 - s.beta0) < 1e-8 and abs(g.beta1 - s.beta1) < 1e-8


def test_heteroscedastic_example_matches_oracle(hetero4):
    fit = fit_generalized_deming(hetero4)
    b0, b1, X = generalized_deming_oracle(hetero4.x, hetero4.y, hetero4.var_x, hetero4.var_y)
    assert abs(fit.beta0 - b0) < 1e-6 and abs(fit.beta1 - b1) < 1e-6
    # profiling X in closed form gives the same objective as the free minimum
    assert profiled_chi2(hetero4, fit.beta0, fit.beta1) == pytest.approx(chi2_objective(hetero4, b0, b1, X), rel=1e-8)


def test_singular_weight():
    data = make([0, 1, 2, 3], [0, 1, 2, 4], [0.1, 0.0, 0.1, 0.1], [0.1, 0.0, 0.1, 0.1])
    with pytest.raises(SingularWeightError):
        fit_generalized_deming(data)


def test_one_zero_variance_per_row_is_allowed():
    data = make([0, 1, 2, 3], [0, 1.2, 1.9, 3.1], [0.0, 0.1, 0.0, 0.1], [0.1, 0.0, 0.1, 0.1])
    fit = fit_generalized_deming(data)
    assert fit.loglik is None
    assert np.isfinite(fit.beta1)


def test_york_reports_non_convergence(hetero4):
    res = york_batch(hetero4.x, hetero4.y, hetero4.var_x, hetero4.var_y, max_iter=1)
    assert not bool(res["converged"])


def test_batched_york_matches_single_fits():
    rng = np.random.default_rng(5)
    sets = [random_dataset(rng, 9) for _ in range(6)]
    stack = lambda name: np.stack([getattr(d, name) for d in sets])
    res = york_batch(stack("x"), stack("y"), stack("var_x"), stack("var_y"))
    for i, d in enumerate(sets):
        assert res["beta1"][i] == pytest.approx(fit_generalized_deming(d).beta1, abs=1e-12)


def test_williamson_errors_match_monte_carlo():
    """Standard errors agree with the spread of slopes over repeated datasets."""
    rng = np.random.default_rng(2024)
    n = 60
    X = np.linspace(0, 4, n)
    vx = rng.uniform(0.02, 0.1, n)
    vy = rng.uniform(0.02, 0.1, n)
    b0s, b1s, se0, se1 = [], [], [], []
    for _ in range(400):
        x = X + rng.normal(0, np.sqrt(vx))
        y = 1.0 + 2.0 * X + rng.normal(0, np.sqrt(vy))
        f = fit_generalized_deming(Dataset(x, y, vx, vy))
        b0s.append(f.beta0)
        b1s.append(f.beta1)
        se0.append(np.sqrt(f.cov_params[0, 0]))
        se1.append(np.sqrt(f.cov_params[1, 1]))
    assert np.mean(se1) == pytest.approx(np.std(b1s), rel=0.12)
    assert np.mean(se0) == pytest.approx(np.std(b0s), rel=0.12)


# -- WLS baseline -----------------------------------------------------------------


def test_wls_three_point_example(three_points):
    fit = fit_wls(three_points)
    assert fit.beta1 == pytest.approx(1.5, abs=1e-12)
    assert fit.beta0 == pytest.approx(1 / 6, abs=1e-12)
    assert fit.scenario == "WLS"


def test_wls_equal_weights_is_ols():
    data = random_dataset(np.random.default_rng(8), 12)
    slope, icept = np.polyfit(data.x, data.y, 1)
    fit = fit_wls(data)
    assert fit.beta1 == pytest.approx(slope, rel=1e-10)
    assert fit.beta0 == pytest.approx(icept, rel=1e-10, abs=1e-12)


def test_wls_weight_equals_duplication():
    x, y = [0.0, 1.0, 2.0, 3.5], [0.3, 1.1, 2.6, 3.2]
    dup = fit_wls(make(x + [1.0], y + [1.1]))
    wtd = fit_wls(make(x, y, w=[1, 2, 1, 1]))
    assert abs(dup.beta0 - wtd.beta0) < 1e-12 and abs(dup.beta1 - wtd.beta1) < 1e-12


def test_wls_degenerate():
    with pytest.raises(DegenerateFitError):
        fit_wls(make([2, 2, 2], [0, 1, 2]))
