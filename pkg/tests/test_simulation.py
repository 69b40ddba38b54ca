import numpy as np
import pytest

from twostage_deming import SimulationSpec, generate_dataset, run_coverage_study
from twostage_deming.errors import ValidationError
from twostage_deming.simulation import GroupCount, estimate_group_proportions, first_stage_from_groups


def test_noiseless_points_on_line():
    spec = SimulationSpec(n=50, beta0=-1, beta1=2, var_x_law=("constant", 0), var_y_law=("constant", 0), seed=1)
    data, truth = generate_dataset(spec)
    np.testing.assert_array_equal(data.x, truth.X)
    np.testing.assert_allclose(data.y, -1 + 2 * data.x)


def test_error_variances_add():
    spec = SimulationSpec(n=100_000, var_x_law=("constant", 0.3), var_y_law=("constant", 0.1), sigma2=0.2, lam=0.5, seed=2)
    data, truth = generate_dataset(spec)
    assert np.var(data.x - truth.X) == pytest.approx(0.5, rel=0.02)
    # y picks up var_y plus sigma2 / lam
    assert np.var(data.y - truth.Y) == pytest.approx(0.5, rel=0.02)


def test_known_variances_are_the_profile():
    spec = SimulationSpec(n=200, var_x_law=("proportional", 0.1), var_y_law=("uniform", 0.1, 0.2), seed=3)
    data, truth = generate_dataset(spec)
    np.testing.assert_allclose(data.var_x, 0.1 * np.abs(truth.X))
    assert data.var_y.min() >= 0.1 and data.var_y.max() <= 0.2


def test_means_match_expectation():
    spec = SimulationSpec(n=100_000, beta0=1.0, beta1=2.0, x_law=("normal", 3.0, 1.0), seed=4)
    data, _ = generate_dataset(spec)
    se_x = np.sqrt(1.0 + 0.1) / np.sqrt(spec.n)
    se_y = np.sqrt(4.0 + 0.1) / np.sqrt(spec.n)
    assert abs(data.x.mean() - 3.0) < 3 * se_x
    assert abs(data.y.mean() - 7.0) < 3 * se_y


def test_same_seed_same_data():
    spec = SimulationSpec(n=30, sigma2=0.1, weight_law=("integers", 1, 5), seed=5)
    a, _ = generate_dataset(spec)
    b, _ = generate_dataset(spec)
    assert a.fingerprint() == b.fingerprint()


def test_invalid_spec():
    with pytest.raises(ValidationError):
        SimulationSpec(n=2)
    with pytest.raises(ValidationError):
        SimulationSpec(var_x_law=("constant", -1.0))
    with pytest.raises(ValidationError):
        SimulationSpec(x_law=("cauchy", 0, 1))


def test_group_proportions():
    est = estimate_group_proportions([GroupCount(25, 100), GroupCount(0, 40), GroupCount(40, 40)])
    assert est[0].p == 0.25 and est[0].var == pytest.approx(0.001875) and not est[0].floored
    assert est[1].p == 0.0 and est[1].var > 0 and est[1].floored
    assert est[2].p == 1.0 and est[2].var > 0 and est[2].floored
    with pytest.raises(ValidationError):
        GroupCount(5, 4)


def test_first_stage_pairs_groups():
    recs = first_stage_from_groups([GroupCount(5, 50, 3.0), GroupCount(10, 50)], [GroupCount(1, 20), GroupCount(4, 20)])
    assert recs[0].z == 0.1 and recs[0].w == 0.05 and recs[0].weight == 3.0
    with pytest.raises(ValidationError):
        first_stage_from_groups([GroupCount(1, 2)], [])


def test_zero_noise_study_covers_everything():
    spec = SimulationSpec(n=20, beta0=1, beta1=2, var_x_law=("constant", 0), var_y_law=("constant", 0), seed=6)
    report = run_coverage_study(spec, "A", M=50, B=50, include_wls=False)
    assert report.summary["A"]["coverage_beta0"] == 1.0
    assert report.summary["A"]["coverage_beta1"] == 1.0


@pytest.mark.slow
def test_coverage_study_reproducible():
    spec = SimulationSpec(n=60, beta1=1.5, var_x_law=("constant", 0.2), var_y_law=("constant", 0.2), seed=7)
    a = run_coverage_study(spec, "B", M=50, B=50)
    b = run_coverage_study(spec, "B", M=50, B=50)
    assert a.to_dict() == b.to_dict()
    assert a.estimates == b.estimates
    assert set(a.summary) == {"B", "WLS", "attenuation_fraction"}


def test_study_needs_enough_replicates():
    with pytest.raises(ValidationError):
        run_coverage_study(SimulationSpec(), M=10)
