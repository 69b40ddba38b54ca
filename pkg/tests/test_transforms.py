import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twostage_deming import FirstStageRecord, TransformSpec, propagate_variance, transform_dataset
from twostage_deming.errors import DomainError, UsageError

LOG = TransformSpec("log")


def test_delta_method_examples():
    assert propagate_variance(10.0, 4.0, LOG) == pytest.approx(0.04)
    assert propagate_variance(7.0, 0.3, TransformSpec()) == pytest.approx(0.3)
    assert propagate_variance(0.01, 1e-6, TransformSpec("log", scale=10000)) == pytest.approx(0.01)


def test_transform_dataset_log_example():
    recs = [FirstStageRecord(100.0, 5.0, 25.0, 1.0), FirstStageRecord(10.0, 6.0, 1.0, 1.0), FirstStageRecord(1.0, 7.0, 1.0, 1.0)]
    data = transform_dataset(recs, LOG, TransformSpec())
    assert data.x[0] == pytest.approx(math.log(100))
    assert data.var_x[0] == pytest.approx(0.0025)
    np.testing.assert_array_equal(data.y, [5.0, 6.0, 7.0])


def test_identity_keeps_fields():
    recs = [FirstStageRecord(i, 2.0 * i, 0.1 * i, 0.2, 1.0 + i) for i in range(1, 5)]
    data = transform_dataset(recs)
    for r, o in zip(recs, data.observations):
        assert (o.x, o.y, o.var_x, o.var_y, o.weight) == (r.z, r.w, r.var_z, r.var_w, r.weight)


def test_domain_error_identifies_record():
    recs = [FirstStageRecord(1.0, 1.0, 0.1, 0.1), FirstStageRecord(0.0, 1.0, 0.1, 0.1), FirstStageRecord(2.0, 1.0, 0.1, 0.1)]
    with pytest.raises(DomainError) as err:
        transform_dataset(recs, LOG, TransformSpec())
    assert err.value.index == 1
    with pytest.raises(DomainError):
        TransformSpec("logit")(1.5)


def test_parse_specs():
    assert TransformSpec.parse("power:0.5") == TransformSpec("power", 1.0, 0.5)
    assert TransformSpec.parse("power(2)", 3.0) == TransformSpec("power", 3.0, 2.0)
    with pytest.raises(UsageError):
        TransformSpec.parse("sqrt")
    with pytest.raises(UsageError):
        TransformSpec("log", scale=0.0)


@pytest.mark.parametrize("spec", [LOG, TransformSpec("logit", 0.5), TransformSpec("power", 2.0, 0.5), TransformSpec("identity", 3.0)])
def test_derivative_matches_finite_difference(spec):
    z = np.array([0.3, 0.7, 1.1])
    h = 1e-6
    fd = (spec(z + h) - spec(z - h)) / (2 * h)
    np.testing.assert_allclose(spec.derivative(z), fd, rtol=1e-6)


@pytest.mark.parametrize("spec", [LOG, TransformSpec("logit", 0.5), TransformSpec("power", 2.0, 1.5)])
def test_inverse_round_trip(spec):
    z = np.array([0.2, 0.9, 1.7])
    np.testing.assert_allclose(spec.inverse(spec(z)), z, rtol=1e-12)


positive = st.floats(1e-3, 1e3)


@given(positive, st.floats(0, 10), st.floats(1e-3, 1e4))
@settings(max_examples=100)
def test_log_variance_independent_of_scale(z, v, c):
    assert propagate_variance(z, v, TransformSpec("log", c)) == pytest.approx(propagate_variance(z, v, LOG), rel=1e-12)


@given(st.lists(positive, min_size=2, max_size=10, unique=True), st.sampled_from(["log", "identity", "power"]))
@settings(max_examples=100)
def test_transforms_preserve_order(zs, kind):
    spec = TransformSpec(kind, 2.0, 0.5 if kind == "power" else None)
    z = np.sort(np.array(zs))
    assert np.all(np.diff(spec(z)) >= 0)


@given(positive, st.floats(0, 10))
@settings(max_examples=100)
def test_propagated_variance_non_negative(z, v):
    assert propagate_variance(z, v, TransformSpec("power", 1.0, 0.5)) >= 0
