import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twostage_deming import Dataset, DemingFit, apply_weights, parse_dataset, parse_first_stage
from twostage_deming.core import sniff_schema
from twostage_deming.errors import InsufficientDataError, ParseError, ValidationError


def csv_text(*rows, header="x,y,var_x,var_y"):
    return io.StringIO("\n".join([header, *rows]) + "\n")


def test_parse_fills_default_weights():
    data = parse_dataset(csv_text("0,1,0.1,0.1", "1,3,0.1,0.1", "2,5,0.1,0.1"))
    assert data.n == 3
    np.testing.assert_array_equal(data.weight, [1.0, 1.0, 1.0])
    np.testing.assert_array_equal(data.y, [1.0, 3.0, 5.0])


def test_parse_negative_variance_names_row():
    with pytest.raises(ValidationError) as err:
        parse_dataset(csv_text("0,1,0.1,0.1", "1,3,-0.5,0.1", "2,5,0.1,0.1"))
    assert err.value.row == 3


def test_parse_two_rows_is_insufficient():
    with pytest.raises(InsufficientDataError):
        parse_dataset(csv_text("0,1,0.1,0.1", "1,3,0.1,0.1"))


def test_parse_malformed_number_names_row_and_column():
    with pytest.raises(ParseError) as err:
        parse_dataset(csv_text("0,1,0.1,0.1", "1,abc,0.1,0.1", "2,5,0.1,0.1"))
    assert err.value.row == 3
    assert err.value.column == "y"


def test_parse_zero_weight_rejected():
    with pytest.raises(ValidationError):
        parse_dataset(csv_text("0,1,0.1,0.1,1", "1,3,0.1,0.1,0", "2,5,0.1,0.1,1", header="x,y,var_x,var_y,weight"))


def test_parse_missing_column():
    with pytest.raises(ParseError):
        parse_dataset(csv_text("0,1,0.1", "1,3,0.1", "2,5,0.1", header="x,y,var_x"))


def test_schema_mapping_and_sniffing():
    text = "a,b,va,vb\n0,1,0.1,0.1\n1,3,0.1,0.1\n2,5,0.1,0.1\n"
    data = parse_dataset(io.StringIO(text), schema={"x": "a", "y": "b", "var_x": "va", "var_y": "vb"})
    np.testing.assert_array_equal(data.x, [0, 1, 2])
    assert sniff_schema(io.StringIO("z,w,var_z,var_w\n")) == "first_stage"
    assert sniff_schema(io.StringIO("x,y,var_x,var_y,weight\n")) == "second_stage"
    with pytest.raises(ParseError):
        sniff_schema(io.StringIO("p,q\n"))


def test_parse_first_stage():
    recs = parse_first_stage(io.StringIO("z,w,var_z,var_w,weight\n1,2,0.1,0.2,3\n2,3,0.1,0.2,1\n4,5,0.1,0.2,2\n"))
    assert len(recs) == 3
    assert recs[0].weight == 3.0


def test_dataset_is_read_only():
    data = Dataset([0, 1, 2], [1, 2, 3], [0.1] * 3, [0.1] * 3)
    with pytest.raises(ValueError):
        data.x[0] = 5.0


def test_apply_weights_example():
    data = Dataset([0, 1, 2], [0, 1, 2], [0.1, 0.1, 0.1], [0.02, 0.02, 0.02], [4, 1, 1])
    out = apply_weights(data)
    assert out.var_y[0] == pytest.approx(0.005)
    assert out.var_x[0] == pytest.approx(0.025)
    np.testing.assert_array_equal(out.weight, np.ones(3))


def test_apply_weights_identity_for_unit_weights():
    data = Dataset([0, 1, 2], [0, 1, 2], [0.1, 0.2, 0.3], [0.02, 0.02, 0.02])
    assert apply_weights(data) is data


finite = st.floats(-1e3, 1e3, allow_nan=False)
var = st.floats(0, 10, allow_nan=False)
weight = st.floats(0.1, 50, allow_nan=False)
rows = st.lists(st.tuples(finite, finite, var, var, weight), min_size=3, max_size=12)


@given(rows)
@settings(max_examples=60, deadline=None)
def test_apply_weights_idempotent(rs):
    data = Dataset(*map(list, zip(*rs)))
    once = apply_weights(data)
    twice = apply_weights(once)
    np.testing.assert_array_equal(once.var_x, twice.var_x)
    np.testing.assert_array_equal(once.var_y, twice.var_y)
    np.testing.assert_allclose(once.eff_var_y, data.eff_var_y)


@given(rows)
@settings(max_examples=60, deadline=None)
def test_csv_round_trip_is_exact(rs):
    data = Dataset(*map(list, zip(*rs)))
    back = parse_dataset(io.StringIO(data.to_csv()))
    for col in ("x", "y", "var_x", "var_y", "weight"):
        np.testing.assert_array_equal(getattr(back, col), getattr(data, col))
    assert back.fingerprint() == data.fingerprint()


def test_fit_dict_round_trip():
    fit = DemingFit(1.0, 2.0, 0.3, 0.5, np.array([[1.0, 0.1], [0.1, 2.0]]), -3.0, 0.7, "C", 4, True, "bootstrap")
    back = DemingFit.from_dict(fit.to_dict())
    assert back.to_dict() == fit.to_dict()
    assert fit.to_dict()["lambda"] == 0.5
    np.testing.assert_array_equal(fit.predict([0.0, 1.0]), [1.0, 3.0])
