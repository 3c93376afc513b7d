import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tpt.serialize import content_hash, dumps, format_float, read_samples, samples_to_csv, write_samples


def test_format_float_examples():
    assert format_float(1.0) == "1.0"
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(1e300) == "1.0000000000000001e+300"
    assert format_float(math.inf) == "Infinity"
    assert format_float(-math.inf) == "-Infinity"
    assert format_float(math.nan) == "NaN"


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_float_round_trips(x):
    assert float(format_float(x)) == x


def test_dumps_preserves_key_order_and_types():
    obj = {"b": 1, "a": [1.5, 2], "c": {"x": None, "y": True}, "d": np.float64(0.25), "e": np.arange(3)}
    text = dumps(obj)
    assert list(json.loads(text)) == ["b", "a", "c", "d", "e"]
    assert json.loads(text) == {"b": 1, "a": [1.5, 2], "c": {"x": None, "y": True}, "d": 0.25, "e": [0, 1, 2]}
    assert dumps({}) == "{}" and dumps([]) == "[]"
    assert dumps([1, 2], indent=None) == "[1, 2]"


def test_dumps_rejects_unknown_types():
    with pytest.raises(TypeError):
        dumps({"x": object()})


def test_content_hash_is_sha256():
    assert content_hash("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    assert content_hash("abc") == content_hash(b"abc")


def test_samples_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((20, 3))
    z = np.where(rng.random(20) < 0.5, -1, 1)
    path = tmp_path / "s.csv"
    write_samples(path, X, z)
    pts, labels = read_samples(path)
    assert np.array_equal(pts, X) and labels.tolist() == z.tolist()
    write_samples(path, X)
    pts, labels = read_samples(path)
    assert np.array_equal(pts, X) and labels is None


def test_samples_csv_header():
    assert samples_to_csv([[1.0, 2.0]], [1]).splitlines() == ["x1,x2,label", "1.0,2.0,1"]


@pytest.mark.parametrize(
    "text",
    ["", "a,b\n1,2\n", "x1,label\n0.5,3\n", "x1,x2\n1.0\n", "x2,x1\n1,2\n"],
)
def test_read_samples_rejects_bad_files(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ValueError):
        read_samples(path)
