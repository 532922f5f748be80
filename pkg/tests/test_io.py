import math
import os
import stat

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from lmsm.io import format_float, provenance_hash, read_csv, write_csv, write_json


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_format_round_trips(x):
    assert float(format_float(x)) == x


def test_nan_format():
    assert format_float(math.nan) == "nan"


def test_csv_round_trip_with_comments(tmp_path):
    p = tmp_path / "a.csv"
    write_csv(p, ["k", "x"], [np.arange(3), np.array([0.1, 1e-300, -2.5])],
              comments=["hello", "world"])
    lines = p.read_text().splitlines()
    assert lines[:3] == ["# hello", "# world", "k,x"]
    assert lines[3] == "0,0.1"
    header, data = read_csv(p)
    assert header == ["k", "x"]
    assert data[1, 1] == 1e-300


def test_atomic_write_leaves_no_temp(tmp_path):
    p = tmp_path / "sub" / "b.json"
    write_json(p, {"a": np.float64(1.5), "b": np.arange(2), "c": math.inf})
    assert os.listdir(tmp_path / "sub") == ["b.json"]
    assert stat.S_IMODE(os.stat(p).st_mode) == 0o644
    assert '"c": "inf"' in p.read_text()


def test_hash_ignores_key_order():
    assert provenance_hash({"a": 1, "b": [1, 2]}) == provenance_hash({"b": [1, 2], "a": 1})
    assert provenance_hash({"a": 1}) != provenance_hash({"a": 2})
