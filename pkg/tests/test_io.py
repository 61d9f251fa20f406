import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from roundtrip import io as rio
from roundtrip.errors import InputError
from roundtrip.linsys import random_pair

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 4)), elements=finite))
def test_matrix_csv_round_trip(tmp_path_factory, M):
    p = tmp_path_factory.mktemp("m") / "m.csv"
    rio.write_matrix(p, M)
    assert np.allclose(rio.read_matrix(p), M, rtol=1e-12, atol=0)


@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 4)), elements=finite))
def test_matrix_text_round_trip(M):
    assert np.allclose(rio.parse_matrix_text(rio.format_matrix_text(M)), M, rtol=1e-12, atol=0)


def test_matrix_text_comments_and_errors():
    M = rio.parse_matrix_text("# header\n1, 2\n3 4  # tail\n")
    assert np.array_equal(M, [[1, 2], [3, 4]])
    with pytest.raises(InputError):
        rio.parse_matrix_text("1 2\n3\n")
    with pytest.raises(InputError):
        rio.parse_matrix_text("# nothing\n")


def test_formatting_is_fixed():
    assert rio.fmt(0.1) == "1.000000000000e-01"
    assert rio.fmt(True) == "1" and rio.fmt(np.int64(3)) == "3" and rio.fmt(None) == ""


def test_dict_rows_union_header(tmp_path):
    p = rio.write_dict_rows(tmp_path / "r.csv", [{"a": 1}, {"b": 2.0, "a": 3}])
    header, rows = rio.read_csv(p)
    assert header == ["a", "b"]
    assert rows == [["1", ""], ["3", "2.000000000000e+00"]]


def test_orbit_csv(tmp_path, double_well_orbit):
    _, _, orbit = double_well_orbit
    p = rio.write_orbit(tmp_path / "o.csv", orbit, samples=50)
    t, X, H = rio.read_orbit(p)
    assert t.size == 51 and X.shape == (51, 4)
    assert np.max(np.abs(H)) <= 1e-8
    assert np.allclose(X[0], X[-1], atol=1e-8)


def test_eigenvalue_rows_sorted(tmp_path):
    M = np.array([[0.0, -1.0], [1.0, 0.0]])
    header, rows = rio.read_csv(rio.write_eigenvalues(tmp_path / "e.csv", M))
    assert header == ["re", "im", "abs", "arg"]
    assert float(rows[0][1]) < 0 < float(rows[1][1])


def test_pair_bundle_round_trip(tmp_path, rng):
    pair, _ = random_pair(2, 1.0, rng, n_grid=11)
    rio.write_pair_bundle(tmp_path / "b", pair)
    back = rio.read_pair_bundle(tmp_path / "b")
    t, a, Ls = back["Ltilde"]
    assert np.allclose(t, pair.grid)
    assert np.allclose(a, [pair.a_tilde.value(s) for s in t], rtol=1e-11)
    assert np.allclose(Ls, [pair.L_tilde.value(s) for s in t], rtol=1e-11, atol=1e-12)


def test_json_handles_numpy(tmp_path):
    p = rio.write_json(tmp_path / "x.json", {"a": np.arange(2), "b": np.float64(0.5), "c": np.bool_(True)})
    assert json.loads(p.read_text()) == {"a": [0, 1], "b": 0.5, "c": True}
