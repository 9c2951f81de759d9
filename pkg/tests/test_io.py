import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ktvgl.io import DataError, NetworkFile, read_network, read_series, write_network, write_series
from ktvgl.tensor import TensorSeries

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=40, deadline=None)
@given(st.lists(finite, min_size=12, max_size=12))
def test_series_round_trip_is_lossless(tmp_path_factory, vals):
    x = TensorSeries((np.array(vals[:6]).reshape(1, 2, 3), np.array(vals[6:]).reshape(1, 2, 3)))
    path = tmp_path_factory.mktemp("io") / "s.txt"
    write_series(path, x, meta={"k": 1})
    y, header = read_series(path)
    assert header["meta"] == {"k": 1}
    for a, b in zip(x.samples, y.samples):
        np.testing.assert_array_equal(a, b)


def test_uneven_samples_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    x = TensorSeries((rng.standard_normal((2, 2, 2, 2)), rng.standard_normal((1, 2, 2, 2))))
    write_series(tmp_path / "s.txt", x)
    y, _ = read_series(tmp_path / "s.txt")
    assert y.n_per_step == (2, 1)
    np.testing.assert_array_equal(y.samples[0], x.samples[0])


def _lines(path):
    return open(path).read().splitlines()


def test_series_reader_rejects_broken_files(tmp_path):
    x = TensorSeries.from_array(np.ones((2, 1, 2, 2)))
    good = tmp_path / "s.txt"
    write_series(good, x)
    lines = _lines(good)
    cases = {
        "missing": lines[:-1],
        "dup": lines[:-1] + [lines[-2]],
        "nan": lines[:-1] + [lines[-1].rsplit(" ", 1)[0] + " nan"],
        "range": lines[:-1] + ["1 0 1 5 1.0"],
        "fields": lines[:-1] + ["1 0 1 1"],
        "header": ["not json"] + lines[1:],
        "version": [lines[0].replace('"schema_version":1', '"schema_version":9')] + lines[1:],
    }
    for name, body in cases.items():
        p = tmp_path / f"{name}.txt"
        p.write_text("\n".join(body) + "\n")
        with pytest.raises(DataError):
            read_series(p)


def test_network_round_trip_and_symmetry(tmp_path):
    rng = np.random.default_rng(1)
    thetas = []
    for d in (2, 3):
        a = rng.standard_normal((4, d, d))
        thetas.append(a + np.swapaxes(a, 1, 2))
    write_network(tmp_path / "n.txt", NetworkFile(thetas, kind="truth",
                                                   header={"change_points": [[1], [2]]}))
    net = read_network(tmp_path / "n.txt")
    assert net.kind == "truth" and net.header["change_points"] == [[1], [2]]
    for a, b in zip(thetas, net.thetas):
        np.testing.assert_array_equal(a, b)


def test_network_reader_rejects_bad_mode(tmp_path):
    write_network(tmp_path / "n.txt", NetworkFile([np.eye(2)[None]]))
    lines = _lines(tmp_path / "n.txt")
    lines[-1] = "0 3 1 1 1.0"
    (tmp_path / "bad.txt").write_text("\n".join(lines) + "\n")
    with pytest.raises(DataError):
        read_network(tmp_path / "bad.txt")


def test_series_file_is_not_a_network(tmp_path):
    write_series(tmp_path / "s.txt", TensorSeries.from_array(np.ones((1, 1, 2))))
    with pytest.raises(DataError):
        read_network(tmp_path / "s.txt")
