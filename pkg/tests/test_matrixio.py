"""Matrix container round trips and header checks."""

import numpy as np
import pytest

from chartloc.matrixio import read_matrix, write_matrix


def test_round_trip(tmp_path, rng):
    m = rng.uniform(0, 1, size=(9, 9))
    p = tmp_path / "m.ccmx"
    write_matrix(p, m, kind="dissimilarity", meta={"eta": 0.95})
    back, header = read_matrix(p)
    assert back.dtype == np.float64
    assert header["kind"] == "dissimilarity"
    assert header["meta"]["eta"] == 0.95
    # storage is float32: equality after the same downcast
    assert np.array_equal(back, m.astype(np.float32).astype(np.float64))


def test_expect_kind(tmp_path, rng):
    p = tmp_path / "m.ccmx"
    write_matrix(p, rng.uniform(0, 1, size=(4, 4)), kind="geodesic")
    read_matrix(p, expect_kind="geodesic")
    with pytest.raises(ValueError):
        read_matrix(p, expect_kind="dissimilarity")


def test_malformed(tmp_path, rng):
    p = tmp_path / "m.ccmx"
    write_matrix(p, rng.uniform(0, 1, size=(4, 6)), kind="geodesic")
    raw = p.read_bytes()
    p.write_bytes(raw[:len(raw) - 5])
    with pytest.raises(ValueError):
        read_matrix(p)
    p.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError):
        read_matrix(p)
    # non-square is fine, shape carried by the header
    p2 = tmp_path / "m2.ccmx"
    write_matrix(p2, rng.uniform(0, 1, size=(3, 7)), kind="geodesic")
    back, _ = read_matrix(p2)
    assert back.shape == (3, 7)
