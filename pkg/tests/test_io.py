import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from dualfb.errors import ConfigError, InputError, PGMError
from dualfb.io import (
    TRACE_HEADER,
    load_config,
    read_matrix_csv,
    read_pgm,
    read_trace_csv,
    read_vector_csv,
    write_matrix_csv,
    write_pgm,
    write_trace_csv,
    write_vector_csv,
)
from dualfb.solver import TraceRow


def test_ascii_pgm(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_text("P2\n# two by two\n2 2\n255\n0 128\n255 64\n")
    img, maxval = read_pgm(p, return_maxval=True)
    assert maxval == 255
    np.testing.assert_array_equal(img, [[0, 128 / 255], [1, 64 / 255]])


def test_binary_16bit_fixture(tmp_path):
    p = tmp_path / "b.pgm"
    payload = bytes([0x00, 0x01, 0x12, 0x34, 0xFF, 0xFF, 0x80, 0x00])
    p.write_bytes(b"P5\n2 2\n65535\n" + payload)
    img = read_pgm(p)
    np.testing.assert_array_equal(img * 65535, [[1, 0x1234], [65535, 0x8000]])


@pytest.mark.parametrize("maxval", [255, 65535])
@pytest.mark.parametrize("binary", [True, False])
def test_write_read_idempotent(tmp_path, maxval, binary):
    rng = np.random.default_rng(maxval)
    img = np.rint(rng.uniform(size=(8, 8)) * maxval) / maxval
    p = tmp_path / "c.pgm"
    write_pgm(p, img, maxval, binary)
    back = read_pgm(p)
    np.testing.assert_array_equal(back, img)
    write_pgm(p, back, maxval, binary)
    np.testing.assert_array_equal(read_pgm(p), back)


def test_write_clamps_and_rounds(tmp_path):
    p = tmp_path / "d.pgm"
    write_pgm(p, [[-0.5, 1.7], [0.5 / 255 + 1e-9, 0.3]])
    assert p.read_bytes() == b"P5\n2 2\n255\n" + bytes([0, 255, 1, 76])


@pytest.mark.parametrize(
    "content",
    [
        b"P3\n1 1\n255\n0\n",
        b"P5\n2 x\n255\n",
        b"P5\n2 2\n",
        b"P5\n2 2\n0\n\x00\x00\x00\x00",
        b"P5\n2 2\n70000\n",
        b"P5\n2 2\n255\n\x00\x00",
        b"P2\n2 2\n255\n0 1 2\n",
        b"P2\n1 1\n100\n101\n",
        b"P2\n1 1\n255\nzz\n",
    ],
)
def test_malformed_pgm(tmp_path, content):
    p = tmp_path / "bad.pgm"
    p.write_bytes(content)
    with pytest.raises(PGMError):
        read_pgm(p)


def test_write_validation(tmp_path):
    with pytest.raises(InputError):
        write_pgm(tmp_path / "x.pgm", np.zeros((2, 2)), maxval=100)
    with pytest.raises(InputError):
        write_pgm(tmp_path / "x.pgm", np.zeros(4))
    with pytest.raises(InputError):
        write_pgm(tmp_path / "x.pgm", [[np.nan]])


def test_vector_csv_single_line(tmp_path):
    p = tmp_path / "v.csv"
    p.write_text("1.0,2.0,3.0\n")
    np.testing.assert_array_equal(read_vector_csv(p), [1.0, 2.0, 3.0])


def test_vector_csv_one_per_line(tmp_path):
    p = tmp_path / "v.csv"
    p.write_text("1\n\n-2.5e-3\n.5\n")
    np.testing.assert_array_equal(read_vector_csv(p), [1.0, -2.5e-3, 0.5])


@settings(max_examples=40)
@given(hnp.arrays(float, st.integers(1, 20), elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_vector_round_trip_bitwise(tmp_path_factory, v):
    p = tmp_path_factory.mktemp("rt") / "v.csv"
    write_vector_csv(p, v)
    back = read_vector_csv(p)
    assert back.tobytes() == np.asarray(v, dtype=float).tobytes()


def test_empty_file_reports_line_one(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("")
    with pytest.raises(InputError, match=r":1:"):
        read_vector_csv(p)


def test_parse_error_line_number(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("1\n2\n3,5\n")
    with pytest.raises(InputError, match=r":3:"):
        read_vector_csv(p)
    p.write_text("1\n2,0\n3\n")
    with pytest.raises(InputError, match=r":2:"):
        read_vector_csv(p)


@pytest.mark.parametrize("token", ["1,0", "nan", "inf", "0x10", "1e"])
def test_rejects_non_decimal(tmp_path, token):
    p = tmp_path / "e.csv"
    p.write_text(token.replace(",", ";") + "\n")
    with pytest.raises(InputError):
        read_vector_csv(p)


def test_matrix_csv(tmp_path):
    p = tmp_path / "m.csv"
    A = np.array([[0.1, -2.0, 3.0], [4.0, 5.5, 1e-20]])
    write_matrix_csv(p, A)
    np.testing.assert_array_equal(read_matrix_csv(p), A)
    p.write_text("1,2\n3\n")
    with pytest.raises(InputError, match=r":2:"):
        read_matrix_csv(p)


def test_trace_round_trip(tmp_path):
    rows = [TraceRow(0, 1.5, None, None, None, 0.1234), TraceRow(1, 0.25, 3.0, 2.5, 0.5, 0.9)]
    p = tmp_path / "t.csv"
    write_trace_csv(p, rows)
    lines = p.read_text().splitlines()
    assert lines[0] == TRACE_HEADER
    assert lines[1] == "0,1.5,,,,0.123"
    recs = read_trace_csv(p)
    assert recs[1] == dict(n=1, iterate_change=0.25, primal_obj=3.0, dual_obj=2.5, gap=0.5, wall_time_ms=0.9)
    assert recs[0]["gap"] is None


def test_trace_bad_header(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("n,change\n")
    with pytest.raises(InputError):
        read_trace_csv(p)


def test_config_schema(tmp_path):
    p = tmp_path / "c.toml"
    schema = {"solver": {"max_iter", "tol"}, "tv": {"mu"}}
    p.write_text("[solver]\nmax_iter = 5\n[tv]\nmu = 0.2\n")
    assert load_config(p, schema) == {"solver": {"max_iter": 5}, "tv": {"mu": 0.2}}
    p.write_text("[solver]\nmaxiter = 5\n")
    with pytest.raises(ConfigError, match="maxiter"):
        load_config(p, schema)
    p.write_text("[other]\nx = 1\n")
    with pytest.raises(ConfigError):
        load_config(p, schema)
    p.write_text("solver = 3\n")
    with pytest.raises(ConfigError):
        load_config(p, schema)
    p.write_text("[solver\n")
    with pytest.raises(ConfigError):
        load_config(p, schema)
