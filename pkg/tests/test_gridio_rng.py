import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlprobe import Field, GridSpec
from nlprobe import rng
from nlprobe.errors import FormatError
from nlprobe.gridio import MAGIC, read_grd1, read_rows, write_grd1, write_rows

M64 = (1 << 64) - 1


class SplitMix64:
    """Textbook sequential SplitMix64 with Python ints."""

    def __init__(self, state):
        self.state = state & M64

    def next(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & M64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M64
        return z ^ (z >> 31)


def test_splitmix_published_vectors():
    assert int(rng.uint64_stream(0, 1)[0]) == 0xE220A8397B1DCDAF
    assert [int(v) for v in rng.uint64_stream(1234567, 5)] == [
        6457827717110365317, 3203168211198807973, 9817491932198370423,
        4593380528125082431, 16408922859458223821]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, M64), st.integers(0, 50))
def test_stream_matches_sequential(key, start):
    ref = SplitMix64(key)
    for _ in range(start):
        ref.next()
    expected = [ref.next() for _ in range(20)]
    assert [int(v) for v in rng.uint64_stream(key, 20, start=start)] == expected


def test_stream_key_formula():
    seed, sid = 20240611, 3
    z = (seed ^ ((0x5851F42D4C957F2D * (sid + 1)) & M64)) & M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M64
    assert rng.stream_key(seed, sid) == z ^ (z >> 31)
    assert rng.stream_key(seed, 0) != rng.stream_key(seed, 1)


def test_uniform_range_and_law():
    u = rng.uniform(rng.stream_key(7), (1000, 100), -2.0, 3.0)
    assert u.min() >= -2.0 and u.max() < 3.0
    assert u.mean() == pytest.approx(0.5, abs=0.02)
    ref = SplitMix64(rng.stream_key(7))
    assert u.ravel()[0] == -2.0 + 5.0 * ((ref.next() >> 11) * 2.0 ** -53)


# --- GRD1 ------------------------------------------------------------------------

def _random_field(complex_, nx=7, ny=5):
    g = GridSpec(nx, ny, -1.0, 2.0, -0.25, 0.75)
    rs = np.random.default_rng(1)
    v = rs.normal(size=g.shape)
    if complex_:
        v = v + 1j * rs.normal(size=g.shape)
    v.flat[0] = -0.0
    v.flat[1] = 5e-324
    return Field(g, v)


@pytest.mark.parametrize("complex_", [False, True])
def test_grd1_roundtrip_bitexact(tmp_path, complex_):
    f = _random_field(complex_)
    p = tmp_path / "f.grd1"
    write_grd1(p, f)
    back = read_grd1(p)
    assert back.grid == f.grid
    assert back.values.tobytes() == f.values.tobytes()
    write_grd1(tmp_path / "g.grd1", back)
    assert (tmp_path / "g.grd1").read_bytes() == p.read_bytes()


def test_grd1_layout(tmp_path):
    f = _random_field(True, 3, 2)
    p = tmp_path / "f.grd1"
    write_grd1(p, f)
    raw = p.read_bytes()
    assert raw[:8] == MAGIC
    assert struct.unpack_from("<III", raw, 8) == (1, 3, 2)
    assert struct.unpack_from("<4d", raw, 20) == (-1.0, 2.0, -0.25, 0.75)
    assert len(raw) == 52 + 3 * 2 * 16
    # row-major over (x, y), interleaved re/im
    assert struct.unpack_from("<2d", raw, 52 + 16) == (f.values[0, 1].real, f.values[0, 1].imag)


def test_grd1_rejects_corruption(tmp_path):
    f = _random_field(False)
    p = tmp_path / "f.grd1"
    write_grd1(p, f)
    raw = p.read_bytes()
    for bad in (raw[:-8], raw + b"\0", b"XXXX" + raw[4:], raw[:20],
                raw[:8] + struct.pack("<I", 7) + raw[12:]):
        q = tmp_path / "bad.grd1"
        q.write_bytes(bad)
        with pytest.raises(FormatError):
            read_grd1(q)


def test_missing_file_is_oserror(tmp_path):
    with pytest.raises(OSError):
        read_grd1(tmp_path / "absent.grd1")


def test_csv_doubles_roundtrip(tmp_path):
    vals = [0.1, 1 / 3, -2.5e-300, 123456789.123456789, np.pi]
    write_rows(tmp_path / "r.csv", [["x", *vals]])
    row = read_rows(tmp_path / "r.csv")[0]
    assert row[0] == "x"
    assert [float(v) for v in row[1:]] == vals
