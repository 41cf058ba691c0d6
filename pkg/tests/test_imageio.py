import struct

import numpy as np
import pytest

from fmixcert.errors import FormatError
from fmixcert.imageio import (decode_imgf, encode_imgf, minmax_scale, read_imgf, read_ppm,
                              to_uint8, write_imgf, write_ppm)


def test_imgf_round_trip(tmp_path, np_rng):
    img = np_rng.uniform(size=(5, 7, 3)).astype(np.float32).astype(np.float64)
    write_imgf(tmp_path / "a.imgf", img)
    assert np.array_equal(read_imgf(tmp_path / "a.imgf"), img)


def test_imgf_layout():
    img = np.arange(6, dtype=np.float64).reshape(1, 2, 3)
    raw = encode_imgf(img)
    assert raw[:4] == b"IMGF" and raw[4] == 1 and raw[5] == 1
    assert struct.unpack("<III", raw[8:20]) == (1, 2, 3)
    assert np.array_equal(np.frombuffer(raw[20:], "<f4"), np.arange(6, dtype=np.float32))


@pytest.mark.parametrize("mutate", [
    lambda b: b[:10],
    lambda b: b"XXXX" + b[4:],
    lambda b: b[:4] + b"\x02" + b[5:],
    lambda b: b[:5] + b"\x07" + b[6:],
    lambda b: b[:-4],
    lambda b: b + b"\0\0\0\0",
    lambda b: b[:8] + struct.pack("<I", 0) + b[12:],
])
def test_imgf_rejects_malformed(mutate):
    raw = encode_imgf(np.zeros((2, 2, 1)))
    with pytest.raises(FormatError):
        decode_imgf(mutate(raw))


def test_ppm_round_trip(tmp_path):
    img = np.linspace(0, 1, 24).reshape(2, 4, 3)
    write_ppm(tmp_path / "x.ppm", img)
    back = read_ppm(tmp_path / "x.ppm")
    assert np.max(np.abs(back - img)) <= 0.5 / 255 + 1e-12


def test_ppm_gray_replicates(tmp_path):
    write_ppm(tmp_path / "g.ppm", np.full((2, 2), 0.5))
    back = read_ppm(tmp_path / "g.ppm")
    assert back.shape == (2, 2, 3) and np.all(back == back[..., :1])


def test_to_uint8_clips():
    assert list(to_uint8(np.array([[-1.0, 0.0, 1.0, 2.0]])).ravel()) == [0, 0, 255, 255]


def test_minmax_scale_constant_grid():
    assert np.all(minmax_scale(np.full((3, 3), 4.0)) == 0)
    s = minmax_scale(np.array([[1.0, 3.0]]))
    assert s.min() == 0 and s.max() == 1
