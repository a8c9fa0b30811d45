"""Binary raster formats: roundtrips and corruption handling."""

import numpy as np
import pytest

from sparsect.errors import FormatError
from sparsect import io as sio


ROUNDTRIPS = [
    (sio.write_image, sio.read_image, b"MCIMG1"),
    (sio.write_sinogram, sio.read_sinogram, b"MCSIN1"),
    (sio.write_weights, sio.read_weights, b"MCWGT1"),
]


@pytest.mark.parametrize("writer,reader,magic", ROUNDTRIPS)
def test_roundtrip_preserves_float32_payload(tmp_path, writer, reader, magic):
    rng = np.random.default_rng(0)
    data = rng.standard_normal((5, 7))
    path = tmp_path / "data.bin"
    writer(path, data)
    back = reader(path)
    assert back.dtype == np.float64
    np.testing.assert_array_equal(back, data.astype(np.float32).astype(np.float64))


@pytest.mark.parametrize("writer,reader,magic", ROUNDTRIPS)
def test_header_layout(tmp_path, writer, reader, magic):
    path = tmp_path / "data.bin"
    writer(path, np.zeros((3, 4)))
    raw = path.read_bytes()
    assert raw[:6] == magic
    assert int.from_bytes(raw[6:10], "little") == 3
    assert int.from_bytes(raw[10:14], "little") == 4
    assert len(raw) == 14 + 3 * 4 * 4


@pytest.mark.parametrize("writer,reader,magic", ROUNDTRIPS)
def test_wrong_magic_rejected(tmp_path, writer, reader, magic):
    path = tmp_path / "data.bin"
    writer(path, np.zeros((2, 2)))
    raw = bytearray(path.read_bytes())
    raw[0] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        reader(path)


@pytest.mark.parametrize("writer,reader,magic", ROUNDTRIPS)
def test_truncated_payload_rejected(tmp_path, writer, reader, magic):
    path = tmp_path / "data.bin"
    writer(path, np.ones((4, 4)))
    raw = path.read_bytes()
    path.write_bytes(raw[:-3])
    with pytest.raises(FormatError):
        reader(path)


def test_cross_format_magic_rejected(tmp_path):
    path = tmp_path / "data.bin"
    sio.write_image(path, np.zeros((2, 2)))
    with pytest.raises(FormatError):
        sio.read_sinogram(path)


def test_write_is_byte_deterministic(tmp_path):
    rng = np.random.default_rng(1)
    data = rng.standard_normal((6, 6))
    a = tmp_path / "a.bin"
    b = tmp_path / "b.bin"
    sio.write_image(a, data)
    sio.write_image(b, data.copy())
    assert a.read_bytes() == b.read_bytes()


def test_non_2d_rejected(tmp_path):
    with pytest.raises(ValueError):
        sio.write_image(tmp_path / "x.bin", np.zeros(4))
