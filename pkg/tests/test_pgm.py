import numpy as np
import pytest

from toepsense.pgm import ImageGray, PgmError, read_pgm, write_pgm


def test_single_pixel_p2():
    img = read_pgm(b"P2 1 1 255 128")
    assert img.width == img.height == 1
    assert img.pixels[0, 0] == 128 / 255


def test_roundtrip_binary_and_ascii():
    rng = np.random.default_rng(0)
    quant = np.round(rng.uniform(size=(5, 7)) * 255) / 255.0
    img = ImageGray(width=7, height=5, pixels=quant)
    for binary in (True, False):
        back = read_pgm(write_pgm(img, binary=binary))
        assert back.width == 7 and back.height == 5
        assert np.array_equal(back.pixels, img.pixels)


def test_roundtrip_via_file(tmp_path):
    img = ImageGray(width=2, height=2, pixels=np.array([[0.0, 1.0], [64 / 255, 128 / 255]]))
    path = tmp_path / "img.pgm"
    write_pgm(img, path)
    assert np.array_equal(read_pgm(path).pixels, img.pixels)


def test_header_comments():
    img = read_pgm(b"P2\n# a comment\n2 1\n# another\n255\n10 20\n")
    assert np.allclose(img.pixels, [[10 / 255, 20 / 255]])


def test_truncated_p5_names_offset():
    blob = b"P5\n3 2\n255\n" + b"\x00" * 4  # needs 6 payload bytes from byte 11
    with pytest.raises(PgmError, match=r"need 6 bytes from offset 11, found 4"):
        read_pgm(blob)


def test_truncated_p2():
    with pytest.raises(PgmError, match="truncated"):
        read_pgm(b"P2 2 2 255 1 2 3")


def test_bad_magic():
    with pytest.raises(PgmError, match="magic"):
        read_pgm(b"P6 1 1 255 abc")


def test_unsupported_maxval():
    with pytest.raises(PgmError, match="maxval"):
        read_pgm(b"P2 1 1 65535 1000")


def test_p2_sample_range():
    with pytest.raises(PgmError, match="range"):
        read_pgm(b"P2 1 1 255 300")


def test_pixel_bounds_enforced():
    with pytest.raises(PgmError):
        ImageGray(width=1, height=1, pixels=np.array([[1.5]]))


def test_write_quantizes_to_nearest():
    img = ImageGray(width=2, height=1, pixels=np.array([[0.5, 0.999]]))
    back = read_pgm(write_pgm(img))
    assert back.pixels[0, 0] == round(0.5 * 255) / 255
    assert back.pixels[0, 1] == round(0.999 * 255) / 255
