import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stopeval import imageio


@settings(max_examples=30, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 20), st.integers(1, 20))))
def test_pgm8_roundtrip(tmp_path_factory, img):
    p = tmp_path_factory.mktemp("pgm") / "a.pgm"
    imageio.write_pgm(p, img)
    np.testing.assert_array_equal(imageio.read_pgm(p), img)


def test_pgm16_is_big_endian(tmp_path):
    img = np.array([[1, 258]], dtype=np.uint16)
    imageio.write_pgm(tmp_path / "a.pgm", img)
    raw = (tmp_path / "a.pgm").read_bytes()
    assert raw.endswith(b"\x00\x01\x01\x02")
    np.testing.assert_array_equal(imageio.read_pgm(tmp_path / "a.pgm"), img)


def test_pgm_header_comments(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P5\n# made by hand\n2 1\n255\n\x07\x09")
    np.testing.assert_array_equal(imageio.read_pgm(tmp_path / "c.pgm"), [[7, 9]])


@settings(max_examples=30, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=st.floats(-1e6, 1e6, width=32)))
def test_pfm_roundtrip(tmp_path_factory, img):
    p = tmp_path_factory.mktemp("pfm") / "a.pfm"
    imageio.write_pfm(p, img)
    np.testing.assert_array_equal(imageio.read_pfm(p), img)


def test_pfm_rows_bottom_up(tmp_path):
    img = np.array([[1.0], [2.0]], dtype=np.float32)
    imageio.write_pfm(tmp_path / "a.pfm", img)
    payload = (tmp_path / "a.pfm").read_bytes().split(b"-1.0\n", 1)[1]
    assert np.frombuffer(payload, "<f4").tolist() == [2.0, 1.0]


def test_depth_invalid_convention(tmp_path):
    d = np.array([[1.5, np.nan], [0.0, 3.25]])
    for name in ("d.pfm", "d.pgm"):
        imageio.write_depth(tmp_path / name, d)
        back = imageio.read_depth(tmp_path / name)
        assert np.isnan(back[0, 1]) and np.isnan(back[1, 0])
        assert back[0, 0] == pytest.approx(1.5) and back[1, 1] == pytest.approx(3.25)


def test_disparity_invalid_is_minus_one_on_disk(tmp_path):
    imageio.write_disparity(tmp_path / "d.pfm", np.array([[np.nan, 0.0, 4.5]]))
    assert imageio.read_pfm(tmp_path / "d.pfm").tolist() == [[-1.0, 0.0, 4.5]]
    back = imageio.read_disparity(tmp_path / "d.pfm")
    assert np.isnan(back[0, 0]) and back[0, 1] == 0.0


@pytest.mark.parametrize(
    "blob",
    [b"P6\n1 1\n255\n\x00\x00\x00", b"P5\n4 4\n255\n\x00", b"P5\n4"],
)
def test_bad_pgm(tmp_path, blob):
    (tmp_path / "x.pgm").write_bytes(blob)
    with pytest.raises(imageio.FormatError):
        imageio.read_pgm(tmp_path / "x.pgm")


def test_bad_pfm(tmp_path):
    (tmp_path / "x.pfm").write_bytes(b"PF\n1 1\n-1.0\n" + b"\x00" * 12)
    with pytest.raises(imageio.FormatError):
        imageio.read_pfm(tmp_path / "x.pfm")
    (tmp_path / "y.pfm").write_bytes(b"Pf\n2 2\n-1.0\n\x00\x00")
    with pytest.raises(imageio.FormatError):
        imageio.read_pfm(tmp_path / "y.pfm")
