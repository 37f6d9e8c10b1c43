import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bdseg import raster
from bdseg.errors import DomainError, ParseError

small_u8 = arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9)))


def test_p5_bytes():
    img = raster.parse_pgm(b"P5\n2 2\n255\n" + bytes([0, 128, 255, 64]))
    assert img.shape == (2, 2)
    assert img.tolist() == [[0, 128], [255, 64]]


def test_p2_ascii_single_pixel():
    assert raster.parse_pgm(b"P2 1 1 255 7").tolist() == [[7]]


def test_header_comments_are_skipped():
    buf = b"P2\n# a comment\n2 1 # trailing\n255\n3 4\n"
    assert raster.parse_pgm(buf).tolist() == [[3, 4]]


@pytest.mark.parametrize("buf", [b"", b"P", b"P6\n1 1\n255\n\x00", b"P5\n2 2\n255\n\x00\x01",
                                 b"P5\n1 1\n256\n\x00", b"P2 2 1 255 7", b"P2 1 1 10 11"])
def test_malformed_files_raise_with_offset(buf):
    with pytest.raises(ParseError, match="byte"):
        raster.parse_pgm(buf)


def test_truncated_payload_names_offset():
    with pytest.raises(ParseError, match="byte 13"):
        raster.parse_pgm(b"P5\n2 2\n255\n\x00\x01")


@given(small_u8)
def test_pgm_roundtrip_is_exact(data):
    img = data.astype(np.float64)
    assert np.array_equal(raster.parse_pgm(raster.encode_pgm(img)), img)


def test_save_load_file(tmp_path):
    p = tmp_path / "x.pgm"
    raster.save_pgm(raster.as_image([7], 1, 1), p)
    assert raster.load_pgm(p).tolist() == [[7]]


@pytest.mark.parametrize("bad", [np.array([[256.0]]), np.array([[-1.0]]), np.zeros((0, 0)),
                                 np.array([[np.nan]])])
def test_save_rejects_out_of_range_and_empty(bad, tmp_path):
    with pytest.raises(DomainError):
        raster.save_pgm(bad, tmp_path / "x.pgm")


def test_mask_roundtrip(tmp_path):
    m = np.array([[True, False], [False, True]])
    raster.save_mask(m, tmp_path / "m.pgm")
    assert set(np.unique(raster.load_pgm(tmp_path / "m.pgm"))) == {0, 255}
    assert np.array_equal(raster.load_mask(tmp_path / "m.pgm"), m)


def test_rescale_examples():
    assert raster.rescale_intensity(np.array([[10.0, 20, 30]])).tolist() == [[0, 127.5, 255]]
    assert raster.rescale_intensity(np.array([[5.0, 5]])).tolist() == [[0, 0]]
    span = np.array([[0.0, 17, 255]])
    assert np.array_equal(raster.rescale_intensity(span), span)


@given(arrays(np.float64, (4, 5), elements=st.floats(-1e3, 1e3)))
def test_rescale_range_and_idempotence(img):
    out = raster.rescale_intensity(img)
    if img.max() == img.min():
        assert not out.any()
        return
    assert out.min() == 0 and math.isclose(out.max(), 255, rel_tol=1e-12)
    assert np.allclose(raster.rescale_intensity(out), out, atol=1e-9)


def _bilinear_oracle(img, w, h):
    ih, iw = img.shape
    out = np.zeros((h, w))
    for r in range(h):
        for c in range(w):
            y = min(max((r + 0.5) * ih / h - 0.5, 0), ih - 1)
            x = min(max((c + 0.5) * iw / w - 0.5, 0), iw - 1)
            y0, x0 = int(math.floor(y)), int(math.floor(x))
            y1, x1 = min(y0 + 1, ih - 1), min(x0 + 1, iw - 1)
            fy, fx = y - y0, x - x0
            out[r, c] = ((1 - fy) * ((1 - fx) * img[y0, x0] + fx * img[y0, x1])
                         + fy * ((1 - fx) * img[y1, x0] + fx * img[y1, x1]))
    return out


def test_resize_examples():
    m = np.array([[True, False], [False, False]])
    big = raster.resize(m, 4, 4)
    assert big.dtype == bool
    assert big[:2, :2].all() and big.sum() == 4
    assert np.array_equal(raster.resize(np.array([[100.0]]), 3, 3), np.full((3, 3), 100.0))


def test_resize_bilinear_matches_scalar_oracle(rng):
    img = rng.uniform(0, 255, size=(7, 5))
    for w, h in [(3, 4), (10, 14), (5, 9)]:
        assert np.allclose(raster.resize(img, w, h), _bilinear_oracle(img, w, h), atol=1e-12)


@given(small_u8)
def test_resize_to_own_size_is_identity(data):
    img = data.astype(np.float64)
    h, w = img.shape
    assert np.array_equal(raster.resize(img, w, h), img)
    mask = data > 100
    assert np.array_equal(raster.resize(mask, w, h), mask)


@given(small_u8)
def test_flip_is_an_involution(data):
    assert np.array_equal(raster.flip_horizontal(raster.flip_horizontal(data)), data)
    assert np.array_equal(raster.flip_horizontal(data)[:, 0], data[:, -1])


def test_flip_examples():
    assert raster.flip_horizontal(np.array([[1, 2, 3]])).tolist() == [[3, 2, 1]]
    sym = np.array([[1, 2, 1], [4, 5, 4]])
    assert np.array_equal(raster.flip_horizontal(sym), sym)


def test_labeled_image_size_check():
    with pytest.raises(DomainError):
        raster.LabeledImage(np.zeros((2, 2)), np.zeros((2, 3), bool))
    img, mask = raster.LabeledImage(np.zeros((2, 2)), np.ones((2, 2)))
    assert mask.dtype == bool


def test_normalize_image():
    out = raster.normalize_image(np.arange(16.0).reshape(4, 4), 8)
    assert out.shape == (8, 8) and out.min() == 0 and out.max() == 255


@given(arrays(np.float64, (5, 6), elements=st.floats(-1e6, 1e6)))
def test_rescale_hits_exact_endpoints(img):
    out = raster.rescale_intensity(img)
    if img.max() > img.min():
        assert out.min() == 0.0 and out.max() == 255.0
