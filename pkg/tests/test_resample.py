import numpy as np
import pytest

from oracles import naive_bilinear

from vidseg.core import Image, LabelMap, ScoreMap
from vidseg.resample import (
    bilinear_resize,
    downsample_image,
    nn_subsample,
    nn_upscale,
)


def _lm(arr):
    return LabelMap(np.asarray(arr, dtype=np.int64))


class TestNnSubsample:
    def test_stride_two_picks_top_left_grid(self):
        src = _lm(np.arange(16).reshape(4, 4))
        out = nn_subsample(src, 2)
        assert out.data.tolist() == [[0, 2], [8, 10]]

    def test_stride_one_identity(self):
        src = _lm(np.arange(12).reshape(3, 4))
        assert np.array_equal(nn_subsample(src, 1).data, src.data)

    def test_ceil_division(self):
        src = _lm(np.arange(9).reshape(3, 3))
        out = nn_subsample(src, 2)
        assert out.data.shape == (2, 2)
        assert out.data.tolist() == [[0, 2], [6, 8]]

    def test_bad_stride(self):
        with pytest.raises(ValueError):
            nn_subsample(_lm([[0]]), 0)


class TestNnUpscale:
    def test_integer_replication(self):
        src = _lm([[1, 2], [3, 4]])
        out = nn_upscale(src, 4, 4)
        assert out.data.tolist() == [
            [1, 1, 2, 2],
            [1, 1, 2, 2],
            [3, 3, 4, 4],
            [3, 3, 4, 4],
        ]

    def test_same_size_identity(self):
        src = _lm([[1, 2], [3, 4]])
        assert np.array_equal(nn_upscale(src, 2, 2).data, src.data)

    def test_two_to_three_floor_indexing(self):
        src = _lm([[1, 2], [3, 4]])
        out = nn_upscale(src, 3, 3)
        assert out.data.tolist() == [[1, 1, 2], [1, 1, 2], [3, 3, 4]]

    def test_shrink_rejected(self):
        with pytest.raises(ValueError):
            nn_upscale(_lm([[1, 2], [3, 4]]), 1, 4)

    def test_round_trip_idempotent(self):
        rng = np.random.default_rng(3)
        src = _lm(rng.integers(0, 5, (13, 17)))
        for stride in (2, 3, 4, 8):
            once = nn_upscale(nn_subsample(src, stride), 13, 17)
            twice = nn_upscale(nn_subsample(once, stride), 13, 17)
            assert np.array_equal(once.data, twice.data)


class TestBilinearResize:
    def test_upsample_1d_slice(self):
        src = ScoreMap(np.array([0.0, 2.0]).reshape(1, 2, 1))
        out = bilinear_resize(src, 1, 4)
        assert np.allclose(out.data[0, :, 0], [0.0, 0.5, 1.5, 2.0])

    def test_constant_stays_constant(self):
        src = ScoreMap(np.full((3, 5, 2), 0.7))
        out = bilinear_resize(src, 7, 11)
        assert np.allclose(out.data, 0.7)

    def test_same_size_identity(self):
        rng = np.random.default_rng(0)
        src = ScoreMap(rng.normal(size=(5, 6, 3)))
        out = bilinear_resize(src, 5, 6)
        assert np.allclose(out.data, src.data, atol=1e-12)

    def test_matches_per_pixel_formula(self):
        rng = np.random.default_rng(1)
        src = rng.normal(size=(5, 7, 2))
        for th, tw in [(3, 4), (9, 13), (5, 7), (1, 1), (10, 3)]:
            got = bilinear_resize(ScoreMap(src), th, tw)
            ref = naive_bilinear(src, th, tw)
            assert np.allclose(got.data, ref, atol=1e-9)

    def test_preserves_value_range(self):
        rng = np.random.default_rng(2)
        src = rng.normal(size=(6, 8, 3))
        out = bilinear_resize(ScoreMap(src), 13, 5)
        for c in range(3):
            assert out.data[..., c].min() >= src[..., c].min() - 1e-12
            assert out.data[..., c].max() <= src[..., c].max() + 1e-12

    def test_bad_target(self):
        with pytest.raises(ValueError):
            bilinear_resize(ScoreMap(np.zeros((2, 2, 1))), 0, 2)


class TestDownsampleImage:
    def test_factor_one_identity(self):
        rng = np.random.default_rng(4)
        img = Image(rng.random((5, 6, 3)))
        out = downsample_image(img, 1)
        assert np.allclose(out.data, img.data, atol=1e-12)

    def test_constant_shrink(self):
        img = Image(np.full((4, 4, 3), 0.25))
        out = downsample_image(img, 2)
        assert out.data.shape == (2, 2, 3)
        assert np.allclose(out.data, 0.25)

    def test_half_pixel_centers_1d(self):
        img = Image(np.repeat(np.array([0, 1, 2, 3]) / 3.0, 3).reshape(1, 4, 3))
        out = downsample_image(img, 2)
        assert np.allclose(out.data[0, :, 0] * 3.0, [0.5, 2.5])

    def test_ceil_dims(self):
        img = Image(np.zeros((5, 7, 3)))
        out = downsample_image(img, 2)
        assert (out.height, out.width) == (3, 4)

    def test_bad_factor(self):
        with pytest.raises(ValueError):
            downsample_image(Image(np.zeros((2, 2, 3))), 0)
