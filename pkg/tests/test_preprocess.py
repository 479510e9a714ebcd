import numpy as np
import pytest

from vesselseg.preprocess import (
    PreprocessConfig,
    StructuringElement,
    clahe,
    derive_fov_mask,
    fake_pad,
    gray_dilate,
    gray_erode,
    gray_open,
    green_channel,
    preprocess_pipeline,
    white_top_hat,
)
from synthdata import synthetic_fundus


def brute_extremum(img, se, fn):
    """Bounds-checked windowed min/max oracle."""
    h, w = img.shape
    out = np.empty_like(img)
    for y in range(h):
        for x in range(w):
            vals = [
                img[y + dy, x + dx]
                for dx, dy in se.offsets
                if 0 <= x + dx < w and 0 <= y + dy < h
            ]
            out[y, x] = fn(vals)
    return out


class TestStructuringElement:
    def test_disk_offsets_exact(self):
        se = StructuringElement.disk(2)
        expected = {
            (dx, dy)
            for dx in range(-2, 3)
            for dy in range(-2, 3)
            if dx * dx + dy * dy <= 4
        }
        assert set(se.offsets) == expected
        assert (0, 0) in se.offsets
        assert all((-dx, -dy) in se.offsets for dx, dy in se.offsets)

    def test_radius_zero_rejected(self):
        with pytest.raises(ValueError):
            StructuringElement.disk(0)


class TestGreenChannel:
    def test_picks_green(self):
        img = np.array([[[10, 200, 30]]], dtype=np.uint8)
        assert green_channel(img)[0, 0] == pytest.approx(200 / 255)

    def test_black_image(self):
        assert not green_channel(np.zeros((4, 4, 3), np.uint8)).any()

    def test_red_blue_permutation_invariant(self):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, (6, 6, 3), dtype=np.uint8)
        swapped = img[:, :, [2, 1, 0]]
        assert np.array_equal(green_channel(img), green_channel(swapped))


class TestDeriveFov:
    def test_bright_disk(self):
        img = np.zeros((32, 32, 3), np.uint8)
        yy, xx = np.mgrid[0:32, 0:32]
        disk = (yy - 16) ** 2 + (xx - 16) ** 2 <= 100
        img[disk] = 200
        assert np.array_equal(derive_fov_mask(img, 0.3), disk)

    def test_keeps_largest_blob_only(self):
        img = np.zeros((40, 40, 3), np.uint8)
        img[2:4, 2:27] = 180  # 50 px
        img[10:30, 10:35] = 180  # 500 px
        mask = derive_fov_mask(img, 0.5)
        assert mask[15, 20] and not mask[2, 5]
        assert np.count_nonzero(mask) == 500

    def test_threshold_zero_on_nonblack(self):
        img = np.full((5, 5, 3), 7, np.uint8)
        assert derive_fov_mask(img, 0.0).all()

    def test_all_dark_rejected(self):
        with pytest.raises(ValueError):
            derive_fov_mask(np.zeros((4, 4, 3), np.uint8), 0.5)


class TestFakePad:
    def test_width_zero_identity(self):
        rng = np.random.default_rng(1)
        img = rng.random((8, 8))
        fov = rng.random((8, 8)) > 0.5
        out, mask = fake_pad(img, fov, 0)
        assert np.array_equal(out, img) and np.array_equal(mask, fov)

    def test_single_pixel_one_iteration(self):
        img = np.zeros((9, 9))
        img[4, 4] = 1.0
        fov = np.zeros((9, 9), bool)
        fov[4, 4] = True
        out, mask = fake_pad(img, fov, 1)
        assert np.count_nonzero(mask) == 9
        assert np.allclose(out[3:6, 3:6], 1.0)

    def test_constant_fov_extends_constant(self):
        img = np.where(np.arange(100).reshape(10, 10) % 2 == 0, 0.3, 0.9)
        fov = np.zeros((10, 10), bool)
        fov[4:6, 4:6] = True
        img = np.where(fov, 0.7, img)
        out, mask = fake_pad(img, fov, 3)
        assert np.allclose(out[mask], 0.7)

    def test_never_touches_original_fov(self):
        rng = np.random.default_rng(2)
        img = rng.random((16, 16))
        fov = np.zeros((16, 16), bool)
        fov[5:11, 6:12] = True
        out, _ = fake_pad(img, fov, 4)
        assert np.array_equal(out[fov], img[fov])


class TestMorphology:
    def test_constant_fixed_point(self):
        img = np.full((7, 9), 0.42)
        se = StructuringElement.disk(2)
        for op in (gray_erode, gray_dilate, gray_open):
            assert np.array_equal(op(img, se), img)

    def test_open_kills_isolated_peak(self):
        img = np.zeros((9, 9))
        img[4, 4] = 1.0
        assert not gray_open(img, StructuringElement.disk(1)).any()

    def test_against_bruteforce_oracle(self):
        rng = np.random.default_rng(3)
        for radius in (1, 2, 3):
            se = StructuringElement.disk(radius)
            img = rng.random((16, 16))
            assert np.array_equal(gray_erode(img, se), brute_extremum(img, se, min))
            assert np.array_equal(gray_dilate(img, se), brute_extremum(img, se, max))

    def test_interior_duality(self):
        rng = np.random.default_rng(4)
        img = rng.random((14, 14))
        se = StructuringElement.disk(2)
        dil = gray_dilate(-img, se)
        ero = gray_erode(img, se)
        assert np.allclose(dil[2:-2, 2:-2], -ero[2:-2, 2:-2])


class TestTopHat:
    def test_constant_is_zero(self):
        img = np.full((8, 8), 0.6)
        assert not white_top_hat(img, StructuringElement.disk(2)).any()

    def test_isolated_peak_passes_through(self):
        img = np.zeros((9, 9))
        img[4, 4] = 1.0
        out = white_top_hat(img, StructuringElement.disk(1))
        assert np.array_equal(out, img)

    def test_bounded_by_input_and_nonnegative(self):
        rng = np.random.default_rng(5)
        se = StructuringElement.disk(2)
        img = rng.random((16, 16))
        th = white_top_hat(img, se)
        assert (th >= 0).all() and (th <= img + 1e-15).all()


class TestClahe:
    def test_constant_unchanged(self):
        img = np.full((32, 32), 0.37)
        cfg = PreprocessConfig()
        assert np.array_equal(clahe(img, cfg), img)

    def test_global_equalization_two_level(self):
        # one tile, no clipping: levels at 0.25/0.75 with equal counts map
        # to their CDF values 0.5 and 1.0
        img = np.zeros((16, 16))
        img[:, 8:] = 0.75
        img[:, :8] = 0.25
        cfg = PreprocessConfig(clahe_tiles_x=1, clahe_tiles_y=1, clahe_clip=1e9)
        out = clahe(img, cfg)
        assert np.allclose(out[img == 0.25], 0.5)
        assert np.allclose(out[img == 0.75], 1.0)

    def test_output_range_and_monotone_single_tile(self):
        rng = np.random.default_rng(6)
        img = rng.random((40, 40))
        cfg = PreprocessConfig(clahe_tiles_x=1, clahe_tiles_y=1)
        out = clahe(img, cfg)
        assert out.min() >= 0.0 and out.max() <= 1.0
        order = np.argsort(img.ravel())
        mapped = out.ravel()[order]
        assert (np.diff(mapped) >= -1e-12).all()

    def test_tiled_output_range(self):
        rng = np.random.default_rng(7)
        img = rng.random((50, 46))
        out = clahe(img, PreprocessConfig(clahe_tiles_x=4, clahe_tiles_y=5))
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            clahe(np.array([[1.5]]), PreprocessConfig())


class TestPipeline:
    def test_vessels_brighter_than_background(self):
        rgb, fov, strokes = synthetic_fundus(144, 144, n_strokes=5, seed=9)
        cfg = PreprocessConfig(pad_width=12)
        res = preprocess_pipeline(rgb, fov, cfg)
        background = res.fov & ~strokes & fov
        assert res.image[strokes].mean() > res.image[background].mean()

    def test_all_black_full_fov_gives_zeros(self):
        rgb = np.zeros((24, 24, 3), np.uint8)
        fov = np.ones((24, 24), bool)
        res = preprocess_pipeline(rgb, fov, PreprocessConfig(pad_width=2))
        assert not res.image.any()

    def test_output_in_unit_range_and_deterministic(self):
        rgb, fov, _ = synthetic_fundus(96, 96, n_strokes=3, seed=10)
        cfg = PreprocessConfig(pad_width=8)
        a = preprocess_pipeline(rgb, fov, cfg)
        b = preprocess_pipeline(rgb, fov, cfg)
        assert a.image.min() >= 0.0 and a.image.max() <= 1.0
        assert np.array_equal(a.image, b.image)
        assert np.array_equal(a.fov, b.fov)

    def test_stage_names(self):
        rgb, fov, _ = synthetic_fundus(64, 64, n_strokes=2, seed=11)
        res = preprocess_pipeline(rgb, fov, PreprocessConfig(pad_width=4))
        assert set(res.stages) == {"green", "inverted", "padded", "tophat", "clahe"}

    def test_tophat_disabled_passthrough(self):
        rgb, fov, _ = synthetic_fundus(64, 64, n_strokes=2, seed=12)
        cfg = PreprocessConfig(pad_width=4, tophat_enabled=False)
        res = preprocess_pipeline(rgb, fov, cfg)
        assert np.array_equal(res.stages["tophat"], res.stages["padded"])
