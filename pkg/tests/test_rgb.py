import io

import numpy as np
import pytest
from PIL import Image

from noisy_rgbd.core import RGB_KINDS, ConfigError, Kind, Mode, PerturbationSpec, RngKey, effective_level
from noisy_rgbd.rgb import (
    BLUR_KINDS,
    ENVIRONMENT_KINDS,
    FOG_GRAY,
    NOISE_KINDS,
    KernelTooLargeError,
    add_noise,
    apply_blur,
    apply_environment,
    apply_postprocess,
    apply_rgb,
    disk_kernel,
    gaussian_filter,
    gaussian_kernel1d,
    motion_kernel,
)

KEY = RngKey(3, "unit", 0, 1)


def const(value, shape=(64, 80)):
    return np.full(shape + (3,), value, dtype=np.uint8)


def textured(shape=(96, 128), seed=0):
    return np.random.default_rng(seed).integers(0, 256, size=shape + (3,), dtype=np.uint8)


def run_kind(img, kind, level, key=KEY, params=None):
    return apply_rgb(img, PerturbationSpec(kind, level, params=params or {}), key)


@pytest.mark.parametrize("kind", RGB_KINDS)
@pytest.mark.parametrize("level", [1, 3, 5])
def test_shape_dtype_determinism(kind, level):
    img = textured()
    out = run_kind(img, kind, level)
    assert out.shape == img.shape and out.dtype == np.uint8
    assert np.array_equal(out, run_kind(img, kind, level))


# ---- noise -----------------------------------------------------------------


def test_speckle_on_black_is_black():
    img = const(0)
    assert np.array_equal(add_noise(img, Kind.SPECKLE_NOISE, 1, KEY), img)


def test_impulse_rates():
    img = const(128, (1000, 1000))
    out = add_noise(img, Kind.IMPULSE_NOISE, 3, KEY)
    px = out[..., 0]
    # one draw per pixel: all channels flip together
    assert np.array_equal(px, out[..., 1]) and np.array_equal(px, out[..., 2])
    assert abs(np.mean(px == 0) - 0.045) <= 0.005
    assert abs(np.mean(px == 255) - 0.045) <= 0.005


def test_gaussian_noise_std():
    img = const(128, (600, 600))
    out = add_noise(img, Kind.GAUSSIAN_NOISE, 1, KEY).astype(float) / 255.0
    diff = out - 128 / 255.0
    for c in range(3):
        assert 0.075 <= diff[..., c].std() <= 0.085


def test_shot_noise_poisson_variance():
    # Poisson(x p)/p has variance x/p; p = 60 at level 1
    img = const(128, (500, 500))
    out = add_noise(img, Kind.SHOT_NOISE, 1, KEY).astype(float) / 255.0
    x = 128 / 255.0
    assert abs(out.mean() - x) < 2e-3
    assert abs(out.var() / (x / 60) - 1.0) < 0.05


@pytest.mark.parametrize("kind", NOISE_KINDS)
def test_noise_variance_monotone_in_level(kind):
    img = const(128, (200, 200))
    var = [add_noise(img, kind, lvl, KEY).astype(float).var() for lvl in range(1, 6)]
    assert all(a <= b for a, b in zip(var, var[1:]))


def test_static_noise_differs_between_frames():
    img = const(128, (32, 32))
    spec = PerturbationSpec(Kind.GAUSSIAN_NOISE, 2)
    a = apply_rgb(img, spec, KEY.with_frame(0))
    b = apply_rgb(img, spec, KEY.with_frame(1))
    assert not np.array_equal(a, b)


def test_dynamic_uses_effective_level():
    img = textured((48, 48))
    spec = PerturbationSpec(Kind.GAUSSIAN_NOISE, 3, Mode.DYNAMIC)
    for f in range(8):
        key = KEY.with_frame(f)
        lvl = effective_level(spec, key)
        assert np.array_equal(apply_rgb(img, spec, key), add_noise(img, Kind.GAUSSIAN_NOISE, lvl, key))


# ---- blur ------------------------------------------------------------------


@pytest.mark.parametrize("kind", BLUR_KINDS)
@pytest.mark.parametrize("level", [1, 5])
def test_blur_preserves_constant(kind, level):
    img = const(77, (96, 96))
    assert np.array_equal(apply_blur(img, kind, level, KEY), img)


def test_gaussian_peak_matches_direct_sum():
    # discrete kernel by direct summation: 1D weights exp(-x^2/2) over |x| <= 4
    w = [np.exp(-0.5 * x * x) for x in range(-4, 5)]
    peak = (1.0 / sum(w)) ** 2
    impulse = np.zeros((33, 33, 1))
    impulse[16, 16] = 1.0
    out = gaussian_filter(impulse, 1.0)
    assert abs(out[16, 16, 0] - peak) < 1e-12
    assert abs(out.sum() - 1.0) < 1e-12

    img = np.zeros((33, 33, 3), np.uint8)
    img[16, 16] = 255
    out8 = apply_blur(img, Kind.GAUSSIAN_BLUR, 1, KEY)
    assert out8[16, 16, 0] == np.rint(255 * peak)


def test_kernels_normalized():
    assert abs(gaussian_kernel1d(2.5).sum() - 1) < 1e-12
    for r, a in [(3.0, 0.1), (10.0, 0.5)]:
        k = disk_kernel(r, a)
        assert abs(k.sum() - 1) < 1e-12 and k.shape[0] % 2 == 1
    for angle in (0.0, 37.0, 90.0, 151.0):
        k = motion_kernel(20, 15, angle)
        assert abs(k.sum() - 1) < 1e-12
        assert np.allclose(k, k[::-1, ::-1])  # symmetric line


def test_motion_kernel_horizontal_line():
    k = motion_kernel(10, 3, 0.0)
    assert np.count_nonzero(k.sum(axis=1) > 1e-12) == 1
    assert k.shape == (21, 21) and k[10].sum() == pytest.approx(1.0)


def test_kernel_too_large():
    with pytest.raises(KernelTooLargeError):
        apply_blur(const(10, (32, 32)), Kind.GAUSSIAN_BLUR, 5, KEY)
    with pytest.raises(ValueError):
        apply_blur(const(10, (30, 30)), Kind.MOTION_BLUR, 5, KEY)


def test_wrong_category_rejected():
    with pytest.raises(ConfigError):
        apply_blur(const(1), Kind.GAUSSIAN_NOISE, 1, KEY)
    with pytest.raises(ConfigError):
        apply_postprocess(const(1), Kind.SNOW, 1)


def test_glass_blur_moves_pixels_but_keeps_histogram_locality():
    img = textured((64, 64))
    out = apply_blur(img, Kind.GLASS_BLUR, 3, KEY)
    assert not np.array_equal(out, img)
    assert abs(out.astype(float).mean() - img.astype(float).mean()) < 2.0


# ---- environment -----------------------------------------------------------


def test_fog_zero_thickness_is_identity():
    img = textured((64, 64))
    out = apply_environment(img, Kind.FOG, 3, KEY, params={"thickness": 0.0})
    assert np.array_equal(out, img)


def test_fog_on_black_bounded_by_gray():
    out = apply_environment(const(0), Kind.FOG, 3, KEY).astype(float) / 255.0
    assert 0.0 < out.mean() <= FOG_GRAY
    assert out.max() <= FOG_GRAY + 0.5 / 255


@pytest.mark.parametrize("kind", ENVIRONMENT_KINDS)
def test_environment_changes_image(kind):
    img = textured((96, 128), seed=4)
    assert not np.array_equal(apply_environment(img, kind, 3, KEY), img)


def test_snow_brightens():
    img = const(60, (96, 128))
    assert apply_environment(img, Kind.SNOW, 3, KEY).mean() > img.mean()


def test_frost_level1_keeps_image_weight():
    img = const(100, (64, 64))
    out = apply_environment(img, Kind.FROST, 1, KEY).astype(float)
    # intensity 1.0 plus a non-negative texture: never darker
    assert np.all(out >= 100)


def test_spatter_mud_darkens_light_image():
    img = const(230, (128, 128))
    out = apply_environment(img, Kind.SPATTER, 5, KEY)
    assert out.mean() <= img.mean()


# ---- post-processing -------------------------------------------------------


def test_contrast_on_constant_unchanged():
    img = const(93)
    assert np.array_equal(apply_postprocess(img, Kind.CONTRAST, 5), img)


def test_contrast_formula():
    img = textured((16, 16)).astype(float) / 255.0
    src = np.rint(img * 255).astype(np.uint8)
    x = src.astype(float) / 255.0
    mean = x.mean(axis=(0, 1))
    expected = np.rint(np.clip(0.2 * (x - mean) + mean, 0, 1) * 255)
    assert np.array_equal(apply_postprocess(src, Kind.CONTRAST, 3), expected)


def test_brightness_clamps():
    img = const(153)  # 0.6
    assert np.all(apply_postprocess(img, Kind.BRIGHTNESS, 5) == 255)
    expected = np.rint(np.clip(153 / 255 + 0.1, 0, 1) * 255)
    assert np.all(apply_postprocess(img, Kind.BRIGHTNESS, 1) == expected)


def test_jpeg_matches_codec_round_trip():
    img = textured((48, 64), seed=9)
    buf = io.BytesIO()
    Image.fromarray(img).save(buf, format="JPEG", quality=7)
    expected = np.asarray(Image.open(io.BytesIO(buf.getvalue())).convert("RGB"))
    out = apply_postprocess(img, Kind.JPEG, 5)
    assert np.array_equal(out, expected)
    assert not np.array_equal(out, img)


def _quadrant_image(size):
    rng = np.random.default_rng(5)
    img = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
    return img


def test_pixelate_quadrants():
    # 8x8 at factor 0.25 -> 2x2 blocks of 4x4 pixels, each set to its block mean
    img = _quadrant_image(8)
    out = apply_postprocess(img, Kind.PIXELATE, 5)
    for by in range(2):
        for bx in range(2):
            block = img[4 * by : 4 * by + 4, 4 * bx : 4 * bx + 4].astype(float)
            mean = np.rint(block.mean(axis=(0, 1)))
            got = out[4 * by : 4 * by + 4, 4 * bx : 4 * bx + 4]
            assert np.all(got == mean)


def test_pixelate_small_image_collapses_to_global_mean():
    # 4x4 at factor 0.25 leaves a single 1x1 block
    img = _quadrant_image(4)
    out = apply_postprocess(img, Kind.PIXELATE, 5)
    assert np.all(out == np.rint(img.astype(float).mean(axis=(0, 1))))


def test_deterministic_kind_same_across_frames():
    img = textured((32, 32))
    spec = PerturbationSpec(Kind.CONTRAST, 2)
    assert np.array_equal(apply_rgb(img, spec, KEY.with_frame(0)), apply_rgb(img, spec, KEY.with_frame(9)))
