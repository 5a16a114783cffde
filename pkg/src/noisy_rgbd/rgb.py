"""RGB imaging perturbations.

Every operation takes and returns an H x W x 3 ``uint8`` image. Internally
pixels are floats in [0, 1]; results are clipped and rounded back to 8 bit.
Stochastic operations draw from a generator derived from an ``RngKey``.
"""

from __future__ import annotations

import io

import numba
import numpy as np
from PIL import Image
from scipy import ndimage, signal

from .core import (
    ConfigError,
    Kind,
    PerturbationSpec,
    RngKey,
    as_rgb,
    derive_rng,
    effective_level,
    to_uint8,
    to_unit,
)
from .severity import resolve_params

NOISE_KINDS = (Kind.GAUSSIAN_NOISE, Kind.SHOT_NOISE, Kind.IMPULSE_NOISE, Kind.SPECKLE_NOISE)
BLUR_KINDS = (Kind.GAUSSIAN_BLUR, Kind.DEFOCUS_BLUR, Kind.MOTION_BLUR, Kind.GLASS_BLUR)
ENVIRONMENT_KINDS = (Kind.SNOW, Kind.FROST, Kind.FOG, Kind.SPATTER)
POSTPROCESS_KINDS = (Kind.BRIGHTNESS, Kind.CONTRAST, Kind.JPEG, Kind.PIXELATE)

GAUSSIAN_TRUNCATE = 4.0
FOG_GRAY = 0.75
SPATTER_WATER = np.array([0.25, 0.33, 0.38])
SPATTER_MUD = np.array([63, 42, 20]) / 255.0
FROST_TINT = np.array([0.86, 0.93, 1.0])
LUMA = np.array([0.299, 0.587, 0.114])


class KernelTooLargeError(ValueError):
    """Blur kernel does not fit inside the image."""


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------


def gaussian_kernel1d(sigma: float, truncate: float = GAUSSIAN_TRUNCATE) -> np.ndarray:
    radius = int(truncate * sigma + 0.5)
    x = np.arange(-radius, radius + 1, dtype=float)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _check_kernel(shape, ksize: int) -> None:
    if ksize >= min(shape[0], shape[1]):
        raise KernelTooLargeError(
            f"kernel size {ksize} must be smaller than the image ({shape[1]}x{shape[0]})"
        )


def gaussian_filter(x: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur over the two spatial axes, reflect borders."""
    if sigma <= 0:
        return x
    k = gaussian_kernel1d(sigma)
    _check_kernel(x.shape, len(k))
    out = ndimage.convolve1d(x, k, axis=0, mode="reflect")
    return ndimage.convolve1d(out, k, axis=1, mode="reflect")


def convolve2d(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Convolve each channel with an odd-sized 2D kernel, reflect borders."""
    kh, kw = kernel.shape
    _check_kernel(x.shape, max(kh, kw))
    ph, pw = kh // 2, kw // 2
    pad = [(ph, ph), (pw, pw)] + [(0, 0)] * (x.ndim - 2)
    # numpy "symmetric" is the edge-repeating reflection (d c b a | a b c d)
    padded = np.pad(x, pad, mode="symmetric")
    k = kernel.reshape(kernel.shape + (1,) * (x.ndim - 2))
    return signal.fftconvolve(padded, k, mode="valid", axes=(0, 1))


def disk_kernel(radius: float, alias_blur: float) -> np.ndarray:
    r = int(np.ceil(radius))
    pad = int(np.ceil(3 * alias_blur))
    L = np.arange(-(r + pad), r + pad + 1)
    X, Y = np.meshgrid(L, L)
    disk = (X**2 + Y**2 <= radius**2).astype(float)
    disk /= disk.sum()
    if alias_blur > 0:
        disk = ndimage.gaussian_filter(disk, alias_blur, mode="constant")
    return disk / disk.sum()


def motion_kernel(radius: float, sigma: float, angle_deg: float) -> np.ndarray:
    """Gaussian-weighted line through the kernel center at ``angle_deg``."""
    r = int(np.ceil(radius))
    size = 2 * r + 1
    t = np.linspace(-r, r, 8 * size + 1)
    w = np.exp(-0.5 * (t / sigma) ** 2) if sigma > 0 else np.ones_like(t)
    a = np.deg2rad(angle_deg)
    xs = r + t * np.cos(a)
    ys = r - t * np.sin(a)
    x0 = np.floor(xs).astype(int)
    y0 = np.floor(ys).astype(int)
    fx = xs - x0
    fy = ys - y0
    kernel = np.zeros((size + 1, size + 1))
    np.add.at(kernel, (y0, x0), w * (1 - fx) * (1 - fy))
    np.add.at(kernel, (y0, x0 + 1), w * fx * (1 - fy))
    np.add.at(kernel, (y0 + 1, x0), w * (1 - fx) * fy)
    np.add.at(kernel, (y0 + 1, x0 + 1), w * fx * fy)
    kernel = kernel[:size, :size]
    return kernel / kernel.sum()


def plasma_fractal(rng: np.random.Generator, mapsize: int, wibbledecay: float) -> np.ndarray:
    """Diamond-square height map on a ``mapsize`` square, scaled to [0, 1]."""
    if mapsize & (mapsize - 1):
        raise ValueError("mapsize must be a power of two")
    maparray = np.zeros((mapsize, mapsize))
    stepsize = mapsize
    wibble = 100.0

    def wibbledmean(array):
        return array / 4 + rng.uniform(-wibble, wibble, array.shape)

    while stepsize >= 2:
        half = stepsize // 2
        corners = maparray[0:mapsize:stepsize, 0:mapsize:stepsize]
        sq = corners + np.roll(corners, -1, axis=0)
        sq = sq + np.roll(sq, -1, axis=1)
        maparray[half:mapsize:stepsize, half:mapsize:stepsize] = wibbledmean(sq)

        dr = maparray[half:mapsize:stepsize, half:mapsize:stepsize]
        ul = maparray[0:mapsize:stepsize, 0:mapsize:stepsize]
        lt = dr + np.roll(dr, 1, axis=0) + ul + np.roll(ul, -1, axis=1)
        maparray[0:mapsize:stepsize, half:mapsize:stepsize] = wibbledmean(lt)
        tt = dr + np.roll(dr, 1, axis=1) + ul + np.roll(ul, -1, axis=0)
        maparray[half:mapsize:stepsize, 0:mapsize:stepsize] = wibbledmean(tt)

        stepsize //= 2
        wibble /= wibbledecay

    maparray -= maparray.min()
    return maparray / maparray.max()


def _plasma_for(rng, shape, wibbledecay) -> np.ndarray:
    size = 1 << max(1, int(np.ceil(np.log2(max(shape[0], shape[1])))))
    return plasma_fractal(rng, size, wibbledecay)[: shape[0], : shape[1]]


def clipped_zoom(layer: np.ndarray, zoom: float) -> np.ndarray:
    """Zoom into the center of a 2D array, keeping its shape."""
    h, w = layer.shape
    ch = min(h, int(np.ceil(h / zoom)))
    cw = min(w, int(np.ceil(w / zoom)))
    top, left = (h - ch) // 2, (w - cw) // 2
    crop = layer[top : top + ch, left : left + cw]
    factor = max(zoom, 1.0)
    out = ndimage.zoom(crop, factor, order=1)
    if out.shape[0] < h or out.shape[1] < w:
        out = np.pad(out, ((0, max(0, h - out.shape[0])), (0, max(0, w - out.shape[1]))), mode="edge")
    th, tw = (out.shape[0] - h) // 2, (out.shape[1] - w) // 2
    return out[th : th + h, tw : tw + w]


@numba.njit(cache=False)
def _swap_pixels(x, offsets, d):
    h_max, w_max = x.shape[0], x.shape[1]
    k = 0
    for h in range(h_max - d, d, -1):
        for w in range(w_max - d, d, -1):
            hp = h + offsets[k, 0]
            wp = w + offsets[k, 1]
            k += 1
            for c in range(x.shape[2]):
                tmp = x[h, w, c]
                x[h, w, c] = x[hp, wp, c]
                x[hp, wp, c] = tmp


# --------------------------------------------------------------------------
# float-domain operations
# --------------------------------------------------------------------------


def _gaussian_noise(x, rng, scale):
    return x + rng.normal(0.0, scale, size=x.shape)


def _shot_noise(x, rng, photons):
    return rng.poisson(x * photons) / float(photons)


def _impulse_noise(x, rng, amount):
    u = rng.random(x.shape[:2])
    out = x.copy()
    out[u < amount / 2] = 0.0
    out[(u >= amount / 2) & (u < amount)] = 1.0
    return out


def _speckle_noise(x, rng, scale):
    return x * (1.0 + scale * rng.normal(0.0, 1.0, size=x.shape))


def _gaussian_blur(x, rng, sigma):
    return gaussian_filter(x, sigma)


def _defocus_blur(x, rng, radius, alias_blur):
    return convolve2d(x, disk_kernel(radius, alias_blur))


def _motion_blur(x, rng, radius, sigma):
    angle = rng.uniform(0.0, 180.0)
    return convolve2d(x, motion_kernel(radius, sigma, angle))


def _glass_blur(x, rng, sigma, max_delta, iterations):
    d = int(max_delta)
    out = np.ascontiguousarray(gaussian_filter(x, sigma))
    n = max(0, x.shape[0] - 2 * d) * max(0, x.shape[1] - 2 * d)
    for _ in range(int(iterations)):
        if d > 0 and n > 0:
            # randint(-d, d) semantics: high end exclusive keeps swaps in bounds
            offsets = rng.integers(-d, d, size=(n, 2))
            _swap_pixels(out, offsets, d)
    return gaussian_filter(out, sigma)


def _snow(x, rng, mean, std, scale, threshold, blur_radius, blur_std, blend_ratio):
    # Gaussian field -> zoomed by `scale` -> thresholded -> streaked by a
    # motion blur of (blur_radius, blur_std) -> added over a whitened image
    # mixed in at 1 - blend_ratio.
    h, w = x.shape[:2]
    layer = rng.normal(mean, std, size=(h, w))
    layer = clipped_zoom(layer, scale)
    layer[layer < threshold] = 0.0
    layer = np.clip(layer, 0.0, 1.0)
    angle = rng.uniform(-135.0, -45.0)
    layer = convolve2d(layer, motion_kernel(blur_radius, blur_std, angle))
    gray = (x @ LUMA)[..., None]
    x = blend_ratio * x + (1.0 - blend_ratio) * np.maximum(x, gray * 1.5 + 0.5)
    return x + layer[..., None] + np.rot90(layer, 2)[..., None]


def frost_texture(rng, shape) -> np.ndarray:
    """Procedural ice texture in [0, 1], H x W x 3 with a cold tint."""
    h, w = shape[:2]
    clouds = _plasma_for(rng, (h, w), 1.8)
    grain = ndimage.gaussian_filter(rng.random((h, w)), 0.7)
    grain = (grain - grain.min()) / max(np.ptp(grain), 1e-12)
    # thin bright crystal edges where the fine grain crosses its median
    crystals = np.exp(-(((grain - 0.5) / 0.06) ** 2))
    tex = 0.5 * clouds + 0.3 * grain + 0.35 * crystals * clouds
    tex = (tex - tex.min()) / max(np.ptp(tex), 1e-12)
    return tex[..., None] * FROST_TINT


def _frost(x, rng, frost_intensity, texture_influence):
    return frost_intensity * x + texture_influence * frost_texture(rng, x.shape)


def _fog(x, rng, thickness, smoothness):
    # per-pixel weight toward a constant gray; plasma field gives the haze
    # its spatial structure, thickness bounds the weight by t / (1 + t)
    if thickness == 0:
        return x
    field = _plasma_for(rng, x.shape, smoothness)
    weight = (thickness * field / (1.0 + thickness))[..., None]
    return (1.0 - weight) * x + weight * FOG_GRAY


def _spatter(x, rng, mean, std, sigma, threshold, scaling, complexity):
    h, w = x.shape[:2]
    liquid = ndimage.gaussian_filter(rng.normal(mean, std, size=(h, w)), sigma, mode="reflect")
    if int(complexity) == 0:
        # translucent droplets
        mask = liquid >= threshold
        alpha = np.clip(ndimage.gaussian_filter(mask.astype(float), 1.0) * scaling, 0.0, 1.0)
        color = SPATTER_WATER
    else:
        # opaque mud splashes
        soft = ndimage.gaussian_filter((liquid > threshold).astype(float), scaling)
        mask = soft >= 0.8
        alpha = soft
        color = SPATTER_MUD
    alpha = (alpha * mask)[..., None]
    return (1.0 - alpha) * x + alpha * color


def _brightness(x, rng, offset):
    return x + offset


def _contrast(x, rng, beta):
    mean = x.mean(axis=(0, 1), keepdims=True)
    return beta * (x - mean) + mean


def _jpeg(x, rng, quality):
    buf = io.BytesIO()
    Image.fromarray(to_uint8(x)).save(buf, format="JPEG", quality=int(quality))
    buf.seek(0)
    return np.asarray(Image.open(buf).convert("RGB"), dtype=float) / 255.0


def _pixelate(x, rng, factor):
    h, w = x.shape[:2]
    sw, sh = max(1, int(w * factor)), max(1, int(h * factor))
    small = np.stack(
        [
            np.asarray(Image.fromarray(x[..., c].astype(np.float32), mode="F").resize((sw, sh), Image.BOX))
            for c in range(x.shape[2])
        ],
        axis=-1,
    ).astype(float)
    rows = np.minimum(((np.arange(h) + 0.5) * sh / h).astype(int), sh - 1)
    cols = np.minimum(((np.arange(w) + 0.5) * sw / w).astype(int), sw - 1)
    return small[rows[:, None], cols[None, :]]


_OPS = {
    Kind.GAUSSIAN_NOISE: _gaussian_noise,
    Kind.SHOT_NOISE: _shot_noise,
    Kind.IMPULSE_NOISE: _impulse_noise,
    Kind.SPECKLE_NOISE: _speckle_noise,
    Kind.GAUSSIAN_BLUR: _gaussian_blur,
    Kind.DEFOCUS_BLUR: _defocus_blur,
    Kind.MOTION_BLUR: _motion_blur,
    Kind.GLASS_BLUR: _glass_blur,
    Kind.SNOW: _snow,
    Kind.FROST: _frost,
    Kind.FOG: _fog,
    Kind.SPATTER: _spatter,
    Kind.BRIGHTNESS: _brightness,
    Kind.CONTRAST: _contrast,
    Kind.JPEG: _jpeg,
    Kind.PIXELATE: _pixelate,
}


def _run(img, kind, allowed, level, key, params):
    kind = Kind(kind)
    if kind not in allowed:
        raise ConfigError(f"{kind.value} is not one of {[k.value for k in allowed]}")
    values = resolve_params(kind, level, params)
    x = to_unit(img)
    rng = derive_rng(key) if key is not None else None
    return to_uint8(_OPS[kind](x, rng, *values))


# --------------------------------------------------------------------------
# public API
# --------------------------------------------------------------------------


def add_noise(img, kind, level: int, key: RngKey, params=None) -> np.ndarray:
    """Gaussian, shot, impulse or speckle sensor noise."""
    return _run(img, kind, NOISE_KINDS, level, key, params)


def apply_blur(img, kind, level: int, key: RngKey, params=None) -> np.ndarray:
    """Gaussian, defocus, motion or glass blur.

    Raises:
        KernelTooLargeError: if the kernel is not smaller than the image.
    """
    return _run(img, kind, BLUR_KINDS, level, key, params)


def apply_environment(img, kind, level: int, key: RngKey, params=None) -> np.ndarray:
    return _run(img, kind, ENVIRONMENT_KINDS, level, key, params)


def apply_postprocess(img, kind, level: int, params=None) -> np.ndarray:
    return _run(img, kind, POSTPROCESS_KINDS, level, None, params)


def apply_rgb(img, spec: PerturbationSpec, key: RngKey) -> np.ndarray:
    """Apply one RGB perturbation to the frame addressed by ``key``."""
    if not spec.kind.is_rgb:
        raise ConfigError(f"{spec.kind.value} is not an RGB perturbation")
    level = effective_level(spec, key)
    as_rgb(img)
    values = resolve_params(spec.kind, level, spec.params)
    x = to_unit(img)
    return to_uint8(_OPS[spec.kind](x, derive_rng(key), *values))
