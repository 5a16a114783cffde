"""Depth imaging perturbations on metric depth maps (VOID = 0.0)."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .core import VOID, ConfigError, Kind, PerturbationSpec, RngKey, as_depth, derive_rng, effective_level
from .severity import resolve_params

MIN_DEPTH = 1e-4
EDGE_PERCENTILE = 90.0
MAX_EROSION_BAND = 16
PATCH_SIDE_RANGE = (0.02, 0.10)


def depth_gaussian_noise(depth, level: int, key: RngKey, params=None) -> np.ndarray:
    """Additive N(0, scale^2) meters on valid pixels, clamped at ``MIN_DEPTH``."""
    (scale,) = resolve_params(Kind.DEPTH_GAUSSIAN_NOISE, level, params)
    d = as_depth(depth)
    noise = derive_rng(key).normal(0.0, scale, size=d.shape)
    valid = d != VOID
    return np.where(valid, np.maximum(d + noise, MIN_DEPTH), VOID)


def edge_mask(depth: np.ndarray) -> np.ndarray:
    """Pixels whose central-difference gradient magnitude is nonzero and at or
    above the 90th percentile of all magnitudes."""
    gy, gx = np.gradient(depth)
    mag = np.hypot(gx, gy)
    if not np.any(mag > 0):
        return np.zeros(depth.shape, dtype=bool)
    thr = np.percentile(mag, EDGE_PERCENTILE)
    return (mag > 0) & (mag >= thr)


def depth_edge_erosion(depth, level: int, key: RngKey, params=None) -> np.ndarray:
    """Set a random subset of pixels near depth edges to VOID.

    The candidate band is the edge set dilated until it holds enough valid
    pixels for the target rate (or ``MAX_EROSION_BAND`` pixels wide); the
    number erased is ``round(rate * H * W)`` when the band allows it.
    """
    (rate,) = resolve_params(Kind.DEPTH_EDGE_EROSION, level, params)
    d = as_depth(depth)
    edges = edge_mask(d)
    out = d.copy()
    if not edges.any() or rate <= 0:
        return out
    valid = d != VOID
    target = int(round(rate * d.size))
    band = edges.copy()
    for _ in range(MAX_EROSION_BAND):
        if np.count_nonzero(band & valid) >= target:
            break
        band = ndimage.binary_dilation(band)
    candidates = np.flatnonzero(band & valid)
    n = min(target, len(candidates))
    rng = derive_rng(key)
    chosen = rng.choice(candidates, size=n, replace=False) if n else candidates[:0]
    out.reshape(-1)[chosen] = VOID
    return out


def missing_mask(shape, rate: float, rng: np.random.Generator, void=None) -> np.ndarray:
    """Boolean mask of random rectangles; stops once the VOID fraction
    (existing ``void`` pixels included) first reaches ``rate``."""
    h, w = shape
    mask = np.zeros(shape, dtype=bool) if void is None else void.copy()
    target = rate * h * w
    count = int(mask.sum())
    lo, hi = PATCH_SIDE_RANGE
    while count < target:
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        ph = max(1, int(round(rng.uniform(lo, hi) * h)))
        pw = max(1, int(round(rng.uniform(lo, hi) * w)))
        y0, x0 = max(0, int(cy - ph / 2)), max(0, int(cx - pw / 2))
        y1, x1 = min(h, y0 + ph), min(w, x0 + pw)
        patch = mask[y0:y1, x0:x1]
        count += patch.size - int(patch.sum())
        patch[...] = True
    return mask


def depth_random_missing(depth, level: int, key: RngKey, params=None) -> np.ndarray:
    """Mask random rectangular patches until the missing rate is reached.

    Raises:
        ConfigError: when the image is too small to hit the rate within 1%.
    """
    (percent,) = resolve_params(Kind.DEPTH_RANDOM_MISSING, level, params)
    d = as_depth(depth)
    rate = percent / 100.0
    if rate <= 0:
        return d.copy()
    if d.size < 100:
        raise ConfigError(f"a {d.shape[1]}x{d.shape[0]} depth map is too small for a {percent}% missing rate")
    mask = missing_mask(d.shape, rate, derive_rng(key), void=(d == VOID))
    return np.where(mask, VOID, d)


def depth_range_clip(depth, level: int, params=None) -> np.ndarray:
    """VOID every depth outside [min_depth, max_depth]; in-range values untouched."""
    lo, hi = resolve_params(Kind.DEPTH_RANGE_CLIP, level, params)
    if not lo < hi:
        raise ConfigError(f"range clip needs min < max, got ({lo}, {hi})")
    d = as_depth(depth)
    return np.where((d < lo) | (d > hi), VOID, d)


def apply_depth(depth, spec: PerturbationSpec, key: RngKey) -> np.ndarray:
    """Apply one depth perturbation to the frame addressed by ``key``."""
    level = effective_level(spec, key)
    if spec.kind is Kind.DEPTH_GAUSSIAN_NOISE:
        return depth_gaussian_noise(depth, level, key, spec.params)
    if spec.kind is Kind.DEPTH_EDGE_EROSION:
        return depth_edge_erosion(depth, level, key, spec.params)
    if spec.kind is Kind.DEPTH_RANDOM_MISSING:
        return depth_random_missing(depth, level, key, spec.params)
    if spec.kind is Kind.DEPTH_RANGE_CLIP:
        return depth_range_clip(depth, level, spec.params)
    raise ConfigError(f"{spec.kind.value} is not a depth perturbation")
