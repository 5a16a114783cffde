"""Severity parameter tables for the 20 imaging perturbations (levels 1-5)."""

from __future__ import annotations

from collections import namedtuple

from .core import ConfigError, Kind, IMAGING_KINDS, check_level

_FIELDS = {
    Kind.SNOW: ("mean", "std", "scale", "threshold", "blur_radius", "blur_std", "blend_ratio"),
    Kind.FROST: ("frost_intensity", "texture_influence"),
    Kind.FOG: ("thickness", "smoothness"),
    Kind.SPATTER: ("mean", "std", "sigma", "threshold", "scaling", "complexity"),
    Kind.DEFOCUS_BLUR: ("radius", "alias_blur"),
    Kind.GLASS_BLUR: ("sigma", "max_delta", "iterations"),
    Kind.MOTION_BLUR: ("radius", "sigma"),
    Kind.GAUSSIAN_BLUR: ("sigma",),
    Kind.GAUSSIAN_NOISE: ("scale",),
    Kind.SHOT_NOISE: ("photons",),
    Kind.IMPULSE_NOISE: ("amount",),
    Kind.SPECKLE_NOISE: ("scale",),
    Kind.BRIGHTNESS: ("offset",),
    Kind.CONTRAST: ("beta",),
    Kind.JPEG: ("quality",),
    Kind.PIXELATE: ("factor",),
    Kind.DEPTH_GAUSSIAN_NOISE: ("scale",),
    Kind.DEPTH_EDGE_EROSION: ("erosion_rate",),
    Kind.DEPTH_RANDOM_MISSING: ("missing_percent",),
    Kind.DEPTH_RANGE_CLIP: ("min_depth", "max_depth"),
}

_TABLE = {
    Kind.SNOW: [
        (0.1, 0.3, 3.0, 0.5, 10.0, 4.0, 0.8),
        (0.2, 0.3, 2, 0.5, 12, 4, 0.7),
        (0.55, 0.3, 4, 0.9, 12, 8, 0.7),
        (0.55, 0.3, 4.5, 0.85, 12, 8, 0.65),
        (0.55, 0.3, 2.5, 0.85, 12, 12, 0.55),
    ],
    Kind.FROST: [(1.00, 0.40), (0.80, 0.60), (0.70, 0.70), (0.65, 0.70), (0.60, 0.75)],
    Kind.FOG: [(1.5, 2.0), (2.0, 2.0), (2.5, 1.7), (2.5, 1.5), (3.0, 1.4)],
    Kind.SPATTER: [
        (0.65, 0.3, 4, 0.69, 0.6, 0),
        (0.65, 0.3, 3, 0.68, 0.6, 0),
        (0.65, 0.3, 2, 0.68, 0.5, 0),
        (0.65, 0.3, 1, 0.65, 1.5, 1),
        (0.67, 0.4, 1, 0.65, 1.5, 1),
    ],
    Kind.DEFOCUS_BLUR: [(3.0, 0.1), (4.0, 0.5), (6.0, 0.5), (8.0, 0.5), (10.0, 0.5)],
    Kind.GLASS_BLUR: [(0.7, 1.0, 2.0), (0.9, 2.0, 1.0), (1.0, 2.0, 3.0), (1.1, 3.0, 2.0), (1.5, 4.0, 2.0)],
    Kind.MOTION_BLUR: [(10, 3), (15, 5), (15, 8), (15, 12), (20, 15)],
    Kind.GAUSSIAN_BLUR: [(1,), (2,), (3,), (4,), (6,)],
    Kind.GAUSSIAN_NOISE: [(0.08,), (0.12,), (0.18,), (0.26,), (0.38,)],
    Kind.SHOT_NOISE: [(60,), (25,), (12,), (5,), (3,)],
    Kind.IMPULSE_NOISE: [(0.03,), (0.06,), (0.09,), (0.17,), (0.27,)],
    Kind.SPECKLE_NOISE: [(0.15,), (0.2,), (0.35,), (0.45,), (0.6,)],
    Kind.BRIGHTNESS: [(0.1,), (0.2,), (0.3,), (0.4,), (0.5,)],
    Kind.CONTRAST: [(0.40,), (0.30,), (0.20,), (0.10,), (0.05,)],
    Kind.JPEG: [(25,), (18,), (15,), (10,), (7,)],
    Kind.PIXELATE: [(0.60,), (0.50,), (0.40,), (0.30,), (0.25,)],
    Kind.DEPTH_GAUSSIAN_NOISE: [(0.1,), (0.2,), (0.3,), (0.4,), (0.5,)],
    Kind.DEPTH_EDGE_EROSION: [(0.015,), (0.020,), (0.025,), (0.03,), (0.035,)],
    Kind.DEPTH_RANDOM_MISSING: [(10,), (15,), (20,), (25,), (30,)],
    Kind.DEPTH_RANGE_CLIP: [(0.2, 4.4), (0.3, 4.2), (0.4, 4.0), (0.5, 3.8), (0.6, 3.6)],
}

# Human-readable names used in the documentation dump.
LABELS = {
    Kind.SNOW: "Snow Effect",
    Kind.FROST: "Frost Effect",
    Kind.FOG: "Fog Effect",
    Kind.SPATTER: "Spatter Effect",
    Kind.DEFOCUS_BLUR: "Defocus Blur",
    Kind.GLASS_BLUR: "Glass Blur",
    Kind.MOTION_BLUR: "Motion Blur",
    Kind.GAUSSIAN_BLUR: "Gaussian Blur",
    Kind.GAUSSIAN_NOISE: "Gaussian Noise",
    Kind.SHOT_NOISE: "Shot Noise",
    Kind.IMPULSE_NOISE: "Impulse Noise",
    Kind.SPECKLE_NOISE: "Speckle Noise",
    Kind.BRIGHTNESS: "Brightness Increase",
    Kind.CONTRAST: "Contrast Decrease",
    Kind.JPEG: "JPEG Compression",
    Kind.PIXELATE: "Pixelate",
    Kind.DEPTH_GAUSSIAN_NOISE: "Depth Gaussian Noise",
    Kind.DEPTH_EDGE_EROSION: "Depth Edge Erosion",
    Kind.DEPTH_RANDOM_MISSING: "Depth Random Missing (%)",
    Kind.DEPTH_RANGE_CLIP: "Depth Range Clipping (m)",
}

_RECORDS = {
    kind: namedtuple("".join(w.title() for w in kind.value.split("_")) + "Params", fields)
    for kind, fields in _FIELDS.items()
}


def param_fields(kind: Kind) -> tuple:
    kind = Kind(kind)
    if kind not in _FIELDS:
        raise ConfigError(f"{kind.value} has no severity table")
    return _FIELDS[kind]


def severity_params(kind, level: int):
    """Parameter record for ``kind`` at ``level``, exactly as tabulated.

    Records are named tuples, so ``severity_params(Kind.DEPTH_RANGE_CLIP, 3)``
    compares equal to ``(0.4, 4.0)``.
    """
    try:
        kind = Kind(kind)
    except ValueError:
        raise ConfigError(f"unknown perturbation kind {kind!r}") from None
    if kind not in _TABLE:
        raise ConfigError(f"{kind.value} is not an imaging perturbation")
    level = check_level(level)
    return _RECORDS[kind](*_TABLE[kind][level - 1])


def resolve_params(kind, level: int, overrides=None):
    """Table parameters with selected fields replaced by ``overrides``."""
    params = severity_params(kind, level)
    if overrides:
        unknown = set(overrides) - set(params._fields)
        if unknown:
            raise ConfigError(f"unknown parameters for {Kind(kind).value}: {sorted(unknown)}")
        params = params._replace(**overrides)
    return params


def severity_table() -> dict:
    """``{kind value: {"fields": [...], "levels": {1: [...], ...}}}`` for all 20 kinds."""
    return {
        kind.value: {
            "label": LABELS[kind],
            "fields": list(_FIELDS[kind]),
            "levels": {lvl: list(severity_params(kind, lvl)) for lvl in range(1, 6)},
        }
        for kind in IMAGING_KINDS
    }


def _fmt(v) -> str:
    return f"{v:g}" if isinstance(v, float) else str(v)


def format_severity_table() -> str:
    """Plain-text dump of every kind and level, one row per kind."""
    lines = []
    for kind in IMAGING_KINDS:
        fields = ", ".join(_FIELDS[kind])
        cells = []
        for lvl in range(1, 6):
            vals = severity_params(kind, lvl)
            cells.append(_fmt(vals[0]) if len(vals) == 1 else "(" + ", ".join(_fmt(v) for v in vals) + ")")
        lines.append(f"  {kind.value:<22} [{fields}]")
        lines.append("      " + " | ".join(f"L{i + 1}: {c}" for i, c in enumerate(cells)))
    return "\n".join(lines)
