"""Benchmark preset recipes and the mixed-perturbation recipes.

``preset_recipes()`` is the single source of truth; the YAML files under
``recipes/`` are generated from it by ``write_presets``.
"""

from __future__ import annotations

from pathlib import Path

import yaml

from .core import DEPTH_KINDS, RGB_KINDS, Kind, Mode
from .desync import DESYNC_INTERVALS
from .motion import DOWNSAMPLE_RATIOS, deviation_grid
from .pipeline import FASTER_MOTION, config_from_dict

RGB_PRESET_LEVELS = (1, 3, 5)
DEPTH_PRESET_LEVEL = 3
MEDIUM_LEVEL = 3
MEDIUM_INTERVAL = 10
MIXED_SEQUENCE = (
    {"kind": Kind.SNOW.value, "level": MEDIUM_LEVEL},
    {"kind": Kind.MOTION_BLUR.value, "level": MEDIUM_LEVEL},
    {"kind": Kind.GAUSSIAN_NOISE.value, "level": MEDIUM_LEVEL},
    {"kind": Kind.JPEG.value, "level": MEDIUM_LEVEL},
    {"kind": Kind.DEPTH_GAUSSIAN_NOISE.value, "level": MEDIUM_LEVEL},
    {"kind": Kind.DESYNC.value, "interval": MEDIUM_INTERVAL},
)
RECIPE_DIR = Path(__file__).parent / "recipes"


def _recipe(entries) -> dict:
    return {"seed": 0, "perturbations": [dict(e) for e in entries]}


def _fmt(v: float) -> str:
    return f"{v:g}".replace(".", "p")


def preset_recipes() -> dict:
    """name -> recipe document, in a stable order."""
    out = {}
    for kind in RGB_KINDS:
        for level in RGB_PRESET_LEVELS:
            for mode in Mode:
                out[f"{kind.value}_l{level}_{mode.value}"] = _recipe(
                    [{"kind": kind.value, "level": level, "mode": mode.value}]
                )
    for kind in DEPTH_KINDS:
        out[f"{kind.value}_l{DEPTH_PRESET_LEVEL}"] = _recipe(
            [{"kind": kind.value, "level": DEPTH_PRESET_LEVEL}]
        )
    for dev in deviation_grid():
        name = f"motion_deviation_r{_fmt(dev.rotation_std_deg)}_t{_fmt(dev.translation_std_m)}"
        out[name] = _recipe(
            [{
                "kind": Kind.MOTION_DEVIATION.value,
                "rotation_std_deg": dev.rotation_std_deg,
                "translation_std_m": dev.translation_std_m,
            }]
        )
    for ratio in DOWNSAMPLE_RATIOS:
        out[f"faster_motion_x{ratio}"] = _recipe([{"kind": FASTER_MOTION, "ratio": ratio}])
    for interval in DESYNC_INTERVALS:
        for mode in Mode:
            out[f"desync_d{interval}_{mode.value}"] = _recipe(
                [{"kind": Kind.DESYNC.value, "interval": interval, "mode": mode.value}]
            )
    for n in range(1, len(MIXED_SEQUENCE) + 1):
        out[f"mixed_{n}"] = _recipe(MIXED_SEQUENCE[:n])
    return out


def preset_yaml(doc: dict) -> str:
    return yaml.safe_dump(doc, sort_keys=False)


def write_presets(directory=RECIPE_DIR) -> list:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, doc in preset_recipes().items():
        config_from_dict(doc)
        path = directory / f"{name}.yaml"
        path.write_text(preset_yaml(doc))
        paths.append(path)
    return paths


def shipped_recipes(directory=RECIPE_DIR) -> list:
    return sorted(Path(directory).glob("*.yaml"))
