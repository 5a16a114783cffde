"""Deterministic synthetic RGB-D sequence used by tests and the preset sweep."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import Trajectory, quat_from_axis_angle
from .dataset import SequenceLayout, save_sequence

FIXTURE_FRAMES = 16
FIXTURE_SIZE = (96, 128)  # (H, W)
FIXTURE_FPS = 20.0


def fixture_trajectory(n: int = FIXTURE_FRAMES, fps: float = FIXTURE_FPS) -> Trajectory:
    """Smooth forward motion with a slow yaw sweep and a little bob."""
    i = np.arange(n, dtype=float)
    ts = i / fps
    trans = np.stack([0.02 * i, 0.005 * np.sin(0.4 * i), 0.01 * i], axis=1)
    yaw = np.deg2rad(0.8 * i)
    quats = quat_from_axis_angle(np.tile([0.0, 1.0, 0.0], (n, 1)), yaw)
    return Trajectory(ts, quats, trans)


def fixture_frame(i: int, size=FIXTURE_SIZE):
    """RGB (uint8) and depth (m) for frame ``i``: a textured wall at 4.6 m,
    a floor ramp, a box at 1.5 m and a near object at 0.3 m."""
    h, w = size
    y, x = np.mgrid[0:h, 0:w].astype(float)
    shift = 2.0 * i
    u = x + shift

    checker = ((u // 8 + y // 8) % 2) * 0.35
    r = 0.3 + checker + 0.25 * np.sin(u / 9.0)
    g = 0.25 + 0.4 * (y / h) + 0.15 * np.cos(u / 13.0 + y / 7.0)
    b = 0.5 + 0.3 * np.sin((u + y) / 17.0)

    depth = np.full((h, w), 4.6)
    floor = y > 0.6 * h
    depth[floor] = 4.6 - (y[floor] - 0.6 * h) / (0.4 * h) * 4.0
    box = (np.abs(u - 64 - 20 * np.sin(i / 5.0)) < 18) & (np.abs(y - 40) < 16)
    depth[box] = 1.5
    near = (x - 20) ** 2 + (y - 20) ** 2 < 64
    depth[near] = 0.3
    depth[0:2, w - 4 :] = 0.0  # a few pixels the sensor never returns

    shade = np.clip(1.2 - depth / 6.0, 0.3, 1.0)
    rgb = np.stack([r, g, b], axis=-1) * shade[..., None]
    rgb[box] = [0.85, 0.3, 0.2]
    rgb = np.clip(np.rint(rgb * 255), 0, 255).astype(np.uint8)
    return rgb, depth


def write_fixture(root, n: int = FIXTURE_FRAMES, size=FIXTURE_SIZE) -> SequenceLayout:
    """Write the fixture sequence under ``root`` and return its layout."""
    layout = SequenceLayout(Path(root))
    frames = [fixture_frame(i, size) for i in range(n)]
    save_sequence([f[0] for f in frames], [f[1] for f in frames], fixture_trajectory(n), layout)
    return layout
