"""Pose perturbations: per-frame SE(3) deviations, faster motion, motion statistics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    ConfigError,
    Mode,
    RngKey,
    Trajectory,
    derive_rng,
    quat_conjugate,
    quat_from_euler_xyz,
    quat_multiply,
    quat_normalize,
    quat_to_matrix,
    rotation_angle,
)

DEFAULT_FPS = 20.0
ROTATION_STDS_DEG = (0.0, 1.0, 3.0, 5.0)
TRANSLATION_STDS_M = (0.0, 0.0125, 0.025, 0.05)
DOWNSAMPLE_RATIOS = (2, 4, 8)


@dataclass(frozen=True)
class DeviationSpec:
    rotation_std_deg: float = 0.0
    translation_std_m: float = 0.0
    mode: Mode = Mode.STATIC

    def __post_init__(self):
        if not (self.rotation_std_deg >= 0 and self.translation_std_m >= 0):
            raise ConfigError("deviation standard deviations must be >= 0")


@dataclass(frozen=True)
class MotionStats:
    translation_speed: np.ndarray  # m/s, N-1
    translation_acceleration: np.ndarray  # m/s^2, N-2
    rotation_speed: np.ndarray  # deg/s, N-1
    rotation_acceleration: np.ndarray  # deg/s^2, N-2
    frame_rate: float = DEFAULT_FPS
    summary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"frame_rate": self.frame_rate, **self.summary}


def deviation_grid():
    """The benchmark deviation presets: every (rotation std, translation std)
    pair except the all-zero one (3 rotation-only, 3 translation-only, 9 mixed)."""
    return [
        DeviationSpec(r, t)
        for r in ROTATION_STDS_DEG
        for t in TRANSLATION_STDS_M
        if (r, t) != (0.0, 0.0)
    ]


def sample_deviations(n: int, spec: DeviationSpec, key: RngKey):
    """Per-frame (rotation quaternion, translation offset) draws.

    Each frame has its own stream so results do not depend on trajectory length.
    """
    angles = np.empty((n, 3))
    offsets = np.empty((n, 3))
    for i in range(n):
        draws = derive_rng(key.with_frame(i)).normal(size=6)
        angles[i] = draws[:3] * np.deg2rad(spec.rotation_std_deg)
        offsets[i] = draws[3:] * spec.translation_std_m
    return quat_from_euler_xyz(angles), offsets


def perturb_trajectory(traj: Trajectory, spec: DeviationSpec, key: RngKey) -> Trajectory:
    """Right-multiply each rotation by a random deltaR and add a random offset.

    deltaR is built from per-axis Euler angles ~ N(0, std^2), applied about
    x, then y, then z. Timestamps are unchanged.
    """
    if spec.rotation_std_deg == 0 and spec.translation_std_m == 0:
        return traj
    dq, dt = sample_deviations(len(traj), spec, key)
    q = quat_normalize(quat_multiply(traj.quaternions, dq))
    return Trajectory(traj.timestamps.copy(), q, traj.translations + dt)


def downsample_stream(frames, ratio: int):
    """Keep every ``ratio``-th element starting at index 0."""
    if isinstance(ratio, bool) or int(ratio) != ratio or ratio < 1:
        raise ConfigError(f"downsample ratio must be an integer >= 1, got {ratio!r}")
    return frames[:: int(ratio)]


def downsample_indices(n: int, ratio: int) -> np.ndarray:
    return np.arange(0, n, ratio)


def motion_statistics(traj: Trajectory, frame_rate: float = DEFAULT_FPS) -> MotionStats:
    """Frame-to-frame speeds and their first differences.

    Accelerations are signed; the summary reports the mean of their
    magnitudes next to the mean speeds.
    """
    if len(traj) < 2:
        raise ValueError("motion statistics need at least two poses")
    fps = float(frame_rate)
    t_speed = np.linalg.norm(np.diff(traj.translations, axis=0), axis=1) * fps
    q = traj.quaternions
    rel = quat_multiply(quat_conjugate(q[:-1]), q[1:])
    r_speed = np.rad2deg(rotation_angle(quat_to_matrix(rel))) * fps
    t_acc = np.diff(t_speed) * fps
    r_acc = np.diff(r_speed) * fps

    def _mean(a):
        return float(np.mean(a)) if len(a) else 0.0

    summary = {
        "mean_translation_speed": _mean(t_speed),
        "mean_translation_acceleration": _mean(np.abs(t_acc)),
        "mean_rotation_speed": _mean(r_speed),
        "mean_rotation_acceleration": _mean(np.abs(r_acc)),
    }
    return MotionStats(t_speed, t_acc, r_speed, r_acc, fps, summary)
