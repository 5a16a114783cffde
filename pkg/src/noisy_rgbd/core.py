"""Shared types: perturbation kinds, keyed random streams, poses and trajectories."""

from __future__ import annotations

import enum
import hashlib
import math
import struct
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

VOID = 0.0
QUAT_TOL = 1e-9


class ConfigError(ValueError):
    """Invalid perturbation, severity or pipeline configuration."""


class Mode(str, enum.Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


class Kind(str, enum.Enum):
    # RGB: sensor noise
    GAUSSIAN_NOISE = "rgb_gaussian_noise"
    SHOT_NOISE = "rgb_shot_noise"
    IMPULSE_NOISE = "rgb_impulse_noise"
    SPECKLE_NOISE = "rgb_speckle_noise"
    # RGB: blur
    GAUSSIAN_BLUR = "rgb_gaussian_blur"
    DEFOCUS_BLUR = "rgb_defocus_blur"
    MOTION_BLUR = "rgb_motion_blur"
    GLASS_BLUR = "rgb_glass_blur"
    # RGB: environment
    SNOW = "rgb_snow"
    FROST = "rgb_frost"
    FOG = "rgb_fog"
    SPATTER = "rgb_spatter"
    # RGB: post-processing
    BRIGHTNESS = "rgb_brightness"
    CONTRAST = "rgb_contrast"
    JPEG = "rgb_jpeg"
    PIXELATE = "rgb_pixelate"
    # depth
    DEPTH_GAUSSIAN_NOISE = "depth_gaussian_noise"
    DEPTH_EDGE_EROSION = "depth_edge_erosion"
    DEPTH_RANDOM_MISSING = "depth_random_missing"
    DEPTH_RANGE_CLIP = "depth_range_clip"
    # pose and synchronization
    MOTION_DEVIATION = "motion_deviation"
    DESYNC = "desync"

    @property
    def is_rgb(self) -> bool:
        return self in RGB_CATEGORIES

    @property
    def is_depth(self) -> bool:
        return self.value.startswith("depth_")

    @property
    def is_imaging(self) -> bool:
        return self.is_rgb or self.is_depth

    @classmethod
    def parse(cls, name: str) -> "Kind":
        try:
            return cls(name)
        except ValueError:
            raise ConfigError(f"unknown perturbation kind {name!r}") from None


RGB_CATEGORIES = {
    Kind.GAUSSIAN_NOISE: "noise",
    Kind.SHOT_NOISE: "noise",
    Kind.IMPULSE_NOISE: "noise",
    Kind.SPECKLE_NOISE: "noise",
    Kind.GAUSSIAN_BLUR: "blur",
    Kind.DEFOCUS_BLUR: "blur",
    Kind.MOTION_BLUR: "blur",
    Kind.GLASS_BLUR: "blur",
    Kind.SNOW: "environment",
    Kind.FROST: "environment",
    Kind.FOG: "environment",
    Kind.SPATTER: "environment",
    Kind.BRIGHTNESS: "postprocess",
    Kind.CONTRAST: "postprocess",
    Kind.JPEG: "postprocess",
    Kind.PIXELATE: "postprocess",
}
RGB_KINDS = tuple(RGB_CATEGORIES)
DEPTH_KINDS = tuple(k for k in Kind if k.is_depth)
IMAGING_KINDS = RGB_KINDS + DEPTH_KINDS


def check_level(level: int) -> int:
    if isinstance(level, bool) or int(level) != level or not 1 <= level <= 5:
        raise ConfigError(f"severity level must be an integer in 1..5, got {level!r}")
    return int(level)


@dataclass(frozen=True)
class PerturbationSpec:
    """One perturbation: kind, severity level (imaging kinds) and mode.

    ``params`` overrides individual table values for imaging kinds, and
    carries the kind-specific settings for ``motion_deviation``
    (``rotation_std_deg``, ``translation_std_m``) and ``desync``
    (``interval``, ``delayed``).
    """

    kind: Kind
    level: Optional[int] = None
    mode: Mode = Mode.STATIC
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        kind = Kind.parse(self.kind) if not isinstance(self.kind, Kind) else self.kind
        object.__setattr__(self, "kind", kind)
        try:
            object.__setattr__(self, "mode", Mode(self.mode))
        except ValueError:
            raise ConfigError(f"unknown mode {self.mode!r}") from None
        object.__setattr__(self, "params", dict(self.params or {}))
        if kind.is_imaging:
            if self.level is None:
                raise ConfigError(f"{kind.value} needs a severity level")
            object.__setattr__(self, "level", check_level(self.level))
            from .severity import resolve_params

            resolve_params(kind, self.level, self.params)
        elif kind is Kind.MOTION_DEVIATION:
            allowed = {"rotation_std_deg", "translation_std_m"}
            _check_keys(kind, self.params, allowed)
            for name in allowed:
                v = float(self.params.get(name, 0.0))
                if not v >= 0:
                    raise ConfigError(f"{name} must be >= 0, got {v}")
        elif kind is Kind.DESYNC:
            _check_keys(kind, self.params, {"interval", "delayed"})
            interval = self.params.get("interval", 0)
            if isinstance(interval, bool) or int(interval) != interval or interval < 0:
                raise ConfigError(f"desync interval must be an integer >= 0, got {interval!r}")
            if self.params.get("delayed", "depth") not in ("depth", "rgb"):
                raise ConfigError("desync 'delayed' must be 'depth' or 'rgb'")

    def effective_params(self):
        """Resolved table parameters (imaging kinds only)."""
        from .severity import resolve_params

        return resolve_params(self.kind, self.level, self.params)

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value}
        if self.level is not None:
            out["level"] = self.level
        out["mode"] = self.mode.value
        if self.params:
            out["params"] = dict(self.params)
        return out


def _check_keys(kind: Kind, params: dict, allowed: set) -> None:
    unknown = set(params) - allowed
    if unknown:
        raise ConfigError(f"unknown parameters for {kind.value}: {sorted(unknown)}")


# --------------------------------------------------------------------------
# Keyed random streams
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RngKey:
    """Address of one independent random stream.

    Streams are derived statelessly from the key, so a frame produces the
    same draws whatever order (or thread) it is processed in.
    """

    seed: int
    sequence_id: str = ""
    frame: int = 0
    op: int = 0

    def with_frame(self, frame: int) -> "RngKey":
        return RngKey(self.seed, self.sequence_id, frame, self.op)

    def with_op(self, op: int) -> "RngKey":
        return RngKey(self.seed, self.sequence_id, self.frame, op)

    def digest(self) -> bytes:
        h = hashlib.blake2b(digest_size=16, person=b"noisy-rgbd-key")
        h.update(struct.pack("<Q", self.seed & 0xFFFFFFFFFFFFFFFF))
        h.update(hashlib.blake2b(self.sequence_id.encode("utf-8"), digest_size=16).digest())
        h.update(struct.pack("<qq", self.frame, self.op))
        return h.digest()


def derive_rng(key: RngKey) -> np.random.Generator:
    """Counter-based (Philox) generator whose 128-bit key is a hash of ``key``."""
    return np.random.Generator(np.random.Philox(key=int.from_bytes(key.digest(), "little")))


# XOR-ed into the op id to get the stream that draws dynamic-mode levels.
LEVEL_STREAM = 1 << 40


def effective_level(spec: "PerturbationSpec", key: RngKey) -> int:
    """Severity level in force for the frame addressed by ``key``.

    Dynamic mode draws uniformly from {level-1, level, level+1}, clamped to 1..5.
    """
    if spec.mode is Mode.STATIC:
        return spec.level
    rng = derive_rng(key.with_op(key.op ^ LEVEL_STREAM))
    return int(np.clip(spec.level + rng.integers(-1, 2), 1, 5))


# --------------------------------------------------------------------------
# Rotations. Quaternions are (w, x, y, z), Hamilton convention.
# --------------------------------------------------------------------------


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(n == 0):
        raise ValueError("zero-norm quaternion")
    return q / n


def quat_multiply(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_conjugate(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_from_axis_angle(axis, angle) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    angle = np.asarray(angle, dtype=float)
    half = angle[..., None] / 2.0
    return np.concatenate([np.cos(half), np.sin(half) * axis], axis=-1)


def quat_from_euler_xyz(angles_rad) -> np.ndarray:
    """Rotation about x, then y, then z (fixed axes): q = qz * qy * qx."""
    angles_rad = np.asarray(angles_rad, dtype=float)
    qx = quat_from_axis_angle([1.0, 0.0, 0.0], angles_rad[..., 0])
    qy = quat_from_axis_angle([0.0, 1.0, 0.0], angles_rad[..., 1])
    qz = quat_from_axis_angle([0.0, 0.0, 1.0], angles_rad[..., 2])
    return quat_multiply(qz, quat_multiply(qy, qx))


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = np.moveaxis(quat_normalize(q), -1, 0)
    m = np.stack(
        [
            1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
            2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
            2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y),
        ],
        axis=-1,
    )
    return m.reshape(m.shape[:-1] + (3, 3))


def matrix_to_quat(m) -> np.ndarray:
    """Shepperd's method; returns the quaternion with w >= 0."""
    m = np.asarray(m, dtype=float)
    flat = m.reshape(-1, 3, 3)
    out = np.empty((flat.shape[0], 4))
    for i, r in enumerate(flat):
        tr = r[0, 0] + r[1, 1] + r[2, 2]
        cands = (tr, r[0, 0], r[1, 1], r[2, 2])
        k = int(np.argmax(cands))
        if k == 0:
            s = 2.0 * math.sqrt(1.0 + tr)
            q = (0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s)
        elif k == 1:
            s = 2.0 * math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2])
            q = ((r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s)
        elif k == 2:
            s = 2.0 * math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2])
            q = ((r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s)
        else:
            s = 2.0 * math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1])
            q = ((r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s)
        q = np.asarray(q)
        out[i] = -q if q[0] < 0 else q
    out = quat_normalize(out)
    return out.reshape(m.shape[:-2] + (4,))


def rotation_angle(r) -> np.ndarray:
    """Geodesic angle (radians) of rotation matrices."""
    r = np.asarray(r, dtype=float)
    cos = (np.trace(r, axis1=-2, axis2=-1) - 1.0) / 2.0
    return np.arccos(np.clip(cos, -1.0, 1.0))


# --------------------------------------------------------------------------
# Poses
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Pose:
    timestamp: float
    rotation: tuple  # unit quaternion (w, x, y, z)
    translation: tuple

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError("timestamp must be non-negative")
        q = quat_normalize(self.rotation)
        object.__setattr__(self, "rotation", tuple(float(v) for v in q))
        object.__setattr__(self, "translation", tuple(float(v) for v in self.translation))
        if len(self.translation) != 3:
            raise ValueError("translation must be a 3-vector")

    def matrix(self) -> np.ndarray:
        t = np.eye(4)
        t[:3, :3] = quat_to_matrix(self.rotation)
        t[:3, 3] = self.translation
        return t


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Timestamped poses, stored column-wise.

    ``quaternions`` are (w, x, y, z) rows; ``translations`` are meters.
    """

    timestamps: np.ndarray
    quaternions: np.ndarray
    translations: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=float).reshape(-1)
        q = np.asarray(self.quaternions, dtype=float).reshape(-1, 4)
        t = np.asarray(self.translations, dtype=float).reshape(-1, 3)
        if not (len(ts) == len(q) == len(t)):
            raise ValueError("timestamps, rotations and translations differ in length")
        if len(ts) == 0:
            raise ValueError("a trajectory needs at least one pose")
        if np.any(np.diff(ts) <= 0):
            raise ValueError("trajectory timestamps must be strictly increasing")
        if np.any(ts < 0):
            raise ValueError("timestamps must be non-negative")
        norms = np.linalg.norm(q, axis=1)
        if np.any(np.abs(norms - 1.0) > QUAT_TOL):
            q = quat_normalize(q)
        for name, arr in (("timestamps", ts), ("quaternions", q), ("translations", t)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_poses(cls, poses) -> "Trajectory":
        poses = list(poses)
        return cls(
            np.array([p.timestamp for p in poses]),
            np.array([p.rotation for p in poses]),
            np.array([p.translation for p in poses]),
        )

    def __len__(self) -> int:
        return len(self.timestamps)

    def __getitem__(self, i):
        if isinstance(i, (slice, np.ndarray, list)):
            return Trajectory(self.timestamps[i], self.quaternions[i], self.translations[i])
        return Pose(self.timestamps[i], tuple(self.quaternions[i]), tuple(self.translations[i]))

    def __iter__(self) -> Iterator[Pose]:
        return (self[i] for i in range(len(self)))

    @property
    def poses(self) -> list:
        return list(self)

    def rotations(self) -> np.ndarray:
        return quat_to_matrix(self.quaternions)

    def matrices(self) -> np.ndarray:
        out = np.tile(np.eye(4), (len(self), 1, 1))
        out[:, :3, :3] = self.rotations()
        out[:, :3, 3] = self.translations
        return out

    def equals(self, other: "Trajectory") -> bool:
        """Bit-exact equality."""
        return (
            len(self) == len(other)
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.quaternions, other.quaternions)
            and np.array_equal(self.translations, other.translations)
        )


def as_rgb(img) -> np.ndarray:
    """Validate an H x W x 3 uint8 image."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] == 0 or img.shape[1] == 0:
        raise ValueError(f"expected a non-empty H x W x 3 image, got shape {img.shape}")
    if img.dtype != np.uint8:
        raise ValueError(f"RGB images are stored as uint8, got {img.dtype}")
    return img


def as_depth(depth) -> np.ndarray:
    """Validate an H x W depth map in meters (VOID = 0)."""
    depth = np.asarray(depth, dtype=np.float64)
    if depth.ndim != 2 or depth.size == 0:
        raise ValueError(f"expected a non-empty H x W depth map, got shape {depth.shape}")
    if np.any(depth < 0) or not np.all(np.isfinite(depth)):
        raise ValueError("depth values must be finite and non-negative (0 marks VOID)")
    return depth


def to_unit(img: np.ndarray) -> np.ndarray:
    return as_rgb(img).astype(np.float64) / 255.0


def to_uint8(x: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(x, 0.0, 1.0) * 255.0).astype(np.uint8)


__all__ = [
    "VOID",
    "ConfigError",
    "Mode",
    "Kind",
    "RGB_KINDS",
    "DEPTH_KINDS",
    "IMAGING_KINDS",
    "PerturbationSpec",
    "RngKey",
    "derive_rng",
    "Pose",
    "Trajectory",
]
