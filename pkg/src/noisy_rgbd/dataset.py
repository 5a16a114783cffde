"""RGB-D sequence directories: ``rgb/%06d.png``, ``depth/%06d.png``, ``groundtruth.txt``."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .core import VOID, Trajectory, as_depth, as_rgb

log = logging.getLogger(__name__)

DEFAULT_DEPTH_SCALE = 6553.5
FRAME_PATTERN = "{:06d}.png"
TRAJECTORY_HEADER = "# timestamp tx ty tz qx qy qz qw"


class SequenceError(ValueError):
    """Malformed sequence: missing frames, length mismatch, bad trajectory."""


@dataclass(frozen=True)
class SequenceLayout:
    root: Path
    rgb_dir: str = "rgb"
    depth_dir: str = "depth"
    trajectory_file: str = "groundtruth.txt"
    depth_scale: float = DEFAULT_DEPTH_SCALE

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))
        if not self.depth_scale > 0:
            raise ValueError("depth_scale must be positive")

    def rgb_path(self, i: int) -> Path:
        return self.root / self.rgb_dir / FRAME_PATTERN.format(i)

    def depth_path(self, i: int) -> Path:
        return self.root / self.depth_dir / FRAME_PATTERN.format(i)

    @property
    def trajectory_path(self) -> Path:
        return self.root / self.trajectory_file

    def frame_count(self) -> int:
        """Number of frames after checking the three sources agree."""
        rgb = _frame_indices(self.root / self.rgb_dir)
        depth = _frame_indices(self.root / self.depth_dir)
        traj = read_trajectory(self.trajectory_path)
        for name, idx in (("rgb", rgb), ("depth", depth)):
            if idx != list(range(len(idx))):
                raise SequenceError(f"{name} frame indices are not contiguous from 0")
        if not (len(rgb) == len(depth) == len(traj)):
            raise SequenceError(
                f"stream lengths disagree: {len(rgb)} rgb, {len(depth)} depth, {len(traj)} poses"
            )
        return len(rgb)


def _frame_indices(directory: Path) -> list:
    if not directory.is_dir():
        raise FileNotFoundError(f"missing frame directory {directory}")
    idx = sorted(int(p.stem) for p in directory.iterdir() if re.fullmatch(r"\d+\.png", p.name))
    return idx


# --------------------------------------------------------------------------
# trajectories
# --------------------------------------------------------------------------


def parse_trajectory(text: str) -> Trajectory | None:
    """Parse "timestamp tx ty tz qx qy qz qw" lines; None if there are no poses."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.replace(",", " ").split()
        if len(fields) != 8:
            raise SequenceError(f"line {lineno}: expected 8 fields, got {len(fields)}")
        try:
            rows.append([float(f) for f in fields])
        except ValueError as exc:
            raise SequenceError(f"line {lineno}: {exc}") from None
    if not rows:
        return None
    a = np.array(rows)
    try:
        return Trajectory(a[:, 0], a[:, [7, 4, 5, 6]], a[:, 1:4])
    except ValueError as exc:
        raise SequenceError(str(exc)) from None


def read_trajectory(path) -> Trajectory:
    traj = parse_trajectory(Path(path).read_text())
    if traj is None:
        raise SequenceError(f"{path} holds no poses")
    return traj


def read_trajectory_or_empty(path) -> Trajectory | None:
    """Like ``read_trajectory`` but a missing or empty file gives None."""
    path = Path(path)
    if not path.exists():
        return None
    return parse_trajectory(path.read_text())


def format_trajectory(traj: Trajectory) -> str:
    lines = [TRAJECTORY_HEADER]
    for ts, q, t in zip(traj.timestamps, traj.quaternions, traj.translations):
        vals = [ts, t[0], t[1], t[2], q[1], q[2], q[3], q[0]]
        lines.append(" ".join(repr(float(v)) for v in vals))
    return "\n".join(lines) + "\n"


def write_trajectory(path, traj: Trajectory) -> None:
    Path(path).write_text(format_trajectory(traj))


# --------------------------------------------------------------------------
# images
# --------------------------------------------------------------------------


def read_rgb(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def write_rgb(path, img: np.ndarray) -> None:
    Image.fromarray(as_rgb(img)).save(path, format="PNG")


def decode_depth(raw: np.ndarray, scale: float = DEFAULT_DEPTH_SCALE) -> np.ndarray:
    """Stored units -> meters; stored 0 stays VOID."""
    return raw.astype(np.float64) / scale


def encode_depth(depth: np.ndarray, scale: float = DEFAULT_DEPTH_SCALE) -> np.ndarray:
    """Meters -> 16-bit units. Out-of-range values saturate with a warning;
    valid depths never round down to the VOID code."""
    d = as_depth(depth)
    raw = np.rint(d * scale)
    over = raw > 65535
    if over.any():
        log.warning("%d depth values exceed the 16-bit range and were saturated", int(over.sum()))
        raw = np.minimum(raw, 65535)
    raw = np.where((d != VOID) & (raw < 1), 1, raw)
    return raw.astype(np.uint16)


def read_depth(path, scale: float = DEFAULT_DEPTH_SCALE) -> np.ndarray:
    with Image.open(path) as im:
        raw = np.asarray(im)
    if raw.ndim != 2:
        raise SequenceError(f"{path}: depth images must be single-channel")
    return decode_depth(raw.astype(np.uint16), scale)


def write_depth(path, depth: np.ndarray, scale: float = DEFAULT_DEPTH_SCALE) -> None:
    Image.fromarray(encode_depth(depth, scale)).save(path, format="PNG")


# --------------------------------------------------------------------------
# whole sequences
# --------------------------------------------------------------------------


def load_sequence(layout: SequenceLayout):
    """Return (rgb frames, depth frames, trajectory), index-aligned."""
    n = layout.frame_count()
    rgb, depth = [], []
    for i in range(n):
        try:
            rgb.append(read_rgb(layout.rgb_path(i)))
            depth.append(read_depth(layout.depth_path(i), layout.depth_scale))
        except OSError as exc:
            raise OSError(f"frame {i}: {exc}") from exc
        if rgb[-1].shape[:2] != depth[-1].shape:
            raise SequenceError(f"frame {i}: rgb {rgb[-1].shape[:2]} and depth {depth[-1].shape} differ")
    return rgb, depth, read_trajectory(layout.trajectory_path)


def save_sequence(rgb, depth, trajectory: Trajectory, layout: SequenceLayout) -> None:
    if not (len(rgb) == len(depth) == len(trajectory)):
        raise SequenceError("rgb, depth and trajectory lengths differ")
    (layout.root / layout.rgb_dir).mkdir(parents=True, exist_ok=True)
    (layout.root / layout.depth_dir).mkdir(parents=True, exist_ok=True)
    for i, (im, d) in enumerate(zip(rgb, depth)):
        write_rgb(layout.rgb_path(i), im)
        write_depth(layout.depth_path(i), d, layout.depth_scale)
    write_trajectory(layout.trajectory_path, trajectory)
