"""RGB-D stream desynchronization by an integer frame offset."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError, Mode, RngKey, derive_rng

DESYNC_INTERVALS = (5, 10, 20)


@dataclass(frozen=True)
class DesyncSpec:
    interval: int = 0
    mode: Mode = Mode.STATIC
    delayed: str = "depth"

    def __post_init__(self):
        if isinstance(self.interval, bool) or int(self.interval) != self.interval or self.interval < 0:
            raise ConfigError(f"desync interval must be an integer >= 0, got {self.interval!r}")
        object.__setattr__(self, "interval", int(self.interval))
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.delayed not in ("depth", "rgb"):
            raise ConfigError("delayed stream must be 'depth' or 'rgb'")


def partner_indices(n: int, spec: DesyncSpec, key: RngKey) -> np.ndarray:
    """Index into the delayed stream for each output position t.

    Static: t + interval. Dynamic: t + interval + u_t with u_t uniform in
    {-1, 0, 1} per frame, clamped into [0, n-1]. Output length is
    ``n - interval`` in both modes.
    """
    if spec.interval >= n:
        raise ConfigError(f"desync interval {spec.interval} needs more than {n} frames")
    t = np.arange(n - spec.interval)
    if spec.mode is Mode.STATIC:
        return t + spec.interval
    jitter = np.array([derive_rng(key.with_frame(i)).integers(-1, 2) for i in t], dtype=int)
    return np.clip(t + spec.interval + jitter, 0, n - 1)


def desynchronize(rgb, depth, spec: DesyncSpec, key: RngKey) -> list:
    """Pair ``rgb[t]`` with ``depth[t + delta_t]`` (or the reverse when the RGB
    stream is the delayed one). Pose labels follow index t of the leading stream."""
    if len(rgb) != len(depth):
        raise ConfigError(f"stream lengths differ: {len(rgb)} rgb vs {len(depth)} depth")
    idx = partner_indices(len(rgb), spec, key)
    if spec.delayed == "depth":
        return [(rgb[t], depth[j]) for t, j in enumerate(idx)]
    return [(rgb[j], depth[t]) for t, j in enumerate(idx)]
