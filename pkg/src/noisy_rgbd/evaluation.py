"""Trajectory metrics (ATE, RPE, success rate) and mesh reconstruction metrics."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core import Trajectory, rotation_angle

DEFAULT_MAX_DT = 0.02
FAILURE_VALUE = 1.0
COMPLETION_THRESHOLD = 0.05


class AssociationError(ValueError):
    pass


class AlignmentError(ValueError):
    pass


class AlignmentKind(str, enum.Enum):
    NONE = "none"
    SE3 = "se3"
    SIM3 = "sim3"


@dataclass(frozen=True)
class Alignment:
    kind: AlignmentKind
    rotation: np.ndarray
    translation: np.ndarray
    scale: float = 1.0

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.scale * points @ self.rotation.T + self.translation

    @classmethod
    def identity(cls) -> "Alignment":
        return cls(AlignmentKind.NONE, np.eye(3), np.zeros(3), 1.0)


@dataclass(frozen=True)
class PosePairs:
    """Matched ground-truth / estimate poses (same length, same order)."""

    gt: Trajectory
    est: Trajectory
    gt_index: np.ndarray
    est_index: np.ndarray

    def __len__(self) -> int:
        return len(self.gt_index)


@dataclass
class EvalReport:
    ate_rmse: float
    rpe_trans_rmse: float
    rpe_rot_rmse: float
    success_rate: float
    matched_frames: int
    alignment: str = AlignmentKind.SE3.value
    rpe_delta: int = 1
    failed: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    def format(self) -> str:
        lines = [
            f"ATE RMSE        : {self.ate_rmse:.6f} m  (alignment: {self.alignment})",
            f"RPE trans RMSE  : {self.rpe_trans_rmse:.6f} m  (delta: {self.rpe_delta} frames)",
            f"RPE rot RMSE    : {self.rpe_rot_rmse:.6f} deg",
            f"Success rate    : {self.success_rate:.4f}",
            f"Matched frames  : {self.matched_frames}",
        ]
        if self.failed:
            lines.append("Tracking failure: metrics capped")
        return "\n".join(lines)


def _match(gt_ts: np.ndarray, est_ts: np.ndarray, max_dt: float):
    """Greedy one-to-one nearest-timestamp matching, closest pairs first."""
    if len(gt_ts) == 0 or len(est_ts) == 0:
        return np.zeros(0, int), np.zeros(0, int)
    pos = np.searchsorted(gt_ts, est_ts)
    cands = []
    for j, p in enumerate(pos):
        for i in (p - 1, p):
            if 0 <= i < len(gt_ts):
                dt = abs(gt_ts[i] - est_ts[j])
                if dt <= max_dt:
                    cands.append((dt, i, j))
    cands.sort()
    used_gt, used_est, pairs = set(), set(), []
    for _, i, j in cands:
        if i not in used_gt and j not in used_est:
            used_gt.add(i)
            used_est.add(j)
            pairs.append((j, i))
    pairs.sort()
    est_idx = np.array([j for j, _ in pairs], dtype=int)
    gt_idx = np.array([i for _, i in pairs], dtype=int)
    return gt_idx, est_idx


def associate(gt: Trajectory, est: Trajectory, max_dt: float = DEFAULT_MAX_DT) -> PosePairs:
    """Match each estimate to the nearest ground-truth timestamp within ``max_dt``.

    Raises:
        AssociationError: if nothing matches.
    """
    gt_idx, est_idx = _match(gt.timestamps, est.timestamps, max_dt)
    if len(gt_idx) == 0:
        raise AssociationError(f"no estimate pose lies within {max_dt} s of a ground-truth pose")
    return PosePairs(gt[gt_idx], est[est_idx], gt_idx, est_idx)


def umeyama(src: np.ndarray, dst: np.ndarray, with_scale: bool):
    """Least-squares (s, R, t) minimising sum ||dst - (s R src + t)||^2."""
    n = len(src)
    mu_s, mu_d = src.mean(0), dst.mean(0)
    xs, xd = src - mu_s, dst - mu_d
    cov = xd.T @ xs / n
    u, d, vt = np.linalg.svd(cov)
    s_fix = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s_fix[2, 2] = -1
    r = u @ s_fix @ vt
    scale = 1.0
    if with_scale:
        var_s = (xs**2).sum() / n
        scale = float(np.trace(np.diag(d) @ s_fix) / var_s)
    t = mu_d - scale * r @ mu_s
    return scale, r, t


def align(pairs: PosePairs, kind=AlignmentKind.SE3) -> Alignment:
    """Transform taking estimated positions onto ground truth.

    Raises:
        AlignmentError: fewer than 3 pairs or collinear positions for SE3/Sim3.
    """
    kind = AlignmentKind(kind)
    if kind is AlignmentKind.NONE:
        return Alignment.identity()
    src, dst = pairs.est.translations, pairs.gt.translations
    if len(src) < 3:
        raise AlignmentError(f"{kind.value} alignment needs at least 3 pairs, got {len(src)}")
    for pts in (src, dst):
        sv = np.linalg.svd(pts - pts.mean(0), compute_uv=False)
        if sv[1] <= 1e-9 * max(sv[0], 1e-300):
            raise AlignmentError("positions are degenerate (collinear or coincident)")
    scale, r, t = umeyama(src, dst, with_scale=kind is AlignmentKind.SIM3)
    if not scale > 0:
        raise AlignmentError("similarity alignment produced a non-positive scale")
    return Alignment(kind, r, t, scale)


def ate(pairs: PosePairs, alignment: Alignment | None = None) -> float:
    """RMSE of translational residuals after ``alignment`` (identity if None)."""
    alignment = alignment or Alignment.identity()
    res = pairs.gt.translations - alignment.apply(pairs.est.translations)
    return float(np.sqrt(np.mean(np.sum(res**2, axis=1))))


def _inv(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    r = t[..., :3, :3]
    out[..., :3, :3] = np.swapaxes(r, -1, -2)
    out[..., :3, 3] = -np.einsum("...ji,...j->...i", r, t[..., :3, 3])
    out[..., 3, 3] = 1.0
    return out


def rpe(pairs: PosePairs, delta: int = 1):
    """(translation RMSE in m, rotation RMSE in deg) of relative motions over
    ``delta`` matched frames."""
    if delta < 1:
        raise ValueError("delta must be >= 1")
    if len(pairs) < delta + 1:
        raise AssociationError(f"RPE with delta={delta} needs at least {delta + 1} matched poses")
    g = pairs.gt.matrices()
    e = pairs.est.matrices()
    rel_g = _inv(g[:-delta]) @ g[delta:]
    rel_e = _inv(e[:-delta]) @ e[delta:]
    err = _inv(rel_g) @ rel_e
    trans = np.linalg.norm(err[:, :3, 3], axis=1)
    rot = np.rad2deg(rotation_angle(err[:, :3, :3]))
    return float(np.sqrt(np.mean(trans**2))), float(np.sqrt(np.mean(rot**2)))


def success_rate(gt: Trajectory, est: Trajectory | None, max_dt: float = DEFAULT_MAX_DT) -> float:
    """Fraction of ground-truth frames that have an associated estimate."""
    if est is None or len(est) == 0:
        return 0.0
    gt_idx, _ = _match(gt.timestamps, est.timestamps, max_dt)
    return len(gt_idx) / len(gt)


def evaluate(
    gt: Trajectory,
    est: Trajectory | None,
    alignment=AlignmentKind.SE3,
    delta: int = 1,
    max_dt: float = DEFAULT_MAX_DT,
    cap_failures: bool = False,
) -> EvalReport:
    """ATE, RPE and success rate for one sequence.

    With ``cap_failures`` a missing estimate (or one that cannot be associated
    or aligned) is scored ATE = RPE = 1.0 and SR = 0 instead of raising.
    """
    alignment = AlignmentKind(alignment)
    sr = success_rate(gt, est, max_dt)
    try:
        if est is None or len(est) == 0:
            raise AssociationError("estimate holds no poses")
        pairs = associate(gt, est, max_dt)
        a = align(pairs, alignment)
        t_rmse, r_rmse = rpe(pairs, delta)
        return EvalReport(ate(pairs, a), t_rmse, r_rmse, sr, len(pairs), alignment.value, delta)
    except (AssociationError, AlignmentError):
        if not cap_failures:
            raise
        return EvalReport(
            FAILURE_VALUE, FAILURE_VALUE, FAILURE_VALUE, 0.0, 0, alignment.value, delta, failed=True
        )


# --------------------------------------------------------------------------
# mesh metrics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MeshMetrics:
    accuracy: float  # m
    completion: float  # m
    completion_ratio: float  # percent

    def to_dict(self) -> dict:
        return asdict(self)


def _as_points(p) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(-1, 3)
    if len(p) == 0:
        raise ValueError("point cloud is empty")
    return p


def mesh_metrics(
    reconstructed, ground_truth, threshold: float = COMPLETION_THRESHOLD, squared: bool = False
) -> MeshMetrics:
    """Accuracy, completion and completion ratio between two point sets.

    ``squared`` uses squared nearest-neighbour distances in all three
    metrics (the threshold is then compared against squared distance).
    """
    p = _as_points(reconstructed)
    q = _as_points(ground_truth)
    d_pq, _ = cKDTree(q).query(p)
    d_qp, _ = cKDTree(p).query(q)
    if squared:
        d_pq, d_qp = d_pq**2, d_qp**2
    return MeshMetrics(
        float(d_pq.mean()),
        float(d_qp.mean()),
        float(100.0 * np.mean(d_qp <= threshold)),
    )


def read_points(path) -> np.ndarray:
    """ASCII XYZ, one point per line; extra columns and '#' comments ignored."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([float(v) for v in line.replace(",", " ").split()[:3]])
    return np.array(rows, dtype=float).reshape(-1, 3)
