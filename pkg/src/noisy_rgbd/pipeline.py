"""Sequence-level perturbation pipeline.

A recipe is a YAML document::

    sequence_id: room0          # keys the random streams (default "sequence")
    seed: 0
    frame_rate: 20
    depth_scale: 6553.5
    input: clean/room0          # optional in a recipe, can be given on the CLI
    output: noisy/room0
    perturbations:              # applied in this order, which must follow
      - kind: motion_deviation  #   motion -> faster_motion -> rgb -> depth -> desync
        rotation_std_deg: 1.0
        translation_std_m: 0.0125
      - kind: faster_motion
        ratio: 2
      - kind: rgb_snow
        level: 3
        mode: static
      - kind: depth_gaussian_noise
        level: 3
      - kind: desync
        interval: 5
        mode: dynamic
        enabled: false          # any entry can be switched off

RGB (and depth) entries compose left to right on each frame. Keys other than
``kind``, ``level``, ``mode``, ``params`` and ``enabled`` are collected into
``params``, where they override table values (imaging kinds) or carry the
settings of ``motion_deviation``, ``faster_motion`` and ``desync``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import shutil
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import __version__
from .core import ConfigError, Kind, Mode, PerturbationSpec, RngKey, effective_level
from .dataset import (
    SequenceLayout,
    format_trajectory,
    read_depth,
    read_rgb,
    read_trajectory,
    write_depth,
    write_rgb,
)
from .depth import apply_depth
from .desync import DesyncSpec, partner_indices
from .motion import DeviationSpec, perturb_trajectory
from .rgb import apply_rgb

log = logging.getLogger(__name__)

FASTER_MOTION = "faster_motion"
STAGES = ("motion_deviation", FASTER_MOTION, "rgb", "depth", "desync")
THREADS_ENV = "NOISY_RGBD_THREADS"
MANIFEST_NAME = "manifest.json"
_ENTRY_KEYS = {"kind", "level", "mode", "params", "enabled"}


def stage_of(kind: str) -> str:
    if kind == FASTER_MOTION:
        return FASTER_MOTION
    k = Kind.parse(kind)
    if k.is_rgb:
        return "rgb"
    if k.is_depth:
        return "depth"
    return k.value


@dataclass(frozen=True)
class StageEntry:
    kind: str
    spec: PerturbationSpec | None = None  # None for faster_motion
    ratio: int | None = None
    enabled: bool = True

    @property
    def stage(self) -> str:
        return stage_of(self.kind)

    def to_dict(self) -> dict:
        if self.kind == FASTER_MOTION:
            out = {"kind": FASTER_MOTION, "ratio": self.ratio}
        else:
            out = self.spec.to_dict()
        if not self.enabled:
            out["enabled"] = False
        return out


@dataclass(frozen=True)
class PipelineConfig:
    perturbations: tuple = ()
    seed: int = 0
    sequence_id: str = "sequence"
    frame_rate: float = 20.0
    depth_scale: float = 6553.5
    input: str | None = None
    output: str | None = None

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    @property
    def active(self) -> list:
        return [e for e in self.perturbations if e.enabled]

    def to_dict(self) -> dict:
        out = {
            "sequence_id": self.sequence_id,
            "seed": self.seed,
            "frame_rate": self.frame_rate,
            "depth_scale": self.depth_scale,
        }
        if self.input is not None:
            out["input"] = str(self.input)
        if self.output is not None:
            out["output"] = str(self.output)
        out["perturbations"] = [e.to_dict() for e in self.perturbations]
        return out

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def parse_entry(raw: dict) -> StageEntry:
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ConfigError(f"perturbation entries need a 'kind': {raw!r}")
    raw = dict(raw)
    kind = raw["kind"]
    enabled = raw.get("enabled", True)
    if not isinstance(enabled, bool):
        raise ConfigError("'enabled' must be true or false")
    params = dict(raw.get("params") or {})
    params.update({k: v for k, v in raw.items() if k not in _ENTRY_KEYS})
    if kind == FASTER_MOTION:
        extra = set(params) - {"ratio"}
        if extra:
            raise ConfigError(f"unknown parameters for faster_motion: {sorted(extra)}")
        ratio = params.get("ratio")
        if isinstance(ratio, bool) or not isinstance(ratio, int) or ratio < 1:
            raise ConfigError(f"faster_motion ratio must be an integer >= 1, got {ratio!r}")
        return StageEntry(FASTER_MOTION, ratio=ratio, enabled=enabled)
    spec = PerturbationSpec(Kind.parse(kind), raw.get("level"), raw.get("mode", "static"), params)
    return StageEntry(spec.kind.value, spec=spec, enabled=enabled)


def config_from_dict(doc: dict) -> PipelineConfig:
    if not isinstance(doc, dict):
        raise ConfigError("a recipe must be a mapping")
    known = {"perturbations", "seed", "sequence_id", "frame_rate", "depth_scale", "input", "output"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown recipe keys: {sorted(unknown)}")
    entries = doc.get("perturbations") or []
    if not isinstance(entries, list):
        raise ConfigError("'perturbations' must be a list")
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    config = PipelineConfig(
        perturbations=tuple(parse_entry(e) for e in entries),
        seed=seed,
        sequence_id=str(doc.get("sequence_id", "sequence")),
        frame_rate=float(doc.get("frame_rate", 20.0)),
        depth_scale=float(doc.get("depth_scale", 6553.5)),
        input=doc.get("input"),
        output=doc.get("output"),
    )
    return validate(config)


def load_config(path) -> PipelineConfig:
    with open(path) as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(doc or {})


def validate(config: PipelineConfig, frame_count: int | None = None) -> PipelineConfig:
    """Check stage order and uniqueness, and that the desync interval fits.

    ``frame_count`` (clean sequence length) enables the interval check; it
    is read from ``config.input`` when that sequence exists.
    """
    rank = -1
    seen = set()
    for e in config.perturbations:
        r = STAGES.index(e.stage)
        if r < rank:
            raise ConfigError(
                f"{e.kind} cannot follow a {STAGES[rank]} stage; "
                f"order must be {' -> '.join(STAGES)}"
            )
        rank = r
        if e.stage in ("motion_deviation", FASTER_MOTION, "desync"):
            if e.stage in seen:
                raise ConfigError(f"at most one {e.stage} stage is allowed")
            seen.add(e.stage)
    if config.frame_rate <= 0 or config.depth_scale <= 0:
        raise ConfigError("frame_rate and depth_scale must be positive")
    if frame_count is None and config.input is not None and Path(config.input).is_dir():
        frame_count = SequenceLayout(config.input, depth_scale=config.depth_scale).frame_count()
    if frame_count is not None:
        n = _output_source_count(config, frame_count)
        desync = _desync_spec(config)
        if desync is not None and desync.interval >= n:
            raise ConfigError(
                f"desync interval {desync.interval} needs more than the {n} frames left after downsampling"
            )
    return config


def _ratio(config) -> int:
    for e in config.active:
        if e.kind == FASTER_MOTION:
            return e.ratio
    return 1


def _output_source_count(config, frame_count: int) -> int:
    r = _ratio(config)
    return -(-frame_count // r)


def output_frame_count(config: PipelineConfig, frame_count: int) -> int:
    """Frames written for a clean sequence of ``frame_count``: ceil(N / r) - interval."""
    desync = _desync_spec(config)
    return _output_source_count(config, frame_count) - (desync.interval if desync else 0)


def _desync_spec(config) -> DesyncSpec | None:
    for e in config.active:
        if e.kind == Kind.DESYNC.value:
            p = e.spec.params
            return DesyncSpec(int(p.get("interval", 0)), e.spec.mode, p.get("delayed", "depth"))
    return None


def _deviation_spec(config) -> DeviationSpec | None:
    for e in config.active:
        if e.kind == Kind.MOTION_DEVIATION.value:
            p = e.spec.params
            return DeviationSpec(
                float(p.get("rotation_std_deg", 0.0)), float(p.get("translation_std_m", 0.0)), e.spec.mode
            )
    return None


def op_ids(config) -> dict:
    """Random-stream id for each enabled entry.

    Ids depend on the kind and on how many enabled entries of the same kind
    precede it, never on list position, so switching a stage off leaves the
    draws of every other stage unchanged.
    """
    kinds = list(Kind)
    counts: dict = {}
    ids = {}
    for i, e in enumerate(config.perturbations):
        if not e.enabled or e.kind == FASTER_MOTION:
            continue
        occ = counts.get(e.kind, 0)
        counts[e.kind] = occ + 1
        ids[i] = (STAGES.index(e.stage) << 16) | (kinds.index(Kind(e.kind)) << 8) | occ
    return ids


def threads_from_env(default: int | None = None) -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        return max(1, n)
    return default or min(8, os.cpu_count() or 1)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _digests(root: Path) -> dict:
    return {
        p.relative_to(root).as_posix(): sha256_file(p)
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.name != MANIFEST_NAME
    }


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class _Plan:
    rgb_specs: list = field(default_factory=list)  # (label, spec, op)
    depth_specs: list = field(default_factory=list)


def run(config: PipelineConfig, workers: int | None = None, overwrite: bool = False) -> dict:
    """Perturb ``config.input`` into ``config.output`` and return the manifest.

    Outputs are written to a temporary sibling directory that is renamed
    into place on success and deleted on failure.
    """
    if config.input is None or config.output is None:
        raise ConfigError("the recipe needs an input and an output sequence path")
    src = SequenceLayout(config.input, depth_scale=config.depth_scale)
    n = src.frame_count()
    validate(config, n)
    out_root = Path(config.output)
    if out_root.exists() and any(out_root.iterdir()) and not overwrite:
        raise FileExistsError(f"output {out_root} exists and is not empty")
    workers = workers or threads_from_env()

    ids = op_ids(config)
    base = RngKey(config.seed, config.sequence_id)
    plan = _Plan()
    occ: dict = {}
    for i, e in enumerate(config.perturbations):
        if not e.enabled or e.stage not in ("rgb", "depth"):
            continue
        k = occ.get(e.kind, 0)
        occ[e.kind] = k + 1
        label = f"{e.kind}#{k}"
        (plan.rgb_specs if e.stage == "rgb" else plan.depth_specs).append((label, e.spec, ids[i]))

    # pose stages
    clean = read_trajectory(src.trajectory_path)
    deviation = _deviation_spec(config)
    motion_op = next((ids[i] for i, e in enumerate(config.perturbations)
                      if e.enabled and e.kind == Kind.MOTION_DEVIATION.value), 0)
    traj = clean if deviation is None else perturb_trajectory(clean, deviation, base.with_op(motion_op))
    ratio = _ratio(config)
    sources = list(range(0, n, ratio))
    traj = traj[::ratio]

    desync = _desync_spec(config)
    m = len(sources)
    if desync is None:
        lead = list(range(m))
        partner = list(range(m))
    else:
        desync_op = next(ids[i] for i, e in enumerate(config.perturbations)
                         if e.enabled and e.kind == Kind.DESYNC.value)
        partner = [int(j) for j in partner_indices(m, desync, base.with_op(desync_op))]
        lead = list(range(len(partner)))
    if desync is not None and desync.delayed == "rgb":
        rgb_pos, depth_pos = partner, lead
    else:
        rgb_pos, depth_pos = lead, partner
    traj = traj[: len(lead)]

    out_root.parent.mkdir(parents=True, exist_ok=True)
    tmp_root = Path(tempfile.mkdtemp(prefix=f".{out_root.name}.tmp-", dir=out_root.parent))
    dst = SequenceLayout(tmp_root, depth_scale=config.depth_scale)
    levels: dict = {label: [None] * len(lead) for label, _, _ in plan.rgb_specs + plan.depth_specs}

    def do_rgb(t: int):
        s = sources[rgb_pos[t]]
        try:
            if not plan.rgb_specs:
                shutil.copyfile(src.rgb_path(s), dst.rgb_path(t))
                return
            img = read_rgb(src.rgb_path(s))
            for label, spec, op in plan.rgb_specs:
                key = base.with_frame(s).with_op(op)
                levels[label][t] = effective_level(spec, key)
                img = apply_rgb(img, spec, key)
            write_rgb(dst.rgb_path(t), img)
        except OSError as exc:
            raise OSError(f"rgb frame {s}: {exc}") from exc

    def do_depth(t: int):
        s = sources[depth_pos[t]]
        try:
            if not plan.depth_specs:
                shutil.copyfile(src.depth_path(s), dst.depth_path(t))
                return
            d = read_depth(src.depth_path(s), config.depth_scale)
            for label, spec, op in plan.depth_specs:
                key = base.with_frame(s).with_op(op)
                levels[label][t] = effective_level(spec, key)
                d = apply_depth(d, spec, key)
            write_depth(dst.depth_path(t), d, config.depth_scale)
        except OSError as exc:
            raise OSError(f"depth frame {s}: {exc}") from exc

    try:
        (tmp_root / src.rgb_dir).mkdir()
        (tmp_root / src.depth_dir).mkdir()
        with ThreadPoolExecutor(max_workers=workers) as pool:
            jobs = [pool.submit(do_rgb, t) for t in range(len(lead))]
            jobs += [pool.submit(do_depth, t) for t in range(len(lead))]
            for job in jobs:
                job.result()
        untouched = deviation is None and ratio == 1 and desync is None
        if untouched:
            shutil.copyfile(src.trajectory_path, dst.trajectory_path)
        else:
            dst.trajectory_path.write_text(format_trajectory(traj))

        manifest = {
            "toolkit_version": __version__,
            "config": config.to_dict(),
            "input_frames": n,
            "output_frames": len(lead),
            "stages": _stage_records(config),
            "frames": {
                "rgb_source": [sources[i] for i in rgb_pos],
                "depth_source": [sources[i] for i in depth_pos],
                "pose_source": [sources[i] for i in lead],
                "effective_levels": {
                    label: vals for label, vals in levels.items() if _dynamic(config, label)
                },
            },
            "digests": _digests(tmp_root),
        }
        _atomic_write(tmp_root / MANIFEST_NAME, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        if out_root.exists():
            shutil.rmtree(out_root)
        os.replace(tmp_root, out_root)
    except BaseException:
        shutil.rmtree(tmp_root, ignore_errors=True)
        raise
    log.info("wrote %d frames to %s", len(lead), out_root)
    return manifest


def _dynamic(config, label: str) -> bool:
    kind, k = label.split("#")
    matches = [e for e in config.active if e.kind == kind]
    return matches[int(k)].spec.mode is Mode.DYNAMIC


def _stage_records(config) -> list:
    records = []
    for e in config.active:
        rec = {"stage": e.stage, **e.to_dict()}
        if e.spec is not None and e.spec.kind.is_imaging:
            rec["table_params"] = dict(e.spec.effective_params()._asdict())
        records.append(rec)
    return records
