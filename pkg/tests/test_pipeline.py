import json
import shutil

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisy_rgbd.core import ConfigError, Kind, PerturbationSpec, RngKey
from noisy_rgbd.dataset import SequenceLayout, read_depth, read_rgb, read_trajectory
from noisy_rgbd.motion import DeviationSpec, perturb_trajectory
from noisy_rgbd.pipeline import (
    MANIFEST_NAME,
    THREADS_ENV,
    config_from_dict,
    load_config,
    op_ids,
    output_frame_count,
    run,
    sha256_file,
    threads_from_env,
    validate,
)
from noisy_rgbd.rgb import apply_rgb

MIXED = [
    {"kind": "rgb_snow", "level": 3},
    {"kind": "rgb_motion_blur", "level": 3},
    {"kind": "rgb_gaussian_noise", "level": 3},
    {"kind": "rgb_jpeg", "level": 3},
    {"kind": "depth_gaussian_noise", "level": 3},
    {"kind": "desync", "interval": 10},
]


def cfg(entries, src=None, out=None, **kw):
    doc = {"perturbations": entries, **kw}
    if src is not None:
        doc["input"] = str(src)
    if out is not None:
        doc["output"] = str(out)
    return config_from_dict(doc)


def tree_digests(root):
    return {p.relative_to(root).as_posix(): sha256_file(p) for p in sorted(root.rglob("*")) if p.is_file()}


# ---- validation ------------------------------------------------------------


def test_empty_is_valid():
    assert cfg([]).perturbations == ()


def test_order_violation():
    with pytest.raises(ConfigError):
        cfg([{"kind": "desync", "interval": 2}, {"kind": "rgb_gaussian_noise", "level": 1}])
    with pytest.raises(ConfigError):
        cfg([{"kind": "depth_range_clip", "level": 1}, {"kind": "rgb_fog", "level": 1}])
    with pytest.raises(ConfigError):
        cfg([{"kind": "faster_motion", "ratio": 2}, {"kind": "motion_deviation", "rotation_std_deg": 1.0}])


def test_mixture_valid():
    c = cfg(MIXED)
    assert [e.stage for e in c.active] == ["rgb"] * 4 + ["depth", "desync"]


@pytest.mark.parametrize(
    "entries",
    [
        [{"kind": "rgb_sparkle", "level": 1}],
        [{"kind": "rgb_fog"}],
        [{"kind": "rgb_fog", "level": 9}],
        [{"kind": "desync", "interval": 1}, {"kind": "desync", "interval": 2}],
        [{"kind": "faster_motion", "ratio": 0}],
        [{"kind": "faster_motion", "ratio": 2, "speed": 3}],
        [{"kind": "rgb_fog", "level": 1, "enabled": "yes"}],
        [{"level": 1}],
    ],
)
def test_invalid_entries(entries):
    with pytest.raises(ConfigError):
        cfg(entries)


def test_unknown_top_level_key():
    with pytest.raises(ConfigError):
        config_from_dict({"perturbations": [], "seeed": 3})


def test_desync_must_fit_after_downsampling():
    c = cfg([{"kind": "faster_motion", "ratio": 4}, {"kind": "desync", "interval": 4}])
    with pytest.raises(ConfigError):
        validate(c, frame_count=16)
    validate(c, frame_count=17)


def test_frame_count_example():
    c = cfg([{"kind": "faster_motion", "ratio": 2}, {"kind": "desync", "interval": 5}])
    assert output_frame_count(validate(c, 2000), 2000) == 995


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 5000), st.sampled_from([1, 2, 3, 4, 8]), st.integers(0, 30))
def test_frame_count_bookkeeping(n, r, delta):
    c = cfg([{"kind": "faster_motion", "ratio": r}, {"kind": "desync", "interval": delta}])
    if delta >= -(-n // r):
        with pytest.raises(ConfigError):
            validate(c, n)
    else:
        assert output_frame_count(validate(c, n), n) == -(-n // r) - delta


def test_shorthand_params_and_yaml_round_trip(tmp_path):
    c = cfg(
        [
            {"kind": "motion_deviation", "rotation_std_deg": 1.0, "translation_std_m": 0.0125},
            {"kind": "rgb_fog", "level": 2, "mode": "dynamic", "params": {"thickness": 1.0}},
            {"kind": "desync", "interval": 3, "enabled": False},
        ],
        seed=9,
    )
    assert c.perturbations[0].spec.params == {"rotation_std_deg": 1.0, "translation_std_m": 0.0125}
    path = tmp_path / "r.yaml"
    path.write_text(c.to_yaml())
    again = load_config(path)
    assert again.to_dict() == c.to_dict() and again.seed == 9


def test_op_ids_ignore_position():
    full = cfg(MIXED)
    reduced = cfg(MIXED[1:])
    ids_full = {full.perturbations[i].kind: v for i, v in op_ids(full).items()}
    ids_red = {reduced.perturbations[i].kind: v for i, v in op_ids(reduced).items()}
    for kind, v in ids_red.items():
        assert ids_full[kind] == v


def test_threads_env(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert threads_from_env() == 3
    monkeypatch.setenv(THREADS_ENV, "many")
    with pytest.raises(ConfigError):
        threads_from_env()


# ---- running ---------------------------------------------------------------


def test_identity_pipeline_is_byte_identical(fixture_seq, tmp_path):
    manifest = run(cfg([], fixture_seq, tmp_path / "out"))
    src = tree_digests(fixture_seq)
    assert manifest["digests"] == src
    out = tree_digests(tmp_path / "out")
    out.pop(MANIFEST_NAME)
    assert out == src


def test_same_seed_same_digests_any_workers(fixture_seq, tmp_path):
    entries = MIXED[:3] + [{"kind": "depth_random_missing", "level": 3, "mode": "dynamic"}]
    a = run(cfg(entries, fixture_seq, tmp_path / "a", seed=42), workers=1)
    b = run(cfg(entries, fixture_seq, tmp_path / "b", seed=42), workers=8)
    a["config"].pop("output"), b["config"].pop("output")
    assert a == b
    da, db = tree_digests(tmp_path / "a"), tree_digests(tmp_path / "b")
    da.pop(MANIFEST_NAME), db.pop(MANIFEST_NAME)
    assert da == db
    c = run(cfg(entries, fixture_seq, tmp_path / "c", seed=43), workers=4)
    assert c["digests"] != a["digests"]


def test_rgb_specs_compose_in_order(fixture_seq, tmp_path):
    entries = [{"kind": "rgb_contrast", "level": 4}, {"kind": "rgb_brightness", "level": 2}]
    c = cfg(entries, fixture_seq, tmp_path / "o", sequence_id="s", seed=1)
    run(c)
    ids = op_ids(c)
    img = read_rgb(SequenceLayout(fixture_seq).rgb_path(3))
    for i, e in enumerate(c.perturbations):
        img = apply_rgb(img, e.spec, RngKey(1, "s", 3, ids[i]))
    assert np.array_equal(read_rgb(SequenceLayout(tmp_path / "o").rgb_path(3)), img)
    swapped = cfg(entries[::-1], fixture_seq, tmp_path / "p", sequence_id="s", seed=1)
    run(swapped)
    assert tree_digests(tmp_path / "o") != tree_digests(tmp_path / "p")


def test_desync_pairs_by_digest(fixture_seq, tmp_path):
    run(cfg([{"kind": "desync", "interval": 5}], fixture_seq, tmp_path / "o"))
    src, dst = SequenceLayout(fixture_seq), SequenceLayout(tmp_path / "o")
    assert dst.frame_count() == 11
    for t in range(11):
        assert sha256_file(dst.rgb_path(t)) == sha256_file(src.rgb_path(t))
        assert sha256_file(dst.depth_path(t)) == sha256_file(src.depth_path(t + 5))
    gt = read_trajectory(src.trajectory_path)
    assert read_trajectory(dst.trajectory_path).equals(gt[:11])


def test_faster_motion_keeps_every_rth(fixture_seq, tmp_path):
    m = run(cfg([{"kind": "faster_motion", "ratio": 4}], fixture_seq, tmp_path / "o"))
    assert m["frames"]["rgb_source"] == [0, 4, 8, 12]
    dst = SequenceLayout(tmp_path / "o")
    assert sha256_file(dst.rgb_path(2)) == sha256_file(SequenceLayout(fixture_seq).rgb_path(8))
    traj = read_trajectory(dst.trajectory_path)
    assert np.array_equal(traj.timestamps, read_trajectory(SequenceLayout(fixture_seq).trajectory_path).timestamps[::4])


def test_motion_deviation_writes_perturbed_ground_truth(fixture_seq, tmp_path):
    c = cfg([{"kind": "motion_deviation", "rotation_std_deg": 3.0, "translation_std_m": 0.025}],
            fixture_seq, tmp_path / "o", seed=5, sequence_id="q")
    run(c)
    clean = read_trajectory(SequenceLayout(fixture_seq).trajectory_path)
    expected = perturb_trajectory(clean, DeviationSpec(3.0, 0.025), RngKey(5, "q", 0, op_ids(c)[0]))
    assert read_trajectory(SequenceLayout(tmp_path / "o").trajectory_path).equals(expected)
    # images untouched
    assert sha256_file(SequenceLayout(tmp_path / "o").rgb_path(0)) == sha256_file(SequenceLayout(fixture_seq).rgb_path(0))


def test_stage_isolation(fixture_seq, tmp_path):
    full = [dict(e) for e in MIXED]
    for k in range(len(MIXED)):
        off = [dict(e) for e in full]
        off[k]["enabled"] = False
        run(cfg(off, fixture_seq, tmp_path / f"off{k}", seed=7))
        run(cfg(full[:k] + full[k + 1 :], fixture_seq, tmp_path / f"never{k}", seed=7))
        a = tree_digests(tmp_path / f"off{k}")
        b = tree_digests(tmp_path / f"never{k}")
        a.pop(MANIFEST_NAME), b.pop(MANIFEST_NAME)
        assert a == b


def test_manifest_contents(fixture_seq, tmp_path):
    entries = [{"kind": "rgb_fog", "level": 3, "mode": "dynamic"}, {"kind": "depth_range_clip", "level": 3}]
    m = run(cfg(entries, fixture_seq, tmp_path / "o"))
    on_disk = json.loads((tmp_path / "o" / MANIFEST_NAME).read_text())
    assert on_disk == m
    assert m["toolkit_version"] and m["config"]["perturbations"][0]["kind"] == "rgb_fog"
    assert m["stages"][1]["table_params"] == {"min_depth": 0.4, "max_depth": 4.0}
    levels = m["frames"]["effective_levels"]["rgb_fog#0"]
    assert len(levels) == 16 and set(levels) <= {2, 3, 4}
    assert "depth_range_clip#0" not in m["frames"]["effective_levels"]
    assert set(m["digests"]) == set(tree_digests(tmp_path / "o")) - {MANIFEST_NAME}


def test_failure_cleans_up_and_names_frame(fixture_seq, tmp_path):
    src = tmp_path / "broken"
    shutil.copytree(fixture_seq, src)
    SequenceLayout(src).rgb_path(6).write_bytes(b"not a png")
    out = tmp_path / "out"
    with pytest.raises(OSError, match="frame 6"):
        run(cfg([{"kind": "rgb_gaussian_noise", "level": 1}], src, out))
    assert not out.exists()
    assert [p.name for p in tmp_path.iterdir()] == ["broken"]


def test_refuses_non_empty_output(fixture_seq, tmp_path):
    out = tmp_path / "out"
    out.mkdir()
    (out / "keep.txt").write_text("x")
    with pytest.raises(FileExistsError):
        run(cfg([], fixture_seq, out))
    run(cfg([], fixture_seq, out), overwrite=True)
    assert not (out / "keep.txt").exists()


def test_run_needs_paths():
    with pytest.raises(ConfigError):
        run(cfg([]))


def test_depth_stage_applies(fixture_seq, tmp_path):
    run(cfg([{"kind": "depth_range_clip", "level": 3}], fixture_seq, tmp_path / "o"))
    d = read_depth(SequenceLayout(tmp_path / "o").depth_path(0))
    valid = d[d > 0]
    assert valid.min() >= 0.4 - 1e-4 and valid.max() <= 4.0 + 1e-4
    assert np.any(read_depth(SequenceLayout(fixture_seq).depth_path(0)) > 4.0)
