import json
import subprocess
import sys

import numpy as np
import pytest

from noisy_rgbd.cli import EXIT_DOMAIN, EXIT_IO, EXIT_OK, main
from noisy_rgbd.core import IMAGING_KINDS
from noisy_rgbd.presets import RECIPE_DIR


def test_help_lists_every_kind_and_values(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for kind in IMAGING_KINDS:
        assert kind.value in out
    for token in ("L1: 0.08", "L5: 7", "L3: (0.4, 4)", "(0.1, 0.3, 3, 0.5, 10, 4, 0.8)", "motion_deviation", "desync"):
        assert token in out


def test_perturb_twice_same_digests(fixture_seq, tmp_path, capsys):
    recipe = RECIPE_DIR / "mixed_3.yaml"
    for name in ("a", "b"):
        code = main(["perturb", "--config", str(recipe), "--seed", "42", "--input", str(fixture_seq),
                     "--output", str(tmp_path / name), "--out", str(tmp_path / f"{name}.json")])
        assert code == EXIT_OK
    a = json.loads((tmp_path / "a.json").read_text())
    b = json.loads((tmp_path / "b.json").read_text())
    assert a["digests"] == b["digests"] and a["config"]["seed"] == 42
    assert "wrote 16 frames" in capsys.readouterr().out


def test_eval_self(fixture_seq, tmp_path, capsys):
    gt = str(fixture_seq / "groundtruth.txt")
    assert main(["eval", "--gt", gt, "--est", gt, "--out", str(tmp_path / "r.json")]) == EXIT_OK
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["ate_rmse"] < 1e-9 and rep["success_rate"] == 1.0 and rep["matched_frames"] == 16
    assert "ATE RMSE" in capsys.readouterr().out


def test_eval_exit_codes(fixture_seq, tmp_path):
    gt = str(fixture_seq / "groundtruth.txt")
    missing = str(tmp_path / "none.txt")
    assert main(["eval", "--gt", gt, "--est", missing]) == EXIT_IO
    assert main(["eval", "--gt", gt, "--est", missing, "--cap-failures", "--out", str(tmp_path / "c.json")]) == EXIT_OK
    assert json.loads((tmp_path / "c.json").read_text())["ate_rmse"] == 1.0
    far = tmp_path / "far.txt"
    far.write_text("100.0 0 0 0 0 0 0 1\n101.0 1 0 0 0 0 0 1\n")
    assert main(["eval", "--gt", gt, "--est", str(far)]) == EXIT_DOMAIN
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    assert main(["eval", "--gt", gt, "--est", str(empty)]) == EXIT_DOMAIN


def test_validate(tmp_path, fixture_seq, capsys):
    assert main(["validate", str(RECIPE_DIR / "mixed_6.yaml")]) == EXIT_OK
    assert "ok" in capsys.readouterr().out
    bad = tmp_path / "bad.yaml"
    bad.write_text("perturbations:\n  - {kind: desync, interval: 2}\n  - {kind: rgb_fog, level: 1}\n")
    assert main(["validate", str(bad)]) == EXIT_DOMAIN
    assert main(["validate", str(tmp_path / "nope.yaml")]) == EXIT_IO
    assert main(["validate", str(RECIPE_DIR / "desync_d20_static.yaml"), "--input", str(fixture_seq)]) == EXIT_DOMAIN
    broken = tmp_path / "broken.yaml"
    broken.write_text("perturbations: [\n")
    assert main(["validate", str(broken)]) == EXIT_DOMAIN


def test_mesh_eval(tmp_path, capsys):
    p = np.random.default_rng(0).uniform(size=(30, 3))
    np.savetxt(tmp_path / "p.xyz", p)
    np.savetxt(tmp_path / "q.xyz", p + [0.01, 0, 0])
    code = main(["mesh-eval", str(tmp_path / "p.xyz"), str(tmp_path / "q.xyz"), "--out", str(tmp_path / "m.json")])
    assert code == EXIT_OK
    m = json.loads((tmp_path / "m.json").read_text())
    assert m["completion_ratio"] == 100.0 and m["accuracy"] <= 0.01 + 1e-12


def test_stats(fixture_seq, capsys):
    assert main(["stats", str(fixture_seq / "groundtruth.txt"), "--fps", "20"]) == EXIT_OK
    assert "mean_translation_speed" in capsys.readouterr().out


def test_fixture_tables_presets(tmp_path, capsys):
    assert main(["fixture", str(tmp_path / "fx"), "--frames", "3"]) == EXIT_OK
    assert len(list((tmp_path / "fx" / "rgb").iterdir())) == 3
    assert main(["tables"]) == EXIT_OK
    assert main(["presets"]) == EXIT_OK
    assert "mixed_6.yaml" in capsys.readouterr().out
    assert main(["presets", "--write", str(tmp_path / "rec")]) == EXIT_OK
    assert len(list((tmp_path / "rec").glob("*.yaml"))) == 130


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "noisy_rgbd.cli", "tables"], capture_output=True, text=True)
    assert res.returncode == 0 and "rgb_snow" in res.stdout
