import csv
import json
import math

import pytest

from growthfront.cli import chart_distance, hausdorff, main, observed_orders
from growthfront.config import ARTIFACTS, DEFAULT_TIMES, load_config, validate_config
from growthfront.io import read_config_hash, sha256_file
from growthfront.metric import SurfaceMetric

MINIMAL = """\
version: 1
metric:
  kind: euclidean
scenario:
  lambda: 2
  ell: 1
"""

SMALL = MINIMAL + """\
grid:
  r_max: 3
  n_r: 60
  n_theta: 120
"""


def _write(tmp_path, text, name="run.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


# -- validation ---------------------------------------------------------------------------


def test_minimal_config_gets_defaults():
    cfg, errors = validate_config(MINIMAL)
    assert errors == []
    assert cfg.mode == "solve"
    assert cfg.grid.r_max is None
    assert (cfg.grid.n_r, cfg.grid.n_theta, cfg.grid.stencil_order) == (400, 720, 2)
    assert cfg.outputs.artifacts == ARTIFACTS
    assert cfg.outputs.times == DEFAULT_TIMES
    assert cfg.refine.levels == 3
    assert cfg.sweep.lambdas == (2.0,) and cfg.sweep.ells == (1.0,)


def test_lambda_must_exceed_one():
    cfg, errors = validate_config(MINIMAL.replace("lambda: 2", "lambda: 1"))
    assert cfg is None
    assert errors == ["line 5: lambda must exceed 1"]


def test_missing_metric_block():
    text = "version: 1\nscenario:\n  lambda: 2\n  ell: 1\n"
    cfg, errors = validate_config(text)
    assert cfg is None
    assert any("metric" in e for e in errors)


def test_all_errors_collected_with_lines():
    text = """\
version: 1
metric:
  kind: bogus
scenario:
  lambda: 0.5
  ell: -1
grid:
  n_r: 4
  stencil_order: 7
extra: 1
"""
    _, errors = validate_config(text)
    assert len(errors) == 6
    lines = sorted(int(e.split(":")[0].split()[1]) for e in errors)
    assert lines == [3, 5, 6, 8, 9, 10]


@pytest.mark.parametrize("text", ["", "[1, 2", "- a\n- b\n", "metric: 3\nscenario: {}\n", ":\n::"])
def test_malformed_input_never_raises(text):
    cfg, errors = validate_config(text)
    assert cfg is None and errors


def test_kind_specific_fields(tmp_path):
    _, errors = validate_config(MINIMAL.replace("kind: euclidean", "kind: scaled_hyperbolic"))
    assert any("kappa" in e for e in errors)
    _, errors = validate_config(MINIMAL.replace("kind: euclidean", "kind: tabulated"), base_dir=tmp_path)
    assert any("table" in e for e in errors)
    (tmp_path / "g.csv").write_text("r,G\n0.1,0.1\n1,1\n2,2\n")
    cfg, errors = validate_config(MINIMAL.replace("kind: euclidean", "kind: tabulated\n  table: g.csv\n  tail: divergent"), base_dir=tmp_path)
    assert errors == []
    assert cfg.build_metric().G(1.5) == pytest.approx(1.5, rel=1e-6)


def test_overrides_apply_and_report():
    cfg, errors = validate_config(MINIMAL, overrides=["grid.n_r=200", "scenario.ell=2.5"])
    assert errors == []
    assert cfg.grid.n_r == 200 and cfg.ell == 2.5
    _, errors = validate_config(MINIMAL, overrides=["scenario.lambda=1"])
    assert errors == ["--set scenario.lambda: lambda must exceed 1"]
    _, errors = validate_config(MINIMAL, overrides=["grid.n_r"])
    assert errors and "key=value" in errors[0]


def test_hash_ignores_mode_and_outputs():
    a, _ = validate_config(MINIMAL)
    b, _ = validate_config(MINIMAL + "mode: compare\noutputs:\n  directory: elsewhere\n")
    c, _ = validate_config(MINIMAL, overrides=["grid.n_r=401"])
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != c.config_hash()


def test_hash_tracks_table_contents(tmp_path):
    text = MINIMAL.replace("kind: euclidean", "kind: tabulated\n  table: g.csv\n  tail: divergent")
    (tmp_path / "g.csv").write_text("r,G\n0.1,0.1\n1,1\n2,2\n")
    h1 = validate_config(text, base_dir=tmp_path)[0].config_hash()
    (tmp_path / "g.csv").write_text("r,G\n0.1,0.1\n1,1\n2,2.5\n")
    h2 = validate_config(text, base_dir=tmp_path)[0].config_hash()
    assert h1 != h2


# -- runs --------------------------------------------------------------------------------------


def test_solve_outputs_and_determinism(tmp_path):
    cfg = _write(tmp_path, SMALL)
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()
    summary = json.loads((a / "summary.json").read_text())
    assert summary["classification"] == "bounded"
    assert summary["converged"] is True
    chash = load_config(cfg).config_hash()
    assert summary["config_hash"] == chash
    manifest = json.loads((a / "manifest.json").read_text())
    assert manifest["config_hash"] == chash
    names = set(manifest["artifacts"])
    assert {"summary.json", "profile.csv", "mask.csv", "predicted_boundary.csv", "escape_path.csv"} <= names
    assert {f"slice_t{t:g}.csv" for t in DEFAULT_TIMES} <= names
    for name, digest in manifest["artifacts"].items():
        assert sha256_file(a / name) == digest
        assert read_config_hash(a / name) == chash
    with open(a / "predicted_boundary.csv") as fh:
        fh.readline()
        assert fh.readline().strip() == "r,theta,x,y"


def test_profile_has_inf_literal(tmp_path):
    text = """\
version: 1
metric: {kind: hyperbolic_sinh}
scenario: {lambda: 2, ell: 5}
grid: {r_max: 12, n_r: 60, n_theta: 90}
outputs: {artifacts: [summary, profile]}
"""
    cfg = _write(tmp_path, text)
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = list(csv.reader((tmp_path / "o" / "profile.csv").read_text().splitlines()[2:]))
    assert any(f == "inf" for _, f in rows)
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["classification"] == "escaping"
    assert not (tmp_path / "o" / "mask.csv").exists()


def test_exit_codes(tmp_path):
    bad = _write(tmp_path, MINIMAL.replace("lambda: 2", "lambda: 1"), "bad.yaml")
    assert main(["solve", "--config", str(bad)]) == 2
    assert main(["solve", "--config", str(tmp_path / "missing.yaml")]) == 2
    cfg = _write(tmp_path, SMALL)
    out = str(tmp_path / "o")
    assert main(["solve", "--config", str(cfg), "--out", out, "--set", "grid.node_cap=100"]) == 4
    assert main(["solve", "--config", str(cfg), "--out", out, "--set", "grid.max_iter=1"]) == 3


def test_compare_refuses_stale_mask(tmp_path):
    cfg = _write(tmp_path, SMALL)
    out = str(tmp_path / "o")
    assert main(["solve", "--config", str(cfg), "--out", out]) == 0
    assert main(["compare", "--config", str(cfg), "--out", out]) == 0
    report = json.loads((tmp_path / "o" / "comparison.json").read_text())
    assert report["config_hash"] == load_config(cfg).config_hash()
    assert report["hausdorff"] >= report["regions"]["visible_arc"] >= 0
    assert report["hausdorff"] == max(report["regions"].values())
    assert main(["compare", "--config", str(cfg), "--out", out, "--set", "grid.n_r=64"]) == 2


def test_compare_reuses_matching_mask(tmp_path):
    cfg = _write(tmp_path, SMALL)
    fresh, reused = tmp_path / "fresh", tmp_path / "reused"
    assert main(["compare", "--config", str(cfg), "--out", str(fresh)]) == 0
    assert main(["solve", "--config", str(cfg), "--out", str(reused)]) == 0
    assert main(["compare", "--config", str(cfg), "--out", str(reused)]) == 0
    a = json.loads((fresh / "comparison.json").read_text())
    b = json.loads((reused / "comparison.json").read_text())
    assert a == b


def test_compare_euclidean_defaults_within_three_cells(tmp_path):
    cfg = _write(tmp_path, MINIMAL)
    assert main(["compare", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "comparison.json").read_text())
    print("hausdorff cells:", report["hausdorff_cells"], report["regions"])
    assert report["hausdorff_cells"] <= 3.0


def test_sweep_is_order_independent(tmp_path):
    text = """\
version: 1
metric: {kind: hyperbolic_sinh}
scenario: {lambda: 2, ell: 1}
grid: {n_r: 40, n_theta: 64}
sweep: {lambdas: [3, 2], ells: [4, 0.5], workers: 1, max_doublings: 1}
"""
    cfg = _write(tmp_path, text)
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "serial")]) == 0
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "pool"), "--set", "sweep.workers=3"]) == 0
    shuffled = _write(tmp_path, text.replace("[3, 2]", "[2, 3]").replace("[4, 0.5]", "[0.5, 4]"), "shuffled.yaml")
    assert main(["sweep", "--config", str(shuffled), "--out", str(tmp_path / "shuffled")]) == 0
    serial = (tmp_path / "serial" / "sweep.csv").read_text()
    assert serial == (tmp_path / "pool" / "sweep.csv").read_text()
    # only the hash line differs: list order is part of the config text
    assert serial.splitlines()[1:] == (tmp_path / "shuffled" / "sweep.csv").read_text().splitlines()[1:]
    rows = list(csv.DictReader(serial.splitlines()[1:]))
    assert [(r["lambda"], r["ell"]) for r in rows] == [("2", "0.5"), ("2", "4"), ("3", "0.5"), ("3", "4")]


def test_refine_table(tmp_path):
    cfg = _write(tmp_path, SMALL + "refine: {levels: 2}\n")
    assert main(["refine", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    data = json.loads((tmp_path / "o" / "refine.json").read_text())
    assert [lv["n_r"] for lv in data["levels"]] == [60, 120]
    assert len(data["observed_orders"]) == 1


def test_observed_orders():
    assert observed_orders([0.4, 0.2, 0.1], [0.8, 0.4, 0.1]) == pytest.approx([1.0, 2.0])
    assert math.isnan(observed_orders([0.2, 0.1], [0.0, 0.0])[0])


def test_hausdorff_in_chart_metric():
    m = SurfaceMetric.euclidean()
    a = [[1.0, 0.0]]
    b = [[1.0, 0.1], [2.0, 0.0]]
    assert chart_distance(m, a, b)[0].tolist() == pytest.approx([0.1, 1.0])
    assert hausdorff(m, a, b) == pytest.approx(1.0)
    # theta wraps around
    assert chart_distance(m, [[1.0, 3.1]], [[1.0, -3.1]])[0, 0] == pytest.approx(2 * math.pi - 6.2)
