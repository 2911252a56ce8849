import csv
import json
from pathlib import Path

import numpy as np
import pytest

from uqkit.cli import main

from conftest import write_fixture_csv

FAST_GBDT = {"n_trees": 60, "learning_rate": 0.1, "max_leaves": 15, "min_samples_leaf": 10}


def write_config(path, **extra):
    doc = {"gbdt": FAST_GBDT, "gp_restarts": 1, "gp_max_iter": 40, "figures": True}
    doc.update(extra)
    path.write_text(json.dumps(doc))
    return str(path)


def run_cli(*argv):
    return main(list(argv))


def base_args(fixture_csv, out_dir, method, cfg_path, seed="0"):
    return [
        "run",
        "--data", str(fixture_csv),
        "--target", "y",
        "--id-col", "mat_id",
        "--method", method,
        "--seed", seed,
        "--out", str(out_dir),
        "--config", cfg_path,
    ]


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_quantile_outputs(fixture_csv, tmp_path, capsys):
    out = tmp_path / "q"
    cfg = write_config(tmp_path / "cfg.json")
    code = run_cli(*base_args(fixture_csv, out, "quantile", cfg))
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["method"] == "quantile"
    assert report["n_test"] == 60
    assert 55.0 <= report["inbounds_pct"] <= 80.0
    assert report["base_mae"] < 0.5

    rows = read_rows(out / "intervals.csv")
    assert rows[0] == ["id", "observed", "center", "half_width", "inbounds_flag"]
    assert len(rows) - 1 == report["n_test"]
    flags = [int(r[4]) for r in rows[1:]]
    assert 100.0 * sum(flags) / len(flags) == pytest.approx(report["inbounds_pct"])

    assert (out / "report.csv").exists()
    assert (out / "residual_hist.csv").exists()
    assert (out / "parity.png").exists()
    assert (out / "residual_hist.png").exists()
    for role in ("lower", "mid", "upper"):
        assert (out / f"model_{role}.json").exists()

    printed = json.loads(capsys.readouterr().out)
    assert printed["config_hash"] == report["config_hash"]


def test_run_no_figures(fixture_csv, tmp_path):
    out = tmp_path / "nofig"
    cfg = write_config(tmp_path / "cfg.json")
    code = run_cli(*base_args(fixture_csv, out, "threesplit-l1", cfg), "--no-figures")
    assert code == 0
    assert not (out / "parity.png").exists()
    report = json.loads((out / "report.json").read_text())
    assert report["method"] == "threesplit-l1"


def test_run_gp_method(fixture_csv, tmp_path):
    # small subsample keeps the GP fit quick
    small = write_fixture_csv(tmp_path / "small.csv", n=120)
    out = tmp_path / "gp"
    cfg = write_config(tmp_path / "cfg.json")
    code = run_cli(*base_args(small, out, "gp", cfg))
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert np.isfinite(report["log_likelihood"])
    assert (out / "model_gp_kernel.json").exists()


def test_run_too_many_features_exit_code(tmp_path, capsys):
    rng = np.random.default_rng(0)
    wide = tmp_path / "wide.csv"
    d = 65
    with open(wide, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mat_id"] + [f"x{j}" for j in range(d)] + ["y"])
        for i in range(30):
            row = rng.standard_normal(d + 1)
            writer.writerow([f"m{i}"] + [repr(float(v)) for v in row])
    cfg = write_config(tmp_path / "cfg.json")
    code = run_cli(*base_args(wide, tmp_path / "out", "gp", cfg))
    assert code == 2
    err = capsys.readouterr().err
    assert "error" in err


def test_run_byte_identical_reruns(fixture_csv, tmp_path):
    cfg = write_config(tmp_path / "cfg.json")
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert run_cli(*base_args(fixture_csv, out_a, "quantile", cfg)) == 0
    assert run_cli(*base_args(fixture_csv, out_b, "quantile", cfg)) == 0
    for name in sorted(p.name for p in out_a.iterdir()):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


def test_compare_reports(fixture_csv, tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json")
    out_q, out_t = tmp_path / "q", tmp_path / "t"
    run_cli(*base_args(fixture_csv, out_q, "quantile", cfg))
    run_cli(*base_args(fixture_csv, out_t, "threesplit-l2", cfg))
    capsys.readouterr()

    cmp_out = tmp_path / "cmp"
    code = run_cli(
        "compare", str(out_q / "report.json"), str(out_t / "report.json"), "--out", str(cmp_out)
    )
    assert code == 0
    rows = json.loads(capsys.readouterr().out)
    assert [r["method"] for r in rows] == ["quantile", "threesplit-l2"]
    table = read_rows(cmp_out / "comparison.csv")
    assert table[0][0] == "method"
    assert len(table) == 3


def test_compare_rejects_mismatched_partitions(fixture_csv, tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json")
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    run_cli(*base_args(fixture_csv, out_a, "quantile", cfg, seed="0"))
    run_cli(*base_args(fixture_csv, out_b, "quantile", cfg, seed="1"))
    capsys.readouterr()
    code = run_cli("compare", str(out_a / "report.json"), str(out_b / "report.json"))
    assert code == 1
    assert "seed" in capsys.readouterr().err


def test_search_contracts(fixture_csv, tmp_path, capsys):
    out = tmp_path / "search"
    code = run_cli(
        "search",
        "--data", str(fixture_csv),
        "--target", "y",
        "--id-col", "mat_id",
        "--out", str(out),
        "--budget", "3",
    )
    assert code == 0
    best = json.loads(capsys.readouterr().out)
    trace = read_rows(out / "trace.csv")
    assert len(trace) - 1 == 3
    maes = [float(r[-1]) for r in trace[1:]]
    assert best["val_mae"] == pytest.approx(min(maes))
    saved = json.loads((out / "best_config.json").read_text())
    assert saved["config"]["objective"]["kind"] == "mse"


def test_search_quantile_role(fixture_csv, tmp_path, capsys):
    out = tmp_path / "search_lo"
    code = run_cli(
        "search",
        "--data", str(fixture_csv),
        "--target", "y",
        "--id-col", "mat_id",
        "--out", str(out),
        "--budget", "1",
        "--role", "lower",
    )
    assert code == 0
    best = json.loads(capsys.readouterr().out)
    assert best["config"]["objective"]["kind"] == "quantile"
    assert best["config"]["objective"]["alpha"] == pytest.approx(0.14)


def test_select_descriptors_command(fixture_csv, tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json")
    out = tmp_path / "q"
    run_cli(*base_args(fixture_csv, out, "quantile", cfg))
    capsys.readouterr()
    sel_path = tmp_path / "selected.json"
    code = run_cli(
        "select-descriptors",
        "--models",
        str(out / "model_lower.json"),
        str(out / "model_mid.json"),
        str(out / "model_upper.json"),
        "--top-k", "2",
        "--out", str(sel_path),
    )
    assert code == 0
    selected = json.loads(capsys.readouterr().out)
    assert len(selected) == 2
    assert set(selected) <= {"x0", "x1", "x2"}
    assert json.loads(sel_path.read_text())["selected"] == selected


def test_histogram_command(tmp_path, capsys):
    data = tmp_path / "resid.csv"
    rng = np.random.default_rng(3)
    with open(data, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pred", "obs"])
        for _ in range(200):
            writer.writerow([repr(float(rng.normal())), repr(float(rng.normal()))])
    out = tmp_path / "hist"
    code = run_cli(
        "histogram",
        "--input", str(data),
        "--pred-col", "pred",
        "--ref-col", "obs",
        "--bins", "10",
        "--range", "-3", "3",
        "--out", str(out),
    )
    assert code == 0
    rows = read_rows(out / "histogram.csv")
    assert len(rows) - 1 == 10
    assert sum(int(r[2]) for r in rows[1:]) == 200
    assert (out / "histogram.png").exists()


def test_config_file_overrides_flags(fixture_csv, tmp_path):
    cfg = write_config(tmp_path / "cfg.json", seed=7)
    out = tmp_path / "o"
    run_cli(*base_args(fixture_csv, out, "quantile", cfg, seed="0"))
    report = json.loads((out / "report.json").read_text())
    assert report["seed"] == 7
