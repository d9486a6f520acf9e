import json
import shutil
from pathlib import Path

import pytest
import yaml

from railgnss.cli import EXIT_INPUT, EXIT_OK, EXIT_USAGE, main
from railgnss.config import PipelineConfig
from railgnss.errors import ConfigError

FAST = {
    "train": {"train_size": 0.6, "importance_repeats": 2,
              "mlr": {"lambda_grid": [0.001, 0.1], "max_iter": 200},
              "gbt": {"n_rounds": 15}},
    "error_models": {"min_samples": 20},
}
INPUTS = ("obs.csv", "nav.rnx", "ground_truth.csv", "labels.csv", "schedule.csv")
CHAIN = ("extract", "featurize", "train", "evaluate", "fit-errors", "simulate")
OUTPUTS = ("residuals.csv", "features.csv", "model.json", "confusion.csv", "importance.csv",
           "confusion_mlr.csv", "confusion_gbt.csv", "importance_mlr.csv",
           "importance_gbt.csv", "error_models.json", "residual_histograms.csv",
           "injected_errors.csv") + tuple(f"{c.replace('-', '_')}_report.json" for c in CHAIN)


def _workdir(src, dst, config=None, files=INPUTS):
    dst.mkdir(parents=True, exist_ok=True)
    for name in files:
        shutil.copy(Path(src) / name, dst / name)
    cfg = dst / "config.yaml"
    cfg.write_text(yaml.safe_dump(config if config is not None else FAST))
    return cfg


def _run(cmd, cfg, out, seed=None):
    argv = [cmd, "--config", str(cfg), "--out", str(out)]
    if seed is not None:
        argv += ["--seed", str(seed)]
    return main(argv)


@pytest.fixture(scope="module")
def chain_runs(small_scenario, tmp_path_factory):
    runs = []
    for k in range(2):
        out = tmp_path_factory.mktemp(f"chain{k}")
        cfg = _workdir(small_scenario["dir"], out)
        codes = [_run(c, cfg, out, seed=5) for c in CHAIN]
        runs.append((out, codes))
    return runs


def test_full_chain_succeeds(chain_runs):
    out, codes = chain_runs[0]
    assert codes == [EXIT_OK] * len(CHAIN)
    for name in OUTPUTS:
        assert (out / name).exists(), name
    report = json.loads((out / "evaluate_report.json").read_text())
    assert report["config"]["seed"] == 5
    assert len(report["config_hash"]) == 16
    assert report["accuracy"]["gbt"] > 0.8
    train = json.loads((out / "train_report.json").read_text())
    assert train["mlr_loss_monotone"] and train["gbt_loss_monotone"]


def test_chain_is_byte_identical_across_runs(chain_runs):
    (a, _), (b, _) = chain_runs
    for name in OUTPUTS:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_synth_subcommand_deterministic(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"synth": {"epochs": 30}}))
    for d in ("a", "b"):
        assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / d),
                     "--seed", "3"]) == EXIT_OK
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "obs.csv" in names and "true_models.json" in names
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_changes_simulated_stream(chain_runs, tmp_path):
    src, _ = chain_runs[0]
    cfg = _workdir(src, tmp_path, files=("error_models.json", "schedule.csv"))
    assert _run("simulate", cfg, tmp_path, seed=6) == EXIT_OK
    assert (tmp_path / "injected_errors.csv").read_bytes() != (
        src / "injected_errors.csv").read_bytes()


@pytest.mark.parametrize("argv", [[], ["bogus"], ["extract", "--seed", "-1"],
                                  ["extract", "--seed", "x"], ["train", "--nope"]])
def test_usage_errors_exit_one(argv, capsys):
    assert main(argv) == EXIT_USAGE
    assert "error" in capsys.readouterr().err


@pytest.mark.parametrize("bad", [
    {"unknown": 1},
    {"residuals": {"clock_grouping": "satellite"}},
    {"train": {"gbt": {"n_rounds": 0, "max_depth": 0}}},
    {"signals": {"R": ["C1C"]}},
    {"error_models": {"h_fraction": 0.3}},
    {"simulate": {"no_signal_classes": ["Forest"]}},
    {"features": {"window": 2}},
])
def test_bad_config_exits_one(bad, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump(bad))
    assert main(["featurize", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_USAGE


def test_unparseable_config_exits_one(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("seed: [1,\n")
    assert main(["extract", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["extract", "--config", str(tmp_path / "none.yaml")]) == EXIT_USAGE


def test_missing_nav_exits_two(small_scenario, tmp_path, capsys):
    cfg = _workdir(small_scenario["dir"], tmp_path, files=("obs.csv", "ground_truth.csv"))
    assert _run("extract", cfg, tmp_path) == EXIT_INPUT
    assert "nav.rnx" in capsys.readouterr().err


def test_no_time_overlap_exits_two(small_scenario, tmp_path, capsys):
    cfg = _workdir(small_scenario["dir"], tmp_path)
    lines = (tmp_path / "ground_truth.csv").read_text().splitlines()
    shifted = [lines[0]] + [l.replace("2300,", "2301,", 1) for l in lines[1:]]
    (tmp_path / "ground_truth.csv").write_text("\n".join(shifted) + "\n")
    assert _run("extract", cfg, tmp_path) == EXIT_INPUT
    assert "no overlap" in capsys.readouterr().err


def test_single_class_training_exits_two(small_scenario, tmp_path, capsys):
    cfg = _workdir(small_scenario["dir"], tmp_path)
    lines = (tmp_path / "labels.csv").read_text().splitlines()
    header, rows = lines[0], lines[1:]
    rows = [",".join(r.split(",")[:-1] + ["Trees"]) for r in rows]
    (tmp_path / "labels.csv").write_text("\n".join([header] + rows) + "\n")
    assert _run("featurize", cfg, tmp_path) == EXIT_OK
    assert _run("train", cfg, tmp_path) == EXIT_INPUT
    assert "single class" in capsys.readouterr().err


def test_full_h_fraction_gives_classical_variance(chain_runs, tmp_path):
    src, _ = chain_runs[0]
    config = {"error_models": {"h_fraction": 1.0, "min_samples": 20}}
    cfg = _workdir(src, tmp_path, config, files=("residuals.csv",))
    assert _run("fit-errors", cfg, tmp_path) == EXIT_OK
    doc = json.loads((tmp_path / "error_models.json").read_text())
    assert doc["models"]
    for m in list(doc["models"].values()) + [doc["fallback"]]:
        assert m["var_m2"] == pytest.approx(m["classical_var_m2"], rel=1e-12)


def test_tunnel_entries_marked_no_signal(chain_runs, tmp_path):
    src, _ = chain_runs[0]
    cfg = _workdir(src, tmp_path, files=("error_models.json",))
    (tmp_path / "schedule.csv").write_text(
        "week,sow,sat,band,class\n"
        "2300,216000.0,G01,C1C,Trees\n"
        "2300,216001.0,G01,C1C,Tunnel\n"
        "2300,216001.0,E02,C5Q,Tunnel\n"
        "2300,216002.0,G01,C1C,unlabeled\n")
    assert _run("simulate", cfg, tmp_path) == EXIT_OK
    rows = (tmp_path / "injected_errors.csv").read_text().splitlines()[1:]
    assert [r.split(",")[-1] == "NOSIGNAL" for r in rows] == [False, True, True, False]
    report = json.loads((tmp_path / "simulate_report.json").read_text())
    assert report["no_signal"] == 2 and report["samples"] == 2


def test_config_paths_relative_to_config_file(tmp_path):
    (tmp_path / "cfg").mkdir()
    cfg = tmp_path / "cfg" / "c.yaml"
    cfg.write_text(yaml.safe_dump({"paths": {"nav": "../data/n.rnx"}, "seed": 4}))
    pc = PipelineConfig.load(cfg, seed=9)
    assert pc["seed"] == 9
    assert pc.input_path("nav", "out", "nav.rnx") == tmp_path / "cfg" / "../data/n.rnx"
    assert pc.input_path("obs", "out", "obs.csv") == Path("out") / "obs.csv"


def test_config_hash_tracks_content():
    a, b = PipelineConfig(), PipelineConfig({"seed": 0})
    assert a.hash == b.hash
    assert PipelineConfig({"seed": 1}).hash != a.hash
    with pytest.raises(ConfigError):
        PipelineConfig({"train": 3})
