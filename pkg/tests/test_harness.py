import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matsg.harness.analysis import analyze_buffer_regret, analyze_params, normalized_entropy
from matsg.harness.cli import main
from matsg.harness.config import ConfigError, parse_config
from matsg.harness.holdout import holdout_set, read_holdout, write_holdout
from matsg.harness.metrics import bin_metrics, fmt, read_metrics
from matsg.scenario import TRAIN_SEED_LIMIT

from conftest import SCENARIOS

UED = SCENARIOS / "ued.scen"
ACTIONS = SCENARIOS / "actions.scen"


def _config(tmp_path, experiment="ued", extra="", scenario=UED, ppo="batch = 32\nminibatch = 32\nepochs = 1\n"):
    text = (f"[experiment]\nexperiment = {experiment}\nseeds = 1\noutput = {tmp_path / 'out'}\n{extra}"
            f"[scenario]\nfile = {scenario}\naction_space = macro\n"
            f"[curriculum]\npopulation = 2\n[ppo]\n{ppo}")
    path = tmp_path / "exp.ini"
    path.write_text(text)
    return path


# ---------------------------------------------------------------- config


@pytest.mark.parametrize("text,match", [
    ("[scenario]\nfile = x.scen\n", "experiment is required"),
    ("[experiment]\nexperiment = ued\n", "file is required"),
    ("[experiment]\nexperiment = nope\n[scenario]\nfile = x\n", "experiment must be"),
    ("[experiment]\nexperiment = ued\ncolour = red\n[scenario]\nfile = x\n", "unknown key"),
    ("[experiment]\nexperiment = ued\n[scenario]\nfile = x\n[extra]\n", "unknown sections"),
    ("[experiment]\nexperiment = ued\nupdates = 0\n[scenario]\nfile = x\n", "updates must be positive"),
    ("[experiment]\nexperiment = ued\nseeds = a\n[scenario]\nfile = x\n", "seeds"),
    ("[experiment]\nexperiment = ued\n[scenario]\nfile = x\naction_space = teleport\n", "unknown action spaces"),
    ("[experiment]\nexperiment = ued\n[scenario]\nfile = x\n[curriculum]\nmethod = ACCEL\n", "method"),
    ("[experiment]\nexperiment = ued\n[scenario]\nfile = x\n[ppo]\nclip = 2\n", "clip"),
    ("[experiment]\nexperiment = ued\n[scenario]\nfile = x\n[ppo]\nlr = fast\n", "lr"),
])
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_config_values(tmp_path):
    cfg = parse_config(
        "[experiment]\nexperiment = actions\nseeds = 4, 5\nupdates = 3\noutput = out\n"
        "[scenario]\nfile = a.scen\n[ppo]\nbatch = 64\nlr = 0.001\n", tmp_path)
    assert cfg.seeds == [4, 5] and cfg.updates == 3
    assert cfg.scenario_file == (tmp_path / "a.scen").resolve()
    assert cfg.output == tmp_path / "out"
    assert cfg.ppo.batch == 64 and cfg.ppo.lr == 0.001 and cfg.ppo.clip == 0.2
    assert cfg.action_spaces == ["continuous", "waypoint", "macro"]


def test_shipped_configs_parse():
    for path in sorted((Path(__file__).resolve().parent.parent / "configs").glob("*.ini")):
        from matsg.harness.config import load_config

        cfg = load_config(path)
        assert cfg.scenario_file.exists(), path


# ---------------------------------------------------------------- metrics


def test_fmt():
    assert fmt(None) == "NA" and fmt(True) == "1" and fmt(3) == "3"
    assert fmt(0.1) == "0.1" and fmt(float("nan")) == "nan"


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), max_size=40), st.integers(1, 7))
def test_binning_matches_oracle(values, k):
    rows = [{"run": "r", "seed": 1, "step": i, "metric": "m", "value": v} for i, v in enumerate(values)]
    out = bin_metrics(rows, k)
    assert len(out) == math.ceil(len(values) / k)
    for b, row in enumerate(out):
        chunk = values[b * k:(b + 1) * k]
        assert row[2] == b and row[3] == b * k and row[4] == b * k + len(chunk) - 1 and row[8] == len(chunk)
        assert row[6] == pytest.approx(sum(chunk) / len(chunk), abs=1e-9)
        var = sum((x - row[6]) ** 2 for x in chunk) / len(chunk)
        assert row[7] == pytest.approx(math.sqrt(var), abs=1e-6)


def test_binning_keeps_series_apart():
    rows = [{"run": r, "seed": 1, "step": i, "metric": m, "value": float(i)}
            for i in range(3) for r in ("a", "b") for m in ("x", "y")]
    assert {(b[0], b[5]) for b in bin_metrics(rows, 5)} == {("a", "x"), ("a", "y"), ("b", "x"), ("b", "y")}
    with pytest.raises(ValueError):
        bin_metrics(rows, 0)


# ---------------------------------------------------------------- analysis


def test_entropy_examples():
    assert normalized_entropy(np.ones((3, 4))) == pytest.approx(1.0)
    assert normalized_entropy(np.array([[1.0, 0.0], [0.0, 0.0]])) == 0.0
    assert math.isnan(normalized_entropy(np.zeros((2, 2))))
    assert normalized_entropy(np.array([[1.0, 1.0, 0.0, 0.0]])) == pytest.approx(0.5)


def test_analyze_params_example():
    snaps = [("c1", [{"route": "left", "npc_count": 2, "keeps_safety_distance": False,
                      "respects_traffic_lights": True, "npc_target_speed": 6.0},
                     {"route": "straight", "npc_count": 4, "keeps_safety_distance": True,
                      "respects_traffic_lights": True, "npc_target_speed": 10.0}])]
    (row,) = analyze_params(snaps)
    assert row["frac_left"] == 0.5 and row["frac_right"] == 0.0 and row["mean_npc_count"] == 3.0
    assert row["frac_no_safety_distance"] == 0.5 and row["frac_ignores_lights"] == 0.0
    assert row["mean_npc_target_speed"] == 8.0


def test_analyze_params_empty_gives_null_markers():
    (row,) = analyze_params([("c", [])])
    assert row["n"] == 0 and row["frac_left"] is None and row["mean_npc_count"] is None


def test_analyze_buffer_regret(ued_spec):
    hold = holdout_set(ued_spec)
    entries = [(p, 1.0) for p in hold]
    (m,) = analyze_buffer_regret([("k", entries)])
    assert m.count.sum() == 12 and np.allclose(m.mean, 1.0) and m.entropy == pytest.approx(1.0)
    (empty,) = analyze_buffer_regret([[]])
    assert np.isnan(empty.mean).all() and math.isnan(empty.entropy)


# ---------------------------------------------------------------- hold-out


def test_holdout_set(ued_spec, tmp_path):
    hold = holdout_set(ued_spec)
    assert len(hold) == 12 and len({p.key() for p in hold}) == 12
    assert {(p["route"], p["npc_count"]) for p in hold} == {
        (r, n) for r in ("straight", "left", "right") for n in (0, 2, 4, 6)}
    assert all(p.seed >= TRAIN_SEED_LIMIT for p in hold)
    assert all(p["keeps_safety_distance"] and p["respects_traffic_lights"] for p in hold)
    write_holdout(tmp_path / "h.txt", hold)
    assert read_holdout(tmp_path / "h.txt", ued_spec) == hold


# ---------------------------------------------------------------- experiments


def test_zero_budget_writes_only_initial_evaluation(tmp_path):
    assert main(["run", "--config", str(_config(tmp_path, extra="env_steps = 0\nmethods = DR,DCD\n"))]) == 0
    rows = read_metrics(tmp_path / "out" / "metrics.csv")
    assert {(r["run"], r["step"], r["metric"]) for r in rows} == {
        (m, 0, k) for m in ("DR", "DCD") for k in ("holdout_return", "holdout_completion")}
    assert (tmp_path / "out" / "holdout.txt").read_text().count("\n") == 12


@pytest.fixture(scope="module")
def tiny_ued(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("ued")
    extra = "env_steps = 200\neval_every = 4\neval_episodes = 1\ncheckpoints = 2\n"
    assert main(["run", "--config", str(_config(tmp, extra=extra))]) == 0
    return tmp / "out"


def test_ued_outputs(tiny_ued):
    rows = read_metrics(tiny_ued / "metrics.csv")
    metrics = {run: {r["metric"] for r in rows if r["run"] == run} for run in ("DR", "PLR", "DCD")}
    assert "buffer_regret" not in metrics["DR"]
    assert "buffer_regret" in metrics["PLR"] and "buffer_regret" in metrics["DCD"]
    for run in ("DR", "PLR", "DCD"):
        d = tiny_ued / f"{run}_seed1"
        for f in ("iterations.csv", "generator.txt", "params_ckpt1.txt", "params_ckpt2.txt",
                  "params_summary.csv", "checkpoint_agent0.mgpp"):
            assert (d / f).exists(), (run, f)
        assert (d / "buffer_ckpt2.csv").exists() == (run != "DR")
    assert (tiny_ued / "binned.csv").exists() and (tiny_ued / "learning_curves.png").exists()


def test_ued_rerun_is_byte_identical(tiny_ued, tmp_path):
    extra = "env_steps = 200\neval_every = 4\neval_episodes = 1\ncheckpoints = 2\n"
    assert main(["run", "--config", str(_config(tmp_path, extra=extra))]) == 0
    for name in ("metrics.csv", "binned.csv", "DCD_seed1/iterations.csv", "DCD_seed1/generator.txt",
                 "PLR_seed1/buffer_ckpt2.csv"):
        assert (tmp_path / "out" / name).read_bytes() == (tiny_ued / name).read_bytes(), name


def test_analyze_and_eval_commands(tiny_ued, capsys, ued_spec):
    assert main(["analyze", "params", "--in", str(tiny_ued)]) == 0
    assert main(["analyze", "regret", "--in", str(tiny_ued)]) == 0
    out = capsys.readouterr().out
    assert "== DCD_seed1" in out and "H=" in out
    assert (tiny_ued / "PLR_seed1" / "buffer_regret.csv").exists()
    ckpt = tiny_ued / "DCD_seed1" / "checkpoint_agent0.mgpp"
    assert main(["eval", "--checkpoint", str(ckpt), "--holdout", str(tiny_ued / "holdout.txt")]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "scenario,episodic_return,route_completion,collisions"
    assert len(lines) == 14 and lines[-1].startswith("mean,")


def test_actions_one_update(tmp_path):
    extra = "updates = 1\naction_spaces = continuous,waypoint,macro\n"
    text = _config(tmp_path, "actions", extra, ACTIONS).read_text().replace("action_space = macro\n", "")
    (tmp_path / "exp.ini").write_text(text)
    assert main(["run", "--config", str(tmp_path / "exp.ini")]) == 0
    rows = read_metrics(tmp_path / "out" / "metrics.csv")
    for space in ("continuous", "waypoint", "macro"):
        got = sorted(r["metric"] for r in rows if r["run"] == space)
        assert got == ["collisions", "mean_return", "route_completion"]
        for a in range(4):
            assert (tmp_path / "out" / f"checkpoint_{space}_seed1_agent{a}.mgpp").exists()


def test_cli_errors(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.ini")]) == 2
    bad = tmp_path / "bad.scen"
    bad.write_text("scenario x\nparam a in 3..1\n")
    cfg = _config(tmp_path, scenario=bad)
    assert main(["run", "--config", str(cfg)]) == 2
    assert "bad.scen:2:12: error: inverted range 3..1" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["run", "--config", str(cfg), "--seeds", "x"])
    assert main(["analyze", "params", "--in", str(tmp_path)]) == 1
