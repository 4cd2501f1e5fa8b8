import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import pytest

from hrnav.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, main
from hrnav.config import ConfigError, RunConfig, apply_overrides, config_from_dict, load_config
from hrnav.hierarchy import LOG_HEADER, Trainer
from hrnav.plotting import LogFormatError, moving_average, read_log, reward_chart
from hrnav.simworld import EnvConfig, bundled_world

SVG = "{http://www.w3.org/2000/svg}"
FAST = ["--max-steps", "60", "--set", "td3.hidden=[16,16]", "--set", "dqn.hidden=[16,16]",
        "--set", "td3.warmup_steps=100", "--set", "td3.gradient_steps=10", "--set", "dqn.gradient_steps=10", "--quiet"]


@pytest.fixture(autouse=True)
def _isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("HRNAV_OUTPUT_DIR", raising=False)


def train(out, *extra, mode="td3", episodes=6, seed=1):
    return main(["train", "--mode", mode, "--world", "empty", "--episodes", str(episodes), "--seed", str(seed),
                 "--output-dir", str(out), *FAST, *extra])


# --- config ----------------------------------------------------------------------------

def test_unknown_key_rejected_by_name(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"td3": {"actor_lrr": 0.1}}))
    assert main(["train", "--config", str(cfg)]) == EXIT_CONFIG
    assert "actor_lrr" in capsys.readouterr().err
    with pytest.raises(ConfigError, match="episods"):
        config_from_dict({"episods": 3})


@pytest.mark.parametrize("data", [{"episodes": "ten"}, {"env": {"max_steps": 1.5}}, {"worlds": []},
                                  {"hierarchy": {"training_mode": "sometimes"}}, {"train": {"record_wall_time": 1}},
                                  {"env": []}])
def test_bad_values_rejected(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_defaults_and_overrides():
    cfg = RunConfig()
    assert cfg.hierarchy.distance_bins == (1.0, 2.0) and cfg.env.max_steps == 500
    cfg = apply_overrides(cfg, ["td3.actor_lr=3e-4", "hierarchy.distance_bins=[0.5,1.5]", "worlds=[\"corridor\"]"])
    assert cfg.td3.actor_lr == 3e-4 and cfg.hierarchy.distance_bins == (0.5, 1.5) and cfg.worlds == ["corridor"]
    with pytest.raises(ConfigError):
        apply_overrides(cfg, ["td3.nope=1"])
    with pytest.raises(ConfigError):
        apply_overrides(cfg, ["nokey"])


def test_snapshot_round_trip(tmp_path):
    cfg = apply_overrides(RunConfig(), ["seed=9", "env.max_steps=77"])
    path = tmp_path / "snap.json"
    path.write_text(cfg.to_json())
    assert load_config(path) == cfg


def test_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["train", "--config", str(p)]) == EXIT_CONFIG


# --- train -----------------------------------------------------------------------------

def test_train_td3_fifty_episode_smoke(tmp_path):
    out = tmp_path / "run"
    assert main(["train", "--mode", "td3", "--world", "empty.world", "--episodes", "50", "--seed", "1",
                 "--output-dir", str(out), "--quiet"]) == EXIT_OK
    cols = read_log((out / "train_log.csv").read_text())
    assert len(cols["episode"]) == 50
    assert (out / "config.json").exists() and (out / "checkpoints" / "final.bin").exists()


def test_train_same_seed_byte_identical(tmp_path):
    assert train(tmp_path / "a", mode="hierarchy") == EXIT_OK
    assert train(tmp_path / "b", mode="hierarchy") == EXIT_OK
    assert (tmp_path / "a/train_log.csv").read_bytes() == (tmp_path / "b/train_log.csv").read_bytes()
    assert (tmp_path / "a/checkpoints/final.bin").read_bytes() == (tmp_path / "b/checkpoints/final.bin").read_bytes()
    assert train(tmp_path / "c", mode="hierarchy", seed=2) == EXIT_OK
    assert (tmp_path / "a/train_log.csv").read_bytes() != (tmp_path / "c/train_log.csv").read_bytes()


def test_rerun_from_snapshot_reproduces(tmp_path):
    assert train(tmp_path / "a") == EXIT_OK
    snap = tmp_path / "a" / "config.json"
    assert main(["train", "--config", str(snap), "--output-dir", str(tmp_path / "b"), "--quiet"]) == EXIT_OK
    assert (tmp_path / "a/train_log.csv").read_bytes() == (tmp_path / "b/train_log.csv").read_bytes()


def test_train_refuses_to_overwrite(tmp_path, capsys):
    assert train(tmp_path / "a", episodes=2) == EXIT_OK
    assert train(tmp_path / "a", episodes=2) == EXIT_IO
    assert "--overwrite" in capsys.readouterr().err
    assert train(tmp_path / "a", "--overwrite", episodes=3) == EXIT_OK
    assert len(read_log((tmp_path / "a/train_log.csv").read_text())["episode"]) == 3


def test_output_dir_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("HRNAV_OUTPUT_DIR", str(tmp_path / "env_out"))
    assert main(["train", "--mode", "td3", "--world", "empty", "--episodes", "2", *FAST]) == EXIT_OK
    assert (tmp_path / "env_out" / "train_log.csv").exists()
    assert sorted(p.name for p in tmp_path.iterdir()) == ["env_out"]


def test_unknown_world_is_config_error():
    assert main(["train", "--world", "atlantis", "--episodes", "1"]) == EXIT_CONFIG


# --- eval, bench, inspect -------------------------------------------------------------

@pytest.fixture
def fresh_checkpoint(tmp_path):
    path = tmp_path / "fresh.bin"
    Trainer([bundled_world("empty")], EnvConfig(max_steps=200), seed=0).save(path)
    return path


def test_eval_fresh_agent(tmp_path, fresh_checkpoint, capsys):
    out = tmp_path / "ev"
    args = ["eval", str(fresh_checkpoint), "--episodes", "4", "--seed", "5", "--output-dir", str(out)]
    assert main(args) == EXIT_OK
    text = capsys.readouterr().out
    fields = dict(line.split(": ", 1) for line in text.splitlines() if not line.startswith("#"))
    rates = {k: float(v) for k, v in fields.items() if k.endswith("_rate")}
    assert len(rates) == 3
    assert sum(rates.values()) == pytest.approx(1.0)
    first = (out / "eval_report.csv").read_bytes()
    assert main(args) == EXIT_OK
    assert (out / "eval_report.csv").read_bytes() == first
    assert main(args + ["--random-high"]) == EXIT_OK


def test_truncated_checkpoint(tmp_path, fresh_checkpoint, capsys):
    data = fresh_checkpoint.read_bytes()
    bad = tmp_path / "bad.bin"
    bad.write_bytes(data[: len(data) // 2])
    assert main(["eval", str(bad), "--episodes", "1"]) == EXIT_IO
    assert "truncated" in capsys.readouterr().err.lower()
    assert main(["eval", str(tmp_path / "missing.bin")]) == EXIT_IO


def test_bench_identical_checkpoints_and_astar(tmp_path, fresh_checkpoint):
    out = tmp_path / "bench"
    args = ["bench", "--checkpoint", f"a={fresh_checkpoint}", "--checkpoint", f"b={fresh_checkpoint}",
            "--scripted", "straight", "--episodes", "3", "--astar-resolution", "0.25", "--output-dir", str(out)]
    assert main(args) == EXIT_OK
    rows = (out / "bench.csv").read_text().splitlines()
    assert len(rows) == 4
    assert rows[1].split(",")[1:] == rows[2].split(",")[1:]
    header = rows[0].split(",")
    straight = dict(zip(header, rows[3].split(",")))
    assert float(straight["mean_path_efficiency"]) > 0 and float(straight["mean_astar_efficiency"]) > 0
    assert main(["bench", "--checkpoint", str(tmp_path / "nope.bin")]) == EXIT_IO
    assert main(["bench"]) == EXIT_CONFIG


def test_bench_ablation_adds_random_high(tmp_path, fresh_checkpoint):
    out = tmp_path / "bench"
    assert main(["bench", "--checkpoint", str(fresh_checkpoint), "--ablation", "--episodes", "2",
                 "--astar-resolution", "0", "--output-dir", str(out)]) == EXIT_OK
    assert "random_high" in (out / "bench.txt").read_text()


def test_inspect_checkpoint(fresh_checkpoint, capsys):
    assert main(["inspect-checkpoint", str(fresh_checkpoint)]) == EXIT_OK
    header = json.loads(capsys.readouterr().out)
    assert "entries" in header


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "hrnav.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "inspect-checkpoint" in r.stdout


# --- plot ------------------------------------------------------------------------------

def _log(rewards, high=True):
    lines = [",".join(LOG_HEADER)]
    for i, r in enumerate(rewards):
        lines.append(",".join([str(i), "10", "timeout", repr(float(r)), repr(float(r)) if high else "",
                               "", "0.5", "0.5", "", "", ""]))
    return "\n".join(lines) + "\n"


def test_plot_fifty_episode_log(tmp_path):
    log = tmp_path / "run.csv"
    log.write_text(_log(range(50)))
    assert main(["plot", str(log), "--window", "10", "--output-dir", str(tmp_path / "p")]) == EXIT_OK
    root = ET.parse(tmp_path / "p" / "run_reward.svg").getroot()
    series = [p.get("data-series") for p in root.iter(SVG + "polyline")]
    assert series.count("ep_reward_low") == 1 and series.count("ep_reward_high") == 1
    assert series.count("ep_reward_low (avg 10)") == 1
    loss = ET.parse(tmp_path / "p" / "run_loss.svg").getroot()
    assert {p.get("data-series") for p in loss.iter(SVG + "polyline")} == {"loss_c1", "loss_c2", "loss_c1 (avg 10)",
                                                                            "loss_c2 (avg 10)"}


def test_constant_reward_is_flat_line_at_value():
    svg = reward_chart(read_log(_log([5.0] * 20, high=False)), window=5)
    root = ET.fromstring(svg)
    lines = list(root.iter(SVG + "polyline"))
    assert len(lines) == 2
    # a flat series is padded to [4, 6]; 5 sits halfway between the plot margins
    height, margin = 360, 48
    mid = height - margin - 0.5 * (height - 2 * margin)
    for pl in lines:
        ys = {float(p.split(",")[1]) for p in pl.get("points").split()}
        assert ys == {mid}
    labels = [t.text for t in root.iter(SVG + "text")]
    assert "4" in labels and "6" in labels


def test_malformed_and_empty_logs(tmp_path):
    for text in ("", ",".join(LOG_HEADER) + "\n", "a,b\n1,2\n", _log([1, 2]).replace("timeout,1.0", "timeout,x")):
        with pytest.raises(LogFormatError):
            read_log(text)
    p = tmp_path / "empty.csv"
    p.write_text("")
    assert main(["plot", str(p), "--output-dir", str(tmp_path)]) == EXIT_CONFIG


def test_moving_average():
    assert moving_average([1, 2, 3, 4], 2).tolist() == [1.0, 1.5, 2.5, 3.5]
    with pytest.raises(ValueError):
        moving_average([1.0], 0)


def test_plot_logs_with_same_name_do_not_overwrite(tmp_path):
    for run in ("flat", "hier"):
        (tmp_path / run).mkdir()
        (tmp_path / run / "train_log.csv").write_text(_log(range(5)))
    assert main(["plot", str(tmp_path / "flat/train_log.csv"), str(tmp_path / "hier/train_log.csv"),
                 "--output-dir", str(tmp_path / "p")]) == EXIT_OK
    names = sorted(p.name for p in (tmp_path / "p").iterdir())
    assert names == ["flat_train_log_loss.svg", "flat_train_log_reward.svg",
                     "hier_train_log_loss.svg", "hier_train_log_reward.svg"]
