import csv

import pytest

from punctsim.cli import EXIT_CHECKPOINT, EXIT_CONFIG, EXIT_OK, main
from punctsim.config import (
    ConfigError,
    default_config,
    dumps,
    load_config,
    parse_config,
)

DESK_CFG = """
cell.total_scs = 96
cell.num_embb = 4
cell.urllc_sc_len = 24
cell.minislots = 7
cell.rb_size = 12
traffic.num_urllc = 4
traffic.per_ue_prob = 0.1
phy.decode_kind = threshold
phy.decode_margin = 0.3
topology.embb_xy = 100,0, 0,200, -350,0, 0,-500
agent.batch = 8
agent.actor_hidden = 16
agent.critic_hidden = 32,32
agent.buffer_capacity = 64
curriculum.stages = 1:5:30, 2:2:30
run.ttis = 25
run.seed = 11
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "desk.cfg"
    p.write_text(DESK_CFG)
    return str(p)


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_default_config_round_trips():
    cfg = default_config()
    assert parse_config(dumps(cfg)).values == cfg.values


def test_custom_config_round_trips(cfg_path):
    cfg = load_config(cfg_path)
    again = parse_config(dumps(cfg))
    assert again.values == cfg.values
    assert cfg.get("cell.total_scs") == 96
    assert cfg.get("run.ttis") == 25


def test_unknown_key_is_named():
    with pytest.raises(ConfigError, match="cell.banana"):
        parse_config("cell.banana = 3")


def test_bad_value_raises():
    with pytest.raises(ConfigError):
        parse_config("cell.total_scs = many")
    with pytest.raises(ConfigError):
        parse_config("cell.total_scs")


def test_validate_catches_geometry():
    cfg = default_config().replace(cell_total_scs=97)
    with pytest.raises(ConfigError):
        cfg.validate()


def test_run_baseline_writes_metrics(tmp_path, cfg_path):
    out = tmp_path / "out"
    rc = main(["run", "--config", cfg_path, "--policy", "rp",
               "--out", str(out)])
    assert rc == EXIT_OK
    rows = _read_csv(out / "metrics.csv")
    assert len(rows) == 25
    assert {r["policy"] for r in rows} == {"rp"}
    assert all(-1.0 <= float(r["reward"]) <= 0.0 for r in rows)
    assert not (out / "timing.csv").exists()


def test_repeat_runs_are_byte_identical(tmp_path, cfg_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        rc = main(["compare", "--config", cfg_path, "--out", str(out)])
        assert rc == EXIT_OK
        outs.append((out / "metrics.csv").read_bytes())
    assert outs[0] == outs[1]


def test_compare_covers_all_policies(tmp_path, cfg_path):
    out = tmp_path / "cmp"
    assert main(["compare", "--config", cfg_path, "--out", str(out)]) == EXIT_OK
    rows = _read_csv(out / "metrics.csv")
    assert {r["policy"] for r in rows} == {"rp", "sef", "cyrus"}
    assert (out / "timing.csv").exists()
    timing = _read_csv(out / "timing.csv")
    assert {r["policy"] for r in timing} == {"cyrus"}
    assert all(float(r["per_branch_us"]) > 0 for r in timing)


def test_seed_override_changes_run(tmp_path, cfg_path):
    payloads = []
    for seed in ("11", "12"):
        out = tmp_path / f"s{seed}"
        main(["run", "--config", cfg_path, "--policy", "rp",
              "--seed", seed, "--out", str(out)])
        payloads.append((out / "metrics.csv").read_bytes())
    assert payloads[0] != payloads[1]


def test_pretrain_then_eval(tmp_path, cfg_path):
    ckpt = tmp_path / "agent"
    out = tmp_path / "eval"
    rc = main(["pretrain", "--config", cfg_path, "--out", str(ckpt)])
    assert rc == EXIT_OK
    assert (ckpt / "actor.net").exists()
    hist = _read_csv(ckpt / "pretrain_rewards.csv")
    assert len(hist) == 60
    rc = main(["eval", "--config", cfg_path, "--checkpoint", str(ckpt),
               "--out", str(out)])
    assert rc == EXIT_OK
    assert len(_read_csv(out / "metrics.csv")) == 25


def test_missing_config_exits_2(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.cfg"),
                 "--policy", "rp", "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_bad_config_exits_2(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("cell.total_scs = 97\n")
    assert main(["run", "--config", str(p), "--policy", "rp",
                 "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_missing_checkpoint_exits_3(tmp_path, cfg_path):
    assert main(["eval", "--config", cfg_path,
                 "--checkpoint", str(tmp_path / "ghost"),
                 "--out", str(tmp_path / "o")]) == EXIT_CHECKPOINT


def test_show_config_round_trips(tmp_path, cfg_path, capsys):
    assert main(["show-config", "--config", cfg_path]) == EXIT_OK
    text = capsys.readouterr().out
    assert parse_config(text).values == load_config(cfg_path).values
