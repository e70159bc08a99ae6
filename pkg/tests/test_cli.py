import json
import shutil
from pathlib import Path

import pytest
from click.testing import CliRunner

from cipsim import learning
from cipsim.cli import main
from cipsim.config import RunConfig
from cipsim.params import SimulationSettings

REPO_CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def desk_dir(tmp_path, table_m3):
    """A workspace with the shipped desk config and a prebuilt m=3 table."""
    shutil.copy(REPO_CONFIGS / "desk.json", tmp_path / "desk.json")
    doc = json.loads((tmp_path / "desk.json").read_text())
    doc["grid"]["resolution"] = 3
    doc["sweep"]["n_q"] = 3
    doc["sweep"]["q_max"] = 0.02
    (tmp_path / "desk.json").write_text(json.dumps(doc))
    learning.save_table(table_m3, tmp_path / "desk.tbl")
    return tmp_path


def test_validate_passes(runner):
    result = runner.invoke(main, ["validate"])
    assert result.exit_code == 0, result.output
    assert "all checks passed" in result.output


def test_usage_error_exit_code(runner):
    result = runner.invoke(main, ["sweep", "--no-such-flag"])
    assert result.exit_code == 2


def test_learn_writes_valid_table(runner, tmp_path, params, impulse):
    cfg = {
        "simulation": {"t_end": 2.0},
        "grid": {"bounds": [[-0.05, 0.05], [-0.5, 0.5], [-0.05, 0.05], [-0.5, 0.5]]},
    }
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "t.tbl"
    result = runner.invoke(
        main, ["learn", "--config", str(cfg_path), "--resolution", "2", "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    table = learning.load_table(out)
    assert table.grid.resolution == (2, 2, 2, 2)
    # digest check against the config parameters passes
    rc = RunConfig.load(cfg_path)
    learning.load_table(out, rc.params, rc.impulse, rc.simulation)


def test_sweep_missing_table_is_domain_error(runner, tmp_path):
    cfg = {"controllers": {"agent1": {"table": "nope.tbl"}}}
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps(cfg))
    result = runner.invoke(main, ["sweep", "--config", str(cfg_path)])
    assert result.exit_code == 1
    assert "error:" in result.output


def test_sweep_without_controller_is_domain_error(runner):
    result = runner.invoke(main, ["sweep"])
    assert result.exit_code == 1


def test_simulate_deterministic_output(runner, tmp_path):
    cfg_path = REPO_CONFIGS / "pd_only.json"
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    for out in (out1, out2):
        result = runner.invoke(
            main, ["simulate", "--config", str(cfg_path), "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
    assert out1.read_bytes() == out2.read_bytes()
    header = out1.read_text().splitlines()[0]
    assert header == "t,x1,v1,th1,w1,x2,v2,th2,w2,T1,T2,fired1,fired2"


def test_simulate_seed_check(runner):
    result = runner.invoke(
        main,
        ["simulate", "--config", str(REPO_CONFIGS / "pd_only.json"), "--seed-check"],
    )
    assert result.exit_code == 0, result.output
    assert "seed check passed" in result.output


def test_sweep_runs_and_reports(runner, desk_dir, tmp_path):
    out = tmp_path / "sweep.csv"
    result = runner.invoke(
        main,
        ["sweep", "--config", str(desk_dir / "desk.json"), "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    assert "E=" in result.output
    lines = out.read_text().strip().splitlines()
    assert lines[0].startswith("trial_id")
    assert len(lines) == 4  # header + n_q rows


def test_compete_runs(runner, desk_dir):
    result = runner.invoke(main, ["compete", "--config", str(desk_dir / "desk.json")])
    assert result.exit_code == 0, result.output
    assert "E1=" in result.output and "E2=" in result.output


def test_delay_scan_runs(runner, desk_dir):
    result = runner.invoke(
        main,
        ["delay-scan", "--config", str(desk_dir / "desk.json"),
         "--delays", "0,0.002"],
    )
    assert result.exit_code == 0, result.output
    assert "best delay" in result.output


def test_slice_command(runner, desk_dir, tmp_path):
    out = tmp_path / "slice.csv"
    result = runner.invoke(
        main,
        ["slice", "--config", str(desk_dir / "desk.json"),
         "--table", str(desk_dir / "desk.tbl"),
         "--dims", "0,2", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "dim0,dim2,nu"
    assert len(lines) == 1 + 9  # 3x3 slice


def test_slice_digest_mismatch_is_domain_error(runner, desk_dir, tmp_path):
    # a config with different physics must reject the prebuilt table
    doc = json.loads((desk_dir / "desk.json").read_text())
    doc["model"] = {"rod": {"k_w": 4000.0}}
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    result = runner.invoke(
        main,
        ["slice", "--config", str(bad), "--table", str(desk_dir / "desk.tbl")],
    )
    assert result.exit_code == 1
    assert "digest mismatch" in result.output


def test_config_defaults_roundtrip(tmp_path):
    cfg_path = tmp_path / "empty.json"
    cfg_path.write_text("{}")
    rc = RunConfig.load(cfg_path)
    assert rc.params.pendulum.m_theta == 0.067
    assert rc.simulation.dt == 5e-4
    assert rc.impulse.delta_tau == rc.simulation.dt
    assert rc.impulse.tau_g == rc.simulation.dt
    assert rc.grid.resolution == (10, 10, 10, 10)
    assert rc.controller(1) is None


def test_config_rejects_unknown_keys(tmp_path):
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text(json.dumps({"model": {"pendulum": {"mass": 1.0}}}))
    with pytest.raises(ValueError):
        RunConfig.load(cfg_path)


def test_config_impulse_tracks_dt(tmp_path):
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps({"simulation": {"dt": 1e-3, "t_end": 1.0}}))
    rc = RunConfig.load(cfg_path)
    assert rc.impulse.delta_tau == 1e-3
    assert rc.impulse.tau_g == 1e-3


def test_config_agent2_defaults_to_mirror(desk_dir):
    rc = RunConfig.load(desk_dir / "desk.json")
    ic1 = rc.controller(1)
    ic2 = rc.controller(2)
    assert ic1.selected == frozenset({2, 3})
    assert not ic1.mirrored
    assert ic1.strength > 0
    assert ic2.selected == frozenset({4, 7})
    assert ic2.mirrored
    assert ic2.strength == -ic1.strength
