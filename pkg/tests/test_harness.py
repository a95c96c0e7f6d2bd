import csv
import json
import math
from pathlib import Path

import pytest

from tsagrid.cli import main
from tsagrid.config import ConfigError, parse_config
from tsagrid.runner import run

DEMOS = Path(__file__).resolve().parents[1] / "demos" / "configs"

MINIMAL_FAULT = 'kind = "fault"\nseed = 1\nsweep = [0]\n'


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# --- parsing -------------------------------------------------------------------


def test_minimal_fault_defaults():
    cfg = parse_config(MINIMAL_FAULT)
    p = cfg.params
    assert (p["frame_rate"], p["duration"], p["t_fault"]) == (30.0, 10.0, 5.0)
    assert p["model"] == "long" and cfg.seed == 1 and cfg.sweep == [0.0]


def test_empty_text_names_kind():
    with pytest.raises(ConfigError) as exc:
        parse_config("")
    assert exc.value.location == "kind"


def test_empty_sweep_rejected():
    with pytest.raises(ConfigError) as exc:
        parse_config('kind = "fault"\nseed = 1\nsweep = []\n')
    assert exc.value.location == "sweep"


def test_missing_seed():
    with pytest.raises(ConfigError) as exc:
        parse_config('kind = "fault"\nsweep = [0]\n')
    assert exc.value.location == "seed"


@pytest.mark.parametrize(
    "extra, location",
    [
        ("[fault]\nzff = 1\n", "fault.zff"),
        ("colour = 1\n", "colour"),
        ('[fault]\nmodel = "cable"\n', "fault.model"),
        ("[fault]\nd_true = 1.5\n", "fault.d_true"),
        ('[fault]\nd_true = "half"\n', "fault.d_true"),
        ("[fault]\nzf = [1, 2, 3]\n", "fault.zf"),
        ("[fault]\nt_fault = 12\n", "fault.t_fault"),
        ("[voltage]\np_load = 1\n", "voltage"),
    ],
)
def test_config_errors_carry_location(extra, location):
    with pytest.raises(ConfigError) as exc:
        parse_config(MINIMAL_FAULT + extra)
    assert exc.value.location == location
    assert location in str(exc.value)


def test_wrong_seed_type():
    with pytest.raises(ConfigError) as exc:
        parse_config('kind = "fault"\nseed = 1.5\nsweep = [0]\n')
    assert exc.value.location == "seed"


def test_malformed_toml():
    with pytest.raises(ConfigError):
        parse_config("kind = ")


def test_complex_values_and_nested_tables():
    cfg = parse_config(MINIMAL_FAULT + "[fault]\nzf = [1.0, 0.5]\n")
    assert cfg.params["zf"] == 1 + 0.5j
    text = (DEMOS / "gps.toml").read_text()
    cfg = parse_config(text)
    assert cfg.params["authentic"]["code_phase"] == 100.0
    bad = text.replace("code_phase = 612.0", "code_phase = 2000.0")
    with pytest.raises(ConfigError) as exc:
        parse_config(bad)
    assert exc.value.location == "gps.spoof.code_phase"


def test_event_config_checks():
    text = (DEMOS / "event.toml").read_text()
    with pytest.raises(ConfigError) as exc:
        parse_config(text.replace('victim_id = "MMR4"', 'victim_id = "MMR9"'))
    assert exc.value.location == "event.victim_id"
    with pytest.raises(ConfigError) as exc:
        parse_config(text.replace("event = [120.0, 160.0, 0.0]\n", ""))
    assert exc.value.location == "event.mmrs"


@pytest.mark.parametrize("name", ["fault_long", "fault_medium_noisy", "voltage", "event", "gps"])
def test_demo_configs_parse(name):
    parse_config((DEMOS / f"{name}.toml").read_text())


# --- running -------------------------------------------------------------------


def test_zero_attack_fault_run(tmp_path):
    res = run(parse_config(MINIMAL_FAULT), tmp_path)
    rows = read_csv(res.files["fault_frames.csv"])
    post = [r for r in rows if float(r["t"]) >= 5.0]
    assert post and all(float(r["error"]) < 1e-5 for r in post)
    assert list(rows[0]) == ["t", "model", "fault_type", "D_true", "dtheta_deg", "indicator1", "indicator2", "D_est", "error", "clamped_flag"]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seed"] == 1 and manifest["config_text"] == MINIMAL_FAULT
    assert {"version", "wall_time_s", "outputs"} <= set(manifest)


def test_event_demo_displacement(tmp_path):
    res = run(parse_config((DEMOS / "event.toml").read_text()), tmp_path)
    rows = {float(r["delta"]): r for r in read_csv(res.files["event_solutions.csv"])}
    assert float(rows[0.2]["displacement"]) > 50.0
    assert float(rows[0.0]["displacement"]) < 1e-6


def test_event_config_with_measured_times(tmp_path):
    text = (
        'kind = "event"\nseed = 0\nsweep = [0.0, 0.2]\n[event]\nvictim_id = "B"\nmmrs = [\n'
        '{ id = "A", x = 0.0, y = 0.0, t = 0.4 },\n{ id = "B", x = 400.0, y = 0.0, t = 0.68 },\n'
        '{ id = "C", x = 0.0, y = 400.0, t = 0.58 },\n{ id = "D", x = 400.0, y = 400.0, t = 0.80 },\n]\n'
    )
    res = run(parse_config(text), tmp_path)
    rows = read_csv(res.files["event_solutions.csv"])
    assert rows[0]["victim_id"] == "B" and float(rows[1]["displacement"]) > 0


@pytest.mark.parametrize("name", ["fault_long", "voltage", "event"])
def test_runs_are_byte_identical(tmp_path, name):
    cfg = parse_config((DEMOS / f"{name}.toml").read_text())
    a, b = run(cfg, tmp_path / "a"), run(cfg, tmp_path / "b")
    for fname, path in a.files.items():
        assert path.read_bytes() == b.files[fname].read_bytes()


def test_gps_run_tables(tmp_path):
    text = (DEMOS / "gps.toml").read_text().replace("trials = 10", "trials = 3")
    res = run(parse_config(text), tmp_path)
    summary = read_csv(res.files["gps_summary.csv"])
    assert [float(r["power_ratio"]) for r in summary] == [0.5, 1.0, 2.0, 4.0]
    assert float(summary[-1]["capture_fraction"]) == 1.0
    grid = read_csv(res.files["gps_grid.csv"])
    assert len(grid) == 4092 * 41


def test_voltage_run_columns(tmp_path):
    res = run(parse_config('kind = "voltage"\nseed = 0\nsweep = [0, 20]\n'), tmp_path)
    rows = read_csv(res.files["voltage_frames.csv"])
    assert len(rows) == 600
    assert {r["stale_flag"] for r in rows} == {"0", "1"}
    summary = read_csv(res.files["voltage_summary.csv"])
    assert float(summary[0]["margin_error"]) == 0.0 and float(summary[1]["margin_error"]) > 0


def test_manifest_reproduces_outputs(tmp_path):
    cfg = parse_config((DEMOS / "event.toml").read_text())
    first = run(cfg, tmp_path / "a")
    again = run(parse_config(first.manifest["config_text"]), tmp_path / "b")
    assert again.manifest["outputs"] == first.manifest["outputs"]


# --- command line --------------------------------------------------------------


def test_cli_success_and_validate(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text(MINIMAL_FAULT)
    assert main(["validate", "--config", str(cfg)]) == 0
    assert main(["fault", "--config", str(cfg), "--out", str(tmp_path / "o"), "--seed", "9", "--sweep", "0,10"]) == 0
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["seed"] == 9 and manifest["sweep"] == [0.0, 10.0]


def test_cli_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text(MINIMAL_FAULT + "[fault]\nbogus = 1\n")
    assert main(["fault", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    record = json.loads((tmp_path / "o" / "error.json").read_text())
    assert record["location"] == "fault.bogus" and record["status"] == 2
    assert main(["voltage", "--config", str(tmp_path / "c.toml")]) == 2
    assert main(["fault", "--config", str(tmp_path / "missing.toml")]) == 2


def test_cli_kind_mismatch(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(MINIMAL_FAULT)
    assert main(["gps", "--config", str(cfg)]) == 2


def test_cli_runtime_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text(MINIMAL_FAULT + "[fault]\nz1 = [0, 0]\n")
    assert main(["fault", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    record = json.loads((tmp_path / "o" / "error.json").read_text())
    assert record["status"] == 3 and record["error"] == "runtime"


def test_env_default_output_dir(tmp_path, monkeypatch):
    cfg = tmp_path / "c.toml"
    cfg.write_text(MINIMAL_FAULT)
    monkeypatch.setenv("TSA_GRID_SIM_OUT", str(tmp_path / "env_out"))
    assert main(["fault", "--config", str(cfg)]) == 0
    assert (tmp_path / "env_out" / "fault_frames.csv").exists()
    assert not math.isnan(float(read_csv(tmp_path / "env_out" / "fault_summary.csv")[0]["D_est"]))
