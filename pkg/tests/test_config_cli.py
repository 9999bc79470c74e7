import json
import textwrap

import numpy as np
import pytest

from ymlab import cli
from ymlab.config import ExperimentConfig, load, loads, stream
from ymlab.errors import ConfigurationError
from ymlab.lattice_forms import read_snapshot

BASE = """\
schema_version: 1
scenario: heatflow
group: SU2
seed: 3
grid: {n: 8}
time: {T: 0.05, N: 4}
initial_data:
  connection:
    kind: modes
    modes:
      - {k: [1, 0, 0], component: 1, basis: 0, amp: 0.5}
      - {k: [0, 1, 1], component: 0, basis: 2, amp: 0.3, phase: cos}
"""


def _write(tmp_path, text, name="c.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_defaults():
    cfg = loads(BASE)
    assert cfg.scenario == "heatflow" and cfg.n == 8 and cfg.a == 0.5 and cfg.L == pytest.approx(2 * np.pi)
    assert cfg.connection.modes[1]["phase"] == "cos"
    assert len(cfg.hash()) == 64 and cfg.hash() == loads(BASE).hash()


@pytest.mark.parametrize(
    "patch, line, fragment",
    [
        ("grid: {n: 8, m: 2}", 5, "unknown key 'grid.m'"),
        ("grid: {n: eight}", 5, "grid.n"),
        ("grid: {L: 3.0}", 5, "missing required key 'grid.n'"),
    ],
)
def test_schema_errors_are_line_precise(patch, line, fragment):
    text = BASE.replace("grid: {n: 8}", patch)
    with pytest.raises(ConfigurationError) as exc:
        loads(text)
    assert f"line {line}" in str(exc.value) and fragment in str(exc.value)


def test_unknown_nested_key_line():
    text = BASE.replace("amp: 0.5}", "amp: 0.5, ampl: 1}")
    with pytest.raises(ConfigurationError, match="line 11"):
        loads(text)


@pytest.mark.parametrize(
    "old, new",
    [
        ("schema_version: 1", "schema_version: 2"),
        ("grid: {n: 8}", "grid: {n: 12}"),
        ("time: {T: 0.05, N: 4}", "time: {T: 2.0}"),
        ("seed: 3", "seed: 3\nexponents: {a: 1.0}"),
        ("seed: 3", "seed: 3\ntau: 0.5"),
        ("scenario: heatflow", "scenario: nonsense"),
        ("group: SU2", "group: SU3"),
    ],
)
def test_range_validation(old, new):
    with pytest.raises(ConfigurationError):
        loads(BASE.replace(old, new))


def test_empty_and_missing(tmp_path):
    with pytest.raises(ConfigurationError):
        loads("")
    with pytest.raises(ConfigurationError):
        load(tmp_path / "absent.yaml")


def test_streams_are_keyed_not_ordered():
    a = stream(5, "connection").standard_normal(4)
    stream(5, "other").standard_normal(100)
    assert np.array_equal(a, stream(5, "connection").standard_normal(4))
    assert not np.array_equal(a, stream(6, "connection").standard_normal(4))
    assert not np.array_equal(a, stream(5, "variation").standard_normal(4))


def test_heatflow_run_writes_artifacts(tmp_path):
    cfg = _write(tmp_path, BASE)
    out = tmp_path / "out"
    assert cli.main(["heatflow", "--config", str(cfg), "--out", str(out), "--snapshot-every", "2"]) == 0
    csv_text = (out / "timeseries.csv").read_text().splitlines()
    summary = json.loads((out / "summary.json").read_text())
    assert csv_text[0] == f"# config_hash: {summary['config_hash']}"
    assert csv_text[1].startswith("t,B_L2")
    assert len(csv_text) == 2 + 5
    assert summary["verdicts"] == {"energy_monotone": "pass"} and summary["seed"] == 3
    snaps = sorted((out / "snapshots").iterdir())
    assert [p.name for p in snaps] == ["A_00000.ymf", "A_00002.ymf", "A_00004.ymf"]
    assert read_snapshot(snaps[0]).grid.n == 8


def test_seed_override_changes_hash(tmp_path):
    cfg = _write(tmp_path, BASE)
    cli.main(["heatflow", "--config", str(cfg), "--out", str(tmp_path / "a")])
    cli.main(["heatflow", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "9"])
    ha = json.loads((tmp_path / "a" / "summary.json").read_text())["config_hash"]
    hb = json.loads((tmp_path / "b" / "summary.json").read_text())["config_hash"]
    assert ha != hb


def test_exit_code_config_errors(tmp_path, capsys):
    cfg = _write(tmp_path, BASE.replace("grid: {n: 8}", "grid: {n: 8, typo: 1}"))
    assert cli.main(["heatflow", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "line 5" in capsys.readouterr().err
    cfg = _write(tmp_path, BASE, "ok.yaml")
    assert cli.main(["oracle", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_exit_code_uncalibrated_checks(tmp_path):
    text = BASE.replace("scenario: heatflow", "scenario: checks") + "checks:\n  hardy: {count: 1}\n  gfs: {count: 2}\n"
    cfg = _write(tmp_path, text)
    assert cli.main(["checks", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_exit_code_divergence(tmp_path, capsys):
    cfg = _write(tmp_path, BASE.replace("amp: 0.5}", "amp: 1.0e+150}"))
    with np.errstate(all="ignore"):
        assert cli.main(["heatflow", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert "node" in capsys.readouterr().err


def test_exit_code_check_failure(tmp_path):
    text = textwrap.dedent(
        """\
        schema_version: 1
        scenario: oracle
        group: U1
        grid: {n: 8}
        time: {T: 0.1, N: 4}
        oracle: {symbol: continuum, tolerance: 1.0e-12}
        initial_data:
          connection:
            kind: modes
            coulomb: true
            modes:
              - {k: [1, 1, 0], component: 0, amp: 0.6}
        """
    )
    cfg = _write(tmp_path, text)
    assert cli.main(["oracle", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["verdicts"]["flow_matches_oracle"] == "fail"


def test_checks_scenario_with_calibration_file(tmp_path):
    text = BASE.replace("scenario: heatflow", "scenario: checks") + (
        "checks:\n  hardy: {count: 3, samples: 50}\n  gfs: {count: 2, calibrate: true, n_fields: 10}\n"
    )
    cfg = _write(tmp_path, text)
    assert cli.main(["checks", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    cal = tmp_path / "a" / "gfs_calibration.json"
    text2 = text.replace("calibrate: true, n_fields: 10", f"calibration: {cal}")
    cfg2 = _write(tmp_path, text2, "c2.yaml")
    assert cli.main(["checks", "--config", str(cfg2), "--out", str(tmp_path / "b")]) == 0
    ra = json.loads((tmp_path / "a" / "report.json").read_text())
    rb = json.loads((tmp_path / "b" / "report.json").read_text())
    assert ra == rb and len(ra["entries"]) == 5


def test_mode_field_validation(su2):
    from ymlab.lattice_forms import Grid

    with pytest.raises(ConfigurationError):
        cli.mode_field(Grid(4), su2, [{"k": [1, 0], "component": 0, "amp": 1.0}])
    with pytest.raises(ConfigurationError):
        cli.mode_field(Grid(4), su2, [{"k": [1, 0, 0], "component": 3, "amp": 1.0}])
    with pytest.raises(ConfigurationError):
        cli.mode_field(Grid(4), su2, [{"k": [0.5, 0, 0], "component": 0, "amp": 1.0}])


def test_config_object_validation():
    with pytest.raises(ConfigurationError):
        ExperimentConfig(scenario="oracle", group="SU2")
    assert ExperimentConfig(scenario="recover", taus=(0.1, 0.05), T=0.2).extra_times == (0.1, 0.05)
