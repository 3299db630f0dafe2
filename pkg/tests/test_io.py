import hashlib
import json

import numpy as np
import pytest

from nlch import Grid, format_config, parse_config, read_series, read_snapshot, write_snapshot
from nlch.cli import main
from nlch.errors import FormatError, ParseError, ValidationError
from nlch.io import CSV_SCHEMA, RunSpec
from nlch.scenarios import PRESETS, run_scenario


def test_minimal_config_defaults():
    spec = parse_config("# minimal\n[model]\ntheta = 1\ntheta0 = 2\na_kind = constant\n")
    assert spec == RunSpec()


def test_theta_order_error():
    with pytest.raises(ValidationError, match="theta < theta0 required"):
        parse_config("[model]\ntheta = 1\ntheta0 = 0.5\n")


def test_unknown_key_line_number():
    with pytest.raises(ParseError) as exc:
        parse_config("scenario = custom\n\n[model]\ntheta = 1\nthetta = 2\n")
    assert exc.value.line == 5


@pytest.mark.parametrize("text, line", [
    ("[modle]\n", 1),
    ("[grid]\nnx = 8\nnx = 16\n", 3),
    ("[grid]\nnx = eight\n", 2),
    ("bogus\n", 1),
    ("theta = 1\n", 1),
])
def test_parse_errors(text, line):
    with pytest.raises(ParseError) as exc:
        parse_config(text)
    assert exc.value.line == line


def test_invalid_values():
    with pytest.raises(ValidationError):
        parse_config("[model]\nb_kind = polynomial\nb_coeffs = 0.5, -1.0\n")
    with pytest.raises(ValidationError):
        parse_config("[initial]\namplitude = 0.01\n")  # noise without a seed
    with pytest.raises(ValidationError):
        parse_config("[grid]\nnx = 2\n")


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_preset_round_trip(name):
    assert parse_config(format_config(PRESETS[name])) == PRESETS[name]


def test_snapshot_round_trip(tmp_path, rng):
    g = Grid.square(32, 2.0)
    f = rng.standard_normal(g.shape)
    p = tmp_path / "s.bin"
    write_snapshot(p, g, f, 0.5, 0.125)
    g2, f2, t, m = read_snapshot(p)
    assert g2 == g and t == 0.5 and m == 0.125
    assert f2.tobytes() == f.tobytes()
    assert p.read_bytes().startswith(b"NLCH1\ndim=2\n")


def test_snapshot_format_errors(tmp_path, rng):
    g = Grid.line(16)
    p = tmp_path / "s.bin"
    write_snapshot(p, g, rng.standard_normal(g.shape), 0.0, 0.0)
    data = p.read_bytes()
    p.write_bytes(data[:-8])
    with pytest.raises(FormatError):
        read_snapshot(p)
    p.write_bytes(b"XXXXX\n" + data[6:])
    with pytest.raises(FormatError):
        read_snapshot(p)


def test_constant_preset(tmp_path):
    res = run_scenario(PRESETS["constant"].with_output(tmp_path))
    lines = res.csv_path.read_text().splitlines()
    assert lines[0] == CSV_SCHEMA
    series = read_series(res.csv_path)
    assert np.all(series["rate_hminus1"] <= 1e-15)
    assert len(res.snapshots) == 1


def test_matano_preset_summary(tmp_path):
    res = run_scenario(PRESETS["matano_constant"].with_output(tmp_path))
    summary = json.loads(res.summary_path.read_text())
    assert summary["constant_state"] and summary["matano_within"]
    assert summary["steady_residual"] <= 1e-10


def test_runs_are_reproducible(tmp_path):
    spec = PRESETS["classic_regression"]
    digests = []
    for d in ("a", "b"):
        res = run_scenario(spec.with_output(tmp_path / d))
        digests.append(hashlib.sha256(res.csv_path.read_bytes()).hexdigest())
        digests.append(hashlib.sha256(res.snapshots[-1].read_bytes()).hexdigest())
    assert digests[0] == digests[2] and digests[1] == digests[3]
    assert json.loads(res.summary_path.read_text())["classic_max_deviation"] <= 1e-12


def test_partial_csv_flushed_on_failure(tmp_path):
    text = format_config(PRESETS["spinodal1d"]).replace("dt_min = 1e-10", "dt_min = 0.05")
    text = text.replace("dt_init = 0.001", "dt_init = 0.05")
    text = text.replace("newton_max_iter = 50", "newton_max_iter = 2")
    spec = parse_config(text).with_output(tmp_path)
    with pytest.raises(Exception) as exc:
        run_scenario(spec)
    assert getattr(exc.value, "exit_code", None) == 3
    assert (tmp_path / "series.csv").read_text().startswith(CSV_SCHEMA)


# -- command line -----------------------------------------------------------------

def test_cli_preset_emit(capsys):
    assert main(["preset", "constant", "--emit-config"]) == 0
    assert parse_config(capsys.readouterr().out) == PRESETS["constant"]


def test_cli_simulate_and_diagnose(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(format_config(PRESETS["ls_tail"]))
    assert main(["simulate", str(cfg), "-o", str(tmp_path / "out")]) == 0
    capsys.readouterr()
    assert main(["diagnose", str(tmp_path / "out" / "series.csv"), "--fit-ls", "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert 0 < out["theta_hat"] < 0.75 and out["satisfies_inequality"]


def test_cli_steady(tmp_path, capsys):
    cfg = tmp_path / "m.cfg"
    cfg.write_text(format_config(PRESETS["matano_constant"]))
    assert main(["steady", str(cfg), "-o", str(tmp_path / "o")]) == 0
    assert "matano_within=True" in capsys.readouterr().out
    assert (tmp_path / "o" / "snapshots" / "steady.bin").exists()


def test_cli_sweep(tmp_path, capsys):
    for name in ("constant", "matano_constant"):
        (tmp_path / f"{name}.cfg").write_text(format_config(PRESETS[name]))
    assert main(["sweep", str(tmp_path), "-j", "2"]) == 0
    assert (tmp_path / "runs" / "constant" / "series.csv").exists()
    assert (tmp_path / "runs" / "matano_constant" / "series.csv").exists()


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[model]\nthetta = 1\n")
    assert main(["simulate", str(bad)]) == 2
    assert main(["simulate", str(tmp_path / "missing.cfg")]) == 4
    csv = tmp_path / "x.csv"
    csv.write_text("not a series\n")
    assert main(["diagnose", str(csv)]) == 4
