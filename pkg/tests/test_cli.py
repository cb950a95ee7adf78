import csv
import io
import json

import pytest

from sinckrein import cli, experiments
from sinckrein.cli import COLUMNS, parse_and_dispatch


def run(capsys, *argv):
    code = parse_and_dispatch(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def header(text):
    return next(csv.reader(io.StringIO(text)))


def test_quad_csv_header(capsys):
    code, out, _ = run(capsys, "quad", "--xi", "2", "--order", "4")
    assert code == 0
    assert header(out) == COLUMNS["quad"]
    rows = list(csv.reader(io.StringIO(out)))[1:]
    assert len(rows) == 16


def test_mu_outside_interval_is_usage_error(capsys):
    code, _, err = run(capsys, "resolvent", "--mu", "1.5", "--xi", "3")
    assert code == 2
    assert "--mu" in err and "0 < mu < 1" in err


def test_mu_zero_rejected(capsys):
    code, _, err = run(capsys, "resolvent", "--mu", "0", "--xi", "3")
    assert code == 2 and "0 < mu < 1" in err


def test_resolvent_csv_full_precision(capsys):
    code, out, _ = run(capsys, "resolvent", "--mu", "0.5", "--xi", "4", "--probe", "1,2")
    assert code == 0
    assert header(out) == COLUMNS["resolvent"]
    rows = list(csv.reader(io.StringIO(out)))[1:]
    assert len(rows) == 3
    assert len(rows[0][3].lstrip("-").replace(".", "").lstrip("0")) >= 15


def test_probe_outside_section(capsys):
    code, _, err = run(capsys, "resolvent", "--mu", "0.5", "--xi", "4", "--probe", "5,1")
    assert code == 2 and "--probe" in err


def test_factor_csv(capsys):
    code, out, _ = run(capsys, "factor", "--mu", "0.5", "--xi", "4", "--output", "csv")
    assert code == 0
    assert header(out) == COLUMNS["factor"]
    assert "kernel_max_rel_error" in out and "M_prime" in out


def test_asymptotics_csv(capsys):
    code, out, _ = run(capsys, "asymptotics", "--mu", "0.5", "--t-min", "2", "--t-max", "2.2",
                       "--dt", "0.05")
    assert code == 0
    assert header(out) == COLUMNS["asymptotics"]


def test_krein_ode_json_block(capsys):
    code, out, _ = run(capsys, "krein-ode", "--mu", "0.5", "--z", "0,2", "--x-max", "5",
                       "--hat", "--output", "json")
    assert code == 0
    data = json.loads(out)
    assert set(data["comparison"]) == {"Pstar_end", "Pi_closed", "v_closed", "hatPi_both"}


def test_krein_ode_lower_half_plane(capsys):
    code, _, err = run(capsys, "krein-ode", "--mu", "0.5", "--z", "0,-1", "--x-max", "5")
    assert code == 2 and "--z" in err


def test_volterra_json(capsys):
    code, out, _ = run(capsys, "volterra-demo", "--mu", "0.5", "--xi", "2")
    assert code == 0
    assert json.loads(out)["n"] == 40


def test_output_to_path(tmp_path, capsys):
    target = tmp_path / "q.json"
    code, out, _ = run(capsys, "quad", "--xi", "1", "--output", str(target))
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["n_panels"] == 2


def test_bad_output_suffix(capsys):
    code, _, err = run(capsys, "quad", "--xi", "1", "--output", "x.txt")
    assert code == 2 and "--output" in err


def test_config_errors(tmp_path, capsys):
    code, _, err = run(capsys, "suite", "--config", str(tmp_path / "missing.toml"))
    assert code == 2 and "--config" in err
    bad = tmp_path / "bad.toml"
    bad.write_text("mu = 1.2\n")
    code, _, err = run(capsys, "suite", "--config", str(bad))
    assert code == 2 and "0 < mu < 1" in err
    unsorted = tmp_path / "unsorted.toml"
    unsorted.write_text("[ladders]\nt_list = [10.0, 5.0]\n")
    code, _, err = run(capsys, "suite", "--config", str(unsorted))
    assert code == 2 and "t_list" in err


def test_config_values_and_flag_override(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('mu = 0.3\n[grid]\norder = 8\n[ladders]\nz_probes = ["0+1i"]\n'
                 '[tolerances]\n"C8.w21" = 1e-9\n')
    cfg = cli.load_config(p)
    assert cfg.mu == 0.3 and cfg.order == 8 and cfg.z_probes == [1j]
    assert cfg.tolerances == {"C8.w21": 1e-9}
    args = cli.build_parser().parse_args(["suite", "--mu", "0.6"])
    assert cli._merge(args, cfg).mu == 0.6


def test_parse_complex_forms():
    assert cli.parse_complex("0+2i") == 2j
    assert cli.parse_complex("1,0.5") == 1 + 0.5j
    assert cli.parse_complex("3") == 3


def _small_tasks(monkeypatch):
    monkeypatch.setattr(experiments, "_TASKS",
                        {k: experiments._TASKS[k] for k in ("C8", "C10")})


def test_suite_json_is_schema_valid(tmp_path, capsys, monkeypatch):
    _small_tasks(monkeypatch)
    out = tmp_path / "bundle.json"
    code, _, _ = run(capsys, "suite", "--config", "default.toml", "--output", str(out),
                     "--jobs", "1")
    bundle = json.loads(out.read_text())
    assert experiments.validate_bundle(bundle)[0]
    assert code == (0 if all(c["pass"] for c in bundle["checks"]) else 1)
    assert code == 0


def test_suite_failure_exit_code(capsys, monkeypatch):
    _small_tasks(monkeypatch)
    code, out, _ = run(capsys, "suite", "--jobs", "1", "--output", "csv")
    assert header(out) == COLUMNS["suite"]
    assert code == 0
    monkeypatch.setitem(experiments._TASKS, "C8", lambda cfg: 1 / 0)
    code, _, _ = run(capsys, "suite", "--jobs", "1")
    assert code == 1
