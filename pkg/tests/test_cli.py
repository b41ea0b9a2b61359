import json

import pytest

from spsfilter.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_point_csv(capsys):
    code, out, _ = run(capsys, "point", "--gamma-pump", "5", "--gamma-deph", "10",
                       "--pulse", "0.01", "--metrics", "qy")
    assert code == 0
    row = out.strip().splitlines()[-1].split(",")
    assert abs(float(row[11]) - 2 / 13) < 1e-3


def test_point_json_and_manifest(tmp_path, capsys):
    out = tmp_path / "p.json"
    code, _, _ = run(capsys, "point", "--metrics", "ind", "--format", "json", "--out", str(out))
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["rows"][0]["status"] == "ok"
    assert json.loads((tmp_path / "p.json.manifest.json").read_text())["engine_version"]


def test_point_empty_metrics(capsys):
    assert run(capsys, "point", "--metrics", "")[0] == 0


def test_point_accuracy_budget(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"abs_tol": 1e-300}')
    code, out, _ = run(capsys, "point", "--metrics", "qy", "--rel-tol", "1e-17",
                       "--config", str(cfg))
    assert code == 4 and "qy=accuracy" in out


def test_point_all_failed(capsys):
    assert run(capsys, "point", "--pulse", "0", "--metrics", "g2T,qy")[0] == 3


@pytest.mark.parametrize("argv", [["figure", "fig7"], ["point", "--gamma-pump", "-1"],
                                  ["sweep", "--metrics", "qy"]])
def test_usage_errors(argv, capsys):
    code, _, err = run(capsys, *argv)
    assert code == 2 and "error" in err


@pytest.mark.parametrize("argv", [["point", "--metrics", "g3"], ["nope"],
                                  ["sweep", "--axis", "gamma_F:1:2"]])
def test_parse_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2


def test_sweep_with_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "parameters": {"gamma_pump": 2.0, "gamma_deph": 1.0, "pulse_T": 0.5},
        "axes": [{"name": "gamma_F", "min": 0.5, "max": 2.0, "points": 3, "scale": "log"}],
        "metrics": ["qy"], "rel_tol": 1e-8, "workers": 1}))
    code, out, _ = run(capsys, "sweep", "--config", str(cfg))
    assert code == 0
    lines = [l for l in out.splitlines() if not l.startswith("#")]
    assert len(lines) == 4 and lines[1].endswith(",1e-08,1e-10")
    # one axis cannot make a heatmap
    assert run(capsys, "sweep", "--config", str(cfg), "--svg", str(tmp_path / "h.svg"))[0] == 2


def test_bad_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"speed": 3}')
    assert run(capsys, "point", "--config", str(cfg))[0] == 2


def test_figure_small(tmp_path, capsys):
    svg = tmp_path / "f.svg"
    code, out, _ = run(capsys, "figure", "fig5a", "--points", "3", "--svg", str(svg))
    assert code == 0 and svg.read_text().startswith("<svg")
    assert len([l for l in out.splitlines() if not l.startswith("#")]) == 10


def test_limits(capsys):
    code, out, _ = run(capsys, "limits", "qy_short", "--gamma-deph", "10", "--gamma-f", "1")
    assert code == 0 and abs(float(out.split()[1]) - 2 / 13) < 1e-15


def test_selftest_summary(tmp_path, capsys):
    out = tmp_path / "s.json"
    code, _, err = run(capsys, "selftest", "--out", str(out))
    doc = json.loads(out.read_text())
    assert len(doc["checks"]) == 11
    assert code == (0 if doc["passed"] else 1)
    assert "checks passed" in err
