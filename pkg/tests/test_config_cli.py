import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from t2m.cli import main
from t2m.config import CONFIG_DIR_ENV, builtin_fixture_paths, fixture_catalog, parse_fixture, resolve_fixture
from t2m.errors import ConfigError, ParameterError
from t2m.expr import ExpressionError, Program, compile_expression
from t2m.suites import Tolerances, run_suite

SMALL = """
[fixture]
name = "line-and-cube"
description = "Real line with two charts differing by a shift"
dim = 1

[charts.a]
box = [[-2.0], [2.0]]
positive = ["y1 + 2", "2 - y1"]

[charts.b]
box = [[-1.0], [3.0]]

[[transitions]]
from = "a"
to = "b"
map = ["y1 + 1"]
samples = [[0.5]]

[[transitions]]
from = "b"
to = "a"
map = ["y1 - 1"]
samples = [[1.5]]

[christoffel.a]
action = ["y1*u1*v1"]

[christoffel.b]
pushforward = "a"
"""


def test_builtin_fixtures_load():
    names = set(builtin_fixture_paths())
    assert {"flat-cartesian-polar", "sphere-stereographic-3chart", "truncation-tower-d4"} <= names
    assert len(names) >= 4
    for name in names:
        fx = resolve_fixture(name)
        assert fx.name == name


def test_expression_language():
    f = compile_expression("2*y1^2 - sin(y2) + atan2(y2, y1) + pi", ["y1", "y2"])
    y1, y2 = 0.3, 1.1
    assert f({"y1": y1, "y2": y2}) == pytest.approx(2 * y1**2 - np.sin(y2) + np.arctan2(y2, y1) + np.pi)
    p = Program(["s + y1"], ["y1", "y2"], ["s = y1*y2"])
    assert p([2.0, 3.0]) == [8.0]
    for bad in ("y1 +", "__import__('os')", "y1.real", "foo(y1)", "y3", "atan2(y1)"):
        with pytest.raises(ExpressionError):
            compile_expression(bad, ["y1", "y2"])


def test_small_fixture_runs_and_passes():
    fx = parse_fixture(SMALL)
    report = run_suite(fx, "all", seed=3)
    assert report.passed, report.summary()
    # pushforward by a translation keeps the field, moved along
    g = fx.christoffels["b"]
    assert g([1.5], [2.0], [3.0])[0] == pytest.approx(0.5 * 6.0)


def test_parse_errors_carry_line_and_column():
    with pytest.raises(ConfigError) as info:
        parse_fixture(SMALL.replace('map = ["y1 + 1"]', 'map = ["y1 + 1"'))
    assert info.value.line is not None and info.value.column is not None
    assert "line" in str(info.value)
    with pytest.raises(ConfigError) as info:
        parse_fixture(SMALL.replace('action = ["y1*u1*v1"]', 'action = ["y1*u1*zz"]'))
    assert info.value.line == SMALL.splitlines().index('action = ["y1*u1*v1"]') + 1


def test_inconsistent_fixtures_are_rejected():
    with pytest.raises(ConfigError):
        parse_fixture(SMALL.replace('to = "b"', 'to = "c"'))
    with pytest.raises(ConfigError):
        parse_fixture(SMALL.replace("samples = [[0.5]]", "samples = [[5.0]]"))


def test_tolerances_must_be_positive():
    with pytest.raises(ParameterError):
        Tolerances(struct=0.0)
    with pytest.raises(SystemExit) as info:
        main(["verify", "--config", "flat-cartesian-polar", "--tol-fd", "-1"])
    assert info.value.code != 0


def test_catalog_with_custom_dirs(tmp_path, monkeypatch):
    builtins = fixture_catalog()
    empty = tmp_path / "empty"
    empty.mkdir()
    assert fixture_catalog(empty) == builtins
    custom = tmp_path / "custom"
    custom.mkdir()
    (custom / "line-and-cube.toml").write_text(SMALL)
    assert set(fixture_catalog(custom)) == set(builtins) | {"line-and-cube"}
    monkeypatch.setenv(CONFIG_DIR_ENV, str(custom))
    assert "line-and-cube" in fixture_catalog()
    assert resolve_fixture("line-and-cube").name == "line-and-cube"
    with pytest.raises(ConfigError):
        resolve_fixture("no-such-fixture")


def test_cli_list(capsys, tmp_path):
    assert main(["fixtures", "list"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) >= 4
    (tmp_path / "line-and-cube.toml").write_text(SMALL)
    main(["fixtures", "list", "--config-dir", str(tmp_path)])
    assert "line-and-cube" in capsys.readouterr().out


def test_cli_verify_and_determinism(tmp_path, capsys):
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["verify", "--config", "flat-cartesian-polar", "--suite", "bundle", "--seed", "5", "--out", str(out1)]) == 0
    assert main(["verify", "--config", "flat-cartesian-polar", "--suite", "bundle", "--seed", "5", "--out", str(out2)]) == 0
    a, b = json.loads(out1.read_text()), json.loads(out2.read_text())
    assert "wall_time" in a
    a.pop("wall_time"), b.pop("wall_time")
    assert json.dumps(a) == json.dumps(b)
    assert a["passed"] and all(r["residual"] < 1e-10 for r in a["records"] if r["check"] == "bundle.cocycle")
    assert "PASS" in capsys.readouterr().err


def test_cli_fault_fixture_fails(capsys):
    assert main(["verify", "--config", "flat-cartesian-polar-fault", "--suite", "bundle"]) == 1
    doc = json.loads(capsys.readouterr().out)
    failing = [r for r in doc["records"] if r["status"] == "fail"]
    assert any(r["check"] == "bundle.transition.compatibility" for r in failing)
    assert any("compatibility condition" in r.get("note", "") for r in failing)


def test_cli_reports_config_errors(tmp_path, capsys):
    broken = tmp_path / "broken.toml"
    broken.write_text(SMALL.replace('dim = 1', 'dim = 1\nname = "again"'))
    assert main(["verify", "--config", str(broken)]) == 2
    err = capsys.readouterr().err
    assert "line" in err and "column" in err
    assert main(["verify", "--config", "truncation-tower-d4", "--suite", "bundle"]) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "t2m", "fixtures", "list"], capture_output=True, text=True)
    assert proc.returncode == 0 and "truncation-tower-d4" in proc.stdout
