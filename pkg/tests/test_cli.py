import os
import shutil
import subprocess
import sys

import pytest

from rail.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main, parse_config_file
from rail.exceptions import ConfigError
from rail.runner import CSV_HEADER, read_csv

SMALL = ["--n", "32", "--r0", "6", "--t-final", "0.1"]


def test_list_problems(capsys):
    assert main(["list-problems"]) == EXIT_OK
    out = capsys.readouterr().out
    for name in ("diffusion", "rigid", "rigid-rank", "swirling", "lbfp"):
        assert name in out
    assert "scheme=imex222" in out


def test_run_writes_csv(tmp_path, capsys):
    out = tmp_path / "d.csv"
    assert main(["run", "diffusion", *SMALL, "--scheme", "be", "--output", str(out)]) == EXIT_OK
    assert out.read_text().splitlines()[0] == ",".join(CSV_HEADER)
    recs = read_csv(out)
    assert recs[-1].time == 0.1 and recs[0].step == 0
    assert str(out) in capsys.readouterr().out


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("RAIL_OUTPUT_DIR", str(tmp_path))
    assert main(["run", "rigid", *SMALL, "--scheme", "imex111", "--lambda", "1"]) == EXIT_OK
    assert (tmp_path / "rigid_imex111_n32_run.csv").exists()


def test_missing_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("RAIL_OUTPUT_DIR", str(tmp_path / "nope"))
    assert main(["run", "diffusion", *SMALL, "--scheme", "be"]) == EXIT_CONFIG


def test_config_file_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# small diffusion run\nproblem = diffusion\nscheme = dirk3\nn = 32\nr0 = 4\n"
        "t_final = 0.05\nlambda = 0.5  # per dx\n"
    )
    out = tmp_path / "o.csv"
    assert main(["run", "--config", str(cfg), "--scheme", "be", "--output", str(out)]) == EXIT_OK
    recs = read_csv(out)
    # dx = 14/32, so lam = 0.5 gives one step of 0.21875 > t_final
    assert len(recs) == 2 and recs[-1].time == 0.05


def test_parse_config_file(tmp_path):
    good = tmp_path / "a.cfg"
    good.write_text("n = 64\n\n# comment\nt-final=1.5\nlambda=0.2\n")
    assert parse_config_file(good) == {"n": "64", "t_final": "1.5", "lam": "0.2"}
    bad = tmp_path / "b.cfg"
    bad.write_text("colour = blue\n")
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_file(bad)
    bad.write_text("just words\n")
    with pytest.raises(ConfigError, match="key=value"):
        parse_config_file(bad)
    with pytest.raises(ConfigError):
        parse_config_file(tmp_path / "absent.cfg")


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "rigid", "--scheme", "dirk2"],
        ["run", "diffusion", "--lambda", "1", "--dt", "0.1"],
        ["run", "diffusion", "--n", "many"],
        ["run", "nonsense"],
        ["run"],
        ["frobnicate"],
        ["converge", "diffusion", *SMALL, "--scheme", "be", "--lambdas", "a,b"],
    ],
)
def test_config_errors_exit_2(argv, capsys):
    assert main(argv) == EXIT_CONFIG
    assert "rail" in capsys.readouterr().err


def test_unstable_run_exit_3(tmp_path, capsys):
    argv = ["run", "lbfp", "--n", "64", "--lambda", "0.5", "--t-final", "3", "--r0", "10",
            "--output", str(tmp_path / "x.csv")]
    assert main(argv) == EXIT_NUMERIC
    assert "instability" in capsys.readouterr().err


def test_converge(tmp_path, capsys):
    out = tmp_path / "c.csv"
    argv = ["converge", "rigid", "--n", "32", "--r0", "6", "--t-final", "0.2", "--scheme", "imex111",
            "--lambdas", "1,0.5", "--no-cache", "--output", str(out)]
    assert main(argv) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "lambda,dt,l1_error,observed_order"
    assert len(lines) == 3 and lines[1].endswith(",")
    assert "least-squares order" in capsys.readouterr().out


def test_help_exits_zero(capsys):
    assert main(["--help"]) == EXIT_OK


@pytest.mark.skipif(shutil.which("rail") is None, reason="console script not installed")
def test_console_script_exit_code(tmp_path):
    env = dict(os.environ, RAIL_OUTPUT_DIR=str(tmp_path))
    ok = subprocess.run(["rail", "run", "diffusion", *SMALL, "--scheme", "be"], env=env, capture_output=True)
    assert ok.returncode == 0
    bad = subprocess.run(["rail", "run", "rigid", "--scheme", "be"], env=env, capture_output=True)
    assert bad.returncode == 2


def test_module_entry_point(tmp_path):
    env = dict(os.environ, RAIL_OUTPUT_DIR=str(tmp_path))
    proc = subprocess.run([sys.executable, "-m", "rail.cli", "list-problems"], env=env, capture_output=True)
    assert proc.returncode == 0 and b"lbfp" in proc.stdout
