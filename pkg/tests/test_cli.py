"""Command-line front end: outputs, exit codes, config handling, idempotence."""
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from asianpde.cli import EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, run
from asianpde.fd import load_grid


def run_cli(args, capsys):
    code = run(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def body(text):
    """CSV body: everything after the timestamp comment line."""
    lines = text.strip().splitlines()
    assert lines[0].startswith("# created ")
    return "\n".join(lines[1:])


def test_kernel_command_origin_value(capsys):
    code, out, _ = run_cli(["kernel", "--kind", "k", "--lambda", "1",
                            "--point", "0,0,1", "--pole", "0,0,0"], capsys)
    assert code == EXIT_OK
    assert float(out.strip()) == pytest.approx(math.sqrt(3) / (2 * math.pi),
                                               rel=1e-12)


def test_kernel_command_l_kind(capsys):
    code, out, _ = run_cli(["kernel", "--kind", "l", "--lambda", "1",
                            "--point", "1,0,1", "--pole", "1,1,0"], capsys)
    assert code == EXIT_OK
    assert float(out.strip()) > 0.27  # strictly inside the support


def test_psi_command_zero_case(capsys):
    code, out, _ = run_cli(["psi", "--start", "1,-2,2", "--end", "1,0,0"],
                           capsys)
    assert code == EXIT_OK
    assert out.startswith("0.0 branch=upper")


def test_price_command_csv(tmp_path, capsys):
    out_path = str(tmp_path / "price.csv")
    code, out, _ = run_cli(["price", "--kind", "geometric", "--sigma", "0.4",
                            "--strike", "1.0", "--maturity", "1.0",
                            "--spot", "1.0", "--method", "kernel",
                            "--output", out_path], capsys)
    assert code == EXIT_OK
    rows = open(out_path).read().strip().splitlines()
    assert rows[1] == "spec,price,error,method"
    assert "kernel" in rows[2]
    assert abs(float(out.strip()) - 0.0848477) < 1e-4


def test_price_idempotent_bodies(tmp_path, capsys):
    args = ["price", "--kind", "geometric", "--sigma", "0.4", "--method",
            "mc", "--paths", "20000", "--steps", "32", "--seed", "9"]
    p1, p2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    assert run_cli(args + ["--output", p1], capsys)[0] == EXIT_OK
    assert run_cli(args + ["--output", p2], capsys)[0] == EXIT_OK
    assert body(open(p1).read()) == body(open(p2).read())


def test_mc_command(tmp_path, capsys):
    out_path = str(tmp_path / "mc.csv")
    code, _, _ = run_cli(["mc", "--sigma", "1.0", "--mu", "-0.5",
                          "--paths", "20000", "--steps", "32",
                          "--seed", "4", "--output", out_path], capsys)
    assert code == EXIT_OK
    text = open(out_path).read()
    assert "mean_S" in text and "se_A" in text
    mean_s = float(body(text).splitlines()[1].split(",")[1])
    assert abs(mean_s - 1.0) < 0.05  # driftless price


def test_fd_solve_writes_grid(tmp_path, capsys):
    out_path = str(tmp_path / "k.grid")
    code, out, _ = run_cli(["fd-solve", "--kind", "k", "--nx", "65",
                            "--ny", "65", "--nt", "64",
                            "--out", out_path], capsys)
    assert code == EXIT_OK
    frames, info = load_grid(out_path)
    assert info["nx"] == 65 and frames.shape[0] == 1
    assert abs(frames.sum() * (8 / 64) * (2.4 / 64) - 1.0) < 0.05


def test_validate_reproduction_suite(tmp_path, capsys):
    out_path = str(tmp_path / "rep.csv")
    code, _, err = run_cli(["validate", "--suite", "reproduction",
                            "--tol", "2e-2", "--output", out_path], capsys)
    assert code == EXIT_OK
    rows = open(out_path).read().strip().splitlines()
    assert rows[1] == "case,value,target,discrepancy,pass"
    assert all(r.endswith("True") for r in rows[2:])


def test_validate_failure_exit_code(capsys):
    # an unreachable tolerance forces a failure report and exit 2
    code, out, err = run_cli(["validate", "--suite", "normalization",
                              "--tol", "1e-18"], capsys)
    assert code == EXIT_VALIDATION
    report = json.loads(err.strip().splitlines()[-1])
    assert report["suite"] == "normalization"
    assert report["failed"]


def test_validate_unknown_suite(capsys):
    code, _, err = run_cli(["validate", "--suite", "nope"], capsys)
    assert code == EXIT_USAGE
    assert "suite" in err


def test_usage_error_bad_point(capsys):
    code, _, err = run_cli(["kernel", "--kind", "k", "--point", "oops",
                            "--pole", "0,0,0"], capsys)
    assert code == EXIT_USAGE
    assert "--point" in err


def test_config_file_applies(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("sigma=0.4\nstrike=1.0\nmaturity=1.0\n")
    code, out, _ = run_cli(["price", "--kind", "geometric", "--sigma", "0.4",
                            "--config", str(cfg)], capsys)
    assert code == EXIT_OK


def test_config_conflict_reported(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("sigma=0.5\n")
    code, out, err = run_cli(["price", "--kind", "geometric",
                              "--sigma", "0.4", "--config", str(cfg)],
                             capsys)
    assert code == EXIT_OK
    assert "conflict" in err and "command line" in err


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("nonsense=1\n")
    code, _, err = run_cli(["price", "--kind", "geometric", "--sigma", "0.4",
                            "--config", str(cfg)], capsys)
    assert code == EXIT_USAGE
    assert "nonsense" in err


def test_help_documents_csv_columns():
    from asianpde.cli import build_parser
    text = build_parser().format_help()
    for token in ("price", "error", "method", "case", "discrepancy",
                  "mean_S", "cost", "branch"):
        assert token in text


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "asianpde.cli"] if False else
        ["asianpde", "kernel", "--kind", "k", "--lambda", "1",
         "--point", "0,0,1", "--pole", "0,0,0"],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert float(proc.stdout.strip()) == pytest.approx(0.27566444771089604)
