import json
import subprocess
import sys
from fractions import Fraction

import pytest

from mdl.cli import main

F = Fraction


def run_cli(*args):
    r = subprocess.run([sys.executable, "-m", "mdl.cli", *args],
                       capture_output=True, text=True)
    return r.returncode, r.stdout, r.stderr


def cells(out):
    lines = [l for l in out.strip().splitlines()[1:] if l]
    return [l.split(",") for l in lines]


def test_bc_ratio_example():
    rc, out, _ = run_cli("bc-ratio", "--psi", "const:1/10",
                         "--gamma", "rat:0", "--Q", "3")
    assert rc == 0
    row = cells(out)[0]
    assert row[0] == "bc-ratio"
    assert F(int(row[3]), int(row[4])) == F(27, 80)


def test_sigma_pair_example():
    rc, out, _ = run_cli("sigma-pair", "--gamma", "sqrt:2",
                         "--beta", "sqrt:3", "--N", "2")
    assert rc == 0
    rows = cells(out)
    val = F(int(rows[0][3]), int(rows[0][4]))
    assert abs(float(val) - 4.33) < 1e-2
    assert rows[1][3] == "1" and rows[2][3] == "-2"


def test_etk_example():
    rc, out, _ = run_cli("etk", "--alpha", "const:golden", "--N", "10",
                         "--H", "1")
    assert rc == 0
    row = cells(out)[0]
    assert abs(float(F(int(row[3]), int(row[4]))) - 184.249) < 1e-2


def test_no_bare_floats_in_csv():
    rc, out, _ = run_cli("disc", "--alpha", "sqrt:2", "--Q", "50")
    assert rc == 0
    for row in cells(out):
        for cell in row[3:7]:
            int(cell)      # every numeric cell is an exact integer pair


def test_json_format():
    rc, out, _ = run_cli("f-avg", "--Q", "100", "--format", "json")
    assert rc == 0
    data = json.loads(out)
    assert data[0]["experiment"] == "f-average"
    int(data[0]["value_num"])


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("Q=3\nwibble=1\n")
    rc, out, err = run_cli("bc-ratio", "--psi", "const:1/10",
                           "--gamma", "rat:0", "--Q", "3",
                           "--config", str(cfg))
    assert rc == 1
    assert "wibble" in err


def test_config_supplies_and_flags_override(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# experiment configuration\npsi=const:1/10\ngamma=rat:0\nQ=3\n")
    rc, out, _ = run_cli("bc-ratio", "--psi", "const:1/10",
                         "--gamma", "rat:0", "--Q", "2", "--config", str(cfg))
    assert rc == 0
    # Q=2 came from the flag, not the file
    assert cells(out)[0][2] == "2"


def test_config_malformed_line(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("Q 3\n")
    rc, _, err = run_cli("f-avg", "--Q", "5", "--config", str(cfg))
    assert rc == 1 and "1" in err


def test_bad_parameter_is_config_error():
    rc, _, err = run_cli("sigma", "--gamma", "sqrt:4", "--N", "5")
    assert rc == 1
    assert "config error" in err


def test_undecided_exit_code():
    """A decimal fibre parameter whose window straddles the support edge
    cannot be decided at any precision: exit code 2."""
    rc, out, _ = run_cli("div-sum", "--psi", "const:1/10",
                         "--beta", "dec:0.25@1e-12", "--gamma-prime", "rat:0",
                         "--omega", "1", "--Q", "4",
                         "--precision-bits", "256")
    assert rc == 2, out


def test_threads_do_not_change_output():
    args = ("mc-survey", "--psi", "overq:1/4", "--gamma", "sqrt:3",
            "--beta", "sqrt:2", "--Q", "200", "--samples", "8",
            "--seed", "7", "--direct")
    rc1, out1, _ = run_cli(*args, "--threads", "1")
    rc2, out2, _ = run_cli(*args, "--threads", "3")
    assert rc1 == rc2 == 0
    assert out1 == out2


def test_master_sweep_small():
    rc, out, _ = run_cli("master-sweep", "--psi", "overq:1/4",
                         "--gamma", "sqrt:2", "--Q", "40", "--H", "3",
                         "--C0", "100")
    assert rc == 0
    rows = {r[0]: r for r in cells(out)}
    assert rows["master-violations"][3] == "0"
    assert int(rows["master-pairs"][3]) == 39 * 40 // 2


def test_main_entry_direct(capsys):
    assert main(["omega", "--q", "4", "--c", "1"]) == 0
    out = capsys.readouterr().out
    assert "omega-main2" in out


def test_gl_census_cli():
    rc, out, _ = run_cli("gl-census", "--beta", "sqrt:2", "--omega", "1",
                         "--Q", "4", "--members")
    assert rc == 0
    rows = cells(out)
    assert any(r[0] == "gl-census-member" and r[3] == "4" for r in rows)
