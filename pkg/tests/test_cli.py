import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from hpmpbe import cli

COMPARE = """\
# constant kernel, HPM against exact and direct
command = compare
kernel = constant
ic = exponential
grid.max = 30
grid.count = 400
times = 0.5, 1
order = 25
"""


def _write(tmp_path, text, name="run.cfg", **extra):
    body = text + "".join(f"{k} = {v}\n" for k, v in extra.items())
    p = tmp_path / name
    p.write_text(body)
    return p


def _read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_compare_outputs(tmp_path):
    out = tmp_path / "out"
    assert cli.main([str(_write(tmp_path, COMPARE, out_dir=out))]) == 0
    header, data = _read_csv(out / "compare_t1.csv")
    assert ",".join(header) == "m,c_hpm,c_ref,c_oracle,rel_err_hpm,rel_err_oracle"
    assert data.shape == (400, 6)
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary) >= {"config", "moments", "warnings", "error_table"}
    assert summary["error_table"][-1]["sup_rel_err_hpm"] < 1e-4
    assert summary["moments"]["1"]["hpm"]["M0"] == pytest.approx(2 / 3, rel=1e-5)


def test_full_precision_fields(tmp_path):
    out = tmp_path / "out"
    cli.main([str(_write(tmp_path, COMPARE, out_dir=out))])
    line = (out / "compare_t0p5.csv").read_text().splitlines()[1]
    for field in line.split(","):
        mantissa, exp = field.split("e")
        assert len(mantissa.lstrip("-").replace(".", "")) == 18
        assert float(field) == float(repr(float(field)))


def test_byte_identical_reruns(tmp_path):
    paths = []
    for name in ("a", "b"):
        out = tmp_path / name
        cfg = _write(tmp_path, COMPARE, name=f"{name}.cfg", out_dir="OUT")
        text = cfg.read_text().replace("OUT", str(out))
        cfg.write_text(text)
        assert cli.main([str(cfg)]) == 0
        paths.append(out)
    for f in ("compare_t0p5.csv", "compare_t1.csv"):
        assert (paths[0] / f).read_bytes() == (paths[1] / f).read_bytes()
    sa = json.loads((paths[0] / "summary.json").read_text())
    sb = json.loads((paths[1] / "summary.json").read_text())
    sa["config"].pop("out_dir"), sb["config"].pop("out_dir")
    assert sa == sb


def test_unknown_names_exit_2(tmp_path, caplog):
    cfg = _write(tmp_path, "command = solve\nkernel = foo\n")
    assert cli.main([str(cfg)]) == 2
    assert "binary_linear" in caplog.text and "product" in caplog.text
    assert cli.main([str(_write(tmp_path, "command = solve\nic = gaussian\n"))]) == 2
    assert cli.main([str(_write(tmp_path, "command = solve\ncolour = red\n"))]) == 2
    assert cli.main([str(_write(tmp_path, "command = explode\n"))]) == 2
    assert cli.main([str(_write(tmp_path, "command = solve\nkernel = power_law\n"))]) == 2
    assert cli.main([str(tmp_path / "missing.cfg")]) == 2


def test_parse_config_details():
    cfg = cli.parse_config("command = truncation  # trailing comment\n\n# blank above\nkernel = power_law\n"
                           "alpha = 1.5\ntimes = 1, 10\ngrid.kind = geometric\ngrid.min = 1e-6\n")
    assert cfg.times == (1.0, 10.0) and cfg.alpha == 1.5 and cfg.grid_min == 1e-6
    with pytest.raises(cli.ConfigError):
        cli.parse_config("command = solve\ncommand = solve\n")
    with pytest.raises(cli.ConfigError):
        cli.parse_config("command solve\n")
    with pytest.raises(cli.ConfigError):
        cli.parse_config("command = solve\norder = three\n")


def test_convergence_warning_recorded(tmp_path):
    out = tmp_path / "out"
    cfg = _write(tmp_path, "command = solve\nkernel = constant\ngrid.max = 30\ngrid.count = 200\ntimes = 1, 3\n"
                           f"order = 6\nout_dir = {out}\n")
    assert cli.main([str(cfg)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert any("convergence" in w for w in summary["warnings"])
    header, data = _read_csv(out / "density_t3.csv")
    assert header == ["m", "c"] and data.shape == (200, 2)


def test_truncation_command(tmp_path):
    out = tmp_path / "out"
    cfg = _write(tmp_path, "command = truncation\nkernel = power_law\nalpha = 1.5\nic = exponential\n"
                           "grid.kind = geometric\ngrid.min = 1e-6\ngrid.max = 30\ngrid.count = 1000\n"
                           f"times = 10\nout_dir = {out}\n")
    assert cli.main([str(cfg)]) == 0
    header, data = _read_csv(out / "truncation.csv")
    assert ",".join(header) == "m,c_full,c_k2,c_k3,c_k12,c_k13"
    table = json.loads((out / "summary.json").read_text())["m_max_table"]
    assert table["12"]["m_max"] > table["3"]["m_max"] > table["2"]["m_max"]
    assert (out / "fragments.csv").read_text().startswith("m,k\n")


def test_scaling_and_terms_commands(tmp_path):
    out = tmp_path / "sc"
    cfg = _write(tmp_path, f"command = scaling\nkernel = power_law\nalpha = 1.5\ntimes = 10, 100, 1000\n"
                           f"grid.count = 100\nout_dir = {out}\n")
    assert cli.main([str(cfg)]) == 0
    header, _ = _read_csv(out / "scaling_t1000.csv")
    assert ",".join(header) == "z,phi_target,phi_t"
    assert json.loads((out / "summary.json").read_text())["scaling"]["monotone"] is True

    out = tmp_path / "terms"
    cfg = _write(tmp_path, f"command = terms\nkernel = sum\norder = 6\nout_dir = {out}\n", name="t.cfg")
    assert cli.main([str(cfg)]) == 0
    dump = json.loads((out / "terms.json").read_text())
    assert sorted(dump["terms"], key=int) == ["0", "1", "2", "3", "4"]
    assert json.loads((out / "summary.json").read_text())["warnings"]


def test_numerical_failure_exit_1(tmp_path):
    out = tmp_path / "out"
    cfg = _write(tmp_path, f"command = oracle\nkernel = product\ngrid.max = 100\ngrid.count = 500\n"
                           f"times = 0.99\nout_dir = {out}\n")
    assert cli.main([str(cfg)]) == 1
    assert "gel" in json.loads((out / "summary.json").read_text())["error"]


def test_override_and_module_entry(tmp_path):
    out = tmp_path / "out"
    cfg = _write(tmp_path, COMPARE, out_dir=out)
    proc = subprocess.run([sys.executable, "-m", "hpmpbe", str(cfg), "--set", "command=oracle", "--set", "times=0.5"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (out / "oracle_t0p5.csv").exists()
