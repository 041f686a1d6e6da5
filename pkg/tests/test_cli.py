import csv
import hashlib
import json
import subprocess
import sys

import pytest

from cshiggs.cli import main
from cshiggs.config import ConfigError, RunConfig, default_config_path, load_config

FAST = {"grid": {"R": 20.0, "n": 512}}


def write_cfg(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[-1].startswith("# config ")
    rows = list(csv.reader(lines[:-1]))
    return rows[0], rows[1:], json.loads(lines[-1][len("# config "):])


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


# -- configuration -----------------------------------------------------------

def test_default_config_matches_dataclass_defaults():
    cfg = load_config(default_config_path())
    assert cfg == RunConfig()
    assert cfg.to_dict() == json.loads(default_config_path().read_text())


def test_config_round_trip():
    cfg = RunConfig.from_dict({"params": {"e": 0.1}, "cutoff": {"T": 50}, "seed": 3})
    assert RunConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.params.e == 0.1 and cfg.T == 50.0 and cfg.grid.n == 2048


@pytest.mark.parametrize("doc,msg", [
    ({"grid": {"n": 8}}, "grid too coarse"),
    ({"grid": {"n": 100.5}}, "integer"),
    ({"params": {"e": -1}}, "positive"),
    ({"params": {"e": "x"}}, "number"),
    ({"params": {"hbar": 1}}, "unknown config key"),
    ({"colour": 1}, "unknown config key"),
    ({"output": {"formats": ["xml"]}}, "formats"),
    ({"cutoff": {"T": 0}}, "positive"),
    ({"solver": {"path_points": 2}}, "path_points"),
    ({"seed": -3}, "seed"),
    ([1, 2], "JSON object"),
])
def test_config_validation(doc, msg):
    with pytest.raises(ConfigError, match=msg):
        RunConfig.from_dict(doc)


def test_unreadable_config(tmp_path, capsys):
    assert main(["solve", "--config", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["solve", "--config", str(bad)]) == 1
    assert "config error" in capsys.readouterr().err


def test_usage_errors_exit_1(tmp_path):
    for argv in (["solve"], ["frobnicate", "--config", "x"], []):
        with pytest.raises(SystemExit) as ei:
            main(argv)
        assert ei.value.code == 1


def test_coarse_grid_exit_1(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", {"grid": {"n": 8}})
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "grid too coarse" in capsys.readouterr().err


# -- solve -------------------------------------------------------------------

def test_solve_outputs(tmp_path, capsys):
    cfg_path = tmp_path / "c.json"
    write_cfg(cfg_path, FAST)
    before = digest(cfg_path)
    out = tmp_path / "o"
    assert main(["solve", "--config", str(cfg_path), "--out", str(out)]) == 0
    assert digest(cfg_path) == before                      # input untouched
    assert "converged" in capsys.readouterr().out
    sol = json.loads((out / "solution.json").read_text())
    assert sol["converged"] and sol["residual_u"] < 1e-8 and sol["residual_n"] < 1e-8
    assert sol["k_t_at_solution"] == 1.0
    assert sol["config"]["grid"]["n"] == 512 and sol["config"]["cutoff"]["T"] == "auto"
    assert sol["config"]["output"]["directory"] == str(out)
    assert sol["T"] > sol["h1_norm"]
    for key in ("r", "u", "N", "h", "A0"):
        assert len(sol[key]) == 512
    header, rows, echo = read_csv(out / "profile.csv")
    assert header == ["r", "u", "N", "h", "A0"] and len(rows) == 512
    assert echo == sol["config"]

    # re-running from the echoed config reproduces the result
    again = tmp_path / "echo.json"
    write_cfg(again, sol["config"])
    assert main(["solve", "--config", str(again), "--quiet"]) == 0
    sol2 = json.loads((out / "solution.json").read_text())
    assert sol2["energy"] == sol["energy"] and sol2["u"] == sol["u"]


def test_solve_large_e_not_converged(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", {**FAST, "params": {"e": 10.0}})
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "not converged" in err and "nonexist" not in err.lower()
    sol = json.loads((tmp_path / "o" / "solution.json").read_text())
    assert sol["converged"] is False


def test_formats_and_quiet(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", {**FAST, "output": {"formats": ["csv"]}})
    out = tmp_path / "o"
    assert main(["fiber", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    assert capsys.readouterr().out == ""
    assert (out / "fiber.csv").exists() and not (out / "fiber.json").exists()


def test_small_screening_warns(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", {**FAST, "params": {"kappa": 0.4, "q": 1.0}})
    assert main(["fiber", "--config", cfg, "--out", str(tmp_path / "o"), "--quiet"]) == 0
    assert "enlarge grid.R" in capsys.readouterr().err


# -- verify ------------------------------------------------------------------

def test_verify_trials_zero(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", FAST)
    assert main(["verify", "--config", cfg, "--trials", "0"]) == 1
    assert "trials must be >= 1" in capsys.readouterr().err


def test_verify_outputs_and_determinism(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", {"grid": {"R": 20.0, "n": 2048}})
    out = tmp_path / "o"
    assert main(["verify", "--config", cfg, "--out", str(out), "--trials", "4", "--quiet"]) == 0
    first = (out / "checks.csv").read_bytes()
    assert main(["verify", "--config", cfg, "--out", str(out), "--trials", "4", "--quiet"]) == 0
    assert (out / "checks.csv").read_bytes() == first
    header, rows, echo = read_csv(out / "checks.csv")
    assert header == ["name", "trial", "passed", "measured", "bound_or_target", "tolerance",
                      "paper_anchor", "detail"]
    assert all(r[2] == "true" for r in rows)
    doc = json.loads((out / "checks.json").read_text())
    assert doc["trials"] == 4 and len(doc["checks"]) == len(rows)
    # a different seed changes the table
    assert main(["verify", "--config", cfg, "--out", str(out), "--trials", "4",
                 "--seed", "5", "--quiet"]) == 0
    assert (out / "checks.csv").read_bytes() != first


def test_verify_failure_exit_3(tmp_path, monkeypatch):
    from cshiggs import verify

    def boom(u, p):
        raise RuntimeError("neutral solve failed")
    monkeypatch.setattr(verify, "solve_neutral_green", boom)
    cfg = write_cfg(tmp_path / "c.json", FAST)
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "o"), "--trials", "2",
                 "--quiet"]) == 3


# -- sweep -------------------------------------------------------------------

def test_sweep_outputs_and_determinism(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", FAST)
    out = tmp_path / "o"
    argv = ["sweep", "--config", cfg, "--out", str(out), "--param", "e",
            "--from", "0.02", "--to", "0.05", "--steps", "2", "--quiet"]
    assert main(argv) == 0
    first = (out / "sweep.csv").read_bytes()
    assert main(argv) == 0
    assert (out / "sweep.csv").read_bytes() == first
    header, rows, _ = read_csv(out / "sweep.csv")
    assert header == ["e", "converged", "h1_norm", "norm_over_T", "k_t", "energy",
                      "residual_u", "residual_n", "iterations"]
    assert [float(r[0]) for r in rows] == [0.02, 0.05]
    assert all(r[1] == "true" and float(r[4]) == 1.0 for r in rows)

    # a one-row slice of the sweep equals solve at that e
    solve_cfg = write_cfg(tmp_path / "s.json", {**FAST, "params": {"e": 0.05}})
    assert main(["solve", "--config", solve_cfg, "--out", str(out), "--quiet"]) == 0
    sol = json.loads((out / "solution.json").read_text())
    assert float(rows[1][5]) == sol["energy"]["total"]
    assert float(rows[1][2]) == sol["h1_norm"]


@pytest.mark.parametrize("extra", [["--from", "0.5", "--to", "0.1", "--steps", "3"],
                                   ["--from", "0", "--to", "0.1", "--steps", "3"],
                                   ["--from", "0.1", "--to", "0.2", "--steps", "1"]])
def test_sweep_bad_range(tmp_path, extra):
    cfg = write_cfg(tmp_path / "c.json", FAST)
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "o")] + extra) == 1


def test_sweep_nothing_converges(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", FAST)
    argv = ["sweep", "--config", cfg, "--out", str(tmp_path / "o"), "--from", "10",
            "--to", "20", "--steps", "2", "--quiet"]
    assert main(argv) == 2
    _, rows, _ = read_csv(tmp_path / "o" / "sweep.csv")
    assert all(r[1] == "false" for r in rows)


# -- fiber -------------------------------------------------------------------

def test_fiber(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", {**FAST, "cutoff": {"T": 20.0}})
    out = tmp_path / "o"
    assert main(["fiber", "--config", cfg, "--out", str(out), "--tmax", "400",
                 "--samples", "41", "--quiet"]) == 0
    header, rows, _ = read_csv(out / "fiber.csv")
    assert header == ["t", "J", "t2_term", "t4_term", "t6_term"] and len(rows) == 41
    vals = [[float(x) for x in r] for r in rows]
    assert vals[0][0] == 0.0 and vals[0][1] == 0.0
    assert vals[1][1] > 0 and vals[-1][1] < 0
    doc = json.loads((out / "fiber.json").read_text())
    n2 = doc["direction"]["h1_norm"] ** 2
    beyond = [v for v in vals if v[0] ** 2 * n2 >= 2 * 20.0 ** 2]
    assert beyond and all(v[4] == 0.0 for v in beyond)
    for t, J, a, b, c in vals:
        assert abs(J - (a + b + c)) <= 1e-12 * max(1.0, abs(J))


def test_fiber_bad_args(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", FAST)
    assert main(["fiber", "--config", cfg, "--samples", "4"]) == 1
    assert main(["fiber", "--config", cfg, "--tmax", "-1"]) == 1


def test_module_entry_point(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", FAST)
    r = subprocess.run([sys.executable, "-m", "cshiggs", "fiber", "--config", cfg,
                        "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert r.returncode == 0 and "fiber:" in r.stdout
