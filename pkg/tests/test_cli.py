import csv
import io
import json
from pathlib import Path

import pytest

from pardiqkd import cli
from pardiqkd import entropy as en

GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_keyrate_defaults_report(capsys):
    code, out, _ = run(capsys, "keyrate")
    assert code == 0
    rep = json.loads(out)
    for k in ("t", "eps", "mu", "mu_prime", "eat_bound", "hmax_removed", "test_leak", "leak_ir",
              "key_length", "rate", "security_eps", "vn_proxy_rate", "status"):
        assert k in rep
    assert rep["params"]["n"] == 10**303


def test_keyrate_golden(capsys):
    _, out, _ = run(capsys, "keyrate")
    assert out == (GOLDEN / "keyrate_default.json").read_text(encoding="utf-8")


def test_keyrate_zero_constants_is_prefactor_only(capsys):
    code, out, _ = run(capsys, "keyrate", "--constants", "0,0,0")
    rep = json.loads(out)
    assert code == 0
    assert rep["eps"] == 0 and rep["mu"] == 0 and rep["mu_loss"] == 0
    t = rep["t"]
    assert rep["eat_bound"] == pytest.approx(t * rep["h_tradeoff"])


@pytest.mark.parametrize("argv", [
    ("keyrate", "--omega-th", "0.5"),
    ("keyrate", "--n", "abc"),
    ("keyrate", "--constants", "1,2"),
    ("keyrate", "--format", "xml"),
    ("simulate", "--n", "20"),
    ("verify", "--n", "4"),
    ("entropy-table", "--points", "0"),
    ("optimize", "--alphas", ""),
    ("nosuchcommand",),
])
def test_invalid_input_exit_2(capsys, argv):
    code, _, _ = run(capsys, *argv)
    assert code == 2


def test_infeasible_exit_3(capsys):
    assert run(capsys, "keyrate", "--n", "100000", "--delta", "0.1")[0] == 3
    assert run(capsys, "optimize", "--n", "1000")[0] == 3


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alpha": 0.02, "gamma": 0.25}))
    _, out, _ = run(capsys, "keyrate", "--config", str(cfg), "--gamma", "0.1")
    p = json.loads(out)["params"]
    assert p["alpha"] == 0.02 and p["gamma"] == 0.1 and p["nu"] == 0.05


def test_resolve_config_layers():
    cfg = cli.resolve_config("entropy-table", {"points": 7, "alpha": 0.02}, {"points": "9"})
    assert cfg["points"] == 9 and cfg["alpha"] == 0.02 and cfg["nu"] == 0.05
    with pytest.raises(cli.ConfigError):
        cli.resolve_config("entropy-table", {"bogus": 1}, {})
    with pytest.raises(cli.ConfigError):
        cli.resolve_config("keyrate", {"n": 1.5}, {})


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alhpa": 0.02}))
    assert run(capsys, "keyrate", "--config", str(cfg))[0] == 2
    cfg.write_text("[1, 2]")
    assert run(capsys, "keyrate", "--config", str(cfg))[0] == 2
    cfg.write_text("{not json")
    assert run(capsys, "keyrate", "--config", str(cfg))[0] == 2


def test_entropy_table_endpoints_and_monotone(capsys):
    code, out, _ = run(capsys, "entropy-table", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["omega", "g", "F", "bound", "tangent"]
    assert len(rows) == 50
    bounds = [float(r["bound"]) for r in rows]
    assert bounds[0] == pytest.approx(0.0, abs=1e-12)
    assert bounds[-1] == pytest.approx(0.95, abs=1e-9)
    assert all(b2 >= b1 for b1, b2 in zip(bounds, bounds[1:]))
    assert all(float(r["tangent"]) <= float(r["bound"]) + 1e-12 for r in rows)


def test_entropy_table_golden(capsys):
    _, out, _ = run(capsys, "entropy-table", "--format", "csv", "--points", "6")
    assert out == (GOLDEN / "entropy_table_6.csv").read_text(encoding="utf-8")


def test_simulate_golden_and_files(tmp_path, capsys):
    _, out, _ = run(capsys, "simulate", "--n", "1000", "--trials", "2", "--seed", "3")
    assert out == (GOLDEN / "simulate_n1000_seed3.json").read_text(encoding="utf-8")
    f1, f2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for f in (f1, f2):
        run(capsys, "simulate", "--n", "1000", "--trials", "2", "--seed", "3", "--transcripts", str(f))
    assert f1.read_bytes() == f2.read_bytes()
    lines = f1.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2 and json.loads(lines[0])["final_key_hex"] is not None


def test_simulate_win_fraction_gamma_one(capsys):
    _, out, _ = run(capsys, "simulate", "--n", "5000", "--trials", "20", "--gamma", "1",
                    "--postprocess", "false")
    rep = json.loads(out)
    w = rep["win_probability"]
    size = 20 * rep["t"]
    sigma = (w * (1 - w) / size) ** 0.5
    assert abs(rep["win_fraction_on_s"] - w) < 3 * sigma


def test_out_flag(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert run(capsys, "keyrate", "--out", str(out))[0] == 0
    assert json.loads(out.read_text())["status"] == "ok"


def test_optimize_small_grid(capsys):
    code, out, _ = run(capsys, "optimize", "--target-security", "2", "--deltas", "1e-300",
                       "--alphas", "0.001", "--nus", "0.001,0.01", "--gammas", "0.001",
                       "--omega-fracs", "0.99", "--delta1s", "0.001")
    assert code == 0
    rep = json.loads(out)
    assert rep["feasible"] and rep["best"]["security_eps"] <= 2


def test_optimize_csv(capsys):
    code, out, _ = run(capsys, "optimize", "--target-security", "2", "--deltas", "1e-300",
                       "--alphas", "0.001", "--nus", "0.001", "--gammas", "0.001,0.01",
                       "--omega-fracs", "0.99", "--delta1s", "0.001", "--format", "csv")
    assert code == 0
    assert out.splitlines()[0].startswith("n,delta,alpha")


def test_verify_default_passes(capsys):
    code, out, _ = run(capsys, "verify", "--strategies", "3")
    rep = json.loads(out)
    assert code == 0 and rep["failed"] == []


def test_verify_broken_povm_fails(capsys):
    code, out, _ = run(capsys, "verify", "--strategies", "1", "--perturb-povm", "0.1")
    assert code == 1
    assert "povm_completeness" in json.loads(out)["failed"]


def test_verify_game_file(tmp_path, capsys):
    from pardiqkd import games as g
    f = tmp_path / "g.txt"
    f.write_text(g.game_to_text(g.chsh2_spec()), encoding="utf-8")
    code, out, _ = run(capsys, "verify", "--strategies", "2", "--game-file", str(f))
    assert code == 0
    assert run(capsys, "verify", "--game-file", str(tmp_path / "missing.txt"))[0] == 2


def test_entropy_table_function_matches_library():
    rows = cli.entropy_table(0.05, 0.05, 0.5, None, 5)
    for r in rows:
        assert r["bound"] == pytest.approx(en.single_round_bound(r["omega"], 0.05, 0.05))
