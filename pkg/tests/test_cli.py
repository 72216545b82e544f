import csv
import json
import subprocess
import sys

import pytest

from oran_placer.cli import main
from oran_placer.milp import build_model, encode_deployment, write_solution
from oran_placer.oracle import exact_small_solve
from oran_placer.scenario import EnergyParams, save_requests, save_scenario

from conftest import make_network, req


@pytest.fixture
def tiny(tmp_path):
    net = make_network(["M1", "M2", "M3"], [(1, 2, 6), (2, 3, 6)])
    reqs = [req(1, fh=10, e2e=20), req(3, fh=10, e2e=20)]
    scen, rq = tmp_path / "tiny.json", tmp_path / "req.json"
    save_scenario(net, EnergyParams(), scen)
    save_requests(reqs, rq)
    return net, reqs, str(scen), str(rq)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_compare_writes_results_and_echo(tmp_path, capsys):
    out = tmp_path / "cmp.csv"
    assert main(["compare", "--random", "2", "--seed", "3", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert {r["strategy"] for r in rows} == {"PMD", "RA", "GHP", "ASM"}
    assert (tmp_path / "cmp.curve.csv").exists()
    assert (tmp_path / "cmp.deployments.json").exists()
    echo = json.loads((tmp_path / "cmp.csv.config.json").read_text())
    assert echo["command"] == "compare" and echo["settings"]["seed"] == 3


def test_compare_explicit_drl_without_checkpoint_is_usage_error(tmp_path):
    assert main(["compare", "--fixture", "F", "--strategies", "DRL,PMD",
                 "--out", str(tmp_path / "x.csv")]) == 1


def test_compare_needs_requests(tmp_path):
    assert main(["compare", "--out", str(tmp_path / "x.csv")]) == 1


def test_bad_scenario_path(tmp_path):
    assert main(["compare", "--scenario", str(tmp_path / "nope.json"), "--fixture", "F",
                 "--out", str(tmp_path / "x.csv")]) == 1


def test_train_then_compare_with_drl(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"hidden": [8, 8], "batch_size": 4, "steps_per_episode": 2}))
    ck = tmp_path / "ck.json"
    assert main(["train", "--config", str(cfg), "--episodes", "3", "--seed", "1",
                 "--out", str(ck)]) == 0
    hist = read_csv(tmp_path / "ck.history.csv")
    assert len(hist) == 6 and set(hist[0]) == {"episode", "step", "reward"}
    out = tmp_path / "c.csv"
    assert main(["compare", "--fixture", "F", "--checkpoint", str(ck), "--out", str(out)]) == 0
    assert {r["strategy"] for r in read_csv(out)} >= {"DRL", "ASM"}


def test_corrupt_checkpoint_exit_code(tmp_path):
    ck = tmp_path / "bad.json"
    ck.write_text("{")
    assert main(["compare", "--fixture", "F", "--checkpoint", str(ck),
                 "--out", str(tmp_path / "x.csv")]) == 3


def test_checkpoint_for_other_network(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"hidden": [4], "batch_size": 2, "steps_per_episode": 1}))
    ck = tmp_path / "ck.json"
    assert main(["train", "--config", str(cfg), "--episodes", "1", "--out", str(ck)]) == 0
    assert main(["compare", "--scenario", "sample14", "--fixture", "T", "--checkpoint", str(ck),
                 "--out", str(tmp_path / "x.csv")]) == 3


def test_export_and_check_solution(tiny, tmp_path, capsys):
    net, reqs, scen, rq = tiny
    lp = tmp_path / "m.lp"
    assert main(["export-milp", "--scenario", scen, "--requests", rq, "--out", str(lp)]) == 0
    assert lp.read_text().startswith("\\ oran-placer model")
    dep, kj = exact_small_solve(net, reqs, EnergyParams())
    values = encode_deployment(build_model(net, reqs, EnergyParams()), dep)
    sol = write_solution(values, tmp_path / "s.txt", "from the exhaustive oracle")
    capsys.readouterr()
    assert main(["check-solution", "--scenario", scen, "--requests", rq, "--solution", str(sol),
                 "--lp", str(lp)]) == 0
    text = capsys.readouterr().out
    assert "verdict: optimal-feasible" in text
    assert f"objective_kj: {kj!r}" in text and "family slack minima:" in text

    host = sorted(dep.activations)[0]
    values[f"beta.n{host}"] = 0.0
    write_solution(values, sol)
    assert main(["check-solution", "--scenario", scen, "--requests", rq,
                 "--solution", str(sol)]) == 3
    text = capsys.readouterr().out
    assert "verdict: infeasible" in text and "activation" in text.split("violated:")[1]


def test_check_solution_against_wrong_lp(tiny, tmp_path):
    net, reqs, scen, rq = tiny
    lp = tmp_path / "m.lp"
    main(["export-milp", "--scenario", scen, "--requests", rq, "--big-m", "999", "--out", str(lp)])
    sol = tmp_path / "s.txt"
    sol.write_text("beta.n1 1\n")
    assert main(["check-solution", "--scenario", scen, "--requests", rq, "--solution", str(sol),
                 "--lp", str(lp)]) == 3


def test_oracle_sweep_and_exact(tiny, tmp_path):
    net, reqs, scen, rq = tiny
    out = tmp_path / "o.csv"
    assert main(["oracle", "--scenario", scen, "--requests", rq, "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 9 and rows[-1]["kind"] == "best"
    ex = tmp_path / "e.csv"
    assert main(["oracle", "--scenario", scen, "--requests", rq, "--exact", "--out", str(ex)]) == 0
    assert float(read_csv(ex)[0]["objective_kj"]) <= float(rows[-1]["objective_kj"])


def test_oracle_empty_requests(tmp_path):
    rq = tmp_path / "empty.json"
    rq.write_text("[]")
    out = tmp_path / "o.csv"
    assert main(["oracle", "--requests", str(rq), "--out", str(out)]) == 0
    best = read_csv(out)[-1]
    assert best["mask"] == "" and float(best["objective_kj"]) == 0


def test_oracle_size_guard(tmp_path):
    net = make_network(["M2"] * 17, [(u, u + 1, 1) for u in range(1, 17)])
    scen = tmp_path / "big.json"
    save_scenario(net, EnergyParams(), scen)
    rq = tmp_path / "r.json"
    save_requests([req(1)], rq)
    assert main(["oracle", "--scenario", str(scen), "--requests", str(rq),
                 "--out", str(tmp_path / "o.csv")]) == 4
    assert main(["oracle", "--scenario", str(scen), "--requests", str(rq), "--exact",
                 "--out", str(tmp_path / "o.csv")]) == 4


def test_oracle_infeasible_exit(tmp_path):
    net = make_network(["M1", "M2"], [(1, 2, 30)])
    scen = tmp_path / "s.json"
    save_scenario(net, EnergyParams(), scen)
    rq = tmp_path / "r.json"
    save_requests([req(1, fh=10, e2e=20)], rq)
    assert main(["oracle", "--scenario", str(scen), "--requests", str(rq),
                 "--out", str(tmp_path / "o.csv")]) == 2
    assert main(["oracle", "--scenario", str(scen), "--requests", str(rq), "--exact",
                 "--out", str(tmp_path / "e.csv")]) == 2


def test_fixed_seed_is_byte_identical(tmp_path):
    for tag in ("a", "b"):
        assert main(["compare", "--random", "3", "--seed", "7", "--workers", "2",
                     "--out", str(tmp_path / f"{tag}.csv")]) == 0
    for suffix in (".csv", ".curve.csv", ".deployments.json"):
        assert (tmp_path / f"a{suffix}").read_bytes() == (tmp_path / f"b{suffix}").read_bytes()


def test_console_script_usage_error():
    proc = subprocess.run([sys.executable, "-m", "oran_placer.cli", "bogus"],
                          capture_output=True, text=True)
    assert proc.returncode == 1 and "invalid choice" in proc.stderr
    proc = subprocess.run([sys.executable, "-m", "oran_placer.cli", "oracle", "--fixture", "F"],
                          capture_output=True, text=True)
    assert proc.returncode == 1 and "--out" in proc.stderr
