import csv
import io
import json

import numpy as np
import pytest

from oran_placer import harness
from oran_placer.deployment import deployment_from_dict, objective_energy, validate
from oran_placer.maddpg import AgentEnsemble
from oran_placer.scenario import RequestSet


@pytest.fixture(scope="module")
def batches(sample8):
    return harness.random_batches(sample8[0], 4, 5)


@pytest.fixture(scope="module")
def ensemble(sample8):
    return AgentEnsemble.build(sample8[0], hidden=(8, 8), rng=np.random.default_rng(0))


@pytest.fixture(scope="module")
def cmp(sample8, batches, ensemble):
    net, params = sample8
    return harness.compare(net, params, batches, harness.STRATEGY_ORDER, ensemble, seed=1)


def test_worker_count_cap(monkeypatch):
    monkeypatch.setenv(harness.THREADS_ENV, "2")
    assert harness.worker_count(8) == 2
    assert harness.worker_count(1) == 1
    monkeypatch.setenv(harness.THREADS_ENV, "x")
    with pytest.raises(ValueError):
        harness.worker_count(4)
    monkeypatch.delenv(harness.THREADS_ENV)
    assert harness.worker_count(3) == 3


def test_random_batches_are_seeded(sample8):
    net, _ = sample8
    a = harness.random_batches(net, 3, 9)
    assert a == harness.random_batches(net, 3, 9)
    assert a != harness.random_batches(net, 3, 10)
    assert harness.random_batches(net, 5, 9)[:3] == a


def test_outcomes_ordered_by_strategy_then_batch(cmp, batches):
    keys = [(o.strategy, o.batch) for o in cmp.outcomes]
    assert keys == [(s, b) for s in harness.STRATEGY_ORDER for b in range(len(batches))]
    assert cmp.reference == "DRL"


def test_all_outcomes_validate(cmp, sample8, batches):
    net, params = sample8
    for o in cmp.outcomes:
        if o.served:
            assert validate(o.deployment, net, params, batches[o.batch]).ok


def test_saving_and_crossover(cmp, sample8):
    net, params = sample8
    for b in range(cmp.n_batches):
        drl, asm = cmp.get("DRL", b), cmp.get("ASM", b)
        assert asm.report.idle_power_kw == pytest.approx(1.21)
        total_asm = asm.report.total_kj(150)
        assert cmp.saving_pct("ASM", b) == pytest.approx(
            100 * (total_asm - drl.report.total_kj(150)) / total_asm)
        t = cmp.crossover_s(b)
        if t is not None:
            assert asm.report.total_kj(t) == pytest.approx(drl.report.total_kj(t))
    assert cmp.saving_pct("DRL", 0) is None


def test_drl_requires_ensemble(sample8, batches):
    net, params = sample8
    with pytest.raises(harness.MissingCheckpointError):
        harness.compare(net, params, batches, ["DRL"])


def test_unknown_strategy(sample8, batches):
    net, params = sample8
    with pytest.raises(ValueError, match="unknown"):
        harness.compare(net, params, batches, ["PMD", "XYZ"])


def test_infeasible_runs_are_flagged(params):
    from conftest import make_network, req
    net = make_network(["M1", "M2"], [(1, 2, 30)])
    out = harness.compare(net, params, [[req(1, fh=10, e2e=20)]], ["PMD", "ASM"])
    assert all(not o.served and o.note.startswith("infeasible") for o in out.outcomes)
    rows = harness.comparison_rows(out)
    assert rows[-1][3] == "0/1"


def test_parallel_matches_serial(sample8, batches, ensemble):
    net, params = sample8
    serial = harness.compare(net, params, batches, ["DRL", "RA", "PMD"], ensemble, seed=4)
    par = harness.compare(net, params, batches, ["DRL", "RA", "PMD"], ensemble, seed=4, workers=3)
    hdr = harness.COMPARE_HEADER
    assert harness.csv_text(hdr, harness.comparison_rows(serial)) == \
        harness.csv_text(hdr, harness.comparison_rows(par))


def test_csv_rows_rebuild_from_deployments(cmp, sample8, batches):
    net, params = sample8
    text = harness.csv_text(harness.COMPARE_HEADER, harness.comparison_rows(cmp))
    rows = [r for r in csv.DictReader(io.StringIO(text)) if r["kind"] == "batch"]
    doc = json.loads(json.dumps(harness.deployments_doc(cmp, batches)))
    reqs = [[RequestSet.from_dict(r) for r in b] for b in doc["batches"]]
    for res in doc["results"]:
        dep = deployment_from_dict(res["deployment"], reqs[res["batch"]])
        assert validate(dep, net, params, reqs[res["batch"]]).ok
        row = next(r for r in rows if r["strategy"] == res["strategy"]
                   and int(r["batch"]) == res["batch"])
        total = objective_energy(dep, net, params).total_kj(150)
        assert float(row["total_kj_horizon"]) == pytest.approx(total, abs=1e-8)


def test_summary_rows(cmp):
    rows = harness.comparison_rows(cmp)
    summary = [r for r in rows if r[0] == "summary"]
    assert [r[1] for r in summary] == list(harness.STRATEGY_ORDER)


def test_curve_rows(cmp, sample8):
    net, params = sample8
    header, rows = harness.curve_rows(cmp, net, params, 50.0)
    assert header == ("t_s",) + harness.STRATEGY_ORDER
    assert [r[0] for r in rows] == [0.0, 50.0, 100.0, 150.0]
    asm = header.index("ASM")
    assert rows[1][asm] - rows[0][asm] == pytest.approx(1.21 * 50)


def test_float_format_round_trips():
    assert harness._fmt(0.1 + 0.2) == "0.3"
    assert harness._fmt(1.0) == "1.0" and harness._fmt(0.0) == "0"
    assert harness._fmt(None) == "" and harness._fmt(True) == "1"


def test_config_echo(tmp_path):
    out = tmp_path / "r.csv"
    path = harness.write_config_echo(out, "compare", {"seed": 3})
    assert path.name == "r.csv.config.json"
    doc = json.loads(path.read_text())
    assert doc["command"] == "compare" and doc["settings"] == {"seed": 3}


def test_train_preset():
    assert harness.train_preset("sample8").groups == ((1, 2, 3, 4), (5, 6, 7, 8))
    assert len(harness.train_preset("sample14").groups) == 3
    with pytest.raises(ValueError):
        harness.train_preset("other")
