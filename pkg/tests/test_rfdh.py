from dataclasses import replace

import numpy as np
import pytest

from oran_placer.deployment import Deployment, Placement, UnknownNodeError, validate
from oran_placer.rfdh import PENALTY, dfs_paths, reward, rfdh_place
from oran_placer.scenario import (DEFAULT_CLASSES, Link, Mec, Network, fixture_F,
                                  generate_requests)

from conftest import make_network, req


@pytest.fixture
def triangle():
    # s=1, mid=2, t=3
    return make_network(["M2", "M2", "M2"], [(1, 2, 10), (2, 3, 10), (1, 3, 25)])


def test_dfs_respects_budget(triangle):
    assert dfs_paths(triangle, 1, lambda u: u == 3, 21) == [(1, 2, 3)]
    assert dfs_paths(triangle, 1, lambda u: u == 3, 40) == [(1, 3), (1, 2, 3)]


def test_dfs_zero_budget_gives_trivial_path(triangle):
    assert dfs_paths(triangle, 1, lambda u: True, 0) == [(1,)]
    assert dfs_paths(triangle, 1, lambda u: u == 2, 0) == []


def test_dfs_unreachable_target_is_empty(triangle):
    assert dfs_paths(triangle, 1, lambda u: u == 99, 100) == []


def test_dfs_sort_order(triangle):
    paths = dfs_paths(triangle, 1, lambda u: True, 100)
    keys = [(len(p), triangle.path_km(p), p) for p in paths]
    assert keys == sorted(keys)
    assert all(len(set(p)) == len(p) for p in paths)


def test_dfs_unknown_source(triangle):
    with pytest.raises(UnknownNodeError):
        dfs_paths(triangle, 42, lambda u: True, 10)


def test_most_constrained_request_gets_the_contended_upf(params):
    small = replace(DEFAULT_CLASSES["M3"], upf_capacity=5)
    a, b = Mec(1, small), Mec(2, DEFAULT_CLASSES["M3"])
    c, d, e = (Mec(u, DEFAULT_CLASSES["M1"]) for u in (3, 4, 5))
    links = (Link(3, 1, 10, 50), Link(4, 1, 10, 50), Link(4, 2, 10, 50), Link(5, 1, 10, 50),
             Link(5, 2, 10, 50), Link(1, 2, 30, 50))
    net = Network((a, b, c, d, e), links)
    reqs = [req(4, fh=10, e2e=15), req(5, fh=10, e2e=15), req(3, fh=10, e2e=15)]
    dep, r = rfdh_place(net, reqs, {1, 2}, params)
    assert r > 0
    upf = {p.source: p.upf_node for p in dep.placements}
    assert upf[3] == 1 and upf[4] == 2 and upf[5] == 2


def test_empty_mask_is_penalised(sample8, params):
    net, _ = sample8
    dep, r = rfdh_place(net, fixture_F(), set(), params)
    assert r == PENALTY == -1
    assert dep.info["unserved"] == list(range(8))


def test_pre_activated_nodes_join_the_mask(params):
    net = make_network(["M3", "M1"], [(1, 2, 5)], pre=(1,))
    dep, r = rfdh_place(net, [req(1), req(2)], set(), params)
    assert r > 0 and dep.activations == {1}


def test_full_mask_serves_fixture_f(sample8, params):
    net, _ = sample8
    dep, r = rfdh_place(net, fixture_F(), net.node_ids, params)
    assert r > 0
    assert validate(dep, net, params, fixture_F()).ok


def test_all_activated_reward_is_one(sample8, params):
    net, _ = sample8
    dep, _ = rfdh_place(net, fixture_F(), net.node_ids, params)
    w1_dep = Deployment(frozenset(net.node_ids), dep.placements)
    assert reward(w1_dep, net, params) == 1.0


def test_reward_arithmetic_one_m2_one_switch(sample8, params):
    # reward scores without re-validating; only the energy terms matter here
    net, _ = sample8
    m2 = next(u for u in net.node_ids if net.mec(u).mec_class.class_id == "M2")
    other = next(u for u in net.neighbors(m2))
    dep = Deployment({m2}, (Placement(req(m2), m2, m2, other, (m2, other)),))
    w2 = sum(net.act_energy_kj(u) for u in net.node_ids)
    assert w2 == 117
    assert reward(dep, net, params) == pytest.approx(117.5 / 15.5)
    assert reward(dep, net, params) == pytest.approx(7.58, abs=5e-3)


def test_reward_floor_when_nothing_is_spent(params):
    net = make_network(["M3", "M1"], [(1, 2, 5)], pre=(1,))
    dep, r = rfdh_place(net, [req(1)], set(), params)
    assert dep.placements[0].switch_count == 0
    assert r == pytest.approx(10 / 1e-3)


def test_mask_outside_network_rejected(sample8, params):
    net, _ = sample8
    with pytest.raises(UnknownNodeError):
        rfdh_place(net, fixture_F(), {99}, params)


def test_never_leaves_the_mask_and_validates(sample8, params):
    net, _ = sample8
    rng = np.random.default_rng(3)
    for _ in range(100):
        mask = {u for u in net.node_ids if rng.random() < 0.5}
        reqs = generate_requests(net, int(rng.integers(1 << 30)))
        dep, r = rfdh_place(net, reqs, mask, params)
        assert dep.hosting_nodes() <= mask | net.pre_activated
        assert (r > 0) == (not dep.info["unserved"])
        assert validate(dep, net, params).ok
        if r > 0:
            assert validate(dep, net, params, reqs).ok


def test_deterministic(sample14, params):
    net, _ = sample14
    reqs = generate_requests(net, 4)
    assert rfdh_place(net, reqs, net.node_ids, params) == rfdh_place(net, reqs, net.node_ids,
                                                                     params)


def test_unserved_requests_do_not_stop_the_others(params):
    # request from 2 cannot reach any UPF host inside its budget
    net = make_network(["M3", "M1"], [(1, 2, 30)])
    dep, r = rfdh_place(net, [req(1), req(2, fh=10, e2e=20)], {1, 2}, params)
    assert r == -1
    assert len(dep.placements) == 1 and dep.info["unserved"] == [1]
