from dataclasses import replace

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from oran_placer.deployment import InfeasibleError, objective_energy, validate
from oran_placer.maddpg import AgentEnsemble, MlpNet, ReplayBuffer, encode_state, soft_update
from oran_placer.milp import build_model, lp_text, parse_lp
from oran_placer.oracle import all_masks, exact_small_solve, random_small_instance
from oran_placer.rfdh import dfs_paths, rfdh_place
from oran_placer.scenario import EnergyParams, Network, generate_requests, sample_scenario

SLOW = settings(max_examples=25, deadline=None,
                suppress_health_check=[HealthCheck.function_scoped_fixture])
seeds = st.integers(0, 2 ** 31 - 1)

NET8, PARAMS = sample_scenario("sample8")


def mask_of(net, bits):
    return {u for i, u in enumerate(net.node_ids) if bits >> i & 1}


@SLOW
@given(seeds)
def test_generate_requests_is_pure(seed):
    assert generate_requests(NET8, seed) == generate_requests(NET8, seed)


@SLOW
@given(seeds, st.floats(1, 60))
def test_dfs_paths_are_simple_bounded_and_sorted(seed, budget):
    net, _, _ = random_small_instance(seed, max_nodes=5)
    src = net.node_ids[seed % len(net)]
    target = lambda u: net.capacity(u, "UPF") > 0  # noqa: E731
    paths = dfs_paths(net, src, target, budget)
    for p in paths:
        assert p[0] == src and target(p[-1]) and len(set(p)) == len(p)
        assert net.path_km(p) <= budget + 1e-9
        assert all(b in net.neighbors(a) for a, b in zip(p, p[1:]))
    keys = [(len(p), net.path_km(p), p) for p in paths]
    assert keys == sorted(keys)


@SLOW
@given(seeds, st.integers(0, 255))
def test_rfdh_respects_mask_and_validates(seed, bits):
    reqs = generate_requests(NET8, seed)
    mask = mask_of(NET8, bits)
    dep, r = rfdh_place(NET8, reqs, mask, PARAMS)
    assert dep.hosting_nodes() <= mask
    assert (r > 0) == (len(dep.placements) == len(reqs))
    assert r > 0 or r == -1
    assert validate(dep, NET8, PARAMS).ok
    if r > 0:
        assert validate(dep, NET8, PARAMS, reqs).ok
    assert rfdh_place(NET8, reqs, mask, PARAMS) == (dep, r)


def scaled(net: Network, c: float) -> Network:
    return Network(tuple(replace(m, mec_class=replace(m.mec_class,
                                                      act_power=m.mec_class.act_power * c))
                         for m in net.mecs), net.links)


@SLOW
@given(seeds, st.floats(0.1, 10))
def test_reward_is_scale_free(seed, c):
    net, reqs, params = random_small_instance(seed)
    big = scaled(net, c)
    big_params = EnergyParams(params.switch_energy_kj * c, params.chain_decrease_ratio)
    for mask in all_masks(net):
        dep, r = rfdh_place(net, reqs, set(mask), params)
        dep2, r2 = rfdh_place(big, reqs, set(mask), big_params)
        assert dep.placements == dep2.placements
        if objective_energy(dep, net, params, check=False).total_kj(0.0) > 0:
            assert r2 == pytest.approx(r, rel=1e-9)


@SLOW
@given(seeds, st.integers(0, 255), st.integers(0, 7))
def test_validate_is_monotone_in_requests(seed, bits, extra):
    reqs = generate_requests(NET8, seed)
    dep, r = rfdh_place(NET8, reqs, mask_of(NET8, bits), PARAMS)
    if validate(dep, NET8, PARAMS, reqs).ok:
        return
    more = reqs + [generate_requests(NET8, seed + 1)[extra % len(reqs)]]
    assert not validate(dep, NET8, PARAMS, more).ok


@SLOW
@given(seeds)
def test_exact_never_worse_than_heuristic(seed):
    net, reqs, params = random_small_instance(seed)
    try:
        _, best = exact_small_solve(net, reqs, params)
    except InfeasibleError:
        return
    for mask in all_masks(net):
        dep, r = rfdh_place(net, reqs, set(mask), params)
        if r > 0:
            assert objective_energy(dep, net, params).total_kj(0.0) >= best - 1e-9


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_lp_text_round_trips(seed):
    net, reqs, params = random_small_instance(seed, max_nodes=3, max_requests=2)
    m = build_model(net, reqs, params)
    assert parse_lp(lp_text(m)) == m


@SLOW
@given(seeds)
def test_state_entries_bounded(seed):
    s = encode_state(NET8, generate_requests(NET8, seed))
    assert s.shape == (40,) and np.all(np.isfinite(s)) and s.min() >= 0
    assert set(np.unique(s[:8])) <= {0.0, 1.0}


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-6, 1.0), seeds)
def test_soft_update_is_convex(tau, seed):
    rng = np.random.default_rng(seed)
    online = MlpNet.init((3, 5, 2), "linear", rng)
    target = MlpNet.init((3, 5, 2), "linear", rng)
    old = [p.copy() for p in target.params]
    soft_update(target, online, tau)
    for t, b, o in zip(target.params, old, online.params):
        assert np.all(t >= np.minimum(b, o) - 1e-12) and np.all(t <= np.maximum(b, o) + 1e-12)


_ENS = AgentEnsemble.build(NET8, hidden=(4,), rng=np.random.default_rng(0))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=8, max_size=8), st.floats(0.01, 100))
def test_decisions_depend_only_on_threshold(values, k):
    a = np.array(values)
    b = np.clip(0.5 + k * (a - 0.5), 0, 1)
    assert np.array_equal(_ENS.decisions([a[:4], a[4:]]), _ENS.decisions([b[:4], b[4:]]))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20), st.integers(0, 60))
def test_replay_keeps_the_newest(capacity, n):
    buf = ReplayBuffer(capacity, 1, 1)
    for i in range(n):
        buf.add([i], [i], float(i), [i], False)
    assert len(buf) == min(n, capacity)
    kept = sorted(buf.rewards[:len(buf)].tolist())
    assert kept == [float(i) for i in range(max(0, n - capacity), n)]
