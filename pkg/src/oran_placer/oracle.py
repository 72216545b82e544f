"""Exhaustive ground truth for small instances.

:func:`exact_small_solve` is an exact solver for networks of a handful of nodes;
:func:`best_rfdh_activation` sweeps every activation subset through the
restricted heuristic and keeps the cheapest fully served outcome.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .deployment import Deployment, InfeasibleError, Placement, objective_energy, validate
from .resources import ResourceLedger
from .rfdh import candidate_placements, rfdh_place
from .scenario import DEFAULT_CLASSES, EnergyParams, Link, Mec, Network, RequestSet

EXACT_MAX_NODES = 5
EXACT_MAX_REQUESTS = 3
SWEEP_MAX_NODES = 16
_EPS = 1e-9


class OracleSizeError(ValueError):
    """Instance exceeds an oracle's size guard."""


def _activation_vector(network: Network, nodes) -> tuple[int, ...]:
    return tuple(int(u in nodes) for u in network.node_ids)


def exact_small_solve(network: Network, requests: Sequence[RequestSet],
                      params: EnergyParams) -> tuple[Deployment, float]:
    """Minimum-energy deployment by exhaustive search.

    Host triples are enumerated in order of objective (ties: lexicographically
    smallest activation vector); for each, path choices are searched against the
    shared capacities, and the first combination that fits is optimal.
    """
    if len(network) > EXACT_MAX_NODES or len(requests) > EXACT_MAX_REQUESTS:
        raise OracleSizeError(f"exact oracle handles at most {EXACT_MAX_NODES} nodes and "
                              f"{EXACT_MAX_REQUESTS} requests (got {len(network)}, "
                              f"{len(requests)})")
    pre = network.pre_activated
    if not requests:
        return Deployment(pre), 0.0

    per_request = []
    for k, r in enumerate(requests):
        by_hosts: dict[tuple[int, int, int], list[Placement]] = {}
        for cand in candidate_placements(network, r):
            by_hosts.setdefault(cand.hosts, []).append(cand)
        if not by_hosts:
            raise InfeasibleError(f"request {k} (source {r.source}) has no candidate placement")
        per_request.append(sorted(by_hosts.items()))

    def key(combo):
        awake = pre.union(*(h for h, _ in combo))
        act = sum(network.act_energy_kj(u) for u in sorted(awake - pre))
        sw = sum(int(h[0] != h[1]) + int(h[1] != h[2]) for h, _ in combo)
        return (round(act + sw * params.switch_energy_kj, 9), _activation_vector(network, awake),
                tuple(h for h, _ in combo))

    ledger = ResourceLedger(network, params)
    for combo in sorted(itertools.product(*per_request), key=key):
        chosen = _fit_paths(ledger, [paths for _, paths in combo])
        if chosen is None:
            continue
        awake = pre.union(*(p.hosts for p in chosen))
        dep = Deployment(frozenset(awake), tuple(chosen))
        result = validate(dep, network, params, requests)
        if not result.ok:  # the ledger mirrors the validator, so this is a bug
            raise AssertionError(f"oracle produced an invalid deployment: {result.violations}")
        return dep, objective_energy(dep, network, params).total_kj(0.0)
    raise InfeasibleError("no combination of placements serves every request")


def _fit_paths(ledger: ResourceLedger, options: list[list[Placement]]) -> list[Placement] | None:
    chosen: list[Placement] = []

    def search(k: int) -> bool:
        if k == len(options):
            return True
        for cand in options[k]:
            if ledger.fits(cand):
                ledger.commit(cand)
                chosen.append(cand)
                if search(k + 1):
                    return True
                chosen.pop()
                ledger.release(cand)
        return False

    found = search(0)
    for p in chosen:
        ledger.release(p)
    return list(chosen) if found else None


# -- activation sweep --------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    mask: tuple[int, ...]
    served: bool
    objective_kj: float | None
    reward: float


def _sweep_chunk(args) -> list[tuple]:
    network, requests, params, masks = args
    rows = []
    for mask in masks:
        dep, reward = rfdh_place(network, requests, mask, params)
        kj = objective_energy(dep, network, params, check=False).total_kj(0.0) if reward > 0 else None
        rows.append((tuple(mask), reward > 0, kj, reward))
    return rows


def all_masks(network: Network) -> list[tuple[int, ...]]:
    nodes = network.node_ids
    return [tuple(u for b, u in enumerate(nodes) if bits >> b & 1)
            for bits in range(1 << len(nodes))]


def rfdh_sweep(network: Network, requests: Sequence[RequestSet], params: EnergyParams,
               workers: int | None = None) -> list[SweepRow]:
    """Heuristic outcome for every subset of nodes, in bitmask order."""
    if len(network) > SWEEP_MAX_NODES:
        raise OracleSizeError(f"activation sweep handles at most {SWEEP_MAX_NODES} nodes "
                              f"(got {len(network)})")
    masks = all_masks(network)
    workers = max(1, int(workers or 1))
    if workers == 1:
        raw = _sweep_chunk((network, tuple(requests), params, masks))
    else:
        chunks = [masks[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_sweep_chunk, [(network, tuple(requests), params, c)
                                                 for c in chunks]))
        order = {m: i for i, m in enumerate(masks)}
        raw = sorted((row for part in parts for row in part), key=lambda row: order[row[0]])
    return [SweepRow(*row) for row in raw]


def best_rfdh_activation(network: Network, requests: Sequence[RequestSet], params: EnergyParams,
                         workers: int | None = None,
                         rows: Sequence[SweepRow] | None = None) -> tuple[Deployment, float]:
    """Cheapest fully served heuristic deployment over all activation subsets.

    Ties go to the lexicographically smallest activation vector.
    """
    rows = rows if rows is not None else rfdh_sweep(network, requests, params, workers)
    served = [r for r in rows if r.served]
    if not served:
        raise InfeasibleError("no activation subset lets the heuristic serve every request")
    pre = network.pre_activated
    best = min(served, key=lambda r: (round(r.objective_kj, 9),
                                      _activation_vector(network, set(r.mask) | pre)))
    dep, _ = rfdh_place(network, requests, best.mask, params)
    return dep, best.objective_kj


# -- random small instances ----------------------------------------------------------

def random_small_instance(seed: int, max_nodes: int = 4, max_requests: int = 3,
                          min_nodes: int = 2) -> tuple[Network, list[RequestSet], EnergyParams]:
    """Random connected network with tight-ish capacities plus a request batch.

    Capacities, bandwidths and budgets are drawn so that sharing, distance and
    capacity limits all bind on a fair share of instances.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(min_nodes, max_nodes + 1))
    mecs = []
    for u in range(1, n + 1):
        cid = ("M1", "M2", "M3")[int(rng.integers(0, 3))]
        if u == 1 and cid == "M1":
            cid = "M2"  # at least one UPF-capable node
        base = DEFAULT_CLASSES[cid]
        scale = float(rng.choice([0.4, 0.6, 1.0]))
        cls = replace(base, du_capacity=round(base.du_capacity * scale),
                      cu_capacity=round(base.cu_capacity * scale),
                      upf_capacity=round(base.upf_capacity * scale))
        mecs.append(Mec(u, cls, bool(rng.random() < 0.2)))
    links = []
    for u in range(2, n + 1):
        links.append((int(rng.integers(1, u)), u))
    for a in range(1, n + 1):
        for b in range(a + 1, n + 1):
            if (a, b) not in links and (b, a) not in links and rng.random() < 0.3:
                links.append((a, b))
    link_objs = tuple(Link(a, b, float(rng.integers(3, 13)), float(rng.choice([15, 25, 50])))
                      for a, b in links)
    network = Network(tuple(mecs), link_objs)
    requests = []
    for _ in range(int(rng.integers(1, max_requests + 1))):
        s = int(rng.integers(1, n + 1))
        e2e = int(rng.integers(10, 36))
        fh = min(int(rng.integers(4, 20)), e2e)
        data = int(rng.integers(8, 13))
        requests.append(RequestSet(s, fh, e2e, data, data, int(rng.integers(3, 6))))
    return network, requests, EnergyParams()
