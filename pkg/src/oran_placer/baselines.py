"""Comparison strategies: keep-all-awake, greedy, random-feasible and pre-activation-first.

Every strategy routes over the same candidate paths as the heuristic in
:mod:`oran_placer.rfdh`, so their energy differs only through which servers
they wake up.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .deployment import Deployment, InfeasibleError, Placement, validate
from .resources import ResourceLedger
from .rfdh import candidate_placements, rfdh_place
from .scenario import EnergyParams, Network, RequestSet

DEFAULT_MAX_TRIES = 1000


def asm_place(network: Network, requests: Sequence[RequestSet],
              params: EnergyParams) -> Deployment:
    """Every server awake; placement by the heuristic over the full node set.

    The heuristic can strand a request with every server allowed even though
    a smaller set works (all UPFs pile onto one server and its links saturate).
    Then the lowest-id ordered search places the batch instead.
    """
    dep, reward = rfdh_place(network, requests, network.node_ids, params)
    placements = dep.placements
    if requests and reward < 0:
        try:
            placements = _ordered_search(network, requests, params, lambda u, awake: (u,),
                                         "ASM").placements
        except InfeasibleError:
            raise InfeasibleError(f"requests {dep.info['unserved']} cannot be served "
                                  "even with every server awake") from None
    return Deployment(frozenset(network.node_ids), placements, always_on=True,
                      info={"strategy": "ASM"})


def _ordered_search(network: Network, requests: Sequence[RequestSet], params: EnergyParams,
                    rank: Callable[[int, frozenset[int]], tuple], name: str) -> Deployment:
    # requests in input order; first fitting candidate in (DU, CU, UPF, path) rank order
    ledger = ResourceLedger(network, params)
    awake = frozenset(network.pre_activated)
    placed: list[Placement] = []
    for k, r in enumerate(requests):
        def key(c: Placement):
            return (rank(c.du_node, awake), rank(c.cu_node, awake), rank(c.upf_node, awake),
                    len(c.path), network.path_km(c.path), c.path)

        hit = next((c for c in sorted(candidate_placements(network, r), key=key)
                    if ledger.fits(c)), None)
        if hit is None:
            raise InfeasibleError(f"{name}: request {k} (source {r.source}) cannot be placed")
        ledger.commit(hit)
        placed.append(hit)
        awake = awake | frozenset(hit.hosts)
    return Deployment(awake, tuple(placed), info={"strategy": name})


def ghp_place(network: Network, requests: Sequence[RequestSet], params: EnergyParams,
              seed: int | None = None) -> Deployment:
    """Greedy: lowest node id that still has room, function by function.

    ``seed`` is accepted for a uniform strategy signature and ignored.
    """
    del seed
    return _ordered_search(network, requests, params, lambda u, awake: (u,), "GHP")


def pmd_place(network: Network, requests: Sequence[RequestSet],
              params: EnergyParams) -> Deployment:
    """Greedy with awake servers first, then cheaper activation, then node id.

    Servers woken for earlier requests of the batch count as awake.
    """
    def rank(u: int, awake: frozenset[int]) -> tuple:
        return (u not in awake, network.act_energy_kj(u), u)

    return _ordered_search(network, requests, params, rank, "PMD")


def _pick(rng: np.random.Generator, items: list):
    return items[int(rng.integers(len(items)))]


def ra_place(network: Network, requests: Sequence[RequestSet], params: EnergyParams,
             seed: int | None = None, max_tries: int = DEFAULT_MAX_TRIES) -> Deployment:
    """Random feasible placement, restarted until every request is served.

    Per request the DU, CU, UPF host and then the path are drawn uniformly among
    the choices that still fit. ``info["tries"]`` holds the attempts used.
    """
    if max_tries < 1:
        raise ValueError("max_tries must be positive")
    rng = np.random.default_rng(seed)
    options = [candidate_placements(network, r) for r in requests]
    for tries in range(1, max_tries + 1):
        ledger = ResourceLedger(network, params)
        placed: list[Placement] = []
        for opts in options:
            fitting = [c for c in opts if ledger.fits(c)]
            if not fitting:
                break
            for attr in ("du_node", "cu_node", "upf_node"):
                value = _pick(rng, sorted({getattr(c, attr) for c in fitting}))
                fitting = [c for c in fitting if getattr(c, attr) == value]
            hit = _pick(rng, fitting)
            ledger.commit(hit)
            placed.append(hit)
        else:
            awake = network.pre_activated.union(*(p.hosts for p in placed))
            dep = Deployment(awake, tuple(placed), info={"strategy": "RA", "tries": tries})
            if validate(dep, network, params, requests).ok:
                return dep
    raise InfeasibleError(f"RA: no feasible deployment after {max_tries} tries")


STRATEGIES = {
    "ASM": lambda net, reqs, params, seed=None: asm_place(net, reqs, params),
    "GHP": lambda net, reqs, params, seed=None: ghp_place(net, reqs, params, seed),
    "PMD": lambda net, reqs, params, seed=None: pmd_place(net, reqs, params),
    "RA": lambda net, reqs, params, seed=None: ra_place(net, reqs, params, seed),
}
