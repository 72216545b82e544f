"""Restricted function deployment heuristic.

Given the set of servers a policy is allowed to use, place UPFs, then DUs
(choosing the physical path), then CUs along the chosen path, and score the
outcome with the ratio reward fed back to the learning agents.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Callable, Iterable, Sequence

from .deployment import (Deployment, Placement, UnknownNodeError, derive_chain_demand,
                         objective_energy)
from .resources import ResourceLedger
from .scenario import EnergyParams, Network, RequestSet

PENALTY = -1.0
REWARD_FLOOR_KJ = 1e-3
_EPS = 1e-9


def dfs_paths(network: Network, source: int, target_predicate: Callable[[int], bool],
              max_km: float) -> list[tuple[int, ...]]:
    """All simple paths from ``source`` to nodes accepted by the predicate within ``max_km``.

    Sorted by hop count, then total distance, then node ids.
    """
    if source not in network:
        raise UnknownNodeError(f"unknown node id {source}")
    found = []
    path = [source]
    on_path = {source}

    def visit(u: int, km: float) -> None:
        if target_predicate(u):
            found.append((len(path) - 1, km, tuple(path)))
        for v in network.neighbors(u):
            if v in on_path:
                continue
            nkm = km + network.distance(u, v)
            if nkm > max_km + _EPS:
                continue
            path.append(v)
            on_path.add(v)
            visit(v, nkm)
            path.pop()
            on_path.discard(v)

    visit(source, 0.0)
    found.sort()
    return [p for _, _, p in found]


@lru_cache(maxsize=4096)
def paths_from(network: Network, source: int, max_km: float) -> tuple[tuple[int, ...], ...]:
    """Cached :func:`dfs_paths` to every node."""
    return tuple(dfs_paths(network, source, lambda _: True, max_km))


def prefix_km(network: Network, path: Sequence[int]) -> list[float]:
    acc = [0.0]
    for a, b in zip(path, path[1:]):
        acc.append(acc[-1] + network.distance(a, b))
    return acc


def candidate_placements(network: Network, request: RequestSet) -> list[Placement]:
    """Every (DU, CU, UPF, simple path) choice meeting the request's distance budgets.

    Capacities are not looked at; the path ends on the UPF host.
    """
    out = []
    for path in paths_from(network, request.source, float(request.e2e_km)):
        upf = path[-1]
        if network.capacity(upf, "UPF") <= 0:
            continue
        km = prefix_km(network, path)
        for i, du in enumerate(path):
            if km[i] > request.fronthaul_km + _EPS:
                break
            if network.capacity(du, "DU") <= 0:
                continue
            for j in range(i, len(path)):
                if network.capacity(path[j], "CU") > 0:
                    out.append(Placement(request, du, path[j], upf, path))
    return out


def rfdh_place(network: Network, requests: Sequence[RequestSet], mask: Iterable[int],
               params: EnergyParams) -> tuple[Deployment, float]:
    """Deploy every request inside ``mask`` (plus pre-activated nodes).

    Returns the deployment of the requests that could be served and the reward;
    the reward is -1 as soon as one request is left without UPF, DU or CU.
    """
    allowed = frozenset(mask) | network.pre_activated
    for u in allowed:
        if u not in network:
            raise UnknownNodeError(f"unknown node id {u}")
    ledger = ResourceLedger(network, params)
    demands = [derive_chain_demand(r, params) for r in requests]
    n = len(requests)

    # UPF: busiest server first, most constrained request first, keys refreshed after each pick
    upf_nodes = [u for u in sorted(allowed) if network.capacity(u, "UPF") > 0]
    access = []
    for r in requests:
        reach = {p[-1] for p in paths_from(network, r.source, float(r.e2e_km))}
        access.append(frozenset(u for u in upf_nodes if u in reach))
    upf_of: dict[int, int] = {}
    pending = {k for k in range(n) if access[k]}
    while pending:
        best_u, best = None, []
        for u in upf_nodes:
            servable = [k for k in sorted(pending)
                        if u in access[k] and ledger.cores_fit("UPF", u, demands[k].upf_cores)]
            if len(servable) > len(best):
                best_u, best = u, servable
        if best_u is None:
            break
        k = min(best, key=lambda k: (len(access[k]), k))
        ledger.add_cores("UPF", best_u, demands[k].upf_cores)
        upf_of[k] = best_u
        pending.discard(k)

    # DU: candidate (node, path, index) triples on fewest-hop paths to the UPF
    options: dict[int, list[tuple[int, tuple[int, ...], int]]] = {}
    for k, upf in upf_of.items():
        r = requests[k]
        opts = []
        for p in paths_from(network, r.source, float(r.e2e_km)):
            if p[-1] != upf:
                continue
            for i, (u, km) in enumerate(zip(p, prefix_km(network, p))):
                if km > r.fronthaul_km + _EPS:
                    break
                if u in allowed and network.capacity(u, "DU") > 0:
                    opts.append((u, p, i))
        options[k] = opts
    du_popularity: dict[int, int] = {}
    for opts in options.values():
        for u in {o[0] for o in opts}:
            du_popularity[u] = du_popularity.get(u, 0) + 1
    order = sorted(upf_of, key=lambda k: (len({o[0] for o in options[k]}), k))

    # DU then CU per request; a DU/path option only counts if a CU fits on its DU->UPF segment
    carrying = set(upf_of.values())
    placed: dict[int, Placement] = {}
    for k in order:
        r, d = requests[k], demands[k]
        nodes = sorted({o[0] for o in options[k]}, key=lambda u: (-du_popularity[u], u))
        for u in nodes:
            if not ledger.cores_fit("DU", u, d.du_cores):
                continue
            hit = None
            for v, p, i in options[k]:
                if v == u:
                    hit = _place_cu(ledger, r, d, u, p, i, upf_of[k], allowed, carrying)
                    if hit is not None:
                        break
            if hit is not None:
                ledger.commit(hit)
                carrying.update(hit.hosts)
                placed[k] = hit
                break

    unserved = [k for k in range(n) if k not in placed]
    deployment = Deployment(allowed, tuple(placed[k] for k in sorted(placed)),
                            info={"unserved": unserved})
    return deployment, reward(deployment, network, params, requests)


def _place_cu(ledger: ResourceLedger, request: RequestSet, demand, du: int,
              path: tuple[int, ...], i: int, upf: int, allowed, carrying) -> Placement | None:
    """Best CU host on ``path[i:]`` for a DU at ``path[i]``, or ``None``.

    Servers already carrying functions come first, then fewer switches, then
    position along the path.
    """
    ranked = []
    for j in range(i, len(path)):
        c = path[j]
        if c in allowed and ledger.cores_fit("CU", c, demand.cu_cores):
            ranked.append((c not in carrying, int(du != c) + int(c != upf), j))
    for _, _, j in sorted(ranked):
        cand = Placement(request, du, path[j], upf, path)
        if ledger.fits_routing(cand):
            return cand
    return None


def reward(deployment: Deployment, network: Network, params: EnergyParams,
           requests: Sequence[RequestSet] | None = None) -> float:
    """``w2 / w1``, or -1 when some request is not fully served.

    ``w1`` is the deployment's activation plus switching energy; ``w2`` charges
    every hibernating server's activation with the same switching term.
    """
    if requests is not None and len(deployment.placements) < len(requests):
        return PENALTY
    if deployment.info.get("unserved"):
        return PENALTY
    report = objective_energy(deployment, network, params, check=False)
    w1 = report.total_kj(0.0)
    w2 = sum(network.act_energy_kj(u) for u in network.node_ids
             if u not in network.pre_activated) + report.switching_kj
    if w1 <= 0:
        return w2 / REWARD_FLOOR_KJ if w2 > 0 else 1.0
    return w2 / w1
