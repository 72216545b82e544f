"""Residual-capacity bookkeeping shared by the placement strategies."""
from __future__ import annotations

from collections import defaultdict
from typing import Sequence

from .deployment import ChainDemand, Placement, derive_chain_demand
from .scenario import EnergyParams, Network

_EPS = 1e-9


class ResourceLedger:
    """Tracks committed cores, link load, incoming virtual links and virtual-link routes.

    Every check mirrors a family of :func:`oran_placer.deployment.validate`, so a
    sequence of ``fits``/``commit`` calls only ever builds valid deployments.
    """

    def __init__(self, network: Network, params: EnergyParams):
        self.network = network
        self.params = params
        self.cores: dict[tuple[str, int], float] = defaultdict(float)
        self.link_load: dict[tuple[int, int], float] = defaultdict(float)
        self.incoming: dict[int, int] = defaultdict(int)
        self.routes: dict[tuple[str, str], list] = {}

    # cores
    def residual(self, function: str, node: int) -> float:
        return self.network.capacity(node, function) - self.cores[(function, node)]

    def cores_fit(self, function: str, node: int, amount: float) -> bool:
        return amount <= self.residual(function, node) + _EPS

    def add_cores(self, function: str, node: int, amount: float) -> None:
        self.cores[(function, node)] += amount

    # links
    def flow_fits(self, path: Sequence[int], rate: float) -> bool:
        net = self.network
        return all(self.link_load[net.link(a, b).key] + rate
                   <= net.link(a, b).bandwidth_gbps + _EPS for a, b in zip(path, path[1:]))

    def add_flow(self, path: Sequence[int], rate: float) -> None:
        for a, b in zip(path, path[1:]):
            self.link_load[self.network.link(a, b).key] += rate

    # virtual links
    def vlinks_fit(self, vlinks) -> bool:
        extra: dict[int, int] = defaultdict(int)
        for tail, head, route in vlinks:
            entry = self.routes.get((tail, head))
            if entry is not None and entry[0] != route:
                return False
            extra[int(head[1:])] += 1
        return all(self.incoming[u] + n <= self.network.vlink_capacity(u) for u, n in extra.items())

    def add_vlinks(self, vlinks, sign: int = 1) -> None:
        for tail, head, route in vlinks:
            self.incoming[int(head[1:])] += sign
            entry = self.routes.get((tail, head))
            if entry is None:
                self.routes[(tail, head)] = [route, sign]
            else:
                entry[1] += sign
                if entry[1] <= 0:
                    del self.routes[(tail, head)]

    # whole placements
    def _rates(self, placement: Placement, demand: ChainDemand):
        i, j, _ = placement.segment_boundaries
        p = placement.path
        return ((p[:i + 1], demand.fh_rate_gbps), (p[i:j + 1], demand.mh_rate_gbps),
                (p[j:], demand.bh_rate_gbps))

    def fits(self, placement: Placement) -> bool:
        demand = derive_chain_demand(placement.request, self.params)
        need: dict[tuple[str, int], float] = defaultdict(float)
        for f, host in zip(("DU", "CU", "UPF"), placement.hosts):
            need[(f, host)] += demand.cores(f)
        if not all(self.cores_fit(f, u, amt) for (f, u), amt in need.items()):
            return False
        return self.fits_routing(placement, demand)

    def fits_routing(self, placement: Placement, demand: ChainDemand | None = None) -> bool:
        """Link bandwidth and virtual-link checks only (cores not re-checked)."""
        demand = demand or derive_chain_demand(placement.request, self.params)
        for seg, rate in self._rates(placement, demand):
            if not self.flow_fits(seg, rate):
                return False
        return self.vlinks_fit(placement.virtual_links())

    def commit(self, placement: Placement, sign: int = 1) -> None:
        demand = derive_chain_demand(placement.request, self.params)
        for f, host in zip(("DU", "CU", "UPF"), placement.hosts):
            self.add_cores(f, host, sign * demand.cores(f))
        for seg, rate in self._rates(placement, demand):
            self.add_flow(seg, sign * rate)
        self.add_vlinks(placement.virtual_links(), sign)

    def release(self, placement: Placement) -> None:
        self.commit(placement, sign=-1)
