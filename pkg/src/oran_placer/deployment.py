"""Concrete deployments: placements, feasibility checks and the energy objective."""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .scenario import EnergyParams, Network, RequestSet, ScenarioError

CAPACITY_FAMILIES = {"DU": "du_capacity", "CU": "cu_capacity", "UPF": "upf_capacity"}


class UnknownNodeError(KeyError):
    pass


class InvalidDeploymentError(ValueError):
    def __init__(self, result: "ValidationResult"):
        self.result = result
        super().__init__("invalid deployment: " + "; ".join(str(v) for v in result.violations[:5]))


class InfeasibleError(RuntimeError):
    """No deployment serving every request could be found."""


@dataclass(frozen=True)
class ChainDemand:
    du_cores: float
    cu_cores: float
    upf_cores: float
    fh_rate_gbps: float
    mh_rate_gbps: float
    bh_rate_gbps: float

    def cores(self, function: str) -> float:
        return {"DU": self.du_cores, "CU": self.cu_cores, "UPF": self.upf_cores}[function]


def derive_chain_demand(request: RequestSet, params: EnergyParams) -> ChainDemand:
    keep = 1.0 - params.chain_decrease_ratio
    # guard against 0.8 * 10 = 8.000000000000002 style round-up
    cu = math.ceil(keep * request.du_cores - 1e-9)
    mh = keep * request.data_gbps
    return ChainDemand(request.du_cores, cu, request.upf_cores, request.data_gbps, mh, keep * mh)


def _vnode(kind: str, node: int) -> str:
    return f"{kind}{node}"


@dataclass(frozen=True)
class Placement:
    """One request's chain: function hosts and the simple physical path through them."""

    request: RequestSet
    du_node: int
    cu_node: int
    upf_node: int
    path: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "path", tuple(self.path))

    @property
    def source(self) -> int:
        return self.request.source

    @property
    def segment_boundaries(self) -> tuple[int, int, int]:
        """Path indices of the DU, CU and UPF hosts."""
        p = self.path
        i = p.index(self.du_node)
        j = p.index(self.cu_node, i)
        return i, j, p.index(self.upf_node, j)

    @property
    def hosts(self) -> tuple[int, int, int]:
        return (self.du_node, self.cu_node, self.upf_node)

    @property
    def switch_count(self) -> int:
        """Virtual links minus one; the entry link into the DU host is always present."""
        du, cu, upf = self.hosts
        return int(du != cu) + int(cu != upf)

    @property
    def hops(self) -> int:
        return len(self.path) - 1

    def virtual_links(self) -> list[tuple[str, str, tuple[int, ...]]]:
        """(tail, head, physical route) for each virtual link of the chain.

        The entry link starts at the source's auxiliary twin ``a<s>``; the rest
        connect distinct consecutive function hosts.
        """
        i, j, k = self.segment_boundaries
        p = self.path
        links = [(_vnode("a", self.source), _vnode("n", self.du_node), p[:i + 1])]
        if j > i:
            links.append((_vnode("n", self.du_node), _vnode("n", self.cu_node), p[i:j + 1]))
        if k > j:
            links.append((_vnode("n", self.cu_node), _vnode("n", self.upf_node), p[j:k + 1]))
        return links

    def to_dict(self, index: int | None = None) -> dict:
        d = {"source": self.source, "du": self.du_node, "cu": self.cu_node,
             "upf": self.upf_node, "path": list(self.path)}
        if index is not None:
            d["request"] = index
        return d


@dataclass(frozen=True)
class Deployment:
    """Activation set plus placements.

    ``activations`` is the awake set the strategy chose, pre-activated nodes
    included. ``always_on`` marks the keep-everything-awake semantics: no
    activation energy, idle upkeep for every node.
    """

    activations: frozenset[int]
    placements: tuple[Placement, ...] = ()
    always_on: bool = False
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "activations", frozenset(self.activations))
        object.__setattr__(self, "placements", tuple(self.placements))

    @property
    def switch_count(self) -> dict[int, int]:
        return {i: p.switch_count for i, p in enumerate(self.placements)}

    @property
    def total_switches(self) -> int:
        return sum(p.switch_count for p in self.placements)

    def activation_map(self, network: Network) -> dict[int, bool]:
        return {u: u in self.activations for u in network.node_ids}

    def hosting_nodes(self) -> frozenset[int]:
        return frozenset(u for p in self.placements for u in p.hosts)


# -- validation -------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    family: str
    entity: object
    slack: float

    def __str__(self):
        return f"{self.family}[{self.entity}] slack={self.slack:g}"


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def families(self) -> set[str]:
        return {v.family for v in self.violations}


def _check_nodes(deployment: Deployment, network: Network) -> None:
    nodes = set(deployment.activations)
    for p in deployment.placements:
        nodes.update(p.path)
        nodes.update(p.hosts)
        nodes.add(p.source)
    for u in sorted(nodes):
        if u not in network:
            raise UnknownNodeError(f"unknown node id {u}")


def validate(deployment: Deployment, network: Network, params: EnergyParams,
             requests: Sequence[RequestSet] | None = None,
             tol: float = 1e-9) -> ValidationResult:
    """Check every placement and shared resource; report all violations.

    With ``requests`` given, each of them must also be placed exactly once.
    """
    _check_nodes(deployment, network)
    out: list[Violation] = []
    load: dict[tuple[str, int], float] = defaultdict(float)
    link_load: dict[tuple[int, int], float] = defaultdict(float)
    incoming: dict[int, int] = defaultdict(int)
    routes: dict[tuple[str, str], tuple[int, ...]] = {}

    for idx, p in enumerate(deployment.placements):
        r = p.request
        path = p.path
        if not path or path[0] != r.source:
            out.append(Violation("path_source", idx, -1.0))
            continue
        if len(set(path)) != len(path):
            out.append(Violation("path_simple", idx, -float(len(path) - len(set(path)))))
            continue
        bad_edge = [(a, b) for a, b in zip(path, path[1:])
                    if b not in network.neighbors(a)]
        if bad_edge:
            out.append(Violation("path_link", (idx, bad_edge[0]), -1.0))
            continue
        if any(h not in path for h in p.hosts) or path[-1] != p.upf_node:
            out.append(Violation("function_order", idx, -1.0))
            continue
        i, j, k = (path.index(h) for h in p.hosts)
        if not i <= j <= k:
            out.append(Violation("function_order", idx, -1.0))
            continue
        fh_km = network.path_km(path[:i + 1])
        e2e_km = network.path_km(path)
        if fh_km > r.fronthaul_km + tol:
            out.append(Violation("fronthaul_distance", idx, r.fronthaul_km - fh_km))
        if e2e_km > r.e2e_km + tol:
            out.append(Violation("e2e_distance", idx, r.e2e_km - e2e_km))

        demand = derive_chain_demand(r, params)
        for f, host in zip(("DU", "CU", "UPF"), p.hosts):
            load[(f, host)] += demand.cores(f)
        for pos, (a, b) in enumerate(zip(path, path[1:])):
            rate = (demand.fh_rate_gbps if pos < i else
                    demand.mh_rate_gbps if pos < j else demand.bh_rate_gbps)
            link_load[network.link(a, b).key] += rate
        for tail, head, route in p.virtual_links():
            incoming[int(head[1:])] += 1
            prev = routes.setdefault((tail, head), route)
            if prev != route:
                out.append(Violation("virtual_link_route", (tail, head), -1.0))

    for (f, u), used in sorted(load.items()):
        cap = network.capacity(u, f)
        if used > cap + tol:
            out.append(Violation(CAPACITY_FAMILIES[f], u, cap - used))
    for u, count in sorted(incoming.items()):
        cap = network.vlink_capacity(u)
        if count > cap:
            out.append(Violation("vlink_capacity", u, cap - count))
    for key, used in sorted(link_load.items()):
        cap = network.link(*key).bandwidth_gbps
        if used > cap + tol:
            out.append(Violation("bandwidth", key, cap - used))
    for u in sorted(deployment.hosting_nodes() - deployment.activations):
        if not deployment.always_on:
            out.append(Violation("activation", u, -1.0))

    if requests is not None:
        placed = defaultdict(int)
        for p in deployment.placements:
            placed[p.request] += 1
        wanted = defaultdict(int)
        for r in requests:
            wanted[r] += 1
        for idx, r in enumerate(requests):
            if placed[r] < wanted[r]:
                out.append(Violation("unserved", idx, -1.0))
        for r, n in placed.items():
            if n > wanted[r]:
                out.append(Violation("unknown_request", r.source, -1.0))
    return ValidationResult(tuple(out))


# -- energy -------------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyReport:
    activation_kj: float
    switching_kj: float
    idle_power_kw: float  # upkeep slope, kJ per idle second

    def idle_maintenance_kj(self, t: float) -> float:
        return self.idle_power_kw * max(t, 0.0)

    def total_kj(self, t: float = 0.0) -> float:
        return self.activation_kj + self.switching_kj + self.idle_maintenance_kj(t)


def awake_set(deployment: Deployment, network: Network) -> frozenset[int]:
    if deployment.always_on:
        return frozenset(network.node_ids)
    return network.pre_activated


def objective_energy(deployment: Deployment, network: Network, params: EnergyParams,
                     check: bool = True) -> EnergyReport:
    if check:
        result = validate(deployment, network, params)
        if not result.ok:
            raise InvalidDeploymentError(result)
    if deployment.always_on:
        activation = 0.0
    else:
        newly = deployment.activations - network.pre_activated
        activation = sum(network.act_energy_kj(u) for u in sorted(newly))
    switching = deployment.total_switches * params.switch_energy_kj
    slope = sum(network.op_power(u) for u in sorted(awake_set(deployment, network))) / 1000.0
    return EnergyReport(activation, switching, slope)


@dataclass(frozen=True)
class IdleCurve:
    strategy: str
    report: EnergyReport
    times: tuple[float, ...]

    @property
    def totals(self) -> tuple[float, ...]:
        return tuple(self.report.total_kj(t) for t in self.times)


def energy_vs_idle(deployments: Mapping[str, Deployment], network: Network,
                   params: EnergyParams, horizon_s: float, step_s: float = 10.0,
                   check: bool = True) -> dict[str, IdleCurve]:
    """Total energy per strategy sampled on ``[0, horizon_s]``."""
    n = int(math.floor(horizon_s / step_s + 1e-9))
    times = tuple(step_s * i for i in range(n + 1))
    if not times or times[-1] < horizon_s:
        times = times + (float(horizon_s),)
    return {name: IdleCurve(name, objective_energy(d, network, params, check=check), times)
            for name, d in deployments.items()}


def crossover_time(a: EnergyReport, b: EnergyReport) -> float | None:
    """Smallest idle time at which ``a`` costs more than ``b``; ``None`` if never.

    Both curves are linear, so the crossing (when it exists) is unique.
    """
    gap0 = a.total_kj(0.0) - b.total_kj(0.0)
    dslope = a.idle_power_kw - b.idle_power_kw
    if gap0 > 0:
        return 0.0
    if dslope <= 0:
        return None
    return -gap0 / dslope


# -- serialization ----------------------------------------------------------------

def deployment_to_dict(deployment: Deployment) -> dict:
    doc = {"activations": sorted(deployment.activations),
           "placements": [p.to_dict(i) for i, p in enumerate(deployment.placements)]}
    if deployment.always_on:
        doc["always_on"] = True
    return doc


def deployment_from_dict(doc: Mapping, requests: Sequence[RequestSet]) -> Deployment:
    placements = []
    taken = set()
    for entry in doc.get("placements", []):
        idx = entry.get("request")
        if idx is None:
            candidates = [i for i, r in enumerate(requests)
                          if r.source == entry["source"] and i not in taken]
            if not candidates:
                raise ScenarioError(f"no request from source {entry['source']}")
            idx = candidates[0]
        taken.add(idx)
        placements.append(Placement(requests[idx], int(entry["du"]), int(entry["cu"]),
                                    int(entry["upf"]), tuple(int(u) for u in entry["path"])))
    return Deployment(frozenset(int(u) for u in doc.get("activations", [])), tuple(placements),
                      bool(doc.get("always_on", False)))


def save_deployment(deployment: Deployment, path) -> None:
    Path(path).write_text(json.dumps(deployment_to_dict(deployment), indent=2) + "\n")


def load_deployment(path, requests: Sequence[RequestSet]) -> Deployment:
    return deployment_from_dict(json.loads(Path(path).read_text()), requests)


def hosted_load(placements: Iterable[Placement], params: EnergyParams) -> dict[tuple[str, int], float]:
    load: dict[tuple[str, int], float] = defaultdict(float)
    for p in placements:
        demand = derive_chain_demand(p.request, params)
        for f, host in zip(("DU", "CU", "UPF"), p.hosts):
            load[(f, host)] += demand.cores(f)
    return dict(load)
