"""Networks, request sets and energy parameters.

A scenario is a MEC network (typed nodes plus weighted links) together with
the switching-energy model. Request batches are either loaded from disk,
drawn at random with :func:`generate_requests`, or taken from the fixed
traffic sets :func:`fixture_F` / :func:`fixture_T`.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

FUNCTIONS = ("DU", "CU", "UPF")


class ScenarioError(ValueError):
    """Raised when a scenario or request file is malformed or violates an invariant."""


@dataclass(frozen=True)
class MecClass:
    class_id: str
    du_capacity: float
    cu_capacity: float
    upf_capacity: float
    op_power: float  # W
    act_power: float  # W
    act_time: float  # s
    vlink_capacity: int | None = None  # None -> number of nodes

    def __post_init__(self):
        for name in ("du_capacity", "cu_capacity", "upf_capacity", "op_power",
                     "act_power", "act_time"):
            if getattr(self, name) < 0:
                raise ScenarioError(f"class {self.class_id}: {name} must be >= 0")
        if self.class_id == "M1" and (self.cu_capacity > 0 or self.upf_capacity > 0):
            raise ScenarioError("class M1 hosts DU only; cu/upf capacity must be 0")

    @property
    def act_energy(self) -> float:
        """Activation energy in joules."""
        return self.act_power * self.act_time

    @property
    def act_energy_kj(self) -> float:
        return self.act_energy / 1000.0

    def capacity(self, function: str) -> float:
        return {"DU": self.du_capacity, "CU": self.cu_capacity,
                "UPF": self.upf_capacity}[function]


DEFAULT_CLASSES: dict[str, MecClass] = {
    "M1": MecClass("M1", 50, 0, 0, op_power=100, act_power=500, act_time=20),
    "M2": MecClass("M2", 50, 50, 32, op_power=170, act_power=600, act_time=25),
    "M3": MecClass("M3", 50, 50, 50, op_power=200, act_power=700, act_time=30),
}

# measured activation energies (kJ) per hibernation depth
TESTBED_ACTIVATION_KJ = {"startup": 26.9, "cold": 8.1, "warm": 7.1}


def testbed_classes(level: str = "startup",
                    base: Mapping[str, MecClass] = DEFAULT_CLASSES) -> dict[str, MecClass]:
    """Classes whose activation energy is the measured testbed value for ``level``.

    Activation time is kept from ``base``; activation power is rescaled so the
    product matches the measurement.
    """
    try:
        target_j = TESTBED_ACTIVATION_KJ[level] * 1000.0
    except KeyError:
        raise ScenarioError(f"unknown hibernation level {level!r}") from None
    return {cid: replace(c, act_power=target_j / c.act_time) for cid, c in base.items()}


@dataclass(frozen=True)
class Mec:
    node_id: int
    mec_class: MecClass
    pre_activated: bool = False
    vlink_capacity: int | None = None  # per-node override of the class value


@dataclass(frozen=True)
class Link:
    m: int
    n: int
    distance_km: float
    bandwidth_gbps: float

    def __post_init__(self):
        if self.m == self.n:
            raise ScenarioError(f"self-loop on node {self.m}")
        if not self.distance_km > 0:
            raise ScenarioError(f"link {self.m}-{self.n}: distance must be > 0")
        if not self.bandwidth_gbps > 0:
            raise ScenarioError(f"link {self.m}-{self.n}: bandwidth must be > 0")

    @property
    def key(self) -> tuple[int, int]:
        return (min(self.m, self.n), max(self.m, self.n))


@dataclass(frozen=True)
class EnergyParams:
    switch_energy_kj: float = 0.5
    chain_decrease_ratio: float = 0.2

    def __post_init__(self):
        if self.switch_energy_kj < 0:
            raise ScenarioError("switch_energy_kj must be >= 0")
        if not 0 <= self.chain_decrease_ratio < 1:
            raise ScenarioError("chain_decrease_ratio must lie in [0, 1)")


@dataclass(frozen=True, eq=False)
class Network:
    """Undirected MEC graph. Immutable; adjacency is built once on construction."""

    mecs: tuple[Mec, ...]
    links: tuple[Link, ...]
    _by_id: dict = field(init=False, repr=False, compare=False)
    _adj: dict = field(init=False, repr=False, compare=False)
    _links: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "mecs", tuple(self.mecs))
        object.__setattr__(self, "links", tuple(self.links))
        by_id = {}
        for mec in self.mecs:
            if mec.node_id in by_id:
                raise ScenarioError(f"duplicate node id {mec.node_id}")
            by_id[mec.node_id] = mec
        adj: dict[int, list[int]] = {u: [] for u in by_id}
        links = {}
        for link in self.links:
            for end in (link.m, link.n):
                if end not in by_id:
                    raise ScenarioError(f"link endpoint {end} is not a node")
            if link.key in links:
                raise ScenarioError(f"duplicate link {link.key}")
            links[link.key] = link
            adj[link.m].append(link.n)
            adj[link.n].append(link.m)
        object.__setattr__(self, "_by_id", by_id)
        object.__setattr__(self, "_adj", {u: tuple(sorted(v)) for u, v in adj.items()})
        object.__setattr__(self, "_links", links)
        if not by_id or not self._connected():
            raise ScenarioError("network must be a non-empty connected graph (disconnected graph)")

    def _connected(self) -> bool:
        start = self.mecs[0].node_id
        seen = {start}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in self._adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == len(self._by_id)

    @property
    def node_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self._by_id))

    def __len__(self) -> int:
        return len(self._by_id)

    def __contains__(self, node_id) -> bool:
        return node_id in self._by_id

    def mec(self, node_id: int) -> Mec:
        try:
            return self._by_id[node_id]
        except KeyError:
            raise KeyError(f"unknown node id {node_id}") from None

    def neighbors(self, node_id: int) -> tuple[int, ...]:
        return self._adj[node_id]

    def link(self, m: int, n: int) -> Link:
        return self._links[(min(m, n), max(m, n))]

    def distance(self, m: int, n: int) -> float:
        return self.link(m, n).distance_km

    def path_km(self, path: Sequence[int]) -> float:
        return sum(self.distance(a, b) for a, b in zip(path, path[1:]))

    def capacity(self, node_id: int, function: str) -> float:
        return self.mec(node_id).mec_class.capacity(function)

    def vlink_capacity(self, node_id: int) -> int:
        mec = self.mec(node_id)
        if mec.vlink_capacity is not None:
            return mec.vlink_capacity
        if mec.mec_class.vlink_capacity is not None:
            return mec.mec_class.vlink_capacity
        return len(self)

    def act_energy_kj(self, node_id: int) -> float:
        return self.mec(node_id).mec_class.act_energy_kj

    def op_power(self, node_id: int) -> float:
        return self.mec(node_id).mec_class.op_power

    @property
    def pre_activated(self) -> frozenset[int]:
        return frozenset(m.node_id for m in self.mecs if m.pre_activated)

    def with_pre_activated(self, nodes: Iterable[int]) -> "Network":
        nodes = set(nodes)
        return Network(tuple(replace(m, pre_activated=m.node_id in nodes) for m in self.mecs),
                       self.links)


@dataclass(frozen=True)
class RequestSet:
    source: int
    fronthaul_km: float
    e2e_km: float
    data_gbps: float
    du_cores: float
    upf_cores: float

    def __post_init__(self):
        for name in ("fronthaul_km", "e2e_km", "data_gbps", "du_cores", "upf_cores"):
            if not getattr(self, name) > 0:
                raise ScenarioError(f"request from {self.source}: {name} must be > 0")
        if self.fronthaul_km > self.e2e_km:
            raise ScenarioError(f"request from {self.source}: fronthaul budget exceeds e2e budget")

    def to_dict(self) -> dict:
        return {"source": self.source, "l_q_km": self.fronthaul_km, "l_p_km": self.e2e_km,
                "t_gbps": self.data_gbps, "du_cores": self.du_cores,
                "upf_cores": self.upf_cores}

    @classmethod
    def from_dict(cls, d: Mapping) -> "RequestSet":
        try:
            return cls(int(d["source"]), d["l_q_km"], d["l_p_km"], d["t_gbps"],
                       d["du_cores"], d["upf_cores"])
        except KeyError as exc:
            raise ScenarioError(f"request entry missing key {exc}") from None


@dataclass(frozen=True)
class RequestRanges:
    """Inclusive integer ranges used by :func:`generate_requests`."""

    data_gbps: tuple[int, int] = (8, 12)
    du_cores: tuple[int, int] = (8, 12)
    upf_cores: tuple[int, int] = (3, 5)
    fronthaul_km: tuple[int, int] = (11, 21)
    e2e_km: tuple[int, int] = (28, 43)

    def __post_init__(self):
        for name in ("data_gbps", "du_cores", "upf_cores", "fronthaul_km", "e2e_km"):
            lo, hi = getattr(self, name)
            if lo > hi or lo <= 0:
                raise ScenarioError(f"invalid range for {name}: ({lo}, {hi})")


def generate_requests(network: Network, seed: int, ranges: RequestRanges | None = None,
                      sources: Sequence[int] | None = None) -> list[RequestSet]:
    """One random request per source (all nodes by default).

    Values are drawn uniformly from the integer grid of each range. A sampled
    fronthaul budget larger than the end-to-end budget is clipped to it.
    """
    ranges = ranges or RequestRanges()
    sources = list(network.node_ids if sources is None else sources)
    for s in sources:
        if s not in network:
            raise ScenarioError(f"unknown source node {s}")
    rng = np.random.default_rng(seed)
    out = []
    for s in sources:
        fh, e2e, data, du, upf = (int(rng.integers(lo, hi + 1)) for lo, hi in (
            ranges.fronthaul_km, ranges.e2e_km, ranges.data_gbps, ranges.du_cores,
            ranges.upf_cores))
        out.append(RequestSet(s, min(fh, e2e), e2e, data, du, upf))
    return out


def _fixture(fh, e2e, data, du, upf, sources) -> list[RequestSet]:
    return [RequestSet(*row) for row in zip(sources, fh, e2e, data, du, upf)]


def fixture_F(sources: Sequence[int] = tuple(range(1, 9))) -> list[RequestSet]:
    """The 8-request traffic set used for the 8-MEC network."""
    return _fixture([14, 20, 17, 19, 19, 17, 17, 17],
                    [28, 38, 40, 29, 41, 32, 34, 42],
                    [11, 9, 10, 9, 9, 8, 10, 11],
                    [11, 9, 10, 9, 9, 8, 10, 11],
                    [5, 5, 5, 5, 4, 3, 5, 4], sources)


def fixture_T(sources: Sequence[int] = tuple(range(1, 15))) -> list[RequestSet]:
    """The 14-request traffic set used for the 14-MEC network."""
    return _fixture([14, 20, 17, 19, 19, 17, 17, 17, 13, 15, 20, 18, 16, 11],
                    [28, 38, 40, 29, 41, 32, 34, 42, 37, 29, 28, 31, 28, 31],
                    [11, 9, 8, 9, 9, 8, 10, 11, 10, 9, 8, 10, 9, 9],
                    [11, 9, 8, 9, 9, 8, 10, 11, 10, 9, 8, 10, 9, 9],
                    [3, 4, 5, 5, 3, 3, 5, 5, 3, 3, 3, 3, 5, 3], sources)


# -- file I/O -----------------------------------------------------------------

def _classes_from_dict(raw: Mapping) -> dict[str, MecClass]:
    classes = {}
    for cid, c in raw.items():
        try:
            classes[cid] = MecClass(cid, c["du"], c["cu"], c["upf"], c["op_w"], c["act_w"],
                                    c["act_s"], c.get("m_u"))
        except KeyError as exc:
            raise ScenarioError(f"class {cid} missing key {exc}") from None
    return classes


def scenario_from_dict(doc: Mapping) -> tuple[Network, EnergyParams]:
    if not isinstance(doc, Mapping):
        raise ScenarioError("scenario document must be an object")
    classes = dict(DEFAULT_CLASSES)
    if "classes" in doc:
        classes.update(_classes_from_dict(doc["classes"]))
    try:
        mecs = []
        for n in doc["nodes"]:
            cid = n["class"]
            if cid not in classes:
                raise ScenarioError(f"node {n['id']}: unknown class {cid!r}")
            mecs.append(Mec(int(n["id"]), classes[cid], bool(n.get("pre_activated", False)),
                            n.get("m_u")))
        links = [Link(int(l["m"]), int(l["n"]), l["km"], l["gbps"]) for l in doc.get("links", [])]
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"malformed scenario entry: {exc!r}") from None
    # a scenario file describes a network to route over, so one node is rejected as well
    if len(mecs) < 2 or not links:
        raise ScenarioError("scenario needs at least two nodes and one link "
                            "(disconnected/trivial graph)")
    energy = doc.get("energy", {})
    params = EnergyParams(energy.get("switch_kj", 0.5), energy.get("chain_ratio", 0.2))
    return Network(tuple(mecs), tuple(links)), params


def scenario_to_dict(network: Network, params: EnergyParams) -> dict:
    classes = {}
    for m in network.mecs:
        c = m.mec_class
        classes[c.class_id] = {"du": c.du_capacity, "cu": c.cu_capacity, "upf": c.upf_capacity,
                               "op_w": c.op_power, "act_w": c.act_power, "act_s": c.act_time,
                               "m_u": c.vlink_capacity}
    nodes = []
    for m in network.mecs:
        entry = {"id": m.node_id, "class": m.mec_class.class_id, "pre_activated": m.pre_activated}
        if m.vlink_capacity is not None:
            entry["m_u"] = m.vlink_capacity
        nodes.append(entry)
    return {
        "nodes": nodes,
        "classes": dict(sorted(classes.items())),
        "links": [{"m": l.m, "n": l.n, "km": l.distance_km, "gbps": l.bandwidth_gbps}
                  for l in network.links],
        "energy": {"switch_kj": params.switch_energy_kj,
                   "chain_ratio": params.chain_decrease_ratio},
    }


def _read_json(path) -> object:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: parse error: {exc}") from None


def load_scenario(path) -> tuple[Network, EnergyParams]:
    return scenario_from_dict(_read_json(path))


def save_scenario(network: Network, params: EnergyParams, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(network, params), indent=2) + "\n")


def load_requests(path) -> list[RequestSet]:
    doc = _read_json(path)
    if not isinstance(doc, list):
        raise ScenarioError("requests file must contain a list")
    return [RequestSet.from_dict(d) for d in doc]


def save_requests(requests: Sequence[RequestSet], path) -> None:
    Path(path).write_text(json.dumps([r.to_dict() for r in requests], indent=2) + "\n")


SAMPLES = {"sample8": "sample8.json", "sample14": "sample14.json"}


def sample_scenario(name: str = "sample8") -> tuple[Network, EnergyParams]:
    """Bundled sample topologies (hand-built approximations, not published ground truth)."""
    try:
        fname = SAMPLES[name]
    except KeyError:
        raise ScenarioError(f"unknown sample {name!r}; choose from {sorted(SAMPLES)}") from None
    text = resources.files("oran_placer").joinpath("data").joinpath(fname).read_text()
    return scenario_from_dict(json.loads(text))


def resolve_scenario(spec: str) -> tuple[Network, EnergyParams]:
    """A bundled sample name or a path to a scenario file."""
    if spec in SAMPLES:
        return sample_scenario(spec)
    return load_scenario(spec)
