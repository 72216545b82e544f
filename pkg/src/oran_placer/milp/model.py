"""Symbolic mixed-integer model of the joint activation, placement and routing problem.

Node tokens: ``n<u>`` is real node ``u``; ``a<u>`` is its auxiliary twin, joined to
``u`` by a near-zero-length link so that functions can sit on a request's own
source. Requests are indexed ``k<i>`` and candidate UPF destinations ``d<u>``.
Names are dot-separated and the first field is the variable (or constraint) family.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..deployment import (Deployment, InfeasibleError, Placement, ValidationResult,
                          derive_chain_demand, objective_energy, validate)
from ..scenario import EnergyParams, Network, RequestSet

FUNCTIONS = ("DU", "CU", "UPF")
AUX_KM = 1e-6
DEFAULT_VAR_BUDGET = 5_000_000
INTEGRALITY_TOL = 1e-6


class MilpError(ValueError):
    pass


class ModelTooLargeError(MilpError):
    pass


class MilpImportError(MilpError):
    pass


class InconsistentAssignmentError(MilpImportError):
    def __init__(self, message: str, families: Iterable[str] = ()):
        self.families = sorted(set(families))
        super().__init__(message)


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # binary | integer | continuous
    lb: float = 0.0
    ub: float | None = None

    def __post_init__(self):
        if self.kind not in ("binary", "integer", "continuous"):
            raise MilpError(f"unknown variable kind {self.kind!r}")


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: tuple[tuple[str, float], ...]
    sense: str  # <=, >=, =
    rhs: float

    @property
    def family(self) -> str:
        return self.name.split(".", 1)[0]

    def activity(self, values: Mapping[str, float]) -> float:
        return sum(c * values.get(v, 0.0) for v, c in self.terms)

    def slack(self, values: Mapping[str, float]) -> float:
        """Non-negative iff satisfied."""
        act = self.activity(values)
        if self.sense == "<=":
            return self.rhs - act
        if self.sense == ">=":
            return act - self.rhs
        return -abs(act - self.rhs)


@dataclass(frozen=True)
class ModelContext:
    network: Network
    requests: tuple[RequestSet, ...]
    params: EnergyParams
    dests: tuple[int, ...]


@dataclass(eq=False)
class MilpModel:
    variables: dict[str, Variable] = field(default_factory=dict)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[str, float] = field(default_factory=dict)
    big_m: float = 1.0
    context: ModelContext | None = None

    def __eq__(self, other):
        if not isinstance(other, MilpModel):
            return NotImplemented
        return (self.variables == other.variables and self.constraints == other.constraints
                and self.objective == other.objective and self.big_m == other.big_m)

    def add_var(self, name: str, kind: str, lb: float = 0.0, ub: float | None = None) -> str:
        if name in self.variables:
            raise MilpError(f"duplicate variable {name}")
        if kind == "binary":
            lb, ub = 0.0, 1.0
        self.variables[name] = Variable(name, kind, float(lb), None if ub is None else float(ub))
        return name

    def add_constraint(self, name: str, terms: Iterable[tuple[str, float]], sense: str,
                       rhs: float) -> None:
        merged: dict[str, float] = {}
        for v, c in terms:
            if v not in self.variables:
                raise MilpError(f"constraint {name} references undeclared variable {v}")
            merged[v] = merged.get(v, 0.0) + float(c)
        kept = tuple((v, c) for v, c in merged.items() if c != 0.0)
        if sense not in ("<=", ">=", "="):
            raise MilpError(f"bad sense {sense!r}")
        if not kept:
            # arises only on a single-node network, where nothing leaves the node
            if (sense == "<=" and rhs >= 0) or (sense == ">=" and rhs <= 0) or rhs == 0:
                return
            raise MilpError(f"constraint {name} has no terms and cannot hold")
        self.constraints.append(Constraint(name, kept, sense, float(rhs)))

    def objective_value(self, values: Mapping[str, float]) -> float:
        return sum(c * values.get(v, 0.0) for v, c in self.objective.items())

    def family_slacks(self, values: Mapping[str, float]) -> dict[str, float]:
        """Minimum slack per constraint family."""
        out: dict[str, float] = {}
        for con in self.constraints:
            s = con.slack(values)
            fam = con.family
            if fam not in out or s < out[fam]:
                out[fam] = s
        return out


# -- naming ---------------------------------------------------------------------------

def _n(u: int) -> str:
    return f"n{u}"


def _a(u: int) -> str:
    return f"a{u}"


def _kd(k: int, d: int) -> str:
    return f"k{k}.d{d}"


def _node_of(token: str) -> int:
    return int(token[1:])


# -- sizing ---------------------------------------------------------------------------

def upf_destinations(network: Network) -> tuple[int, ...]:
    return tuple(u for u in network.node_ids if network.capacity(u, "UPF") > 0)


def count_formula(network: Network, requests: Sequence[RequestSet]) -> dict:
    """Closed-form variable and constraint counts of :func:`build_model`."""
    n = len(network)
    e = len(network.links)
    k = len(requests)
    s = len({r.source for r in requests})
    d = len(upf_destinations(network))
    kd = k * d
    vl = s * n + n * (n - 1) if k else 0
    arcs = n * (n - 1) * 2 * e + s * n * (2 * e + 1) if k else 0
    pnodes = n * (n - 1) * n + s * n * (n + 1) if k else 0
    # a lone node has no outgoing arc or virtual link, so those rows vanish
    nosplit = pnodes if e else s * n
    vnosplit = kd * (n + 1) if e else kd
    variables = {
        "binary": 2 * n + kd + kd * n * n + 3 * kd * n + 3 * kd * (n + 1) + arcs,
        "integer": kd + vl,
        "continuous": kd + 3 * kd * n * n + 2 * vl + arcs,
    }
    fam = {"preactivated": len(network.pre_activated)}
    if k:
        fam.update({
            "flow": kd * (n + 1), "demand": k, "single_dest": k, "lamcap": kd * n * n,
            "B_ub": kd * n * n, "B_lb": kd * n * n, "dest_ub": kd, "dest_lb": kd,
            "rate_lb": kd * n * n, "rate_ub": kd * n * n, "vtot": vl, "vcount": vl,
            "mu_cap": n, "pflow": pnodes, "bw": e, "A_ub": arcs, "A_lb": arcs,
            "nosplit": nosplit, "vlen": vl, "fronthaul": kd, "e2e": kd,
            "z_ub_B": kd * n * n, "z_ub_l": kd * n * n, "z_lb": kd * n * n,
            "z_nonneg": kd * n * n, "ducu_cap": 2 * n, "upf_cap": d, "switch": kd,
            "y_origin": 3 * kd, "y_dest": 3 * kd, "host": 3 * kd * n * n, "y_host": 3 * kd * n,
            "host_once": 3 * kd, "upf_at_dest": kd, "order": 2 * kd * n,
            "activation": 3 * kd * n, "vnosplit": vnosplit, "vin": kd * n,
            "vterminal": kd * n * n,
        })
    fam = {f: c for f, c in fam.items() if c}
    return {"variables": variables, "constraints": fam}


def count_model(model: MilpModel) -> dict:
    """Exact variable counts by kind and constraint counts by family."""
    kinds = {"binary": 0, "integer": 0, "continuous": 0}
    for var in model.variables.values():
        kinds[var.kind] += 1
    fam: dict[str, int] = defaultdict(int)
    for con in model.constraints:
        fam[con.family] += 1
    return {"variables": kinds, "constraints": dict(fam)}


def default_big_m(network: Network, requests: Sequence[RequestSet]) -> float:
    """Ten times the total offered traffic, raised if needed to dominate every path length."""
    total_km = sum(l.distance_km for l in network.links) + len(network) * AUX_KM
    return max(10.0 * sum(r.data_gbps for r in requests), total_km + 1.0, 1.0)


# -- build ---------------------------------------------------------------------------

def _vlinks(network: Network, requests: Sequence[RequestSet]) -> list[tuple[str, str]]:
    nodes = network.node_ids
    out = [(_a(s), _n(j)) for s in sorted({r.source for r in requests}) for j in nodes]
    out += [(_n(i), _n(j)) for i in nodes for j in nodes if i != j]
    return out


def _arcs(network: Network, tail: str) -> list[tuple[str, str, float]]:
    arcs = []
    if tail[0] == "a":
        arcs.append((tail, _n(_node_of(tail)), AUX_KM))
    for link in network.links:
        arcs.append((_n(link.m), _n(link.n), link.distance_km))
        arcs.append((_n(link.n), _n(link.m), link.distance_km))
    return arcs


def build_model(network: Network, requests: Sequence[RequestSet], params: EnergyParams,
                big_m: float | None = None,
                var_budget: float = DEFAULT_VAR_BUDGET) -> MilpModel:
    """Full model over ``network`` for ``requests``; refuses beyond ``var_budget`` variables."""
    requests = tuple(requests)
    counts = count_formula(network, requests)
    total = sum(counts["variables"].values())
    if total > var_budget:
        raise ModelTooLargeError(f"model would have {total} variables (budget {var_budget:g})")
    for r in requests:
        if r.source not in network:
            raise MilpError(f"unknown source node {r.source}")
    dests = upf_destinations(network)
    if requests and not dests:
        raise InfeasibleError("no node can host a UPF")
    chi = float(big_m) if big_m is not None else default_big_m(network, requests)
    m = MilpModel(big_m=chi, context=ModelContext(network, requests, params, dests))
    nodes = network.node_ids
    ratio = params.chain_decrease_ratio
    pre = network.pre_activated
    max_e = max((network.act_energy_kj(u) for u in nodes), default=0.0) or 1.0

    # activation
    for u in nodes:
        m.add_var(f"beta.{_n(u)}", "binary")
        coef = 0.0 if u in pre else network.act_energy_kj(u)
        if coef:
            m.objective[f"beta.{_n(u)}"] = coef
    for u in nodes:
        m.add_var(f"beta.{_a(u)}", "binary")
        m.objective[f"beta.{_a(u)}"] = chi * max_e
    for u in sorted(pre):
        m.add_constraint(f"preactivated.{_n(u)}", [(f"beta.{_n(u)}", 1)], "=", 1)
    if not requests:
        return m

    vlinks = _vlinks(network, requests)
    for i, j in vlinks:
        m.add_var(f"V.{i}.{j}", "continuous")
        m.add_var(f"v.{i}.{j}", "integer")
        m.add_var(f"l.{i}.{j}", "continuous")
    arcs_of = {}
    for i, j in vlinks:
        arcs_of[(i, j)] = _arcs(network, i)
        for a, b, _ in arcs_of[(i, j)]:
            m.add_var(f"P.{i}.{j}.{a}.{b}", "continuous")
            m.add_var(f"A.{i}.{j}.{a}.{b}", "binary")

    users: dict[tuple[str, str], list[str]] = defaultdict(list)  # vlink -> "k.d" prefixes
    for k, r in enumerate(requests):
        src = _a(r.source)
        vnodes = [src] + [_n(u) for u in nodes]
        own = [(i, j) for i, j in vlinks if i[0] == "n" or i == src]
        _declare_request(m, k, dests, vnodes, own)
        m.add_constraint(f"demand.k{k}", [(f"Lam.{_kd(k, d)}", 1) for d in dests], "=", r.data_gbps)
        m.add_constraint(f"single_dest.k{k}", [(f"b.{_kd(k, d)}", 1) for d in dests], "=", 1)
        for d in dests:
            kd = _kd(k, d)
            lam, big_b = f"Lam.{kd}", f"b.{kd}"
            for t in vnodes:
                terms = [(f"lam.{kd}.{t}.{j}", 1) for i, j in own if i == t]
                terms += [(f"lam.{kd}.{i}.{t}", -1) for i, j in own if j == t]
                rhs_coef = 1 if t == src else -1 if t == _n(d) else 0
                if rhs_coef:
                    terms.append((lam, -rhs_coef))
                m.add_constraint(f"flow.{kd}.{t}", terms, "=", 0)
            m.add_constraint(f"dest_ub.{kd}", [(lam, 1), (big_b, -chi)], "<=", 0)
            m.add_constraint(f"dest_lb.{kd}", [(big_b, 1), (lam, -chi)], "<=", 0)
            for i, j in own:
                x, bb = f"lam.{kd}.{i}.{j}", f"B.{kd}.{i}.{j}"
                rate, z, l = f"rate.{kd}.{i}.{j}", f"z.{kd}.{i}.{j}", f"l.{i}.{j}"
                m.add_constraint(f"lamcap.{kd}.{i}.{j}", [(x, 1), (lam, -1)], "<=", 0)
                m.add_constraint(f"B_ub.{kd}.{i}.{j}", [(x, 1), (bb, -chi)], "<=", 0)
                m.add_constraint(f"B_lb.{kd}.{i}.{j}", [(bb, 1), (x, -chi)], "<=", 0)
                t = r.data_gbps
                m.add_constraint(f"rate_lb.{kd}.{i}.{j}",
                                 [(rate, 1), (bb, -t), (f"Y.{kd}.DU.{i}", t * ratio),
                                  (f"Y.{kd}.CU.{i}", t * ratio * (1 - ratio))], ">=", 0)
                m.add_constraint(f"rate_ub.{kd}.{i}.{j}", [(rate, 1), (bb, -t)], "<=", 0)
                m.add_constraint(f"z_ub_B.{kd}.{i}.{j}", [(z, 1), (bb, -chi)], "<=", 0)
                m.add_constraint(f"z_ub_l.{kd}.{i}.{j}", [(z, 1), (l, -1)], "<=", 0)
                m.add_constraint(f"z_lb.{kd}.{i}.{j}", [(z, 1), (l, -1), (bb, -chi)], ">=", -chi)
                m.add_constraint(f"z_nonneg.{kd}.{i}.{j}", [(z, 1)], ">=", 0)
                users[(i, j)].append(kd)
            m.add_constraint(f"fronthaul.{kd}", [(f"z.{kd}.{i}.{j}", 1) for i, j in own if i == src],
                             "<=", r.fronthaul_km + AUX_KM)
            m.add_constraint(f"e2e.{kd}", [(f"z.{kd}.{i}.{j}", 1) for i, j in own],
                             "<=", r.e2e_km + AUX_KM)
            m.add_constraint(f"switch.{kd}", [(f"S.{kd}", 1), (big_b, 1)]
                             + [(f"B.{kd}.{i}.{j}", -1) for i, j in own], "=", 0)
            for f in FUNCTIONS:
                m.add_constraint(f"y_origin.{kd}.{f}", [(f"Y.{kd}.{f}.{src}", 1)], "=", 0)
                m.add_constraint(f"y_dest.{kd}.{f}", [(f"Y.{kd}.{f}.{_n(d)}", 1)], "=", 1)
                for i, j in own:
                    m.add_constraint(f"host.{kd}.{f}.{i}.{j}",
                                     [(f"B.{kd}.{i}.{j}", 1), (f"Y.{kd}.{f}.{j}", 1),
                                      (f"Y.{kd}.{f}.{i}", -1), (f"y.{kd}.{f}.{j}", -1)], "<=", 1)
                for u in nodes:
                    m.add_constraint(f"y_host.{kd}.{f}.{_n(u)}",
                                     [(f"y.{kd}.{f}.{_n(u)}", 1)]
                                     + [(f"B.{kd}.{i}.{j}", -1) for i, j in own if j == _n(u)],
                                     "<=", 0)
                m.add_constraint(f"host_once.{kd}.{f}",
                                 [(f"y.{kd}.{f}.{_n(u)}", 1) for u in nodes] + [(big_b, -1)],
                                 "=", 0)
            m.add_constraint(f"upf_at_dest.{kd}", [(f"y.{kd}.UPF.{_n(d)}", 1), (big_b, -1)], "=", 0)
            for u in nodes:
                for f, g in (("CU", "DU"), ("UPF", "CU")):
                    m.add_constraint(f"order.{kd}.{f}.{_n(u)}",
                                     [(f"Y.{kd}.{f}.{_n(u)}", 1), (f"Y.{kd}.{g}.{_n(u)}", -1)],
                                     "<=", 0)
            for f in FUNCTIONS:
                for u in nodes:
                    m.add_constraint(f"activation.{kd}.{f}.{_n(u)}",
                                     [(f"y.{kd}.{f}.{_n(u)}", 1), (f"beta.{_n(u)}", -1)], "<=", 0)
            for t in vnodes:
                m.add_constraint(f"vnosplit.{kd}.{t}",
                                 [(f"B.{kd}.{i}.{j}", 1) for i, j in own if i == t], "<=", 1)
            for u in nodes:
                m.add_constraint(f"vin.{kd}.{_n(u)}",
                                 [(f"B.{kd}.{i}.{j}", 1) for i, j in own if j == _n(u)], "<=", 1)
            for i, j in own:
                m.add_constraint(f"vterminal.{kd}.{i}.{j}",
                                 [(f"B.{kd}.{i}.{j}", 1)]
                                 + [(f"y.{kd}.{f}.{j}", -1) for f in FUNCTIONS], "<=", 0)
            m.objective[f"S.{kd}"] = params.switch_energy_kj

    # capacities
    for f in ("DU", "CU"):
        for u in nodes:
            terms = [(f"y.{_kd(k, d)}.{f}.{_n(u)}",
                      derive_chain_demand(r, params).cores(f))
                     for k, r in enumerate(requests) for d in dests]
            m.add_constraint(f"ducu_cap.{f}.{_n(u)}", terms, "<=", network.capacity(u, f))
    for d in dests:
        m.add_constraint(f"upf_cap.{_n(d)}",
                         [(f"b.{_kd(k, d)}", r.upf_cores) for k, r in enumerate(requests)],
                         "<=", network.capacity(d, "UPF"))

    # virtual links: aggregated rate, usage count, incoming-link capacity
    for i, j in vlinks:
        m.add_constraint(f"vtot.{i}.{j}", [(f"V.{i}.{j}", 1)]
                         + [(f"rate.{kd}.{i}.{j}", -1) for kd in users[(i, j)]], "=", 0)
        m.add_constraint(f"vcount.{i}.{j}", [(f"v.{i}.{j}", 1)]
                         + [(f"B.{kd}.{i}.{j}", -1) for kd in users[(i, j)]], "=", 0)
    for u in nodes:
        m.add_constraint(f"mu_cap.{_n(u)}", [(f"v.{i}.{j}", 1) for i, j in vlinks if j == _n(u)],
                         "<=", network.vlink_capacity(u))

    # physical routing of each virtual link
    for i, j in vlinks:
        arcs = arcs_of[(i, j)]
        pnodes = ([i] if i[0] == "a" else []) + [_n(u) for u in nodes]
        for t in pnodes:
            terms = [(f"P.{i}.{j}.{a}.{b}", 1) for a, b, _ in arcs if a == t]
            terms += [(f"P.{i}.{j}.{a}.{b}", -1) for a, b, _ in arcs if b == t]
            if t == i:
                terms.append((f"V.{i}.{j}", -1))
            elif t == j:
                terms.append((f"V.{i}.{j}", 1))
            m.add_constraint(f"pflow.{i}.{j}.{t}", terms, "=", 0)
        for a, b, _ in arcs:
            p, aa = f"P.{i}.{j}.{a}.{b}", f"A.{i}.{j}.{a}.{b}"
            m.add_constraint(f"A_ub.{i}.{j}.{a}.{b}", [(p, 1), (aa, -chi)], "<=", 0)
            m.add_constraint(f"A_lb.{i}.{j}.{a}.{b}", [(aa, 1), (p, -chi)], "<=", 0)
        for t in pnodes:
            m.add_constraint(f"nosplit.{i}.{j}.{t}",
                             [(f"A.{i}.{j}.{a}.{b}", 1) for a, b, _ in arcs if a == t], "<=", 1)
        m.add_constraint(f"vlen.{i}.{j}", [(f"l.{i}.{j}", 1)]
                         + [(f"A.{i}.{j}.{a}.{b}", -km) for a, b, km in arcs], "=", 0)
    for link in network.links:
        a, b = _n(link.m), _n(link.n)
        terms = []
        for i, j in vlinks:
            terms += [(f"P.{i}.{j}.{a}.{b}", 1), (f"P.{i}.{j}.{b}.{a}", 1)]
        m.add_constraint(f"bw.{a}.{b}", terms, "<=", link.bandwidth_gbps)
    return m


def _declare_request(m: MilpModel, k: int, dests, vnodes, own) -> None:
    for d in dests:
        kd = _kd(k, d)
        m.add_var(f"Lam.{kd}", "continuous")
        m.add_var(f"b.{kd}", "binary")
        m.add_var(f"S.{kd}", "integer")
        for i, j in own:
            m.add_var(f"lam.{kd}.{i}.{j}", "continuous")
            m.add_var(f"B.{kd}.{i}.{j}", "binary")
            m.add_var(f"z.{kd}.{i}.{j}", "continuous")
            m.add_var(f"rate.{kd}.{i}.{j}", "continuous")
        for f in FUNCTIONS:
            for t in vnodes[1:]:
                m.add_var(f"y.{kd}.{f}.{t}", "binary")
            for t in vnodes:
                m.add_var(f"Y.{kd}.{f}.{t}", "binary")


# -- concrete deployments <-> assignments ---------------------------------------------

def _match_requests(requests: Sequence[RequestSet], placements: Sequence[Placement]) -> list[int]:
    taken: set[int] = set()
    out = []
    for p in placements:
        idx = next((k for k, r in enumerate(requests) if k not in taken and r == p.request), None)
        if idx is None:
            raise MilpError(f"placement for source {p.source} matches no model request")
        taken.add(idx)
        out.append(idx)
    return out


def _context(model: MilpModel) -> ModelContext:
    if model.context is None:
        raise MilpError("model carries no scenario context (rebuild it with build_model)")
    return model.context


def encode_deployment(model: MilpModel, deployment: Deployment) -> dict[str, float]:
    """Values for every model variable describing ``deployment``."""
    ctx = _context(model)
    net, params = ctx.network, ctx.params
    ratio = params.chain_decrease_ratio
    values = dict.fromkeys(model.variables, 0.0)
    for u in net.node_ids:
        if u in deployment.activations or u in net.pre_activated:
            values[f"beta.{_n(u)}"] = 1.0
    for k, r in enumerate(ctx.requests):
        for d in ctx.dests:
            for f in FUNCTIONS:
                values[f"Y.{_kd(k, d)}.{f}.{_n(d)}"] = 1.0
    ks = _match_requests(ctx.requests, deployment.placements)
    route_of: dict[tuple[str, str], tuple[int, ...]] = {}
    for k, p in zip(ks, deployment.placements):
        r = p.request
        kd = _kd(k, p.upf_node)
        values[f"Lam.{kd}"] = r.data_gbps
        values[f"b.{kd}"] = 1.0
        values[f"S.{kd}"] = float(p.switch_count)
        met: set[str] = set()
        for tail, head, route in p.virtual_links():
            met_tail = set(met)
            host = _node_of(head)
            for f, h in zip(FUNCTIONS, p.hosts):
                if h == host and f not in met:
                    values[f"y.{kd}.{f}.{head}"] = 1.0
                    met.add(f)
            for f in met:
                values[f"Y.{kd}.{f}.{head}"] = 1.0
            km = net.path_km(route) + (AUX_KM if tail[0] == "a" else 0.0)
            t = r.data_gbps
            rate = t - t * ratio * ("DU" in met_tail) - t * ratio * (1 - ratio) * ("CU" in met_tail)
            values[f"lam.{kd}.{tail}.{head}"] = t
            values[f"B.{kd}.{tail}.{head}"] = 1.0
            values[f"rate.{kd}.{tail}.{head}"] = rate
            values[f"z.{kd}.{tail}.{head}"] = km
            values[f"V.{tail}.{head}"] += rate
            values[f"v.{tail}.{head}"] += 1.0
            values[f"l.{tail}.{head}"] = km
            route_of[(tail, head)] = route
    for (tail, head), route in route_of.items():
        hops = list(zip(route, route[1:]))
        arcs = ([(tail, _n(route[0]))] if tail[0] == "a" else []) + [(_n(a), _n(b)) for a, b in hops]
        for a, b in arcs:
            values[f"P.{tail}.{head}.{a}.{b}"] = values[f"V.{tail}.{head}"]
            values[f"A.{tail}.{head}.{a}.{b}"] = 1.0
    return values


def _is_on(values: Mapping[str, float], name: str) -> bool:
    return values.get(name, 0.0) > 0.5


def check_integrality(model: MilpModel, values: Mapping[str, float],
                      tol: float = INTEGRALITY_TOL) -> list[str]:
    bad = []
    for name, var in model.variables.items():
        if var.kind == "continuous":
            continue
        x = values.get(name, 0.0)
        if abs(x - round(x)) > tol:
            bad.append(name)
    return bad


def violated_families(model: MilpModel, values: Mapping[str, float], tol: float = 1e-6) -> list[str]:
    return sorted({c.family for c in model.constraints if c.slack(values) < -tol})


def import_solution(model: MilpModel, values: Mapping[str, float],
                    tol: float = INTEGRALITY_TOL) -> Deployment:
    """Rebuild the concrete deployment an assignment describes.

    Raises :class:`MilpImportError` for non-integral indicators, an activated
    auxiliary node, a request without destination, or any violated constraint.
    """
    ctx = _context(model)
    net = ctx.network
    unknown = sorted(set(values) - set(model.variables))
    if unknown:
        raise MilpImportError(f"assignment names unknown variables, e.g. {unknown[0]}")
    bad = check_integrality(model, values, tol)
    if bad:
        raise MilpImportError(f"non-integral assignment for {bad[0]} = {values[bad[0]]!r}")
    for u in net.node_ids:
        if _is_on(values, f"beta.{_a(u)}"):
            raise MilpImportError(f"auxiliary node activated: {_a(u)}")
    chosen = []
    for k, r in enumerate(ctx.requests):
        ds = [d for d in ctx.dests if _is_on(values, f"b.{_kd(k, d)}")]
        if not ds:
            raise MilpImportError(f"no accommodation for request {k} (source {r.source})")
        if len(ds) > 1:
            raise InconsistentAssignmentError(f"request {k} has several destinations", ["single_dest"])
        chosen.append(ds[0])
    fams = violated_families(model, values, tol)
    if fams:
        raise InconsistentAssignmentError(f"assignment violates {', '.join(fams)}", fams)

    placements = []
    for k, (r, d) in enumerate(zip(ctx.requests, chosen)):
        kd = _kd(k, d)
        used = {(i, j) for name in _names_with(values, f"B.{kd}.") for i, j in [name.split(".")[3:5]]}
        chain = [_a(r.source)]
        while chain[-1] != _n(d) or any(i == chain[-1] for i, _ in used):
            nxt = [j for i, j in used if i == chain[-1]]
            if len(nxt) != 1 or len(chain) > len(net) + 1:
                raise InconsistentAssignmentError(f"request {k}: broken virtual chain", ["vnosplit"])
            used.discard((chain[-1], nxt[0]))
            chain.append(nxt[0])
        if used:
            raise InconsistentAssignmentError(f"request {k}: virtual links off the chain", ["switch"])
        hosts = []
        for f in FUNCTIONS:
            on = [u for u in net.node_ids if _is_on(values, f"y.{kd}.{f}.{_n(u)}")]
            if len(on) != 1:
                raise InconsistentAssignmentError(f"request {k}: {f} hosted {len(on)} times",
                                                  ["host_once"])
            hosts.append(on[0])
        path: list[int] = []
        for tail, head in zip(chain, chain[1:]):
            route = _route(values, net, tail, head)
            path.extend(route if not path else route[1:])
        placements.append(Placement(r, hosts[0], hosts[1], hosts[2], tuple(path)))
    activations = frozenset(u for u in net.node_ids if _is_on(values, f"beta.{_n(u)}"))
    deployment = Deployment(activations, tuple(placements))
    result = validate(deployment, net, ctx.params, ctx.requests)
    if not result.ok:
        raise InconsistentAssignmentError(f"imported deployment is invalid: {result.violations[0]}",
                                          result.families())
    return deployment


def _names_with(values: Mapping[str, float], prefix: str) -> list[str]:
    return sorted(n for n, x in values.items() if n.startswith(prefix) and x > 0.5)


def _route(values: Mapping[str, float], net: Network, tail: str, head: str) -> list[int]:
    arcs = {}
    for name in _names_with(values, f"A.{tail}.{head}."):
        a, b = name.split(".")[3:5]
        if a in arcs:
            raise InconsistentAssignmentError(f"virtual link {tail}->{head} splits", ["nosplit"])
        arcs[a] = b
    at, seq = tail, []
    if tail[0] == "n":
        seq.append(_node_of(tail))
    while at != head:
        if at not in arcs or len(seq) > len(net) + 1:
            raise InconsistentAssignmentError(f"virtual link {tail}->{head} has no route", ["pflow"])
        at = arcs.pop(at)
        seq.append(_node_of(at))
    if arcs:
        raise InconsistentAssignmentError(f"virtual link {tail}->{head} has stray arcs", ["pflow"])
    return seq


@dataclass(frozen=True)
class SolutionReport:
    verdict: str  # optimal-feasible | feasible | suboptimal | infeasible
    objective_kj: float
    recomputed_kj: float | None
    violated: tuple[str, ...]
    family_slacks: dict
    message: str = ""
    deployment: Deployment | None = None
    validation: ValidationResult | None = None


def check_solution(model: MilpModel, values: Mapping[str, float],
                   reference_kj: float | None = None, tol: float = 1e-6) -> SolutionReport:
    """Verdict on an external solver's assignment.

    ``reference_kj`` is a known optimum (for instance from the exhaustive
    oracle); with it a feasible assignment is classed optimal or suboptimal.
    """
    ctx = _context(model)
    obj = model.objective_value(values)
    slacks = model.family_slacks(values)
    violated = tuple(sorted(f for f, s in slacks.items() if s < -tol))
    bad_int = check_integrality(model, values)
    if bad_int:
        violated = tuple(sorted(set(violated) | {"integrality"}))
    try:
        dep = import_solution(model, values)
    except MilpImportError as exc:
        fams = getattr(exc, "families", [])
        return SolutionReport("infeasible", obj, None, tuple(sorted(set(violated) | set(fams))),
                              slacks, str(exc))
    rep = objective_energy(dep, ctx.network, ctx.params)
    recomputed = rep.total_kj(0.0)
    if abs(recomputed - obj) > tol:
        return SolutionReport("infeasible", obj, recomputed, violated + ("objective",), slacks,
                              "objective does not match the deployment it encodes", dep)
    verdict = "feasible"
    if reference_kj is not None:
        verdict = "optimal-feasible" if obj <= reference_kj + tol else "suboptimal"
    result = validate(dep, ctx.network, ctx.params, ctx.requests)
    return SolutionReport(verdict, obj, recomputed, violated, slacks, "", dep, result)


def to_matrix_form(model: MilpModel):
    """Dense-free coordinate export for external solvers.

    Returns ``(names, c, rows, cols, vals, lo, hi, lb, ub, integrality)``; row
    bounds ``lo``/``hi`` use ``-inf``/``inf`` for one-sided constraints.
    """
    names = list(model.variables)
    index = {n: i for i, n in enumerate(names)}
    c = np.array([model.objective.get(n, 0.0) for n in names])
    rows, cols, vals = [], [], []
    lo = np.empty(len(model.constraints))
    hi = np.empty(len(model.constraints))
    for r, con in enumerate(model.constraints):
        for v, coef in con.terms:
            rows.append(r)
            cols.append(index[v])
            vals.append(coef)
        lo[r] = con.rhs if con.sense in (">=", "=") else -np.inf
        hi[r] = con.rhs if con.sense in ("<=", "=") else np.inf
    var = [model.variables[n] for n in names]
    lb = np.array([x.lb for x in var])
    ub = np.array([np.inf if x.ub is None else x.ub for x in var])
    integrality = np.array([0 if x.kind == "continuous" else 1 for x in var])
    return (names, c, np.array(rows, dtype=int), np.array(cols, dtype=int), np.array(vals),
            lo, hi, lb, ub, integrality)
