"""Environment side of the learning loop: state vectors and one decision step."""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from ..deployment import Deployment
from ..rfdh import rfdh_place
from ..scenario import EnergyParams, Network, RequestRanges, RequestSet, generate_requests

# feature scales; keep state entries near [0, 1]
KM_SCALE = 50.0
GBPS_SCALE = 20.0
CORES_SCALE = 50.0


def state_length(n_nodes: int) -> int:
    return 5 * n_nodes


def encode_state(network: Network, requests: Sequence[RequestSet],
                 pre_activated: Iterable[int] | None = None) -> np.ndarray:
    """Pre-activation flags, then (fronthaul, e2e, rate, DU cores) per source node.

    Several requests from one source are merged: tightest budgets, summed load.
    Sources without a request contribute zeros.
    """
    nodes = network.node_ids
    index = {u: i for i, u in enumerate(nodes)}
    pre = network.pre_activated if pre_activated is None else frozenset(pre_activated)
    n = len(nodes)
    state = np.zeros(5 * n)
    for u in pre:
        state[index[u]] = 1.0
    feats = np.zeros((n, 4))
    seen = np.zeros(n, dtype=bool)
    for r in requests:
        i = index[r.source]
        row = (r.fronthaul_km / KM_SCALE, r.e2e_km / KM_SCALE, r.data_gbps / GBPS_SCALE,
               r.du_cores / CORES_SCALE)
        if seen[i]:
            feats[i, 0] = min(feats[i, 0], row[0])
            feats[i, 1] = min(feats[i, 1], row[1])
            feats[i, 2] += row[2]
            feats[i, 3] += row[3]
        else:
            feats[i] = row
            seen[i] = True
    state[n:] = feats.ravel()
    return state


def decisions_to_mask(network: Network, decisions: Sequence[bool]) -> frozenset[int]:
    if len(decisions) != len(network):
        raise ValueError(f"need {len(network)} decisions, got {len(decisions)}")
    return frozenset(u for u, on in zip(network.node_ids, decisions) if on)


def step_env(network: Network, requests: Sequence[RequestSet], decisions: Sequence[bool],
             params: EnergyParams, next_requests: Sequence[RequestSet] | None = None,
             carry_over: bool = False) -> tuple[float, np.ndarray, Deployment]:
    """Run the heuristic inside the decided mask.

    Returns the reward, the next state and the deployment. The next state
    describes ``next_requests`` (empty when omitted); with ``carry_over`` the
    servers awake after this step are flagged as pre-activated in it.
    """
    mask = decisions_to_mask(network, decisions) | network.pre_activated
    deployment, reward = rfdh_place(network, requests, mask, params)
    pre = deployment.activations | network.pre_activated if carry_over else network.pre_activated
    nxt = encode_state(network, next_requests or (), pre)
    return reward, nxt, deployment


def episode_batches(network: Network, seed: int, horizon: int,
                    ranges: RequestRanges | None = None) -> list[list[RequestSet]]:
    """The ``horizon`` request batches of one episode, derived from ``seed`` alone."""
    seeds = np.random.SeedSequence(seed).generate_state(horizon)
    return [generate_requests(network, int(s), ranges) for s in seeds]
