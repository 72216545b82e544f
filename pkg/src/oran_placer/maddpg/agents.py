"""Grouped actor/critic agents and the joint-action encodings fed to the critics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..scenario import Network
from .env import state_length
from .nn import MlpNet, forward

ENCODINGS = ("onehot", "continuous")
THRESHOLD = 0.5

PRESET_GROUPS = {
    8: ((1, 2, 3, 4), (5, 6, 7, 8)),
    14: ((1, 2, 9, 10, 11), (4, 5, 6, 7, 13), (3, 8, 12, 14)),
}


class GroupingError(ValueError):
    pass


def default_groups(network: Network) -> tuple[tuple[int, ...], ...]:
    """Preset split for the 8- and 14-node samples, else two contiguous halves."""
    ids = network.node_ids
    preset = PRESET_GROUPS.get(len(ids))
    if preset and sorted(u for g in preset for u in g) == sorted(ids):
        return preset
    half = (len(ids) + 1) // 2
    return (tuple(ids[:half]), tuple(ids[half:])) if len(ids) > 1 else (tuple(ids),)


def _bits(m: int) -> np.ndarray:
    # row p holds the binary digits of p, least significant first
    return (np.arange(2 ** m)[:, None] >> np.arange(m)[None, :]) & 1


def encoding_size(group_sizes: Sequence[int], encoding: str) -> int:
    if encoding == "onehot":
        return sum(2 ** m for m in group_sizes)
    if encoding == "continuous":
        return sum(group_sizes)
    raise ValueError(f"encoding must be one of {ENCODINGS}")


def encode_group_action(a: np.ndarray, encoding: str) -> tuple[np.ndarray, np.ndarray | None]:
    """Encode a batch ``(B, M)`` of actions in [0, 1].

    One-hot is relaxed to the product-Bernoulli distribution over the 2^M
    decision vectors, which is exactly one-hot for binary input. Returns the
    encoding ``(B, P)`` and its Jacobian ``(B, P, M)`` (``None`` for continuous).
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if encoding == "continuous":
        return a, None
    bits = _bits(a.shape[1])
    f = np.where(bits[None, :, :] == 1, a[:, None, :], 1.0 - a[:, None, :])  # (B, P, M)
    probs = f.prod(axis=2)
    jac = np.empty_like(f)
    sign = np.where(bits == 1, 1.0, -1.0)
    for i in range(a.shape[1]):
        rest = np.delete(f, i, axis=2).prod(axis=2)
        jac[:, :, i] = sign[None, :, i] * rest
    return probs, jac


@dataclass
class AgentGroup:
    index: int
    nodes: tuple[int, ...]
    actor: MlpNet
    critic: MlpNet
    target_actor: MlpNet = field(default=None)
    target_critic: MlpNet = field(default=None)

    def __post_init__(self):
        if self.target_actor is None:
            self.target_actor = self.actor.copy()
        if self.target_critic is None:
            self.target_critic = self.critic.copy()

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def action_space(self) -> int:
        return 2 ** self.size

    @property
    def state_length(self) -> int:
        return self.actor.sizes[0]


@dataclass
class AgentEnsemble:
    """All groups of one network, plus the node order used by states and masks."""

    node_ids: tuple[int, ...]
    groups: list[AgentGroup]
    encoding: str = "onehot"
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        covered = sorted(u for g in self.groups for u in g.nodes)
        if covered != sorted(self.node_ids):
            raise GroupingError("groups must partition the node set")
        if self.encoding not in ENCODINGS:
            raise ValueError(f"encoding must be one of {ENCODINGS}")
        for g in self.groups:
            if g.actor.sizes[-1] != g.size or g.actor.sizes[0] != state_length(len(self.node_ids)):
                raise GroupingError(f"group {g.index} actor shape {g.actor.sizes} does not fit")
            if g.critic.sizes[0] != self.critic_input_length:
                raise GroupingError(f"group {g.index} critic input {g.critic.sizes[0]} "
                                    f"!= {self.critic_input_length}")

    @classmethod
    def build(cls, network: Network, groups=None, hidden=(64, 64), encoding: str = "onehot",
              rng: np.random.Generator | None = None, config: dict | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        groups = tuple(tuple(g) for g in (groups or default_groups(network)))
        n = len(network)
        crit_in = encoding_size([len(g) for g in groups], encoding) + state_length(n)
        agents = []
        for k, nodes in enumerate(groups):
            actor = MlpNet.init((state_length(n), *hidden, len(nodes)), "sigmoid", rng)
            critic = MlpNet.init((crit_in, *hidden, 1), "linear", rng)
            agents.append(AgentGroup(k, nodes, actor, critic))
        return cls(network.node_ids, agents, encoding, dict(config or {}))

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def grouping(self) -> tuple[tuple[int, ...], ...]:
        return tuple(g.nodes for g in self.groups)

    @property
    def critic_input_length(self) -> int:
        return encoding_size([g.size for g in self.groups], self.encoding) + state_length(self.n_nodes)

    def check_network(self, network: Network) -> None:
        if tuple(network.node_ids) != tuple(self.node_ids):
            raise GroupingError(f"ensemble was built for nodes {self.node_ids}, "
                                f"network has {network.node_ids}")

    def critic_input(self, states: np.ndarray, actions: Sequence[np.ndarray]):
        """Critic rows ``[encoded actions..., state]`` plus per-group Jacobians."""
        encs, jacs = zip(*(encode_group_action(a, self.encoding) for a in actions))
        return np.hstack(list(encs) + [np.atleast_2d(states)]), list(jacs)

    def decisions(self, actions: Sequence[np.ndarray]) -> np.ndarray:
        """Per-node activation bits in ``node_ids`` order."""
        pos = {u: i for i, u in enumerate(self.node_ids)}
        out = np.zeros(self.n_nodes, dtype=bool)
        for g, a in zip(self.groups, actions):
            for u, v in zip(g.nodes, np.asarray(a).ravel()):
                out[pos[u]] = v >= THRESHOLD
        return out

    def scores(self, state: np.ndarray) -> np.ndarray:
        """Noise-free actor outputs in ``node_ids`` order."""
        pos = {u: i for i, u in enumerate(self.node_ids)}
        out = np.zeros(self.n_nodes)
        for g in self.groups:
            for u, v in zip(g.nodes, forward(g.actor, state)):
                out[pos[u]] = v
        return out


def act(group: AgentGroup, state, noise_scale: float = 0.0, seed=None,
        pre_activated: Sequence[bool] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Continuous action (actor output plus clipped Gaussian noise) and its decisions.

    ``seed`` may be an int or a ``numpy`` Generator. ``pre_activated`` flags,
    aligned with ``group.nodes``, force those decisions on.
    """
    a = forward(group.actor, state)
    if noise_scale > 0:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        a = a + rng.normal(0.0, noise_scale, size=a.shape)
    a = np.clip(a, 0.0, 1.0)
    decisions = a >= THRESHOLD
    if pre_activated is not None:
        decisions = decisions | np.asarray(pre_activated, dtype=bool)
    return a, decisions
