"""Centralized-critic training of the grouped activation agents."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..deployment import Deployment, objective_energy
from ..rfdh import rfdh_place
from ..scenario import EnergyParams, Network, RequestSet
from .agents import AgentEnsemble, act, encoding_size
from .env import encode_state, episode_batches, step_env
from .nn import Adam, forward, gradients, soft_update
from .replay import ReplayBuffer


class DivergenceError(RuntimeError):
    def __init__(self, episode: int, norm: float):
        super().__init__(f"parameter norm {norm:.3g} exceeded the guard in episode {episode}")
        self.episode = episode
        self.norm = norm


@dataclass
class TrainConfig:
    gamma: float = 0.95
    tau: float = 0.01
    lr_actor: float = 1e-4
    lr_critic: float = 1e-3
    buffer_size: int = 100_000
    batch_size: int = 64
    episodes: int = 1000
    steps_per_episode: int = 8
    noise: float = 0.2
    noise_decay: float = 0.999
    seed: int = 0
    hidden: tuple[int, ...] = (64, 64)
    encoding: str = "onehot"
    carry_over: bool = True
    divergence_norm: float = 1e6
    groups: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.groups is not None:
            self.groups = tuple(tuple(int(u) for u in g) for g in self.groups)
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        for name in ("buffer_size", "batch_size", "episodes", "steps_per_episode"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        if self.lr_actor <= 0 or self.lr_critic <= 0 or self.noise < 0:
            raise ValueError("step sizes must be positive and noise non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        d["groups"] = None if self.groups is None else [list(g) for g in self.groups]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class StepRecord:
    episode: int
    step: int
    reward: float


class Learner:
    """Optimizers and replay memory around an ensemble; one call per update."""

    def __init__(self, ensemble: AgentEnsemble, config: TrainConfig, rng: np.random.Generator):
        self.ensemble = ensemble
        self.config = config
        self.rng = rng
        self.actor_opt = [Adam(g.actor.params, config.lr_actor) for g in ensemble.groups]
        self.critic_opt = [Adam(g.critic.params, config.lr_critic) for g in ensemble.groups]
        self.buffer = ReplayBuffer(config.buffer_size, 5 * ensemble.n_nodes, ensemble.n_nodes)
        sizes = [g.size for g in ensemble.groups]
        self._splits = np.cumsum(sizes)[:-1]
        widths = [encoding_size([m], ensemble.encoding) for m in sizes]
        self._enc_offsets = np.cumsum([0] + widths)

    def split(self, actions: np.ndarray) -> list[np.ndarray]:
        return np.split(np.atleast_2d(actions), self._splits, axis=1)

    def critic_targets(self, rewards, next_states, dones) -> list[np.ndarray]:
        """``r + gamma * Q'(s', pi'(s'))`` per critic; the reward is shared."""
        ens, gamma = self.ensemble, self.config.gamma
        next_actions = [forward(g.target_actor, next_states) for g in ens.groups]
        x2, _ = ens.critic_input(next_states, next_actions)
        return [rewards + gamma * (1.0 - dones) * forward(g.target_critic, x2)[:, 0]
                for g in ens.groups]

    def update(self, batch) -> list[float]:
        """One critic and actor step per group, then soft target updates.

        Returns the critic losses.
        """
        _, states, actions, rewards, next_states, dones = batch
        ens = self.ensemble
        n = len(states)
        acts = self.split(actions)
        targets = self.critic_targets(rewards, next_states, dones)
        x, _ = ens.critic_input(states, acts)
        losses = []
        for g, opt, y in zip(ens.groups, self.critic_opt, targets):
            q = forward(g.critic, x)[:, 0]
            err = q - y
            losses.append(float(np.mean(err * err)))
            grads, _ = gradients(g.critic, x, (2.0 / n) * err[:, None])
            opt.step(grads)
        offsets = self._enc_offsets
        for k, (g, opt) in enumerate(zip(ens.groups, self.actor_opt)):
            a_k = forward(g.actor, states)
            joint = list(acts)
            joint[k] = a_k
            xk, jacs = ens.critic_input(states, joint)
            _, dx = gradients(g.critic, xk, np.full((n, 1), 1.0 / n))
            d_enc = dx[:, offsets[k]:offsets[k + 1]]
            d_a = d_enc if jacs[k] is None else np.einsum("bp,bpm->bm", d_enc, jacs[k])
            grads, _ = gradients(g.actor, states, -d_a)  # ascend Q
            opt.step(grads)
        for g in ens.groups:
            soft_update(g.target_critic, g.critic, self.config.tau)
            soft_update(g.target_actor, g.actor, self.config.tau)
        return losses

    def max_param_norm(self) -> float:
        return max(net.param_norm() for g in self.ensemble.groups
                   for net in (g.actor, g.critic, g.target_actor, g.target_critic))


def train(network: Network, params: EnergyParams, config: TrainConfig | None = None,
          stream: Callable[[int], Sequence[Sequence[RequestSet]]] | None = None,
          ensemble: AgentEnsemble | None = None,
          progress: Callable[[int, float], None] | None = None,
          ) -> tuple[AgentEnsemble, list[StepRecord]]:
    """Train from scratch (or continue ``ensemble``) on a deterministic batch stream.

    ``stream(e)`` gives the request batches of episode ``e``; by default random
    batches seeded by ``(config.seed, e)``. Everything random flows from
    ``config.seed``.
    """
    cfg = config or TrainConfig()
    rng = np.random.default_rng(cfg.seed)
    if ensemble is None:
        ensemble = AgentEnsemble.build(network, cfg.groups, cfg.hidden, cfg.encoding, rng,
                                       config=cfg.to_dict())
    ensemble.check_network(network)
    stream = stream or (lambda e: episode_batches(network, [cfg.seed, e], cfg.steps_per_episode))
    learner = Learner(ensemble, cfg, rng)
    base_pre = network.pre_activated
    views: dict[frozenset, Network] = {base_pre: network}
    pos = {u: i for i, u in enumerate(ensemble.node_ids)}
    history: list[StepRecord] = []
    sigma = cfg.noise
    for e in range(cfg.episodes):
        batches = list(stream(e))
        pre = base_pre
        state = encode_state(network, batches[0], pre)
        for h, requests in enumerate(batches):
            flags = np.zeros(ensemble.n_nodes, dtype=bool)
            for u in pre:
                flags[pos[u]] = True
            actions = [act(g, state, sigma, rng, [flags[pos[u]] for u in g.nodes])[0]
                       for g in ensemble.groups]
            decisions = ensemble.decisions(actions) | flags
            view = views.get(pre)
            if view is None:
                view = views[pre] = network.with_pre_activated(pre)
            nxt_requests = batches[h + 1] if h + 1 < len(batches) else None
            reward, nxt, dep = step_env(view, requests, decisions, params, nxt_requests,
                                        cfg.carry_over)
            if cfg.carry_over:
                pre = frozenset(dep.activations)
            done = h + 1 == len(batches)
            learner.buffer.add(state, np.concatenate(actions), reward, nxt, done)
            history.append(StepRecord(e, h, float(reward)))
            if len(learner.buffer) >= cfg.batch_size:
                learner.update(learner.buffer.sample(cfg.batch_size, rng))
            state = nxt
        sigma *= cfg.noise_decay
        norm = learner.max_param_norm()
        if not np.isfinite(norm) or norm > cfg.divergence_norm:
            raise DivergenceError(e, norm)
        if progress is not None:
            progress(e, float(np.mean([r.reward for r in history if r.episode == e])))
    return ensemble, history


# -- evaluation -------------------------------------------------------------------

@dataclass
class PolicyResult:
    deployment: Deployment
    objective_kj: float | None
    seconds: float
    repaired: int = 0
    info: dict = field(default_factory=dict)


def policy_deployment(ensemble: AgentEnsemble, network: Network, requests: Sequence[RequestSet],
                      params: EnergyParams) -> tuple[Deployment, int]:
    """Noise-free mask, then the heuristic.

    When the mask leaves requests unserved, servers are added one at a time in
    descending actor score until everything is served. Returns the deployment
    and the number of servers added.
    """
    ensemble.check_network(network)
    state = encode_state(network, requests)
    scores = ensemble.scores(state)
    on = scores >= 0.5
    mask = {u for u, b in zip(ensemble.node_ids, on) if b}
    dep, reward = rfdh_place(network, requests, mask, params)
    added = 0
    order = sorted((u for u in ensemble.node_ids if u not in mask | network.pre_activated),
                   key=lambda u: (-scores[ensemble.node_ids.index(u)], u))
    for u in order:
        if reward >= 0 or not requests:
            break
        mask.add(u)
        added += 1
        dep, reward = rfdh_place(network, requests, mask, params)
    return dep, added


def evaluate_policy(ensemble: AgentEnsemble, network: Network,
                    batches: Sequence[Sequence[RequestSet]],
                    params: EnergyParams) -> list[PolicyResult]:
    """Per batch: deployment, objective at zero idle time (``None`` if unserved) and latency."""
    ensemble.check_network(network)
    out = []
    for requests in batches:
        t0 = time.perf_counter()
        dep, added = policy_deployment(ensemble, network, requests, params)
        seconds = time.perf_counter() - t0
        served = not dep.info.get("unserved")
        kj = objective_energy(dep, network, params).total_kj(0.0) if served else None
        out.append(PolicyResult(dep, kj, seconds, added))
    return out
