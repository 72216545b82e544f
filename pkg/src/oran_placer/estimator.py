"""scikit-learn style wrapper around the activation policy.

``X`` is always a sequence of request batches (each a list of
:class:`~oran_placer.scenario.RequestSet`); the network is a constructor
parameter.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .maddpg import TrainConfig, evaluate_policy, policy_deployment, train
from .maddpg.checkpoint import load_checkpoint, save_checkpoint
from .scenario import EnergyParams, Network, RequestSet


class MaddpgPlacer(BaseEstimator):
    """Learns which servers to wake for a request batch; placement is done by the heuristic.

    ``fit(X)`` trains on ``X`` cut into episodes of ``steps_per_episode``
    batches, or on random batches when ``X`` is ``None``. ``predict`` returns
    the activation bits per batch (after repair), ``place`` the deployments.
    """

    def __init__(self, network: Network | None = None, energy: EnergyParams | None = None,
                 groups=None, episodes: int = 1000, steps_per_episode: int = 8,
                 gamma: float = 0.95, tau: float = 0.01, lr_actor: float = 1e-4,
                 lr_critic: float = 1e-3, batch_size: int = 64, buffer_size: int = 100_000,
                 noise: float = 0.2, noise_decay: float = 0.999, hidden=(64, 64),
                 encoding: str = "onehot", carry_over: bool = True, random_state: int = 0):
        self.network = network
        self.energy = energy
        self.groups = groups
        self.episodes = episodes
        self.steps_per_episode = steps_per_episode
        self.gamma = gamma
        self.tau = tau
        self.lr_actor = lr_actor
        self.lr_critic = lr_critic
        self.batch_size = batch_size
        self.buffer_size = buffer_size
        self.noise = noise
        self.noise_decay = noise_decay
        self.hidden = hidden
        self.encoding = encoding
        self.carry_over = carry_over
        self.random_state = random_state

    def _config(self) -> TrainConfig:
        return TrainConfig(gamma=self.gamma, tau=self.tau, lr_actor=self.lr_actor,
                           lr_critic=self.lr_critic, buffer_size=self.buffer_size,
                           batch_size=self.batch_size, episodes=self.episodes,
                           steps_per_episode=self.steps_per_episode, noise=self.noise,
                           noise_decay=self.noise_decay, seed=self.random_state,
                           hidden=tuple(self.hidden), encoding=self.encoding,
                           carry_over=self.carry_over, groups=self.groups)

    def _params(self) -> EnergyParams:
        return self.energy if self.energy is not None else EnergyParams()

    def fit(self, X: Sequence[Sequence[RequestSet]] | None = None, y=None):
        if self.network is None:
            raise ValueError("MaddpgPlacer needs a network")
        cfg = self._config()
        stream = None
        if X is not None:
            batches = [list(b) for b in X]
            if not batches:
                raise ValueError("X must hold at least one request batch")
            h = cfg.steps_per_episode
            stream = lambda e: [batches[(e * h + k) % len(batches)] for k in range(h)]  # noqa: E731
        self.ensemble_, history = train(self.network, self._params(), cfg, stream)
        self.history_ = [(r.episode, r.step, r.reward) for r in history]
        self.n_nodes_ = len(self.network)
        return self

    def place(self, X):
        check_is_fitted(self, "ensemble_")
        return [policy_deployment(self.ensemble_, self.network, list(b), self._params())[0]
                for b in X]

    def predict(self, X) -> np.ndarray:
        """Activation bits, shape ``(n_batches, n_nodes)``, in node-id order."""
        ids = self.network.node_ids
        return np.array([[u in d.activations for u in ids] for d in self.place(X)], dtype=bool)

    def evaluate(self, X):
        check_is_fitted(self, "ensemble_")
        return evaluate_policy(self.ensemble_, self.network, [list(b) for b in X], self._params())

    def score(self, X, y=None) -> float:
        """Negative mean objective in kJ (higher is better); unserved batches count as inf."""
        kj = [r.objective_kj if r.objective_kj is not None else np.inf for r in self.evaluate(X)]
        return -float(np.mean(kj))

    def save(self, path):
        check_is_fitted(self, "ensemble_")
        return save_checkpoint(self.ensemble_, path)

    @classmethod
    def from_checkpoint(cls, path, network: Network, energy: EnergyParams | None = None):
        ensemble = load_checkpoint(path)
        ensemble.check_network(network)
        cfg = TrainConfig.from_dict(ensemble.config) if ensemble.config else TrainConfig()
        est = cls(network, energy, groups=ensemble.grouping, episodes=cfg.episodes,
                  steps_per_episode=cfg.steps_per_episode, gamma=cfg.gamma, tau=cfg.tau,
                  lr_actor=cfg.lr_actor, lr_critic=cfg.lr_critic, batch_size=cfg.batch_size,
                  buffer_size=cfg.buffer_size, noise=cfg.noise, noise_decay=cfg.noise_decay,
                  hidden=cfg.hidden, encoding=ensemble.encoding, carry_over=cfg.carry_over,
                  random_state=cfg.seed)
        est.ensemble_ = ensemble
        est.history_ = []
        est.n_nodes_ = len(network)
        return est
