"""Small dense networks with hand-written reverse mode and an Adam optimizer."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OUTPUTS = ("sigmoid", "linear")


class ShapeError(ValueError):
    pass


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # split by sign so large |z| never overflows exp
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class MlpNet:
    """Fully connected net: ReLU hidden layers and a sigmoid or linear output layer.

    ``weights[k]`` has shape ``(sizes[k], sizes[k + 1])``.
    """

    sizes: tuple[int, ...]
    output: str = "linear"
    weights: list[np.ndarray] = field(default_factory=list)
    biases: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.sizes = tuple(int(s) for s in self.sizes)
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise ShapeError(f"need at least two positive layer sizes, got {self.sizes}")
        if self.output not in OUTPUTS:
            raise ValueError(f"output must be one of {OUTPUTS}")
        if not self.weights:
            self.weights = [np.zeros((a, b)) for a, b in zip(self.sizes, self.sizes[1:])]
            self.biases = [np.zeros(b) for b in self.sizes[1:]]
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.sizes[k], self.sizes[k + 1]) or b.shape != (self.sizes[k + 1],):
                raise ShapeError(f"layer {k} parameters do not match sizes {self.sizes}")

    @classmethod
    def init(cls, sizes, output: str, rng: np.random.Generator) -> "MlpNet":
        """He-uniform hidden layers; the output layer starts small."""
        net = cls(tuple(sizes), output)
        last = len(net.weights) - 1
        for k, (a, b) in enumerate(zip(net.sizes, net.sizes[1:])):
            bound = 3e-3 if k == last else np.sqrt(6.0 / a)
            net.weights[k] = rng.uniform(-bound, bound, size=(a, b))
            net.biases[k] = np.zeros(b) if k < last else rng.uniform(-bound, bound, size=b)
        return net

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "MlpNet":
        return MlpNet(self.sizes, self.output, [w.copy() for w in self.weights],
                      [b.copy() for b in self.biases])

    def param_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(p * p)) for p in self.params)))


def _check_input(net: MlpNet, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = x[None, :] if single else x
    if x2.ndim != 2 or x2.shape[1] != net.sizes[0]:
        raise ShapeError(f"input of shape {x.shape} does not match first layer {net.sizes[0]}")
    return x2, single


def _forward_cache(net: MlpNet, x: np.ndarray):
    acts = [x]
    pre = []
    h = x
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        pre.append(z)
        if k < last:
            h = np.maximum(z, 0.0)
        else:
            h = _sigmoid(z) if net.output == "sigmoid" else z
        acts.append(h)
    return acts, pre


def forward(net: MlpNet, x) -> np.ndarray:
    """Output for one input vector or a batch of row vectors."""
    x2, single = _check_input(net, x)
    out = _forward_cache(net, x2)[0][-1]
    return out[0] if single else out


def gradients(net: MlpNet, x, upstream) -> tuple[list[np.ndarray], np.ndarray]:
    """Gradients of ``sum(upstream * forward(net, x))``.

    Returns parameter gradients in :attr:`MlpNet.params` order, summed over the
    batch, and the gradient with respect to the input.
    """
    x2, single = _check_input(net, x)
    acts, pre = _forward_cache(net, x2)
    g = np.asarray(upstream, dtype=float)
    g = g[None, :] if g.ndim == 1 else g
    if g.shape != acts[-1].shape:
        raise ShapeError(f"upstream shape {g.shape} does not match output {acts[-1].shape}")
    if net.output == "sigmoid":
        g = g * acts[-1] * (1.0 - acts[-1])
    grads: list[np.ndarray] = []
    for k in range(len(net.weights) - 1, -1, -1):
        grads = [acts[k].T @ g, g.sum(axis=0)] + grads
        g = g @ net.weights[k].T
        if k > 0:
            g = g * (pre[k - 1] > 0)
    return grads, (g[0] if single else g)


class Adam:
    """Adaptive-moment steps on a fixed list of arrays, updated in place."""

    def __init__(self, params: list[np.ndarray], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def soft_update(target: MlpNet, online: MlpNet, tau: float) -> None:
    """``target <- tau * online + (1 - tau) * target``, in place."""
    for t, o in zip(target.params, online.params):
        t *= 1.0 - tau
        t += tau * o
