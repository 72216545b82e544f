"""Central finite differences against the hand-written reverse mode."""
import numpy as np

from oran_placer.maddpg.nn import MlpNet, forward, gradients

H = 1e-5


def default_shapes():
    """Actor and critic layer sizes of the 8-node two-group and 14-node three-group ensembles."""
    shapes = []
    for n, groups, enc in ((8, (4, 4), 32), (14, (5, 5, 4), 80)):
        shapes += [((5 * n, 64, 64, m), "sigmoid") for m in sorted(set(groups))]
        shapes.append(((5 * n + enc, 64, 64, 1), "linear"))
    return shapes


def errors(net: MlpNet, rng: np.random.Generator, batch: int = 3) -> tuple[float, float]:
    """Norm-wise ``|g - fd| / (|g| + |fd|)`` and the worst element-wise
    ``|g - fd| / max(1, |g|)``, over every parameter and input coordinate."""
    x = rng.uniform(-1, 1, size=(batch, net.sizes[0]))
    up = rng.normal(size=(batch, net.sizes[-1]))

    def f():
        return float(np.sum(up * forward(net, x)))

    grads, dx = gradients(net, x, up)
    analytic, numeric = [], []
    for p, g in zip(net.params, grads):
        flat = p.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + H
            hi = f()
            flat[i] = old - H
            lo = f()
            flat[i] = old
            numeric.append((hi - lo) / (2 * H))
        analytic.append(g.reshape(-1))
    for i in range(x.size):
        xf = x.reshape(-1)
        old = xf[i]
        xf[i] = old + H
        hi = f()
        xf[i] = old - H
        lo = f()
        xf[i] = old
        numeric.append((hi - lo) / (2 * H))
    analytic.append(dx.reshape(-1))
    a = np.concatenate(analytic)
    n = np.asarray(numeric)
    norm = float(np.linalg.norm(a - n) / max(np.linalg.norm(a) + np.linalg.norm(n), 1e-300))
    elem = float(np.max(np.abs(a - n) / np.maximum(1.0, np.abs(a))))
    return norm, elem


def relative_error(net: MlpNet, rng: np.random.Generator, batch: int = 3) -> float:
    return max(errors(net, rng, batch))


def random_net(sizes, output, rng):
    """He-initialised net with the small output layer rescaled so gradients are not tiny."""
    net = MlpNet.init(sizes, output, rng)
    net.weights[-1] = rng.uniform(-0.3, 0.3, size=net.weights[-1].shape)
    net.biases[-1] = rng.uniform(-0.3, 0.3, size=net.biases[-1].shape)
    return net
