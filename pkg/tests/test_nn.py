import json
import math
from pathlib import Path

import numpy as np
import pytest

from oran_placer.maddpg.nn import Adam, MlpNet, ShapeError, forward, gradients, soft_update

from gradcheck import default_shapes, random_net, relative_error

GOLDEN = Path(__file__).parent / "golden" / "nn_forward.json"


def hand_net():
    return MlpNet((2, 2, 1), "sigmoid",
                  [np.array([[1.0, -1.0], [2.0, 0.5]]), np.array([[1.0], [-2.0]])],
                  [np.array([0.0, -1.0]), np.array([0.5])])


def test_hand_computed_forward():
    # hidden: relu([1 + 4, -1 + 1 - 1]) = [5, 0]; output: sigmoid(5 + 0.5)
    assert forward(hand_net(), [1.0, 2.0])[0] == pytest.approx(1 / (1 + math.exp(-5.5)), abs=1e-15)


def test_hand_computed_gradient():
    grads, dx = gradients(hand_net(), [1.0, 2.0], [1.0])
    s = 1 / (1 + math.exp(-5.5))
    ds = s * (1 - s)
    # only the first hidden unit is active
    assert grads[2][:, 0] == pytest.approx([5 * ds, 0.0])
    assert grads[3] == pytest.approx([ds])
    assert grads[0] == pytest.approx(np.array([[ds, 0.0], [2 * ds, 0.0]]))
    assert dx == pytest.approx([ds * 1.0, ds * 2.0])


def test_zero_sigmoid_net_outputs_half():
    net = MlpNet((6, 4, 3), "sigmoid")
    assert np.all(forward(net, np.ones((5, 6))) == 0.5)


def test_identity_linear_net():
    net = MlpNet((3, 3), "linear", [np.eye(3)], [np.zeros(3)])
    x = np.array([[1.0, -2.0, 3.5]])
    assert np.array_equal(forward(net, x), x)


def test_single_and_batch_inputs_agree():
    net = random_net((4, 8, 2), "sigmoid", np.random.default_rng(1))
    x = np.random.default_rng(2).normal(size=(3, 4))
    batch = forward(net, x)
    assert batch.shape == (3, 2)
    for row, out in zip(x, batch):
        assert np.allclose(forward(net, row), out)


def test_shape_errors():
    net = MlpNet((3, 2), "linear")
    with pytest.raises(ShapeError):
        forward(net, np.ones(4))
    with pytest.raises(ShapeError):
        gradients(net, np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(ShapeError):
        MlpNet((3, 2), "linear", [np.ones((2, 3))], [np.ones(2)])
    with pytest.raises(ShapeError):
        MlpNet((3,))


def test_sigmoid_is_stable_for_large_inputs():
    net = MlpNet((1, 1), "sigmoid", [np.array([[1.0]])], [np.zeros(1)])
    out = forward(net, np.array([[1000.0], [-1000.0]]))
    assert np.all(np.isfinite(out)) and out[0, 0] == 1.0 and out[1, 0] == 0.0


@pytest.mark.parametrize("sizes,output", [((5, 7, 3), "sigmoid"), ((4, 6, 6, 1), "linear"),
                                          ((3, 2), "sigmoid")])
@pytest.mark.parametrize("seed", range(10))
def test_gradients_match_finite_differences(sizes, output, seed):
    rng = np.random.default_rng(seed)
    assert relative_error(random_net(sizes, output, rng), rng) < 1e-4


@pytest.mark.parametrize("sizes,output", default_shapes()[:2])
def test_default_shapes_gradient(sizes, output):
    rng = np.random.default_rng(42)
    assert relative_error(random_net(sizes, output, rng), rng, batch=2) < 1e-4


def test_constant_network_has_zero_gradients():
    net = MlpNet((3, 4, 2), "linear")
    grads, dx = gradients(net, np.ones((2, 3)), np.ones((2, 2)))
    assert all(not np.any(g) for g in grads[:-1]) and not np.any(dx)
    # the output bias still feels the upstream signal
    assert np.array_equal(grads[-1], [2.0, 2.0])


def test_single_linear_layer_weight_gradient_is_input():
    net = MlpNet((3, 1), "linear", [np.array([[0.3], [-0.2], [0.7]])], [np.zeros(1)])
    x = np.array([1.5, -2.0, 0.25])
    grads, _ = gradients(net, x, [1.0])
    assert np.array_equal(grads[0][:, 0], x)


def test_init_is_seeded_and_output_layer_small():
    a = MlpNet.init((10, 16, 3), "sigmoid", np.random.default_rng(5))
    b = MlpNet.init((10, 16, 3), "sigmoid", np.random.default_rng(5))
    assert all(np.array_equal(p, q) for p, q in zip(a.params, b.params))
    assert np.abs(a.weights[-1]).max() <= 3e-3
    assert np.all(a.biases[0] == 0)


def test_golden_forward():
    doc = json.loads(GOLDEN.read_text())
    net = MlpNet.init(tuple(doc["sizes"]), doc["output"], np.random.default_rng(doc["seed"]))
    x = np.linspace(-1, 1, doc["sizes"][0])
    assert forward(net, x).tolist() == pytest.approx(doc["output_values"], abs=1e-12)


def test_adam_first_step_moves_by_lr():
    p = [np.array([1.0, -1.0])]
    opt = Adam(p, lr=0.1)
    opt.step([np.array([3.0, -0.5])])
    assert p[0] == pytest.approx([0.9, -0.9], abs=1e-6)


def test_adam_minimises_quadratic():
    p = [np.array([4.0, -3.0])]
    opt = Adam(p, lr=0.05)
    for _ in range(2000):
        opt.step([2 * p[0]])
    assert np.abs(p[0]).max() < 1e-2


def test_soft_update_blends():
    rng = np.random.default_rng(0)
    online = MlpNet.init((3, 4, 2), "linear", rng)
    target = MlpNet.init((3, 4, 2), "linear", rng)
    before = [t.copy() for t in target.params]
    soft_update(target, online, 0.25)
    for t, b, o in zip(target.params, before, online.params):
        assert np.allclose(t, 0.75 * b + 0.25 * o)
    soft_update(target, online, 1.0)
    assert all(np.array_equal(t, o) for t, o in zip(target.params, online.params))


def test_copy_is_deep():
    net = MlpNet.init((2, 3, 1), "linear", np.random.default_rng(0))
    c = net.copy()
    c.weights[0][0, 0] += 1
    assert net.weights[0][0, 0] != c.weights[0][0, 0]
