import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from oran_placer.deployment import validate
from oran_placer.estimator import MaddpgPlacer
from oran_placer.harness import random_batches

FAST = dict(episodes=4, steps_per_episode=3, hidden=(8, 8), batch_size=4, buffer_size=64)


@pytest.fixture(scope="module")
def fitted(sample8):
    net, params = sample8
    return MaddpgPlacer(net, params, random_state=3, **FAST).fit()


def test_params_round_trip_through_clone(sample8):
    net, params = sample8
    est = MaddpgPlacer(net, params, gamma=0.5, **FAST)
    twin = clone(est)
    assert twin.get_params()["gamma"] == 0.5
    assert twin.get_params()["episodes"] == 4
    assert not hasattr(twin, "ensemble_")


def test_unfitted_raises(sample8):
    net, params = sample8
    with pytest.raises(NotFittedError):
        MaddpgPlacer(net, params).predict(random_batches(net, 1, 0))


def test_needs_network():
    with pytest.raises(ValueError):
        MaddpgPlacer(**FAST).fit()


def test_predict_shape_and_place(fitted, sample8):
    net, params = sample8
    X = random_batches(net, 3, 11)
    bits = fitted.predict(X)
    assert bits.shape == (3, 8) and bits.dtype == bool
    for row, dep, batch in zip(bits, fitted.place(X), X):
        assert set(np.flatnonzero(row) + 1) == set(dep.activations)
        assert validate(dep, net, params, batch).ok


def test_score_is_negative_mean_kj(fitted, sample8):
    net, _ = sample8
    X = random_batches(net, 4, 12)
    res = fitted.evaluate(X)
    assert fitted.score(X) == pytest.approx(-np.mean([r.objective_kj for r in res]))


def test_fit_on_given_batches_is_deterministic(sample8):
    net, params = sample8
    X = random_batches(net, 5, 1)
    a = MaddpgPlacer(net, params, random_state=0, **FAST).fit(X)
    b = MaddpgPlacer(net, params, random_state=0, **FAST).fit(X)
    assert a.history_ == b.history_
    assert len(a.history_) == 4 * 3
    with pytest.raises(ValueError):
        MaddpgPlacer(net, params, **FAST).fit([])


def test_save_and_reload(fitted, sample8, tmp_path):
    net, params = sample8
    path = fitted.save(tmp_path / "p.json")
    back = MaddpgPlacer.from_checkpoint(path, net, params)
    X = random_batches(net, 3, 5)
    assert np.array_equal(back.predict(X), fitted.predict(X))
    assert back.get_params()["hidden"] == (8, 8)
    assert back.random_state == 3
