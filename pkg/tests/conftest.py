import sys
from pathlib import Path

import pytest

from oran_placer.scenario import (DEFAULT_CLASSES, EnergyParams, Link, Mec, Network, RequestSet,
                                  sample_scenario)

sys.path.insert(0, str(Path(__file__).parent))


def make_network(classes, links, pre=()):
    """``classes``: class ids for nodes 1..n; ``links``: (m, n, km[, gbps])."""
    mecs = tuple(Mec(i + 1, DEFAULT_CLASSES[c], (i + 1) in set(pre)) for i, c in enumerate(classes))
    objs = tuple(Link(l[0], l[1], l[2], l[3] if len(l) > 3 else 50) for l in links)
    return Network(mecs, objs)


def req(source, fh=20, e2e=40, data=10, du=10, upf=4):
    return RequestSet(source, fh, e2e, data, du, upf)


@pytest.fixture(scope="session")
def sample8():
    return sample_scenario("sample8")


@pytest.fixture(scope="session")
def sample14():
    return sample_scenario("sample14")


@pytest.fixture
def params():
    return EnergyParams()
