import itertools

import numpy as np
import pytest

from rdlnlab.hmm import HmmModel, build_hmm, build_state_maps


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_hmm():
    return build_hmm(2, 2, 3, 0.6, seed=3)


@pytest.fixture(scope="session")
def default_hmm():
    return build_hmm(10, 3, 13, 0.5, seed=42)


@pytest.fixture(scope="session")
def default_maps(default_hmm):
    return build_state_maps(default_hmm)


def random_stochastic(rng, n, zeros=0.0):
    """Row-stochastic matrix; ``zeros`` is the chance an off-diagonal entry is pruned."""
    T = rng.random((n, n)) + 0.05
    if zeros:
        T[(rng.random((n, n)) < zeros) & ~np.eye(n, dtype=bool)] = 0.0
    return T / T.sum(axis=1, keepdims=True)


def random_posterior(rng, n):
    p = rng.random(n) + 0.01
    return p / p.sum()


def raw_hmm(T, init, dim=1):
    """Wrap arbitrary T/init in an HmmModel, bypassing topology validation."""
    n = T.shape[0]
    return HmmModel(n, 1, dim, np.array(T, dtype=float), np.array(init, dtype=float),
                    np.zeros((n, dim)), np.ones((n, dim)))


def all_paths(n_states, n_frames):
    return itertools.product(range(n_states), repeat=n_frames)


def path_prob(path, init, T, obs):
    p = init[path[0]] * obs[0, path[0]]
    for i in range(1, len(path)):
        p *= T[path[i - 1], path[i]] * obs[i, path[i]]
    return p
