import numpy as np
import pytest

from isingvi import IsingModel, generate_topology


def chain2(beta=1.0, h=0.0):
    return IsingModel(2, np.array([[0, 1]]), np.array([beta]), np.full(2, float(h)))


def path3(beta=0.5, h=0.2):
    return IsingModel(3, np.array([[0, 1], [1, 2]]), np.full(2, beta),
                      np.full(3, float(h)))


def triangle(beta=0.4, h=0.1):
    return IsingModel(3, np.array([[0, 1], [0, 2], [1, 2]]), np.full(3, beta),
                      np.full(3, float(h)))


def cycle4(beta=0.4, h=0.1):
    return IsingModel(4, np.array([[0, 1], [1, 2], [2, 3], [0, 3]]),
                      np.full(4, beta), np.full(4, float(h)))


def star5(beta=0.3, h=0.2):
    edges = np.array([[0, k] for k in range(1, 5)])
    return IsingModel(5, edges, np.full(4, beta), np.full(5, float(h)))


def random_tree(n, rng, j_lo=0.1, j_hi=2.0, h_lo=0.0, h_hi=1.0):
    """Tree with node k attached to a random earlier node, random weights."""
    edges = [[int(rng.integers(0, k)), k] for k in range(1, n)]
    couplings = rng.uniform(j_lo, j_hi, size=n - 1)
    fields = rng.uniform(h_lo, h_hi, size=n)
    return IsingModel(n, np.array(edges), couplings, fields)


def random_ferro(n, m, rng, j_hi=1.0, h_hi=0.8):
    """Random simple graph with m edges, nonnegative couplings and fields."""
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    idx = rng.choice(len(pairs), size=min(m, len(pairs)), replace=False)
    edges = np.array([pairs[k] for k in sorted(idx)])
    couplings = rng.uniform(0.05, j_hi, size=len(edges))
    fields = rng.uniform(0.0, h_hi, size=n)
    return IsingModel(n, edges, couplings, fields)


def small_grid(rows, cols, beta=0.3, h=0.1):
    return generate_topology("grid", beta, h, rows=rows, cols=cols)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
