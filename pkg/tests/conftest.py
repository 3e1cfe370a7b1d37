import numpy as np
import pytest

from sazig.model import Link, ModelState, SideParams
from sazig.sparse import SparseCountMatrix


def random_state(rng, n_rows, n_cols, d, link=Link.LOG, shape=2.0, scale=0.3):
    """Small random state whose means are valid for ``link``."""
    def side(n):
        vectors = rng.uniform(-scale, scale, (n, d))
        bias_b = rng.uniform(-0.5, 0.5, n)
        if link is Link.LOG:
            bias_e = rng.uniform(-0.3, 0.3, n)
        else:
            bias_e = rng.uniform(-1.5, -1.0, n)
        return SideParams(vectors, bias_b, bias_e)
    return ModelState(side(n_rows), side(n_cols), link=link, shape=shape)


def random_matrix(rng, n_rows, n_cols, density=0.5, ensure_each=True):
    """Random positive entries; optionally every row and column gets a positive and a zero."""
    mask = rng.random((n_rows, n_cols)) < density
    if ensure_each:
        for i in range(n_rows):
            mask[i, i % n_cols] = True
            mask[i, (i + 1) % n_cols] = False if n_cols > 1 else True
        for j in range(n_cols):
            if not mask[:, j].any():
                mask[j % n_rows, j] = True
    values = rng.gamma(2.0, 0.7, (n_rows, n_cols))
    triples = [(i, j, values[i, j]) for i, j in zip(*np.nonzero(mask))]
    return SparseCountMatrix.from_triples(triples, n_rows, n_cols)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_instance(rng):
    """6x5 matrix with a d=2 log-link state."""
    Y = random_matrix(rng, 6, 5)
    state = random_state(rng, 6, 5, 2)
    return Y, state


@pytest.fixture
def toy_matrix():
    return SparseCountMatrix.from_triples([(0, 1, 2.0), (1, 0, 0.5), (1, 2, 1.5), (2, 2, 3.0)], 3, 3)
