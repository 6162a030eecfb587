import numpy as np
import pytest

from agecodec.pmf import new_pmf


def head_tail_pmf(n: int):
    tail = 2**n
    return new_pmf([1 - 1 / n] + [1 / (n * tail)] * tail)


def head_tail_alt(n: int):
    tail = 2**n
    head = 2.0 ** -np.sqrt(n)
    return new_pmf([head] + [(1 - head) / tail] * tail)


def skip_example_pmf():
    return new_pmf([1 / 4] * 3 + [1 / 244] * 61)


def random_pmf(rng: np.random.Generator, n_max: int = 64, n_min: int = 2):
    n = int(rng.integers(n_min, n_max + 1))
    alpha = float(rng.choice([0.1, 0.5, 1.0, 5.0]))
    w = rng.dirichlet(np.full(n, alpha))
    w = np.maximum(w, 1e-300)
    return new_pmf(w)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
