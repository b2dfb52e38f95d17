import random

import numpy as np
import pytest

from hecketree import kernels
from hecketree.reptheory import FiniteGroup, finite_quotient

compiled = pytest.mark.skipif("compiled" not in kernels.available_backends(), reason="extension not built")


@pytest.fixture
def restore_backend():
    old = kernels.backend()
    yield
    kernels.use_backend(old)


def _fresh(spec, m, p):
    G = finite_quotient(spec, m, p)
    return FiniteGroup(G.name, G.M, G.elements, G.gens)


def _tables(spec, m, p):
    G = _fresh(spec, m, p)
    return G.codes, G.table, G.inv, G.class_of, G.class_constants


@compiled
@pytest.mark.parametrize("spec,m,p", [("U0", 1, 2), ("U0", 2, 2), ("U0", 1, 3), ("IN", 2, 2)])
def test_backends_agree(spec, m, p, restore_backend):
    kernels.use_backend("compiled")
    a = _tables(spec, m, p)
    kernels.use_backend("python")
    b = _tables(spec, m, p)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


@compiled
def test_snf_backends_agree(restore_backend):
    rng = random.Random(0)
    for _ in range(40):
        r, c = rng.randint(1, 7), rng.randint(1, 7)
        M = [[rng.randint(-5, 5) for _ in range(c)] for _ in range(r)]
        kernels.use_backend("compiled")
        a = kernels.snf_diagonal(M)
        kernels.use_backend("python")
        assert kernels.snf_diagonal(M) == a


def test_snf_big_entries_fall_back():
    M = [[2**40, 0], [0, 3 * 2**40]]
    assert kernels.snf_diagonal(M) == [2**40, 3 * 2**40]


def test_python_backend_character_table(restore_backend):
    kernels.use_backend("python")
    G = _fresh("U0", 1, 3)
    assert sorted(G.character_table.degrees) == [1, 1, 1, 2, 2, 2, 3]


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.use_backend("gpu")
