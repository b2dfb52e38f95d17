import random
from itertools import combinations
from math import gcd

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hecketree.assembly import (
    assembly_matrix,
    cokernel_report,
    depth_compatibility,
    det_int,
    in_image,
    integer_kernel,
    mat_mul_int,
    rank_int,
    sl3_cube_report,
    smith_normal_form,
    snf_diagonal,
)
from hecketree import kernels


def _determinantal_divisors(M):
    """d_k = gcd of k x k minors; invariant factors are d_k / d_{k-1}."""
    r, c = len(M), len(M[0])
    out = []
    prev = 1
    for k in range(1, min(r, c) + 1):
        g = 0
        for rows in combinations(range(r), k):
            for cols in combinations(range(c), k):
                g = gcd(g, det_int([[M[i][j] for j in cols] for i in rows]))
        if g == 0:
            break
        out.append(g // prev)
        prev = g
    return out


def _check_snf(M):
    D, U, V = smith_normal_form(M)
    assert mat_mul_int(mat_mul_int(U, M), V) == D
    assert abs(det_int(U)) == 1 and abs(det_int(V)) == 1
    k = min(len(D), len(D[0]))
    diag = [D[i][i] for i in range(k)]
    assert all(D[i][j] == 0 for i in range(len(D)) for j in range(len(D[0])) if i != j)
    nz = [d for d in diag if d]
    assert all(d > 0 for d in nz)
    assert all(b % a == 0 for a, b in zip(nz, nz[1:]))
    assert diag[len(nz):] == [0] * (k - len(nz))
    return nz


def test_snf_small_examples():
    assert _check_snf([[2, 0], [0, 3]]) == [1, 6]
    assert _check_snf([[0, 0], [0, 0]]) == []
    assert _check_snf([[2, 4, 4], [-6, 6, 12], [10, -4, -16]]) == [2, 6, 12]


@given(st.lists(st.lists(st.integers(-9, 9), min_size=3, max_size=3), min_size=1, max_size=4))
def test_snf_matches_determinantal_divisors(M):
    assert _check_snf(M) == _determinantal_divisors(M)


def _random_unimodular(rng, n, steps=30):
    A = [[int(i == j) for j in range(n)] for i in range(n)]
    for _ in range(steps):
        i, j = rng.sample(range(n), 2)
        q = rng.choice([-1, 1])
        A[i] = [a + q * b for a, b in zip(A[i], A[j])]
    return A


def test_snf_unimodular():
    rng = random.Random(3)
    for _ in range(100):
        n = rng.randint(2, 12)
        A = _random_unimodular(rng, n, steps=3 * n)
        assert abs(det_int(A)) == 1
        assert _check_snf(A) == [1] * n


def test_compiled_snf_agrees():
    rng = random.Random(4)
    for _ in range(50):
        r, c = rng.randint(1, 8), rng.randint(1, 8)
        M = [[rng.randint(-9, 9) for _ in range(c)] for _ in range(r)]
        assert kernels.snf_diagonal(M) == snf_diagonal(M)


def test_rank_and_kernel():
    M = [[1, 2, 3], [2, 4, 6]]
    assert rank_int(M) == 1
    ker = integer_kernel(M)
    assert len(ker) == 2
    for y in ker:
        assert mat_mul_int(M, [[v] for v in y]) == [[0], [0]]
    assert in_image([[2], [0]], [4, 0])
    assert not in_image([[2], [0]], [1, 0])


def test_cokernel_examples():
    assert cokernel_report([[1, 0], [0, 1]]).describe() == "0"
    rep = cokernel_report([[2]])
    assert rep.free_rank == 0 and rep.torsion == [2]
    assert rep.describe() == "Z/2"
    assert cokernel_report([[1], [0]]).describe() == "Z^1"


# regression fixtures recorded after the first verified run

def test_level_one_fixture():
    A = assembly_matrix(2, 1, oracle=True)
    assert A.matrix == [[1], [0], [1], [-1], [0], [-1]]
    rep = cokernel_report(A)
    assert rep.diagonal == [1]
    assert rep.free_rank == 5 and rep.torsion == []
    assert all(A.degree_balance())
    assert A.meta()["excluded_deep"] == 3


def test_level_two_fixture():
    A = assembly_matrix(2, 2, oracle=True)
    assert A.shape == (20, 5)
    rep = cokernel_report(A)
    assert rep.diagonal == [1] * 5
    assert rep.free_rank == 15
    assert all(A.degree_balance())
    assert rep.meta["source_irreducibles"] == 20


def test_full_variant():
    A = assembly_matrix(2, 1, full=True)
    assert A.shape == (6, 4)
    assert cokernel_report(A).describe() == "Z^3"
    bal = A.degree_balance()
    deep = set(A.meta()["deep_columns"])
    assert deep
    assert all(bal[j] for j in range(4) if j not in deep)
    assert not any(bal[j] for j in deep)


def test_sign_flip_same_cokernel():
    for m in (1, 2):
        a = cokernel_report(assembly_matrix(2, m, sign=1))
        b = cokernel_report(assembly_matrix(2, m, sign=-1))
        assert (a.free_rank, a.torsion) == (b.free_rank, b.torsion)


def test_snf_reconstruction_on_assembly():
    for m in (1, 2):
        assert _check_snf(assembly_matrix(2, m).matrix) == snf_diagonal(assembly_matrix(2, m).matrix)


def test_depth_compatibility():
    rep = depth_compatibility(2, 1, 2)
    assert rep["commutes"] and rep["residual"] == 0
    assert rep["coker_map_injective"]
    same = depth_compatibility(2, 1, 1)
    assert same["commutes"]
    with pytest.raises(ValueError):
        depth_compatibility(2, 2, 1)


def test_p3_level_one():
    A = assembly_matrix(3, 1, oracle=True)
    assert all(A.degree_balance())
    rep = cokernel_report(A)
    assert rep.rows - rep.rank == rep.free_rank


@pytest.mark.parametrize("p,ve,ec,vc", [(2, 7, 3, 21), (3, 13, 4, 52)])
def test_sl3_report(p, ve, ec, vc):
    rep = sl3_cube_report(p, 1)
    assert set(rep["index_vertex_edge"].values()) == {ve}
    assert set(rep["index_edge_chamber"].values()) == {ec}
    assert set(rep["index_vertex_chamber"].values()) == {vc}
    assert rep["consistent"] and rep["h_cycle_symmetric"]


def test_to_json_roundtrip_shape():
    A = assembly_matrix(2, 1)
    js = A.to_json()
    assert js["matrix"] == A.matrix
    assert js["coker"] == {"free_rank": 5, "torsion": []}
    assert A.to_csv().splitlines()[0] == "1"
