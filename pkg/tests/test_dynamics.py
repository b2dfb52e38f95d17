import random
from fractions import Fraction as Q

import pytest

from hecketree.building import base_vertex, neighbors
from hecketree import dynamics as dy


P = 2


def test_d_G_is_rho():
    rng = random.Random(1)
    for _ in range(30):
        g = dy.random_group_element(rng, P, 3)
        h = dy.random_group_element(rng, P, 3)
        iv = dy.d_G(g, h, P)
        assert iv.exact
        assert iv.hi == dy.rho(dy.mat_mul(dy.mat_inv(g), h), P)
        assert dy.d_G(h, g, P).hi == iv.hi


def test_rho_values():
    assert dy.rho(dy.identity2(), P) == 0
    assert dy.rho(dy.random_near(random.Random(0), P, 3), P) <= Q(1, 8)
    assert dy.rho(dy.diag(P, Q(1, P)), P) == 2
    assert dy.rho(((Q(0), Q(1)), (Q(-1), Q(0))), P) == 1


def test_d_G_left_invariant_and_triangle():
    rng = random.Random(2)
    for _ in range(30):
        a, b, c, x = (dy.random_group_element(rng, P, 2) for _ in range(4))
        assert dy.d_G(dy.mat_mul(x, a), dy.mat_mul(x, b), P).hi == dy.d_G(a, b, P).hi
        assert dy.d_G(a, c, P).hi <= dy.d_G(a, b, P).hi + dy.d_G(b, c, P).hi


# flow space

@pytest.mark.parametrize("p", [2, 3])
@pytest.mark.parametrize("tau", [Q(1, 2), Q(1), Q(2), Q(-3, 4)])
def test_flow_isometry(p, tau):
    line = dy.standard_line(p)
    assert abs(dy.d_FS(line, line.flow(tau)) - abs(float(tau))) < 1e-9


def test_d_FS_constant_pair():
    x0 = base_vertex(P)
    y = neighbors(x0)[0]
    c, c2 = dy.constant_geodesic(x0), dy.constant_geodesic(y)
    # integral of e^{-|t|}/2 * 1 over the line
    assert abs(dy.d_FS(c, c2) - 1.0) < 1e-12
    assert dy.d_FS(c, c) == 0


def test_d_FS_certified_error_small():
    rng = random.Random(5)
    for _ in range(10):
        a, b = dy.random_geodesic(rng, P), dy.random_geodesic(rng, P)
        cert = dy.d_FS_certified(a, b)
        assert cert.error < 1e-10


def test_d_FS_metric_samples():
    rng = random.Random(6)
    for _ in range(40):
        a, b, c = (dy.random_geodesic(rng, P) for _ in range(3))
        ab, bc, ac = dy.d_FS(a, b), dy.d_FS(b, c), dy.d_FS(a, c)
        assert ab == dy.d_FS(b, a)
        assert ac <= ab + bc + 1e-9


def test_d_FS_group_invariant():
    rng = random.Random(7)
    for _ in range(10):
        a, b = dy.random_geodesic(rng, P), dy.random_geodesic(rng, P)
        g = dy.random_group_element(rng, P, 2)
        assert abs(dy.d_FS(a.act(g), b.act(g)) - dy.d_FS(a, b)) < 1e-9


def test_flow_equivariance():
    rng = random.Random(8)
    for _ in range(20):
        c = dy.random_geodesic(rng, P)
        g = dy.random_group_element(rng, P, 2)
        assert dy.flow_equivariant(c, g, Q(rng.randrange(-8, 9), 4))


def test_flow_group_law():
    c = dy.standard_line(3).flow(Q(1, 3))
    for t in (Q(-9, 4), Q(0), Q(7, 4)):
        assert c.flow(Q(1, 2)).flow(Q(-5, 6)).at(t) == c.flow(Q(-1, 3)).at(t)
        assert c.flow(Q(5, 6)).at(t) == c.at(t + Q(5, 6))


def test_segment_constant_outside():
    x0 = base_vertex(P)
    path = [x0, neighbors(x0)[0]]
    c = dy.segment_geodesic(path, 0)
    assert c.at(-5) == c.at(0)
    assert c.at(9) == c.at(1)


def test_bad_geodesics_rejected():
    x0 = base_vertex(P)
    n = neighbors(x0)[0]
    with pytest.raises(ValueError):
        dy.segment_geodesic([x0, n, x0])
    with pytest.raises(ValueError):
        dy.segment_geodesic([x0, x0])


def test_fold_FS_examples():
    line = dy.standard_line(P)
    assert dy.fold_FS(line, line.flow(1), 1, Q(1, 4)) is True
    assert dy.fold_FS(line, line.flow(3), 1, Q(1, 4)) is False
    assert dy.fold_FS(line, line, 0, Q(1, 1000)) is True


def test_fold_FS_invariant():
    rng = random.Random(9)
    line = dy.standard_line(P)
    for _ in range(5):
        g = dy.random_group_element(rng, P, 2)
        tau = Q(rng.randrange(-6, 7), 4)
        a, b = line.act(g), line.flow(tau).act(g)
        assert dy.fold_FS(a, b, 2, 1) == dy.fold_FS(line, line.flow(tau), 2, 1)


# periodic geodesics

@pytest.mark.parametrize("p", [2, 3])
def test_periodic_diag(p):
    g = dy.diag(p, Q(1, p))
    per = dy.periodic_invariants(g, p)
    assert per.translation_length == 2 and per.t_g == 2
    assert any(per.axis.vertex(j) == base_vertex(p) for j in range(2))
    assert per.t_samples == {-2: -4, -1: -2, 1: 2, 2: 4}
    assert per.in_K(dy.diag(1 + p, Q(1, 1 + p)))
    assert per.in_V(g) and not per.in_K(g)


def test_elliptic_has_no_axis():
    with pytest.raises(ValueError):
        dy.periodic_invariants(dy.identity2(), P)
    assert dy.translation_length(((Q(0), Q(1)), (Q(-1), Q(0))), P) == 0


def test_conjugated_axis():
    rng = random.Random(10)
    g = dy.diag(P, Q(1, P))
    for _ in range(5):
        x = dy.random_group_element(rng, P, 2)
        h = dy.mat_mul(dy.mat_mul(x, g), dy.mat_inv(x))
        assert dy.translation_length(h, P) == 2
        assert dy.periodic_invariants(h, P).t_g == 2


# foliated distances

@pytest.mark.parametrize("spec", ["U0", "U1", "I", "K1", "Vc"])
def test_fold_V_matches_net(spec):
    rng = random.Random(11)
    for _ in range(25):
        g = dy.random_group_element(rng, P, 2)
        if rng.random() < 0.6:
            g2 = dy.mat_mul(dy.mat_mul(g, dy.random_in_V(rng, spec, P, 2)), dy.random_near(rng, P, rng.choice([1, 2])))
        else:
            g2 = dy.random_group_element(rng, P, 2)
        for beta, eta, strict in ((1, Q(1, 2), False), (2, Q(1, 4), True), (2, 2, False), (0, 0, False)):
            assert dy.fold_V(g, g2, spec, beta, eta, P, strict) == dy.fold_V_net(g, g2, spec, beta, eta, P, strict)


def test_fold_V_trivial_cases():
    e = dy.identity2()
    assert dy.fold_V(e, e, "I", 0, 0, P)
    w = dy.diag(P, Q(1, P))
    assert not dy.fold_V(e, w, "U0", 1, Q(1, 2), P)
    assert dy.fold_V(e, w, "Vc", 2, 0, P)
    with pytest.raises(ValueError):
        dy.fold_V(e, e, "I", 1, 0, P, strict=True)


def test_fold_V_left_invariant():
    rng = random.Random(12)
    for _ in range(20):
        g, g2, x = (dy.random_group_element(rng, P, 2) for _ in range(3))
        for spec in ("U0", "K1"):
            assert dy.fold_V(g, g2, spec, 1, 1, P) == dy.fold_V(dy.mat_mul(x, g), dy.mat_mul(x, g2), spec, 1, 1, P)


def test_fold_V_monotone():
    rng = random.Random(13)
    for _ in range(20):
        g = dy.random_group_element(rng, P, 2)
        g2 = dy.mat_mul(g, dy.random_in_V(rng, "I", P, 1))
        if dy.fold_V(g, g2, "I", 1, Q(1, 4), P):
            assert dy.fold_V(g, g2, "I", 2, Q(1, 2), P)


def test_fold_P():
    e = dy.identity2()
    assert dy.fold_P([], [], [], 1, 1, P)
    assert dy.fold_P([e, e], [e, e], ["U0", "Vc"], 0, 0, P)
    with pytest.raises(ValueError):
        dy.fold_P([e], [], ["U0"], 1, 1, P)


def test_fold_J_equivalence():
    rng = random.Random(14)
    specs = ("U0", "U1", "I", "K1", "Vc")
    for _ in range(40):
        z = dy.random_jpoint(rng, P, 2, specs)
        z2 = dy.perturb_jpoint(rng, z, specs)
        for beta, eta, eps in dy.J_TOLERANCES:
            assert dy.fold_J_join(z, z2, beta, eta, eps) == dy.fold_J_general(z, z2, beta, eta, eps)


def test_jpoint_validation():
    e = dy.identity2()
    with pytest.raises(ValueError):
        dy.JPoint.make(P, [(Q(1, 2), e, "U0")])
    z = dy.JPoint.make(P, [(1, e, "U0"), (0, e, "I")])
    assert z.bary() == {(0, "U0"): 1}
    assert dy.fold_J_join(z, z, 1, 1, Q(1, 2))


def test_triangle_delta_search_small():
    r = dy.triangle_delta_search(P, Q(1, 2), 1, samples=60, seed=0)
    assert Q(r["delta"]) > 0
    assert r["counterexamples"] == []


def test_suite_small():
    rep = dy.suite(P, 8, seed=1, search_samples=30)
    assert rep["ok"], rep["counterexample"]
    assert rep["periodic"] == {"translation_length": 2, "t_g": 2, "axis_through_x0": True}
    assert rep["fold_J_disagreements"] == 0
    assert set(rep["triangle_delta"]) == {"1", "1/2", "1/4"}
