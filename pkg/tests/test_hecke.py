import random
from fractions import Fraction as Q

import pytest

from hecketree.building import h_matrix
from hecketree.hecke import (
    BMorphism,
    HeckeElement,
    K,
    as_group_element,
    check_suite,
    coset_key,
    coset_rep,
    compose_bmorphism,
    convolve,
    convolve_riemann,
    e_U,
    haar_measure,
    identity_morphism,
    im,
    im_mul,
    is_subgroup_support,
    mu_K,
    product_support,
    random_bmorphism,
    random_element,
    random_hecke_element,
    split_bmorphism,
    subgroup,
    subgroup_cosets,
    support,
    support_axioms,
    translation_iso,
)
from hecketree.padic import PadicContext

SPECS = ["U0", "U1", "I", "K1", "K2"]


def random_k(rng, p, n):
    x, y, z = (rng.randrange(p * p) * p**n for _ in range(3))
    a = 1 + z
    return im(((Q(a), Q(x)), (Q(y), Q(1 + x * y, a))))


def test_haar_normalization():
    assert haar_measure(subgroup_cosets(subgroup("U0", 2), 1), 2, 1) == 1
    assert mu_K(2, 1) == Q(1, 6)
    assert haar_measure(subgroup_cosets(subgroup("K1", 2), 2), 2, 2) == Q(1, 6)
    assert haar_measure(subgroup_cosets(subgroup("I", 3), 1), 3, 1) == Q(1, 4)


def test_haar_left_invariant(rng):
    for p in (2, 3):
        S = HeckeElement.indicator(subgroup_cosets(subgroup("I", p), 1), p, 1)
        for _ in range(10):
            g = random_element(rng, p, 3)
            assert haar_measure(S.translate(g).support(), p, 1) == haar_measure(S.support(), p, 1)


def test_coset_key_is_right_invariant(rng):
    for p in (2, 3):
        for n in (1, 2):
            for _ in range(50):
                g = random_element(rng, p, 4, 2)
                key = coset_key(g, p, n)
                assert coset_key(im_mul(g, random_k(rng, p, n)), p, n) == key
                assert coset_key(coset_rep(key, p, n), p, n) == key


def test_group_element_check():
    assert as_group_element(h_matrix(2), 2)
    assert as_group_element(PadicContext(3).h(), 3)
    with pytest.raises(ValueError):
        as_group_element(((Q(2), Q(0)), (Q(0), Q(1))), 2)


@pytest.mark.parametrize("p", [2, 3])
@pytest.mark.parametrize("name", SPECS)
def test_idempotents(p, name):
    e = e_U(name, p=p)
    assert convolve(e, e) == e


@pytest.mark.parametrize("p", [2, 3])
def test_e_K_coefficients(p):
    for m in (1, 2):
        e = e_U(f"K{m}", m, p)
        assert set(e.terms.values()) == {Q(1) / mu_K(p, m)}
        assert len(e.terms) == 1


@pytest.mark.parametrize("p", [2, 3])
def test_iwahori_absorbed_by_u0(p):
    # I ⊆ U0, so averaging over U0 after I gives back the U0 average
    eI, e0 = e_U("I", 1, p), e_U("U0", 1, p)
    assert convolve(eI, e0) == e0
    assert convolve(e0, eI) == e0
    assert convolve(eI, eI) == eI


def test_delta_is_a_unit(rng):
    for p in (2, 3):
        for n in (1, 2):
            f = random_hecke_element(rng, p, n)
            d = e_U(f"K{n}", n, p)
            assert convolve(f, d) == f
            # on the left, delta only fixes left K_n-invariant elements
            e = e_U("I", n, p)
            assert convolve(d, e) == e


@pytest.mark.parametrize("p", [2, 3])
def test_associative_and_bilinear(p):
    rng = random.Random(p)
    for n in (1, 2):
        for _ in range(8):
            a, b, c = (random_hecke_element(rng, p, n) for _ in range(3))
            assert convolve(convolve(a, b), c) == convolve(a, convolve(b, c))
            s = Q(rng.randrange(1, 5), 3)
            assert convolve(a + b.scale(s), c) == convolve(a, c) + convolve(b, c).scale(s)
            assert convolve(a, b + c) == convolve(a, b) + convolve(a, c)


def test_convolution_matches_riemann_sum(rng):
    """Independent evaluation of the integral over a finer level."""
    for p in (2, 3):
        for _ in range(6):
            f = random_hecke_element(rng, p, 1, pieces=2, length=2)
            g = random_hecke_element(rng, p, 1, pieces=2, length=1)
            fg = convolve(f, g)
            pts = [coset_rep(k, p, 1) for k in list(fg.terms)[:8]]
            pts += [random_element(rng, p, 3) for _ in range(4)]
            oracle = convolve_riemann(f, g, pts)
            for key, val in oracle.items():
                assert fg.coeff(key) == val


def test_relevel_preserves_function(rng):
    for p in (2, 3):
        f = random_hecke_element(rng, p, 1)
        f2 = f.relevel(2)
        assert f2 == f
        for _ in range(20):
            x = random_element(rng, p, 3)
            assert f(x) == f2(x)
        with pytest.raises(ValueError):
            f2.relevel(1)


def test_support_basics(rng):
    p = 2
    assert support(HeckeElement.zero(p, 1)) == frozenset()
    for name in ("U0", "U1", "I"):
        U = subgroup(name, p)
        assert support(e_U(U)) == subgroup_cosets(U, max(1, U.min_level))
        assert is_subgroup_support(support(e_U(U)), p, max(1, U.min_level))
    for _ in range(30):
        f, g = random_hecke_element(rng, p, 1), random_hecke_element(rng, p, 1)
        assert support(f + g) <= support(f) | support(g)
        assert support(convolve(f, g)) <= product_support(f, g)


def test_identity_morphisms(rng):
    for p in (2, 3):
        for _ in range(5):
            s, t = rng.choice(["U0", "U1", "I"]), rng.choice(["U0", "U1", "I"])
            phi = random_bmorphism(rng, s, t, p, length=1)
            assert compose_bmorphism(identity_morphism(phi.target), phi).f == phi.f
            assert compose_bmorphism(phi, identity_morphism(phi.source)).f == phi.f


def test_block_and_orbit_routes_agree(rng):
    for p, count in ((2, 12), (3, 5)):
        for _ in range(count):
            a, b, c = (rng.choice(["U0", "U1", "I"]) for _ in range(3))
            phi = random_bmorphism(rng, a, b, p, length=1)
            psi = random_bmorphism(rng, b, c, p, length=1)
            blocks = compose_bmorphism(psi, phi)
            orbits = compose_bmorphism(psi, phi, route="orbits")
            assert blocks.f == orbits.f
            assert blocks.check_invariance()["ok"]


def test_composition_needs_matching_objects(rng):
    phi = random_bmorphism(rng, "U0", "I", 2)
    with pytest.raises(ValueError):
        compose_bmorphism(phi, phi)


@pytest.mark.parametrize("p", [2, 3])
def test_translation_iso(p):
    idm = ((Q(1), Q(0)), (Q(0), Q(1)))
    fwd, back = translation_iso(idm, "U0", p=p)
    assert fwd.f == e_U("U0", 1, p) and back.f == e_U("U0", 1, p)
    h = h_matrix(p)
    fwd, back = translation_iso(h, "U0", p=p)
    assert fwd.target.name == "U1"
    U0, U1 = subgroup("U0", p), subgroup("U1", p)
    assert compose_bmorphism(back, fwd).f == e_U(U0, fwd.f.n)
    assert compose_bmorphism(fwd, back).f == e_U(U1, fwd.f.n)
    # supports are gU and Ug^-1
    gU = HeckeElement.indicator(subgroup_cosets(U0, fwd.f.n), p, fwd.f.n).translate(h).support()
    assert fwd.f.support() == gU
    assert fwd.check_invariance()["ok"] and back.check_invariance()["ok"]


def test_split_bmorphism(rng):
    for p in (2, 3):
        phi = random_bmorphism(rng, "I", "U0", p, pieces=3, length=2)
        parts = split_bmorphism(phi)
        total = HeckeElement.zero(p, phi.f.n)
        for part in parts:
            assert part.check_invariance()["ok"]
            total = total + part.f
        assert total == phi.f
        assert sum(len(x.f.terms) for x in parts) == len(phi.f.terms)


def test_support_cofinality():
    # i = r = e_U viewed as U -> L and L -> U for L = K_m ⊆ U
    for p in (2, 3):
        for name in ("U0", "I"):
            U = subgroup(name, p)
            for m in ((1, 2) if p == 2 else (1,)):
                L = K(p, m)
                eU = e_U(U, m)
                i = BMorphism(U, L, eU)
                r = BMorphism(L, U, eU)
                assert i.check_invariance()["ok"] and r.check_invariance()["ok"]
                assert compose_bmorphism(r, i).f == identity_morphism(U, m).f


def test_support_axioms_sampled(rng):
    for p, count in ((2, 15), (3, 2)):
        for _ in range(count):
            s, t, u = (rng.choice(["U0", "U1", "I"]) for _ in range(3))
            phi = random_bmorphism(rng, s, t, p, length=1)
            phi2 = random_bmorphism(rng, s, t, p, length=1)
            psi = random_bmorphism(rng, t, u, p, length=1)
            rep = support_axioms(phi, phi2, psi)
            assert rep["ok"], rep


def test_cosets_mod_source_counts():
    p = 2
    h = im(h_matrix(p))
    U0 = subgroup("U0", p)
    from hecketree.hecke import double_coset_cosets

    cos = double_coset_cosets(U0, im_mul(h, h), U0, 2)
    phi = BMorphism(U0, U0, HeckeElement.indicator(cos, p, 2))
    # U0 diag(p, 1/p)... the double coset of h^2 = p·Id is U0 itself
    assert len(phi.cosets_mod_source()) == 1 and phi.count_target_cosets() == 1
    a = im(((Q(p), Q(0)), (Q(0), Q(1, p))))
    cos = double_coset_cosets(U0, a, U0, 2)
    phi = BMorphism(U0, U0, HeckeElement.indicator(cos, p, 2))
    # U0 a U0 / U0 has p(p+1) cosets (vertices at distance 2)
    assert len(phi.cosets_mod_source()) == p * (p + 1) == phi.count_target_cosets()


def test_json_schema(rng):
    f = random_hecke_element(rng, 3, 1)
    js = f.to_json()
    assert js["p"] == 3 and js["n"] == 1
    for t in js["terms"]:
        assert len(t["coset_rep"]) == 2 and Q(t["coeff"]) == f(tuple(tuple(Q(x) for x in r) for r in t["coset_rep"]))


def test_check_suite_small():
    rep = check_suite(2, 1, 3, seed=1)
    assert rep["ok"] and rep["associative"] == 3
