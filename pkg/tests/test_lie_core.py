import math

import numpy as np
import pytest

from planewaves.lie_core import (
    AutomorphismError,
    ConfGroupElement,
    Derivation,
    DerivationError,
    DimensionMismatchError,
    EigenvalueOneError,
    HeisAlgebraElement,
    HeisAutomorphism,
    HeisElement,
    adjoint,
    bracket,
    conjugate_to_linear,
    contraction_test,
    exp_derivation,
    group_conjugate,
    group_identity,
    group_inv,
    group_mul,
    group_pow,
    heis_exp,
    heis_inv,
    heis_log,
    heis_mul,
    rho_k,
    spectral_type,
)

from oracles import affine_heis_matrix, heis_from_affine


def rand_heis(rng, n):
    return HeisElement(rng.uniform(-1, 1, n), rng.uniform(-1, 1, n), rng.uniform(-1, 1))


def cw4_derivation():
    r = math.sqrt(15.0)
    return Derivation.from_profile_blocks(np.zeros((2, 2)), [[6.0, r], [r, 4.0]])


def dim3_derivation(b):
    return Derivation.from_profile_blocks([[0.0]], [[b]])


# ---------------------------------------------------------------------------
# Heisenberg group
# ---------------------------------------------------------------------------


def test_mul_identity():
    h = HeisElement([1.0, 2.0], [3.0, -1.0], 0.5)
    e = HeisElement.identity(2)
    for prod in (heis_mul(h, e), heis_mul(e, h)):
        assert np.allclose(prod.alpha, h.alpha)
        assert np.allclose(prod.beta, h.beta)
        assert prod.z == h.z


def test_mul_matches_affine_matrix_model():
    a = HeisElement([1.0], [0.0], 0.0)
    b = HeisElement([0.0], [1.0], 0.0)
    ab = heis_mul(a, b)
    assert (ab.alpha[0], ab.beta[0], ab.z) == (1.0, 1.0, 1.0)
    ba = heis_mul(b, a)
    assert (ba.alpha[0], ba.beta[0], ba.z) == (1.0, 1.0, 0.0)
    rng = np.random.default_rng(7)
    for _ in range(50):
        h1, h2 = rand_heis(rng, 3), rand_heis(rng, 3)
        expected = heis_from_affine(affine_heis_matrix(h1) @ affine_heis_matrix(h2))
        got = heis_mul(h1, h2)
        assert np.allclose(got.alpha, expected.alpha, atol=1e-14)
        assert np.allclose(got.beta, expected.beta, atol=1e-14)
        assert abs(got.z - expected.z) < 1e-14


def test_center_commutes():
    z1 = HeisElement.center(0.7, 2)
    z2 = HeisElement.center(-1.2, 2)
    both = heis_mul(z1, z2)
    assert both.z == 0.7 - 1.2 and both.is_identity(1e-15) is False
    rng = np.random.default_rng(3)
    h = rand_heis(rng, 2)
    assert np.allclose(
        heis_log(heis_mul(z1, h)).as_vector(), heis_log(heis_mul(h, z1)).as_vector()
    )


def test_mul_associativity_1000_random_triples():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(1000):
        h1, h2, h3 = (rand_heis(rng, 2) for _ in range(3))
        left = heis_mul(heis_mul(h1, h2), h3)
        right = heis_mul(h1, heis_mul(h2, h3))
        worst = max(
            worst,
            np.max(np.abs(heis_log(left).as_vector() - heis_log(right).as_vector())),
        )
    assert worst < 1e-12


def test_inverse():
    rng = np.random.default_rng(5)
    for _ in range(20):
        h = rand_heis(rng, 3)
        assert heis_mul(h, heis_inv(h)).is_identity(1e-14)
        assert heis_mul(heis_inv(h), h).is_identity(1e-14)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        heis_mul(HeisElement.identity(1), HeisElement.identity(2))


# ---------------------------------------------------------------------------
# exp / log
# ---------------------------------------------------------------------------


def test_exp_identity():
    assert heis_exp(HeisAlgebraElement([0.0], [0.0], 0.0)).is_identity(0.0)


def test_exp_matches_matrix_exponential():
    from scipy.linalg import expm

    got = heis_exp(HeisAlgebraElement([1.0], [1.0], 0.0))
    assert (got.alpha[0], got.beta[0], got.z) == (1.0, 1.0, 0.5)
    rng = np.random.default_rng(13)
    for _ in range(25):
        X = HeisAlgebraElement(rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2), rng.uniform(-1, 1))
        n = X.n
        nil = np.zeros((n + 2, n + 2))
        nil[0, 1 : n + 1] = X.a_plus
        nil[0, n + 1] = X.z
        nil[1 : n + 1, n + 1] = X.a_minus
        expected = heis_from_affine(expm(nil))
        got = heis_exp(X)
        assert np.allclose(got.alpha, expected.alpha, atol=1e-12)
        assert np.allclose(got.beta, expected.beta, atol=1e-12)
        assert abs(got.z - expected.z) < 1e-12


def test_log_exp_round_trip_100_random():
    rng = np.random.default_rng(17)
    for _ in range(100):
        X = HeisAlgebraElement(rng.uniform(-2, 2, 2), rng.uniform(-2, 2, 2), rng.uniform(-2, 2))
        back = heis_log(heis_exp(X))
        assert np.max(np.abs(back.as_vector() - X.as_vector())) < 1e-14


def test_bch_two_step():
    # exp(X) exp(Y) = exp(X + Y + [X,Y]/2)
    rng = np.random.default_rng(19)
    for _ in range(30):
        X = HeisAlgebraElement(rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2), rng.uniform(-1, 1))
        Y = HeisAlgebraElement(rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2), rng.uniform(-1, 1))
        lhs = heis_mul(heis_exp(X), heis_exp(Y))
        comb = X.as_vector() + Y.as_vector() + 0.5 * bracket(X, Y).as_vector()
        rhs = heis_exp(HeisAlgebraElement.from_vector(comb))
        assert np.max(np.abs(heis_log(lhs).as_vector() - heis_log(rhs).as_vector())) < 1e-13


def test_bracket_properties():
    rng = np.random.default_rng(23)
    X = HeisAlgebraElement(rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2), 0.3)
    Y = HeisAlgebraElement(rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2), -0.1)
    xy = bracket(X, Y)
    assert np.all(xy.a_plus == 0) and np.all(xy.a_minus == 0)
    assert abs(xy.z + bracket(Y, X).z) < 1e-15
    assert bracket(bracket(X, Y), X).norm() == 0.0  # two-step nilpotent


# ---------------------------------------------------------------------------
# Derivations and automorphisms
# ---------------------------------------------------------------------------


def test_derivation_block_form():
    L = dim3_derivation(2.0)
    expected = np.array([[0.0, 2.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    assert np.allclose(L.matrix, expected)
    with pytest.raises(DerivationError):
        Derivation.from_profile_blocks([[1.0]], [[1.0]])  # F not antisymmetric
    with pytest.raises(DerivationError):
        Derivation.from_profile_blocks(np.zeros((2, 2)), [[1.0, 2.0], [0.0, 1.0]])


def test_derivation_law_enforced():
    bad = np.zeros((3, 3))
    bad[2, 2] = 1.0  # scales the center only: not a derivation
    with pytest.raises(DerivationError):
        Derivation(bad)


def test_homothety_matrix():
    H = Derivation.homothety(2)
    assert np.allclose(H.matrix, np.diag([1.0, 1.0, 1.0, 1.0, 2.0]))


def test_exp_derivation_trivial_and_diagonal():
    H = Derivation.homothety(3)
    assert np.allclose(exp_derivation(H, 0.0).matrix, np.eye(7))
    a = exp_derivation(H, 1.0)
    assert np.allclose(a.matrix, np.diag([math.e] * 6 + [math.e**2]))


def test_cw4_derivation_spectrum():
    L = cw4_derivation()
    ev = np.linalg.eigvals(L.matrix)
    assert np.max(np.abs(ev.imag)) < 1e-10
    assert np.allclose(np.sort(ev.real), [-3.0, -1.0, 0.0, 1.0, 3.0], atol=1e-10)


def test_exp_derivation_flow_property():
    L = cw4_derivation()
    rng = np.random.default_rng(29)
    for _ in range(10):
        s, t = rng.uniform(-1, 1, 2)
        left = exp_derivation(L, s).compose(exp_derivation(L, t))
        right = exp_derivation(L, s + t)
        assert np.max(np.abs(left.matrix - right.matrix)) < 1e-10


def test_automorphisms_preserve_brackets():
    L = cw4_derivation()
    for t in (-1.3, 0.2, 2.0):
        exp_derivation(L, t)  # constructor validates bracket preservation
    with pytest.raises(AutomorphismError):
        m = np.eye(5)
        m[4, 4] = 3.0  # scales center without scaling the symplectic form
        HeisAutomorphism(m)


def test_rho_k_shape():
    th = 0.3
    k = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    a = rho_k(k)
    assert np.allclose(a.matrix[:2, :2], k)
    assert np.allclose(a.matrix[2:4, 2:4], k)
    assert a.matrix[4, 4] == 1.0
    assert np.max(np.abs(a.matrix[:4, 4])) == 0.0 and np.max(np.abs(a.matrix[4, :4])) == 0.0
    with pytest.raises(AutomorphismError):
        rho_k([[2.0]])


def test_spectral_type():
    assert spectral_type(dim3_derivation(1.5)) == "hyperbolic"
    assert spectral_type(dim3_derivation(-1.5)) == "elliptic"
    assert spectral_type(Derivation.from_profile_blocks([[0.0]], [[0.0]])) == "unipotent"
    mixed = Derivation.from_profile_blocks(np.zeros((2, 2)), np.diag([1.0, -1.0]))
    assert spectral_type(mixed) == "mixed"


def test_dim3_eigenvector_convention():
    # eigenvectors of the hyperbolic structure derivation are proportional
    # to sqrt(b).e+ +/- e-, not e+ +/- b.e-
    b = 4.0
    L = dim3_derivation(b)
    evals, vecs = np.linalg.eig(L.matrix)
    j = int(np.argmin(np.abs(evals - math.sqrt(b))))
    v = np.real(vecs[:, j])
    v = v / v[1]
    assert abs(v[0] - math.sqrt(b)) < 1e-12


# ---------------------------------------------------------------------------
# The similarity group
# ---------------------------------------------------------------------------


def test_group_identity_and_mul():
    L = cw4_derivation()
    e = group_identity(L)
    rng = np.random.default_rng(31)
    g = ConfGroupElement(0.4, -0.2, np.eye(2), rand_heis(rng, 2), L)
    for prod in (group_mul(g, e), group_mul(e, g)):
        assert prod.t_H == g.t_H and prod.t_L == g.t_L
        assert np.allclose(heis_log(prod.x).as_vector(), heis_log(g.x).as_vector())


def test_group_conjugation_scales_center():
    L = cw4_derivation()
    a = ConfGroupElement(1.0, 0.0, np.eye(2), HeisElement.identity(2), L)
    z = ConfGroupElement.from_heis(HeisElement.center(1.0, 2), L)
    conj = group_conjugate(a, z)
    assert abs(conj.t_H) < 1e-15 and abs(conj.t_L) < 1e-15
    assert np.max(np.abs(conj.x.alpha)) < 1e-15
    assert abs(conj.x.z - math.e**2) < 1e-12


def test_group_associativity_and_inverse():
    # flow parameters kept moderate: expm error grows with the operator
    # norm e^{3|t|}, and the 1e-12 budget is for O(1) group elements
    L = cw4_derivation()
    rng = np.random.default_rng(37)
    worst = 0.0
    for _ in range(100):
        gs = [
            ConfGroupElement(
                rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), np.eye(2), rand_heis(rng, 2), L
            )
            for _ in range(3)
        ]
        left = group_mul(group_mul(gs[0], gs[1]), gs[2])
        right = group_mul(gs[0], group_mul(gs[1], gs[2]))
        worst = max(
            worst,
            abs(left.t_H - right.t_H),
            abs(left.t_L - right.t_L),
            float(np.max(np.abs(heis_log(left.x).as_vector() - heis_log(right.x).as_vector()))),
        )
        assert group_mul(gs[0], group_inv(gs[0])).is_identity(1e-12)
    assert worst < 1e-12


def test_projections_are_homomorphisms():
    L = cw4_derivation()
    rng = np.random.default_rng(41)
    g1 = ConfGroupElement(0.3, -0.7, np.eye(2), rand_heis(rng, 2), L)
    g2 = ConfGroupElement(-0.1, 0.4, np.eye(2), rand_heis(rng, 2), L)
    g12 = group_mul(g1, g2)
    assert abs(g12.t_H - (g1.t_H + g2.t_H)) < 1e-15
    assert abs(g12.t_L - (g1.t_L + g2.t_L)) < 1e-15


def test_adjoint_homomorphism():
    L = cw4_derivation()
    rng = np.random.default_rng(43)
    for _ in range(20):
        g1 = ConfGroupElement(rng.uniform(-1, 1), rng.uniform(-1, 1), np.eye(2), rand_heis(rng, 2), L)
        g2 = ConfGroupElement(rng.uniform(-1, 1), rng.uniform(-1, 1), np.eye(2), rand_heis(rng, 2), L)
        lhs = adjoint(group_mul(g1, g2))
        rhs = adjoint(g1) @ adjoint(g2)
        assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_k_part_must_commute_with_derivation():
    L = cw4_derivation()
    th = 0.4
    k = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    with pytest.raises(AutomorphismError):
        ConfGroupElement(0.0, 0.0, k, HeisElement.identity(2), L)


# ---------------------------------------------------------------------------
# conjugate_to_linear
# ---------------------------------------------------------------------------


def test_conjugate_to_linear_trivial():
    L = cw4_derivation()
    g = ConfGroupElement(0.5, 0.2, np.eye(2), HeisElement.identity(2), L)
    x1 = conjugate_to_linear(g)
    assert x1.is_identity(1e-12)


def test_conjugate_to_linear_verified_by_multiplication():
    L = cw4_derivation()
    g = ConfGroupElement(1.0, 0.0, np.eye(2), HeisElement([1.0, 0.0], [1.0, 0.0], 1.0), L)
    x1 = conjugate_to_linear(g)
    conj = group_conjugate(ConfGroupElement.from_heis(x1, L), g)
    assert np.max(np.abs(heis_log(conj.x).as_vector())) < 1e-12


def test_conjugate_to_linear_precondition():
    L = cw4_derivation()
    g = ConfGroupElement(0.0, 0.8, np.eye(2), HeisElement([1.0, 0.0], [0.0, 0.0], 0.0), L)
    with pytest.raises(EigenvalueOneError):
        conjugate_to_linear(g)


# ---------------------------------------------------------------------------
# contraction_test
# ---------------------------------------------------------------------------


def test_contraction_identity_gives_constant_sequence():
    L = cw4_derivation()
    h = ConfGroupElement.from_heis(HeisElement([1.0, 0.0], [0.0, 1.0], 0.5), L)
    rep = contraction_test(group_identity(L), h, 50)
    assert rep.verdict == "bounded"
    assert np.max(np.abs(rep.norms - rep.norms[0])) < 1e-12


def test_contraction_homothety_contracts():
    L = cw4_derivation()
    g = ConfGroupElement(-1.0, 0.0, np.eye(2), HeisElement.identity(2), L)
    h = ConfGroupElement.from_heis(HeisElement([1.0, 0.0], [0.0, 1.0], 1.0), L)
    rep = contraction_test(g, h, 100)
    assert rep.verdict == "contracting"
    assert np.all(np.diff(rep.norms[5:]) <= 0)


def test_contraction_elliptic_bounded():
    L = dim3_derivation(-1.0)
    g = ConfGroupElement(0.0, 1.0, np.eye(1), HeisElement.identity(1), L)
    h = ConfGroupElement.from_heis(HeisElement([1.0], [1.0], 1.0), L)
    rep = contraction_test(g, h, 2000)
    assert rep.verdict == "bounded"
    assert 1e-3 < np.min(rep.norms) and np.max(rep.norms) < 1e3


def test_contraction_diverging():
    L = cw4_derivation()
    g = ConfGroupElement(1.0, 0.0, np.eye(2), HeisElement.identity(2), L)
    h = ConfGroupElement.from_heis(HeisElement([1.0, 0.0], [0.0, 0.0], 0.0), L)
    rep = contraction_test(g, h, 300)
    assert rep.verdict == "diverging"


def test_contraction_matches_naive_group_conjugation():
    L = cw4_derivation()
    rng = np.random.default_rng(47)
    g = ConfGroupElement(0.2, 0.3, np.eye(2), rand_heis(rng, 2), L)
    h = ConfGroupElement(0.0, 0.0, np.eye(2), rand_heis(rng, 2), L)
    rep = contraction_test(g, h, 12)
    cur = h
    for k in range(1, 13):
        cur = group_conjugate(g, cur)
        assert abs(heis_log(cur.x).norm() - rep.norms[k]) < 1e-9
