import numpy as np
import pytest

from freespectra.freealg import HermTuple
from freespectra.parsing import parse_matrix_poly, parse_poly
from freespectra.pencil import (
    AffineForm, Pencil, PencilError, affine_vanishes_on_level1, cube_containment, is_member,
    level1_feasible, level1_infeasibility_certificate, make_ball, make_cube, make_monic,
)

SX = np.array([[0, 1], [1, 0]], dtype=float)


def pencil(rows, n=None):
    return Pencil.from_poly(parse_matrix_poly(rows, n))


def random_isometry(k, m, rng):
    Z = rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m))
    Q, _ = np.linalg.qr(Z)
    return Q[:, :m]


# ---------------------------------------------------------------- construction

def test_cube_and_ball_shapes():
    C, B = make_cube(2), make_ball(3)
    assert (C.n, C.d) == (2, 4) and C.monic and C.hermitian
    assert (B.n, B.d) == (3, 4) and B.monic


def test_ball_with_radius_is_not_monic():
    B = make_ball(2, 2.0)
    assert not B.monic
    assert np.allclose(np.diag(B.A0), [1, 1, 4])


def test_non_hermitian_pencil_detected():
    L = pencil([["1", "x1"], ["x2", "1"]])
    assert L.monic and not L.hermitian
    with pytest.raises(PencilError):
        is_member(L, HermTuple.scalars([0.1, 0.1]))


def test_from_poly_rejects_higher_degree():
    with pytest.raises((PencilError, ValueError)):
        Pencil.from_poly(parse_poly("1 - x1^2"))


def test_json_roundtrip():
    L = make_ball(2, 1.5)
    assert Pencil.from_json(L.to_json()) == L


def test_poly_roundtrip():
    L = make_cube(2, 0.5)
    assert Pencil.from_poly(L.to_poly()) == L


# ---------------------------------------------------------------- membership

def test_monic_at_zero_has_min_eigenvalue_one():
    rep = is_member(make_ball(2), HermTuple.zeros(2, 3))
    assert rep.member and abs(rep.min_eigenvalue - 1) < 1e-12


def test_cube_boundary_point():
    rep = is_member(make_cube(1), HermTuple(SX[None]))
    assert rep.member and abs(rep.min_eigenvalue) < 1e-12


def test_ball_excludes_corner():
    assert not is_member(make_ball(2), HermTuple.scalars([1.0, 1.0])).member


def test_cube_membership_matches_operator_norm():
    rng = np.random.default_rng(3)
    C = make_cube(2, 1.3)
    for _ in range(200):
        X = HermTuple.random(2, 3, rng, scale=1.0)
        lam = is_member(C, X).min_eigenvalue
        norm = max(np.linalg.norm(M, 2) for M in X.mats)
        assert abs(lam - (1.3 - norm)) <= 1e-9


def test_ball_membership_matches_sum_of_squares():
    rng = np.random.default_rng(4)
    B = make_ball(3, 0.9)
    for _ in range(200):
        X = HermTuple.random(3, 2, rng, scale=0.6)
        S = sum(M @ M for M in X.mats)
        expect = np.linalg.eigvalsh(S)[-1] <= 0.81
        assert is_member(B, X).member == expect


def scale_into(L, X, u):
    """Shrink X onto the ray point u·t* where t* is the boundary crossing."""
    lo, hi = 0.0, 1.0
    while is_member(L, X.scaled(hi), tol=0).member:
        hi *= 2
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if is_member(L, X.scaled(mid), tol=0).member else (lo, mid)
    return X.scaled(u * lo)


def test_compression_closure():
    rng = np.random.default_rng(5)
    for L in (make_cube(2), make_ball(2)):
        for i in range(100):
            X = scale_into(L, HermTuple.random(2, 4, rng), 1.0 if i % 4 == 0 else rng.uniform())
            assert is_member(L, X).member
            V = random_isometry(4, int(rng.integers(1, 4)), rng)
            assert is_member(L, X.compress(V)).min_eigenvalue >= -1e-8


# ---------------------------------------------------------------- make_monic

def test_make_monic_scalar():
    L, _ = make_monic(pencil([["2 + x1"]]))
    assert L.allclose(pencil([["1 + 0.5*x1"]]), 1e-12)


def test_make_monic_diagonal_scaling():
    A = np.zeros((2, 2, 2))
    A[0] = np.diag([1.0, 4.0])
    A[1] = [[0, 2], [2, 0]]
    L, tr = make_monic(Pencil(A))
    assert L.monic
    assert np.allclose(L.coeffs[1], SX)
    assert np.allclose(tr["conjugator"], np.diag([1, 0.5]))


def test_make_monic_singular_constant():
    A = np.zeros((2, 2, 2))
    A[0] = np.diag([1.0, 0.0])
    A[1] = np.eye(2)
    with pytest.raises(PencilError, match="interior point"):
        make_monic(Pencil(A))


def test_make_monic_preserves_membership():
    rng = np.random.default_rng(6)
    L = make_ball(2, 2.0)
    M, _ = make_monic(L)
    for _ in range(300):
        X = HermTuple.random(2, 2, rng, scale=1.5)
        a, b = is_member(L, X).min_eigenvalue, is_member(M, X).min_eigenvalue
        if min(abs(a), abs(b)) > 1e-10:
            assert (a >= 0) == (b >= 0)


# ---------------------------------------------------------------- level-1 programs

def test_level1_cube_interior():
    res = level1_feasible(make_cube(2))
    assert res.status == "interior"
    assert is_member(make_cube(2), HermTuple.scalars(res.point)).member


def test_level1_infeasible_with_certificate():
    L = pencil([["x1", "0"], ["0", "-x1 - 1"]])
    res = level1_feasible(L)
    assert res.status == "infeasible"
    assert level1_infeasibility_certificate(L, res.certificate)


def test_level1_half_line():
    res = level1_feasible(pencil([["1 + x1"]]))
    assert res.feasible and res.point[0] >= -1


def test_cube_containment_ball_in_unit_cube():
    assert cube_containment(make_ball(2), 1.0).contained


def test_cube_containment_violation_witness():
    res = cube_containment(make_cube(1, 2.0), 1.0)
    assert not res.contained
    assert abs(abs(res.witness[0]) - 2) < 1e-6


def test_cube_containment_unbounded():
    res = cube_containment(pencil([["1 + x1"]]), 10.0)
    assert not res.contained and res.status == "unbounded"
    assert res.ray[0] > 0


def test_affine_vanishes():
    L = pencil([["x1", "0"], ["0", "-x1"]])
    assert affine_vanishes_on_level1(L, AffineForm([0, 1]))
    assert not affine_vanishes_on_level1(L, AffineForm([1, 1]))
    assert not affine_vanishes_on_level1(make_cube(1), AffineForm([0, 1]))


def test_affine_vanishing_lifts_to_higher_levels():
    L = pencil([["1 + x2", "x1", "0"], ["x1", "1 - x2", "0"], ["0", "0", "x1"]])
    L = L.direct_sum(pencil([["-x1"]], 2))
    ell = AffineForm([0, 1, 0])
    assert affine_vanishes_on_level1(L, ell)
    rng = np.random.default_rng(7)
    for _ in range(100):
        k = int(rng.integers(1, 4))
        X = HermTuple.random(2, k, rng, scale=0.5)
        X = HermTuple(np.array([np.zeros((k, k)), X.mats[1]]))
        if is_member(L, X).member:
            assert np.linalg.norm(ell(X)) <= 1e-9
