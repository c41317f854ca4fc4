import numpy as np
import pytest

from freespectra.algstruct import unitary_similarity_check
from freespectra.config import DEFAULT
from freespectra.detect import (
    INCONCLUSIVE, NOT_SPECTRAHEDRON, SPECTRAHEDRON, ConvexityWitness, DetectError, boundary_condition_check,
    boundary_witness_check, convexity_violation_search, detect_spectrahedron, matrix_convex_combine,
    poly_min_eig, random_isometry_blocks, ray_boundary, split_blocks, verify_convexity_witness,
)
from freespectra.freealg import HermTuple
from freespectra.parsing import parse_matrix_poly, parse_poly
from freespectra.pencil import Pencil, is_member, make_ball, make_cube
from freespectra.serialize import dumps

FAST = DEFAULT.replace(trials=300, consistency_samples=100, boundary_trials=4)


def pencil(rows, n=None):
    return Pencil.from_poly(parse_matrix_poly(rows, n))


# ---------------------------------------------------------------- matrix convex combinations

def test_identity_isometry():
    X = HermTuple.random(2, 3, np.random.default_rng(0))
    Y = matrix_convex_combine([X], [np.eye(3)])
    assert np.allclose(Y.mats, X.mats)


def test_scalar_midpoint():
    a, b = HermTuple.scalars([1.0, 1.0]), HermTuple.scalars([3.0, 1 / 9])
    h = np.sqrt(0.5) * np.ones((1, 1))
    Z = matrix_convex_combine([a, b], [h, h])
    assert np.allclose(Z.mats[:, 0, 0], [2.0, 5 / 9])


def test_isometry_violation_rejected():
    a = HermTuple.scalars([1.0])
    with pytest.raises(ValueError, match="isometry"):
        matrix_convex_combine([a, a], [np.ones((1, 1)), np.ones((1, 1))])


def test_random_isometry_blocks_sum_to_identity():
    V = random_isometry_blocks([2, 3, 1], 2, np.random.default_rng(1))
    assert np.allclose(sum(v.conj().T @ v for v in V), np.eye(2))


def test_combinations_of_members_stay_in_ball():
    rng = np.random.default_rng(2)
    L = make_ball(2)
    f = L.to_poly()
    for _ in range(1000):
        levels = [int(v) for v in rng.integers(1, 4, size=2)]
        pts = []
        for kj in levels:
            D = HermTuple.random(2, kj, rng)
            pts.append(D.scaled(ray_boundary(f, D) * rng.random()))
        k = int(rng.integers(1, min(3, sum(levels)) + 1))
        Z = matrix_convex_combine(pts, random_isometry_blocks(levels, k, rng))
        assert is_member(L, Z).min_eigenvalue >= -1e-8


# ---------------------------------------------------------------- helpers

def test_ray_boundary_scalar():
    t = ray_boundary(parse_poly("1 - x1^2"), HermTuple.scalars([2.0]))
    assert abs(t - 0.5) < 1e-9


def test_ray_boundary_unbounded_direction():
    assert ray_boundary(parse_poly("1 + x1^2"), HermTuple.scalars([1.0])) is None


def test_poly_min_eig_matches_dense():
    f = parse_poly("1 - x1*x2*x1")
    X = HermTuple.random(2, 3, np.random.default_rng(3))
    assert abs(poly_min_eig(f, X) - np.linalg.eigvalsh(f.evaluate(X))[0]) < 1e-12


# ---------------------------------------------------------------- convexity search

def test_search_finds_midpoint_violation():
    f = parse_poly("1 - x1*x2*x1")
    w = convexity_violation_search(f, config=FAST)
    assert isinstance(w, ConvexityWitness)
    ok, info = verify_convexity_witness(f, w)
    assert ok and info["lambda_min_combined"] < -1e-8


def test_known_level1_witness_verifies():
    f = parse_poly("1 - x1*x2*x1")
    a, b = HermTuple.scalars([1.0, 1.0]), HermTuple.scalars([3.0, 1 / 9])
    h = np.sqrt(0.5) * np.ones((1, 1))
    Z = matrix_convex_combine([a, b], [h, h])
    w = ConvexityWitness([a, b], [h, h], Z, poly_min_eig(f, Z))
    ok, info = verify_convexity_witness(f, w)
    assert ok
    assert abs(info["lambda_min_combined"] - (1 - 4 * 5 / 9)) < 1e-12


def test_tampered_witness_rejected():
    f = parse_poly("1 - x1*x2*x1")
    w = convexity_violation_search(f, config=FAST)
    bad = ConvexityWitness(w.points, [2 * v for v in w.V], w.combined, w.lambda_min)
    assert not verify_convexity_witness(f, bad)[0]


@pytest.mark.parametrize("f", [make_cube(2).to_poly(), parse_poly("1 - x1^2")])
def test_search_on_convex_domains(f):
    assert convexity_violation_search(f, config=FAST) is None


def test_search_is_deterministic():
    f = parse_poly("1 - x1*x2*x1 - x2^2")
    a = convexity_violation_search(f, config=FAST)
    b = convexity_violation_search(f, config=FAST)
    assert dumps(a) == dumps(b)


# ---------------------------------------------------------------- block split and boundary condition

def test_split_of_square_pencil():
    s = split_blocks(pencil([["1", "x1"], ["x1", "1"]]))
    assert s.Lcheck is None and len(s.Lhat_blocks) == 2
    slopes = sorted(float(P.coeffs[1][0, 0].real) for P in s.Lhat_blocks)
    assert np.allclose(slopes, [-1, 1])


def test_split_routes_non_hermitizable_block_to_check():
    L = pencil([["1", "x1"], ["x2", "1"]]).direct_sum(pencil([["1 + x1"]], 2))
    s = split_blocks(L)
    assert s.Lcheck is not None and s.Lcheck.d == 2
    assert [P.d for P in s.Lhat_blocks] == [1]


def test_triangular_nilpotent_pencil_splits_into_scalars():
    s = split_blocks(pencil([["1", "x1"], ["0", "1"]]))
    assert s.Lcheck is None and [P.d for P in s.Lhat_blocks] == [1, 1]


def test_split_hermitian_input():
    assert split_blocks(make_ball(2)).Lcheck is None


def test_boundary_holds_without_check_part():
    assert boundary_condition_check(make_cube(1), None).status == "holds"


def test_boundary_fails_for_non_hermitizable_block():
    check = pencil([["1", "x1"], ["x2", "1"]])
    res = boundary_condition_check(None, check, FAST)
    assert res.status == "fails"
    ok, _ = boundary_witness_check(None, check, res.witness)
    assert ok


def test_nilpotent_block_is_never_singular():
    # det(I + N x1) = 1, so the free locus is empty
    res = boundary_condition_check(None, pencil([["1", "x1"], ["0", "1"]]), FAST)
    assert res.status == "holds" and res.probabilistic


# ---------------------------------------------------------------- end to end

def test_detect_square():
    rep = detect_spectrahedron(parse_poly("1 - x1^2"), FAST)
    assert rep.verdict == SPECTRAHEDRON
    assert rep.Lhat.d == 2
    assert np.allclose(sorted(np.linalg.eigvalsh(rep.Lhat.coeffs[1])), [-1, 1])


def test_detect_cubic_is_not_spectrahedron():
    f = parse_poly("1 - x1*x2*x1")
    rep = detect_spectrahedron(f, FAST)
    assert rep.verdict == NOT_SPECTRAHEDRON
    assert verify_convexity_witness(f, rep.witness)[0]


def test_detect_ball_recovers_itself():
    rep = detect_spectrahedron(make_ball(2).to_poly(), FAST)
    assert rep.verdict == SPECTRAHEDRON
    assert rep.Lhat.d == 3
    assert not isinstance(unitary_similarity_check(make_ball(2), rep.Lhat), str)


def test_detect_cube():
    rep = detect_spectrahedron(make_cube(2).to_poly(), FAST)
    assert rep.verdict == SPECTRAHEDRON and rep.Lhat.d == 4


def test_detect_report_is_deterministic():
    f = parse_poly("1 - x1^2")
    assert dumps(detect_spectrahedron(f, FAST)) == dumps(detect_spectrahedron(f, FAST))


def test_detect_requires_positive_constant():
    with pytest.raises(DetectError):
        detect_spectrahedron(parse_poly("x1^2"))


def test_detect_requires_hermitian():
    with pytest.raises(DetectError):
        detect_spectrahedron(parse_poly("1 - x1*x2"))


def test_verdicts_are_known_strings():
    assert {SPECTRAHEDRON, NOT_SPECTRAHEDRON, INCONCLUSIVE} == {"spectrahedron", "not_spectrahedron", "inconclusive"}
