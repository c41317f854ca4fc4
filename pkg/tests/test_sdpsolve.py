"""Solver regression: SDPs with closed-form optima, infeasible and unbounded instances."""
import numpy as np
import pytest

from freespectra import sdpsolve as sdp

TOL = 1e-6


def E(k, i, j):
    M = np.zeros((k, k))
    M[i, j] = M[j, i] = 1.0 if i == j else 0.5
    return M


def rand_sym(k, seed, cx=False):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((k, k)) + (1j * rng.standard_normal((k, k)) if cx else 0)
    return 0.5 * (G + G.conj().T)


def eig_program(C, sense):
    k = C.shape[0]
    prog = sdp.ConicProgram([k], [C], sense=sense)
    prog.add({0: np.eye(k)}, 1.0)
    return prog


def theta_program(k, edges):
    prog = sdp.ConicProgram([k], [np.ones((k, k))], sense="max")
    prog.add({0: np.eye(k)}, 1.0)
    for i, j in edges:
        prog.add({0: E(k, i, j)}, 0.0)
    return prog


def maxcut_program(k, edges):
    Lap = np.zeros((k, k))
    for i, j in edges:
        Lap[i, i] += 1
        Lap[j, j] += 1
        Lap[i, j] -= 1
        Lap[j, i] -= 1
    prog = sdp.ConicProgram([k], [Lap / 4], sense="max")
    for i in range(k):
        prog.add({0: E(k, i, i)}, 1.0)
    return prog


def opnorm_program(A):
    # min t s.t. [[tI, A], [Aᵀ, tI]] ⪰ 0, written as X = that matrix with t free
    m, p = A.shape
    k = m + p
    prog = sdp.ConicProgram([k], sense="min")
    t = prog.add_free(1, cost=1.0)
    for i in range(k):
        for j in range(i, k):
            if i == j:
                prog.add({0: E(k, i, i)}, 0.0, {t: -1.0})
            elif i < m <= j:
                prog.add({0: E(k, i, j)}, A[i, j - m])
            else:
                prog.add({0: E(k, i, j)}, 0.0)
    return prog


def nuclear_program(A):
    m, p = A.shape
    k = m + p
    prog = sdp.ConicProgram([k], [0.5 * np.eye(k)], sense="min")
    for i in range(m):
        for j in range(p):
            prog.add({0: E(k, i, m + j)}, A[i, j])
    return prog


def schur_program(b, P):
    k = len(b) + 1
    prog = sdp.ConicProgram([k], sense="min")
    t = prog.add_free(1, cost=1.0)
    prog.add({0: E(k, 0, 0)}, 0.0, {t: -1.0})
    for i in range(len(b)):
        prog.add({0: E(k, 0, i + 1)}, b[i])
        for j in range(i, len(b)):
            prog.add({0: E(k, i + 1, j + 1)}, P[i, j])
    return prog


def topk_program(C, kk):
    k = C.shape[0]
    prog = sdp.ConicProgram([k, k], [C, None], sense="max")
    prog.add({0: np.eye(k)}, float(kk))
    for i in range(k):
        for j in range(i, k):
            prog.add({0: E(k, i, j), 1: E(k, i, j)}, 1.0 if i == j else 0.0)
    return prog


def lmax_min_program():
    # min t s.t. tI − [[1, x], [x, −1]] ⪰ 0  → 1 at x = 0
    prog = sdp.ConicProgram([2], sense="min")
    t = prog.add_free(1, cost=1.0)
    x = prog.add_free(1)
    prog.add({0: E(2, 0, 0)}, -1.0, {t: -1.0})
    prog.add({0: E(2, 1, 1)}, 1.0, {t: -1.0})
    prog.add({0: E(2, 0, 1)}, 0.0, {x: 1.0})
    return prog


C5 = [(i, (i + 1) % 5) for i in range(5)]
PETERSEN = [(i, (i + 1) % 5) for i in range(5)] + [(5 + i, 5 + (i + 2) % 5) for i in range(5)] + [(i, 5 + i) for i in range(5)]
K5 = [(i, j) for i in range(5) for j in range(i + 1, 5)]

rng0 = np.random.default_rng(42)
A_op = rng0.standard_normal((4, 3))
A_nuc = rng0.standard_normal((3, 5))
b_s = rng0.standard_normal(29)
G = rng0.standard_normal((29, 29))
P_s = G @ G.T + 29 * np.eye(29)
C_top = rand_sym(6, 7)


def _complex_re12():
    prog = sdp.ConicProgram([2], [E(2, 0, 1)], sense="max", complex_blocks=[True])
    prog.add({0: E(2, 0, 0)}, 1.0)
    prog.add({0: E(2, 1, 1)}, 1.0)
    return prog


def _two_blocks():
    prog = sdp.ConicProgram([2, 3], [np.eye(2), np.eye(3)], sense="min")
    prog.add({0: E(2, 0, 0), 1: E(3, 0, 0)}, 2.0)
    return prog


def _free_lp():
    prog = sdp.ConicProgram([1, 1], sense="min")
    x = prog.add_free(2)
    prog.free_objective[:] = [1.0, 1.0]
    prog.add({0: -np.eye(1)}, 1.0, {x: 1.0})
    prog.add({1: -np.eye(1)}, 2.0, {x + 1: 1.0})
    return prog


def _diag_fixed_minJ():
    k = 4
    prog = sdp.ConicProgram([k], [-np.ones((k, k))], sense="min")
    for i in range(k):
        prog.add({0: E(k, i, i)}, 1.0)
    return prog


def _min_trace_offdiag():
    prog = sdp.ConicProgram([2], [np.eye(2)], sense="min")
    prog.add({0: E(2, 0, 1)}, 1.0)
    return prog


def _margin_with_free():
    prog = sdp.ConicProgram([2], sense="max")
    t = prog.add_free(1, cost=1.0)
    prog.add({0: E(2, 0, 0)}, 1.0, {})
    prog.add({0: E(2, 1, 1)}, 1.0, {})
    prog.add({0: E(2, 0, 1)}, 0.0, {t: -1.0})
    return prog


OPTIMAL_CASES = {
    "lambda_min_3": (lambda: eig_program(rand_sym(3, 1), "min"), np.linalg.eigvalsh(rand_sym(3, 1))[0]),
    "lambda_min_10": (lambda: eig_program(rand_sym(10, 2), "min"), np.linalg.eigvalsh(rand_sym(10, 2))[0]),
    "lambda_min_30": (lambda: eig_program(rand_sym(30, 3), "min"), np.linalg.eigvalsh(rand_sym(30, 3))[0]),
    "lambda_max_20": (lambda: eig_program(rand_sym(20, 5), "max"), np.linalg.eigvalsh(rand_sym(20, 5))[-1]),
    "lambda_max_complex_5": (lambda: eig_program(rand_sym(5, 4, True), "max"),
                             np.linalg.eigvalsh(rand_sym(5, 4, True))[-1]),
    "min_trace_offdiag": (_min_trace_offdiag, 2.0),
    "margin_free_t": (_margin_with_free, 1.0),
    "theta_C5": (lambda: theta_program(5, C5), np.sqrt(5)),
    "theta_petersen": (lambda: theta_program(10, PETERSEN), 4.0),
    "maxcut_K5": (lambda: maxcut_program(5, K5), 25 / 4),
    "maxcut_C5": (lambda: maxcut_program(5, C5), 25 / 8 + 5 * np.sqrt(5) / 8),
    "operator_norm": (lambda: opnorm_program(A_op), np.linalg.norm(A_op, 2)),
    "nuclear_norm": (lambda: nuclear_program(A_nuc), np.linalg.norm(A_nuc, "nuc")),
    "schur_complement_30": (lambda: schur_program(b_s, P_s), b_s @ np.linalg.solve(P_s, b_s)),
    "top2_eigen_sum": (lambda: topk_program(C_top, 2), np.sort(np.linalg.eigvalsh(C_top))[-2:].sum()),
    "min_lambda_max_affine": (lmax_min_program, 1.0),
    "complex_re_offdiag": (_complex_re12, 1.0),
    "two_blocks": (_two_blocks, 2.0),
    "free_lp": (_free_lp, 3.0),
    "diag_fixed_minJ": (_diag_fixed_minJ, -16.0),
}


@pytest.mark.parametrize("name", sorted(OPTIMAL_CASES))
def test_analytic_optimum(name):
    build, expected = OPTIMAL_CASES[name]
    prog = build()
    sol = sdp.solve(prog)
    assert sol.status == sdp.OPTIMAL, sol.message
    assert sol.objective == pytest.approx(expected, abs=TOL * max(1.0, abs(expected)))
    kkt = sdp.check_kkt(prog, sol)
    assert kkt["primal"] <= 1e-6 and kkt["dual"] <= 1e-6
    assert kkt["psd_defect"] >= -1e-7


def _neg_trace():
    prog = sdp.ConicProgram([3], [np.eye(3)], sense="min")
    prog.add({0: np.eye(3)}, -1.0)
    return prog


def _neg_diag_entry():
    prog = sdp.ConicProgram([2], [np.eye(2)], sense="min")
    prog.add({0: E(2, 0, 0)}, -1.0)
    return prog


def _inconsistent():
    prog = sdp.ConicProgram([2], [np.eye(2)], sense="min")
    prog.add({0: np.eye(2)}, 1.0)
    prog.add({0: np.eye(2)}, 2.0)
    return prog


def _lmi_empty():
    # x ≥ 1 and x ≤ −1 as a 2×2 diagonal LMI in primal form
    prog = sdp.ConicProgram([2], sense="min")
    x = prog.add_free(1)
    prog.add({0: E(2, 0, 0)}, -1.0, {x: -1.0})
    prog.add({0: E(2, 1, 1)}, -1.0, {x: 1.0})
    prog.add({0: E(2, 0, 1)}, 0.0)
    return prog


@pytest.mark.parametrize("build", [_neg_trace, _neg_diag_entry, _inconsistent, _lmi_empty],
                         ids=["negative_trace", "negative_diag", "inconsistent", "empty_lmi"])
def test_infeasible_claims_ship_verified_rays(build):
    prog = build()
    sol = sdp.solve(prog)
    assert sol.status == sdp.INFEASIBLE
    ok, info = sdp.verify_infeasibility(prog, sol.dual, tol=1e-7)
    assert ok, info


def test_unbounded_ray_verifies():
    prog = sdp.ConicProgram([2], [-E(2, 0, 0)], sense="min")
    prog.add({0: E(2, 1, 1)}, 1.0)
    sol = sdp.solve(prog)
    assert sol.status == sdp.UNBOUNDED
    ok, info = sdp.verify_improving_ray(prog, sol.certificate["X"], sol.certificate["x"])
    assert ok, info


def test_dump_roundtrip(tmp_path):
    prog = theta_program(5, C5)
    path = tmp_path / "theta.sdp"
    sdp.dump(prog, path)
    again = sdp.load_dump(path)
    assert sdp.solve(again).objective == pytest.approx(np.sqrt(5), abs=1e-6)


def test_realify_roundtrip():
    A = rand_sym(4, 9, True)
    R = sdp.realify_matrix(A)
    assert np.allclose(sdp.unrealify_matrix(R), A)
    # each eigenvalue of A appears twice in the real form
    assert np.allclose(np.linalg.eigvalsh(R), np.repeat(np.linalg.eigvalsh(A), 2), atol=1e-12)


def test_validate_rejects_non_hermitian():
    prog = sdp.ConicProgram([2], sense="feasibility")
    prog.add({0: np.array([[0, 1], [0, 0]])}, 1.0)
    with pytest.raises(ValueError):
        sdp.solve(prog)


cvxpy = pytest.importorskip("cvxpy")


@pytest.mark.parametrize("seed", range(5))
def test_against_clarabel_random_lmi(seed):
    # min c·x s.t. I + Σ x_j A_j ⪰ 0, bounded by adding the box |x_j| ≤ 1 as diagonal blocks
    rng = np.random.default_rng(100 + seed)
    k, n = 6, 3
    A = [rand_sym(k, 1000 * seed + j) for j in range(n)]
    c = rng.standard_normal(n)
    x = cvxpy.Variable(n)
    M = np.eye(k) + sum(x[j] * A[j] for j in range(n))
    prob = cvxpy.Problem(cvxpy.Minimize(c @ x), [0.5 * (M + M.T) >> 0, cvxpy.abs(x) <= 1])
    prob.solve(solver="CLARABEL")

    prog = sdp.ConicProgram([k, 2 * n], sense="min")
    xs = prog.add_free(n)
    prog.free_objective[:] = c
    for i in range(k):
        for j in range(i, k):
            prog.add({0: E(k, i, j)}, 1.0 if i == j else 0.0,
                     {xs + m: -A[m][i, j] for m in range(n) if A[m][i, j] != 0})
    for m in range(n):
        prog.add({1: E(2 * n, 2 * m, 2 * m)}, 1.0, {xs + m: 1.0})
        prog.add({1: E(2 * n, 2 * m + 1, 2 * m + 1)}, 1.0, {xs + m: -1.0})
    for i in range(2 * n):
        for j in range(i + 1, 2 * n):
            prog.add({1: E(2 * n, i, j)}, 0.0)
    sol = sdp.solve(prog)
    assert sol.status == sdp.OPTIMAL
    assert sol.objective == pytest.approx(prob.value, abs=1e-6)
