"""Linear matrix pencils, free spectrahedron membership and level-1 utilities."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import DEFAULT, ToolConfig
from .freealg import HermTuple, MatPoly, _matrices
from . import sdpsolve as sdp


class PencilError(ValueError):
    pass


class Pencil:
    """L = A_0 + A_1 x_1 + ... + A_n x_n with complex d×d coefficients."""

    __slots__ = ("coeffs", "tol_herm")

    def __init__(self, coeffs: Sequence, tol_herm: float = 1e-9):
        A = np.array([np.asarray(a, dtype=complex) for a in coeffs], dtype=complex)
        if A.ndim != 3 or A.shape[1] != A.shape[2] or A.shape[1] < 1 or A.shape[0] < 1:
            raise PencilError("pencil needs coefficients A_0..A_n, each d×d with d >= 1")
        A.setflags(write=False)
        self.coeffs = A
        self.tol_herm = tol_herm

    @property
    def n(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def d(self) -> int:
        return self.coeffs.shape[1]

    @property
    def A0(self) -> np.ndarray:
        return self.coeffs[0]

    @property
    def monic(self) -> bool:
        return bool(np.array_equal(self.coeffs[0], np.eye(self.d)))

    @property
    def hermitian(self) -> bool:
        return all(np.linalg.norm(A - A.conj().T) <= self.tol_herm * max(1.0, np.linalg.norm(A))
                   for A in self.coeffs)

    def __repr__(self):
        return f"Pencil(n={self.n}, d={self.d}, monic={self.monic}, hermitian={self.hermitian})"

    def __eq__(self, other):
        return isinstance(other, Pencil) and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def allclose(self, other: "Pencil", tol: float = 1e-9) -> bool:
        return self.coeffs.shape == other.coeffs.shape and np.max(np.abs(self.coeffs - other.coeffs)) <= tol

    def evaluate(self, X) -> np.ndarray:
        """A_0 ⊗ I + Σ A_j ⊗ X_j."""
        mats = _matrices(X)
        if mats.shape[0] != self.n:
            raise PencilError(f"variable count mismatch: pencil has {self.n}, point has {mats.shape[0]}")
        k = mats.shape[1]
        out = np.kron(self.coeffs[0], np.eye(k))
        for A, Xj in zip(self.coeffs[1:], mats):
            out = out + np.kron(A, Xj)
        return out

    def at_scalar(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        return self.coeffs[0] + np.tensordot(x, self.coeffs[1:], axes=1)

    def to_poly(self) -> MatPoly:
        terms = {(): self.coeffs[0]}
        terms.update({(j,): A for j, A in enumerate(self.coeffs[1:], start=1)})
        return MatPoly(self.n, terms, (self.d, self.d))

    @classmethod
    def from_poly(cls, p: MatPoly) -> "Pencil":
        if p.degree() > 1:
            raise PencilError(f"polynomial has degree {p.degree()} > 1")
        if p.shape[0] != p.shape[1]:
            raise PencilError("pencil coefficients must be square")
        return cls([p.coeff(())] + [p.coeff((j,)) for j in range(1, p.n + 1)])

    def conjugate(self, S: np.ndarray, Sinv: np.ndarray | None = None) -> "Pencil":
        """S L S^{-1} (similarity)."""
        Sinv = np.linalg.inv(S) if Sinv is None else Sinv
        out = [S @ A @ Sinv for A in self.coeffs]
        if self.monic:
            out[0] = np.eye(self.d)  # S I S⁻¹ = I exactly
        return Pencil(out)

    def congruence(self, T: np.ndarray) -> "Pencil":
        """T* L T."""
        return Pencil([T.conj().T @ A @ T for A in self.coeffs])

    def direct_sum(self, other: "Pencil") -> "Pencil":
        if other.n != self.n:
            raise PencilError("variable count mismatch")
        d, e = self.d, other.d
        out = np.zeros((self.n + 1, d + e, d + e), dtype=complex)
        out[:, :d, :d] = self.coeffs
        out[:, d:, d:] = other.coeffs
        return Pencil(out)

    def to_json(self) -> dict:
        from .serialize import cmat_to_json
        return {"n": self.n, "d": self.d, "coeffs": [cmat_to_json(A) for A in self.coeffs]}

    @classmethod
    def from_json(cls, obj: dict) -> "Pencil":
        from .serialize import cmat_from_json
        A = np.array([cmat_from_json(C) for C in obj["coeffs"]], dtype=complex)
        d = int(obj.get("d", A.shape[-1]))
        return cls(A.reshape(-1, d, d))

    def hermitian_part(self) -> "Pencil":
        return Pencil(0.5 * (self.coeffs + self.coeffs.conj().transpose(0, 2, 1)))


def direct_sum_all(pencils: Sequence[Pencil], n: int | None = None) -> Pencil | None:
    """Direct sum of a list; ``None`` for the empty list (the trivial pencil)."""
    out = None
    for P in pencils:
        out = P if out is None else out.direct_sum(P)
    return out


@dataclass(frozen=True)
class MembershipReport:
    member: bool
    min_eigenvalue: float
    level: int
    tol: float

    def to_json(self) -> dict:
        return {"member": self.member, "min_eigenvalue": self.min_eigenvalue, "level": self.level,
                "tol": self.tol}


@dataclass(frozen=True)
class AffineForm:
    """α_0 + α_1 x_1 + ... + α_n x_n with real α."""

    alphas: tuple[float, ...]

    def __init__(self, alphas: Sequence[float]):
        a = tuple(float(v) for v in alphas)
        if not all(np.isfinite(a)):
            raise ValueError("affine form coefficients must be finite")
        object.__setattr__(self, "alphas", a)

    @property
    def n(self) -> int:
        return len(self.alphas) - 1

    def __call__(self, X) -> np.ndarray:
        mats = _matrices(X)
        k = mats.shape[1]
        return self.alphas[0] * np.eye(k) + np.tensordot(np.array(self.alphas[1:]), mats, axes=1)


def make_cube(n: int, r: float = 1.0) -> Pencil:
    """⊕_j [[r, x_j], [x_j, r]]; its domain is the tuples with ‖X_j‖ <= r."""
    if not r > 0:
        raise PencilError("cube radius must be positive")
    A = np.zeros((n + 1, 2 * n, 2 * n), dtype=complex)
    A[0] = r * np.eye(2 * n)
    for j in range(n):
        A[j + 1, 2 * j, 2 * j + 1] = A[j + 1, 2 * j + 1, 2 * j] = 1.0
    return Pencil(A)


def make_ball(n: int, r: float = 1.0) -> Pencil:
    """Arrow pencil [[I_n, x], [xᵀ, r²]]; domain is Σ X_j² ⪯ r² I."""
    if not r > 0:
        raise PencilError("ball radius must be positive")
    A = np.zeros((n + 1, n + 1, n + 1), dtype=complex)
    A[0] = np.diag([1.0] * n + [r * r])
    for j in range(n):
        A[j + 1, j, n] = A[j + 1, n, j] = 1.0
    return Pencil(A)


def psd_tolerance(M: np.ndarray, config: ToolConfig = DEFAULT) -> float:
    return config.tol_psd * (1 + np.linalg.norm(M))


def min_eig(M: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0])


def is_member(L: Pencil, X, tol: float | None = None, config: ToolConfig = DEFAULT) -> MembershipReport:
    if not L.hermitian:
        raise PencilError("membership needs a hermitian pencil")
    M = L.evaluate(X)
    lam = min_eig(M)
    tol = psd_tolerance(M, config) if tol is None else tol
    return MembershipReport(lam >= -tol, lam, _matrices(X).shape[1], tol)


def make_monic(L: Pencil, config: ToolConfig = DEFAULT) -> tuple[Pencil, dict]:
    """A_0^{-1/2} L A_0^{-1/2}; requires A_0 ≻ 0."""
    if not L.hermitian:
        raise PencilError("make_monic needs a hermitian pencil")
    w, V = np.linalg.eigh(0.5 * (L.A0 + L.A0.conj().T))
    if w[0] <= config.tol_pd * max(1.0, abs(w[-1])):
        raise PencilError("requires interior point at 0; affine-hull reduction out of scope "
                          f"(smallest eigenvalue of A_0 is {w[0]:.3g})")
    T = (V / np.sqrt(w)) @ V.conj().T
    out = L.congruence(T)
    A = np.array(out.coeffs)
    A[0] = np.eye(L.d)
    A[1:] = 0.5 * (A[1:] + A[1:].conj().transpose(0, 2, 1))
    return Pencil(A), {"conjugator": T, "A0_eigenvalues": w}


# ---------------------------------------------------------------- level-1 programs

def _lmi_program(L: Pencil, cost: np.ndarray, extra_t: bool, sense: str = "max") -> sdp.ConicProgram:
    """Program over scalar x (and optionally t) with L(x) − t·I ⪰ 0.

    Written in primal form: X ⪰ 0 with X = L(x) − tI, x and t free.
    """
    d, n = L.d, L.n
    prog = sdp.ConicProgram([d], sense=sense)
    nf = n + (1 if extra_t else 0)
    prog.add_free(nf)
    prog.free_objective = np.asarray(cost, dtype=float)
    # X − Σ A_j x_j + t I = A_0, entrywise over the hermitian structure
    pairs = sdp.complex_linear_constraints(lambda P: P, d, (d, d))
    for r in range(d):
        for s in range(r, d):
            e = r * d + s
            for part, G in ((np.real, pairs[e][0]), (np.imag, pairs[e][1])):
                if r == s and part is np.imag:
                    continue
                free = {j: -float(part(L.coeffs[j + 1][r, s])) for j in range(n)}
                if extra_t and r == s:
                    free[n] = 1.0
                free = {j: v for j, v in free.items() if v != 0}
                prog.add({0: G}, float(part(L.A0[r, s])), free)
    return prog


@dataclass
class Level1Result:
    status: str  # interior | boundary | infeasible | numerical_failure
    point: np.ndarray | None = None
    margin: float = float("nan")
    certificate: np.ndarray | None = None
    message: str = ""

    @property
    def feasible(self) -> bool:
        return self.status in ("interior", "boundary")

    def to_json(self) -> dict:
        return {"status": self.status, "point": self.point, "margin": self.margin,
                "certificate": self.certificate, "message": self.message}


def level1_feasible(L: Pencil, config: ToolConfig = DEFAULT) -> Level1Result:
    """Find x ∈ ℝⁿ with L(x) ⪰ 0 by maximizing the margin t (capped at 1)."""
    if not L.hermitian:
        raise PencilError("level1_feasible needs a hermitian pencil")
    n = L.n
    cost = np.zeros(n + 1)
    cost[n] = 1.0
    prog = _lmi_program(L, cost, extra_t=True)
    # cap t <= 1 via a slack block s = 1 − t >= 0
    prog.block_sizes.append(1)
    prog.objective.append(None)
    prog.add({1: np.eye(1)}, 1.0, {n: 1.0})
    sol = sdp.solve(prog, config)
    if sol.status != sdp.OPTIMAL:
        # (x, t) = (0, very negative) is always feasible and t is capped, so this is a solver fault
        return Level1Result("numerical_failure", message=sol.message)
    x, t = sol.free[:n], sol.free[n]
    if t < -config.tol_obj:
        cert = _level1_infeasible(L, config)
        if cert is not None:
            return cert
        return Level1Result("numerical_failure", x, t, message="negative margin without certificate")
    lam = min_eig(L.at_scalar(x))
    if lam > config.tol_psd:
        return Level1Result("interior", x, lam)
    if lam >= -config.tol_psd * (1 + np.linalg.norm(L.at_scalar(x))):
        return Level1Result("boundary", x, lam)
    return Level1Result("numerical_failure", x, lam, message="optimum violates L(x) ⪰ 0")


def level1_infeasibility_certificate(L: Pencil, Y: np.ndarray, tol: float = 1e-7) -> bool:
    """Y ⪰ 0, tr(A_j Y) = 0 (j >= 1) and tr(A_0 Y) < 0 certify 𝒟_L(1) = ∅."""
    Y = 0.5 * (Y + Y.conj().T)
    scale = np.trace(Y).real
    if scale <= 0:
        return False
    Y = Y / scale
    ok = min_eig(Y) >= -tol
    ok &= all(abs(np.trace(A @ Y)) <= tol for A in L.coeffs[1:])
    return bool(ok and np.trace(L.A0 @ Y).real < -tol)


def _level1_infeasible(L: Pencil, config: ToolConfig) -> Level1Result | None:
    """Decide emptiness of 𝒟_L(1) via the margin program's dual (min tr(A_0 Y))."""
    d = L.d
    prog = sdp.ConicProgram([d], [L.A0], sense="min")
    for A in L.coeffs[1:]:
        prog.add({0: 0.5 * (A + A.conj().T)}, 0.0)
    prog.add({0: np.eye(d)}, 1.0)
    sol = sdp.solve(prog, config)
    if sol.status != sdp.OPTIMAL:
        return None
    if sol.objective < -config.tol_obj:
        return Level1Result("infeasible", margin=sol.objective, certificate=sol.primal[0])
    return None


@dataclass
class ContainmentResult:
    contained: bool
    witness: np.ndarray | None = None
    ray: np.ndarray | None = None
    optima: list = field(default_factory=list)
    status: str = "ok"

    def to_json(self) -> dict:
        return {"contained": self.contained, "witness": self.witness, "ray": self.ray,
                "optima": self.optima, "status": self.status}


def _extreme(L: Pencil, direction: np.ndarray, config: ToolConfig) -> sdp.ConicSolution:
    return sdp.solve(_lmi_program(L, direction, extra_t=False, sense="max"), config)


def cube_containment(L: Pencil, r: float, config: ToolConfig = DEFAULT) -> ContainmentResult:
    """Is 𝒟_L ⊆ 𝒞_r?  Checked on level 1 through 2n programs max ±x_j."""
    if not L.hermitian:
        raise PencilError("cube_containment needs a hermitian pencil")
    optima = []
    for j in range(L.n):
        for sgn in (1.0, -1.0):
            e = np.zeros(L.n)
            e[j] = sgn
            sol = _extreme(L, e, config)
            if sol.status == sdp.UNBOUNDED:
                ray = np.asarray(sol.certificate["x"], dtype=float)
                ray = ray / np.linalg.norm(ray)
                optima.append((j + 1, sgn, float("inf")))
                return ContainmentResult(False, ray=ray, optima=optima, status="unbounded")
            if sol.status != sdp.OPTIMAL:
                optima.append((j + 1, sgn, None))
                return ContainmentResult(False, optima=optima, status=sol.status)
            optima.append((j + 1, sgn, sol.objective))
            if sol.objective > r + config.tol_obj * (1 + abs(r)):
                return ContainmentResult(False, witness=sol.free.copy(), optima=optima)
    return ContainmentResult(True, optima=optima)


def affine_vanishes_on_level1(L: Pencil, ell: AffineForm, config: ToolConfig = DEFAULT) -> bool:
    """ℓ ≡ 0 on 𝒟_L(1), decided by max ℓ and min ℓ over the level-1 spectrahedron."""
    if ell.n != L.n:
        raise PencilError("affine form and pencil disagree on the variable count")
    a = np.array(ell.alphas[1:])
    best = []
    for sgn in (1.0, -1.0):
        sol = _extreme(L, sgn * a, config)
        if sol.status == sdp.UNBOUNDED:
            return False
        if sol.status != sdp.OPTIMAL:
            raise sdp.SolverError(f"level-1 program failed: {sol.message}")
        best.append(sol.objective)
    hi = ell.alphas[0] + best[0]
    lo = ell.alphas[0] - best[1]
    return abs(hi) <= config.tol_obj and abs(lo) <= config.tol_obj
