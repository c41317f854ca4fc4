"""Structure of the algebra generated by pencil coefficients.

Irreducibility (Burnside), common invariant subspaces, block
triangularization, similarity to a hermitian pencil, unitary similarity of
irreducible pencils and removal of redundant direct summands.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import sdpsolve as sdp
from .config import DEFAULT, ToolConfig
from .pencil import Pencil, PencilError, direct_sum_all

IRREDUCIBLE = "irreducible"
NONE = "none"


class AlgStructError(RuntimeError):
    pass


# ---------------------------------------------------------------- linear algebra helpers

def _null_space(K: np.ndarray, tol: float, what: str = "null space") -> np.ndarray:
    """Orthonormal basis (columns) of ker K with a relative singular-value cut.

    Singular values inside (tol, 1e3·tol)·σ_max make the rank ambiguous and raise.
    """
    ncols = K.shape[1]
    if K.shape[0] == 0:
        return np.eye(ncols, dtype=complex)
    _, s, Vh = np.linalg.svd(K)
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        return np.eye(ncols, dtype=complex)
    ambiguous = s[(s > tol * smax) & (s < 1e3 * tol * smax)]
    if ambiguous.size:
        raise AlgStructError(f"{what}: numerical rank ambiguous, singular values "
                             f"{(ambiguous / smax).tolist()} relative to σ_max={smax:.3g}")
    rank = int(np.sum(s > tol * smax))
    return Vh[rank:].conj().T


def _orth(M: np.ndarray, tol: float) -> np.ndarray:
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    if not s.size or s[0] == 0:
        return U[:, :0]
    return U[:, : int(np.sum(s > tol * s[0]))]


def _generators(coeffs) -> list[np.ndarray]:
    if isinstance(coeffs, Pencil):
        coeffs = list(coeffs.coeffs[1:])
    mats = [np.asarray(A, dtype=complex) for A in coeffs]
    if not mats:
        raise ValueError("need at least one generator")
    d = mats[0].shape[0]
    if any(A.shape != (d, d) for A in mats):
        raise ValueError("generators must share a common square size")
    return mats


def _invariance_residual(gens: Sequence[np.ndarray], W: np.ndarray) -> float:
    P = np.eye(W.shape[0]) - W @ W.conj().T
    return max(float(np.linalg.norm(P @ A @ W)) / max(1.0, float(np.linalg.norm(A))) for A in gens)


# ---------------------------------------------------------------- algebra closure

@dataclass
class AlgebraBasis:
    generators: list
    basis: list
    dim: int

    def closure_residual(self) -> float:
        """Largest component of a product of basis elements outside the span."""
        if not self.basis:
            return 0.0
        B = np.array([b.reshape(-1) for b in self.basis]).T
        worst = 0.0
        for x in self.basis:
            for y in self.basis:
                v = (x @ y).reshape(-1)
                worst = max(worst, float(np.linalg.norm(v - B @ (B.conj().T @ v))))
        return worst


def algebra_closure(coeffs, config: ToolConfig = DEFAULT) -> AlgebraBasis:
    """Orthonormal basis of the unital algebra generated by ``coeffs``."""
    gens = _generators(coeffs)
    d = gens[0].shape[0]
    scaled = [A / np.linalg.norm(A) for A in gens if np.linalg.norm(A) > 0]
    I = np.eye(d, dtype=complex) / np.sqrt(d)
    basis = [I.reshape(-1)]
    queue = [I]
    while queue and len(basis) < d * d:
        B = queue.pop(0)
        for G in scaled:
            P = G @ B
            v = P.reshape(-1)
            nv = np.linalg.norm(v)
            if nv == 0:
                continue
            Q = np.array(basis).T
            for _ in range(2):  # reorthogonalize once
                v = v - Q @ (Q.conj().T @ v)
            # absolute cut: G, B have unit norm, and a relative one admits noise from vanishing products
            if np.linalg.norm(v) > config.tol_rank * 1e2:
                v = v / np.linalg.norm(v)
                basis.append(v)
                queue.append(v.reshape(d, d))
                if len(basis) == d * d:
                    break
    mats = [b.reshape(d, d) for b in basis]
    return AlgebraBasis(gens, mats, len(mats))


def is_irreducible(L, config: ToolConfig = DEFAULT) -> bool:
    """Burnside: the coefficients A_1..A_n generate all d×d matrices."""
    gens = _generators(L)
    d = gens[0].shape[0]
    if d == 1:
        return True
    return algebra_closure(gens, config).dim == d * d


# ---------------------------------------------------------------- invariant subspaces

@dataclass
class InvariantSubspace:
    basis: np.ndarray  # d×r, orthonormal columns
    route: str  # radical | commutant
    residual: float

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def _radical_subspace(alg: AlgebraBasis, tol: float) -> np.ndarray | None:
    B = alg.basis
    T = np.array([[np.trace(x @ y) for y in B] for x in B])
    C = _null_space(T, tol, "trace form")
    if C.shape[1] == 0:
        return None
    rad = [sum(c[i] * B[i] for i in range(len(B))) for c in C.T]
    W = _orth(np.hstack(rad), tol)
    return W if 0 < W.shape[1] < B[0].shape[0] else None


def _commutant(gens: Sequence[np.ndarray], tol: float) -> np.ndarray:
    d = gens[0].shape[0]
    I = np.eye(d)
    K = np.vstack([np.kron(I, A.T) - np.kron(A, I) for A in gens])
    return _null_space(K, tol, "commutant")


def _phase_normalize(C: np.ndarray) -> np.ndarray:
    flat = C.reshape(-1)
    z = flat[int(np.argmax(np.abs(flat)))]
    return C * (abs(z) / z) / np.linalg.norm(C)


def _eigenspaces(C: np.ndarray, hermitian: bool, tol: float) -> list[tuple[complex, np.ndarray]]:
    d = C.shape[0]
    ev = np.linalg.eigvalsh(C) if hermitian else np.linalg.eigvals(C)
    scale = max(1.0, float(np.max(np.abs(ev))))
    clusters: list[complex] = []
    for lam in sorted(ev, key=lambda z: (z.real, z.imag)):
        if not any(abs(lam - c) <= 1e-6 * scale for c in clusters):
            clusters.append(lam)
    out = []
    for lam in clusters:
        V = _null_space(C - lam * np.eye(d), 1e-7)
        if 0 < V.shape[1] < d:
            out.append((lam, V))
    return out


def invariant_subspace(coeffs, config: ToolConfig = DEFAULT):
    """A proper common invariant subspace, or ``IRREDUCIBLE``.

    Radical first (trace-form kernel); otherwise an eigenspace of a
    non-scalar element of the commutant.
    """
    gens = _generators(coeffs)
    d = gens[0].shape[0]
    if d == 1:
        return IRREDUCIBLE
    alg = algebra_closure(gens, config)
    if alg.dim == d * d:
        return IRREDUCIBLE
    tol = config.tol_rank
    W = _radical_subspace(alg, tol)
    if W is not None:
        return InvariantSubspace(W, "radical", _invariance_residual(gens, W))
    N = _commutant(gens, tol)
    vecI = np.eye(d).reshape(-1) / np.sqrt(d)
    N = N - np.outer(vecI, vecI.conj() @ N)
    U, s, _ = np.linalg.svd(N, full_matrices=False)
    if not s.size or s[0] <= 1e-6:
        raise AlgStructError(f"algebra has dimension {alg.dim} < {d * d} but trivial radical "
                             "and scalar commutant; rank decisions inconsistent")
    C = _phase_normalize(U[:, 0].reshape(d, d))
    H = 0.5 * (C + C.conj().T)
    Hs = H - np.trace(H) / d * np.eye(d)
    hermitian = (np.linalg.norm(Hs) > 1e-6 and
                 max(np.linalg.norm(H @ A - A @ H) for A in gens) <= 1e-8 * max(1.0, max(np.linalg.norm(A) for A in gens)))
    spaces = _eigenspaces(H if hermitian else C, hermitian, tol)
    if not spaces:
        raise AlgStructError("commutant element has no proper eigenspace")
    lam, V = min(spaces, key=lambda p: (p[1].shape[1], p[0].real, p[0].imag))
    W = _orth(V, 1e-12)
    if W.shape[1] == 1:
        W = _phase_normalize(W) * 1.0
    return InvariantSubspace(W, "commutant", _invariance_residual(gens, W))


# ---------------------------------------------------------------- block triangularization

@dataclass
class HermitizationWitness:
    Q: np.ndarray
    conjugated: Pencil

    def to_json(self) -> dict:
        return {"Q": self.Q, "pencil": self.conjugated.coeffs}


@dataclass
class NotHermitizable:
    """Certified infeasibility of Q ⪰ I, Q A_j* = A_j Q."""

    certificate: np.ndarray
    verified: bool

    def to_json(self) -> dict:
        return {"certificate": self.certificate, "verified": self.verified}


@dataclass
class BlockDecomposition:
    U: np.ndarray
    block_sizes: list
    diagonal_blocks: list
    block_class: list = field(default_factory=list)
    hermitization: list = field(default_factory=list)
    transcript: list = field(default_factory=list)

    def to_json(self) -> dict:
        blocks = []
        for i, P in enumerate(self.diagonal_blocks):
            entry = {"pencil": P.coeffs}
            if self.block_class:
                entry["class"] = self.block_class[i]
                h = self.hermitization[i]
                if isinstance(h, HermitizationWitness):
                    entry["Q"] = h.Q
            blocks.append(entry)
        return {"U": self.U, "block_sizes": self.block_sizes, "blocks": blocks}


def _triangularize(gens: list[np.ndarray], config: ToolConfig, log: list) -> tuple[np.ndarray, list[int]]:
    """Unitary V with V* A V block upper triangular for every generator."""
    d = gens[0].shape[0]
    W = invariant_subspace(gens, config)
    if W is IRREDUCIBLE or isinstance(W, str):
        return np.eye(d, dtype=complex), [d]
    log.append({"size": d, "route": W.route, "dim": W.dim, "residual": W.residual})
    r = W.dim
    full, _ = np.linalg.qr(np.hstack([W.basis, np.eye(d)]))
    # keep W's span as the leading columns
    comp = full[:, r:d]
    comp = comp - W.basis @ (W.basis.conj().T @ comp)
    comp = _orth(comp, 1e-10)[:, : d - r]
    V0 = np.hstack([W.basis, comp])
    top = [(V0.conj().T @ A @ V0)[:r, :r] for A in gens]
    bot = [(V0.conj().T @ A @ V0)[r:, r:] for A in gens]
    V1, s1 = _triangularize(top, config, log)
    V2, s2 = _triangularize(bot, config, log)
    V = V0 @ np.block([[V1, np.zeros((r, d - r))], [np.zeros((d - r, r)), V2]])
    return V, s1 + s2


def block_triangularize(L: Pencil, config: ToolConfig = DEFAULT, classify: bool = True) -> BlockDecomposition:
    """U with U·L·U⁻¹ block upper triangular, diagonal blocks irreducible or 1×1.

    U is unitary, so U⁻¹ = U*.  With ``classify`` each diagonal block is
    tagged hermitian, hermitizable (with its Q) or non-hermitizable.
    """
    if not L.monic:
        raise PencilError("block_triangularize needs a monic pencil")
    log: list = []
    V, sizes = _triangularize(list(L.coeffs[1:]), config, log)
    U = V.conj().T
    T = L.conjugate(U, V)
    blocks, off = [], 0
    for s in sizes:
        C = T.coeffs[:, off:off + s, off:off + s].copy()
        C[0] = np.eye(s)
        blocks.append(Pencil(C))
        off += s
    dec = BlockDecomposition(U, sizes, blocks, transcript=log)
    if classify:
        for P in blocks:
            if P.hermitian:
                dec.block_class.append("hermitian")
                dec.hermitization.append(HermitizationWitness(np.eye(P.d), P))
                continue
            h = hermitian_similarity(P, config)
            dec.block_class.append("hermitizable" if isinstance(h, HermitizationWitness) else "non-hermitizable")
            dec.hermitization.append(h)
    return dec


def lower_block_residual(dec: BlockDecomposition, L: Pencil, X) -> float:
    """Largest norm of a below-diagonal block of (U L U⁻¹)(X)."""
    from .freealg import _matrices

    k = _matrices(X).shape[1]
    T = L.conjugate(dec.U, dec.U.conj().T).evaluate(X)
    worst, off = 0.0, 0
    for s in dec.block_sizes:
        lo, hi = off * k, (off + s) * k
        worst = max(worst, float(np.linalg.norm(T[hi:, lo:hi])) if hi < T.shape[0] else 0.0)
        off += s
    return worst


# ---------------------------------------------------------------- hermitian similarity

def _skew_rows(prog: sdp.ConicProgram, block: int, lin, rhs: np.ndarray, k: int) -> None:
    """Constraints lin(P) = rhs for skew-hermitian valued lin, upper triangle only."""
    pairs = sdp.complex_linear_constraints(lin, k, rhs.shape)
    d = rhs.shape[0]
    for r in range(d):
        for s in range(r, d):
            Gre, Gim = pairs[r * d + s]
            if r != s:
                prog.add({block: Gre}, float(rhs[r, s].real))
            prog.add({block: Gim}, float(rhs[r, s].imag))


def hermitian_similarity(L: Pencil, config: ToolConfig = DEFAULT):
    """Q ⪰ I with Q·A_j* = A_j·Q, or a certificate that none exists.

    Solved as min tr(P) over P ⪰ 0 with Q = I + P.  Returns a
    :class:`HermitizationWitness` or :class:`NotHermitizable`; raises
    :class:`AlgStructError` on solver failure.
    """
    if not L.monic:
        raise PencilError("hermitian_similarity needs a monic pencil")
    d = L.d
    gens = list(L.coeffs[1:])
    if all(np.allclose(A, A.conj().T, atol=config.tol_herm) for A in gens):
        return HermitizationWitness(np.eye(d, dtype=complex), L.hermitian_part())
    prog = sdp.ConicProgram([d], [np.eye(d)], sense="min", complex_blocks=[True])
    for A in gens:
        # (I+P)A* − A(I+P) = 0  ⇔  P A* − A P = A − A*
        _skew_rows(prog, 0, lambda P, A=A: P @ A.conj().T - A @ P, A - A.conj().T, d)
    sol = sdp.solve(prog, config)
    if sol.status == sdp.INFEASIBLE:
        ok, _ = sdp.verify_infeasibility(prog, sol.dual)
        Y = sdp.constraint_operator_adjoint(prog, sol.dual)[0]
        return NotHermitizable(Y, ok)
    if sol.status != sdp.OPTIMAL:
        raise AlgStructError(f"hermitization SDP: {sol.status} ({sol.message})")
    Q = np.eye(d) + sol.primal[0]
    Q = 0.5 * (Q + Q.conj().T)
    ev, V = np.linalg.eigh(Q)
    ev = np.maximum(ev, 1.0)
    Q = (V * ev) @ V.conj().T
    sq = (V * np.sqrt(ev)) @ V.conj().T
    isq = (V / np.sqrt(ev)) @ V.conj().T
    H = Pencil([isq @ A @ sq for A in L.coeffs])
    defect = max(float(np.linalg.norm(B - B.conj().T)) for B in H.coeffs)
    if defect > 1e-6 * max(1.0, float(np.max(np.abs(L.coeffs)))):
        raise AlgStructError(f"hermitization SDP returned Q with hermitian defect {defect:.3g}")
    return HermitizationWitness(Q, H.hermitian_part())


# ---------------------------------------------------------------- unitary similarity

def unitary_similarity_check(L: Pencil, M: Pencil, config: ToolConfig = DEFAULT, tol: float = 1e-6):
    """Unitary U with M = U·L·U*, or ``NONE``.  Both pencils must be irreducible."""
    if L.d != M.d or L.n != M.n:
        return NONE
    for P, name in ((L, "first"), (M, "second")):
        if not (P.monic and P.hermitian):
            raise PencilError(f"{name} pencil must be monic hermitian")
        if not is_irreducible(P, config):
            raise PencilError(f"{name} pencil is reducible; unitary similarity check needs irreducible input")
    d = L.d
    I = np.eye(d)
    K = np.vstack([np.kron(I, A.T) - np.kron(B, I) for A, B in zip(L.coeffs[1:], M.coeffs[1:])])
    N = _null_space(K, max(config.tol_rank, 1e-9), "intertwiner")
    if N.shape[1] != 1:
        return NONE
    S = N[:, 0].reshape(d, d)
    s = np.linalg.svd(S, compute_uv=False)
    if s[-1] <= 0 or s[0] / s[-1] > 1 + tol:
        return NONE
    U = S / s[0]
    z = U.reshape(-1)[int(np.argmax(np.abs(U)))]
    return U * (abs(z) / z)


# ---------------------------------------------------------------- redundant blocks

def cp_containment(source: Pencil, target: Pencil, config: ToolConfig = DEFAULT) -> tuple[str, dict]:
    """Search a CP map Φ with Φ(I) ⪯ I and Φ(S_j) = T_j.

    Feasibility implies 𝒟_source ⊆ 𝒟_target.  Returns ("contained" |
    "not_shown" | status, info).
    """
    s, t = source.d, target.d
    k = s * t
    prog = sdp.ConicProgram([k, t], sense="feasibility", complex_blocks=[True, True])

    def phi(C, Y):
        return np.einsum("ab,arbc->rc", Y, C.reshape(s, t, s, t))

    def herm_rows(lin, rhs, slack: bool):
        pairs = sdp.complex_linear_constraints(lin, k, (t, t))
        eye_pairs = sdp.complex_linear_constraints(lambda Z: Z, t, (t, t)) if slack else None
        for r in range(t):
            for c in range(r, t):
                e = r * t + c
                for part in (0, 1):
                    if part == 1 and r == c:
                        continue
                    blocks = {0: pairs[e][part]}
                    if slack:
                        blocks[1] = eye_pairs[e][part]
                    val = rhs[r, c].real if part == 0 else rhs[r, c].imag
                    prog.add(blocks, float(val))

    for Sj, Tj in zip(source.coeffs[1:], target.coeffs[1:]):
        herm_rows(lambda C, Sj=Sj: phi(C, Sj), Tj, slack=False)
    herm_rows(lambda C: phi(C, np.eye(s)), np.eye(t), slack=True)
    sol = sdp.solve(prog, config)
    if sol.status == sdp.OPTIMAL:
        return "contained", {"choi": sol.primal[0]}
    if sol.status == sdp.INFEASIBLE:
        return "not_shown", {"certificate": sol.dual}
    return sol.status, {"message": sol.message}


@dataclass
class RedundancyResult:
    kept: list  # indices into the input list
    dropped: list
    complete: bool = True
    message: str = ""

    def blocks(self, pencils: Sequence[Pencil]) -> list:
        return [pencils[i] for i in self.kept]


def remove_redundant_blocks(blocks: Sequence[Pencil], config: ToolConfig = DEFAULT) -> RedundancyResult:
    """Greedily drop blocks whose domain contains that of the remaining sum.

    Scan order is ascending size, then index.  A solver failure stops the
    scan and flags the result incomplete.
    """
    blocks = list(blocks)
    for P in blocks:
        if not (P.monic and P.hermitian):
            raise PencilError("remove_redundant_blocks needs monic hermitian blocks")
    kept = list(range(len(blocks)))
    dropped = []
    for j in sorted(range(len(blocks)), key=lambda i: (blocks[i].d, i)):
        others = [i for i in kept if i != j]
        if not others:
            continue
        src = direct_sum_all([blocks[i] for i in others])
        verdict, info = cp_containment(src, blocks[j], config)
        if verdict == "contained":
            kept.remove(j)
            dropped.append(j)
        elif verdict != "not_shown":
            return RedundancyResult(kept, dropped, False, f"block {j}: {verdict} {info.get('message', '')}")
    return RedundancyResult(kept, dropped)
