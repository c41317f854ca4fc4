"""Monic linearization of a matrix polynomial by repeated Higman steps.

One step picks a top-degree word w = u·v (u = first ⌊m/2⌋ letters) with
coefficient M in the current D×D polynomial f, writes f = a + b·c with
b = P·u, c = R·v (M = P R a rank factorization) and replaces f by

    [[a, −b],
     [c,  I]]

whose determinant equals det(a + b c) = det f at every point.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT, ToolConfig
from .freealg import MatPoly, Word, word_key
from .pencil import Pencil


class LinearizationError(ValueError):
    pass


def _rank_factor(M: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """M = P @ R with P of full column rank; P = M when M is invertible."""
    U, s, Vh = np.linalg.svd(M)
    r = int(np.sum(s > tol * max(s[0], 1e-300)))
    if r == M.shape[0]:
        return M.copy(), np.eye(M.shape[0], dtype=complex)
    return U[:, :r] * s[:r], Vh[:r]


def _top_word(f: MatPoly) -> Word:
    m = f.degree()
    return min((w for w in f.words() if len(w) == m), key=word_key)


def higman_step(f: MatPoly, config: ToolConfig = DEFAULT) -> tuple[MatPoly, dict]:
    """One Higman split of the lexicographically first top-degree word."""
    if f.shape[0] != f.shape[1]:
        raise LinearizationError("higman_step needs a square matrix polynomial")
    if f.degree() < 2:
        raise LinearizationError(f"higman_step needs degree >= 2, got {f.degree()}")
    w = _top_word(f)
    M = f.coeff(w)
    h = len(w) // 2
    u, v = w[:h], w[h:]
    P, R = _rank_factor(M, config.tol_rank)
    n, D, r = f.n, f.shape[0], P.shape[1]
    a = f - MatPoly.monomial(w, n, M)
    b = MatPoly.monomial(u, n, P)
    c = MatPoly.monomial(v, n, R)
    g = MatPoly.from_entries([[a, -b], [c, MatPoly.identity(n, r)]], n)
    return g, {"word": list(w), "split": [list(u), list(v)], "rank": r, "size": D + r}


@dataclass
class Linearization:
    """Monic pencil L with det L(X) = det_factor**k · det f(X) at level k."""

    L: Pencil
    det_factor: complex
    transcript: list = field(default_factory=list)
    size_before_normalization: int = 0

    def to_json(self) -> dict:
        from .serialize import to_jsonable
        return {"det_factor": [self.det_factor.real, self.det_factor.imag],
                "steps": to_jsonable(self.transcript)}


def linearize(f: MatPoly, config: ToolConfig = DEFAULT) -> Linearization:
    """Iterate Higman steps to degree <= 1, then normalize the constant term to I.

    The constant term of the final pencil is diag(f(0), I, ..., I).  When it is
    hermitian positive definite we use the congruence F0^{-1/2}·F·F0^{-1/2},
    which keeps hermitian input hermitian; otherwise F0^{-1}·F.
    """
    if f.shape[0] != f.shape[1]:
        raise LinearizationError("linearize needs a square matrix polynomial")
    f0 = f.constant_term()
    det0 = np.linalg.det(f0)
    if abs(det0) <= config.tol_det:
        raise LinearizationError("no monic linearization; free locus passes through 0 "
                                 f"(|det f(0)| = {abs(det0):.3g})")
    g = f
    steps = []
    while g.degree() > 1:
        g, info = higman_step(g, config)
        steps.append(info)
    F0 = g.constant_term()
    Dg = F0.shape[0]
    coeffs = [g.coeff((j,)) for j in range(1, f.n + 1)]
    herm0 = np.allclose(F0, F0.conj().T, atol=config.tol_herm * max(1.0, np.linalg.norm(F0)))
    w = np.linalg.eigvalsh(0.5 * (F0 + F0.conj().T)) if herm0 else None
    if herm0 and w[0] > config.tol_pd:
        ev, V = np.linalg.eigh(0.5 * (F0 + F0.conj().T))
        T = (V / np.sqrt(ev)) @ V.conj().T
        A = [T @ C @ T for C in coeffs]
        mode = "congruence"
    else:
        F0i = np.linalg.inv(F0)
        A = [F0i @ C for C in coeffs]
        mode = "left_inverse"
    L = Pencil([np.eye(Dg)] + A)
    steps.append({"normalize": mode, "size": Dg})
    return Linearization(L, complex(1.0 / np.linalg.det(F0)), steps, Dg)


def det_identity_defect(lin: Linearization, f: MatPoly, X) -> float:
    """|det L(X) − c^k det f(X)| / (1 + |det f(X)|)."""
    from .freealg import _matrices

    k = _matrices(X).shape[1]
    dl = np.linalg.det(lin.L.evaluate(X))
    df = np.linalg.det(f.evaluate(X))
    return float(abs(dl - lin.det_factor ** k * df) / (1 + abs(df)))
