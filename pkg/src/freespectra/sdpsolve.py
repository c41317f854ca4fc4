"""Dense primal-dual interior-point solver for small semidefinite programs.

Problem form (after realification)::

    min   c·x + Σ_b <C_b, X_b>
    s.t.  F x + Σ_b A_b(X) = rhs,   X_b ⪰ 0,   x free

with dual ``max rhs·y  s.t.  Fᵀy = c,  C_b − A_b*(y) = Z_b ⪰ 0``.  Hermitian
blocks are mapped to real symmetric blocks of twice the size.  Iterations use
Nesterov-Todd scaling with a Mehrotra predictor-corrector.  When the main
solve does not converge, two auxiliary programs look for a Farkas ray
(infeasibility) or an improving direction (unboundedness); a status is never
guessed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .config import DEFAULT, ToolConfig

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
FAILURE = "numerical_failure"


class SolverError(RuntimeError):
    pass


@dataclass
class Constraint:
    """Σ_b <blocks[b], X_b> + Σ_j free[j]·x_j = rhs (coefficients hermitian)."""

    blocks: dict[int, np.ndarray]
    rhs: float
    free: dict[int, float] = field(default_factory=dict)


@dataclass
class ConicProgram:
    block_sizes: list[int]
    objective: list[np.ndarray | None] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    n_free: int = 0
    free_objective: np.ndarray | None = None
    sense: str = "min"
    complex_blocks: list[bool] | None = None

    def __post_init__(self):
        if self.sense not in ("min", "max", "feasibility"):
            raise ValueError(f"unknown sense {self.sense!r}")
        if not self.objective:
            self.objective = [None] * len(self.block_sizes)
        if self.free_objective is None:
            self.free_objective = np.zeros(self.n_free)
        self.free_objective = np.asarray(self.free_objective, dtype=float)

    def add(self, blocks: dict[int, np.ndarray], rhs: float, free: dict[int, float] | None = None) -> None:
        self.constraints.append(Constraint(dict(blocks), float(rhs), dict(free or {})))

    def add_free(self, count: int = 1, cost: float = 0.0) -> int:
        first = self.n_free
        self.n_free += count
        self.free_objective = np.concatenate([self.free_objective, np.full(count, float(cost))])
        return first

    def validate(self, config: ToolConfig = DEFAULT) -> None:
        if len(self.objective) != len(self.block_sizes):
            raise ValueError("one objective entry per block required")
        if sum(self.block_sizes) > config.max_block_dim:
            raise ValueError(f"total block dimension {sum(self.block_sizes)} exceeds cap {config.max_block_dim}")
        if len(self.constraints) > config.max_constraints:
            raise ValueError(f"{len(self.constraints)} constraints exceed cap {config.max_constraints}")
        for b, C in enumerate(self.objective):
            if C is not None:
                _check_herm(C, self.block_sizes[b], f"objective block {b}")
        for i, con in enumerate(self.constraints):
            for b, A in con.blocks.items():
                _check_herm(A, self.block_sizes[b], f"constraint {i} block {b}")
            for j in con.free:
                if not 0 <= j < self.n_free:
                    raise ValueError(f"constraint {i} names free variable {j} of {self.n_free}")


def _check_herm(A, k, what):
    A = np.asarray(A)
    if A.shape != (k, k):
        raise ValueError(f"{what}: shape {A.shape} != {(k, k)}")
    if np.linalg.norm(A - A.conj().T) > 1e-9 * max(1.0, np.linalg.norm(A)):
        raise ValueError(f"{what}: coefficient matrix is not hermitian")


@dataclass
class ConicSolution:
    status: str
    primal: list[np.ndarray] = field(default_factory=list)
    free: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dual: np.ndarray = field(default_factory=lambda: np.zeros(0))
    slack: list[np.ndarray] = field(default_factory=list)
    objective: float = float("nan")
    dual_objective: float = float("nan")
    gap: float = float("nan")
    residuals: dict = field(default_factory=dict)
    iterations: int = 0
    certificate: dict | None = None
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


# ---------------------------------------------------------------- realification

def realify_matrix(A: np.ndarray) -> np.ndarray:
    """[[Re, -Im], [Im, Re]]."""
    A = np.asarray(A, dtype=complex)
    return np.block([[A.real, -A.imag], [A.imag, A.real]])


def unrealify_matrix(R: np.ndarray) -> np.ndarray:
    """Project a real 2k×2k matrix back to k×k complex (averaging the copies)."""
    k = R.shape[0] // 2
    re = 0.5 * (R[:k, :k] + R[k:, k:])
    im = 0.5 * (R[k:, :k] - R[:k, k:])
    return re + 1j * im


def _is_complex_block(prog: ConicProgram, b: int) -> bool:
    if prog.complex_blocks is not None:
        return bool(prog.complex_blocks[b])
    mats = [prog.objective[b]] + [c.blocks.get(b) for c in prog.constraints]
    return any(M is not None and np.any(np.imag(M) != 0) for M in mats)


def realify(prog: ConicProgram) -> ConicProgram:
    """Equivalent program with real symmetric blocks.

    Complex blocks double in size and their coefficients become ½·[[Re,−Im],[Im,Re]],
    so <½R(A), R(X)> = <A, X>.  Real blocks pass through unchanged.
    """
    flags = [_is_complex_block(prog, b) for b in range(len(prog.block_sizes))]

    def conv(b, M):
        if M is None:
            return None
        return 0.5 * realify_matrix(M) if flags[b] else np.asarray(M, dtype=complex).real.copy()

    out = ConicProgram(
        block_sizes=[2 * k if f else k for k, f in zip(prog.block_sizes, flags)],
        objective=[conv(b, C) for b, C in enumerate(prog.objective)],
        constraints=[Constraint({b: conv(b, A) for b, A in c.blocks.items()}, c.rhs, dict(c.free))
                     for c in prog.constraints],
        n_free=prog.n_free,
        free_objective=prog.free_objective.copy(),
        sense=prog.sense,
        complex_blocks=[False] * len(flags),
    )
    out._complex_flags = flags  # type: ignore[attr-defined]
    return out


def unrealify_solution_block(R: np.ndarray, was_complex: bool, dual: bool = False) -> np.ndarray:
    if not was_complex:
        return R.astype(complex)
    # primal blocks carry the matrix itself; dual slacks carry ½R(Z)
    return unrealify_matrix(R) * (2.0 if dual else 1.0)


# ---------------------------------------------------------------- helpers for model builders

def complex_linear_constraints(linear_map, k: int, out_shape) -> list[tuple[np.ndarray, np.ndarray]]:
    """Hermitian coefficient pairs for every entry of a complex-linear map of a k×k matrix.

    Returns, for each output entry (row-major), the pair (G_re, G_im) with
    Re(map(P))_rs = <G_re, P> and Im(map(P))_rs = <G_im, P> for hermitian P,
    where <G, P> = tr(G P).
    """
    rows, cols = out_shape
    T = np.zeros((rows * cols, k, k), dtype=complex)  # T[e, b, a] = coefficient of P_ab in entry e
    for a in range(k):
        for b in range(k):
            E = np.zeros((k, k), dtype=complex)
            E[a, b] = 1.0
            T[:, b, a] = np.asarray(linear_map(E)).reshape(-1)
    out = []
    for G in T:
        Gh = G.conj().T
        out.append((0.5 * (G + Gh), (G - Gh) / 2j))
    return out


def herm_inner(A: np.ndarray, B: np.ndarray) -> float:
    return float(np.real(np.vdot(A, B)))


# ---------------------------------------------------------------- core real solver

@dataclass
class _Core:
    sizes: list[int]
    C: list[np.ndarray]
    A: list[np.ndarray]  # per block (m, k, k)
    F: np.ndarray  # (m, nf)
    c: np.ndarray
    b: np.ndarray

    @property
    def m(self):
        return len(self.b)

    def Aop(self, X):
        out = np.zeros(self.m)
        for Ab, Xb in zip(self.A, X):
            out += Ab.reshape(self.m, -1) @ Xb.reshape(-1)
        return out

    def Aadj(self, y):
        return [np.tensordot(y, Ab, axes=1) for Ab in self.A]

    def rowmat(self):
        parts = [self.F] + [Ab.reshape(self.m, -1) for Ab in self.A]
        return np.hstack(parts) if parts else np.zeros((self.m, 0))


def _to_core(rp: ConicProgram) -> _Core:
    m = len(rp.constraints)
    A = []
    for b, k in enumerate(rp.block_sizes):
        Ab = np.zeros((m, k, k))
        for i, con in enumerate(rp.constraints):
            if b in con.blocks:
                M = np.real(con.blocks[b])
                Ab[i] = 0.5 * (M + M.T)
        A.append(Ab)
    F = np.zeros((m, rp.n_free))
    for i, con in enumerate(rp.constraints):
        for j, v in con.free.items():
            F[i, j] += v
    sign = -1.0 if rp.sense == "max" else 1.0
    C = []
    for b, k in enumerate(rp.block_sizes):
        M = rp.objective[b]
        M = np.zeros((k, k)) if M is None or rp.sense == "feasibility" else sign * np.real(M)
        C.append(0.5 * (M + M.T))
    c = np.zeros(rp.n_free) if rp.sense == "feasibility" else sign * rp.free_objective
    return _Core(list(rp.block_sizes), C, A, F, np.asarray(c, dtype=float),
                 np.array([con.rhs for con in rp.constraints], dtype=float))


@dataclass
class _Presolved:
    core: _Core
    keep: np.ndarray
    scale: np.ndarray
    m_orig: int


def _presolve(core: _Core, tol: float = 1e-11):
    """Normalize rows and drop linearly dependent ones.

    Returns (presolved, certificate) where certificate is a Farkas vector when
    a dependent row has an inconsistent right-hand side.
    """
    R = core.rowmat()
    norms = np.linalg.norm(R, axis=1)
    m = core.m
    nz = norms > tol * max(1.0, norms.max(initial=0.0))
    for i in np.flatnonzero(~nz):
        if abs(core.b[i]) > 1e-9:
            y = np.zeros(m)
            y[i] = np.sign(core.b[i]) / abs(core.b[i])
            return None, y
    idx = np.flatnonzero(nz)
    Rn = R[idx] / norms[idx, None]
    bn = core.b[idx] / norms[idx]
    if len(idx):
        _, Rq, piv = sla.qr(Rn.T, mode="economic", pivoting=True)
        diag = np.abs(np.diag(Rq))
        rank = int(np.sum(diag > 1e-10 * max(diag[0], 1e-300))) if len(diag) else 0
    else:
        piv, rank = np.zeros(0, dtype=int), 0
    kept = np.sort(piv[:rank])
    dropped = np.setdiff1d(np.arange(len(idx)), kept)
    if len(dropped):
        coef, *_ = np.linalg.lstsq(Rn[kept].T, Rn[dropped].T, rcond=None)
        mismatch = bn[dropped] - coef.T @ bn[kept]
        bad = np.argmax(np.abs(mismatch))
        if abs(mismatch[bad]) > 1e-8 * (1 + np.abs(bn).max()):
            yn = np.zeros(len(idx))
            yn[dropped[bad]] = 1.0
            yn[kept] = -coef[:, bad]
            yn /= mismatch[bad]
            y = np.zeros(m)
            y[idx] = yn / norms[idx]
            return None, y
    keep = idx[kept]
    sc = norms[keep]
    red = _Core(core.sizes, core.C, [Ab[keep] / sc[:, None, None] for Ab in core.A],
                core.F[keep] / sc[:, None], core.c, core.b[keep] / sc)
    return _Presolved(red, keep, sc, m), None


def _sym(M):
    return 0.5 * (M + M.T)


def _max_step(L, dX):
    """Largest α with X + α dX ⪰ 0 given chol(X) = L L^T."""
    if dX.shape[0] == 0:
        return np.inf
    Li = sla.solve_triangular(L, np.eye(L.shape[0]), lower=True)
    lam = np.linalg.eigvalsh(_sym(Li @ dX @ Li.T))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _ipm(core: _Core, config: ToolConfig, max_iter: int | None = None) -> dict:
    m, nf = core.m, core.F.shape[1]
    sizes = core.sizes
    N = max(sum(sizes), 1)
    max_iter = max_iter or config.max_iter
    normb = 1 + np.linalg.norm(core.b)
    normC = 1 + np.sqrt(sum(np.linalg.norm(C) ** 2 for C in core.C)) + np.linalg.norm(core.c)
    X, Z = [], []
    for b, k in enumerate(sizes):
        Ab = core.A[b]
        an = np.linalg.norm(Ab.reshape(m, -1), axis=1) if m else np.zeros(0)
        xi = max(10.0, np.sqrt(k), k * np.max((1 + np.abs(core.b)) / (1 + an), initial=0.0))
        eta = max(10.0, np.sqrt(k), np.max(an, initial=0.0), np.linalg.norm(core.C[b]))
        X.append(xi * np.eye(k))
        Z.append(eta * np.eye(k))
    x = np.zeros(nf)
    y = np.zeros(m)
    info = dict(status="max_iter", iters=0)
    best = None
    for it in range(max_iter):
        rp = core.b - core.F @ x - core.Aop(X)
        ATy = core.Aadj(y)
        Rd = [core.C[b] - Z[b] - ATy[b] for b in range(len(sizes))]
        rf = core.c - core.F.T @ y
        pobj = core.c @ x + sum(np.sum(Cb * Xb) for Cb, Xb in zip(core.C, X))
        dobj = core.b @ y
        mu = sum(np.sum(Xb * Zb) for Xb, Zb in zip(X, Z)) / N
        pres = np.linalg.norm(rp) / normb
        dres = (np.sqrt(sum(np.linalg.norm(R) ** 2 for R in Rd)) + np.linalg.norm(rf)) / normC
        gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        info.update(X=X, Z=Z, x=x, y=y, pobj=pobj, dobj=dobj, pres=pres, dres=dres, gap=gap, iters=it)
        score = max(pres / config.tol_feas, dres / config.tol_feas, gap / config.tol_gap)
        if best is None or score < best[0]:
            best = (score, dict(info))
        if pres <= config.tol_feas and dres <= config.tol_feas and gap <= config.tol_gap:
            info["status"] = "converged"
            return info
        big = max([np.abs(Xb).max(initial=0) for Xb in X] + [np.abs(Zb).max(initial=0) for Zb in Z]
                  + [np.abs(y).max(initial=0), np.abs(x).max(initial=0)])
        if big > 1e13:
            info["status"] = "diverged"
            break
        try:
            Ls, Gs, Ws, Ds = [], [], [], []
            for Xb, Zb in zip(X, Z):
                L = np.linalg.cholesky(Xb)
                Rz = np.linalg.cholesky(Zb)
                U, s, Vt = np.linalg.svd(Rz.T @ L)
                G = L @ Vt.T / np.sqrt(s)
                Ls.append(L)
                Gs.append(G)
                Ws.append(G @ G.T)
                Ds.append(s)
        except np.linalg.LinAlgError:
            info["status"] = "cholesky"
            break
        M = np.zeros((m, m))
        for Ab, W in zip(core.A, Ws):
            if m:
                WAW = W @ Ab @ W
                M += Ab.reshape(m, -1) @ WAW.reshape(m, -1).T
        M = _sym(M)
        try:
            cf = sla.cho_factor(M + 1e-14 * np.trace(M) / max(m, 1) * np.eye(m)) if m else None

            def msolve(rhs):
                return sla.cho_solve(cf, rhs) if m else np.zeros_like(rhs)
        except np.linalg.LinAlgError:
            Mp = np.linalg.pinv(M)

            def msolve(rhs):
                return Mp @ rhs

        if nf:
            MiF = msolve(core.F)
            S = _sym(core.F.T @ MiF)
            Sp = np.linalg.pinv(S, rcond=1e-13)

        def direction(Rc):
            h = rp - core.Aop(Rc) + core.Aop([W @ R @ W for W, R in zip(Ws, Rd)])
            if nf:
                dx = Sp @ (core.F.T @ msolve(h) - rf)
                dy = msolve(h - core.F @ dx)
            else:
                dx = np.zeros(0)
                dy = msolve(h)
            ATdy = core.Aadj(dy)
            dZ = [_sym(Rd[b] - ATdy[b]) for b in range(len(sizes))]
            dX = [_sym(Rc[b] - Ws[b] @ dZ[b] @ Ws[b]) for b in range(len(sizes))]
            return dx, dy, dX, dZ

        def steps(dX, dZ):
            ap = min([_max_step(L, d) for L, d in zip(Ls, dX)] + [np.inf])
            Lz = [np.linalg.cholesky(Zb) for Zb in Z]
            ad = min([_max_step(L, d) for L, d in zip(Lz, dZ)] + [np.inf])
            return ap, ad

        # predictor
        Rc = [-Xb for Xb in X]
        dx, dy, dX, dZ = direction(Rc)
        ap, ad = steps(dX, dZ)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = sum(np.sum((Xb + ap * a) * (Zb + ad * z)) for Xb, Zb, a, z in zip(X, Z, dX, dZ)) / N
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        # corrector
        Rc = []
        for b in range(len(sizes)):
            G, d = Gs[b], Ds[b]
            Gi = np.linalg.inv(G)
            dXt = Gi @ dX[b] @ Gi.T
            dZt = G.T @ dZ[b] @ G
            R = sigma * mu * np.eye(len(d)) - np.diag(d ** 2) - _sym(dXt @ dZt)
            T = 2 * R / (d[:, None] + d[None, :])
            Rc.append(_sym(G @ T @ G.T))
        dx, dy, dX, dZ = direction(Rc)
        ap, ad = steps(dX, dZ)
        ap, ad = min(1.0, 0.98 * ap), min(1.0, 0.98 * ad)
        if max(ap, ad) < 1e-12:
            info["status"] = "stalled"
            break
        X = [Xb + ap * d for Xb, d in zip(X, dX)]
        x = x + ap * dx
        y = y + ad * dy
        Z = [Zb + ad * d for Zb, d in zip(Z, dZ)]
    else:
        info["iters"] = max_iter
    # fall back to the best iterate if it is within a loose tolerance
    if best is not None and best[0] <= 1e3:
        out = dict(best[1])
        out["status"] = "converged_loose"
        return out
    return info


# ---------------------------------------------------------------- infeasibility / unboundedness

def _farkas_primal(core: _Core, config: ToolConfig):
    """min s s.t. sI − A*(y) ⪰ 0, s ≥ −1, Fᵀy = 0, b·y = 1.  Returns y or None."""
    m, nf = core.m, core.F.shape[1]
    if m == 0 or np.linalg.norm(core.b) == 0:
        return None
    sizes = list(core.sizes) + [1]
    A = [np.concatenate([Ab, -np.eye(k)[None]], axis=0) for Ab, k in zip(core.A, core.sizes)]
    last = np.zeros((m + 1, 1, 1))
    last[m, 0, 0] = -1.0
    A.append(last)
    C = [np.zeros((k, k)) for k in core.sizes] + [np.ones((1, 1))]
    F = np.hstack([np.vstack([core.F, np.zeros((1, nf))]), np.concatenate([core.b, [0.0]])[:, None]])
    c = np.concatenate([np.zeros(nf), [1.0]])
    bb = np.zeros(m + 1)
    bb[m] = -1.0
    aux = _Core(sizes, C, A, F, c, bb)
    res = _ipm(aux, config.replace(tol_feas=1e-10, tol_gap=1e-10))
    if not res["status"].startswith("converged"):
        return None
    yy = res["y"]
    y, s = yy[:m], yy[m]
    lam = max(np.linalg.eigvalsh(Ay)[-1] for Ay in core.Aadj(y) if Ay.size) if any(k for k in core.sizes) else 0.0
    bty = core.b @ y
    if bty > 0 and lam <= 1e-8 * max(1.0, np.linalg.norm(y)) and np.linalg.norm(core.F.T @ y) <= 1e-8 * max(1, np.linalg.norm(y)):
        return y / bty
    return None


def _farkas_dual(core: _Core, config: ToolConfig):
    """min <C,X> + c·x s.t. A(X) + F x = 0, tr X ≤ 1, X ⪰ 0.  Returns (X, x) with value < 0 or None."""
    m, nf = core.m, core.F.shape[1]
    if nf:
        yls, *_ = np.linalg.lstsq(core.F.T, core.c, rcond=None)
        r = core.c - core.F.T @ yls
        if np.linalg.norm(r) > 1e-9 * (1 + np.linalg.norm(core.c)):
            return [np.zeros((k, k)) for k in core.sizes], -r / (r @ r)
    sizes = list(core.sizes) + [1]
    A = [np.concatenate([Ab, np.eye(k)[None]], axis=0) for Ab, k in zip(core.A, core.sizes)]
    last = np.zeros((m + 1, 1, 1))
    last[m, 0, 0] = 1.0
    A.append(last)
    C = list(core.C) + [np.zeros((1, 1))]
    F = np.vstack([core.F, np.zeros((1, nf))])
    bb = np.zeros(m + 1)
    bb[m] = 1.0
    aux = _Core(sizes, C, A, F, core.c, bb)
    res = _ipm(aux, config.replace(tol_feas=1e-10, tol_gap=1e-10))
    if not res["status"].startswith("converged"):
        return None
    X, x = res["X"][:-1], res["x"]
    val = core.c @ x + sum(np.sum(Cb * Xb) for Cb, Xb in zip(core.C, X))
    if val < -1e-7:
        return [Xb / -val for Xb in X], x / -val
    return None


# ---------------------------------------------------------------- public entry points

def solve(prog: ConicProgram, config: ToolConfig = DEFAULT) -> ConicSolution:
    """Solve ``prog``; statuses optimal | infeasible | unbounded | numerical_failure."""
    prog.validate(config)
    rp = realify(prog)
    flags = rp._complex_flags  # type: ignore[attr-defined]
    core = _to_core(rp)
    sign = -1.0 if prog.sense == "max" else 1.0
    m = core.m
    pre, ray = _presolve(core)
    if pre is None:
        return ConicSolution(INFEASIBLE, dual=ray, certificate={"kind": "farkas", "y": ray},
                             message="inconsistent equality constraints")
    red = pre.core
    res = _ipm(red, config)
    status_core = res["status"]
    if status_core.startswith("converged"):
        y = np.zeros(m)
        y[pre.keep] = res["y"] / pre.scale
        prim = [unrealify_solution_block(Xb, f) for Xb, f in zip(res["X"], flags)]
        slk = [unrealify_solution_block(Zb, f, dual=True) for Zb, f in zip(res["Z"], flags)]
        pobj, dobj = sign * res["pobj"], sign * res["dobj"]
        return ConicSolution(
            OPTIMAL, primal=prim, free=res["x"], dual=sign * y, slack=slk,
            objective=pobj, dual_objective=dobj, gap=abs(res["pobj"] - res["dobj"]),
            residuals={"primal": res["pres"], "dual": res["dres"], "rel_gap": res["gap"]},
            iterations=res["iters"], message=status_core)
    yr = _farkas_primal(red, config)
    if yr is not None:
        y = np.zeros(m)
        y[pre.keep] = yr / pre.scale
        y /= core.b @ y
        return ConicSolution(INFEASIBLE, dual=y, certificate={"kind": "farkas", "y": y},
                             iterations=res["iters"], message=f"main solve {status_core}; Farkas ray found")
    dr = _farkas_dual(red, config)
    if dr is not None:
        Xr, xr = dr
        prim = [unrealify_solution_block(Xb, f) for Xb, f in zip(Xr, flags)]
        return ConicSolution(UNBOUNDED, primal=prim, free=xr,
                             certificate={"kind": "improving_ray", "X": prim, "x": xr},
                             iterations=res["iters"], message=f"main solve {status_core}; improving ray found")
    return ConicSolution(FAILURE, iterations=res["iters"],
                         residuals={"primal": res.get("pres"), "dual": res.get("dres"), "rel_gap": res.get("gap")},
                         message=f"main solve {status_core}; no certificate of infeasibility or unboundedness")


def constraint_operator_adjoint(prog: ConicProgram, y: Sequence[float]) -> list[np.ndarray]:
    """Σ_i y_i A_i per block (complex hermitian, original data)."""
    out = [np.zeros((k, k), dtype=complex) for k in prog.block_sizes]
    for yi, con in zip(y, prog.constraints):
        for b, A in con.blocks.items():
            out[b] += yi * np.asarray(A, dtype=complex)
    return out


def verify_infeasibility(prog: ConicProgram, y, tol: float = 1e-7) -> tuple[bool, dict]:
    """Check a Farkas ray from the raw program data: Σ y_i A_i ⪯ tol·I, Σ y_i F_i = 0, b·y > 0.

    ``y`` is normalized so that b·y = 1 before the tolerance comparison.
    """
    y = np.asarray(y, dtype=float)
    b = np.array([c.rhs for c in prog.constraints])
    bty = float(b @ y)
    if not bty > 0:
        return False, {"b_dot_y": bty}
    y = y / bty
    lam = max((float(np.linalg.eigvalsh(0.5 * (M + M.conj().T))[-1])
               for M in constraint_operator_adjoint(prog, y) if M.size), default=0.0)
    Fy = np.zeros(prog.n_free)
    for yi, con in zip(y, prog.constraints):
        for j, v in con.free.items():
            Fy[j] += yi * v
    ok = lam <= tol and np.linalg.norm(Fy) <= tol
    return ok, {"b_dot_y": 1.0, "lambda_max": lam, "free_residual": float(np.linalg.norm(Fy))}


def verify_improving_ray(prog: ConicProgram, X, x, tol: float = 1e-7) -> tuple[bool, dict]:
    """Check X ⪰ 0, A(X) + F x = 0 and an objective decrease (increase for max)."""
    lam = min((float(np.linalg.eigvalsh(0.5 * (Xb + Xb.conj().T))[0]) for Xb in X if Xb.size), default=0.0)
    res = []
    for con in prog.constraints:
        v = sum(herm_inner(A, X[b]) for b, A in con.blocks.items())
        v += sum(val * x[j] for j, val in con.free.items())
        res.append(v)
    obj = sum(herm_inner(C, X[b]) for b, C in enumerate(prog.objective) if C is not None)
    obj += float(prog.free_objective @ np.asarray(x)) if prog.n_free else 0.0
    if prog.sense == "max":
        obj = -obj
    ok = lam >= -tol and (np.max(np.abs(res), initial=0.0) <= tol) and obj < -tol
    return ok, {"lambda_min": lam, "equality_residual": float(np.max(np.abs(res), initial=0.0)), "objective": obj}


def check_kkt(prog: ConicProgram, sol: ConicSolution) -> dict:
    """Primal/dual residuals and PSD defects computed from the raw data."""
    pr = []
    for con in prog.constraints:
        v = sum(herm_inner(A, sol.primal[b]) for b, A in con.blocks.items())
        v += sum(val * sol.free[j] for j, val in con.free.items())
        pr.append(v - con.rhs)
    sign = -1.0 if prog.sense == "max" else 1.0
    ATy = constraint_operator_adjoint(prog, sol.dual)
    dr = 0.0
    for b, k in enumerate(prog.block_sizes):
        C = prog.objective[b] if prog.objective[b] is not None and prog.sense != "feasibility" else np.zeros((k, k))
        dr = max(dr, float(np.linalg.norm(sign * (np.asarray(C) - ATy[b]) - sol.slack[b])))
    Fy = np.zeros(prog.n_free)
    for yi, con in zip(sol.dual, prog.constraints):
        for j, v in con.free.items():
            Fy[j] += yi * v
    c = prog.free_objective if prog.sense != "feasibility" else np.zeros(prog.n_free)
    fr = float(np.linalg.norm(Fy - c)) if prog.n_free else 0.0
    psd = min([float(np.linalg.eigvalsh(B)[0]) for B in sol.primal + list(sol.slack) if B.size]
              + [0.0])
    return {"primal": float(np.max(np.abs(pr), initial=0.0)), "dual": max(dr, fr), "psd_defect": psd}


def dump(prog: ConicProgram, path) -> None:
    """Write the sparse text interchange format (see README)."""
    lines = ["# freespectra conic program", f"sense {prog.sense}",
             "blocks " + " ".join(str(k) for k in prog.block_sizes),
             f"free {prog.n_free}", f"constraints {len(prog.constraints)}"]
    for j, v in enumerate(prog.free_objective):
        if v:
            lines.append(f"objfree {j} {float(v)!r}")
    for b, C in enumerate(prog.objective):
        if C is None:
            continue
        for i, j in zip(*np.nonzero(np.triu(C))):
            lines.append(f"obj {b} {i} {j} {float(C[i, j].real)!r} {float(np.imag(C[i, j]))!r}")
    for ci, con in enumerate(prog.constraints):
        lines.append(f"rhs {ci} {float(con.rhs)!r}")
        for j, v in con.free.items():
            lines.append(f"free {ci} {j} {float(v)!r}")
        for b, A in con.blocks.items():
            A = np.asarray(A, dtype=complex)
            for i, j in zip(*np.nonzero(np.triu(A))):
                lines.append(f"con {ci} {b} {i} {j} {float(A[i, j].real)!r} {float(A[i, j].imag)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_dump(path) -> ConicProgram:
    sense, sizes, nfree, ncons = "min", [], 0, 0
    obj: dict = {}
    cons: list[Constraint] = []
    objfree: dict = {}
    for raw in open(path):
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        tag = parts[0]
        if tag == "sense":
            sense = parts[1]
        elif tag == "blocks":
            sizes = [int(t) for t in parts[1:]]
        elif tag == "free" and len(parts) == 2:
            nfree = int(parts[1])
        elif tag == "constraints":
            ncons = int(parts[1])
            cons = [Constraint({}, 0.0) for _ in range(ncons)]
        elif tag == "objfree":
            objfree[int(parts[1])] = float(parts[2])
        elif tag == "obj":
            b, i, j = map(int, parts[1:4])
            M = obj.setdefault(b, np.zeros((sizes[b], sizes[b]), dtype=complex))
            M[i, j] = complex(float(parts[4]), float(parts[5]))
            M[j, i] = np.conj(M[i, j])
        elif tag == "rhs":
            cons[int(parts[1])].rhs = float(parts[2])
        elif tag == "free":
            cons[int(parts[1])].free[int(parts[2])] = float(parts[3])
        elif tag == "con":
            ci, b, i, j = map(int, parts[1:5])
            M = cons[ci].blocks.setdefault(b, np.zeros((sizes[b], sizes[b]), dtype=complex))
            M[i, j] = complex(float(parts[5]), float(parts[6]))
            M[j, i] = np.conj(M[i, j])
    fo = np.zeros(nfree)
    for j, v in objfree.items():
        fo[j] = v
    return ConicProgram(sizes, [obj.get(b) for b in range(len(sizes))], cons, nfree, fo, sense)
