"""Decide whether the positivity domain of a hermitian polynomial is a free spectrahedron.

Pipeline: a randomized matrix-convexity refuter, then linearize, split the
linearization into hermitian(izable) and remaining blocks, drop redundant
hermitian blocks and search for points that break the boundary condition
relating the two parts.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .algstruct import HermitizationWitness, block_triangularize, remove_redundant_blocks
from .config import DEFAULT, ToolConfig
from .freealg import HermTuple, MatPoly, _matrices
from .linearize import linearize
from .pencil import Pencil, direct_sum_all, min_eig

SPECTRAHEDRON = "spectrahedron"
NOT_SPECTRAHEDRON = "not_spectrahedron"
INCONCLUSIVE = "inconclusive"
BOX = 1e2  # boundary witnesses are searched in ‖X_j‖ <= BOX


class DetectError(ValueError):
    pass


# ---------------------------------------------------------------- matrix convex combinations

def matrix_convex_combine(points: Sequence[HermTuple], V: Sequence[np.ndarray], tol: float = 1e-8) -> HermTuple:
    """Σ_j V_j* X^{(j)} V_j componentwise; requires Σ_j V_j* V_j = I."""
    if len(points) != len(V) or not points:
        raise ValueError("need one isometry block per point")
    V = [np.atleast_2d(np.asarray(v, dtype=complex)) for v in V]
    k = V[0].shape[1]
    S = np.zeros((k, k), dtype=complex)
    for X, v in zip(points, V):
        if v.shape != (X.k, k):
            raise ValueError(f"block of shape {v.shape} does not map level {k} into level {X.k}")
        S += v.conj().T @ v
    err = float(np.linalg.norm(S - np.eye(k)))
    if err > tol:
        raise ValueError(f"isometry condition violated: ‖Σ V*V − I‖ = {err:.3g}")
    n = points[0].n
    out = np.zeros((n, k, k), dtype=complex)
    for X, v in zip(points, V):
        out += v.conj().T @ X.mats @ v
    return HermTuple(out)


def random_isometry_blocks(levels: Sequence[int], k: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Blocks V_j (levels[j]×k) of a random isometry, Σ V_j* V_j = I."""
    m = sum(levels)
    if m < k:
        raise ValueError("stacked size must be at least the target level")
    G = rng.standard_normal((m, k)) + 1j * rng.standard_normal((m, k))
    Q, _ = np.linalg.qr(G)
    out, off = [], 0
    for kj in levels:
        out.append(Q[off:off + kj])
        off += kj
    return out


# ---------------------------------------------------------------- domain helpers

def poly_min_eig(f: MatPoly, X) -> float:
    M = f.evaluate(X)
    return min_eig(0.5 * (M + M.conj().T))


def _graded_parts(f: MatPoly, X) -> list[np.ndarray]:
    """F_m with f(tX) = Σ_m t^m F_m."""
    mats = _matrices(X)
    k = mats.shape[1]
    cache = {(): np.eye(k, dtype=complex)}

    def wv(w):
        if w not in cache:
            cache[w] = wv(w[:-1]) @ mats[w[-1] - 1]
        return cache[w]

    parts = [np.zeros((f.shape[0] * k,) * 2, dtype=complex) for _ in range(max(f.degree(), 0) + 1)]
    for w, c in f.terms.items():
        parts[len(w)] += np.kron(c, wv(w))
    return [0.5 * (P + P.conj().T) for P in parts]


def ray_boundary(f: MatPoly, X, t_max: float = 1e3, iters: int = 50) -> float | None:
    """Largest t with f(sX) ⪰ 0 for all s in [0, t]; None if no exit before t_max."""
    parts = _graded_parts(f, X)

    def lam(t):
        return min_eig(sum(t ** m * P for m, P in enumerate(parts)))

    if lam(0.0) < 0:
        return 0.0
    lo, t = 0.0, 0.05
    while t <= t_max:
        if lam(t) < 0:
            break
        lo, t = t, t * 1.3
    else:
        return None
    hi = t
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if lam(mid) >= 0:
            lo = mid
        else:
            hi = mid
    return lo


def _boundary_member(f: MatPoly, n: int, k: int, rng: np.random.Generator) -> HermTuple | None:
    D = HermTuple.random(n, k, rng, real=(k == 1))
    t = ray_boundary(f, D)
    if t is None:
        return None
    # mix boundary and interior points
    s = t if rng.random() < 0.7 else t * rng.random()
    return D.scaled(s)


# ---------------------------------------------------------------- convexity refutation

@dataclass
class ConvexityWitness:
    points: list
    V: list
    combined: HermTuple
    lambda_min: float

    def to_json(self) -> dict:
        from .serialize import herm_tuple_to_json
        return {"kind": "convexity", "points": [herm_tuple_to_json(p) for p in self.points],
                "V": [np.asarray(v) for v in self.V], "combined": herm_tuple_to_json(self.combined),
                "lambda_min": self.lambda_min}


def verify_convexity_witness(f: MatPoly, w: ConvexityWitness, tol: float = 1e-8) -> tuple[bool, dict]:
    """Re-check from scratch: members in, isometry identity, non-member out."""
    lam_in = [poly_min_eig(f, p) for p in w.points]
    try:
        Z = matrix_convex_combine(w.points, w.V, tol)
    except ValueError as exc:
        return False, {"error": str(exc)}
    lam_out = poly_min_eig(f, Z)
    ok = min(lam_in) >= -tol and lam_out < -tol and np.allclose(Z.mats, w.combined.mats, atol=tol)
    return bool(ok), {"lambda_min_inputs": lam_in, "lambda_min_combined": lam_out}


def convexity_violation_search(f: MatPoly, max_level: int | None = None, trials: int | None = None,
                               seed: int | None = None, config: ToolConfig = DEFAULT) -> ConvexityWitness | None:
    """Random isometric combinations of members of 𝒟_f that leave 𝒟_f.

    Each trial draws its own generator from (seed, trial), so results do not
    depend on evaluation order.
    """
    max_level = config.max_level if max_level is None else max_level
    trials = config.trials if trials is None else trials
    seed = config.seed if seed is None else seed
    if not f.is_hermitian(config.tol_herm):
        raise DetectError("convexity search needs a hermitian polynomial")
    n = f.n
    thresh = 1e-6 * max(1.0, f.max_coeff_norm())
    best, stop = None, trials
    for trial in range(trials):
        if trial >= stop:
            break
        rng = np.random.default_rng([seed, trial])
        k = 1 + trial % max_level
        levels = [k, k] if rng.random() < 0.6 else [int(rng.integers(1, max_level + 1)) for _ in range(2)]
        if sum(levels) < k:
            levels = [k, k]
        pts = []
        for kj in levels:
            p = _boundary_member(f, n, kj, rng)
            if p is None:
                break
            pts.append(p)
        if len(pts) < 2:
            continue
        if k == 1 and levels == [1, 1]:
            lam = rng.random()
            V = [np.array([[np.sqrt(lam)]]), np.array([[np.sqrt(1 - lam)]])]
        else:
            V = random_isometry_blocks(levels, k, rng)
        Z = matrix_convex_combine(pts, V)
        lam_out = poly_min_eig(f, Z)
        if lam_out < -thresh:
            w = ConvexityWitness(pts, V, Z, lam_out)
            if verify_convexity_witness(f, w)[0] and (best is None or lam_out < best.lambda_min):
                if best is None:
                    stop = min(trials, trial + 200)  # a short extra run for a clearer witness
                best = w
    return best


# ---------------------------------------------------------------- block split

@dataclass
class BlockSplit:
    Lhat_blocks: list
    Lcheck_blocks: list
    decomposition: object

    @property
    def Lhat(self) -> Pencil | None:
        return direct_sum_all(self.Lhat_blocks)

    @property
    def Lcheck(self) -> Pencil | None:
        return direct_sum_all(self.Lcheck_blocks)


def split_blocks(L: Pencil, config: ToolConfig = DEFAULT) -> BlockSplit:
    """Hermitian(izable) irreducible blocks versus the rest.

    Hermitizable blocks enter the first part through their hermitian
    conjugates.
    """
    dec = block_triangularize(L, config, classify=True)
    hat, check = [], []
    for P, cls, h in zip(dec.diagonal_blocks, dec.block_class, dec.hermitization):
        if cls == "non-hermitizable":
            check.append(P)
        else:
            H = h.conjugated if isinstance(h, HermitizationWitness) else P
            C = H.coeffs.copy()
            C[0] = np.eye(H.d)
            hat.append(Pencil(0.5 * (C + C.conj().transpose(0, 2, 1))))
    return BlockSplit(hat, check, dec)


# ---------------------------------------------------------------- boundary condition

@dataclass
class BoundaryResult:
    status: str  # holds | fails | inconclusive
    witness: HermTuple | None = None
    probabilistic: bool = False
    info: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        from .serialize import herm_tuple_to_json
        return {"status": self.status, "probabilistic": self.probabilistic,
                "witness": None if self.witness is None else herm_tuple_to_json(self.witness),
                "info": self.info}


def _herm_from_vec(v: np.ndarray, n: int, k: int) -> np.ndarray:
    mats = np.zeros((n, k, k), dtype=complex)
    iu = np.triu_indices(k, 1)
    per = k * k
    for j in range(n):
        seg = v[j * per:(j + 1) * per]
        M = np.diag(seg[:k]).astype(complex)
        off = seg[k:k + len(iu[0])] + 1j * seg[k + len(iu[0]):]
        M[iu] = off
        M = M + np.triu(M, 1).conj().T
        mats[j] = M
    return mats


def _sigma_scale(L: Pencil, mats: np.ndarray) -> float:
    """1 + Σ ‖A_j‖·‖X_j‖, the size of L(X) a perturbation would be measured against."""
    return 1.0 + sum(np.linalg.norm(A, 2) * np.linalg.norm(M, 2) for A, M in zip(L.coeffs[1:], mats))


def boundary_witness_check(Lhat: Pencil | None, Lcheck: Pencil, X, tol_sing: float = 1e-6,
                           margin: float = 1e-4, box: float = BOX) -> tuple[bool, dict]:
    """X lies on the free locus of Lcheck and strictly inside 𝒟_Lhat.

    Singularity is measured against the scale of Lcheck(X) and X must stay in
    the box ‖X_j‖ <= box; otherwise a pencil like [[1, x], [0, 1]] would look
    singular far out even though its determinant is constant.
    """
    from .freealg import _matrices

    mats = _matrices(X)
    C = Lcheck.evaluate(X)
    s = np.linalg.svd(C, compute_uv=False)
    rel = float(s[-1] / _sigma_scale(Lcheck, mats))
    size = float(max(np.linalg.norm(M, 2) for M in mats))
    lam = min_eig(Lhat.evaluate(X)) if Lhat is not None else float("inf")
    ok = rel <= tol_sing and lam >= margin and size <= box
    return ok, {"sigma_min_rel": rel, "lambda_min_hat": lam, "norm": size}


def boundary_condition_check(Lhat: Pencil | None, Lcheck: Pencil | None,
                             config: ToolConfig = DEFAULT) -> BoundaryResult:
    """Search for X with det Lcheck(X) = 0 and Lhat(X) ≻ 0, levels 1..max_level.

    Local minimization of σ_min(Lcheck(X)) with a barrier keeping X inside
    𝒟_Lhat, from seeded random starts.  "holds" means no such X was found.
    """
    if Lcheck is None:
        return BoundaryResult("holds", info={"reason": "no remaining blocks"})
    n = Lcheck.n
    margin = 1e-3
    best = None
    tried = 0
    for k in range(1, config.max_level + 1):
        nv = n * k * k
        for trial in range(config.boundary_trials):
            rng = np.random.default_rng([config.seed, 7919, k, trial])
            x0 = rng.standard_normal(nv) * (0.5 + 2 * rng.random())

            def obj(v):
                mats = _herm_from_vec(v, n, k)
                s = np.linalg.svd(Lcheck.evaluate(mats), compute_uv=False)
                val = s[-1] / _sigma_scale(Lcheck, mats)
                out = max(np.linalg.norm(M, 2) for M in mats) - 0.9 * BOX
                if out > 0:
                    val += out * out
                if Lhat is not None:
                    lam = min_eig(Lhat.evaluate(mats))
                    if lam < 2 * margin:
                        val += 10.0 * (2 * margin - lam) ** 2 + (2 * margin - lam)
                return val

            res = minimize(obj, x0, method="Nelder-Mead" if nv <= 2 else "BFGS",
                           options={"maxiter": 400 * nv, "xatol": 1e-12, "fatol": 1e-14}
                           if nv <= 2 else {"maxiter": 200})
            tried += 1
            X = HermTuple(_herm_from_vec(res.x, n, k))
            ok, info = boundary_witness_check(Lhat, Lcheck, X, margin=margin)
            if best is None or info["sigma_min_rel"] < best[1]["sigma_min_rel"]:
                best = (X, info)
            if ok:
                return BoundaryResult("fails", X, info={"level": k, **info})
    return BoundaryResult("holds", probabilistic=True,
                          info={"starts": tried, "max_level": config.max_level,
                                "best_sigma_min_rel": None if best is None else best[1]["sigma_min_rel"]})


# ---------------------------------------------------------------- pipeline

@dataclass
class DetectionReport:
    verdict: str
    Lhat: Pencil | None = None
    Lcheck: Pencil | None = None
    witness: object = None
    transcript: list = field(default_factory=list)

    def to_json(self) -> dict:
        wit = self.witness
        if isinstance(wit, BoundaryResult):
            wit = {"kind": "boundary", **wit.to_json()}
        return {"verdict": self.verdict,
                "Lhat": None if self.Lhat is None else self.Lhat.coeffs,
                "Lcheck": None if self.Lcheck is None else self.Lcheck.coeffs,
                "witness": wit, "transcript": self.transcript}


def domain_consistency(f: MatPoly, Lhat: Pencil | None, config: ToolConfig = DEFAULT,
                       samples: int | None = None, tol: float = 1e-7) -> list:
    """Random tuples where membership in 𝒟_f and 𝒟_Lhat disagree by more than tol."""
    samples = config.consistency_samples if samples is None else samples
    bad = []
    for i in range(samples):
        rng = np.random.default_rng([config.seed, 104729, i])
        k = 1 + i % 3
        D = HermTuple.random(f.n, k, rng, real=(k == 1))
        t = ray_boundary(f, D) if Lhat is None else ray_boundary(Lhat.to_poly(), D)
        s = (t if t is not None else 1.0) * 2 * rng.random()
        X = D.scaled(s)
        lf = poly_min_eig(f, X)
        lh = min_eig(Lhat.evaluate(X)) if Lhat is not None else 1.0
        if (lf > tol and lh < -tol) or (lf < -tol and lh > tol):
            bad.append({"X": X, "lambda_f": lf, "lambda_hat": lh})
    return bad


def detect_spectrahedron(f: MatPoly, config: ToolConfig = DEFAULT) -> DetectionReport:
    if f.shape[0] != f.shape[1] or not f.is_hermitian(config.tol_herm):
        raise DetectError("detect needs a square hermitian polynomial")
    f0 = f.constant_term()
    if min_eig(0.5 * (f0 + f0.conj().T)) <= config.tol_pd:
        raise DetectError("detect needs f(0) positive definite")
    log: list = []
    w = convexity_violation_search(f, config=config)
    log.append({"step": "convexity_search", "trials": config.trials, "max_level": config.max_level,
                "found": w is not None})
    if w is not None:
        return DetectionReport(NOT_SPECTRAHEDRON, witness=w, transcript=log)
    lin = linearize(f, config)
    log.append({"step": "linearize", "size": lin.L.d, "det_factor": lin.det_factor,
                "higman_steps": len(lin.transcript) - 1})
    split = split_blocks(lin.L, config)
    log.append({"step": "split", "block_sizes": split.decomposition.block_sizes,
                "classes": split.decomposition.block_class})
    red = remove_redundant_blocks(split.Lhat_blocks, config) if split.Lhat_blocks else None
    hat_blocks = red.blocks(split.Lhat_blocks) if red is not None else []
    if red is not None:
        log.append({"step": "redundancy", "kept": red.kept, "dropped": red.dropped, "complete": red.complete})
        if not red.complete:
            return DetectionReport(INCONCLUSIVE, direct_sum_all(hat_blocks), split.Lcheck, transcript=log)
    Lhat = direct_sum_all(hat_blocks)
    bc = boundary_condition_check(Lhat, split.Lcheck, config)
    log.append({"step": "boundary_condition", **bc.to_json()})
    if bc.status == "fails":
        return DetectionReport(NOT_SPECTRAHEDRON, Lhat, split.Lcheck, bc, log)
    bad = domain_consistency(f, Lhat, config)
    log.append({"step": "consistency", "samples": config.consistency_samples, "disagreements": len(bad)})
    if bad:
        return DetectionReport(INCONCLUSIVE, Lhat, split.Lcheck, {"kind": "disagreement", **bad[0]}, log)
    if bc.probabilistic:
        log.append({"note": "boundary condition checked by search up to level "
                            f"{config.max_level}; no exact decision procedure is run"})
    return DetectionReport(SPECTRAHEDRON, Lhat, split.Lcheck, None, log)
