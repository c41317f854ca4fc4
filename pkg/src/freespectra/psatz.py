"""Eigenvalue optimization over a free spectrahedron with exact SOS certificates.

For a hermitian d×d polynomial f and a monic hermitian e×e pencil L the
program is

    min μ   s.t.  μI − f = W* S0 W + W_e* (Σ_ij S_ij L_ij) W_e,   S0, S ⪰ 0

where W = I_d ⊗ w stacks the words of length ≤ δ = ⌊deg f/2⌋.  The optimal
Gram matrices factor into f = μI − Σ s_i* s_i − Σ v_j* L v_j, and the dual
moment matrices give a candidate optimizer by a truncated GNS construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import sdpsolve as sdp
from .config import DEFAULT, ToolConfig
from .freealg import HermTuple, MatPoly, Word, word_key, words_upto
from .pencil import Pencil, min_eig


class PsatzError(ValueError):
    pass


def _rev(w: Word) -> Word:
    return tuple(reversed(w))


@dataclass(frozen=True)
class WordVector:
    n: int
    delta: int

    @property
    def words(self) -> list:
        return words_upto(self.n, self.delta)

    @property
    def size(self) -> int:
        return sum(self.n ** j for j in range(self.delta + 1))


@dataclass
class OptSDP:
    """The conic program plus the bookkeeping needed to read its solution."""

    program: sdp.ConicProgram
    f: MatPoly
    L: Pencil
    wv: WordVector
    rows: dict  # (ω, a, b) -> (row_re, row_im or None)

    @property
    def d(self) -> int:
        return self.f.shape[0]

    @property
    def e(self) -> int:
        return self.L.d


def _check_inputs(f: MatPoly, L: Pencil, config: ToolConfig) -> None:
    if not L.monic:
        raise PsatzError("pencil must be monic (A_0 = I): for a non-monic pencil such as "
                         "[[x2, x1], [x1, 0]] the domain {(0, X2): X2 ⪰ 0} has no interior "
                         "and exact certificates can fail")
    if not L.hermitian:
        raise PsatzError("pencil must be hermitian")
    if f.shape[0] != f.shape[1] or not f.is_hermitian(config.tol_herm):
        raise PsatzError("objective must be a square hermitian polynomial")
    if f.n != L.n:
        raise PsatzError(f"variable count mismatch: objective has {f.n}, pencil has {L.n}")


def build_opt_sdp(f: MatPoly, L: Pencil, config: ToolConfig = DEFAULT) -> OptSDP:
    _check_inputs(f, L, config)
    n, d, e = f.n, f.shape[0], L.d
    wv = WordVector(n, max(f.degree(), 0) // 2)
    W = wv.words
    D = len(W)
    cx = np.iscomplexobj(L.coeffs) and bool(np.any(L.coeffs.imag)) or any(
        np.any(np.asarray(c).imag) for c in f.terms.values())
    # equation (ω, a, b) -> {block: {(q, p): coeff}} meaning Σ coeff·S[p, q]
    eqs: dict = {}

    def put(key, block, p, q, c):
        eqs.setdefault(key, ({}, {}))[block][(q, p)] = eqs.get(key, ({}, {}))[block].get((q, p), 0) + c

    for ia, al in enumerate(W):
        ra = _rev(al)
        for ib, be in enumerate(W):
            for a in range(d):
                for b in range(d):
                    put((ra + be, a, b), 0, a * D + ia, b * D + ib, 1.0)
    nz = [(k, np.argwhere(np.abs(L.coeffs[k]) > 0)) for k in range(n + 1)]
    for ia, al in enumerate(W):
        ra = _rev(al)
        for ib, be in enumerate(W):
            for k, idx in nz:
                om = ra + ((k,) if k else ()) + be
                for i, i2 in idx:
                    c = complex(L.coeffs[k][i, i2])
                    for a in range(d):
                        for b in range(d):
                            put((om, a, b), 1, (i * d + a) * D + ia, (i2 * d + b) * D + ib, c)
    for w in f.terms:
        for a in range(d):
            for b in range(d):
                eqs.setdefault((w, a, b), ({}, {}))
    for a in range(d):
        eqs.setdefault(((), a, a), ({}, {}))

    sizes = [d * D, e * d * D]
    prog = sdp.ConicProgram(sizes, [None, None], sense="min",
                            complex_blocks=[True, True] if cx else [False, False])
    mu = prog.add_free(1, cost=1.0)
    rows: dict = {}
    for key in sorted(eqs, key=lambda t: (word_key(t[0]), t[1], t[2])):
        om, a, b = key
        partner = (_rev(om), b, a)
        pk = (word_key(partner[0]), b, a)
        if pk < (word_key(om), a, b):
            continue  # conjugate of an equation already kept
        selfpair = partner == key
        blocks_c = {}
        for blk, ent in enumerate(eqs[key]):
            if not ent:
                continue
            G = np.zeros((sizes[blk],) * 2, dtype=complex)
            for (q, p), c in ent.items():
                G[q, p] += c
            blocks_c[blk] = G
        rhs = -complex(f.coeff(om)[a, b])
        free = {mu: -1.0} if (om == () and a == b) else {}
        re_blocks = {blk: 0.5 * (G + G.conj().T) for blk, G in blocks_c.items()}
        im_blocks = {blk: (G - G.conj().T) / 2j for blk, G in blocks_c.items()}
        if not cx:
            re_blocks = {blk: B.real for blk, B in re_blocks.items()}
        r_re = len(prog.constraints)
        prog.add(re_blocks, rhs.real, free)
        r_im = None
        if cx and not selfpair:
            r_im = len(prog.constraints)
            prog.add(im_blocks, rhs.imag, {})
        rows[key] = (r_re, r_im)
    return OptSDP(prog, f, L, wv, rows)


# ---------------------------------------------------------------- certificates

@dataclass
class PsatzCertificate:
    mu: float
    S0: np.ndarray
    Sbig: np.ndarray
    s: list = field(default_factory=list)  # d×d matrix polynomials
    v: list = field(default_factory=list)  # e×d matrix polynomials
    delta: int = 0
    reduced: bool = False

    @property
    def M(self) -> int:
        return len(self.s)

    @property
    def N(self) -> int:
        return len(self.v)

    def to_json(self) -> dict:
        from .serialize import cmat_to_json, poly_to_json
        return {"mu": self.mu, "delta": self.delta, "M": self.M, "N": self.N, "reduced": self.reduced,
                "S0": cmat_to_json(self.S0), "Sbig": cmat_to_json(self.Sbig),
                "s": [poly_to_json(p) for p in self.s], "v": [poly_to_json(p) for p in self.v]}

    @classmethod
    def from_json(cls, obj: dict) -> "PsatzCertificate":
        from .serialize import cmat_from_json, poly_from_json
        return cls(float(obj["mu"]), cmat_from_json(obj["S0"]), cmat_from_json(obj["Sbig"]),
                   [poly_from_json(p) for p in obj["s"]], [poly_from_json(p) for p in obj["v"]],
                   int(obj.get("delta", 0)), bool(obj.get("reduced", False)))


def certificate_term_bound(n: int, d: int, deg_f: int) -> int:
    return 1 + d * d * sum(n ** j for j in range(deg_f + 2))


def _factor(G: np.ndarray, tol_rel: float, tol_neg: float) -> list[tuple[float, np.ndarray]]:
    G = 0.5 * (G + G.conj().T)
    ev, U = np.linalg.eigh(G)
    top = max(float(ev[-1]), 0.0) if ev.size else 0.0
    if ev.size and ev[0] < -tol_neg * max(1.0, top):
        raise PsatzError(f"Gram matrix indefinite beyond tolerance (λ_min = {ev[0]:.3g})")
    return [(float(l), U[:, i]) for i, l in enumerate(ev) if l > tol_rel * top and l > 0]


def _caratheodory(terms: list[MatPoly], weights: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Nonnegative weights with the same Σ w_i·terms_i and a linearly independent support."""
    keys = sorted({w for t in terms for w in t.words()}, key=word_key)
    vecs = []
    for t in terms:
        parts = [t.coeff(w).reshape(-1) for w in keys]
        z = np.concatenate(parts) if parts else np.zeros(0)
        vecs.append(np.concatenate([z.real, z.imag]))
    T = np.array(vecs).T
    w = weights.astype(float).copy()
    while True:
        act = np.flatnonzero(w > tol)
        if act.size == 0:
            return w
        _, s, Vh = np.linalg.svd(T[:, act])
        rank = int(np.sum(s > 1e-10 * max(s[0], 1e-300))) if s.size else 0
        if rank == act.size:
            return w
        c = Vh[-1].real
        # the null vector is approximate: take the orientation with the shorter step
        best = None
        for cc in (c, -c):
            pos = cc > 1e-14
            if np.any(pos):
                th = float(np.min(w[act][pos] / cc[pos]))
                if best is None or th < best[0]:
                    best = (th, cc, pos)
        if best is None:
            return w
        theta, c, pos = best
        w[act] -= theta * c
        w[act[np.argmin(np.where(pos, w[act], np.inf))]] = 0.0
        w[w < tol] = 0.0


def extract_certificate(opt: OptSDP, sol: sdp.ConicSolution, config: ToolConfig = DEFAULT,
                        reduce: bool = False) -> PsatzCertificate:
    if sol.status != sdp.OPTIMAL:
        raise PsatzError(f"no certificate: solver status {sol.status}")
    n, d, e = opt.f.n, opt.d, opt.e
    W = opt.wv.words
    D = len(W)
    mu = float(sol.free[0])
    S0, Sb = sol.primal[0], sol.primal[1]
    s_list, v_list = [], []
    for lam, u in _factor(S0, config.tol_rank, 1e-6):
        terms = {}
        for ib, be in enumerate(W):
            row = np.zeros((d, d), dtype=complex)
            row[0] = np.sqrt(lam) * np.conj(u[np.arange(d) * D + ib])
            if np.any(row):
                terms[be] = row
        s_list.append(MatPoly(n, terms, (d, d)))
    for lam, u in _factor(Sb, config.tol_rank, 1e-6):
        terms = {}
        for ib, be in enumerate(W):
            C = np.zeros((e, d), dtype=complex)
            for i in range(e):
                C[i] = np.sqrt(lam) * np.conj(u[(i * d + np.arange(d)) * D + ib])
            if np.any(C):
                terms[be] = C
        v_list.append(MatPoly(n, terms, (e, d)))
    cert = PsatzCertificate(mu, S0, Sb, s_list, v_list, opt.wv.delta)
    if reduce:
        cert = reduce_certificate(cert, opt.L)
    return cert


def reduce_certificate(cert: PsatzCertificate, L: Pencil) -> PsatzCertificate:
    """Carathéodory pass: keep a linearly independent subset of the SOS terms."""
    Lp = L.to_poly()
    terms = [p.adjoint() * p for p in cert.s] + [q.adjoint() * Lp * q for q in cert.v]
    if not terms:
        return cert
    w = _caratheodory(terms, np.ones(len(terms)))
    M = len(cert.s)
    s = [cert.s[i] * float(np.sqrt(w[i])) for i in range(M) if w[i] > 0]
    v = [cert.v[j] * float(np.sqrt(w[M + j])) for j in range(len(cert.v)) if w[M + j] > 0]
    return PsatzCertificate(cert.mu, cert.S0, cert.Sbig, s, v, cert.delta, True)


@dataclass
class VerificationReport:
    residual: float
    passed: bool
    degree_ok: bool
    max_degree: int
    terms: int
    detail: str = ""

    def to_json(self) -> dict:
        return self.__dict__.copy()


def verify_certificate(f: MatPoly, L: Pencil, mu: float, cert: PsatzCertificate,
                       tol: float | None = None, config: ToolConfig = DEFAULT) -> VerificationReport:
    """Expand μI − f − Σ s*s − Σ v*Lv; residual is the largest coefficient norm."""
    tol = config.tol_cert if tol is None else tol
    d = f.shape[0]
    Lp = L.to_poly()
    try:
        rest = MatPoly.identity(f.n, d) * mu - f
        for p in cert.s:
            rest = rest - p.adjoint() * p
        for q in cert.v:
            rest = rest - q.adjoint() * Lp * q
    except (ValueError, TypeError) as exc:
        return VerificationReport(float("inf"), False, False, -1, cert.M + cert.N, f"shape error: {exc}")
    res = rest.max_coeff_norm()
    bound = max(f.degree(), 0) // 2
    mdeg = max([p.degree() for p in cert.s] + [q.degree() for q in cert.v] + [-1])
    deg_ok = mdeg <= bound
    detail = "" if deg_ok else f"factor degree {mdeg} exceeds {bound}"
    return VerificationReport(res, bool(res <= tol and deg_ok), deg_ok, mdeg, cert.M + cert.N, detail)


# ---------------------------------------------------------------- moments and GNS

@dataclass
class MomentData:
    M: np.ndarray
    Mk: list
    eigenvalues: np.ndarray
    rank: int
    flat: bool | None

    def to_json(self) -> dict:
        return {"M": self.M, "rank": self.rank, "flat": self.flat, "eigenvalues": self.eigenvalues}


def moment_data(opt: OptSDP, sol: sdp.ConicSolution, config: ToolConfig = DEFAULT) -> MomentData:
    """Moment matrices of the dual functional on words of length ≤ δ (shifted by x_k)."""
    d, n = opt.d, opt.f.n
    W = opt.wv.words
    D = len(W)
    y = sol.dual
    lam: dict = {}
    for (om, a, b), (r_re, r_im) in opt.rows.items():
        z = y[r_re] - (1j * y[r_im] if r_im is not None else 0.0)
        val = -z
        partner = (_rev(om), b, a)
        if partner == (om, a, b):
            lam[(om, a, b)] = complex(val.real)
        else:
            lam[(om, a, b)] = 0.5 * val
            lam[partner] = 0.5 * np.conj(val)

    def Lam(a, b, om):
        return lam.get((om, a, b), 0.0)

    def mat(shift: Word) -> np.ndarray:
        M = np.zeros((d * D, d * D), dtype=complex)
        for ia, al in enumerate(W):
            ra = _rev(al)
            for ib, be in enumerate(W):
                om = ra + shift + be
                for a in range(d):
                    for b in range(d):
                        M[a * D + ia, b * D + ib] = Lam(a, b, om)
        return 0.5 * (M + M.conj().T)

    M = mat(())
    Mk = [mat((k,)) for k in range(1, n + 1)]
    ev = np.linalg.eigvalsh(M)
    top = max(float(ev[-1]), 0.0)
    rank = int(np.sum(ev > config.eps_gns * max(top, 1e-300)))
    flat = None
    if opt.wv.delta >= 1:
        low = [i for i, w in enumerate(W) if len(w) < opt.wv.delta]
        idx = [a * D + i for a in range(d) for i in low]
        ev_low = np.linalg.eigvalsh(M[np.ix_(idx, idx)])
        flat = int(np.sum(ev_low > config.eps_gns * max(top, 1e-300))) == rank
    return MomentData(M, Mk, ev, rank, flat)


@dataclass
class NotFlat:
    reason: str
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"status": "not flat", "reason": self.reason, **self.diagnostics}


def extract_optimizer(mom: MomentData, f: MatPoly, L: Pencil, mu_star: float,
                      config: ToolConfig = DEFAULT):
    """Truncated GNS: compress left multiplication by x_k to the range of M.

    Returns (HermTuple, info) when the tuple passes λ_min L(X) ≥ −ε and
    λ_max f(X) ≥ μ⋆ − ε, otherwise a :class:`NotFlat` with diagnostics.
    """
    eps = config.eps_gns
    ev, U = np.linalg.eigh(mom.M)
    top = float(ev[-1]) if ev.size else 0.0
    if top <= 1e-12:
        raise PsatzError("degenerate moment matrix (unit mass ≈ 0)")
    keep = ev > eps * top
    Ur, Dr = U[:, keep], ev[keep]
    T = Ur / np.sqrt(Dr)
    X = np.array([T.conj().T @ Mk @ T for Mk in mom.Mk])
    X = 0.5 * (X + X.conj().transpose(0, 2, 1))
    Xt = HermTuple(X)
    lamL = min_eig(L.evaluate(Xt))
    Fx = f.evaluate(Xt)
    lamF = float(np.linalg.eigvalsh(0.5 * (Fx + Fx.conj().T))[-1])
    info = {"level": Xt.k, "lambda_min_L": lamL, "lambda_max_f": lamF, "flat": mom.flat}
    if lamL >= -eps and lamF >= mu_star - eps:
        return Xt, info
    return NotFlat("extracted tuple fails validation", info)


# ---------------------------------------------------------------- driver

@dataclass
class OptimizationResult:
    status: str  # optimal | unbounded | numerical_failure
    sense: str
    mu_star: float
    certificate: PsatzCertificate | None = None
    verification: VerificationReport | None = None
    optimizer: HermTuple | None = None
    optimizer_info: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        from .serialize import herm_tuple_to_json
        return {"status": self.status, "sense": self.sense, "mu_star": self.mu_star,
                "certificate": self.certificate, "verification": self.verification,
                "optimizer": None if self.optimizer is None else herm_tuple_to_json(self.optimizer),
                "optimizer_info": self.optimizer_info, "solver": self.solver}


def eigenvalue_sup(f: MatPoly, L: Pencil, config: ToolConfig = DEFAULT, sense: str = "sup",
                   reduce: bool = False, gns: bool = True, dump_path=None) -> OptimizationResult:
    """sup of λ_max f (or inf of λ_min f) over 𝒟_L with a certificate.

    For ``sense="inf"`` the program runs on −f; the certificate then proves
    −f ⪯ μ·I with μ = −mu_star.
    """
    if sense not in ("sup", "inf"):
        raise ValueError("sense must be 'sup' or 'inf'")
    g = f if sense == "sup" else f * -1.0
    opt = build_opt_sdp(g, L, config)
    if dump_path is not None:
        sdp.dump(opt.program, dump_path)
    sol = sdp.solve(opt.program, config)
    info = {"status": sol.status, "iterations": sol.iterations, "message": sol.message,
            "residuals": sol.residuals, "constraints": len(opt.program.constraints),
            "block_sizes": opt.program.block_sizes}
    sgn = 1.0 if sense == "sup" else -1.0
    if sol.status == sdp.INFEASIBLE:
        ok, det = sdp.verify_infeasibility(opt.program, sol.dual)
        info["certificate_verified"] = ok
        return OptimizationResult("unbounded", sense, sgn * float("inf"), solver=info)
    if sol.status != sdp.OPTIMAL:
        return OptimizationResult("numerical_failure", sense, float("nan"), solver=info)
    cert = extract_certificate(opt, sol, config, reduce=reduce)
    rep = verify_certificate(g, L, cert.mu, cert, config=config)
    res = OptimizationResult("optimal", sense, sgn * cert.mu, cert, rep, solver=info)
    if gns:
        try:
            mom = moment_data(opt, sol, config)
            out = extract_optimizer(mom, g, L, cert.mu, config)
        except PsatzError as exc:
            res.optimizer_info = {"status": "failed", "reason": str(exc)}
        else:
            if isinstance(out, NotFlat):
                res.optimizer_info = out.to_json()
            else:
                res.optimizer, res.optimizer_info = out[0], {"status": "validated", **out[1]}
    return res
