"""Free *-algebra: noncommutative polynomials with matrix coefficients.

A polynomial is a finite map from words (tuples of 1-based variable indices)
to complex coefficient matrices.  Evaluation at a tuple X uses the Kronecker
order ``coefficient ⊗ X_w`` throughout the package.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

Word = tuple[int, ...]


def word_key(w: Word) -> tuple:
    """Graded-lexicographic sort key."""
    return (len(w), w)


def words_upto(n: int, deg: int) -> list[Word]:
    """All words in n letters of length <= deg, graded-lex ordered."""
    out: list[Word] = [()]
    layer: list[Word] = [()]
    for _ in range(deg):
        layer = [w + (j,) for w in layer for j in range(1, n + 1)]
        out.extend(layer)
    return out


def _as_coeff(c, shape=None) -> np.ndarray:
    a = np.array(c, dtype=complex)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise ValueError("coefficients must be 2-D matrices")
    if shape is not None and a.shape != tuple(shape):
        raise ValueError(f"coefficient shape {a.shape} != {tuple(shape)}")
    return a


class MatPoly:
    """Noncommutative polynomial in ``n`` variables with p×q complex coefficients.

    Values are immutable; arithmetic returns new objects.  Zero coefficients
    are never stored (exact test; see :meth:`prune` for a tolerance version).
    """

    __slots__ = ("n", "shape", "_terms")

    def __init__(self, n: int, terms: Mapping[Sequence[int], object] | None = None,
                 shape: tuple[int, int] | None = None):
        if n < 0:
            raise ValueError("variable count must be nonnegative")
        self.n = int(n)
        clean: dict[Word, np.ndarray] = {}
        for w, c in (terms or {}).items():
            w = tuple(int(j) for j in w)
            if any(j < 1 or j > n for j in w):
                raise ValueError(f"word {w} uses a letter outside 1..{n}")
            a = _as_coeff(c, shape)
            if shape is None:
                shape = a.shape
            if not np.any(a):
                continue
            if w in clean:
                a = clean[w] + a
                if not np.any(a):
                    del clean[w]
                    continue
            a = a.copy()
            a.setflags(write=False)
            clean[w] = a
        if shape is None:
            shape = (1, 1)
        self.shape = (int(shape[0]), int(shape[1]))
        self._terms = dict(sorted(clean.items(), key=lambda kv: word_key(kv[0])))

    # construction helpers
    @classmethod
    def zero(cls, n: int, shape=(1, 1)) -> "MatPoly":
        return cls(n, {}, shape)

    @classmethod
    def constant(cls, c, n: int) -> "MatPoly":
        a = _as_coeff(c)
        return cls(n, {(): a}, a.shape)

    @classmethod
    def identity(cls, n: int, d: int = 1) -> "MatPoly":
        return cls.constant(np.eye(d), n)

    @classmethod
    def var(cls, j: int, n: int, coeff=1.0) -> "MatPoly":
        a = _as_coeff(coeff)
        return cls(n, {(j,): a}, a.shape)

    @classmethod
    def monomial(cls, word: Sequence[int], n: int, coeff=1.0) -> "MatPoly":
        a = _as_coeff(coeff)
        return cls(n, {tuple(word): a}, a.shape)

    @classmethod
    def from_entries(cls, entries: Sequence[Sequence["MatPoly | complex"]], n: int | None = None) -> "MatPoly":
        """Assemble a block matrix from a grid of polynomials (or scalars)."""
        if n is None:
            n = next(e.n for row in entries for e in row if isinstance(e, MatPoly))
        grid = [[e if isinstance(e, MatPoly) else cls.constant(e, n) for e in row] for row in entries]
        heights = [row[0].shape[0] for row in grid]
        widths = [e.shape[1] for e in grid[0]]
        for i, row in enumerate(grid):
            if len(row) != len(widths):
                raise ValueError("ragged block grid")
            for j, e in enumerate(row):
                if e.n != n:
                    raise ValueError("variable count mismatch in block grid")
                if e.shape != (heights[i], widths[j]):
                    raise ValueError("block sizes do not line up")
        P, Q = sum(heights), sum(widths)
        r0 = np.cumsum([0] + heights)
        c0 = np.cumsum([0] + widths)
        out: dict[Word, np.ndarray] = {}
        for i, row in enumerate(grid):
            for j, e in enumerate(row):
                for w, c in e._terms.items():
                    a = out.setdefault(w, np.zeros((P, Q), dtype=complex))
                    a[r0[i]:r0[i + 1], c0[j]:c0[j + 1]] += c
        return cls(n, out, (P, Q))

    # accessors
    @property
    def d(self) -> int:
        return self.shape[0]

    @property
    def terms(self) -> dict[Word, np.ndarray]:
        return dict(self._terms)

    def words(self) -> list[Word]:
        return list(self._terms)

    def coeff(self, w: Sequence[int]) -> np.ndarray:
        c = self._terms.get(tuple(w))
        return np.zeros(self.shape, dtype=complex) if c is None else c.copy()

    def constant_term(self) -> np.ndarray:
        return self.coeff(())

    def entry(self, i: int, j: int) -> "MatPoly":
        return MatPoly(self.n, {w: c[i:i + 1, j:j + 1] for w, c in self._terms.items()}, (1, 1))

    def is_zero(self) -> bool:
        return not self._terms

    def degree(self) -> int:
        return max((len(w) for w in self._terms), default=-1)

    # algebra
    def _check(self, other: "MatPoly") -> None:
        if self.n != other.n:
            raise ValueError(f"variable count mismatch: {self.n} vs {other.n}")

    def __add__(self, other):
        if not isinstance(other, MatPoly):
            other = MatPoly.constant(np.asarray(other) * np.eye(self.shape[0]) if np.ndim(other) == 0 else other, self.n)
        self._check(other)
        if other.shape != self.shape:
            raise ValueError(f"shape mismatch: {self.shape} vs {other.shape}")
        terms = dict(self._terms)
        for w, c in other._terms.items():
            terms[w] = terms[w] + c if w in terms else c
        return MatPoly(self.n, terms, self.shape)

    __radd__ = __add__

    def __neg__(self):
        return MatPoly(self.n, {w: -c for w, c in self._terms.items()}, self.shape)

    def __sub__(self, other):
        if not isinstance(other, MatPoly):
            return self + (-np.asarray(other, dtype=complex))
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, MatPoly):
            return mul(self, other)
        s = complex(other)
        return MatPoly(self.n, {w: s * c for w, c in self._terms.items()}, self.shape)

    def __rmul__(self, other):
        s = complex(other)
        return MatPoly(self.n, {w: s * c for w, c in self._terms.items()}, self.shape)

    def lmul(self, M) -> "MatPoly":
        """Left multiplication by a constant matrix."""
        M = _as_coeff(M)
        return MatPoly(self.n, {w: M @ c for w, c in self._terms.items()}, (M.shape[0], self.shape[1]))

    def rmul(self, M) -> "MatPoly":
        M = _as_coeff(M)
        return MatPoly(self.n, {w: c @ M for w, c in self._terms.items()}, (self.shape[0], M.shape[1]))

    def adjoint(self) -> "MatPoly":
        return adjoint(self)

    def evaluate(self, X) -> np.ndarray:
        return evaluate(self, X)

    def direct_sum(self, other: "MatPoly") -> "MatPoly":
        return direct_sum(self, other)

    def prune(self, eps: float) -> "MatPoly":
        """Drop coefficients with Frobenius norm <= eps."""
        return MatPoly(self.n, {w: c for w, c in self._terms.items() if np.linalg.norm(c) > eps}, self.shape)

    def max_coeff_norm(self) -> float:
        return max((float(np.linalg.norm(c)) for c in self._terms.values()), default=0.0)

    def is_hermitian(self, tol: float = 1e-9) -> bool:
        if self.shape[0] != self.shape[1]:
            return False
        return (self - adjoint(self)).max_coeff_norm() <= tol * max(1.0, self.max_coeff_norm())

    def allclose(self, other: "MatPoly", tol: float = 1e-9) -> bool:
        return self.n == other.n and self.shape == other.shape and (self - other).max_coeff_norm() <= tol

    def __eq__(self, other):
        if not isinstance(other, MatPoly):
            return NotImplemented
        return (self.n == other.n and self.shape == other.shape and self._terms.keys() == other._terms.keys()
                and all(np.array_equal(c, other._terms[w]) for w, c in self._terms.items()))

    def __hash__(self):
        return hash((self.n, self.shape, tuple(self._terms)))

    def __repr__(self):
        if self.shape == (1, 1):
            from .parsing import format_poly
            return f"MatPoly({format_poly(self)!r}, n={self.n})"
        return f"MatPoly(n={self.n}, shape={self.shape}, words={list(self._terms)})"


def mul(p: MatPoly, q: MatPoly) -> MatPoly:
    """Product in the free algebra (concatenate words, multiply coefficients)."""
    if p.n != q.n:
        raise ValueError(f"variable count mismatch: {p.n} vs {q.n}")
    if p.shape[1] != q.shape[0]:
        raise ValueError(f"coefficient sizes do not compose: {p.shape} · {q.shape}")
    out: dict[Word, np.ndarray] = {}
    for u, a in p._terms.items():
        for v, b in q._terms.items():
            w = u + v
            ab = a @ b
            out[w] = out[w] + ab if w in out else ab
    return MatPoly(p.n, out, (p.shape[0], q.shape[1]))


def adjoint(p: MatPoly) -> MatPoly:
    """The involution: reverse words, conjugate-transpose coefficients."""
    return MatPoly(p.n, {w[::-1]: c.conj().T for w, c in p._terms.items()}, (p.shape[1], p.shape[0]))


def degree(p: MatPoly) -> int:
    return p.degree()


def direct_sum(p: MatPoly, q: MatPoly) -> MatPoly:
    if p.n != q.n:
        raise ValueError(f"variable count mismatch: {p.n} vs {q.n}")
    P = (p.shape[0] + q.shape[0], p.shape[1] + q.shape[1])
    out: dict[Word, np.ndarray] = {}
    for w in set(p._terms) | set(q._terms):
        a = np.zeros(P, dtype=complex)
        if w in p._terms:
            a[:p.shape[0], :p.shape[1]] = p._terms[w]
        if w in q._terms:
            a[p.shape[0]:, p.shape[1]:] = q._terms[w]
        out[w] = a
    return MatPoly(p.n, out, P)


def _matrices(X) -> np.ndarray:
    if isinstance(X, HermTuple):
        return X.mats
    mats = np.asarray(X, dtype=complex)
    if mats.ndim == 1:  # scalar point
        mats = mats.reshape(-1, 1, 1)
    if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
        raise ValueError("expected a tuple of square matrices")
    return mats


def evaluate(p: MatPoly, X) -> np.ndarray:
    """Σ_w coeff(w) ⊗ X_w; accepts a HermTuple, an (n,k,k) array or a real vector."""
    mats = _matrices(X)
    if mats.shape[0] != p.n:
        raise ValueError(f"variable count mismatch: polynomial has {p.n}, point has {mats.shape[0]}")
    k = mats.shape[1]
    cache: dict[Word, np.ndarray] = {(): np.eye(k, dtype=complex)}

    def word_value(w: Word) -> np.ndarray:
        if w not in cache:
            cache[w] = word_value(w[:-1]) @ mats[w[-1] - 1]
        return cache[w]

    out = np.zeros((p.shape[0] * k, p.shape[1] * k), dtype=complex)
    for w, c in p._terms.items():
        out += np.kron(c, word_value(w))
    return out


@dataclass(frozen=True, eq=False)
class HermTuple:
    """n hermitian k×k matrices: a point of the free space at level k."""

    mats: np.ndarray
    tol_herm: float = 1e-9

    def __post_init__(self):
        mats = np.array(self.mats, dtype=complex)
        if mats.ndim == 1:
            mats = mats.reshape(-1, 1, 1)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise ValueError("HermTuple needs shape (n, k, k)")
        for j, Xj in enumerate(mats):
            err = np.linalg.norm(Xj - Xj.conj().T)
            if err > self.tol_herm * max(1.0, np.linalg.norm(Xj)):
                raise ValueError(f"entry {j + 1} is not hermitian (defect {err:.3g})")
        mats = 0.5 * (mats + mats.conj().transpose(0, 2, 1))
        mats.setflags(write=False)
        object.__setattr__(self, "mats", mats)

    @property
    def n(self) -> int:
        return self.mats.shape[0]

    @property
    def k(self) -> int:
        return self.mats.shape[1]

    def __getitem__(self, j: int) -> np.ndarray:
        return self.mats[j]

    def __len__(self):
        return self.n

    @classmethod
    def zeros(cls, n: int, k: int) -> "HermTuple":
        return cls(np.zeros((n, k, k)))

    @classmethod
    def scalars(cls, xs: Iterable[float]) -> "HermTuple":
        return cls(np.array(list(xs), dtype=float).reshape(-1, 1, 1))

    @classmethod
    def random(cls, n: int, k: int, rng: np.random.Generator, scale: float = 1.0,
               real: bool = False) -> "HermTuple":
        G = rng.standard_normal((n, k, k))
        if not real:
            G = G + 1j * rng.standard_normal((n, k, k))
        H = 0.5 * (G + G.conj().transpose(0, 2, 1))
        return cls(scale * H)

    def compress(self, V: np.ndarray) -> "HermTuple":
        """V* X V componentwise."""
        V = np.asarray(V, dtype=complex)
        return HermTuple(V.conj().T @ self.mats @ V)

    def scaled(self, t: float) -> "HermTuple":
        return HermTuple(t * self.mats)
