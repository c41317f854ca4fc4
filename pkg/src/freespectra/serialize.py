"""JSON encodings: complex values are ``[re, im]`` pairs, floats round-trip exactly."""
from __future__ import annotations

import json
from typing import Any

import numpy as np

from .freealg import HermTuple, MatPoly


def cmat_to_json(A) -> list:
    A = np.asarray(A, dtype=complex)
    if A.ndim == 0:
        return [float(A.real), float(A.imag)]
    return [cmat_to_json(a) for a in A]


def cmat_from_json(obj) -> np.ndarray:
    """Inverse of :func:`cmat_to_json`; plain real numbers are accepted too."""
    if isinstance(obj, np.ndarray):
        return obj.astype(complex)
    a = np.asarray(obj, dtype=float)
    if a.ndim >= 1 and a.shape[-1] == 2 and _looks_paired(obj):
        return a[..., 0] + 1j * a[..., 1]
    return a.astype(complex)


def _looks_paired(obj) -> bool:
    # a 2-D matrix of pairs has depth 3; a bare real matrix has depth 2
    depth, x = 0, obj
    while isinstance(x, list) and x:
        depth += 1
        x = x[0]
    return depth >= 3 or depth == 1


def real_matrix_json(A) -> list:
    return np.asarray(A, dtype=float).tolist()


def poly_to_json(p: MatPoly) -> dict:
    return {
        "n": p.n,
        "shape": list(p.shape),
        "terms": [{"word": list(w), "coeff": cmat_to_json(c)} for w, c in p.terms.items()],
    }


def poly_from_json(obj: dict) -> MatPoly:
    shape = tuple(obj.get("shape", (obj.get("d", 1),) * 2))
    return MatPoly(int(obj["n"]), {tuple(t["word"]): cmat_from_json(t["coeff"]) for t in obj["terms"]}, shape)


def herm_tuple_to_json(X: HermTuple) -> dict:
    return {"n": X.n, "k": X.k, "X": [cmat_to_json(m) for m in X.mats]}


def herm_tuple_from_json(obj: dict) -> HermTuple:
    mats = np.array([cmat_from_json(m) for m in obj["X"]], dtype=complex)
    k = int(obj.get("k", mats.shape[-1] if mats.ndim == 3 else 1))
    return HermTuple(mats.reshape(int(obj["n"]), k, k))


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy values; complex scalars become pairs."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return cmat_to_json(obj)
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, HermTuple):
        return to_jsonable(herm_tuple_to_json(obj))
    if isinstance(obj, MatPoly):
        return to_jsonable(poly_to_json(obj))
    if hasattr(obj, "to_json"):
        return to_jsonable(obj.to_json())
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True)
