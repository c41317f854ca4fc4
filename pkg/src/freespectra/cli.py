"""Command-line interface.

Every command prints one JSON document on stdout.  Exit codes: 0 success,
1 usage or precondition error, 2 numerical failure, 3 negative verdict
(non-member, not a spectrahedron, rejected certificate, not similar),
4 inconclusive.
"""
from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import DEFAULT, ToolConfig
from .freealg import HermTuple, MatPoly
from .parsing import parse_any
from .pencil import Pencil, make_ball, make_cube, make_monic
from .serialize import cmat_from_json, dumps, herm_tuple_from_json

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_NEGATIVE, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------- input readers

def _read(arg: str):
    """Inline text/JSON, a file path, or '-' for stdin; JSON is decoded when possible."""
    if arg == "-":
        text = sys.stdin.read()
    elif len(arg) < 4096 and Path(arg).is_file():
        text = Path(arg).read_text()
    else:
        text = arg
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text.strip()


_NAMED = re.compile(r"^(cube|ball)\(\s*(\d+)\s*(?:,\s*([0-9.eE+-]+)\s*)?\)$")


def pencil_from_any(obj) -> Pencil:
    """Pencil JSON, 'cube(n,r)' / 'ball(n,r)', or a matrix of degree-1 polynomial strings."""
    if isinstance(obj, Pencil):
        return obj
    if isinstance(obj, str):
        m = _NAMED.match(obj.strip())
        if m:
            n, r = int(m.group(2)), float(m.group(3) or 1.0)
            return (make_cube if m.group(1) == "cube" else make_ball)(n, r)
        obj = json.loads(obj)
    if isinstance(obj, dict) and "coeffs" in obj:
        return Pencil.from_json(obj)
    if isinstance(obj, (dict, list)):
        return Pencil.from_poly(parse_any(obj))
    raise UsageError(f"cannot read a pencil from {type(obj).__name__}")


def point_from_any(obj) -> HermTuple:
    if isinstance(obj, str):
        obj = json.loads(obj)
    if isinstance(obj, dict):
        return herm_tuple_from_json(obj)
    a = np.asarray(obj, dtype=object)
    if a.ndim == 1 and all(isinstance(v, (int, float)) for v in obj):
        return HermTuple.scalars(obj)
    return HermTuple(np.array([cmat_from_json(m) for m in obj]))


def _poly(arg) -> MatPoly:
    return parse_any(_read(arg) if isinstance(arg, str) else arg)


def _emit(obj) -> None:
    sys.stdout.write(dumps(obj) + "\n")


# ---------------------------------------------------------------- commands

def cmd_eval(args, cfg):
    f = _poly(args.poly)
    X = point_from_any(_read(args.point))
    V = f.evaluate(X)
    out = {"value": V}
    if V.shape[0] == V.shape[1] and np.allclose(V, V.conj().T, atol=cfg.tol_herm * max(1.0, np.abs(V).max())):
        out["eigenvalues"] = np.linalg.eigvalsh(0.5 * (V + V.conj().T))
    _emit(out)
    return EXIT_OK


def cmd_member(args, cfg):
    from .detect import poly_min_eig
    from .pencil import is_member

    X = point_from_any(_read(args.point))
    if args.pencil:
        rep = is_member(pencil_from_any(_read(args.pencil)), X, config=cfg)
        _emit(rep)
        return EXIT_OK if rep.member else EXIT_NEGATIVE
    if not args.poly:
        raise UsageError("member needs --pencil or --poly")
    lam = poly_min_eig(_poly(args.poly), X)
    ok = lam >= -cfg.tol_psd
    _emit({"member": ok, "min_eigenvalue": lam})
    return EXIT_OK if ok else EXIT_NEGATIVE


def cmd_linearize(args, cfg):
    from .linearize import linearize

    lin = linearize(_poly(args.poly), cfg)
    _emit({"pencil": lin.L, **lin.to_json()})
    return EXIT_OK


def cmd_decompose(args, cfg):
    from .algstruct import block_triangularize

    L = pencil_from_any(_read(args.pencil))
    if not L.monic:
        L, _ = make_monic(L, cfg)
    _emit(block_triangularize(L, cfg, classify=not args.no_classify))
    return EXIT_OK


def cmd_similar(args, cfg):
    from .algstruct import NONE, unitary_similarity_check

    L = pencil_from_any(_read(args.pencil))
    M = pencil_from_any(_read(args.other))
    if args.make_monic:
        L, M = make_monic(L, cfg)[0], make_monic(M, cfg)[0]
    U = unitary_similarity_check(L, M, cfg)
    if isinstance(U, str) and U == NONE:
        _emit({"similar": False, "U": None})
        return EXIT_NEGATIVE
    _emit({"similar": True, "U": U})
    return EXIT_OK


def cmd_detect(args, cfg):
    from .detect import INCONCLUSIVE, NOT_SPECTRAHEDRON, detect_spectrahedron

    rep = detect_spectrahedron(_poly(args.poly), cfg)
    _emit(rep)
    return {NOT_SPECTRAHEDRON: EXIT_NEGATIVE, INCONCLUSIVE: EXIT_INCONCLUSIVE}.get(rep.verdict, EXIT_OK)


def cmd_optimize(args, cfg):
    from .psatz import eigenvalue_sup

    doc = _read(args.input) if args.input else {}
    if isinstance(doc, str):
        raise UsageError("optimize input must be a JSON object with keys f, L, sense")
    f_src = args.f if args.f is not None else doc.get("f")
    L_src = args.L if args.L is not None else doc.get("L")
    sense = args.sense or doc.get("sense", "sup")
    if f_src is None or L_src is None:
        raise UsageError("optimize needs an objective f and a pencil L")
    L = pencil_from_any(_read(L_src) if isinstance(L_src, str) else L_src)
    f = parse_any(_read(f_src) if isinstance(f_src, str) else f_src, L.n)
    if f.n < L.n:
        f = MatPoly(L.n, f.terms, f.shape)
    if args.make_monic:
        L, _ = make_monic(L, cfg)
    res = eigenvalue_sup(f, L, cfg, sense=sense, reduce=args.reduce, gns=not args.no_gns,
                         dump_path=args.dump_sdp)
    _emit({"f": f, "L": L, **res.to_json()})
    if res.status == "numerical_failure":
        return EXIT_NUMERIC
    if res.verification is not None and not res.verification.passed:
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_certify(args, cfg):
    from .psatz import PsatzCertificate, verify_certificate
    from .serialize import poly_from_json

    doc = _read(args.certificate)
    if not isinstance(doc, dict) or "certificate" not in doc:
        raise UsageError("certify expects the JSON written by the optimize command")
    f = poly_from_json(doc["f"])
    L = Pencil.from_json(doc["L"])
    cert = PsatzCertificate.from_json(doc["certificate"])
    g = f if doc.get("sense", "sup") == "sup" else f * -1.0
    rep = verify_certificate(g, L, cert.mu, cert, tol=args.tol, config=cfg)
    claimed = doc.get("mu_star")
    out = {"verification": rep, "mu": cert.mu}
    consistent = True
    if isinstance(claimed, (int, float)):
        sgn = 1.0 if doc.get("sense", "sup") == "sup" else -1.0
        consistent = abs(sgn * cert.mu - claimed) <= cfg.tol_cert * max(1.0, abs(claimed))
        out["mu_star_consistent"] = consistent
    _emit(out)
    return EXIT_OK if rep.passed and consistent else EXIT_NEGATIVE


COMMANDS = {
    "eval": cmd_eval, "member": cmd_member, "linearize": cmd_linearize, "decompose": cmd_decompose,
    "similar": cmd_similar, "detect": cmd_detect, "optimize": cmd_optimize, "certify": cmd_certify,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="freespectra", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--config", help="JSON file overriding tolerances and knobs")
    p.add_argument("--seed", type=int, help="seed for every randomized search")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("eval", help="evaluate a polynomial at a matrix tuple")
    s.add_argument("poly")
    s.add_argument("--point", required=True)

    s = sub.add_parser("member", help="membership in a free spectrahedron or positivity domain")
    s.add_argument("--pencil")
    s.add_argument("--poly")
    s.add_argument("--point", required=True)

    s = sub.add_parser("linearize", help="monic linearization by Higman steps")
    s.add_argument("poly")

    s = sub.add_parser("decompose", help="block triangularization and hermitization of a pencil")
    s.add_argument("pencil")
    s.add_argument("--no-classify", action="store_true")

    s = sub.add_parser("similar", help="unitary similarity of two irreducible pencils")
    s.add_argument("pencil")
    s.add_argument("other")
    s.add_argument("--make-monic", action="store_true")

    s = sub.add_parser("detect", help="is the positivity domain a free spectrahedron")
    s.add_argument("poly")

    s = sub.add_parser("optimize", help="largest eigenvalue of f over a free spectrahedron")
    s.add_argument("input", nargs="?")
    s.add_argument("--f")
    s.add_argument("--L")
    s.add_argument("--sense", choices=["sup", "inf"])
    s.add_argument("--reduce", action="store_true", help="Carathéodory pruning of the certificate")
    s.add_argument("--no-gns", action="store_true", help="skip optimizer extraction")
    s.add_argument("--make-monic", action="store_true", help="normalize L by A_0^{-1/2} first")
    s.add_argument("--dump-sdp", metavar="PATH", help="write the SDP in the interchange text format")

    s = sub.add_parser("certify", help="re-verify a stored optimization certificate")
    s.add_argument("certificate")
    s.add_argument("--tol", type=float)
    return p


def run(argv, config: ToolConfig | None = None) -> int:
    from .algstruct import AlgStructError
    from .sdpsolve import SolverError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = config or (ToolConfig.load(args.config) if args.config else DEFAULT)
        if args.seed is not None:
            cfg = cfg.replace(seed=args.seed)
        return COMMANDS[args.command](args, cfg)
    except (AlgStructError, SolverError, np.linalg.LinAlgError) as exc:
        _emit({"error": str(exc), "kind": "numerical_failure"})
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, TypeError, KeyError, json.JSONDecodeError) as exc:
        _emit({"error": str(exc), "kind": "precondition"})
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main(argv=None) -> int:
    return run(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
