import json

import numpy as np
import pytest

from freespectra import __version__
from freespectra.cli import EXIT_INCONCLUSIVE, EXIT_NEGATIVE, EXIT_OK, EXIT_USAGE, pencil_from_any, run
from freespectra.config import DEFAULT
from freespectra.pencil import make_ball

FAST = DEFAULT.replace(trials=300, consistency_samples=100, boundary_trials=4)


def call(capsys, *argv, config=None):
    code = run(list(argv), config)
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def test_version(capsys):
    assert run(["--version"]) == EXIT_OK
    assert __version__ in capsys.readouterr().out


def test_missing_command_is_usage_error(capsys):
    assert run([]) == EXIT_USAGE


def test_eval(capsys):
    code, doc = call(capsys, "eval", "1 - x1^2", "--point", "[2]")
    assert code == EXIT_OK
    assert doc["value"] == [[[-3.0, 0.0]]]
    assert doc["eigenvalues"] == [-3.0]


def test_eval_parse_error(capsys):
    code, doc = call(capsys, "eval", "1 - x0", "--point", "[1]")
    assert code == EXIT_USAGE and doc["kind"] == "precondition"


def test_member_named_pencil(capsys):
    code, doc = call(capsys, "member", "--pencil", "ball(2)", "--point", "[0.5, 0.5]")
    assert code == EXIT_OK and doc["member"]
    code, doc = call(capsys, "member", "--pencil", "ball(2)", "--point", "[1, 1]")
    assert code == EXIT_NEGATIVE and not doc["member"]


def test_member_polynomial(capsys):
    code, doc = call(capsys, "member", "--poly", "1 - x1*x2*x1", "--point", "[2, 0.1]")
    assert code == EXIT_OK and abs(doc["min_eigenvalue"] - 0.6) < 1e-12


def test_member_needs_a_domain(capsys):
    code, _ = call(capsys, "member", "--point", "[1]")
    assert code == EXIT_USAGE


def test_pencil_readers_agree():
    a = pencil_from_any("ball(2)")
    b = pencil_from_any(json.dumps(make_ball(2).to_json()))
    c = pencil_from_any([["1", "0", "x1"], ["0", "1", "x2"], ["x1", "x2", "1"]])
    assert a == make_ball(2) and b == a and c == a


def test_linearize(capsys):
    code, doc = call(capsys, "linearize", "1 - x1*x2")
    assert code == EXIT_OK
    assert doc["pencil"]["d"] == 2
    assert doc["det_factor"] == [1.0, 0.0]


def test_linearize_singular(capsys):
    code, doc = call(capsys, "linearize", "x1*x2")
    assert code == EXIT_USAGE and "free locus" in doc["error"]


def test_decompose_cube(capsys):
    code, doc = call(capsys, "decompose", "cube(1)")
    assert code == EXIT_OK
    assert doc["block_sizes"] == [1, 1]
    assert [b["class"] for b in doc["blocks"]] == ["hermitian", "hermitian"]


def test_decompose_normalizes_non_monic(capsys):
    code, doc = call(capsys, "decompose", "ball(2, 2)")
    assert code == EXIT_OK and doc["block_sizes"] == [3]


def test_similar(capsys):
    code, doc = call(capsys, "similar", "ball(2)", "ball(2)")
    assert code == EXIT_OK and doc["similar"]
    code, doc = call(capsys, "similar", "ball(2)", "ball(2, 2)", "--make-monic")
    assert code == EXIT_NEGATIVE and not doc["similar"]


def test_similar_rejects_non_monic(capsys):
    code, doc = call(capsys, "similar", "ball(2)", "ball(2, 2)")
    assert code == EXIT_USAGE and "monic" in doc["error"]


def test_detect_verdict_exit_codes(capsys):
    code, doc = call(capsys, "detect", "1 - x1*x2*x1", config=FAST)
    assert code == EXIT_NEGATIVE and doc["verdict"] == "not_spectrahedron"
    code, doc = call(capsys, "detect", "1 - x1^2", config=FAST)
    assert code == EXIT_OK and doc["verdict"] == "spectrahedron"
    assert EXIT_INCONCLUSIVE == 4


def test_optimize_and_certify(capsys, tmp_path):
    code, doc = call(capsys, "optimize", "--f", "x1*x2 + x2*x1", "--L", "ball(2)")
    assert code == EXIT_OK and abs(doc["mu_star"] - 1) < 1e-6
    path = tmp_path / "run.json"
    path.write_text(json.dumps(doc))
    code, rep = call(capsys, "certify", str(path))
    assert code == EXIT_OK and rep["verification"]["passed"] and rep["mu_star_consistent"]


def test_certify_rejects_tampered_mu(capsys, tmp_path):
    _, doc = call(capsys, "optimize", "--f", "x1", "--L", "cube(1)")
    doc["certificate"]["mu"] -= 0.01
    doc["mu_star"] -= 0.01
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    code, rep = call(capsys, "certify", str(path))
    assert code == EXIT_NEGATIVE and not rep["verification"]["passed"]


def test_certify_rejects_inconsistent_claim(capsys, tmp_path):
    _, doc = call(capsys, "optimize", "--f", "x1", "--L", "cube(1)")
    doc["mu_star"] = 0.5
    path = tmp_path / "claim.json"
    path.write_text(json.dumps(doc))
    code, rep = call(capsys, "certify", str(path))
    assert code == EXIT_NEGATIVE and rep["mu_star_consistent"] is False


def test_optimize_from_json_document(capsys, tmp_path):
    path = tmp_path / "in.json"
    path.write_text(json.dumps({"f": "x1", "L": "cube(1)", "sense": "inf"}))
    code, doc = call(capsys, "optimize", str(path))
    assert code == EXIT_OK and abs(doc["mu_star"] + 1) < 1e-6


def test_optimize_non_monic_is_precondition_error(capsys):
    code, doc = call(capsys, "optimize", "--f", "x1", "--L", '[["x2", "x1"], ["x1", "0"]]')
    assert code == EXIT_USAGE
    assert doc["kind"] == "precondition" and "monic" in doc["error"]


def test_optimize_make_monic(capsys):
    code, doc = call(capsys, "optimize", "--f", "x1", "--L", "cube(1, 2)", "--make-monic")
    assert code == EXIT_OK and abs(doc["mu_star"] - 2) < 1e-6


def test_dump_sdp(capsys, tmp_path):
    path = tmp_path / "p.sdp"
    code, _ = call(capsys, "optimize", "--f", "x1", "--L", "cube(1)", "--dump-sdp", str(path))
    assert code == EXIT_OK and path.stat().st_size > 0


def test_stdin_input(capsys, monkeypatch):
    import io
    monkeypatch.setattr("sys.stdin", io.StringIO("1 - x1^2"))
    code, doc = call(capsys, "eval", "-", "--point", "[0.5]")
    assert code == EXIT_OK and np.isclose(doc["eigenvalues"][0], 0.75)


def test_config_file(capsys, tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"trials": 50, "consistency_samples": 20, "boundary_trials": 2}))
    code, doc = call(capsys, "--config", str(path), "--seed", "3", "detect", "1 - x1^2")
    assert code == EXIT_OK and doc["transcript"][0]["trials"] == 50


@pytest.mark.parametrize("argv", [["eval", "x1"], ["certify"], ["optimize", "--sense", "mid"]])
def test_bad_arguments(capsys, argv):
    assert run(argv) == EXIT_USAGE
