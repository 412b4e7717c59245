"""Command line interface: outputs, manifests, determinism, exit codes."""

import json
import math

import numpy as np
import pytest

from reeb_ldp import __version__
from reeb_ldp.cli import main

X0 = "1.4142135623730951,0.0"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_schema_prints_json_and_exits_zero(capsys):
    code, out, _ = run(capsys, "coeffs", "--schema")
    assert code == 0
    schema = json.loads(out)
    assert "edge_id" in json.dumps(schema)


def test_bad_config_path_exits_two(capsys):
    code, _, err = run(capsys, "coeffs", "--config", "/nope/missing.json")
    assert code == 2
    assert err.strip()


def test_unknown_flag_exits_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["coeffs", "--config", "harmonic", "--frobnicate"])
    assert exc.value.code == 2


def test_coeffs_rows_follow_harmonic_law(tmp_path, capsys):
    out_csv = tmp_path / "coeffs.csv"
    code, out, _ = run(capsys, "coeffs", "--config", "harmonic",
                       "-o", str(out_csv))
    assert code == 0
    lines = out_csv.read_text().splitlines()
    assert lines[0].startswith("# manifest ")
    digest = lines[0].split()[-1]
    assert len(digest) == 64
    assert lines[1] == "edge_id,h,T,B2"
    rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:]])
    h, period, b2 = rows[:, 1], rows[:, 2], rows[:, 3]
    sel = h > 0.05
    assert np.allclose(period[sel], 2.0 * math.pi, rtol=1e-5)
    assert np.allclose(b2[sel], 2.0 * h[sel], rtol=1e-4)
    assert out == ""                  # -o redirects the artifact


def test_graph_export_doublewell(tmp_path, capsys):
    out_json = tmp_path / "graph.json"
    code, _, _ = run(capsys, "graph", "--config", "doublewell",
                     "-o", str(out_json))
    assert code == 0
    doc = json.loads(out_json.read_text())
    assert len(doc["vertices"]) == 3
    assert len(doc["edges"]) == 3
    kinds = sorted(v["kind"] for v in doc["vertices"])
    assert kinds == ["exterior", "exterior", "interior"]
    assert len(doc["manifest"]["digest"]) == 64


def test_simulate_then_evaluate_action(tmp_path, capsys):
    traj = tmp_path / "traj.csv"
    summary = tmp_path / "summary.json"
    code, _, _ = run(capsys, "simulate", "--config", "harmonic",
                     "--epsilon", "0.0625", "--beta", "0.5",
                     "--horizon", "1.0", "--x", X0, "--n-traj", "1",
                     "--seed", "42", "-o", str(traj),
                     "--summary-out", str(summary))
    assert code == 0
    doc = json.loads(summary.read_text())
    assert doc["exited"] == [False]
    assert doc["h0"] == pytest.approx([1.0], abs=1e-12)
    assert len(doc["state_digest"]) == 64

    out_json = tmp_path / "eval.json"
    code, _, _ = run(capsys, "action", "eval", "--config", "harmonic",
                     "--path", str(traj), "-o", str(out_json))
    assert code == 0
    ev = json.loads(out_json.read_text())
    assert math.isfinite(ev["action"])
    assert ev["action"] >= 0.0
    assert ev["vertex_dwell"] >= 0.0


def test_minimize_path_feeds_ldp_verify(tmp_path, capsys):
    ramp = tmp_path / "ramp.csv"
    code, out, _ = run(capsys, "action", "minimize", "--config", "harmonic",
                       "--start", "0:1.0", "--target", "0:2.0",
                       "--horizon", "1.0", "--path-out", str(ramp))
    assert code == 0
    res = json.loads(out)
    expected = (2.0 - math.sqrt(2.0)) ** 2 / 2.0
    assert res["action"] == pytest.approx(expected, abs=1e-3)

    out_json = tmp_path / "verify.json"
    code, _, _ = run(capsys, "ldp", "verify", "--config", "harmonic",
                     "--path", str(ramp), "--delta", "0.6",
                     "--epsilons", "0.04,0.025", "--beta", "0.5",
                     "--samples", "1000", "--seed", "1",
                     "--threads", "2", "-o", str(out_json))
    assert code == 0
    doc = json.loads(out_json.read_text())
    assert doc["delta"] == 0.6
    rungs = doc["per_epsilon"]
    assert len(rungs) == 2
    assert all(0.0 <= r["p_hat"] <= 1.0 for r in rungs)
    assert doc["audit"]["agree"] is True


def test_reruns_are_byte_identical(tmp_path, capsys):
    def coeffs(name):
        p = tmp_path / name
        code, _, _ = run(capsys, "coeffs", "--config", "doublewell",
                         "-o", str(p))
        assert code == 0
        return p.read_bytes()

    assert coeffs("a.csv") == coeffs("b.csv")

    def sim(name, threads):
        p = tmp_path / name
        code, _, _ = run(capsys, "simulate", "--config", "harmonic",
                         "--epsilon", "0.0625", "--beta", "0.5",
                         "--horizon", "0.5", "--x", X0, "--n-traj", "4",
                         "--seed", "7", "--threads", threads, "-o", str(p))
        assert code == 0
        return p.read_bytes()

    # also across worker counts: the noise stream is counter-based
    assert sim("s1.csv", "1") == sim("s2.csv", "4")


def test_unknown_edge_exits_two(capsys):
    code, _, err = run(capsys, "action", "minimize", "--config", "harmonic",
                       "--start", "0:1.0", "--target", "99:2.0",
                       "--horizon", "1.0")
    assert code == 2
    assert "99" in err


def test_out_of_span_level_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,edge_id,h\n0.0,0,1.0\n1.0,0,99.0\n")
    code, _, err = run(capsys, "action", "eval", "--config", "harmonic",
                       "--path", str(bad))
    assert code == 1
    assert err.strip()
