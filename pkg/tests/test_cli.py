import json
import math
import subprocess
import sys

import numpy as np
import pytest

from switchstab.classifier import rc_details, rc_factor
from switchstab.cli import main
from switchstab.normal_form import rc_pair

RC_PARAMS = (2.25, 1.9, 0.33)
COMMUTING = {"a": [[-1.0, 0.0], [0.0, -2.0]], "b": [[-3.0, 0.0], [0.0, -0.5]]}
CC22 = {"a": [[-0.3, -1.0], [1.0, -0.3]], "b": [[-0.4, -2.0], [0.5, -0.4]]}


def _write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_classify_commuting(tmp_path, capsys):
    code, out, _ = _run(capsys, "classify", "--pair", _write(tmp_path, "p.json", COMMUTING))
    data = json.loads(out)
    assert code == 0
    assert data[0]["outcome"] == "GUES" and data[0]["subcase"] == "Commuting"


def test_inline_matrices(capsys):
    code, out, _ = _run(capsys, "invariants", "--a=-0.3,-1,1,-0.3", "--b", "[[-0.4,-2],[0.5,-0.4]]")
    assert code == 0 and isinstance(json.loads(out), dict)


def test_worst_first_switch(tmp_path, capsys):
    a, b = rc_pair(*RC_PARAMS)
    d = rc_details(*RC_PARAMS)
    pair = _write(tmp_path, "rc.json", {"a": a.tolist(), "b": b.tolist()})
    summary = tmp_path / "s.json"
    code, out, _ = _run(capsys, "worst", "--pair", pair, "--summary", str(summary))
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "t,x1,x2,field"
    rows = [line.split(",") for line in lines[1:]]
    first = next(i for i, r in enumerate(rows) if r[3] != rows[0][3])
    assert float(rows[first][0]) == pytest.approx(0.5 * math.log(d.m_plus / d.m_minus), abs=1e-8)
    info = json.loads(summary.read_text())
    assert info["switch_times"][0] == pytest.approx(d.t1, abs=1e-8)
    assert info["contraction"] == pytest.approx(rc_factor(*RC_PARAMS), abs=1e-8)


def test_degree_growth_table(capsys):
    code, out, _ = _run(capsys, "experiment-theorem2", "--kappa", "1.25", "--steps", "8",
                        "--cap", "24")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "k,rho,rho_cc,d_min"
    d = [math.inf if r.split(",")[3] == "exceeds_cap" else int(r.split(",")[3]) for r in lines[1:]]
    assert len(d) == 8 and d == sorted(d) and d[0] == 2


def test_synth_verify_round_trip(tmp_path, capsys):
    pair = _write(tmp_path, "p.json", CC22)
    for method in ("levelset", "poly", "polytope"):
        clf_path = tmp_path / f"{method}.json"
        curve = tmp_path / f"{method}.csv"
        code, _, _ = _run(capsys, "synth", "--pair", pair, "--method", method, "-o",
                          str(clf_path), "--curve", str(curve))
        assert code == 0 and curve.read_text().startswith("theta,x1,x2\n")
        code, out, _ = _run(capsys, "verify", str(clf_path), "--trajectories", "10",
                            "--seed", "1")
        assert code == 0 and json.loads(out)["ok"]


def test_verify_fails_on_other_pair(tmp_path, capsys):
    pair = _write(tmp_path, "p.json", CC22)
    clf_path = tmp_path / "c.json"
    _run(capsys, "synth", "--pair", pair, "--method", "polytope", "-o", str(clf_path))
    unstable = _write(tmp_path, "u.json", {"a": [[0.1, -1.0], [1.0, 0.1]],
                                           "b": [[0.1, -2.0], [0.5, 0.1]]})
    code, out, _ = _run(capsys, "verify", str(clf_path), "--pair", unstable)
    assert code == 1 and not json.loads(out)["ok"]


def test_simulate_requires_seed_and_is_deterministic(tmp_path, capsys):
    pair = _write(tmp_path, "p.json", CC22)
    code, _, err = _run(capsys, "simulate", "--pair", pair)
    assert code == 2 and "--seed" in err
    outs = [_run(capsys, "simulate", "--pair", pair, "--seed", "7", "--kind", "relaxed")[1]
            for _ in range(2)]
    assert outs[0] == outs[1] and outs[0].startswith("t,x1,x2,u\n")
    code, out, _ = _run(capsys, "simulate", "--pair", pair, "--seed", "7", "--trials", "20",
                        "--t-end", "30")
    assert code == 0 and json.loads(out)["decay_observed"] == 1.0


def test_byte_identical_subprocess(tmp_path):
    pair = _write(tmp_path, "p.json", CC22)
    cmd = [sys.executable, "-m", "switchstab", "value", "--pair", pair, "--n-theta", "256"]
    runs = [subprocess.run(cmd, capture_output=True, check=True).stdout for _ in range(2)]
    assert runs[0] == runs[1] and runs[0].startswith(b"theta,v,r\n")
    assert b"\r\n" not in runs[0]


@pytest.mark.parametrize("argv, code", [
    (["classify", "--a", "[[1,2],[3]]", "--b", "[[1,0],[0,1]]"], 2),
    (["classify", "--a", "[[\"x\",0],[0,-1]]", "--b", "[[-1,0],[0,-1]]"], 2),
    (["classify"], 2),
    (["classify", "--a", "[[-1,1],[0,-1]]", "--b", "[[-2,0],[1,-2]]"], 3),
    (["worst", "--a", "[[-1,0],[0,-2]]", "--b", "[[-3,0],[0,-0.5]]"], 3),
    (["value", "--a", "[[0.1,-1],[1,0.1]]", "--b", "[[0.1,-2],[0.5,0.1]]"], 2),
    (["degree-scan", "--a", "[[-1,0],[0,-2]]", "--b", "[[-3,0],[0,-0.5]]",
      "--max-degree", "0"], 2),
])
def test_exit_codes(argv, code, capsys):
    assert _run(capsys, *argv)[0] == code


def test_unsupported_message_points_to_simulate(capsys):
    code, _, err = _run(capsys, "worst", "--a", "[[-1,0],[0,-2]]", "--b", "[[-3,0],[0,-0.5]]")
    assert code == 3 and "simulate" in err


def test_config_file(tmp_path, capsys):
    pair = _write(tmp_path, "p.json", CC22)
    cfg = _write(tmp_path, "cfg.json", {"n_theta": 128})
    code, out, _ = _run(capsys, "--config", cfg, "value", "--pair", pair)
    assert code == 0 and len(out.splitlines()) == 129
    bad = _write(tmp_path, "bad.json", {"no_such_key": 1})
    assert _run(capsys, "--config", bad, "value", "--pair", pair)[0] == 2


def test_degree_scan_json(capsys):
    code, out, _ = _run(capsys, "degree-scan", "--a=-1,0,0,-2", "--b=-3,0,0,-0.5",
                        "--max-degree", "4")
    assert code == 0 and json.loads(out)["d_min"] == 2


def test_normal_form_list_output(tmp_path, capsys):
    a, b = rc_pair(*RC_PARAMS)
    pairs = [{"a": a.tolist(), "b": b.tolist(), "label": "rc"}, CC22]
    code, out, _ = _run(capsys, "normal-form", "--pair", _write(tmp_path, "l.json", pairs))
    data = json.loads(out)
    assert code == 0 and len(data) == 2 and data[0]["label"] == "rc"
    assert np.isfinite(data[1]["params"]["rho_a"])
