import io
import json
import subprocess
import sys
from importlib import resources

import jsonschema
import numpy as np
import pytest

from sepdecide.cli import main
from sepdecide.states import read_state

SCHEMA = json.loads(resources.files("sepdecide").joinpath("schemas/verdict.json").read_text())


def _validate(obj, part=None):
    # sub-outputs are checked against one of the shared definitions
    schema = SCHEMA
    if part is not None:
        schema = {"$schema": SCHEMA["$schema"], "$defs": SCHEMA["$defs"], "$ref": f"#/$defs/{part}"}
    jsonschema.validate(obj, schema)


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_schema_is_valid():
    jsonschema.Draft202012Validator.check_schema(SCHEMA)


def test_gen_bell_then_decide(tmp_path, capsys):
    path = tmp_path / "s.json"
    assert _run(capsys, "gen", "--bell", "phi+", "--out", str(path))[0] == 0
    code, out, _ = _run(capsys, "decide", "--state", str(path), "--json")
    assert code == 1
    verdict = json.loads(out)
    assert verdict["kind"] == "Entangled"
    assert abs(verdict["certificate"]["min_eigenvalue"] + 0.5) < 1e-12
    _validate(verdict)


def test_decide_max_mixed(tmp_path, capsys):
    path = tmp_path / "maxmixed22.json"
    _run(capsys, "gen", "--max-mixed", "2", "2", "--out", str(path))
    code, out, _ = _run(capsys, "decide", "--state", str(path), "--json")
    assert code == 0
    verdict = json.loads(out)
    assert verdict["kind"] == "Separable"
    assert verdict["certificate"]["atom_count"] == 4
    _validate(verdict)
    code, out, _ = _run(capsys, "decide", "--state", str(path))
    assert code == 0 and "Separable" in out


def test_decide_border_and_budget(tmp_path, capsys):
    path = tmp_path / "iso.json"
    _run(capsys, "gen", "--isotropic", str(1 / 3), "--out", str(path))
    code, out, _ = _run(capsys, "decide", "--state", str(path), "--eta", "0.2", "--json")
    assert code == 2
    verdict = json.loads(out)
    assert verdict["kind"] == "Border" and verdict["certificate"]["eta"] == 0.2
    _validate(verdict)
    code, out, _ = _run(capsys, "decide", "--state", str(path), "--budget", "0", "--json")
    assert code == 3
    _validate(json.loads(out))


def test_stdin_state(monkeypatch, capsys):
    _, text, _ = _run(capsys, "gen", "--bell", "psi-")
    monkeypatch.setattr(sys, "stdin", io.StringIO(text))
    code, out, _ = _run(capsys, "ppt", "--state", "-", "--json")
    assert code == 0
    res = json.loads(out)
    assert res["result"] == "NPT"
    _validate(res, "ppt_output")


def test_gen_round_trip_through_consumers(tmp_path, capsys):
    families = [
        ["--bell", "phi-"],
        ["--isotropic", "0.2"],
        ["--werner", "0.3", "--n", "3"],
        ["--max-mixed", "2", "3"],
        ["--random-separable"],
    ]
    pts = tmp_path / "pts.jsonl"
    for i, fam in enumerate(families):
        path = tmp_path / f"s{i}.json"
        assert _run(capsys, "--seed", "5", "gen", *fam, "--out", str(path))[0] == 0
        rho = read_state(path.read_text())
        n, m = rho.dims.n, rho.dims.m
        _, lines, _ = _run(capsys, "enumerate", "--dims", str(n), str(m), "--count", "40")
        pts.write_text(lines)
        assert _run(capsys, "ppt", "--state", str(path))[0] == 0
        code, out, _ = _run(capsys, "dps", "--state", str(path), "--level", "2", "--max-iter", "30", "--json")
        assert code == 0
        _validate(json.loads(out), "dps_output")
        code, out, _ = _run(capsys, "hull-check", "--state", str(path), "--points", str(pts), "--json")
        assert code == 0
        _validate(json.loads(out), "hull_check_output")
        code, out, _ = _run(capsys, "decide", "--state", str(path), "--budget", "200", "--json")
        assert code in (0, 1, 2, 3)
        _validate(json.loads(out))


def test_enumerate_output(capsys):
    code, out, _ = _run(capsys, "enumerate", "--dims", "2", "2", "--count", "10", "--include-skipped")
    assert code == 0
    recs = [json.loads(line) for line in out.splitlines()]
    assert [r["index"] for r in recs] == list(range(10))
    for r in recs:
        _validate(r, "enumerate_record")
    assert recs[0]["state"]["a"]["re"] == [1.0, 0.0]
    _, out, _ = _run(capsys, "enumerate", "--dims", "2", "2", "--count", "1000", "--height-max", "1")
    assert len(out.splitlines()) == 4


def test_hull_check_modes(tmp_path, capsys):
    pts = tmp_path / "pts.jsonl"
    _, lines, _ = _run(capsys, "enumerate", "--dims", "2", "2", "--count", "4")
    pts.write_text(lines)
    state = tmp_path / "s.json"
    _run(capsys, "gen", "--max-mixed", "2", "2", "--out", str(state))
    for mode in ("facet", "bary"):
        code, out, _ = _run(capsys, "hull-check", "--state", str(state), "--points", str(pts), "--mode", mode, "--json")
        res = json.loads(out)
        assert code == 0 and res["verdict"] == "In"
        assert np.allclose(res["weights"], 0.25)
    code, out, _ = _run(capsys, "hull-check", "--state", str(state), "--points", str(pts), "--mode", "grow")
    assert "inside" in out


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as err:
        main(["decide", "--bogus"])
    assert err.value.code == 64
    assert "usage" in capsys.readouterr().err
    for argv in (
        ["decide", "--state", "x.json", "--eta", "1.5"],
        ["decide", "--state", "x.json", "--budget", "-3"],
        ["enumerate", "--dims", "1", "2", "--count", "3"],
        ["gen"],
        [],
    ):
        with pytest.raises(SystemExit) as err:
            main(argv)
        assert err.value.code == 64, argv
    capsys.readouterr()


def test_io_and_validation_errors(tmp_path, capsys):
    code, _, err = _run(capsys, "decide", "--state", str(tmp_path / "missing.json"))
    assert code == 74 and "I/O" in err
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dims": [2, 2], "re": np.eye(4).tolist(), "im": np.zeros((4, 4)).tolist()}))
    code, _, err = _run(capsys, "ppt", "--state", str(bad))
    assert code == 65 and "TraceNotOne" in err
    bad.write_text("{]")
    assert _run(capsys, "ppt", "--state", str(bad))[0] == 65
    code, _, _ = _run(capsys, "gen", "--bell", "phi+", "--out", str(tmp_path / "nodir" / "s.json"))
    assert code == 74


def test_identical_invocations_are_byte_identical(tmp_path, capsys):
    path = tmp_path / "s.json"
    _run(capsys, "--seed", "11", "gen", "--random-separable", "--max-den", "2", "--out", str(path))
    outs = [_run(capsys, "decide", "--state", str(path), "--json")[1] for _ in range(2)]
    assert outs[0] == outs[1]
    gens = [_run(capsys, "--seed", "11", "gen", "--random-separable")[1] for _ in range(2)]
    assert gens[0] == gens[1]


def test_module_entry_point(tmp_path):
    path = tmp_path / "s.json"
    subprocess.run([sys.executable, "-m", "sepdecide", "gen", "--bell", "phi+", "--out", str(path)], check=True)
    proc = subprocess.run([sys.executable, "-m", "sepdecide", "decide", "--state", str(path)], capture_output=True, text=True)
    assert proc.returncode == 1
    assert "Entangled" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "sepdecide", "decide", "--nope"], capture_output=True, text=True)
    assert proc.returncode == 64 and "usage" in proc.stderr
