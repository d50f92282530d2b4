"""The jlstrata command line: outputs, determinism, exit codes."""

import csv
import io
import json
import subprocess
import sys

import pytest

from jlstrata import dieudonne_sim as ds
from jlstrata.cli import run
from jlstrata.gf import field


def invoke(tmp_path, cmd, cfg, *extra):
    path = tmp_path / "cfg.json"
    path.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
    out, err = io.StringIO(), io.StringIO()
    code = run([cmd, "--config", str(path), *extra], out, err)
    return code, out.getvalue(), err.getvalue()


def kv(text):
    out = {}
    for line in text.splitlines():
        if line and not line.startswith(" "):
            parts = line.split(None, 1)
            out[parts[0]] = parts[1].strip() if len(parts) > 1 else ""
    return out


D4 = {"shape": [[1, 4]]}


def test_tables_has_81_rows(tmp_path):
    code, out, _ = invoke(tmp_path, "tables", D4)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0][:3] == ["I", "J", "T"]
    assert len(rows) == 1 + 81


def test_tables_row_count_with_sigma(tmp_path):
    cfg = {"shape": [[1, 3]], "sigma": {"members": [1], "finite_count": 1}}
    code, out, _ = invoke(tmp_path, "tables", cfg)
    assert code == 0
    assert len(list(csv.reader(io.StringIO(out)))) == 1 + 3 ** 2


def test_collapsed_tables_account_for_every_row(tmp_path):
    code, out, _ = invoke(tmp_path, "tables", D4, "--collapse-rotations")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert sum(int(r["orbit_size"]) for r in rows) == 81
    assert len(rows) < 81


def test_output_is_deterministic(tmp_path):
    cfg = dict(D4, I=[2, 3, 4], J=[1, 2, 3], T=[1, 2], R=[])
    first = invoke(tmp_path, "diagram", cfg)
    second = invoke(tmp_path, "diagram", cfg)
    assert first == second
    assert invoke(tmp_path, "tables", D4) == invoke(tmp_path, "tables", D4)


def test_diagram_non_example(tmp_path):
    cfg = dict(D4, I=[2, 3, 4], J=[1, 2, 3], T=[1, 2], R=[])
    code, out, _ = invoke(tmp_path, "diagram", cfg)
    assert code == 0
    rep = kv(out)
    assert rep["status"] == "incomplete"
    assert rep["unfilled"] == "(1, θ₁)"
    assert "D(1, θ₁) = ?" in out


def test_diagram_canonical_completes(tmp_path):
    code, out, _ = invoke(tmp_path, "diagram", dict(D4, I=[2, 3, 4], J=[1, 2, 3]))
    assert code == 0 and kv(out)["status"] == "complete"


def test_jl_worked_example(tmp_path):
    cfg = {"shape": [[1, 12]], "I": [1, 2, 3, 5, 6, 8, 9, 10, 12],
           "J": [1, 2, 4, 5, 6, 7, 9, 10, 11, 12]}
    code, out, _ = invoke(tmp_path, "jl", cfg)
    assert code == 0
    rep = kv(out)
    assert rep["T"] == "{2,4,5,7,9,11,12}"
    assert rep["R"] == "{3,7,8}"


def test_go_and_formats(tmp_path):
    for fmt in ("txt", "md", "csv"):
        code, out, _ = invoke(tmp_path, "go", dict(D4, T=[1, 2]), "--format", fmt)
        assert code == 0 and out


def test_degenerate_cycle_exit_3(tmp_path):
    code, _, err = invoke(tmp_path, "jl", dict(D4, sigma={"members": "all"}, I=[], J=[]))
    assert code == 3
    assert "degenerate cycle" in err


def test_parse_errors_exit_2(tmp_path):
    assert invoke(tmp_path, "jl", "{not json")[0] == 2
    assert invoke(tmp_path, "jl", {"shape": [[0, 1]], "I": [], "J": []})[0] == 2
    assert invoke(tmp_path, "jl", dict(D4, I=[9], J=[]))[0] == 2
    code, _, err = invoke(tmp_path, "jl", {"shape": [[1, 3]], "sigma": {"members": [1]}, "I": [], "J": []})
    assert code == 2 and "even" in err
    assert invoke(tmp_path, "jl", dict(D4, J=[]))[0] == 2
    assert run(["nope", "--config", "x"], io.StringIO(), io.StringIO()) == 2
    assert run(["jl", "--config", str(tmp_path / "missing.json")], io.StringIO(), io.StringIO()) == 2


def test_semantic_error_exit_3(tmp_path):
    code, _, err = invoke(tmp_path, "jl", dict(D4, I=[1], J=[2]))
    assert code == 3 and "not a stratum pair" in err


def test_raynaud_command(tmp_path):
    cfg = {"field": {"p": 3, "m": 1}, "f": 2, "character": 5}
    code, out, _ = invoke(tmp_path, "raynaud", cfg)
    assert code == 0 and kv(out)["expansion"] == "2,1"
    cfg = {"field": {"p": 2, "m": 2}, "f": 4, "support": [0, 1, 2, 3],
           "s": [0, 2, 0, 3], "t": [1, 0, 3, 0], "sub": [1, 2]}
    code, _, err = invoke(tmp_path, "raynaud", cfg)
    assert code == 3 and "must vanish" in err
    cfg["sub"] = [0, 1, 2, 3]
    code, out, _ = invoke(tmp_path, "raynaud", cfg)
    assert code == 0 and kv(out)["order"] == "4" and kv(out)["dual.s"] == "1,0,3,0"


def test_dmod_command(tmp_path):
    code, out, _ = invoke(tmp_path, "dmod", {"constructor": "supersingular", "field": {"p": 2}})
    assert code == 0 and kv(out)["hasse.p0.t0.i1"] == "vanishes"
    code, out, _ = invoke(tmp_path, "dmod", {"constructor": "ordinary", "shape": [[2, 2]]})
    assert code == 0 and kv(out)["go_type"] == "{}"


def test_dmod_from_dump(tmp_path):
    D, filt = ds.from_lines(field(2, 2), [(1, 0), (0, 1), (1, 1)], [(1, 0), (1, 2), (1, 1)])
    dump = tmp_path / "m.txt"
    dump.write_text(ds.dump(D, filt))
    code, out, _ = invoke(tmp_path, "dmod", {"constructor": "dump", "path": str(dump)})
    assert code == 0
    assert kv(out)["go_type"] == kv(invoke(tmp_path, "dmod", {
        "constructor": "lines", "field": {"p": 2, "m": 2},
        "L": [[1, 0], [0, 1], [1, 1]], "M": [[1, 0], [1, 2], [1, 1]]})[1])["go_type"]


def test_localmodel_command(tmp_path):
    code, out, _ = invoke(tmp_path, "localmodel", {"field": {"p": 2}, "d": 2, "i": 1, "j": 1})
    assert code == 0 and kv(out)["snf"] == "1,1,y²,y²" and kv(out)["projective"] == "false"
    code, out, _ = invoke(tmp_path, "localmodel", {"mode": "snf", "n": 3,
                                                   "matrix": [[[0, 1], 0], [0, 1]]})
    assert code == 0 and kv(out)["snf"] == "1,y"
    code, out, _ = invoke(tmp_path, "localmodel", {"mode": "pair", "d": 2,
                                                   "generators": [[[0, 1], []], [[], [0, 1]]]})
    assert code == 0 and kv(out)["pair"] == "(1,1)"
    assert invoke(tmp_path, "localmodel", {"d": 4, "i": 3, "j": 1})[0] == 3
    assert invoke(tmp_path, "localmodel", {"mode": "bogus"})[0] == 2


def test_console_script_entry_point(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(D4))
    proc = subprocess.run([sys.executable, "-m", "jlstrata.cli", "tables", "--config", str(path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.count("\n") == 82
