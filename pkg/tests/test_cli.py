import json

import pytest

from lgeom.cli import main
from lgeom.model import CAPS, model_to_dict


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_eval_examples(capsys):
    assert run(capsys, "eval", "z2", "-X", "x", "x == x") == (0, "2/2 points: (0) (1)\n", "")
    code, out, _ = run(capsys, "eval", "z2", "-X", "x", "exists y. mul(y,y) == x")
    assert (code, out) == (0, "(0)\n")
    code, out, _ = run(capsys, "eval", "z3", "-X", "x", "x == e & !(x == e)")
    assert (code, out) == (0, "(none)\n")


def test_eval_errors(capsys):
    code, _, err = run(capsys, "eval", "z2", "-X", "x", "x == ")
    assert code == 2 and "parse error" in err
    code, _, err = run(capsys, "eval", "z2", "-X", "x", "P(x)")
    assert code == 2
    code, _, err = run(capsys, "eval", "nosuchmodel", "x == x")
    assert code == 2
    code, _, err = run(capsys, "frobnicate")
    assert code == 2
    code, _, _ = run(capsys)
    assert code == 2


def test_eval_model_file(capsys, tmp_path, models):
    path = tmp_path / "mine.json"
    path.write_text(json.dumps(model_to_dict(models("z2p"))))
    code, out, _ = run(capsys, "eval", str(path), "-X", "x", "P(x)")
    assert (code, out) == (0, "(1)\n")
    bad = tmp_path / "bad.json"
    bad.write_text('{"carrier": 2, "ops": {"f": {"arity": 1, "table": [0, 5]}}}')
    code, _, err = run(capsys, "eval", str(bad), "x == x")
    assert code == 2 and "ops.f.table[1]" in err


def test_closure_examples(capsys):
    code, out, _ = run(capsys, "closure", "z3", "-X", "x", "--points", "1", "--mode", "logical")
    assert (code, out) == (0, "{1,2}\n")
    code, out, _ = run(capsys, "closure", "z3", "-X", "x", "--formulas", "mul(x,x)==x",
                       "--mode", "algebraic")
    assert (code, out) == (0, "{0}\n")
    code, out, _ = run(capsys, "closure", "z3", "-X", "x")
    assert code == 0 and out.splitlines()[0] == "{0,1,2}" and "note:" in out
    code, out, _ = run(capsys, "closure", "z2", "-X", "x,y", "--points", "0,0;1,1",
                       "--mode", "algebraic")
    assert out == "{(0,0),(1,1)}\n"


def test_closure_errors(capsys):
    assert run(capsys, "closure", "z3", "-X", "x", "--points", "7")[0] == 2
    assert run(capsys, "closure", "z3", "-X", "x", "--formulas", "!(x == e)",
               "--mode", "algebraic")[0] == 2
    assert run(capsys, "closure", "z3", "-X", "x", "-X", "y", "--points", "1")[0] == 2


def test_compare_examples(capsys):
    code, out, _ = run(capsys, "compare", "z3", "z3", "-X", "x")
    assert code == 0 and out.splitlines()[0] == "ISOTYPIC (identity)"
    code, out, _ = run(capsys, "compare", "z3", "z3-relabeled", "-X", "x")
    assert code == 0 and out.startswith("ISOTYPIC, witness: 0->")
    assert "LG-EQUIVALENT at rank 7" in out
    code, out, _ = run(capsys, "compare", "z4", "v4", "-X", "x")
    assert code == 1
    assert out.splitlines()[0] == "NOT ISOTYPIC, separating: !(x == inv(x)) (point (1) of model 1)"
    assert "NOT LG-EQUIVALENT" in out


def test_compare_sweep_and_json(capsys):
    code, out, _ = run(capsys, "--json", "compare", "z4", "v4", "--sweep", "2")
    doc = json.loads(out)
    assert code == 1
    assert [r["sort"] for r in doc["results"]] == [["x"], ["x", "y"]]
    assert all(r["agree"] for r in doc["results"])
    assert run(capsys, "compare", "z2", "z2p", "-X", "x")[0] == 2


def test_kb_examples(capsys):
    code, out, _ = run(capsys, "kb", "z2", "-X", "x")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "sort (x): 4 definable sets, 2 orbits"
    assert len(lines) == 5
    code, out, _ = run(capsys, "kb-iso", "z3", "z3-relabeled", "-X", "x", "-X", "x,y")
    assert (code, out) == (0, "ISOMORPHIC (isotypic route)\n")
    code, out, _ = run(capsys, "kb-iso", "z4", "v4", "-X", "x")
    assert code == 1
    assert out == "NOT ISOMORPHIC: content-lattice sizes differ at sort (x): 8 vs 4\n"


def test_check_examples(capsys):
    code, out, _ = run(capsys, "check", "z2", "--suite", "halmos", "--instances", "100")
    assert code == 0 and out.splitlines()[-1] == "all pass"
    code, out, _ = run(capsys, "check", "z3", "--suite", "diagrams", "--depth", "2", "-X", "x")
    assert code == 0 and "cells" in out and out.splitlines()[-1] == "all pass"
    code, out, _ = run(capsys, "check", "q3", "--suite", "anti")
    assert code == 0
    assert run(capsys, "check", "z3", "--suite", "nonsense")[0] == 2


def test_cap_exceeded(capsys):
    before = CAPS.points
    code, _, err = run(capsys, "--cap-points", "4", "eval", "z3", "-X", "x,y", "x == y")
    assert code == 3 and "cap" in err
    assert CAPS.points == before
    assert run(capsys, "--cap-points", "0", "eval", "z3", "x == x")[0] == 2


def test_json_is_stable(capsys):
    a = run(capsys, "--json", "kb", "z3", "-X", "x")[1]
    b = run(capsys, "--json", "kb", "z3", "-X", "x")[1]
    assert a == b
    assert json.loads(a)["sorts"][0]["content_size"] == 4
