import csv
import io
import json

import numpy as np
import pytest

from willsfn import bodies as B
from willsfn import checks as C
from willsfn.cli import main, reproduce_jobs
from willsfn.config import DEFAULT_SEED


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


@pytest.fixture
def cube3(tmp_path):
    return write(tmp_path, "cube3.json", B.Box.cube(3).to_dict())


def test_default_seed_is_the_published_constant():
    import hashlib
    digest = hashlib.sha256(b"0x5EED_W1LL5").digest()
    assert DEFAULT_SEED == int.from_bytes(digest[:8], "big")


def test_compute_point(tmp_path, capsys):
    path = write(tmp_path, "point.json", {"dim": 2, "kind": "point", "location": [0.5, 1.0]})
    assert main(["compute", "--body", path]) == 0
    row = json.loads(capsys.readouterr().out)[0]
    assert row["W"] == 1.0 and row["vol"] == 0.0 and row["cir"] == 0.0


def test_compute_cube(cube3, capsys):
    assert main(["compute", "--body", cube3, "--samples", "2000"]) == 0
    row = json.loads(capsys.readouterr().out)[0]
    assert row["W"] == pytest.approx(8.0, rel=1e-12)
    assert row["V"] == pytest.approx([1, 3, 3, 1])
    assert row["cir"] == pytest.approx(np.sqrt(3) / 2)


def test_check_mcmullen_on_cube(cube3, capsys):
    assert main(["check", "--check", "mcmullen_two_sided", "--body", cube3, "--samples", "20000"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) == 1 and rows[0]["verdict"] == "holds"
    assert tuple(rows[0]) == C.REPORT_COLUMNS


def test_unexpected_violation_exits_1(capsys):
    # W of balls is convex in the radius, so plain concavity (exponent 1) fails with no expectation set
    code = main(["check", "--check", "12", "--dim", "2", "--param", "exponent=1", "--samples", "1000"])
    assert code == 1
    assert "UNEXPECTED" in capsys.readouterr().err


def test_expected_violation_exits_0():
    assert main(["check", "--check", "12", "--dim", "3", "--samples", "1000"]) == 0


def test_inconclusive_exits_2(tmp_path):
    # cube and tall box share a shadow; at lam = 1/2 both sides are equal
    a = write(tmp_path, "a.json", B.Box.cube(2).to_dict())
    b = write(tmp_path, "b.json", B.Box([[0, 1], [0, 2]]).to_dict())
    assert main(["check", "--check", "15", "--body", a, "--body", b, "--samples", "1000",
                 "--param", "lams=[0.5]"]) == 2


def test_informational_entries_do_not_change_exit_code(tmp_path, capsys):
    a = write(tmp_path, "a.json", B.Ball(2).to_dict())
    b = write(tmp_path, "b.json", B.Box.cube(2).to_dict())
    assert main(["check", "--check", "31", "--check", "32", "--body", a, "--body", b,
                 "--samples", "2000"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert {r["verdict"] for r in rows} == {"informational"}


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["check", "--check", "nope", "--samples", "2000"],
    ["check", "--check", "1", "--samples", "10"],
    ["check", "--check", "1"],
    ["compute", "--body", "x.json", "--seed", "-1"],
    ["fuzz", "--dim", "1"],
])
def test_usage_errors_exit_64(argv):
    assert main(argv) == 64


def test_malformed_body_exits_65(tmp_path, capsys):
    bad = write(tmp_path, "bad.json", {"dim": 2, "kind": "scale", "factor": 2,
                                       "body": {"dim": 2, "kind": "ball", "radius": -1}})
    assert main(["compute", "--body", bad]) == 65
    err = capsys.readouterr().err
    assert "bad.json" in err and "body.radius" in err
    missing = str(tmp_path / "missing.json")
    assert main(["compute", "--body", missing]) == 65
    junk = tmp_path / "junk.json"
    junk.write_text("{not json")
    assert main(["compute", "--body", str(junk)]) == 65


@pytest.mark.parametrize("body", [
    B.Box([[0, 1], [-1, 2], [0, 0.5]]),
    B.PolytopeV(np.random.default_rng(0).normal(size=(8, 3))),
    B.MinkowskiSum(B.Ellipsoid([1.0, 0.5, 2.0]), B.Translate(B.Ball(3, 0.3), [1.0, 0.0, 0.0])),
    B.Intersection(B.Ball(3), B.Negate(B.Scale(B.Box.cube(3), 1.5))),
])
def test_dump_normalized_round_trip(tmp_path, capsys, body):
    path = write(tmp_path, "b.json", body.to_dict())
    assert main(["compute", "--body", path, "--dump-normalized"]) == 0
    again = B.body_from_dict(json.loads(capsys.readouterr().out))
    u = np.random.default_rng(1).normal(size=(100, 3))
    assert np.allclose(again.support(u), body.support(u), rtol=1e-12, atol=1e-12)


def test_csv_output(cube3, tmp_path):
    out = tmp_path / "r.csv"
    assert main(["check", "--check", "21", "--check", "22", "--body", cube3, "--samples", "2000",
                 "--format", "csv", "--out", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert [r["check_id"] for r in rows] == ["rs_diff_2n", "rs_diff_binom"]
    assert tuple(rows[0]) == C.REPORT_COLUMNS


def test_list(capsys):
    assert main(["list"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 32 and "informational" in lines[-1]


def test_reproduce(capsys):
    assert main(["reproduce"]) == 0
    out = capsys.readouterr().out
    assert "MISMATCH" not in out
    assert "0.825664184945701" in out
    assert {i for i, _ in reproduce_jobs()} == {12, 13, 14, 19, 23}


def test_check_output_is_deterministic(cube3, capsys):
    argv = ["check", "--check", "1", "--check", "21", "--body", cube3, "--samples", "5000", "--workers", "2"]
    main(argv)
    a = capsys.readouterr().out
    main(argv)
    assert capsys.readouterr().out == a
