import csv
import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from helpers import random_instance
from pespsplit.cli import main
from pespsplit.engine import run
from pespsplit.instance import InstanceError
from pespsplit.io import (ActivityParseError, cuts_to_json, dump_point, format_activities, load_cuts,
                          load_point, parse_activities, parse_activities_text, write_activities)
from pespsplit.samples import fig1_raw


def test_parse_single_line():
    inst = parse_activities_text("1; 3; 7; 2; 5; 11\n", 10)
    a = inst.arc(1)
    assert (a.tail, a.head, a.lower, a.upper, a.weight) == (3, 7, 2, 5, 11)
    assert inst.nodes == (3, 7)


def test_comments_and_extra_fields():
    text = "# header\n# another\n\n1; 1; 2; 0; 4; 3; extra; fields\n2;2;1;1;9;1/2\n"
    inst = parse_activities_text(text, 10)
    assert len(inst.arcs) == 2 and inst.arc(2).weight == Fraction(1, 2)


def test_upper_below_lower():
    with pytest.raises(ActivityParseError, match="upper < lower at line 1"):
        parse_activities_text("1; 3; 7; 5; 2; 11", 10)


@pytest.mark.parametrize("text,line,col", [
    ("1; 2; 3; 0; 1; 1\n1; 3; 4; 0; 1; 1", 2, 1),
    ("1; x; 3; 0; 1; 1", 1, 2),
    ("1; 2; 3; 0; 1; w", 1, 6),
    ("1; 0; 3; 0; 1; 1", 1, 2),
    ("# ok\n1; 2; 3; 0; 1", 2, None),
])
def test_parse_errors_positions(text, line, col):
    with pytest.raises(ActivityParseError) as exc:
        parse_activities_text(text, 10)
    assert exc.value.line == line and exc.value.column == col


def test_bad_period():
    with pytest.raises(InstanceError):
        parse_activities_text("1; 1; 2; 0; 1; 1", 1)


def test_roundtrip_fig1(tmp_path):
    inst = fig1_raw()
    path = tmp_path / "fig1.txt"
    write_activities(inst, path)
    back = parse_activities(path, 10)
    assert back.arcs == inst.arcs and back.nodes == inst.nodes and back.name == "fig1"


@given(st.integers(0, 10_000))
def test_roundtrip_random(seed):
    rng = random.Random(seed)
    inst = random_instance(rng, rng.randint(2, 6), rng.randint(0, 4))
    back = parse_activities_text(format_activities(inst), inst.period)
    assert back.arcs == inst.arcs and back.objective_offset == inst.objective_offset


def test_cuts_and_points_json(tmp_path):
    inst = fig1_raw()
    rep = run(inst)
    p = tmp_path / "cuts.json"
    p.write_text(json.dumps(cuts_to_json(rep.cuts)))
    assert load_cuts(p) == rep.cuts
    p.write_text(json.dumps(rep.to_json()))
    assert load_cuts(p) == rep.cuts
    q = tmp_path / "x.json"
    q.write_text(json.dumps(dump_point({1: Fraction(1, 3), 2: 2.5})))
    assert load_point(q) == {1: Fraction(1, 3), 2: Fraction(5, 2)}


@pytest.fixture
def fig1_file(tmp_path):
    path = tmp_path / "fig1.txt"
    write_activities(fig1_raw(), path)
    return path


def test_cli_solve(fig1_file, tmp_path, capsys):
    log, rep = tmp_path / "log.csv", tmp_path / "rep.json"
    assert main(["solve", str(fig1_file), "--period", "10", "--log", str(log), "--json", str(rep)]) == 0
    out = capsys.readouterr().out
    assert "bound (w^Tx) 210.000000" in out
    data = json.loads(rep.read_text())
    for key in ("instance", "period", "mu", "status", "bound_wx", "bound_slack", "cuts_total",
                "cuts_exact", "runtime_s"):
        assert key in data
    rows = list(csv.DictReader(open(log)))
    t = [float(r["wall_time_s"]) for r in rows]
    b = [float(r["lp_bound_wx"]) for r in rows]
    assert all(y > x for x, y in zip(t, t[1:])) and all(y >= x - 1e-9 for x, y in zip(b, b[1:]))


def test_cli_solve_options(fig1_file, capsys):
    assert main(["solve", str(fig1_file), "--period", "10", "--mu", "2", "--alpha-order", "asc",
                 "--heuristic-only"]) == 0
    assert "mu           2" in capsys.readouterr().out
    assert main(["solve", str(fig1_file), "--period", "10", "--blocks", "--threads", "2"]) == 0


def test_cli_oracle(fig1_file, tmp_path, capsys):
    assert main(["oracle", str(fig1_file), "--period", "10", "--mode", "ip"]) == 0
    assert "ip optimum 210" in capsys.readouterr().out
    js = tmp_path / "o.json"
    assert main(["oracle", str(fig1_file), "--period", "10", "--mode", "split", "--json", str(js)]) == 0
    assert json.loads(js.read_text())["value"] == "210"


def test_cli_check(fig1_file, tmp_path, capsys):
    inst = fig1_raw()
    rep = run(fig1_raw())
    cj, pj = tmp_path / "c.json", tmp_path / "p.json"
    cj.write_text(json.dumps(rep.to_json()))
    pj.write_text(json.dumps(dump_point(inst.lower_vector())))
    assert main(["check", str(fig1_file), "--period", "10", "--cuts", str(cj), "--point", str(pj)]) == 0
    out = capsys.readouterr().out
    assert out.count("valid violated") == len(rep.cuts)
    bad = rep.cuts[0].to_json()
    bad["rhs"] = str(Fraction(bad["rhs"]) + 1)
    cj.write_text(json.dumps([bad]))
    assert main(["check", str(fig1_file), "--period", "10", "--cuts", str(cj), "--point", str(pj)]) == 1
    assert "INVALID" in capsys.readouterr().out


def test_cli_restrict(fig1_file, tmp_path):
    out = tmp_path / "r.txt"
    assert main(["restrict", str(fig1_file), "--period", "10", "--mu", "1", "--out", str(out)]) == 0
    assert parse_activities(out, 10).mu == 1


def test_cli_errors(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("1; 1; 2; 5; 2; 1\n")
    assert main(["solve", str(bad), "--period", "10"]) == 3
    assert "line 1" in capsys.readouterr().err
    inf = tmp_path / "inf.txt"
    inf.write_text("1; 1; 2; 1; 2; 1\n2; 1; 2; 5; 6; 1\n")
    assert main(["oracle", str(inf), "--period", "10"]) == 2
    assert main(["solve", str(inf), "--period", "10"]) != 0
    assert main(["solve", str(tmp_path / "missing.txt"), "--period", "10"]) == 3
    with pytest.raises(SystemExit):
        main(["solve"])
