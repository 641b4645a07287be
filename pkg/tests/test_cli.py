import csv
import io
import json

import pytest

from cloudplace.catalog import data_path
from cloudplace.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def doc(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    assert code == 0
    return json.loads(out)


def test_cost(capsys):
    d = doc(capsys, "cost")
    amazon = d["providers"][0]
    assert amazon["name"] == "Amazon"
    assert amazon["computed_usd"] == pytest.approx(14020.0, abs=0.01)
    assert abs(amazon["delta_percent"]) < 2


def test_cost_table(capsys):
    code, out, _ = run(capsys, "cost", "--format", "table")
    assert code == 0 and "Amazon" in out and "delta_percent" in out


def test_filter(capsys):
    d = doc(capsys, "filter", "--require-cert", "SSAE 16")
    # HP lists only SAS 70; SoftLayer and Instacompute publish no certifications
    assert [p["id"] for p in d["providers"]] == [1, 2, 3, 4, 6, 7, 8]
    code, _, err = run(capsys, "filter", "--max-response-ms", "1")
    assert code == 3 and "error" in err


def test_plan_availability(capsys):
    d = doc(capsys, "plan-availability", "--budget", "26069")
    assert [s["id"] for s in d["selected"]] == [1, 3]
    assert d["availability_percent"] == pytest.approx(99.9999)


def test_plan_availability_sweep(capsys):
    code, out, _ = run(capsys, "plan-availability", "--sweep", "0", "40000", "10000")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and [r["budget_usd"] for r in rows] == ["0", "10000", "20000", "30000", "40000"]
    code, out, _ = run(capsys, "plan-availability", "--sweep", "0", "10000", "5000", "--timing")
    assert "time_ms" in out.splitlines()[0]


def test_plan_chunks(capsys, tmp_path):
    d = doc(capsys, "plan-chunks", "--budget", "6000", "--chunks", "4")
    assert len(d["chunks"]) == 4 and d["total_cost_usd"] <= 6000
    code, out, _ = run(capsys, "plan-chunks", "--budget", "2000", "--sweep-chunks", "1", "3", "1")
    assert code == 0 and len(out.strip().splitlines()) == 4
    code, _, _ = run(capsys, "plan-chunks", "--budget", "100", "-r", "11")
    assert code == 3


def test_fragment(capsys):
    d = doc(capsys, "fragment", "--schema", str(data_path("schemas/customer.json")))
    assert len(d["plan"]["fragments"]) == 3
    assert d["violations"] == []
    assert len(d["mapping_table"]["entries"]) == 3


def test_fragment_infeasible(capsys, tmp_path):
    schema = tmp_path / "s.json"
    schema.write_text(json.dumps({"name": "R", "attributes": ["Id", "S"], "primary_key": ["Id"], "constraints": [["S"]]}))
    code, _, err = run(capsys, "fragment", "--schema", str(schema))
    assert code == 4 and "S" in err


def test_simulate_round_trip(capsys, tmp_path):
    plan = tmp_path / "plan.json"
    assert main(["plan-availability", "--budget", "22149", "--output", str(plan)]) == 0
    d = doc(capsys, "simulate", "--document", str(plan), "--trials", "200000", "--seed", "3")
    assert d["kind"] == "data_loss" and d["pass"] is True and d["analytic"] == pytest.approx(0.005)

    chunks = tmp_path / "chunks.json"
    assert main(["plan-chunks", "--budget", "4000", "--chunks", "3", "--output", str(chunks)]) == 0
    code, out, err = run(capsys, "simulate", "--document", str(chunks), "--trials", "100000")
    assert code == 0 and json.loads(out)["kind"] == "chunk_availability" and "PASS" in err


def test_simulate_mismatch(capsys, tmp_path):
    bogus = tmp_path / "p.json"
    bogus.write_text(json.dumps({"selected": [{"id": 6}], "failure_index": 0.5}))
    code, _, err = run(capsys, "simulate", "--document", str(bogus), "--trials", "10000")
    assert code == 5 and "FAIL" in err


def test_nines(capsys):
    rows = doc(capsys, "nines")["rows"]
    four = next(r for r in rows if r["nines"] == 4)
    assert four["availability_percent"] == 99.99
    assert four["downtime_seconds_per_year"] == pytest.approx(3153.6)


@pytest.mark.parametrize(
    "argv, code",
    [
        (["plan-availability"], 2),
        (["plan-availability", "--budget", "-1"], 2),
        (["cost", "--catalog", "/nonexistent.json"], 2),
        (["simulate"], 2),
        (["fragment"], 2),
        (["plan-availability", "--sweep", "5", "1", "1"], 2),
    ],
)
def test_input_errors(capsys, argv, code):
    assert run(capsys, *argv)[0] == code


def test_bad_catalog(capsys, tmp_path):
    bad = tmp_path / "c.json"
    bad.write_text(json.dumps({"providers": []}))
    code, _, err = run(capsys, "cost", "--catalog", str(bad))
    assert code == 2 and "provider" in err
