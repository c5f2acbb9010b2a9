import csv
import io
import json

import pytest

from trimap import cli
from trimap.parallel import map_threads, thread_count


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def strip_metadata(doc):
    doc = dict(doc)
    doc.pop("metadata", None)
    return doc


# --- expand ------------------------------------------------------------------------

def test_expand_float_example():
    code, out, _ = run("expand", "--point", "0.8,0.5", "--steps", "2")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "digits: [0, 1]" and lines[1] == "terminated: false"
    x, y = (float(v) for v in lines[2].removeprefix("iterate: ").split(","))
    assert x == pytest.approx(0.4, abs=1e-15) and y == pytest.approx(0.2, abs=1e-15)


def test_expand_exact_example():
    code, out, _ = run("expand", "--point", "4/5,1/2", "--steps", "2", "--exact")
    assert code == 0
    assert out == "digits: [0, 1]\nterminated: false\niterate: 2/5,1/5\n"


def test_expand_terminates():
    code, out, _ = run("expand", "--point", "2/5,1/5", "--exact", "--steps", "10")
    assert code == 0 and out == "digits: [3]\nterminated: true\n"


def test_expand_json():
    code, out, _ = run("expand", "--point", "4/5,1/2", "--steps", "2", "--exact", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["schema_version"] == "1.0"
    assert doc["digits"] == [0, 1] and doc["iterate"] == "2/5,1/5"


def test_expand_deterministic_apart_from_metadata():
    a = json.loads(run("expand", "--point", "0.3,0.2", "--format", "json")[1])
    b = json.loads(run("expand", "--point", "0.3,0.2", "--format", "json")[1])
    assert strip_metadata(a) == strip_metadata(b)


@pytest.mark.parametrize("argv", [
    ("expand", "--point", "0.9,0.95"),
    ("expand", "--point", "garbage"),
    ("expand",),
    ("expand", "--point", "0.5,0.2", "--steps", "-1"),
    ("nonsense",),
    (),
])
def test_usage_errors_exit_2(argv):
    code, out, err = run(*argv)
    assert code == 2 and "error" in err and out == ""


# --- stats ---------------------------------------------------------------------------

def test_stats_csv():
    code, out, _ = run("stats", "--kmax", "3", "--orbit", "20000", "--seed", "1")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["k"] for r in rows] == ["0", "1", "2", "3", ">3"]
    assert abs(float(rows[0]["analytic"]) - 0.2531257) < 1e-6
    assert all(float(r["abs_error"]) < 1e-8 for r in rows)
    assert sum(float(r["empirical"]) for r in rows) == pytest.approx(1.0, abs=1e-12)


def test_stats_default_shape():
    code, out, _ = run("stats", "--kmax", "10", "--orbit", "1000000", "--seed", "42")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 12 and rows[-1]["k"] == ">10"
    assert abs(float(rows[0]["empirical"]) - float(rows[0]["analytic"])) < 1e-2


def test_stats_zero_orbit_has_empty_empirical_column():
    code, out, _ = run("stats", "--kmax", "2", "--orbit", "0")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and all(r["empirical"] == "" for r in rows)


def test_stats_json_and_reproducible(tmp_path):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        assert run("stats", "--kmax", "2", "--orbit", "5000", "--seed", "7", "--format", "json",
                   "--out", str(p))[0] == 0
    a, b = (json.loads(p.read_text()) for p in paths)
    assert strip_metadata(a) == strip_metadata(b)


def test_stats_rejects_bad_tolerance():
    assert run("stats", "--tol", "0")[0] == 2
    assert run("stats", "--tol", "-1e-8")[0] == 2


# --- operator ------------------------------------------------------------------------

def test_operator_small_grid(tmp_path):
    code, out, _ = run("operator", "--grid", "16", "--out-dir", str(tmp_path))
    doc = json.loads(out)
    assert code == 0 and doc["passed"]
    assert abs(doc["eigenvalue_estimate"] - 1) <= doc["eigenvalue_tolerance"]
    assert doc["norm_bound_max_ratio"] <= 3
    rows = (tmp_path / "eigenfunction.csv").read_text().splitlines()
    assert rows[0] == "x,u,h" and len(rows) == 1 + 16 * 16


def test_operator_full_grid():
    code, out, _ = run("operator", "--grid", "256", "--tol", "1e-8")
    doc = json.loads(out)
    assert code == 0 and abs(doc["eigenvalue_estimate"] - 1) < 1e-6
    assert doc["residual_region"] == "x >= 0.02"


def test_operator_coarse_grid_allowed():
    code, out, _ = run("operator", "--grid", "8")
    doc = json.loads(out)
    assert code == 0 and doc["residual_sup"] > 1e-4


def test_operator_rejects_coarse_grid():
    assert run("operator", "--grid", "4")[0] == 2


def test_operator_unconverged_still_reports():
    code, out, _ = run("operator", "--grid", "8", "--max-iters", "1")
    assert json.loads(out)["iterations"] == 1 and code in (0, 1)


def test_operator_instability_exits_3(monkeypatch):
    from trimap import transfer_op
    monkeypatch.setattr(transfer_op, "grid_apply", lambda R, c0, beta, v: 3.0 * v)
    code, _, err = run("operator", "--grid", "8")
    assert code == 3 and "numerical failure" in err


# --- nuclear -------------------------------------------------------------------------

def test_nuclear_suite(tmp_path):
    code, out, _ = run("nuclear", "--K", "60", "--out-dir", str(tmp_path))
    assert code == 0
    assert out.splitlines() == ["lerch: pass", "generating: pass", "E_cross: pass", "expansion: pass"]
    rows = list(csv.DictReader(io.StringIO((tmp_path / "identities.csv").read_text())))
    assert {r["suite"] for r in rows} == {"lerch", "generating", "E_cross", "expansion"}
    assert all(r["pass"] == "true" for r in rows)
    exp = json.loads((tmp_path / "expansion.json").read_text())
    assert len(exp["coefficients"]) == 61 and exp["value"] == pytest.approx(1.6, abs=1e-6)


def test_nuclear_K_zero_fails_the_expansion_suite(tmp_path):
    code, out, _ = run("nuclear", "--K", "0", "--out-dir", str(tmp_path))
    assert code == 1 and "expansion: fail" in out


# --- threads -------------------------------------------------------------------------

@pytest.mark.parametrize("value", ["zero", "0", "-3"])
def test_bad_thread_setting_is_a_usage_error(monkeypatch, value):
    monkeypatch.setenv("TRIMAP_THREADS", value)
    with pytest.raises(ValueError):
        thread_count()
    assert run("expand", "--point", "0.5,0.2")[0] == 2


def test_thread_setting_respected(monkeypatch):
    monkeypatch.setenv("TRIMAP_THREADS", "1")
    assert thread_count() == 1
    assert map_threads(lambda v: v * v, range(5)) == [0, 1, 4, 9, 16]
    monkeypatch.setenv("TRIMAP_THREADS", "2")
    assert map_threads(lambda v: v + 1, range(5)) == [1, 2, 3, 4, 5]


def test_run_config_validation():
    with pytest.raises(cli.UsageError):
        cli.RunConfig("stats", fmt="xml")
    with pytest.raises(cli.UsageError):
        cli.RunConfig("operator", grid_u=3)
    assert cli.RunConfig("stats").tol == 1e-8
