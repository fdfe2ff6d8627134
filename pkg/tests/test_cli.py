"""Command-line front end: outputs, exit codes and determinism."""
import subprocess
import sys

import pytest

from ncpolytope import golden
from ncpolytope.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, OUT_ENV, main
from ncpolytope.pipeline import nc_membership
from ncpolytope.quantum import SeesawConfig, seesaw
from ncpolytope.scenario import format_scenario, get_scenario


def run(argv, out):
    return main(list(argv) + ["--out", str(out)])


def read_tsv(path):
    lines = path.read_text().splitlines()
    return [l.split("\t") for l in lines[1:]], lines[0].split("\t")


def test_enumerate_s1(tmp_path, capsys):
    assert run(["enumerate", "s1"], tmp_path) == EXIT_OK
    text = capsys.readouterr().out
    assert "facets 24" in text
    rows, header = read_tsv(tmp_path / "s1_classes.tsv")
    assert header == ["class", "orbit", "kind", "inequality"]
    assert sorted((r[2], int(r[1])) for r in rows) == [("nontrivial", 8), ("trivial", 16)]
    facets, _ = read_tsv(tmp_path / "s1_facets.tsv")
    assert len(facets) == 24
    assert "substitution p[0|3,0]" in text


def test_enumerate_s3_counts(tmp_path, capsys):
    assert run(["enumerate", "s3", "--convention", "tables"], tmp_path) == EXIT_OK
    assert "facets 44" in capsys.readouterr().out


def test_out_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "envout"))
    assert main(["enumerate", "s1"]) == EXIT_OK
    assert (tmp_path / "envout" / "s1_classes.tsv").exists()


def test_threads_do_not_change_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    common = ["bounds", "s2", "--restarts", "4", "--seed", "3"]
    assert run(common + ["--threads", "1"], a) == EXIT_OK
    assert run(common + ["--threads", "2"], b) == EXIT_OK
    assert (a / "s2_bounds.tsv").read_bytes() == (b / "s2_bounds.tsv").read_bytes()


def test_bounds_s2_values(tmp_path):
    assert run(["bounds", "s2", "--restarts", "5"], tmp_path) == EXIT_OK
    rows, header = read_tsv(tmp_path / "s2_bounds.tsv")
    assert header[3:] == ["Qs2", "omega2", "Q1"]
    # representatives may differ from the reference form by a constant, so
    # compare violations above the classical bound
    found = False
    for r in rows:
        bound = float(r[2].rsplit("<=", 1)[1])
        qs, w, q1 = (float(v) for v in r[3:])
        found |= (abs(qs - bound - 0.6458) < 1e-3 and abs(w - 0.244) < 5e-3
                  and abs(q1 - bound - 0.7321) < 1e-3)
    assert found


def test_file_scenario(tmp_path, capsys):
    path = tmp_path / "s1.txt"
    path.write_text(format_scenario(get_scenario("s1")))
    assert run(["enumerate", "--file", str(path)], tmp_path) == EXIT_OK
    assert "facets 24" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["bogus", "s1"],
    ["enumerate"],
    ["enumerate", "s1", "--scenario", "s2"],
    ["enumerate", "s99"],
    ["bounds", "s2", "--d", "0"],
    ["enumerate", "s1", "--threads", "x"],
    ["membership", "s1"],
])
def test_usage_errors(argv, tmp_path, capsys):
    assert run(argv, tmp_path) == EXIT_USAGE
    assert capsys.readouterr().err


def test_empty_file_is_usage_error(tmp_path, capsys):
    path = tmp_path / "empty.txt"
    path.write_text("")
    assert run(["enumerate", "--file", str(path)], tmp_path) == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_report_passes(tmp_path, capsys):
    assert run(["report", "s1"], tmp_path) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out
    rows, _ = read_tsv(tmp_path / "s1_report.tsv")
    assert all(r[-1] == "pass" for r in rows)


def test_report_failure_exit_code(tmp_path, capsys):
    # count mismatch recorded in the ledger: trivial facets of s2
    assert run(["report", "s2", "--restarts", "3", "--max-level", "1"], tmp_path) == EXIT_FAIL
    assert "FAIL" in capsys.readouterr().out


def test_report_needs_reference(tmp_path):
    path = tmp_path / "s1.txt"
    path.write_text(format_scenario(get_scenario("s1")))
    assert run(["report", "--file", str(path)], tmp_path) == EXIT_USAGE


def test_randomness_single_point(tmp_path):
    assert run(["randomness", "s7", "--grid", "1"], tmp_path) == EXIT_OK
    rows, header = read_tsv(tmp_path / "s7_randomness.tsv")
    assert header == ["i", "h"]
    assert len(rows) == 1
    i, h = map(float, rows[0])
    assert i == pytest.approx(1.0) and h == pytest.approx(0.0, abs=1e-6)


def test_randomness_needs_inequality(tmp_path):
    assert run(["randomness", "s2", "--grid", "1"], tmp_path) == EXIT_USAGE


def test_membership(tmp_path, capsys):
    s = get_scenario("s7")
    _, st = seesaw(s, golden.named("s7", "I7"), 2, SeesawConfig(restarts=2, seed=0))
    p = st.behavior()
    bad = tmp_path / "q.txt"
    bad.write_text(" ".join(repr(float(v)) for v in p))
    assert run(["membership", "s7", "--behavior", str(bad)], tmp_path) == EXIT_OK
    assert "not a member" in capsys.readouterr().out
    mixed = [float(v) for v in st.mixed(1.0).behavior()]
    assert nc_membership(mixed, s).member
    good = tmp_path / "c.txt"
    good.write_text(" ".join(repr(v) for v in mixed))
    assert run(["membership", "s7", "--behavior", str(good)], tmp_path) == EXIT_OK
    assert capsys.readouterr().out.strip() == "member"


def test_membership_wrong_length(tmp_path):
    path = tmp_path / "p.txt"
    path.write_text("0.5 0.5")
    assert run(["membership", "s1", "--behavior", str(path)], tmp_path) == EXIT_USAGE


def test_dims(tmp_path, capsys):
    assert run(["dims", "s1"], tmp_path) == EXIT_OK
    out = capsys.readouterr().out
    assert out.strip()


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "ncpolytope.cli", "dims", "s1"],
                       capture_output=True, text=True)
    assert r.returncode == EXIT_OK
    r = subprocess.run([sys.executable, "-m", "ncpolytope.cli", "nope"],
                       capture_output=True, text=True)
    assert r.returncode == EXIT_USAGE
