import csv
import io

import pytest

from carldtn import cli
from carldtn.config import parse_scenario
from carldtn.engine import Simulator
from carldtn.errors import ValidationError
from carldtn.sweep import (OUTPUT_ENV, apply_axis, output_dir, parse_axis_values, run_sweep,
                           summarize)

TINY = """\
name = tiny
duration = 600
world.width = 200
world.height = 200
message_interval = 10,20
message_size = 50k,200k
ttl = 10
group1.count = 6
group1.speed = 2,5
group1.buffer = 2M
group2.count = 3
group2.kind = car
group2.mobility = graph
group2.graph = grid:3x3
group2.speed = 5,10
group2.buffer = 2M
"""


@pytest.fixture
def tiny(tmp_path):
    p = tmp_path / "tiny.cfg"
    p.write_text(TINY)
    return p


def _rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


# ---- sweeps -----------------------------------------------------------------------------


def test_sweep_row_count_is_the_full_product(tmp_path):
    base = parse_scenario(TINY)
    res = run_sweep(base, "buffer", [1_000_000, 2_000_000], [1, 2, 3], ["epidemic", "carl"],
                    tmp_path / "out")
    assert len(res.runs) == 12 and res.exit_code == 0
    assert len(_rows(tmp_path / "out" / "runs.csv")) == 12
    summary = _rows(tmp_path / "out" / "summary.csv")
    assert len(summary) == 4 and {r["runs"] for r in summary} == {"3"}
    assert len(list((tmp_path / "out" / "series").glob("*.csv"))) == 12


def test_summary_mean_matches_runs():
    base = parse_scenario(TINY)
    res = run_sweep(base, "ttl", [5.0], [1, 2], ["snw"])
    (row,) = summarize(res)
    probs = [o.report.delivery_probability for o in res.runs]
    assert row["delivery_probability_mean"] == pytest.approx(sum(probs) / 2)


def test_axis_application():
    base = parse_scenario(TINY)
    assert all(g.buffer == 7_000_000 for g in apply_axis(base, "buffer", "7M").groups)
    moved = apply_axis(base, "mobility", "rwk")
    assert [g.mobility for g in moved.groups] == ["rwk", "graph"]
    assert apply_axis(base, "ttl", 30).workload.ttl == 30.0
    with pytest.raises(ValidationError):
        apply_axis(base, "mobility", "hover")


def test_axis_value_parsing():
    assert parse_axis_values("buffer", "5M,10M") == [5_000_000, 10_000_000]
    assert parse_axis_values("duration", "100, 200") == [100.0, 200.0]
    with pytest.raises(ValidationError):
        parse_axis_values("ttl", "soon")


def test_invalid_sweep_fails_before_running():
    base = parse_scenario(TINY)
    with pytest.raises(ValidationError):
        run_sweep(base, "buffer", [10_000], [1], ["carl"])  # smaller than a message
    with pytest.raises(ValidationError):
        run_sweep(base, "ttl", [5.0], [1], ["flooding"])


def test_failed_run_is_reported_not_raised(tmp_path, monkeypatch):
    def boom(self):
        raise RuntimeError("synthetic failure")

    monkeypatch.setattr(Simulator, "run", boom)
    res = run_sweep(parse_scenario(TINY), "ttl", [5.0], [1], ["carl"], tmp_path)
    assert res.exit_code == 1 and "synthetic failure" in res.failures[0].error
    assert len(_rows(tmp_path / "errors.csv")) == 1


def test_output_dir_resolution(monkeypatch, tmp_path):
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    assert str(output_dir()) == "carldtn-out"
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert output_dir() == tmp_path / "env"
    assert output_dir(tmp_path / "flag") == tmp_path / "flag"


# ---- command line ----------------------------------------------------------------------------


def test_cli_run_writes_reports(tiny, tmp_path, capsys):
    out = tmp_path / "run"
    code = cli.main(["run", str(tiny), "--router", "snw", "--output-dir", str(out),
                     "--decision-log", "--dump-popularity", "--check-invariants"])
    assert code == 0
    assert "router=snw" in capsys.readouterr().out
    names = sorted(p.name for p in out.iterdir())
    assert names == ["decisions_tiny_snw_1.csv", "popularity_tiny_snw_1.csv",
                     "report_tiny_snw_1.csv", "series_tiny_snw_1.csv"]
    assert len(_rows(out / "report_tiny_snw_1.csv")) == 1


def test_cli_uses_output_env_var(tiny, tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert cli.main(["run", str(tiny), "--duration", "100"]) == 0
    assert (tmp_path / "env" / "report_tiny_carl_1.csv").exists()


def test_cli_sweep(tiny, tmp_path):
    out = tmp_path / "sweep"
    code = cli.main(["sweep", str(tiny), "--axis", "ttl", "--values", "5,10", "--seeds", "1,2",
                     "--routers", "epidemic,carl", "--output-dir", str(out), "--quiet"])
    assert code == 0
    assert len(_rows(out / "runs.csv")) == 8


def test_cli_config_errors_exit_2(tiny, tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("ttl = -1\n")
    assert cli.main(["run", str(bad)]) == 2
    assert "ttl" in capsys.readouterr().err
    assert cli.main(["run", str(tmp_path / "missing.cfg")]) == 2
    assert cli.main(["sweep", str(tiny), "--axis", "ttl", "--values", "x", "--seeds", "1"]) == 2
    assert cli.main(["dump-qtable", str(tiny), "--node", "99"]) == 2


def test_cli_run_failure_exits_1(tiny, tmp_path, monkeypatch):
    def boom(self):
        raise RuntimeError("synthetic failure")

    monkeypatch.setattr(Simulator, "run", boom)
    assert cli.main(["run", str(tiny), "--output-dir", str(tmp_path)]) == 1
    assert cli.main(["sweep", str(tiny), "--axis", "ttl", "--values", "5", "--seeds", "1",
                     "--output-dir", str(tmp_path), "--quiet"]) == 1


def test_dump_fuzzy(tmp_path):
    out = tmp_path / "flc3.csv"
    assert cli.main(["dump-fuzzy", "--controller", "FLC3", "--steps", "5", "--output", str(out)]) == 0
    rows = _rows(out)
    assert len(rows) == 25 and rows[0]["controller"] == "FLC3"
    assert cli.main(["dump-fuzzy", "--steps", "1"]) == 2


def test_dump_qtable(tiny, tmp_path):
    out = tmp_path / "q.csv"
    assert cli.main(["dump-qtable", str(tiny), "--node", "0", "--output", str(out)]) == 0
    rows = _rows(out)
    assert rows and all(r["owner"] == "0" for r in rows)
    assert all(0.0 <= float(r["value"]) <= 1.0 for r in rows)
