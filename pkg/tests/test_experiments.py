import csv
import json

import numpy as np
import pytest

from probris import cli
from probris import experiments as ex
from probris.errors import DomainError

FAST_T = {"t_max": 5, "max_bcd_iter": 1, "G_s": 200, "N_e": 50, "b_m": 2}


def write_spec(tmp_path, name="spec.json", **data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_capacity_row_contract(tmp_path):
    spec = ex.ExperimentSpec(
        experiment="capacity_vs_N",
        sweep={"N": [4, 6, 8]},
        realizations=2,
        solvers=["E-GD-1", "E-GD-2", "SSA-B", "CPP-1", "CPP-2", "SA"],
        out=str(tmp_path),
    )
    res = ex.run(spec)
    rows = read_rows(res.csv_path)
    assert len(rows) == 18
    assert list(rows[0]) == list(ex.COLUMNS)
    assert {r["R"] for r in rows} == {"2"}
    meta = json.loads(res.json_path.read_text())
    assert meta["content_hash"] == ex.content_hash(res.rows)
    assert meta["spec"]["sweep"] == {"N": [4, 6, 8]}


def test_exhaustive_column_never_loses(tmp_path):
    spec = ex.ExperimentSpec(
        experiment="capacity_vs_N", sweep={"N": [6]}, realizations=4, solvers=["EXH", "E-GD-1", "SA"], out=str(tmp_path)
    )
    rows = {r["solver"]: float(r["mean"]) for r in ex.run(spec, write=False).rows}
    assert rows["EXH"] >= max(rows["E-GD-1"], rows["SA"]) - 1e-12


def test_rerun_is_byte_identical(tmp_path):
    path = write_spec(
        tmp_path,
        experiment="ee_vs_p",
        sweep={"p_dBm": [0, 20]},
        realizations=2,
        overhead={"N_max": 6},
        ssa_t=FAST_T,
    )
    for out in ("a", "b"):
        assert cli.main(["run", str(path), "--out", str(tmp_path / out)]) == 0
    for name in ("ee_vs_p.csv", "ee_vs_p.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_override_changes_results(tmp_path):
    path = write_spec(tmp_path, experiment="capacity_vs_N", sweep={"N": [5]}, realizations=3, solvers=["SA"])
    cli.main(["run", str(path), "--out", str(tmp_path / "a"), "--seed", "1"])
    cli.main(["run", str(path), "--out", str(tmp_path / "b"), "--seed", "2"])
    a = read_rows(tmp_path / "a" / "capacity_vs_N.csv")[0]
    b = read_rows(tmp_path / "b" / "capacity_vs_N.csv")[0]
    assert a["seed"] == "1" and b["seed"] == "2"
    assert a["mean"] != b["mean"]


def test_partial_failure_exit_code(tmp_path):
    path = write_spec(tmp_path, experiment="capacity_vs_N", sweep={"N": [23]}, realizations=1, solvers=["EXH", "SA"])
    assert cli.main(["run", str(path), "--out", str(tmp_path)]) == 2
    rows = {r["solver"]: r for r in read_rows(tmp_path / "capacity_vs_N.csv")}
    assert rows["EXH"]["R"] == "0" and rows["SA"]["R"] == "1"


def test_bad_spec_exit_code(tmp_path, capsys):
    path = write_spec(tmp_path, experiment="nope", sweep={"N": [4]})
    assert cli.main(["run", str(path)]) == 1
    assert "unknown experiment" in capsys.readouterr().err


def test_spec_validation():
    with pytest.raises(DomainError):
        ex.ExperimentSpec(experiment="capacity_vs_N", sweep={"p_dBm": [0]})
    with pytest.raises(DomainError):
        ex.ExperimentSpec(experiment="capacity_vs_N", sweep={"N": []})
    with pytest.raises(DomainError):
        ex.ExperimentSpec(experiment="ee_vs_p", sweep={"p_dBm": [0]}, solvers=["E-GD-1"])
    with pytest.raises(DomainError):
        ex.ExperimentSpec.from_dict({"experiment": "ee_vs_p", "sweep": {"p_dBm": [0]}, "extra": 1})
    with pytest.raises(DomainError):
        ex.ExperimentSpec(experiment="capacity_vs_N", sweep={"N": [4]}, scenario={"bad": 1})


def test_element_table_cells(tmp_path):
    spec = ex.ExperimentSpec(
        experiment="element_count_table",
        sweep={"p_dBm": [0, 30], "T0_ms": [0.2, 1.0]},
        realizations=2,
        overhead={"N_max": 8},
        ssa_t=FAST_T,
        out=str(tmp_path),
    )
    rows = ex.run(spec, write=False).rows
    assert len(rows) == 8
    assert {r["sweep_value"] for r in rows} == {"0;0.2", "30;0.2", "0;1.0", "30;1.0"}
    assert all(0 <= r["mean"] <= 8 for r in rows)


def test_rate_experiment_metric(tmp_path):
    spec = ex.ExperimentSpec(
        experiment="rate_vs_p", sweep={"p_dBm": [10]}, realizations=2, overhead={"N_max": 5}, ssa_t=FAST_T
    )
    rows = ex.run(spec, write=False).rows
    assert {r["metric"] for r in rows} == {"rate_Mbit_per_s"}
    assert all(r["mean"] > 0 for r in rows)


def test_bench_schema_and_ordering(tmp_path):
    path = write_spec(tmp_path, experiment="capacity_vs_N", sweep={"N": [16]}, realizations=1, solvers=["E-GD-1", "E-GD-2", "SA"])
    assert cli.main(["bench", str(path), "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "bench.csv")
    assert list(rows[0]) == list(ex.COLUMNS)
    t = {(r["solver"], r["metric"]): float(r["mean"]) for r in rows}
    assert t[("E-GD-1", "grad_time_s")] < t[("E-GD-2", "grad_time_s")]
    assert ("SA", "iter_time_s") in t and ("SA", "grad_time_s") not in t


def test_timing_rows_do_not_affect_hash():
    row = {"experiment": "e", "solver": "s", "sweep_var": "N", "sweep_value": "4", "stderr": 0.0, "R": 1, "seed": 0}
    a = [dict(row, metric="capacity_bps_per_Hz", mean=1.0), dict(row, metric="iter_time_s", mean=0.1)]
    b = [dict(row, metric="capacity_bps_per_Hz", mean=1.0), dict(row, metric="iter_time_s", mean=0.2)]
    assert ex.content_hash(a) == ex.content_hash(b)


def test_summarize():
    mean, se, R = ex.summarize([1.0, 2.0, 3.0, float("nan")])
    assert (mean, R) == (2.0, 3)
    assert se == pytest.approx(1.0 / np.sqrt(3))
    assert np.isnan(ex.summarize([1.0])[1])


def test_loglog_slope():
    Ns = [32, 64, 128]
    assert ex.loglog_slope(Ns, [n**2 for n in Ns]) == pytest.approx(2.0)
