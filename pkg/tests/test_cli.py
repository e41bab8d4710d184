import csv
import json
import math

import numpy as np
import pytest

from ofdmalloc import grid_minpower, load_instance, save_instance
from ofdmalloc.cli import main
from conftest import random_gains

LN2 = math.log(2.0)


@pytest.fixture
def instance(tmp_path):
    path = tmp_path / "inst.json"
    assert main(["gen", "--users", "2", "--carriers", "4", "--taps", "2", "--seed", "3", "--out", str(path)]) == 0
    return path


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


class TestGen:
    def test_minimal_instance(self, tmp_path):
        out = tmp_path / "one.json"
        assert main(["gen", "--users", "1", "--carriers", "1", "--out", str(out)]) == 0
        g = load_instance(out)
        assert g.M == 1 and g.K == 1

    def test_same_seed_identical_bytes(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        argv = ["gen", "--users", "2", "--carriers", "8", "--taps", "3", "--seed", "9"]
        assert main(argv + ["--out", str(a)]) == 0
        assert main(argv + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_large_scale_instance(self, tmp_path):
        out = tmp_path / "big.json"
        argv = ["gen", "--users", "4", "--carriers", "128", "--taps", "8", "--seed", "1", "--out", str(out)]
        assert main(argv) == 0
        g = load_instance(out)
        assert g.M == 4 and g.K == 128


class TestSolveWsr:
    def test_single_user_spends_budget(self, tmp_path):
        inst = tmp_path / "su.json"
        main(["gen", "--users", "1", "--carriers", "4", "--taps", "2", "--seed", "5", "--out", str(inst)])
        out = tmp_path / "rep.json"
        assert main(["solve-wsr", "--instance", str(inst), "--weights", "1", "--power", "2.5", "--out", str(out)]) == 0
        doc = read_json(out)
        assert doc["sum_power"] == pytest.approx(2.5, rel=1e-8)
        assert doc["converged"]

    def test_snr_convention(self, instance, tmp_path):
        out = tmp_path / "rep.json"
        assert main(["solve-wsr", "--instance", str(instance), "--weights", "1,1", "--snr-db", "10", "--out", str(out)]) == 0
        doc = read_json(out)
        gains = load_instance(instance)
        assert doc["sum_power"] == pytest.approx(gains.K * gains.sigma2 * 10.0, rel=1e-8)

    def test_equal_weights_exclusive_certificate(self, instance, tmp_path):
        out = tmp_path / "rep.json"
        main(["solve-wsr", "--instance", str(instance), "--weights", "1,1", "--power", "4", "--out", str(out)])
        doc = read_json(out)
        assert doc["certificates"]["exclusive"]
        assert doc["certificates"]["fdma"]["holds"]

    def test_deterministic_report_bytes(self, instance, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        argv = ["solve-wsr", "--instance", str(instance), "--weights", "2,1", "--power", "4"]
        main(argv + ["--out", str(a)])
        main(argv + ["--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_rates_reported_in_both_units(self, instance, tmp_path):
        out = tmp_path / "rep.json"
        main(["solve-wsr", "--instance", str(instance), "--weights", "2,1", "--power", "4", "--out", str(out)])
        doc = read_json(out)
        nats = np.asarray(doc["rate_totals_nats"])
        bits = np.asarray(doc["rate_totals_bits"])
        assert np.allclose(nats, bits * LN2, rtol=1e-12)


class TestSolveMinpower:
    def test_zero_requirements(self, instance, tmp_path):
        out = tmp_path / "rep.json"
        assert main(["solve-minpower", "--instance", str(instance), "--rates", "0,0", "--out", str(out)]) == 0
        doc = read_json(out)
        assert doc["sum_power"] == 0.0

    def test_monotone_trace_at_scale(self, tmp_path):
        inst = tmp_path / "big.json"
        main(["gen", "--users", "4", "--carriers", "128", "--taps", "8", "--seed", "1", "--out", str(inst)])
        out = tmp_path / "rep.json"
        argv = ["solve-minpower", "--instance", str(inst), "--rates", "2.5,0.4,0.8,2", "--out", str(out)]
        assert main(argv) == 0
        doc = read_json(out)
        trace = np.asarray(doc["trace"])
        assert doc["converged"]
        assert np.all(np.diff(trace) <= 1e-12 * trace[:-1])

    def test_matches_grid_oracle(self, tmp_path):
        g = random_gains(2, 2, seed=77)
        inst = tmp_path / "fixed.json"
        save_instance(g, inst)
        out = tmp_path / "rep.json"
        main(["solve-minpower", "--instance", str(inst), "--rates", "1.2,0.9", "--out", str(out)])
        doc = read_json(out)
        targets = np.array([1.2, 0.9]) * LN2
        grid = grid_minpower(g, targets, 801)
        assert grid["p_min"] >= doc["sum_power"] - 1e-9
        assert grid["p_min"] - doc["sum_power"] <= max(grid["gap"], 1e-4 * doc["sum_power"])

    def test_trace_csv_export(self, instance, tmp_path):
        out, trace = tmp_path / "rep.json", tmp_path / "trace.csv"
        main(["solve-minpower", "--instance", str(instance), "--rates", "1,1", "--out", str(out), "--trace-csv", str(trace)])
        rows = list(csv.reader(open(trace)))
        assert rows[0] == ["iteration", "sum_power"]
        assert len(rows) - 1 == read_json(out)["iterations"]


class TestSolveMinrates:
    def test_zero_floors_match_wsr(self, instance, tmp_path):
        a, b = tmp_path / "mr.json", tmp_path / "wsr.json"
        main(["solve-minrates", "--instance", str(instance), "--weights", "2,1", "--rates", "0,0", "--power", "4", "--algorithm", "weights", "--out", str(a)])
        main(["solve-wsr", "--instance", str(instance), "--weights", "2,1", "--power", "4", "--out", str(b)])
        assert read_json(a)["objective"] == pytest.approx(read_json(b)["objective"], rel=1e-10)

    def test_both_algorithms_agree(self, instance, tmp_path):
        out = tmp_path / "rep.json"
        code = main(["solve-minrates", "--instance", str(instance), "--weights", "2,1", "--rates", "0.3,1.2", "--snr-db", "3", "--algorithm", "both", "--out", str(out)])
        assert code == 0
        doc = read_json(out)
        assert doc["details"]["cross_check"]["objective_rel_diff"] <= 1e-5

    def test_both_algorithms_agree_at_scale(self, tmp_path):
        inst = tmp_path / "big.json"
        main(["gen", "--users", "4", "--carriers", "256", "--taps", "8", "--seed", "2", "--out", str(inst)])
        out = tmp_path / "rep.json"
        code = main(["solve-minrates", "--instance", str(inst), "--weights", "0.35,0.4,0.1,0.15", "--rates", "1,0,1.25,0.5", "--snr-db", "10", "--algorithm", "both", "--out", str(out)])
        assert code == 0
        doc = read_json(out)
        assert doc["converged"]
        assert doc["details"]["cross_check"]["objective_rel_diff"] <= 1e-5
        assert doc["details"]["cross_check"]["max_rate_diff_nats"] <= 1e-4

    def test_infeasible_exit_code(self, instance, capsys, tmp_path):
        out = tmp_path / "rep.json"
        code = main(["solve-minrates", "--instance", str(instance), "--weights", "1,1", "--rates", "6,6", "--power", "0.01", "--out", str(out)])
        assert code == 2
        assert "P_min" in capsys.readouterr().err


class TestCheck:
    def test_zero_rates_feasible(self, instance, capsys):
        assert main(["check", "--instance", str(instance), "--rates", "0,0", "--power", "1"]) == 0
        assert capsys.readouterr().out.startswith("feasible")

    def test_boundary_detection(self, instance, capsys, tmp_path):
        out = tmp_path / "rep.json"
        main(["solve-minpower", "--instance", str(instance), "--rates", "1,1", "--out", str(out)])
        p_min = read_json(out)["sum_power"]
        capsys.readouterr()  # drain the solver summary line
        code = main(["check", "--instance", str(instance), "--rates", "1,1", "--power", repr(p_min)])
        assert code == 0
        assert capsys.readouterr().out.startswith("boundary")

    def test_infeasible_exit_code(self, instance, capsys):
        assert main(["check", "--instance", str(instance), "--rates", "5,5", "--power", "0.01"]) == 2
        assert capsys.readouterr().out.startswith("infeasible")


class TestSweepSnr:
    def test_single_step_matches_minrates(self, instance, tmp_path):
        sweep, rep = tmp_path / "sweep.csv", tmp_path / "rep.json"
        assert main(["sweep-snr", "--instance", str(instance), "--weights", "2,1", "--rates", "0.3,0.8", "--from", "6", "--to", "6", "--steps", "1", "--out", str(sweep)]) == 0
        main(["solve-minrates", "--instance", str(instance), "--weights", "2,1", "--rates", "0.3,0.8", "--snr-db", "6", "--algorithm", "waterfill", "--out", str(rep)])
        rows = list(csv.DictReader(open(sweep)))
        assert len(rows) == 1 and rows[0]["status"] == "ok"
        doc = read_json(rep)
        assert float(rows[0]["R_1"]) == pytest.approx(doc["rate_totals_bits"][0], rel=1e-9)
        assert float(rows[0]["lambda"]) == pytest.approx(doc["duals"]["lambda"], rel=1e-9)

    def test_infeasible_rows_marked_and_sweep_continues(self, instance, tmp_path):
        sweep = tmp_path / "sweep.csv"
        assert main(["sweep-snr", "--instance", str(instance), "--weights", "1,1", "--rates", "2,2", "--from", "-20", "--to", "15", "--steps", "4", "--out", str(sweep)]) == 0
        rows = list(csv.DictReader(open(sweep)))
        statuses = [r["status"] for r in rows]
        assert statuses[0] == "infeasible" and statuses[-1] == "ok"
        assert len(rows) == 4

    def test_active_constraints_shrink_with_snr(self, tmp_path):
        inst = tmp_path / "inst.json"
        main(["gen", "--users", "3", "--carriers", "8", "--taps", "3", "--seed", "21", "--out", str(inst)])
        sweep = tmp_path / "sweep.csv"
        assert main(["sweep-snr", "--instance", str(inst), "--weights", "0.5,0.3,0.2", "--rates", "1,0.8,0.6", "--from", "2", "--to", "18", "--steps", "5", "--out", str(sweep)]) == 0
        rows = [r for r in csv.DictReader(open(sweep)) if r["status"] == "ok"]
        mu = np.array([0.5, 0.3, 0.2])
        previous = None
        for row in rows:
            mustar = np.array([float(row[f"mustar_{m + 1}"]) for m in range(3)])
            active = frozenset(np.flatnonzero(mustar > mu * (1 + 1e-6)))
            if previous is not None:
                assert active <= previous
            previous = active


class TestTransform:
    def test_round_trip_through_files(self, instance, tmp_path):
        alloc = tmp_path / "alloc.json"
        alloc.write_text(json.dumps({"side": "BC", "powers": [[1.0, 0.5, 0.0, 0.2], [0.3, 0.0, 1.0, 0.1]], "order": [2, 1]}))
        mac = tmp_path / "mac.json"
        back = tmp_path / "back.json"
        assert main(["transform", "--instance", str(instance), "--allocation", str(alloc), "--to", "mac", "--out", str(mac)]) == 0
        assert main(["transform", "--instance", str(instance), "--allocation", str(mac), "--to", "bc", "--out", str(back)]) == 0
        original = json.loads(alloc.read_text())["powers"]
        restored = read_json(back)["powers"]
        assert np.allclose(original, restored, rtol=1e-10, atol=1e-12)


class TestErrors:
    def test_usage_error_is_exit_1(self):
        assert main(["solve-wsr", "--nope"]) == 1

    def test_missing_file_is_exit_1(self, tmp_path, capsys):
        out = tmp_path / "rep.json"
        assert main(["solve-wsr", "--instance", "/nonexistent.json", "--weights", "1", "--power", "1", "--out", str(out)]) == 1

    def test_bad_weights_length(self, instance, tmp_path, capsys):
        out = tmp_path / "rep.json"
        assert main(["solve-wsr", "--instance", str(instance), "--weights", "1,2,3", "--power", "1", "--out", str(out)]) == 1
