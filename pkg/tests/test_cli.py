import json
import socket
import subprocess
import sys
import time
import urllib.request
from pathlib import Path

import pytest

from carbonsched.cli import main

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
DEMO_TRACE = str(FIXTURES / "traces/demo.csv")
DEMO_FLAT = str(FIXTURES / "jobs/demo_flat.json")
DEMO_DIM = str(FIXTURES / "jobs/demo_diminishing.json")


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestSchedule:
    def test_demo_greedy(self, capsys):
        code, out, _ = run_cli(
            capsys, "schedule", "--trace", DEMO_TRACE, "--job", DEMO_DIM, "--policy", "greedy"
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["allocations"] == [2, 0, 1]
        assert doc["policy"] == "greedy"

    def test_demo_agnostic(self, capsys):
        code, out, _ = run_cli(
            capsys, "schedule", "--trace", DEMO_TRACE, "--job", DEMO_FLAT,
            "--policy", "agnostic", "--mode", "whole",
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["allocations"] == [1, 1, 0]
        assert doc["metrics"]["carbon_g"] == 110.0

    def test_unknown_policy_exit_2(self, capsys):
        code, _, err = run_cli(
            capsys, "schedule", "--trace", DEMO_TRACE, "--job", DEMO_FLAT,
            "--policy", "psychic",
        )
        assert code == 2
        assert "error" in err

    def test_missing_file_exit_2(self, capsys):
        code, _, _ = run_cli(
            capsys, "schedule", "--trace", "/nonexistent.csv", "--job", DEMO_FLAT,
            "--policy", "greedy",
        )
        assert code == 2

    def test_infeasible_exit_3(self, capsys):
        # the threshold policy admits a single cheap slot; two are needed
        code, _, err = run_cli(
            capsys, "schedule", "--trace", DEMO_TRACE, "--job", DEMO_FLAT,
            "--policy", "sr_threshold", "--percentile", "25",
        )
        assert code == 3
        assert "infeasible" in err

    def test_plot_written(self, capsys, tmp_path):
        plot = tmp_path / "schedule.png"
        code, _, _ = run_cli(
            capsys, "schedule", "--trace", DEMO_TRACE, "--job", DEMO_DIM,
            "--policy", "greedy", "--plot", str(plot),
        )
        assert code == 0
        assert plot.exists() and plot.stat().st_size > 0

    def test_curve_file_reference(self, capsys):
        job = str(FIXTURES / "jobs/nbody_100k_24h.json")
        trace = str(FIXTURES / "traces/synthetic_diurnal.csv")
        code, out, _ = run_cli(
            capsys, "schedule", "--trace", trace, "--job", job, "--policy", "greedy"
        )
        assert code == 0
        doc = json.loads(out)
        assert len(doc["allocations"]) == 36
        assert max(doc["allocations"]) <= 8


class TestSimulate:
    def test_deterministic_runs(self, capsys):
        argv = [
            "simulate", "--trace", DEMO_TRACE, "--job", DEMO_DIM, "--policy", "greedy",
            "--runs", "1", "--seed", "7", "--forecast-error", "25",
        ]
        code1, out1, _ = run_cli(capsys, *argv)
        code2, out2, _ = run_cli(capsys, *argv)
        assert code1 == code2 == 0
        assert out1 == out2

    def test_zero_error_matches_schedule_metrics(self, capsys):
        code, sched_out, _ = run_cli(
            capsys, "schedule", "--trace", DEMO_TRACE, "--job", DEMO_DIM, "--policy", "greedy"
        )
        code, sim_out, _ = run_cli(
            capsys, "simulate", "--trace", DEMO_TRACE, "--job", DEMO_DIM, "--policy", "greedy"
        )
        planned = json.loads(sched_out)["metrics"]
        realized = json.loads(sim_out)
        assert realized["carbon_g"] == planned["carbon_g"]
        assert realized["completion_slot"] == planned["completion_slot"]

    def test_full_denial_noop_when_inelastic(self, capsys, tmp_path):
        job = {
            "name": "rigid", "arrival_slot": 0, "length_slots": 2,
            "completion_slots": 3, "m": 1, "M": 1, "mc": [1.0],
        }
        path = tmp_path / "rigid.json"
        path.write_text(json.dumps(job))
        argv = ["simulate", "--trace", DEMO_TRACE, "--job", str(path),
                "--policy", "greedy", "--seed", "3"]
        _, base, _ = run_cli(capsys, *argv)
        _, denied, _ = run_cli(capsys, *argv, "--denial", "1.0")
        assert json.loads(base)["carbon_g"] == json.loads(denied)["carbon_g"]

    def test_multi_run_csv(self, capsys):
        code, out, _ = run_cli(
            capsys, "simulate", "--trace", DEMO_TRACE, "--job", DEMO_DIM,
            "--policy", "greedy", "--runs", "3", "--format", "csv",
            "--forecast-error", "20",
        )
        lines = out.strip().split("\n")
        assert lines[0] == "seed,carbon_g,compute_slot_hours,completion_slot,met_deadline"
        assert len(lines) == 4


class TestStats:
    def test_fig_trace_values(self, capsys):
        import statistics

        code, out, _ = run_cli(capsys, "stats", "--trace", DEMO_TRACE)
        assert code == 0
        doc = json.loads(out)
        values = [10.0, 100.0, 20.0]
        assert doc["mean"] == pytest.approx(statistics.fmean(values))
        assert doc["coefficient_of_variation"] == pytest.approx(
            statistics.pstdev(values) / statistics.fmean(values)
        )

    def test_constant_trace(self, capsys, tmp_path):
        trace = tmp_path / "flat.csv"
        trace.write_text(
            "timestamp,carbon_intensity_avg\n"
            "2021-03-22T00:00:00Z,50\n2021-03-22T01:00:00Z,50\n"
        )
        code, out, _ = run_cli(capsys, "stats", "--trace", str(trace))
        assert json.loads(out)["coefficient_of_variation"] == 0.0

    def test_missing_file_exit_2(self, capsys):
        code, _, _ = run_cli(capsys, "stats", "--trace", "/no/such.csv")
        assert code == 2


class TestSweep:
    def test_denial_axis_csv_and_report(self, capsys, tmp_path):
        report = tmp_path / "report"
        code, out, _ = run_cli(
            capsys, "sweep", "--trace", str(FIXTURES / "traces/synthetic_diurnal.csv"),
            "--job", str(FIXTURES / "jobs/nbody_100k_24h.json"),
            "--axis", "denial", "--values", "0", "0.5",
            "--policies", "greedy", "--runs", "2", "--format", "csv",
            "--report-dir", str(report),
        )
        assert code == 0
        lines = out.strip().split("\n")
        assert lines[0] == "axis_value,policy,seed,carbon_g,compute_slot_hours,completion_slot,met_deadline"
        assert (report / "sweep.csv").exists()
        assert (report / "summary.json").exists()
        assert (report / "sweep_carbon.png").stat().st_size > 0

    def test_start_time_axis_json(self, capsys):
        code, out, _ = run_cli(
            capsys, "sweep", "--trace", str(FIXTURES / "traces/synthetic_diurnal.csv"),
            "--job", DEMO_FLAT, "--axis", "start_time", "--stride", "48",
            "--policies", "greedy",
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["axis"] == "start_time"
        assert doc["cells"]


class TestServe:
    def test_bad_dir_exit_2(self, capsys):
        code, _, err = run_cli(capsys, "serve", "--traces", "/no/such/dir",
                               "--addr", "127.0.0.1:0")
        assert code == 2

    def test_occupied_port_exit_4(self, capsys):
        blocker = socket.socket()
        blocker.bind(("127.0.0.1", 0))
        port = blocker.getsockname()[1]
        try:
            code, _, err = run_cli(
                capsys, "serve", "--traces", str(FIXTURES / "traces"),
                "--addr", f"127.0.0.1:{port}",
            )
            assert code == 4
        finally:
            blocker.close()

    def test_serve_answers_regions(self, tmp_path):
        probe = socket.socket()
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
        probe.close()
        proc = subprocess.Popen(
            [sys.executable, "-m", "carbonsched.cli", "serve",
             "--traces", str(FIXTURES / "traces"), "--addr", f"127.0.0.1:{port}"],
            stdout=subprocess.PIPE, stderr=subprocess.PIPE,
        )
        try:
            body = None
            for _ in range(50):
                time.sleep(0.1)
                try:
                    with urllib.request.urlopen(
                        f"http://127.0.0.1:{port}/api/v1/regions", timeout=1
                    ) as response:
                        body = json.load(response)
                    break
                except OSError:
                    continue
            assert body is not None, "service never came up"
            assert {r["region"] for r in body} == {"demo", "synthetic_diurnal"}
        finally:
            proc.terminate()
            proc.wait(timeout=5)
