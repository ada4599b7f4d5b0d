import json

import numpy as np
import pytest

import support
from behaviorcloak import (
    ModeBank,
    UtilitySpec,
    load_kernel_plan,
    load_mode_bank,
    save_mode_bank,
    save_utility_spec,
    simulate_mode,
    vehicle_demo_bank,
    write_trajectory_csv,
)
from behaviorcloak.cli import main


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


@pytest.fixture()
def valid_bank_path(tmp_path):
    rng = np.random.default_rng(70)
    bank = ModeBank(
        (
            support.random_valid_mode(rng, mode_id=1),
            support.random_valid_mode(rng, mode_id=2),
        )
    )
    path = tmp_path / "bank.json"
    save_mode_bank(bank, path)
    return path


@pytest.fixture()
def vehicle_bank_path(tmp_path):
    path = tmp_path / "vehicle_bank.json"
    save_mode_bank(vehicle_demo_bank(), path)
    return path


class TestValidateCommand:
    def test_all_assumptions_hold(self, capsys, valid_bank_path):
        code, report = run_cli(capsys, "validate", "--bank", valid_bank_path)
        assert code == 0
        assert all(entry["passed"] for entry in report["modes"])

    def test_failing_check_is_named(self, capsys, vehicle_bank_path):
        # The vehicle modes measure only acceleration, so observability
        # genuinely fails; the report must name the failed check.
        code, report = run_cli(capsys, "validate", "--bank", vehicle_bank_path)
        assert code == 1
        failed = [
            check["name"]
            for entry in report["modes"]
            for check in entry["checks"]
            if not check["passed"]
        ]
        assert set(failed) == {"observability"}

    def test_missing_file(self, capsys, tmp_path):
        assert main(["validate", "--bank", str(tmp_path / "nope.json")]) == 2

    def test_ill_formed_file(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert main(["validate", "--bank", str(path)]) == 2


class TestDesignCommand:
    def test_vehicle_scenario(self, capsys, vehicle_bank_path, tmp_path):
        out = tmp_path / "design"
        code, report = run_cli(
            capsys,
            "design",
            "--bank", vehicle_bank_path,
            "--true-mode", 1,
            "--target-mode", 2,
            "--K", 500,
            "--magnitude", 1.0,
            "--seed", 3,
            "--out", out,
        )
        assert code == 0
        assert (out / "controller.json").exists()
        assert (out / "plan.json").exists()
        assert report["kernel_deviation"] <= 1e-9
        # Reload the plan and confirm its response averages to zero.
        bank = load_mode_bank(vehicle_bank_path)
        plan = load_kernel_plan(out / "plan.json", bank.mode(2))
        spec = UtilitySpec.average(500)
        assert abs(spec.F @ plan.delta_Y) <= 1e-9

    def test_same_mode_pair_rejected(self, capsys, vehicle_bank_path, tmp_path):
        code = main(
            [
                "design",
                "--bank", str(vehicle_bank_path),
                "--true-mode", "1",
                "--target-mode", "1",
                "--K", "100",
                "--out", str(tmp_path / "x"),
            ]
        )
        assert code == 2

    def test_trivial_kernel_exit_code(self, capsys, vehicle_bank_path, tmp_path):
        utility_path = tmp_path / "utility.json"
        save_utility_spec(
            UtilitySpec(F=np.eye(4), mu=np.zeros(4), K=4), utility_path
        )
        code = main(
            [
                "design",
                "--bank", str(vehicle_bank_path),
                "--true-mode", "1",
                "--target-mode", "2",
                "--utility", str(utility_path),
                "--K", "4",
                "--out", str(tmp_path / "x"),
            ]
        )
        assert code == 4

    def test_infeasible_pair_exit_code(self, capsys, valid_bank_path, tmp_path):
        code = main(
            [
                "design",
                "--bank", str(valid_bank_path),
                "--true-mode", "1",
                "--target-mode", "2",
                "--K", "50",
                "--out", str(tmp_path / "x"),
            ]
        )
        assert code == 3


class TestDistortAndClassify:
    @pytest.fixture()
    def designed(self, capsys, vehicle_bank_path, tmp_path):
        out = tmp_path / "design"
        assert (
            main(
                [
                    "design",
                    "--bank", str(vehicle_bank_path),
                    "--true-mode", "1",
                    "--target-mode", "2",
                    "--K", "200",
                    "--seed", "4",
                    "--out", str(out),
                ]
            )
            == 0
        )
        capsys.readouterr()
        bank = load_mode_bank(vehicle_bank_path)
        rng = np.random.default_rng(71)
        traj = support.random_trajectory(rng, bank.mode(1), K=200)
        traj_path = tmp_path / "original.csv"
        write_trajectory_csv(traj, traj_path)
        return vehicle_bank_path, out, traj_path

    def test_roundtrip_preserves_utility_and_fools_classifier(
        self, capsys, designed, tmp_path
    ):
        bank_path, design_dir, traj_path = designed
        out_csv = tmp_path / "distorted.csv"
        code, report = run_cli(
            capsys,
            "distort",
            "--bank", bank_path,
            "--true-mode", 1,
            "--target-mode", 2,
            "--controller", design_dir / "controller.json",
            "--plan", design_dir / "plan.json",
            "--input", traj_path,
            "--out", out_csv,
        )
        assert code == 0
        u_orig = report["utility_original"][0]
        u_dist = report["utility_distorted"][0]
        assert abs(u_dist - u_orig) <= 1e-8 * (1.0 + abs(u_orig))

        code, verdict_orig = run_cli(
            capsys, "classify", "--bank", bank_path, "--input", traj_path
        )
        assert code == 0 and verdict_orig["verdict"] == "1"
        code, verdict_dist = run_cli(
            capsys, "classify", "--bank", bank_path, "--input", out_csv
        )
        assert code == 0 and verdict_dist["verdict"] == "2"

    def test_horizon_mismatch(self, capsys, designed, tmp_path):
        bank_path, design_dir, _ = designed
        bank = load_mode_bank(bank_path)
        rng = np.random.default_rng(72)
        short = support.random_trajectory(rng, bank.mode(1), K=60)
        short_path = tmp_path / "short.csv"
        write_trajectory_csv(short, short_path)
        code = main(
            [
                "distort",
                "--bank", str(bank_path),
                "--true-mode", "1",
                "--target-mode", "2",
                "--controller", str(design_dir / "controller.json"),
                "--plan", str(design_dir / "plan.json"),
                "--input", str(short_path),
                "--out", str(tmp_path / "out.csv"),
            ]
        )
        assert code == 2

    def test_zero_trajectory_ambiguous(self, capsys, vehicle_bank_path, tmp_path):
        bank = load_mode_bank(vehicle_bank_path)
        zero = simulate_mode(bank.mode(1), np.zeros(3), np.zeros((29, 1)))
        path = tmp_path / "zero.csv"
        write_trajectory_csv(zero, path)
        code, report = run_cli(
            capsys, "classify", "--bank", vehicle_bank_path, "--input", path
        )
        assert code == 0
        assert report["verdict"] == "AMBIGUOUS"


class TestDemoCommand:
    def test_default_run_figures(self, capsys, tmp_path):
        out = tmp_path / "demo"
        code, report = run_cli(capsys, "demo", "--out", out, "--K", 300)
        assert code == 0
        for name in ("fig1.csv", "fig2.csv", "fig3.csv", "fig4.csv"):
            assert (out / name).exists()

        fig1 = np.loadtxt(out / "fig1.csv", delimiter=",", skiprows=1)
        scale = 1.0 + np.max(np.abs(fig1[:, 1]))
        assert np.max(np.abs(fig1[:, 1] - fig1[:, 2])) <= 1e-6 * scale

        fig3 = np.loadtxt(out / "fig3.csv", delimiter=",", skiprows=1)
        delta = fig3[:, 2] - fig3[:, 1]
        assert np.linalg.norm(delta) == pytest.approx(1.0, abs=1e-6)
        mean_orig = fig3[:, 1].mean()
        mean_dist = fig3[:, 2].mean()
        assert abs(mean_dist - mean_orig) <= 1e-8 * (1.0 + abs(mean_orig))

        assert report["classified_original"]["verdict"] == "1"
        assert report["classified_distorted"]["verdict"] == "2"

    def test_byte_identical_reruns(self, capsys, tmp_path):
        first = tmp_path / "a"
        second = tmp_path / "b"
        assert main(["demo", "--out", str(first), "--K", "120", "--seed", "9"]) == 0
        assert main(["demo", "--out", str(second), "--K", "120", "--seed", "9"]) == 0
        capsys.readouterr()
        for name in sorted(p.name for p in first.iterdir()):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_env_var_overrides_seed(self, capsys, tmp_path, monkeypatch):
        flagged = tmp_path / "flagged"
        env = tmp_path / "env"
        assert main(["demo", "--out", str(flagged), "--K", "80", "--seed", "5"]) == 0
        monkeypatch.setenv("BEHAVIOR_CLOAK_SEED", "5")
        assert main(["demo", "--out", str(env), "--K", "80", "--seed", "0"]) == 0
        capsys.readouterr()
        assert (flagged / "original.csv").read_bytes() == (
            env / "original.csv"
        ).read_bytes()
