import numpy as np
import pytest

import support
from behaviorcloak import (
    ContinuousMode,
    ModeBank,
    StateSpaceMode,
    Trajectory,
    discretize_zoh,
    load_mode_bank,
    longitudinal_vehicle_mode,
    read_trajectory_csv,
    save_mode_bank,
    simulate_mode,
    validate_mode,
    vehicle_demo_bank,
    write_trajectory_csv,
)

# Printed discrete-time vehicle blocks, columns A | B.
SPORTS_AB = np.array(
    [
        [1.0, 0.1, 0.0009000, 0.0061499],
        [0.0, 1.0, 0.0099995, 0.1350010],
        [0.0, 0.0, 0.0000453, 1.4999300],
    ]
)
AVERAGE_AB = np.array(
    [
        [1.0, 0.1, 0.0047334, 0.0001866],
        [0.0, 1.0, 0.0921110, 0.0055223],
        [0.0, 0.0, 0.8464820, 0.1074630],
    ]
)


class TestStateSpaceMode:
    def test_dimension_checks(self):
        with pytest.raises(ValueError):
            StateSpaceMode(1, A=[[1.0, 0.0]], B=[[1.0]], C=[[1.0]])
        with pytest.raises(ValueError):
            StateSpaceMode(1, A=np.eye(2), B=[[1.0]], C=[[1.0, 0.0]])
        with pytest.raises(ValueError):
            StateSpaceMode(1, A=np.eye(2), B=[[1.0], [0.0]], C=[[1.0]])

    def test_arrays_frozen(self):
        mode = support.double_integrator()
        with pytest.raises(ValueError):
            mode.A[0, 0] = 2.0

    def test_dimensions(self):
        mode = support.double_integrator()
        assert (mode.n, mode.m, mode.l) == (2, 1, 1)


class TestModeBank:
    def test_requires_contiguous_ids(self):
        a = support.scalar_mode(0.5, mode_id=1)
        b = support.scalar_mode(0.8, mode_id=3)
        with pytest.raises(ValueError):
            ModeBank((a, b))

    def test_requires_shared_dimensions(self):
        a = support.scalar_mode(0.5, mode_id=1)
        b = support.double_integrator(mode_id=2)
        # double integrator shares m = l = 1, so this is fine
        bank = ModeBank((a, b))
        assert bank.N == 2 and bank.m == 1 and bank.l == 1
        c = StateSpaceMode(2, A=np.eye(2), B=np.eye(2), C=np.eye(2))
        with pytest.raises(ValueError):
            ModeBank((a, c))

    def test_lookup(self):
        bank = vehicle_demo_bank()
        assert bank.mode(2).mode_id == 2
        with pytest.raises(KeyError):
            bank.mode(9)


class TestValidateMode:
    def test_double_integrator_passes(self):
        report = validate_mode(support.double_integrator())
        assert report.passed
        assert [c.name for c in report.checks] == [
            "observability",
            "controllability",
            "output_row_rank",
            "input_column_rank",
        ]

    def test_decoupled_state_fails_observability(self):
        mode = StateSpaceMode(1, A=np.eye(2), B=[[1.0], [0.0]], C=[[1.0, 0.0]])
        report = validate_mode(mode)
        by_name = {c.name: c for c in report.checks}
        assert not report.passed
        assert by_name["observability"].rank == 1
        assert by_name["observability"].required == 2

    def test_vehicle_modes_report(self):
        # The acceleration output sees only the acceleration state: the
        # vehicle pair is controllable with full-rank C and B but NOT
        # observable (rank 1 of 3).  The report spells that out.
        for mode in vehicle_demo_bank():
            by_name = {c.name: c for c in validate_mode(mode).checks}
            assert by_name["controllability"].passed
            assert by_name["output_row_rank"].passed
            assert by_name["input_column_rank"].passed
            assert not by_name["observability"].passed
            assert by_name["observability"].rank == 1

    def test_invariant_under_similarity_transform(self):
        rng = np.random.default_rng(5)
        passing = support.random_valid_mode(rng)
        failing = StateSpaceMode(1, A=np.eye(2), B=[[1.0], [0.0]], C=[[1.0, 0.0]])
        for mode in (passing, failing):
            expected = validate_mode(mode).passed
            for case in range(25):
                Q, _ = np.linalg.qr(rng.standard_normal((mode.n, mode.n)))
                scale = np.diag(rng.uniform(0.5, 2.0, size=mode.n))
                T = Q @ scale
                T_inv = np.linalg.inv(T)
                transformed = StateSpaceMode(
                    1, A=T @ mode.A @ T_inv, B=T @ mode.B, C=mode.C @ T_inv
                )
                assert validate_mode(transformed).passed == expected


class TestDiscretizeZoh:
    def test_pure_gain_integrator(self):
        cm = ContinuousMode(
            A=np.zeros((2, 2)), B=[[1.0], [2.0]], C=[[1.0, 0.0]], sample_period=0.25
        )
        mode = discretize_zoh(cm)
        np.testing.assert_allclose(mode.A, np.eye(2), atol=1e-15)
        np.testing.assert_allclose(mode.B, [[0.25], [0.5]], atol=1e-15)
        np.testing.assert_array_equal(mode.C, cm.C)

    @pytest.mark.parametrize(
        "tau, beta, printed",
        [(0.01, 1.50, SPORTS_AB), (0.60, 0.70, AVERAGE_AB)],
    )
    def test_vehicle_blocks_match_printed_values(self, tau, beta, printed):
        mode = longitudinal_vehicle_mode(tau, beta, sample_period=0.1)
        np.testing.assert_allclose(
            np.hstack([mode.A, mode.B]), printed, atol=5e-5
        )

    def test_matches_fine_step_rk4_oracle(self):
        # Integrate the continuous model with RK4 at 1/1000 of the sample
        # period and compare state trajectories at the sampling instants.
        rng = np.random.default_rng(6)
        for tau, beta in [(0.01, 1.50), (0.60, 0.70)]:
            h = 0.1
            A_c = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0 / tau]])
            B_c = np.array([[0.0], [0.0], [beta / tau]])
            mode = longitudinal_vehicle_mode(tau, beta, sample_period=h)
            x_exact = rng.standard_normal(3)
            x_rk4 = x_exact.copy()
            for step in range(20):
                u = rng.uniform(-1.0, 1.0, size=1)
                x_exact = mode.A @ x_exact + mode.B @ u

                def f(x):
                    return A_c @ x + (B_c @ u)

                dt = h / 1000.0
                for _ in range(1000):
                    k1 = f(x_rk4)
                    k2 = f(x_rk4 + 0.5 * dt * k1)
                    k3 = f(x_rk4 + 0.5 * dt * k2)
                    k4 = f(x_rk4 + dt * k3)
                    x_rk4 = x_rk4 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                np.testing.assert_allclose(x_exact, x_rk4, rtol=1e-6, atol=1e-9)


class TestSimulateMode:
    def test_geometric_decay(self):
        traj = simulate_mode(support.scalar_mode(0.5), [1.0], np.zeros((2, 1)))
        np.testing.assert_allclose(traj.Y.ravel(), [1.0, 0.5, 0.25])

    def test_direct_recursion(self):
        traj = simulate_mode(support.scalar_mode(0.5), [0.0], np.ones((2, 1)))
        np.testing.assert_allclose(traj.Y.ravel(), [0.0, 1.0, 1.5])

    def test_zero_everything(self):
        mode = support.double_integrator()
        traj = simulate_mode(mode, np.zeros(2), np.zeros((9, 1)))
        np.testing.assert_array_equal(traj.Y, np.zeros((10, 1)))

    def test_defining_recursion_is_exact(self):
        rng = np.random.default_rng(7)
        mode = support.random_valid_mode(rng)
        traj = support.random_trajectory(rng, mode, K=40)
        for k in range(traj.K):
            np.testing.assert_array_equal(traj.Y[k], mode.C @ traj.X[k])
            if k < traj.K - 1:
                np.testing.assert_array_equal(
                    traj.X[k + 1], mode.A @ traj.X[k] + mode.B @ traj.U[k]
                )

    def test_dimension_mismatch(self):
        mode = support.double_integrator()
        with pytest.raises(ValueError):
            simulate_mode(mode, [1.0], np.zeros((3, 1)))
        with pytest.raises(ValueError):
            simulate_mode(mode, [1.0, 0.0], np.zeros((3, 2)))


class TestTrajectory:
    def test_length_invariants(self):
        with pytest.raises(ValueError):
            Trajectory(U=np.zeros((3, 1)), Y=np.zeros((3, 1)))
        with pytest.raises(ValueError):
            Trajectory(U=np.zeros((0, 1)), Y=np.zeros((1, 1)))

    def test_stacking_order(self):
        traj = Trajectory(U=[[1.0], [2.0]], Y=[[1.0, 10.0], [2.0, 20.0], [3.0, 30.0]])
        np.testing.assert_array_equal(
            traj.stacked_outputs(), [1.0, 10.0, 2.0, 20.0, 3.0, 30.0]
        )
        np.testing.assert_array_equal(traj.stacked_inputs(), [1.0, 2.0])


class TestFileFormats:
    def test_bank_roundtrip(self, tmp_path):
        bank = vehicle_demo_bank()
        path = tmp_path / "bank.json"
        save_mode_bank(bank, path)
        loaded = load_mode_bank(path)
        assert loaded.N == bank.N
        for original, read in zip(bank, loaded):
            np.testing.assert_array_equal(original.A, read.A)
            np.testing.assert_array_equal(original.B, read.B)
            np.testing.assert_array_equal(original.C, read.C)

    def test_bank_rejects_inconsistent_declared_dims(self, tmp_path):
        path = tmp_path / "bank.json"
        path.write_text(
            '{"m": 2, "l": 1, "modes": [{"id": 1, "A": [[0.5]], "B": [[1.0]], "C": [[1.0]]}]}'
        )
        with pytest.raises(ValueError):
            load_mode_bank(path)

    def test_bank_rejects_missing_fields(self, tmp_path):
        path = tmp_path / "bank.json"
        path.write_text('{"m": 1, "modes": []}')
        with pytest.raises(ValueError):
            load_mode_bank(path)

    def test_trajectory_roundtrip_exact(self, tmp_path):
        rng = np.random.default_rng(8)
        mode = support.random_valid_mode(rng, n=2, m=2, l=2)
        traj = support.random_trajectory(rng, mode, K=7)
        path = tmp_path / "traj.csv"
        write_trajectory_csv(traj, path)
        loaded = read_trajectory_csv(path)
        np.testing.assert_array_equal(loaded.U, traj.U)
        np.testing.assert_array_equal(loaded.Y, traj.Y)
        np.testing.assert_array_equal(loaded.X, traj.X)

    def test_final_row_has_empty_inputs(self, tmp_path):
        traj = simulate_mode(support.scalar_mode(0.5), [1.0], np.ones((2, 1)))
        path = tmp_path / "traj.csv"
        write_trajectory_csv(traj, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "k,u_1,y_1,x_1"
        assert lines[-1].split(",")[1] == ""

    def test_reader_rejects_gapped_indices(self, tmp_path):
        path = tmp_path / "traj.csv"
        path.write_text("k,u_1,y_1\n1,0.0,1.0\n3,,0.5\n")
        with pytest.raises(ValueError):
            read_trajectory_csv(path)

    def test_reader_rejects_input_on_final_row(self, tmp_path):
        path = tmp_path / "traj.csv"
        path.write_text("k,u_1,y_1\n1,0.0,1.0\n2,9.0,0.5\n")
        with pytest.raises(ValueError):
            read_trajectory_csv(path)
