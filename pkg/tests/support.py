"""Shared generators and reference constructions for the test suite."""

import numpy as np

from behaviorcloak import StateSpaceMode, Trajectory, simulate_mode, validate_mode


def random_valid_mode(rng, n=3, m=1, l=1, mode_id=1, radius=0.9):
    """Draw a mode passing all standing assumptions.

    The state matrix is rescaled to a spectral radius below ``radius`` so
    long simulations stay bounded.  When m <= l the draw is repeated until
    C B has full row rank, which makes every output sequence trackable and
    keeps kernel-steering problems feasible.
    """
    if n < max(m, l):
        raise ValueError("full-rank C and B need n >= max(m, l)")
    for _ in range(100):
        A = rng.standard_normal((n, n))
        rho = np.max(np.abs(np.linalg.eigvals(A)))
        if rho > 0:
            A = A * (radius * rng.uniform(0.3, 1.0) / rho)
        B = rng.standard_normal((n, l))
        C = rng.standard_normal((m, n))
        mode = StateSpaceMode(mode_id, A, B, C)
        if not validate_mode(mode).passed:
            continue
        if m <= l and np.linalg.matrix_rank(C @ B) < m:
            continue
        return mode
    raise RuntimeError("failed to draw a valid random mode")


def random_trajectory(rng, mode, K, input_scale=1.0) -> Trajectory:
    """Simulate the mode from a random state under bounded random inputs."""
    x1 = rng.standard_normal(mode.n)
    U = rng.uniform(-input_scale, input_scale, size=(K - 1, mode.l))
    return simulate_mode(mode, x1, U)


def double_integrator(mode_id=1, h=0.1) -> StateSpaceMode:
    """Observable, controllable double integrator with position output."""
    return StateSpaceMode(
        mode_id, A=[[1.0, h], [0.0, 1.0]], B=[[0.0], [h]], C=[[1.0, 0.0]]
    )


def scalar_mode(a, b=1.0, c=1.0, mode_id=1) -> StateSpaceMode:
    return StateSpaceMode(mode_id, A=[[a]], B=[[b]], C=[[c]])
