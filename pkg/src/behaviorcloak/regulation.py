"""Exact output tracking of one mode by a virtual target mode.

The tracking design solves three coupled linear matrix equations for
(Pi, Gamma, Theta),

    A_t Pi - Pi A_s + B_t Gamma = 0
    C_t Pi - C_s               = 0
    B_t Theta - Pi B_s         = 0

where subscript ``s`` is the source (true) mode and ``t`` the target.
Any solution yields a static controller

    u_t(k) = R xbar(k) + L x(k) + S u(k),   L = Gamma - R Pi,  S = Theta,

that makes the target model's output reproduce the source output exactly
when the virtual state starts at ``xbar(1) = Pi x(1)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .linalg import DEFAULT_TOL, ToleranceConfig, is_schur, lstsq_min_norm
from .modes import StateSpaceMode, Trajectory

__all__ = [
    "RegulationInfeasibleError",
    "GainDesignError",
    "RegulatorSolution",
    "TrackingController",
    "RegulationDiagnostics",
    "regulator_residuals",
    "solve_regulator_equations",
    "design_stabilizing_gain",
    "build_tracking_controller",
    "verify_regulation",
    "save_controller",
    "load_controller",
]


class RegulationInfeasibleError(RuntimeError):
    """The target mode cannot reproduce the source mode's outputs exactly."""

    def __init__(self, residual: float):
        super().__init__(
            f"regulator equations are infeasible (best residual {residual:.3e})"
        )
        self.residual = residual


class GainDesignError(RuntimeError):
    """No Schur-stabilizing feedback gain was obtained."""


@dataclass(frozen=True)
class RegulatorSolution:
    """A feasible (Pi, Gamma, Theta) triple with its equation residual."""

    Pi: np.ndarray
    Gamma: np.ndarray
    Theta: np.ndarray
    residual: float


@dataclass(frozen=True)
class TrackingController:
    """Static tracking controller (R, L, S) plus the initial-state map Pi."""

    R: np.ndarray
    L: np.ndarray
    S: np.ndarray
    Pi: np.ndarray

    def initial_virtual_state(self, x1) -> np.ndarray:
        """Virtual initial condition ``Pi x(1)`` for a recorded source state."""
        return self.Pi @ np.asarray(x1, dtype=float).reshape(-1)


@dataclass(frozen=True)
class RegulationDiagnostics:
    """Per-step tracking and state-alignment error norms over a test horizon."""

    r_norms: np.ndarray
    e_norms: np.ndarray

    @property
    def max_r(self) -> float:
        return float(np.max(self.r_norms))

    @property
    def max_e(self) -> float:
        return float(np.max(self.e_norms))


def regulator_residuals(
    true_mode: StateSpaceMode,
    target_mode: StateSpaceMode,
    Pi,
    Gamma,
    Theta,
) -> tuple[float, float, float]:
    """Max-abs residual of each of the three regulator equations."""
    A_s, B_s, C_s = true_mode.A, true_mode.B, true_mode.C
    A_t, B_t, C_t = target_mode.A, target_mode.B, target_mode.C
    Pi = np.asarray(Pi, dtype=float)
    Gamma = np.atleast_2d(np.asarray(Gamma, dtype=float))
    Theta = np.atleast_2d(np.asarray(Theta, dtype=float))
    r1 = A_t @ Pi - Pi @ A_s + B_t @ Gamma
    r2 = C_t @ Pi - C_s
    r3 = B_t @ Theta - Pi @ B_s
    return (
        float(np.max(np.abs(r1))),
        float(np.max(np.abs(r2))),
        float(np.max(np.abs(r3))),
    )


def solve_regulator_equations(
    true_mode: StateSpaceMode,
    target_mode: StateSpaceMode,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> RegulatorSolution:
    """Solve the regulator equations for (Pi, Gamma, Theta).

    The three matrix equations are vectorized into one linear system in
    the stacked unknowns and solved by minimum-norm least squares.  A
    solution is accepted as feasible iff its max-abs equation residual is
    at most ``tol.residual_tol``; otherwise the target mode cannot imitate
    the source outputs and :class:`RegulationInfeasibleError` is raised.

    Raises
    ------
    ValueError
        If the two modes do not share input/output dimensions.
    RegulationInfeasibleError
        If the best residual exceeds ``tol.residual_tol``.
    """
    if true_mode.m != target_mode.m or true_mode.l != target_mode.l:
        raise ValueError("source and target modes must share m and l")
    n_s, n_t, m, l = true_mode.n, target_mode.n, true_mode.m, true_mode.l
    A_s, B_s, C_s = true_mode.A, true_mode.B, true_mode.C
    A_t, B_t, C_t = target_mode.A, target_mode.B, target_mode.C

    # Unknown layout: z = [vec(Pi); vec(Gamma); vec(Theta)], column-major.
    n_pi, n_gamma, n_theta = n_t * n_s, l * n_s, l * l
    cols = n_pi + n_gamma + n_theta
    rows = n_t * n_s + m * n_s + n_t * l
    M = np.zeros((rows, cols))
    b = np.zeros(rows)

    I_ns = np.eye(n_s)
    I_nt = np.eye(n_t)
    I_l = np.eye(l)

    r0 = 0
    # A_t Pi - Pi A_s + B_t Gamma = 0
    M[r0 : r0 + n_t * n_s, :n_pi] = np.kron(I_ns, A_t) - np.kron(A_s.T, I_nt)
    M[r0 : r0 + n_t * n_s, n_pi : n_pi + n_gamma] = np.kron(I_ns, B_t)
    r0 += n_t * n_s
    # C_t Pi = C_s
    M[r0 : r0 + m * n_s, :n_pi] = np.kron(I_ns, C_t)
    b[r0 : r0 + m * n_s] = C_s.reshape(-1, order="F")
    r0 += m * n_s
    # B_t Theta - Pi B_s = 0
    M[r0 : r0 + n_t * l, :n_pi] = -np.kron(B_s.T, I_nt)
    M[r0 : r0 + n_t * l, n_pi + n_gamma :] = np.kron(I_l, B_t)

    z, _ = lstsq_min_norm(M, b, tol)
    Pi = z[:n_pi].reshape(n_t, n_s, order="F")
    Gamma = z[n_pi : n_pi + n_gamma].reshape(l, n_s, order="F")
    Theta = z[n_pi + n_gamma :].reshape(l, l, order="F")
    residual = max(regulator_residuals(true_mode, target_mode, Pi, Gamma, Theta))
    if residual > tol.residual_tol:
        raise RegulationInfeasibleError(residual)
    return RegulatorSolution(Pi=Pi, Gamma=Gamma, Theta=Theta, residual=residual)


def design_stabilizing_gain(
    target_mode: StateSpaceMode,
    tol: ToleranceConfig = DEFAULT_TOL,
    gain=None,
    max_iter: int = 10000,
    fixed_point_tol: float = 1e-12,
) -> np.ndarray:
    """Feedback gain R making ``A + B R`` Schur stable.

    By default R is synthesized from the discrete-time Riccati fixed-point
    iteration with identity state and input weights,

        P <- A' P A - A' P B (I + B' P B)^(-1) B' P A + I,

    iterated until successive iterates differ by at most
    ``fixed_point_tol`` in max-abs norm; then ``R = -(I + B'PB)^(-1) B'PA``.
    A caller-supplied ``gain`` is accepted in place of synthesis and only
    checked for stability.

    Raises
    ------
    GainDesignError
        If the iteration does not converge, or the resulting (or supplied)
        gain is not Schur-stabilizing.
    """
    A, B = target_mode.A, target_mode.B
    if gain is not None:
        R = np.atleast_2d(np.asarray(gain, dtype=float))
        if R.shape != (target_mode.l, target_mode.n):
            raise ValueError(
                f"gain must have shape {(target_mode.l, target_mode.n)}, got {R.shape}"
            )
        if not is_schur(A + B @ R, tol):
            raise GainDesignError("supplied gain does not Schur-stabilize the target")
        return R

    I_n = np.eye(target_mode.n)
    I_l = np.eye(target_mode.l)
    P = I_n.copy()
    converged = False
    for _ in range(max_iter):
        BtPA = B.T @ P @ A
        gain_core = np.linalg.solve(I_l + B.T @ P @ B, BtPA)
        P_next = A.T @ P @ A - BtPA.T @ gain_core + I_n
        P_next = 0.5 * (P_next + P_next.T)
        if np.max(np.abs(P_next - P)) <= fixed_point_tol:
            P = P_next
            converged = True
            break
        P = P_next
    if not converged:
        raise GainDesignError("Riccati fixed-point iteration did not converge")
    R = -np.linalg.solve(I_l + B.T @ P @ B, B.T @ P @ A)
    if not is_schur(A + B @ R, tol):
        raise GainDesignError("synthesized gain failed the stability check")
    return R


def build_tracking_controller(
    sol: RegulatorSolution,
    R,
    target_mode: StateSpaceMode,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> TrackingController:
    """Assemble (R, L, S) with ``L = Gamma - R Pi`` and ``S = Theta``."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if not is_schur(target_mode.A + target_mode.B @ R, tol):
        raise ValueError("R must Schur-stabilize the target mode")
    return TrackingController(
        R=R, L=sol.Gamma - R @ sol.Pi, S=sol.Theta, Pi=sol.Pi
    )


def verify_regulation(
    true_mode: StateSpaceMode,
    target_mode: StateSpaceMode,
    ctrl: TrackingController,
    test_traj: Trajectory,
) -> RegulationDiagnostics:
    """Replay a recorded trajectory through the closed-loop virtual system.

    Simulates the virtual target model under the tracking controller from
    ``xbar(1) = Pi x(1)`` and reports per-step norms of the tracking
    error ``r(k) = ybar(k) - y(k)`` and the alignment error
    ``e(k) = xbar(k) - Pi x(k)``.  The trajectory must carry states.
    """
    if test_traj.X is None:
        raise ValueError("verification requires a trajectory with recorded states")
    K = test_traj.K
    r_norms = np.empty(K)
    e_norms = np.empty(K)
    xbar = ctrl.initial_virtual_state(test_traj.X[0])
    for k in range(K):
        x = test_traj.X[k]
        ybar = target_mode.C @ xbar
        r_norms[k] = np.linalg.norm(ybar - test_traj.Y[k])
        e_norms[k] = np.linalg.norm(xbar - ctrl.Pi @ x)
        if k < K - 1:
            u = test_traj.U[k]
            ubar = ctrl.R @ xbar + ctrl.L @ x + ctrl.S @ u
            xbar = target_mode.A @ xbar + target_mode.B @ ubar
    return RegulationDiagnostics(r_norms=r_norms, e_norms=e_norms)


def save_controller(ctrl: TrackingController, path) -> None:
    doc = {
        "R": ctrl.R.tolist(),
        "L": ctrl.L.tolist(),
        "S": ctrl.S.tolist(),
        "Pi": ctrl.Pi.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_controller(path) -> TrackingController:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        return TrackingController(
            R=np.array(doc["R"], dtype=float),
            L=np.array(doc["L"], dtype=float),
            S=np.array(doc["S"], dtype=float),
            Pi=np.array(doc["Pi"], dtype=float),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"ill-formed controller document: {exc}") from exc
