"""Streaming distorter: consume (u, y, x) samples, emit cloaked (ubar, ybar).

The engine runs two virtual copies of the target mode.  The first is
closed under the tracking controller so its output reproduces the source
output exactly; the second replays the off-line kernel plan, adding a
distortion that the utility cannot see.  The emitted pair is the
superposition of both, and is by construction an exact trajectory of the
target mode.

When the true state is unavailable the engine buffers the first n
samples, recovers the initial state by deadbeat reconstruction, and only
then starts emitting; nothing is sent during the reconstruction window.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .invariance import KernelPlan, build_lifted_operators
from .linalg import DEFAULT_TOL, ToleranceConfig, lstsq_min_norm
from .modes import StateSpaceMode, Trajectory
from .regulation import TrackingController

__all__ = [
    "HorizonExhaustedError",
    "InconsistentDataError",
    "DistortionConfig",
    "DistortionEngine",
    "DistortedTrajectory",
    "StateReconstruction",
    "init_engine",
    "run_offline",
    "reconstruct_state",
]


class HorizonExhaustedError(RuntimeError):
    """A sample arrived after the configured horizon was completed."""


class InconsistentDataError(RuntimeError):
    """An I/O window is not explainable by the claimed mode."""

    def __init__(self, residual: float):
        super().__init__(
            f"window is inconsistent with the mode (residual {residual:.3e})"
        )
        self.residual = residual


@dataclass(frozen=True)
class DistortionConfig:
    """Everything a distortion run needs: mode pair, controller, plan, horizon."""

    true_mode: StateSpaceMode
    target_mode: StateSpaceMode
    controller: TrackingController
    plan: KernelPlan
    K: int

    def __post_init__(self):
        s, t, c, p = self.true_mode, self.target_mode, self.controller, self.plan
        if s.m != t.m or s.l != t.l:
            raise ValueError("source and target modes must share m and l")
        if c.R.shape != (t.l, t.n) or c.L.shape != (t.l, s.n) or c.S.shape != (t.l, t.l):
            raise ValueError("controller dimensions do not match the mode pair")
        if c.Pi.shape != (t.n, s.n):
            raise ValueError("controller initial-state map does not match the mode pair")
        if self.K < 2:
            raise ValueError("horizon must be at least 2")
        if p.K != self.K:
            raise ValueError(f"plan is bound to horizon {p.K}, configured {self.K}")
        if p.x2_init.shape[0] != t.n or p.U2.shape[1] != t.l:
            raise ValueError("plan dimensions do not match the target mode")
        if p.delta_Y.shape[0] != self.K * t.m:
            raise ValueError("plan distortion length does not match the horizon")


@dataclass(frozen=True)
class StateReconstruction:
    """Deadbeat state estimate from a noise-free I/O window."""

    x_start: np.ndarray
    x_current: np.ndarray
    residual: float


def reconstruct_state(
    mode: StateSpaceMode, U_window, Y_window, tol: ToleranceConfig = DEFAULT_TOL
) -> StateReconstruction:
    """Recover the state of an observable mode from recent I/O samples.

    ``Y_window`` holds at least n consecutive outputs and ``U_window`` the
    inputs between them (one fewer).  The window-start state is the least
    squares solution of the lifted response equations; it is exact for
    noise-free data and is propagated to the time of the last sample.

    Raises
    ------
    InconsistentDataError
        If the window is not explainable by this mode, i.e. the fit
        residual exceeds ``residual_tol`` (scaled by the data size).
    """
    Y = np.asarray(Y_window, dtype=float)
    if Y.ndim == 1:
        Y = Y.reshape(-1, 1)
    U = np.asarray(U_window, dtype=float)
    if U.ndim == 1:
        U = U.reshape(-1, 1) if U.size else U.reshape(0, mode.l)
    w = Y.shape[0]
    if w < mode.n:
        raise ValueError(f"need at least {mode.n} output samples, got {w}")
    if U.shape[0] != w - 1:
        raise ValueError("the window must hold one input less than outputs")
    if Y.shape[1] != mode.m or U.shape[1] != mode.l:
        raise ValueError("window dimensions do not match the mode")
    if w == 1:
        free = Y.reshape(-1)
        Ot = mode.C
    else:
        ops = build_lifted_operators(mode, w)
        free = Y.reshape(-1) - ops.apply(np.zeros(mode.n), U)
        Ot = ops.Ot
    x_start, residual = lstsq_min_norm(Ot, free, tol)
    if residual > tol.residual_tol * (1.0 + np.linalg.norm(Y)):
        raise InconsistentDataError(residual)
    x = x_start
    for k in range(w - 1):
        x = mode.A @ x + mode.B @ U[k]
    return StateReconstruction(x_start=x_start, x_current=x, residual=residual)


class DistortionEngine:
    """Single-owner streaming state of one distortion run.

    Feed samples in arrival order with :meth:`step`; the engine either
    emits the cloaked pair or withholds (returns None) while it is still
    reconstructing the source state.
    """

    def __init__(self, cfg: DistortionConfig, x1=None):
        self.cfg = cfg
        self._k = 1
        self._x1bar: Optional[np.ndarray] = None
        self._x2bar = cfg.plan.x2_init.copy()
        self._xhat: Optional[np.ndarray] = None
        self._u_buf: list[np.ndarray] = []
        self._y_buf: list[np.ndarray] = []
        if x1 is not None:
            x1 = np.asarray(x1, dtype=float).reshape(-1)
            if x1.shape[0] != cfg.true_mode.n:
                raise ValueError(
                    f"x1 has dimension {x1.shape[0]}, expected {cfg.true_mode.n}"
                )
            self._x1bar = cfg.controller.initial_virtual_state(x1)
            self._xhat = x1.copy()

    @property
    def k(self) -> int:
        """1-based index of the next expected sample."""
        return self._k

    @property
    def primed(self) -> bool:
        """Whether the virtual tracking state has been initialized."""
        return self._x1bar is not None

    def _advance(self, u: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Advance both virtual states through the current step; return ubar."""
        cfg = self.cfg
        k = self._k
        u1 = cfg.controller.R @ self._x1bar + cfg.controller.L @ x + cfg.controller.S @ u
        u2 = cfg.plan.U2[k - 1]
        self._x1bar = cfg.target_mode.A @ self._x1bar + cfg.target_mode.B @ u1
        self._x2bar = cfg.target_mode.A @ self._x2bar + cfg.target_mode.B @ u2
        self._xhat = cfg.true_mode.A @ x + cfg.true_mode.B @ u
        return u1 + u2

    def step(self, u, y, x=None):
        """Consume sample k and return (ubar, ybar), or None while withheld.

        ``u`` must be None at the final step k = K (there is no input
        there) and the returned pair is then (None, ybar).  While the
        engine is unprimed and reconstructing, samples are buffered and
        None is returned.
        """
        cfg = self.cfg
        if self._k > cfg.K:
            raise HorizonExhaustedError(f"horizon K = {cfg.K} already completed")
        k = self._k
        last = k == cfg.K
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape[0] != cfg.true_mode.m:
            raise ValueError(f"y has dimension {y.shape[0]}, expected {cfg.true_mode.m}")
        if last:
            if u is not None:
                raise ValueError("no input exists at the final sample")
        else:
            u = np.asarray(u, dtype=float).reshape(-1)
            if u.shape[0] != cfg.true_mode.l:
                raise ValueError(
                    f"u has dimension {u.shape[0]}, expected {cfg.true_mode.l}"
                )
        if x is not None:
            x = np.asarray(x, dtype=float).reshape(-1)
            if x.shape[0] != cfg.true_mode.n:
                raise ValueError(
                    f"x has dimension {x.shape[0]}, expected {cfg.true_mode.n}"
                )
            if not self.primed and k == 1:
                self._x1bar = cfg.controller.initial_virtual_state(x)
            if self.primed:
                self._xhat = x

        if not self.primed:
            # Reconstruction mode: buffer until n outputs are available,
            # then recover x(1), prime, and replay the withheld prefix.
            self._y_buf.append(y)
            if not last:
                self._u_buf.append(u)
            n = cfg.true_mode.n
            if len(self._y_buf) < n:
                self._k += 1
                return None
            rec = reconstruct_state(
                cfg.true_mode, np.array(self._u_buf[: n - 1]), np.array(self._y_buf)
            )
            self._x1bar = cfg.controller.initial_virtual_state(rec.x_start)
            self._xhat = rec.x_start
            replay_k = self._k
            self._k = 1
            for j in range(replay_k - 1):
                xj = self._xhat
                self._advance(self._u_buf[j], xj)
                self._k += 1
            self._u_buf.clear()
            self._y_buf.clear()
            # The current sample is still inside the withheld window.
            if not last:
                self._advance(u, self._xhat)
            self._k += 1
            return None

        if self._xhat is None:
            raise ValueError("engine is primed but has no source state to track")
        ybar = cfg.target_mode.C @ self._x1bar + cfg.target_mode.C @ self._x2bar
        if last:
            self._k += 1
            return None, ybar
        ubar = self._advance(u, self._xhat)
        self._k += 1
        return ubar, ybar


def init_engine(cfg: DistortionConfig, x1=None) -> DistortionEngine:
    """Create a streaming engine, primed when the initial state is known."""
    return DistortionEngine(cfg, x1=x1)


@dataclass(frozen=True)
class DistortedTrajectory:
    """The emitted cloaked trajectory plus its deviation from the original.

    ``k_start`` is the 1-based index of the first emitted sample; it is
    greater than one when the engine spent a reconstruction window
    withholding output.
    """

    Ubar: np.ndarray
    Ybar: np.ndarray
    delta_U: np.ndarray
    delta_Y_applied: np.ndarray
    k_start: int = 1

    def to_trajectory(self) -> Trajectory:
        return Trajectory(U=self.Ubar, Y=self.Ybar)


def run_offline(cfg: DistortionConfig, traj: Trajectory) -> DistortedTrajectory:
    """Replay a recorded trajectory through the streaming engine.

    Equivalent to folding :meth:`DistortionEngine.step` over the samples
    in order.  The trajectory must either carry states or be long enough
    for the engine to reconstruct them.
    """
    if traj.K != cfg.K:
        raise ValueError(f"trajectory horizon {traj.K} does not match configured {cfg.K}")
    if traj.m != cfg.true_mode.m or traj.l != cfg.true_mode.l:
        raise ValueError("trajectory dimensions do not match the source mode")
    has_states = traj.X is not None
    if not has_states and cfg.true_mode.n >= traj.K:
        raise ValueError(
            "stateless trajectory is too short for deadbeat reconstruction"
        )
    engine = DistortionEngine(cfg, x1=traj.X[0] if has_states else None)
    ubars: list[np.ndarray] = []
    ybars: list[np.ndarray] = []
    k_start = None
    for k in range(1, cfg.K + 1):
        u = traj.U[k - 1] if k < cfg.K else None
        x = traj.X[k - 1] if has_states else None
        out = engine.step(u, traj.Y[k - 1], x=x)
        if out is None:
            continue
        if k_start is None:
            k_start = k
        ubar, ybar = out
        if ubar is not None:
            ubars.append(ubar)
        ybars.append(ybar)
    if k_start is None:
        raise ValueError("the engine never emitted; trajectory too short")
    Ubar = np.array(ubars).reshape(-1, cfg.true_mode.l)
    Ybar = np.array(ybars).reshape(-1, cfg.true_mode.m)
    return DistortedTrajectory(
        Ubar=Ubar,
        Ybar=Ybar,
        delta_U=Ubar - traj.U[k_start - 1 :],
        delta_Y_applied=Ybar - traj.Y[k_start - 1 :],
        k_start=k_start,
    )
