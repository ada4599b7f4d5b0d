"""Behaviour-membership classification of input-output trajectories.

A trajectory belongs to a mode's behaviour iff some initial state
explains its outputs given its inputs.  The classifier scores each mode
in a bank by the normalized least-squares distance of the trajectory
from that mode's behaviour and accepts every mode below a tolerance;
several accepted modes mean the trajectory is not classifiable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .invariance import build_lifted_operators
from .linalg import DEFAULT_TOL, ToleranceConfig, lstsq_min_norm
from .modes import ModeBank, StateSpaceMode, Trajectory

__all__ = [
    "AMBIGUOUS",
    "NONE",
    "ClassificationReport",
    "mode_residual",
    "classify",
]

AMBIGUOUS = "AMBIGUOUS"
NONE = "NONE"


@dataclass(frozen=True)
class ClassificationReport:
    """Per-mode behaviour residuals and the accepted-mode set."""

    residuals: dict[int, float]
    accept_tol: float

    @property
    def accepted(self) -> tuple[int, ...]:
        return tuple(
            mode_id
            for mode_id, residual in self.residuals.items()
            if residual <= self.accept_tol
        )

    @property
    def verdict(self):
        """The single accepted mode id, or AMBIGUOUS / NONE."""
        accepted = self.accepted
        if len(accepted) == 1:
            return accepted[0]
        return AMBIGUOUS if accepted else NONE

    def to_dict(self) -> dict:
        return {
            "residuals": {str(k): v for k, v in self.residuals.items()},
            "accepted": list(self.accepted),
            "verdict": str(self.verdict),
        }


def mode_residual(
    mode: StateSpaceMode, traj: Trajectory, tol: ToleranceConfig = DEFAULT_TOL
) -> float:
    """Normalized distance of a trajectory from a mode's behaviour.

    Minimizes ``||Y - Ot x - Tt U||`` over the initial state x and
    normalizes by ``1 + ||Y||``.  The forced response is removed
    matrix-free, so the cost stays linear in the horizon.
    """
    if traj.m != mode.m or traj.l != mode.l:
        raise ValueError("trajectory dimensions do not match the mode")
    ops = build_lifted_operators(mode, traj.K)
    Y = traj.stacked_outputs()
    free = Y - ops.apply(np.zeros(mode.n), traj.U)
    _, residual = lstsq_min_norm(ops.Ot, free, tol)
    return residual / (1.0 + float(np.linalg.norm(Y)))


def classify(
    bank: ModeBank,
    traj: Trajectory,
    accept_tol: float = 1e-6,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> ClassificationReport:
    """Score a trajectory against every mode of a bank."""
    residuals = {
        mode.mode_id: mode_residual(mode, traj, tol) for mode in bank
    }
    return ClassificationReport(residuals=residuals, accept_tol=accept_tol)
