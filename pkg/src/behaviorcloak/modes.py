"""Operation modes, trajectories, discretization, and their on-disk formats.

A mode is one discrete-time linear system ``x(k+1) = A x(k) + B u(k)``,
``y(k) = C x(k)``.  A bank collects the modes a device can operate in;
all modes of a bank share the input and output dimensions so that any
recorded trajectory is dimensionally compatible with every mode.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .linalg import DEFAULT_TOL, ToleranceConfig, matrix_exponential

__all__ = [
    "StateSpaceMode",
    "ModeBank",
    "Trajectory",
    "ContinuousMode",
    "AssumptionCheck",
    "ModeValidationReport",
    "validate_mode",
    "discretize_zoh",
    "simulate_mode",
    "longitudinal_vehicle_mode",
    "vehicle_demo_bank",
    "load_mode_bank",
    "save_mode_bank",
    "read_trajectory_csv",
    "write_trajectory_csv",
]


def _frozen_array(value, name: str, ndim: int) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class StateSpaceMode:
    """One operation mode ``x(k+1) = A x(k) + B u(k)``, ``y(k) = C x(k)``."""

    mode_id: int
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = _frozen_array(self.A, "A", 2)
        B = _frozen_array(self.B, "B", 2)
        C = _frozen_array(self.C, "C", 2)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError("B must have as many rows as A")
        if C.shape[1] != A.shape[0]:
            raise ValueError("C must have as many columns as A")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        """State dimension."""
        return self.A.shape[0]

    @property
    def m(self) -> int:
        """Output dimension."""
        return self.C.shape[0]

    @property
    def l(self) -> int:
        """Input dimension."""
        return self.B.shape[1]

    def observability_matrix(self) -> np.ndarray:
        """Stack ``[C; CA; ...; C A^(n-1)]``."""
        blocks = [self.C]
        for _ in range(self.n - 1):
            blocks.append(blocks[-1] @ self.A)
        return np.vstack(blocks)

    def controllability_matrix(self) -> np.ndarray:
        """Stack ``[B, AB, ..., A^(n-1) B]``."""
        blocks = [self.B]
        for _ in range(self.n - 1):
            blocks.append(self.A @ blocks[-1])
        return np.hstack(blocks)


@dataclass(frozen=True)
class ModeBank:
    """Ordered collection of modes sharing input/output dimensions.

    Mode ids must be unique and contiguous ``1..N``.
    """

    modes: tuple[StateSpaceMode, ...]

    def __post_init__(self):
        modes = tuple(self.modes)
        if not modes:
            raise ValueError("a mode bank needs at least one mode")
        m, l = modes[0].m, modes[0].l
        for mode in modes:
            if mode.m != m or mode.l != l:
                raise ValueError(
                    "all modes in a bank must share output and input dimensions"
                )
        ids = sorted(mode.mode_id for mode in modes)
        if ids != list(range(1, len(modes) + 1)):
            raise ValueError("mode ids must be unique and contiguous 1..N")
        object.__setattr__(self, "modes", modes)

    @property
    def N(self) -> int:
        return len(self.modes)

    @property
    def m(self) -> int:
        return self.modes[0].m

    @property
    def l(self) -> int:
        return self.modes[0].l

    def mode(self, mode_id: int) -> StateSpaceMode:
        for mode in self.modes:
            if mode.mode_id == mode_id:
                return mode
        raise KeyError(f"no mode with id {mode_id} in bank")

    def __iter__(self):
        return iter(self.modes)


@dataclass(frozen=True)
class Trajectory:
    """Paired input/output record over a horizon of K samples.

    ``U`` holds u(1..K-1) row-wise, ``Y`` holds y(1..K) row-wise, and
    ``X`` optionally holds the true states x(1..K) when the generator
    recorded them.
    """

    U: np.ndarray
    Y: np.ndarray
    X: Optional[np.ndarray] = None

    def __post_init__(self):
        U = np.array(self.U, dtype=float)
        Y = np.array(self.Y, dtype=float)
        if U.ndim == 1:
            U = U.reshape(-1, 1)
        if Y.ndim == 1:
            Y = Y.reshape(-1, 1)
        if Y.shape[0] < 2:
            raise ValueError("a trajectory needs a horizon of at least K = 2")
        if U.shape[0] != Y.shape[0] - 1:
            raise ValueError(
                f"expected {Y.shape[0] - 1} input samples for {Y.shape[0]} outputs, "
                f"got {U.shape[0]}"
            )
        U.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "Y", Y)
        if self.X is not None:
            X = np.array(self.X, dtype=float)
            if X.ndim == 1:
                X = X.reshape(-1, 1)
            if X.shape[0] != Y.shape[0]:
                raise ValueError("X must record one state per output sample")
            X.setflags(write=False)
            object.__setattr__(self, "X", X)

    @property
    def K(self) -> int:
        return self.Y.shape[0]

    @property
    def m(self) -> int:
        return self.Y.shape[1]

    @property
    def l(self) -> int:
        return self.U.shape[1]

    def stacked_outputs(self) -> np.ndarray:
        """col[y(1); ...; y(K)] as a flat vector of length K*m."""
        return self.Y.reshape(-1)

    def stacked_inputs(self) -> np.ndarray:
        """col[u(1); ...; u(K-1)] as a flat vector of length (K-1)*l."""
        return self.U.reshape(-1)


@dataclass(frozen=True)
class ContinuousMode:
    """Continuous-time model ``dx/dt = A x + B u``, ``y = C x`` plus a sample period."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    sample_period: float

    def __post_init__(self):
        A = _frozen_array(self.A, "A", 2)
        B = _frozen_array(self.B, "B", 2)
        C = _frozen_array(self.C, "C", 2)
        if A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0] or C.shape[1] != A.shape[0]:
            raise ValueError("inconsistent continuous-time model dimensions")
        if not self.sample_period > 0.0:
            raise ValueError("sample_period must be positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    rank: int
    required: int

    @property
    def passed(self) -> bool:
        return self.rank >= self.required


@dataclass(frozen=True)
class ModeValidationReport:
    """Per-assumption rank report for one mode."""

    mode_id: int
    checks: tuple[AssumptionCheck, ...]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode_id,
            "passed": self.passed,
            "checks": [
                {
                    "name": c.name,
                    "rank": c.rank,
                    "required": c.required,
                    "passed": c.passed,
                }
                for c in self.checks
            ],
        }


def validate_mode(
    mode: StateSpaceMode, tol: ToleranceConfig = DEFAULT_TOL
) -> ModeValidationReport:
    """Check the standing assumptions on one mode.

    Reports the ranks of the observability and controllability matrices,
    the row rank of C, and the column rank of B.  The mode passes iff
    the pair (A, C) is observable, (A, B) is controllable, C maps onto
    the full output space, and B has a trivial kernel.
    """

    def rank(M: np.ndarray) -> int:
        return int(np.linalg.matrix_rank(M, rtol=tol.rank_cutoff(M)))

    checks = (
        AssumptionCheck("observability", rank(mode.observability_matrix()), mode.n),
        AssumptionCheck("controllability", rank(mode.controllability_matrix()), mode.n),
        AssumptionCheck("output_row_rank", rank(mode.C), mode.m),
        AssumptionCheck("input_column_rank", rank(mode.B), mode.l),
    )
    return ModeValidationReport(mode.mode_id, checks)


def discretize_zoh(cm: ContinuousMode, mode_id: int = 1) -> StateSpaceMode:
    """Exact zero-order-hold discretization at the model's sample period.

    Computes the exponential of the augmented matrix ``[[A, B], [0, 0]] * h``;
    its top-left block is the discrete state matrix and its top-right block
    the discrete input matrix.  The output matrix is unchanged.
    """
    n, l = cm.A.shape[0], cm.B.shape[1]
    aug = np.zeros((n + l, n + l))
    aug[:n, :n] = cm.A
    aug[:n, n:] = cm.B
    exp_aug = matrix_exponential(aug * cm.sample_period)
    return StateSpaceMode(
        mode_id=mode_id, A=exp_aug[:n, :n], B=exp_aug[:n, n:], C=cm.C
    )


def simulate_mode(mode: StateSpaceMode, x1, U) -> Trajectory:
    """Run the defining recursion from ``x1`` under the input sequence ``U``.

    ``U`` has one row per step, K-1 rows total; the returned trajectory
    records the state sequence.
    """
    x1 = np.asarray(x1, dtype=float).reshape(-1)
    if x1.shape[0] != mode.n:
        raise ValueError(f"x1 has dimension {x1.shape[0]}, expected {mode.n}")
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U.reshape(-1, 1)
    if U.shape[1] != mode.l:
        raise ValueError(f"U has {U.shape[1]} input channels, expected {mode.l}")
    K = U.shape[0] + 1
    X = np.empty((K, mode.n))
    Y = np.empty((K, mode.m))
    x = x1
    for k in range(K):
        X[k] = x
        Y[k] = mode.C @ x
        if k < K - 1:
            x = mode.A @ x + mode.B @ U[k]
    return Trajectory(U=U, Y=Y, X=X)


def longitudinal_vehicle_mode(
    tau: float, beta: float, sample_period: float = 0.1, mode_id: int = 1
) -> StateSpaceMode:
    """ZOH-discretized third-order longitudinal vehicle model.

    States are position, velocity, and acceleration; the acceleration is
    measured and the input is an acceleration command filtered through a
    power-train lag ``tau`` with engine gain ``beta``.
    """
    if tau <= 0.0 or beta <= 0.0:
        raise ValueError("tau and beta must be positive")
    cm = ContinuousMode(
        A=[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0 / tau]],
        B=[[0.0], [0.0], [beta / tau]],
        C=[[0.0, 0.0, 1.0]],
        sample_period=sample_period,
    )
    return discretize_zoh(cm, mode_id=mode_id)


def vehicle_demo_bank(sample_period: float = 0.1) -> ModeBank:
    """Two-mode demo bank: a fast sports car and a sluggish average car."""
    return ModeBank(
        (
            longitudinal_vehicle_mode(0.01, 1.50, sample_period, mode_id=1),
            longitudinal_vehicle_mode(0.60, 0.70, sample_period, mode_id=2),
        )
    )


# --- file formats -----------------------------------------------------------


def load_mode_bank(path) -> ModeBank:
    """Read a mode bank from its JSON document.

    The document carries the shared dimensions ``m`` and ``l`` plus one
    entry per mode with id and row-major A, B, C matrices.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        m, l = int(doc["m"]), int(doc["l"])
        entries = doc["modes"]
        modes = tuple(
            StateSpaceMode(
                mode_id=int(e["id"]), A=e["A"], B=e["B"], C=e["C"]
            )
            for e in entries
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"ill-formed mode bank document: {exc}") from exc
    bank = ModeBank(modes)
    if bank.m != m or bank.l != l:
        raise ValueError(
            f"declared dimensions (m={m}, l={l}) disagree with the mode "
            f"matrices (m={bank.m}, l={bank.l})"
        )
    return bank


def save_mode_bank(bank: ModeBank, path) -> None:
    doc = {
        "m": bank.m,
        "l": bank.l,
        "modes": [
            {
                "id": mode.mode_id,
                "A": mode.A.tolist(),
                "B": mode.B.tolist(),
                "C": mode.C.tolist(),
            }
            for mode in bank
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Write a trajectory as CSV with header ``k,u_1..u_l,y_1..y_m[,x_1..x_n]``.

    ``k`` is 1-based and the final row carries empty input cells (there is
    no input at the last sample).
    """
    header = (
        ["k"]
        + [f"u_{i + 1}" for i in range(traj.l)]
        + [f"y_{i + 1}" for i in range(traj.m)]
    )
    n = traj.X.shape[1] if traj.X is not None else 0
    header += [f"x_{i + 1}" for i in range(n)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(traj.K):
            row = [str(k + 1)]
            if k < traj.K - 1:
                row += [repr(float(v)) for v in traj.U[k]]
            else:
                row += [""] * traj.l
            row += [repr(float(v)) for v in traj.Y[k]]
            if traj.X is not None:
                row += [repr(float(v)) for v in traj.X[k]]
            writer.writerow(row)


def read_trajectory_csv(path) -> Trajectory:
    """Read a trajectory written by :func:`write_trajectory_csv`."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty trajectory file") from None
        rows = list(reader)
    l = sum(1 for name in header if name.startswith("u_"))
    m = sum(1 for name in header if name.startswith("y_"))
    n = sum(1 for name in header if name.startswith("x_"))
    if header[: 1 + l + m] != ["k"] + [f"u_{i + 1}" for i in range(l)] + [
        f"y_{i + 1}" for i in range(m)
    ]:
        raise ValueError(f"unexpected trajectory header: {header}")
    if not rows:
        raise ValueError("trajectory file has no data rows")
    K = len(rows)
    U = np.empty((K - 1, l))
    Y = np.empty((K, m))
    X = np.empty((K, n)) if n else None
    for idx, row in enumerate(rows):
        if len(row) != len(header):
            raise ValueError(f"row {idx + 1} has {len(row)} cells, expected {len(header)}")
        if int(row[0]) != idx + 1:
            raise ValueError("sample indices must be contiguous and 1-based")
        u_cells = row[1 : 1 + l]
        if idx < K - 1:
            U[idx] = [float(v) for v in u_cells]
        elif any(cell.strip() for cell in u_cells):
            raise ValueError("the final sample must not carry input values")
        Y[idx] = [float(v) for v in row[1 + l : 1 + l + m]]
        if X is not None:
            X[idx] = [float(v) for v in row[1 + l + m :]]
    return Trajectory(U=U, Y=Y, X=X)
