"""Utility-invariant distortion plans for a target mode.

The free response of the target model over a horizon K is

    Ytilde = Ot x(1) + Tt U,

with ``Ot`` the block observability matrix and ``Tt`` the block-Toeplitz
forced-response matrix.  A distortion plan steers ``Ytilde`` into the
kernel of the known utility matrix F, so adding it to a transmitted
output trajectory leaves ``F Y + mu`` unchanged.

Plans are found by draw-project-solve: project a seeded Gaussian draw
into Ker[F], then solve for a target-model trajectory matching the
projection by minimum-norm least squares.  Below a size threshold the
solve is a dense factorization; above it, the lifted operators are
applied matrix-free (FFT convolution against the Markov parameters) and
the system is solved iteratively, which keeps the paper-scale horizons
tractable.  A dense cross-check path computes the full nullspace of the
three-block feasibility system instead; it is limited to small horizons.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.signal import fftconvolve
from scipy.sparse.linalg import LinearOperator, lsmr

from .linalg import (
    DEFAULT_TOL,
    ToleranceConfig,
    lstsq_min_norm,
    nullspace_basis,
    pseudoinverse,
)
from .modes import StateSpaceMode

__all__ = [
    "KernelAssumptionError",
    "InvarianceInfeasibleError",
    "UtilitySpec",
    "LiftedOperators",
    "KernelPlan",
    "build_lifted_operators",
    "kernel_projector",
    "solve_utility_invariance",
    "load_utility_spec",
    "save_utility_spec",
    "load_kernel_plan",
    "save_kernel_plan",
]

# Entry budget above which dense lifted matrices are refused and the
# matrix-free path takes over.
_DENSE_ENTRY_LIMIT = 4_000_000


class KernelAssumptionError(RuntimeError):
    """The utility matrix has a trivial kernel; only the zero plan exists."""


class InvarianceInfeasibleError(RuntimeError):
    """No reachable kernel element of the requested size was found."""


@dataclass(frozen=True)
class UtilitySpec:
    """Known affine part ``F Y + mu`` of a trajectory utility.

    ``F`` acts on the stacked output trajectory of length ``K * m``;
    ``mu`` is an offset that cancels under additive distortion and is
    stored only for evaluating utilities.
    """

    F: np.ndarray
    mu: np.ndarray
    K: int
    kernel_nontrivial: bool = field(init=False)

    def __post_init__(self):
        F = np.atleast_2d(np.array(self.F, dtype=float))
        mu = np.array(self.mu, dtype=float).reshape(-1)
        if not (np.all(np.isfinite(F)) and np.all(np.isfinite(mu))):
            raise ValueError("utility matrices must be finite")
        if self.K < 2:
            raise ValueError("utility horizon must be at least 2")
        if F.shape[1] % self.K != 0:
            raise ValueError(
                f"F has {F.shape[1]} columns, not a multiple of the horizon {self.K}"
            )
        if mu.shape[0] != F.shape[0]:
            raise ValueError("mu must have one entry per row of F")
        F.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "mu", mu)
        rank = int(np.linalg.matrix_rank(F, rtol=DEFAULT_TOL.rank_cutoff(F)))
        object.__setattr__(self, "kernel_nontrivial", rank < F.shape[1])

    @property
    def q(self) -> int:
        return self.F.shape[0]

    @property
    def m(self) -> int:
        return self.F.shape[1] // self.K

    def utility(self, stacked_outputs) -> np.ndarray:
        """Evaluate ``F Y + mu`` on a stacked output trajectory."""
        return self.F @ np.asarray(stacked_outputs, dtype=float).reshape(-1) + self.mu

    @classmethod
    def average(cls, K: int, m: int = 1) -> "UtilitySpec":
        """Per-channel average of the output over the horizon."""
        return cls(F=np.tile(np.eye(m), (1, K)) / K, mu=np.zeros(m), K=K)


@dataclass(frozen=True)
class LiftedOperators:
    """Horizon-K response operators of one mode.

    ``Ot`` is the stacked observability matrix (K*m rows); the Toeplitz
    forced-response matrix is represented by the Markov parameter
    sequence ``markov[i] = C A^i B`` and materialized on demand.  Use
    :meth:`apply`/:meth:`apply_adjoint` for horizons where the dense
    Toeplitz matrix would not fit.
    """

    mode_id: int
    K: int
    Ot: np.ndarray
    markov: np.ndarray

    @property
    def n(self) -> int:
        return self.Ot.shape[1]

    @property
    def m(self) -> int:
        return self.markov.shape[1]

    @property
    def l(self) -> int:
        return self.markov.shape[2]

    @cached_property
    def Tt(self) -> np.ndarray:
        """Dense block-Toeplitz forced-response matrix (small horizons only)."""
        K, m, l = self.K, self.m, self.l
        if K * m * (K - 1) * l > _DENSE_ENTRY_LIMIT:
            raise ValueError(
                "dense Toeplitz matrix exceeds the size budget at this horizon; "
                "use apply()/apply_adjoint()"
            )
        Tt = np.zeros((K * m, (K - 1) * l))
        for i in range(1, K):
            for j in range(i):
                Tt[i * m : (i + 1) * m, j * l : (j + 1) * l] = self.markov[i - j - 1]
        return Tt

    def apply(self, x, U) -> np.ndarray:
        """Stacked response ``Ot x + Tt U`` without forming ``Tt``."""
        x = np.asarray(x, dtype=float).reshape(-1)
        U = np.asarray(U, dtype=float).reshape(self.K - 1, self.l)
        out = (self.Ot @ x).reshape(self.K, self.m).copy()
        for a in range(self.m):
            for b in range(self.l):
                conv = fftconvolve(self.markov[:, a, b], U[:, b])
                out[1:, a] += conv[: self.K - 1]
        return out.reshape(-1)

    def apply_adjoint(self, w) -> tuple[np.ndarray, np.ndarray]:
        """Adjoint pair ``(Ot' w, Tt' w)`` without forming ``Tt``."""
        w = np.asarray(w, dtype=float).reshape(self.K, self.m)
        x_adj = self.Ot.T @ w.reshape(-1)
        U_adj = np.zeros((self.K - 1, self.l))
        tail = w[1:]
        for a in range(self.m):
            for b in range(self.l):
                conv = fftconvolve(tail[:, a], self.markov[::-1, a, b])
                U_adj[:, b] += conv[self.K - 2 : 2 * self.K - 3]
        return x_adj, U_adj.reshape(-1)


def build_lifted_operators(target_mode: StateSpaceMode, K: int) -> LiftedOperators:
    """Assemble the horizon-K lifted operators of a mode.

    Row blocks ``C A^k`` are accumulated by iterated multiplication, never
    by explicit matrix powers.
    """
    if K < 2:
        raise ValueError("horizon must be at least 2")
    m, n, l = target_mode.m, target_mode.n, target_mode.l
    Ot = np.empty((K * m, n))
    markov = np.empty((K - 1, m, l))
    row = target_mode.C
    for k in range(K):
        Ot[k * m : (k + 1) * m] = row
        if k < K - 1:
            markov[k] = row @ target_mode.B
            row = row @ target_mode.A
    return LiftedOperators(mode_id=target_mode.mode_id, K=K, Ot=Ot, markov=markov)


def kernel_projector(spec: UtilitySpec, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Orthogonal projector ``I - F^+ F`` onto Ker[F] (small horizons only)."""
    dim = spec.F.shape[1]
    if dim * dim > _DENSE_ENTRY_LIMIT:
        raise ValueError(
            "dense kernel projector exceeds the size budget at this horizon"
        )
    return np.eye(dim) - pseudoinverse(spec.F, tol) @ spec.F


@dataclass(frozen=True)
class KernelPlan:
    """Off-line plan steering the target model's free output into Ker[F].

    ``delta_Y`` is the attained stacked response; ``residual`` is its
    distance from the kernel element the solver aimed at.  ``theta`` is
    the kernel parameter used (None for zero or deserialized plans).
    """

    x2_init: np.ndarray
    U2: np.ndarray
    delta_Y: np.ndarray
    theta: Optional[np.ndarray]
    residual: float
    seed: Optional[int]
    magnitude: float

    def __post_init__(self):
        x2 = np.array(self.x2_init, dtype=float).reshape(-1)
        U2 = np.atleast_2d(np.array(self.U2, dtype=float))
        delta = np.array(self.delta_Y, dtype=float).reshape(-1)
        for arr in (x2, U2, delta):
            arr.setflags(write=False)
        object.__setattr__(self, "x2_init", x2)
        object.__setattr__(self, "U2", U2)
        object.__setattr__(self, "delta_Y", delta)
        if self.theta is not None:
            theta = np.array(self.theta, dtype=float).reshape(-1)
            theta.setflags(write=False)
            object.__setattr__(self, "theta", theta)

    @property
    def K(self) -> int:
        return self.U2.shape[0] + 1

    @classmethod
    def zero(
        cls, n: int, K: int, m: int, l: int, seed: Optional[int] = None
    ) -> "KernelPlan":
        return cls(
            x2_init=np.zeros(n),
            U2=np.zeros((K - 1, l)),
            delta_Y=np.zeros(K * m),
            theta=None,
            residual=0.0,
            seed=seed,
            magnitude=0.0,
        )


def _solve_exact_trajectory(ops: LiftedOperators, delta, tol: ToleranceConfig):
    """Minimum-norm least-squares solve of ``Ot x + Tt U = delta``.

    Uses a dense factorization when the stacked system fits the entry
    budget and a matrix-free LSMR iteration otherwise.
    """
    rows = ops.K * ops.m
    cols = ops.n + (ops.K - 1) * ops.l
    delta = np.asarray(delta, dtype=float).reshape(-1)
    if rows * cols <= _DENSE_ENTRY_LIMIT:
        M = np.hstack([ops.Ot, ops.Tt])
        z, residual = lstsq_min_norm(M, delta, tol)
    else:
        op = LinearOperator(
            (rows, cols),
            matvec=lambda z: ops.apply(z[: ops.n], z[ops.n :]),
            rmatvec=lambda w: np.concatenate(ops.apply_adjoint(w)),
        )
        z = lsmr(
            op,
            delta,
            atol=1e-14,
            btol=1e-14,
            conlim=0.0,
            maxiter=min(5000, 3 * rows),
        )[0]
        residual = float(np.linalg.norm(ops.apply(z[: ops.n], z[ops.n :]) - delta))
    return z[: ops.n], z[ops.n :].reshape(ops.K - 1, ops.l), residual


def solve_utility_invariance(
    ops: LiftedOperators,
    spec: UtilitySpec,
    magnitude: float = 1.0,
    seed: int = 0,
    tol: ToleranceConfig = DEFAULT_TOL,
    method: str = "structured",
    max_redraws: int = 16,
) -> KernelPlan:
    """Find an initial condition and input sequence whose response lies in Ker[F].

    Parameters
    ----------
    ops : LiftedOperators
        Horizon-K operators of the target mode.
    spec : UtilitySpec
        The utility whose value must stay invariant; must be bound to the
        same horizon and output dimension as ``ops``.
    magnitude : float
        Requested 2-norm of the distortion ``delta_Y``.  Zero returns the
        zero plan unconditionally.
    seed : int
        Seed for the Gaussian draws; plans are reproducible bit-for-bit.
    method : {"structured", "dense"}
        The structured path projects a draw into Ker[F] and solves for a
        matching trajectory (scales to large K).  The dense path draws a
        combination from the nullspace of the stacked three-block
        feasibility system and is meant for small-horizon cross-checks.

    Raises
    ------
    KernelAssumptionError
        If F has a trivial kernel and a nonzero plan is requested.
    InvarianceInfeasibleError
        If every redraw fails to produce a reachable kernel element of
        the requested size.
    """
    if spec.K != ops.K or spec.m != ops.m:
        raise ValueError("utility spec and lifted operators disagree on K or m")
    if magnitude < 0.0:
        raise ValueError("magnitude must be nonnegative")
    if magnitude == 0.0:
        return KernelPlan.zero(ops.n, ops.K, ops.m, ops.l, seed=seed)
    if not spec.kernel_nontrivial:
        raise KernelAssumptionError(
            "utility matrix has a trivial kernel; only the zero plan preserves it"
        )
    if method == "structured":
        return _solve_structured(ops, spec, magnitude, seed, tol, max_redraws)
    if method == "dense":
        return _solve_dense(ops, spec, magnitude, seed, tol, max_redraws)
    raise ValueError(f"unknown method {method!r}")


def _solve_structured(ops, spec, magnitude, seed, tol, max_redraws):
    rng = np.random.default_rng(seed)
    F_pinv = pseudoinverse(spec.F, tol)
    dim = spec.F.shape[1]
    for _ in range(max_redraws):
        theta = rng.standard_normal(dim)
        delta = theta - F_pinv @ (spec.F @ theta)
        norm = np.linalg.norm(delta)
        if norm <= 1e-12 * max(1.0, np.linalg.norm(theta)):
            continue
        scale = magnitude / norm
        delta = delta * scale
        x, U, residual = _solve_exact_trajectory(ops, delta, tol)
        if residual <= tol.residual_tol * (1.0 + magnitude):
            return KernelPlan(
                x2_init=x,
                U2=U,
                delta_Y=ops.apply(x, U),
                theta=theta * scale,
                residual=residual,
                seed=seed,
                magnitude=magnitude,
            )
    raise InvarianceInfeasibleError(
        "no reachable element of Ker[F] of the requested size after "
        f"{max_redraws} draws; the target behaviour may not intersect the kernel"
    )


def _solve_dense(ops, spec, magnitude, seed, tol, max_redraws):
    rng = np.random.default_rng(seed)
    dim = spec.F.shape[1]
    P_row = pseudoinverse(spec.F, tol) @ spec.F
    stacked = np.hstack([ops.Ot, ops.Tt, P_row - np.eye(dim)])
    basis = nullspace_basis(stacked, tol)
    if basis.shape[1] == 0:
        raise InvarianceInfeasibleError("the feasibility system has no solutions")
    n, width = ops.n, basis.shape[1]
    for _ in range(max_redraws):
        v = basis @ rng.standard_normal(width)
        x = v[:n]
        U = v[n : n + (ops.K - 1) * ops.l]
        theta = v[n + (ops.K - 1) * ops.l :]
        delta = ops.apply(x, U)
        norm = np.linalg.norm(delta)
        if norm <= 1e-12 * max(1.0, np.linalg.norm(v)):
            continue
        scale = magnitude / norm
        x, U, theta, delta = x * scale, U * scale, theta * scale, delta * scale
        kernel_target = theta - P_row @ theta
        return KernelPlan(
            x2_init=x,
            U2=U.reshape(ops.K - 1, ops.l),
            delta_Y=delta,
            theta=theta,
            residual=float(np.linalg.norm(delta - kernel_target)),
            seed=seed,
            magnitude=magnitude,
        )
    raise InvarianceInfeasibleError(
        f"every nullspace draw produced a zero distortion after {max_redraws} tries"
    )


# --- file formats -----------------------------------------------------------


def load_utility_spec(path) -> UtilitySpec:
    """Read a utility spec, either explicit {K, q, F, mu} or the
    {"kind": "average", "K": ..., "m": ...} shorthand."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("kind") == "average":
        try:
            return UtilitySpec.average(int(doc["K"]), int(doc["m"]))
        except KeyError as exc:
            raise ValueError(f"average utility shorthand needs K and m: {exc}") from exc
    try:
        spec = UtilitySpec(
            F=np.array(doc["F"], dtype=float),
            mu=np.array(doc["mu"], dtype=float),
            K=int(doc["K"]),
        )
        if spec.q != int(doc["q"]):
            raise ValueError("declared q disagrees with the rows of F")
    except (KeyError, TypeError) as exc:
        raise ValueError(f"ill-formed utility spec document: {exc}") from exc
    return spec


def save_utility_spec(spec: UtilitySpec, path) -> None:
    doc = {"K": spec.K, "q": spec.q, "F": spec.F.tolist(), "mu": spec.mu.tolist()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def save_kernel_plan(plan: KernelPlan, path) -> None:
    doc = {
        "x2_init": plan.x2_init.tolist(),
        "U2": plan.U2.tolist(),
        "seed": plan.seed,
        "magnitude": plan.magnitude,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_kernel_plan(path, target_mode: StateSpaceMode) -> KernelPlan:
    """Read a plan and rebuild its response by simulating the target mode."""
    from .modes import simulate_mode

    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        x2 = np.array(doc["x2_init"], dtype=float)
        U2 = np.array(doc["U2"], dtype=float)
        seed = doc.get("seed")
        magnitude = float(doc["magnitude"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"ill-formed plan document: {exc}") from exc
    delta = simulate_mode(target_mode, x2, U2).stacked_outputs()
    return KernelPlan(
        x2_init=x2,
        U2=U2,
        delta_Y=delta,
        theta=None,
        residual=0.0,
        seed=seed,
        magnitude=magnitude,
    )
