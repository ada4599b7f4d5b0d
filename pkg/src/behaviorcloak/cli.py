"""Command-line orchestration of the distortion pipeline.

Subcommands: ``validate`` a mode bank, ``design`` a controller and
distortion plan for a mode pair, ``distort`` a recorded trajectory,
``classify`` a trajectory against a bank, and ``demo`` for the
two-vehicle end-to-end scenario.

Exit codes: 0 success, 1 a validation check failed, 2 bad input or
configuration, 3 regulation infeasible, 4 utility invariance infeasible.
The environment variable ``BEHAVIOR_CLOAK_SEED`` overrides ``--seed``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classify import classify
from .distort import DistortionConfig, run_offline
from .invariance import (
    InvarianceInfeasibleError,
    KernelAssumptionError,
    UtilitySpec,
    build_lifted_operators,
    load_kernel_plan,
    load_utility_spec,
    save_kernel_plan,
    solve_utility_invariance,
)
from .modes import (
    ModeBank,
    load_mode_bank,
    read_trajectory_csv,
    save_mode_bank,
    simulate_mode,
    validate_mode,
    vehicle_demo_bank,
    write_trajectory_csv,
)
from .regulation import (
    GainDesignError,
    RegulationInfeasibleError,
    build_tracking_controller,
    design_stabilizing_gain,
    load_controller,
    save_controller,
    solve_regulator_equations,
)

__all__ = ["main", "ScenarioConfig"]

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_INPUT = 2
EXIT_REGULATION_INFEASIBLE = 3
EXIT_INVARIANCE_INFEASIBLE = 4

SEED_ENV_VAR = "BEHAVIOR_CLOAK_SEED"


@dataclass(frozen=True)
class ScenarioConfig:
    """A design scenario: bank, mode pair, utility, horizon, plan size."""

    bank: ModeBank
    true_mode_id: int
    target_mode_id: int
    utility: UtilitySpec
    K: int
    magnitude: float
    seed: int

    def __post_init__(self):
        if self.true_mode_id == self.target_mode_id:
            raise ValueError("the target mode must differ from the true mode")
        self.bank.mode(self.true_mode_id)
        self.bank.mode(self.target_mode_id)
        if self.utility.K != self.K or self.utility.m != self.bank.m:
            raise ValueError("utility spec is bound to a different horizon or output size")


def _resolve_seed(args) -> int:
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ValueError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from None
    return args.seed


def _resolve_utility(value: str, K: int, m: int) -> UtilitySpec:
    if value == "average":
        return UtilitySpec.average(K, m)
    return load_utility_spec(value)


def _print_json(doc) -> None:
    json.dump(doc, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _cmd_validate(args) -> int:
    bank = load_mode_bank(args.bank)
    reports = [validate_mode(mode) for mode in bank]
    _print_json({"modes": [rep.to_dict() for rep in reports]})
    return EXIT_OK if all(rep.passed for rep in reports) else EXIT_CHECK_FAILED


def _cmd_design(args) -> int:
    bank = load_mode_bank(args.bank)
    utility = _resolve_utility(args.utility, args.K, bank.m)
    scenario = ScenarioConfig(
        bank=bank,
        true_mode_id=args.true_mode,
        target_mode_id=args.target_mode,
        utility=utility,
        K=args.K,
        magnitude=args.magnitude,
        seed=_resolve_seed(args),
    )
    true_mode = bank.mode(scenario.true_mode_id)
    target_mode = bank.mode(scenario.target_mode_id)
    sol = solve_regulator_equations(true_mode, target_mode)
    gain = design_stabilizing_gain(target_mode)
    ctrl = build_tracking_controller(sol, gain, target_mode)
    ops = build_lifted_operators(target_mode, scenario.K)
    plan = solve_utility_invariance(
        ops, scenario.utility, magnitude=scenario.magnitude, seed=scenario.seed
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_controller(ctrl, out / "controller.json")
    save_kernel_plan(plan, out / "plan.json")
    _print_json(
        {
            "controller": str(out / "controller.json"),
            "plan": str(out / "plan.json"),
            "regulator_residual": sol.residual,
            "plan_residual": plan.residual,
            "kernel_deviation": float(
                np.linalg.norm(scenario.utility.F @ plan.delta_Y)
            ),
        }
    )
    return EXIT_OK


def _cmd_distort(args) -> int:
    bank = load_mode_bank(args.bank)
    if args.true_mode == args.target_mode:
        raise ValueError("the target mode must differ from the true mode")
    true_mode = bank.mode(args.true_mode)
    target_mode = bank.mode(args.target_mode)
    ctrl = load_controller(args.controller)
    plan = load_kernel_plan(args.plan, target_mode)
    traj = read_trajectory_csv(args.input)
    if traj.X is None:
        raise ValueError("the input trajectory must carry state columns")
    if traj.K != plan.K:
        raise ValueError(
            f"trajectory horizon {traj.K} does not match the plan horizon {plan.K}"
        )
    utility = _resolve_utility(args.utility, traj.K, bank.m)
    cfg = DistortionConfig(true_mode, target_mode, ctrl, plan, traj.K)
    distorted = run_offline(cfg, traj)
    write_trajectory_csv(distorted.to_trajectory(), args.out)
    _print_json(
        {
            "output": str(args.out),
            "utility_original": utility.utility(traj.stacked_outputs()).tolist(),
            "utility_distorted": utility.utility(distorted.Ybar.reshape(-1)).tolist(),
        }
    )
    return EXIT_OK


def _cmd_classify(args) -> int:
    bank = load_mode_bank(args.bank)
    traj = read_trajectory_csv(args.input)
    report = classify(bank, traj, accept_tol=args.accept_tol)
    _print_json(report.to_dict())
    return EXIT_OK


def _cmd_demo(args) -> int:
    seed = _resolve_seed(args)
    K = args.K
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bank = vehicle_demo_bank()
    sports, average = bank.mode(1), bank.mode(2)
    save_mode_bank(bank, out / "bank.json")

    rng = np.random.default_rng(seed)
    x1 = rng.normal(size=sports.n)
    U = rng.uniform(-1.0, 1.0, size=(K - 1, sports.l))
    traj = simulate_mode(sports, x1, U)
    write_trajectory_csv(traj, out / "original.csv")

    sol = solve_regulator_equations(sports, average)
    gain = design_stabilizing_gain(average)
    ctrl = build_tracking_controller(sol, gain, average)
    save_controller(ctrl, out / "controller.json")

    utility = UtilitySpec.average(K, sports.m)
    ops = build_lifted_operators(average, K)
    plan = solve_utility_invariance(
        ops, utility, magnitude=args.magnitude, seed=seed + 1
    )
    save_kernel_plan(plan, out / "plan.json")

    from .invariance import KernelPlan

    zero_plan = KernelPlan.zero(average.n, K, average.m, average.l)
    tracked = run_offline(
        DistortionConfig(sports, average, ctrl, zero_plan, K), traj
    )
    cloaked = run_offline(DistortionConfig(sports, average, ctrl, plan, K), traj)
    write_trajectory_csv(cloaked.to_trajectory(), out / "distorted.csv")

    _write_figure(out / "fig1.csv", ["k", "y", "ybar1"], traj.Y, tracked.Ybar)
    _write_figure(out / "fig2.csv", ["k", "u", "ubar1"], traj.U, tracked.Ubar)
    _write_figure(out / "fig3.csv", ["k", "y", "ybar"], traj.Y, cloaked.Ybar)
    _write_figure(out / "fig4.csv", ["k", "u", "ubar"], traj.U, cloaked.Ubar)

    report_original = classify(bank, traj, accept_tol=args.accept_tol)
    report_cloaked = classify(
        bank, cloaked.to_trajectory(), accept_tol=args.accept_tol
    )
    _print_json(
        {
            "output_directory": str(out),
            "K": K,
            "seed": seed,
            "max_tracking_error": float(
                np.max(np.abs(tracked.Ybar - traj.Y))
            ),
            "distortion_norm": float(np.linalg.norm(cloaked.Ybar - traj.Y)),
            "utility_original": utility.utility(traj.stacked_outputs()).tolist(),
            "utility_distorted": utility.utility(cloaked.Ybar.reshape(-1)).tolist(),
            "classified_original": report_original.to_dict(),
            "classified_distorted": report_cloaked.to_dict(),
        }
    )
    return EXIT_OK


def _write_figure(path, header, *columns) -> None:
    """Plot-ready CSV: the 1-based sample index next to paired traces."""
    rows = min(col.shape[0] for col in columns)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(rows):
            cells = [str(k + 1)] + [repr(float(col[k][0])) for col in columns]
            fh.write(",".join(cells) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="behaviorcloak",
        description="Distort mode trajectories without changing their utility.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check the standing assumptions of a bank")
    p.add_argument("--bank", required=True, help="mode bank JSON file")
    p.set_defaults(handler=_cmd_validate)

    p = sub.add_parser("design", help="design a tracking controller and a plan")
    p.add_argument("--bank", required=True)
    p.add_argument("--true-mode", type=int, required=True)
    p.add_argument("--target-mode", type=int, required=True)
    p.add_argument(
        "--utility",
        default="average",
        help='utility spec JSON file, or "average" for the per-channel mean',
    )
    p.add_argument("--K", type=int, required=True, help="horizon length")
    p.add_argument("--magnitude", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="directory for the design artifacts")
    p.set_defaults(handler=_cmd_design)

    p = sub.add_parser("distort", help="cloak a recorded trajectory")
    p.add_argument("--bank", required=True)
    p.add_argument("--true-mode", type=int, required=True)
    p.add_argument("--target-mode", type=int, required=True)
    p.add_argument("--controller", required=True, help="controller JSON file")
    p.add_argument("--plan", required=True, help="plan JSON file")
    p.add_argument("--input", required=True, help="trajectory CSV (with states)")
    p.add_argument("--utility", default="average")
    p.add_argument("--out", required=True, help="output trajectory CSV")
    p.set_defaults(handler=_cmd_distort)

    p = sub.add_parser("classify", help="score a trajectory against a bank")
    p.add_argument("--bank", required=True)
    p.add_argument("--input", required=True, help="trajectory CSV")
    p.add_argument("--accept-tol", type=float, default=1e-6)
    p.set_defaults(handler=_cmd_classify)

    p = sub.add_parser("demo", help="run the two-vehicle demo end to end")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--K", type=int, default=500)
    p.add_argument("--magnitude", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--accept-tol", type=float, default=1e-6)
    p.set_defaults(handler=_cmd_demo)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (RegulationInfeasibleError, GainDesignError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REGULATION_INFEASIBLE
    except (KernelAssumptionError, InvarianceInfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANCE_INFEASIBLE
    except (OSError, json.JSONDecodeError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
