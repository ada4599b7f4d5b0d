"""End to end: the cloud sees an average car and the right average.

Pipeline: record a sports-car drive, design the tracking controller and
a unit-size kernel plan, stream the samples through the distortion
engine, then play adversary and classify both trajectories by behaviour
membership.
"""

import numpy as np

from behaviorcloak import (
    DistortionConfig,
    UtilitySpec,
    build_lifted_operators,
    build_tracking_controller,
    classify,
    design_stabilizing_gain,
    run_offline,
    simulate_mode,
    solve_regulator_equations,
    solve_utility_invariance,
    vehicle_demo_bank,
)

print(__doc__)

bank = vehicle_demo_bank()
sports, average = bank.mode(1), bank.mode(2)
K = 500

rng = np.random.default_rng(2)
drive = simulate_mode(sports, rng.normal(size=3), rng.uniform(-1, 1, size=(K - 1, 1)))

sol = solve_regulator_equations(sports, average)
ctrl = build_tracking_controller(sol, design_stabilizing_gain(average), average)
spec = UtilitySpec.average(K)
plan = solve_utility_invariance(
    build_lifted_operators(average, K), spec, magnitude=1.0, seed=3
)
cloaked = run_offline(DistortionConfig(sports, average, ctrl, plan, K), drive)

print("utility (average acceleration)")
print(f"  original : {spec.utility(drive.stacked_outputs())[0]: .12f}")
print(f"  cloaked  : {spec.utility(cloaked.Ybar.reshape(-1))[0]: .12f}")
print(f"  distortion size ||Ybar - Y|| = {np.linalg.norm(cloaked.Ybar - drive.Y):.6f}")

print()
print("classification by behaviour membership (accept_tol = 1e-6)")
for label, traj in [("original", drive), ("cloaked", cloaked.to_trajectory())]:
    report = classify(bank, traj)
    residuals = {k: f"{v:.2e}" for k, v in report.residuals.items()}
    print(f"  {label:9s}: verdict = {report.verdict}   residuals = {residuals}")

print()
print(
    "The cloaked pair is an exact trajectory of the average car, so the\n"
    "classifier accepts mode 2 and rejects mode 1 outright; the mean\n"
    "acceleration the cloud computes is unchanged.\n"
)
print("The same pipeline is scriptable:  behaviorcloak demo --out <dir> --K 500")
