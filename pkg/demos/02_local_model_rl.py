#!/usr/bin/env python3
"""Trajectory-centric RL on the shaped reaching task.

Each iteration: sample a handful of episodes per condition, fit per-timestep
linear dynamics, expand the cost to second order, and improve the
time-varying linear-Gaussian policies with the damped LQG backward pass.
"""
import numpy as np

from morphtransfer import dynamics, trajopt

spec = dynamics.make_domain(dynamics.three_link(), "reach", "shaped")
print(f"reach task: {len(spec.conditions)} goal placements, horizon {spec.horizon}")

policies, stats = trajopt.solve_domain(spec, iterations=10, seed=0)
print("\niter  mean cost  success  step")
for s in stats:
    print(f"{s.iteration:4d}  {s.mean_cost:9.2f}  {s.success_rate:7.2f}  {s.step_size:.3f}")

trajopt.write_stats_csv(stats, "reach_learning.csv")
print("\nper-iteration stats written to reach_learning.csv")

for ci in range(len(spec.conditions)):
    traj = dynamics.mean_rollout(policies[ci], spec, ci)
    ee = dynamics.forward_kinematics(
        traj.states[-1].joints[:3], spec.morphology.link_lengths
    )[-1]
    goal = spec.conditions[ci][2:]
    print(f"condition {ci}: final ee {np.round(ee, 3)} vs goal {goal} "
          f"-> {'hit' if traj.success else 'miss'}")
