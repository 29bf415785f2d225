"""Scratch calibration: shaped-cost learning on every task/morphology."""
import sys
import time

import numpy as np

from morphtransfer import dynamics, trajopt

tasks = sys.argv[1].split(",") if len(sys.argv) > 1 else list(dynamics.TASKS)
morphs = sys.argv[2].split(",") if len(sys.argv) > 2 else ["three_link", "four_link", "tendon_three_link"]
iters = int(sys.argv[3]) if len(sys.argv) > 3 else 15

for morph_name in morphs:
    morph = dynamics.MORPHOLOGIES[morph_name]()
    for task in tasks:
        spec = dynamics.make_domain(morph, task, "shaped")
        t0 = time.time()
        pols, stats = trajopt.solve_domain(spec, iters, seed=0)
        trajs = [dynamics.mean_rollout(pols[ci], spec, ci) for ci in range(len(spec.conditions))]
        succ = [t.success for t in trajs]
        dists = [dynamics._final_distance(t.states[-1], spec) for t in trajs]
        curve = " ".join(f"{s.success_rate:.2f}" for s in stats)
        print(
            f"{morph_name:18s} {task:13s} mean-pol succ {sum(succ)}/4 "
            f"dists {np.round(dists,3)} sampled curve [{curve}] ({time.time()-t0:.0f}s)"
        )
