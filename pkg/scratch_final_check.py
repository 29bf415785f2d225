"""Scratch: mean-only pairs, squared vs plain objective, full RL, 3 seeds."""
import sys
import time

import numpy as np

from morphtransfer import alignment, dynamics, embedding, trajopt, transfer
from morphtransfer.seeding import derive_seed

seeds = [int(s) for s in sys.argv[1].split(",")] if len(sys.argv) > 1 else [1, 0, 2]
src_m = dynamics.three_link()
tgt_m = dynamics.four_link()
source_spec = dynamics.make_domain(src_m, "button_press", "shaped")
target_spec = dynamics.make_domain(tgt_m, "button_press", "sparse")
proxies = [
    (dynamics.make_domain(src_m, t, "shaped"), dynamics.make_domain(tgt_m, t, "shaped"))
    for t in ("reach", "block_move", "peg_insert")
]
rl = transfer.RlConfig(pair_samples=0)  # mean rollouts only

for seed in seeds:
    cache = {}
    src_trajs, tgt_trajs, _ = transfer.build_pairs(proxies, rl, seed, cache)
    pairs = alignment.time_align(src_trajs, tgt_trajs)
    pols, _ = trajopt.solve_domain(source_spec, 20, derive_seed(seed, "source"))
    source_trajs = [dynamics.mean_rollout(pols[ci], source_spec, ci) for ci in range(4)]
    for squared in (True, False):
        cfgt = embedding.TrainConfig(feature_dim=6, squared_norms=squared)
        model, _ = embedding.train_embedding(pairs, cfgt,
                                             seed=derive_seed(seed, "fit", "invariant"))
        sol = transfer.make_source_solution(model, source_trajs, pairs)
        cfg = transfer.TransferConfig(alpha0=1.0, method="invariant")
        extra = lambda it: transfer._penalty_for_iteration(sol, cfg, it, tgt_m.agent_dim)
        t0 = time.time()
        _, stats = trajopt.solve_domain(
            target_spec, 25, derive_seed(seed, "target"), samples_per_iter=5,
            extra_cost_for_iteration=extra,
        )
        curve = " ".join(f"{s.success_rate:.2f}" for s in stats)
        print(f"seed {seed} sq={int(squared)}: best "
              f"{max(s.success_rate for s in stats):.2f} [{curve}] "
              f"({time.time()-t0:.0f}s)", flush=True)
