"""Scratch: variant sweep for the button transfer on one seed."""
import sys
import time

import numpy as np

from morphtransfer import alignment, dynamics, embedding, trajopt, transfer
from morphtransfer.seeding import derive_seed

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1

src_m = dynamics.three_link()
tgt_m = dynamics.four_link()
rl = transfer.RlConfig()
cache = {}
proxy_pairs = [
    (dynamics.make_domain(src_m, t, "shaped"), dynamics.make_domain(tgt_m, t, "shaped"))
    for t in ("reach", "block_move", "peg_insert")
]
src_trajs, tgt_trajs, _ = transfer.build_pairs(proxy_pairs, rl, seed, cache)
pairs = alignment.time_align(src_trajs, tgt_trajs)

source_spec = dynamics.make_domain(src_m, "button_press", "shaped")
pols, _ = trajopt.solve_domain(source_spec, 20, derive_seed(seed, "source"))
source_trajs = [dynamics.mean_rollout(pols[ci], source_spec, ci) for ci in range(4)]
print("source ok:", [t.success for t in source_trajs], flush=True)


def run_variant(label, model, alpha, radius=0.1, pair_set=None):
    target_spec = dynamics.make_domain(tgt_m, "button_press", "sparse",
                                       contact_radius=radius)
    sol = transfer.make_source_solution(model, source_trajs, pair_set or pairs)
    cfg = transfer.TransferConfig(alpha0=alpha, method="invariant")
    extra = lambda it: transfer._penalty_for_iteration(sol, cfg, it, tgt_m.agent_dim)
    t0 = time.time()
    policies, stats = trajopt.solve_domain(
        target_spec, 25, derive_seed(seed, "target"),
        samples_per_iter=5, extra_cost_for_iteration=extra,
    )
    curve = " ".join(f"{s.success_rate:.2f}" for s in stats)
    best = max(s.success_rate for s in stats)
    final = [dynamics.mean_rollout(policies[ci], target_spec, ci).success for ci in range(4)]
    print(f"{label}: best {best:.2f} final {final} [{curve}] ({time.time()-t0:.0f}s)",
          flush=True)


variants = []
for fd in (6, 4):
    cfgt = embedding.TrainConfig(feature_dim=fd)
    model, _ = embedding.train_embedding(pairs, cfgt, seed=derive_seed(seed, "fit", "invariant"))
    variants.append((fd, model))

for fd, model in variants:
    for alpha in (1.0, 2.0, 4.0):
        run_variant(f"fd{fd} a{alpha}", model, alpha)

# em alignment variant
cfgt = embedding.TrainConfig(feature_dim=6)
em_model, em_pairs, diag = alignment.em_align(src_trajs, tgt_trajs, rounds=3,
                                              config=cfgt,
                                              seed=derive_seed(seed, "align"))
ee_s = dynamics._ee_batch(em_pairs.source[:, :3], src_m.link_lengths)
ee_t = dynamics._ee_batch(em_pairs.target[:, :4], tgt_m.link_lengths)
print("em pairs ee mismatch:", round(float(np.linalg.norm(ee_s - ee_t, axis=1).mean()), 4))
run_variant("em fd6 a1", em_model, 1.0, pair_set=em_pairs)
run_variant("em fd6 a2", em_model, 2.0, pair_set=em_pairs)
