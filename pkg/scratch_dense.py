"""Scratch: does a denser reach proxy (more goal placements) fix seed 1?"""
import sys
import time

import numpy as np

from morphtransfer import alignment, dynamics, embedding, trajopt, transfer
from morphtransfer.seeding import derive_seed

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
n_reach = int(sys.argv[2]) if len(sys.argv) > 2 else 10

# reach goals spread over the workspace annulus
angles = np.linspace(-0.5, 1.9, n_reach)
radii = np.tile([0.55, 0.75, 0.9], int(np.ceil(n_reach / 3)))[:n_reach]
goals = np.stack([radii * np.cos(angles), radii * np.sin(angles)], 1)
conds = [np.array([g[0], g[1], g[0], g[1]]) for g in goals]

src_m = dynamics.three_link()
tgt_m = dynamics.four_link()
rl = transfer.RlConfig()
cache = {}
proxies = [
    (dynamics.make_domain(src_m, "reach", "shaped", conditions=conds),
     dynamics.make_domain(tgt_m, "reach", "shaped", conditions=conds)),
]
t0 = time.time()
src_trajs, tgt_trajs, _ = transfer.build_pairs(proxies, rl, seed, cache)
pairs = alignment.time_align(src_trajs, tgt_trajs)
print(f"pairs: {len(pairs)} ({time.time()-t0:.0f}s proxies)", flush=True)

cfgt = embedding.TrainConfig(feature_dim=6)
model, _ = embedding.train_embedding(pairs, cfgt, seed=derive_seed(seed, "fit", "invariant"))

# semantic probe
zs = embedding.embed(model, "source", pairs.source)
zt = embedding.embed(model, "target", pairs.target)
ee_s = dynamics._ee_batch(pairs.source[:, :3], src_m.link_lengths)
ee_t = dynamics._ee_batch(pairs.target[:, :4], tgt_m.link_lengths)
rng = np.random.default_rng(0)
idx = rng.choice(len(pairs), 500, replace=False)
jdx = rng.choice(len(pairs), 500, replace=False)
fd = np.linalg.norm(zs[idx] - zt[jdx], axis=1)
ed = np.linalg.norm(ee_s[idx] - ee_t[jdx], axis=1)
print("corr(featdist, eedist):", round(float(np.corrcoef(fd, ed)[0, 1]), 3), flush=True)

source_spec = dynamics.make_domain(src_m, "button_press", "shaped")
target_spec = dynamics.make_domain(tgt_m, "button_press", "sparse")
pols, _ = trajopt.solve_domain(source_spec, 20, derive_seed(seed, "source"))
source_trajs = [dynamics.mean_rollout(pols[ci], source_spec, ci) for ci in range(4)]
sol = transfer.make_source_solution(model, source_trajs, pairs)
cfg = transfer.TransferConfig(alpha0=1.0, method="invariant")
extra = lambda it: transfer._penalty_for_iteration(sol, cfg, it, tgt_m.agent_dim)
t0 = time.time()
policies, stats = trajopt.solve_domain(
    target_spec, 25, derive_seed(seed, "target"), samples_per_iter=5,
    extra_cost_for_iteration=extra,
)
print("transfer:", " ".join(f"{s.success_rate:.2f}" for s in stats),
      f"({time.time()-t0:.0f}s)")
