"""Scratch: squared-norm embedding objective on the failing seed."""
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
proxies = [
    (dynamics.make_domain(src_m, t, "shaped"), dynamics.make_domain(tgt_m, t, "shaped"))
    for t in ("reach", "block_move", "peg_insert")
]
src_trajs, tgt_trajs, _ = transfer.build_pairs(proxies, rl, seed, cache)
pairs = alignment.time_align(src_trajs, tgt_trajs)
print("pairs:", len(pairs), flush=True)

ee_s = dynamics._ee_batch(pairs.source[:, :3], src_m.link_lengths)
ee_t = dynamics._ee_batch(pairs.target[:, :4], tgt_m.link_lengths)
rng = np.random.default_rng(0)
idx = rng.choice(len(pairs), 600, replace=False)
jdx = rng.choice(len(pairs), 600, replace=False)

source_spec = dynamics.make_domain(src_m, "button_press", "shaped")
target_spec = dynamics.make_domain(tgt_m, "button_press", "sparse")
pols, _ = trajopt.solve_domain(source_spec, 20, derive_seed(seed, "source"))
source_trajs = [dynamics.mean_rollout(pols[ci], source_spec, ci) for ci in range(4)]


def evaluate(label, squared, alpha=1.0, fd_dim=6):
    cfgt = embedding.TrainConfig(feature_dim=fd_dim, squared_norms=squared)
    model, hist = embedding.train_embedding(pairs, cfgt,
                                            seed=derive_seed(seed, "fit", "invariant"))
    zs = embedding.embed(model, "source", pairs.source)
    zt = embedding.embed(model, "target", pairs.target)
    resid = float(np.mean(np.linalg.norm(zs - zt, axis=1)))
    scale = transfer.feature_scale_of(model, pairs)
    fd = np.linalg.norm(zs[idx] - zt[jdx], axis=1)
    ed = np.linalg.norm(ee_s[idx] - ee_t[jdx], axis=1)
    corr = float(np.corrcoef(fd, ed)[0, 1])
    sol = transfer.make_source_solution(model, source_trajs, pairs)
    cfg = transfer.TransferConfig(alpha0=alpha, method="invariant")
    extra = lambda it: transfer._penalty_for_iteration(sol, cfg, it, tgt_m.agent_dim)
    t0 = time.time()
    _, stats = trajopt.solve_domain(
        target_spec, 25, derive_seed(seed, "target"), samples_per_iter=5,
        extra_cost_for_iteration=extra,
    )
    best = max(s.success_rate for s in stats)
    curve = " ".join(f"{s.success_rate:.2f}" for s in stats)
    print(f"{label}: resid {resid:.4f} scale {scale:.3f} ratio "
          f"{scale/max(resid,1e-9):.1f} corr {corr:.3f} best {best:.2f}\n  [{curve}] "
          f"({time.time()-t0:.0f}s)", flush=True)


evaluate("plain  fd6 a1", squared=False)
evaluate("squared fd6 a1", squared=True)
evaluate("squared fd6 a2", squared=True, alpha=2.0)
