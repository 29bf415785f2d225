"""Scratch: battery of embedding variants on one seed with dense reach proxy."""
import sys
import time

import numpy as np

from morphtransfer import alignment, dynamics, embedding, trajopt, transfer
from morphtransfer.seeding import derive_seed

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1

angles = np.linspace(-0.5, 1.9, 10)
radii = np.tile([0.55, 0.75, 0.9], 4)[:10]
goals = np.stack([radii * np.cos(angles), radii * np.sin(angles)], 1)
conds = [np.array([g[0], g[1], g[0], g[1]]) for g in goals]

src_m = dynamics.three_link()
tgt_m = dynamics.four_link()
rl = transfer.RlConfig()
cache = {}
proxies = [
    (dynamics.make_domain(src_m, "reach", "shaped", conditions=conds),
     dynamics.make_domain(tgt_m, "reach", "shaped", conditions=conds)),
    (dynamics.make_domain(src_m, "block_move", "shaped"),
     dynamics.make_domain(tgt_m, "block_move", "shaped")),
    (dynamics.make_domain(src_m, "peg_insert", "shaped"),
     dynamics.make_domain(tgt_m, "peg_insert", "shaped")),
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


def probe(model):
    zs = embedding.embed(model, "source", pairs.source)
    zt = embedding.embed(model, "target", pairs.target)
    fd = np.linalg.norm(zs[idx] - zt[jdx], axis=1)
    ed = np.linalg.norm(ee_s[idx] - ee_t[jdx], axis=1)
    return float(np.corrcoef(fd, ed)[0, 1])


def transfer_curve(model, alpha, label):
    sol = transfer.make_source_solution(model, source_trajs, pairs)
    cfg = transfer.TransferConfig(alpha0=alpha, method="invariant")
    extra = lambda it: transfer._penalty_for_iteration(sol, cfg, it, tgt_m.agent_dim)
    t0 = time.time()
    _, stats = trajopt.solve_domain(
        target_spec, 25, derive_seed(seed, "target"), samples_per_iter=5,
        extra_cost_for_iteration=extra,
    )
    best = max(s.success_rate for s in stats)
    tail = " ".join(f"{s.success_rate:.2f}" for s in stats[-8:])
    print(f"{label}: best {best:.2f} tail [{tail}] corr {probe(model):.3f} "
          f"({time.time()-t0:.0f}s)", flush=True)


# held-out selection probe: 3 embedding seeds, validation = held-out pair loss
n = len(pairs)
perm = np.random.default_rng(derive_seed(seed, "val")).permutation(n)
val_idx = perm[: n // 5]
tr_idx = perm[n // 5 :]
train_pairs = embedding.PairSet(source=pairs.source[tr_idx], target=pairs.target[tr_idx])
for fd_dim in (6, 3, 2):
    cfgt = embedding.TrainConfig(feature_dim=fd_dim)
    models = []
    for k in range(3):
        m, _ = embedding.train_embedding(train_pairs, cfgt,
                                         seed=derive_seed(seed, "fit", "invariant", k))
        zs = embedding.embed(m, "source", pairs.source[val_idx])
        zt = embedding.embed(m, "target", pairs.target[val_idx])
        val = float(np.mean(np.linalg.norm(zs - zt, axis=1)))
        models.append((val, k, m))
        print(f"fd{fd_dim} candidate {k}: val sim {val:.4f} corr {probe(m):.3f}",
              flush=True)
    val, k, best_model = min(models, key=lambda t: t[0])
    transfer_curve(best_model, 1.0, f"fd{fd_dim} selected(k={k}) a1")
