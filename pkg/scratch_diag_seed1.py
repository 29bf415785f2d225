"""Scratch: why does seed 1's button transfer stall?

For each button condition, check (a) how far the embedded source path is
from the proxy-state manifold in feature space, and (b) whether the
nearest-feature target states have end-effectors near the source's.
"""
import numpy as np

from morphtransfer import alignment, dynamics, embedding, trajopt, transfer
from morphtransfer.seeding import derive_seed

seed = 1
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
print("pairs:", len(pairs))

cfgt = embedding.TrainConfig(feature_dim=6)
model, _ = embedding.train_embedding(pairs, cfgt, seed=derive_seed(seed, "fit", "invariant"))

source_spec = dynamics.make_domain(src_m, "button_press", "shaped")
pols, _ = trajopt.solve_domain(source_spec, 20, derive_seed(seed, "source"))
source_trajs = [dynamics.mean_rollout(pols[ci], source_spec, ci) for ci in range(4)]

zt_pairs = embedding.embed(model, "target", pairs.target)  # proxy target states
ee_t_pairs = dynamics._ee_batch(pairs.target[:, :4], tgt_m.link_lengths)

for ci in range(4):
    S = source_trajs[ci].agent_matrix()
    zs = embedding.embed(model, "source", S)
    ee_s = dynamics._ee_batch(S[:, :3], src_m.link_lengths)
    button = source_spec.conditions[ci][:2]
    rows = []
    for t in (0, 20, 40, 60, 80, 100):
        d = np.linalg.norm(zt_pairs - zs[t], axis=1)
        j = int(np.argmin(d))
        rows.append(
            f"  t={t:3d} src_ee {np.round(ee_s[t],2)} nearest-feat tgt_ee "
            f"{np.round(ee_t_pairs[j],2)} featdist {d[j]:.3f} "
            f"ee_gap {np.linalg.norm(ee_s[t]-ee_t_pairs[j]):.3f}"
        )
    print(f"cond {ci}: button {button} goal {source_spec.conditions[ci][2:]}")
    print("\n".join(rows), flush=True)
