"""Scratch: fast grid over embedding-training settings, scoring the
feature-metric vs end-effector-distance correlation (no RL)."""
import sys
import time

import numpy as np

from morphtransfer import alignment, dynamics, embedding, transfer
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
idx = rng.choice(len(pairs), 800, replace=False)
jdx = rng.choice(len(pairs), 800, replace=False)
ed = np.linalg.norm(ee_s[idx] - ee_t[jdx], axis=1)


def score(model):
    zs = embedding.embed(model, "source", pairs.source)
    zt = embedding.embed(model, "target", pairs.target)
    resid = float(np.mean(np.linalg.norm(zs - zt, axis=1)))
    fd = np.linalg.norm(zs[idx] - zt[jdx], axis=1)
    corr = float(np.corrcoef(fd, ed)[0, 1])
    scale = transfer.feature_scale_of(model, pairs)
    return corr, resid, scale


for squared in (False, True):
    for epochs in (50, 100, 200, 500):
        for w_sim in (1.0, 0.3):
            cfgt = embedding.TrainConfig(feature_dim=6, epochs=epochs,
                                         squared_norms=squared, w_sim=w_sim)
            t0 = time.time()
            model, _ = embedding.train_embedding(
                pairs, cfgt, seed=derive_seed(seed, "fit", "invariant"))
            corr, resid, scale = score(model)
            print(f"sq={int(squared)} ep={epochs:3d} w_sim={w_sim}: corr {corr:.3f} "
                  f"resid {resid:.4f} scale {scale:.3f} snr {scale/max(resid,1e-9):5.1f} "
                  f"({time.time()-t0:.0f}s)", flush=True)
