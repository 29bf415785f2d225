"""Scratch: is a trained invariant embedding semantically aligned with the
end-effector correspondence the task needs?"""
import sys

import numpy as np

from morphtransfer import alignment, dynamics, embedding, trajopt, transfer
from morphtransfer.seeding import derive_seed

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
epochs = int(sys.argv[2]) if len(sys.argv) > 2 else 500
feature_dim = int(sys.argv[3]) if len(sys.argv) > 3 else 6

src_m = dynamics.three_link()
tgt_m = dynamics.four_link()
rl = transfer.RlConfig()
cache = {}
src_trajs, tgt_trajs, _ = transfer.build_pairs(
    [(dynamics.make_domain(src_m, t, "shaped"), dynamics.make_domain(tgt_m, t, "shaped"))
     for t in ("reach", "block_move", "peg_insert")],
    rl, seed, cache,
)
pairs = alignment.time_align(src_trajs, tgt_trajs)
print("pairs:", len(pairs))

cfg = embedding.TrainConfig(feature_dim=feature_dim, epochs=epochs)
model, hist = embedding.train_embedding(pairs, cfg, seed=derive_seed(seed, "fit", "invariant"))
n = len(pairs)
print(f"losses start sim={hist.sim[0]/n:.4f} ae_s={hist.ae_source[0]/n:.4f} ae_t={hist.ae_target[0]/n:.4f}")
print(f"losses end   sim={hist.sim[-1]/n:.4f} ae_s={hist.ae_source[-1]/n:.4f} ae_t={hist.ae_target[-1]/n:.4f}")

# semantic probe: over the PAIRED states, how well does feature distance
# correlate with cross-domain end-effector distance?
zs = embedding.embed(model, "source", pairs.source)
zt = embedding.embed(model, "target", pairs.target)
resid = np.linalg.norm(zs - zt, axis=1)
print(f"pair residual |f-g|: mean {resid.mean():.4f} p90 {np.percentile(resid,90):.4f}")

ee_s = dynamics._ee_batch(pairs.source[:, :3], src_m.link_lengths)
ee_t = dynamics._ee_batch(pairs.target[:, :4], tgt_m.link_lengths)
print(f"paired ee distance: mean {np.linalg.norm(ee_s-ee_t,axis=1).mean():.4f}")

# cross probe: feature distance between source state i and target state j
# should be small iff their ee are close
rng = np.random.default_rng(0)
idx = rng.choice(n, 400, replace=False)
jdx = rng.choice(n, 400, replace=False)
fd = np.linalg.norm(zs[idx] - zt[jdx], axis=1)
ed = np.linalg.norm(ee_s[idx] - ee_t[jdx], axis=1)
print("corr(feature dist, ee dist) over random cross pairs:",
      round(float(np.corrcoef(fd, ed)[0, 1]), 3))
scale = transfer.feature_scale_of(model, pairs)
print("feature scale:", round(scale, 4))
