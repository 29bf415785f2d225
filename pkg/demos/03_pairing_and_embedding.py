#!/usr/bin/env python3
"""Learning the shared feature space from a proxy task.

Both arms first learn the reach proxy with shaped costs.  Their optimal
trajectories are paired timestep-by-timestep, and the paired states train
two encoders into a common feature space (plus decoders that keep the space
informative).  Dynamic time warping in that space can then re-estimate the
correspondence.
"""
import numpy as np

from morphtransfer import alignment, dynamics, embedding, transfer

src_m = dynamics.three_link()
tgt_m = dynamics.four_link()
proxy = [(dynamics.make_domain(src_m, "reach", "shaped"),
          dynamics.make_domain(tgt_m, "reach", "shaped"))]

print("solving the reach proxy for both arms (a minute or so)...")
rl = transfer.RlConfig(proxy_iterations=10)
src_trajs, tgt_trajs, _ = transfer.build_pairs(proxy, rl, seed=0)

pairs = alignment.time_align(src_trajs, tgt_trajs)
print(f"time-based pairing: {len(pairs)} state pairs "
      f"({pairs.source.shape[1]}-dim vs {pairs.target.shape[1]}-dim)")

config = embedding.TrainConfig(feature_dim=6, epochs=200)
model, hist = embedding.train_embedding(pairs, config, seed=0)
n = len(pairs)
print(f"similarity loss per pair: {hist.sim[0]/n:.4f} -> {hist.sim[-1]/n:.4f}")
print(f"source reconstruction:    {hist.ae_source[0]/n:.4f} -> {hist.ae_source[-1]/n:.4f}")

# the same states embedded from both sides should now be close
zs = embedding.embed(model, "source", pairs.source[:5])
zt = embedding.embed(model, "target", pairs.target[:5])
print("\nfirst 5 pair feature distances:",
      np.round(np.linalg.norm(zs - zt, axis=1), 3))

# DTW in the learned metric space re-estimates the correspondence
a = embedding.embed(model, "source", src_trajs[0].agent_matrix())
b = embedding.embed(model, "target", tgt_trajs[0].agent_matrix())
path = alignment.dtw(a, b)
offsets = path.pairs[:, 0] - path.pairs[:, 1]
print(f"\nDTW over condition 0: cost {path.cost:.3f}, "
      f"max time offset {np.abs(offsets).max()} steps")

# the full alternation (train, re-pair, retrain)
model2, pairs2, diag = alignment.em_align(src_trajs, tgt_trajs, rounds=2,
                                          config=config, seed=0)
for d in diag:
    print(f"round {d.round}: {d.pair_count} pairs, dtw cost "
          f"{'-' if d.dtw_cost is None else round(d.dtw_cost, 2)}, "
          f"final loss {d.final_loss:.2f}")
