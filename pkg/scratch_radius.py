"""Scratch: button transfer robustness with wider capture radius + pair tube."""
import sys
import time

import numpy as np

from morphtransfer import dynamics, transfer
from morphtransfer.embedding import TrainConfig

radius = float(sys.argv[1]) if len(sys.argv) > 1 else 0.15
seeds = [int(s) for s in sys.argv[2].split(",")] if len(sys.argv) > 2 else [1, 2, 0]
alpha = float(sys.argv[3]) if len(sys.argv) > 3 else 1.0

src_m = dynamics.three_link()
tgt_m = dynamics.four_link()
source_spec = dynamics.make_domain(src_m, "button_press", "shaped", contact_radius=radius)
target_spec = dynamics.make_domain(tgt_m, "button_press", "sparse", contact_radius=radius)
proxies = [
    (dynamics.make_domain(src_m, t, "shaped", contact_radius=radius),
     dynamics.make_domain(tgt_m, t, "shaped", contact_radius=radius))
    for t in ("reach", "block_move", "peg_insert")
]

for seed in seeds:
    cache = {}
    results = {}
    for method in ("none", "invariant"):
        t0 = time.time()
        res = transfer.run_transfer(
            source_spec, target_spec, proxies,
            transfer.TransferConfig(method=method, alpha0=alpha),
            seed=seed, cache=cache,
        )
        results[method] = res
        curve = " ".join(f"{p.success_rate:.2f}" for p in res.curve)
        print(f"seed {seed} r{radius} a{alpha} {method}: best {res.best_success():.2f} "
              f"[{curve}] ({time.time()-t0:.0f}s)", flush=True)
