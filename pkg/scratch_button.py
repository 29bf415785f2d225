"""Scratch: button experiment across seeds, with per-condition breakdown."""
import sys
import time

import numpy as np

from morphtransfer import dynamics, transfer

seeds = [int(s) for s in sys.argv[1].split(",")] if len(sys.argv) > 1 else [0, 1, 2]
proxy_names = sys.argv[2].split(",") if len(sys.argv) > 2 else ["reach", "block_move", "peg_insert"]

src = dynamics.three_link()
tgt = dynamics.four_link()
source_spec = dynamics.make_domain(src, "button_press", "shaped")
target_spec = dynamics.make_domain(tgt, "button_press", "sparse")
proxies = [
    (dynamics.make_domain(src, t, "shaped"), dynamics.make_domain(tgt, t, "shaped"))
    for t in proxy_names
]

for seed in seeds:
    cache = {}
    t0 = time.time()
    res = transfer.run_transfer(
        source_spec, target_spec, proxies,
        transfer.TransferConfig(method="invariant"), seed=seed, cache=cache,
    )
    curve = " ".join(f"{p.success_rate:.2f}" for p in res.curve)
    final_succ = [
        dynamics.mean_rollout(res.final_policy[ci], target_spec, ci).success
        for ci in range(4)
    ]
    print(
        f"seed {seed} proxies={','.join(proxy_names)}: best {res.best_success():.2f} "
        f"mean-pol {final_succ} [{curve}] ({time.time()-t0:.0f}s)", flush=True,
    )
