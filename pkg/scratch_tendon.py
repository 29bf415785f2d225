"""Scratch: tendon block-pull transfer across seeds (catalog settings)."""
import sys
import time

from morphtransfer import cli, transfer

seeds = [int(s) for s in sys.argv[1].split(",")] if len(sys.argv) > 1 else [0, 1, 2]

for seed in seeds:
    from dataclasses import replace

    config = replace(cli.load_experiment("tendon_block_pull"), seed=seed)
    cache = {}
    for method in ("none", "invariant"):
        t0 = time.time()
        res = cli.execute_method(config, method, cache=cache)
        curve = " ".join(f"{p.success_rate:.2f}" for p in res.curve)
        print(f"seed {seed} {method}: best {res.best_success():.2f} [{curve}] "
              f"({time.time()-t0:.0f}s)", flush=True)
