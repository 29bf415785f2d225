#!/usr/bin/env python3
"""End-to-end skill transfer at a reduced budget (a few minutes).

The 3-link arm knows how to press the button (shaped cost).  The 4-link arm
only sees the sparse cost - the distance from the button to its goal - which
tells it nothing about where the button is.  Tracking the source's optimal
trajectory in the shared feature space supplies the missing guidance.

The full-budget version of this experiment is the `button_3to4` catalog
entry: `morphtransfer run button_3to4`.
"""
import numpy as np

from morphtransfer import dynamics, transfer
from morphtransfer.embedding import TrainConfig

src_m = dynamics.three_link()
tgt_m = dynamics.four_link()
source_spec = dynamics.make_domain(src_m, "button_press", "shaped")
target_spec = dynamics.make_domain(tgt_m, "button_press", "sparse")
proxies = [(dynamics.make_domain(src_m, "reach", "shaped"),
            dynamics.make_domain(tgt_m, "reach", "shaped"))]

rl = transfer.RlConfig(iterations=15, proxy_iterations=10, source_iterations=12)
train = TrainConfig(epochs=300)
cache = {}

curves = {}
for method in ("none", "invariant"):
    print(f"\n=== method: {method} ===")
    res = transfer.run_transfer(
        source_spec, target_spec, proxies,
        transfer.TransferConfig(method=method),
        rl=rl, train_config=train, seed=0, cache=cache,
    )
    curves[method] = [p.success_rate for p in res.curve]
    print("success curve:", " ".join(f"{v:.2f}" for v in curves[method]))

print("\nsparse reward alone vs transfer:")
print(f"  no transfer best: {max(curves['none']):.2f}")
print(f"  invariant  best:  {max(curves['invariant']):.2f}")
