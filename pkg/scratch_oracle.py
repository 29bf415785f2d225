"""Scratch: transfer with a hand-built end-effector 'embedding' to separate
embedding quality from the RL tracking machinery."""
import sys
import time

import numpy as np

from morphtransfer import dynamics, trajopt, transfer
from morphtransfer.embedding import PairSet
from morphtransfer.seeding import derive_seed


class EeOracle:
    """Maps agent states of a given torque morphology to (ee_x, ee_y)."""

    def __init__(self, morph):
        self.morph = morph

    def _ee(self, A):
        A = np.atleast_2d(np.asarray(A, float))
        n = self.morph.n_links
        return dynamics._ee_batch(A[:, :n], self.morph.link_lengths)

    def embed_source(self, A):
        return self._ee(A)

    embed_target = embed_source


class EePair:
    def __init__(self, src_morph, tgt_morph):
        self.src = EeOracle(src_morph)
        self.tgt = EeOracle(tgt_morph)

    def embed_source(self, A):
        return self.src.embed_source(A)

    def embed_target(self, A):
        return self.tgt.embed_target(A)


seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
src_m = dynamics.three_link()
tgt_m = dynamics.four_link()
source_spec = dynamics.make_domain(src_m, "button_press", "shaped")
target_spec = dynamics.make_domain(tgt_m, "button_press", "sparse")

# source solve (same stage seed as the pipeline)
pols, _ = trajopt.solve_domain(source_spec, 20, derive_seed(seed, "source"))
src_trajs = [dynamics.mean_rollout(pols[ci], source_spec, ci) for ci in range(4)]
print("source success:", [t.success for t in src_trajs], flush=True)

oracle = EePair(src_m, tgt_m)
pairs = PairSet(
    source=np.vstack([t.agent_matrix() for t in src_trajs]),
    target=np.vstack([t.agent_matrix() for t in src_trajs]),
)
# feature scale comes from source-side features only, so reusing source states
# for the "target" column is harmless here
sol = transfer.make_source_solution(oracle, src_trajs, pairs)
print("feature scale:", sol.feature_scale, flush=True)

cfg = transfer.TransferConfig(alpha0=float(sys.argv[2]) if len(sys.argv) > 2 else 1.0,
                              method="invariant")
agent_dim = tgt_m.agent_dim


def extra_for_iteration(it):
    return transfer._penalty_for_iteration(sol, cfg, it, agent_dim)


t0 = time.time()
policies, stats = trajopt.solve_domain(
    target_spec, 25, derive_seed(seed, "target"), samples_per_iter=5,
    extra_cost_for_iteration=extra_for_iteration,
)
print("oracle-ee transfer:", " ".join(f"{s.success_rate:.2f}" for s in stats),
      f"({time.time()-t0:.0f}s)")
final = [dynamics.mean_rollout(policies[ci], target_spec, ci).success for ci in range(4)]
print("mean-policy success:", final)
