"""State correspondence across domains from proxy-task executions.

Two strategies: pair states visited at the same timestep (episodic tasks run
at roughly the same rate), or alternate between training an embedding on the
current pairs and re-estimating the pairing with dynamic time warping in the
learned feature space.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .embedding import EmbeddingModel, PairSet, TrainConfig, embed, train_embedding
from .seeding import derive_seed


@dataclass(eq=False)
class AlignmentPath:
    """Monotone index pairing between two sequences.

    ``pairs`` is an (L, 2) int array from (0, 0) to (N-1, M-1) with steps in
    {(1,0), (0,1), (1,1)}; ``cost`` is the summed pointwise distance along it.
    """

    pairs: np.ndarray
    cost: float

    def validate(self, n: int, m: int):
        p = self.pairs
        if tuple(p[0]) != (0, 0) or tuple(p[-1]) != (n - 1, m - 1):
            raise ValueError("path must anchor both endpoints")
        steps = np.diff(p, axis=0)
        ok = {(0, 1), (1, 0), (1, 1)}
        if any(tuple(s) not in ok for s in steps):
            raise ValueError("path steps must be (1,0), (0,1) or (1,1)")


def time_align(src: Sequence, tgt: Sequence) -> PairSet:
    """Pair the states visited at the same timestep, condition by condition."""
    if len(src) != len(tgt):
        raise ValueError("need matching condition counts")
    source_rows, target_rows, index = [], [], []
    for ci, (a, b) in enumerate(zip(src, tgt)):
        if a.horizon != b.horizon:
            raise ValueError(f"horizon mismatch in condition {ci}")
        A = a.agent_matrix()
        B = b.agent_matrix()
        for t in range(a.horizon + 1):
            source_rows.append(A[t])
            target_rows.append(B[t])
            index.append((ci, t, t))
    return PairSet(
        source=np.array(source_rows),
        target=np.array(target_rows),
        provenance="time-aligned",
        index=np.array(index, dtype=int),
    )


def dtw(a: np.ndarray, b: np.ndarray) -> AlignmentPath:
    """Optimal monotone alignment minimizing summed Euclidean distance.

    Ties during traceback prefer the diagonal step, then advancing the first
    sequence.
    """
    a = np.atleast_2d(np.asarray(a, float))
    b = np.atleast_2d(np.asarray(b, float))
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("sequences must be non-empty")
    n, m = a.shape[0], b.shape[0]
    diff = a[:, None, :] - b[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    D = np.full((n, m), np.inf)
    D[0, 0] = dist[0, 0]
    for j in range(1, m):
        D[0, j] = D[0, j - 1] + dist[0, j]
    for i in range(1, n):
        D[i, 0] = D[i - 1, 0] + dist[i, 0]
        row_prev = D[i - 1]
        row = D[i]
        for j in range(1, m):
            row[j] = dist[i, j] + min(row_prev[j - 1], row_prev[j], row[j - 1])
    # traceback, preferring diagonal then (1,0)
    path = [(n - 1, m - 1)]
    i, j = n - 1, m - 1
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            best = min(D[i - 1, j - 1], D[i - 1, j], D[i, j - 1])
            if D[i - 1, j - 1] == best:
                i, j = i - 1, j - 1
            elif D[i - 1, j] == best:
                i -= 1
            else:
                j -= 1
        path.append((i, j))
    path.reverse()
    return AlignmentPath(pairs=np.array(path, dtype=int), cost=float(D[n - 1, m - 1]))


@dataclass(eq=False)
class RoundDiagnostics:
    round: int
    pair_count: int
    dtw_cost: Optional[float]  # None for round 0 (time-based initialization)
    final_loss: float


def em_align(
    src: Sequence,
    tgt: Sequence,
    rounds: int = 3,
    config: TrainConfig = TrainConfig(),
    seed: int = 0,
    warm_start: bool = False,
) -> tuple:
    """Alternate embedding training with DTW re-pairing.

    Round 0 trains on the time-based pairing; each later round re-estimates
    correspondences by running DTW per condition on the embedded sequences
    (the current feature space is the DTW metric), then trains again.  By
    default each round re-initializes the networks from a fresh seed derived
    from ``seed``; pass warm_start=True to continue from the previous round's
    weights.  Returns (model, pairs, [RoundDiagnostics per round]).
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    pairs = time_align(src, tgt)
    model = None
    diagnostics = []
    for r in range(rounds):
        dtw_cost = None
        if r > 0:
            source_rows, target_rows, index = [], [], []
            dtw_cost = 0.0
            for ci, (a, b) in enumerate(zip(src, tgt)):
                A = a.agent_matrix()
                B = b.agent_matrix()
                path = dtw(embed(model, "source", A), embed(model, "target", B))
                dtw_cost += path.cost
                for i, j in path.pairs:
                    source_rows.append(A[i])
                    target_rows.append(B[j])
                    index.append((ci, i, j))
            pairs = PairSet(
                source=np.array(source_rows),
                target=np.array(target_rows),
                provenance="dtw",
                index=np.array(index, dtype=int),
            )
        model, history = train_embedding(
            pairs,
            config,
            seed=derive_seed(seed, "round", r),
            init_model=model if (warm_start and r > 0) else None,
        )
        diagnostics.append(
            RoundDiagnostics(
                round=r,
                pair_count=len(pairs),
                dtw_cost=dtw_cost,
                final_loss=float(history.total[-1]),
            )
        )
    return model, pairs, diagnostics


def export_pairs(pairs: PairSet, path):
    """Pairing as CSV rows cond,src_t,tgt_t (requires index provenance)."""
    if pairs.index is None:
        raise ValueError("pair set carries no (condition, src_t, tgt_t) index")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cond", "src_t", "tgt_t"])
        for ci, i, j in pairs.index:
            writer.writerow([int(ci), int(i), int(j)])
