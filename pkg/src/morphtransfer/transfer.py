"""Feature-space skill transfer.

Solves the proxy tasks in both domains, builds the state pairing, fits the
chosen correspondence method, solves the source test task, then runs RL in
the target domain with the sparse task cost plus a weighted feature-space
tracking penalty toward the source solution.

Sign convention: the RL machinery minimizes cost, so the per-timestep
feature distance enters as an additive penalty; it is zero exactly when the
embedded states coincide.
"""

from __future__ import annotations

import csv
import os
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import alignment, baselines, dynamics, embedding, trajopt
from .errors import StageError
from .seeding import derive_seed

METHODS = ("invariant", "cca", "kcca", "random_proj", "direct", "none")
DECAYS = ("none", "linear_to_zero")
ALIGN_MODES = ("time", "em")


@dataclass(frozen=True)
class TransferConfig:
    """Weighting of the tracking penalty during target-domain learning."""

    alpha0: float = 1.0
    decay: str = "none"
    decay_horizon: int = 20
    method: str = "invariant"

    def __post_init__(self):
        if self.alpha0 < 0:
            raise ValueError("alpha0 must be >= 0")
        if self.decay not in DECAYS:
            raise ValueError(f"unknown decay {self.decay!r}")
        if self.decay_horizon <= 0:
            raise ValueError("decay_horizon must be positive")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")


def alpha_at(cfg: TransferConfig, iteration: int) -> float:
    """Transfer weight at a (0-based) RL iteration."""
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    if cfg.decay == "none":
        return cfg.alpha0
    return cfg.alpha0 * max(0.0, 1.0 - iteration / cfg.decay_horizon)


@dataclass(eq=False)
class SourceSolution:
    """Optimal source behavior prepared for transfer.

    One mean-policy trajectory and tracking term per condition, plus the
    fitted correspondence method.  ``feature_scale`` is the median pairwise
    distance among the mapped source states of the pairing, used to make the
    penalty dimensionless across methods.
    """

    trajectories: list
    fitted: object
    terms: list
    feature_scale: float


def feature_scale_of(fitted, pairs: embedding.PairSet, max_rows: int = 512) -> float:
    """Median pairwise distance of the mapped source states (subsampled by
    even strides so the value is deterministic)."""
    X = pairs.source
    if X.shape[0] > max_rows:
        stride = int(np.ceil(X.shape[0] / max_rows))
        X = X[::stride]
    Z = np.asarray(baselines.map_source(fitted, X), float)
    scale = baselines.median_pairwise_distance(Z)
    return max(scale, 1e-6)


def make_source_solution(
    fitted, source_trajectories: Sequence, pairs: embedding.PairSet
) -> SourceSolution:
    terms = [baselines.as_transfer_reward(fitted, traj) for traj in source_trajectories]
    return SourceSolution(
        trajectories=list(source_trajectories),
        fitted=fitted,
        terms=terms,
        feature_scale=feature_scale_of(fitted, pairs),
    )


def transfer_cost(
    sol: SourceSolution,
    cfg: TransferConfig,
    iteration: int,
    condition: int,
    t: int,
    state: dynamics.DomainState,
) -> float:
    """alpha(iteration) * feature distance between the source reference at
    step t and the target state, normalized by the pairing's feature scale."""
    if sol.fitted is None:
        raise ValueError("no fitted method in this source solution")
    term = sol.terms[condition]
    if not 0 <= t < term.reference.shape[0]:
        raise ValueError("t outside the horizon")
    a = alpha_at(cfg, iteration)
    if a == 0.0:
        return 0.0
    d = term.distances(t, state.agent[None, :])[0]
    return float(a * d / sol.feature_scale)


def _penalty_for_iteration(sol: SourceSolution, cfg: TransferConfig, iteration: int, agent_dim: int):
    """Batched extra-cost closure for rl_iteration, or None when alpha is 0."""
    a = alpha_at(cfg, iteration)
    if a == 0.0 or sol is None:
        return None
    scale = a / sol.feature_scale

    def extra(condition_index, t, X):
        term = sol.terms[condition_index]
        return scale * term.distances(t, X[:, :agent_dim])

    return extra


# ---------------------------------------------------------------------------
# experiment pipeline


@dataclass(frozen=True)
class RlConfig:
    """Budgets and optimizer settings for every learning stage."""

    iterations: int = 25
    proxy_iterations: int = 15
    source_iterations: int = 20
    samples_per_iter: int = 5
    kl_step: float = 1.0
    dynamics_reg: float = 1e-6
    init_policy_var: float = 0.1
    # extra noisy executions per proxy condition added to the pairing beyond
    # the mean rollout; independent exploration noise on the two sides pairs
    # noise with noise, so the default sticks to the mean executions
    pair_samples: int = 0


@dataclass(eq=False)
class CurvePoint:
    iteration: int
    success_rate: float
    mean_cost: float
    alpha: float


@dataclass(eq=False)
class ExperimentResult:
    method: str
    curve: list
    pairs: Optional[embedding.PairSet]
    fitted: object
    source_trajectories: list
    final_policy: object
    proxy_stats: list
    em_diagnostics: Optional[list] = None

    def best_success(self) -> float:
        return max((p.success_rate for p in self.curve), default=0.0)

    def final_success(self) -> float:
        return self.curve[-1].success_rate if self.curve else 0.0


def write_curve_csv(curve: Sequence, path):
    """Learning curve as CSV: iter,success_rate,mean_cost,alpha."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "success_rate", "mean_cost", "alpha"])
        for p in curve:
            writer.writerow(
                [p.iteration, repr(p.success_rate), repr(p.mean_cost), repr(p.alpha)]
            )


def _solve_and_collect(spec, iterations, seed, rl: RlConfig, label, cache):
    """Solve one domain and return (per-condition mean trajectories, stats).

    Cached by the caller-visible label so pipelines sharing a stage (same
    label and seed) reuse the work; results are identical either way because
    all randomness derives from (seed, label).
    """
    key = ("solve", label, seed, iterations)
    if cache is not None and key in cache:
        return cache[key]
    policies, stats = trajopt.solve_domain(
        spec,
        iterations,
        seed,
        samples_per_iter=rl.samples_per_iter,
        kl_step=rl.kl_step,
        dynamics_reg=rl.dynamics_reg,
        init_policy_var=rl.init_policy_var,
    )
    trajs = [
        dynamics.mean_rollout(policies[ci], spec, ci)
        for ci in range(len(spec.conditions))
    ]
    out = (policies, trajs, stats)
    if cache is not None:
        cache[key] = out
    return out


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001 - tag and re-raise for the CLI
        raise StageError(name, str(exc)) from exc


def _proxy_executions(policies, spec, conditions, n_extra: int, seed: int):
    """Mean rollout plus noisy executions for the given conditions, in a
    fixed (condition-major, sample-minor) order shared by both domains."""
    out = []
    for ci in conditions:
        out.append(dynamics.mean_rollout(policies[ci], spec, ci))
        for k in range(n_extra):
            out.append(
                dynamics.rollout(policies[ci], spec, ci, derive_seed(seed, ci, k))
            )
    return out


def build_pairs(
    proxy_pairs: Sequence,
    rl: RlConfig,
    seed: int,
    cache=None,
):
    """Solve every proxy task in both domains and collect aligned executions.

    Only successful executions feed the pairing: a condition is kept when
    the mean-policy rollout solves it in *both* domains, since a failed side
    would pair settled source states with wrong target states for most of
    the episode.  If nothing succeeded anywhere (e.g. very small budgets),
    every condition is used and a warning is emitted.

    Returns (source trajectories, target trajectories, per-proxy stats); the
    trajectory lists are pooled across proxies and index-aligned, each entry
    holding one execution of the same condition in the two domains.
    """
    solved = []
    proxy_stats = []
    for i, (sp, tp) in enumerate(proxy_pairs):
        if sp.horizon != tp.horizon:
            raise ValueError(f"proxy {i}: source/target horizons differ")
        s_policies, s_means, s_stats = _solve_and_collect(
            sp,
            rl.proxy_iterations,
            derive_seed(seed, "proxy", i, "source"),
            rl,
            f"proxy{i}:{sp.morphology.actuation}{sp.morphology.n_links}:{sp.task}:source",
            cache,
        )
        t_policies, t_means, t_stats = _solve_and_collect(
            tp,
            rl.proxy_iterations,
            derive_seed(seed, "proxy", i, "target"),
            rl,
            f"proxy{i}:{tp.morphology.actuation}{tp.morphology.n_links}:{tp.task}:target",
            cache,
        )
        kept = [
            ci
            for ci in range(len(sp.conditions))
            if s_means[ci].success and t_means[ci].success
        ]
        solved.append((i, sp, tp, s_policies, t_policies, kept))
        proxy_stats.append(
            {
                "proxy": sp.task,
                "kept_conditions": kept,
                "source": s_stats,
                "target": t_stats,
            }
        )
    if not any(kept for *_, kept in solved):
        warnings.warn(
            "no proxy condition was solved in both domains; pairing uses all "
            "executions",
            stacklevel=2,
        )
        solved = [
            (i, sp, tp, s_pol, t_pol, list(range(len(sp.conditions))))
            for i, sp, tp, s_pol, t_pol, _ in solved
        ]
    src_trajs, tgt_trajs = [], []
    for i, sp, tp, s_policies, t_policies, kept in solved:
        src_trajs.extend(
            _proxy_executions(
                s_policies, sp, kept, rl.pair_samples,
                derive_seed(seed, "pairs", i, "source"),
            )
        )
        tgt_trajs.extend(
            _proxy_executions(
                t_policies, tp, kept, rl.pair_samples,
                derive_seed(seed, "pairs", i, "target"),
            )
        )
    return src_trajs, tgt_trajs, proxy_stats


def fit_method(
    method: str,
    pairs: embedding.PairSet,
    train_config: embedding.TrainConfig,
    seed: int,
):
    """Fit the requested correspondence method on a pairing."""
    if method == "invariant":
        model, _ = embedding.train_embedding(pairs, train_config, seed=seed)
        return model
    if method == "cca":
        return baselines.cca_fit(
            pairs.source, pairs.target, train_config.feature_dim, reg=1e-3
        )
    if method == "kcca":
        return baselines.kcca_fit(
            pairs.source, pairs.target, kind="rbf", feature_dim=train_config.feature_dim
        )
    if method == "random_proj":
        return baselines.random_projection(
            pairs.source.shape[1],
            pairs.target.shape[1],
            train_config.feature_dim,
            seed=seed,
        )
    if method == "direct":
        return baselines.fit_direct_mapping(pairs, epochs=200, seed=seed)
    raise ValueError(f"unknown method {method!r}")


def run_transfer(
    source_spec: dynamics.DomainSpec,
    target_spec: dynamics.DomainSpec,
    proxy_pairs: Sequence,
    cfg: TransferConfig,
    rl: RlConfig = RlConfig(),
    train_config: embedding.TrainConfig = embedding.TrainConfig(),
    align_mode: str = "time",
    em_rounds: int = 3,
    seed: int = 0,
    out_dir=None,
    cache=None,
) -> ExperimentResult:
    """Full pipeline for one method; see the module docstring.

    With method "none" the proxy/alignment/fit stages are skipped and the
    target learns from the sparse task cost alone.  When ``out_dir`` is
    given, curves, pairings and checkpoints are written beneath it.
    """
    if source_spec.horizon != target_spec.horizon:
        raise ValueError("source and target horizons must match")
    if align_mode not in ALIGN_MODES:
        raise ValueError(f"unknown alignment mode {align_mode!r}")
    if cfg.method != "none" and not proxy_pairs:
        raise ValueError("proxy task list must be non-empty unless method is 'none'")

    pairs = None
    fitted = None
    em_diag = None
    proxy_stats = []
    sol = None
    if cfg.method != "none":
        src_trajs, tgt_trajs, proxy_stats = _stage(
            "proxy_solve", build_pairs, proxy_pairs, rl, seed, cache
        )
        if align_mode == "em" and cfg.method == "invariant":
            fitted, pairs, em_diag = _stage(
                "align",
                alignment.em_align,
                src_trajs,
                tgt_trajs,
                em_rounds,
                train_config,
                derive_seed(seed, "align"),
            )
        else:
            pairs = _stage("align", alignment.time_align, src_trajs, tgt_trajs)
            fitted = _stage(
                "fit_method",
                fit_method,
                cfg.method,
                pairs,
                train_config,
                derive_seed(seed, "fit", cfg.method),
            )
        _, source_trajs, _ = _stage(
            "source_solve",
            _solve_and_collect,
            source_spec,
            rl.source_iterations,
            derive_seed(seed, "source"),
            rl,
            f"source:{source_spec.morphology.actuation}{source_spec.morphology.n_links}:{source_spec.task}",
            cache,
        )
        sol = _stage("source_solve", make_source_solution, fitted, source_trajs, pairs)
    else:
        source_trajs = []

    agent_dim = target_spec.morphology.agent_dim

    def extra_for_iteration(it):
        if sol is None:
            return None
        return _penalty_for_iteration(sol, cfg, it, agent_dim)

    policies, stats = _stage(
        "target_rl",
        trajopt.solve_domain,
        target_spec,
        rl.iterations,
        derive_seed(seed, "target"),
        samples_per_iter=rl.samples_per_iter,
        extra_cost_for_iteration=extra_for_iteration,
        kl_step=rl.kl_step,
        dynamics_reg=rl.dynamics_reg,
        init_policy_var=rl.init_policy_var,
    )
    curve = [
        CurvePoint(
            iteration=s.iteration,
            success_rate=s.success_rate,
            mean_cost=s.mean_cost,
            alpha=alpha_at(cfg, s.iteration - 1) if sol is not None else 0.0,
        )
        for s in stats
    ]
    result = ExperimentResult(
        method=cfg.method,
        curve=curve,
        pairs=pairs,
        fitted=fitted,
        source_trajectories=source_trajs,
        final_policy=policies,
        proxy_stats=proxy_stats,
        em_diagnostics=em_diag,
    )
    if out_dir is not None:
        _stage("write_artifacts", _write_artifacts, result, target_spec, out_dir)
    return result


def _write_artifacts(result: ExperimentResult, target_spec, out_dir):
    os.makedirs(os.path.join(out_dir, "curves"), exist_ok=True)
    write_curve_csv(result.curve, os.path.join(out_dir, "curves", f"{result.method}.csv"))
    if result.pairs is not None and result.pairs.index is not None:
        os.makedirs(os.path.join(out_dir, "pairs"), exist_ok=True)
        alignment.export_pairs(
            result.pairs, os.path.join(out_dir, "pairs", f"{result.method}.csv")
        )
    if result.fitted is not None:
        os.makedirs(os.path.join(out_dir, "checkpoints"), exist_ok=True)
        path = os.path.join(out_dir, "checkpoints", f"{result.method}.json")
        if isinstance(result.fitted, embedding.EmbeddingModel):
            embedding.save_checkpoint(result.fitted, path)
        else:
            baselines.save_method_checkpoint(result.fitted, path)
