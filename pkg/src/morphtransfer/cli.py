"""Configuration-driven experiment runner.

Configs are strict JSON documents (unknown keys rejected, every violation
reported).  ``run`` executes the transfer pipeline for each requested method
and writes a deterministic artifact directory:

    config.snapshot          resolved config (JSON)
    summary.csv              method,best_success rows
    curves/<method>.csv      iter,success_rate,mean_cost,alpha
    pairs/<method>.csv       cond,src_t,tgt_t
    checkpoints/<method>.json

Exit codes: 0 success, 2 validation failure, 3 runtime stage failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass, field, replace

from . import dynamics, embedding, transfer
from .errors import ConfigError, StageError

_DEFAULTS = {
    "alignment": "time",
    "methods": ["invariant", "none"],
    "alpha0": 1.0,
    "decay": "none",
    "decay_horizon": 20,
    "iterations": 25,
    "seed": 0,
    "out_dir": None,
    "source_horizon": 100,
    "target_horizon": 100,
    "proxy_iterations": 15,
    "source_iterations": 20,
    "samples_per_iter": 5,
    "embed_epochs": 500,
    "em_rounds": 3,
    "feature_dim": 6,
}

_REQUIRED = ("experiment", "source_morphology", "target_morphology", "task", "proxy_tasks")

_KNOWN_KEYS = set(_REQUIRED) | set(_DEFAULTS)


@dataclass(eq=True)
class ExperimentConfig:
    experiment: str
    source_morphology: str
    target_morphology: str
    task: str
    proxy_tasks: tuple
    alignment: str = "time"
    methods: tuple = ("invariant", "none")
    alpha0: float = 1.0
    decay: str = "none"
    decay_horizon: int = 20
    iterations: int = 25
    seed: int = 0
    out_dir: str | None = None
    source_horizon: int = 100
    target_horizon: int = 100
    proxy_iterations: int = 15
    source_iterations: int = 20
    samples_per_iter: int = 5
    embed_epochs: int = 500
    em_rounds: int = 3
    feature_dim: int = 6

    def to_dict(self) -> dict:
        d = asdict(self)
        d["proxy_tasks"] = list(self.proxy_tasks)
        d["methods"] = list(self.methods)
        return d


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and fully validate a JSON experiment config.

    Raises ConfigError carrying every violation (unknown keys, missing
    fields, bad values), or a syntax message with the line number.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"syntax error at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    violations = []
    for key in sorted(set(doc) - _KNOWN_KEYS):
        violations.append(f"unknown key {key!r}")
    for key in _REQUIRED:
        if key not in doc:
            violations.append(f"missing required field {key!r}")
    merged = {**_DEFAULTS, **{k: v for k, v in doc.items() if k in _KNOWN_KEYS}}

    def check(cond, message):
        if not cond:
            violations.append(message)

    if "experiment" in doc:
        check(isinstance(doc["experiment"], str) and doc["experiment"], "experiment: must be a non-empty string")
    for key in ("source_morphology", "target_morphology"):
        if key in doc:
            check(doc[key] in dynamics.MORPHOLOGIES, f"{key}: unknown morphology {doc[key]!r}")
    if "task" in doc:
        check(doc["task"] in dynamics.TASKS, f"task: unknown task {doc['task']!r}")
    if "proxy_tasks" in doc:
        ok = isinstance(doc["proxy_tasks"], list) and all(
            t in dynamics.TASKS for t in doc["proxy_tasks"]
        )
        check(ok, f"proxy_tasks: must be a list of known tasks, got {doc['proxy_tasks']!r}")
    check(merged["alignment"] in transfer.ALIGN_MODES, f"alignment: unknown mode {merged['alignment']!r}")
    methods = merged["methods"]
    if not (isinstance(methods, list) and methods):
        violations.append("methods: must be a non-empty list")
    else:
        for m in methods:
            check(m in transfer.METHODS, f"methods: unknown method {m!r}")
    check(isinstance(merged["alpha0"], (int, float)) and merged["alpha0"] >= 0, "alpha0: must be >= 0")
    check(merged["decay"] in transfer.DECAYS, f"decay: unknown decay {merged['decay']!r}")
    check(_is_int(merged["decay_horizon"]) and merged["decay_horizon"] > 0, "decay_horizon: must be a positive integer")
    for key in (
        "iterations",
        "source_horizon",
        "target_horizon",
        "proxy_iterations",
        "source_iterations",
        "samples_per_iter",
        "embed_epochs",
        "em_rounds",
        "feature_dim",
    ):
        check(_is_int(merged[key]) and merged[key] > 0, f"{key}: must be a positive integer")
    check(_is_int(merged["seed"]) and merged["seed"] >= 0, "seed: must be a non-negative integer")
    if merged["out_dir"] is not None:
        check(isinstance(merged["out_dir"], str) and merged["out_dir"], "out_dir: must be a non-empty string or null")
    if (
        _is_int(merged["source_horizon"])
        and _is_int(merged["target_horizon"])
        and merged["source_horizon"] != merged["target_horizon"]
    ):
        violations.append(
            "source_horizon, target_horizon: horizons must be equal "
            f"({merged['source_horizon']} != {merged['target_horizon']})"
        )
    if (
        isinstance(merged.get("proxy_tasks"), list)
        and not merged["proxy_tasks"]
        and isinstance(methods, list)
        and any(m != "none" for m in methods)
    ):
        violations.append("proxy_tasks: must be non-empty unless methods == ['none']")
    if violations:
        raise ConfigError(violations)
    merged["proxy_tasks"] = tuple(merged["proxy_tasks"])
    merged["methods"] = tuple(merged["methods"])
    return ExperimentConfig(**merged)


def config_snapshot(config: ExperimentConfig) -> str:
    """Canonical JSON form; re-parsing it yields an equal config."""
    return json.dumps(config.to_dict(), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# experiment catalog


def list_experiments() -> dict:
    """Shipped experiment configs by stable identifier.

    Both shipped transfers use the 3-link torque arm as the source: button
    pressing transfers to the 4-link arm, block pulling to the tendon-driven
    arm.  The proxy ablations train the embedding from a single proxy task.
    """
    button_common = {
        "source_morphology": "three_link",
        "target_morphology": "four_link",
        "task": "button_press",
    }
    catalog = {
        "button_3to4": {
            "experiment": "button_3to4",
            **button_common,
            "proxy_tasks": ["reach", "block_move", "peg_insert"],
            "methods": ["invariant", "cca", "kcca", "random_proj", "direct", "none"],
        },
        "tendon_block_pull": {
            "experiment": "tendon_block_pull",
            "source_morphology": "three_link",
            "target_morphology": "tendon_three_link",
            "task": "block_pull",
            "proxy_tasks": ["reach"],
            "methods": ["invariant", "cca", "kcca", "random_proj", "direct", "none"],
            "decay": "linear_to_zero",
            "decay_horizon": 20,
        },
        "button_3to4_proxy_reach": {
            "experiment": "button_3to4_proxy_reach",
            **button_common,
            "proxy_tasks": ["reach"],
            "methods": ["invariant", "none"],
        },
        "button_3to4_proxy_push": {
            "experiment": "button_3to4_proxy_push",
            **button_common,
            "proxy_tasks": ["block_move"],
            "methods": ["invariant", "none"],
        },
        "button_3to4_proxy_peg": {
            "experiment": "button_3to4_proxy_peg",
            **button_common,
            "proxy_tasks": ["peg_insert"],
            "methods": ["invariant", "none"],
        },
        "button_3to4_smoke": {
            "experiment": "button_3to4_smoke",
            **button_common,
            "proxy_tasks": ["reach"],
            "methods": ["invariant"],
            "iterations": 3,
            "proxy_iterations": 4,
            "source_iterations": 4,
            "embed_epochs": 50,
        },
    }
    return catalog


def load_experiment(name: str) -> ExperimentConfig:
    catalog = list_experiments()
    if name not in catalog:
        raise ConfigError(f"unknown experiment {name!r}; see `list`")
    return parse_config(json.dumps(catalog[name]))


# ---------------------------------------------------------------------------
# running


def build_specs(config: ExperimentConfig):
    """Domain specs for a config: (source test, target test, proxy pairs).

    The source solves its test task with the shaped cost; the target only
    ever sees the sparse one.  Proxies are shaped in both domains.
    """
    src_morph = dynamics.MORPHOLOGIES[config.source_morphology]()
    tgt_morph = dynamics.MORPHOLOGIES[config.target_morphology]()
    source_spec = dynamics.make_domain(
        src_morph, config.task, "shaped", horizon=config.source_horizon
    )
    target_spec = dynamics.make_domain(
        tgt_morph, config.task, "sparse", horizon=config.target_horizon
    )
    proxy_pairs = [
        (
            dynamics.make_domain(src_morph, task, "shaped", horizon=config.source_horizon),
            dynamics.make_domain(tgt_morph, task, "shaped", horizon=config.target_horizon),
        )
        for task in config.proxy_tasks
    ]
    return source_spec, target_spec, proxy_pairs


def rl_config_for(config: ExperimentConfig) -> transfer.RlConfig:
    return transfer.RlConfig(
        iterations=config.iterations,
        proxy_iterations=config.proxy_iterations,
        source_iterations=config.source_iterations,
        samples_per_iter=config.samples_per_iter,
    )


def train_config_for(config: ExperimentConfig) -> embedding.TrainConfig:
    return embedding.TrainConfig(
        feature_dim=config.feature_dim, epochs=config.embed_epochs
    )


def execute_method(config: ExperimentConfig, method: str, cache=None, out_dir=None):
    """Run one method of a config; returns the ExperimentResult."""
    source_spec, target_spec, proxy_pairs = build_specs(config)
    cfg = transfer.TransferConfig(
        alpha0=config.alpha0,
        decay=config.decay,
        decay_horizon=config.decay_horizon,
        method=method,
    )
    return transfer.run_transfer(
        source_spec,
        target_spec,
        proxy_pairs,
        cfg,
        rl=rl_config_for(config),
        train_config=train_config_for(config),
        align_mode=config.alignment,
        em_rounds=config.em_rounds,
        seed=config.seed,
        out_dir=out_dir,
        cache=cache,
    )


def run(config: ExperimentConfig, out_dir=None, seed=None, methods=None):
    """Execute the configured experiment; returns (exit_status, out_dir).

    Stage failures leave partial artifacts in place and return status 3 with
    the failing stage printed to stderr.
    """
    if seed is not None:
        config = replace(config, seed=seed)
    if methods is not None:
        unknown = [m for m in methods if m not in transfer.METHODS]
        if unknown:
            raise ConfigError([f"methods: unknown method {m!r}" for m in unknown])
        config = replace(config, methods=tuple(methods))
    resolved_out = out_dir or config.out_dir or os.path.join("results", config.experiment)
    config = replace(config, out_dir=resolved_out)
    os.makedirs(resolved_out, exist_ok=True)
    with open(os.path.join(resolved_out, "config.snapshot"), "w") as fh:
        fh.write(config_snapshot(config))

    cache: dict = {}
    summary = []
    try:
        for method in config.methods:
            result = execute_method(config, method, cache=cache, out_dir=resolved_out)
            summary.append((method, result.best_success()))
    except StageError as exc:
        print(f"stage failed: {exc}", file=sys.stderr)
        return 3, resolved_out
    with open(os.path.join(resolved_out, "summary.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "best_success"])
        for method, best in summary:
            writer.writerow([method, repr(best)])
    return 0, resolved_out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="morphtransfer",
        description="Transfer manipulation skills between planar arms "
        "through a learned invariant feature space.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run an experiment config (JSON path or catalog id)")
    run_p.add_argument("config", help="path to a config file, or a catalog experiment id")
    run_p.add_argument("--out", default=None, help="artifact directory")
    run_p.add_argument("--seed", type=int, default=None, help="master seed override")
    run_p.add_argument(
        "--methods", default=None, help="comma-separated method list override"
    )
    sub.add_parser("list", help="list shipped experiment configs")
    args = parser.parse_args(argv)

    if args.command == "list":
        for name, doc in list_experiments().items():
            print(
                f"{name}: {doc['source_morphology']} -> {doc['target_morphology']} "
                f"on {doc['task']} (proxies: {', '.join(doc['proxy_tasks'])})"
            )
        return 0

    try:
        if os.path.exists(args.config):
            with open(args.config) as fh:
                config = parse_config(fh.read())
        else:
            config = load_experiment(args.config)
        methods = args.methods.split(",") if args.methods else None
        status, out_dir = run(config, out_dir=args.out, seed=args.seed, methods=methods)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return 2
    if status == 0:
        print(f"artifacts written to {out_dir}")
    return status


if __name__ == "__main__":
    sys.exit(main())
