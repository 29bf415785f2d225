"""Invariant feature space learning.

Two encoders f and g map source and target agent states into a shared
feature space; two decoders reconstruct the original states from it.  The
networks are trained jointly on a set of corresponding state pairs with a
feature-similarity loss plus the two reconstruction losses, by exact
backpropagation and ADAM.  Everything is plain numpy, double precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

# Norm gradients are smoothed as d / sqrt(|d|^2 + NORM_EPS) so the objective
# stays differentiable at zero; loss values are the plain Euclidean norms.
NORM_EPS = 1e-8

ACTIVATIONS = ("relu", "identity")


# ---------------------------------------------------------------------------
# multilayer perceptron


@dataclass(eq=False)
class MlpParams:
    """Weights and biases of a fully connected net with linear output.

    weights[l] has shape (out_l, in_l).  ``activation`` applies to every
    hidden layer; the output layer is always linear.
    """

    weights: list
    biases: list
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def layer_dims(self) -> list:
        return [self.input_dim] + [W.shape[0] for W in self.weights]

    def parameter_list(self) -> list:
        """Flat [W0, b0, W1, b1, ...] view used by the optimizer."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out.append(W)
            out.append(b)
        return out


def init_mlp(
    input_dim: int,
    output_dim: int,
    hidden: Sequence[int] = (60, 60, 60),
    activation: str = "relu",
    rng: Optional[np.random.Generator] = None,
) -> MlpParams:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization, seeded."""
    if rng is None:
        rng = np.random.default_rng(0)
    dims = [input_dim] + list(hidden) + [output_dim]
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(d_in)
        weights.append(rng.uniform(-bound, bound, size=(d_out, d_in)))
        biases.append(rng.uniform(-bound, bound, size=d_out))
    return MlpParams(weights=weights, biases=biases, activation=activation)


def _forward_batch(params: MlpParams, X: np.ndarray):
    """Forward pass on (N, input_dim); returns (Y, cache).

    cache = (input, [(pre_activation, activation) per hidden layer]); the
    output layer is linear and needs no entry.
    """
    A = X
    hidden = []
    n_layers = len(params.weights)
    for l in range(n_layers - 1):
        Z = A @ params.weights[l].T + params.biases[l]
        if params.activation == "relu":
            A = np.maximum(Z, 0.0)
        else:
            A = Z
        hidden.append((Z, A))
    Y = A @ params.weights[-1].T + params.biases[-1]
    return Y, (X, hidden)


def _backward_batch(params: MlpParams, cache, dY: np.ndarray):
    """Exact gradients for a batch given output gradient dY (N, out).

    Returns (grads, dX) with grads ordered like parameter_list(): gradients
    are summed over the batch.
    """
    X, hidden = cache
    n_layers = len(params.weights)
    grads_W = [None] * n_layers
    grads_b = [None] * n_layers
    delta = dY
    for l in reversed(range(n_layers)):
        A_prev = X if l == 0 else hidden[l - 1][1]
        grads_W[l] = delta.T @ A_prev
        grads_b[l] = delta.sum(axis=0)
        delta = delta @ params.weights[l]
        if l > 0 and params.activation == "relu":
            delta = delta * (hidden[l - 1][0] > 0.0)
    grads = []
    for gW, gb in zip(grads_W, grads_b):
        grads.append(gW)
        grads.append(gb)
    return grads, delta


def mlp_forward(params: MlpParams, x):
    """Forward pass for a single input vector; returns (output, cache)."""
    x = np.asarray(x, float)
    if x.shape != (params.input_dim,):
        raise ValueError(f"expected input of shape ({params.input_dim},)")
    Y, cache = _forward_batch(params, x[None, :])
    return Y[0], cache


# ---------------------------------------------------------------------------
# model and pairs


@dataclass(eq=False)
class EmbeddingModel:
    """Encoders f (source) and g (target) with decoders back to each state
    space.  The encoder weights are not tied; only the feature space is
    shared.

    ``source_center/scale`` and ``target_center/scale``, when set, are a
    fixed standardization applied to encoder inputs (state units vary wildly
    across morphologies, e.g. tendon rest lengths sit far from zero).  The
    losses and decoders always work on raw states.
    """

    f: MlpParams
    g: MlpParams
    dec_s: MlpParams
    dec_t: MlpParams
    feature_dim: int
    squared_norms: bool = False
    source_center: Optional[np.ndarray] = None
    source_scale: Optional[np.ndarray] = None
    target_center: Optional[np.ndarray] = None
    target_scale: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.f.output_dim != self.feature_dim or self.g.output_dim != self.feature_dim:
            raise ValueError("encoder output dims must equal feature_dim")
        if self.dec_s.input_dim != self.feature_dim or self.dec_t.input_dim != self.feature_dim:
            raise ValueError("decoder input dims must equal feature_dim")
        if self.dec_s.output_dim != self.f.input_dim:
            raise ValueError("dec_s must reconstruct the source state")
        if self.dec_t.output_dim != self.g.input_dim:
            raise ValueError("dec_t must reconstruct the target state")

    def normalize(self, side: str, X: np.ndarray) -> np.ndarray:
        center = self.source_center if side == "source" else self.target_center
        scale = self.source_scale if side == "source" else self.target_scale
        if center is None:
            return X
        return (X - center) / scale


@dataclass(eq=False)
class PairSet:
    """Corresponding agent states across the two domains.

    ``index`` optionally records (condition, source_t, target_t) per pair so
    the pairing can be exported and re-derived from trajectory files.
    """

    source: np.ndarray
    target: np.ndarray
    provenance: str = "external"
    index: Optional[np.ndarray] = None

    def __post_init__(self):
        self.source = np.atleast_2d(np.asarray(self.source, float))
        self.target = np.atleast_2d(np.asarray(self.target, float))
        if self.source.shape[0] != self.target.shape[0] or self.source.shape[0] == 0:
            raise ValueError("source and target must pair up and be non-empty")

    def __len__(self) -> int:
        return self.source.shape[0]


@dataclass(eq=False)
class TrainingHistory:
    """Loss curves: entry 0 is the pre-training value, then one per epoch."""

    sim: np.ndarray
    ae_source: np.ndarray
    ae_target: np.ndarray
    total: np.ndarray

    def __post_init__(self):
        n = len(self.total)
        if not (len(self.sim) == len(self.ae_source) == len(self.ae_target) == n):
            raise ValueError("history columns must have equal length")


# ---------------------------------------------------------------------------
# losses and gradients


def _norms(D: np.ndarray, squared: bool) -> np.ndarray:
    sq = np.sum(D * D, axis=1)
    return sq if squared else np.sqrt(sq)


def _norm_grad(D: np.ndarray, squared: bool) -> np.ndarray:
    """d/dD of the (possibly squared) Euclidean norm, smoothed at zero."""
    if squared:
        return 2.0 * D
    denom = np.sqrt(np.sum(D * D, axis=1) + NORM_EPS)
    return D / denom[:, None]


def losses(model: EmbeddingModel, pair) -> tuple:
    """The three loss terms for one (source_state, target_state) pair:
    feature similarity, source reconstruction, target reconstruction."""
    s, t = pair
    ls, ae_s, ae_t = _losses_batch(
        model, np.asarray(s, float)[None, :], np.asarray(t, float)[None, :]
    )
    return float(ls[0]), float(ae_s[0]), float(ae_t[0])


def _losses_batch(model: EmbeddingModel, S: np.ndarray, T: np.ndarray):
    zs, _ = _forward_batch(model.f, model.normalize("source", S))
    zt, _ = _forward_batch(model.g, model.normalize("target", T))
    s_hat, _ = _forward_batch(model.dec_s, zs)
    t_hat, _ = _forward_batch(model.dec_t, zt)
    sq = model.squared_norms
    return (
        _norms(zs - zt, sq),
        _norms(S - s_hat, sq),
        _norms(T - t_hat, sq),
    )


def total_objective_grad(
    model: EmbeddingModel, batch, loss_weights=(1.0, 1.0, 1.0)
) -> tuple:
    """Summed objective and exact gradients over a batch of pairs.

    ``batch`` is a PairSet or an (S, T) tuple of matrices.  loss_weights
    order: (similarity, source reconstruction, target reconstruction).
    Returns (total, {"f": grads, "g": ..., "dec_s": ..., "dec_t": ...}) with
    each grads list ordered like MlpParams.parameter_list().
    """
    if isinstance(batch, PairSet):
        S, T = batch.source, batch.target
    else:
        S, T = batch
        S = np.atleast_2d(np.asarray(S, float))
        T = np.atleast_2d(np.asarray(T, float))
    if S.shape[0] == 0:
        raise ValueError("empty batch")
    w_sim, w_s, w_t = loss_weights
    sq = model.squared_norms

    zs, cache_f = _forward_batch(model.f, model.normalize("source", S))
    zt, cache_g = _forward_batch(model.g, model.normalize("target", T))
    s_hat, cache_ds = _forward_batch(model.dec_s, zs)
    t_hat, cache_dt = _forward_batch(model.dec_t, zt)

    d_sim = zs - zt
    r_s = S - s_hat
    r_t = T - t_hat
    total = float(
        w_sim * np.sum(_norms(d_sim, sq))
        + w_s * np.sum(_norms(r_s, sq))
        + w_t * np.sum(_norms(r_t, sq))
    )

    g_sim = w_sim * _norm_grad(d_sim, sq)
    g_shat = -w_s * _norm_grad(r_s, sq)  # d/d s_hat of |S - s_hat|
    g_that = -w_t * _norm_grad(r_t, sq)

    grads_ds, dzs_ae = _backward_batch(model.dec_s, cache_ds, g_shat)
    grads_dt, dzt_ae = _backward_batch(model.dec_t, cache_dt, g_that)
    grads_f, _ = _backward_batch(model.f, cache_f, g_sim + dzs_ae)
    grads_g, _ = _backward_batch(model.g, cache_g, -g_sim + dzt_ae)
    return total, {"f": grads_f, "g": grads_g, "dec_s": grads_ds, "dec_t": grads_dt}


# ---------------------------------------------------------------------------
# ADAM


@dataclass(eq=False)
class AdamState:
    m: list
    v: list

    @classmethod
    def zeros_like(cls, params: list) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def adam_step(
    params: list,
    grads: list,
    state: AdamState,
    hyper=(1e-3, 0.9, 0.999, 1e-8),
    step: int = 1,
) -> list:
    """Standard bias-corrected ADAM update on a list of arrays.

    Updates ``state`` in place and returns the new parameter arrays.
    ``step`` is the 1-based update count used for bias correction.
    """
    lr, beta1, beta2, eps = hyper
    out = []
    for i, (p, grad) in enumerate(zip(params, grads)):
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad * grad
        m_hat = state.m[i] / (1.0 - beta1**step)
        v_hat = state.v[i] / (1.0 - beta2**step)
        out.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
    return out


def _write_back(net: MlpParams, flat: list):
    n = len(net.weights)
    net.weights = [flat[2 * l] for l in range(n)]
    net.biases = [flat[2 * l + 1] for l in range(n)]


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of embedding training (ADAM defaults as published)."""

    feature_dim: int = 6
    hidden: tuple = (60, 60, 60)
    activation: str = "relu"
    epochs: int = 500
    batch_size: int = 64
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    w_sim: float = 1.0
    w_ae_source: float = 1.0
    w_ae_target: float = 1.0
    squared_norms: bool = False
    normalize_inputs: bool = True


def init_embedding_model(
    source_dim: int, target_dim: int, config: TrainConfig, rng: np.random.Generator
) -> EmbeddingModel:
    k = config.feature_dim
    return EmbeddingModel(
        f=init_mlp(source_dim, k, config.hidden, config.activation, rng),
        g=init_mlp(target_dim, k, config.hidden, config.activation, rng),
        dec_s=init_mlp(k, source_dim, config.hidden, config.activation, rng),
        dec_t=init_mlp(k, target_dim, config.hidden, config.activation, rng),
        feature_dim=k,
        squared_norms=config.squared_norms,
    )


def train_embedding(
    pairs: PairSet,
    config: TrainConfig = TrainConfig(),
    seed: int = 0,
    init_model: Optional[EmbeddingModel] = None,
) -> tuple:
    """Train encoders and decoders on a pair set; deterministic per seed.

    Minibatches are reshuffled each epoch.  Returns (model, history) where
    history entry 0 holds the pre-training losses (summed over all pairs)
    and entry e the losses after epoch e.
    """
    rng = np.random.default_rng(seed)
    if init_model is None:
        model = init_embedding_model(pairs.source.shape[1], pairs.target.shape[1], config, rng)
        if config.normalize_inputs:
            model.source_center = pairs.source.mean(axis=0)
            model.source_scale = np.maximum(pairs.source.std(axis=0), 1e-6)
            model.target_center = pairs.target.mean(axis=0)
            model.target_scale = np.maximum(pairs.target.std(axis=0), 1e-6)
    else:
        model = init_model
    weights = (config.w_sim, config.w_ae_source, config.w_ae_target)
    nets = (model.f, model.g, model.dec_s, model.dec_t)
    params = [p for net in nets for p in net.parameter_list()]
    state = AdamState.zeros_like(params)
    hyper = (config.learning_rate, config.beta1, config.beta2, config.adam_eps)
    n = len(pairs)

    hist = {"sim": [], "ae_source": [], "ae_target": [], "total": []}

    def record():
        ls, ae_s, ae_t = _losses_batch(model, pairs.source, pairs.target)
        sim = weights[0] * float(np.sum(ls))
        aes = weights[1] * float(np.sum(ae_s))
        aet = weights[2] * float(np.sum(ae_t))
        hist["sim"].append(sim)
        hist["ae_source"].append(aes)
        hist["ae_target"].append(aet)
        hist["total"].append(sim + aes + aet)

    record()
    step = 0
    for _epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            _, grads = total_objective_grad(
                model, (pairs.source[idx], pairs.target[idx]), weights
            )
            flat_grads = [g for key in ("f", "g", "dec_s", "dec_t") for g in grads[key]]
            step += 1
            params = adam_step(params, flat_grads, state, hyper, step)
            offset = 0
            for net in nets:
                n_params = 2 * len(net.weights)
                _write_back(net, params[offset : offset + n_params])
                offset += n_params
        record()
    history = TrainingHistory(
        sim=np.array(hist["sim"]),
        ae_source=np.array(hist["ae_source"]),
        ae_target=np.array(hist["ae_target"]),
        total=np.array(hist["total"]),
    )
    return model, history


def embed(model: EmbeddingModel, side: str, agent_state) -> np.ndarray:
    """Apply f (side='source') or g (side='target') to one state or a batch."""
    if side not in ("source", "target"):
        raise ValueError("side must be 'source' or 'target'")
    net = model.f if side == "source" else model.g
    X = np.asarray(agent_state, float)
    single = X.ndim == 1
    X2 = np.atleast_2d(X)
    if X2.shape[1] != net.input_dim:
        raise ValueError(
            f"{side} states have dim {net.input_dim}, got {X2.shape[1]}"
        )
    Y, _ = _forward_batch(net, model.normalize(side, X2))
    return Y[0] if single else Y


# ---------------------------------------------------------------------------
# checkpoints

CHECKPOINT_VERSION = 1


def _net_to_dict(net: MlpParams) -> dict:
    return {
        "activation": net.activation,
        "layer_dims": net.layer_dims,
        "weights": [W.reshape(-1).tolist() for W in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def _net_from_dict(d: dict) -> MlpParams:
    dims = d["layer_dims"]
    weights = [
        np.array(w, float).reshape(dims[l + 1], dims[l])
        for l, w in enumerate(d["weights"])
    ]
    biases = [np.array(b, float) for b in d["biases"]]
    return MlpParams(weights=weights, biases=biases, activation=d["activation"])


def save_checkpoint(model: EmbeddingModel, path):
    """Versioned JSON checkpoint with row-major weight arrays."""
    maybe = lambda v: None if v is None else v.tolist()
    doc = {
        "version": CHECKPOINT_VERSION,
        "method": "invariant",
        "feature_dim": model.feature_dim,
        "squared_norms": model.squared_norms,
        "normalizers": {
            "source_center": maybe(model.source_center),
            "source_scale": maybe(model.source_scale),
            "target_center": maybe(model.target_center),
            "target_scale": maybe(model.target_scale),
        },
        "networks": {
            "f": _net_to_dict(model.f),
            "g": _net_to_dict(model.g),
            "dec_s": _net_to_dict(model.dec_s),
            "dec_t": _net_to_dict(model.dec_t),
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_checkpoint(path) -> EmbeddingModel:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    nets = doc["networks"]
    norm = doc.get("normalizers", {})
    maybe = lambda v: None if v is None else np.array(v, float)
    return EmbeddingModel(
        f=_net_from_dict(nets["f"]),
        g=_net_from_dict(nets["g"]),
        dec_s=_net_from_dict(nets["dec_s"]),
        dec_t=_net_from_dict(nets["dec_t"]),
        feature_dim=doc["feature_dim"],
        squared_norms=doc.get("squared_norms", False),
        source_center=maybe(norm.get("source_center")),
        source_scale=maybe(norm.get("source_scale")),
        target_center=maybe(norm.get("target_center")),
        target_scale=maybe(norm.get("target_scale")),
    )
