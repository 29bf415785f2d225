"""Comparison embeddings: random projections, CCA, kernel CCA, and a direct
source-to-target state regressor.

Linear methods expose the matrices mapping each state space to the learned
basis; the kernel method keeps its training samples and dual coefficients.
All of them plug into the same trajectory-tracking transfer term as the
learned invariant embedding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .embedding import (
    AdamState,
    MlpParams,
    PairSet,
    TrainConfig,
    _forward_batch,
    _backward_batch,
    _write_back,
    adam_step,
    embed,
    init_mlp,
    EmbeddingModel,
    CHECKPOINT_VERSION,
)
from .errors import NumericalError

KERNELS = ("linear", "quad", "rbf")


# ---------------------------------------------------------------------------
# linear embeddings


@dataclass(eq=False)
class LinearEmbedding:
    """Per-side projections into a shared feature basis.

    ``correlations`` is populated by CCA (canonical correlations, sorted
    non-increasing); random projections leave it None.
    """

    proj_source: np.ndarray  # (ds, k)
    proj_target: np.ndarray  # (dt, k)
    mean_source: Optional[np.ndarray] = None
    mean_target: Optional[np.ndarray] = None
    correlations: Optional[np.ndarray] = None
    method: str = "linear"

    @property
    def feature_dim(self) -> int:
        return self.proj_source.shape[1]

    def embed_source(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        if self.mean_source is not None:
            X = X - self.mean_source
        return X @ self.proj_source

    def embed_target(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        if self.mean_target is not None:
            X = X - self.mean_target
        return X @ self.proj_target


def random_projection(
    src_dim: int, tgt_dim: int, feature_dim: int, seed: int
) -> LinearEmbedding:
    """I.i.d. normal projections scaled by 1/sqrt(feature_dim), per side."""
    if feature_dim > min(src_dim, tgt_dim):
        raise ValueError("feature_dim must not exceed either state dim")
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(feature_dim)
    return LinearEmbedding(
        proj_source=scale * rng.standard_normal((src_dim, feature_dim)),
        proj_target=scale * rng.standard_normal((tgt_dim, feature_dim)),
        method="random_proj",
    )


def _inv_sqrt_psd(C: np.ndarray, min_rel: float = 1e-12) -> np.ndarray:
    w, V = np.linalg.eigh((C + C.T) / 2.0)
    if w[-1] <= 0 or w[0] < min_rel * w[-1]:
        raise NumericalError(
            "covariance is rank deficient; retry with a positive regularizer"
        )
    return (V / np.sqrt(w)) @ V.T


def cca_fit(X, Y, feature_dim: int, reg: float = 0.0) -> LinearEmbedding:
    """Canonical correlation analysis on paired rows.

    Whitens both blocks (ridge ``reg`` on the covariance diagonals) and takes
    the top singular directions of the whitened cross-covariance.  Raises
    NumericalError for rank-deficient covariance at reg=0.
    """
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    if X.shape[0] != Y.shape[0]:
        raise ValueError("X and Y must have equal row counts (paired data)")
    if reg < 0:
        raise ValueError("reg must be >= 0")
    n, dx = X.shape
    dy = Y.shape[1]
    if feature_dim > min(dx, dy):
        raise ValueError("feature_dim must not exceed either block dim")
    mx = X.mean(axis=0)
    my = Y.mean(axis=0)
    Xc = X - mx
    Yc = Y - my
    Cxx = Xc.T @ Xc / n + reg * np.eye(dx)
    Cyy = Yc.T @ Yc / n + reg * np.eye(dy)
    Cxy = Xc.T @ Yc / n
    isx = _inv_sqrt_psd(Cxx)
    isy = _inv_sqrt_psd(Cyy)
    U, S, Vt = np.linalg.svd(isx @ Cxy @ isy, full_matrices=False)
    k = feature_dim
    return LinearEmbedding(
        proj_source=isx @ U[:, :k],
        proj_target=isy @ Vt[:k].T,
        mean_source=mx,
        mean_target=my,
        correlations=S[:k].copy(),
        method="cca",
    )


# ---------------------------------------------------------------------------
# kernel CCA


def kernel_matrix(kind: str, X, Y, bandwidth: Optional[float] = None) -> np.ndarray:
    """Gram matrix between rows of X and rows of Y.

    linear: x.y   quad: (x.y + 1)^2   rbf: exp(-|x-y|^2 / (2 bandwidth^2))
    """
    X = np.atleast_2d(np.asarray(X, float))
    Y = np.atleast_2d(np.asarray(Y, float))
    if kind == "linear":
        return X @ Y.T
    if kind == "quad":
        return (X @ Y.T + 1.0) ** 2
    if kind == "rbf":
        if bandwidth is None or bandwidth <= 0:
            raise ValueError("rbf kernel requires a positive bandwidth")
        sq = (
            np.sum(X * X, axis=1)[:, None]
            - 2.0 * X @ Y.T
            + np.sum(Y * Y, axis=1)[None, :]
        )
        return np.exp(-np.clip(sq, 0.0, None) / (2.0 * bandwidth**2))
    raise ValueError(f"unknown kernel {kind!r}")


def median_pairwise_distance(X) -> float:
    """Median Euclidean distance between rows (the rbf bandwidth heuristic)."""
    X = np.atleast_2d(np.asarray(X, float))
    diff = X[:, None, :] - X[None, :, :]
    d = np.sqrt(np.sum(diff * diff, axis=2))
    iu = np.triu_indices(X.shape[0], k=1)
    vals = d[iu]
    med = float(np.median(vals)) if vals.size else 1.0
    return med if med > 0 else 1.0


@dataclass(eq=False)
class _KernelSide:
    samples: np.ndarray  # retained training rows
    dual_coef: np.ndarray  # (n, k): feature = centered_k(x) @ dual_coef + offset
    offset: np.ndarray  # (k,)
    col_means: np.ndarray  # (n,) training Gram column means
    grand_mean: float
    bandwidth: Optional[float]


@dataclass(eq=False)
class KernelEmbedding:
    """Kernel CCA embedding; projects new points by kernel evaluations
    against the retained training samples."""

    kind: str
    source: _KernelSide
    target: _KernelSide
    regularizer: float
    correlations: np.ndarray

    @property
    def feature_dim(self) -> int:
        return self.source.dual_coef.shape[1]

    def _embed(self, side: _KernelSide, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        k = kernel_matrix(self.kind, X, side.samples, side.bandwidth)
        k_cent = k - side.col_means[None, :] - k.mean(axis=1)[:, None] + side.grand_mean
        return k_cent @ side.dual_coef + side.offset

    def embed_source(self, X) -> np.ndarray:
        return self._embed(self.source, X)

    def embed_target(self, X) -> np.ndarray:
        return self._embed(self.target, X)


def _center_gram(K: np.ndarray):
    col = K.mean(axis=0)
    grand = float(K.mean())
    return K - col[None, :] - col[:, None] + grand, col, grand


def _kernel_features(K: np.ndarray, tol: float = 1e-10):
    """Eigen-coordinates of a centered Gram matrix.

    Returns (Phi, basis) with Phi = U sqrt(L) the per-sample feature rows and
    basis = U / sqrt(L) mapping centered kernel columns to those features.
    """
    w, V = np.linalg.eigh((K + K.T) / 2.0)
    wmax = float(w[-1])
    if wmax <= 0:
        raise NumericalError("kernel matrix has no positive spectrum")
    if float(w[0]) < -1e-8 * wmax:
        raise NumericalError("kernel matrix not PSD after centering")
    keep = w > tol * wmax
    w = w[keep]
    V = V[:, keep]
    return V * np.sqrt(w), V / np.sqrt(w)


def kcca_fit(
    X,
    Y,
    kind: str = "rbf",
    bandwidth: Optional[float] = None,
    reg: Optional[float] = None,
    feature_dim: int = 6,
) -> KernelEmbedding:
    """Kernel CCA via CCA over the kernel eigen-feature coordinates.

    ``reg`` is on the Gram scale (default 1e-3 * n) and is applied as
    reg/n ridge on the feature covariances, so a linear kernel reproduces
    cca_fit(..., reg=reg/n).  rbf bandwidths default to the median pairwise
    distance of each side's samples.
    """
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    if X.shape[0] != Y.shape[0]:
        raise ValueError("X and Y must have equal row counts (paired data)")
    n = X.shape[0]
    if reg is None:
        reg = 1e-3 * n
    if reg <= 0:
        raise ValueError("kernel CCA requires reg > 0")
    if kind not in KERNELS:
        raise ValueError(f"unknown kernel {kind!r}")
    bw_x = bw_y = None
    if kind == "rbf":
        bw_x = bandwidth if bandwidth is not None else median_pairwise_distance(X)
        bw_y = bandwidth if bandwidth is not None else median_pairwise_distance(Y)
    Kx, col_x, grand_x = _center_gram(kernel_matrix(kind, X, X, bw_x))
    Ky, col_y, grand_y = _center_gram(kernel_matrix(kind, Y, Y, bw_y))
    Phi_x, basis_x = _kernel_features(Kx)
    Phi_y, basis_y = _kernel_features(Ky)
    k = min(feature_dim, Phi_x.shape[1], Phi_y.shape[1])
    cca = cca_fit(Phi_x, Phi_y, k, reg=reg / n)
    side_x = _KernelSide(
        samples=X.copy(),
        dual_coef=basis_x @ cca.proj_source,
        offset=-(cca.mean_source @ cca.proj_source),
        col_means=col_x,
        grand_mean=grand_x,
        bandwidth=bw_x,
    )
    side_y = _KernelSide(
        samples=Y.copy(),
        dual_coef=basis_y @ cca.proj_target,
        offset=-(cca.mean_target @ cca.proj_target),
        col_means=col_y,
        grand_mean=grand_y,
        bandwidth=bw_y,
    )
    return KernelEmbedding(
        kind=kind,
        source=side_x,
        target=side_y,
        regularizer=reg,
        correlations=cca.correlations.copy(),
    )


# ---------------------------------------------------------------------------
# direct source -> target mapping


@dataclass(eq=False)
class DirectMapping:
    """MLP regressor predicting the target agent state from the source's."""

    net: MlpParams
    loss_history: np.ndarray  # mean squared error per epoch (length == epochs)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, float)
        single = X.ndim == 1
        Y, _ = _forward_batch(self.net, np.atleast_2d(X))
        return Y[0] if single else Y


def fit_direct_mapping(
    pairs: PairSet,
    epochs: int = 200,
    seed: int = 0,
    hidden=(60, 60, 60),
    batch_size: int = 64,
    learning_rate: float = 1e-3,
) -> DirectMapping:
    """Squared-error regression with ADAM; deterministic per seed.

    Zero epochs return the freshly initialized network with an empty loss
    history.
    """
    if len(pairs) == 0:
        raise ValueError("empty pair set")
    rng = np.random.default_rng(seed)
    net = init_mlp(pairs.source.shape[1], pairs.target.shape[1], hidden, "relu", rng)
    params = net.parameter_list()
    state = AdamState.zeros_like(params)
    hyper = (learning_rate, 0.9, 0.999, 1e-8)
    n = len(pairs)
    history = []
    step = 0
    for _epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            Y, cache = _forward_batch(net, pairs.source[idx])
            resid = Y - pairs.target[idx]
            grads, _ = _backward_batch(net, cache, 2.0 * resid)
            step += 1
            params = adam_step(params, grads, state, hyper, step)
            _write_back(net, params)
        Y, _ = _forward_batch(net, pairs.source)
        history.append(float(np.mean(np.sum((Y - pairs.target) ** 2, axis=1))))
    return DirectMapping(net=net, loss_history=np.array(history))


# ---------------------------------------------------------------------------
# transfer term construction


@dataclass(eq=False)
class TrackingTerm:
    """Per-timestep penalty |map(target state) - reference_t| for tracking a
    mapped source trajectory.

    For embedding methods the reference is the embedded source path and
    ``map`` embeds target states; for the direct mapping the reference is the
    predicted target path and ``map`` is the identity.
    """

    reference: np.ndarray  # (T+1, k)
    mapper: object  # callable (N, da) -> (N, k)

    def distances(self, t: int, agent_states) -> np.ndarray:
        A = np.atleast_2d(np.asarray(agent_states, float))
        Z = self.mapper(A)
        diff = Z - self.reference[t][None, :]
        return np.sqrt(np.sum(diff * diff, axis=1))


def map_source(fitted, X) -> np.ndarray:
    """Source states through the fitted method's source-side map."""
    if isinstance(fitted, EmbeddingModel):
        return embed(fitted, "source", X)
    if isinstance(fitted, DirectMapping):
        return fitted.predict(X)
    if hasattr(fitted, "embed_source"):
        return fitted.embed_source(X)
    raise TypeError(f"unsupported method object {type(fitted).__name__}")


def target_mapper(fitted):
    """Target-side map of the fitted method (identity for direct mapping)."""
    if isinstance(fitted, EmbeddingModel):
        return lambda A: embed(fitted, "target", A)
    if isinstance(fitted, DirectMapping):
        return lambda A: np.atleast_2d(np.asarray(A, float))
    if hasattr(fitted, "embed_target"):
        return fitted.embed_target
    raise TypeError(f"unsupported method object {type(fitted).__name__}")


def as_transfer_reward(fitted, source_trajectory) -> TrackingTerm:
    """Per-timestep target cost term from a fitted method and the optimal
    source trajectory (its agent states define the reference path)."""
    src_states = source_trajectory.agent_matrix()
    return TrackingTerm(
        reference=np.asarray(map_source(fitted, src_states), float),
        mapper=target_mapper(fitted),
    )


# ---------------------------------------------------------------------------
# checkpoints (same JSON family as the embedding module)


def save_method_checkpoint(fitted, path):
    if isinstance(fitted, LinearEmbedding):
        doc = {
            "version": CHECKPOINT_VERSION,
            "method": fitted.method,
            "proj_source": fitted.proj_source.tolist(),
            "proj_target": fitted.proj_target.tolist(),
            "mean_source": None if fitted.mean_source is None else fitted.mean_source.tolist(),
            "mean_target": None if fitted.mean_target is None else fitted.mean_target.tolist(),
            "correlations": None if fitted.correlations is None else fitted.correlations.tolist(),
        }
    elif isinstance(fitted, KernelEmbedding):
        doc = {
            "version": CHECKPOINT_VERSION,
            "method": "kcca",
            "kind": fitted.kind,
            "regularizer": fitted.regularizer,
            "correlations": fitted.correlations.tolist(),
            "sides": {
                name: {
                    "samples": side.samples.tolist(),
                    "dual_coef": side.dual_coef.tolist(),
                    "offset": side.offset.tolist(),
                    "col_means": side.col_means.tolist(),
                    "grand_mean": side.grand_mean,
                    "bandwidth": side.bandwidth,
                }
                for name, side in (("source", fitted.source), ("target", fitted.target))
            },
        }
    elif isinstance(fitted, DirectMapping):
        doc = {
            "version": CHECKPOINT_VERSION,
            "method": "direct",
            "net": {
                "activation": fitted.net.activation,
                "layer_dims": fitted.net.layer_dims,
                "weights": [W.reshape(-1).tolist() for W in fitted.net.weights],
                "biases": [b.tolist() for b in fitted.net.biases],
            },
            "loss_history": fitted.loss_history.tolist(),
        }
    else:
        raise TypeError(f"unsupported method object {type(fitted).__name__}")
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_method_checkpoint(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    method = doc["method"]
    if method in ("cca", "random_proj", "linear"):
        maybe = lambda v: None if v is None else np.array(v, float)
        return LinearEmbedding(
            proj_source=np.array(doc["proj_source"], float),
            proj_target=np.array(doc["proj_target"], float),
            mean_source=maybe(doc["mean_source"]),
            mean_target=maybe(doc["mean_target"]),
            correlations=maybe(doc["correlations"]),
            method=method,
        )
    if method == "kcca":
        sides = {}
        for name in ("source", "target"):
            d = doc["sides"][name]
            sides[name] = _KernelSide(
                samples=np.array(d["samples"], float),
                dual_coef=np.array(d["dual_coef"], float),
                offset=np.array(d["offset"], float),
                col_means=np.array(d["col_means"], float),
                grand_mean=float(d["grand_mean"]),
                bandwidth=d["bandwidth"],
            )
        return KernelEmbedding(
            kind=doc["kind"],
            source=sides["source"],
            target=sides["target"],
            regularizer=float(doc["regularizer"]),
            correlations=np.array(doc["correlations"], float),
        )
    if method == "direct":
        d = doc["net"]
        dims = d["layer_dims"]
        net = MlpParams(
            weights=[
                np.array(w, float).reshape(dims[l + 1], dims[l])
                for l, w in enumerate(d["weights"])
            ],
            biases=[np.array(b, float) for b in d["biases"]],
            activation=d["activation"],
        )
        return DirectMapping(net=net, loss_history=np.array(doc["loss_history"], float))
    raise ValueError(f"unknown method tag {method!r}")
