import numpy as np
import pytest

from morphtransfer import dynamics, trajopt
from morphtransfer.baselines import (
    DirectMapping,
    KernelEmbedding,
    LinearEmbedding,
    as_transfer_reward,
    cca_fit,
    fit_direct_mapping,
    kcca_fit,
    kernel_matrix,
    map_source,
    median_pairwise_distance,
    random_projection,
    save_method_checkpoint,
    load_method_checkpoint,
)
from morphtransfer.embedding import PairSet
from morphtransfer.errors import NumericalError

from oracles import cca_first_correlation_dense


def correlated_blocks(n=200, dx=4, dy=3, noise=0.3, seed=0):
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(n, 3))
    X = Z @ rng.normal(size=(3, dx)) + noise * rng.normal(size=(n, dx))
    Y = Z @ rng.normal(size=(3, dy)) + noise * rng.normal(size=(n, dy))
    return X, Y


# ---------------------------------------------------------------------------
# random projections


def test_random_projection_deterministic():
    a = random_projection(6, 8, 4, seed=3)
    b = random_projection(6, 8, 4, seed=3)
    assert np.array_equal(a.proj_source, b.proj_source)
    assert np.array_equal(a.proj_target, b.proj_target)


def test_random_projection_square_is_well_conditioned():
    emb = random_projection(5, 5, 5, seed=1)
    cond = np.linalg.cond(emb.proj_source)
    assert np.isfinite(cond) and cond < 1e6


def test_random_projection_output_dim():
    emb = random_projection(6, 8, 4, seed=0)
    rng = np.random.default_rng(2)
    assert emb.embed_source(rng.normal(size=(10, 6))).shape == (10, 4)
    assert emb.embed_target(rng.normal(size=(10, 8))).shape == (10, 4)
    with pytest.raises(ValueError):
        random_projection(3, 8, 4, seed=0)


# ---------------------------------------------------------------------------
# CCA


def test_cca_identical_data_perfect_correlation():
    X, _ = correlated_blocks()
    emb = cca_fit(X, X, feature_dim=3, reg=0.0)
    assert np.allclose(emb.correlations, 1.0, atol=1e-6)


def test_cca_invariant_to_invertible_transform():
    X, Y = correlated_blocks(seed=5)
    rng = np.random.default_rng(7)
    A = rng.normal(size=(Y.shape[1], Y.shape[1])) + 2 * np.eye(Y.shape[1])
    base = cca_fit(X, Y, feature_dim=3, reg=0.0)
    mixed = cca_fit(X, Y @ A.T, feature_dim=3, reg=0.0)
    assert np.allclose(base.correlations, mixed.correlations, atol=1e-6)
    # transforming the other block too
    Ax = rng.normal(size=(X.shape[1], X.shape[1])) + 2 * np.eye(X.shape[1])
    both = cca_fit(X @ Ax.T, Y @ A.T, feature_dim=3, reg=0.0)
    assert np.allclose(base.correlations, both.correlations, atol=1e-6)
    # identical data through an invertible map is still perfectly correlated
    emb = cca_fit(X, X @ Ax.T, feature_dim=3, reg=0.0)
    assert np.allclose(emb.correlations, 1.0, atol=1e-6)


def test_cca_first_correlation_matches_dense_search():
    rng = np.random.default_rng(11)
    n = 60
    Z = rng.normal(size=(n, 2))
    X = Z @ rng.normal(size=(2, 3)) + 0.4 * rng.normal(size=(n, 3))
    Y = Z @ rng.normal(size=(2, 2)) + 0.4 * rng.normal(size=(n, 2))
    emb = cca_fit(X, Y, feature_dim=2, reg=0.0)
    dense = cca_first_correlation_dense(X, Y)
    assert emb.correlations[0] == pytest.approx(dense, abs=2e-3)


def test_cca_correlations_sorted_and_bounded():
    X, Y = correlated_blocks(seed=9)
    emb = cca_fit(X, Y, feature_dim=3, reg=1e-3)
    c = emb.correlations
    assert np.all(np.diff(c) <= 1e-12)
    assert np.all(c >= 0.0) and np.all(c <= 1.0 + 1e-9)


def test_cca_rank_deficient_raises_without_reg():
    X, Y = correlated_blocks(seed=3)
    X_deficient = np.concatenate([X, X[:, :1]], axis=1)  # duplicated column
    with pytest.raises(NumericalError):
        cca_fit(X_deficient, Y, feature_dim=2, reg=0.0)
    emb = cca_fit(X_deficient, Y, feature_dim=2, reg=1e-6)
    assert np.all(np.isfinite(emb.correlations))


def test_cca_requires_paired_rows():
    X, Y = correlated_blocks()
    with pytest.raises(ValueError):
        cca_fit(X[:-1], Y, feature_dim=2)


# ---------------------------------------------------------------------------
# kernels and KCCA


def test_quad_kernel_hand_expansion():
    x = np.array([1.0, 2.0])
    y = np.array([-0.5, 3.0])
    got = kernel_matrix("quad", x[None], y[None])[0, 0]
    dot = 1.0 * -0.5 + 2.0 * 3.0
    assert got == pytest.approx((dot + 1.0) ** 2, rel=1e-14)


def test_rbf_kernel_self_is_one():
    x = np.array([[0.3, -0.2, 0.9]])
    assert kernel_matrix("rbf", x, x, bandwidth=0.7)[0, 0] == pytest.approx(1.0)


def test_linear_kernel_kcca_reproduces_cca():
    X, Y = correlated_blocks(n=200, seed=13)
    reg_cov = 1e-3
    cca = cca_fit(X, Y, feature_dim=3, reg=reg_cov)
    kcca = kcca_fit(X, Y, kind="linear", reg=reg_cov * X.shape[0], feature_dim=3)
    assert np.allclose(kcca.correlations, cca.correlations, atol=1e-3)


def test_kcca_embeds_training_points_finitely():
    X, Y = correlated_blocks(n=80, seed=15)
    for kind in ("linear", "quad", "rbf"):
        emb = kcca_fit(X, Y, kind=kind, feature_dim=3)
        zx = emb.embed_source(X)
        zy = emb.embed_target(Y)
        assert np.all(np.isfinite(zx)) and np.all(np.isfinite(zy))
        assert zx.shape == (80, 3)


def test_kcca_requires_positive_reg():
    X, Y = correlated_blocks(n=40)
    with pytest.raises(ValueError):
        kcca_fit(X, Y, kind="linear", reg=0.0, feature_dim=2)


def test_median_pairwise_distance():
    X = np.array([[0.0], [1.0], [3.0]])
    # pairwise distances 1, 3, 2 -> median 2
    assert median_pairwise_distance(X) == pytest.approx(2.0)


# ---------------------------------------------------------------------------
# direct mapping


def test_direct_mapping_identity_task():
    # source == target morphology: predicting the state from itself should be
    # nearly exact on held-out rollout states
    spec = dynamics.make_domain(dynamics.three_link(), "reach", "shaped", horizon=40)
    policy = trajopt.init_policy(spec.state_dim, spec.action_dim, 40, 0.25)
    states = np.vstack(
        [dynamics.rollout(policy, spec, ci % 4, seed=ci).agent_matrix() for ci in range(8)]
    )
    perm = np.random.default_rng(0).permutation(len(states))
    ntr = len(states) - 48
    train, held = states[perm[:ntr]], states[perm[ntr:]]
    pairs = PairSet(source=train, target=train.copy())
    mapping = fit_direct_mapping(pairs, epochs=600, seed=0, hidden=(60, 60, 60),
                                 learning_rate=5e-4)
    pred = mapping.predict(held)
    rel = np.mean(np.linalg.norm(pred - held, axis=1)) / np.mean(
        np.linalg.norm(held, axis=1)
    )
    assert rel < 0.05


def test_direct_mapping_zero_epochs():
    pairs = PairSet(source=np.zeros((4, 3)), target=np.zeros((4, 2)))
    mapping = fit_direct_mapping(pairs, epochs=0, seed=1)
    assert len(mapping.loss_history) == 0
    assert mapping.predict(np.zeros(3)).shape == (2,)


def test_direct_mapping_loss_decreases():
    rng = np.random.default_rng(33)
    src = rng.normal(size=(100, 4))
    tgt = np.sin(src @ rng.normal(size=(4, 3)))
    pairs = PairSet(source=src, target=tgt)
    mapping = fit_direct_mapping(pairs, epochs=50, seed=2, hidden=(24, 24))
    assert mapping.loss_history[-1] < mapping.loss_history[0]


def test_direct_mapping_deterministic():
    rng = np.random.default_rng(35)
    pairs = PairSet(source=rng.normal(size=(30, 3)), target=rng.normal(size=(30, 2)))
    m1 = fit_direct_mapping(pairs, epochs=5, seed=7)
    m2 = fit_direct_mapping(pairs, epochs=5, seed=7)
    for a, b in zip(m1.net.weights, m2.net.weights):
        assert np.array_equal(a, b)


# ---------------------------------------------------------------------------
# transfer term


def source_trajectory(seed=0):
    spec = dynamics.make_domain(dynamics.three_link(), "reach", "shaped", horizon=20)
    policy = trajopt.init_policy(spec.state_dim, spec.action_dim, 20, 0.2)
    return dynamics.rollout(policy, spec, 0, seed=seed)


def test_tracking_term_zero_at_prediction():
    traj = source_trajectory()
    pairs = PairSet(source=traj.agent_matrix(), target=traj.agent_matrix().copy())
    mapping = fit_direct_mapping(pairs, epochs=20, seed=0, hidden=(16,))
    term = as_transfer_reward(mapping, traj)
    for t in [0, 5, 19]:
        pred = mapping.predict(traj.agent_matrix()[t])
        assert term.distances(t, pred[None, :])[0] == pytest.approx(0.0, abs=1e-12)


def test_tracking_term_embedding_methods():
    traj = source_trajectory(seed=3)
    A = traj.agent_matrix()
    emb = random_projection(A.shape[1], A.shape[1], 3, seed=5)
    term = as_transfer_reward(emb, traj)
    # distance at the source state itself equals |f(s) - g(s)|
    for t in [0, 7]:
        expected = np.linalg.norm(
            emb.embed_source(A[t][None])[0] - emb.embed_target(A[t][None])[0]
        )
        assert term.distances(t, A[t][None, :])[0] == pytest.approx(expected, rel=1e-12)


def test_method_checkpoint_roundtrip(tmp_path):
    X, Y = correlated_blocks(n=60, seed=41)
    probe_x = X[:5]
    probe_y = Y[:5]
    fitted = {
        "cca": cca_fit(X, Y, feature_dim=2, reg=1e-4),
        "random_proj": random_projection(4, 3, 2, seed=1),
        "kcca": kcca_fit(X, Y, kind="rbf", feature_dim=2),
        "direct": fit_direct_mapping(PairSet(source=X, target=Y), epochs=3, seed=2),
    }
    for name, obj in fitted.items():
        path = tmp_path / f"{name}.json"
        save_method_checkpoint(obj, path)
        loaded = load_method_checkpoint(path)
        assert np.allclose(map_source(obj, probe_x), map_source(loaded, probe_x),
                           atol=1e-12)
        if not isinstance(obj, DirectMapping):
            got = (loaded.embed_target if hasattr(loaded, "embed_target") else None)(probe_y)
            want = obj.embed_target(probe_y)
            assert np.allclose(got, want, atol=1e-12)
