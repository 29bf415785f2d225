"""Trajectory-centric RL with time-varying linear-Gaussian policies.

Each iteration samples episodes, fits per-timestep linear dynamics by ridge
regression, expands the cost to second order about the mean trajectory by
finite differences, and improves the policy with an iterative LQG backward
pass damped by a soft trust region on the mean action change.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import dynamics
from .errors import BackwardPassError, DynamicsFitError
from .seeding import derive_seed


@dataclass(eq=False)
class LinearGaussianPolicy:
    """u_t ~ N(K_t x_t + k_t, C_t) over a fixed horizon."""

    K: np.ndarray  # (T, du, dx)
    k: np.ndarray  # (T, du)
    C: np.ndarray  # (T, du, du)

    @property
    def horizon(self) -> int:
        return self.K.shape[0]

    def copy(self) -> "LinearGaussianPolicy":
        return LinearGaussianPolicy(self.K.copy(), self.k.copy(), self.C.copy())


def init_policy(state_dim: int, action_dim: int, horizon: int, init_var: float = 0.1):
    """Zero-mean policy with isotropic exploration noise of variance init_var."""
    return LinearGaussianPolicy(
        K=np.zeros((horizon, action_dim, state_dim)),
        k=np.zeros((horizon, action_dim)),
        C=np.tile(init_var * np.eye(action_dim), (horizon, 1, 1)),
    )


@dataclass(eq=False)
class LocalDynamicsModel:
    """x_{t+1} ~ N(A_t x_t + B_t u_t + c_t, Sigma_t), fitted per timestep."""

    A: np.ndarray  # (T, dx, dx)
    B: np.ndarray  # (T, dx, du)
    c: np.ndarray  # (T, dx)
    Sigma: np.ndarray  # (T, dx, dx)


def fit_dynamics(trajectories: Sequence, regularizer: float) -> LocalDynamicsModel:
    """Per-timestep ridge regression of x_{t+1} on (x_t, u_t, 1).

    Data are mean-centered before the ridge solve and the offset recovered
    from the means, so the fitted residuals average to zero exactly even
    with regularization.  Columns are standardized for the ridge so that
    poorly excited state directions shrink toward zero instead of producing
    runaway coefficients; the regularizer is relative to the per-column
    sample variance.  A singular Gram matrix (only possible with
    regularizer 0) raises DynamicsFitError.
    """
    if len(trajectories) < 2:
        raise ValueError("need at least 2 trajectories")
    horizons = {t.horizon for t in trajectories}
    if len(horizons) != 1:
        raise ValueError("trajectories must share one horizon")
    T = horizons.pop()
    X = np.stack([t.state_matrix() for t in trajectories])  # (N, T+1, dx)
    U = np.stack([t.actions for t in trajectories])  # (N, T, du)
    N, _, dx = X.shape
    du = U.shape[2]
    dz = dx + du
    A = np.zeros((T, dx, dx))
    B = np.zeros((T, dx, du))
    c = np.zeros((T, dx))
    Sigma = np.zeros((T, dx, dx))
    eye = np.eye(dz)
    for t in range(T):
        Z = np.concatenate([X[:, t], U[:, t]], axis=1)
        Y = X[:, t + 1]
        z_mean = Z.mean(axis=0)
        y_mean = Y.mean(axis=0)
        Zc = Z - z_mean
        Yc = Y - y_mean
        scale = np.sqrt(np.mean(Zc * Zc, axis=0))
        scale = np.maximum(scale, 1e-6)
        Zs = Zc / scale
        G = Zs.T @ Zs + (regularizer * N) * eye
        try:
            np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            raise DynamicsFitError(
                f"singular Gram matrix at t={t}; raise the regularizer"
            ) from None
        W = np.linalg.solve(G, Zs.T @ Yc) / scale[:, None]  # (dz, dx)
        A[t] = W[:dx].T
        B[t] = W[dx:].T
        c[t] = y_mean - A[t] @ z_mean[:dx] - B[t] @ z_mean[dx:]
        resid = Yc - Zc @ W
        Sigma[t] = resid.T @ resid / N
    return LocalDynamicsModel(A=A, B=B, c=c, Sigma=Sigma)


# ---------------------------------------------------------------------------
# cost quadratization


@dataclass(eq=False)
class QuadCost:
    """Second-order cost expansion about a nominal trajectory.

    Index t < T holds the running cost in (x, u); index T the terminal cost
    with zero u-blocks.  H* are Hessians after symmetrization and eigenvalue
    clamping; g* are gradients at the nominal point (x0, u0).
    """

    Hxx: np.ndarray  # (T+1, dx, dx)
    Huu: np.ndarray  # (T+1, du, du)
    Hux: np.ndarray  # (T+1, du, dx)
    gx: np.ndarray  # (T+1, dx)
    gu: np.ndarray  # (T+1, du)
    x0: np.ndarray  # (T+1, dx)
    u0: np.ndarray  # (T+1, du)


_STENCILS: dict = {}


def _fd_stencil(dz: int, hg: float, hh: float):
    """Perturbation stencil for central-difference gradients and Hessians.

    Rows: [center | +-hg e_i pairs | +-hh e_i pairs | (++, +-, -+, --) for
    every i<j pair at step hh].  Cached per (dz, hg, hh).
    """
    key = (dz, hg, hh)
    if key not in _STENCILS:
        eye = np.eye(dz)
        blocks = [np.zeros((1, dz))]
        blocks.append(np.stack([hg * eye, -hg * eye], axis=1).reshape(2 * dz, dz))
        blocks.append(np.stack([hh * eye, -hh * eye], axis=1).reshape(2 * dz, dz))
        ii, jj = np.triu_indices(dz, k=1)
        if ii.size:
            ei = eye[ii] * hh
            ej = eye[jj] * hh
            quad = np.stack([ei + ej, ei - ej, -ei + ej, -ei - ej], axis=1)
            blocks.append(quad.reshape(4 * ii.size, dz))
        _STENCILS[key] = (np.concatenate(blocks, axis=0), ii, jj)
    return _STENCILS[key]


def _fd_quadratics(fun: Callable, z0: np.ndarray, grad_step: float, hess_step: float):
    """Gradient and Hessian of fun at z0 by central differences.

    ``fun`` maps a batch (N, dz) to (N,); all evaluation points are packed
    into a single batch.
    """
    dz = z0.size
    hg, hh = grad_step, hess_step
    offsets, ii, jj = _fd_stencil(dz, hg, hh)
    vals = fun(z0[None, :] + offsets)
    f0 = vals[0]
    gvals = vals[1 : 1 + 2 * dz].reshape(dz, 2)
    grad = (gvals[:, 0] - gvals[:, 1]) / (2.0 * hg)
    dvals = vals[1 + 2 * dz : 1 + 4 * dz].reshape(dz, 2)
    H = np.zeros((dz, dz))
    H[np.diag_indices(dz)] = (dvals[:, 0] - 2.0 * f0 + dvals[:, 1]) / (hh * hh)
    if ii.size:
        pvals = vals[1 + 4 * dz :].reshape(ii.size, 4)
        off = (pvals[:, 0] - pvals[:, 1] - pvals[:, 2] + pvals[:, 3]) / (4.0 * hh * hh)
        H[ii, jj] = off
        H[jj, ii] = off
    return grad, H


def _clamp_psd(H: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    w, V = np.linalg.eigh((H + H.T) / 2.0)
    return (V * np.clip(w, floor, None)) @ V.T


def quadratize_cost(
    spec: dynamics.DomainSpec,
    nominal: dynamics.Trajectory,
    extra_cost: Optional[Callable] = None,
    grad_step: float = 1e-5,
    hess_step: float = 1e-4,
) -> QuadCost:
    """Finite-difference quadratic expansion of the task cost (plus any
    extra state-dependent term) about the nominal trajectory.

    ``extra_cost(t, X) -> (N,)`` is added to the task cost at each step; it
    is how the transfer penalty enters the optimizer.  Hessians are
    symmetrized and eigenvalue-clamped at 1e-6.
    """
    T = nominal.horizon
    dx = spec.state_dim
    du = spec.action_dim
    evaluate = dynamics.make_cost_evaluator(spec, warm_joints=nominal.joints_matrix())
    X0 = nominal.state_matrix()
    quad = QuadCost(
        Hxx=np.zeros((T + 1, dx, dx)),
        Huu=np.zeros((T + 1, du, du)),
        Hux=np.zeros((T + 1, du, dx)),
        gx=np.zeros((T + 1, dx)),
        gu=np.zeros((T + 1, du)),
        x0=X0.copy(),
        u0=np.zeros((T + 1, du)),
    )
    for t in range(T + 1):
        if t < T:
            u0 = nominal.actions[t]
            z0 = np.concatenate([X0[t], u0])
            dzx = slice(0, dx)

            def fun(Z, t=t):
                total = evaluate(t, Z[:, :dx], Z[:, dx:])
                if extra_cost is not None:
                    total = total + extra_cost(t, Z[:, :dx])
                return total

            grad, H = _fd_quadratics(fun, z0, grad_step, hess_step)
            H = _clamp_psd(H)
            quad.Hxx[t] = H[dzx, dzx]
            quad.Huu[t] = H[dx:, dx:]
            quad.Hux[t] = H[dx:, dzx]
            quad.gx[t] = grad[:dx]
            quad.gu[t] = grad[dx:]
            quad.u0[t] = u0
        else:
            # terminal: state-dependent part only, evaluated with zero action
            def fun(Z, t=t):
                total = evaluate(t, Z, np.zeros((Z.shape[0], du)))
                if extra_cost is not None:
                    total = total + extra_cost(t, Z)
                return total

            grad, H = _fd_quadratics(fun, X0[t], grad_step, hess_step)
            quad.Hxx[t] = _clamp_psd(H)
            quad.gx[t] = grad
    return quad


# ---------------------------------------------------------------------------
# backward pass


def _absolute_terms(quad: QuadCost):
    """Convert nominal-point gradients to the absolute-coordinate linear
    terms of l(z) = 0.5 z^T H z + g^T z + const."""
    gx = quad.gx.copy()
    gu = quad.gu.copy()
    Tp1 = quad.gx.shape[0]
    for t in range(Tp1):
        gx[t] -= quad.Hxx[t] @ quad.x0[t] + quad.Hux[t].T @ quad.u0[t]
        gu[t] -= quad.Hux[t] @ quad.x0[t] + quad.Huu[t] @ quad.u0[t]
    return gx, gu


def _solve_psd(M: np.ndarray, rhs: np.ndarray):
    """Solve with escalating diagonal regularization; None if hopeless."""
    if not np.all(np.isfinite(M)):
        return None, None
    scale = max(float(np.max(np.abs(np.diag(M)))), 1e-12)
    for reg in (0.0, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2):
        Mr = M + reg * scale * np.eye(M.shape[0])
        try:
            np.linalg.cholesky(Mr)
        except np.linalg.LinAlgError:
            continue
        return np.linalg.solve(Mr, rhs), Mr
    return None, None


# numerical guard for the value recursion on stiff fitted models: contact
# rows can report one-step sensitivities that compound into overflow over a
# 100-step horizon, so the state matrix spectrum is bounded before recursing
_A_SPECTRAL_CAP = 5.0
# beyond this penalty the candidate is numerically pinned to the previous
# policy and further escalation only degrades conditioning
_PENALTY_CAP = 1e8


def _clip_spectral(A: np.ndarray, cap: float) -> np.ndarray:
    U, s, Vt = np.linalg.svd(A)
    if s[0] <= cap:
        return A
    return (U * np.minimum(s, cap)) @ Vt


def _backward_once(model: LocalDynamicsModel, Hxx, Huu, Hux, gx, gu, collect=None):
    """One Riccati-style sweep over absolute-form quadratics.

    Returns (K, k, C) or raises BackwardPassError when Q_uu cannot be made
    positive definite.  ``collect`` may be a dict to receive per-t Q_uu and
    V_xx for diagnostics.
    """
    T = model.A.shape[0]
    dx = model.A.shape[1]
    du = model.B.shape[2]
    K = np.zeros((T, du, dx))
    k = np.zeros((T, du))
    C = np.zeros((T, du, du))
    Vxx = (Hxx[T] + Hxx[T].T) / 2.0
    vx = gx[T]
    if collect is not None:
        collect["Quu"] = [None] * T
        collect["Vxx"] = [None] * (T + 1)
        collect["Vxx"][T] = Vxx.copy()
    for t in reversed(range(T)):
        A, B, c = model.A[t], model.B[t], model.c[t]
        A = _clip_spectral(A, _A_SPECTRAL_CAP)
        VA = Vxx @ A
        Qxx = Hxx[t] + A.T @ VA
        Quu = Huu[t] + B.T @ Vxx @ B
        Qux = Hux[t] + B.T @ VA
        w = vx + Vxx @ c
        qx = gx[t] + A.T @ w
        qu = gu[t] + B.T @ w
        Quu = (Quu + Quu.T) / 2.0
        sol, Quu_reg = _solve_psd(Quu, np.concatenate([Qux, qu[:, None]], axis=1))
        if sol is None:
            raise BackwardPassError(f"Q_uu not positive definite at t={t}")
        K[t] = -sol[:, :dx]
        k[t] = -sol[:, dx]
        Cinv = np.linalg.inv(Quu_reg)
        C[t] = (Cinv + Cinv.T) / 2.0
        Vxx = Qxx + Qux.T @ K[t]
        Vxx = (Vxx + Vxx.T) / 2.0
        vx = qx + Qux.T @ k[t]
        if collect is not None:
            collect["Quu"][t] = Quu_reg
            collect["Vxx"][t] = Vxx.copy()
    return K, k, C


def ilqg_backward(
    model: LocalDynamicsModel,
    quads,
    prev: LinearGaussianPolicy,
    kl_step: float,
    collect: Optional[dict] = None,
    noise_cap: Optional[float] = 0.1,
) -> LinearGaussianPolicy:
    """Improve the policy by an iLQG backward pass under a soft trust region.

    ``quads`` is one QuadCost or a list of them (one per condition); their
    absolute-form quadratics are averaged so a single policy serves every
    condition through its feedback on the env-state coordinates.  Deviation
    from ``prev`` is damped by a quadratic penalty on the mean action whose
    weight grows until the mean action change along the nominal states is at
    most ``kl_step``.

    The returned covariance is Q_uu^-1 with eigenvalues capped at
    ``noise_cap`` (pass None to disable): where the cost surface is nearly
    flat the raw inverse can dwarf the action bounds, and exploration beyond
    the initial noise level only degrades the sampled dynamics fits.
    """
    if isinstance(quads, QuadCost):
        quads = [quads]
    terms = [_absolute_terms(q) for q in quads]
    nq = float(len(quads))
    Hxx = sum(q.Hxx for q in quads) / nq
    Huu = sum(q.Huu for q in quads) / nq
    Hux = sum(q.Hux for q in quads) / nq
    gx = sum(t[0] for t in terms) / nq
    gu = sum(t[1] for t in terms) / nq
    X0 = np.concatenate([q.x0[:-1] for q in quads], axis=0)  # (ncond*T, dx)
    prev_means = np.concatenate(
        [
            np.einsum("tux,tx->tu", prev.K, q.x0[:-1]) + prev.k
            for q in quads
        ],
        axis=0,
    )
    T = prev.horizon
    du = prev.k.shape[1]
    eye = np.eye(du)
    penalty = 0.0
    while True:
        if penalty == 0.0:
            Hxx_p, Huu_p, Hux_p, gx_p, gu_p = Hxx, Huu, Hux, gx, gu
        else:
            # quadratic penalty 0.5*p*|u - K_prev x - k_prev|^2 in absolute form
            Hxx_p = Hxx.copy()
            Huu_p = Huu.copy()
            Hux_p = Hux.copy()
            gx_p = gx.copy()
            gu_p = gu.copy()
            for t in range(T):
                Kp, kp = prev.K[t], prev.k[t]
                Huu_p[t] += penalty * eye
                Hux_p[t] += -penalty * Kp
                Hxx_p[t] += penalty * Kp.T @ Kp
                gu_p[t] += -penalty * kp
                gx_p[t] += penalty * Kp.T @ kp
        try:
            K, k, C = _backward_once(
                model, Hxx_p, Huu_p, Hux_p, gx_p, gu_p, collect=collect
            )
        except BackwardPassError:
            # more damping can restore positive definiteness; give up only
            # once the penalty is effectively pinning the previous policy
            if penalty >= _PENALTY_CAP:
                raise
            penalty = 1e-3 if penalty == 0.0 else penalty * 10.0
            continue
        KX = np.concatenate(
            [np.einsum("tux,tx->tu", K, q.x0[:-1]) + k for q in quads], axis=0
        )
        change = float(np.mean(np.linalg.norm(KX - prev_means, axis=1)))
        if change <= kl_step or penalty >= _PENALTY_CAP:
            if collect is not None:
                collect["penalty"] = penalty
                collect["mean_change"] = change
            if noise_cap is not None:
                for t in range(T):
                    w, V = np.linalg.eigh(C[t])
                    C[t] = (V * np.clip(w, 0.0, noise_cap)) @ V.T
            return LinearGaussianPolicy(K=K, k=k, C=C)
        penalty = 1e-3 if penalty == 0.0 else penalty * 10.0
    raise AssertionError("unreachable")  # pragma: no cover


# ---------------------------------------------------------------------------
# iteration loop


@dataclass
class IterationStats:
    iteration: int
    mean_cost: float
    success_rate: float
    step_size: float
    objective: float


def _trajectory_objective(traj, condition_index, extra_cost) -> float:
    """Task cost of one trajectory plus the extra (transfer) term."""
    total = traj.total_cost()
    if extra_cost is not None:
        X = traj.state_matrix()
        for t in range(X.shape[0]):
            total += float(extra_cost(condition_index, t, X[t : t + 1])[0])
    return total


def rl_iteration(
    spec: dynamics.DomainSpec,
    policies,
    samples_per_iter: int,
    seed: int,
    extra_cost: Optional[Callable] = None,
    kl_steps=1.0,
    dynamics_reg: float = 1e-6,
    iteration: int = 0,
    noise_cap: Optional[float] = 0.1,
) -> tuple:
    """One improvement step: sample, fit dynamics, quadratize, backward pass.

    ``policies`` holds one LinearGaussianPolicy per condition (the local
    policies of the trajectory-centric method); the dynamics model is fitted
    on the pooled samples since the physics does not depend on the
    condition.  ``extra_cost(condition_index, t, X) -> (N,)`` adds a
    state-dependent term (the transfer penalty) to the cost seen by the
    optimizer; sampled trajectory costs remain pure task costs so curves
    stay comparable.

    Each condition's backward pass runs a line search over the trust-region
    size: a candidate is accepted only if its deterministic mean-rollout
    objective does not increase, otherwise the step is halved (the previous
    policy is kept when no candidate improves).  Backward-pass failures are
    retried up to 3 times with a halved step before propagating.

    Returns (new policies, IterationStats, accepted step per condition).
    """
    ncond = len(spec.conditions)
    if len(policies) != ncond:
        raise ValueError("need one policy per condition")
    dx, du = spec.state_dim, spec.action_dim
    if samples_per_iter * ncond * spec.horizon < 2 * (dx + du):
        warnings.warn(
            "too few samples for the 2*(state_dim+action_dim) heuristic",
            stacklevel=2,
        )
    if np.isscalar(kl_steps):
        kl_steps = [float(kl_steps)] * ncond
    trajs = []
    for ci in range(ncond):
        for s in range(samples_per_iter):
            trajs.append(
                dynamics.rollout(policies[ci], spec, ci, derive_seed(seed, "sample", ci, s))
            )
    model = fit_dynamics(trajs, dynamics_reg)

    new_policies = list(policies)
    accepted_steps = list(kl_steps)
    for ci in range(ncond):
        nominal = dynamics.mean_rollout(policies[ci], spec, ci)
        per_condition = None
        if extra_cost is not None:
            def per_condition(t, X, ci=ci):
                return extra_cost(ci, t, X)
        quad = quadratize_cost(spec, nominal, extra_cost=per_condition)
        objective_before = _trajectory_objective(nominal, ci, extra_cost)
        step = kl_steps[ci]
        failures = 0
        for _trial in range(10):
            try:
                candidate = ilqg_backward(model, quad, policies[ci], step, noise_cap=noise_cap)
            except BackwardPassError:
                failures += 1
                if failures > 3:
                    raise
                step /= 2.0
                continue
            objective_after = _trajectory_objective(
                dynamics.mean_rollout(candidate, spec, ci), ci, extra_cost
            )
            if objective_after <= objective_before + 1e-12 * max(1.0, abs(objective_before)):
                new_policies[ci] = candidate
                break
            step /= 2.0
        accepted_steps[ci] = step

    stats = IterationStats(
        iteration=iteration,
        mean_cost=float(np.mean([t.total_cost() for t in trajs])),
        success_rate=float(np.mean([t.success for t in trajs])),
        step_size=float(np.mean(accepted_steps)),
        objective=float(
            np.mean(
                [
                    _trajectory_objective(t, i // samples_per_iter, extra_cost)
                    for i, t in enumerate(trajs)
                ]
            )
        ),
    )
    return new_policies, stats, accepted_steps


def solve_domain(
    spec: dynamics.DomainSpec,
    iterations: int,
    seed: int,
    samples_per_iter: int = 5,
    extra_cost_for_iteration: Optional[Callable] = None,
    kl_step: float = 1.0,
    dynamics_reg: float = 1e-6,
    init_policy_var: float = 0.1,
) -> tuple:
    """Run ``iterations`` improvement steps from fresh zero policies (one
    per condition).

    ``extra_cost_for_iteration(it)`` may return the per-iteration extra cost
    term (or None).  Per-condition trust-region steps grow from the accepted
    value each iteration; the line search inside rl_iteration shrinks them.
    Returns (policies, [IterationStats per iteration]).
    """
    ncond = len(spec.conditions)
    policies = [
        init_policy(spec.state_dim, spec.action_dim, spec.horizon, init_policy_var)
        for _ in range(ncond)
    ]
    stats_list = []
    steps = [kl_step] * ncond
    for it in range(1, iterations + 1):
        extra = None
        if extra_cost_for_iteration is not None:
            extra = extra_cost_for_iteration(it - 1)
        policies, stats, accepted = rl_iteration(
            spec,
            policies,
            samples_per_iter,
            derive_seed(seed, "iter", it),
            extra_cost=extra,
            kl_steps=steps,
            dynamics_reg=dynamics_reg,
            iteration=it,
            noise_cap=init_policy_var,
        )
        # grow from the accepted steps; the line search handles shrinking
        steps = [min(max(s, 1e-3) * 2.0, 10.0) for s in accepted]
        stats_list.append(stats)
    return policies, stats_list


def write_stats_csv(stats_list: Sequence[IterationStats], path):
    """Iteration stats as CSV: iter,mean_cost,success_rate,step_size."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "mean_cost", "success_rate", "step_size"])
        for s in stats_list:
            writer.writerow(
                [s.iteration, repr(s.mean_cost), repr(s.success_rate), repr(s.step_size)]
            )
