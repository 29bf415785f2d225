"""Planar simulation of torque-driven and tendon-driven arms.

The world is two-dimensional. An arm is a chain of rigid links rotating about
its base at the origin; episodic tasks place one movable object and one goal
marker in the plane. Objects respond to the end-effector through a
quasi-static contact rule, which keeps every step exactly reproducible.

All functions are pure over (state, action, spec, seed): rollouts for
different conditions or seeds can run concurrently with no shared state.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

TASKS = ("reach", "block_move", "peg_insert", "button_press", "block_pull")
REWARD_MODES = ("shaped", "sparse")
ACTUATIONS = ("torque", "tendon")

# Tasks whose object slides under the projected-displacement contact rule.
_SLIDING_TASKS = ("block_move", "peg_insert", "block_pull")


# ---------------------------------------------------------------------------
# morphologies


@dataclass(frozen=True, eq=False)
class TendonSpec:
    """Geometry of a three-tendon transmission for a 3-link arm.

    ``moment_arms[i, j]`` is the base moment arm of tendon i about joint j;
    a tendon shortens as its spanned joints flex positive.  The tendon at
    ``variable_lever_index`` has its arm scaled by
    ``1 + lever_angle_gain * cos(q_j)`` at each joint it spans, so its length
    is ``rest - a0 * (q + gain * sin q)`` there; the other tendons conform to
    the arm and keep a constant lever.  The first tendon spans both the
    shoulder and the elbow.
    """

    rest_lengths: np.ndarray
    moment_arms: np.ndarray
    variable_lever_index: int = 2
    lever_angle_gain: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "rest_lengths", np.asarray(self.rest_lengths, float))
        object.__setattr__(self, "moment_arms", np.asarray(self.moment_arms, float))
        if self.rest_lengths.shape != (3,):
            raise ValueError("exactly 3 tendons are supported")
        if self.moment_arms.shape != (3, 3):
            raise ValueError("moment_arms must be 3x3 (tendon x joint)")
        if not 0 <= self.variable_lever_index < 3:
            raise ValueError("variable_lever_index out of range")

    @property
    def n_tendons(self) -> int:
        return 3


def default_tendon_spec() -> TendonSpec:
    """Shipped tendon geometry: tendon 0 spans joints 0-1, tendon 1 the
    elbow, tendon 2 the wrist with the angle-dependent lever."""
    arms = np.array(
        [
            [0.5, 0.5, 0.0],
            [0.0, 0.5, 0.0],
            [0.0, 0.0, 0.5],
        ]
    )
    return TendonSpec(rest_lengths=np.array([2.0, 1.2, 0.8]), moment_arms=arms)


@dataclass(frozen=True, eq=False)
class MorphologySpec:
    """An agent body: link lengths plus how its joints are driven."""

    actuation: str
    link_lengths: np.ndarray
    joint_damping: float = 2.0
    inertia_scale: float = 1.0
    tendon_spec: Optional[TendonSpec] = None

    def __post_init__(self):
        object.__setattr__(self, "link_lengths", np.asarray(self.link_lengths, float))
        if self.actuation not in ACTUATIONS:
            raise ValueError(f"unknown actuation {self.actuation!r}")
        if self.link_lengths.ndim != 1 or self.link_lengths.size < 2:
            raise ValueError("need at least 2 links")
        if np.any(self.link_lengths <= 0):
            raise ValueError("link lengths must be positive")
        if (self.tendon_spec is not None) != (self.actuation == "tendon"):
            raise ValueError("tendon_spec present iff actuation == 'tendon'")
        if self.actuation == "tendon" and self.n_links != 3:
            raise ValueError("tendon actuation is only supported for 3 links")
        if self.joint_damping < 0:
            raise ValueError("joint_damping must be >= 0")

    @property
    def n_links(self) -> int:
        return int(self.link_lengths.size)

    @property
    def action_dim(self) -> int:
        return 3 if self.actuation == "tendon" else self.n_links

    @property
    def agent_dim(self) -> int:
        return 6 if self.actuation == "tendon" else 2 * self.n_links

    @property
    def reach(self) -> float:
        return float(np.sum(self.link_lengths))

    def agent_labels(self) -> list:
        if self.actuation == "tendon":
            return [f"len{i}" for i in range(3)] + [f"dlen{i}" for i in range(3)]
        n = self.n_links
        return [f"q{i}" for i in range(n)] + [f"dq{i}" for i in range(n)]

    def action_labels(self) -> list:
        return [f"u{i}" for i in range(self.action_dim)]


def three_link() -> MorphologySpec:
    return MorphologySpec("torque", np.array([0.4, 0.4, 0.3]))


def four_link() -> MorphologySpec:
    return MorphologySpec("torque", np.array([0.3, 0.3, 0.3, 0.2]))


def tendon_three_link() -> MorphologySpec:
    return MorphologySpec(
        "tendon", np.array([0.4, 0.4, 0.3]), tendon_spec=default_tendon_spec()
    )


MORPHOLOGIES = {
    "three_link": three_link,
    "four_link": four_link,
    "tendon_three_link": tendon_three_link,
}


# ---------------------------------------------------------------------------
# kinematics and tendon observation


def forward_kinematics(angles, link_lengths) -> np.ndarray:
    """Positions of every joint pivot plus the end-effector, shape (n+1, 2).

    Row 0 is the base (origin); row k the tip of link k; the last row is the
    end-effector. Angles are relative to the previous link.
    """
    angles = np.asarray(angles, float)
    lengths = np.asarray(link_lengths, float)
    if angles.shape != lengths.shape:
        raise ValueError("angles and link_lengths must have equal length")
    phi = np.cumsum(angles)
    pts = np.zeros((angles.size + 1, 2))
    pts[1:, 0] = np.cumsum(lengths * np.cos(phi))
    pts[1:, 1] = np.cumsum(lengths * np.sin(phi))
    return pts


def _ee_batch(angles: np.ndarray, link_lengths: np.ndarray) -> np.ndarray:
    """End-effector positions for a batch of joint configurations (N, n)."""
    phi = np.cumsum(angles, axis=1)
    x = np.sum(link_lengths * np.cos(phi), axis=1)
    y = np.sum(link_lengths * np.sin(phi), axis=1)
    return np.stack([x, y], axis=1)


def _moment_arm_matrix(q: np.ndarray, ts: TendonSpec) -> np.ndarray:
    """Instantaneous moment arms dL/dq = -A(q), shape (3, n)."""
    A = ts.moment_arms.copy()
    v = ts.variable_lever_index
    A[v] = A[v] * (1.0 + ts.lever_angle_gain * np.cos(q))
    return A


def _tendon_lengths(q: np.ndarray, ts: TendonSpec) -> np.ndarray:
    """Tendon lengths for joint angles q (supports batch: q (..., n))."""
    q = np.asarray(q, float)
    base = q @ ts.moment_arms.T
    v = ts.variable_lever_index
    correction = (ts.lever_angle_gain * np.sin(q)) @ ts.moment_arms[v]
    if q.ndim == 1:
        base[v] += correction
    else:
        base[..., v] += correction
    return ts.rest_lengths - base


def tendon_observe(angles, vels, spec: TendonSpec):
    """Map joint angles/velocities to tendon lengths and length velocities.

    Fixed-lever tendons are affine in the angles; the variable-lever tendon
    follows the integrated angle-dependent arm, and velocities come from the
    chain rule dL/dt = dL/dq . qdot.
    """
    angles = np.asarray(angles, float)
    vels = np.asarray(vels, float)
    if angles.shape != (3,) or vels.shape != (3,):
        raise ValueError("tendon arms are 3-link: expected 3 angles and 3 velocities")
    lengths = _tendon_lengths(angles, spec)
    length_vels = -_moment_arm_matrix(angles, spec) @ vels
    return lengths, length_vels


def tendon_joint_angles(lengths, spec: TendonSpec, warm_start=None) -> np.ndarray:
    """Invert the tendon-length map by Newton iteration.

    Supports a batch of length vectors (N, 3). The map is injective because
    every instantaneous moment arm stays positive (gain < 1), so Newton from
    any nearby warm start converges quadratically.
    """
    L = np.atleast_2d(np.asarray(lengths, float))
    if warm_start is None:
        q = np.zeros_like(L)
    else:
        q = np.broadcast_to(np.asarray(warm_start, float), L.shape).copy()
    for _ in range(60):
        resid = _tendon_lengths(q, spec) - L
        if np.max(np.abs(resid)) < 1e-13:
            break
        # dL/dq = -A(q), batched per row
        v = spec.variable_lever_index
        J = np.broadcast_to(-spec.moment_arms, (q.shape[0], 3, 3)).copy()
        J[:, v, :] *= 1.0 + spec.lever_angle_gain * np.cos(q)
        q = q - np.linalg.solve(J, resid[:, :, None])[:, :, 0]
    return q if np.asarray(lengths).ndim == 2 else q[0]


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True, eq=False)
class DomainState:
    """Full simulator state at one timestep.

    ``agent`` is the observation the learner sees (joint angles/velocities
    for torque arms, tendon lengths/velocities for tendon arms); ``env`` is
    [obj_x, obj_y, goal_x, goal_y]; ``joints`` is the underlying
    (angles, angular velocities) configuration the integrator advances.  For
    torque arms ``agent`` and ``joints`` coincide.
    """

    agent: np.ndarray
    env: np.ndarray
    joints: np.ndarray

    def __post_init__(self):
        for name in ("agent", "env", "joints"):
            arr = np.asarray(getattr(self, name), float)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite entries in {name}")
            object.__setattr__(self, name, arr)


def make_state(morph: MorphologySpec, q, dq, env) -> DomainState:
    q = np.asarray(q, float)
    dq = np.asarray(dq, float)
    if morph.actuation == "tendon":
        lengths, dlengths = tendon_observe(q, dq, morph.tendon_spec)
        agent = np.concatenate([lengths, dlengths])
    else:
        agent = np.concatenate([q, dq])
    return DomainState(agent=agent, env=np.asarray(env, float), joints=np.concatenate([q, dq]))


def state_vector(state: DomainState) -> np.ndarray:
    """Concatenated (agent, env) vector used by policies and model fitting."""
    return np.concatenate([state.agent, state.env])


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """An MDP: a morphology performing one task under one reward mode."""

    morphology: MorphologySpec
    task: str
    reward_mode: str = "shaped"
    horizon: int = 100
    dt: float = 0.05
    conditions: Sequence[np.ndarray] = ()
    w_touch: float = 1.0
    w_goal: float = 5.0
    w_action: float = 1e-3
    success_eps: float = 0.05
    contact_radius: float = 0.1
    action_bound: float = 10.0

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.reward_mode not in REWARD_MODES:
            raise ValueError(f"unknown reward mode {self.reward_mode!r}")
        if self.horizon <= 0 or self.dt <= 0:
            raise ValueError("horizon and dt must be positive")
        conds = tuple(np.asarray(c, float) for c in self.conditions)
        if not conds:
            raise ValueError("at least one condition is required")
        reach = self.morphology.reach
        for i, c in enumerate(conds):
            if c.shape != (4,):
                raise ValueError("conditions are [obj_x, obj_y, goal_x, goal_y]")
            if np.linalg.norm(c[2:]) > reach or np.linalg.norm(c[:2]) > reach:
                raise ValueError(f"condition {i} outside workspace radius {reach}")
        object.__setattr__(self, "conditions", conds)

    @property
    def state_dim(self) -> int:
        return self.morphology.agent_dim + 4

    @property
    def action_dim(self) -> int:
        return self.morphology.action_dim

    def state_labels(self) -> list:
        return self.morphology.agent_labels() + ["obj_x", "obj_y", "goal_x", "goal_y"]


def default_conditions(task: str) -> list:
    """Four object/goal placements per task, shared by every morphology.

    All points sit well inside the 1.1 m reach of the shipped arms; the arm
    starts stretched along +x, so the interesting work happens in the upper
    half-plane.
    """
    if task == "reach":
        goals = [(0.75, 0.25), (0.45, 0.55), (0.15, 0.75), (0.65, -0.30)]
        return [np.array([gx, gy, gx, gy]) for gx, gy in goals]
    if task == "block_move":
        return [
            np.array([0.60, 0.20, 0.72, 0.40]),
            np.array([0.50, 0.40, 0.58, 0.62]),
            np.array([0.35, 0.55, 0.28, 0.75]),
            np.array([0.70, -0.10, 0.82, 0.08]),
        ]
    if task == "peg_insert":
        return [
            np.array([0.50, 0.30, 0.50, 0.12]),
            np.array([0.62, 0.35, 0.66, 0.18]),
            np.array([0.38, 0.45, 0.34, 0.26]),
            np.array([0.70, 0.12, 0.74, -0.06]),
        ]
    if task == "button_press":
        return [
            np.array([0.55, 0.30, 0.67, 0.36]),
            np.array([0.45, 0.45, 0.55, 0.53]),
            np.array([0.30, 0.60, 0.38, 0.70]),
            np.array([0.65, 0.05, 0.77, 0.09]),
        ]
    if task == "block_pull":
        return [
            np.array([0.55, 0.35, 0.32, 0.22]),
            np.array([0.62, 0.22, 0.40, 0.10]),
            np.array([0.45, 0.50, 0.24, 0.36]),
            np.array([0.68, 0.08, 0.46, 0.00]),
        ]
    raise ValueError(f"unknown task {task!r}")


def make_domain(
    morphology: MorphologySpec,
    task: str,
    reward_mode: str = "shaped",
    conditions=None,
    horizon: int = 100,
    dt: float = 0.05,
    **overrides,
) -> DomainSpec:
    """DomainSpec with task-default conditions and actuation-default bounds."""
    if conditions is None:
        conditions = default_conditions(task)
    if "action_bound" not in overrides:
        overrides["action_bound"] = 20.0 if morphology.actuation == "tendon" else 10.0
    return DomainSpec(
        morphology=morphology,
        task=task,
        reward_mode=reward_mode,
        horizon=horizon,
        dt=dt,
        conditions=conditions,
        **overrides,
    )


def initial_state(spec: DomainSpec, condition_index: int) -> DomainState:
    """Arm at rest, stretched along +x, with the indexed object placement."""
    n = spec.morphology.n_links
    env = spec.conditions[condition_index]
    return make_state(spec.morphology, np.zeros(n), np.zeros(n), env)


# ---------------------------------------------------------------------------
# stepping


def _advance_object(task, env, ee_before, ee_after, radius):
    """Quasi-static object update.

    The button depresses along its axis by the end-effector's penetration
    into its capture zone; sliding objects move along the direction to the
    goal by the projected end-effector displacement while in contact.  Both
    stop at the goal (the object bottoms out).
    """
    if task == "reach":
        return env
    obj, goal = env[:2], env[2:]
    gap = goal - obj
    dist = float(np.hypot(gap[0], gap[1]))
    if dist == 0.0:
        return env
    d = gap / dist
    if task == "button_press":
        pen = radius - float(np.linalg.norm(ee_after - obj))
        move = min(max(0.0, pen), dist)
    else:
        if float(np.linalg.norm(ee_before - obj)) <= radius:
            move = min(max(0.0, float((ee_after - ee_before) @ d)), dist)
        else:
            move = 0.0
    if move == 0.0:
        return env
    return np.concatenate([obj + move * d, goal])


def step(state: DomainState, action, spec: DomainSpec) -> DomainState:
    """One semi-implicit Euler step plus the quasi-static object update.

    Joint acceleration is inertia_scale * tau - joint_damping * qdot, with
    tau the action for torque arms and A(q)^T action for tendon arms.
    Deterministic; the action is clamped to the configured bound.
    """
    morph = spec.morphology
    u = np.asarray(action, float)
    if u.shape != (morph.action_dim,):
        raise ValueError(f"action must have shape ({morph.action_dim},)")
    if not np.all(np.isfinite(u)):
        raise ValueError("non-finite action")
    u = np.clip(u, -spec.action_bound, spec.action_bound)
    n = morph.n_links
    q, dq = state.joints[:n], state.joints[n:]
    if morph.actuation == "torque":
        tau = u
    else:
        tau = _moment_arm_matrix(q, morph.tendon_spec).T @ u
    ddq = morph.inertia_scale * tau - morph.joint_damping * dq
    dq_next = dq + spec.dt * ddq
    q_next = q + spec.dt * dq_next
    lengths = morph.link_lengths
    ee_before = forward_kinematics(q, lengths)[-1]
    ee_after = forward_kinematics(q_next, lengths)[-1]
    env_next = _advance_object(spec.task, state.env, ee_before, ee_after, spec.contact_radius)
    return make_state(morph, q_next, dq_next, env_next)


# ---------------------------------------------------------------------------
# costs


def cost(state: DomainState, action, spec: DomainSpec) -> float:
    """Per-step cost.

    shaped:  w_touch * |ee - obj| + w_goal * |obj - goal| + w_action * |u|^2
    sparse:  w_goal * |obj - goal| + w_action * |u|^2
    reach uses |ee - goal| in both modes (there is no object to move).
    """
    u = np.asarray(action, float)
    n = spec.morphology.n_links
    ee = forward_kinematics(state.joints[:n], spec.morphology.link_lengths)[-1]
    obj, goal = state.env[:2], state.env[2:]
    action_term = spec.w_action * float(u @ u)
    if spec.task == "reach":
        return spec.w_touch * float(np.linalg.norm(ee - goal)) + action_term
    goal_term = spec.w_goal * float(np.linalg.norm(obj - goal))
    if spec.reward_mode == "sparse":
        return goal_term + action_term
    return spec.w_touch * float(np.linalg.norm(ee - obj)) + goal_term + action_term


def make_cost_evaluator(spec: DomainSpec, warm_joints: Optional[np.ndarray] = None):
    """Batched cost over raw state vectors, for derivative estimation.

    Returns ``evaluate(t, X, U) -> (N,) costs`` where X rows are
    (agent, env) vectors.  For tendon arms the joint angles behind each
    observation are recovered by Newton iteration warm-started from
    ``warm_joints[t]`` (typically the nominal trajectory's joints).
    """
    morph = spec.morphology
    n = morph.n_links
    lengths = morph.link_lengths

    def evaluate(t, X, U):
        X = np.atleast_2d(np.asarray(X, float))
        U = np.atleast_2d(np.asarray(U, float))
        if morph.actuation == "tendon":
            warm = None if warm_joints is None else warm_joints[t][:n]
            q = tendon_joint_angles(X[:, :3], morph.tendon_spec, warm_start=warm)
        else:
            q = X[:, :n]
        ee = _ee_batch(q, lengths)
        obj = X[:, morph.agent_dim : morph.agent_dim + 2]
        goal = X[:, morph.agent_dim + 2 : morph.agent_dim + 4]
        action_term = spec.w_action * np.sum(U * U, axis=1)
        if spec.task == "reach":
            return spec.w_touch * np.linalg.norm(ee - goal, axis=1) + action_term
        goal_term = spec.w_goal * np.linalg.norm(obj - goal, axis=1)
        if spec.reward_mode == "sparse":
            return goal_term + action_term
        return spec.w_touch * np.linalg.norm(ee - obj, axis=1) + goal_term + action_term

    return evaluate


# ---------------------------------------------------------------------------
# rollouts


@dataclass(eq=False)
class Trajectory:
    """One episode: horizon+1 states, horizon actions and per-step costs."""

    states: list
    actions: np.ndarray
    costs: np.ndarray
    success: bool

    @property
    def horizon(self) -> int:
        return len(self.states) - 1

    def agent_matrix(self) -> np.ndarray:
        return np.stack([s.agent for s in self.states])

    def state_matrix(self) -> np.ndarray:
        return np.stack([state_vector(s) for s in self.states])

    def joints_matrix(self) -> np.ndarray:
        return np.stack([s.joints for s in self.states])

    def total_cost(self) -> float:
        return float(np.sum(self.costs))


def _psd_sqrt(C: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix (eigenvalue clamping at 0)."""
    if not np.any(C):
        return np.zeros_like(C)
    w, V = np.linalg.eigh((C + C.T) / 2.0)
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T


def _final_distance(state: DomainState, spec: DomainSpec) -> float:
    n = spec.morphology.n_links
    if spec.task == "reach":
        ee = forward_kinematics(state.joints[:n], spec.morphology.link_lengths)[-1]
        return float(np.linalg.norm(ee - state.env[2:]))
    return float(np.linalg.norm(state.env[:2] - state.env[2:]))


def success(traj: Trajectory, spec: DomainSpec) -> bool:
    """True iff the final object-to-goal (reach: ee-to-goal) distance is
    below spec.success_eps."""
    return _final_distance(traj.states[-1], spec) < spec.success_eps


def rollout(policy, spec: DomainSpec, condition_index: int, seed: int) -> Trajectory:
    """Sample one episode under u_t ~ N(K_t x_t + k_t, C_t).

    The recorded action is the clamped sample actually applied, so replaying
    states[t] with actions[t] through step() reproduces states[t+1] exactly.
    """
    if len(policy.k) != spec.horizon:
        raise ValueError("policy horizon does not match spec horizon")
    gen = np.random.default_rng(seed)
    du = spec.action_dim
    chol = [_psd_sqrt(policy.C[t]) for t in range(spec.horizon)]
    state = initial_state(spec, condition_index)
    states = [state]
    actions = np.zeros((spec.horizon, du))
    costs = np.zeros(spec.horizon)
    for t in range(spec.horizon):
        x = state_vector(state)
        u = policy.K[t] @ x + policy.k[t] + chol[t] @ gen.standard_normal(du)
        u = np.clip(u, -spec.action_bound, spec.action_bound)
        costs[t] = cost(state, u, spec)
        state = step(state, u, spec)
        actions[t] = u
        states.append(state)
    traj = Trajectory(states=states, actions=actions, costs=costs, success=False)
    traj.success = success(traj, spec)
    return traj


def mean_rollout(policy, spec: DomainSpec, condition_index: int) -> Trajectory:
    """Deterministic rollout of the policy mean (covariance ignored)."""
    if len(policy.k) != spec.horizon:
        raise ValueError("policy horizon does not match spec horizon")
    state = initial_state(spec, condition_index)
    states = [state]
    actions = np.zeros((spec.horizon, spec.action_dim))
    costs = np.zeros(spec.horizon)
    for t in range(spec.horizon):
        x = state_vector(state)
        u = np.clip(policy.K[t] @ x + policy.k[t], -spec.action_bound, spec.action_bound)
        costs[t] = cost(state, u, spec)
        state = step(state, u, spec)
        actions[t] = u
        states.append(state)
    traj = Trajectory(states=states, actions=actions, costs=costs, success=False)
    traj.success = success(traj, spec)
    return traj


# ---------------------------------------------------------------------------
# export


def trajectory_to_csv(traj: Trajectory, spec: DomainSpec, path):
    """Write one episode as CSV: t, agent state, env state, action, cost.

    The final row carries the terminal state with empty action/cost cells.
    Floats are written with repr so files are byte-stable across runs.
    """
    header = (
        ["t"]
        + spec.state_labels()
        + spec.morphology.action_labels()
        + ["cost"]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(traj.horizon):
            x = state_vector(traj.states[t])
            row = (
                [t]
                + [repr(float(v)) for v in x]
                + [repr(float(v)) for v in traj.actions[t]]
                + [repr(float(traj.costs[t]))]
            )
            writer.writerow(row)
        x = state_vector(traj.states[-1])
        writer.writerow(
            [traj.horizon]
            + [repr(float(v)) for v in x]
            + [""] * spec.action_dim
            + [""]
        )
