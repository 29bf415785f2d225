"""Independent reference implementations used to check the library.

Everything here is deliberately written the slow, obvious way (enumeration,
scalar recursions, dense searches) and never calls the code paths it checks.
"""

import numpy as np


def chain_positions_trig_sum(angles, lengths):
    """Planar chain positions by explicit per-term trig accumulation."""
    pts = [(0.0, 0.0)]
    total_angle = 0.0
    x = y = 0.0
    for a, l in zip(angles, lengths):
        total_angle += a
        x += l * np.cos(total_angle)
        y += l * np.sin(total_angle)
        pts.append((x, y))
    return np.array(pts)


def scalar_joint_rollout(q0, dq0, torque, inertia, damping, dt, steps):
    """Semi-implicit Euler for one decoupled joint under constant torque."""
    q, dq = q0, dq0
    out = [(q, dq)]
    for _ in range(steps):
        ddq = inertia * torque - damping * dq
        dq = dq + dt * ddq
        q = q + dt * dq
        out.append((q, dq))
    return np.array(out)


def dtw_bruteforce(a, b):
    """Minimum summed-distance monotone path cost by full enumeration."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    n, m = len(a), len(b)
    dist = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))
    best = [np.inf]

    def walk(i, j, acc):
        if acc >= best[0]:
            return
        if i == n - 1 and j == m - 1:
            best[0] = acc
            return
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, acc + dist[i + 1, j + 1])
        if i + 1 < n:
            walk(i + 1, j, acc + dist[i + 1, j])
        if j + 1 < m:
            walk(i, j + 1, acc + dist[i, j + 1])

    walk(0, 0, dist[0, 0])
    return best[0]


def lqr_riccati(A, B, Q, R, Qf, T):
    """Finite-horizon discrete LQR gains for cost sum x'Qx + u'Ru (+x'Qf x).

    Returns (K list with u_t = -K_t x_t, P list of cost-to-go matrices).
    """
    P = Qf.copy()
    Ks = [None] * T
    Ps = [None] * (T + 1)
    Ps[T] = P.copy()
    for t in reversed(range(T)):
        G = R + B.T @ P @ B
        K = np.linalg.solve(G, B.T @ P @ A)
        P = Q + A.T @ P @ A - A.T @ P @ B @ K
        Ks[t] = K
        Ps[t] = P.copy()
    return Ks, Ps


def cca_first_correlation_dense(X, Y, grid=60, refine=4):
    """Best correlation of (Xw, Yv) over unit directions by grid + refinement.

    Works for blocks of dimension 2 or 3 (directions parametrized by angles).
    """

    def directions(dim, n, center=None, width=np.pi):
        if dim == 2:
            if center is None:
                thetas = np.linspace(0, np.pi, n, endpoint=False)
            else:
                thetas = center + np.linspace(-width, width, n)
            return np.stack([np.cos(thetas), np.sin(thetas)], 1), thetas[:, None]
        if dim == 3:
            if center is None:
                th = np.linspace(0, np.pi, n, endpoint=False)
                ph = np.linspace(0, np.pi, n, endpoint=False)
            else:
                th = center[0] + np.linspace(-width, width, n)
                ph = center[1] + np.linspace(-width, width, n)
            TH, PH = np.meshgrid(th, ph, indexing="ij")
            dirs = np.stack(
                [np.sin(TH) * np.cos(PH), np.sin(TH) * np.sin(PH), np.cos(TH)], -1
            ).reshape(-1, 3)
            params = np.stack([TH.reshape(-1), PH.reshape(-1)], 1)
            return dirs, params
        raise ValueError("only 2-d and 3-d blocks supported")

    Xc = X - X.mean(0)
    Yc = Y - Y.mean(0)

    def corr(w, v):
        a = Xc @ w
        b = Yc @ v
        denom = np.sqrt((a @ a) * (b @ b))
        return 0.0 if denom == 0 else abs(a @ b) / denom

    wdirs, wparams = directions(X.shape[1], grid)
    vdirs, vparams = directions(Y.shape[1], grid)
    best = (-1.0, None, None)
    for w, wp in zip(wdirs, wparams):
        for v, vp in zip(vdirs, vparams):
            c = corr(w, v)
            if c > best[0]:
                best = (c, wp, vp)
    width = np.pi / grid
    for _ in range(refine):
        wdirs, wparams = directions(X.shape[1], 9, center=best[1], width=width)
        vdirs, vparams = directions(Y.shape[1], 9, center=best[2], width=width)
        for w, wp in zip(wdirs, wparams):
            for v, vp in zip(vdirs, vparams):
                c = corr(w, v)
                if c > best[0]:
                    best = (c, wp, vp)
        width /= 4.0
    return best[0]


def adam_hand_unroll(x0, grad_fn, lr, b1, b2, eps, steps):
    """Scalar ADAM recurrence written out longhand."""
    x = x0
    m = 0.0
    v = 0.0
    for step in range(1, steps + 1):
        g = grad_fn(x)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1**step)
        vhat = v / (1 - b2**step)
        x = x - lr * mhat / (np.sqrt(vhat) + eps)
    return x
