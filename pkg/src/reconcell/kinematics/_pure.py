"""NumPy implementation of the kinematics kernels.

Used when the compiled extension is unavailable (or forced via
RECONCELL_PURE=1). Same contract as ``reconcell.kinematics._native``:
standard Denavit-Hartenberg chains, geometric Jacobian, damped-least-squares
inverse kinematics and velocity resolution. All quantities are expressed in
the chain base frame; callers compose the robot's base pose.
"""

from __future__ import annotations

import math

import numpy as np


def dh_transform(a: float, alpha: float, d: float, theta: float) -> np.ndarray:
    """Standard DH link transform RotZ(theta)*TransZ(d)*TransX(a)*RotX(alpha)."""
    ct, st = math.cos(theta), math.sin(theta)
    ca, sa = math.cos(alpha), math.sin(alpha)
    return np.array([
        [ct, -st * ca, st * sa, a * ct],
        [st, ct * ca, -ct * sa, a * st],
        [0.0, sa, ca, d],
        [0.0, 0.0, 0.0, 1.0],
    ])


def fk(dh: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Flange transform (4x4) in the chain base frame."""
    dh = np.asarray(dh, dtype=float)
    q = np.asarray(q, dtype=float)
    T = np.eye(4)
    for i in range(dh.shape[0]):
        T = T @ dh_transform(dh[i, 0], dh[i, 1], dh[i, 2], q[i] + dh[i, 3])
    return T


def _frames(dh: np.ndarray, q: np.ndarray):
    """Joint origins and z axes (frame i-1 for joint i) plus flange transform."""
    n = dh.shape[0]
    origins = np.zeros((n + 1, 3))
    zaxes = np.zeros((n + 1, 3))
    zaxes[0] = (0.0, 0.0, 1.0)
    T = np.eye(4)
    for i in range(n):
        T = T @ dh_transform(dh[i, 0], dh[i, 1], dh[i, 2], q[i] + dh[i, 3])
        origins[i + 1] = T[:3, 3]
        zaxes[i + 1] = T[:3, 2]
    return origins, zaxes, T


def jacobian(dh: np.ndarray, q: np.ndarray, p_tool_local=None) -> np.ndarray:
    """Geometric Jacobian (6 x n) at the flange origin, or at a reference
    point given in the flange frame."""
    dh = np.asarray(dh, dtype=float)
    q = np.asarray(q, dtype=float)
    n = dh.shape[0]
    origins, zaxes, T = _frames(dh, q)
    p_e = T[:3, 3]
    if p_tool_local is not None:
        p_e = p_e + T[:3, :3] @ np.asarray(p_tool_local, dtype=float)
    J = np.zeros((6, n))
    for i in range(n):
        z = zaxes[i]
        J[:3, i] = np.cross(z, p_e - origins[i])
        J[3:, i] = z
    return J


def _rot_log(R: np.ndarray) -> np.ndarray:
    """Rotation-vector logarithm of a rotation matrix, robust near 0 and pi."""
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    c = max(-1.0, min(1.0, (tr - 1.0) * 0.5))
    angle = math.acos(c)
    if angle < 1e-12:
        return np.zeros(3)
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if angle > math.pi - 1e-6:
        # near pi the skew part vanishes; recover axis from the diagonal
        ax = np.sqrt(np.maximum(np.diag(R) - c, 0.0) / (1.0 - c))
        ax[0] = math.copysign(ax[0], w[0]) if w[0] != 0 else ax[0]
        ax[1] = math.copysign(ax[1], w[1]) if w[1] != 0 else ax[1]
        ax[2] = math.copysign(ax[2], w[2]) if w[2] != 0 else ax[2]
        nrm = np.linalg.norm(ax)
        if nrm == 0.0:
            return np.zeros(3)
        return ax / nrm * angle
    return w * (angle / (2.0 * math.sin(angle)))


def pose_error(T_current: np.ndarray, T_target: np.ndarray) -> np.ndarray:
    """6-vector error (dp, dtheta) taking current toward target."""
    e = np.zeros(6)
    e[:3] = T_target[:3, 3] - T_current[:3, 3]
    e[3:] = _rot_log(T_target[:3, :3] @ T_current[:3, :3].T)
    return e


def dls_qdot(dh, q, twist, lam, p_tool_local=None) -> np.ndarray:
    """Joint velocities realizing a Cartesian twist, damped least squares."""
    J = jacobian(dh, q, p_tool_local)
    A = J @ J.T + (lam * lam) * np.eye(6)
    return J.T @ np.linalg.solve(A, np.asarray(twist, dtype=float))


# Per-iteration error clamp; keeps far-target steps bounded without
# affecting small-perturbation convergence.
_ERR_CAP_POS = 0.2
_ERR_CAP_ROT = 1.0


def ik_solve(dh, q0, T_target, lower, upper, lam=0.002,
             tol_pos=1e-6, tol_rot=1e-6, max_iters=300, p_tool_local=None):
    """Damped-least-squares IK.

    Returns ``(q, iterations, converged)``; ``q`` is clamped to the limits
    after every step. Checks convergence before iterating, so a target equal
    to FK(q0) returns in 0 iterations.
    """
    dh = np.asarray(dh, dtype=float)
    q = np.array(q0, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    T_target = np.asarray(T_target, dtype=float)
    lam2 = lam * lam
    for it in range(max_iters + 1):
        T = fk(dh, q)
        if p_tool_local is not None:
            off = np.eye(4)
            off[:3, 3] = np.asarray(p_tool_local, dtype=float)
            T = T @ off
        e = pose_error(T, T_target)
        if np.linalg.norm(e[:3]) < tol_pos and np.linalg.norm(e[3:]) < tol_rot:
            return q, it, True
        if it == max_iters:
            break
        pn = np.linalg.norm(e[:3])
        if pn > _ERR_CAP_POS:
            e[:3] *= _ERR_CAP_POS / pn
        rn = np.linalg.norm(e[3:])
        if rn > _ERR_CAP_ROT:
            e[3:] *= _ERR_CAP_ROT / rn
        J = jacobian(dh, q, p_tool_local)
        A = J @ J.T + lam2 * np.eye(6)
        dq = J.T @ np.linalg.solve(A, e)
        q = np.clip(q + dq, lower, upper)
    return q, max_iters, False
