# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kinematics kernels: DH forward kinematics, geometric Jacobian,
damped-least-squares IK and velocity resolution.

Mirrors the contract of ``reconcell.kinematics._pure``; the inner loops run
on C doubles with a hand-rolled 6x6 Cholesky solve, which keeps the
per-tick control path and the IK iteration allocation-free.
"""

import numpy as np

from libc.math cimport acos, cos, fabs, fmax, sin, sqrt
from libc.string cimport memcpy, memset

cdef double PI = 3.141592653589793238462643383279502884

# per-iteration error clamp, matches the pure backend
cdef double ERR_CAP_POS = 0.2
cdef double ERR_CAP_ROT = 1.0

cdef enum:
    MAXN = 16  # compile-time cap on DOF for stack buffers
    MAXN1x3 = 51  # (MAXN + 1) * 3
    MAX6N = 96  # 6 * MAXN


cdef inline void dh_fill(double a, double alpha, double d, double theta, double* T) noexcept nogil:
    cdef double ct = cos(theta)
    cdef double st = sin(theta)
    cdef double ca = cos(alpha)
    cdef double sa = sin(alpha)
    T[0] = ct;  T[1] = -st * ca; T[2] = st * sa;   T[3] = a * ct
    T[4] = st;  T[5] = ct * ca;  T[6] = -ct * sa;  T[7] = a * st
    T[8] = 0.0; T[9] = sa;       T[10] = ca;       T[11] = d
    T[12] = 0.0; T[13] = 0.0;    T[14] = 0.0;      T[15] = 1.0


cdef inline void mat4_mul(double* A, double* B, double* C) noexcept nogil:
    cdef int i, j, k
    cdef double s
    for i in range(4):
        for j in range(4):
            s = 0.0
            for k in range(4):
                s += A[4 * i + k] * B[4 * k + j]
            C[4 * i + j] = s


cdef void _chain(double[:, ::1] dh, double[:] q, int n,
                 double* origins, double* zaxes, double* T) noexcept nogil:
    """origins/zaxes: (n+1)x3 row-major buffers; T: resulting 4x4."""
    cdef double link[16]
    cdef double tmp[16]
    cdef int i
    memset(T, 0, 16 * sizeof(double))
    T[0] = T[5] = T[10] = T[15] = 1.0
    origins[0] = origins[1] = origins[2] = 0.0
    zaxes[0] = 0.0; zaxes[1] = 0.0; zaxes[2] = 1.0
    for i in range(n):
        dh_fill(dh[i, 0], dh[i, 1], dh[i, 2], q[i] + dh[i, 3], link)
        mat4_mul(T, link, tmp)
        memcpy(T, tmp, 16 * sizeof(double))
        origins[3 * (i + 1)] = T[3]
        origins[3 * (i + 1) + 1] = T[7]
        origins[3 * (i + 1) + 2] = T[11]
        zaxes[3 * (i + 1)] = T[2]
        zaxes[3 * (i + 1) + 1] = T[6]
        zaxes[3 * (i + 1) + 2] = T[10]


cdef void _jac(double* origins, double* zaxes, double* p_e, int n, double* J) noexcept nogil:
    """J is 6 x n row-major."""
    cdef int i
    cdef double zx, zy, zz, rx, ry, rz
    for i in range(n):
        zx = zaxes[3 * i]; zy = zaxes[3 * i + 1]; zz = zaxes[3 * i + 2]
        rx = p_e[0] - origins[3 * i]
        ry = p_e[1] - origins[3 * i + 1]
        rz = p_e[2] - origins[3 * i + 2]
        J[0 * n + i] = zy * rz - zz * ry
        J[1 * n + i] = zz * rx - zx * rz
        J[2 * n + i] = zx * ry - zy * rx
        J[3 * n + i] = zx
        J[4 * n + i] = zy
        J[5 * n + i] = zz


cdef int _chol6_solve(double* A, double* b, double* x) noexcept nogil:
    """Solve A x = b for SPD 6x6 A (row-major). Returns 0 on success."""
    cdef double L[36]
    cdef double y[6]
    cdef int i, j, k
    cdef double s
    for j in range(6):
        s = A[6 * j + j]
        for k in range(j):
            s -= L[6 * j + k] * L[6 * j + k]
        if s <= 0.0:
            return -1
        L[6 * j + j] = sqrt(s)
        for i in range(j + 1, 6):
            s = A[6 * i + j]
            for k in range(j):
                s -= L[6 * i + k] * L[6 * j + k]
            L[6 * i + j] = s / L[6 * j + j]
    for i in range(6):
        s = b[i]
        for k in range(i):
            s -= L[6 * i + k] * y[k]
        y[i] = s / L[6 * i + i]
    for i in range(5, -1, -1):
        s = y[i]
        for k in range(i + 1, 6):
            s -= L[6 * k + i] * x[k]
        x[i] = s / L[6 * i + i]
    return 0


cdef void _rot_log(double* T, double* out) noexcept nogil:
    """Rotation-vector log of the 3x3 block of a row-major 4x4 transform."""
    cdef double tr = T[0] + T[5] + T[10]
    cdef double c = (tr - 1.0) * 0.5
    cdef double angle, f, nrm
    cdef double w0, w1, w2, a0, a1, a2
    if c > 1.0:
        c = 1.0
    elif c < -1.0:
        c = -1.0
    angle = acos(c)
    if angle < 1e-12:
        out[0] = out[1] = out[2] = 0.0
        return
    w0 = T[9] - T[6]
    w1 = T[2] - T[8]
    w2 = T[4] - T[1]
    if angle > PI - 1e-6:
        a0 = sqrt(fmax(T[0] - c, 0.0) / (1.0 - c))
        a1 = sqrt(fmax(T[5] - c, 0.0) / (1.0 - c))
        a2 = sqrt(fmax(T[10] - c, 0.0) / (1.0 - c))
        if w0 < 0.0: a0 = -a0
        if w1 < 0.0: a1 = -a1
        if w2 < 0.0: a2 = -a2
        nrm = sqrt(a0 * a0 + a1 * a1 + a2 * a2)
        if nrm == 0.0:
            out[0] = out[1] = out[2] = 0.0
            return
        out[0] = a0 / nrm * angle
        out[1] = a1 / nrm * angle
        out[2] = a2 / nrm * angle
        return
    f = angle / (2.0 * sin(angle))
    out[0] = w0 * f
    out[1] = w1 * f
    out[2] = w2 * f


def fk(dh, q):
    """Flange transform (4x4) in the chain base frame."""
    cdef double[:, ::1] dhv = np.ascontiguousarray(dh, dtype=np.float64)
    cdef double[:] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef int n = dhv.shape[0]
    if n > MAXN:
        raise ValueError("DOF exceeds compiled limit")
    cdef double origins[MAXN1x3]
    cdef double zaxes[MAXN1x3]
    cdef double T[16]
    _chain(dhv, qv, n, origins, zaxes, T)
    out = np.empty((4, 4))
    cdef double[:, ::1] ov = out
    memcpy(&ov[0, 0], T, 16 * sizeof(double))
    return out


def jacobian(dh, q, p_tool_local=None):
    """Geometric Jacobian (6 x n), optionally at a flange-frame tool point."""
    cdef double[:, ::1] dhv = np.ascontiguousarray(dh, dtype=np.float64)
    cdef double[:] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef int n = dhv.shape[0]
    if n > MAXN:
        raise ValueError("DOF exceeds compiled limit")
    cdef double origins[MAXN1x3]
    cdef double zaxes[MAXN1x3]
    cdef double T[16]
    cdef double p_e[3]
    cdef double tl[3]
    _chain(dhv, qv, n, origins, zaxes, T)
    p_e[0] = T[3]; p_e[1] = T[7]; p_e[2] = T[11]
    if p_tool_local is not None:
        tl[0] = p_tool_local[0]; tl[1] = p_tool_local[1]; tl[2] = p_tool_local[2]
        p_e[0] += T[0] * tl[0] + T[1] * tl[1] + T[2] * tl[2]
        p_e[1] += T[4] * tl[0] + T[5] * tl[1] + T[6] * tl[2]
        p_e[2] += T[8] * tl[0] + T[9] * tl[1] + T[10] * tl[2]
    out = np.empty((6, n))
    cdef double[:, ::1] Jv = out
    _jac(origins, zaxes, p_e, n, &Jv[0, 0])
    return out


def dls_qdot(dh, q, twist, lam, p_tool_local=None):
    """Joint velocities realizing a Cartesian twist, damped least squares."""
    J = jacobian(dh, q, p_tool_local)
    cdef double[:, ::1] Jv = J
    cdef int n = Jv.shape[1]
    cdef double A[36]
    cdef double e[6]
    cdef double y[6]
    cdef int i, j, k
    cdef double s
    cdef double lam2 = lam * lam
    cdef double[:] tw = np.ascontiguousarray(twist, dtype=np.float64)
    for i in range(6):
        e[i] = tw[i]
        for j in range(6):
            s = 0.0
            for k in range(n):
                s += Jv[i, k] * Jv[j, k]
            A[6 * i + j] = s
        A[6 * i + i] += lam2
    if _chol6_solve(A, e, y) != 0:
        raise ArithmeticError("damped normal matrix not SPD")
    out = np.zeros(n)
    cdef double[:] ov = out
    for k in range(n):
        s = 0.0
        for i in range(6):
            s += Jv[i, k] * y[i]
        ov[k] = s
    return out


def ik_solve(dh, q0, T_target, lower, upper, lam=0.002,
             tol_pos=1e-6, tol_rot=1e-6, max_iters=300, p_tool_local=None):
    """Damped-least-squares IK; returns (q, iterations, converged)."""
    cdef double[:, ::1] dhv = np.ascontiguousarray(dh, dtype=np.float64)
    cdef int n = dhv.shape[0]
    if n > MAXN:
        raise ValueError("DOF exceeds compiled limit")
    qarr = np.array(q0, dtype=np.float64)
    cdef double[:] qv = qarr
    cdef double[:, ::1] Tt = np.ascontiguousarray(T_target, dtype=np.float64)
    cdef double[:] lo = np.ascontiguousarray(lower, dtype=np.float64)
    cdef double[:] hi = np.ascontiguousarray(upper, dtype=np.float64)
    cdef bint has_tool = p_tool_local is not None
    cdef double tl[3]
    if has_tool:
        tl[0] = p_tool_local[0]; tl[1] = p_tool_local[1]; tl[2] = p_tool_local[2]

    cdef double origins[MAXN1x3]
    cdef double zaxes[MAXN1x3]
    cdef double T[16]
    cdef double Trel[16]
    cdef double J[MAX6N]
    cdef double A[36]
    cdef double e[6]
    cdef double y[6]
    cdef double p_e[3]
    cdef double lam2 = lam * lam
    cdef double pn, rn, s
    cdef int it, i, j, k
    cdef int maxit = max_iters

    for it in range(maxit + 1):
        _chain(dhv, qv, n, origins, zaxes, T)
        p_e[0] = T[3]; p_e[1] = T[7]; p_e[2] = T[11]
        if has_tool:
            p_e[0] += T[0] * tl[0] + T[1] * tl[1] + T[2] * tl[2]
            p_e[1] += T[4] * tl[0] + T[5] * tl[1] + T[6] * tl[2]
            p_e[2] += T[8] * tl[0] + T[9] * tl[1] + T[10] * tl[2]
        # position error
        e[0] = Tt[0, 3] - p_e[0]
        e[1] = Tt[1, 3] - p_e[1]
        e[2] = Tt[2, 3] - p_e[2]
        # orientation error: log(R_target @ R_current^T) -- tool offset is a
        # pure translation so the flange rotation is the tcp rotation
        for i in range(3):
            for j in range(3):
                s = 0.0
                for k in range(3):
                    s += Tt[i, k] * T[4 * j + k]
                Trel[4 * i + j] = s
        _rot_log(Trel, &e[3])
        pn = sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2])
        rn = sqrt(e[3] * e[3] + e[4] * e[4] + e[5] * e[5])
        if pn < tol_pos and rn < tol_rot:
            return qarr, it, True
        if it == maxit:
            break
        if pn > ERR_CAP_POS:
            s = ERR_CAP_POS / pn
            e[0] *= s; e[1] *= s; e[2] *= s
        if rn > ERR_CAP_ROT:
            s = ERR_CAP_ROT / rn
            e[3] *= s; e[4] *= s; e[5] *= s
        _jac(origins, zaxes, p_e, n, J)
        for i in range(6):
            for j in range(6):
                s = 0.0
                for k in range(n):
                    s += J[i * n + k] * J[j * n + k]
                A[6 * i + j] = s
            A[6 * i + i] += lam2
        if _chol6_solve(A, e, y) != 0:
            break
        for k in range(n):
            s = 0.0
            for i in range(6):
                s += J[i * n + k] * y[i]
            qv[k] = qv[k] + s
            if qv[k] < lo[k]:
                qv[k] = lo[k]
            elif qv[k] > hi[k]:
                qv[k] = hi[k]
    return qarr, maxit, False
