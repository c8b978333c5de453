# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled counterparts of _kernels_py.

Same functions, same semantics; the Cholesky and triangular solves are
hand-rolled because the matrices are small (tens of rows) and call overhead
dominates at that size.
"""

import numpy as np

from libc.math cimport cos, exp, log, sin, sqrt

BACKEND = "compiled"

cdef double SMALL_ANGLE = 1e-8
cdef double TWO_PI = 6.283185307179586476925287


cdef void _rodrigues(double wx, double wy, double wz, double[:, ::1] r) nogil:
    cdef double theta2 = wx * wx + wy * wy + wz * wz
    cdef double theta, a, b
    if theta2 < SMALL_ANGLE * SMALL_ANGLE:
        a = 1.0
        b = 0.5
    else:
        theta = sqrt(theta2)
        a = sin(theta) / theta
        b = (1.0 - cos(theta)) / theta2
    r[0, 0] = 1.0 + b * (-wz * wz - wy * wy)
    r[0, 1] = -a * wz + b * wx * wy
    r[0, 2] = a * wy + b * wx * wz
    r[1, 0] = a * wz + b * wx * wy
    r[1, 1] = 1.0 + b * (-wz * wz - wx * wx)
    r[1, 2] = -a * wx + b * wy * wz
    r[2, 0] = -a * wy + b * wx * wz
    r[2, 1] = a * wx + b * wy * wz
    r[2, 2] = 1.0 + b * (-wy * wy - wx * wx)


def so3_exp(w):
    """Rodrigues map: rotation vector (3,) -> rotation matrix (3,3)."""
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    out = np.empty((3, 3))
    cdef double[:, ::1] r = out
    _rodrigues(wv[0], wv[1], wv[2], r)
    return out


def se3_exp(xi, double dt):
    """Exponential of a twist scaled by dt; returns (R, p)."""
    cdef double[::1] x = np.ascontiguousarray(xi, dtype=np.float64)
    cdef double vx = x[0] * dt, vy = x[1] * dt, vz = x[2] * dt
    cdef double wx = x[3] * dt, wy = x[4] * dt, wz = x[5] * dt
    rout = np.empty((3, 3))
    pout = np.empty(3)
    cdef double[:, ::1] r = rout
    cdef double[::1] p = pout
    _rodrigues(wx, wy, wz, r)
    cdef double theta2 = wx * wx + wy * wy + wz * wz
    cdef double theta, c2, c3
    if theta2 < SMALL_ANGLE * SMALL_ANGLE:
        c2 = 0.5
        c3 = 1.0 / 6.0
    else:
        theta = sqrt(theta2)
        c2 = (1.0 - cos(theta)) / theta2
        c3 = (theta - sin(theta)) / (theta2 * theta)
    # V = I + c2 wedge(w) + c3 wedge(w)^2, applied to v
    cdef double cx = wy * vz - wz * vy
    cdef double cy = wz * vx - wx * vz
    cdef double cz = wx * vy - wy * vx
    cdef double ccx = wy * cz - wz * cy
    cdef double ccy = wz * cx - wx * cz
    cdef double ccz = wx * cy - wy * cx
    p[0] = vx + c2 * cx + c3 * ccx
    p[1] = vy + c2 * cy + c3 * ccy
    p[2] = vz + c2 * cz + c3 * ccz
    return rout, pout


def sqexp_mat(xa, xb, lam, double sf2):
    """Squared-exponential kernel matrix with diagonal precision lam."""
    cdef double[:, ::1] a = np.ascontiguousarray(xa, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(xb, dtype=np.float64)
    cdef double[::1] l = np.ascontiguousarray(lam, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], d = a.shape[1]
    out = np.empty((n, m))
    cdef double[:, ::1] k = out
    cdef Py_ssize_t i, j, c
    cdef double q, diff
    with nogil:
        for i in range(n):
            for j in range(m):
                q = 0.0
                for c in range(d):
                    diff = a[i, c] - b[j, c]
                    q += l[c] * diff * diff
                k[i, j] = sf2 * exp(-0.5 * q)
    return out


def gp_eval(xtr, lam, double sf2, alpha, chols, x):
    """Posterior mean and variance at one input; see _kernels_py.gp_eval."""
    cdef double[:, ::1] xt = np.ascontiguousarray(xtr, dtype=np.float64)
    cdef double[::1] l = np.ascontiguousarray(lam, dtype=np.float64)
    cdef double[:, ::1] al = np.ascontiguousarray(alpha, dtype=np.float64)
    cdef double[:, :, ::1] ch = np.ascontiguousarray(chols, dtype=np.float64)
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t m = xt.shape[0], d = xt.shape[1], q = al.shape[1]
    mean_out = np.zeros(q)
    var_out = np.empty(q)
    ks_buf = np.empty(m)
    z_buf = np.empty(m)
    cdef double[::1] mean = mean_out
    cdef double[::1] var = var_out
    cdef double[::1] ks = ks_buf
    cdef double[::1] z = z_buf
    cdef Py_ssize_t i, j, c
    cdef double acc, diff, s
    with nogil:
        for j in range(m):
            acc = 0.0
            for c in range(d):
                diff = xt[j, c] - xv[c]
                acc += l[c] * diff * diff
            ks[j] = sf2 * exp(-0.5 * acc)
        for i in range(q):
            acc = 0.0
            for j in range(m):
                acc += ks[j] * al[j, i]
            mean[i] = acc
        for i in range(q):
            # forward substitution: z = L_i^-1 ks
            s = 0.0
            for j in range(m):
                acc = ks[j]
                for c in range(j):
                    acc -= ch[i, j, c] * z[c]
                z[j] = acc / ch[i, j, j]
                s += z[j] * z[j]
            var[i] = sf2 - s
    return mean_out, var_out


def lml_total(x, y, lam, double sf2, sn2, double jitter):
    """Summed per-output log marginal likelihood; -inf if not factorizable."""
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] l = np.ascontiguousarray(lam, dtype=np.float64)
    cdef double[::1] s2 = np.ascontiguousarray(sn2, dtype=np.float64)
    cdef Py_ssize_t m = xv.shape[0], d = xv.shape[1], q = yv.shape[1]
    k_buf = np.empty((m, m))
    c_buf = np.empty((m, m))
    z_buf = np.empty(m)
    cdef double[:, ::1] k = k_buf
    cdef double[:, ::1] cmat = c_buf
    cdef double[::1] z = z_buf
    cdef Py_ssize_t i, j, r, c
    cdef double acc, diff, total, logdet, fit
    cdef int failed = 0
    with nogil:
        for i in range(m):
            for j in range(i, m):
                acc = 0.0
                for c in range(d):
                    diff = xv[i, c] - xv[j, c]
                    acc += l[c] * diff * diff
                acc = sf2 * exp(-0.5 * acc)
                k[i, j] = acc
                k[j, i] = acc
        total = 0.0
        for i in range(q):
            for r in range(m):
                for c in range(m):
                    cmat[r, c] = k[r, c]
                cmat[r, r] += s2[i] + jitter
            # in-place lower Cholesky
            logdet = 0.0
            for j in range(m):
                acc = cmat[j, j]
                for c in range(j):
                    acc -= cmat[j, c] * cmat[j, c]
                if acc <= 0.0:
                    failed = 1
                    break
                cmat[j, j] = sqrt(acc)
                logdet += log(cmat[j, j])
                for r in range(j + 1, m):
                    acc = cmat[r, j]
                    for c in range(j):
                        acc -= cmat[r, c] * cmat[j, c]
                    cmat[r, j] = acc / cmat[j, j]
            if failed:
                break
            fit = 0.0
            for j in range(m):
                acc = yv[j, i]
                for c in range(j):
                    acc -= cmat[j, c] * z[c]
                z[j] = acc / cmat[j, j]
                fit += z[j] * z[j]
            total += -0.5 * fit - logdet - 0.5 * m * log(TWO_PI)
    if failed:
        return float("-inf")
    return total
