# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Must stay call-compatible with ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, fabs, log, M_PI

cnp.import_array()

# Yoshida (1990) sixth-order composition, solution A
cdef double YW1 = -1.17767998417887
cdef double YW2 = 0.235573213359357
cdef double YW3 = 0.784513610477560
cdef double YW0 = 1.0 - 2.0 * (YW1 + YW2 + YW3)
cdef double[7] YOSHIDA6 = [YW3, YW2, YW1, YW0, YW1, YW2, YW3]

cdef double RENORM = 1e100


def flow(double kx, double ky, double lam, double mass, double[::1] z0,
         double dt, Py_ssize_t n_steps, double box, bint jacobi=True):
    """Symplectic trajectory plus tangent-map (Jacobi) fields.

    State columns: x, y, px, py, then (dqx, dqy, dpx, dpy) for each of the
    two deviation fields. Integration stops early when |x| or |y| exceeds
    ``box``; the number of completed steps is returned with the samples.
    """
    out_arr = np.empty((n_steps + 1, 12), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double z[12]
    cdef Py_ssize_t i, j, s, n_done = n_steps
    cdef double h, hd, fx, fy, hxx, hxy, hyy, inv_m = 1.0 / mass
    cdef double d0, d1
    for j in range(12):
        z[j] = z0[j]
        out[0, j] = z0[j]
    for i in range(n_steps):
        for s in range(7):
            h = YOSHIDA6[s] * dt
            hd = 0.5 * h * inv_m
            # half drift
            z[0] += hd * z[2]
            z[1] += hd * z[3]
            if jacobi:
                z[4] += hd * z[6]
                z[5] += hd * z[7]
                z[8] += hd * z[10]
                z[9] += hd * z[11]
            # kick
            fx = kx * z[0] + 2.0 * lam * z[0] * z[1]
            fy = ky * z[1] + lam * z[0] * z[0]
            z[2] -= h * fx
            z[3] -= h * fy
            if jacobi:
                hxx = kx + 2.0 * lam * z[1]
                hxy = 2.0 * lam * z[0]
                hyy = ky
                d0 = z[4]
                d1 = z[5]
                z[6] -= h * (hxx * d0 + hxy * d1)
                z[7] -= h * (hxy * d0 + hyy * d1)
                d0 = z[8]
                d1 = z[9]
                z[10] -= h * (hxx * d0 + hxy * d1)
                z[11] -= h * (hxy * d0 + hyy * d1)
            # half drift
            z[0] += hd * z[2]
            z[1] += hd * z[3]
            if jacobi:
                z[4] += hd * z[6]
                z[5] += hd * z[7]
                z[8] += hd * z[10]
                z[9] += hd * z[11]
        for j in range(12):
            out[i + 1, j] = z[j]
        if fabs(z[0]) > box or fabs(z[1]) > box:
            n_done = i + 1
            break
    return out_arr[:n_done + 1], n_done


def shoot(double[::1] gh, double[::1] ah, double h, double psi0, double phi0):
    """RK4 for psi' = g*phi, phi' = a*psi on a uniform grid.

    ``gh`` and ``ah`` are sampled on the half-step grid (2N-1 points). Returns
    psi, phi, the unwrapped Pruefer angle atan2(psi, phi) and the cumulative
    log renormalisation (true values are psi*exp(lscale)).
    """
    cdef Py_ssize_t n_half = gh.shape[0]
    cdef Py_ssize_t n = (n_half + 1) // 2
    psi_arr = np.empty(n, dtype=np.float64)
    phi_arr = np.empty(n, dtype=np.float64)
    th_arr = np.empty(n, dtype=np.float64)
    ls_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] psi = psi_arr
    cdef double[::1] phi = phi_arr
    cdef double[::1] th = th_arr
    cdef double[::1] ls = ls_arr
    cdef double p = psi0, f = phi0, lsc = 0.0, theta, raw, prev, d, scale
    cdef double k1p, k1f, k2p, k2f, k3p, k3f, k4p, k4f
    cdef double g0, g1, g2, a0, a1, a2, hh = 0.5 * h
    cdef Py_ssize_t i
    theta = atan2(p, f)
    prev = theta
    psi[0] = p
    phi[0] = f
    th[0] = theta
    ls[0] = 0.0
    for i in range(n - 1):
        g0 = gh[2 * i]
        g1 = gh[2 * i + 1]
        g2 = gh[2 * i + 2]
        a0 = ah[2 * i]
        a1 = ah[2 * i + 1]
        a2 = ah[2 * i + 2]
        k1p = g0 * f
        k1f = a0 * p
        k2p = g1 * (f + hh * k1f)
        k2f = a1 * (p + hh * k1p)
        k3p = g1 * (f + hh * k2f)
        k3f = a1 * (p + hh * k2p)
        k4p = g2 * (f + h * k3f)
        k4f = a2 * (p + h * k3p)
        p = p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        f = f + h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f)
        scale = fabs(p) + fabs(f)
        if scale > RENORM:
            p /= scale
            f /= scale
            lsc += log(scale)
        raw = atan2(p, f)
        d = raw - prev
        if d > M_PI:
            d -= 2.0 * M_PI
        elif d <= -M_PI:
            d += 2.0 * M_PI
        theta += d
        prev = raw
        psi[i + 1] = p
        phi[i + 1] = f
        th[i + 1] = theta
        ls[i + 1] = lsc
    return psi_arr, phi_arr, th_arr, ls_arr
