"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

Same signatures and results to round-off; used when the extension is not
built or when ``CAUSTICQ_PURE_PYTHON=1``.
"""
import math

import numpy as np

_YW1 = -1.17767998417887
_YW2 = 0.235573213359357
_YW3 = 0.784513610477560
_YW0 = 1.0 - 2.0 * (_YW1 + _YW2 + _YW3)
YOSHIDA6 = (_YW3, _YW2, _YW1, _YW0, _YW1, _YW2, _YW3)

_RENORM = 1e100


def flow(kx, ky, lam, mass, z0, dt, n_steps, box, jacobi=True):
    out = np.empty((n_steps + 1, 12))
    out[0] = z0
    x, y, px, py, a0, a1, a2, a3, b0, b1, b2, b3 = (float(v) for v in z0)
    inv_m = 1.0 / mass
    n_done = n_steps
    for i in range(n_steps):
        for w in YOSHIDA6:
            h = w * dt
            hd = 0.5 * h * inv_m
            x += hd * px
            y += hd * py
            if jacobi:
                a0 += hd * a2
                a1 += hd * a3
                b0 += hd * b2
                b1 += hd * b3
            px -= h * (kx * x + 2.0 * lam * x * y)
            py -= h * (ky * y + lam * x * x)
            if jacobi:
                hxx = kx + 2.0 * lam * y
                hxy = 2.0 * lam * x
                a2 -= h * (hxx * a0 + hxy * a1)
                a3 -= h * (hxy * a0 + ky * a1)
                b2 -= h * (hxx * b0 + hxy * b1)
                b3 -= h * (hxy * b0 + ky * b1)
            x += hd * px
            y += hd * py
            if jacobi:
                a0 += hd * a2
                a1 += hd * a3
                b0 += hd * b2
                b1 += hd * b3
        out[i + 1] = (x, y, px, py, a0, a1, a2, a3, b0, b1, b2, b3)
        if abs(x) > box or abs(y) > box:
            n_done = i + 1
            break
    return out[:n_done + 1], n_done


def shoot(gh, ah, h, psi0, phi0):
    gh = [float(v) for v in gh]
    ah = [float(v) for v in ah]
    n = (len(gh) + 1) // 2
    psi = np.empty(n)
    phi = np.empty(n)
    th = np.empty(n)
    ls = np.empty(n)
    p, f, lsc = float(psi0), float(phi0), 0.0
    theta = prev = math.atan2(p, f)
    psi[0], phi[0], th[0], ls[0] = p, f, theta, 0.0
    hh = 0.5 * h
    two_pi = 2.0 * math.pi
    for i in range(n - 1):
        g0, g1, g2 = gh[2 * i], gh[2 * i + 1], gh[2 * i + 2]
        c0, c1, c2 = ah[2 * i], ah[2 * i + 1], ah[2 * i + 2]
        k1p = g0 * f
        k1f = c0 * p
        k2p = g1 * (f + hh * k1f)
        k2f = c1 * (p + hh * k1p)
        k3p = g1 * (f + hh * k2f)
        k3f = c1 * (p + hh * k2p)
        k4p = g2 * (f + h * k3f)
        k4f = c2 * (p + h * k3p)
        p = p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        f = f + h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f)
        scale = abs(p) + abs(f)
        if scale > _RENORM:
            p /= scale
            f /= scale
            lsc += math.log(scale)
        raw = math.atan2(p, f)
        d = raw - prev
        if d > math.pi:
            d -= two_pi
        elif d <= -math.pi:
            d += two_pi
        theta += d
        prev = raw
        psi[i + 1], phi[i + 1], th[i + 1], ls[i + 1] = p, f, theta, lsc
    return psi, phi, th, ls
