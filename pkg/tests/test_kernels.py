import math

import numpy as np
import pytest

from causticq import _pykernels, kernels

compiled = pytest.importorskip("causticq._kernels")


def _z0():
    z = np.zeros(12)
    z[:2] = (-1.2, 0.9)
    z[6] = z[11] = 1.0
    return z


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")


def test_flow_parity():
    args = (1.21, 1.0, -0.11, 1.0, _z0(), 0.01, 2000, 30.0, True)
    a, na = compiled.flow(*args)
    b, nb = _pykernels.flow(*args)
    assert na == nb == 2000
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_flow_reports_escape():
    z = _z0()
    z[:2] = (3.0, 3.0)     # beyond the saddle of this coupling
    for impl in (compiled, _pykernels):
        _, n = impl.flow(1.0, 1.0, -1.0, 1.0, z, 0.01, 5000, 20.0, False)
        assert n < 5000


def test_shoot_parity():
    n = 801
    x = np.linspace(-4.0, 4.0, 2 * n - 1)
    gh = np.ones_like(x)
    ah = 2.0 * (0.5 * x * x - 2.5)
    h = x[2] - x[0]
    ra = compiled.shoot(gh, ah, h, 1e-8, 4e-8)
    rb = _pykernels.shoot(gh, ah, h, 1e-8, 4e-8)
    for u, v in zip(ra, rb):
        np.testing.assert_allclose(u, v, rtol=1e-11, atol=1e-13)


def test_shoot_harmonic_phase_count():
    # E = 5/2 is the n = 2 oscillator level: two nodes, angle between 2 pi and 3 pi
    n = 2001
    x = np.linspace(-8.0, 8.0, 2 * n - 1)
    gh = np.ones_like(x)
    ah = 2.0 * (0.5 * x * x - 2.5)
    kap = math.sqrt(2.0 * (32.0 - 2.5))
    psi, _, th, _ = kernels.shoot(gh, ah, x[2] - x[0], 1.0, kap)
    inner = psi[(x[::2] > -4) & (x[::2] < 4)]
    assert np.count_nonzero(np.diff(np.sign(inner)) != 0) == 2
    assert 2.0 < th[-1] / math.pi < 3.0


def test_fallback_selected_by_environment():
    import os
    import subprocess
    import sys
    env = dict(os.environ, CAUSTICQ_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import causticq; print(causticq.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
