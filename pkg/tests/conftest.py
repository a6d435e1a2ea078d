import math
import time

import numpy as np
import pytest

from causticq import oracle
from causticq.caustic import Caustic, Vertex
from causticq.arc1d import straight_arc
from causticq.eigensolver import SearchOptions, scan_spectrum
from causticq.model import BARBANIS, HamiltonianModel

SEPARABLE = HamiltonianModel(1.1, 1.0, 0.0)


@pytest.fixture(scope="session")
def separable():
    return SEPARABLE


@pytest.fixture(scope="session")
def barbanis():
    return BARBANIS


@pytest.fixture(scope="session")
def oracle30():
    return oracle.solve(BARBANIS, 30)


def _timed_scan(model, e_max):
    t0 = time.perf_counter()
    rep = scan_spectrum(model, e_max, SearchOptions())
    rep.elapsed = time.perf_counter() - t0
    return rep


@pytest.fixture(scope="session")
def barbanis_scan():
    return _timed_scan(BARBANIS, 5.4)


@pytest.fixture(scope="session")
def separable_scan():
    return _timed_scan(SEPARABLE, 5.3)


def rectangle_caustic(model, m, n):
    """Exact caustic of the uncoupled (m, n) torus built from straight arcs."""
    Ex = model.hbar * model.omega_x * (m + 0.5)
    Ey = model.hbar * model.omega_y * (n + 0.5)
    a = math.sqrt(2 * Ex / model.kx)
    b = math.sqrt(2 * Ey / model.ky)
    arcs = [straight_arc(1, "y", -a, (-b, b)), straight_arc(2, "x", b, (-a, a)),
            straight_arc(3, "y", a, (-b, b)), straight_arc(4, "x", -b, (-a, a))]
    verts = [Vertex(1, np.array([-a, -b]), 0.0), Vertex(2, np.array([-a, b]), 0.0),
             Vertex(3, np.array([a, b]), 0.0), Vertex(4, np.array([a, -b]), 0.0)]
    return Caustic(Ex + Ey, verts, arcs), Ex, Ey, a, b


@pytest.fixture(scope="session")
def state22():
    from causticq.cli import converge_state
    return converge_state(BARBANIS, 2, 2, SearchOptions())
