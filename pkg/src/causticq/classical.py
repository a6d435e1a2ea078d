"""Classical trajectories, Jacobi fields and caustic points.

A trajectory is started at rest on the equipotential U = E. Two Jacobi
(deviation) fields with zero initial displacement and independent initial
velocities are propagated with the tangent map of the same symplectic
scheme. The zeros of their exterior product are the points conjugate to the
start point; for an integrable family they trace the caustic.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from . import kernels
from .io import write_csv
from .model import HamiltonianModel, equipotential_point, potential


class ClassicalError(RuntimeError):
    pass


class StepTooLargeError(ClassicalError):
    """Energy drift exceeded the tolerance for the chosen step."""


class EscapeError(ClassicalError):
    """Trajectory left the bounding box (unbound motion)."""


class InsufficientTimeError(ClassicalError):
    """No conjugate points within the integration time."""


DEFAULT_T_MAX = 400.0
DEFAULT_STEP = 0.01
DEFAULT_BOX = 30.0


@dataclass(frozen=True)
class PhasePoint:
    q: tuple
    p: tuple = (0.0, 0.0)

    def energy(self, model: HamiltonianModel) -> float:
        return (self.p[0] ** 2 + self.p[1] ** 2) / (2 * model.mass) + float(potential(model, self.q))


@dataclass
class Trajectory:
    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    energy: float
    step: float
    max_drift: float
    model: HamiltonianModel = field(repr=False)
    _tangent: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.t)

    @property
    def start(self) -> PhasePoint:
        return PhasePoint(tuple(self.q[0]), tuple(self.p[0]))

    def to_csv(self, path):
        write_csv(path, ["t", "x", "y", "px", "py"],
                  [self.t, self.q[:, 0], self.q[:, 1], self.p[:, 0], self.p[:, 1]])


@dataclass
class JacobiBundle:
    """Two deviation fields dq_i(t), dq_i'(t) and their exterior product."""
    t: np.ndarray
    dq: np.ndarray       # (2, N, 2)
    dqdot: np.ndarray    # (2, N, 2)

    @property
    def wronskian(self) -> np.ndarray:
        a, b = self.dq
        return a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]

    @property
    def wronskian_rate(self) -> np.ndarray:
        a, b = self.dq
        ad, bd = self.dqdot
        return ad[:, 0] * b[:, 1] + a[:, 0] * bd[:, 1] - ad[:, 1] * b[:, 0] - a[:, 1] * bd[:, 0]


@dataclass
class CausticPointCloud:
    q: np.ndarray        # (N, 2) positions
    p: np.ndarray        # (N, 2) momenta of the touching trajectory
    t: np.ndarray
    energy: float

    def __len__(self):
        return len(self.t)

    def to_csv(self, path):
        write_csv(path, ["x", "y"], [self.q[:, 0], self.q[:, 1]])


def integrate_trajectory(model: HamiltonianModel, start: PhasePoint, t_max: float = DEFAULT_T_MAX,
                         step: float = DEFAULT_STEP, box: float = DEFAULT_BOX,
                         drift_tol: float = 1e-9) -> Trajectory:
    """Fixed-step sixth-order symplectic integration of Hamilton's equations.

    Raises StepTooLargeError if |H - E| exceeds ``drift_tol * max(1, E)`` at
    any sample and EscapeError if the motion leaves ``|x|, |y| <= box``.
    """
    if not (step > 0 and t_max > 0):
        raise ValueError("step and t_max must be positive")
    n = int(math.ceil(t_max / step))
    z0 = np.zeros(12)
    z0[:2] = start.q
    z0[2:4] = start.p
    # Jacobi fields: dq(0) = 0, dq'(0) = e1, e2
    z0[6] = model.mass
    z0[11] = model.mass
    out, n_done = kernels.flow(model.kx, model.ky, model.lam, model.mass, z0, step, n, box, True)
    if n_done < n:
        raise EscapeError(f"trajectory escaped |q| <= {box} at t = {n_done * step:.3f}")
    E = start.energy(model)
    q, p = out[:, 0:2], out[:, 2:4]
    H = (p[:, 0] ** 2 + p[:, 1] ** 2) / (2 * model.mass) + potential(model, q.T)
    drift = float(np.max(np.abs(H - E)))
    if drift > drift_tol * max(1.0, abs(E)):
        raise StepTooLargeError(f"energy drift {drift:.3e} exceeds bound with step {step}")
    t = np.arange(n + 1) * step
    return Trajectory(t, q.copy(), p.copy(), E, step, drift, model, out[:, 4:])


def trajectory_from_vertex(model: HamiltonianModel, E: float, angle: float, **kw) -> Trajectory:
    """Trajectory started at rest where the ray at ``angle`` meets U = E."""
    qv = equipotential_point(model, E, (math.cos(angle), math.sin(angle)))
    return integrate_trajectory(model, PhasePoint((float(qv[0]), float(qv[1]))), **kw)


def integrate_jacobi(model: HamiltonianModel, trajectory: Trajectory, initial_velocities=None) -> JacobiBundle:
    """Jacobi fields dq'' = -Hess U(q(t)) dq / m along ``trajectory``.

    Both fields start with dq(0) = 0. ``initial_velocities`` defaults to the
    unit vectors, in which case the fields propagated alongside the
    trajectory are reused.
    """
    if initial_velocities is None and trajectory._tangent is not None:
        tan = trajectory._tangent
    else:
        v = np.eye(2) if initial_velocities is None else np.asarray(initial_velocities, float)
        if abs(v[0, 0] * v[1, 1] - v[0, 1] * v[1, 0]) == 0.0:
            raise ValueError("initial velocities must be linearly independent")
        z0 = np.zeros(12)
        z0[:2] = trajectory.q[0]
        z0[2:4] = trajectory.p[0]
        z0[6:8] = model.mass * v[0]
        z0[10:12] = model.mass * v[1]
        out, _ = kernels.flow(model.kx, model.ky, model.lam, model.mass, z0, trajectory.step,
                              len(trajectory) - 1, np.inf, True)
        tan = out[:, 4:]
    dq = np.stack([tan[:, 0:2], tan[:, 4:6]])
    dqdot = np.stack([tan[:, 2:4], tan[:, 6:8]]) / model.mass
    return JacobiBundle(trajectory.t, dq, dqdot)


def _hermite(y0, y1, d0, d1, h, s):
    """Cubic Hermite interpolant on [0, h] evaluated at fraction s."""
    s2, s3 = s * s, s * s * s
    return ((2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0
            + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * d1)


def _hermite_d(y0, y1, d0, d1, h, s):
    s2 = s * s
    return ((6 * s2 - 6 * s) * y0 / h + (3 * s2 - 4 * s + 1) * d0
            + (-6 * s2 + 6 * s) * y1 / h + (3 * s2 - 2 * s) * d1)


def detect_caustic_points(bundle: JacobiBundle, trajectory: Trajectory,
                          t_tol: float = 1e-10) -> CausticPointCloud:
    """Conjugate points: sign changes of the Jacobi exterior product.

    Each bracketing step is refined on the cubic Hermite interpolant of w(t)
    (using dw/dt), and the position and momentum are interpolated to the
    root with the same cubic scheme.
    """
    model = trajectory.model
    w = bundle.wronskian
    wd = bundle.wronskian_rate
    h = trajectory.step
    # skip the trivial zero at t = 0 (w ~ t^2 there)
    sgn = np.sign(w[1:])
    idx = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0] + 1
    exact = np.nonzero(w[1:] == 0.0)[0] + 1
    if len(idx) == 0 and len(exact) == 0:
        raise InsufficientTimeError("no conjugate points found; increase t_max")
    qs, ps, ts = [], [], []
    q, p = trajectory.q, trajectory.p
    for i in sorted(set(idx.tolist()) | set(exact.tolist())):
        if w[i] == 0.0:
            s = 0.0
        else:
            def f(s, i=i):
                return _hermite(w[i], w[i + 1], wd[i], wd[i + 1], h, s)
            s = brentq(f, 0.0, 1.0, xtol=t_tol / h)
        qd0, qd1 = p[i] / model.mass, p[i + 1] / model.mass
        pd0 = -_grad(model, q[i])
        pd1 = -_grad(model, q[i + 1])
        qs.append(_hermite(q[i], q[i + 1], qd0, qd1, h, s))
        ps.append(_hermite(p[i], p[i + 1], pd0, pd1, h, s))
        ts.append(trajectory.t[i] + s * h)
    return CausticPointCloud(np.array(qs), np.array(ps), np.array(ts), trajectory.energy)


def _grad(model, q):
    x, y = q
    return np.array([model.kx * x + 2 * model.lam * x * y, model.ky * y + model.lam * x * x])


def caustic_cloud(model: HamiltonianModel, E: float, angle: float, t_max: float = DEFAULT_T_MAX,
                  step: float = DEFAULT_STEP):
    """Trajectory from the vertex at ``angle`` and its conjugate-point cloud."""
    traj = trajectory_from_vertex(model, E, angle, t_max=t_max, step=step)
    bundle = integrate_jacobi(model, traj)
    return traj, detect_caustic_points(bundle, traj)


@dataclass
class EnvelopeRaster:
    boundary: np.ndarray     # (K, 2) centres of boundary cells
    cell: float              # cell size (max of the two axes)
    covered: np.ndarray      # boolean raster after hole filling
    extent: tuple            # (x0, x1, y0, y1)
    under_covered: bool


def envelope_oracle(trajectory: Trajectory, resolution: int = 400,
                    hole_fraction_warn: float = 0.05) -> EnvelopeRaster:
    """Brute-force caustic: boundary of the raster region swept by the path.

    The path is rasterised (segments subdivided below half a cell), interior
    holes are filled, and the covered cells with an uncovered 4-neighbour are
    returned. ``under_covered`` is set when hole filling had to add more than
    ``hole_fraction_warn`` of the region.
    """
    q = trajectory.q
    x0, y0 = q.min(axis=0)
    x1, y1 = q.max(axis=0)
    dx = (x1 - x0) / resolution
    dy = (y1 - y0) / resolution
    seg = np.diff(q, axis=0)
    n_sub = int(np.ceil(np.max(np.abs(seg) / np.array([dx, dy])) * 2.0)) + 1
    covered = np.zeros((resolution, resolution), dtype=bool)
    for k in range(n_sub):
        pts = q[:-1] + seg * (k / n_sub)
        ix = np.clip(((pts[:, 0] - x0) / dx).astype(int), 0, resolution - 1)
        iy = np.clip(((pts[:, 1] - y0) / dy).astype(int), 0, resolution - 1)
        covered[ix, iy] = True
    raw = covered.sum()
    filled = ndimage.binary_fill_holes(covered)
    under = (filled.sum() - raw) > hole_fraction_warn * filled.sum()
    if under:
        warnings.warn("envelope_oracle: trajectory under-covers its region", RuntimeWarning)
    inner = ndimage.binary_erosion(filled, structure=ndimage.generate_binary_structure(2, 1),
                                   border_value=0)
    ix, iy = np.nonzero(filled & ~inner)
    pts = np.column_stack([x0 + (ix + 0.5) * dx, y0 + (iy + 0.5) * dy])
    return EnvelopeRaster(pts, max(dx, dy), filled, (x0, x1, y0, y1), bool(under))


def hausdorff(a, b) -> float:
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    d_ab = cKDTree(b).query(a)[0].max()
    d_ba = cKDTree(a).query(b)[0].max()
    return float(max(d_ab, d_ba))
