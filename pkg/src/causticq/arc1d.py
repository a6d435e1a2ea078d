"""One-dimensional Schrödinger problem on a caustic arc.

With the arc written as a graph over the parameter x and s the arc length
(ds = g dx, g = sqrt(1 + f'^2)), the equation

    -hbar^2/(2m) d2psi/ds2 + U_k psi = E psi

is integrated as the first-order system psi' = g phi, phi' = g c (U_k - E) psi
with phi = dpsi/ds and c = 2m/hbar^2. This is the curvilinear equation with
its g'/g first-derivative term kept implicitly.

Two branches decaying into the exterior continuations are shot towards the
middle of the allowed segment. Their Prüfer angles give a continuous phase
index nu, which equals the node count at an eigenvalue; the normalized
cross-Wronskian sin(pi nu) is the signed defect.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import BSpline
from scipy.optimize import brentq

from . import kernels
from .caustic import ArcFit, EmptyWellError, arc_turning_points
from .io import write_csv
from .model import HamiltonianModel


class ArcError(RuntimeError):
    pass


class NoOscillatoryRegionError(ArcError):
    pass


class ExtensionTooShortError(ArcError):
    """The continuation of the arc does not stay classically forbidden."""


DEFAULT_GRID = 2000
DEFAULT_DECAY = 18.0


@dataclass
class ArcProblem:
    arc: ArcFit
    model: HamiltonianModel = field(repr=False)
    E: float
    grid: np.ndarray
    g: np.ndarray
    U_k: np.ndarray
    turning_points: tuple
    i1: int
    i2: int
    # samples on the half-step grid used by the integrator
    g_half: np.ndarray = field(repr=False)
    U_half: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def n_grid(self) -> int:
        return len(self.grid)

    @property
    def allowed(self) -> slice:
        return slice(self.i1, self.i2 + 1)

    @property
    def midpoint(self) -> int:
        return (self.i1 + self.i2) // 2

    def decay_rate(self, U, g=None):
        """Local exponent sqrt(2m(U - E))/hbar per unit arc length."""
        m, hb = self.model.mass, self.model.hbar
        return np.sqrt(2.0 * m * np.maximum(U - self.E, 0.0)) / hb

    def classical_action(self) -> np.ndarray:
        """W_C(x) = int_{x1}^{x} sqrt(2m(E - U_k)) g dx, zero outside the allowed segment."""
        p = np.sqrt(2.0 * self.model.mass * np.maximum(self.E - self.U_k, 0.0)) * self.g
        w = np.zeros_like(self.grid)
        seg = self.allowed
        w[seg] = cumulative_trapezoid(p[seg], self.grid[seg], initial=0.0)
        w[self.i2 + 1:] = w[self.i2]
        return w


def _extension_needed(model, arc, E, t_turn, direction, L, decay, min_frac, max_frac):
    """Continuation length after which the decaying solution has fallen by e^-decay."""
    s = np.linspace(0.0, max_frac * L, 4001)[1:]
    t = t_turn + direction * s
    U = arc.effective_potential(model, t)
    g = arc.scale_factor(t)
    kappa = g * np.sqrt(2.0 * model.mass * np.maximum(U - E, 0.0)) / model.hbar
    cum = cumulative_trapezoid(kappa, s, initial=0.0)
    hit = np.nonzero(cum >= decay)[0]
    stop = hit[0] if len(hit) else len(s) - 1
    need = max(float(s[stop]), min_frac * L)
    used = s <= need
    if np.any(U[used] - E <= 0.0):
        bad = float(s[np.argmax(used & (U - E <= 0.0))])
        raise ExtensionTooShortError(
            f"arc {arc.index}: U_k <= E on the continuation {bad:.3g} beyond the turning point")
    return need


def build_arc_problem(model: HamiltonianModel, arc: ArcFit, E: float, n_grid: int = DEFAULT_GRID,
                      decay: float = DEFAULT_DECAY, max_extension: float = 4.0) -> ArcProblem:
    """Sample g and U_k on a uniform grid spanning the arc and its continuations.

    The grid is laid out so that both turning points are grid nodes. Each
    continuation is at least ``arc.extension`` times the segment length and
    long enough for the decaying solution to drop by ``exp(-decay)``.
    """
    if n_grid < 200:
        raise ValueError("n_grid must be at least 200")
    try:
        x1, x2 = arc_turning_points(model, arc, E)
    except EmptyWellError as exc:
        raise NoOscillatoryRegionError(str(exc)) from exc
    L = x2 - x1
    if not L > 0:
        raise NoOscillatoryRegionError(f"arc {arc.index}: turning points coincide")
    e1 = _extension_needed(model, arc, E, x1, -1.0, L, decay, arc.extension, max_extension)
    e2 = _extension_needed(model, arc, E, x2, +1.0, L, decay, arc.extension, max_extension)
    span = e1 + L + e2
    n_int = n_grid - 1
    n_in = max(int(round(L / span * n_int)), 10)
    n1 = int(math.ceil(e1 / span * n_int))
    n2 = n_int - n_in - n1
    h = L / n_in
    if n2 * h < 0.5 * e2:
        raise ValueError("n_grid too small for this arc")
    x0 = x1 - n1 * h
    xh = x0 + 0.5 * h * np.arange(2 * n_grid - 1)
    xh[2 * n1] = x1
    xh[2 * (n1 + n_in)] = x2
    gh = np.asarray(arc.scale_factor(xh), float)
    Uh = np.asarray(arc.effective_potential(model, xh), float)
    grid = xh[::2].copy()
    return ArcProblem(arc, model, float(E), grid, gh[::2].copy(), Uh[::2].copy(), (x1, x2),
                      n1, n1 + n_in, gh, Uh)


@dataclass
class ArcSolution:
    psi: np.ndarray          # left-decaying branch, unit L2 norm on the allowed segment
    dpsi: np.ndarray         # its arc-length derivative
    psi_aux: np.ndarray      # independent solution used for the phase
    dpsi_aux: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    nodes: int
    deltaX: float
    defect: float
    nu: float                # continuous phase index, integer at eigenvalues
    norm: float
    conjugated: bool = False
    psi_matched: np.ndarray | None = field(default=None, repr=False)

    def to_csv(self, path, problem: ArcProblem):
        write_csv(path, ["parameter", "psi", "X", "Y", "U_k", "g"],
                  [problem.grid, self.psi, self.X, self.Y, problem.U_k, problem.g])


def _shoot(problem, lo, hi, psi0, phi0, reverse=False):
    """Integrate between grid nodes lo..hi.

    ``psi0, phi0`` are given at ``lo`` (or at ``hi`` when ``reverse``), with
    phi the arc-length derivative in the forward direction.
    """
    c = 2.0 * problem.model.mass / problem.model.hbar ** 2
    gh = problem.g_half[2 * lo: 2 * hi + 1]
    ah = gh * c * (problem.U_half[2 * lo: 2 * hi + 1] - problem.E)
    if reverse:
        gh, ah = gh[::-1].copy(), ah[::-1].copy()
        phi0 = -phi0
    psi, phi, th, ls = kernels.shoot(np.ascontiguousarray(gh), np.ascontiguousarray(ah),
                                     problem.h, psi0, phi0)
    if reverse:
        psi, phi, th, ls = psi[::-1], -phi[::-1], math.pi - th[::-1], ls[::-1]
    return psi, phi, th, ls


def _rescale(psi, phi, ls, ref):
    f = np.exp(ls - ls[ref])
    return psi * f, phi * f


def solve_arc(problem: ArcProblem) -> ArcSolution:
    """Two-sided shooting with decaying data at both continuation ends."""
    n = problem.n_grid
    kap = problem.decay_rate(problem.U_k)
    im = problem.midpoint
    uL, pL, thL, lsL = _shoot(problem, 0, n - 1, 1.0, float(kap[0]))
    uR, pR, thR, lsR = _shoot(problem, 0, n - 1, 1.0, -float(kap[-1]), reverse=True)
    dth = thL[im] - thR[im]
    nu = dth / math.pi
    defect = math.sin(dth)

    i1, i2 = problem.i1, problem.i2
    u, pu = _rescale(uL, pL, lsL, i1)
    if u[i1] < 0:
        u, pu = -u, -pu
    # matched function (exact eigenfunction at a root of the defect)
    a, b = _rescale(uL, pL, lsL, im)
    r, q = _rescale(uR, pR, lsR, im)
    cm = (a[im] * r[im] + b[im] * q[im]) / (r[im] ** 2 + q[im] ** 2)
    matched = np.concatenate([a[:im], cm * r[im:]])

    # second solution, started at the left turning point with rotated data
    nrm = math.hypot(u[i1], pu[i1])
    w0, dw0 = -pu[i1] / nrm, u[i1] / nrm
    fw, fpw, _, fls = _shoot(problem, i1, n - 1, w0, dw0)
    bw, bpw, _, bls = _shoot(problem, 0, i1, w0, dw0, reverse=True)
    fw, fpw = fw * np.exp(fls), fpw * np.exp(fls)
    bw, bpw = bw * np.exp(bls - bls[-1]), bpw * np.exp(bls - bls[-1])
    w = np.concatenate([bw[:-1], fw])
    pw = np.concatenate([bpw[:-1], fpw])

    seg = problem.allowed
    norm2 = float(np.trapezoid(u[seg] ** 2 * problem.g[seg], problem.grid[seg]))
    scale = 1.0 / math.sqrt(norm2)
    u, pu = u * scale, pu * scale
    w, pw = w * scale, pw * scale
    mseg = float(np.trapezoid(matched[seg] ** 2 * problem.g[seg], problem.grid[seg]))
    matched = matched / math.sqrt(mseg) * (1.0 if matched[i1] >= 0 else -1.0)

    sol = ArcSolution(u, pu, w, pw, np.empty(0), np.empty(0), _count_nodes(u[i1:i2 + 1]),
                      0.0, defect, nu, scale, psi_matched=matched)
    X, Y = quantum_action(sol, problem)
    sol.X, sol.Y = X, Y
    sol.deltaX = float(X[i2] - X[i1])
    return sol


def _count_nodes(v):
    s = np.sign(v[np.abs(v) > 0.0])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _phase_partner(sol, problem):
    """v = alpha u + beta w with v(x1) = u(x1) and v(x2) = -u(x2)."""
    i1, i2 = problem.i1, problem.i2
    u, w = sol.psi, sol.psi_aux
    A = np.array([[u[i1], w[i1]], [u[i2], w[i2]]])
    alpha, beta = np.linalg.solve(A, np.array([u[i1], -u[i2]]))
    return alpha * u + beta * w, alpha * sol.dpsi + beta * sol.dpsi_aux


def quantum_action(solution: ArcSolution, problem: ArcProblem):
    """Real and imaginary parts of the quantum action on the grid.

    The complex solution v + i u (u the decaying branch, v the partner fixed
    by the two-point rule) gives X = hbar arg(v + i u), unwrapped and zero at
    the left turning point, and Y = hbar log sqrt(X'/g). The orientation is
    flipped (complex conjugation) when needed so that X increases.
    """
    hb = problem.model.hbar
    u, pu = solution.psi, solution.dpsi
    v, pv = _phase_partner(solution, problem)
    theta = np.unwrap(np.arctan2(u, v))
    X = hb * (theta - theta[problem.i1])
    r2 = u * u + v * v
    # invariant taken at the left turning point; pointwise values cancel badly
    # where one solution dominates far out in the continuation
    wr = v[problem.i1] * pu[problem.i1] - u[problem.i1] * pv[problem.i1]
    if X[problem.i2] < X[problem.i1]:
        X, wr = -X, -wr
        solution.conjugated = True
    # log of X'/g = hbar wr / r2, split so that far-exterior samples stay finite
    Y = 0.5 * hb * (np.log(hb * wr) - np.log(r2))
    return X, Y


def abel_invariant(solution: ArcSolution, problem: ArcProblem) -> np.ndarray:
    """u v_s - v u_s along the grid; constant for two solutions of the arc equation."""
    v, pv = _phase_partner(solution, problem)
    return solution.psi * pv - v * solution.dpsi


def _arc_g_derivs(arc, x):
    f1, f2 = arc.f(x, 1), arc.f(x, 2)
    f3 = arc.f(x, 3)
    g = np.sqrt(1.0 + f1 * f1)
    g1 = f1 * f2 / g
    g2 = (f2 * f2 + f1 * f3) / g - (f1 * f2) ** 2 / g ** 3
    return g, g1, g2


def qhje_residual(X, problem: ArcProblem, inner: float = 0.6, hbar: float | None = None,
                  derivatives=None) -> float:
    """Largest relative residual of the real-part quantum Hamilton-Jacobi equation.

    Checks 4 g^2 X'^4 - 3 hbar^2 g^2 X''^2 + 3 hbar^2 g'^2 X'^2
    + 2 hbar^2 g^2 X' X''' - 2 hbar^2 g g'' X'^2 = 8 m (E - U_k) g^4 X'^2
    on the central ``inner`` fraction of the allowed segment. Derivatives of
    X come from second-order centred differences unless supplied.
    """
    hb = problem.model.hbar if hbar is None else hbar
    m = problem.model.mass
    i1, i2 = problem.i1, problem.i2
    cut = int(round(0.5 * (1.0 - inner) * (i2 - i1)))
    idx = np.arange(max(i1 + cut, 2), min(i2 - cut, problem.n_grid - 3) + 1)
    x = problem.grid[idx]
    if derivatives is None:
        h = problem.h
        X = np.asarray(X, float)
        d1 = (X[idx + 1] - X[idx - 1]) / (2 * h)
        d2 = (X[idx + 1] - 2 * X[idx] + X[idx - 1]) / h ** 2
        d3 = (X[idx + 2] - 2 * X[idx + 1] + 2 * X[idx - 1] - X[idx - 2]) / (2 * h ** 3)
    else:
        d1, d2, d3 = (np.asarray(d, float)[idx] for d in derivatives)
    g, g1, g2 = _arc_g_derivs(problem.arc, x)
    lhs = (4 * g**2 * d1**4 - 3 * hb**2 * g**2 * d2**2 + 3 * hb**2 * g1**2 * d1**2
           + 2 * hb**2 * g**2 * d1 * d3 - 2 * hb**2 * g * g2 * d1**2)
    rhs = 8 * m * (problem.E - problem.U_k[idx]) * g**4 * d1**2
    return float(np.max(np.abs(lhs - rhs) / np.abs(rhs)))


def wkb_form_check(solution: ArcSolution, problem: ArcProblem, inner: float = 0.9) -> float:
    """Max deviation of psi from A sqrt(g/X') sin(X/hbar + pi/4), A least squares."""
    i1, i2 = problem.i1, problem.i2
    cut = int(round(0.5 * (1.0 - inner) * (i2 - i1)))
    seg = slice(i1 + cut, i2 - cut + 1)
    hb = problem.model.hbar
    dX = np.exp(2.0 * solution.Y[seg] / hb) * problem.g[seg]
    basis = np.sqrt(problem.g[seg] / dX) * np.sin(solution.X[seg] / hb + math.pi / 4)
    psi = solution.psi[seg]
    A = float(basis @ psi / (basis @ basis))
    return float(np.max(np.abs(A * basis - psi)) / np.max(np.abs(psi)))


def phase_index(model: HamiltonianModel, arc: ArcFit, E: float, n_grid: int = DEFAULT_GRID) -> float:
    """Continuous phase index nu(E); integer-valued at arc eigenvalues."""
    return solve_arc(build_arc_problem(model, arc, E, n_grid)).nu


def arc_eigenvalue(model: HamiltonianModel, arc: ArcFit, n: int, E_lo: float, E_hi: float,
                   n_grid: int = DEFAULT_GRID, xtol: float = 1e-12) -> float:
    """Energy in [E_lo, E_hi] at which the arc carries an n-node regular solution."""
    def f(E):
        return phase_index(model, arc, E, n_grid) - n
    return brentq(f, E_lo, E_hi, xtol=xtol)


def straight_arc(index: int, axis: str, value: float, domain, extension: float = 0.3) -> ArcFit:
    """Arc lying on the line x = value (axis "y") or y = value (axis "x")."""
    a, b = float(domain[0]), float(domain[1])
    spl = BSpline(np.r_[[a] * 4, [b] * 4], np.full(4, float(value)), 3)
    return ArcFit(index, axis, spl.t, spl.c, 3, (a, b), extension, 0.0)
