"""Reference spectrum from the Hamiltonian matrix in a harmonic-oscillator basis.

The product basis |i, j> of the uncoupled oscillators is truncated to
i + j <= n_max. In that basis the coupling lam x^2 y has the familiar
ladder-operator elements, so the matrix is built exactly and diagonalized
with a dense symmetric solver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .arc1d import build_arc_problem, solve_arc, straight_arc
from .caustic import ArcFit
from .model import HamiltonianModel, ModelError


@dataclass(frozen=True)
class BasisSpec:
    n_max: int = 30

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("n_max must be non-negative")

    @property
    def size(self) -> int:
        return (self.n_max + 1) * (self.n_max + 2) // 2

    def states(self):
        return [(i, j) for i in range(self.n_max + 1) for j in range(self.n_max + 1 - i)]


@dataclass
class OracleResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray      # columns over BasisSpec.states()
    spec: BasisSpec
    model: HamiltonianModel
    labels: list

    def label_of(self, k: int):
        return self.labels[k]

    def index_of(self, m: int, n: int) -> int:
        return self.labels.index((m, n))

    def to_dict(self, count: int | None = None) -> dict:
        k = len(self.eigenvalues) if count is None else count
        return {"model": self.model.to_dict(), "n_max": self.spec.n_max,
                "eigenvalues": self.eigenvalues[:k],
                "labels": [list(l) for l in self.labels[:k]]}


def build_matrix(model: HamiltonianModel, spec: BasisSpec) -> np.ndarray:
    hb, m = model.hbar, model.mass
    states = spec.states()
    pos = {s: k for k, s in enumerate(states)}
    H = np.zeros((spec.size, spec.size))
    cx = hb / (2.0 * m * model.omega_x)
    cy = math.sqrt(hb / (2.0 * m * model.omega_y))
    for k, (i, j) in enumerate(states):
        H[k, k] = hb * model.omega_x * (i + 0.5) + hb * model.omega_y * (j + 0.5)
        if model.lam == 0.0:
            continue
        x2 = {i: cx * (2 * i + 1), i + 2: cx * math.sqrt((i + 1) * (i + 2))}
        if i >= 2:
            x2[i - 2] = cx * math.sqrt(i * (i - 1))
        y1 = {j + 1: cy * math.sqrt(j + 1)}
        if j >= 1:
            y1[j - 1] = cy * math.sqrt(j)
        for ip, a in x2.items():
            for jp, b in y1.items():
                r = pos.get((ip, jp))
                if r is not None:
                    H[r, k] += model.lam * a * b
    # elements are generated column-wise from the same formulas; enforce exact symmetry
    return np.triu(H) + np.triu(H, 1).T


def _labels(vectors, states):
    """Dominant basis state of each eigenvector, made unique greedily."""
    weights = vectors ** 2
    taken = set()
    out = []
    for k in range(vectors.shape[1]):
        for idx in np.argsort(-weights[:, k], kind="stable"):
            s = states[idx]
            if s not in taken:
                taken.add(s)
                out.append(s)
                break
    return out


def diagonalize(matrix, spec: BasisSpec | None = None, model: HamiltonianModel | None = None
                ) -> OracleResult:
    """Full symmetric eigendecomposition (LAPACK), eigenvalues ascending."""
    M = np.asarray(matrix, float)
    if M.shape[0] != M.shape[1] or not np.array_equal(M, M.T):
        raise ValueError("matrix must be square and symmetric")
    w, V = np.linalg.eigh(M)
    if spec is None:
        n = int(round((math.sqrt(8 * M.shape[0] + 1) - 3) / 2))
        spec = BasisSpec(n) if BasisSpec(n).size == M.shape[0] else None
    labels = _labels(V, spec.states()) if spec is not None else [None] * len(w)
    return OracleResult(w, V, spec, model, labels)


def solve(model: HamiltonianModel, n_max: int = 30) -> OracleResult:
    spec = BasisSpec(n_max)
    return diagonalize(build_matrix(model, spec), spec, model)


def hermite_functions(n: int, x, mass: float, omega: float, hbar: float) -> np.ndarray:
    """Normalized oscillator eigenfunctions h_0..h_n at x (rows)."""
    x = np.asarray(x, float)
    alpha = mass * omega / hbar
    xi = math.sqrt(alpha) * x
    out = np.empty((n + 1,) + x.shape)
    out[0] = (alpha / math.pi) ** 0.25 * np.exp(-0.5 * xi * xi)
    if n >= 1:
        out[1] = math.sqrt(2.0) * xi * out[0]
    for i in range(1, n):
        out[i + 1] = math.sqrt(2.0 / (i + 1)) * xi * out[i] - math.sqrt(i / (i + 1)) * out[i - 1]
    return out


def eigenstate_value(result: OracleResult, k: int, q) -> np.ndarray:
    """Amplitude of eigenstate ``k`` at positions q = (x, y) (arrays allowed)."""
    if not 0 <= k < len(result.eigenvalues):
        raise IndexError("state index out of range")
    md = result.model
    x, y = np.asarray(q[0], float), np.asarray(q[1], float)
    nm = result.spec.n_max
    hx = hermite_functions(nm, x, md.mass, md.omega_x, md.hbar)
    hy = hermite_functions(nm, y, md.mass, md.omega_y, md.hbar)
    c = result.eigenvectors[:, k]
    val = np.zeros(np.broadcast(x, y).shape)
    for coef, (i, j) in zip(c, result.spec.states()):
        if coef != 0.0:
            val = val + coef * hx[i] * hy[j]
    return val


def restrict_to_arc(result: OracleResult, k: int, arc: ArcFit, grid) -> np.ndarray:
    """Eigenstate ``k`` sampled along the arc, scaled to unit maximum modulus."""
    x, y = arc.point(np.asarray(grid, float))
    v = eigenstate_value(result, k, (x, y))
    return v / np.max(np.abs(v))


def harmonic_action(x, E: float, mass: float, omega: float) -> np.ndarray:
    """int_{-a}^{x} sqrt(2m(E - m w^2 x'^2 / 2)) dx', clipped to [-a, a]."""
    a = math.sqrt(2.0 * E / (mass * omega * omega))
    xc = np.clip(np.asarray(x, float), -a, a)
    return 0.5 * mass * omega * (xc * np.sqrt(a * a - xc * xc) + a * a * np.arcsin(xc / a)
                                 + 0.5 * math.pi * a * a)


@dataclass
class ActionSurface:
    x: np.ndarray
    y: np.ndarray
    X: np.ndarray        # (ny, nx), NaN outside the caustic rectangle
    W: np.ndarray
    inside: np.ndarray


def _axis_phase(model, E, omega, axis, n_grid):
    a = math.sqrt(2.0 * E / (model.mass * omega * omega))
    # the 1-D problem lives on a straight arc through the origin
    arc = straight_arc(2 if axis == "x" else 1, axis, 0.0, (-a, a))
    prob = build_arc_problem(model, arc, E, n_grid)
    sol = solve_arc(prob)
    return prob.grid, sol.X


def separable_action_surface(model: HamiltonianModel, m: int, n: int, nx: int = 101, ny: int = 101,
                             margin: float = 0.1, n_grid: int = 4000) -> ActionSurface:
    """Quantum phase X and classical action W on a grid around the (m, n) rectangle.

    Both are sums of one-dimensional actions measured from the (-a, -b)
    corner; grid points outside the rectangle are NaN.
    """
    if not model.separable:
        raise ModelError("action surfaces are only defined for lambda == 0")
    hb = model.hbar
    Ex = hb * model.omega_x * (m + 0.5)
    Ey = hb * model.omega_y * (n + 0.5)
    a = math.sqrt(2.0 * Ex / (model.mass * model.omega_x ** 2))
    b = math.sqrt(2.0 * Ey / (model.mass * model.omega_y ** 2))
    xs = np.linspace(-(1 + margin) * a, (1 + margin) * a, nx)
    ys = np.linspace(-(1 + margin) * b, (1 + margin) * b, ny)
    # U_k along y = 0 is kx x^2/2, along x = 0 it is ky y^2/2
    gx, Xx = _axis_phase(model, Ex, model.omega_x, "x", n_grid)
    gy, Xy = _axis_phase(model, Ey, model.omega_y, "y", n_grid)
    X1 = np.interp(xs, gx, Xx)
    Y1 = np.interp(ys, gy, Xy)
    W1x = harmonic_action(xs, Ex, model.mass, model.omega_x)
    W1y = harmonic_action(ys, Ey, model.mass, model.omega_y)
    inside = (np.abs(xs)[None, :] <= a) & (np.abs(ys)[:, None] <= b)
    X = np.where(inside, X1[None, :] + Y1[:, None], np.nan)
    W = np.where(inside, W1x[None, :] + W1y[:, None], np.nan)
    return ActionSurface(xs, ys, X, W, inside)
