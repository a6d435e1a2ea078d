"""Barbanis-type Hamiltonian: H = p^2/2m + m wx^2 x^2/2 + m wy^2 y^2/2 + lam x^2 y.

Frequencies enter squared. With ``lam = 0`` the model is two uncoupled
harmonic oscillators and has the exact spectrum returned by
:func:`separable_spectrum`.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq


class ModelError(ValueError):
    pass


class UnboundedDirectionError(ModelError):
    """No equipotential crossing along the requested ray."""


@dataclass(frozen=True)
class HamiltonianModel:
    omega_x: float = 1.1
    omega_y: float = 1.0
    lam: float = -0.11
    mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("omega_x", "omega_y", "mass", "hbar"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ModelError(f"{name} must be positive and finite, got {v!r}")
        if not math.isfinite(self.lam):
            raise ModelError("lambda must be finite")

    @property
    def kx(self) -> float:
        return self.mass * self.omega_x**2

    @property
    def ky(self) -> float:
        return self.mass * self.omega_y**2

    @property
    def separable(self) -> bool:
        return self.lam == 0.0

    def with_hbar(self, hbar: float) -> "HamiltonianModel":
        return HamiltonianModel(self.omega_x, self.omega_y, self.lam, self.mass, hbar)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "HamiltonianModel":
        d = dict(d)
        if "model" in d and isinstance(d["model"], dict):
            d = dict(d["model"])
        known = {"omega_x", "omega_y", "lambda", "lam", "mass", "hbar"}
        unknown = set(d) - known
        if unknown:
            raise ModelError(f"unknown model keys: {sorted(unknown)}")
        lam = d.pop("lambda", d.pop("lam", 0.0))
        try:
            return cls(lam=float(lam), **{k: float(v) for k, v in d.items()})
        except (TypeError, ValueError) as exc:
            raise ModelError(str(exc)) from exc


# Coupled reference system used throughout the tests and examples.
BARBANIS = HamiltonianModel(1.1, 1.0, -0.11)


def load_model(path) -> HamiltonianModel:
    """Read model parameters from a JSON file.

    Accepts either a flat object ``{"omega_x": .., "omega_y": .., "lambda": ..,
    "mass": .., "hbar": ..}`` or the same object nested under ``"model"``.
    """
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: {exc}") from exc
    return HamiltonianModel.from_dict(data)


def potential(model: HamiltonianModel, q):
    x, y = q[0], q[1]
    return 0.5 * model.kx * x * x + 0.5 * model.ky * y * y + model.lam * x * x * y


def gradient(model: HamiltonianModel, q):
    x, y = q[0], q[1]
    return np.array([model.kx * x + 2.0 * model.lam * x * y,
                     model.ky * y + model.lam * x * x])


def hessian(model: HamiltonianModel, q):
    x, y = q[0], q[1]
    off = 2.0 * model.lam * x
    return np.array([[model.kx + 2.0 * model.lam * y, off],
                     [off, model.ky]])


def energy(model: HamiltonianModel, q, p):
    return (p[0] ** 2 + p[1] ** 2) / (2.0 * model.mass) + potential(model, q)


def separable_spectrum(model: HamiltonianModel, m: int, n: int) -> float:
    """Exact level hbar*wx*(m+1/2) + hbar*wy*(n+1/2) of the uncoupled model."""
    if not model.separable:
        raise ModelError("separable_spectrum requires lambda == 0")
    if m < 0 or n < 0:
        raise ModelError("quantum numbers must be non-negative")
    return model.hbar * (model.omega_x * (m + 0.5) + model.omega_y * (n + 0.5))


def separable_levels(model: HamiltonianModel, e_max: float):
    """All (m, n) of the uncoupled model with energy <= e_max, sorted by energy."""
    out = []
    m = 0
    while model.hbar * (model.omega_x * (m + 0.5) + 0.5 * model.omega_y) <= e_max:
        n = 0
        while True:
            e = model.hbar * (model.omega_x * (m + 0.5) + model.omega_y * (n + 0.5))
            if e > e_max:
                break
            out.append((e, m, n))
            n += 1
        m += 1
    out.sort()
    return [(m, n) for _, m, n in out]


def equipotential_point(model: HamiltonianModel, E: float, direction, r_max: float = 50.0):
    """Point on the ray from the origin along ``direction`` where U = E.

    The well is star-shaped about the origin at the energies of interest, so
    the first crossing is bracketed on a coarse radial scan and polished by
    Brent's method.
    """
    if not E > 0:
        raise ModelError("energy must be positive")
    d = np.asarray(direction, dtype=float)
    norm = math.hypot(d[0], d[1])
    if norm == 0.0:
        raise ModelError("direction must be nonzero")
    c, s = d[0] / norm, d[1] / norm

    def f(r):
        return potential(model, (r * c, r * s)) - E

    # radial profile U(r) = a r^2 + b r^3
    a = 0.5 * (model.kx * c * c + model.ky * s * s)
    r_lo = 0.0
    r_hi = min(math.sqrt(E / a), r_max)
    while f(r_hi) < 0.0:
        r_lo, r_hi = r_hi, 1.5 * r_hi
        if r_hi > r_max:
            raise UnboundedDirectionError(
                f"no crossing of U={E} within r<{r_max} along ({c:.6f}, {s:.6f})")
    # first crossing: refine a scan on [0, r_hi] in case the profile turns over
    rs = np.linspace(0.0, r_hi, 65)
    vals = [f(r) for r in rs]
    i = next(k for k in range(1, len(rs)) if vals[k] >= 0.0)
    r = brentq(f, rs[i - 1], rs[i], xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return np.array([r * c, r * s])


def corner_angle(model: HamiltonianModel, m: int, n: int, corner: str = "upper-left") -> float:
    """Polar angle of a corner of the uncoupled (m, n) rectangle.

    Used to seed the start-vertex parameter of the coupled search.
    """
    a = math.sqrt(2.0 * model.hbar * (m + 0.5) / (model.mass * model.omega_x))
    b = math.sqrt(2.0 * model.hbar * (n + 0.5) / (model.mass * model.omega_y))
    sx, sy = {"upper-left": (-1, 1), "lower-left": (-1, -1),
              "upper-right": (1, 1), "lower-right": (1, -1)}[corner]
    return math.atan2(sy * b, sx * a) % (2 * math.pi)
