"""Caustic geometry: vertices, fitted arcs, boundary action, EBK integrals.

Numbering follows the usual box convention: vertex 1 is lower left and
the others follow clockwise (2 upper left, 3 upper right, 4 lower right);
arc k runs from vertex k to vertex k+1, so arc 1 is the left arc, arc 2 the
top, arc 3 the right and arc 4 the bottom. Left/right arcs are graphs
x = f(y); top/bottom arcs are graphs y = f(x).

Each arc is a least-squares B-spline through the conjugate points. Outside
its vertex interval it is continued by the quadratic Taylor polynomial at
the vertex, which keeps f in C^2 and gives the continuation on which the
decaying exterior solutions live.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import IntegrationWarning
from scipy.integrate import quad as _quad
from scipy.interpolate import BSpline, make_lsq_spline
from scipy.optimize import brentq

from .classical import CausticPointCloud
from .io import dumps
from .model import HamiltonianModel, gradient, potential


def quad(*args, **kw):
    # endpoint square-root behaviour triggers harmless roundoff warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        return _quad(*args, **kw)


class CausticError(RuntimeError):
    pass


class DegenerateFamilyError(CausticError):
    """The conjugate points do not form a four-arc box caustic."""


class ArcFitError(CausticError):
    def __init__(self, index, degree, residual, tol):
        super().__init__(f"arc {index}: fit residual {residual:.3e} > {tol:.1e} (degree {degree})")
        self.index, self.degree, self.residual = index, degree, residual


class EmptyWellError(CausticError):
    pass


# arcs graphed as x = f(y)
_SIDE = (1, 3)
# vertex pairs (start, end) of each arc in increasing parameter order
_ARC_VERTICES = {1: (1, 2), 2: (2, 3), 3: (4, 3), 4: (1, 4)}


@dataclass
class Vertex:
    index: int
    position: np.ndarray
    residual: float


@dataclass
class ArcFit:
    index: int
    axis: str                  # parameter coordinate: "y" means x = f(y)
    knots: np.ndarray
    coefficients: np.ndarray
    degree: int
    domain: tuple              # parameter interval between the two vertices
    extension: float = 0.3     # minimum continuation, fraction of domain length
    fit_residual: float = 0.0
    _spl: BSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.knots = np.asarray(self.knots, float)
        self.coefficients = np.asarray(self.coefficients, float)
        self.domain = (float(self.domain[0]), float(self.domain[1]))
        self._spl = BSpline(self.knots, self.coefficients, self.degree, extrapolate=True)

    @property
    def length(self) -> float:
        return self.domain[1] - self.domain[0]

    def f(self, t, nu: int = 0):
        """Graph function (and derivatives) including the Taylor continuation."""
        t = np.asarray(t, float)
        out = np.asarray(self._spl(np.clip(t, *self.domain), nu), float).copy()
        for end, side in ((self.domain[0], t < self.domain[0]), (self.domain[1], t > self.domain[1])):
            if np.any(side):
                dt = t[side] - end
                c0, c1, c2 = (float(self._spl(end, k)) for k in range(3))
                if nu == 0:
                    out[side] = c0 + c1 * dt + 0.5 * c2 * dt * dt
                elif nu == 1:
                    out[side] = c1 + c2 * dt
                elif nu == 2:
                    out[side] = c2
                else:
                    out[side] = 0.0
        return out if out.ndim else float(out)

    def point(self, t):
        t = np.asarray(t, float)
        v = self.f(t)
        return (v, t) if self.axis == "y" else (t, v)

    def scale_factor(self, t):
        return np.sqrt(1.0 + self.f(t, 1) ** 2)

    def effective_potential(self, model: HamiltonianModel, t):
        x, y = self.point(t)
        return potential(model, (x, y))

    def to_dict(self) -> dict:
        return {"index": self.index, "axis": self.axis, "degree": self.degree,
                "knots": self.knots.tolist(), "coefficients": self.coefficients.tolist(),
                "domain": list(self.domain), "extension": self.extension,
                "fit_residual": self.fit_residual}

    @classmethod
    def from_dict(cls, d: dict) -> "ArcFit":
        return cls(int(d["index"]), d["axis"], np.array(d["knots"], float),
                   np.array(d["coefficients"], float), int(d["degree"]), tuple(d["domain"]),
                   float(d["extension"]), float(d["fit_residual"]))


@dataclass
class Caustic:
    energy: float
    vertices: list
    arcs: list
    orientation: str = "ccw"

    def arc(self, k: int) -> ArcFit:
        return self.arcs[k - 1]

    def to_dict(self) -> dict:
        return {"energy": self.energy, "orientation": self.orientation,
                "vertices": [{"index": v.index, "position": list(map(float, v.position)),
                              "residual": v.residual} for v in self.vertices],
                "arcs": [a.to_dict() for a in self.arcs]}

    @classmethod
    def from_dict(cls, d: dict) -> "Caustic":
        verts = [Vertex(int(v["index"]), np.array(v["position"], float), float(v["residual"]))
                 for v in d["vertices"]]
        return cls(float(d["energy"]), verts, [ArcFit.from_dict(a) for a in d["arcs"]],
                   d.get("orientation", "ccw"))

    def to_json(self) -> str:
        return dumps(self.to_dict())


def partition_cloud(cloud: CausticPointCloud) -> dict:
    """Split conjugate points into the four arcs.

    The touching trajectory moves tangentially to the caustic, so points
    with |p_y| > |p_x| belong to the left/right arcs and the rest to the
    top/bottom arcs; the midlines of the cloud separate the pairs.
    """
    q, p = cloud.q, cloud.p
    side = np.abs(p[:, 1]) > np.abs(p[:, 0])
    xc = 0.5 * (q[:, 0].min() + q[:, 0].max())
    yc = 0.5 * (q[:, 1].min() + q[:, 1].max())
    return {1: side & (q[:, 0] < xc), 2: ~side & (q[:, 1] > yc),
            3: side & (q[:, 0] >= xc), 4: ~side & (q[:, 1] <= yc)}


def arc_coverage(cloud: CausticPointCloud, bins: int = 32) -> float:
    """Smallest fraction of occupied bins along the four arc parameters.

    Nearly periodic orbits revisit the same few conjugate points; low
    coverage signals that a longer trajectory is needed.
    """
    cover = 1.0
    for k, mask in partition_cloud(cloud).items():
        t = cloud.q[mask, 1] if k in _SIDE else cloud.q[mask, 0]
        if len(t) < 2 or t.max() == t.min():
            return 0.0
        cover = min(cover, float(np.mean(np.histogram(t, bins)[0] > 0)))
    return cover


def _graph_data(cloud, mask, k):
    pts = cloud.q[mask]
    t, v = (pts[:, 1], pts[:, 0]) if k in _SIDE else (pts[:, 0], pts[:, 1])
    order = np.argsort(t, kind="stable")
    t, v = t[order], v[order]
    # merge coincident abscissae
    span = t[-1] - t[0] if len(t) else 0.0
    keep = np.concatenate([[True], np.diff(t) > 1e-9 * max(span, 1e-300)])
    groups = np.cumsum(keep) - 1
    tm = np.bincount(groups, t) / np.bincount(groups)
    vm = np.bincount(groups, v) / np.bincount(groups)
    return tm, vm


def _fit_graph(t, v, kind, degree, max_knots=16):
    a, b = t[0], t[-1]
    if kind == "poly":
        k = degree
        knots = np.r_[[a] * (k + 1), [b] * (k + 1)]
    elif kind == "spline":
        # periodic (resonant) orbits revisit few points; lower the order then
        k = min(3, len(t) - 1)
        # uniform knots: end derivatives stay stable when points are added
        n_int = min(max_knots, max((len(t) - 4) // 2, 0))
        # every knot span needs data (Schoenberg-Whitney); sparse, nearly
        # periodic orbits leave gaps, so drop knots until it holds
        while n_int > 0:
            edges = np.linspace(a, b, n_int + 2)
            if np.all(np.histogram(t, edges)[0] > 0):
                break
            n_int -= 1
        inner = np.linspace(a, b, n_int + 2)[1:-1]
        knots = np.r_[[a] * (k + 1), inner, [b] * (k + 1)]
    else:
        raise ValueError(f"unknown arc kind {kind!r}")
    if len(t) < len(knots) - k - 1:
        raise DegenerateFamilyError(f"too few points ({len(t)}) for the arc fit")
    spl = make_lsq_spline(t, v, knots, k)
    if not np.all(np.isfinite(spl.c)):
        raise DegenerateFamilyError("arc fit is singular")
    d1 = spl(t, 1)
    resid = float(np.max(np.abs(spl(t) - v) / np.sqrt(1.0 + d1 * d1)))
    return spl, resid


def _arc_from_cloud(cloud, mask, k, kind, degree, domain=None, refine=1e-4):
    t, v = _graph_data(cloud, mask, k)
    if len(t) < 3:
        raise DegenerateFamilyError(f"arc {k}: only {len(t)} conjugate points")
    spl, resid = _fit_graph(t, v, kind, degree)
    if kind == "spline":
        # sharply bent arcs get more knots
        for knots in (24, 32):
            if resid <= refine:
                break
            spl, resid = _fit_graph(t, v, kind, degree, knots)
    dom = (t[0], t[-1]) if domain is None else domain
    return ArcFit(k, "y" if k in _SIDE else "x", spl.t, spl.c, spl.k, dom, fit_residual=resid)


def arc_turning_points(model: HamiltonianModel, arc: ArcFit, E: float, search: float = 0.5):
    """Parameters near both ends of ``arc`` where U_k = E.

    Searches outward from each domain end (into the continuation) and inward
    over ``search`` of the domain length, returning the crossing nearest to
    the end. Raises EmptyWellError if no allowed interior exists.
    """
    a, b = arc.domain
    L = b - a

    def h(t):
        return float(arc.effective_potential(model, t)) - E

    mid = 0.5 * (a + b)
    if h(mid) >= 0.0:
        ts = np.linspace(a, b, 201)
        vals = arc.effective_potential(model, ts) - E
        if np.all(vals >= 0.0):
            raise EmptyWellError(f"arc {arc.index}: U_k >= E on the whole arc")
        mid = ts[int(np.argmin(vals))]

    def find(direction):
        end = a if direction < 0 else b
        ts = np.linspace(mid, end + direction * search * L, 400)
        vals = arc.effective_potential(model, ts) - E
        pos = np.nonzero(vals > 0.0)[0]
        if len(pos) == 0:
            raise EmptyWellError(f"arc {arc.index}: no turning point near the vertex")
        i = pos[0]
        lo, hi = sorted((ts[i - 1], ts[i]))
        return brentq(h, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=200)

    return find(-1), find(+1)


def _project_to_equipotential(model, q, E, iters=50):
    q = np.array(q, float)
    for _ in range(iters):
        r = float(potential(model, q)) - E
        g = gradient(model, q)
        step = r / float(g @ g)
        q = q - step * g
        if abs(r) <= 1e-15 * max(1.0, abs(E)):
            break
    return q


def extract_vertices(cloud: CausticPointCloud, model: HamiltonianModel, E: float,
                     kind: str = "spline", degree: int = 8):
    """Four caustic vertices on U = E, lower left first, then clockwise.

    Each arc is fitted provisionally, its two crossings with the
    equipotential are located, the two estimates of every corner are
    averaged and the result is projected onto U = E along grad U.
    """
    if len(cloud) == 0:
        raise DegenerateFamilyError("empty conjugate-point cloud")
    masks = partition_cloud(cloud)
    counts = {k: int(m.sum()) for k, m in masks.items()}
    if min(counts.values()) < 3:
        raise DegenerateFamilyError(f"conjugate points do not form four arcs: {counts}")
    est = {1: [], 2: [], 3: [], 4: []}
    for k in (1, 2, 3, 4):
        arc = _arc_from_cloud(cloud, masks[k], k, kind, degree)
        t1, t2 = arc_turning_points(model, arc, E)
        lo_v, hi_v = _ARC_VERTICES[k]
        est[lo_v].append(np.array(arc.point(t1), float))
        est[hi_v].append(np.array(arc.point(t2), float))
    verts = []
    for i in (1, 2, 3, 4):
        q = _project_to_equipotential(model, np.mean(est[i], axis=0), E)
        verts.append(Vertex(i, q, abs(float(potential(model, q)) - E)))
    _check_order(verts)
    return verts


def _check_order(verts):
    p = np.array([v.position for v in verts])
    ok = (p[0, 0] < p[3, 0] and p[1, 0] < p[2, 0] and p[0, 1] < p[1, 1] and p[3, 1] < p[2, 1])
    if not ok:
        raise DegenerateFamilyError("vertices are not in box order")


def fit_arcs(cloud: CausticPointCloud, vertices, kind: str = "spline", degree: int = 8,
             tol: float = 1e-3, extension: float = 0.3):
    """Fit the four arcs with domains spanning their vertex pairs.

    ``kind="spline"`` (default) is a least-squares cubic B-spline with 16
    uniformly spaced interior knots (24 or 32 if the residual stays above
    1e-4); ``kind="poly"`` a single polynomial
    of ``degree``.
    """
    masks = partition_cloud(cloud)
    vpos = {v.index: v.position for v in vertices}
    arcs = []
    for k in (1, 2, 3, 4):
        i0, i1 = _ARC_VERTICES[k]
        c = 1 if k in _SIDE else 0
        dom = (float(vpos[i0][c]), float(vpos[i1][c]))
        arc = _arc_from_cloud(cloud, masks[k], k, kind, degree, domain=dom)
        arc.extension = extension
        if arc.fit_residual > tol:
            raise ArcFitError(k, arc.degree, arc.fit_residual, tol)
        arcs.append(arc)
    return arcs


def build_caustic(cloud: CausticPointCloud, model: HamiltonianModel, kind: str = "spline",
                  degree: int = 8, tol: float = 1e-3) -> Caustic:
    verts = extract_vertices(cloud, model, cloud.energy, kind, degree)
    arcs = fit_arcs(cloud, verts, kind, degree, tol)
    return Caustic(cloud.energy, verts, arcs)


def closure_gap(caustic: Caustic) -> float:
    """Largest distance between an arc end and its vertex."""
    gap = 0.0
    vpos = {v.index: v.position for v in caustic.vertices}
    for arc in caustic.arcs:
        i0, i1 = _ARC_VERTICES[arc.index]
        for t, vi in ((arc.domain[0], i0), (arc.domain[1], i1)):
            gap = max(gap, float(np.hypot(*(np.array(arc.point(t), float) - vpos[vi]))))
    return gap


def _momentum_integrand(model, arc, E):
    flag = [False]

    def f(t):
        d = E - float(arc.effective_potential(model, t))
        if d < 0.0:
            if d < -1e-12 * max(1.0, E):
                flag[0] = True
            d = 0.0
        return math.sqrt(2.0 * model.mass * d) * float(arc.scale_factor(t))
    return f, flag


# counterclockwise traversal: 1 -> 4 -> 3 -> 2 -> 1
_CCW_NEXT = {1: 4, 4: 3, 3: 2, 2: 1}
_ARC_BETWEEN = {(1, 4): 4, (4, 3): 3, (3, 2): 2, (2, 1): 1}


def _ccw_legs(caustic, start_vertex):
    legs = []
    v = start_vertex
    for _ in range(4):
        w = _CCW_NEXT[v]
        k = _ARC_BETWEEN[(v, w)]
        arc = caustic.arc(k)
        i0, _ = _ARC_VERTICES[k]
        t_from, t_to = (arc.domain[0], arc.domain[1]) if v == i0 else (arc.domain[1], arc.domain[0])
        legs.append((arc, t_from, t_to))
        v = w
    return legs


def _arc_length(arc, a, b):
    val, _ = quad(lambda t: float(arc.scale_factor(t)), min(a, b), max(a, b),
                  epsabs=1e-13, epsrel=1e-13, limit=200)
    return val


def perimeter(caustic: Caustic) -> float:
    return sum(_arc_length(a, *a.domain) for a in caustic.arcs)


def boundary_action(model: HamiltonianModel, caustic: Caustic, start_vertex: int, s: float,
                    return_flag: bool = False, epsabs: float = 1e-9):
    """Integral of |p| dl along the caustic (counterclockwise) from a vertex.

    The momentum of the touching trajectory is tangent to the caustic with
    magnitude sqrt(2m(E - U)). Where a fitted arc strays outside the allowed
    region the integrand is clamped at zero and the flag is raised.
    """
    if s < 0:
        raise ValueError("s must be non-negative")
    E = caustic.energy
    total = 0.0
    remaining = s
    clamped = False
    for arc, t0, t1 in _ccw_legs(caustic, start_vertex):
        if remaining <= 0.0:
            break
        L = _arc_length(arc, t0, t1)
        if remaining >= L:
            t_end = t1
            remaining -= L
        else:
            target = remaining
            t_end = brentq(lambda t: _arc_length(arc, t0, t) - target, min(t0, t1), max(t0, t1),
                           xtol=1e-13)
            remaining = 0.0
        f, flag = _momentum_integrand(model, arc, E)
        val, _ = quad(f, min(t0, t_end), max(t0, t_end), epsabs=epsabs, epsrel=1e-12, limit=400)
        total += val
        clamped = clamped or flag[0]
    else:
        if remaining > 1e-9:
            raise ValueError("s exceeds the caustic perimeter")
    return (total, clamped) if return_flag else total


def ebk_integral(model: HamiltonianModel, arc: ArcFit, E: float) -> float:
    """Classical action along an arc between its turning points."""
    t1, t2 = arc_turning_points(model, arc, E)
    f, _ = _momentum_integrand(model, arc, E)
    val, _ = quad(f, t1, t2, epsabs=1e-12, epsrel=1e-12, limit=400)
    return val
