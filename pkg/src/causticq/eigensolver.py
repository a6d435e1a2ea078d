"""Outer search over trajectory families.

A family is labelled by its energy E and the polar angle s of its start
vertex on the equipotential. For each trial the caustic is built, the four
arc problems are solved and their phase indices nu_k compared with the
target node counts. The root in (E, s) is found by damped Newton iterations
with a finite-difference Jacobian.

Arcs 1 and 3 (left/right) carry the y-excitation n, arcs 2 and 4
(top/bottom) the x-excitation m.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .arc1d import DEFAULT_GRID, ArcError, build_arc_problem, solve_arc
from .caustic import Caustic, CausticError, arc_coverage, build_caustic, ebk_integral
from .classical import DEFAULT_STEP, ClassicalError, caustic_cloud
from .io import write_csv, write_json
from .model import HamiltonianModel, ModelError, corner_angle, separable_levels


class SearchError(RuntimeError):
    pass


class InconsistentFamilyError(SearchError):
    """Opposite arcs disagree on their node count."""


class NoConvergenceError(SearchError):
    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


class StraddlingStatesError(NoConvergenceError):
    pass


class EnergyBoundError(SearchError):
    pass


EQUATIONS = ("adjacent", "paired")
# fallback starts (energy in units of hbar, angle) tried in order when a seed fails
SEED_OFFSETS = ((0.0, 0.0), (-0.05, 0.0), (0.0, 0.03), (0.0, -0.03), (-0.1, 0.03), (-0.1, -0.03))


@dataclass
class SearchOptions:
    t_max: float = 400.0
    step: float = DEFAULT_STEP
    n_grid: int = DEFAULT_GRID
    tol: float = 1e-8
    max_iter: int = 60
    equations: str = "paired"
    e_bound: float = 8.6
    fd_step: float = 2e-4
    coverage: float = 0.9
    max_t_factor: float = 8.0

    def __post_init__(self):
        if self.equations not in EQUATIONS:
            raise ValueError(f"equations must be one of {EQUATIONS}")
        for name in ("t_max", "step", "tol", "fd_step", "e_bound"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iter < 1 or self.n_grid < 200:
            raise ValueError("max_iter >= 1 and n_grid >= 200 required")


@dataclass
class FamilyTrial:
    E: float
    s: float
    caustic: Caustic | None
    nu: np.ndarray = field(default_factory=lambda: np.full(4, np.nan))
    arc_defects: np.ndarray = field(default_factory=lambda: np.full(4, np.nan))
    arc_nodes: tuple = (-1, -1, -1, -1)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def evaluate_trial(model: HamiltonianModel, E: float, s: float,
                   options: SearchOptions | None = None) -> FamilyTrial:
    """Run trajectory, caustic and arc stages for one (E, s).

    Pipeline failures are returned as a trial with ``error`` set.
    """
    opt = options or SearchOptions()
    if not E > 0:
        raise ValueError("E must be positive")
    try:
        if E > opt.e_bound:
            raise EnergyBoundError(f"E = {E} exceeds the bound {opt.e_bound}")
        cloud = family_cloud(model, E, s, opt)
        caustic = build_caustic(cloud, model)
        nu, dfc, nodes = [], [], []
        for arc in caustic.arcs:
            sol = solve_arc(build_arc_problem(model, arc, E, opt.n_grid))
            nu.append(sol.nu)
            dfc.append(sol.defect)
            nodes.append(sol.nodes)
    except (ClassicalError, CausticError, ArcError, ModelError, SearchError, ValueError) as exc:
        return FamilyTrial(E, s, None, error=f"{type(exc).__name__}: {exc}")
    return FamilyTrial(E, s, caustic, np.array(nu), np.array(dfc), tuple(nodes))


def family_cloud(model: HamiltonianModel, E: float, s: float, opt: SearchOptions):
    """Conjugate points of the family, integrating longer until the arcs are covered."""
    t_max = opt.t_max
    while True:
        _, cloud = caustic_cloud(model, E, s, t_max=t_max, step=opt.step)
        if t_max >= opt.max_t_factor * opt.t_max or arc_coverage(cloud) >= opt.coverage:
            return cloud
        t_max *= 2.0


def classify_nodes(trial: FamilyTrial):
    """(m, n) from the node counts of the top/bottom and left/right arcs."""
    if not trial.ok:
        raise SearchError(f"cannot classify a failed trial: {trial.error}")
    k1, k2, k3, k4 = trial.arc_nodes
    if k1 != k3 or k2 != k4:
        raise InconsistentFamilyError(f"opposite arcs disagree: nodes {trial.arc_nodes}")
    return k2, k1


def _equations(trial, m, n, kind):
    nu = trial.nu
    if kind == "adjacent":
        return np.array([nu[0] - n, nu[1] - m])
    return np.array([0.5 * (nu[0] + nu[2]) - n, 0.5 * (nu[1] + nu[3]) - m])


@dataclass
class SpectrumEntry:
    E: float
    m: int
    n: int
    defects: np.ndarray
    nu: np.ndarray
    ebk_residuals: np.ndarray
    vertex_s: float
    iterations: int
    residual: float
    caustic: Caustic = field(repr=False)

    @property
    def label(self):
        return (self.m, self.n)

    def to_dict(self) -> dict:
        return {"E": self.E, "m": self.m, "n": self.n, "vertex_s": self.vertex_s,
                "defects": self.defects, "nu": self.nu, "ebk_residuals": self.ebk_residuals,
                "iterations": self.iterations, "residual": self.residual,
                "caustic": self.caustic.to_dict()}


def seed(model: HamiltonianModel, m: int, n: int):
    """Energy and start angle of the uncoupled (m, n) state, upper-left corner."""
    sep = HamiltonianModel(model.omega_x, model.omega_y, 0.0, model.mass, model.hbar)
    E = model.hbar * (model.omega_x * (m + 0.5) + model.omega_y * (n + 0.5))
    return E, corner_angle(sep, m, n, "upper-left")


def find_state(model: HamiltonianModel, E_init: float, s_init: float, target=None,
               options: SearchOptions | None = None) -> SpectrumEntry:
    """Damped Newton search for a family hosting regular solutions on all arcs.

    ``target`` fixes (m, n); by default it is read off the initial trial.
    Raises NoConvergenceError (with the iteration trace) on failure.
    """
    opt = options or SearchOptions()
    x = np.array([E_init, s_init], float)
    trial = evaluate_trial(model, x[0], x[1], opt)
    trace = [(x[0], x[1], trial.error)]
    if not trial.ok:
        raise NoConvergenceError(f"initial trial failed: {trial.error}", trace)
    if target is None:
        m, n = int(round(0.5 * (trial.nu[1] + trial.nu[3]))), int(round(0.5 * (trial.nu[0] + trial.nu[2])))
    else:
        m, n = target
    F = _equations(trial, m, n, opt.equations)
    h = opt.fd_step
    # residual tolerance in phase-index units; |defect| = |sin(pi dnu)| <= pi |dnu|
    ftol = opt.tol / math.pi
    labels = []
    for it in range(1, opt.max_iter + 1):
        if np.max(np.abs(F)) <= ftol:
            return _entry(model, trial, m, n, it - 1, float(np.max(np.abs(F))), opt)
        J = np.empty((2, 2))
        for j in range(2):
            xp = x.copy()
            xp[j] += h
            tp = evaluate_trial(model, xp[0], xp[1], opt)
            if not tp.ok:
                xp[j] -= 2 * h
                tp = evaluate_trial(model, xp[0], xp[1], opt)
                if not tp.ok:
                    raise NoConvergenceError(f"Jacobian trial failed: {tp.error}", trace)
                J[:, j] = (F - _equations(tp, m, n, opt.equations)) / h
            else:
                J[:, j] = (_equations(tp, m, n, opt.equations) - F) / h
        try:
            dx = -np.linalg.solve(J, F)
        except np.linalg.LinAlgError as exc:
            raise NoConvergenceError("singular Jacobian", trace) from exc
        # keep steps within the region where the family stays similar
        lim = max(abs(dx[0]) / 0.25, abs(dx[1]) / 0.15, 1.0)
        dx /= lim
        lam = 1.0
        norm0 = np.linalg.norm(F)
        for _ in range(8):
            xn = x + lam * dx
            tn = evaluate_trial(model, xn[0], xn[1], opt)
            if tn.ok:
                Fn = _equations(tn, m, n, opt.equations)
                if np.linalg.norm(Fn) < norm0 or lam < 1e-2:
                    break
            lam *= 0.5
        else:
            raise NoConvergenceError("line search failed", trace)
        if not tn.ok:
            raise NoConvergenceError(f"trial failed: {tn.error}", trace)
        x, trial, F = xn, tn, Fn
        trace.append((x[0], x[1], float(np.max(np.abs(F)))))
        labels.append(tuple(int(round(v)) for v in trial.nu))
        if len(labels) >= 6 and len(set(labels[-6:])) > 2:
            raise StraddlingStatesError("node counts oscillate; try another E_init", trace)
    raise NoConvergenceError(f"no convergence after {opt.max_iter} iterations", trace)


def _entry(model, trial, m, n, iterations, residual, opt):
    try:
        got = classify_nodes(trial)
    except InconsistentFamilyError:
        got = None
    if got is not None and got != (m, n):
        raise InconsistentFamilyError(f"converged to nodes {got}, expected {(m, n)}")
    nodes = np.array([n, m, n, m])
    ebk = np.array([ebk_integral(model, a, trial.E) for a in trial.caustic.arcs])
    ebk = ebk / (model.hbar * math.pi) - (nodes + 0.5)
    return SpectrumEntry(float(trial.E), m, n, trial.arc_defects, trial.nu, ebk, float(trial.s),
                         iterations, residual, trial.caustic)


@dataclass
class ScanReport:
    entries: list
    failures: list

    @property
    def converged_fraction(self) -> float:
        total = len(self.entries) + len(self.failures)
        return len(self.entries) / total if total else 1.0


def scan_spectrum(model: HamiltonianModel, E_max: float, options: SearchOptions | None = None,
                  e_tol: float = 1e-4, seed_margin: float = 0.5) -> ScanReport:
    """Converge every state seeded from the uncoupled levels.

    Coupling can pull a level below ``E_max`` whose uncoupled value lies
    above it, so seeds up to ``E_max + seed_margin`` are tried and only
    states converging to E <= E_max are kept.
    """
    opt = options or SearchOptions()
    if E_max > opt.e_bound:
        raise EnergyBoundError(f"E_max = {E_max} exceeds the bound {opt.e_bound}")
    sep = HamiltonianModel(model.omega_x, model.omega_y, 0.0, model.mass, model.hbar)
    found = {}
    failures = []
    seeds = [] if model.separable else separable_levels(sep, min(E_max + seed_margin, opt.e_bound))
    for m, n in separable_levels(sep, E_max) + [mn for mn in seeds if mn not in separable_levels(sep, E_max)]:
        E0, s0 = seed(model, m, n)
        above = E0 > E_max
        entry, errors = None, []
        for dE, ds in SEED_OFFSETS:
            try:
                entry = find_state(model, E0 + dE * model.hbar, s0 + ds, (m, n), opt)
                break
            except SearchError as exc:
                errors.append(f"{type(exc).__name__}: {exc}")
        if entry is None:
            if not above:
                failures.append({"m": m, "n": n, "error": "; ".join(errors)})
            continue
        if entry.E > E_max:
            continue
        key = (entry.m, entry.n)
        if key in found and abs(found[key].E - entry.E) > e_tol:
            failures.append({"m": m, "n": n, "error": "duplicate label with a different energy"})
            continue
        found[key] = entry
    entries = sorted(found.values(), key=lambda e: (e.E, e.m, e.n))
    return ScanReport(entries, failures)


def report_dict(model: HamiltonianModel, report: ScanReport, options: SearchOptions,
                E_max: float, oracle_values=None) -> dict:
    out = {"model": model.to_dict(), "E_max": E_max,
           "options": {k: getattr(options, k) for k in options.__dataclass_fields__},
           "states": [e.to_dict() for e in report.entries], "failures": report.failures}
    if oracle_values is not None:
        for st, ref in zip(out["states"], oracle_values):
            st["E_oracle"] = ref
    return out


def write_report(path, model, report, options, E_max, oracle_values=None):
    write_json(path, report_dict(model, report, options, E_max, oracle_values))


def write_comparison(path, entries, oracle_values):
    E = np.array([e.E for e in entries], float)
    ref = np.array(oracle_values, float)
    write_csv(path, ["E", "m", "n", "E_oracle", "abs_dE"],
              [E, np.array([e.m for e in entries]), np.array([e.n for e in entries]),
               ref, np.abs(E - ref)])
