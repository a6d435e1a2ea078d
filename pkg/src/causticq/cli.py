"""Command-line front end.

Every subcommand validates its configuration, computes all results in
memory and only then writes files, so a failing run leaves no partial
output behind.

Exit codes: 0 success, 2 configuration error, 3 convergence failure,
4 numerical or pipeline error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import oracle as _oracle
from .arc1d import ArcError, build_arc_problem, solve_arc
from .caustic import CausticError, arc_coverage, build_caustic
from .classical import ClassicalError, caustic_cloud
from .eigensolver import (SEED_OFFSETS, SearchError, SearchOptions, find_state,
                          report_dict, scan_spectrum, seed, write_comparison)
from .io import dumps, write_csv
from .model import BARBANIS, HamiltonianModel, ModelError, corner_angle

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_NUMERICAL = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    model: HamiltonianModel = BARBANIS
    options: SearchOptions = field(default_factory=SearchOptions)
    n_max: int = 30
    out: Path = Path(".")
    energy: float | None = None
    e_max: float | None = None
    state: tuple | None = None
    arc: int = 3
    surface_points: int = 101

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(),
                "options": {f.name: getattr(self.options, f.name) for f in fields(self.options)},
                "n_max": self.n_max, "energy": self.energy, "e_max": self.e_max,
                "state": list(self.state) if self.state else None, "arc": self.arc,
                "surface_points": self.surface_points}


_OPTION_KEYS = {f.name for f in fields(SearchOptions)}
_TOP_KEYS = {"model", "options", "n_max", "energy", "e_max", "state", "arc", "surface_points"}


def _parse_state(text):
    try:
        m, n = (int(v) for v in str(text).split(","))
    except ValueError as exc:
        raise ConfigError(f"state must be 'M,N', got {text!r}") from exc
    if m < 0 or n < 0:
        raise ConfigError("quantum numbers must be non-negative")
    return m, n


def load_config(args) -> RunConfig:
    """Merge the JSON config file (if any) with command-line overrides."""
    data = {}
    if args.config is not None:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        model = HamiltonianModel.from_dict(data["model"]) if "model" in data else BARBANIS
        if args.hbar is not None:
            model = model.with_hbar(args.hbar)
        opts = dict(data.get("options", {}))
        bad = set(opts) - _OPTION_KEYS
        if bad:
            raise ConfigError(f"unknown option keys: {sorted(bad)}")
        if args.grid is not None:
            opts["n_grid"] = args.grid
        options = SearchOptions(**opts)
    except (ModelError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    cfg = RunConfig(model=model, options=options, out=Path(args.out))
    cfg.n_max = int(data.get("n_max", 30))
    cfg.energy = args.energy if args.energy is not None else data.get("energy")
    cfg.e_max = args.e_max if args.e_max is not None else data.get("e_max")
    st = args.state if args.state is not None else data.get("state")
    if isinstance(st, list):
        st = ",".join(map(str, st))
    cfg.state = _parse_state(st) if st is not None else None
    cfg.arc = int(args.arc if args.arc is not None else data.get("arc", 3))
    cfg.surface_points = int(data.get("surface_points", 101))
    if cfg.n_max < 0:
        raise ConfigError("n_max must be non-negative")
    if cfg.arc not in (1, 2, 3, 4):
        raise ConfigError("arc index must be 1..4")
    if cfg.surface_points < 3:
        raise ConfigError("surface_points must be at least 3")
    for name in ("energy", "e_max"):
        v = getattr(cfg, name)
        if v is not None and not (np.isfinite(v) and v > 0):
            raise ConfigError(f"{name} must be positive")
    _check_out(cfg.out)
    return cfg


def _check_out(out: Path):
    probe = out
    while not probe.exists():
        probe = probe.parent
    if not probe.is_dir() or not os.access(probe, os.W_OK):
        raise ConfigError(f"output directory is not writable: {out}")


def _require(cfg, *names):
    for name in names:
        if getattr(cfg, name) is None:
            raise ConfigError(f"--{name.replace('_', '-')} is required for this command")


# Each command returns (filename, writer) pairs, optionally with an exit code;
# main() writes them.

def _text(s):
    return lambda p: Path(p).write_text(s)


def cmd_trace(cfg: RunConfig):
    _require(cfg, "energy")
    m, n = cfg.state or (2, 2)
    sep = HamiltonianModel(cfg.model.omega_x, cfg.model.omega_y, 0.0, cfg.model.mass,
                           cfg.model.hbar)
    angle = corner_angle(sep, m, n, "upper-left")
    opt = cfg.options
    # same adaptive length as the search, so the arcs are covered
    t_max = opt.t_max
    while True:
        traj, cloud = caustic_cloud(cfg.model, cfg.energy, angle, t_max=t_max, step=opt.step)
        if t_max >= opt.max_t_factor * opt.t_max or arc_coverage(cloud) >= opt.coverage:
            break
        t_max *= 2.0
    caustic = build_caustic(cloud, cfg.model)
    rows = []
    for arc in caustic.arcs:
        a, b = arc.domain
        t = np.linspace(a, b, 201)
        x, y = arc.point(t)
        rows.append((np.full(t.size, arc.index), x, y))
    k = np.concatenate([r[0] for r in rows])
    x = np.concatenate([r[1] for r in rows])
    y = np.concatenate([r[2] for r in rows])
    doc = {"config": cfg.to_dict(), "angle": angle, "caustic": caustic.to_dict()}
    return [("trajectory.csv", traj.to_csv),
            ("caustic_points.csv", cloud.to_csv),
            ("caustic_arcs.csv", lambda p: write_csv(p, ["arc", "x", "y"], [k, x, y])),
            ("caustic.json", _text(dumps(doc)))]


def _oracle_values(result, entries):
    out = []
    for e in entries:
        try:
            out.append(float(result.eigenvalues[result.index_of(e.m, e.n)]))
        except ValueError:
            out.append(float("nan"))
    return out


def cmd_spectrum(cfg: RunConfig):
    _require(cfg, "e_max")
    report = scan_spectrum(cfg.model, cfg.e_max, cfg.options)
    ref = _oracle.solve(cfg.model, cfg.n_max)
    values = _oracle_values(ref, report.entries)
    doc = report_dict(cfg.model, report, cfg.options, cfg.e_max, values)
    doc["config"] = cfg.to_dict()
    doc["converged_fraction"] = report.converged_fraction
    files = [("spectrum.json", _text(dumps(doc))),
             ("comparison.csv", lambda p: write_comparison(p, report.entries, values))]
    if report.converged_fraction < 0.9:
        # the report is still written; it lists the failed seeds
        print(f"causticq: only {report.converged_fraction:.0%} of seeds converged",
              file=sys.stderr)
        return files, EXIT_CONVERGENCE
    return files


def converge_state(model, m, n, options):
    """find_state from the uncoupled seed, trying the standard fallbacks."""
    E0, s0 = seed(model, m, n)
    last = None
    for dE, ds in SEED_OFFSETS:
        try:
            return find_state(model, E0 + dE * model.hbar, s0 + ds, (m, n), options)
        except SearchError as exc:
            last = exc
    raise last


def cmd_arc(cfg: RunConfig):
    _require(cfg, "state")
    m, n = cfg.state
    entry = converge_state(cfg.model, m, n, cfg.options)
    arc = entry.caustic.arc(cfg.arc)
    prob = build_arc_problem(cfg.model, arc, entry.E, cfg.options.n_grid)
    sol = solve_arc(prob)
    psi = sol.psi_matched / np.max(np.abs(sol.psi_matched))
    ref = _oracle.solve(cfg.model, cfg.n_max)
    try:
        k = ref.index_of(m, n)
    except ValueError as exc:
        raise ConfigError(f"state {(m, n)} not resolved by the oracle basis") from exc
    psi_o = _oracle.restrict_to_arc(ref, k, arc, prob.grid)
    if np.dot(psi, psi_o) < 0:
        psi_o = -psi_o
    cols = [prob.grid, prob.U_k, prob.g, psi, psi_o, sol.X, sol.Y]
    head = ["parameter", "U_k", "g", "psi", "psi_oracle", "X", "Y"]
    doc = {"config": cfg.to_dict(), "state": entry.to_dict(), "E_oracle": float(ref.eigenvalues[k]),
           "arc": cfg.arc, "turning_points": list(prob.turning_points),
           "nodes": sol.nodes, "deltaX": sol.deltaX, "defect": sol.defect}
    return [(f"arc{cfg.arc}.csv", lambda p: write_csv(p, head, cols)),
            (f"arc{cfg.arc}.json", _text(dumps(doc)))]


def cmd_action_surface(cfg: RunConfig):
    _require(cfg, "state")
    if not cfg.model.separable:
        raise ConfigError("action surfaces are only available for lambda = 0; "
                          "the interior action of a coupled system is not computed")
    m, n = cfg.state
    npts = cfg.surface_points
    surf = _oracle.separable_action_surface(cfg.model, m, n, npts, npts,
                                            n_grid=max(cfg.options.n_grid, 4000))
    xx, yy = np.meshgrid(surf.x, surf.y)
    xs, ys = xx.ravel(), yy.ravel()
    return [("surface_X.csv", lambda p: write_csv(p, ["x", "y", "X"], [xs, ys, surf.X.ravel()])),
            ("surface_W.csv", lambda p: write_csv(p, ["x", "y", "W"], [xs, ys, surf.W.ravel()]))]


def cmd_oracle(cfg: RunConfig):
    ref = _oracle.solve(cfg.model, cfg.n_max)
    count = len(ref.eigenvalues)
    if cfg.e_max is not None:
        count = int(np.searchsorted(ref.eigenvalues, cfg.e_max, side="right"))
    doc = ref.to_dict(count)
    doc["config"] = cfg.to_dict()
    return [("oracle.json", _text(dumps(doc)))]


COMMANDS = {"trace": cmd_trace, "spectrum": cmd_spectrum, "arc": cmd_arc,
            "action-surface": cmd_action_surface, "oracle": cmd_oracle}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="causticq", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON file with model, options and command settings")
    ap.add_argument("--energy", type=float)
    ap.add_argument("--e-max", type=float, dest="e_max")
    ap.add_argument("--state", help="quantum numbers M,N")
    ap.add_argument("--arc", type=int)
    ap.add_argument("--out", default=".")
    ap.add_argument("--grid", type=int, help="arc grid size")
    ap.add_argument("--hbar", type=float)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = load_config(args)
        files = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"causticq: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SearchError as exc:
        print(f"causticq: convergence failure: {exc}", file=sys.stderr)
        for row in getattr(exc, "trace", []) or []:
            print(f"  {row}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ClassicalError, CausticError, ArcError, ModelError, ArithmeticError,
            np.linalg.LinAlgError, ValueError) as exc:
        print(f"causticq: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    code = EXIT_OK
    if isinstance(files, tuple):
        files, code = files
    cfg.out.mkdir(parents=True, exist_ok=True)
    for name, writer in files:
        writer(cfg.out / name)
    return code


if __name__ == "__main__":
    sys.exit(main())
