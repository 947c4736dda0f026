"""Declarative experiment driver.

Problem configs are YAML documents with a fixed key set (unknown keys are
rejected by name); runs are reproducible functions of the config and the
seed.  Subcommands:

* ``homogenize``: solve the cell problems and export the effective tensor.
* ``solve``: run the pipeline at a single oscillation period.
* ``sweep``: the full pipeline over the configured period list, with CSV
  output, a rate-fit summary, and the linear convergence probes.
* ``probe``: the weak-convergence or gradient-integrability probe alone.

Every CSV column is documented in the JSON schema files shipped under
``homfem/schemas``; consumers should read CSVs through those schemas.
"""

from __future__ import annotations

import argparse
import csv
import importlib.resources
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field, asdict
from pathlib import Path

import numpy as np
import yaml

from .cell import homogenized_tensor, homogenized_tensor_1d, solve_cell_problems
from .coeff import HomogenizedTensor, TensorField, add_defect
from .fem import FemSpace
from .mesh import build_interval_mesh, build_periodic_cell_mesh, build_unit_square_mesh
from .nonlin import (Constant, ExpLinear, ExpressionFactor, Nonlinearity,
                     Polynomial, Rational, Sinusoid, TableFactor, Term,
                     validate)
from .norms import (fit_rate, h_convergence_probe, linf_norm, meyers_probe,
                    sinusoid_test_functions)
from .solver import (SolverConfig, approximate_solution, fixed_point_solve,
                     local_uniqueness_probe, nondegeneracy_margin,
                     solve_homogenized)

__all__ = ["ProblemConfig", "parse_config", "load_config", "run_sweep",
           "load_schema", "main"]

log = logging.getLogger("homfem")


class ConfigError(ValueError):
    """Raised for malformed or contradictory problem configs."""


# --------------------------------------------------------------------------
# config schema


_TOP_KEYS = {"domain", "system_dim", "tensor", "defect", "nonlinearity",
             "eps", "mesh", "solver", "quadrature", "probe", "seed", "output"}
_TENSOR_KEYS = {"kind", "value", "values", "grid", "entries", "triangular"}
_MESH_KEYS = {"cells_per_eps", "cell_resolution"}
_SOLVER_KEYS = {"newton_tol", "newton_max_iter", "fp_tol", "fp_max_iter",
                "delta", "mesh_ratio"}
_NONLIN_KEYS = {"p0", "terms"}
_TERM_KEYS = {"target", "g", "h", "p0"}
_PROBE_KEYS = {"modes", "p_grid", "trials", "cells_per_eps"}
_H_KEYS = {"kind", "value", "coeffs", "shift", "monomials",
           "numerator", "denominator"}


def _check_keys(section, allowed: set, where: str) -> None:
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be a mapping, got "
                          f"{type(section).__name__}")
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown config key {key!r} in {where}")


@dataclass
class ProblemConfig:
    """A fully validated experiment description with defaults filled in."""

    domain: str = "interval"
    system_dim: int = 1
    tensor: dict = dc_field(default_factory=lambda: {"kind": "constant",
                                                     "value": 1.0})
    defect: dict | None = None
    nonlinearity: dict = dc_field(default_factory=lambda: {"p0": 4.0,
                                                           "terms": []})
    eps: list = dc_field(default_factory=lambda: [0.125, 0.0625, 0.03125])
    cells_per_eps: int = 8
    cell_resolution: int = 64
    quadrature: str = "midpoint"
    solver: SolverConfig = dc_field(default_factory=SolverConfig)
    probe_modes: int = 4
    probe_p_grid: list = dc_field(default_factory=lambda: [2.0, 2.5, 3.0, 3.5, 4.0])
    probe_trials: int = 10
    probe_cells_per_eps: int = 8
    seed: int = 0
    output: str = "out"
    warnings: list = dc_field(default_factory=list)

    @property
    def dim(self) -> int:
        return 1 if self.domain == "interval" else 2

    def effective_dict(self) -> dict:
        doc = asdict(self)
        doc["solver"] = asdict(self.solver)
        return doc

    # -- builders ---------------------------------------------------------

    def build_tensor(self) -> TensorField:
        base = _build_tensor_field(self.tensor, self.system_dim, self.dim,
                                   "tensor")
        if self.defect is not None:
            dfield = _build_tensor_field(self.defect, self.system_dim,
                                         self.dim, "defect", zero_outside=True)
            # probe scale only used for the margin check; callers rescale
            return add_defect(base, dfield, epsilon=self.eps[0]).with_epsilon(None)
        return base

    def build_nonlinearity(self) -> Nonlinearity:
        spec = self.nonlinearity
        nl = Nonlinearity(self.system_dim, self.dim, [], p0=float(spec["p0"]))
        for k, term in enumerate(spec.get("terms", [])):
            where = f"nonlinearity.terms[{k}]"
            _check_keys(term, _TERM_KEYS, where)
            alpha, i = (int(v) - 1 for v in term["target"])
            g = _build_spatial_factor(term["g"], self.dim, where)
            h = _build_value_factor(term.get("h", {"kind": "constant"}),
                                    self.system_dim, where)
            nl.terms.append(Term(alpha, i, g, h,
                                 float(term.get("p0", spec["p0"]))))
        return nl

    def build_domain_space(self, eps: float) -> FemSpace:
        cells = max(2, int(round(self.cells_per_eps / eps)))
        mesh = (build_interval_mesh(cells) if self.dim == 1
                else build_unit_square_mesh(cells))
        return FemSpace(mesh, self.system_dim, quadrature=self.quadrature)

    def build_cell_mesh(self):
        return build_periodic_cell_mesh(self.cell_resolution, self.dim)


def _build_tensor_field(spec: dict, n: int, dim: int, where: str,
                        zero_outside: bool = False) -> TensorField:
    _check_keys(spec, _TENSOR_KEYS, where)
    kind = spec.get("kind")
    triangular = spec.get("triangular")
    if kind == "constant":
        return TensorField.constant(n, dim, spec["value"],
                                    triangular=triangular)
    if kind == "piecewise":
        return TensorField.piecewise(n, dim, spec["grid"], spec["values"],
                                     zero_outside=zero_outside,
                                     triangular=triangular)
    if kind == "expression":
        return TensorField.from_expressions(n, dim, spec["entries"],
                                            triangular=triangular)
    raise ConfigError(f"unknown tensor kind {kind!r} in {where}")


def _build_spatial_factor(spec, dim: int, where: str):
    if isinstance(spec, str):
        return ExpressionFactor(spec, dim)
    if isinstance(spec, (int, float)):
        return ExpressionFactor(repr(float(spec)), dim)
    if isinstance(spec, dict) and set(spec) <= {"grid", "values"}:
        return TableFactor(spec["grid"], spec["values"], dim)
    raise ConfigError(f"cannot interpret spatial factor in {where}")


def _build_value_factor(spec: dict, n: int, where: str):
    _check_keys(spec, _H_KEYS, where)
    kind = spec.get("kind", "constant")
    if kind == "constant":
        return Constant(float(spec.get("value", 1.0)), n)
    if kind == "polynomial":
        monomials = [(m["coeff"], m["powers"]) for m in spec["monomials"]]
        return Polynomial(monomials, n)
    if kind in ("sin", "cos"):
        return Sinusoid(kind, spec["coeffs"], float(spec.get("shift", 0.0)), n)
    if kind == "exp":
        return ExpLinear(spec["coeffs"], float(spec.get("shift", 0.0)), n)
    if kind == "rational":
        num = Polynomial([(m["coeff"], m["powers"])
                          for m in spec["numerator"]], n)
        den = Polynomial([(m["coeff"], m["powers"])
                          for m in spec["denominator"]], n)
        return Rational(num, den)
    raise ConfigError(f"unknown value-factor kind {kind!r} in {where}")


def parse_config(text: str) -> ProblemConfig:
    """Parse and validate a YAML problem config; defaults are filled in."""
    doc = yaml.safe_load(text)
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    _check_keys(doc, _TOP_KEYS, "top level")

    cfg = ProblemConfig()
    cfg.domain = doc.get("domain", cfg.domain)
    if cfg.domain not in ("interval", "unit-square"):
        raise ConfigError(f"unknown domain {cfg.domain!r}")
    cfg.system_dim = int(doc.get("system_dim", cfg.system_dim))

    if "tensor" in doc:
        cfg.tensor = doc["tensor"]
    _check_keys(cfg.tensor, _TENSOR_KEYS, "tensor")
    cfg.defect = doc.get("defect")
    if cfg.defect is not None:
        _check_keys(cfg.defect, _TENSOR_KEYS, "defect")

    if "nonlinearity" in doc:
        nl = doc["nonlinearity"]
        _check_keys(nl, _NONLIN_KEYS, "nonlinearity")
        if "p0" not in nl:
            nl = dict(nl, p0=4.0)
        cfg.nonlinearity = nl

    if "eps" in doc:
        cfg.eps = [float(e) for e in doc["eps"]]
    if not cfg.eps or any(e <= 0 or e > 1 for e in cfg.eps):
        raise ConfigError("eps values must lie in (0, 1]")
    if any(b >= a for a, b in zip(cfg.eps, cfg.eps[1:])):
        raise ConfigError("eps values must be strictly decreasing")

    mesh = doc.get("mesh", {})
    _check_keys(mesh, _MESH_KEYS, "mesh")
    cfg.cells_per_eps = int(mesh.get("cells_per_eps", cfg.cells_per_eps))
    cfg.cell_resolution = int(mesh.get("cell_resolution", cfg.cell_resolution))

    solver = doc.get("solver", {})
    _check_keys(solver, _SOLVER_KEYS, "solver")
    cfg.solver = SolverConfig(**solver)

    cfg.quadrature = doc.get("quadrature", cfg.quadrature)
    if cfg.quadrature not in ("midpoint", "3point"):
        raise ConfigError(f"unknown quadrature {cfg.quadrature!r}")

    probe = doc.get("probe", {})
    _check_keys(probe, _PROBE_KEYS, "probe")
    cfg.probe_modes = int(probe.get("modes", cfg.probe_modes))
    cfg.probe_p_grid = [float(p) for p in probe.get("p_grid", cfg.probe_p_grid)]
    cfg.probe_trials = int(probe.get("trials", cfg.probe_trials))
    cfg.probe_cells_per_eps = int(probe.get("cells_per_eps",
                                            cfg.probe_cells_per_eps))

    cfg.seed = int(doc.get("seed", cfg.seed))
    cfg.output = str(doc.get("output", cfg.output))

    # eager builds validate entry shapes, expressions and catalog membership
    try:
        base = cfg.build_tensor()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"invalid tensor: {exc}") from exc
    try:
        cfg.build_nonlinearity()
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"invalid nonlinearity: {exc}") from exc

    # hypothesis dichotomy: two space dimensions, or triangular coefficients
    if cfg.dim != 2 and not base.triangular:
        cfg.warnings.append(
            "neither N=2 nor triangular coefficients: existence/uniqueness "
            "guarantees do not apply; running for exploration only")
    if float(cfg.nonlinearity.get("p0", 4.0)) <= cfg.dim:
        cfg.warnings.append(
            f"nonlinearity exponent p0={cfg.nonlinearity.get('p0')} does not "
            f"exceed the space dimension {cfg.dim}")
    if cfg.cells_per_eps < cfg.solver.mesh_ratio:
        cfg.warnings.append(
            f"cells_per_eps={cfg.cells_per_eps} below the resolution rule "
            f"h <= eps/{cfg.solver.mesh_ratio:g}")
    return cfg


def load_config(path) -> ProblemConfig:
    return parse_config(Path(path).read_text())


# --------------------------------------------------------------------------
# schemas and CSV output


def load_schema(name: str) -> dict:
    """Load a CSV schema (column names, types, descriptions) by table name."""
    ref = importlib.resources.files("homfem") / "schemas" / f"{name}.json"
    return json.loads(ref.read_text())


def _write_csv(path: Path, schema_name: str, rows: list[dict]) -> None:
    schema = load_schema(schema_name)
    names = [c["name"] for c in schema["columns"]]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in rows:
            writer.writerow([_format_value(row[n]) for n in names])


def _format_value(v):
    if isinstance(v, float):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return int(v)
    return v


# --------------------------------------------------------------------------
# pipeline stages


def compute_effective_tensor(cfg: ProblemConfig):
    """Cell problems on the configured cell mesh; returns (ahat, info).

    Uses the defect-free periodic base: a localized perturbation leaves the
    effective tensor unchanged, so it never enters the cell formula.
    """
    base = cfg.build_tensor().without_defect()
    cellmesh = cfg.build_cell_mesh()
    correctors = solve_cell_problems(base, cellmesh)
    ahat = homogenized_tensor(base, correctors, cellmesh)
    info = {
        "cell_resolution": cfg.cell_resolution,
        "corrector_max_abs": correctors.max_abs,
        "corrector_mean_max": float(np.max(np.abs(correctors.means))),
        "margin": ahat.margin,
    }
    if cfg.dim == 1:
        ahat_direct = homogenized_tensor_1d(base)
        info["inverse_average_gap"] = float(
            np.max(np.abs(ahat.values - ahat_direct.values)))
    return ahat, info


def _default_probe_flux(dim: int, n: int):
    def flux(pts):
        out = np.zeros((pts.shape[0], n, dim))
        for i in range(dim):
            out[:, :, i] = pts[:, i:i + 1]
        return out
    return flux


def run_single(cfg: ProblemConfig, ahat: HomogenizedTensor, eps: float,
               return_fields: bool = False):
    """One full solve at a single oscillation period; returns a sweep row."""
    base = cfg.build_tensor()
    nl = cfg.build_nonlinearity()
    space = cfg.build_domain_space(eps)
    fields = {}
    u0, newton_report = solve_homogenized(space, ahat, nl, cfg.solver)
    row = {
        "eps": eps,
        "h": space.mesh.spacing,
        "n_cells": space.mesh.num_cells,
        "margin": np.nan,
        "ubar_err_linf": np.nan,
        "ueps_err_linf": np.nan,
        "iterations": 0,
        "max_contraction": np.nan,
        "status": "homogenized-" + newton_report.status,
    }
    if newton_report.status == "converged":
        fields["u0"] = u0
        margin = nondegeneracy_margin(space, ahat, nl, u0)
        row["margin"] = margin
        if margin <= 0:
            row["status"] = "degenerate"
        else:
            tensor_eps = base.with_epsilon(eps)
            ubar = approximate_solution(space, tensor_eps, nl, u0, cfg.solver)
            fields["ubar"] = ubar
            row["ubar_err_linf"] = linf_norm(ubar - u0)
            u_eps, fp_report = fixed_point_solve(space, tensor_eps, nl, u0,
                                                 cfg.solver, start=ubar)
            fields["ueps"] = u_eps
            row["ueps_err_linf"] = linf_norm(u_eps - u0)
            row["iterations"] = fp_report.iterations
            factors = fp_report.contraction_factors
            row["max_contraction"] = max(factors) if factors else np.nan
            row["status"] = fp_report.status
    if return_fields:
        return row, space, fields
    return row


def _solution_rows(space: FemSpace, fields: dict) -> list[dict]:
    coords = space.mesh.vertices[space.indep_vertices]
    nodal = {k: f.nodal_matrix() for k, f in fields.items()}
    rows = []
    for slot, v in enumerate(space.indep_vertices):
        for comp in range(space.n):
            rows.append({
                "vertex": int(v), "component": comp,
                "x1": float(coords[slot, 0]),
                "x2": float(coords[slot, 1]) if space.mesh.dim == 2 else np.nan,
                "u0": float(nodal["u0"][slot, comp]) if "u0" in nodal else np.nan,
                "ubar": float(nodal["ubar"][slot, comp]) if "ubar" in nodal else np.nan,
                "ueps": float(nodal["ueps"][slot, comp]) if "ueps" in nodal else np.nan,
            })
    return rows


def _guarded_run(cfg: ProblemConfig, ahat: HomogenizedTensor, eps: float) -> dict:
    """run_single, but any stage failure lands in the row and the sweep
    continues."""
    try:
        return run_single(cfg, ahat, eps)
    except Exception as exc:  # noqa: BLE001 - recorded, not swallowed silently
        log.warning("solve at eps=%g failed: %s", eps, exc)
        return {"eps": eps, "h": np.nan, "n_cells": 0, "margin": np.nan,
                "ubar_err_linf": np.nan, "ueps_err_linf": np.nan,
                "iterations": 0, "max_contraction": np.nan,
                "status": f"error-{type(exc).__name__}"}


def run_sweep(cfg: ProblemConfig, out_dir=None, threads: int = 1) -> dict:
    """The full pipeline over the configured period list.

    Writes ``ahat.json``, ``sweep.csv``, ``hconv.csv``, ``meyers.csv`` and
    ``summary.json`` into the output directory and returns the summary.
    Deterministic for a fixed config and seed; per-period failures are
    recorded in their row and the sweep continues.
    """
    out = Path(out_dir if out_dir is not None else cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    _setup_logging(out / "run.log")
    for w in cfg.warnings:
        log.warning(w)
    log.info("effective config: %s",
             json.dumps(cfg.effective_dict(), sort_keys=True))

    validation = validate(cfg.build_nonlinearity(), cfg.dim)
    if not validation.passed:
        log.warning("nonlinearity validation failed: %s",
                    validation.reason or "see term reports")

    ahat, cell_info = compute_effective_tensor(cfg)
    (out / "ahat.json").write_text(ahat.to_json())
    log.info("effective tensor computed: %s", json.dumps(cell_info))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda e: _guarded_run(cfg, ahat, e),
                                 cfg.eps))
    else:
        rows = [_guarded_run(cfg, ahat, e) for e in cfg.eps]
    _write_csv(out / "sweep.csv", "sweep", rows)
    for row in rows:
        log.info("sweep row: %s", json.dumps(row, default=repr))

    summary = {"cell": cell_info, "rows": len(rows)}
    summary["nonlinearity_validation"] = {
        "passed": validation.passed,
        "terms": [{"target": [t.alpha + 1, t.i + 1], "source": t.source,
                   "integral_estimate": t.integral_estimate,
                   "passed": t.passed} for t in validation.terms],
    }
    fit_points = [(r["eps"], r["ueps_err_linf"]) for r in rows
                  if r["status"] == "converged" and r["ueps_err_linf"] > 0]
    if len(fit_points) >= 2:
        slope, intercept = fit_rate(fit_points)
        summary["rate"] = {"slope": slope, "intercept": intercept}

    base = cfg.build_tensor()
    flux = _default_probe_flux(cfg.dim, cfg.system_dim)
    hrows = h_convergence_probe(
        base, ahat, flux, cfg.eps,
        test_functions=sinusoid_test_functions(cfg.dim, cfg.probe_modes),
        cells_per_eps=cfg.probe_cells_per_eps)
    _write_csv(out / "hconv.csv", "hconv", [{
        "eps": r.eps, "h": r.h, "n_cells": r.n_cells,
        "pairing_max": float(r.pairings.max()),
        "flux_pairing_max": float(r.flux_pairings.max()),
        "linf_diff": r.linf_diff, "grad_l2_diff": r.grad_l2_diff,
    } for r in hrows])

    mtable = meyers_probe(base, flux, cfg.eps, cfg.probe_p_grid,
                          cells_per_eps=cfg.probe_cells_per_eps)
    _write_csv(out / "meyers.csv", "meyers", [
        {"eps": e, "p": p, "grad_lp": float(mtable.norms[r, c])}
        for r, e in enumerate(mtable.eps_list)
        for c, p in enumerate(mtable.p_grid)])
    summary["meyers_observed_range"] = mtable.observed_range

    converged = [r for r in rows if r["status"] == "converged"]
    if converged:
        eps_star = converged[-1]["eps"]
        nl = cfg.build_nonlinearity()
        space = cfg.build_domain_space(eps_star)
        u0, _ = solve_homogenized(space, ahat, nl, cfg.solver)
        probe = local_uniqueness_probe(
            space, base.with_epsilon(eps_star), nl, u0, cfg.solver,
            trials=cfg.probe_trials, seed=cfg.seed)
        summary["uniqueness"] = {
            "eps": eps_star,
            "all_same": probe.all_same,
            "outside_ball": probe.outside_ball,
            "max_distance": max(probe.distances),
            "statuses": probe.statuses,
        }
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True, default=repr))
    log.info("summary: %s", json.dumps(summary, sort_keys=True, default=repr))
    return summary


def _setup_logging(logfile: Path) -> None:
    log.setLevel(logging.INFO)
    log.handlers.clear()
    fmt = logging.Formatter("%(levelname)s %(message)s")
    fh = logging.FileHandler(logfile, mode="w")
    fh.setFormatter(fmt)
    sh = logging.StreamHandler(sys.stderr)
    sh.setFormatter(fmt)
    log.addHandler(fh)
    log.addHandler(sh)


# --------------------------------------------------------------------------
# entry point


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="YAML problem config")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the seed")
    p.add_argument("--threads", type=int, default=1)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="homfem",
        description="periodic homogenization toolkit for semilinear "
                    "divergence-form systems")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("homogenize", "solve", "sweep", "probe"):
        p = sub.add_parser(name)
        _add_common(p)
        if name == "solve":
            p.add_argument("--eps", type=float, default=None,
                           help="oscillation period (default: first in config)")
        if name == "probe":
            p.add_argument("--kind", choices=("hconv", "meyers"),
                           default="hconv")
    args = parser.parse_args(argv)

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out = Path(args.out if args.out is not None else cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    _setup_logging(out / "run.log")
    for w in cfg.warnings:
        log.warning(w)

    if args.command == "homogenize":
        ahat, info = compute_effective_tensor(cfg)
        (out / "ahat.json").write_text(ahat.to_json())
        log.info("wrote %s: %s", out / "ahat.json", json.dumps(info))
    elif args.command == "solve":
        eps = args.eps if args.eps is not None else cfg.eps[0]
        ahat, _ = compute_effective_tensor(cfg)
        row, space, fields = run_single(cfg, ahat, eps, return_fields=True)
        (out / "solve.json").write_text(
            json.dumps(row, indent=2, sort_keys=True, default=repr))
        _write_csv(out / "solution.csv", "solution",
                   _solution_rows(space, fields))
        log.info("solve row: %s", json.dumps(row, default=repr))
    elif args.command == "sweep":
        run_sweep(cfg, out, threads=args.threads)
    elif args.command == "probe":
        ahat, _ = compute_effective_tensor(cfg)
        base = cfg.build_tensor()
        flux = _default_probe_flux(cfg.dim, cfg.system_dim)
        if args.kind == "hconv":
            hrows = h_convergence_probe(
                base, ahat, flux, cfg.eps,
                test_functions=sinusoid_test_functions(cfg.dim, cfg.probe_modes),
                cells_per_eps=cfg.probe_cells_per_eps)
            _write_csv(out / "hconv.csv", "hconv", [{
                "eps": r.eps, "h": r.h, "n_cells": r.n_cells,
                "pairing_max": float(r.pairings.max()),
                "flux_pairing_max": float(r.flux_pairings.max()),
                "linf_diff": r.linf_diff, "grad_l2_diff": r.grad_l2_diff,
            } for r in hrows])
        else:
            mtable = meyers_probe(base, flux, cfg.eps, cfg.probe_p_grid,
                                  cells_per_eps=cfg.probe_cells_per_eps)
            _write_csv(out / "meyers.csv", "meyers", [
                {"eps": e, "p": p, "grad_lp": float(mtable.norms[r, c])}
                for r, e in enumerate(mtable.eps_list)
                for c, p in enumerate(mtable.p_grid)])
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
