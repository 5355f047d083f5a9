"""Batch front end: `qc-semilinear --config run.ini [--override section.key=value]`."""

from __future__ import annotations

import argparse
import os

import numpy as np
from pydantic import ValidationError

from qc_semilinear.beltrami import (
    BeltramiField,
    MatrixField,
    beltrami_residual,
    invert_map,
    jacobian_inverse,
    matrix_to_mu,
    solve_beltrami_disk,
)
from qc_semilinear.config import (
    RunConfig,
    build_boundary,
    build_domain,
    build_matrix,
    build_multiplier,
    build_nonlinearity,
    load_config,
    output_root,
    write_config,
)
from qc_semilinear.errors import ConfigError, ConvergenceError, DomainError, SolverError, VerificationError
from qc_semilinear.fileio import (
    read_beltrami_field,
    read_distances,
    read_matrix_field,
    read_radial_profile,
    read_report,
    read_scalar_field,
    write_beltrami_field,
    write_distances,
    write_inverse_map,
    write_map,
    write_matrix_field,
    write_radial_profile,
    write_report,
    write_scalar_field,
    write_tau_trace,
)
from qc_semilinear.geometry import estimate_qhb_constants
from qc_semilinear.logging import logger
from qc_semilinear.oracles import radial_shoot, radial_stretch_reference
from qc_semilinear.potential import laplacian_residual
from qc_semilinear.semilinear import solve_quasilinear_disk, solve_semilinear

modes = {}


def mode(description, artifacts):
    def decorator(func):
        modes[func.__name__.replace("_", "-")] = {
            "description": description,
            "artifacts": artifacts,
            "run": func,
        }
        return func

    return decorator


def initialize_output_directory(directory_format):
    run_id = 1
    while os.path.exists(directory_format(run_id)):
        run_id += 1
    os.makedirs(directory_format(run_id), exist_ok=True)
    return directory_format(run_id)


def _closed_form_map(config: RunConfig, domain):
    if config.matrix.kind != "radial_stretch" or not config.matrix.closed_form:
        return None
    if config.domain.kind != "disk" or config.domain.radius != 1.0:
        raise ConfigError("the closed-form radial stretch map needs the unit disk domain")
    ref = radial_stretch_reference(config.matrix.K)
    return ref.qc_map(config.beltrami.grid_size, config.beltrami.boundary_samples)


def _write_solve(out, U, report, kind):
    write_scalar_field(os.path.join(out, "U.csv"), U)
    write_scalar_field(os.path.join(out, "rhs.csv"), report.density)
    write_tau_trace(os.path.join(out, "tau_trace.csv"), report.tau_trace)
    write_report(os.path.join(out, "report.txt"), kind, report.summary())


def _write_profile(out, U, f, config: RunConfig):
    """Radial reference profile.csv when h and the boundary data are constant."""
    try:
        profile = radial_shoot(f, config.multiplier.value, config.boundary.value)
    except (ConvergenceError, DomainError) as e:
        logger.log(f"no radial profile: {e}", "yellow")
        return
    write_radial_profile(os.path.join(out, "profile.csv"), profile)
    error = float(np.max(np.abs(U.values - profile(np.abs(U.grid.points)))))
    logger.log(f"deviation from the radial profile: {error:.3e}", "gray")


@mode("Semi-linear problem on the unit disk", ["U.csv", "rhs.csv", "report.txt", "tau_trace.csv"])
def solve_disk(config: RunConfig, out):
    if not config.boundary.on_circle:
        raise ConfigError("solve-disk needs boundary data on the circle")
    grid = config.grid.disk_grid()
    h = build_multiplier(config.multiplier, grid)
    phi = build_boundary(config.boundary)
    f = build_nonlinearity(config.nonlinearity)
    U, report = solve_quasilinear_disk(h, phi, f, config.solver)
    _write_solve(out, U, report, "solve-report")
    if config.boundary.kind == "constant":
        _write_profile(out, U, f, config)


@mode(
    "Semi-linear problem on a Jordan domain",
    ["u.csv", "omega.csv", "jacobian.csv", "U.csv", "rhs.csv", "report.txt", "tau_trace.csv"],
)
def solve_domain(config: RunConfig, out):
    domain = build_domain(config.domain)
    A = build_matrix(config.matrix)
    phi = build_boundary(config.boundary)
    f = build_nonlinearity(config.nonlinearity)
    u, report = solve_semilinear(
        domain, A, phi, f, config.solver, config.beltrami, config.grid.disk_grid(),
        build_multiplier(config.multiplier), _closed_form_map(config, domain),
    )
    write_scalar_field(os.path.join(out, "u.csv"), u.as_field())
    write_map(os.path.join(out, "omega.csv"), u.qc_map)
    write_scalar_field(os.path.join(out, "jacobian.csv"), jacobian_inverse(u.qc_map, report.p_used))
    _write_solve(out, u.disk_solution.field, report, "solve-report")


@mode(
    "Quasiconformal map of the coefficient field",
    ["omega.csv", "omega_inverse.csv", "jacobian.csv", "A.csv", "mu.csv", "beltrami.txt"],
)
def beltrami_map(config: RunConfig, out):
    domain = build_domain(config.domain)
    A = build_matrix(config.matrix)
    mu = matrix_to_mu(A)
    qc_map = _closed_form_map(config, domain)
    summary = {"closed_form": qc_map is not None}
    if qc_map is None:
        qc_map = solve_beltrami_disk(mu, domain, config.beltrami)
        summary["beltrami_residual"] = beltrami_residual(qc_map, mu)
    qc_map = invert_map(qc_map, config.grid.disk_grid(), config.beltrami)
    J = jacobian_inverse(qc_map, config.solver.p)
    summary["jacobian_lp_norm"] = J.diagnostics["lp_norm"]
    summary["p"] = config.solver.p
    write_map(os.path.join(out, "omega.csv"), qc_map)
    write_inverse_map(os.path.join(out, "omega_inverse.csv"), qc_map)
    pts = qc_map.grid.points[qc_map.inside]
    write_matrix_field(os.path.join(out, "A.csv"), MatrixField(pts, *A.at(pts), A.K))
    write_beltrami_field(os.path.join(out, "mu.csv"), BeltramiField(pts, mu.at(pts), mu.k_bound))
    write_scalar_field(os.path.join(out, "jacobian.csv"), J)
    write_report(os.path.join(out, "beltrami.txt"), "beltrami-report", summary)


@mode("Quasihyperbolic boundary condition fit", ["distances.csv", "qhb.txt"])
def qhyp(config: RunConfig, out):
    domain = build_domain(config.domain)
    opts = config.qhyp
    estimate = estimate_qhb_constants(
        domain, opts.z0, opts.sample_count, opts.resolution, opts.seed, opts.stencil
    )
    write_distances(os.path.join(out, "distances.csv"), estimate)
    write_report(
        os.path.join(out, "qhb.txt"),
        "qhb-estimate",
        {
            "a": estimate.a,
            "b": estimate.b,
            "max_residual": estimate.max_residual,
            "z0_re": estimate.z0.real,
            "z0_im": estimate.z0.imag,
            "samples": int(estimate.samples.size),
        },
    )


def _check_laplacian(directory, tol):
    U = read_scalar_field(os.path.join(directory, "U.csv"))
    rhs = read_scalar_field(os.path.join(directory, "rhs.csv"))
    try:
        residual = laplacian_residual(U, rhs)
    except DomainError as e:
        logger.log(f"laplacian check skipped: {e}", "yellow")
        return None
    return residual / max(1.0, rhs.sup_norm()), tol


def _check_jacobian(directory, stored: RunConfig, tol):
    J = read_scalar_field(os.path.join(directory, "jacobian.csv"))
    w = J.grid.points
    ring = (np.abs(w) >= 0.2) & (np.abs(w) <= 0.8)
    exact = radial_stretch_reference(stored.matrix.K).jacobian(w)
    return float(np.max(np.abs(J.values[ring] / exact[ring] - 1))), tol


def _check_profile(directory, tol):
    U = read_scalar_field(os.path.join(directory, "U.csv"))
    profile = read_radial_profile(os.path.join(directory, "profile.csv"))
    return float(np.max(np.abs(U.values - profile(np.abs(U.grid.points))))), tol


def _check_dilatation(directory):
    A = read_matrix_field(os.path.join(directory, "A.csv"))
    mu = read_beltrami_field(os.path.join(directory, "mu.csv"))
    return float(np.max(np.abs(matrix_to_mu(A).mu - mu.mu), initial=0.0)), 1e-8


def _check_qhb(directory):
    report = read_report(os.path.join(directory, "qhb.txt"))
    data, _ = read_distances(os.path.join(directory, "distances.csv"))
    excess = data[:, 2] - report["a"] * data[:, 3] - report["b"] - report["max_residual"]
    return max(0.0, float(np.max(excess))), 1e-9


@mode("Re-check stored artifacts", ["verify.txt"])
def verify(config: RunConfig, out):
    directory = config.verify.directory
    stored_path = os.path.join(directory, "config.ini")
    if not os.path.isfile(stored_path):
        raise ConfigError(f"no config.ini in {directory}")
    stored = load_config(stored_path)
    present = set(os.listdir(directory))
    checks = {}

    if "report.txt" in present:
        converged = read_report(os.path.join(directory, "report.txt")).get("converged") is True
        checks["converged"] = (0.0 if converged else 1.0, 0.5)
    if {"U.csv", "rhs.csv"} <= present:
        result = _check_laplacian(directory, config.verify.residual_tol)
        if result is not None:
            checks["laplacian_residual"] = result
    if {"U.csv", "profile.csv"} <= present:
        checks["profile_error"] = _check_profile(directory, config.verify.profile_tol)
    if "jacobian.csv" in present and stored.matrix.kind == "radial_stretch":
        checks["jacobian_error"] = _check_jacobian(directory, stored, config.verify.jacobian_tol)
    if {"A.csv", "mu.csv"} <= present:
        checks["dilatation_error"] = _check_dilatation(directory)
    if {"qhb.txt", "distances.csv"} <= present:
        checks["qhb_excess"] = _check_qhb(directory)
    if not checks:
        raise VerificationError(f"nothing to verify in {directory}")

    failed = []
    summary = {}
    for name, (value, tol) in checks.items():
        summary[name] = value
        summary[f"{name}_tol"] = tol
        if not value <= tol:
            failed.append(name)
        logger.log(f"verify {name}: {value:.3e} (tolerance {tol:g})", "red" if name in failed else "green")
    summary["passed"] = not failed
    write_report(os.path.join(out, "verify.txt"), "verify-report", summary)
    if failed:
        raise VerificationError(f"verification failed: {', '.join(failed)}")


def run(config: RunConfig, out):
    """Run one mode and write its artifacts and the effective config into out."""
    os.makedirs(out, exist_ok=True)
    logger.logs.clear()
    logger.log_file = os.path.join(out, "run.log")
    write_config(config, os.path.join(out, "config.ini"))
    logger.log(f"{config.mode}: {modes[config.mode]['description']} -> {out}", "blue")
    modes[config.mode]["run"](config, out)
    logger.log(f"{config.mode} finished", "green")


def main(argv=None):
    parser = argparse.ArgumentParser(prog="qc-semilinear", description=__doc__)
    parser.add_argument("--config", type=str, help="INI run configuration")
    parser.add_argument("--out", type=str, help="Output directory (default: a new run_<n>)")
    parser.add_argument(
        "--override", action="append", default=[], help="section.key=value, repeatable"
    )
    parser.add_argument("--seed", type=int, help="Seed for random trial densities and test functions")
    args = parser.parse_args(argv)

    logger.log_file = None
    try:
        config = load_config(args.config, args.override, args.seed)
        out = args.out or initialize_output_directory(
            lambda id: os.path.join(output_root(), f"run_{id}")
        )
        run(config, out)
    except ValidationError as e:
        logger.log(f"invalid configuration: {e}", "red")
        return 1
    except SolverError as e:
        logger.log(f"{type(e).__name__}: {e}", "red")
        return e.exit_code
    return 0
