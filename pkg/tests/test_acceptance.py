"""End-to-end checks against closed forms, radial shooting and the CLI."""

from pathlib import Path

import numpy as np
import pytest

from qc_semilinear.beltrami import (
    BeltramiField,
    BeltramiOptions,
    ellipticity_check,
    invert_map,
    jacobian_inverse,
    matrix_to_mu,
    mu_to_matrix,
    solve_beltrami_disk,
)
from qc_semilinear.cli import main
from qc_semilinear.geometry import DiskGrid, estimate_qhb_constants, quasihyperbolic_distance, unit_disk
from qc_semilinear.oracles import radial_shoot, radial_stretch_reference
from qc_semilinear.potential import (
    BoundaryData,
    ScalarField,
    boundary_trace,
    measure_potential_constant,
    newtonian_potential,
    prop2_density,
    random_smooth_density,
    solve_poisson_dirichlet,
)
from qc_semilinear.semilinear import (
    ContinuationOptions,
    detect_dead_core,
    make_constant,
    make_exponential,
    make_power,
    solve_quasilinear_disk,
    solve_semilinear,
)

pytestmark = pytest.mark.slow

CONFIGS = Path(__file__).parent.parent / "configs"


def ones(grid):
    return ScalarField(grid, np.ones(grid.shape))


def test_linear_poisson_oracle():
    grid = DiskGrid(128, 128)
    U = solve_poisson_dirichlet(ones(grid), BoundaryData(np.zeros(128)))
    assert np.max(np.abs(U.values - (np.abs(grid.points) ** 2 - 1) / 4)) <= 1e-3


def test_dual_representation_on_random_densities():
    grid = DiskGrid(128, 128)
    rng = np.random.default_rng(2)
    phi = BoundaryData.from_function(lambda t: np.cos(2 * t), 128)
    for _ in range(10):
        U = solve_poisson_dirichlet(random_smooth_density(grid, rng), phi, check=False)
        assert U.diagnostics["representation_gap"] <= 1e-3


def test_integrable_density_with_unbounded_potential():
    grid = DiskGrid(256, 16)
    assert prop2_density(1.5, grid).lp_norm(1) == pytest.approx(4 * np.pi, rel=0.05)
    centers = [newtonian_potential(prop2_density(1.5, DiskGrid(n, 16)), 0j) for n in (16, 32, 64, 128, 256)]
    assert all(a > b for a, b in zip(centers, centers[1:]))


def test_potential_constant_is_never_exceeded():
    grid = DiskGrid(32, 64)
    M = measure_potential_constant(grid, 2.0, 32, 0)
    rng = np.random.default_rng(7)
    for _ in range(100):
        g = random_smooth_density(grid, rng)
        sup = max(newtonian_potential(g).sup_norm(), boundary_trace(g).sup_norm())
        assert sup / g.lp_norm(2) <= M


def test_beltrami_recovers_the_radial_stretch():
    ref = radial_stretch_reference(2.0)
    qc_map = solve_beltrami_disk(ref.mu, unit_disk(), BeltramiOptions(grid_size=256))
    z = qc_map.grid.points
    near = qc_map.inside & (np.abs(z) <= 0.9)
    assert np.max(np.abs(qc_map.values[near] - ref.omega(z[near]))) <= 2e-2

    qc_map = invert_map(qc_map, DiskGrid(64, 128))
    J = jacobian_inverse(qc_map)
    w = qc_map.inverse_grid.points
    ring = (np.abs(w) >= 0.2) & (np.abs(w) <= 0.9)
    np.testing.assert_allclose(J.values[ring], ref.jacobian(w[ring]), rtol=5e-2)


def test_beltrami_recovers_the_stronger_stretch():
    ref = radial_stretch_reference(3.0)
    qc_map = solve_beltrami_disk(ref.mu, unit_disk(), BeltramiOptions(grid_size=256))
    z = qc_map.grid.points
    near = qc_map.inside & (np.abs(z) <= 0.9)
    assert np.max(np.abs(qc_map.values[near] - z[near] * np.abs(z[near]) ** 2)) <= 2e-2


def test_closed_form_jacobian_on_the_full_ring():
    ref = radial_stretch_reference(2.0)
    qc_map = invert_map(ref.qc_map(grid_size=64), DiskGrid(128, 128))
    J = jacobian_inverse(qc_map)
    w = qc_map.inverse_grid.points
    ring = (np.abs(w) >= 0.05) & (np.abs(w) <= 0.95)
    np.testing.assert_allclose(J.values[ring], 0.5 / np.abs(w[ring]), rtol=1e-2)


def test_matrix_dilatation_round_trip():
    rng = np.random.default_rng(3)
    for _ in range(100):
        points = rng.normal(size=32) + 1j * rng.normal(size=32)
        k = 0.9 * np.sqrt(rng.uniform(size=32))
        mu = BeltramiField(points, k * np.exp(2j * np.pi * rng.uniform(size=32)), 0.9)
        A = mu_to_matrix(mu)
        back = mu_to_matrix(matrix_to_mu(A))
        for original, again in zip((A.a11, A.a12, A.a22), (back.a11, back.a12, back.a22)):
            np.testing.assert_allclose(again, original, rtol=0, atol=1e-12 * np.max(np.abs(original)) + 1e-12)
        assert ellipticity_check(A, det_tol=1e-12).det_error <= 1e-12


def test_quasilinear_solve_matches_shooting():
    grid = DiskGrid(64, 128)
    f = make_power(0.5)
    U, report = solve_quasilinear_disk(ones(grid), BoundaryData(np.ones(256)), f)
    profile = radial_shoot(f, 1.0, 1.0)
    assert report.converged
    assert np.max(np.abs(U.values - profile(np.abs(grid.points)))) <= 1e-2
    assert report.final_g_norm <= report.apriori_bound


def test_factorization_is_independent_of_the_rotation():
    ref = radial_stretch_reference(2.0)
    phi = BoundaryData.from_function(np.cos, 256, on_circle=False)
    common = dict(disk_grid=DiskGrid(32, 128), qc_map=ref.qc_map(128))
    u, report = solve_semilinear(unit_disk(), ref.matrix(), phi, make_constant(0.0), **common)
    turned, _ = solve_semilinear(unit_disk(), ref.matrix(), phi, make_constant(0.0), rotation=0.7, **common)
    assert report.weak_residual <= 1e-2

    rng = np.random.default_rng(4)
    points = 0.9 * np.sqrt(rng.uniform(size=20)) * np.exp(2j * np.pi * rng.uniform(size=20))
    np.testing.assert_allclose(turned.value(points), u.value(points), atol=1e-3)
    np.testing.assert_allclose(u.value(points), ref.omega(points).real, atol=1e-2)


@pytest.mark.parametrize("grid_size, disk_grid", [(256, DiskGrid(64, 128)), (128, DiskGrid(32, 128))])
def test_numerical_map_pipeline_for_the_radial_stretch(grid_size, disk_grid):
    ref = radial_stretch_reference(2.0)
    phi = BoundaryData.from_function(np.cos, 256, on_circle=False)
    u, report = solve_semilinear(
        unit_disk(), ref.matrix(), phi, make_constant(0.0),
        beltrami_opts=BeltramiOptions(grid_size=grid_size), disk_grid=disk_grid,
    )
    assert report.weak_residual <= 1e-2
    rng = np.random.default_rng(6)
    points = 0.9 * np.sqrt(rng.uniform(size=20)) * np.exp(2j * np.pi * rng.uniform(size=20))
    np.testing.assert_allclose(u.value(points), ref.omega(points).real, atol=2e-2)


def test_dead_core_grows_with_the_reaction_rate():
    grid = DiskGrid(64, 128)
    phi = BoundaryData(np.ones(256))
    opts = ContinuationOptions(method="newton", tau_steps=20)
    areas = []
    for lam in (50.0, 100.0, 200.0, 400.0):
        f = make_power(0.5, scale=lam)
        U, report = solve_quasilinear_disk(ones(grid), phi, f, opts)
        core = detect_dead_core(U)
        areas.append(core.area)
        if lam == 200.0:
            assert core.components == 1
            expected = radial_shoot(f, 1.0, 1.0).core_radius
            assert core.radius == pytest.approx(expected, rel=0.05)
    assert all(a <= b for a, b in zip(areas, areas[1:]))


def test_combustion_without_clamp_activation():
    grid = DiskGrid(128, 128)
    U, report = solve_quasilinear_disk(ones(grid), BoundaryData(np.zeros(256)), make_exponential(0.1))
    assert report.converged
    assert report.clamp_active == 0
    assert report.laplacian_residual <= 1e-2


def test_quasihyperbolic_metric_of_the_disk():
    for r in (0.5, 0.9):
        k = quasihyperbolic_distance(unit_disk(), r, 0.0, resolution=0.01)
        assert k == pytest.approx(np.log(1 / (1 - r)), rel=0.02)
    estimate = estimate_qhb_constants(unit_disk(), z0=0.0)
    assert 0.95 <= estimate.a <= 1.05


def test_cli_runs_are_bit_identical(tmp_path):
    args = ["--config", str(CONFIGS / "plasma.ini"), "--override", "grid.n_r=32", "--seed", "5"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir() if p.name != "run.log")
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir() if p.name != "run.log")
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
