import numpy as np
import pytest

from qc_semilinear.errors import DomainError, RepresentationError
from qc_semilinear.geometry import CartesianGrid, DiskGrid
from qc_semilinear.oracles import uniform_disk_potential
from qc_semilinear.potential import (
    BoundaryData,
    ScalarField,
    boundary_trace,
    green_function,
    green_gradient,
    green_potential,
    laplacian_residual,
    measure_potential_constant,
    newtonian_gradient,
    newtonian_potential,
    poisson_gradient,
    poisson_integral,
    poisson_kernel,
    polar_laplacian_matrix,
    prop2_density,
    random_smooth_density,
    solve_poisson_dirichlet,
)


def ones(grid):
    return ScalarField(grid, np.ones(grid.shape))


def test_scalar_field_norms(disk_grid):
    g = ones(disk_grid)
    assert g.lp_norm(2) == pytest.approx(np.sqrt(np.pi), rel=1e-12)
    assert g.lp_norm(1) == pytest.approx(np.pi, rel=1e-12)
    assert g.sup_norm() == 1.0
    assert g.integral() == pytest.approx(np.pi, rel=1e-12)


def test_scalar_field_rejects_bad_values(small_grid):
    with pytest.raises(DomainError):
        ScalarField(small_grid, np.full(small_grid.shape, np.nan))
    with pytest.raises(DomainError):
        ScalarField(small_grid, np.ones((3, 3)))


def test_masked_values_are_zeroed():
    grid = CartesianGrid(4, 1.0)
    mask = np.zeros(grid.shape, dtype=bool)
    mask[1:3, 1:3] = True
    g = ScalarField(grid, np.full(grid.shape, 2.0), mask)
    assert g.values.sum() == 8.0
    assert g.integral() == pytest.approx(8.0 * grid.spacing**2)


def test_boundary_data_needs_power_of_two():
    with pytest.raises(DomainError):
        BoundaryData(np.ones(100))
    with pytest.raises(DomainError):
        BoundaryData(np.ones(8))


def test_boundary_data_interpolates_trig_polynomials():
    phi = BoundaryData.from_function(lambda t: np.cos(3 * t) + 0.5, 64)
    t = np.linspace(0, 2 * np.pi, 17)
    np.testing.assert_allclose(phi.evaluate(t), np.cos(3 * t) + 0.5, atol=1e-12)


def test_poisson_integral_of_cosine():
    phi = BoundaryData.from_function(np.cos, 256)
    assert poisson_integral(phi, 0.3) == pytest.approx(0.3, abs=1e-12)
    assert poisson_integral(phi, 0.5j) == pytest.approx(0.0, abs=1e-12)


def test_poisson_integral_on_a_grid(disk_grid):
    phi = BoundaryData(np.full(64, 2.5))
    U = poisson_integral(phi, disk_grid)
    assert isinstance(U, ScalarField)
    np.testing.assert_allclose(U.values, 2.5, atol=1e-12)


def test_poisson_gradient_of_cosine():
    # P[cos] = Re z, so d/dz = 1/2
    phi = BoundaryData.from_function(np.cos, 64)
    np.testing.assert_allclose(poisson_gradient(phi, np.array([0.1, 0.4j])), 0.5, atol=1e-12)


def test_poisson_kernel_and_green_function():
    assert poisson_kernel(0.0, 1.0) == pytest.approx(1.0)
    with pytest.raises(DomainError, match="exterior evaluation"):
        poisson_kernel(1.2, 0.0)
    z, w = 0.3 + 0.1j, -0.2 + 0.4j
    assert green_function(z, w) == pytest.approx(green_function(w, z))
    with pytest.raises(DomainError, match="kernel diagonal"):
        green_function(z, z)


def test_potentials_of_the_uniform_density(disk_grid):
    g = ones(disk_grid)
    N = newtonian_potential(g)
    np.testing.assert_allclose(N.values, uniform_disk_potential(disk_grid.points), atol=1e-12)
    assert newtonian_potential(g, 0j) == pytest.approx(-0.25, abs=1e-12)
    assert newtonian_potential(g, 2.0) == pytest.approx(0.5 * np.log(2.0), abs=1e-12)
    assert green_potential(g, 0j) == pytest.approx(0.25, abs=1e-12)
    G = green_potential(g)
    np.testing.assert_allclose(G.values, (1 - np.abs(disk_grid.points) ** 2) / 4, atol=1e-12)


def test_newtonian_gradient_of_the_uniform_density(disk_grid):
    g = ones(disk_grid)
    dz = complex(newtonian_gradient(g, 0.5))
    assert dz == pytest.approx(0.125, abs=1e-12)
    # real x-derivative is twice the real part
    assert 2 * dz.real == pytest.approx(0.25, abs=1e-12)
    assert complex(green_gradient(g, 0.5)) == pytest.approx(-0.125, abs=1e-12)


def test_direct_gradient_is_close_to_spectral():
    grid = DiskGrid(64, 128)
    g = ones(grid)
    direct = complex(newtonian_gradient(g, 0.5 + 0.1j, method="direct"))
    assert direct == pytest.approx(np.conj(0.5 + 0.1j) / 4, abs=1e-2)


def test_gradient_matches_finite_differences(small_grid, rng):
    g = random_smooth_density(small_grid, rng)
    z = small_grid.r[5] * np.exp(0.7j)
    step = 1e-4
    gx = (newtonian_potential(g, z + step) - newtonian_potential(g, z - step)) / (2 * step)
    gy = (newtonian_potential(g, z + 1j * step) - newtonian_potential(g, z - 1j * step)) / (2 * step)
    dz = complex(newtonian_gradient(g, z))
    assert 2 * dz.real == pytest.approx(gx, rel=1e-6, abs=1e-8)
    assert -2 * dz.imag == pytest.approx(gy, rel=1e-6, abs=1e-8)


def test_spectral_values_at_nodes_match_the_grid_path(small_grid, rng):
    g = random_smooth_density(small_grid, rng)
    on_grid = newtonian_potential(g).values
    at_points = newtonian_potential(g, small_grid.points)
    np.testing.assert_allclose(at_points, on_grid, atol=1e-12)


def test_boundary_trace_of_the_uniform_density(small_grid):
    trace = boundary_trace(ones(small_grid))
    assert trace.m == 64
    np.testing.assert_allclose(trace.values, -0.25, atol=1e-12)


def test_green_potential_vanishes_on_the_circle(small_grid, rng):
    g = random_smooth_density(small_grid, rng)
    t = np.linspace(0, 2 * np.pi, 9)
    np.testing.assert_allclose(green_potential(g, np.exp(1j * t)), 0.0, atol=1e-12)


def test_poisson_dirichlet_linear_oracle():
    grid = DiskGrid(64, 64)
    U = solve_poisson_dirichlet(ones(grid), BoundaryData(np.zeros(64)), check=False)
    np.testing.assert_allclose(U.values, (np.abs(grid.points) ** 2 - 1) / 4, atol=1e-10)
    assert U.diagnostics["representation_gap"] < 1e-2


def test_dual_representation_agrees(rng):
    grid = DiskGrid(64, 64)
    g = random_smooth_density(grid, rng)
    phi = BoundaryData.from_function(np.sin, 64)
    U = solve_poisson_dirichlet(g, phi, check=False)
    spectral = poisson_integral(phi, grid).values - green_potential(g).values
    np.testing.assert_allclose(U.values, spectral, atol=1e-10)


def test_representation_mismatch_is_reported(rng):
    grid = DiskGrid(8, 8)
    g = random_smooth_density(grid, rng)
    with pytest.raises(RepresentationError, match="representation mismatch"):
        solve_poisson_dirichlet(g, BoundaryData(np.zeros(16)), tolerance=1e-12)


def test_laplacian_residual_of_a_harmonic_function():
    grid = DiskGrid(64, 128)
    U = ScalarField(grid, grid.points.real)
    assert laplacian_residual(U, np.zeros(grid.shape)) < 1e-2


def test_laplacian_residual_of_the_quadratic():
    grid = DiskGrid(32, 32)
    U = ScalarField(grid, (np.abs(grid.points) ** 2 - 1) / 4)
    assert laplacian_residual(U, np.ones(grid.shape)) < 1e-10


def test_laplacian_residual_needs_a_fine_grid(small_grid):
    U = ones(small_grid)
    with pytest.raises(DomainError, match="grid too coarse"):
        laplacian_residual(U, np.zeros(small_grid.shape))


def test_laplacian_matrix_is_consistent_with_the_quadratic():
    grid = DiskGrid(16, 16)
    u = (np.abs(grid.points) ** 2 - 1).ravel() / 4
    # U = 0 sits half a cell outside the last ring, so the last ring is O(dr)
    lap = -(polar_laplacian_matrix(grid) @ u).reshape(grid.shape)
    np.testing.assert_allclose(lap[:-1], 1.0, atol=1e-10)


def test_prop2_density_mass_and_unbounded_potential():
    values = []
    for n_r in (64, 128, 256):
        grid = DiskGrid(n_r, 16)
        g = prop2_density(1.5, grid)
        assert g.lp_norm(1) == pytest.approx(4 * np.pi, rel=0.05)
        values.append(newtonian_potential(g, 0j))
    assert values[0] > values[1] > values[2]


def test_prop2_density_rejects_alpha(small_grid):
    with pytest.raises(DomainError):
        prop2_density(2.5, small_grid)


def test_potential_constant_bounds_fresh_densities(disk_grid):
    M = measure_potential_constant(disk_grid, 2.0, 16, 0)
    rng = np.random.default_rng(99)
    for _ in range(20):
        g = random_smooth_density(disk_grid, rng)
        sup = max(newtonian_potential(g).sup_norm(), boundary_trace(g).sup_norm())
        assert sup <= M * g.lp_norm(2)
