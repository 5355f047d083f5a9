import numpy as np
import pytest

from qc_semilinear.beltrami import MatrixField, QuasiconformalMap
from qc_semilinear.errors import DomainError, UnsupportedError
from qc_semilinear.geometry import DiskGrid, unit_disk
from qc_semilinear.oracles import radial_shoot, radial_stretch_reference
from qc_semilinear.potential import BoundaryData, ScalarField
from qc_semilinear.semilinear import (
    P_FALLBACKS,
    ContinuationOptions,
    FunctionSolution,
    Nonlinearity,
    apriori_bound,
    detect_dead_core,
    integrable_exponent,
    make_constant,
    make_exponential,
    make_linear,
    make_power,
    make_signed_power,
    plasma_substitution,
    pullback_boundary_data,
    solve_quasilinear_disk,
    solve_semilinear,
    weak_residual,
)


@pytest.fixture(scope="module")
def grid():
    return DiskGrid(32, 64)


def ones(grid):
    return ScalarField(grid, np.ones(grid.shape))


def test_power_exponent_is_checked():
    with pytest.raises(DomainError):
        make_power(1.5)
    with pytest.raises(DomainError):
        make_signed_power(0.0)


def test_catalog_growth_classes():
    assert make_power(0.5).is_sublinear()
    assert make_signed_power(0.3).is_sublinear()
    assert make_exponential(0.1).growth_class == "clamped"
    assert make_exponential(0.1, clamp=None).growth_class == "unbounded"
    assert make_constant(2.0).envelope(5.0) == 2.0
    with pytest.raises(DomainError):
        make_exponential(0.1, sign=2)


def test_custom_nonlinearity_is_validated():
    with pytest.raises(DomainError):
        Nonlinearity.from_function(lambda u: u**2, "sublinear")
    with pytest.raises(DomainError):
        Nonlinearity.from_function(np.tanh, "bounded")
    f = Nonlinearity.from_function(np.tanh, "bounded", bound=1.0)
    assert f.slope(0.0) == pytest.approx(1.0, rel=1e-6)


def test_apriori_bound_of_the_square_root():
    # s* = (3 M ||h||)^2 = 0.5625, B = s*/(3M)
    assert apriori_bound(make_power(0.5), 1.0, 0.25, 0.0) == pytest.approx(0.75, rel=1e-9)


def test_apriori_bound_is_driven_by_the_boundary_data():
    assert apriori_bound(make_constant(0.0), 1.0, 0.5, 3.0) == pytest.approx(6.0)


def test_apriori_bound_rejects_unbounded_growth():
    with pytest.raises(UnsupportedError):
        apriori_bound(make_linear(1.0), 1.0, 0.25, 0.0)
    with pytest.raises(UnsupportedError):
        apriori_bound(make_exponential(0.1, clamp=None), 1.0, 0.25, 0.0)
    with pytest.raises(DomainError):
        apriori_bound(make_power(0.5), 1.0, 0.0, 0.0)


def test_clamp_counts_active_nodes():
    f = make_exponential(1.0, clamp=2.0)
    assert f.clamp_active(np.array([0.0, 2.5, 3.0])) == 2
    assert f(np.array([5.0]))[0] == pytest.approx(np.exp(2.0))


def test_plasma_substitution_inverts_the_signed_power():
    u = np.array([-2.0, 0.0, 0.5, 3.0])
    U = np.abs(u) ** 0.5 * np.sign(u)
    np.testing.assert_allclose(plasma_substitution(U, 0.5), u)


def test_zero_source_gives_the_harmonic_extension(grid):
    phi = BoundaryData.from_function(np.cos, 64)
    U, report = solve_quasilinear_disk(ones(grid), phi, make_constant(0.0))
    assert report.converged
    assert [step.iterations for step in report.tau_trace] == [1] * 10
    np.testing.assert_allclose(U.values, grid.points.real, atol=1e-10)
    assert report.final_g_norm == 0.0


def test_picard_matches_radial_shooting(grid):
    f = make_power(0.5)
    U, report = solve_quasilinear_disk(ones(grid), BoundaryData(np.ones(64)), f)
    profile = radial_shoot(f, 1.0, 1.0)
    np.testing.assert_allclose(U.values, profile(np.abs(grid.points)), atol=1e-2)
    assert report.final_g_norm <= report.apriori_bound
    assert len(report.tau_trace) == 10


@pytest.mark.parametrize(
    "opts",
    [
        ContinuationOptions(method="newton"),
        ContinuationOptions(anderson_depth=3),
    ],
    ids=["newton", "anderson"],
)
def test_inner_iterations_agree(grid, opts):
    f = make_power(0.5, scale=4.0)
    phi = BoundaryData(np.ones(64))
    reference, _ = solve_quasilinear_disk(ones(grid), phi, f)
    U, report = solve_quasilinear_disk(ones(grid), phi, f, opts)
    assert report.method == opts.method
    np.testing.assert_allclose(U.values, reference.values, atol=1e-6)


def test_anderson_needs_fewer_iterations(grid):
    f = make_signed_power(0.5, scale=4.0)
    phi = BoundaryData(np.ones(64))
    _, plain = solve_quasilinear_disk(ones(grid), phi, f)
    _, accelerated = solve_quasilinear_disk(ones(grid), phi, f, ContinuationOptions(anderson_depth=3))
    count = lambda report: sum(step.iterations for step in report.tau_trace)  # noqa: E731
    assert count(accelerated) < count(plain)


def test_disk_solver_needs_a_disk_grid():
    from qc_semilinear.geometry import CartesianGrid

    grid = CartesianGrid(8, 1.0)
    with pytest.raises(DomainError):
        solve_quasilinear_disk(ones(grid), BoundaryData(np.ones(16)), make_constant(0.0))


def test_dead_core_of_a_ramp():
    grid = DiskGrid(64, 128)
    u = ScalarField(grid, np.maximum(np.abs(grid.points) - 0.5, 0.0))
    core = detect_dead_core(u)
    assert core.components == 1
    assert core.radius == pytest.approx(0.5, abs=1e-12)
    assert core.area == pytest.approx(np.pi / 4, rel=1e-12)


def test_positive_solution_has_no_dead_core(grid):
    u = ScalarField(grid, 1 + np.abs(grid.points) ** 2)
    core = detect_dead_core(u)
    assert core.components == 0
    assert core.area == 0.0


def test_negative_solution_has_no_dead_core(grid):
    core = detect_dead_core(ScalarField(grid, np.full(grid.shape, -5.0)))
    assert core.components == 0
    assert core.area == 0.0


def test_dead_core_across_the_angular_seam():
    grid = DiskGrid(32, 64)
    z = grid.points
    flat = (np.abs(np.angle(z)) < 0.3) & (np.abs(z) > 0.5) & (np.abs(z) < 0.8)
    core = detect_dead_core(ScalarField(grid, np.where(flat, 0.0, 1.0)))
    assert core.components == 1
    assert np.unique(core.labels[core.mask]).tolist() == [1]


def test_weak_residual_of_a_quadratic():
    u = FunctionSolution(lambda z: np.abs(z) ** 2, lambda z: 2 * z, unit_disk())
    A = MatrixField.identity()
    assert weak_residual(u, A, make_constant(4.0)) < 1e-3
    assert weak_residual(u, A, make_constant(0.0)) > 1e-2


def test_weak_residual_needs_room_for_test_functions():
    u = FunctionSolution(lambda z: np.abs(z) ** 2, lambda z: 2 * z, unit_disk())
    with pytest.raises(DomainError, match="insufficient samples"):
        weak_residual(u, MatrixField.identity(), make_constant(4.0), margin=0.9)


def test_integrable_exponent_of_a_regular_jacobian():
    grid = DiskGrid(64, 128)
    assert integrable_exponent(ones(grid), 2.0) == 2.0


def test_integrable_exponent_falls_back_for_the_radial_stretch():
    grid = DiskGrid(64, 128)
    ref = radial_stretch_reference(2.0)
    J = ScalarField(grid, ref.jacobian(grid.points))
    p = integrable_exponent(J, 2.0)
    assert p < 2.0
    assert p in P_FALLBACKS


def test_integrable_exponent_gives_up():
    grid = DiskGrid(16, 32)
    values = np.ones(grid.shape)
    values[0] = 1e12
    with pytest.raises(UnsupportedError, match="not p-integrable"):
        integrable_exponent(ScalarField(grid, values), 2.0)


def test_pullback_keeps_circle_data():
    ref = radial_stretch_reference(2.0)
    phi = BoundaryData.from_function(np.cos, 64)
    assert pullback_boundary_data(phi, ref.qc_map(grid_size=32)) is phi


def test_pullback_of_the_radial_stretch_is_the_identity():
    ref = radial_stretch_reference(2.0)
    phi = BoundaryData.from_function(np.cos, 64, on_circle=False)
    psi = pullback_boundary_data(phi, ref.qc_map(grid_size=64))
    np.testing.assert_allclose(psi.values, phi.values, atol=1e-3)


def test_identity_map_pipeline():
    domain = unit_disk()
    qc_map = QuasiconformalMap.from_closed_form(domain, lambda z: z, lambda w: w, grid_size=64)
    phi = BoundaryData.from_function(np.cos, 64)
    u, report = solve_semilinear(
        domain, MatrixField.identity(), phi, make_constant(0.0),
        disk_grid=DiskGrid(32, 64), qc_map=qc_map, trial_count=4,
    )
    z = np.array([0.3 + 0.2j, -0.4j])
    np.testing.assert_allclose(u.value(z), z.real, atol=1e-6)
    assert report.converged
    assert report.weak_residual < 1e-3
    field = u.as_field()
    inside = field.mask
    np.testing.assert_allclose(field.values[inside], u.grid.points[inside].real, atol=1e-6)


def test_signed_power_is_odd_in_the_boundary_data(grid):
    f = make_signed_power(0.5, scale=2.0)
    phi = BoundaryData.from_function(lambda t: np.cos(t) + 0.5 * np.sin(2 * t), 64)
    U, _ = solve_quasilinear_disk(ones(grid), phi, f)
    V, _ = solve_quasilinear_disk(ones(grid), BoundaryData(-phi.values), f)
    np.testing.assert_allclose(V.values, -U.values, atol=1e-8)


def test_halving_the_damping_keeps_the_solution(grid):
    f = make_power(0.5)
    phi = BoundaryData(np.ones(64))
    U, _ = solve_quasilinear_disk(ones(grid), phi, f, ContinuationOptions(damping=0.5))
    V, report = solve_quasilinear_disk(ones(grid), phi, f, ContinuationOptions(damping=0.25))
    assert report.converged
    np.testing.assert_allclose(V.values, U.values, atol=1e-6)


def test_decaying_exponential():
    f = make_exponential(0.1, sign=-1)
    assert f(np.array([1.0]))[0] == pytest.approx(0.1 * np.exp(-1), rel=1e-12)
    assert f(np.array([0.0]))[0] == pytest.approx(0.1)


@pytest.mark.parametrize(
    "f, boundary",
    [
        (make_power(0.5), 1.0),
        (make_signed_power(0.5, scale=2.0), -1.0),
        (make_constant(1.0), 0.0),
        (make_exponential(0.1, sign=-1), 0.0),
    ],
    ids=["power", "signed-power", "constant", "decaying-exponential"],
)
def test_catalog_solutions_satisfy_the_equation(f, boundary):
    grid = DiskGrid(64, 128)
    U, report = solve_quasilinear_disk(ones(grid), BoundaryData(np.full(128, boundary)), f)
    assert report.converged
    assert report.laplacian_residual <= 1e-2
    profile = radial_shoot(f, 1.0, boundary)
    np.testing.assert_allclose(U.values, profile(np.abs(grid.points)), atol=1e-2)
