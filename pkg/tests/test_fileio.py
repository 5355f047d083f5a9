import numpy as np
import pytest

from qc_semilinear.beltrami import mu_to_matrix
from qc_semilinear.errors import ConfigError
from qc_semilinear.fileio import (
    read_beltrami_field,
    read_boundary_data,
    read_distances,
    read_header,
    read_jordan_domain,
    read_matrix_field,
    read_radial_profile,
    read_report,
    read_scalar_field,
    write_beltrami_field,
    write_boundary_data,
    write_distances,
    write_jordan_domain,
    write_matrix_field,
    write_radial_profile,
    write_report,
    write_scalar_field,
    write_tau_trace,
)
from qc_semilinear.geometry import CartesianGrid, estimate_qhb_constants, square
from qc_semilinear.oracles import radial_shoot, radial_stretch_reference
from qc_semilinear.potential import BoundaryData, ScalarField
from qc_semilinear.semilinear import TauStep, make_power


def test_polar_field_round_trip(tmp_path, small_grid, rng):
    field = ScalarField(small_grid, rng.normal(size=small_grid.shape))
    path = tmp_path / "U.csv"
    write_scalar_field(path, field)
    back = read_scalar_field(path)
    assert back.grid == small_grid
    np.testing.assert_array_equal(back.values, field.values)
    kind, meta = read_header(path)
    assert kind == "scalar-field"
    assert meta == {"grid": "polar", "n_r": 16, "n_theta": 32}
    assert path.read_text().splitlines()[0] == "# scalar-field v1, grid=polar,n_r=16,n_theta=32"


def test_cartesian_field_keeps_its_mask(tmp_path):
    grid = CartesianGrid(8, 1.0, center=0.5 + 0.5j)
    mask = np.zeros(grid.shape, dtype=bool)
    mask[2:5, 3:7] = True
    field = ScalarField(grid, np.arange(64.0).reshape(8, 8), mask)
    path = tmp_path / "u.csv"
    write_scalar_field(path, field)
    back = read_scalar_field(path)
    np.testing.assert_array_equal(back.mask, mask)
    np.testing.assert_array_equal(back.values, field.values)
    assert back.grid.center == 0.5 + 0.5j


def test_boundary_data_round_trip(tmp_path):
    phi = BoundaryData.from_function(np.sin, 32, on_circle=False)
    path = tmp_path / "phi.csv"
    write_boundary_data(path, phi)
    back = read_boundary_data(path)
    assert not back.on_circle
    np.testing.assert_array_equal(back.values, phi.values)


def test_jordan_domain_round_trip(tmp_path):
    domain = square(2.0)
    path = tmp_path / "domain.csv"
    write_jordan_domain(path, domain)
    back = read_jordan_domain(path)
    np.testing.assert_array_equal(back.vertices, domain.vertices)
    assert back.interpolation == domain.interpolation


def test_jordan_domain_file_is_space_separated(tmp_path):
    path = tmp_path / "domain.txt"
    write_jordan_domain(path, square(1.0))
    lines = path.read_text().splitlines()
    assert lines[0] == "# jordan-domain v1, interpolation=linear"
    assert len(lines[1].split()) == 2 and "," not in lines[1]


def test_hand_written_jordan_domain(tmp_path):
    t = 2 * np.pi * np.arange(64) / 64
    rows = "\n".join(f"{2 * np.cos(s):.17g} {np.sin(s):.17g}" for s in t)
    path = tmp_path / "ellipse.txt"
    path.write_text("# jordan-domain v1\n" + rows + "\n")
    domain = read_jordan_domain(path)
    assert domain.interpolation == "spline"
    np.testing.assert_allclose(domain.vertices, 2 * np.cos(t) + 1j * np.sin(t))


def test_malformed_rows_are_a_config_error(tmp_path):
    path = tmp_path / "domain.txt"
    path.write_text("# jordan-domain v1\n1.0 0.0\n0.0 one\n")
    with pytest.raises(ConfigError, match="malformed jordan-domain rows"):
        read_jordan_domain(path)


def test_matrix_and_dilatation_files(tmp_path):
    ref = radial_stretch_reference(3.0)
    A = mu_to_matrix(ref.mu)
    write_matrix_field(tmp_path / "A.csv", A)
    write_beltrami_field(tmp_path / "mu.csv", ref.mu)
    back = read_matrix_field(tmp_path / "A.csv")
    mu = read_beltrami_field(tmp_path / "mu.csv")
    np.testing.assert_array_equal(back.a12, A.a12)
    assert back.K == pytest.approx(3.0)
    np.testing.assert_array_equal(mu.mu, ref.mu.mu)
    assert mu.k_bound == 0.5
    assert (tmp_path / "mu.csv").read_text().splitlines()[1] == "# x,y,re_mu,im_mu"


def test_radial_profile_file(tmp_path):
    profile = radial_shoot(make_power(0.5, scale=200), 1.0, 1.0)
    path = tmp_path / "profile.csv"
    write_radial_profile(path, profile)
    back = read_radial_profile(path)
    assert back.core_radius == profile.core_radius
    r = np.linspace(0, 1, 11)
    np.testing.assert_array_equal(back(r), profile(r))
    assert path.read_text().splitlines()[1] == "# r,value"


def test_distances_are_written_with_the_base_point(tmp_path):
    estimate = estimate_qhb_constants(square(1.0), sample_count=16, seed=1)
    path = tmp_path / "distances.csv"
    write_distances(path, estimate)
    data, meta = read_distances(path)
    assert data.shape == (16, 4)
    np.testing.assert_array_equal(data[:, 2], estimate.k)
    assert complex(meta["z0_re"], meta["z0_im"]) == estimate.z0


def test_tau_trace_columns(tmp_path):
    path = tmp_path / "tau_trace.csv"
    write_tau_trace(path, [TauStep(0.5, 3, 1e-9, 0.25), TauStep(1.0, 2, 5e-10, 0.5)])
    data = np.loadtxt(path, delimiter=",")
    np.testing.assert_array_equal(data[:, 1], [3, 2])
    assert data[1, 3] == 0.5


def test_wrong_kind_is_rejected(tmp_path):
    path = tmp_path / "phi.csv"
    write_boundary_data(path, BoundaryData(np.ones(16)))
    with pytest.raises(ConfigError, match="expected a scalar-field file"):
        read_scalar_field(path)


def test_unknown_version_is_rejected(tmp_path):
    path = tmp_path / "U.csv"
    path.write_text("# scalar-field v2, grid=polar\n# r,theta,value\n0.5,0,1\n")
    with pytest.raises(ConfigError, match="unsupported scalar-field version"):
        read_scalar_field(path)


def test_missing_header_is_rejected(tmp_path):
    path = tmp_path / "U.csv"
    path.write_text("0.5,0,1\n")
    with pytest.raises(ConfigError, match="missing artifact header"):
        read_header(path)


def test_report_round_trip(tmp_path):
    path = tmp_path / "report.txt"
    values = {"converged": True, "tau_steps": 10, "final_g_norm": 0.1 + 0.2, "method": "picard"}
    write_report(path, "solve-report", values)
    assert path.read_text().splitlines()[0] == "# solve-report v1"
    assert read_report(path) == values


def test_report_needs_a_header(tmp_path):
    path = tmp_path / "report.txt"
    path.write_text("converged = True\n")
    with pytest.raises(ConfigError):
        read_report(path)
