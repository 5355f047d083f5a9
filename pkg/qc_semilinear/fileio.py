"""Plain-text artifacts: CSV tables with a versioned header and key = value reports.

Every CSV starts with "# <kind> v1, key=value, ..." followed by a "# col,col"
line. Numbers are written with %.17g so that files round-trip exactly.
"""

from __future__ import annotations

import numpy as np

from qc_semilinear.beltrami import BeltramiField, MatrixField
from qc_semilinear.errors import ConfigError
from qc_semilinear.geometry import CartesianGrid, DiskGrid, JordanDomain
from qc_semilinear.oracles import RadialProfile
from qc_semilinear.potential import BoundaryData, ScalarField

VERSION = "v1"
FMT = "%.17g"


def _meta_value(value):
    if isinstance(value, float):
        return FMT % value
    return str(value)


def _write_table(path, kind, columns, rows, delimiter=",", **meta):
    fields = ",".join(f"{k}={_meta_value(v)}" for k, v in meta.items())
    header = f"{kind} {VERSION}" + (f", {fields}" if fields else "")
    if columns:
        header += "\n" + delimiter.join(columns)
    np.savetxt(path, np.atleast_2d(rows), fmt=FMT, delimiter=delimiter, header=header, comments="# ")


def _parse_value(text):
    text = text.strip()
    if text[:1] in "'\"":
        return text[1:-1]
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def read_header(path):
    """Kind and metadata of a versioned CSV artifact."""
    with open(path) as f:
        first = f.readline()
    if not first.startswith("# "):
        raise ConfigError(f"{path}: missing artifact header")
    parts = [p.strip() for p in first[2:].split(",")]
    kind, _, version = parts[0].partition(" ")
    if version != VERSION:
        raise ConfigError(f"{path}: unsupported {kind} version {version!r}")
    meta = {}
    for part in parts[1:]:
        key, _, value = part.partition("=")
        meta[key.strip()] = _parse_value(value)
    return kind, meta


def _read_table(path, expected_kind):
    kind, meta = read_header(path)
    if kind != expected_kind:
        raise ConfigError(f"{path}: expected a {expected_kind} file, found {kind}")
    # rows may be comma or whitespace separated
    with open(path) as f:
        try:
            data = np.loadtxt((line.replace(",", " ") for line in f), comments="#", ndmin=2)
        except ValueError as e:
            raise ConfigError(f"{path}: malformed {kind} rows: {e}") from e
    return data, meta


def write_scalar_field(path, field_: ScalarField):
    grid = field_.grid
    if isinstance(grid, DiskGrid):
        rr, tt = np.meshgrid(grid.r, grid.theta, indexing="ij")
        rows = np.column_stack([rr.ravel(), tt.ravel(), field_.values.ravel()])
        _write_table(path, "scalar-field", ["r", "theta", "value"], rows,
                     grid="polar", n_r=grid.n_r, n_theta=grid.n_theta)
        return
    active = np.ones(grid.shape, bool) if field_.mask is None else field_.mask
    pts = grid.points[active]
    rows = np.column_stack([pts.real, pts.imag, field_.values[active]])
    _write_table(path, "scalar-field", ["x", "y", "value"], rows, grid="cartesian", n=grid.n,
                 half_width=float(grid.half_width), center_re=float(grid.center.real),
                 center_im=float(grid.center.imag))


def read_scalar_field(path):
    data, meta = _read_table(path, "scalar-field")
    if meta.get("grid") == "polar":
        grid = DiskGrid(meta["n_r"], meta["n_theta"])
        return ScalarField(grid, data[:, 2].reshape(grid.shape))
    grid = CartesianGrid(meta["n"], meta["half_width"], complex(meta["center_re"], meta["center_im"]))
    h = grid.spacing
    col = np.rint((data[:, 0] - grid.x[0]) / h).astype(int)
    row = np.rint((data[:, 1] - grid.y[0]) / h).astype(int)
    values = np.zeros(grid.shape)
    mask = np.zeros(grid.shape, dtype=bool)
    values[row, col] = data[:, 2]
    mask[row, col] = True
    return ScalarField(grid, values, mask)


def write_boundary_data(path, phi: BoundaryData):
    rows = np.column_stack([phi.angles, phi.values])
    _write_table(path, "boundary-data", ["t", "value"], rows, m=phi.m, on_circle=int(phi.on_circle))


def read_boundary_data(path):
    data, meta = _read_table(path, "boundary-data")
    return BoundaryData(data[:, 1], bool(meta.get("on_circle", 1)))


def write_jordan_domain(path, domain: JordanDomain):
    v = domain.vertices
    _write_table(path, "jordan-domain", None, np.column_stack([v.real, v.imag]), delimiter=" ",
                 interpolation=domain.interpolation)


def read_jordan_domain(path):
    data, meta = _read_table(path, "jordan-domain")
    return JordanDomain(data[:, 0] + 1j * data[:, 1], interpolation=meta.get("interpolation", "spline"),
                        name=str(path))


def write_matrix_field(path, A):
    pts = A.points.ravel()
    rows = np.column_stack([pts.real, pts.imag, A.a11.ravel(), A.a12.ravel(), A.a22.ravel()])
    _write_table(path, "matrix-field", ["x", "y", "a11", "a12", "a22"], rows, K=float(A.K))


def read_matrix_field(path):
    data, meta = _read_table(path, "matrix-field")
    return MatrixField(data[:, 0] + 1j * data[:, 1], data[:, 2], data[:, 3], data[:, 4], float(meta["K"]))


def write_beltrami_field(path, mu):
    pts = mu.points.ravel()
    rows = np.column_stack([pts.real, pts.imag, mu.mu.real.ravel(), mu.mu.imag.ravel()])
    _write_table(path, "beltrami-field", ["x", "y", "re_mu", "im_mu"], rows, k=float(mu.k_bound))


def read_beltrami_field(path):
    data, meta = _read_table(path, "beltrami-field")
    return BeltramiField(data[:, 0] + 1j * data[:, 1], data[:, 2] + 1j * data[:, 3], float(meta["k"]))


def write_map(path, qc_map):
    inside = qc_map.inside
    pts = qc_map.grid.points[inside]
    w = qc_map.values[inside]
    rows = np.column_stack([pts.real, pts.imag, w.real, w.imag])
    _write_table(path, "qc-map", ["x", "y", "re", "im"], rows, n=qc_map.grid.n,
                 rotation=float(qc_map.rotation))


def write_inverse_map(path, qc_map):
    grid = qc_map.inverse_grid
    rr, tt = np.meshgrid(grid.r, grid.theta, indexing="ij")
    z = qc_map.inverse_values
    rows = np.column_stack([rr.ravel(), tt.ravel(), z.real.ravel(), z.imag.ravel()])
    _write_table(path, "qc-inverse", ["r", "theta", "re", "im"], rows, n_r=grid.n_r, n_theta=grid.n_theta)


def write_radial_profile(path, profile):
    rows = np.column_stack([profile.r, profile.values])
    _write_table(path, "radial-profile", ["r", "value"], rows, core_radius=float(profile.core_radius))


def read_radial_profile(path):
    data, meta = _read_table(path, "radial-profile")
    r, values = data[:, 0], data[:, 1]
    return RadialProfile(r, values, np.gradient(values, r), float(meta.get("core_radius", 0.0)))


def write_tau_trace(path, trace):
    rows = [[s.tau, s.iterations, s.residual, s.g_norm] for s in trace]
    _write_table(path, "tau-trace", ["tau", "iterations", "residual", "g_norm"],
                 np.array(rows).reshape(-1, 4))


def write_distances(path, estimate):
    z = estimate.samples
    rows = np.column_stack([z.real, z.imag, estimate.k, estimate.log_ratio])
    _write_table(path, "qh-distances", ["x", "y", "k", "log_ratio"], rows,
                 z0_re=float(estimate.z0.real), z0_im=float(estimate.z0.imag))


def read_distances(path):
    data, meta = _read_table(path, "qh-distances")
    return data, meta


def _format(value):
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return FMT % value
    if isinstance(value, complex):
        return f"{FMT % value.real},{FMT % value.imag}"
    return str(value)


def write_report(path, kind, values):
    """key = value report with a versioned header line."""
    with open(path, "w") as f:
        f.write(f"# {kind} {VERSION}\n")
        for key, value in values.items():
            f.write(f"{key} = {_format(value)}\n")


def read_report(path):
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or not lines[0].startswith("# "):
        raise ConfigError(f"{path}: missing report header")
    values = {}
    for line in lines[1:]:
        key, sep, value = line.partition(" = ")
        if not sep:
            continue
        value = value.strip()
        values[key.strip()] = {"True": True, "False": False}.get(value, _parse_value(value))
    return values
