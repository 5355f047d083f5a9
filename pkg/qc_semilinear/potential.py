"""Logarithmic potentials on the unit disk.

Densities on a DiskGrid are treated as piecewise constant in r on every radial
cell and as their trigonometric interpolant in theta. The angular Fourier modes
of ln|z - w| are then integrated exactly over each radial cell, which gives the
Newtonian and Green potentials (and their gradients) at any point of the disk.
Densities on a CartesianGrid, and method="direct", use cell sums in which every
cell is replaced by the equal-area disk carrying the same mass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.sparse import coo_matrix

from qc_semilinear.errors import DomainError, RepresentationError
from qc_semilinear.geometry import CartesianGrid, DiskGrid
from qc_semilinear.logging import logger

_CHUNK = 1_000_000


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Values at the nodes of a grid, with an optional mask of active nodes."""

    grid: DiskGrid | CartesianGrid
    values: np.ndarray
    mask: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)
    _norms: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise DomainError(
                f"field shape {values.shape} does not match grid shape {self.grid.shape}"
            )
        mask = None
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool)
            if mask.shape != values.shape:
                raise DomainError("mask shape does not match the grid")
            values = np.where(mask, values, 0.0)
        if not np.all(np.isfinite(values)):
            raise DomainError("field has non-finite values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @property
    def weights(self):
        areas = self.grid.areas
        return areas if self.mask is None else areas * self.mask

    def lp_norm(self, p):
        p = float(p)
        if p not in self._norms:
            if np.isinf(p):
                self._norms[p] = float(np.max(np.abs(self.values)))
            else:
                total = np.sum(np.abs(self.values) ** p * self.weights)
                self._norms[p] = float(total ** (1 / p))
        return self._norms[p]

    def sup_norm(self):
        return self.lp_norm(np.inf)

    def integral(self):
        return float(np.sum(self.values * self.weights))

    def with_values(self, values, **diagnostics):
        return ScalarField(self.grid, values, self.mask, diagnostics)


def mode_factors(n_modes, n_samples):
    """Weights turning one-sided rfft coefficients into a real trigonometric sum."""
    fac = np.full(n_modes, 2.0)
    fac[0] = 1.0
    if n_samples % 2 == 0 and n_modes == n_samples // 2 + 1:
        fac[-1] = 1.0
    return fac


@dataclass(frozen=True, eq=False)
class BoundaryData:
    """Samples of boundary values at the equispaced parameters 2*pi*j/m.

    On the unit circle the parameter is the polar angle; for a JordanDomain it is
    the boundary spline parameter (on_circle=False).
    """

    values: np.ndarray
    on_circle: bool = True

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        m = values.size
        if m < 16 or m & (m - 1):
            raise DomainError(f"boundary samples must be a power of two >= 16, got {m}")
        if not np.all(np.isfinite(values)):
            raise DomainError("boundary data has non-finite values")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, fn, m=256, on_circle=True):
        t = 2 * np.pi * np.arange(m) / m
        return cls(np.asarray(fn(t), dtype=float) * np.ones(m), on_circle)

    @property
    def m(self):
        return self.values.size

    @property
    def angles(self):
        return 2 * np.pi * np.arange(self.m) / self.m

    @property
    def coefficients(self):
        return np.fft.rfft(self.values) / self.m

    @property
    def factors(self):
        return mode_factors(self.m // 2 + 1, self.m)

    def sup_norm(self):
        return float(np.max(np.abs(self.values)))

    def evaluate(self, t):
        """Band-limited interpolant of the samples at parameters t."""
        t = np.asarray(t, dtype=float)
        c = self.coefficients * self.factors
        return np.real(P.polyval(np.exp(1j * t), c))


def _grid_modes(field_: ScalarField):
    grid = field_.grid
    n = np.arange(grid.n_theta // 2 + 1)
    return np.fft.rfft(field_.values, axis=1) / grid.n_theta * np.exp(-0.5j * n * grid.dtheta)


def _log_antiderivative(x):
    # integral of rho*ln(rho); zero at the origin
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, 0.5 * x**2 * np.log(np.where(x > 0, x, 1.0)) - 0.25 * x**2, 0.0)


def _radial_kernels(r, a, b, n_modes, kinds):
    """Exact radial cell integrals of the angular modes of the log kernels.

    Returns a dict of arrays of shape (len(r), len(a), n_modes) for each kind in
    {"newton", "green", "newton_dr", "green_dr"}.
    """
    r = np.asarray(r, dtype=float)[:, None, None]
    a = np.asarray(a, dtype=float)[None, :, None]
    b = np.asarray(b, dtype=float)[None, :, None]
    n = np.arange(1, n_modes, dtype=float)[None, None, :]
    lo = np.clip(r, a, b)
    below = r > a
    above = r < b

    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        ra = np.where(below, a / np.where(r > 0, r, 1.0), 0.0)
        rc = np.where(below, lo / np.where(r > 0, r, 1.0), 0.0)
        inner = np.where(below, (lo**2 * rc**n - a**2 * ra**n) / (n + 2), 0.0)
        ql = np.where(lo > 0, r / np.where(lo > 0, lo, 1.0), 0.0)
        outer_general = (b**2 * (r / b) ** n - lo**2 * ql**n) / (2 - n)
        outer_two = r**2 * (np.log(b) - np.log(np.where(lo > 0, lo, 1.0)))
        outer = np.where(above, np.where(n == 2, outer_two, outer_general), 0.0)
        mirror = (b**2 * (r * b) ** n - a**2 * (r * a) ** n) / (n + 2)

        r0, a0, b0, lo0 = r[..., 0], a[..., 0], b[..., 0], lo[..., 0]
        log_r = np.log(np.where(r0 > 0, r0, 1.0))
        w0 = np.where(below[..., 0], 0.5 * (lo0**2 - a0**2) * log_r, 0.0)
        w0 = w0 + _log_antiderivative(b0) - _log_antiderivative(lo0)
        dw0 = np.where(r0 > 0, (lo0**2 - a0**2) / (2 * np.where(r0 > 0, r0, 1.0)), 0.0)
        r_safe = np.where(r > 0, r, 1.0)

    out = {}
    if "newton" in kinds:
        out["newton"] = np.concatenate([w0[..., None], -(inner + outer) / (2 * n)], axis=2)
    if "green" in kinds:
        out["green"] = np.concatenate([-w0[..., None], (inner + outer - mirror) / (2 * n)], axis=2)
    if "newton_dr" in kinds:
        out["newton_dr"] = np.concatenate([dw0[..., None], (inner - outer) / (2 * r_safe)], axis=2)
    if "green_dr" in kinds:
        out["green_dr"] = np.concatenate(
            [-dw0[..., None], (outer - inner - mirror) / (2 * r_safe)], axis=2
        )
    return out


@lru_cache(maxsize=8)
def _node_table(grid: DiskGrid, kind: str):
    """Radial weights from every cell to every node ring, shape (n_r, n_r, modes)."""
    n_modes = grid.n_theta // 2 + 1
    edges = grid.r_edges
    rows = max(1, _CHUNK // (grid.n_r * n_modes))
    parts = []
    for lo in range(0, grid.n_r, rows):
        r = grid.r[lo : lo + rows]
        parts.append(_radial_kernels(r, edges[:-1], edges[1:], n_modes, (kind,))[kind])
    return np.concatenate(parts, axis=0)


def _spectral_on_grid(g: ScalarField, kind):
    grid = g.grid
    coeffs = np.einsum("ikn,kn->in", _node_table(grid, kind), _grid_modes(g))
    n = np.arange(coeffs.shape[1])
    coeffs = coeffs * grid.n_theta * np.exp(0.5j * n * grid.dtheta)
    return np.fft.irfft(coeffs, n=grid.n_theta, axis=1)


def _spectral_at_points(g: ScalarField, z, kind, gradient=False):
    grid = g.grid
    ghat = _grid_modes(g)
    n_modes = ghat.shape[1]
    fac = mode_factors(n_modes, grid.n_theta)
    n = np.arange(n_modes)
    edges = grid.r_edges
    z = np.asarray(z, dtype=complex).ravel()
    out = np.empty(z.size, dtype=complex if gradient else float)
    chunk = max(1, _CHUNK // (grid.n_r * n_modes))
    for lo in range(0, z.size, chunk):
        zc = z[lo : lo + chunk]
        theta = np.angle(zc)
        phase = np.exp(1j * n[None, :] * theta[:, None])
        if not gradient:
            w = _radial_kernels(np.abs(zc), edges[:-1], edges[1:], n_modes, (kind,))[kind]
            coeffs = np.einsum("tkn,kn->tn", w, ghat)
            out[lo : lo + chunk] = np.real(np.sum(fac * coeffs * phase, axis=1))
            continue
        r = np.maximum(np.abs(zc), 1e-12)
        tables = _radial_kernels(r, edges[:-1], edges[1:], n_modes, (kind, kind + "_dr"))
        u = np.einsum("tkn,kn->tn", tables[kind], ghat)
        du = np.einsum("tkn,kn->tn", tables[kind + "_dr"], ghat)
        half = fac[None, 1:] / 2
        nr = n[None, 1:] / r[:, None]
        plus = (du[:, 1:] + nr * u[:, 1:]) * phase[:, 1:]
        minus = (np.conj(du[:, 1:]) - nr * np.conj(u[:, 1:])) * np.conj(phase[:, 1:])
        total = du[:, 0] + np.sum(half * (plus + minus), axis=1)
        out[lo : lo + chunk] = 0.5 * np.exp(-1j * theta) * total
    return out


def _disk_log_kernel(d, rho):
    """(1/2pi) * integral of ln|z - w| over a disk of radius rho, at distance d."""
    with np.errstate(divide="ignore"):
        far = 0.5 * rho**2 * np.log(np.maximum(d, rho))
    near = 0.25 * (d**2 - rho**2) + 0.5 * rho**2 * np.log(rho)
    return np.where(d >= rho, far, near)


def _disk_cauchy_kernel(diff, rho):
    """(1/pi) * integral of 1/(z - w) over a disk of radius rho centered at z - diff."""
    d = np.abs(diff)
    with np.errstate(divide="ignore", invalid="ignore"):
        far = rho**2 / np.where(d > 0, diff, 1.0)
    return np.where(d >= rho, far, np.conj(diff))


def _cells(g: ScalarField):
    active = np.ones(g.grid.shape, dtype=bool) if g.mask is None else g.mask
    centers = g.grid.points[active]
    rho = np.sqrt(g.grid.areas[active] / np.pi)
    return centers, rho, g.values[active]


def _direct_sum(g: ScalarField, z, kind):
    centers, rho, values = _cells(g)
    z = np.asarray(z, dtype=complex).ravel()
    complex_out = kind in ("cauchy", "green_cauchy")
    out = np.empty(z.size, dtype=complex if complex_out else float)
    chunk = max(1, _CHUNK // max(centers.size, 1))
    for lo in range(0, z.size, chunk):
        diff = z[lo : lo + chunk, None] - centers[None, :]
        if kind == "log":
            k = _disk_log_kernel(np.abs(diff), rho)
        elif kind == "green":
            mirror = np.abs(1 - z[lo : lo + chunk, None] * np.conj(centers))
            k = 0.5 * rho**2 * np.log(mirror) - _disk_log_kernel(np.abs(diff), rho)
        elif kind == "cauchy":
            k = _disk_cauchy_kernel(diff, rho)
        else:
            zc = z[lo : lo + chunk, None]
            mirror = -rho**2 * np.conj(centers) / (1 - zc * np.conj(centers))
            k = mirror - _disk_cauchy_kernel(diff, rho)
        out[lo : lo + chunk] = k @ values
    return out


@lru_cache(maxsize=2)
def _direct_green_table(grid: DiskGrid):
    # kernel from cell (k, l) to node (i, j) depends on (j - l) only
    offsets = np.arange(grid.n_theta) * grid.dtheta
    rho = np.sqrt(grid.areas[:, 0] / np.pi)
    table = np.empty((grid.n_r, grid.n_r, grid.n_theta // 2 + 1), dtype=complex)
    for i, r in enumerate(grid.r):
        w = grid.r[:, None] * np.exp(-1j * offsets[None, :])
        mirror = 0.5 * rho[:, None] ** 2 * np.log(np.abs(1 - r * np.conj(w)))
        kern = mirror - _disk_log_kernel(np.abs(r - w), rho[:, None])
        table[i] = np.fft.rfft(kern, axis=1)
    return table


def _direct_green_on_grid(g: ScalarField):
    spectrum = np.einsum("ikn,kn->in", _direct_green_table(g.grid), np.fft.rfft(g.values, axis=1))
    return np.fft.irfft(spectrum, n=g.grid.n_theta, axis=1)


def _resolve_method(g: ScalarField, method):
    if method not in ("auto", "spectral", "direct"):
        raise DomainError(f"unknown potential method {method!r}")
    if method == "auto":
        return "spectral" if isinstance(g.grid, DiskGrid) else "direct"
    if method == "spectral" and not isinstance(g.grid, DiskGrid):
        raise DomainError("the spectral potential needs a DiskGrid density")
    return method


def _target_points(targets):
    if isinstance(targets, (DiskGrid, CartesianGrid)):
        return targets.points, targets
    z = np.asarray(targets, dtype=complex)
    return z, None


def _wrap(values, z, grid):
    values = np.asarray(values).reshape(np.shape(z))
    if grid is None:
        return values if values.ndim else values.item()
    return ScalarField(grid, values)


def _check_in_disk(z, closed=True):
    radius = np.abs(z)
    bad = radius > 1 + 1e-12 if closed else radius >= 1
    if np.any(bad):
        raise DomainError("exterior evaluation: targets must lie in the unit disk")


def poisson_kernel(z, t):
    """Poisson kernel (1 - |z|^2) / |1 - z e^{-it}|^2 of the unit disk."""
    z = np.asarray(z, dtype=complex)
    _check_in_disk(z, closed=False)
    return (1 - np.abs(z) ** 2) / np.abs(1 - z * np.exp(-1j * np.asarray(t))) ** 2


def green_function(z, w):
    """Dirichlet Green function ln|(1 - z conj(w)) / (z - w)| of the unit disk."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    _check_in_disk(z, closed=False)
    _check_in_disk(w, closed=False)
    if np.any(z == w):
        raise DomainError("kernel diagonal: Green function is singular at z = w")
    return np.log(np.abs((1 - z * np.conj(w)) / (z - w)))


def poisson_integral(phi: BoundaryData, targets):
    """Harmonic extension of the boundary data, evaluated at targets."""
    z, grid = _target_points(targets)
    _check_in_disk(z)
    c = phi.coefficients * phi.factors
    return _wrap(np.real(P.polyval(z.ravel(), c)), z, grid)


def poisson_gradient(phi: BoundaryData, targets):
    """Complex derivative d/dz of the Poisson integral."""
    z, _ = _target_points(targets)
    _check_in_disk(z)
    c = phi.coefficients * phi.factors / 2
    n = np.arange(c.size)
    return P.polyval(z, (n * c)[1:])


def newtonian_potential(g: ScalarField, targets=None, method="auto"):
    """N_g(z) = (1/2pi) * integral of ln|z - w| g(w) dm(w)."""
    method = _resolve_method(g, method)
    targets = g.grid if targets is None else targets
    z, grid = _target_points(targets)
    if method == "spectral":
        if isinstance(grid, DiskGrid) and grid == g.grid:
            return ScalarField(grid, _spectral_on_grid(g, "newton"))
        return _wrap(_spectral_at_points(g, z, "newton"), z, grid)
    return _wrap(_direct_sum(g, z, "log"), z, grid)


def green_potential(g: ScalarField, targets=None, method="auto"):
    """G_g(z) = (1/2pi) * integral of G(z, w) g(w) dm(w) with the disk Green function."""
    if not isinstance(g.grid, DiskGrid):
        raise DomainError("the Green potential needs a DiskGrid density")
    method = _resolve_method(g, method)
    targets = g.grid if targets is None else targets
    z, grid = _target_points(targets)
    _check_in_disk(z)
    same_grid = isinstance(grid, DiskGrid) and grid == g.grid
    if method == "spectral":
        if same_grid:
            return ScalarField(grid, _spectral_on_grid(g, "green"))
        return _wrap(_spectral_at_points(g, z, "green"), z, grid)
    if same_grid:
        return ScalarField(grid, _direct_green_on_grid(g))
    return _wrap(_direct_sum(g, z, "green"), z, grid)


def newtonian_gradient(g: ScalarField, targets, method="auto"):
    """Complex derivative dN_g/dz; the real gradient is 2 * conj of it."""
    method = _resolve_method(g, method)
    z, _ = _target_points(targets)
    if method == "spectral":
        values = _spectral_at_points(g, z, "newton", gradient=True)
    else:
        values = 0.25 * _direct_sum(g, z, "cauchy")
    return values.reshape(np.shape(z))


def green_gradient(g: ScalarField, targets, method="auto"):
    """Complex derivative dG_g/dz of the Green potential."""
    method = _resolve_method(g, method)
    z, _ = _target_points(targets)
    _check_in_disk(z)
    if method == "spectral":
        values = _spectral_at_points(g, z, "green", gradient=True)
    else:
        values = 0.25 * _direct_sum(g, z, "green_cauchy")
    return values.reshape(np.shape(z))


def cauchy_transform(q: ScalarField, targets):
    """(1/pi) * integral of q(w) / (z - w) dm(w), cell by cell."""
    z, _ = _target_points(targets)
    return _direct_sum(q, z, "cauchy").reshape(np.shape(z))


def trace_samples(grid: DiskGrid):
    m = 16
    while m < 2 * grid.n_theta:
        m *= 2
    return m


def boundary_trace(g: ScalarField, m=None):
    """Restriction of N_g to the unit circle as BoundaryData."""
    if not isinstance(g.grid, DiskGrid):
        raise DomainError("boundary traces need a DiskGrid density")
    m = trace_samples(g.grid) if m is None else m
    t = 2 * np.pi * np.arange(m) / m
    return BoundaryData(_spectral_at_points(g, np.exp(1j * t), "newton"))


def solve_poisson_dirichlet(g: ScalarField, phi: BoundaryData, tolerance=1e-3, check=True):
    """Solve Laplace(U) = g in the disk with U = phi on the circle.

    U is built as N_g - P[N_g on the circle] + P[phi] and compared with the
    Green representation P[phi] - G_g evaluated by direct cell sums. The gap,
    relative to max(1, sup|g|), is stored in the diagnostics.
    """
    if not isinstance(g.grid, DiskGrid):
        raise DomainError("the Dirichlet problem is solved on a DiskGrid")
    grid = g.grid
    harmonic = poisson_integral(phi, grid).values
    newton = newtonian_potential(g).values
    correction = poisson_integral(boundary_trace(g), grid).values
    values = newton - correction + harmonic
    gap = representation_gap(g, values - harmonic)
    logger.log(f"poisson dirichlet: representation gap {gap:.3e}", "gray")
    if check and gap > tolerance:
        raise RepresentationError(
            f"representation mismatch: gap {gap:.3e} exceeds tolerance {tolerance:.1e}"
        )
    return ScalarField(grid, values, diagnostics={"representation_gap": gap})


def representation_gap(g: ScalarField, minus_green):
    """Max distance between -G_g given and the direct Green potential, relative to sup|g|."""
    direct = _direct_green_on_grid(g)
    scale = max(1.0, float(np.max(np.abs(g.values))))
    return float(np.max(np.abs(minus_green + direct))) / scale


def polar_laplacian(values, grid: DiskGrid):
    """Five-point polar Laplacian on interior rings 1..n_r-2 (others are NaN)."""
    u = np.asarray(values, dtype=float)
    r, dr, dth = grid.r, grid.dr, grid.dtheta
    out = np.full(u.shape, np.nan)
    rp = (r[1:-1] + 0.5 * dr)[:, None]
    rm = (r[1:-1] - 0.5 * dr)[:, None]
    radial = (rp * (u[2:] - u[1:-1]) - rm * (u[1:-1] - u[:-2])) / (r[1:-1, None] * dr**2)
    ang = np.roll(u, -1, axis=1) - 2 * u + np.roll(u, 1, axis=1)
    out[1:-1] = radial + ang[1:-1] / (r[1:-1, None] ** 2 * dth**2)
    return out


@lru_cache(maxsize=4)
def polar_laplacian_matrix(grid: DiskGrid):
    """Sparse -Laplace_h with zero Dirichlet data on the circle, in ravel order.

    The same flux form as polar_laplacian, closed by U = 0 at r = 1 (half a
    cell beyond the last ring) and by zero flux through the origin.
    """
    n_r, n_t = grid.shape
    r, dr, dth = grid.r, grid.dr, grid.dtheta
    idx = np.arange(n_r * n_t).reshape(n_r, n_t)
    ring = np.repeat(np.arange(n_r), n_t)
    scale = 1.0 / (r[ring] * dr**2)

    rp = np.where(np.arange(n_r) < n_r - 1, r + 0.5 * dr, 0.0)[ring]
    rm = (r - 0.5 * dr)[ring]
    outer_wall = np.where(ring == n_r - 1, 2.0, 0.0)  # r=1 at distance dr/2
    ang = 1.0 / (r[ring] ** 2 * dth**2)
    diag = scale * (rp + rm + outer_wall) + 2 * ang

    rows = [idx.ravel()]
    cols = [idx.ravel()]
    vals = [diag]
    inner = ring > 0
    rows.append(idx.ravel()[inner])
    cols.append(idx.ravel()[inner] - n_t)
    vals.append(-(scale * rm)[inner])
    outer = ring < n_r - 1
    rows.append(idx.ravel()[outer])
    cols.append(idx.ravel()[outer] + n_t)
    vals.append(-(scale * rp)[outer])
    for shift in (1, -1):
        rows.append(idx.ravel())
        cols.append(np.roll(idx, -shift, axis=1).ravel())
        vals.append(-ang)
    n = n_r * n_t
    return coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsc()


def laplacian_residual(U: ScalarField, g, skip_layers=2):
    """Max |Laplace_h U - g| over rings away from the origin and the circle."""
    grid = U.grid
    if not isinstance(grid, DiskGrid):
        raise DomainError("the Laplacian residual is defined on a DiskGrid")
    if grid.n_r < 32 or grid.n_theta < 32:
        raise DomainError("grid too coarse: the residual needs n_r, n_theta >= 32")
    skip = max(1, int(skip_layers))
    rhs = g.values if isinstance(g, ScalarField) else np.asarray(g, dtype=float)
    lap = polar_laplacian(U.values, grid)
    return float(np.max(np.abs(lap - rhs)[skip : grid.n_r - skip]))


def prop2_density(alpha, grid: DiskGrid):
    """Cell averages of 1/(r^2 (1 - ln r)^alpha), integrable with unbounded potential."""
    if not 1 < alpha < 2:
        raise DomainError(f"alpha must lie in (1, 2), got {alpha}")
    edges = grid.r_edges
    with np.errstate(divide="ignore"):
        anti = np.where(edges > 0, (1 - np.log(np.where(edges > 0, edges, 1.0))) ** (1 - alpha), 0.0)
    anti = anti / (alpha - 1)
    ring_mass = np.diff(anti)
    ring_area = 0.5 * (edges[1:] ** 2 - edges[:-1] ** 2)
    values = np.broadcast_to((ring_mass / ring_area)[:, None], grid.shape)
    return ScalarField(grid, values.copy())


def random_smooth_density(grid: DiskGrid, rng, modes=3):
    """Random combination of r^k cos(n theta), r^k sin(n theta) for k <= 2, n <= modes."""
    r = grid.r[:, None]
    theta = grid.theta[None, :]
    values = np.zeros(grid.shape)
    for n in range(modes + 1):
        c = rng.normal(size=6)
        radial_c = c[0] + c[1] * r + c[2] * r**2
        radial_s = c[3] + c[4] * r + c[5] * r**2
        values = values + radial_c * np.cos(n * theta) + radial_s * np.sin(n * theta)
    return ScalarField(grid, values)


def _holder_bound(grid: DiskGrid, p):
    # sup over node radii and the circle of the L^q norm of the cell kernel
    q = np.inf if p == 1 else p / (p - 1)
    centers = grid.points.ravel()
    areas = grid.areas.ravel()
    rho = np.sqrt(areas / np.pi)
    targets = np.append(grid.r, 1.0) * np.exp(0.5j * grid.dtheta)
    kernel = np.abs(_disk_log_kernel(np.abs(targets[:, None] - centers[None, :]), rho)) / areas
    if np.isinf(q):
        return float(np.max(kernel))
    return float(np.max(np.sum(kernel**q * areas, axis=1) ** (1 / q)))


@lru_cache(maxsize=16)
def measure_potential_constant(grid: DiskGrid, p=2.0, trials=32, seed=0):
    """Constant M with sup|N_g| <= M ||g||_p on the disk for densities on the grid.

    Combines random smooth trial densities with the Holder-extremal ones, whose
    ratio is the L^q norm of the discrete kernel.
    """
    if not p > 1:
        raise DomainError(f"p must exceed 1, got {p}")
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(trials):
        g = random_smooth_density(grid, rng)
        sup = max(newtonian_potential(g).sup_norm(), boundary_trace(g).sup_norm())
        best = max(best, sup / g.lp_norm(p))
    holder = _holder_bound(grid, p)
    logger.log(f"potential constant: trials {best:.4f}, holder {holder:.4f} (p={p})", "gray")
    return max(best, holder)
