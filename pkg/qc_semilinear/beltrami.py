"""Beltrami coefficients and the normalized quasiconformal map onto the disk.

The map is built in two stages. Stage one solves the Beltrami equation on a
padded Cartesian grid by the Neumann series for q = mu*S(q) + mu, where S is
the Beurling transform, and sets w = z + C(q) with C the Cauchy transform.
Stage two corrects the image of the domain to the unit disk with the
Theodorsen conformal map and fixes the normalization.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as P
from pydantic import BaseModel, ConfigDict, Field
from scipy.interpolate import CloughTocher2DInterpolator, CubicSpline, LinearNDInterpolator
from scipy.signal import fftconvolve
from scipy.spatial import cKDTree

from qc_semilinear.errors import ConvergenceError, DomainError, OrientationError, UnsupportedError
from qc_semilinear.geometry import CartesianGrid, DiskGrid, JordanDomain, unit_disk
from qc_semilinear.logging import logger
from qc_semilinear.potential import ScalarField, cauchy_transform, mode_factors


class BeltramiOptions(BaseModel):
    """Resolution and tolerances of the two-stage Beltrami solver."""

    model_config = ConfigDict(extra="forbid")

    grid_size: int = Field(256, ge=32, description="Cartesian nodes per side in stage one")
    padding: float = Field(1.25, gt=1.0, description="Grid half-width over the domain radius")
    k_max: float = Field(0.5, gt=0.0, le=0.99, description="Largest accepted |mu|")
    neumann_tol: float = Field(1e-10, gt=0.0)
    max_neumann: int = Field(200, ge=1)
    boundary_samples: int = Field(512, ge=64)
    theodorsen_tol: float = Field(1e-12, gt=0.0)
    max_theodorsen: int = Field(200, ge=1)
    theodorsen_relaxation: float = Field(1.0, gt=0.0, le=1.0)
    newton_tol: float = Field(1e-10, gt=0.0)
    max_newton: int = Field(50, ge=1)
    max_inversion_failures: float = Field(1e-3, ge=0.0, description="Tolerated failed fraction")
    self_test_tol: float = Field(1e-6, gt=0.0)
    rotation: float = Field(0.0, description="arg of the image of the marked boundary point")


DET_TOL = 1e-8


def _as_xy(z):
    z = np.asarray(z, dtype=complex).ravel()
    return np.column_stack([z.real, z.imag])


@dataclass(frozen=True, eq=False)
class MatrixField:
    """Symmetric coefficient matrices [[a11, a12], [a12, a22]] with det A = 1, sampled at points.

    When `function` is set it is the exact field z -> (a11, a12, a22) and the
    samples only serve output and checks.
    """

    points: np.ndarray
    a11: np.ndarray
    a12: np.ndarray
    a22: np.ndarray
    K: float
    function: Optional[Callable] = None
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if not self.K >= 1:
            raise DomainError(f"ellipticity constant K must be >= 1, got {self.K}")
        pts = np.asarray(self.points, dtype=complex)
        object.__setattr__(self, "points", pts)
        for name in ("a11", "a12", "a22"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), pts.shape)
            object.__setattr__(self, name, np.array(arr))
        det = self.a11 * self.a22 - self.a12**2
        scale = np.maximum(1.0, np.abs(self.a11 * self.a22))
        if np.any(np.abs(det - 1) > DET_TOL * scale):
            raise DomainError(f"coefficient matrix must have det A = 1, got {det.ravel()[np.argmax(np.abs(det - 1))]:.6g}")

    @classmethod
    def from_function(cls, fn, points, K):
        a11, a12, a22 = fn(np.asarray(points, dtype=complex))
        return cls(points, a11, a12, a22, K, fn)

    @classmethod
    def constant(cls, a11, a12, a22, points=(0j,)):
        trace, det = a11 + a22, a11 * a22 - a12**2
        disc = np.sqrt(max(trace**2 - 4 * det, 0.0))
        lam_max, lam_min = 0.5 * (trace + disc), 0.5 * (trace - disc)
        if lam_min <= 0:
            raise DomainError("coefficient matrix is not positive definite")
        K = max(lam_max, 1.0 / lam_min, 1.0)

        def fn(z):
            shape = np.shape(z)
            return np.full(shape, a11), np.full(shape, a12), np.full(shape, a22)

        return cls.from_function(fn, np.asarray(points), float(K))

    @classmethod
    def identity(cls, points=(0j,)):
        return cls.constant(1.0, 0.0, 1.0, points)

    def at(self, z):
        """Coefficients at arbitrary points (exact, or linear interpolation)."""
        z = np.asarray(z, dtype=complex)
        if self.function is not None:
            return tuple(np.broadcast_to(v, z.shape) for v in self.function(z))
        if "interp" not in self._cache:
            values = np.column_stack([self.a11.ravel(), self.a12.ravel(), self.a22.ravel()])
            self._cache["interp"] = LinearNDInterpolator(_as_xy(self.points), values)
        vals = self._cache["interp"](_as_xy(z))
        return tuple(vals[:, k].reshape(z.shape) for k in range(3))


@dataclass(frozen=True, eq=False)
class BeltramiField:
    """Complex dilatation mu with sup|mu| <= k_bound < 1."""

    points: np.ndarray
    mu: np.ndarray
    k_bound: float
    function: Optional[Callable] = None
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex)
        mu = np.array(np.broadcast_to(np.asarray(self.mu, dtype=complex), pts.shape))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "mu", mu)
        if not 0 <= self.k_bound < 1:
            raise DomainError(f"degenerate dilatation: k bound {self.k_bound} is not below 1")

    @classmethod
    def from_function(cls, fn, points, k_bound):
        return cls(points, fn(np.asarray(points, dtype=complex)), k_bound, fn)

    @classmethod
    def zero(cls):
        return cls.from_function(lambda z: np.zeros(np.shape(z), dtype=complex), np.array([0j]), 0.0)

    def at(self, z):
        z = np.asarray(z, dtype=complex)
        if self.function is not None:
            return np.broadcast_to(self.function(z), z.shape)
        if "interp" not in self._cache:
            self._cache["interp"] = LinearNDInterpolator(
                _as_xy(self.points), self.mu.ravel(), fill_value=0.0
            )
        return self._cache["interp"](_as_xy(z)).reshape(z.shape)


def _mu_from_entries(a11, a12, a22):
    if np.any((1 + a11) * (1 + a22) - a12**2 <= 0):
        raise DomainError("degenerate node: det(I + A) <= 0")
    return (a22 - a11 - 2j * a12) / (2 + a11 + a22)


def _entries_from_mu(mu):
    mu = np.asarray(mu, dtype=complex)
    m2 = np.abs(mu) ** 2
    if np.any(m2 >= 1):
        raise DomainError("degenerate dilatation: |mu| >= 1")
    denom = 1 - m2
    return np.abs(1 - mu) ** 2 / denom, -2 * mu.imag / denom, np.abs(1 + mu) ** 2 / denom


def matrix_to_mu(A: MatrixField) -> BeltramiField:
    """Complex dilatation of the coefficient field (the Beltrami coefficient of A)."""
    mu = _mu_from_entries(A.a11, A.a12, A.a22)
    fn = None
    if A.function is not None:
        fn = lambda z: _mu_from_entries(*A.function(z))  # noqa: E731
    return BeltramiField(A.points, mu, (A.K - 1) / (A.K + 1), fn)


def mu_to_matrix(mu: BeltramiField) -> MatrixField:
    """Coefficient field with determinant one whose dilatation is mu."""
    a11, a12, a22 = _entries_from_mu(mu.mu)
    k = mu.k_bound
    fn = None
    if mu.function is not None:
        fn = lambda z: _entries_from_mu(mu.function(z))  # noqa: E731
    return MatrixField(mu.points, a11, a12, a22, (1 + k) / (1 - k), fn)


@dataclass(frozen=True)
class EllipticityReport:
    K_measured: float
    worst_point: complex
    det_error: float
    passed: bool


def ellipticity_check(A: MatrixField, K=None, det_tol=1e-10):
    """Largest eigenvalue over the samples and the worst deviation of det A from 1."""
    K = A.K if K is None else K
    trace = A.a11 + A.a22
    det = A.a11 * A.a22 - A.a12**2
    disc = np.sqrt(np.maximum(trace**2 - 4 * det, 0.0))
    lam_max = 0.5 * (trace + disc)
    lam_min = 0.5 * (trace - disc)
    with np.errstate(divide="ignore"):
        spread = np.maximum(lam_max, 1.0 / np.where(lam_min > 0, lam_min, 0.0))
    worst = int(np.argmax(spread))
    det_error = float(np.max(np.abs(det - 1)))
    K_measured = float(spread.ravel()[worst])
    passed = K_measured <= K + 1e-9 and det_error <= det_tol
    return EllipticityReport(K_measured, complex(A.points.ravel()[worst]), det_error, passed)


@lru_cache(maxsize=4)
def _beurling_multiplier(n, spacing):
    k = 2 * np.pi * np.fft.fftfreq(2 * n, d=spacing)
    kk = k[None, :] + 1j * k[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        mult = np.where(kk != 0, np.conj(kk) / kk, 0.0)
    return mult


def beurling_transform(values, grid: CartesianGrid):
    """Beurling transform S (d/dz of the Cauchy transform) as a Fourier multiplier."""
    n = grid.n
    padded = np.zeros((2 * n, 2 * n), dtype=complex)
    padded[:n, :n] = values
    out = np.fft.ifft2(np.fft.fft2(padded) * _beurling_multiplier(n, grid.spacing))
    return out[:n, :n]


def beurling_self_test(grid: CartesianGrid, tolerance=1e-6):
    """Check S[d phi/dz-bar] = d phi/dz for a Gaussian; returns the relative error."""
    sigma = grid.half_width / 6
    z = grid.points - grid.center
    phi = np.exp(-np.abs(z) ** 2 / sigma**2)
    dbar = -z / sigma**2 * phi
    d = -np.conj(z) / sigma**2 * phi
    err = float(np.linalg.norm(beurling_transform(dbar, grid) - d) / np.linalg.norm(d))
    if err > tolerance:
        raise ConvergenceError(f"Beurling self-test failed: relative error {err:.2e}")
    return err


def _cauchy_kernel(grid: CartesianGrid):
    n = grid.n
    m = np.arange(-(n - 1), n)
    offsets = m[None, :] + 1j * m[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(offsets != 0, grid.spacing / (np.pi * offsets), 0.0)


def _cauchy_on_grid(q, grid: CartesianGrid):
    return fftconvolve(q, _cauchy_kernel(grid), mode="same")


def _cauchy_at(q, grid: CartesianGrid, z):
    field_re = ScalarField(grid, q.real)
    field_im = ScalarField(grid, q.imag)
    return cauchy_transform(field_re, z) + 1j * cauchy_transform(field_im, z)


def _neumann(mu, grid: CartesianGrid, opts: BeltramiOptions):
    q = mu.copy()
    previous = np.inf
    growth = 0
    for step in range(1, opts.max_neumann + 1):
        q_next = mu * beurling_transform(q, grid) + mu
        norm = np.linalg.norm(q_next)
        change = np.linalg.norm(q_next - q) / norm if norm > 0 else 0.0
        q = q_next
        if change <= opts.neumann_tol:
            logger.log(f"neumann series converged in {step} steps", "gray")
            return q
        growth = growth + 1 if change > previous else 0
        if growth >= 2:
            raise ConvergenceError(
                f"dilatation too strong for grid: Neumann residual grew to {change:.2e}"
            )
        previous = change
    raise ConvergenceError(f"dilatation too strong for grid: no convergence in {opts.max_neumann} steps")


class TheodorsenMap:
    """Conformal map F(zeta) = zeta * exp(G(zeta)) of the disk onto a starlike region.

    The region is given by boundary samples around the origin; the boundary
    correspondence theta(t) solves theta - t = conj[ln rho(theta)].
    """

    def __init__(self, boundary, tol=1e-12, max_iter=200, relaxation=1.0):
        theta = np.unwrap(np.angle(boundary))
        steps = np.diff(theta)
        closing = theta[0] + 2 * np.pi - theta[-1]
        if np.any(steps <= 0) or closing <= 0:
            raise UnsupportedError(
                "stage-2 unsupported image: boundary is not starlike around the center"
            )
        knots = np.append(theta, theta[0] + 2 * np.pi)
        log_rho = np.log(np.abs(boundary))
        self.theta0 = theta[0]
        self._log_rho = CubicSpline(knots, np.append(log_rho, log_rho[0]), bc_type="periodic")

        n = 2 * boundary.size
        self.t = 2 * np.pi * np.arange(n) / n
        sign = -1j * np.sign(np.fft.fftfreq(n))
        sign[n // 2] = 0
        # theta(t) - t; the constant theta0 only rotates the parametrization
        eps = np.full(n, self.theta0)
        for it in range(1, max_iter + 1):
            values = self.log_rho(self.t + eps)
            eps_next = np.real(np.fft.ifft(sign * np.fft.fft(values))) + self.theta0
            change = float(np.max(np.abs(eps_next - eps)))
            if not np.isfinite(change) or change > 2 * np.pi:
                raise ConvergenceError("Theodorsen iteration diverged")
            eps = eps + relaxation * (eps_next - eps)
            if change <= tol:
                break
        else:
            raise ConvergenceError(f"Theodorsen iteration: no convergence in {max_iter} steps")
        logger.log(f"theodorsen converged in {it} steps", "gray")
        self.eps = eps
        self.eps_hat = np.fft.rfft(eps) / n
        self.eps_fac = mode_factors(self.eps_hat.size, n)

        coeffs = np.fft.rfft(self.log_rho(self.t + eps)) / n
        g = coeffs[: n // 2].copy()
        g[1:] *= 2
        keep = np.nonzero(np.abs(g) > 1e-16 * max(1.0, np.abs(g).max()))[0]
        g = g[: keep.max() + 1] if keep.size else g[:1]
        # the constant rotation theta0 enters G as i*theta0
        g[0] = g[0] + 1j * self.theta0
        self.g = g
        self.dg = P.polyder(g) if g.size > 1 else np.zeros(1, dtype=complex)

    def log_rho(self, theta):
        shifted = self.theta0 + np.mod(np.asarray(theta) - self.theta0, 2 * np.pi)
        return self._log_rho(shifted)

    def rho(self, theta):
        return np.exp(self.log_rho(theta))

    def boundary_angle(self, t):
        """Polar angle theta(t) of the image of e^{it}."""
        n = np.arange(self.eps_hat.size)
        phase = np.exp(1j * np.outer(np.asarray(t).ravel(), n))
        eps = np.real(phase @ (self.eps_fac * self.eps_hat))
        return (np.asarray(t).ravel() + eps).reshape(np.shape(t))

    def _boundary_angle_dt(self, t):
        n = np.arange(self.eps_hat.size)
        phase = np.exp(1j * np.outer(np.asarray(t).ravel(), n))
        return 1 + np.real(phase @ (1j * n * self.eps_fac * self.eps_hat))

    def param_of_angle(self, phi):
        """Circle parameter t with theta(t) = phi (mod 2pi), by Newton iteration."""
        phi = np.asarray(phi, dtype=float).ravel()
        nodes = self.t + self.eps
        start = nodes[0]
        phi = start + np.mod(phi - start, 2 * np.pi)
        t = np.interp(phi, np.append(nodes, start + 2 * np.pi), np.append(self.t, 2 * np.pi))
        for _ in range(30):
            step = (self.boundary_angle(t) - phi) / self._boundary_angle_dt(t)
            t = t - step
            if np.max(np.abs(step)) < 1e-14:
                break
        return t

    def __call__(self, zeta):
        zeta = np.asarray(zeta, dtype=complex)
        return zeta * np.exp(P.polyval(zeta, self.g))

    def derivative(self, zeta):
        zeta = np.asarray(zeta, dtype=complex)
        return np.exp(P.polyval(zeta, self.g)) * (1 + zeta * P.polyval(zeta, self.dg))

    def inverse(self, w, tol=1e-13, max_iter=40):
        """Preimages of points w of the region, by Newton iteration from a polar guess."""
        w = np.asarray(w, dtype=complex).ravel()
        phi = np.angle(w)
        radius = np.abs(w) / self.rho(phi)
        zeta = np.minimum(radius, 1.0) * np.exp(1j * self.param_of_angle(phi))
        active = np.ones(w.size, dtype=bool)
        for _ in range(max_iter):
            idx = np.nonzero(active)[0]
            if idx.size == 0:
                break
            z = zeta[idx]
            step = (self(z) - w[idx]) / self.derivative(z)
            z = z - step
            big = np.abs(z) > 1
            z[big] = z[big] / np.abs(z[big])
            zeta[idx] = z
            active[idx] = np.abs(step) > tol
        return zeta


@dataclass(frozen=True, eq=False)
class QuasiconformalMap:
    """Normalized map omega from the domain onto the unit disk and its samples.

    Forward values live on a Cartesian grid (NaN outside the domain); the
    inverse, once computed, lives on a DiskGrid.
    """

    domain: JordanDomain
    grid: CartesianGrid
    values: np.ndarray
    boundary_params: np.ndarray
    boundary_points: np.ndarray
    boundary_images: np.ndarray
    center: complex
    marked: complex
    rotation: float = 0.0
    inverse_grid: Optional[DiskGrid] = None
    inverse_values: Optional[np.ndarray] = None
    jacobian: Optional[ScalarField] = None
    exact_forward: Optional[Callable] = None
    exact_inverse: Optional[Callable] = None
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    @property
    def inside(self):
        return np.isfinite(self.values)

    @property
    def has_inverse(self):
        return self.inverse_values is not None

    def _interpolator(self):
        if "forward" not in self._cache:
            inside = self.inside
            pts = np.concatenate([self.grid.points[inside], self.boundary_points])
            vals = np.concatenate([self.values[inside], self.boundary_images])
            self._cache["forward"] = CloughTocher2DInterpolator(_as_xy(pts), vals)
        return self._cache["forward"]

    def forward(self, z):
        """omega(z); NaN outside the sampled region."""
        z = np.asarray(z, dtype=complex)
        if self.exact_forward is not None:
            return self.exact_forward(z)
        return self._interpolator()(_as_xy(z)).reshape(z.shape)

    def boundary_parameter(self, t):
        """Domain boundary parameter s whose image is e^{it}."""
        angles = np.unwrap(np.angle(self.boundary_images))
        params = np.unwrap(self.boundary_params)
        start = angles[0]
        t = start + np.mod(np.asarray(t, dtype=float) - start, 2 * np.pi)
        s = np.interp(t, np.append(angles, start + 2 * np.pi), np.append(params, params[0] + 2 * np.pi))
        return np.mod(s, 2 * np.pi)

    @classmethod
    def from_closed_form(cls, domain, forward, inverse, grid_size=256, padding=1.25, samples=512):
        """Map sampled from exact forward and inverse formulas."""
        center = domain.centroid
        grid = CartesianGrid(grid_size, padding * domain.max_radius, center)
        inside = domain.grid_mask(grid)
        values = np.full(grid.shape, np.nan, dtype=complex)
        values[inside] = forward(grid.points[inside])
        s, z_b = domain.boundary_points(samples)
        return cls(
            domain, grid, values, s, z_b, forward(z_b), center, z_b[0],
            exact_forward=forward, exact_inverse=inverse,
        )


def solve_beltrami_disk(mu: BeltramiField, domain: JordanDomain | None = None, opts=None):
    """Normalized quasiconformal map of the domain onto the disk with dilatation mu.

    omega(centroid) = 0 and arg omega(marked boundary point) = opts.rotation.
    """
    domain = unit_disk() if domain is None else domain
    opts = BeltramiOptions() if opts is None else opts
    center = domain.centroid
    grid = CartesianGrid(opts.grid_size, opts.padding * domain.max_radius, center)
    inside = domain.grid_mask(grid)
    logger.log(f"beltrami stage 1 on {domain.name}: {grid.n}x{grid.n} grid", "blue")

    mu_grid = np.where(inside, mu.at(grid.points), 0.0)
    k = float(np.max(np.abs(mu_grid)))
    if k > opts.k_max:
        raise DomainError(f"dilatation exceeds k_max: sup|mu| = {k:.4f} > {opts.k_max}")
    beurling_self_test(grid, opts.self_test_tol)

    q = _neumann(mu_grid, grid, opts) if k > 0 else np.zeros(grid.shape, dtype=complex)
    image_grid = grid.points + _cauchy_on_grid(q, grid)
    s_b, z_b = domain.boundary_points(opts.boundary_samples)
    extra = _cauchy_at(q, grid, np.append(z_b, center))
    image_b = z_b + extra[:-1]
    c = center + extra[-1]

    logger.log("beltrami stage 2: conformal correction", "blue")
    conformal = TheodorsenMap(
        image_b - c, opts.theodorsen_tol, opts.max_theodorsen, opts.theodorsen_relaxation
    )
    t_marked = conformal.param_of_angle(np.angle(image_b[0] - c))[0]
    phase = np.exp(1j * (opts.rotation - t_marked))
    values = np.full(grid.shape, np.nan, dtype=complex)
    values[inside] = phase * conformal.inverse(image_grid[inside] - c)
    images = phase * np.exp(1j * conformal.param_of_angle(np.angle(image_b - c)))
    return QuasiconformalMap(
        domain, grid, values, s_b, z_b, images, center, z_b[0], opts.rotation
    )


def rotate_map(qc_map: QuasiconformalMap, angle):
    """The same map followed by the rotation w -> e^{i angle} w."""
    phase = np.exp(1j * angle)
    forward = inverse = None
    if qc_map.exact_forward is not None:
        forward = lambda z: phase * qc_map.exact_forward(z)  # noqa: E731
    if qc_map.exact_inverse is not None:
        inverse = lambda w: qc_map.exact_inverse(np.conj(phase) * w)  # noqa: E731
    return replace(
        qc_map,
        values=qc_map.values * phase,
        boundary_images=qc_map.boundary_images * phase,
        rotation=qc_map.rotation + angle,
        inverse_grid=None,
        inverse_values=None,
        jacobian=None,
        exact_forward=forward,
        exact_inverse=inverse,
    )


def _newton_inverse(evaluate, z, w, delta, opts):
    """Damped Newton on forward(z) = w from the starts z, one-sided near the hull."""
    z = z.copy()
    res = evaluate(z) - w

    def partial(zi, f0, step):
        plus, minus = evaluate(zi + step), evaluate(zi - step)
        central = (plus - minus) / (2 * delta)
        one_sided = np.where(np.isfinite(plus), (plus - f0) / delta, (f0 - minus) / delta)
        return np.where(np.isfinite(central), central, one_sided)

    active = np.abs(res) > opts.newton_tol
    for _ in range(opts.max_newton):
        idx = np.nonzero(active & np.isfinite(res))[0]
        if idx.size == 0:
            break
        zi, ri = z[idx], res[idx]
        f0 = ri + w[idx]
        fx = partial(zi, f0, delta)
        fy = partial(zi, f0, 1j * delta)
        det = fx.real * fy.imag - fy.real * fx.imag
        with np.errstate(divide="ignore", invalid="ignore"):
            dx = (-fy.imag * ri.real + fy.real * ri.imag) / det
            dy = (fx.imag * ri.real - fx.real * ri.imag) / det
        step = np.where(np.isfinite(dx + dy), dx + 1j * dy, 0.0)
        new_res = np.full(idx.size, np.nan, dtype=complex)
        scale = np.ones(idx.size)
        for _ in range(10):
            trial = evaluate(zi + scale * step) - w[idx]
            worse = ~np.isfinite(trial) | (np.abs(trial) > np.abs(ri))
            new_res = np.where(worse, new_res, trial)
            if not worse.any():
                break
            scale = np.where(worse, scale / 2, scale)
        ok = np.isfinite(new_res) & (step != 0)
        z[idx[ok]] = zi[ok] + scale[ok] * step[ok]
        res[idx[ok]] = new_res[ok]
        active[idx] = ok & (np.abs(np.where(ok, new_res, 0)) > opts.newton_tol)
    return z, res


def invert_map(qc_map: QuasiconformalMap, disk_grid: DiskGrid, opts=None):
    """Sample omega^{-1} at the nodes of a DiskGrid."""
    opts = BeltramiOptions() if opts is None else opts
    w = disk_grid.points.ravel()
    if qc_map.exact_inverse is not None:
        inverse = qc_map.exact_inverse(disk_grid.points)
        return replace(qc_map, inverse_grid=disk_grid, inverse_values=inverse, jacobian=None)

    inside = qc_map.inside
    forward = qc_map._interpolator()
    delta = 1e-7 * qc_map.domain.diameter
    tol = max(1e3 * opts.newton_tol, 1e-8)

    def evaluate(points):
        return forward(_as_xy(points))

    def failing(res):
        return ~np.isfinite(res) | (np.abs(res) > tol)

    sample_z = np.concatenate([qc_map.grid.points[inside], qc_map.boundary_points])
    sample_w = np.concatenate([qc_map.values[inside], qc_map.boundary_images])
    _, nearest = cKDTree(_as_xy(sample_w)).query(_as_xy(w))
    z, res = _newton_inverse(evaluate, sample_z[nearest], w, delta, opts)

    failed = failing(res)
    if failed.any():
        # restart from the nearest interior node, away from the sample hull
        _, nearest = cKDTree(_as_xy(qc_map.values[inside])).query(_as_xy(w[failed]))
        z_retry, res_retry = _newton_inverse(
            evaluate, qc_map.grid.points[inside][nearest], w[failed], delta, opts
        )
        better = np.isfinite(res_retry) & ~(np.abs(res_retry) >= np.abs(res[failed]))
        idx = np.nonzero(failed)[0][better]
        z[idx], res[idx] = z_retry[better], res_retry[better]
        failed = failing(res)

    fraction = np.count_nonzero(failed) / w.size
    if fraction > opts.max_inversion_failures:
        raise ConvergenceError(
            f"inversion failure: {np.count_nonzero(failed)} of {w.size} nodes did not converge, "
            f"worst at |w| = {np.abs(w[failed]).max():.4f}; boundary corners need a finer "
            f"beltrami.grid_size or more boundary samples"
        )
    if failed.any():
        logger.log(f"inverse map: {np.count_nonzero(failed)} nodes above tolerance", "yellow")
    return replace(
        qc_map, inverse_grid=disk_grid, inverse_values=z.reshape(disk_grid.shape), jacobian=None
    )


def _polar_jacobian(values, grid: DiskGrid):
    x = values
    dr, dth = grid.dr, grid.dtheta
    x_r = np.empty_like(x)
    x_r[1:-1] = (x[2:] - x[:-2]) / (2 * dr)
    x_r[0] = (-3 * x[0] + 4 * x[1] - x[2]) / (2 * dr)
    x_r[-1] = (3 * x[-1] - 4 * x[-2] + x[-3]) / (2 * dr)
    x_t = (np.roll(x, -1, axis=1) - np.roll(x, 1, axis=1)) / (2 * dth)
    return np.imag(np.conj(x_r) * x_t) / grid.r[:, None]


def jacobian_inverse(qc_map: QuasiconformalMap, p=2.0):
    """Jacobian determinant of omega^{-1} at the nodes of the inverse grid."""
    if not qc_map.has_inverse:
        raise DomainError("jacobian_inverse needs a map with sampled inverse (invert_map)")
    grid = qc_map.inverse_grid
    J = _polar_jacobian(qc_map.inverse_values, grid)
    if not np.all(J > 0):
        bad = np.count_nonzero(~(J > 0))
        raise OrientationError(f"orientation violation: Jacobian <= 0 at {bad} nodes")
    field_ = ScalarField(grid, J)
    field_.diagnostics["lp_norm"] = field_.lp_norm(p)
    field_.diagnostics["p"] = p
    logger.log(f"inverse Jacobian: ||J||_{p:g} = {field_.diagnostics['lp_norm']:.4f}", "gray")
    return field_


def with_jacobian(qc_map: QuasiconformalMap, p=2.0):
    return replace(qc_map, jacobian=jacobian_inverse(qc_map, p))


def beltrami_residual(qc_map: QuasiconformalMap, mu: BeltramiField, margin_cells=4):
    """Root-mean-square of |omega_zbar - mu * omega_z| over nodes well inside the domain."""
    grid = qc_map.grid
    h = grid.spacing
    omega = qc_map.values
    w_y, w_x = np.gradient(omega, h, h)
    w_z = 0.5 * (w_x - 1j * w_y)
    w_zbar = 0.5 * (w_x + 1j * w_y)
    inside = qc_map.inside
    deep = np.zeros_like(inside)
    deep[inside] = qc_map.domain.distance_to_boundary(grid.points[inside]) > margin_cells * h
    defect = np.abs(w_zbar - mu.at(grid.points) * w_z)[deep]
    return float(np.sqrt(np.mean(defect**2)))
