"""Reference solutions: radial shooting, the radial stretch map and closed forms."""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from qc_semilinear.beltrami import BeltramiField, QuasiconformalMap, mu_to_matrix
from qc_semilinear.errors import ConvergenceError, DomainError
from qc_semilinear.geometry import unit_disk
from qc_semilinear.logging import logger

CANDIDATES = 32


@dataclass(frozen=True)
class RadialProfile:
    """Radial solution u(r) of u'' + u'/r = lam f(u) on [0, 1]."""

    r: np.ndarray
    values: np.ndarray
    slope: np.ndarray
    core_radius: float = 0.0

    def __call__(self, radius):
        return np.interp(np.asarray(radius, dtype=float), self.r, self.values)

    @property
    def center_value(self):
        return float(self.values[0])


def _accel(f, lam, r, u, v):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(r > 0, lam * f(u) - v / np.where(r > 0, r, 1.0), 0.5 * lam * f(u))


def _rk4(f, lam, u, v, r, h, steps, record=False):
    """Classical RK4 for a batch of initial states with per-state step sizes."""
    u, v, r = (np.array(x, dtype=float) for x in (u, v, r))
    trace = [(r.copy(), u.copy(), v.copy())] if record else None
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(steps):
            k1u, k1v = v, _accel(f, lam, r, u, v)
            k2u, k2v = v + 0.5 * h * k1v, _accel(f, lam, r + 0.5 * h, u + 0.5 * h * k1u, v + 0.5 * h * k1v)
            k3u, k3v = v + 0.5 * h * k2v, _accel(f, lam, r + 0.5 * h, u + 0.5 * h * k2u, v + 0.5 * h * k2v)
            k4u, k4v = v + h * k3v, _accel(f, lam, r + h, u + h * k3u, v + h * k3v)
            u = u + h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
            v = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
            r = r + h
            if record:
                trace.append((r.copy(), u.copy(), v.copy()))
    if record:
        rs, us, vs = (np.array(x) for x in zip(*trace))
        return rs, us, vs
    return u, v


def _multisect(shoot, lo, hi, tol, increasing=True, max_passes=60):
    """Bracketing search for the root of a monotone shooting function."""
    f_lo, f_hi = shoot(np.array([lo, hi]))
    if not increasing:
        f_lo, f_hi = -f_lo, -f_hi
    if not (f_lo <= 0 <= f_hi):
        raise ConvergenceError(
            f"shooting bracket [{lo:.4g}, {hi:.4g}] does not contain a root"
        )
    best, best_err = lo, abs(f_lo)
    for _ in range(max_passes):
        x = np.linspace(lo, hi, CANDIDATES)
        values = shoot(x)
        values = np.where(np.isnan(values), np.inf, values)
        if not increasing:
            values = -values
        k = int(np.argmin(np.abs(values)))
        if abs(values[k]) < best_err:
            best, best_err = x[k], abs(values[k])
        if best_err <= tol:
            break
        above = np.nonzero(values >= 0)[0]
        j = above[0] if above.size else CANDIDATES - 1
        lo, hi = x[max(j - 1, 0)], x[j]
        if hi - lo <= 1e-15 * max(1.0, abs(hi)):
            break
    return best, best_err


def radial_shoot(f, lam, boundary_value, tol=1e-10, steps=4000):
    """Radial reference solution of Laplace(u) = lam f(u), u(1) = boundary_value.

    Shoots on u(0) with u'(0) = 0. For positive-part powers f = s max(u,0)^q a
    dead core appears when the solution leaving zero at the origin already
    overshoots the boundary value; then the core radius is the shooting
    parameter and the profile leaves zero like A (r - r0)^(2/(1-q)).
    """
    if steps < 10:
        raise DomainError(f"need at least 10 RK4 steps, got {steps}")
    b = float(boundary_value)
    if f.power is not None and b > 0:
        q = f.power
        beta = 2 / (1 - q)
        rate = lam * f.scale

        def branch(r0, record=False):
            r0 = np.asarray(r0, dtype=float)
            coef = np.where(r0 > 0, rate / (beta * (beta - 1)), rate / beta**2) ** (1 / (1 - q))
            delta = 1e-3 * (1 - r0)
            start = r0 + delta
            h = (1 - start) / steps
            u0 = coef * delta**beta
            v0 = coef * beta * delta ** (beta - 1)
            return _rk4(f, lam, u0, v0, start, h, steps, record)

        if branch(np.array([0.0]))[0][0] >= b:
            r0, err = _multisect(lambda x: branch(x)[0] - b, 0.0, 1 - 1e-9, tol, increasing=False)
            rs, us, vs = branch(np.array([r0]), record=True)
            core = np.linspace(0.0, r0, 64)
            profile = RadialProfile(
                np.concatenate([core, rs[:, 0]]),
                np.concatenate([np.zeros(core.size), us[:, 0]]),
                np.concatenate([np.zeros(core.size), vs[:, 0]]),
                float(r0),
            )
            logger.log(f"radial shooting: dead core radius {r0:.6f} (error {err:.1e})", "gray")
            return profile

    width = 10 * max(abs(b), 1.0)
    h = 1.0 / steps

    def shoot(u0):
        zero = np.zeros_like(u0)
        return _rk4(f, lam, u0, zero, zero, h, steps)[0] - b

    u0, err = _multisect(shoot, -width, width, tol)
    rs, us, vs = _rk4(f, lam, np.array([u0]), np.zeros(1), np.zeros(1), h, steps, record=True)
    logger.log(f"radial shooting: u(0) = {u0:.10g} (error {err:.1e})", "gray")
    return RadialProfile(rs[:, 0], us[:, 0], vs[:, 0])


@dataclass(frozen=True)
class RadialStretchReference:
    """The map omega(z) = z |z|^(K-1) of the unit disk and everything about it."""

    K: float
    mu: BeltramiField

    def omega(self, z):
        z = np.asarray(z, dtype=complex)
        return z * np.abs(z) ** (self.K - 1)

    def omega_inverse(self, w):
        w = np.asarray(w, dtype=complex)
        radius = np.abs(w)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(radius > 0, w * radius ** (1 / self.K - 1), 0.0)

    def jacobian(self, w):
        """Jacobian determinant of omega^{-1} at w."""
        with np.errstate(divide="ignore"):
            return np.abs(np.asarray(w)) ** (2 / self.K - 2) / self.K

    def derivatives(self, z):
        """Exact (omega_z, omega_zbar)."""
        z = np.asarray(z, dtype=complex)
        a = (self.K - 1) / 2
        radius = np.abs(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            w_z = (1 + a) * radius ** (2 * a)
            w_zbar = np.where(radius > 0, a * z**2 * radius ** (2 * a - 2), 0.0)
        return w_z, w_zbar

    def matrix(self):
        return mu_to_matrix(self.mu)

    def qc_map(self, grid_size=256, samples=512):
        return QuasiconformalMap.from_closed_form(
            unit_disk(), self.omega, self.omega_inverse, grid_size, samples=samples
        )


def radial_stretch_reference(K, points=None):
    """Radial stretch with dilatation mu = ((K-1)/(K+1)) z / conj(z)."""
    if not K >= 1:
        raise DomainError(f"K must be >= 1, got {K}")
    k = (K - 1) / (K + 1)

    def mu_fn(z):
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(z != 0, k * z / np.conj(z), 0.0)

    if points is None:
        points = unit_disk(64).vertices * 0.5
    return RadialStretchReference(float(K), BeltramiField.from_function(mu_fn, points, k))


def uniform_disk_potential(z):
    """Newtonian potential of g = 1 on the unit disk."""
    z = np.asarray(z, dtype=complex)
    radius = np.abs(z)
    with np.errstate(divide="ignore"):
        return np.where(radius <= 1, (radius**2 - 1) / 4, 0.5 * np.log(np.maximum(radius, 1.0)))


def bessel_i0(x, terms=20):
    """Modified Bessel function I_0 by its power series."""
    x = np.asarray(x, dtype=float)
    return sum((x / 2) ** (2 * k) / factorial(k) ** 2 for k in range(terms))
