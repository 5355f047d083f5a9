"""Semi-linear Dirichlet problems div(A grad u) = f(u) by continuation.

On the disk the problem Laplace(U) = h f(U), U = phi on the circle, is written
for the density g = h f(U) as the fixed point g = tau h f(P[phi] - G_g) and
followed from tau = 0 to tau = 1. General domains are reduced to the disk
through the quasiconformal map of the coefficient field.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import ndimage
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse import coo_matrix, diags
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import LinearOperator, gmres, splu

from qc_semilinear.beltrami import (
    BeltramiOptions,
    MatrixField,
    QuasiconformalMap,
    invert_map,
    jacobian_inverse,
    matrix_to_mu,
    rotate_map,
    solve_beltrami_disk,
)
from qc_semilinear.errors import ConvergenceError, DomainError, UnsupportedError
from qc_semilinear.geometry import CartesianGrid, DiskGrid, JordanDomain, unit_disk
from qc_semilinear.logging import logger
from qc_semilinear.potential import (
    BoundaryData,
    ScalarField,
    green_gradient,
    green_potential,
    laplacian_residual,
    measure_potential_constant,
    poisson_gradient,
    poisson_integral,
    polar_laplacian_matrix,
    representation_gap,
)

GROWTH_CLASSES = ("bounded", "sublinear", "clamped", "linear", "unbounded")
MAX_SLOPE = 1e8


@dataclass(frozen=True)
class Nonlinearity:
    """A right-hand side f(u) with its growth envelope f_*(s) = sup_{|t|<=s} |f(t)|."""

    name: str
    function: Callable
    growth_class: str
    derivative: Optional[Callable] = None
    envelope_function: Optional[Callable] = None
    bound: Optional[float] = None
    clamp: Optional[float] = None
    sign: int = 1
    power: Optional[float] = None
    scale: float = 1.0

    def __post_init__(self):
        if self.growth_class not in GROWTH_CLASSES:
            raise DomainError(f"unknown growth class {self.growth_class!r}")

    def __call__(self, u):
        return self.function(np.asarray(u, dtype=float))

    def slope(self, u):
        u = np.asarray(u, dtype=float)
        if self.derivative is not None:
            return self.derivative(u)
        step = 1e-6 * np.maximum(1.0, np.abs(u))
        return (self(u + step) - self(u - step)) / (2 * step)

    def envelope(self, s):
        s = float(s)
        if self.envelope_function is not None:
            return float(self.envelope_function(s))
        t = np.linspace(-s, s, 4097)
        return float(np.max(np.abs(self(t))))

    def clamp_active(self, u):
        if self.clamp is None:
            return 0
        return int(np.count_nonzero(self.sign * np.asarray(u) > self.clamp))

    def is_sublinear(self):
        """envelope(s)/s decreases to zero along s = 2^k, k <= 30."""
        ratios = np.array([self.envelope(2.0**k) / 2.0**k for k in range(0, 31)])
        tail = ratios[-11:]
        return bool(np.all(np.diff(tail) <= 0) and tail[-1] < tail[0])

    @classmethod
    def from_function(cls, fn, growth_class, bound=None, derivative=None, name="custom"):
        f = cls(name, fn, growth_class, derivative=derivative, bound=bound)
        if growth_class == "sublinear" and not f.is_sublinear():
            raise DomainError(f"{name}: envelope(s)/s does not decrease to zero")
        if growth_class == "bounded" and bound is None:
            raise DomainError(f"{name}: bounded nonlinearities need a bound")
        return f


def make_power(q, scale=1.0):
    """scale * max(u, 0)^q with 0 < q < 1 (reaction with dead cores)."""
    if not 0 < q < 1:
        raise DomainError(f"q must lie in (0, 1), got {q}")

    def fn(u):
        return scale * np.maximum(u, 0.0) ** q

    def dfn(u):
        with np.errstate(divide="ignore"):
            return np.where(u > 0, scale * q * np.maximum(u, 1e-300) ** (q - 1), 0.0)

    return Nonlinearity(
        f"power(q={q}, scale={scale})", fn, "sublinear", dfn,
        lambda s: abs(scale) * s**q, power=q, scale=scale,
    )


def make_signed_power(q, scale=1.0):
    """scale * |u|^q sign(u), the plasma-type nonlinearity."""
    if not 0 < q < 1:
        raise DomainError(f"q must lie in (0, 1), got {q}")

    def fn(u):
        return scale * np.abs(u) ** q * np.sign(u)

    def dfn(u):
        with np.errstate(divide="ignore"):
            return scale * q * np.maximum(np.abs(u), 1e-300) ** (q - 1)

    return Nonlinearity(
        f"signed_power(q={q}, scale={scale})", fn, "sublinear", dfn,
        lambda s: abs(scale) * s**q, scale=scale,
    )


def plasma_substitution(U, q):
    """Invert U = |u|^q sign(u)."""
    U = np.asarray(U, dtype=float)
    return np.abs(U) ** (1 / q) * np.sign(U)


def make_exponential(delta, sign=1, clamp=10.0):
    """delta * exp(min(sign*u, clamp)); clamp=None gives the unbounded exponential."""
    if sign not in (1, -1):
        raise DomainError(f"sign must be +1 or -1, got {sign}")
    top = np.inf if clamp is None else clamp

    def fn(u):
        return delta * np.exp(np.minimum(sign * u, top))

    def dfn(u):
        return np.where(sign * u < top, sign * delta * np.exp(np.minimum(sign * u, top)), 0.0)

    if clamp is None:
        return Nonlinearity(
            f"exp(delta={delta}, sign={sign})", fn, "unbounded", dfn,
            lambda s: abs(delta) * np.exp(s), sign=sign, scale=delta,
        )
    return Nonlinearity(
        f"exp(delta={delta}, sign={sign}, clamp={clamp})", fn, "clamped", dfn,
        lambda s: abs(delta) * np.exp(min(s, clamp)),
        bound=abs(delta) * np.exp(clamp), clamp=clamp, sign=sign, scale=delta,
    )


def make_constant(c):
    return Nonlinearity(
        f"constant({c})", lambda u: np.full(np.shape(u), float(c)), "bounded",
        lambda u: np.zeros(np.shape(u)), lambda s: abs(c), bound=abs(c),
    )


def make_linear(slope):
    """slope * u; has no a-priori bound and is only meant for reference solutions."""
    return Nonlinearity(
        f"linear({slope})", lambda u: slope * u, "linear",
        lambda u: np.full(np.shape(u), float(slope)), lambda s: abs(slope) * s, scale=slope,
    )


def apriori_bound(f: Nonlinearity, h_norm, M, phi_sup):
    """Bound B on ||g||_p for every fixed point, B = max(|phi|_C / M, s*/(3M)).

    s* = sup{s : f_*(s)/s >= 1/(3 M ||h||_p)}, searched on s = 2^k and refined
    by bisection.
    """
    if f.growth_class in ("linear", "unbounded"):
        raise UnsupportedError(f"no a-priori bound for the {f.growth_class} class ({f.name})")
    if not M > 0:
        raise DomainError(f"potential constant must be positive, got {M}")
    s_star = 0.0
    if h_norm > 0:
        target = 1.0 / (3 * M * h_norm)

        def holds(s):
            return f.envelope(s) / s >= target

        if holds(2.0**60):
            raise UnsupportedError(
                f"no a-priori bound: growth condition still holds at 2^60 ({f.name})"
            )
        lo = next((2.0**k for k in range(59, -61, -1) if holds(2.0**k)), None)
        if lo is not None:
            hi = 2 * lo
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                lo, hi = (mid, hi) if holds(mid) else (lo, mid)
                if hi - lo <= 1e-14 * hi:
                    break
            s_star = lo
    return max(phi_sup / M, s_star / (3 * M))


class ContinuationOptions(BaseModel):
    """Continuation schedule and inner-iteration controls."""

    model_config = ConfigDict(extra="forbid")

    tau_steps: int = Field(10, ge=1)
    damping: float = Field(0.5, gt=0.0, le=1.0)
    inner_tol: float = Field(1e-8, gt=0.0)
    max_inner: int = Field(500, ge=1)
    p: float = Field(2.0, gt=1.0)
    divergence_margin: float = Field(2.0, ge=1.0)
    method: Literal["picard", "newton"] = "picard"
    anderson_depth: int = Field(0, ge=0)
    trial_densities: int = Field(32, ge=1)
    seed: int = 0
    representation_tol: float = Field(1e-3, gt=0.0)


@dataclass
class TauStep:
    tau: float
    iterations: int
    residual: float
    g_norm: float


@dataclass
class SolveReport:
    converged: bool
    method: str
    p_used: float
    apriori_bound: float
    potential_constant: float
    tau_trace: list = field(default_factory=list)
    final_g_norm: float = 0.0
    representation_gap: float = float("nan")
    laplacian_residual: float = float("nan")
    weak_residual: float = float("nan")
    clamp_active: int = 0
    negative_nodes: int = 0
    density: Optional[ScalarField] = field(default=None, repr=False)

    def summary(self):
        skip = {"tau_trace", "density"}
        return {k: v for k, v in self.__dict__.items() if k not in skip}


class _DiskFixedPoint:
    """F(g; tau) = tau * h * f(P[phi] - G_g) on the nodes of a DiskGrid."""

    def __init__(self, h: ScalarField, phi: BoundaryData, f: Nonlinearity, p):
        self.grid = h.grid
        self.h = h.values
        self.f = f
        self.p = p
        self.areas = self.grid.areas
        self.harmonic = poisson_integral(phi, self.grid).values

    def norm(self, values):
        return float(np.sum(np.abs(values) ** self.p * self.areas) ** (1 / self.p))

    def green(self, values):
        return green_potential(ScalarField(self.grid, values), method="spectral").values

    def potential(self, g):
        return self.harmonic - self.green(g)

    def __call__(self, g, tau):
        return tau * self.h * self.f(self.potential(g))


def _check_trust(norm, bound, margin, tol):
    if norm > margin * bound + tol:
        raise ConvergenceError(
            f"a-priori bound violated: ||g||_p = {norm:.4g} > {margin:g} * {bound:.4g}"
        )


def _picard(op: _DiskFixedPoint, g, tau, opts: ContinuationOptions, bound, step):
    theta = opts.damping
    weights = np.sqrt(op.areas).ravel()
    history = deque(maxlen=opts.anderson_depth + 1)
    for it in range(1, opts.max_inner + 1):
        mapped = (1 - theta) * g + theta * op(g, tau)
        g_next = mapped
        if opts.anderson_depth > 0:
            history.append((mapped.ravel(), (mapped - g).ravel()))
            if len(history) >= 2:
                values = np.array([hv for hv, _ in history]).T
                resid = np.array([hr for _, hr in history]).T
                d_res = np.diff(resid, axis=1) * weights[:, None]
                gamma, *_ = np.linalg.lstsq(d_res, resid[:, -1] * weights, rcond=None)
                g_next = (values[:, -1] - np.diff(values, axis=1) @ gamma).reshape(g.shape)
        change = op.norm(g_next - g)
        g = g_next
        norm = op.norm(g)
        _check_trust(norm, bound, opts.divergence_margin, opts.inner_tol)
        if change <= opts.inner_tol * max(1.0, norm):
            return g, it, change
    raise ConvergenceError(f"no convergence at τ_{step} = {tau:.3g} after {opts.max_inner} iterations")


def _newton(op: _DiskFixedPoint, g, tau, opts: ContinuationOptions, bound, step):
    """Semismooth Newton-Krylov on Phi(g) = g - F(g; tau)."""
    grid = op.grid
    shape = g.shape
    laplace = polar_laplacian_matrix(grid)

    def residual(values):
        return values - op(values, tau)

    r = residual(g)
    r_norm = op.norm(r)
    for it in range(1, opts.max_inner + 1):
        norm = op.norm(g)
        if r_norm <= opts.inner_tol * max(1.0, norm):
            return g, max(it - 1, 1), r_norm
        U = op.potential(g)
        D = np.clip(tau * op.h * op.f.slope(U), -MAX_SLOPE, MAX_SLOPE).ravel()
        lu = splu((laplace + diags(np.maximum(D, 0.0))).tocsc())

        def jac(v):
            v = np.ravel(v)
            return v + D * op.green(v.reshape(shape)).ravel()

        def precond(v):
            return laplace @ lu.solve(np.ravel(v))

        n = D.size
        J = LinearOperator((n, n), matvec=jac, dtype=float)
        Minv = LinearOperator((n, n), matvec=precond, dtype=float)
        delta, _ = gmres(J, -r.ravel(), M=Minv, rtol=1e-6, atol=0.0, restart=40, maxiter=10)
        delta = delta.reshape(shape)

        alpha = 1.0
        while True:
            trial = g + alpha * delta
            r_trial = residual(trial)
            trial_norm = op.norm(r_trial)
            if trial_norm <= (1 - 1e-4 * alpha) * r_norm or alpha <= 1 / 64:
                break
            alpha /= 2
        change = op.norm(alpha * delta)
        g, r, r_norm = trial, r_trial, trial_norm
        _check_trust(op.norm(g), bound, opts.divergence_margin, opts.inner_tol)
        if change <= opts.inner_tol * max(1.0, op.norm(g)):
            return g, it, r_norm
    raise ConvergenceError(f"no convergence at τ_{step} = {tau:.3g} after {opts.max_inner} Newton steps")


def solve_quasilinear_disk(h: ScalarField, phi: BoundaryData, f: Nonlinearity, opts=None):
    """Solve Laplace(U) = h f(U) in the disk, U = phi on the circle.

    Returns the solution on the grid of h and the SolveReport.
    """
    opts = ContinuationOptions() if opts is None else opts
    if not isinstance(h.grid, DiskGrid):
        raise DomainError("the disk problem needs h on a DiskGrid")
    grid = h.grid
    p = opts.p
    M = measure_potential_constant(grid, p, opts.trial_densities, opts.seed)
    B = apriori_bound(f, h.lp_norm(p), M, phi.sup_norm())
    logger.log(
        f"disk solve ({opts.method}, {f.name}): M={M:.4f}, B={B:.4g}, ||h||_{p:g}={h.lp_norm(p):.4g}",
        "blue",
    )
    op = _DiskFixedPoint(h, phi, f, p)
    inner = _newton if opts.method == "newton" else _picard
    report = SolveReport(False, opts.method, p, B, M)
    g = np.zeros(grid.shape)
    for j in range(1, opts.tau_steps + 1):
        tau = j / opts.tau_steps
        g, iterations, residual = inner(op, g, tau, opts, B, j)
        step = TauStep(tau, iterations, residual, op.norm(g))
        report.tau_trace.append(step)
        logger.log(
            f"  tau={tau:.3f}: {iterations} iterations, residual {residual:.2e}, ||g||={step.g_norm:.4g}",
            "gray",
        )

    density = ScalarField(grid, g)
    U_values = op.potential(g)
    U = ScalarField(grid, U_values)
    report.converged = True
    report.final_g_norm = op.norm(g)
    report.density = density
    report.representation_gap = representation_gap(density, U_values - op.harmonic)
    if report.representation_gap > opts.representation_tol:
        logger.log(f"representation gap {report.representation_gap:.2e} above tolerance", "yellow")
    if grid.n_r >= 32 and grid.n_theta >= 32:
        report.laplacian_residual = laplacian_residual(U, h.values * f(U_values))
    report.clamp_active = f.clamp_active(U_values)
    if report.clamp_active:
        logger.log(f"exponential clamp active at {report.clamp_active} nodes", "yellow")
    if f.power is not None:
        report.negative_nodes = int(np.count_nonzero(U_values < -1e-12))
        if report.negative_nodes:
            logger.log(f"solution negative at {report.negative_nodes} nodes", "yellow")
    logger.log(f"disk solve converged: ||g||_p = {report.final_g_norm:.6g}", "green")
    return U, report


class Solution(ABC):
    """A solution that can be evaluated, with its gradient, at arbitrary points."""

    domain: JordanDomain

    @abstractmethod
    def value(self, z):
        ...

    @abstractmethod
    def gradient(self, z):
        """Real gradient packed as u_x + i u_y."""


class DiskSolution(Solution):
    """U = P[phi] - G_g on the unit disk, with exact spectral gradients."""

    def __init__(self, density: ScalarField, phi: BoundaryData, field_: ScalarField | None = None):
        self.density = density
        self.phi = phi
        self.field = field_
        self.domain = unit_disk()

    def value(self, z):
        z = np.asarray(z, dtype=complex)
        green = green_potential(self.density, z, method="spectral")
        return poisson_integral(self.phi, z) - green

    def gradient(self, z):
        z = np.asarray(z, dtype=complex)
        dz = poisson_gradient(self.phi, z) - green_gradient(self.density, z, method="spectral")
        return 2 * np.conj(dz)


class FunctionSolution(Solution):
    def __init__(self, value_fn, gradient_fn, domain):
        self._value = value_fn
        self._gradient = gradient_fn
        self.domain = domain

    def value(self, z):
        return self._value(np.asarray(z, dtype=complex))

    def gradient(self, z):
        return self._gradient(np.asarray(z, dtype=complex))


class DomainSolution(Solution):
    """u = U o omega sampled on a Cartesian grid (NaN outside the domain).

    With a closed-form map the solution is evaluated by composition instead.
    """

    def __init__(self, grid: CartesianGrid, values, domain: JordanDomain,
                 disk_solution: DiskSolution | None = None, qc_map: QuasiconformalMap | None = None):
        self.grid = grid
        self.values = np.asarray(values, dtype=float)
        self.domain = domain
        self.disk_solution = disk_solution
        self.qc_map = qc_map
        h = grid.spacing
        gy, gx = np.gradient(self.values, h, h)
        axes = (grid.y, grid.x)
        opts = dict(bounds_error=False, fill_value=np.nan)
        self._value = RegularGridInterpolator(axes, self.values, **opts)
        self._gx = RegularGridInterpolator(axes, gx, **opts)
        self._gy = RegularGridInterpolator(axes, gy, **opts)

    @property
    def composed(self):
        return self.qc_map is not None and self.qc_map.exact_forward is not None

    def as_field(self):
        inside = np.isfinite(self.values)
        return ScalarField(self.grid, np.where(inside, self.values, 0.0), mask=inside)

    def value(self, z):
        z = np.asarray(z, dtype=complex)
        if self.composed:
            return self.disk_solution.value(self.qc_map.forward(z))
        return self._value(np.column_stack([z.imag.ravel(), z.real.ravel()])).reshape(z.shape)

    def gradient(self, z):
        z = np.asarray(z, dtype=complex)
        if self.composed:
            step = 1e-6
            gx = (self.value(z + step) - self.value(z - step)) / (2 * step)
            gy = (self.value(z + 1j * step) - self.value(z - 1j * step)) / (2 * step)
            return gx + 1j * gy
        pts = np.column_stack([z.imag.ravel(), z.real.ravel()])
        return (self._gx(pts) + 1j * self._gy(pts)).reshape(z.shape)


def _bump(t):
    inside = np.abs(t) < 1
    safe = np.where(inside, t, 0.0)
    b = np.where(inside, np.exp(1 - 1 / (1 - safe**2)), 0.0)
    db = np.where(inside, b * (-2 * safe / (1 - safe**2) ** 2), 0.0)
    return b, db


def weak_residual(u: Solution, A: MatrixField, f: Nonlinearity, trial_count=16, seed=0,
                  multiplier=None, margin=None, order=32):
    """Largest |integral <A grad u, grad eta> + f(u) eta| / ||eta||_{W^{1,2}} over bump tests."""
    domain = u.domain
    if margin is None:
        spacing = u.grid.spacing if isinstance(u, DomainSolution) else 1 / 64
        margin = 2 * spacing
    rng = np.random.default_rng(seed)
    xmin, xmax, ymin, ymax = domain.bbox
    size = domain.max_radius
    nodes, weights = np.polynomial.legendre.leggauss(order)
    worst = 0.0
    accepted = 0
    for _ in range(200 * trial_count):
        if accepted == trial_count:
            break
        c = complex(rng.uniform(xmin, xmax), rng.uniform(ymin, ymax))
        rho = rng.uniform(0.05, 0.25) * size
        if not domain.contains(c) or domain.distance_to_boundary(c) <= rho * np.sqrt(2) + margin:
            continue
        accepted += 1
        bx, dbx = _bump(nodes[None, :])
        by, dby = _bump(nodes[:, None])
        z = c + rho * (nodes[None, :] + 1j * nodes[:, None])
        w = rho**2 * weights[None, :] * weights[:, None]
        eta = bx * by
        eta_x = dbx * by / rho
        eta_y = bx * dby / rho
        grad = u.gradient(z)
        gx, gy = grad.real, grad.imag
        a11, a12, a22 = A.at(z)
        source = f(u.value(z))
        if multiplier is not None:
            source = source * multiplier(z)
        defect = np.sum(w * ((a11 * gx + a12 * gy) * eta_x + (a12 * gx + a22 * gy) * eta_y + source * eta))
        norm = np.sqrt(np.sum(w * (eta**2 + eta_x**2 + eta_y**2)))
        worst = max(worst, abs(defect) / norm)
    if accepted < trial_count:
        raise DomainError(f"insufficient samples: only {accepted} test supports fit in the domain")
    return float(worst)


P_FALLBACKS = (1.75, 1.5, 1.25, 1.1)


def integrable_exponent(J: ScalarField, p):
    """Largest p among p and the fallbacks for which J^p does not pile up at the origin."""
    for candidate in (p,) + tuple(v for v in P_FALLBACKS if v < p):
        mass = J.values**candidate * J.weights
        if mass[0].sum() <= 0.1 * mass.sum():
            if candidate != p:
                logger.log(f"Jacobian not {p:g}-integrable on this grid, using p={candidate:g}", "yellow")
            return candidate
    raise UnsupportedError("Jacobian not p-integrable on this grid")


def pullback_boundary_data(phi: BoundaryData, qc_map: QuasiconformalMap, m=None):
    """psi = phi o omega^{-1} on the circle, through the boundary correspondence."""
    if phi.on_circle:
        return phi
    m = phi.m if m is None else m
    t = 2 * np.pi * np.arange(m) / m
    return BoundaryData(phi.evaluate(qc_map.boundary_parameter(t)))


def solve_semilinear(domain: JordanDomain, A: MatrixField, phi: BoundaryData, f: Nonlinearity,
                     opts=None, beltrami_opts=None, disk_grid=None, multiplier=None,
                     qc_map=None, rotation=0.0, trial_count=12):
    """Solve div(A grad u) = H f(u) in the domain with u = phi on its boundary.

    The coefficient field is straightened by omega, the disk problem is solved
    with h = J_{omega^{-1}} * H o omega^{-1} and psi = phi o omega^{-1}, and the
    result is pulled back as u = U o omega.
    """
    opts = ContinuationOptions() if opts is None else opts
    beltrami_opts = BeltramiOptions() if beltrami_opts is None else beltrami_opts
    disk_grid = DiskGrid(64, 128) if disk_grid is None else disk_grid
    if qc_map is None:
        qc_map = solve_beltrami_disk(matrix_to_mu(A), domain, beltrami_opts)
    if rotation:
        qc_map = rotate_map(qc_map, rotation)
    if not qc_map.has_inverse or qc_map.inverse_grid != disk_grid:
        qc_map = invert_map(qc_map, disk_grid, beltrami_opts)
    J = jacobian_inverse(qc_map, opts.p)
    p = integrable_exponent(J, opts.p)
    h_values = J.values
    if multiplier is not None:
        h_values = h_values * multiplier(qc_map.inverse_values)
    h = ScalarField(disk_grid, h_values)
    psi = pullback_boundary_data(phi, qc_map)

    U, report = solve_quasilinear_disk(h, psi, f, opts.model_copy(update={"p": p}))
    disk_solution = DiskSolution(report.density, psi, U)
    inside = qc_map.inside
    values = np.full(qc_map.grid.shape, np.nan)
    values[inside] = disk_solution.value(qc_map.values[inside])
    u = DomainSolution(qc_map.grid, values, domain, disk_solution, qc_map)
    report.weak_residual = weak_residual(u, A, f, trial_count, opts.seed, multiplier)
    logger.log(f"domain solve on {domain.name}: weak residual {report.weak_residual:.3e}", "green")
    return u, report


@dataclass(frozen=True)
class DeadCore:
    mask: np.ndarray
    labels: np.ndarray
    components: int
    area: float
    radius: float


def detect_dead_core(u: ScalarField, eps=1e-6):
    """Connected region where |u| <= eps, its area and equivalent radius sqrt(area/pi)."""
    values = u.values
    if np.any(values < -eps):
        logger.log(f"dead core: solution below -eps at {np.count_nonzero(values < -eps)} nodes", "yellow")
    mask = np.abs(values) <= eps
    if u.mask is not None:
        mask &= u.mask
    labels, count = ndimage.label(mask)
    if isinstance(u.grid, DiskGrid) and count:
        # theta is periodic and the innermost ring closes around the center
        ring = labels[0][labels[0] > 0]
        a = np.concatenate([labels[:, 0], np.full(max(ring.size - 1, 0), ring[0] if ring.size else 0)])
        b = np.concatenate([labels[:, -1], ring[1:]])
        keep = (a > 0) & (b > 0)
        graph = coo_matrix((np.ones(keep.sum()), (a[keep] - 1, b[keep] - 1)), shape=(count, count))
        count, component = connected_components(graph, directed=False)
        labels = np.where(labels > 0, component[labels - 1] + 1, 0)
    area = float(np.sum(u.grid.areas[mask]))
    return DeadCore(mask, labels, int(count), area, float(np.sqrt(area / np.pi)))
