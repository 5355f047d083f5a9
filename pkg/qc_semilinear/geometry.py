"""Grids, Jordan domains, boundary distance and the quasihyperbolic metric."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree
from scipy.stats import qmc

from qc_semilinear.errors import DomainError, ResolutionError
from qc_semilinear.logging import logger

# Half of the symmetric stencils; the other half is the reversed edges
STENCILS = {
    8: [(1, 0), (0, 1), (1, 1), (1, -1)],
    16: [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2)],
}


@dataclass(frozen=True)
class DiskGrid:
    """Cell-centered polar grid on the unit disk.

    Node (i, j) sits at r_i = (i + 1/2)/n_r, theta_j = (j + 1/2) * 2pi/n_theta and
    carries the area of its annular sector.
    """

    n_r: int
    n_theta: int

    def __post_init__(self):
        if int(self.n_r) != self.n_r or self.n_r < 2:
            raise DomainError(f"n_r must be an integer >= 2, got {self.n_r}")
        if int(self.n_theta) != self.n_theta or self.n_theta < 4:
            raise DomainError(f"n_theta must be an integer >= 4, got {self.n_theta}")

    @property
    def shape(self):
        return (self.n_r, self.n_theta)

    @property
    def dr(self):
        return 1.0 / self.n_r

    @property
    def dtheta(self):
        return 2 * np.pi / self.n_theta

    @cached_property
    def r(self):
        return (np.arange(self.n_r) + 0.5) * self.dr

    @cached_property
    def r_edges(self):
        return np.arange(self.n_r + 1) * self.dr

    @cached_property
    def theta(self):
        return (np.arange(self.n_theta) + 0.5) * self.dtheta

    @cached_property
    def points(self):
        return self.r[:, None] * np.exp(1j * self.theta[None, :])

    @cached_property
    def areas(self):
        ring = self.r * self.dr * self.dtheta
        return np.broadcast_to(ring[:, None], self.shape).copy()


@dataclass(frozen=True)
class CartesianGrid:
    """Cell-centered uniform grid on the square center + [-L, L]^2.

    Arrays on this grid are indexed [row, column] = [y, x].
    """

    n: int
    half_width: float
    center: complex = 0j

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4:
            raise DomainError(f"grid size must be an integer >= 4, got {self.n}")
        if not self.half_width > 0:
            raise DomainError(f"half width must be positive, got {self.half_width}")

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def spacing(self):
        return 2 * self.half_width / self.n

    @cached_property
    def x(self):
        h = self.spacing
        return self.center.real - self.half_width + (np.arange(self.n) + 0.5) * h

    @cached_property
    def y(self):
        h = self.spacing
        return self.center.imag - self.half_width + (np.arange(self.n) + 0.5) * h

    @cached_property
    def points(self):
        return self.x[None, :] + 1j * self.y[:, None]

    @cached_property
    def areas(self):
        return np.full(self.shape, self.spacing**2)


def _segment_distances(points, starts, ends):
    # points (P, 1), starts/ends (P, C); all complex
    seg = ends - starts
    length2 = np.abs(seg) ** 2
    t = np.real((points - starts) * np.conj(seg)) / np.where(length2 > 0, length2, 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.abs(points - (starts + t * seg))


def _segments_intersect(p1, p2, q1, q2):
    def cross(a, b):
        return a.real * b.imag - a.imag * b.real

    d1 = cross(q2 - q1, p1 - q1)
    d2 = cross(q2 - q1, p2 - q1)
    d3 = cross(p2 - p1, q1 - p1)
    d4 = cross(p2 - p1, q2 - p1)
    return (d1 * d2 < 0) & (d3 * d4 < 0)


@dataclass(frozen=True, eq=False)
class JordanDomain:
    """Bounded Jordan domain given by its counter-clockwise boundary samples.

    The boundary is parametrised by s in [0, 2pi) with sample k at s = 2pi*k/M,
    either through a periodic cubic spline or piecewise linearly (polygons).
    """

    vertices: np.ndarray
    interpolation: Literal["spline", "linear"] = "spline"
    dense_count: int = 4096
    name: str = "domain"
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=complex).ravel()
        object.__setattr__(self, "vertices", vertices)
        if vertices.size < 8:
            raise DomainError(f"need at least 8 boundary samples, got {vertices.size}")
        if not np.all(np.isfinite(vertices)):
            raise DomainError("boundary samples must be finite")
        if self.interpolation not in ("spline", "linear"):
            raise DomainError(f"unknown interpolation {self.interpolation!r}")
        if self.signed_area <= 0:
            raise DomainError("boundary must be oriented counter-clockwise")
        self._check_simple()

    def _check_simple(self):
        v = self.vertices
        m = v.size
        starts, ends = v, np.roll(v, -1)
        for lo in range(0, m, 256):
            idx = np.arange(lo, min(lo + 256, m))
            hits = _segments_intersect(
                starts[idx, None], ends[idx, None], starts[None, :], ends[None, :]
            )
            # adjacent segments share an endpoint
            gap = np.abs(idx[:, None] - np.arange(m)[None, :])
            hits &= (gap > 1) & (gap < m - 1)
            if hits.any():
                i, j = np.argwhere(hits)[0]
                raise DomainError(
                    f"boundary is not simple: segments {idx[i]} and {j} intersect"
                )

    @property
    def signed_area(self):
        v = self.vertices
        w = np.roll(v, -1)
        return 0.5 * np.sum(v.real * w.imag - w.real * v.imag)

    @cached_property
    def _spline(self):
        m = self.vertices.size
        s = np.append(2 * np.pi * np.arange(m) / m, 2 * np.pi)
        xy = np.column_stack([self.vertices.real, self.vertices.imag])
        xy = np.vstack([xy, xy[:1]])
        return CubicSpline(s, xy, axis=0, bc_type="periodic")

    def boundary_point(self, s):
        """Boundary point(s) at parameter s (radians, taken mod 2pi)."""
        s = np.mod(np.asarray(s, dtype=float), 2 * np.pi)
        if self.interpolation == "spline":
            xy = self._spline(s)
            return xy[..., 0] + 1j * xy[..., 1]
        m = self.vertices.size
        knots = 2 * np.pi * np.arange(m + 1) / m
        closed = np.append(self.vertices, self.vertices[0])
        return np.interp(s, knots, closed.real) + 1j * np.interp(s, knots, closed.imag)

    def boundary_points(self, count):
        s = 2 * np.pi * np.arange(count) / count
        return s, self.boundary_point(s)

    @cached_property
    def polyline(self):
        return self.boundary_points(self.dense_count)[1]

    @cached_property
    def _tree(self):
        p = self.polyline
        return cKDTree(np.column_stack([p.real, p.imag]))

    @cached_property
    def centroid(self):
        v = self.polyline
        w = np.roll(v, -1)
        cross = v.real * w.imag - w.real * v.imag
        area = 0.5 * cross.sum()
        return complex(np.sum((v + w) * cross) / (6 * area))

    @cached_property
    def bbox(self):
        p = self.polyline
        return p.real.min(), p.real.max(), p.imag.min(), p.imag.max()

    @cached_property
    def diameter(self):
        p = self.polyline[:: max(1, self.dense_count // 1024)]
        return float(np.max(np.abs(p[:, None] - p[None, :])))

    @cached_property
    def max_radius(self):
        """Largest distance from the centroid to the boundary."""
        return float(np.max(np.abs(self.polyline - self.centroid)))

    def contains(self, z):
        """Even-odd containment test against the dense polyline."""
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        inside = np.zeros(flat.size, dtype=bool)
        a = self.polyline
        b = np.roll(a, -1)
        for lo in range(0, flat.size, 1024):
            pts = flat[lo : lo + 1024, None]
            y, x = pts.imag, pts.real
            straddle = (a.imag[None, :] > y) != (b.imag[None, :] > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                x_cross = a.real + (y - a.imag) * (b.real - a.real) / (b.imag - a.imag)
            crossings = np.count_nonzero(straddle & (x < x_cross), axis=1)
            inside[lo : lo + 1024] = crossings % 2 == 1
        return inside.reshape(z.shape)

    def distance_to_boundary(self, z, neighbours=16):
        """Distance to the boundary polyline, without any containment check."""
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        n = self.polyline.size
        k = min(neighbours, n)
        _, idx = self._tree.query(np.column_stack([flat.real, flat.imag]), k=k)
        idx = np.atleast_2d(idx).reshape(flat.size, k)
        candidates = np.concatenate([idx, (idx - 1) % n], axis=1)
        starts = self.polyline[candidates]
        ends = self.polyline[(candidates + 1) % n]
        d = _segment_distances(flat[:, None], starts, ends).min(axis=1)
        return d.reshape(z.shape)

    def grid_mask(self, grid: CartesianGrid):
        key = ("mask", grid)
        if key not in self._cache:
            self._cache[key] = self.contains(grid.points)
        return self._cache[key]


def unit_disk(M=256):
    return disk(1.0, M)


def disk(radius=1.0, M=256, center=0j):
    s = 2 * np.pi * np.arange(M) / M
    return JordanDomain(center + radius * np.exp(1j * s), name=f"disk(r={radius})")


def square(side=1.0, per_side=64, corner=0j):
    """Axis-aligned square [0, side]^2 shifted by corner, as a polygon."""
    t = np.arange(per_side) / per_side
    edges = [t * side, side + 1j * t * side, side * (1 - t) + 1j * side, 1j * side * (1 - t)]
    return JordanDomain(
        corner + np.concatenate(edges), interpolation="linear", name=f"square({side})"
    )


def slit_disk(M=512, slit_width=1e-3, tip=0.0, slit_samples=64):
    """Unit disk cut along the positive real axis from the tip to the circle."""
    half = slit_width / 2
    start = np.arcsin(half)
    arc = np.exp(1j * np.linspace(start, 2 * np.pi - start, M))
    outer = np.sqrt(1 - half**2)
    x = np.linspace(outer, tip, slit_samples, endpoint=False)[1:]
    lower = x - 1j * half
    upper = x[::-1] + 1j * half
    tip_pts = np.array([tip - 1j * half, tip + 1j * half])
    return JordanDomain(
        np.concatenate([arc, lower, tip_pts, upper]),
        interpolation="linear",
        name=f"slit_disk(width={slit_width})",
    )


def boundary_distance(domain: JordanDomain, z):
    """Distance from z (scalar or array) to the boundary of the domain."""
    z_arr = np.asarray(z, dtype=complex)
    if not np.all(domain.contains(z_arr)):
        raise DomainError("exterior point: boundary distance needs interior points")
    d = domain.distance_to_boundary(z_arr)
    return float(d) if np.ndim(z) == 0 else d


class QuasihyperbolicLattice:
    """Square lattice inside a domain weighted by 1/d, the discrete qh metric.

    An edge is kept only if the disk of radius length/2 around its midpoint
    lies inside the domain; its weight is length / d(midpoint).
    """

    def __init__(self, domain: JordanDomain, resolution, stencil=16, anchor=None):
        if stencil not in STENCILS:
            raise DomainError(f"stencil must be 8 or 16, got {stencil}")
        if not resolution > 0:
            raise DomainError(f"resolution must be positive, got {resolution}")
        self.domain = domain
        self.h = float(resolution)
        self.anchor = domain.centroid if anchor is None else complex(anchor)

        xmin, xmax, ymin, ymax = domain.bbox
        a = self.anchor
        mx = np.arange(np.floor((xmin - a.real) / self.h), np.ceil((xmax - a.real) / self.h) + 1)
        ny = np.arange(np.floor((ymin - a.imag) / self.h), np.ceil((ymax - a.imag) / self.h) + 1)
        lattice = a + self.h * (mx[None, :] + 1j * ny[:, None])
        inside = domain.contains(lattice)
        index = -np.ones(lattice.shape, dtype=np.int64)
        index[inside] = np.arange(np.count_nonzero(inside))
        self.nodes = lattice[inside]
        self.node_count = self.nodes.size
        if self.node_count < 2:
            raise ResolutionError("resolution too coarse: lattice has no interior nodes")
        self._tree = cKDTree(np.column_stack([self.nodes.real, self.nodes.imag]))

        rows, cols, weights = [], [], []
        ny_count, mx_count = lattice.shape
        for dx, dy in STENCILS[stencil]:
            src = index[max(0, -dy) : ny_count - max(0, dy), max(0, -dx) : mx_count - max(0, dx)]
            dst = index[max(0, dy) : ny_count + min(0, dy), max(0, dx) : mx_count + min(0, dx)]
            ok = (src >= 0) & (dst >= 0)
            src, dst = src[ok], dst[ok]
            length = self.h * np.hypot(dx, dy)
            mid = self.nodes[src] + 0.5 * self.h * (dx + 1j * dy)
            d = domain.distance_to_boundary(mid)
            keep = d > length / 2
            rows.append(src[keep])
            cols.append(dst[keep])
            weights.append(length / d[keep])
        self.rows = np.concatenate(rows)
        self.cols = np.concatenate(cols)
        self.weights = np.concatenate(weights)
        logger.log(
            f"qh lattice: {self.node_count} nodes, {self.rows.size} edges, h={self.h:.4g}",
            "gray",
        )

    def attachments(self, z):
        """Lattice neighbours within 1.5 h of z and the straight-edge weights."""
        z = complex(z)
        near = self._tree.query_ball_point([z.real, z.imag], 1.5 * self.h)
        near = np.asarray(near, dtype=np.int64)
        if near.size == 0:
            return near, np.empty(0)
        length = np.abs(self.nodes[near] - z)
        mid = 0.5 * (self.nodes[near] + z)
        d = self.domain.distance_to_boundary(mid)
        keep = d > length / 2
        return near[keep], length[keep] / d[keep]

    def graph(self, extra_points=()):
        """Sparse graph on lattice nodes plus the given extra points (appended)."""
        rows, cols, weights = [self.rows], [self.cols], [self.weights]
        for k, z in enumerate(extra_points):
            near, w = self.attachments(z)
            node = self.node_count + k
            rows.append(np.full(near.size, node))
            cols.append(near)
            weights.append(w)
        n = self.node_count + len(extra_points)
        # zero-length attachments would vanish from the sparse matrix
        weights = [np.maximum(w, 1e-300) for w in weights]
        return coo_matrix(
            (np.concatenate(weights), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        ).tocsr()

    def distances_from(self, source, targets):
        """Quasihyperbolic distances from one point to many, by one Dijkstra run."""
        graph = self.graph([source])
        dist = dijkstra(graph, directed=False, indices=self.node_count)
        out = np.empty(len(targets))
        for k, z in enumerate(targets):
            if abs(z - source) == 0:
                out[k] = 0.0
                continue
            near, w = self.attachments(z)
            out[k] = np.min(dist[near] + w) if near.size else np.inf
        return out


def _check_interior(domain, points):
    pts = np.asarray(points, dtype=complex)
    if not np.all(domain.contains(pts)):
        raise DomainError("exterior point: quasihyperbolic distance needs interior points")
    return pts


def quasihyperbolic_distances(domain: JordanDomain, points, resolution, stencil=16):
    """Pairwise quasihyperbolic distances between points, on one shared lattice.

    The result is an exact graph metric, so it is symmetric and satisfies the
    triangle inequality.
    """
    pts = _check_interior(domain, points).ravel()
    lattice = QuasihyperbolicLattice(domain, resolution, stencil)
    graph = lattice.graph(list(pts))
    sources = lattice.node_count + np.arange(pts.size)
    dist = dijkstra(graph, directed=False, indices=sources)[:, sources]
    if not np.all(np.isfinite(dist)):
        raise ResolutionError("resolution too coarse: points are not connected")
    return dist


def quasihyperbolic_distance(domain: JordanDomain, z, z0, resolution, stencil=16):
    """Quasihyperbolic distance k(z, z0) = inf over paths of the integral of |dw|/d(w)."""
    if z == z0:
        _check_interior(domain, [z])
        return 0.0
    return float(quasihyperbolic_distances(domain, [z, z0], resolution, stencil)[0, 1])


@dataclass(frozen=True)
class QhbEstimate:
    a: float
    b: float
    max_residual: float
    z0: complex
    samples: np.ndarray = field(repr=False)
    k: np.ndarray = field(repr=False)
    log_ratio: np.ndarray = field(repr=False)


def estimate_qhb_constants(
    domain: JordanDomain,
    z0=None,
    sample_count=256,
    resolution=None,
    seed=0,
    stencil=16,
):
    """Fit k(z, z0) <= a*ln(d(z0)/d(z)) + b over quasi-random interior samples."""
    z0 = domain.centroid if z0 is None else complex(z0)
    _check_interior(domain, [z0])
    if resolution is None:
        resolution = domain.diameter / 160
    xmin, xmax, ymin, ymax = domain.bbox

    sobol = qmc.Sobol(d=2, scramble=True, seed=seed)
    raw = sobol.random_base2(int(np.ceil(np.log2(max(8 * sample_count, 16)))))
    cand = xmin + raw[:, 0] * (xmax - xmin) + 1j * (ymin + raw[:, 1] * (ymax - ymin))
    cand = cand[domain.contains(cand)]
    cand = cand[domain.distance_to_boundary(cand) >= 3 * resolution]
    samples = cand[:sample_count]
    if samples.size < max(8, sample_count // 2):
        raise DomainError(
            f"insufficient samples: {samples.size} usable points for {sample_count} requested"
        )

    lattice = QuasihyperbolicLattice(domain, resolution, stencil)
    k = lattice.distances_from(z0, samples)
    if not np.all(np.isfinite(k)):
        raise ResolutionError("resolution too coarse: samples are not connected to z0")
    d0 = domain.distance_to_boundary(z0)
    x = np.log(d0 / domain.distance_to_boundary(samples))

    design = np.column_stack([x, np.ones_like(x)])
    (a, b), *_ = np.linalg.lstsq(design, k, rcond=None)
    if a < 0:
        a, b = 0.0, float(np.mean(k))
    max_residual = max(0.0, float(np.max(k - a * x - b)))
    logger.log(
        f"qhb fit on {domain.name}: a={a:.4f} b={b:.4f} residual={max_residual:.3g}",
        "green",
    )
    return QhbEstimate(float(a), float(b), max_residual, z0, samples, k, x)
