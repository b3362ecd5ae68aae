"""Convex computational domains of unit measure and their discrete calculus.

Supported domains are intervals, rectangles (tensor-product finite
differences) and balls reduced to their radial coordinate (finite volumes
with the r^(d-1) weight). Every domain is rescaled at construction so its
measure is exactly 1; the applied scale factor is recorded.

The discrete operators form a summation-by-parts pair: the stiffness form
E(u, v) = sum over faces of face_weight * du * dv satisfies

    E(u, v) = <u, -lap v> = <-lap u, v>

exactly in floating point, where <.,.> is the quadrature inner product and
``lap`` the Neumann Laplacian (mirror ghost nodes at the boundary). As a
consequence discrete Cauchy-Schwarz chains such as

    E(u, u)^2 <= <u, u> * <lap u, lap u>

hold in exact arithmetic, mirroring their continuum counterparts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, List, Tuple

import numpy as np
from scipy import sparse

from .errors import PositivityError, RangeError

INTERVAL = "interval"
RECTANGLE = "rectangle"
RADIAL_BALL = "radial_ball"

_MIN_RESOLUTION = 8


def sphere_surface(d: int) -> float:
    """Surface measure of the unit sphere in R^d (2 for d=1, 2*pi for d=2, ...)."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


@dataclass(frozen=True)
class Domain:
    """A convex domain: only convex kinds are constructible.

    ``extents`` holds per-axis lengths for interval/rectangle and the radius
    for a radial ball. ``scale_factor`` is the multiplicative rescale that
    was applied to reach unit measure (1.0 before normalization).
    """

    kind: str
    dimension: int
    extents: Tuple[float, ...]
    scale_factor: float = 1.0

    @staticmethod
    def interval(length: float = 1.0) -> "Domain":
        return Domain(INTERVAL, 1, (float(length),))

    @staticmethod
    def rectangle(lx: float = 1.0, ly: float = 1.0) -> "Domain":
        return Domain(RECTANGLE, 2, (float(lx), float(ly)))

    @staticmethod
    def ball(dimension: int, radius: float = 1.0) -> "Domain":
        if dimension < 2:
            raise RangeError("radial balls need ambient dimension >= 2")
        return Domain(RADIAL_BALL, int(dimension), (float(radius),))

    def measure(self) -> float:
        if self.kind == RADIAL_BALL:
            d = self.dimension
            return sphere_surface(d) * self.extents[0] ** d / d
        return float(np.prod(self.extents))

    def normalized(self) -> "Domain":
        """Rescale all extents by a common factor so the measure is 1."""
        m = self.measure()
        if not m > 0.0:
            raise RangeError("domain has non-positive extents")
        s = m ** (-1.0 / self.dimension)
        return Domain(self.kind, self.dimension,
                      tuple(s * e for e in self.extents), self.scale_factor * s)


class Grid:
    """Nodes, quadrature weights and difference operators on a Domain.

    Construct through :func:`build_grid`. Grids are immutable from the
    caller's perspective; all operators return new arrays.
    """

    def __init__(self, domain: Domain, axes: List[np.ndarray],
                 weights: np.ndarray, face_weights: List[np.ndarray],
                 spacing: Tuple[float, ...]):
        self.domain = domain
        self.axes = axes
        self.weights = weights
        self.face_weights = face_weights
        self.spacing = spacing
        self.shape = weights.shape
        self.n_nodes = int(weights.size)
        self._cache: dict = {}

    # ------------------------------------------------------------------
    # basic geometry
    @property
    def dim(self) -> int:
        """Ambient dimension (a radial grid is 1-d data for a d-ball)."""
        return self.domain.dimension

    @property
    def ndim_data(self) -> int:
        return len(self.shape)

    @property
    def h_min(self) -> float:
        return min(self.spacing)

    def coordinates(self) -> np.ndarray:
        """(n_nodes, ndim_data) array of node coordinates, C order."""
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    # ------------------------------------------------------------------
    # quadrature
    def integrate(self, u: np.ndarray) -> float:
        return float(np.sum(self.weights * u))

    def lp_norm(self, u: np.ndarray, exp: float) -> float:
        if not exp > 0.0:
            raise RangeError("Lp exponent must be positive")
        if exp != round(exp) and np.any(u < 0.0):
            raise PositivityError(
                "fractional power of a negative value in Lp norm")
        return float(np.sum(self.weights * np.abs(u) ** exp) ** (1.0 / exp))

    def mean(self, u: np.ndarray) -> float:
        return self.integrate(u)  # unit measure

    def deviation(self, u: np.ndarray) -> float:
        """L2 distance from the own mean, ||u - int u||_2."""
        return math.sqrt(max(self.integrate((u - self.mean(u)) ** 2), 0.0))

    # ------------------------------------------------------------------
    # first-order calculus
    def energy(self, u: np.ndarray) -> float:
        """Dirichlet energy int |grad u|^2 (face-based stiffness form)."""
        total = 0.0
        for a, fw in enumerate(self.face_weights):
            d = np.diff(u, axis=a)
            total += float(np.sum(fw * d * d))
        return total

    def stiffness_apply(self, u: np.ndarray) -> np.ndarray:
        """K u with E(u, v) = sum(v * K u); K is symmetric PSD, K 1 = 0."""
        out = np.zeros_like(u, dtype=float)
        for a, fw in enumerate(self.face_weights):
            g = fw * np.diff(u, axis=a)
            lo = [slice(None)] * u.ndim
            hi = [slice(None)] * u.ndim
            lo[a] = slice(None, -1)
            hi[a] = slice(1, None)
            out[tuple(lo)] -= g
            out[tuple(hi)] += g
        return out

    def weighted_stiffness_apply(self, coeff: np.ndarray,
                                 u: np.ndarray) -> np.ndarray:
        """K_c u for the form sum over faces of face_weight * mean(c) * du dv."""
        out = np.zeros_like(u, dtype=float)
        for a, fw in enumerate(self.face_weights):
            lo = [slice(None)] * u.ndim
            hi = [slice(None)] * u.ndim
            lo[a] = slice(None, -1)
            hi[a] = slice(1, None)
            cbar = 0.5 * (coeff[tuple(lo)] + coeff[tuple(hi)])
            g = fw * cbar * np.diff(u, axis=a)
            out[tuple(lo)] -= g
            out[tuple(hi)] += g
        return out

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        """Neumann Laplacian, the negative of stiffness over quadrature weights."""
        return -self.stiffness_apply(u) / self.weights

    def nodal_grad_sq(self, u: np.ndarray) -> np.ndarray:
        """Nodal |grad u|^2: centered differences inside, one-sided at faces."""
        out = np.zeros_like(u, dtype=float)
        for a, h in enumerate(self.spacing):
            g = np.empty_like(u, dtype=float)
            mid = [slice(None)] * u.ndim
            up = [slice(None)] * u.ndim
            dn = [slice(None)] * u.ndim
            mid[a] = slice(1, -1)
            up[a] = slice(2, None)
            dn[a] = slice(None, -2)
            g[tuple(mid)] = (u[tuple(up)] - u[tuple(dn)]) / (2.0 * h)
            first = [slice(None)] * u.ndim
            second = [slice(None)] * u.ndim
            first[a] = 0
            second[a] = 1
            g[tuple(first)] = (u[tuple(second)] - u[tuple(first)]) / h
            last = [slice(None)] * u.ndim
            prev = [slice(None)] * u.ndim
            last[a] = -1
            prev[a] = -2
            g[tuple(last)] = (u[tuple(last)] - u[tuple(prev)]) / h
            out += g * g
        return out

    # ------------------------------------------------------------------
    # second-order calculus
    def _second_diff(self, u: np.ndarray, a: int) -> np.ndarray:
        """Mirrored second difference along axis a (ghost u[-1] = u[1])."""
        h = self.spacing[a]
        out = np.empty_like(u, dtype=float)
        mid = [slice(None)] * u.ndim
        up = [slice(None)] * u.ndim
        dn = [slice(None)] * u.ndim
        mid[a] = slice(1, -1)
        up[a] = slice(2, None)
        dn[a] = slice(None, -2)
        out[tuple(mid)] = (u[tuple(up)] - 2.0 * u[tuple(mid)] + u[tuple(dn)]) / h**2
        first = [slice(None)] * u.ndim
        second = [slice(None)] * u.ndim
        first[a] = 0
        second[a] = 1
        out[tuple(first)] = 2.0 * (u[tuple(second)] - u[tuple(first)]) / h**2
        last = [slice(None)] * u.ndim
        prev = [slice(None)] * u.ndim
        last[a] = -1
        prev[a] = -2
        out[tuple(last)] = 2.0 * (u[tuple(prev)] - u[tuple(last)]) / h**2
        return out

    def _first_diff_odd(self, u: np.ndarray, a: int) -> np.ndarray:
        """Centered first difference, zero at faces (odd mirror reflection)."""
        h = self.spacing[a]
        out = np.zeros_like(u, dtype=float)
        mid = [slice(None)] * u.ndim
        up = [slice(None)] * u.ndim
        dn = [slice(None)] * u.ndim
        mid[a] = slice(1, -1)
        up[a] = slice(2, None)
        dn[a] = slice(None, -2)
        out[tuple(mid)] = (u[tuple(up)] - u[tuple(dn)]) / (2.0 * h)
        return out

    def hessian_frobenius(self, u: np.ndarray) -> float:
        """int |Hess u|^2 from mirrored second and mixed differences."""
        if self.domain.kind == RADIAL_BALL:
            r = self.axes[0]
            upp = self._second_diff(u, 0)
            up = self._first_diff_odd(u, 0)
            ratio = np.empty_like(up)
            ratio[1:] = up[1:] / r[1:]
            ratio[0] = upp[0]  # u'(r)/r -> u''(0) at the origin
            dens = upp**2 + (self.dim - 1) * ratio**2
            return self.integrate(dens)
        dens = np.zeros_like(u, dtype=float)
        nd = u.ndim
        for a in range(nd):
            dens += self._second_diff(u, a) ** 2
        for a in range(nd):
            for b in range(a + 1, nd):
                mixed = self._first_diff_odd(self._first_diff_odd(u, a), b)
                dens += 2.0 * mixed**2
        return self.integrate(dens)

    # ------------------------------------------------------------------
    # sparse operators for eigen/Newton solves
    def sparse_stiffness(self) -> sparse.csr_matrix:
        if "K" not in self._cache:
            self._cache["K"] = self._assemble_stiffness()
        return self._cache["K"]

    def mass_vector(self) -> np.ndarray:
        return self.weights.ravel()

    def _axis_tridiag(self, fc: np.ndarray, n: int) -> sparse.csr_matrix:
        main = np.zeros(n)
        main[:-1] += fc
        main[1:] += fc
        return sparse.diags([-fc, main, -fc], offsets=(-1, 0, 1),
                            format="csr")

    def _assemble_stiffness(self) -> sparse.csr_matrix:
        if self.domain.kind == RADIAL_BALL:
            fc = self.face_weights[0]
            return self._axis_tridiag(fc, self.shape[0])
        mats = []
        for a in range(len(self.shape)):
            fc = np.full(self.shape[a] - 1, 1.0 / self.spacing[a])
            mats.append(self._axis_tridiag(fc, self.shape[a]))
        if len(mats) == 1:
            return mats[0]
        wx, wy = self._cache["axis_weights"]
        kx, ky = mats
        return (sparse.kron(kx, sparse.diags(wy)) +
                sparse.kron(sparse.diags(wx), ky)).tocsr()


def _trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def build_grid(domain: Domain, resolution) -> Grid:
    """Discretize a domain normalized to unit measure.

    ``resolution`` is the node count per axis (int, or per-axis tuple for
    rectangles); at least 8 nodes per axis are required.
    """
    dom = domain.normalized()
    if dom.kind in (INTERVAL, RECTANGLE):
        naxes = 1 if dom.kind == INTERVAL else 2
        if np.isscalar(resolution):
            res = (int(resolution),) * naxes
        else:
            res = tuple(int(r) for r in resolution)
        if len(res) != naxes:
            raise RangeError("resolution rank does not match the domain")
        if min(res) < _MIN_RESOLUTION:
            raise RangeError(f"resolution must be >= {_MIN_RESOLUTION} per axis")
        axes, spacing, axis_w = [], [], []
        for n, ext in zip(res, dom.extents):
            h = ext / (n - 1)
            axes.append(np.linspace(0.0, ext, n))
            spacing.append(h)
            axis_w.append(_trapezoid_weights(n, h))
        if naxes == 1:
            weights = axis_w[0].copy()
            face_weights = [np.full(res[0] - 1, 1.0 / spacing[0])]
        else:
            weights = np.outer(axis_w[0], axis_w[1])
            face_weights = [
                np.outer(np.full(res[0] - 1, 1.0 / spacing[0]), axis_w[1]),
                np.outer(axis_w[0], np.full(res[1] - 1, 1.0 / spacing[1])),
            ]
        grid = Grid(dom, axes, weights, face_weights, tuple(spacing))
        if naxes == 2:
            grid._cache["axis_weights"] = (axis_w[0], axis_w[1])
        return grid

    if dom.kind == RADIAL_BALL:
        n = int(resolution)
        if n < _MIN_RESOLUTION:
            raise RangeError(f"resolution must be >= {_MIN_RESOLUTION}")
        d = dom.dimension
        radius = dom.extents[0]
        h = radius / (n - 1)
        r = np.linspace(0.0, radius, n)
        surf = sphere_surface(d)
        # exact cell volumes: positive at the origin, summing to |ball| = 1
        r_face = np.minimum(r + 0.5 * h, radius)
        r_face_lo = np.maximum(r - 0.5 * h, 0.0)
        weights = surf * (r_face**d - r_face_lo**d) / d
        fc = surf * (r[:-1] + 0.5 * h) ** (d - 1) / h
        return Grid(dom, [r], weights, [fc], (h,))

    raise RangeError(f"unknown domain kind {dom.kind!r}")


# ----------------------------------------------------------------------
# fields
@dataclass
class Field:
    """A real grid function (one value per node)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise RangeError("field shape does not match its grid")

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())


def constant_field(grid: Grid, value: float) -> Field:
    return Field(grid, np.full(grid.shape, float(value)))


def _check_finite(values: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise RangeError("operation produced non-finite field values")
    return values


def integrate(f: Field) -> float:
    return f.grid.integrate(f.values)


def lp_norm(f: Field, exp: float) -> float:
    return f.grid.lp_norm(f.values, exp)


def dirichlet_energy(f: Field) -> float:
    return f.grid.energy(f.values)


def neumann_laplacian_apply(f: Field) -> Field:
    return Field(f.grid, _check_finite(f.grid.laplacian(f.values)))


def hessian_frobenius_integral(f: Field) -> float:
    return f.grid.hessian_frobenius(f.values)


def smooth_random_field(grid: Grid, rng, amp: float = 0.3,
                        modes: int = 3) -> np.ndarray:
    """Positive random field exp(amp * low-frequency cosine noise).

    Coefficients are drawn from the supplied splitmix stream, one per
    cosine mode per axis, so fields are reproducible from the seed.
    """
    s = np.zeros(grid.shape)
    for a, x in enumerate(grid.axes):
        length = x[-1] - x[0] if x[-1] > x[0] else 1.0
        for k in range(1, modes + 1):
            c = 2.0 * rng.uniform() - 1.0
            mode = np.cos(k * math.pi * x / length)
            shape = [1] * len(grid.shape)
            shape[a] = x.size
            s = s + c * mode.reshape(shape)
    return np.exp(amp * s)


def field_to_csv(f: Field, stream: IO[str], value_name: str = "value") -> None:
    """Write node coordinates and values as CSV rows (C-order nodes)."""
    coords = f.grid.coordinates()
    names = (["x", "y"][: coords.shape[1]]
             if f.grid.domain.kind != RADIAL_BALL else ["r"])
    stream.write(",".join(names + [value_name]) + "\n")
    flat = f.values.ravel()
    for i in range(coords.shape[0]):
        cols = [repr(float(c)) for c in coords[i]] + [repr(float(flat[i]))]
        stream.write(",".join(cols) + "\n")
