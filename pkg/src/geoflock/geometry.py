"""Constant-curvature position spaces: distances, geodesics, midpoints, sampling.

Four families are provided, each with closed-form geodesic operations:

* ``euclidean``   flat R^n, coordinates are plain vectors
* ``circle``      unit circle, coordinates are angles in [0, 2*pi)
* ``sphere``      unit sphere S^n embedded in R^{n+1}, rescaled for curvature K > 0
* ``hyperbolic``  hyperboloid model of H^2 (x0 > 0, x0^2 - x1^2 - x2^2 = 1),
                  rescaled for curvature K < 0

A space of curvature K != 0 keeps the unit-model coordinates and rescales all
lengths by 1/sqrt(|K|).  Tangent vectors are ambient vectors (a signed scalar
on the circle) carrying metric length, so ``norm(log_map(x, y)) == distance(x, y)``
and ``exp_map(x, log_map(x, y)) == y`` inside the injectivity radius.

All operations are pure functions of immutable values; RNG state is always
passed explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import DomainError, UsageError

TWO_PI = 2.0 * math.pi

EUCLIDEAN = "euclidean"
CIRCLE = "circle"
SPHERE = "sphere"
HYPERBOLIC = "hyperbolic"

_FAMILIES = (EUCLIDEAN, CIRCLE, SPHERE, HYPERBOLIC)

# Two sphere points are treated as antipodal when |x + x'| falls below this.
ANTIPODAL_TOL = 1e-9

_COORD_TOL = 1e-9


@dataclass(frozen=True)
class ManifoldSpace:
    """Descriptor of a position space: family, dimension and curvature."""

    family: str
    dim: int
    curvature: float

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise UsageError(f"unknown space family {self.family!r}")
        if self.dim < 1:
            raise UsageError("dim must be a positive integer")
        if self.family == EUCLIDEAN and self.curvature != 0.0:
            raise UsageError("euclidean space has curvature 0")
        if self.family == CIRCLE and (self.dim != 1 or self.curvature != 1.0):
            raise UsageError("circle fixes dim=1 and curvature=1")
        if self.family == SPHERE and self.curvature <= 0.0:
            raise UsageError("sphere curvature must be positive")
        if self.family == HYPERBOLIC and (self.dim != 2 or self.curvature >= 0.0):
            raise UsageError("hyperbolic plane fixes dim=2 and needs curvature < 0")

    @property
    def scale(self) -> float:
        """Length rescaling of the unit model: 1/sqrt(|K|) (1 if flat)."""
        if self.curvature == 0.0:
            return 1.0
        return 1.0 / math.sqrt(abs(self.curvature))

    @property
    def injectivity_radius(self) -> float:
        if self.family in (CIRCLE, SPHERE):
            return math.pi * self.scale
        return math.inf

    @property
    def coord_size(self) -> int:
        """Length of the coordinate vector of one point."""
        if self.family == CIRCLE:
            return 1
        if self.family == SPHERE:
            return self.dim + 1
        if self.family == HYPERBOLIC:
            return 3
        return self.dim

    @property
    def diameter(self) -> float:
        if self.family in (CIRCLE, SPHERE):
            return math.pi * self.scale
        return math.inf


def euclidean(dim: int) -> ManifoldSpace:
    return ManifoldSpace(EUCLIDEAN, dim, 0.0)


def circle() -> ManifoldSpace:
    return ManifoldSpace(CIRCLE, 1, 1.0)


def sphere(dim: int, curvature: float = 1.0) -> ManifoldSpace:
    return ManifoldSpace(SPHERE, dim, curvature)


def hyperbolic(curvature: float = -1.0) -> ManifoldSpace:
    return ManifoldSpace(HYPERBOLIC, 2, curvature)


def parse_space(spec: str) -> ManifoldSpace:
    """Parse a space spec string.

    Accepted forms: ``euclidean:<dim>``, ``circle``, ``sphere:<dim>``,
    ``hyperbolic:<curvature>`` (curvature a negative decimal).
    """
    parts = spec.strip().split(":")
    name = parts[0]
    try:
        if name == CIRCLE and len(parts) == 1:
            return circle()
        if name == EUCLIDEAN and len(parts) == 2:
            return euclidean(int(parts[1]))
        if name == SPHERE and len(parts) == 2:
            return sphere(int(parts[1]))
        if name == HYPERBOLIC and len(parts) == 2:
            return hyperbolic(float(parts[1]))
    except ValueError as exc:
        raise UsageError(f"bad space spec {spec!r}: {exc}") from exc
    raise UsageError(f"bad space spec {spec!r}")


def format_space(space: ManifoldSpace) -> str:
    if space.family == CIRCLE:
        return "circle"
    if space.family == EUCLIDEAN:
        return f"euclidean:{space.dim}"
    if space.family == SPHERE:
        return f"sphere:{space.dim}"
    return f"hyperbolic:{space.curvature:g}"


# ---------------------------------------------------------------------------
# points


@dataclass(frozen=True, eq=False)
class Point:
    """Coordinates tagged with their space.  Use :func:`point` to construct."""

    space: ManifoldSpace
    coords: np.ndarray

    def __repr__(self):  # pragma: no cover
        return f"Point({format_space(self.space)}, {self.coords})"


def point(space: ManifoldSpace, coords) -> Point:
    """Validate and normalize coordinates, returning an immutable Point.

    Sphere vectors and hyperboloid coordinates are accepted if they satisfy
    their constraint within 1e-9 and are renormalized to machine precision;
    circle angles are reduced modulo 2*pi.
    """
    c = np.asarray(coords, dtype=float).reshape(-1).copy()
    if c.shape[0] != space.coord_size:
        raise UsageError(
            f"expected {space.coord_size} coordinates for {format_space(space)}, got {c.shape[0]}"
        )
    if space.family == CIRCLE:
        c = np.mod(c, TWO_PI)
    elif space.family == SPHERE:
        n = float(np.linalg.norm(c))
        if abs(n - 1.0) > _COORD_TOL:
            raise UsageError(f"sphere coordinates must be unit length, |x|={n}")
        c = c / n
    elif space.family == HYPERBOLIC:
        q = c[0] ** 2 - c[1] ** 2 - c[2] ** 2
        if c[0] <= 0.0 or abs(q - 1.0) > _COORD_TOL:
            raise UsageError("hyperboloid coordinates must satisfy x0>0, x0^2-x1^2-x2^2=1")
        c[0] = math.sqrt(1.0 + c[1] ** 2 + c[2] ** 2)
    c.setflags(write=False)
    return Point(space, c)


def _check_same_space(a: Point, b: Point) -> ManifoldSpace:
    if a.space != b.space:
        raise UsageError("points live on different spaces")
    return a.space


def _rows(space: ManifoldSpace, A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A.reshape(1, -1) if space.family != CIRCLE else A.reshape(-1, 1)
    return A


# ---------------------------------------------------------------------------
# Minkowski helpers (hyperboloid model)


def _ldot_rows(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A[:, 1] * B[:, 1] + A[:, 2] * B[:, 2] - A[:, 0] * B[:, 0]


def _ldot_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A[:, 1:] @ B[:, 1:].T - np.outer(A[:, 0], B[:, 0])


# ---------------------------------------------------------------------------
# distances


def _sphere_angle_rows(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    # chord-based arc angle: exact at coincidence, well conditioned at antipodes
    chord_m = np.linalg.norm(A - B, axis=1)
    chord_p = np.linalg.norm(A + B, axis=1)
    near = chord_m <= chord_p
    ang = np.where(
        near,
        2.0 * np.arcsin(np.clip(0.5 * chord_m, 0.0, 1.0)),
        math.pi - 2.0 * np.arcsin(np.clip(0.5 * chord_p, 0.0, 1.0)),
    )
    return ang


def dist_rows(space: ManifoldSpace, A, B) -> np.ndarray:
    """Row-wise geodesic distance between coordinate arrays of equal shape."""
    A = _rows(space, A)
    B = _rows(space, B)
    if space.family == EUCLIDEAN:
        return np.linalg.norm(A - B, axis=1)
    if space.family == CIRCLE:
        d = np.abs(A[:, 0] - B[:, 0]) % TWO_PI
        return np.minimum(d, TWO_PI - d)
    if space.family == SPHERE:
        return _sphere_angle_rows(A, B) * space.scale
    # Minkowski chord s satisfies cosh d = 1 + s^2/2, i.e. d = 2 asinh(s/2)
    diff = A - B
    s2 = np.maximum(_ldot_rows(diff, diff), 0.0)
    return 2.0 * np.arcsinh(0.5 * np.sqrt(s2)) * space.scale


_MATRIX_CHUNK = 256


def sq_dist_matrix_fast(space: ManifoldSpace, A, B) -> np.ndarray:
    """Squared-distance matrix from one Gram product.

    Coincident rows may come out as ~1e-16 instead of exactly zero, which is
    irrelevant for sums and minima over many atoms; use :func:`sq_dist_matrix`
    where exact zeros matter (transport costs).
    """
    A = _rows(space, A)
    B = _rows(space, B)
    if space.family == CIRCLE:
        d = np.abs(A[:, 0][:, None] - B[:, 0][None, :]) % TWO_PI
        d = np.minimum(d, TWO_PI - d)
        return d * d
    if space.family == EUCLIDEAN:
        aa = np.sum(A * A, axis=1)[:, None]
        bb = np.sum(B * B, axis=1)[None, :]
        return np.maximum(aa + bb - 2.0 * (A @ B.T), 0.0)
    if space.family == SPHERE:
        gram = A @ B.T
        ang = 2.0 * np.arcsin(
            np.clip(0.5 * np.sqrt(np.maximum(2.0 - 2.0 * gram, 0.0)), 0.0, 1.0)
        )
        d = ang * space.scale
        return d * d
    s2 = np.maximum(-2.0 - 2.0 * _ldot_matrix(A, B), 0.0)
    d = 2.0 * np.arcsinh(0.5 * np.sqrt(s2)) * space.scale
    return d * d


def sq_dist_matrix(space: ManifoldSpace, A, B) -> np.ndarray:
    """Matrix of squared geodesic distances between two coordinate arrays.

    Computed from coordinate differences (chunked over rows of A) so that
    identical rows give exactly zero.
    """
    A = _rows(space, A)
    B = _rows(space, B)
    if space.family == CIRCLE:
        d = np.abs(A[:, 0][:, None] - B[:, 0][None, :]) % TWO_PI
        d = np.minimum(d, TWO_PI - d)
        return d * d
    out = np.empty((A.shape[0], B.shape[0]))
    for start in range(0, A.shape[0], _MATRIX_CHUNK):
        block = slice(start, min(start + _MATRIX_CHUNK, A.shape[0]))
        diff = A[block, None, :] - B[None, :, :]
        if space.family == EUCLIDEAN:
            out[block] = np.sum(diff * diff, axis=2)
        elif space.family == SPHERE:
            chord_m = np.linalg.norm(diff, axis=2)
            csum = np.linalg.norm(A[block, None, :] + B[None, :, :], axis=2)
            ang = np.where(
                chord_m <= csum,
                2.0 * np.arcsin(np.clip(0.5 * chord_m, 0.0, 1.0)),
                math.pi - 2.0 * np.arcsin(np.clip(0.5 * csum, 0.0, 1.0)),
            )
            d = ang * space.scale
            out[block] = d * d
        else:
            s2 = np.maximum(
                diff[:, :, 1] ** 2 + diff[:, :, 2] ** 2 - diff[:, :, 0] ** 2, 0.0
            )
            d = 2.0 * np.arcsinh(0.5 * np.sqrt(s2)) * space.scale
            out[block] = d * d
    return out


def distance(a: Point, b: Point) -> float:
    """Geodesic distance between two points on the same space."""
    space = _check_same_space(a, b)
    return float(dist_rows(space, a.coords, b.coords)[0])


# ---------------------------------------------------------------------------
# midpoints


@dataclass(frozen=True)
class MidpointSet:
    """Set of midpoints of minimal geodesics joining two points.

    ``kind == "unique"`` carries the single midpoint.  ``kind == "equator"``
    describes the degenerate antipodal case on a sphere: the set of midpoints
    is the great subsphere orthogonal to the two poles (two opposite points
    when the sphere is a circle).
    """

    kind: str
    point: Optional[Point] = None
    poles: Optional[Tuple[Point, Point]] = None


def _circle_midpoint_angle(ta: float, tb: float) -> float:
    """Midpoint of the minimal arc, for angles in [0, 2*pi) with |ta-tb| != pi."""
    mean = 0.5 * (ta + tb)
    if abs(ta - tb) < math.pi:
        return mean % TWO_PI
    if mean < math.pi:
        return (mean + math.pi) % TWO_PI
    return (mean - math.pi) % TWO_PI


def midpoints(a: Point, b: Point) -> MidpointSet:
    """Midpoint(s) of minimal geodesics from ``a`` to ``b``."""
    space = _check_same_space(a, b)
    if space.family == EUCLIDEAN:
        return MidpointSet("unique", point(space, 0.5 * (a.coords + b.coords)))
    if space.family == CIRCLE:
        ta, tb = float(a.coords[0]), float(b.coords[0])
        gap = abs(ta - tb)
        if abs(gap - math.pi) < ANTIPODAL_TOL:
            return MidpointSet("equator", poles=(a, b))
        return MidpointSet("unique", point(space, [_circle_midpoint_angle(ta, tb)]))
    if space.family == SPHERE:
        s = a.coords + b.coords
        n = float(np.linalg.norm(s))
        if n < ANTIPODAL_TOL:
            return MidpointSet("equator", poles=(a, b))
        return MidpointSet("unique", point(space, s / n))
    s = a.coords + b.coords
    n = math.sqrt(max(-float(_ldot_rows(s[None, :], s[None, :])[0]), 0.0))
    return MidpointSet("unique", point(space, s / n))


def midpoint_rows(space: ManifoldSpace, A, B) -> Tuple[np.ndarray, np.ndarray]:
    """Row-wise unique midpoints; returns (coords, antipodal_mask).

    Rows flagged antipodal have no unique midpoint and carry unspecified
    coordinates; callers must handle them (e.g. by equator sampling).
    """
    A = _rows(space, A)
    B = _rows(space, B)
    if space.family == EUCLIDEAN:
        return 0.5 * (A + B), np.zeros(A.shape[0], dtype=bool)
    if space.family == CIRCLE:
        ta = A[:, 0]
        tb = B[:, 0]
        mean = 0.5 * (ta + tb)
        gap = np.abs(ta - tb)
        out = np.where(
            gap < math.pi, mean, np.where(mean < math.pi, mean + math.pi, mean - math.pi)
        )
        anti = np.abs(gap - math.pi) < ANTIPODAL_TOL
        return np.mod(out, TWO_PI)[:, None], anti
    if space.family == SPHERE:
        s = A + B
        n = np.linalg.norm(s, axis=1)
        anti = n < ANTIPODAL_TOL
        n = np.where(anti, 1.0, n)
        return s / n[:, None], anti
    s = A + B
    n = np.sqrt(np.maximum(-_ldot_rows(s, s), 0.0))
    return s / n[:, None], np.zeros(A.shape[0], dtype=bool)


def midpoint_set_distance(space: ManifoldSpace, x, a, b) -> np.ndarray:
    """Row-wise distance from ``x`` to the midpoint set of the pair (a, b)."""
    X = _rows(space, x)
    mids, anti = midpoint_rows(space, a, b)
    d = dist_rows(space, X, mids)
    if np.any(anti):
        # distance to the equator {y : y.a = 0} is |pi/2*scale - d(x, pole)|
        A = _rows(space, a)
        dp = dist_rows(space, X, A)
        d = np.where(anti, np.abs(0.5 * math.pi * space.scale - dp), d)
    return d


# ---------------------------------------------------------------------------
# exponential / logarithm maps


def _check_inside_injectivity(space: ManifoldSpace, d: float, what: str):
    if d >= space.injectivity_radius - 1e-12:
        raise DomainError(f"{what}: point at or beyond the cut locus (d={d})")


def log_rows(space: ManifoldSpace, base, targets) -> np.ndarray:
    """Tangent vectors at ``base`` pointing to each target row.

    The branch at exactly the cut locus is resolved deterministically; use
    :func:`log_map` for the strict single-point operation.
    """
    base = np.asarray(base, dtype=float).reshape(-1)
    T = _rows(space, targets)
    if space.family == EUCLIDEAN:
        return T - base[None, :]
    if space.family == CIRCLE:
        d = np.mod(T[:, 0] - base[0] + math.pi, TWO_PI) - math.pi
        # wrap lands in [-pi, pi); send the -pi branch to +pi for determinism
        d = np.where(d < -math.pi + 1e-15, math.pi, d)
        return d[:, None]
    B = np.broadcast_to(base, T.shape)
    if space.family == SPHERE:
        dots = np.clip(np.sum(T * B, axis=1), -1.0, 1.0)
        ang = _sphere_angle_rows(T, B)
        w = T - dots[:, None] * B
        n = np.linalg.norm(w, axis=1)
        safe = np.where(n > 1e-300, n, 1.0)
        out = (w / safe[:, None]) * (ang * space.scale)[:, None]
        return np.where(n[:, None] > 1e-300, out, 0.0)
    c = np.maximum(-_ldot_rows(T, B), 1.0)
    diff = T - B
    tau = 2.0 * np.arcsinh(0.5 * np.sqrt(np.maximum(_ldot_rows(diff, diff), 0.0)))
    w = T - c[:, None] * B
    n = np.sqrt(np.maximum(_ldot_rows(w, w), 0.0))
    safe = np.where(n > 1e-300, n, 1.0)
    out = (w / safe[:, None]) * (tau * space.scale)[:, None]
    return np.where(n[:, None] > 1e-300, out, 0.0)


def exp_rows(space: ManifoldSpace, base, tangents) -> np.ndarray:
    """Apply the exponential map at ``base`` (single point) to tangent rows."""
    base = np.asarray(base, dtype=float).reshape(-1)
    V = np.asarray(tangents, dtype=float)
    if V.ndim == 1:
        V = V.reshape(-1, 1) if space.family == CIRCLE else V.reshape(1, -1)
    if space.family == EUCLIDEAN:
        return base[None, :] + V
    if space.family == CIRCLE:
        return np.mod(base[0] + V[:, 0], TWO_PI)[:, None]
    if space.family == SPHERE:
        t = np.linalg.norm(V, axis=1)
        ang = t / space.scale
        safe = np.where(t > 0.0, t, 1.0)
        u = V / safe[:, None]
        out = np.cos(ang)[:, None] * base[None, :] + np.sin(ang)[:, None] * u
        out = np.where(t[:, None] > 0.0, out, base[None, :])
        return out / np.linalg.norm(out, axis=1)[:, None]
    t = np.sqrt(np.maximum(_ldot_rows(V, V), 0.0))
    tau = t / space.scale
    safe = np.where(t > 0.0, t, 1.0)
    u = V / safe[:, None]
    out = np.cosh(tau)[:, None] * base[None, :] + np.sinh(tau)[:, None] * u
    out = np.where(t[:, None] > 0.0, out, base[None, :])
    out[:, 0] = np.sqrt(1.0 + out[:, 1] ** 2 + out[:, 2] ** 2)
    return out


def log_map(base: Point, target: Point) -> np.ndarray:
    """Tangent vector v at ``base`` with exp(base, v) = target and |v| = d(base, target)."""
    space = _check_same_space(base, target)
    d = distance(base, target)
    _check_inside_injectivity(space, d, "log_map")
    return log_rows(space, base.coords, target.coords)[0]


def exp_map(base: Point, tangent) -> Point:
    """Geodesic shot from ``base`` with initial velocity ``tangent`` (metric length)."""
    return point(base.space, exp_rows(base.space, base.coords, tangent)[0])


def point_symmetry(center: Point, x: Point) -> Point:
    """Geodesic point reflection of ``x`` through ``center``."""
    space = _check_same_space(center, x)
    d = distance(center, x)
    _check_inside_injectivity(space, d, "point_symmetry")
    v = log_rows(space, center.coords, x.coords)[0]
    return point(space, exp_rows(space, center.coords, -v)[0])


def reflect_rows(space: ManifoldSpace, center, X) -> np.ndarray:
    """Row-wise geodesic point reflection through a single center."""
    V = log_rows(space, center, X)
    return exp_rows(space, center, -V)


# ---------------------------------------------------------------------------
# Apollonius / median identities


def apollonius_residual(space: ManifoldSpace, a, b, bp, m):
    """Residual of the median identity for a triangle with half-side ``a``,
    sides ``b``, ``bp`` and median ``m``.

    Vanishes identically for lengths measured on a geodesic triangle with the
    median drawn to the side of length ``2a``:

    * sphere family: (cos b + cos b')/2 - cos a * cos m   (angles = length*sqrt(K))
    * hyperbolic:    (cosh b + cosh b')/2 - cosh a * cosh m
    * euclidean:     m^2 + a^2 - (b^2 + b'^2)/2
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    bp = np.asarray(bp, dtype=float)
    m = np.asarray(m, dtype=float)
    if space.family == EUCLIDEAN:
        return m**2 + a**2 - 0.5 * (b**2 + bp**2)
    k = 1.0 / space.scale
    if space.family in (CIRCLE, SPHERE):
        return 0.5 * (np.cos(b * k) + np.cos(bp * k)) - np.cos(a * k) * np.cos(m * k)
    return 0.5 * (np.cosh(b * k) + np.cosh(bp * k)) - np.cosh(a * k) * np.cosh(m * k)


# ---------------------------------------------------------------------------
# sampling


def sample_uniform(space: ManifoldSpace, rng: np.random.Generator) -> Point:
    """Uniform sample w.r.t. the volume measure (compact families only)."""
    return point(space, sample_uniform_rows(space, 1, rng)[0])


def sample_uniform_rows(space: ManifoldSpace, n: int, rng: np.random.Generator) -> np.ndarray:
    if space.family == CIRCLE:
        return rng.uniform(0.0, TWO_PI, size=(n, 1))
    if space.family == SPHERE:
        g = rng.standard_normal((n, space.coord_size))
        return g / np.linalg.norm(g, axis=1)[:, None]
    raise UsageError(f"no uniform probability measure on {format_space(space)}")


def _tangent_dir_rows(space: ManifoldSpace, bases: np.ndarray, rng) -> np.ndarray:
    """Unit tangent directions (metric norm 1) at each base row."""
    n = bases.shape[0]
    if space.family == CIRCLE:
        return rng.choice([-1.0, 1.0], size=(n, 1))
    if space.family == EUCLIDEAN:
        g = rng.standard_normal((n, space.dim))
        return g / np.linalg.norm(g, axis=1)[:, None]
    if space.family == SPHERE:
        g = rng.standard_normal((n, space.coord_size))
        w = g - np.sum(g * bases, axis=1)[:, None] * bases
        nn = np.linalg.norm(w, axis=1)
        while np.any(nn < 1e-12):  # pragma: no cover - probability zero
            bad = nn < 1e-12
            g[bad] = rng.standard_normal((int(bad.sum()), space.coord_size))
            w = g - np.sum(g * bases, axis=1)[:, None] * bases
            nn = np.linalg.norm(w, axis=1)
        return w / nn[:, None]
    g = rng.standard_normal((n, 3))
    w = g + _ldot_rows(g, bases)[:, None] * bases
    nn = np.sqrt(np.maximum(_ldot_rows(w, w), 1e-300))
    return w / nn[:, None]


def sample_ball_rows(
    space: ManifoldSpace, centers: np.ndarray, radii, rng: np.random.Generator
) -> np.ndarray:
    """Row-wise uniform samples from geodesic balls (volume measure).

    Radial densities in normal coordinates: r^{n-1} on flat space, sin^{n-1}
    on spheres, sinh on the hyperbolic plane.
    """
    centers = _rows(space, centers)
    n = centers.shape[0]
    radii = np.broadcast_to(np.asarray(radii, dtype=float), (n,))
    if np.any(radii >= space.injectivity_radius):
        raise DomainError("ball radius must be below the injectivity radius")
    if np.any(radii < 0.0):
        raise DomainError("ball radius must be nonnegative")
    u = rng.uniform(size=n)
    if space.family == CIRCLE:
        t = (2.0 * u - 1.0) * radii
        return np.mod(centers[:, 0] + t, TWO_PI)[:, None]
    if space.family == EUCLIDEAN:
        t = radii * u ** (1.0 / space.dim)
    elif space.family == SPHERE:
        r_u = radii / space.scale
        if space.dim == 1:
            t = (2.0 * u - 1.0) * radii
            dirs = _tangent_dir_rows(space, centers, rng)
            return exp_rows_multi(space, centers, np.abs(t)[:, None] * dirs * np.sign(t)[:, None])
        if space.dim == 2:
            t = np.arccos(1.0 - u * (1.0 - np.cos(r_u))) * space.scale
        else:
            # rejection under the envelope t^{n-1} >= sin^{n-1}(t)
            t_u = np.empty(n)
            todo = np.arange(n)
            uu = u
            while todo.size:
                cand = radii[todo] / space.scale * uu ** (1.0 / space.dim)
                ratio = np.ones_like(cand)
                nz = cand > 0
                ratio[nz] = (np.sin(cand[nz]) / cand[nz]) ** (space.dim - 1)
                acc = rng.uniform(size=todo.size) < ratio
                t_u[todo[acc]] = cand[acc]
                todo = todo[~acc]
                uu = rng.uniform(size=todo.size)
            t = t_u * space.scale
    else:
        r_u = radii / space.scale
        t = np.arccosh(1.0 + u * (np.cosh(r_u) - 1.0)) * space.scale
    dirs = _tangent_dir_rows(space, centers, rng)
    return exp_rows_multi(space, centers, t[:, None] * dirs)


def exp_rows_multi(space: ManifoldSpace, bases: np.ndarray, tangents: np.ndarray) -> np.ndarray:
    """Exponential map applied row-by-row (one base per tangent row)."""
    if space.family == EUCLIDEAN:
        return bases + tangents
    if space.family == CIRCLE:
        return np.mod(bases[:, 0] + tangents[:, 0], TWO_PI)[:, None]
    if space.family == SPHERE:
        t = np.linalg.norm(tangents, axis=1)
        ang = t / space.scale
        safe = np.where(t > 0.0, t, 1.0)
        u = tangents / safe[:, None]
        out = np.cos(ang)[:, None] * bases + np.sin(ang)[:, None] * u
        out = np.where(t[:, None] > 0.0, out, bases)
        return out / np.linalg.norm(out, axis=1)[:, None]
    t = np.sqrt(np.maximum(_ldot_rows(tangents, tangents), 0.0))
    tau = t / space.scale
    safe = np.where(t > 0.0, t, 1.0)
    u = tangents / safe[:, None]
    out = np.cosh(tau)[:, None] * bases + np.sinh(tau)[:, None] * u
    out = np.where(t[:, None] > 0.0, out, bases)
    out[:, 0] = np.sqrt(1.0 + out[:, 1] ** 2 + out[:, 2] ** 2)
    return out


def log_rows_multi(space: ManifoldSpace, bases: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Log map applied row-by-row (one base per target row)."""
    if space.family == EUCLIDEAN:
        return targets - bases
    if space.family == CIRCLE:
        d = np.mod(targets[:, 0] - bases[:, 0] + math.pi, TWO_PI) - math.pi
        d = np.where(d < -math.pi + 1e-15, math.pi, d)
        return d[:, None]
    if space.family == SPHERE:
        dots = np.clip(np.sum(targets * bases, axis=1), -1.0, 1.0)
        ang = _sphere_angle_rows(targets, bases)
        w = targets - dots[:, None] * bases
        nrm = np.linalg.norm(w, axis=1)
        safe = np.where(nrm > 1e-300, nrm, 1.0)
        out = (w / safe[:, None]) * (ang * space.scale)[:, None]
        return np.where(nrm[:, None] > 1e-300, out, 0.0)
    c = np.maximum(-_ldot_rows(targets, bases), 1.0)
    diff = targets - bases
    tau = 2.0 * np.arcsinh(0.5 * np.sqrt(np.maximum(_ldot_rows(diff, diff), 0.0)))
    w = targets - c[:, None] * bases
    nrm = np.sqrt(np.maximum(_ldot_rows(w, w), 0.0))
    safe = np.where(nrm > 1e-300, nrm, 1.0)
    out = (w / safe[:, None]) * (tau * space.scale)[:, None]
    return np.where(nrm[:, None] > 1e-300, out, 0.0)


def sample_ball(space: ManifoldSpace, center: Point, radius: float, rng) -> Point:
    """One uniform sample from the geodesic ball around ``center``."""
    if center.space != space:
        raise UsageError("center lives on a different space")
    return point(space, sample_ball_rows(space, center.coords, radius, rng)[0])


def sample_equator_rows(space: ManifoldSpace, poles: np.ndarray, rng) -> np.ndarray:
    """Row-wise uniform samples from the set {x : x . pole = 0} on a sphere,
    or the two orthogonal angles on the circle."""
    poles = _rows(space, poles)
    n = poles.shape[0]
    if space.family == CIRCLE:
        sgn = rng.choice([-1.0, 1.0], size=n)
        return np.mod(poles[:, 0] + sgn * (math.pi / 2.0), TWO_PI)[:, None]
    if space.family == SPHERE:
        g = rng.standard_normal((n, space.coord_size))
        w = g - np.sum(g * poles, axis=1)[:, None] * poles
        nn = np.linalg.norm(w, axis=1)
        while np.any(nn < 1e-12):  # pragma: no cover - probability zero
            bad = nn < 1e-12
            g[bad] = rng.standard_normal((int(bad.sum()), space.coord_size))
            w = g - np.sum(g * poles, axis=1)[:, None] * poles
            nn = np.linalg.norm(w, axis=1)
        return w / nn[:, None]
    raise UsageError("equator sets only exist on the sphere family")


def embed_rows(space: ManifoldSpace, coords: np.ndarray) -> np.ndarray:
    """Embedding of coordinates into the ambient vector space used for first
    moments: (cos, sin) on the circle, identity elsewhere."""
    coords = _rows(space, coords)
    if space.family == CIRCLE:
        return np.column_stack([np.cos(coords[:, 0]), np.sin(coords[:, 0])])
    return coords
