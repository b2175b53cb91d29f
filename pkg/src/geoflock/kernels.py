"""Collision kernels: the law of the post-collision position given a pair.

Families:

* ``midpoint``       point mass at the geodesic midpoint; for antipodal
                     sphere pairs, uniform on the equator orthogonal to them
* ``noisy-eps:<e>``  one endpoint of the pair is replaced by a uniform draw
                     from the geodesic ball of radius e around it (each side
                     with probability 1/2), then the midpoint is taken
* ``noisy-gamma:<g>`` same with ball radius g * d(x, x')
* ``bdg:<g>``        uniform draw from the ball of radius g * d(m, x) around
                     the exact midpoint m

Custom kernels participate in the estimators by exposing
``sample_many(A, B, rng) -> coords`` and a ``space`` attribute.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.stats import chi2

from . import geometry as geo
from .errors import DomainError, UsageError

MIDPOINT = "midpoint"
NOISY_EPS = "noisy-eps"
NOISY_GAMMA = "noisy-gamma"
BDG = "bdg"

_FAMILIES = (MIDPOINT, NOISY_EPS, NOISY_GAMMA, BDG)


@dataclass(frozen=True)
class KernelSpec:
    """Collision kernel family with parameters, bound to a space."""

    family: str
    space: geo.ManifoldSpace
    epsilon: Optional[float] = None
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise UsageError(f"unknown kernel family {self.family!r}")
        if self.family == NOISY_EPS:
            if self.epsilon is None or self.epsilon <= 0.0:
                raise UsageError("noisy-eps needs epsilon > 0")
            if self.epsilon >= self.space.injectivity_radius:
                raise UsageError("epsilon must be below the injectivity radius")
        if self.family in (NOISY_GAMMA, BDG):
            if self.gamma is None or self.gamma < 0.0:
                raise UsageError(f"{self.family} needs gamma >= 0")


def midpoint_kernel(space: geo.ManifoldSpace) -> KernelSpec:
    return KernelSpec(MIDPOINT, space)


def noisy_eps_kernel(space: geo.ManifoldSpace, epsilon: float) -> KernelSpec:
    return KernelSpec(NOISY_EPS, space, epsilon=epsilon)


def noisy_gamma_kernel(space: geo.ManifoldSpace, gamma: float) -> KernelSpec:
    return KernelSpec(NOISY_GAMMA, space, gamma=gamma)


def bdg_kernel(space: geo.ManifoldSpace, gamma: float) -> KernelSpec:
    return KernelSpec(BDG, space, gamma=gamma)


def parse_kernel(spec: str, space: geo.ManifoldSpace) -> KernelSpec:
    """Parse ``midpoint``, ``noisy-eps:<e>``, ``noisy-gamma:<g>`` or ``bdg:<g>``."""
    parts = spec.strip().split(":")
    try:
        if parts[0] == MIDPOINT and len(parts) == 1:
            return midpoint_kernel(space)
        if parts[0] == NOISY_EPS and len(parts) == 2:
            return noisy_eps_kernel(space, float(parts[1]))
        if parts[0] == NOISY_GAMMA and len(parts) == 2:
            return noisy_gamma_kernel(space, float(parts[1]))
        if parts[0] == BDG and len(parts) == 2:
            return bdg_kernel(space, float(parts[1]))
    except ValueError as exc:
        raise UsageError(f"bad kernel spec {spec!r}: {exc}") from exc
    raise UsageError(f"bad kernel spec {spec!r}")


def format_kernel(kernel: KernelSpec) -> str:
    if kernel.family == MIDPOINT:
        return MIDPOINT
    if kernel.family == NOISY_EPS:
        return f"{NOISY_EPS}:{kernel.epsilon:g}"
    return f"{kernel.family}:{kernel.gamma:g}"


# ---------------------------------------------------------------------------
# sampling


def _midpoint_or_equator(space, A, B, rng):
    mids, anti = geo.midpoint_rows(space, A, B)
    if np.any(anti):
        mids = mids.copy()
        mids[anti] = geo.sample_equator_rows(space, A[anti], rng)
    return mids


def _check_ball_radii(space, radii):
    if np.any(radii >= space.injectivity_radius):
        raise DomainError("noise ball radius reaches the injectivity radius")


def _noised_midpoints(space, A, B, radii, rng):
    """Midpoint of (A_i, Y_i) with Y_i uniform in the ball of radius radii[i]
    around B_i; near-antipodal noised pairs are rejected and resampled."""
    _check_ball_radii(space, radii)
    n = A.shape[0]
    out = np.empty_like(A)
    todo = np.arange(n)
    while todo.size:
        noised = geo.sample_ball_rows(space, B[todo], radii[todo], rng)
        mids, anti = geo.midpoint_rows(space, A[todo], noised)
        ok = ~anti
        out[todo[ok]] = mids[ok]
        todo = todo[anti]
    return out


def sample_post_collision_many(kernel, A, B, rng: np.random.Generator) -> np.ndarray:
    """Row-wise post-collision positions for pre-collision pairs (A_i, B_i)."""
    if not isinstance(kernel, KernelSpec):
        return kernel.sample_many(A, B, rng)
    space = kernel.space
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if kernel.family == MIDPOINT:
        return _midpoint_or_equator(space, A, B, rng)
    if kernel.family in (NOISY_EPS, NOISY_GAMMA):
        n = A.shape[0]
        if kernel.family == NOISY_EPS:
            radii = np.full(n, kernel.epsilon)
        else:
            radii = kernel.gamma * geo.dist_rows(space, A, B)
        out = np.empty_like(A)
        first = rng.uniform(size=n) < 0.5
        if np.any(first):
            out[first] = _noised_midpoints(space, A[first], B[first], radii[first], rng)
        rest = ~first
        if np.any(rest):
            out[rest] = _noised_midpoints(space, B[rest], A[rest], radii[rest], rng)
        return out
    # BDG: uniform ball around the exact midpoint
    mids = _midpoint_or_equator(space, A, B, rng)
    radii = kernel.gamma * geo.dist_rows(space, mids, A)
    _check_ball_radii(space, radii)
    return geo.sample_ball_rows(space, mids, radii, rng)


def sample_post_collision(kernel, x_star: geo.Point, x_star_prime: geo.Point, rng) -> geo.Point:
    """One post-collision position for the pair (x_star, x_star_prime)."""
    if isinstance(kernel, KernelSpec):
        space = kernel.space
        if x_star.space != space or x_star_prime.space != space:
            raise UsageError("pair does not live on the kernel's space")
    else:
        space = kernel.space
    out = sample_post_collision_many(
        kernel, x_star.coords.reshape(1, -1), x_star_prime.coords.reshape(1, -1), rng
    )
    return geo.point(space, out[0])


# ---------------------------------------------------------------------------
# energy shift of one collision


_Z99 = 2.5758293035489004  # two-sided 99% normal quantile


def collision_energy_shift(
    kernel,
    x_star: geo.Point,
    x_star_prime: geo.Point,
    y: geo.Point,
    n_mc: int = 1024,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, float]:
    """Expected change of the squared distance to ``y`` caused by one
    collision of the pair, E[d(X,y)^2] - (d(x*,y)^2 + d(x*',y)^2)/2.

    Exact (confidence radius 0) for the midpoint kernel away from antipodal
    pairs; otherwise a Monte Carlo mean with a 99% normal confidence radius.
    """
    space = x_star.space
    b = geo.distance(x_star, y)
    bp = geo.distance(x_star_prime, y)
    base = 0.5 * (b * b + bp * bp)
    if isinstance(kernel, KernelSpec) and kernel.family == MIDPOINT:
        mset = geo.midpoints(x_star, x_star_prime)
        if mset.kind == "unique":
            m = geo.distance(mset.point, y)
            return m * m - base, 0.0
    if rng is None:
        raise UsageError("stochastic kernels need an rng for the Monte Carlo estimate")
    if n_mc < 1:
        raise UsageError("n_mc must be at least 1")
    A = np.tile(x_star.coords, (n_mc, 1))
    B = np.tile(x_star_prime.coords, (n_mc, 1))
    X = sample_post_collision_many(kernel, A, B, rng)
    vals = geo.dist_rows(space, X, np.broadcast_to(y.coords, X.shape)) ** 2 - base
    mean = float(np.mean(vals))
    radius = _Z99 * float(np.std(vals, ddof=1)) / math.sqrt(n_mc) if n_mc > 1 else math.inf
    return mean, radius


# ---------------------------------------------------------------------------
# contraction estimation


@dataclass
class ContractionReport:
    """Empirical suprema of the contraction ratios of a kernel.

    beta_hat:       sup over pairs of 4 E[d(X, x*)^2] / d(x*, x*')^2 - 1
    beta_tilde_hat: sup over pairs of 4 E[d(X, M)^2] / d(x*, x*')^2
    p_constant_hat: sup over pairs of E[d(X, x*)^p] / d(x*, x*')^p
    """

    beta_hat: float
    beta_tilde_hat: float
    p_constant_hat: float
    p: float
    n_pairs: int
    n_inner: int
    beta_ci: float
    beta_tilde_ci: float
    p_constant_ci: float


def _sample_pairs(space, n_pairs, rng):
    """Stratified pre-collision pairs: 80% generic, 10% separation < 0.1,
    10% near the diameter (or far apart, on unbounded spaces)."""
    n_near = max(1, n_pairs // 10)
    n_far = max(1, n_pairs // 10)
    n_bulk = n_pairs - n_near - n_far

    if space.family in (geo.CIRCLE, geo.SPHERE):
        a_bulk = geo.sample_uniform_rows(space, n_bulk, rng)
        b_bulk = geo.sample_uniform_rows(space, n_bulk, rng)
        a_near = geo.sample_uniform_rows(space, n_near, rng)
        a_far = geo.sample_uniform_rows(space, n_far, rng)
        if space.family == geo.SPHERE:
            far_center = -a_far
        else:
            far_center = np.mod(a_far + math.pi, geo.TWO_PI)
        b_far = geo.sample_ball_rows(space, far_center, np.full(n_far, 0.1), rng)
    else:
        base = np.zeros(space.coord_size)
        if space.family == geo.HYPERBOLIC:
            base[0] = 1.0
        bases = np.tile(base, (n_bulk, 1))
        a_bulk = geo.sample_ball_rows(space, bases, np.full(n_bulk, 1.0), rng)
        b_bulk = geo.sample_ball_rows(space, a_bulk, rng.uniform(0.1, 2.0, size=n_bulk), rng)
        a_near = geo.sample_ball_rows(space, np.tile(base, (n_near, 1)), np.full(n_near, 1.0), rng)
        a_far = geo.sample_ball_rows(space, np.tile(base, (n_far, 1)), np.full(n_far, 1.0), rng)
        b_far = geo.sample_ball_rows(space, a_far, np.full(n_far, 2.0), rng)
    b_near = geo.sample_ball_rows(space, a_near, np.full(n_near, 0.1), rng)

    A = np.vstack([a_bulk, a_near, a_far])
    B = np.vstack([b_bulk, b_near, b_far])
    d = geo.dist_rows(space, A, B)
    tiny = d < 1e-9
    while np.any(tiny):  # pragma: no cover - measure-zero unless radii degenerate
        B[tiny] = geo.sample_ball_rows(space, A[tiny], np.full(int(tiny.sum()), 0.1), rng)
        d = geo.dist_rows(space, A, B)
        tiny = d < 1e-9
    return A, B, d


def estimate_contraction(
    kernel,
    n_pairs: int,
    rng: np.random.Generator,
    n_inner: int = 256,
    p: float = 4.0,
) -> ContractionReport:
    """Estimate the contraction ratios of a kernel over stratified random
    pairs, with an inner Monte Carlo per pair."""
    if n_pairs < 100:
        raise UsageError("n_pairs must be at least 100")
    space = kernel.space
    A, B, d = _sample_pairs(space, n_pairs, rng)

    A_rep = np.repeat(A, n_inner, axis=0)
    B_rep = np.repeat(B, n_inner, axis=0)
    X = sample_post_collision_many(kernel, A_rep, B_rep, rng)

    d_a = geo.dist_rows(space, X, A_rep)
    d_b = geo.dist_rows(space, X, B_rep)
    d_m = geo.midpoint_set_distance(space, X, A_rep, B_rep)

    def per_pair(v):
        v = v.reshape(n_pairs, n_inner)
        mean = v.mean(axis=1)
        sd = v.std(axis=1, ddof=1) if n_inner > 1 else np.zeros(n_pairs)
        return mean, _Z99 * sd / math.sqrt(n_inner)

    mean_a, ci_a = per_pair(d_a**2)
    mean_b, ci_b = per_pair(d_b**2)
    mean_m, ci_m = per_pair(d_m**2)
    mean_p, ci_p = per_pair(np.maximum(d_a, d_b) ** p)

    side = np.maximum(mean_a, mean_b)
    side_ci = np.where(mean_a >= mean_b, ci_a, ci_b)
    beta_pair = 4.0 * side / d**2 - 1.0
    k_beta = int(np.argmax(beta_pair))
    beta_tilde_pair = 4.0 * mean_m / d**2
    k_tilde = int(np.argmax(beta_tilde_pair))
    p_pair = mean_p / d**p
    k_p = int(np.argmax(p_pair))

    return ContractionReport(
        beta_hat=float(beta_pair[k_beta]),
        beta_tilde_hat=float(beta_tilde_pair[k_tilde]),
        p_constant_hat=float(p_pair[k_p]),
        p=p,
        n_pairs=n_pairs,
        n_inner=n_inner,
        beta_ci=float(4.0 * side_ci[k_beta] / d[k_beta] ** 2),
        beta_tilde_ci=float(4.0 * ci_m[k_tilde] / d[k_tilde] ** 2),
        p_constant_ci=float(ci_p[k_p] / d[k_p] ** p),
    )


# ---------------------------------------------------------------------------
# midpoint symmetry test


def check_midpoint_symmetry(
    kernel,
    x_star: geo.Point,
    x_star_prime: geo.Point,
    n_mc: int = 10_000,
    n_bins: int = 16,
    kappa0: Optional[float] = None,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Two-sample test of point symmetry of the post-collision cloud about
    the pair midpoint; returns a p-value (1.0 for a degenerate point cloud).

    Half of the sampled cloud is reflected through the midpoint and compared
    with the other half by a binned chi-square test on the component along
    the pair axis.
    """
    space = x_star.space
    if kappa0 is None:
        kappa0 = 0.5 * space.injectivity_radius
    d = geo.distance(x_star, x_star_prime)
    if not d < kappa0:
        raise DomainError(f"pair separation {d} is not below kappa0 ={kappa0}")
    if rng is None:
        rng = np.random.default_rng(0)
    mset = geo.midpoints(x_star, x_star_prime)
    x_m = mset.point

    A = np.tile(x_star.coords, (n_mc, 1))
    B = np.tile(x_star_prime.coords, (n_mc, 1))
    X = sample_post_collision_many(kernel, A, B, rng)

    half = n_mc // 2
    first = X[:half]
    second = geo.reflect_rows(space, x_m.coords, X[half : 2 * half])

    axis = geo.log_rows(space, x_m.coords, x_star_prime.coords.reshape(1, -1))[0]
    axis_norm = float(np.linalg.norm(axis))
    axis = axis / axis_norm if axis_norm > 0 else axis

    proj1 = geo.log_rows(space, x_m.coords, first) @ axis
    proj2 = geo.log_rows(space, x_m.coords, second) @ axis

    pooled = np.concatenate([proj1, proj2])
    if float(np.std(pooled)) < 1e-12:
        return 1.0
    edges = np.quantile(pooled, np.linspace(0.0, 1.0, n_bins + 1))
    edges[0], edges[-1] = -np.inf, np.inf
    c1, _ = np.histogram(proj1, bins=edges)
    c2, _ = np.histogram(proj2, bins=edges)
    tot = c1 + c2
    keep = tot > 0
    stat = float(np.sum((c1[keep] - c2[keep]) ** 2 / tot[keep]))
    dof = int(keep.sum()) - 1
    if dof < 1:
        return 1.0
    return float(chi2.sf(stat, dof))


# ---------------------------------------------------------------------------
# grid deposition of the midpoint kernel on the circle


@dataclass
class GridDeposition:
    """Sparse table of where the midpoint of each grid pair deposits mass.

    ``matrix`` has shape (M*M, M); row i*M+j lists the node fractions of the
    pair (i, j).  Fractions in each row sum to 1 exactly.
    """

    grid_size: int
    matrix: sparse.csr_matrix

    def pair_entries(self, i: int, j: int) -> list:
        M = self.grid_size
        row = self.matrix.getrow(i * M + j)
        return list(zip(row.indices.tolist(), row.data.tolist()))


def grid_pushforward(kernel: KernelSpec, grid_size: int) -> GridDeposition:
    """Deposition table of the midpoint kernel on a regular circle grid.

    Midpoints that land mid-cell split 1/2 each onto the two nearest nodes;
    antipodal pairs split 1/2 onto each of the two opposite midpoints.
    """
    if not isinstance(kernel, KernelSpec) or kernel.family != MIDPOINT:
        raise UsageError("grid deposition is defined for the midpoint kernel")
    if kernel.space.family != geo.CIRCLE:
        raise UsageError("grid deposition is defined on the circle")
    M = grid_size
    if M < 4 or M % 2 != 0:
        raise UsageError("grid size must be an even integer >= 4")

    rows, cols, vals = [], [], []

    def deposit(row, half_index, frac):
        # half_index counts half-cells; even values sit exactly on a node
        half_index %= 2 * M
        if half_index % 2 == 0:
            rows.append(row)
            cols.append(half_index // 2)
            vals.append(frac)
        else:
            lo = (half_index - 1) // 2
            rows.extend([row, row])
            cols.extend([lo % M, (lo + 1) % M])
            vals.extend([0.5 * frac, 0.5 * frac])

    for i in range(M):
        for j in range(M):
            row = i * M + j
            s = i + j
            diff = abs(i - j)
            if diff == M // 2:
                deposit(row, s, 0.5)
                deposit(row, s + M, 0.5)
            elif diff < M // 2:
                deposit(row, s, 1.0)
            else:
                deposit(row, s + M if s < M else s - M, 1.0)

    matrix = sparse.csr_matrix(
        (np.array(vals), (np.array(rows), np.array(cols))), shape=(M * M, M)
    )
    return GridDeposition(M, matrix)
