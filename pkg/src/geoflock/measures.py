"""Atomic probability measures and their transport metrics.

A :class:`DiscreteMeasure` is a weighted finite atom set on one space.  The
module provides the interaction energy (mean squared distance under the
product measure), Wasserstein-2 distances (closed form against a point mass,
exact between atomic measures), the best approximating point mass and the
Markov-type tail bounds it satisfies, moments, and a CSV file format.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import geometry as geo
from ._simplex import solve_transport
from .errors import ResourceError, UsageError

WEIGHT_TOL = 1e-9
ATOM_CAP_DEFAULT = 2000
_ENERGY_CHUNK = 512


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability measure with finitely many weighted atoms."""

    space: geo.ManifoldSpace
    points: np.ndarray  # (N, coord_size)
    weights: np.ndarray  # (N,), nonnegative, sums to 1

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.space.coord_size:
            raise UsageError("points must be an (N, coord_size) array")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (pts.shape[0],):
            raise UsageError("weights must match the number of atoms")
        if np.any(w < 0.0):
            raise UsageError("weights must be nonnegative")
        total = float(w.sum())
        if abs(total - 1.0) > WEIGHT_TOL:
            raise UsageError(f"weights sum to {total}, not 1")
        if abs(total - 1.0) > 1e-12:
            w = w / total  # absorb drift; exact sums pass through untouched
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n_atoms(self) -> int:
        return self.points.shape[0]

    def atoms(self) -> list:
        """Atom list as (Point, weight) pairs."""
        return [
            (geo.point(self.space, self.points[i]), float(self.weights[i]))
            for i in range(self.n_atoms)
        ]


def measure(space: geo.ManifoldSpace, points, weights=None) -> DiscreteMeasure:
    """Build a measure from coordinate rows; weights default to uniform."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, space.coord_size)
    if weights is None:
        weights = np.full(pts.shape[0], 1.0 / pts.shape[0])
    return DiscreteMeasure(space, pts, np.asarray(weights, dtype=float))


def dirac(at: geo.Point) -> DiscreteMeasure:
    return DiscreteMeasure(at.space, at.coords.reshape(1, -1), np.array([1.0]))


# ---------------------------------------------------------------------------
# energy and moments


def atom_w2_values(rho: DiscreteMeasure) -> np.ndarray:
    """Squared W2 distance from rho to the point mass at each atom,
    i.e. the weighted squared-distance profile over the atom set."""
    vals = np.empty(rho.n_atoms)
    pts, w = rho.points, rho.weights
    for start in range(0, rho.n_atoms, _ENERGY_CHUNK * 8):
        block = slice(start, min(start + _ENERGY_CHUNK * 8, rho.n_atoms))
        vals[block] = geo.sq_dist_matrix_fast(rho.space, pts[block], pts) @ w
    return vals


def energy(rho: DiscreteMeasure) -> float:
    """Mean squared distance under rho x rho (ordered atom pairs)."""
    if rho.n_atoms == 1:
        return 0.0
    if rho.space.family == geo.EUCLIDEAN:
        # flat identity: E = 2 * weighted variance about the center of mass
        center = rho.weights @ rho.points
        sq = np.sum((rho.points - center) ** 2, axis=1)
        return 2.0 * float(rho.weights @ sq)
    return float(rho.weights @ atom_w2_values(rho))


def w2_to_dirac(rho: DiscreteMeasure, y: geo.Point) -> float:
    """W2 distance to a point mass: sqrt of the weighted squared distances."""
    if y.space != rho.space:
        raise UsageError("probe point lives on a different space")
    sq = geo.sq_dist_matrix(rho.space, rho.points, y.coords.reshape(1, -1))[:, 0]
    return math.sqrt(max(float(rho.weights @ sq), 0.0))


@dataclass
class Moments:
    tilde_m2: float
    m2: Optional[float] = None
    center: Optional[np.ndarray] = None


def moments(rho: DiscreteMeasure, best_center: Optional[geo.Point] = None) -> Moments:
    """Second-moment diagnostics.

    ``tilde_m2`` is the center-free second moment (equal to the energy).  On
    flat spaces the center of mass and the second moment about it are also
    returned, with tilde_m2 == 2 * m2; elsewhere ``best_center`` may be
    supplied to report the second moment about it.
    """
    tilde = energy(rho)
    if rho.space.family == geo.EUCLIDEAN:
        center = rho.weights @ rho.points
        m2 = float(rho.weights @ np.sum((rho.points - center) ** 2, axis=1))
        return Moments(tilde, m2, center)
    if best_center is not None:
        return Moments(tilde, w2_to_dirac(rho, best_center) ** 2, best_center.coords)
    return Moments(tilde)


def embedded_first_moment(rho: DiscreteMeasure) -> np.ndarray:
    """Weighted mean of the ambient embedding (sphere family only)."""
    if rho.space.family not in (geo.CIRCLE, geo.SPHERE):
        raise UsageError("embedded first moment requires the sphere family")
    return rho.weights @ geo.embed_rows(rho.space, rho.points)


# ---------------------------------------------------------------------------
# exact Wasserstein distance


@dataclass
class TransportPlan:
    """Optimal coupling between two atomic measures."""

    source_index: np.ndarray
    target_index: np.ndarray
    mass: np.ndarray
    sq_distances: np.ndarray
    cost: float  # total squared-distance cost

    def pairs(self) -> list:
        return [
            (int(i), int(j), float(m))
            for i, j, m in zip(self.source_index, self.target_index, self.mass)
        ]


def w2_exact(
    rho: DiscreteMeasure,
    sigma: DiscreteMeasure,
    atom_cap: int = ATOM_CAP_DEFAULT,
    method: str = "auto",
) -> Tuple[float, TransportPlan]:
    """Globally optimal W2 between two atomic measures, with the plan.

    ``method`` may force the internal route: "assignment" (equal weights,
    equal counts) or "simplex"; "auto" picks the assignment fast path when it
    applies.
    """
    if rho.space != sigma.space:
        raise UsageError("measures live on different spaces")
    if rho.n_atoms > atom_cap or sigma.n_atoms > atom_cap:
        raise ResourceError(f"atom count exceeds cap {atom_cap}")

    if sigma.n_atoms == 1 or rho.n_atoms == 1:
        # coupling is forced: the product measure
        small, big, swapped = (sigma, rho, True) if sigma.n_atoms == 1 else (rho, sigma, False)
        sq = geo.sq_dist_matrix(rho.space, big.points, small.points)[:, 0]
        cost = float(big.weights @ sq)
        idx = np.arange(big.n_atoms)
        zeros = np.zeros(big.n_atoms, dtype=int)
        src, dst = (zeros, idx) if swapped else (idx, zeros)
        plan = TransportPlan(src, dst, big.weights.copy(), sq, cost)
        return math.sqrt(max(cost, 0.0)), plan

    sq = geo.sq_dist_matrix(rho.space, rho.points, sigma.points)

    n = rho.n_atoms
    equal = (
        sigma.n_atoms == n
        and np.all(np.abs(rho.weights - 1.0 / n) <= 1e-12)
        and np.all(np.abs(sigma.weights - 1.0 / n) <= 1e-12)
    )
    if method == "assignment" and not equal:
        raise UsageError("assignment path requires equal-weight measures of equal size")
    use_assignment = equal if method == "auto" else method == "assignment"

    if use_assignment:
        rows, cols = linear_sum_assignment(sq)
        mass = np.full(n, 1.0 / n)
    else:
        rows, cols, mass = solve_transport(sq, rho.weights, sigma.weights)
    sqd = sq[rows, cols]
    cost = float(mass @ sqd)
    plan = TransportPlan(np.asarray(rows), np.asarray(cols), np.asarray(mass), sqd, cost)
    return math.sqrt(max(cost, 0.0)), plan


# ---------------------------------------------------------------------------
# best point-mass approximation (Frechet mean of the squared distance)


@dataclass
class BestDirac:
    center: geo.Point
    value: float  # W2(rho, delta_center)
    converged: bool


_SCAN_POINTS = 512


def _global_scan_starts(rho: DiscreteMeasure, top: int = 2) -> list:
    """Best points of a deterministic coarse scan of the W2 objective.

    The squared-distance mean has several local minima on compact spaces once
    the measure spreads out, so the fixed-point iteration needs starts inside
    the global basin.  The scan grid is fixed (regular on the circle, a fixed
    quasi-uniform cloud on spheres) to keep results reproducible.
    """
    space = rho.space
    if space.family == geo.CIRCLE:
        grid = (geo.TWO_PI / _SCAN_POINTS) * np.arange(_SCAN_POINTS)
        grid = grid.reshape(-1, 1)
    else:
        grid = geo.sample_uniform_rows(space, _SCAN_POINTS, np.random.default_rng(0x5EED))
    vals = geo.sq_dist_matrix_fast(space, grid, rho.points) @ rho.weights
    order = np.argsort(vals)[:top]
    return [grid[i] for i in order]


def best_dirac_center(
    rho: DiscreteMeasure,
    max_iter: int = 100,
    tol: float = 1e-10,
    atom_values: Optional[np.ndarray] = None,
) -> BestDirac:
    """Point mass closest to rho in W2, via fixed-point mean iteration.

    Starts from the best atom, the normalized embedded first moment, and the
    best points of a coarse global scan; returns the best candidate seen, so
    the reported value never exceeds the value at the best atom.
    ``converged`` is False when no start reached the step tolerance within
    ``max_iter``.  ``atom_values`` may pass a precomputed
    :func:`atom_w2_values` profile.
    """
    space = rho.space
    if space.family == geo.EUCLIDEAN:
        center = geo.point(space, rho.weights @ rho.points)
        return BestDirac(center, w2_to_dirac(rho, center), True)

    starts = []
    atom_vals = atom_w2_values(rho) if atom_values is None else atom_values
    starts.append(rho.points[int(np.argmin(atom_vals))])
    if space.family in (geo.CIRCLE, geo.SPHERE):
        mom = embedded_first_moment(rho)
        nm = float(np.linalg.norm(mom))
        if nm > 1e-12:
            if space.family == geo.CIRCLE:
                starts.append(np.array([math.atan2(mom[1], mom[0]) % geo.TWO_PI]))
            else:
                starts.append(mom / nm)
        starts.extend(_global_scan_starts(rho))

    best_coords = None
    best_val = math.inf
    any_converged = False

    def consider(coords):
        nonlocal best_coords, best_val
        sq = geo.sq_dist_matrix_fast(space, coords.reshape(1, -1), rho.points)[0]
        val = math.sqrt(max(float(sq @ rho.weights), 0.0))
        if val < best_val:
            best_val = val
            best_coords = coords.copy()
        return val

    inj = space.injectivity_radius
    for start in starts:
        x = np.array(start, dtype=float)
        consider(x)
        converged = False
        for _ in range(max_iter):
            bases = np.broadcast_to(x, rho.points.shape)
            dmax = float(np.max(geo.dist_rows(space, bases, rho.points)))
            if dmax >= inj - 1e-12:
                break  # an atom sits at the cut locus of the current iterate
            logs = geo.log_rows(space, x, rho.points)
            step = rho.weights @ logs
            step_len = (
                math.sqrt(max(float(geo._ldot_rows(step[None, :], step[None, :])[0]), 0.0))
                if space.family == geo.HYPERBOLIC
                else float(np.linalg.norm(step))
            )
            x = geo.exp_rows(space, x, step)[0]
            consider(x)
            if step_len < tol:
                converged = True
                break
        any_converged = any_converged or converged

    center = geo.point(space, best_coords)
    return BestDirac(center, best_val, any_converged)


@dataclass
class TailBounds:
    mass_tail: float
    distance_tail: float
    mass_bound: float
    distance_bound: float
    ok: bool


def tail_bounds(rho: DiscreteMeasure, xbar: geo.Point, kappa: float) -> TailBounds:
    """Mass and first-moment tails beyond distance kappa from xbar, checked
    against E/kappa^2 and E/kappa (valid when xbar is the best point mass)."""
    if kappa <= 0.0:
        raise UsageError("kappa must be positive")
    bases = np.broadcast_to(xbar.coords, rho.points.shape)
    d = geo.dist_rows(rho.space, bases, rho.points)
    far = d >= kappa
    mass_tail = float(rho.weights[far].sum())
    distance_tail = float(rho.weights[far] @ d[far])
    e = energy(rho)
    slack = 1e-12
    ok = mass_tail <= e / kappa**2 + slack and distance_tail <= e / kappa + slack
    return TailBounds(mass_tail, distance_tail, e / kappa**2, e / kappa, ok)


# ---------------------------------------------------------------------------
# file format


def write_measure(path, rho: DiscreteMeasure):
    """CSV writer: header ``weight,c0,c1,...``, 17 significant digits."""
    k = rho.space.coord_size
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["weight"] + [f"c{i}" for i in range(k)])
        for w, row in zip(rho.weights, rho.points):
            writer.writerow([f"{w:.17g}"] + [f"{x:.17g}" for x in row])


def read_measure(path, space: geo.ManifoldSpace) -> DiscreteMeasure:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["weight"] + [f"c{i}" for i in range(space.coord_size)]
        if header != expected:
            raise UsageError(f"bad measure header {header!r}, expected {expected!r}")
        rows = [[float(x) for x in row] for row in reader if row]
    if not rows:
        raise UsageError("measure file has no atoms")
    data = np.array(rows)
    return DiscreteMeasure(space, data[:, 1:], data[:, 0])


def write_plan(path, plan: TransportPlan):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_index", "target_index", "mass", "sq_distance"])
        for i, j, m, s in zip(plan.source_index, plan.target_index, plan.mass, plan.sq_distances):
            writer.writerow([int(i), int(j), f"{m:.17g}", f"{s:.17g}"])
