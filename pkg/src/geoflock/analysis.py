"""Post-hoc verification: rate fits, limit tracking, inequality probes.

The module also hosts the named check suites behind the ``verify`` command;
each check returns a row for the NDJSON report with fields
``{check, params, statistic, bound, pass}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import dynamics as dyn
from . import geometry as geo
from . import kernels as kn
from . import measures as ms
from .errors import DomainError, UsageError

# ---------------------------------------------------------------------------
# decay-rate fitting


@dataclass
class RateFit:
    slope: float
    intercept: float
    window: Tuple[float, float]
    residual_rms: float
    r_squared: float


def fit_decay_rate(times, values, window: Tuple[float, float]) -> RateFit:
    """Least-squares line through (t, log value) inside the window; the slope
    is the fitted exponential rate."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = window
    mask = (times >= lo - 1e-9) & (times <= hi + 1e-9)
    if int(mask.sum()) < 5:
        raise UsageError("rate fit needs at least 5 points in the window")
    t = times[mask]
    v = values[mask]
    if np.any(v <= 0.0):
        raise DomainError("rate fit needs positive values in the window")
    y = np.log(v)
    design = np.column_stack([t, np.ones_like(t)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ [slope, intercept]
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        window=(lo, hi),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        r_squared=r2,
    )


# ---------------------------------------------------------------------------
# limit-point tracking


@dataclass
class DiracLimitReport:
    x_infinity: geo.Point
    sup_table: np.ndarray  # sup_{t >= s} d(center(t), center(s)) per record
    envelope_constant: float
    violations: List[float]  # record times violating the decay envelope by > 10%
    passed: bool


def track_dirac_limit(
    record: dyn.TrajectoryRecord, anchor_time: Optional[float] = None
) -> DiracLimitReport:
    """Track the best-center path: its limit, the tail-sup displacement table,
    and the squared-distance decay envelope d(center(t), x_inf)^2 <= C E0 e^{-t/2}.

    The envelope constant is the smallest C covering all records up to
    ``anchor_time`` (default: the midpoint of the time range, matching the
    default fit window); later records violating the envelope by more than
    10% are reported.  A single-record anchor would test a random quantity on
    stochastic center paths, so the early maximum is used instead.
    """
    space = record.space
    centers = record.centers
    times = record.times
    x_inf = geo.point(space, centers[-1])

    d_mat = np.sqrt(geo.sq_dist_matrix(space, centers, centers))
    sup_table = np.array([float(np.max(d_mat[s, s:])) for s in range(len(times))])

    d_inf = np.sqrt(geo.sq_dist_matrix(space, centers, centers[-1].reshape(1, -1))[:, 0])
    e0 = float(record.energy[0])
    if e0 <= 0.0:
        violations = [float(t) for t, d in zip(times, d_inf) if d > 0.0]
        return DiracLimitReport(x_inf, sup_table, 0.0, violations, not violations)
    if anchor_time is None:
        anchor_time = 0.5 * (times[0] + times[-1])
    early = times <= anchor_time + 1e-9
    ratios = d_inf**2 / (e0 * np.exp(-times / 2.0))
    c = float(np.max(ratios[early]))
    # the center of N samples wanders with squared scale ~ E(t)/N, so ratio
    # excursions of order 1/N are estimator noise, not envelope violations
    floor = 0.0
    if record.kind == "particles" and record.config is not None:
        floor = 16.0 / record.config.n_particles
    threshold = np.maximum(1.1 * c, floor)
    bad = (~early) & (ratios > threshold + 1e-15)
    violations = [float(t) for t in times[bad]]
    return DiracLimitReport(x_inf, sup_table, c, violations, not violations)


# ---------------------------------------------------------------------------
# energy contraction diagnostics


@dataclass
class ContractionStep:
    time: float
    energy: float
    half_dE_dt: float
    margin: float  # half_dE_dt - (-E/4 + c0 E^{4/3}); nonpositive means ok
    c0_required: float
    ok: bool


@dataclass
class EnergyContractionReport:
    c0: float
    steps: List[ContractionStep]
    all_ok: bool
    max_c0_required: float


def energy_contraction_check(
    record: dyn.TrajectoryRecord, c0: float = 50.0
) -> EnergyContractionReport:
    """Check (1/2) dE/dt <= -E/4 + c0 E^{4/3} at interior record times, with
    dE/dt from central differences.  Also reports the smallest c0 that would
    make each step pass (diagnostic: the bound is only claimed at small E)."""
    t = record.times
    e = record.energy
    if len(t) < 3:
        raise UsageError("need at least 3 record times for central differences")
    steps = []
    max_req = 0.0
    for k in range(1, len(t) - 1):
        dedt = (e[k + 1] - e[k - 1]) / (t[k + 1] - t[k - 1])
        half = 0.5 * dedt
        rhs = -0.25 * e[k] + c0 * e[k] ** (4.0 / 3.0)
        margin = half - rhs
        if e[k] > 0.0:
            req = max(0.0, (half + 0.25 * e[k]) / e[k] ** (4.0 / 3.0))
        else:
            req = 0.0
        max_req = max(max_req, req)
        steps.append(
            ContractionStep(
                time=float(t[k]),
                energy=float(e[k]),
                half_dE_dt=float(half),
                margin=float(margin),
                c0_required=float(req),
                ok=bool(margin <= 1e-12),
            )
        )
    return EnergyContractionReport(c0, steps, all(s.ok for s in steps), max_req)


# ---------------------------------------------------------------------------
# median-defect comparison probe


@dataclass
class ProbeRow:
    kappa: float
    r_min: float
    r_max: float
    n_samples: int


def _probe_threshold(space: geo.ManifoldSpace) -> float:
    if space.family in (geo.CIRCLE, geo.SPHERE):
        return (2.0 * math.pi / 3.0) * space.scale
    return math.inf


def probe_comparison_constant(
    space: geo.ManifoldSpace,
    kappas: Sequence[float],
    n_samples: int,
    rng: np.random.Generator,
) -> List[ProbeRow]:
    """Empirical range of r = (m^2 + a^2 - (b^2+b'^2)/2) / (kappa^2 a^2) over
    random geodesic triangles with all sides <= kappa.

    Nonnegative and bounded on spheres, nonpositive and bounded on the
    hyperbolic plane, identically zero on flat space.  Separations are kept
    in [kappa/2, kappa] so the ratio stays well conditioned.
    """
    rows = []
    for kappa in kappas:
        if kappa >= _probe_threshold(space):
            raise DomainError(f"kappa {kappa} is beyond the comparison threshold")
        if space.family in (geo.CIRCLE, geo.SPHERE):
            x = geo.sample_uniform_rows(space, n_samples, rng)
        else:
            base = np.zeros(space.coord_size)
            if space.family == geo.HYPERBOLIC:
                base[0] = 1.0
            x = geo.sample_ball_rows(space, np.tile(base, (n_samples, 1)), 1.0, rng)
        xp = geo.sample_ball_rows(space, x, np.full(n_samples, kappa), rng)
        y = geo.sample_ball_rows(space, x, np.full(n_samples, kappa), rng)
        d = geo.dist_rows(space, x, xp)
        keep = (d >= 0.5 * kappa) & (geo.dist_rows(space, xp, y) <= kappa)
        x, xp, y, d = x[keep], xp[keep], y[keep], d[keep]
        mids, _ = geo.midpoint_rows(space, x, xp)
        a = 0.5 * d
        b = geo.dist_rows(space, x, y)
        bp = geo.dist_rows(space, xp, y)
        m = geo.dist_rows(space, mids, y)
        r = (m**2 + a**2 - 0.5 * (b**2 + bp**2)) / (kappa**2 * a**2)
        rows.append(ProbeRow(float(kappa), float(np.min(r)), float(np.max(r)), int(r.size)))
    return rows


# ---------------------------------------------------------------------------
# three-atom first-moment drift (circle)


def three_atom_moment_derivative(eps: float) -> Tuple[np.ndarray, np.ndarray, float]:
    """Closed-form first moment and its time derivative for the three-atom
    circle configuration at angles {0, pi - 2 eps, pi + eps}, together with
    the cross product of the two vectors (nonzero means the moment direction
    is not conserved)."""
    if not 0.0 < eps < 0.3:
        raise UsageError("eps must lie in (0, 0.3)")
    angles = np.array([0.0, math.pi - 2.0 * eps, math.pi + eps])
    moment = np.array([np.mean(np.cos(angles)), np.mean(np.sin(angles))])
    # pairwise midpoints of the minimal arcs
    mid_angles = np.array(
        [0.5 * math.pi - eps, 1.5 * math.pi + 0.5 * eps, math.pi - 0.5 * eps]
    )
    mid_sum = np.array([np.sum(np.cos(mid_angles)), np.sum(np.sin(mid_angles))])
    derivative = -(2.0 / 3.0) * moment + (2.0 / 9.0) * mid_sum
    cross = float(moment[0] * derivative[1] - moment[1] * derivative[0])
    return moment, derivative, cross


# ---------------------------------------------------------------------------
# perpendicular-offset kernel and the contraction-coefficient relation


class OffsetMidpointKernel:
    """Midpoint plus a perpendicular offset of s/2 times the pair distance,
    on the flat plane; its midpoint contraction coefficient is exactly s^2.

    The offset side is chosen at random so the law is symmetric in the pair.
    """

    def __init__(self, s: float):
        if not 0.0 <= s < 1.0:
            raise UsageError("offset fraction must lie in [0, 1)")
        self.space = geo.euclidean(2)
        self.s = s

    def sample_many(self, A, B, rng):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        mid = 0.5 * (A + B)
        axis = B - A
        perp = np.column_stack([-axis[:, 1], axis[:, 0]])
        sign = rng.choice([-1.0, 1.0], size=A.shape[0])
        return mid + (0.5 * self.s) * sign[:, None] * perp


@dataclass
class OffsetRelationReport:
    s: float
    beta_hat: float
    beta_tilde_hat: float
    expected: float  # s^2
    coefficients_match: bool
    general_bound_ok: bool  # beta <= beta_tilde + 2 sqrt(beta_tilde)


def offset_kernel_contraction_check(
    s: float, n_pairs: int, rng: np.random.Generator, n_inner: int = 64
) -> OffsetRelationReport:
    """On the flat plane the plain and midpoint contraction coefficients
    coincide; the offset kernel realises both equal to s^2 exactly."""
    kernel = OffsetMidpointKernel(s)
    rep = kn.estimate_contraction(kernel, n_pairs, rng, n_inner=n_inner)
    expected = s * s
    tol = rep.beta_ci + rep.beta_tilde_ci + 1e-9
    match = abs(rep.beta_hat - expected) <= tol and abs(rep.beta_tilde_hat - expected) <= tol
    bt = rep.beta_tilde_hat
    bound_ok = rep.beta_hat <= bt + 2.0 * math.sqrt(max(bt, 0.0)) + tol
    return OffsetRelationReport(s, rep.beta_hat, rep.beta_tilde_hat, expected, match, bound_ok)


# ---------------------------------------------------------------------------
# verification suites


@dataclass
class CheckResult:
    check: str
    params: dict
    statistic: float
    bound: float
    passed: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "check": self.check,
                "params": self.params,
                "statistic": self.statistic,
                "bound": self.bound,
                "pass": self.passed,
            },
            sort_keys=True,
        )


def write_ndjson(path, results: List[CheckResult]):
    with open(path, "w") as fh:
        for row in results:
            fh.write(row.to_json() + "\n")


def _spaces():
    return {
        "euclidean:2": geo.euclidean(2),
        "circle": geo.circle(),
        "sphere:2": geo.sphere(2),
        "hyperbolic:-1": geo.hyperbolic(-1.0),
    }


def _random_cloud(space, n, rng, spread=1.5):
    if space.family in (geo.CIRCLE, geo.SPHERE):
        return geo.sample_uniform_rows(space, n, rng)
    base = np.zeros((n, space.coord_size))
    if space.family == geo.HYPERBOLIC:
        base[:, 0] = 1.0
    return geo.sample_ball_rows(space, base, np.full(n, spread), rng)


def _random_measure(space, n_atoms, rng):
    pts = _random_cloud(space, n_atoms, rng)
    w = rng.uniform(0.1, 1.0, size=n_atoms)
    return ms.measure(space, pts, w / w.sum())


def _geometry_checks(rng) -> List[CheckResult]:
    out = []
    n = 20_000
    for name, space in _spaces().items():
        a, b, c = (_random_cloud(space, n, rng) for _ in range(3))
        excess = geo.dist_rows(space, a, c) - geo.dist_rows(space, a, b) - geo.dist_rows(space, b, c)
        out.append(
            CheckResult("geometry.triangle_inequality", {"space": name, "n": n},
                        float(np.max(excess)), 1e-12, bool(np.max(excess) <= 1e-12))
        )
        mids, anti = geo.midpoint_rows(space, a, b)
        keep = ~anti
        err = np.abs(
            geo.dist_rows(space, a[keep], mids[keep]) - 0.5 * geo.dist_rows(space, a, b)[keep]
        )
        out.append(
            CheckResult("geometry.midpoint_bisection", {"space": name, "n": n},
                        float(np.max(err)), 1e-10, bool(np.max(err) <= 1e-10))
        )
    for name, space, cap in [
        ("sphere:2", geo.sphere(2), None),
        ("hyperbolic:-1", geo.hyperbolic(-1.0), 1.5),
        ("euclidean:2", geo.euclidean(2), 2.0),
    ]:
        x = _random_cloud(space, n, rng)
        xp = _random_cloud(space, n, rng) if cap is None else geo.sample_ball_rows(
            space, x, np.full(n, cap), rng
        )
        y = _random_cloud(space, n, rng) if cap is None else geo.sample_ball_rows(
            space, x, np.full(n, cap), rng
        )
        mids, anti = geo.midpoint_rows(space, x, xp)
        keep = ~anti
        res = geo.apollonius_residual(
            space,
            0.5 * geo.dist_rows(space, x, xp)[keep],
            geo.dist_rows(space, x, y)[keep],
            geo.dist_rows(space, xp, y)[keep],
            geo.dist_rows(space, mids, y)[keep],
        )
        stat = float(np.max(np.abs(res)))
        out.append(
            CheckResult("geometry.apollonius_identity", {"space": name, "n": n},
                        stat, 1e-12, bool(stat <= 1e-12))
        )
    for name, space in _spaces().items():
        base = _random_cloud(space, n, rng)
        r = 1.0 if math.isinf(space.injectivity_radius) else 0.5 * space.injectivity_radius - 1e-9
        target = geo.sample_ball_rows(space, base, np.full(n, r) * rng.uniform(size=n), rng)
        back = geo.exp_rows_multi(space, base, geo.log_rows_multi(space, base, target))
        err = float(np.max(geo.dist_rows(space, back, target)))
        out.append(
            CheckResult("geometry.exp_log_round_trip", {"space": name, "n": n},
                        err, 1e-10, bool(err <= 1e-10))
        )
    # sign of the median defect under curvature: nonnegative on the sphere,
    # nonpositive on the hyperbolic plane
    r_s = probe_comparison_constant(geo.sphere(2), [0.5], n, rng)[0]
    out.append(
        CheckResult("geometry.median_defect_sign", {"space": "sphere:2", "kappa": 0.5},
                    r_s.r_min, -1e-8, bool(r_s.r_min >= -1e-8))
    )
    r_h = probe_comparison_constant(geo.hyperbolic(-1.0), [0.5], n, rng)[0]
    out.append(
        CheckResult("geometry.median_defect_sign", {"space": "hyperbolic:-1", "kappa": 0.5},
                    r_h.r_max, 1e-8, bool(r_h.r_max <= 1e-8))
    )
    return out


def _measures_checks(rng) -> List[CheckResult]:
    out = []
    worst_lower, worst_upper, tails_bad = -math.inf, -math.inf, 0
    n_meas = 200
    for _ in range(n_meas):
        space = list(_spaces().values())[int(rng.integers(4))]
        rho = _random_measure(space, int(rng.integers(2, 50)), rng)
        e = ms.energy(rho)
        best = ms.best_dirac_center(rho)
        worst_lower = max(worst_lower, best.value**2 - e)
        probe = geo.point(space, _random_cloud(space, 1, rng)[0])
        worst_upper = max(worst_upper, e - 4.0 * ms.w2_to_dirac(rho, probe) ** 2)
        kappa = e ** (1.0 / 6.0) if e > 0 else 1.0
        if not ms.tail_bounds(rho, best.center, kappa).ok:
            tails_bad += 1
    out.append(CheckResult("measures.w2_lower_sandwich", {"n": n_meas},
                           float(worst_lower), 1e-9, bool(worst_lower <= 1e-9)))
    out.append(CheckResult("measures.energy_upper_sandwich", {"n": n_meas},
                           float(worst_upper), 1e-9, bool(worst_upper <= 1e-9)))
    out.append(CheckResult("measures.markov_tails", {"n": n_meas},
                           float(tails_bad), 0.0, tails_bad == 0))

    worst = 0.0
    for _ in range(50):
        space = list(_spaces().values())[int(rng.integers(4))]
        a = _random_measure(space, int(rng.integers(2, 5)), rng)
        b = _random_measure(space, int(rng.integers(2, 5)), rng)
        val, plan = ms.w2_exact(a, b)
        worst = max(worst, abs(plan.cost - float(plan.mass @ plan.sq_distances)))
        val2, _ = ms.w2_exact(b, a)
        worst = max(worst, abs(val - val2))
    out.append(CheckResult("measures.w2_symmetry_and_plan_cost", {"n": 50},
                           float(worst), 1e-10, bool(worst <= 1e-10)))

    worst = 0.0
    for _ in range(50):
        space = list(_spaces().values())[int(rng.integers(4))]
        pts_a = _random_cloud(space, 8, rng)
        pts_b = _random_cloud(space, 8, rng)
        a = ms.measure(space, pts_a)
        b = ms.measure(space, pts_b)
        v1, _ = ms.w2_exact(a, b, method="assignment")
        v2, _ = ms.w2_exact(a, b, method="simplex")
        worst = max(worst, abs(v1 - v2))
    out.append(CheckResult("measures.assignment_equals_simplex", {"n": 50},
                           float(worst), 1e-12, bool(worst <= 1e-12)))

    worst = 0.0
    space = geo.sphere(2)
    for _ in range(50):
        rho = _random_measure(space, 12, rng)
        y = geo.point(space, _random_cloud(space, 1, rng)[0])
        v1, _ = ms.w2_exact(rho, ms.dirac(y))
        worst = max(worst, abs(v1 - ms.w2_to_dirac(rho, y)))
    out.append(CheckResult("measures.w2_dirac_consistency", {"n": 50},
                           float(worst), 0.0, worst == 0.0))
    return out


def _kernels_checks(rng) -> List[CheckResult]:
    out = []
    dep = kn.grid_pushforward(kn.midpoint_kernel(geo.circle()), 64)
    sums = np.asarray(dep.matrix.sum(axis=1)).ravel()
    stat = float(np.max(np.abs(sums - 1.0)))
    out.append(CheckResult("kernels.deposition_mass", {"M": 64}, stat, 1e-14, stat <= 1e-14))

    s2 = geo.sphere(2)
    n = 20_000
    A = geo.sample_uniform_rows(s2, n, rng)
    B = geo.sample_uniform_rows(s2, n, rng)
    Y = geo.sample_uniform_rows(s2, n, rng)
    mids, anti = geo.midpoint_rows(s2, A, B)
    keep = ~anti
    d = geo.dist_rows(s2, A, B)[keep]
    b = geo.dist_rows(s2, A, Y)[keep]
    bp = geo.dist_rows(s2, B, Y)[keep]
    m = geo.dist_rows(s2, mids[keep], Y[keep])
    alpha = m**2 - 0.5 * (b**2 + bp**2)
    excess = float(np.max(alpha - (-0.25 * d**2 + 2.0 * d * np.minimum(b, bp))))
    out.append(CheckResult("kernels.midpoint_energy_shift_bound", {"n": n},
                           excess, 1e-10, excess <= 1e-10))

    rep = kn.estimate_contraction(kn.midpoint_kernel(s2), 200, rng, n_inner=64)
    out.append(CheckResult("kernels.contraction_midpoint", {"n_pairs": 200},
                           rep.beta_hat, 1e-10, abs(rep.beta_hat) <= 1e-10))
    gamma = 0.05
    repn = kn.estimate_contraction(kn.noisy_gamma_kernel(s2, gamma), 200, rng, n_inner=128)
    bound = 9 * gamma**2 + 8 * gamma + repn.beta_ci
    out.append(CheckResult("kernels.contraction_noisy_gamma",
                           {"gamma": gamma, "n_pairs": 200},
                           repn.beta_hat, bound, repn.beta_hat <= bound))

    a = geo.point(s2, [1.0, 0.0, 0.0])
    b_pt = geo.point(s2, [0.8, 0.6, 0.0])
    min_p = 1.0
    for kern in [kn.bdg_kernel(s2, 0.2), kn.noisy_gamma_kernel(s2, 0.1), kn.noisy_eps_kernel(s2, 0.3)]:
        p = kn.check_midpoint_symmetry(kern, a, b_pt, n_mc=8000, rng=rng)
        min_p = min(min_p, p)
    out.append(CheckResult("kernels.midpoint_symmetry_pvalue", {"n_mc": 8000},
                           min_p, 0.01, min_p > 0.01))

    # beta-dependent global energy-shift bound for the noisy kernel
    n_tr, n_inner = 2000, 64
    kernel = kn.noisy_gamma_kernel(s2, gamma)
    beta = repn.beta_hat + repn.beta_ci
    A = geo.sample_uniform_rows(s2, n_tr, rng)
    B = geo.sample_uniform_rows(s2, n_tr, rng)
    Y = geo.sample_uniform_rows(s2, n_tr, rng)
    X = kn.sample_post_collision_many(
        kernel, np.repeat(A, n_inner, axis=0), np.repeat(B, n_inner, axis=0), rng
    )
    sq = geo.dist_rows(s2, X, np.repeat(Y, n_inner, axis=0)) ** 2
    sq = sq.reshape(n_tr, n_inner)
    d = geo.dist_rows(s2, A, B)
    b_side = geo.dist_rows(s2, A, Y)
    bp_side = geo.dist_rows(s2, B, Y)
    alpha_mc = sq.mean(axis=1) - 0.5 * (b_side**2 + bp_side**2)
    ci = 2.5758 * sq.std(axis=1, ddof=1) / math.sqrt(n_inner)
    bound_vec = -0.25 * (1 - beta) * d**2 + (1 + math.sqrt(1 + beta)) * d * np.minimum(
        b_side, bp_side
    )
    stat = float(np.max(alpha_mc - bound_vec - 3.0 * ci))
    out.append(CheckResult("kernels.noisy_energy_shift_bound",
                           {"gamma": gamma, "n": n_tr}, stat, 0.0, stat <= 0.0))
    return out


def _dynamics_checks(rng) -> List[CheckResult]:
    out = []
    c = geo.circle()
    cfg = dyn.SimConfig(
        space=c, kernel=kn.midpoint_kernel(c), mode="grid", grid_size=128,
        t_end=1.0, record_interval=0.5, dt=0.01, initial={"type": "uniform"},
        snapshot_times=[0.0, 1.0],
    )
    rec = dyn.run_circle_grid(cfg)
    stat = float(np.max(np.abs(rec.snapshots[-1][1].values - rec.snapshots[0][1].values)))
    out.append(CheckResult("dynamics.uniform_stationary", {"M": 128}, stat, 1e-10, stat <= 1e-10))
    out.append(CheckResult("dynamics.grid_mass_drift", {"M": 128},
                           rec.mass_drift, 1e-12, rec.mass_drift <= 1e-12))

    cfg2 = dyn.SimConfig(
        space=c, kernel=kn.midpoint_kernel(c), mode="grid", grid_size=128,
        t_end=1.0, record_interval=0.5, dt=0.01, initial={"type": "dirac", "angle": 2.0},
        snapshot_times=[0.0, 1.0],
    )
    rec2 = dyn.run_circle_grid(cfg2)
    stat = float(np.max(np.abs(rec2.snapshots[-1][1].values - rec2.snapshots[0][1].values)))
    out.append(CheckResult("dynamics.dirac_stationary", {"M": 128}, stat, 1e-13, stat <= 1e-13))

    s2 = geo.sphere(2)
    pcfg = dyn.SimConfig(
        space=s2, kernel=kn.midpoint_kernel(s2), mode="particles", n_particles=64,
        t_end=1.0, record_interval=0.5, seed=99, replicas=2,
        initial={"type": "cap", "radius": 0.5},
    )
    r1 = dyn.simulate_particles(pcfg)
    r2 = dyn.simulate_particles(pcfg)
    same = all(
        np.array_equal(x.energy, y.energy) and np.array_equal(x.centers, y.centers)
        for x, y in zip(r1, r2)
    )
    out.append(CheckResult("dynamics.determinism", {"replicas": 2}, 0.0 if same else 1.0, 0.0, same))

    e1 = geo.euclidean(1)
    ccfg = dyn.SimConfig(
        space=e1, kernel=kn.midpoint_kernel(e1), mode="particles", n_particles=100,
        t_end=1.0, record_interval=0.5, seed=12, replicas=30,
        initial={"type": "uniform_interval", "low": 0.0, "high": 1.0},
    )
    runs = dyn.simulate_particles(ccfg)
    coms = np.array([r.moments[:, 0] for r in runs])
    drift = coms - coms[:, :1]
    z = np.abs(drift.mean(axis=0)[1:]) / (drift.std(axis=0, ddof=1)[1:] / math.sqrt(len(runs)))
    stat = float(np.max(z))
    out.append(CheckResult("dynamics.center_of_mass_mean", {"replicas": 30}, stat, 3.0, stat <= 3.0))
    return out


def _analysis_checks(rng) -> List[CheckResult]:
    out = []
    t = np.linspace(0.0, 20.0, 41)
    fit = fit_decay_rate(t, 3.0 * np.exp(-0.5 * t), (0.0, 20.0))
    stat = abs(fit.slope + 0.5)
    out.append(CheckResult("analysis.fit_exact_exponential", {}, stat, 1e-12, stat <= 1e-12))
    flat = fit_decay_rate(t, np.full_like(t, 2.5), (0.0, 20.0))
    out.append(CheckResult("analysis.fit_constant_series", {}, abs(flat.slope), 1e-14,
                           abs(flat.slope) <= 1e-14))

    eps = 0.01
    moment, deriv, cross = three_atom_moment_derivative(eps)
    dev = max(
        abs(moment[0] + 1.0 / 3.0),
        abs(moment[1] - eps / 3.0),
        abs(deriv[1] + eps / 9.0),
        abs(cross - eps / 27.0),
    )
    out.append(CheckResult("analysis.three_atom_first_order", {"eps": eps}, float(dev), 1e-3,
                           dev <= 1e-3))

    rows = probe_comparison_constant(geo.sphere(2), [0.2], 20_000, rng)
    out.append(CheckResult("analysis.probe_sphere_sign", {"kappa": 0.2},
                           rows[0].r_min, -1e-8, rows[0].r_min >= -1e-8))
    rows_h = probe_comparison_constant(geo.hyperbolic(-1.0), [0.2], 20_000, rng)
    out.append(CheckResult("analysis.probe_hyperbolic_sign", {"kappa": 0.2},
                           rows_h[0].r_max, 1e-8, rows_h[0].r_max <= 1e-8))
    rows_e = probe_comparison_constant(geo.euclidean(2), [0.2], 20_000, rng)
    stat = max(abs(rows_e[0].r_min), abs(rows_e[0].r_max))
    out.append(CheckResult("analysis.probe_euclidean_zero", {"kappa": 0.2}, stat, 1e-8,
                           stat <= 1e-8))

    rep = offset_kernel_contraction_check(0.3, 200, rng)
    stat = abs(rep.beta_hat - rep.expected)
    out.append(CheckResult("analysis.offset_kernel_beta", {"s": 0.3}, stat, 1e-9,
                           rep.coefficients_match and rep.general_bound_ok))

    # small-energy grid run satisfies the contraction inequality with c0 = 50
    c = geo.circle()
    cfg = dyn.SimConfig(
        space=c, kernel=kn.midpoint_kernel(c), mode="grid", grid_size=256,
        t_end=4.0, record_interval=0.25, dt=0.01,
        initial={"type": "bump", "amplitude": 1.0, "power": 500.0, "tilt": 0.0},
    )
    rec = dyn.run_circle_grid(cfg)
    report = energy_contraction_check(rec, c0=50.0)
    worst = max(s.margin for s in report.steps)
    out.append(CheckResult("analysis.energy_contraction_small_e",
                           {"E0": float(rec.energy[0]), "c0": 50.0},
                           float(worst), 1e-12, report.all_ok))

    # two-particle pair-mode run: the tracked limit is the initial midpoint
    theta = 0.6
    tcfg = dyn.SimConfig(
        space=c, kernel=kn.midpoint_kernel(c), mode="particles", n_particles=2,
        t_end=12.0, record_interval=1.0, seed=4, update_mode="pair",
        initial={"type": "two_atoms", "angles": [0.0, theta]},
    )
    trec = dyn.simulate_particles(tcfg)[0]
    rep_t = track_dirac_limit(trec)
    stat = abs(float(rep_t.x_infinity.coords[0]) - theta / 2)
    out.append(CheckResult("analysis.track_two_particle_limit", {"theta": theta}, stat, 0.01,
                           stat <= 0.01 and rep_t.passed))
    return out


_SUITES: Dict[str, Callable] = {
    "geometry": _geometry_checks,
    "measures": _measures_checks,
    "kernels": _kernels_checks,
    "dynamics": _dynamics_checks,
    "analysis": _analysis_checks,
}


def suite_names() -> List[str]:
    return list(_SUITES) + ["all"]


def run_suite(name: str, seed: int) -> List[CheckResult]:
    """Run one named check suite (or ``all``) with a dedicated RNG stream."""
    if name == "all":
        results = []
        for key in _SUITES:
            results.extend(run_suite(key, seed))
        return results
    if name not in _SUITES:
        raise UsageError(f"unknown suite {name!r}; choose from {suite_names()}")
    key = list(_SUITES).index(name)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(key,)))
    return _SUITES[name](rng)
