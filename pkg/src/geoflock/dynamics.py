"""Time evolution of the alignment dynamics.

Two solvers share one record format:

* :func:`simulate_particles` runs an exact-event jump process for N
  particles.  In ``single`` update mode every particle carries a unit
  collision clock (total event rate N); the chosen particle jumps to a draw
  from the collision kernel against a uniformly chosen partner.  In ``pair``
  mode events arrive at rate N/2 and both participants move to the same
  sampled point; both modes have the same infinite-population limit.

* :func:`run_circle_grid` integrates the deterministic gain/loss system on a
  regular circle grid with the midpoint deposition table, using fixed-step
  RK4.

Diagnostics (interaction energy, distance to the best point mass and its
center, embedded first moment) are recorded at fixed multiples of
``record_interval`` from the state reached by the last event before each
record time.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from . import geometry as geo
from . import kernels as kn
from . import measures as ms
from .errors import UsageError

RECORD_TIME_TOL = 1e-9


@dataclass
class SimConfig:
    """Everything needed to reproduce one simulation bitwise."""

    space: geo.ManifoldSpace
    kernel: kn.KernelSpec
    mode: str = "particles"  # "particles" | "grid"
    n_particles: int = 0
    grid_size: int = 0
    t_end: float = 1.0
    record_interval: float = 0.1
    dt: float = 0.01
    seed: int = 0
    replicas: int = 1
    update_mode: str = "single"  # "single" | "pair"
    initial: dict = field(default_factory=lambda: {"type": "uniform"})
    snapshot_times: Optional[List[float]] = None

    def validate(self):
        if self.mode not in ("particles", "grid"):
            raise UsageError(f"unknown mode {self.mode!r}")
        if self.t_end <= 0.0 or self.record_interval <= 0.0:
            raise UsageError("t_end and record_interval must be positive")
        if self.mode == "particles":
            if self.n_particles < 2:
                raise UsageError("particle runs need n_particles >= 2")
            if self.update_mode not in ("single", "pair"):
                raise UsageError(f"unknown update mode {self.update_mode!r}")
            if isinstance(self.kernel, kn.KernelSpec) and self.kernel.space != self.space:
                raise UsageError("kernel and simulation spaces differ")
        else:
            if self.space.family != geo.CIRCLE:
                raise UsageError("the grid solver runs on the circle")
            if not isinstance(self.kernel, kn.KernelSpec) or self.kernel.family != kn.MIDPOINT:
                raise UsageError("the grid solver implements the midpoint kernel")
            if self.grid_size < 4 or self.grid_size % 2 != 0:
                raise UsageError("grid_size must be an even integer >= 4")
            if self.dt <= 0.0:
                raise UsageError("dt must be positive")
            steps = self.record_interval / self.dt
            if abs(steps - round(steps)) > 1e-9:
                raise UsageError("record_interval must be an integer multiple of dt")
        if self.replicas < 1:
            raise UsageError("replicas must be >= 1")


@dataclass
class GridDensity:
    """Density values at the M regular circle nodes at one time."""

    grid_size: int
    values: np.ndarray
    time: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid_size,):
            raise UsageError("values must have length grid_size")
        if np.any(v < 0.0):
            raise UsageError("density values must be nonnegative")
        step = geo.TWO_PI / self.grid_size
        if abs(float(v.sum()) * step - 1.0) > 1e-10:
            raise UsageError("density must integrate to 1")
        object.__setattr__(self, "values", v)

    def node_angles(self) -> np.ndarray:
        return (geo.TWO_PI / self.grid_size) * np.arange(self.grid_size)

    def to_measure(self) -> ms.DiscreteMeasure:
        step = geo.TWO_PI / self.grid_size
        return ms.measure(geo.circle(), self.node_angles().reshape(-1, 1), self.values * step)


@dataclass
class TrajectoryRecord:
    """Time series of diagnostics, plus optional state snapshots."""

    space: geo.ManifoldSpace
    kind: str  # "particles" | "grid"
    times: np.ndarray
    energy: np.ndarray
    w2_best: np.ndarray
    centers: np.ndarray  # (T, coord_size)
    moments: np.ndarray  # (T, moment_size)
    center_converged: np.ndarray
    snapshots: list  # [(time, positions) or (time, GridDensity)]
    config: Optional[SimConfig] = None
    replica: int = 0
    mass_drift: float = 0.0

    def __post_init__(self):
        if not np.all(np.diff(self.times) > 0):
            raise UsageError("record times must be strictly increasing")
        n = len(self.times)
        for arr in (self.energy, self.w2_best, self.centers, self.moments):
            if len(arr) != n:
                raise UsageError("diagnostic series lengths differ")


def moment_size(space: geo.ManifoldSpace) -> int:
    if space.family == geo.CIRCLE:
        return 2
    return space.coord_size


def _first_moment(space, coords, weights) -> np.ndarray:
    if space.family in (geo.CIRCLE, geo.SPHERE):
        return weights @ geo.embed_rows(space, coords)
    return weights @ coords  # coordinate mean; center of mass on flat spaces


def _record_times(t_end, interval) -> np.ndarray:
    n = int(math.floor(t_end / interval + RECORD_TIME_TOL))
    return interval * np.arange(n + 1)


def _wants_snapshot(t, snapshot_times) -> bool:
    if snapshot_times is None:
        return False
    return any(abs(t - s) <= RECORD_TIME_TOL for s in snapshot_times)


# ---------------------------------------------------------------------------
# initial conditions


def build_particle_initial(config: SimConfig, rng: np.random.Generator) -> np.ndarray:
    space, n = config.space, config.n_particles
    spec = dict(config.initial)
    kind = spec.pop("type", "uniform")
    if kind == "uniform":
        return geo.sample_uniform_rows(space, n, rng)
    if kind == "uniform_interval":
        if space.family != geo.EUCLIDEAN or space.dim != 1:
            raise UsageError("uniform_interval applies to euclidean:1")
        low, high = float(spec["low"]), float(spec["high"])
        return rng.uniform(low, high, size=(n, 1))
    if kind == "cap":
        radius = float(spec["radius"])
        center = spec.get("center")
        if center is None:
            c = np.zeros(space.coord_size)
            c[0] = 1.0
        else:
            c = geo.point(space, center).coords
        return geo.sample_ball_rows(space, np.tile(c, (n, 1)), np.full(n, radius), rng)
    if kind == "two_atoms":
        pts = _two_atom_coords(space, spec)
        half = n // 2
        out = np.empty((n, space.coord_size))
        out[:half] = pts[0]
        out[half:] = pts[1]
        return out
    if kind == "points":
        pts = np.asarray(spec["points"], dtype=float).reshape(-1, space.coord_size)
        reps = int(math.ceil(n / pts.shape[0]))
        return np.tile(pts, (reps, 1))[:n]
    raise UsageError(f"unknown particle initial condition {kind!r}")


def _two_atom_coords(space, spec):
    if "angles" in spec:
        if space.family != geo.CIRCLE:
            raise UsageError("angle-based atoms require the circle")
        return [np.array([a % geo.TWO_PI]) for a in spec["angles"]]
    pts = np.asarray(spec["points"], dtype=float)
    if pts.shape[0] != 2:
        raise UsageError("two_atoms needs exactly two points")
    return [pts[0], pts[1]]


def build_grid_initial(config: SimConfig) -> np.ndarray:
    m = config.grid_size
    step = geo.TWO_PI / m
    theta = step * np.arange(m)
    spec = dict(config.initial)
    kind = spec.pop("type", "bump")
    if kind == "uniform":
        vals = np.full(m, 1.0 / geo.TWO_PI)
    elif kind == "bump":
        # canonical smooth bump: a raised-cosine perturbation of the uniform
        # density, optionally tilted by a second harmonic so the direction of
        # the first moment is not a symmetry axis
        amplitude = float(spec.get("amplitude", 0.2))
        power = float(spec.get("power", 1.0))
        center = float(spec.get("center", math.pi))
        tilt = float(spec.get("tilt", 0.0))
        tilt_phase = float(spec.get("tilt_phase", 1.0))
        if not 0.0 < amplitude <= 1.0:
            raise UsageError("bump amplitude must be in (0, 1]")
        vals = (1.0 + amplitude * np.cos(theta - center)) ** power + tilt * np.cos(
            2.0 * theta - tilt_phase
        )
        if np.min(vals) < 0.0:
            raise UsageError("bump parameters produce a negative density")
    elif kind == "dirac":
        vals = np.zeros(m)
        vals[int(round(float(spec["angle"]) / step)) % m] = 1.0
    elif kind == "two_atoms":
        vals = np.zeros(m)
        for a in spec["angles"]:
            vals[int(round(float(a) / step)) % m] += 0.5
    elif kind == "values":
        vals = np.asarray(spec["values"], dtype=float)
        if vals.shape != (m,):
            raise UsageError("values length must equal grid_size")
    else:
        raise UsageError(f"unknown grid initial condition {kind!r}")
    total = float(vals.sum()) * step
    if total <= 0.0:
        raise UsageError("initial density must have positive mass")
    return vals / total


# Initial density used by the canonical figure scenario and the grid decay
# benchmark: a raised-cosine bump peaked at pi with a second-harmonic tilt,
# rho0(theta) proportional to 1 + 0.2 cos(theta - pi) + 0.3 cos(2 theta - 1).
FIGURE_BUMP = {
    "type": "bump",
    "amplitude": 0.2,
    "power": 1.0,
    "center": math.pi,
    "tilt": 0.3,
    "tilt_phase": 1.0,
}


# ---------------------------------------------------------------------------
# particle simulation


def _replica_rng(seed: int, replica: int) -> np.random.Generator:
    # documented derivation: one child stream per (master seed, replica index)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(replica,)))


def _midpoint_jump(space, xi, xj, rng):
    """Fast scalar midpoint, with the antipodal branch resolved by sampling."""
    if space.family == geo.EUCLIDEAN:
        return 0.5 * (xi + xj)
    if space.family == geo.CIRCLE:
        ta, tb = xi[0], xj[0]
        gap = abs(ta - tb)
        if abs(gap - math.pi) < geo.ANTIPODAL_TOL:
            base = 0.5 * (ta + tb)
            return np.array([(base + rng.choice([0.5, -0.5]) * math.pi) % geo.TWO_PI])
        return np.array([geo._circle_midpoint_angle(ta, tb)])
    if space.family == geo.SPHERE:
        s = xi + xj
        nrm = float(np.linalg.norm(s))
        if nrm < geo.ANTIPODAL_TOL:
            return geo.sample_equator_rows(space, xi.reshape(1, -1), rng)[0]
        return s / nrm
    s = xi + xj
    nrm = math.sqrt(max(-float(geo._ldot_rows(s[None, :], s[None, :])[0]), 1e-300))
    return s / nrm


def _diagnose(space, positions):
    rho = ms.measure(space, positions.copy())
    if space.family == geo.EUCLIDEAN:
        e = ms.energy(rho)
        best = ms.best_dirac_center(rho)
    else:
        vals = ms.atom_w2_values(rho)
        e = float(rho.weights @ vals)
        best = ms.best_dirac_center(rho, atom_values=vals)
    mom = _first_moment(space, positions, rho.weights)
    return e, best, mom


def simulate_one_replica(config: SimConfig, replica: int) -> TrajectoryRecord:
    config.validate()
    space = config.space
    rng = _replica_rng(config.seed, replica)
    positions = build_particle_initial(config, rng)
    n = config.n_particles
    pair_mode = config.update_mode == "pair"
    wait_scale = 2.0 / n if pair_mode else 1.0 / n

    times = _record_times(config.t_end, config.record_interval)
    energy = np.empty(len(times))
    w2_best = np.empty(len(times))
    centers = np.empty((len(times), space.coord_size))
    moments = np.empty((len(times), moment_size(space)))
    converged = np.empty(len(times), dtype=bool)
    snapshots = []

    fast_midpoint = isinstance(config.kernel, kn.KernelSpec) and config.kernel.family == kn.MIDPOINT

    next_rec = 0
    t = 0.0
    while True:
        t_next = t + rng.exponential(wait_scale)
        while next_rec < len(times) and times[next_rec] <= t_next + RECORD_TIME_TOL:
            e, best, mom = _diagnose(space, positions)
            energy[next_rec] = e
            w2_best[next_rec] = best.value
            centers[next_rec] = best.center.coords
            moments[next_rec] = mom
            converged[next_rec] = best.converged
            if _wants_snapshot(times[next_rec], config.snapshot_times):
                snapshots.append((float(times[next_rec]), positions.copy()))
            next_rec += 1
        if t_next > config.t_end:
            break
        i = int(rng.integers(n))
        j = int(rng.integers(n - 1))
        if j >= i:
            j += 1
        if fast_midpoint:
            new = _midpoint_jump(space, positions[i], positions[j], rng)
        else:
            new = kn.sample_post_collision_many(
                config.kernel, positions[i].reshape(1, -1), positions[j].reshape(1, -1), rng
            )[0]
        positions[i] = new
        if pair_mode:
            positions[j] = new
        t = t_next

    return TrajectoryRecord(
        space=space,
        kind="particles",
        times=times,
        energy=energy,
        w2_best=w2_best,
        centers=centers,
        moments=moments,
        center_converged=converged,
        snapshots=snapshots,
        config=config,
        replica=replica,
    )


def simulate_particles(config: SimConfig, workers: int = 1) -> List[TrajectoryRecord]:
    """Run all replicas; results are ordered by replica index and identical
    whether run sequentially or in a worker pool."""
    config.validate()
    indices = list(range(config.replicas))
    if workers > 1 and config.replicas > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_simulate_replica_star, [(config, k) for k in indices]))
    return [simulate_one_replica(config, k) for k in indices]


def _simulate_replica_star(args) -> TrajectoryRecord:
    return simulate_one_replica(*args)


# ---------------------------------------------------------------------------
# deterministic circle grid solver


def run_circle_grid(config: SimConfig) -> TrajectoryRecord:
    config.validate()
    if config.mode != "grid":
        raise UsageError("config mode must be 'grid'")
    m = config.grid_size
    step = geo.TWO_PI / m
    gain = kn.grid_pushforward(config.kernel, m).matrix.T.tocsr()  # (M, M*M)

    rho = build_grid_initial(config)
    space = config.space

    def rhs(values):
        pair_mass = np.outer(values, values).ravel()
        return step * (gain @ pair_mass) - values

    times = _record_times(config.t_end, config.record_interval)
    steps_per_record = int(round(config.record_interval / config.dt))
    dt = config.record_interval / steps_per_record

    energy = np.empty(len(times))
    w2_best = np.empty(len(times))
    centers = np.empty((len(times), 1))
    moments = np.empty((len(times), 2))
    converged = np.empty(len(times), dtype=bool)
    snapshots = []
    max_drift = 0.0

    def record(idx, t, values):
        density = GridDensity(m, values.copy(), float(t))
        rho_m = density.to_measure()
        energy[idx] = ms.energy(rho_m)
        best = ms.best_dirac_center(rho_m)
        w2_best[idx] = best.value
        centers[idx] = best.center.coords
        moments[idx] = ms.embedded_first_moment(rho_m)
        converged[idx] = best.converged
        if _wants_snapshot(t, config.snapshot_times):
            snapshots.append((float(t), density))

    record(0, 0.0, rho)
    for idx in range(1, len(times)):
        for _ in range(steps_per_record):
            mass_before = float(rho.sum()) * step
            k1 = rhs(rho)
            k2 = rhs(rho + 0.5 * dt * k1)
            k3 = rhs(rho + 0.5 * dt * k2)
            k4 = rhs(rho + dt * k3)
            rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            mass = float(rho.sum()) * step
            max_drift = max(max_drift, abs(mass - mass_before))
            if abs(mass - 1.0) > 1e-12:
                rho = rho / mass
        record(idx, times[idx], rho)

    return TrajectoryRecord(
        space=space,
        kind="grid",
        times=times,
        energy=energy,
        w2_best=w2_best,
        centers=centers,
        moments=moments,
        center_converged=converged,
        snapshots=snapshots,
        config=config,
        mass_drift=max_drift,
    )


# ---------------------------------------------------------------------------
# semicircle confinement


def _support_angles(snapshot) -> np.ndarray:
    if isinstance(snapshot, GridDensity):
        return snapshot.node_angles()[snapshot.values > 0.0]
    return np.asarray(snapshot).reshape(-1)


def semicircle_confinement_check(record: TrajectoryRecord) -> Optional[bool]:
    """True iff the support never leaves the open semicircle around the
    initial support; None when the initial support fits in no semicircle."""
    if record.space.family != geo.CIRCLE:
        raise UsageError("confinement check applies to circle runs")
    if not record.snapshots:
        raise UsageError("confinement check needs recorded snapshots")
    snaps = sorted(record.snapshots, key=lambda item: item[0])
    init = np.sort(np.mod(_support_angles(snaps[0][1]), geo.TWO_PI))
    if init.size == 0:
        raise UsageError("initial snapshot has empty support")
    gaps = np.diff(np.concatenate([init, [init[0] + geo.TWO_PI]]))
    widest = int(np.argmax(gaps))
    arc_len = geo.TWO_PI - float(gaps[widest])
    if arc_len >= math.pi:
        return None  # no containing open semicircle: check not applicable
    arc_start = init[(widest + 1) % init.size]
    center = (arc_start + 0.5 * arc_len) % geo.TWO_PI
    for _, snap in snaps:
        ang = _support_angles(snap)
        d = np.abs(np.mod(ang - center + math.pi, geo.TWO_PI) - math.pi)
        if np.any(d >= 0.5 * math.pi - 1e-12):
            return False
    return True


# ---------------------------------------------------------------------------
# trajectory files


def trajectory_header(space: geo.ManifoldSpace) -> list:
    return (
        ["t", "energy", "w2_best_dirac"]
        + [f"center_c{i}" for i in range(space.coord_size)]
        + [f"moment_c{i}" for i in range(moment_size(space))]
    )


def write_trajectory(path, record: TrajectoryRecord):
    """CSV with columns t, energy, w2_best_dirac, center_c*, moment_c*."""
    import csv as _csv

    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(trajectory_header(record.space))
        for k in range(len(record.times)):
            row = [record.times[k], record.energy[k], record.w2_best[k]]
            row += list(record.centers[k]) + list(record.moments[k])
            writer.writerow([f"{x:.17g}" for x in row])


def read_trajectory(path, space: geo.ManifoldSpace) -> TrajectoryRecord:
    import csv as _csv

    with open(path, newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        if header != trajectory_header(space):
            raise UsageError(f"unexpected trajectory header in {path}")
        rows = np.array([[float(x) for x in row] for row in reader if row])
    if rows.size == 0:
        raise UsageError(f"empty trajectory file {path}")
    k = space.coord_size
    msize = moment_size(space)
    return TrajectoryRecord(
        space=space,
        kind="file",
        times=rows[:, 0],
        energy=rows[:, 1],
        w2_best=rows[:, 2],
        centers=rows[:, 3 : 3 + k],
        moments=rows[:, 3 + k : 3 + k + msize],
        center_converged=np.ones(len(rows), dtype=bool),
        snapshots=[],
    )


def write_snapshot(path, density: GridDensity):
    import csv as _csv

    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["theta", "rho"])
        for theta, value in zip(density.node_angles(), density.values):
            writer.writerow([f"{theta:.17g}", f"{value:.17g}"])
