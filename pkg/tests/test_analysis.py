import math

import numpy as np
import pytest

from geoflock import analysis as an
from geoflock import dynamics as dyn
from geoflock import geometry as geo
from geoflock import kernels as kn
from geoflock.errors import DomainError, UsageError

SEED = 909

C = geo.circle()
S2 = geo.sphere(2)


# ---------------------------------------------------------------------------
# rate fitting


def test_fit_exact_exponential():
    t = np.linspace(0, 30, 61)
    fit = an.fit_decay_rate(t, 3.0 * np.exp(-0.5 * t), (0.0, 30.0))
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)
    assert fit.residual_rms < 1e-12
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-10)
    # window independence on exact data
    fit2 = an.fit_decay_rate(t, 3.0 * np.exp(-0.5 * t), (5.0, 20.0))
    assert fit2.slope == pytest.approx(-0.5, abs=1e-12)


def test_fit_constant_series():
    t = np.linspace(0, 10, 21)
    fit = an.fit_decay_rate(t, np.full_like(t, 4.2), (0.0, 10.0))
    assert fit.slope == pytest.approx(0.0, abs=1e-14)
    assert fit.r_squared == 1.0


def test_fit_errors():
    t = np.linspace(0, 10, 21)
    with pytest.raises(DomainError):
        an.fit_decay_rate(t, np.linspace(-1, 1, 21), (0.0, 10.0))
    with pytest.raises(UsageError):
        an.fit_decay_rate(t, np.exp(-t), (0.0, 1.0))


# ---------------------------------------------------------------------------
# limit tracking


def test_track_stationary_dirac():
    cfg = dyn.SimConfig(
        space=S2,
        kernel=kn.midpoint_kernel(S2),
        mode="particles",
        n_particles=8,
        t_end=2.0,
        record_interval=0.5,
        seed=1,
        initial={"type": "points", "points": [[0.0, 0.0, 1.0]]},
    )
    rec = dyn.simulate_particles(cfg)[0]
    rep = an.track_dirac_limit(rec)
    assert geo.distance(rep.x_infinity, geo.point(S2, [0, 0, 1])) < 1e-12
    assert np.all(rep.sup_table == 0.0)
    assert rep.passed


def test_track_two_particle_limit():
    theta = 0.6
    cfg = dyn.SimConfig(
        space=C,
        kernel=kn.midpoint_kernel(C),
        mode="particles",
        n_particles=2,
        t_end=12.0,
        record_interval=1.0,
        seed=4,
        update_mode="pair",
        initial={"type": "two_atoms", "angles": [0.0, theta]},
    )
    rec = dyn.simulate_particles(cfg)[0]
    rep = an.track_dirac_limit(rec)
    assert abs(rep.x_infinity.coords[0] - theta / 2) < 0.01
    assert rep.passed


def test_track_concentrated_sphere_run():
    cfg = dyn.SimConfig(
        space=S2,
        kernel=kn.midpoint_kernel(S2),
        mode="particles",
        n_particles=500,
        t_end=8.0,
        record_interval=0.5,
        seed=21,
        initial={"type": "cap", "radius": 0.1},
    )
    rec = dyn.simulate_particles(cfg)[0]
    rep = an.track_dirac_limit(rec)
    assert rep.passed
    # tail-sup envelope shrinks
    assert rep.sup_table[-2] <= rep.sup_table[0] + 1e-12


# ---------------------------------------------------------------------------
# energy contraction


def test_energy_contraction_stationary_dirac():
    cfg = dyn.SimConfig(
        space=C,
        kernel=kn.midpoint_kernel(C),
        mode="grid",
        grid_size=64,
        t_end=1.0,
        record_interval=0.25,
        dt=0.01,
        initial={"type": "dirac", "angle": 1.0},
    )
    rec = dyn.run_circle_grid(cfg)
    rep = an.energy_contraction_check(rec, c0=50.0)
    assert rep.all_ok
    assert all(s.margin <= 1e-12 for s in rep.steps)


def test_energy_contraction_small_energy_grid():
    cfg = dyn.SimConfig(
        space=C,
        kernel=kn.midpoint_kernel(C),
        mode="grid",
        grid_size=256,
        t_end=4.0,
        record_interval=0.25,
        dt=0.01,
        initial={"type": "bump", "amplitude": 1.0, "power": 500.0},
    )
    rec = dyn.run_circle_grid(cfg)
    assert rec.energy[0] < 0.01
    rep = an.energy_contraction_check(rec, c0=50.0)
    assert rep.all_ok


def test_energy_contraction_near_uniform_flags_small_probe():
    cfg = dyn.SimConfig(
        space=C,
        kernel=kn.midpoint_kernel(C),
        mode="grid",
        grid_size=128,
        t_end=4.0,
        record_interval=0.25,
        dt=0.01,
        initial={"type": "bump", "amplitude": 0.05},
    )
    rec = dyn.run_circle_grid(cfg)
    # near the uniform state the energy barely moves, which needs c0 of
    # order E/4 / E^{4/3}; a small probe constant is flagged early on
    rep = an.energy_contraction_check(rec, c0=0.05)
    assert not rep.all_ok
    assert rep.max_c0_required > 0.05
    rep_large = an.energy_contraction_check(rec, c0=50.0)
    assert rep_large.all_ok


# ---------------------------------------------------------------------------
# comparison-constant probe


def test_probe_euclidean_identically_zero():
    rng = np.random.default_rng(SEED)
    rows = an.probe_comparison_constant(geo.euclidean(2), [0.5, 0.2], 20_000, rng)
    for row in rows:
        assert abs(row.r_min) < 1e-8 and abs(row.r_max) < 1e-8


def test_probe_sphere_bounded_positive_and_stable():
    rng1 = np.random.default_rng(SEED)
    rng2 = np.random.default_rng(SEED + 1)
    rows1 = an.probe_comparison_constant(S2, [0.2], 100_000, rng1)
    rows2 = an.probe_comparison_constant(S2, [0.2], 100_000, rng2)
    r1, r2 = rows1[0], rows2[0]
    assert r1.r_min >= -1e-8
    assert r1.r_max < 1.0
    assert abs(r1.r_max - r2.r_max) <= 0.2 * max(r1.r_max, r2.r_max)


def test_probe_no_blowup_as_kappa_shrinks():
    rng = np.random.default_rng(SEED)
    rows = an.probe_comparison_constant(S2, [0.5, 0.3, 0.2, 0.1], 30_000, rng)
    maxima = [row.r_max for row in rows]
    assert max(maxima) <= 2.0 * min(m for m in maxima if m > 0) + 0.1


def test_probe_hyperbolic_sign():
    rng = np.random.default_rng(SEED)
    rows = an.probe_comparison_constant(geo.hyperbolic(-1.0), [0.2], 100_000, rng)
    assert rows[0].r_max <= 1e-8
    assert rows[0].r_min > -1.0


def test_probe_threshold_domain_error():
    rng = np.random.default_rng(SEED)
    with pytest.raises(DomainError):
        an.probe_comparison_constant(S2, [2.2], 100, rng)


# ---------------------------------------------------------------------------
# three-atom moment drift


def test_three_atom_first_order_values():
    eps = 0.01
    moment, deriv, cross = an.three_atom_moment_derivative(eps)
    assert moment[0] == pytest.approx(-1 / 3, abs=1e-3)
    assert moment[1] == pytest.approx(eps / 3, abs=1e-3)
    # exact evaluation of the derivative integrand (see ledger: the published
    # x-component -4/9 + eps/3 is inconsistent with the published moment)
    assert deriv[0] == pytest.approx(eps / 3, abs=1e-3)
    assert deriv[1] == pytest.approx(-eps / 9, abs=1e-3)
    assert cross != 0.0


def test_three_atom_cross_vanishes_with_eps():
    crosses = [an.three_atom_moment_derivative(e)[2] for e in [0.2, 0.1, 0.05, 0.01]]
    assert all(abs(c2) < abs(c1) for c1, c2 in zip(crosses, crosses[1:]))
    # first-order expansion: cross = eps/27 + O(eps^2)
    assert crosses[-1] == pytest.approx(0.01 / 27, rel=0.05)


def test_three_atom_cross_oracle_at_005():
    eps = 0.05
    angles = np.array([0.0, math.pi - 2 * eps, math.pi + eps])
    mids = np.array([math.pi / 2 - eps, 1.5 * math.pi + eps / 2, math.pi - eps / 2])
    moment = np.array([np.cos(angles).mean(), np.sin(angles).mean()])
    deriv = -(2 / 3) * moment + (2 / 9) * np.array([np.cos(mids).sum(), np.sin(mids).sum()])
    expected_cross = moment[0] * deriv[1] - moment[1] * deriv[0]
    _, _, cross = an.three_atom_moment_derivative(eps)
    assert cross == pytest.approx(expected_cross, abs=1e-15)
    assert abs(cross) > eps**2 / 20


def test_three_atom_eps_range():
    with pytest.raises(UsageError):
        an.three_atom_moment_derivative(0.5)
    with pytest.raises(UsageError):
        an.three_atom_moment_derivative(0.0)


# ---------------------------------------------------------------------------
# offset-kernel contraction relation


def test_offset_kernel_zero_is_midpoint():
    rng = np.random.default_rng(SEED)
    rep = an.offset_kernel_contraction_check(0.0, 150, rng)
    assert abs(rep.beta_hat) < 1e-10
    assert abs(rep.beta_tilde_hat) < 1e-10
    assert rep.coefficients_match and rep.general_bound_ok


def test_offset_kernel_s03():
    rng = np.random.default_rng(SEED)
    rep = an.offset_kernel_contraction_check(0.3, 300, rng)
    assert rep.beta_hat == pytest.approx(0.09, abs=1e-9)
    assert rep.beta_tilde_hat == pytest.approx(0.09, abs=1e-9)
    assert rep.coefficients_match
    assert rep.general_bound_ok  # 0.09 <= 0.09 + 2*0.3


# ---------------------------------------------------------------------------
# verification suites


def test_suites_run_and_pass(tmp_path):
    for name in ["geometry", "measures"]:
        results = an.run_suite(name, seed=123)
        assert results
        for row in results:
            assert row.passed, f"{row.check}: {row.statistic} vs {row.bound}"
    path = tmp_path / "report.ndjson"
    an.write_ndjson(path, an.run_suite("geometry", seed=123))
    import json

    lines = path.read_text().strip().splitlines()
    for line in lines:
        obj = json.loads(line)
        assert set(obj) == {"check", "params", "statistic", "bound", "pass"}


def test_suite_unknown_name():
    with pytest.raises(UsageError):
        an.run_suite("nonsense", seed=1)
