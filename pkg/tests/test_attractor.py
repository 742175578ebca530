import math
import warnings

import numpy as np
import pytest

from nflab.attractor import (ConvergenceWarning, DissipationBudget, GateError, absorbing_radius,
                             continuity_gap, decay_envelope_check, dyadic_levels,
                             envelope_crossing_time, evolve_ensemble, hausdorff_semidist,
                             random_ball, sample_attractor_section, upper_semicontinuity_curve)
from nflab.dynamics import (CoefficientPair, ModelSpec, bump_stimulus, constant_stimulus,
                            linear_rate, sinusoidal_stimulus, tanh_rate, zero_rate,
                            zero_stimulus)
from nflab.expr import TimeExpression
from nflab.field import Field, Grid
from nflab.integrator import ProcessHandle
from nflab.kernels import gaussian_kernel


def _budget(k1=0.5, k2=1.0, S=0.0, delta=1.0, a_minus=1.0, b0=1.0, p=2.0, measure=1.0):
    return DissipationBudget(a_minus, a_minus, b0, k1, TimeExpression(k2), p, measure,
                             lambda t: S, delta)


def test_radius_direct_substitution():
    assert absorbing_radius(_budget(), 0.0) == pytest.approx(4.0, rel=1e-15)


def test_radius_vanishes_without_forcing():
    assert absorbing_radius(_budget(k2=0.0, S=0.0), 3.0) == 0.0


def test_radius_moving_bump_against_trapezoid():
    g = Grid.uniform(1.0, 300)
    S = bump_stimulus(1.5, 0.2, 0.08, velocity=0.25)
    m = ModelSpec(g, gaussian_kernel(g, 0.1), CoefficientPair.constant(1, 1), tanh_rate(), S)
    b = DissipationBudget.from_model(m, delta=0.5)
    x = g.axes[0]
    for t in (0.0, 1.0, 2.7):
        c = 0.2 + 0.25 * t
        s2 = (1.5 * np.exp(-((x - c) ** 2) / (2 * 0.08**2))) ** 2
        norm = math.sqrt(np.trapezoid(s2, x))
        oracle = 1.5 / (1.0 - 0.1) * (1.0 * 1.0 * 1.0 + norm)
        assert absorbing_radius(b, t) == pytest.approx(oracle, rel=1e-10)


def test_radius_gate():
    with pytest.raises(GateError, match="dissipativity gate failed"):
        absorbing_radius(_budget(k1=1.0), 0.0)


def test_radius_monotone():
    base = absorbing_radius(_budget(), 0.0)
    assert absorbing_radius(_budget(delta=2.0), 0.0) > base
    assert absorbing_radius(_budget(k2=2.0), 0.0) > base
    assert absorbing_radius(_budget(S=0.5), 0.0) > base


def _linear_model(g, S=None, rate=None, p=2.0):
    return ModelSpec(g, gaussian_kernel(g, 0.1), CoefficientPair.constant(1, 1),
                     rate or zero_rate(), S or zero_stimulus(), 0.0, p)


def test_envelope_saturated_by_pure_decay(grid256):
    m = _linear_model(grid256)
    b = DissipationBudget.from_model(m, delta=1.0)
    assert b.k1 == 0.0
    rep = decay_envelope_check(ProcessHandle(m), b, 0.0, 5.0, grid256.constant(100.0))
    assert rep.passed
    # norm decays like e^{-t}, envelope like e^{-t/2}: outside the ball the margin is the slack
    assert rep.worst_margin >= 0.0
    assert rep.entry_times == [None]  # R = 0, never inside


def test_envelope_entry_time_bound(tanh_model):
    h = ProcessHandle(tanh_model)
    u0 = tanh_model.grid.constant(50.0)
    for delta in (0.1, 1.0, 10.0):
        b = DissipationBudget.from_model(tanh_model, delta)
        rep = decay_envelope_check(h, b, 0.0, 20.0, u0)
        assert rep.passed
        bound = envelope_crossing_time(b, 50.0, absorbing_radius(b, 0.0))
        assert rep.entry_times[0] is not None
        assert rep.entry_times[0] <= bound + 2 * h.dt


def test_fixed_point_never_leaves_ball(fixed_point_model):
    h = ProcessHandle(fixed_point_model)
    b = DissipationBudget.from_model(fixed_point_model)
    first = decay_envelope_check(h, b, 0.0, 30.0, fixed_point_model.grid.constant(40.0))
    entry = first.entry_times[0]
    assert entry is not None
    rep = decay_envelope_check(h, b, 0.0, entry + 50.0, fixed_point_model.grid.constant(40.0))
    assert rep.passed and rep.reexits == [None]


def test_envelope_violation_has_witness(tanh_model):
    # understating the dissipation makes the claimed envelope too fast
    b = DissipationBudget.from_model(tanh_model)
    fast = DissipationBudget(5.0, 5.0, b.b_zero, b.k1, b.k2, b.p, b.measure, b.stimulus_norm,
                             b.delta, True)
    rep = decay_envelope_check(ProcessHandle(tanh_model), fast, 0.0, 3.0,
                               tanh_model.grid.constant(50.0))
    assert not rep.passed
    assert rep.witness_time is not None and rep.witness_time > 0


def test_gate_blocks_attractor_operations(grid256):
    m = _linear_model(grid256, rate=linear_rate(2.0))
    b = DissipationBudget.from_model(m)
    with pytest.raises(GateError):
        sample_attractor_section(ProcessHandle(m), b, 0.0, [1.0], 2, 0)
    with pytest.raises(GateError):
        decay_envelope_check(ProcessHandle(m), b, 0.0, 1.0, grid256.constant(1.0))


def test_degenerate_section_is_initial_field(tanh_model):
    g = tanh_model.grid
    b = DissipationBudget.from_model(tanh_model)
    u = g.sample(lambda x: np.cos(x))
    sec = sample_attractor_section(ProcessHandle(tanh_model), b, 0.0, [0.0], 1, 0,
                                   initial=u.values[None, :])
    assert len(sec.members) == 1 and np.array_equal(sec.members[0].values, u.values)


def test_fixed_point_section_converges_with_long_horizon(fixed_point_model):
    b = DissipationBudget.from_model(fixed_point_model)
    sec = sample_attractor_section(ProcessHandle(fixed_point_model), b, 0.0,
                                   [20, 40, 60], 8, seed=1)
    assert len(sec.members) == 1
    assert np.max(np.abs(sec.members[0].values - 2.0)) <= 1e-6
    assert sec.gaps_nonincreasing and sec.last_gap <= 1e-6
    assert sec.contained


def test_linear_entire_solution_section(grid256):
    m = _linear_model(grid256, S=sinusoidal_stimulus())
    b = DissipationBudget.from_model(m)
    t = 0.7
    sec = sample_attractor_section(ProcessHandle(m, "rk4"), b, t, [30.0], 3, seed=4)
    expect = (math.sin(t) - math.cos(t)) / 2
    assert all(np.max(np.abs(s.values - expect)) <= 1e-6 for s in sec.members)


def test_section_warns_when_not_converged(fixed_point_model):
    b = DissipationBudget.from_model(fixed_point_model)
    with pytest.warns(ConvergenceWarning):
        sample_attractor_section(ProcessHandle(fixed_point_model), b, 0.0, [1.0, 2.0], 4, 0)


def test_section_horizons_validated(fixed_point_model):
    b = DissipationBudget.from_model(fixed_point_model)
    with pytest.raises(ValueError):
        sample_attractor_section(ProcessHandle(fixed_point_model), b, 0.0, [2.0, 1.0], 4, 0)


@pytest.mark.parametrize("delta", [0.1, 1.0, 10.0])
def test_tanh_section_contained(tanh_model, delta):
    b = DissipationBudget.from_model(tanh_model, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        sec = sample_attractor_section(ProcessHandle(tanh_model), b, 0.0, [15.0], 6, seed=2)
    assert sec.max_norm() <= absorbing_radius(b.with_delta(delta), 0.0) * (1 + 1e-6)


def test_hausdorff_examples():
    g = Grid.uniform(1.0, 50)
    zero, one, three = g.constant(0.0), g.constant(1.0), g.constant(3.0)
    assert hausdorff_semidist([one, three], [one, three]) == 0.0
    assert hausdorff_semidist([zero], [one, three], 2) == pytest.approx(1.0, rel=1e-14)
    # not symmetric
    assert hausdorff_semidist([one, three], [zero]) == pytest.approx(3.0, rel=1e-14)
    with pytest.raises(ValueError):
        hausdorff_semidist([], [one])
    with pytest.raises(ValueError):
        hausdorff_semidist([one], [])


def test_hausdorff_brute_force(rng):
    g = Grid.uniform(1.0, 40)
    A = [Field(g, v) for v in rng.standard_normal((5, 40))]
    B = [Field(g, v) for v in rng.standard_normal((7, 40))]
    for p in (1.0, 2.0, 3.0):
        best = 0.0
        for a in A:
            nearest = math.inf
            for b in B:
                d = sum(w * abs(x - y) ** p for w, x, y in zip(g.weights, a.values, b.values))
                nearest = min(nearest, d ** (1 / p))
            best = max(best, nearest)
        assert hausdorff_semidist(A, B, p) == pytest.approx(best, rel=1e-12)


def test_random_ball_uniform_and_seeded():
    g = Grid.uniform(1.0, 3)
    U = random_ball(g, 2.0, 4000, 2.0, seed=5)
    r = g.norm(U, 2)
    assert np.all(r <= 2.0)
    # uniform in a 3-dim ball: P(r <= R/2) = 1/8
    assert abs(np.mean(r <= 1.0) - 0.125) < 0.02
    assert np.array_equal(U, random_ball(g, 2.0, 4000, 2.0, seed=5))
    assert not np.array_equal(U[0], random_ball(g, 2.0, 1, 2.0, seed=6)[0])
    # member k does not depend on how many members are drawn
    assert np.array_equal(U[3], random_ball(g, 2.0, 10, 2.0, seed=5)[3])


def test_ensemble_independent_of_thread_count(tanh_model, monkeypatch, rng):
    h = ProcessHandle(tanh_model)
    U = rng.standard_normal((40, 256))
    monkeypatch.setenv("NFL_THREADS", "1")
    one = evolve_ensemble(h, 0.0, 1.0, U)
    monkeypatch.setenv("NFL_THREADS", "4")
    four = evolve_ensemble(h, 0.0, 1.0, U)
    assert np.array_equal(one, four)


def test_continuity_identical_stimuli(tanh_model):
    S = tanh_model.stimulus
    rep = continuity_gap(ProcessHandle(tanh_model), S, S, 0.0, 2.0,
                         tanh_model.grid.constant(0.5))
    assert np.all(rep.gap == 0.0) and rep.passed


def test_continuity_linear_response(grid256):
    s, s0 = 1.5, 0.25
    m = _linear_model(grid256)
    rep = continuity_gap(ProcessHandle(m), constant_stimulus(s), constant_stimulus(s0),
                         0.0, 8.0, grid256.constant(0.0))
    closed = (1 - np.exp(-rep.times)) * abs(s - s0)
    assert np.max(np.abs(rep.gap - closed)) <= 1e-12
    assert np.allclose(rep.majorant, abs(s - s0), rtol=1e-12)
    assert rep.passed
    assert rep.gap[-1] / rep.majorant[-1] > 0.999


def test_continuity_two_levels(tanh_model):
    S0, P = tanh_model.stimulus, bump_stimulus(1.0, 0.3, 0.1)
    u0 = tanh_model.grid.sample(lambda x: np.sin(np.pi * x))
    h = ProcessHandle(tanh_model)
    g1 = continuity_gap(h, S0 + 0.1 * P, S0, 0.0, 5.0, u0)
    g2 = continuity_gap(h, S0 + 0.05 * P, S0, 0.0, 5.0, u0)
    assert g1.passed and g2.passed
    assert g1.gap[-1] / g2.gap[-1] == pytest.approx(2.0, rel=0.1)


def test_usc_zero_perturbation(tanh_model):
    rep = upper_semicontinuity_curve(ProcessHandle(tanh_model), tanh_model.stimulus,
                                     zero_stimulus(), 0.0, dyadic_levels(0.1), 5.0, 4, 0)
    assert rep.distances == [0.0, 0.0, 0.0, 0.0]


def test_usc_linear_law(grid256):
    m = _linear_model(grid256, S=constant_stimulus(1.0))
    levels = dyadic_levels(0.2)
    rep = upper_semicontinuity_curve(ProcessHandle(m), m.stimulus, constant_stimulus(1.0),
                                     0.0, levels, 40.0, 4, 3)
    for lvl, d in zip(levels, rep.distances):
        assert abs(d - lvl) <= 1e-6
    assert rep.passed


def test_dyadic_levels():
    assert dyadic_levels(0.4) == [0.4, 0.2, 0.1, 0.05]
