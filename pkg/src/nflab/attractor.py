"""Absorbing balls, decay envelopes, pullback sections and stimulus continuity.

Pullback attractor sections are approximated by finite ensembles evolved
from ``tau = t - H`` to ``t`` over a list of horizons ``H``; convergence is
diagnosed from the Hausdorff semidistance between consecutive horizons,
never assumed.
"""

from __future__ import annotations

import math
import os
import warnings
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dynamics import ModelSpec, Stimulus
from .expr import TimeExpression
from .field import Field, GridMismatchError, lp_distance, stack_values
from .integrator import ProcessHandle, integrate, time_stamps

ENVELOPE_SLACK = 1.01
CONTAINMENT_SLACK = 1.0 + 1e-6
DEDUP_TOL = 1e-8
RHO_INFLATION = 1.1
ENSEMBLE_CHUNK = 16


class GateError(ValueError):
    """Raised when ``k1 * b0 >= a_minus``."""


class ConvergenceWarning(UserWarning):
    pass


# -- seeded randomness ----------------------------------------------------------

def member_rng(seed: int, stream: str, index: int) -> np.random.Generator:
    """Philox generator for ensemble member ``index`` of a named stream."""
    key = zlib.crc32(stream.encode())
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(key, int(index)))
    return np.random.Generator(np.random.Philox(ss))


def random_ball(grid, radius: float, count: int, p: float, seed: int,
                stream: str = "ensemble") -> np.ndarray:
    """``count`` states drawn uniformly from the discrete L^p ball.

    Uses the generalized-Gaussian construction: with ``z_i`` of density
    ``~exp(-|z|^p)`` and ``E ~ Exp(1)``, ``z / (sum|z|^p + E)^(1/p)`` is uniform
    in the unit l^p ball; dividing by ``w_i^(1/p)`` maps it to the weighted one.
    """
    out = np.empty((count, grid.size))
    for k in range(count):
        rng = member_rng(seed, stream, k)
        g = rng.gamma(1.0 / p, 1.0, grid.size) ** (1.0 / p)
        z = g * rng.choice([-1.0, 1.0], grid.size)
        e = rng.exponential()
        x = z / (np.sum(np.abs(z) ** p) + e) ** (1.0 / p)
        out[k] = radius * x / grid.weights ** (1.0 / p)
    return out


# -- dissipation budget ---------------------------------------------------------

@dataclass(frozen=True)
class DissipationBudget:
    """Constants entering the absorbing radius; ``stimulus_norm(t)`` is the
    instantaneous ``||S(t, .)||_p``."""

    a_minus: float
    a_zero: float
    b_zero: float
    k1: float
    k2: TimeExpression
    p: float
    measure: float
    stimulus_norm: Callable[[float], float]
    delta: float = 1.0
    time_constant: bool = False

    @classmethod
    def from_model(cls, model: ModelSpec, delta: float = 1.0) -> "DissipationBudget":
        if delta <= 0:
            raise ValueError("delta must be positive")
        c, rate = model.coefficients, model.rate
        stim, grid, p = model.stimulus, model.grid, model.p
        return cls(c.a_minus, c.a_zero, c.b_zero, rate.k1, rate.k2, p, grid.measure,
                   lambda t: stim.norm(t, grid, p), delta,
                   time_constant=stim.static and rate.k2.is_constant)

    def with_delta(self, delta: float) -> "DissipationBudget":
        return DissipationBudget(self.a_minus, self.a_zero, self.b_zero, self.k1, self.k2,
                                 self.p, self.measure, self.stimulus_norm, delta,
                                 self.time_constant)

    @property
    def epsilon(self) -> float:
        return self.a_minus - self.k1 * self.b_zero

    @property
    def decay_rate(self) -> float:
        """Exponent rate of the envelope for ``||u||^p``."""
        return self.delta * self.p / (1.0 + self.delta) * self.epsilon


def absorbing_radius(budget: DissipationBudget, t: float) -> float:
    """``(1 + delta) / (a_minus - k1 b0) * (b0 k2(t) |Omega|^(1/p) + ||S(t,.)||_p)``."""
    eps = budget.epsilon
    if not eps > 0:
        raise GateError("dissipativity gate failed: k1*b0 >= a_minus")
    bracket = (budget.b_zero * float(budget.k2(t)) * budget.measure ** (1.0 / budget.p)
               + budget.stimulus_norm(t))
    return (1.0 + budget.delta) / eps * bracket


def _require_gate(model: ModelSpec):
    if not model.dissipative:
        raise GateError("dissipativity gate failed: k1*b0 >= a_minus")


# -- decay envelope -------------------------------------------------------------

@dataclass
class EnvelopeReport:
    """One row per (member, stamp): ``member, t, norm, radius, envelope, outside``."""

    delta: float
    rows: list
    entry_times: list
    reexits: list
    violations: list
    worst_margin: float

    @property
    def passed(self) -> bool:
        return not self.violations and not any(self.reexits)

    @property
    def witness_time(self) -> float | None:
        if self.violations:
            return self.violations[0]["t"]
        later = [ex for ex in self.reexits if ex is not None]
        return min(later) if later else None


def decay_envelope_check(h: ProcessHandle, budget: DissipationBudget, tau: float,
                         t_end: float, u_tau: Field | Sequence[Field],
                         record: bool = True) -> EnvelopeReport:
    """Evolve and test ``||u(t)||^p <= e^{-delta p eps (t - tau)/(1 + delta)} ||u_tau||^p``.

    The envelope is asserted (with 1% slack on the norm) at every stamp up to
    the first entry into the absorbing ball. For time-constant budgets any
    later stamp outside ``R_delta * (1 + 1e-6)`` counts as a re-exit.
    """
    _require_gate(h.model)
    members = [u_tau] if isinstance(u_tau, Field) else list(u_tau)
    U0 = stack_values(members)
    if not members[0].grid.same_as(h.model.grid):
        raise GridMismatchError("initial field is not on the model grid")
    grid, p = h.model.grid, budget.p
    n0 = np.asarray(grid.norm(U0, p))
    m = len(members)
    entered = np.full(m, np.nan)
    reexit = [None] * m
    violations, rows = [], []
    worst = [math.inf]
    radius_cache: dict[float, float] = {}

    def radius_at(s):
        if budget.time_constant:
            s = tau
        if s not in radius_cache:
            radius_cache[s] = absorbing_radius(budget, s)
        return radius_cache[s]

    def observe(s, U):
        norms = np.asarray(grid.norm(U, p))
        R = radius_at(s)
        env = n0 * math.exp(-budget.decay_rate * (s - tau) / p)
        for k in range(m):
            nk = float(norms[k])
            outside = nk >= R
            if np.isnan(entered[k]):
                if outside:
                    margin = (ENVELOPE_SLACK * env[k] - nk) / (ENVELOPE_SLACK * env[k])
                    worst[0] = min(worst[0], margin)
                    if nk > ENVELOPE_SLACK * env[k]:
                        violations.append({"member": k, "t": s, "norm": nk,
                                           "envelope": float(env[k])})
                else:
                    entered[k] = s
            elif budget.time_constant and nk > R * CONTAINMENT_SLACK and reexit[k] is None:
                reexit[k] = s
            if record:
                rows.append((k, s, nk, R, float(env[k]), int(outside)))

    integrate(h, tau, t_end, U0, observe)
    return EnvelopeReport(budget.delta, rows,
                          [None if np.isnan(e) else float(e) for e in entered],
                          reexit, violations, worst[0] if math.isfinite(worst[0]) else 0.0)


def envelope_crossing_time(budget: DissipationBudget, norm0: float, radius: float) -> float:
    """Time at which the envelope started at ``norm0`` reaches ``radius``."""
    if norm0 <= radius:
        return 0.0
    p = budget.p
    return (1.0 + budget.delta) / (budget.delta * budget.epsilon) * math.log(
        norm0**p / radius**p) / p


# -- Hausdorff semidistance -----------------------------------------------------

def hausdorff_semidist(A: Sequence[Field], B: Sequence[Field], p: float = 2.0) -> float:
    """``max_{a in A} min_{b in B} ||a - b||_p`` (not symmetric)."""
    if len(A) == 0 or len(B) == 0:
        raise ValueError("Hausdorff semidistance needs nonempty sets")
    return max(min(lp_distance(a, b, p) for b in B) for a in A)


def _dedup(fields: list[Field], p: float, tol: float = DEDUP_TOL) -> list[Field]:
    kept: list[Field] = []
    for f in fields:
        if all(lp_distance(f, k, p) >= tol for k in kept):
            kept.append(f)
    return kept


# -- pullback sections ----------------------------------------------------------

@dataclass
class AttractorSection:
    t: float
    members: list
    horizon: float
    seed: int
    initial_radius: float
    ensemble_size: int
    horizons: list = field(default_factory=list)
    gaps: list = field(default_factory=list)
    radius: float = math.nan
    p: float = 2.0

    @property
    def last_gap(self) -> float:
        return self.gaps[-1] if self.gaps else math.nan

    @property
    def gaps_nonincreasing(self) -> bool:
        return all(b <= a for a, b in zip(self.gaps, self.gaps[1:]))

    def max_norm(self) -> float:
        return max(float(m.grid.norm(m.values, self.p)) for m in self.members)

    @property
    def contained(self) -> bool:
        return self.max_norm() <= self.radius * CONTAINMENT_SLACK


def worker_count() -> int:
    """Thread cap from ``NFL_THREADS`` (default: CPU count, at most 8)."""
    raw = os.environ.get("NFL_THREADS", "")
    try:
        n = int(raw) if raw else min(8, os.cpu_count() or 1)
    except ValueError:
        n = 1
    return max(1, n)


def evolve_ensemble(h: ProcessHandle, tau: float, t: float, U0: np.ndarray,
                    chunk: int = ENSEMBLE_CHUNK) -> np.ndarray:
    """Push every row of ``U0`` from ``tau`` to ``t``.

    Rows are split into fixed-size chunks independent of the worker count,
    and each chunk is a batched solve, so results do not depend on
    ``NFL_THREADS``.
    """
    U0 = np.atleast_2d(U0)
    if t == tau:
        return U0.copy()
    blocks = [U0[i:i + chunk] for i in range(0, len(U0), chunk)]
    n = min(worker_count(), len(blocks))
    if n <= 1:
        out = [integrate(h, tau, t, b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            out = list(pool.map(lambda b: integrate(h, tau, t, b), blocks))
    return np.concatenate(out, axis=0)


def _section_states(h: ProcessHandle, t: float, H: float, U0: np.ndarray) -> np.ndarray:
    return evolve_ensemble(h, t - H, t, U0)


def sample_attractor_section(h: ProcessHandle, budget: DissipationBudget, t: float,
                             horizons: Sequence[float], ensemble_size: int, seed: int,
                             initial: np.ndarray | None = None,
                             initial_radius: float | None = None) -> AttractorSection:
    """Finite-ensemble surrogate for the pullback section at time ``t``.

    One ensemble is drawn uniformly in the L^p ball of radius
    ``2 R_delta(t - H_max)`` (unless ``initial``/``initial_radius`` is given) and
    pushed from ``t - H`` to ``t`` for every horizon. ``gaps[k]`` is the
    semidistance from the section at ``horizons[k]`` to the one at
    ``horizons[k + 1]``.
    """
    _require_gate(h.model)
    hs = [float(x) for x in horizons]
    if not hs or any(b <= a for a, b in zip(hs, hs[1:])) or hs[0] < 0:
        raise ValueError("horizons must be nonnegative and strictly increasing")
    p = budget.p
    grid = h.model.grid
    H = hs[-1]
    if initial is None:
        if initial_radius is None:
            initial_radius = 2.0 * absorbing_radius(budget, t - H)
        U0 = random_ball(grid, initial_radius, ensemble_size, p, seed)
    else:
        U0 = np.atleast_2d(np.asarray(initial, dtype=float))
        initial_radius = float(np.max(grid.norm(U0, p)))
    sections = []
    for Hk in hs:
        V = _section_states(h, t, Hk, U0)
        sections.append([Field(grid, v) for v in V])
    gaps = [hausdorff_semidist(a, b, p) for a, b in zip(sections, sections[1:])]
    members = _dedup(sections[-1], p)
    sec = AttractorSection(t, members, H, seed, float(initial_radius), len(U0), hs, gaps,
                           absorbing_radius(budget, t), p)
    if gaps and gaps[-1] > 1e-3:
        warnings.warn(f"pullback section not converged: last gap {gaps[-1]:.3g}",
                      ConvergenceWarning, stacklevel=2)
    return sec


# -- continuity in the stimulus -------------------------------------------------

@dataclass
class ContinuityReport:
    """Per stamp: ``t, gap, majorant, ratio``."""

    times: np.ndarray
    gap: np.ndarray
    majorant: np.ndarray
    stimulus_gap: float
    rho: float

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.stimulus_gap > 0, self.gap / self.stimulus_gap, 0.0)

    @property
    def violations(self) -> np.ndarray:
        return np.flatnonzero(self.gap > self.majorant)

    @property
    def passed(self) -> bool:
        return self.violations.size == 0

    @property
    def worst_margin(self) -> float:
        with np.errstate(divide="ignore", invalid="ignore"):
            m = np.where(self.majorant > 0, (self.majorant - self.gap) / self.majorant,
                         np.where(self.gap > 0, -np.inf, 0.0))
        return float(np.min(m))

    @property
    def witness_time(self) -> float | None:
        v = self.violations
        return float(self.times[v[0]]) if v.size else None


def stimulus_gap_norm(S: Stimulus, S0: Stimulus, grid, p: float, times) -> float:
    """``sup_t ||S(t,.) - S0(t,.)||_p`` over the given times (exact when both
    stimuli are static)."""
    if S.static and S0.static:
        times = [0.0]
    return max(grid.norm(S.values(t, grid) - S0.values(t, grid), p) for t in times)


def gronwall_majorant(model: ModelSpec, tau: float, times: np.ndarray, rho: float,
                      stimulus_gap: float) -> np.ndarray:
    """``e^{(a0 - a_-) t} / a0 * exp(int_tau^t b0 ||J||_p C2(s) [|Omega|^(1/q) + 2 rho^(p/q)] ds) * gap``."""
    c = model.coefficients
    p, q = model.p, model.q
    Jp = model.kernel.norm(p)
    bracket = 3.0 if math.isinf(q) else model.grid.measure ** (1.0 / q) + 2.0 * rho ** (p / q)
    C2 = model.rate.C2
    out = np.empty(len(times))
    acc, prev = 0.0, tau
    for k, s in enumerate(times):
        s = float(s)
        if s > prev:
            acc += C2.integrate(prev, s)
            prev = s
        exponent = c.b_zero * Jp * bracket * acc
        out[k] = math.exp((c.a_zero - c.a_minus) * s) / c.a_zero * math.exp(exponent) * stimulus_gap
    return out


def continuity_gap(h: ProcessHandle, S: Stimulus, S0: Stimulus, tau: float, L: float,
                   u_tau: Field, stimulus_gap: float | None = None) -> ContinuityReport:
    """Compare ``T_S(t, tau) u_tau`` with ``T_S0(t, tau) u_tau`` on ``[tau, L]``.

    ``rho`` is the largest L^p norm seen on either trajectory, inflated by 10%.
    """
    model = h.model
    grid, p = model.grid, model.p
    hS, hS0 = h.with_model(model.with_stimulus(S)), h.with_model(model.with_stimulus(S0))
    times = time_stamps(tau, L, h.dt)
    gaps, norms_max = [], [0.0]

    # both trajectories advance in lockstep so memory stays O(nodes)
    u_s, u_0 = u_tau.values.copy(), u_tau.values.copy()
    for k, s in enumerate(times):
        if k > 0:
            dt = float(s - times[k - 1])
            t0 = float(times[k - 1])
            u_s = hS.step_array(t0, u_s, dt)
            u_0 = hS0.step_array(t0, u_0, dt)
        gaps.append(grid.norm(u_s - u_0, p))
        norms_max[0] = max(norms_max[0], grid.norm(u_s, p), grid.norm(u_0, p))
    rho = RHO_INFLATION * norms_max[0]
    if stimulus_gap is None:
        stimulus_gap = stimulus_gap_norm(S, S0, grid, p, times)
    maj = gronwall_majorant(model, tau, times, rho, stimulus_gap)
    return ContinuityReport(np.asarray(times), np.asarray(gaps), maj, float(stimulus_gap), rho)


# -- upper semicontinuity -------------------------------------------------------

@dataclass
class SemicontinuityReport:
    levels: list
    distances: list
    slack: float = 0.10

    @property
    def nonincreasing(self) -> bool:
        d = self.distances
        return all(b <= (1.0 + self.slack) * a for a, b in zip(d, d[1:]))

    @property
    def final_drop(self) -> bool:
        d = self.distances
        return d[-1] <= d[0] / 4.0

    @property
    def passed(self) -> bool:
        return self.nonincreasing and self.final_drop


def dyadic_levels(eta: float, count: int = 4) -> list[float]:
    return [eta / 2**k for k in range(count)]


def upper_semicontinuity_curve(h: ProcessHandle, S0: Stimulus, perturbation: Stimulus,
                               t: float, levels: Sequence[float], horizon: float,
                               ensemble_size: int, seed: int,
                               delta: float = 1.0) -> SemicontinuityReport:
    """``dist_H(A_S(t), A_S0(t))`` for ``S = S0 + level * perturbation``.

    All sections share one initial ensemble drawn in the ball of radius
    ``2 max R_delta(t - horizon)`` over the family, so a zero perturbation
    reproduces the unperturbed section exactly.
    """
    base = h.model.with_stimulus(S0)
    models = [h.model.with_stimulus(S0 + lvl * perturbation) for lvl in levels]
    for m in [base] + models:
        _require_gate(m)
    radius = 2.0 * max(absorbing_radius(DissipationBudget.from_model(m, delta), t - horizon)
                       for m in [base] + models)
    grid, p = base.grid, base.p
    U0 = random_ball(grid, radius, ensemble_size, p, seed)

    def section(model):
        V = _section_states(h.with_model(model), t, horizon, U0)
        return _dedup([Field(grid, v) for v in V], p)

    A0 = section(base)
    dists = [hausdorff_semidist(section(m), A0, p) for m in models]
    return SemicontinuityReport([float(x) for x in levels], dists)
