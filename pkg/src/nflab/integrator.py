"""Time stepping and the evolution process T(t, tau).

The exponential stepper integrates the linear decay exactly through the
accumulated rate ``A(t) = int_0^t a``:

    u(t+dt) = e^{-(A(t+dt) - A(t))} u(t) + phi(t, dt) N(t, u(t)),
    phi(t, dt) = int_t^{t+dt} e^{-(A(t+dt) - A(s))} ds,

with ``N = b K f(t,u) - h + S`` frozen at the left end point. RK4 on
``du/dt = F(t, u)`` is the reference scheme.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dynamics import ModelSpec, NonFiniteError
from .expr import TimeExpression, as_expression
from .field import Field, GridMismatchError

BLOWUP_NORM = 1e12

_GL5_NODES, _GL5_WEIGHTS = np.polynomial.legendre.leggauss(5)


class BlowUpError(FloatingPointError):
    def __init__(self, t: float, detail: str = ""):
        super().__init__(f"blow-up at t={t:.6g}" + (f": {detail}" if detail else ""))
        self.t = t


class DecayAccumulator:
    """Segment integrals of the decay rate, ``A(xi2) - A(xi1)``."""

    def __init__(self, a: TimeExpression | str | float):
        self.a = as_expression(a)
        self._cache: dict[tuple[float, float], float] = {}

    def __call__(self, xi1: float, xi2: float) -> float:
        if xi1 > xi2:
            raise ValueError(f"decay integral needs xi1 <= xi2, got {xi1} > {xi2}")
        key = (xi1, xi2)
        val = self._cache.get(key)
        if val is None:
            val = self.a.integrate(xi1, xi2)
            if len(self._cache) > 100_000:
                self._cache.clear()
            self._cache[key] = val
        return val


def decay_integral(acc: DecayAccumulator, xi1: float, xi2: float) -> float:
    return acc(xi1, xi2)


@dataclass
class ProcessHandle:
    """A model plus a fixed-step stepper configuration."""

    model: ModelSpec
    scheme: str = "exponential"
    dt: float = 0.01
    blowup: float = BLOWUP_NORM
    _acc: DecayAccumulator = field(init=False, repr=False)
    _coef: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.scheme not in ("exponential", "rk4"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        self._acc = DecayAccumulator(self.model.coefficients.a)

    @property
    def accumulator(self) -> DecayAccumulator:
        return self._acc

    def with_model(self, model: ModelSpec) -> "ProcessHandle":
        return ProcessHandle(model, self.scheme, self.dt, self.blowup)

    def exp_coefficients(self, t: float, dt: float) -> tuple[float, float]:
        """``(exp(-dA), phi)`` for the step ``[t, t + dt]``."""
        key = (t, dt)
        hit = self._coef.get(key)
        if hit is not None:
            return hit
        a = self.model.coefficients.a
        if a.is_constant:
            rate = a.constant_value
            decay = math.exp(-rate * dt)
            phi = -math.expm1(-rate * dt) / rate
        else:
            end = t + dt
            decay = math.exp(-self._acc(t, end))
            s = t + 0.5 * dt * (_GL5_NODES + 1.0)
            phi = 0.5 * dt * sum(w * math.exp(-self._acc(float(si), end))
                                 for si, w in zip(s, _GL5_WEIGHTS))
        if len(self._coef) > 100_000:
            self._coef.clear()
        self._coef[key] = (decay, phi)
        return decay, phi

    # -- raw array steps (batched over leading axes) ----------------------

    def step_array(self, t: float, u: np.ndarray, dt: float) -> np.ndarray:
        if self.scheme == "exponential":
            out = self._exp_step(t, u, dt)
        else:
            out = self._rk4_step(t, u, dt)
        self._guard(t + dt, out)
        return out

    def _exp_step(self, t, u, dt):
        decay, phi = self.exp_coefficients(t, dt)
        return decay * u + phi * self.model.nonlinear(t, u)

    def _rk4_step(self, t, u, dt):
        F = self.model.rhs
        k1 = F(t, u)
        k2 = F(t + 0.5 * dt, u + 0.5 * dt * k1)
        k3 = F(t + 0.5 * dt, u + 0.5 * dt * k2)
        k4 = F(t + dt, u + dt * k3)
        return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def _guard(self, t, u):
        if not np.all(np.isfinite(u)):
            raise BlowUpError(t, "non-finite state")
        norms = self.model.grid.norm(u, self.model.p)
        if np.any(np.asarray(norms) > self.blowup):
            raise BlowUpError(t, f"norm exceeds {self.blowup:g}")


def _step_field(h: ProcessHandle, scheme: str, t: float, u: Field, dt: float) -> Field:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not u.grid.same_as(h.model.grid):
        raise GridMismatchError("field is not on the model grid")
    stepper = h if h.scheme == scheme else ProcessHandle(h.model, scheme, h.dt, h.blowup)
    try:
        return Field(u.grid, stepper.step_array(t, u.values, dt))
    except NonFiniteError as exc:
        raise BlowUpError(t, str(exc)) from exc


def step_exponential(h: ProcessHandle, t: float, u: Field, dt: float) -> Field:
    return _step_field(h, "exponential", t, u, dt)


def step_rk4(h: ProcessHandle, t: float, u: Field, dt: float) -> Field:
    return _step_field(h, "rk4", t, u, dt)


def time_stamps(tau: float, t: float, dt: float) -> np.ndarray:
    """``tau, tau + dt, ...`` ending exactly at ``t``; a final short step
    absorbs any remainder."""
    if t < tau:
        raise ValueError("need t >= tau")
    if t == tau:
        return np.array([tau])
    n = (t - tau) / dt
    n_full = int(round(n)) if abs(n - round(n)) < 1e-9 else int(math.floor(n))
    stamps = tau + dt * np.arange(n_full + 1)
    if stamps[-1] < t - 1e-12 * max(1.0, abs(t)):
        stamps = np.append(stamps, t)
    stamps[-1] = t
    return stamps


def integrate(h: ProcessHandle, tau: float, t: float, u: np.ndarray,
              observer: Callable[[float, np.ndarray], None] | None = None) -> np.ndarray:
    """Advance raw state(s) ``u`` from ``tau`` to ``t``; ``observer(t, u)`` is
    called at every stamp including the first."""
    stamps = time_stamps(tau, t, h.dt)
    u = np.array(u, dtype=float)
    if observer is not None:
        observer(float(stamps[0]), u)
    for k in range(len(stamps) - 1):
        t0, t1 = float(stamps[k]), float(stamps[k + 1])
        try:
            u = h.step_array(t0, u, t1 - t0)
        except NonFiniteError as exc:
            raise BlowUpError(t0, str(exc)) from exc
        if observer is not None:
            observer(t1, u)
    return u


@dataclass
class Trajectory:
    times: np.ndarray
    values: np.ndarray
    dt: float
    scheme: str
    grid: object = field(repr=False, default=None)

    @property
    def fields(self) -> list[Field]:
        return [Field(self.grid, v) for v in self.values]

    @property
    def final(self) -> Field:
        return Field(self.grid, self.values[-1])

    def norms(self, p: float) -> np.ndarray:
        return np.asarray(self.grid.norm(self.values, p))

    def write_csv(self, path, summary: bool = False, p: float = 2.0) -> None:
        """Full mode: ``t,node_index,value`` rows. Summary mode:
        ``t,l1,l2,lp,sup`` per stamp."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if summary:
                w.writerow(["t", "l1", "l2", "lp", "sup"])
                l1 = self.grid.norm(self.values, 1)
                l2 = self.grid.norm(self.values, 2)
                lp = self.grid.norm(self.values, p)
                sup = np.max(np.abs(self.values), axis=1)
                for row in zip(self.times, l1, l2, lp, sup):
                    w.writerow([format(float(v), ".17g") for v in row])
            else:
                w.writerow(["t", "node_index", "value"])
                for t, vals in zip(self.times, self.values):
                    ts = format(float(t), ".17g")
                    for i, v in enumerate(vals):
                        w.writerow([ts, i, format(float(v), ".17g")])


def evolve(h: ProcessHandle, tau: float, t: float, u_tau: Field,
           record_every: int = 1) -> Trajectory:
    """Solve from ``(tau, u_tau)`` to ``t``; ``T(tau, tau)`` is the identity."""
    if not u_tau.grid.same_as(h.model.grid):
        raise GridMismatchError("initial field is not on the model grid")
    times, states = [], []
    counter = [0]
    n_stamps = len(time_stamps(tau, t, h.dt))

    def keep(s, u):
        k = counter[0]
        if k % record_every == 0 or k == n_stamps - 1:
            times.append(s)
            states.append(u.copy())
        counter[0] += 1

    integrate(h, tau, t, u_tau.values, keep)
    return Trajectory(np.array(times), np.array(states), h.dt, h.scheme, h.model.grid)


def evolve_final(h: ProcessHandle, tau: float, t: float, u: np.ndarray) -> np.ndarray:
    return integrate(h, tau, t, u)
