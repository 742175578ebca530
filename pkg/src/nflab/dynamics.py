"""Right-hand side of the neural field equation and its certificates.

    du/dt = -a(t) u + b(t) K f(t, u) - h + S(t, x)

Growth and dissipativity constants for ``f`` are supplied as data
(certificates). :func:`validate_certificates` samples for violations; it can
falsify a certificate but never prove one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .expr import TimeExpression, as_expression
from .field import Field, Grid, GridMismatchError
from .kernels import Kernel, conjugate_exponent


class CertificateError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


# -- coefficients -------------------------------------------------------------

@dataclass(frozen=True)
class CoefficientPair:
    """Decay rate ``a(t)`` and gain ``b(t)`` with certified bounds
    ``0 < a_minus <= a(t) <= a_zero`` and ``0 < b(t) <= b_zero``."""

    a: TimeExpression
    b: TimeExpression
    a_minus: float
    a_zero: float
    b_zero: float

    def __post_init__(self):
        object.__setattr__(self, "a", as_expression(self.a))
        object.__setattr__(self, "b", as_expression(self.b))
        if not 0 < self.a_minus <= self.a_zero < math.inf:
            raise CertificateError("need 0 < a_minus <= a_zero < inf")
        if not 0 < self.b_zero < math.inf:
            raise CertificateError("need 0 < b_zero < inf")

    @classmethod
    def constant(cls, a: float = 1.0, b: float = 1.0) -> "CoefficientPair":
        return cls(TimeExpression(a), TimeExpression(b), float(a), float(a), float(b))

    def check(self, window=(-50.0, 50.0), samples: int = 10_000) -> list["ConditionResult"]:
        t = np.linspace(window[0], window[1], samples)
        a, b = self.a(t), self.b(t)
        lo = (a - self.a_minus) / self.a_minus
        hi = (self.a_zero - a) / self.a_zero
        margin_a = np.minimum(lo, hi)
        margin_b = np.minimum(b / self.b_zero, (self.b_zero - b) / self.b_zero)
        out = []
        for name, margin, ok in (("a_bounds", margin_a, margin_a >= -1e-12),
                                 ("b_bounds", margin_b, (b > 0) & (margin_b >= -1e-12))):
            k = int(np.argmin(margin))
            out.append(ConditionResult(name, bool(np.all(ok)), float(margin[k]),
                                       {"t": float(t[k])}))
        return out

    def validate(self, window=(-50.0, 50.0), samples: int = 10_000) -> None:
        for res in self.check(window, samples):
            if not res.passed:
                raise CertificateError(f"{res.name} violated at t={res.witness['t']:.6g}")


# -- firing rates -------------------------------------------------------------

@dataclass(frozen=True)
class FiringRate:
    """Transfer function ``f(t, x)`` with growth/dissipativity certificates.

    ``C1`` covers both the growth of ``f`` and of its derivative, ``C2`` the
    local Lipschitz bound, and ``k1``/``k2`` the linear bound
    ``|f(t,x)| <= k2(t) + k1 |x|``.
    """

    name: str
    fn: Callable
    derivative: Callable | None
    C1: TimeExpression
    C2: TimeExpression
    k1: float
    k2: TimeExpression
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        for key in ("C1", "C2", "k2"):
            object.__setattr__(self, key, as_expression(getattr(self, key)))
        if self.k1 < 0:
            raise CertificateError("k1 must be nonnegative")

    def __call__(self, t, x):
        return self.fn(t, x)

    def d2(self, t, x):
        if self.derivative is None:
            raise CertificateError("derivative unavailable")
        return self.derivative(t, x)

    def with_certificates(self, **certs) -> "FiringRate":
        certs = {k: v for k, v in certs.items() if v is not None}
        if "k1" in certs:
            certs["k1"] = float(certs["k1"])
        return replace(self, **certs)


def _gain(gain):
    g = as_expression(gain)
    if g.is_constant:
        c = g.constant_value
        return g, (lambda t: c)
    return g, g


def _scaled(gain: TimeExpression, value: float) -> TimeExpression:
    if gain.is_constant:
        return TimeExpression(repr(float(abs(gain.constant_value) * value)))
    return TimeExpression(f"({gain.source})*({float(value)!r})")


def zero_rate() -> FiringRate:
    return FiringRate("zero", lambda t, x: np.zeros_like(np.asarray(x, dtype=float)),
                      lambda t, x: np.zeros_like(np.asarray(x, dtype=float)),
                      TimeExpression(0), TimeExpression(0), 0.0, TimeExpression(0))


def tanh_rate(amplitude: float = 1.0, gain_x: float = 1.0, time_gain="1",
              k1: float = 0.1) -> FiringRate:
    """``g(t) * amplitude * tanh(gain_x * x)``; bounded, so any ``k1 > 0`` works."""
    ge, g = _gain(time_gain)
    A, s = float(amplitude), float(gain_x)
    fn = lambda t, x: g(t) * A * np.tanh(s * x)
    df = lambda t, x: g(t) * A * s * (1.0 - np.tanh(s * x) ** 2)
    return FiringRate("tanh", fn, df,
                      _scaled(ge, max(abs(A), abs(A * s))), _scaled(ge, abs(A * s)),
                      k1, _scaled(ge, abs(A)),
                      {"amplitude": A, "gain_x": s, "time_gain": ge.source})


def logistic_rate(beta: float = 1.0, threshold: float = 0.0, amplitude: float = 1.0,
                  time_gain="1", k1: float = 0.1) -> FiringRate:
    ge, g = _gain(time_gain)
    A, beta, th = float(amplitude), float(beta), float(threshold)

    def sig(x):
        return 0.5 * (1.0 + np.tanh(0.5 * beta * (x - th)))

    fn = lambda t, x: g(t) * A * sig(x)
    df = lambda t, x: g(t) * A * beta * sig(x) * (1.0 - sig(x))
    lip = abs(A * beta) / 4.0
    return FiringRate("logistic", fn, df, _scaled(ge, max(abs(A), lip)), _scaled(ge, lip),
                      k1, _scaled(ge, abs(A)),
                      {"beta": beta, "threshold": th, "amplitude": A, "time_gain": ge.source})


def ramp_rate(slope: float = 1.0, threshold: float = 0.0, ceiling: float = 1.0,
              time_gain="1", k1: float = 0.1) -> FiringRate:
    """Linear-saturating ramp ``clip(slope*(x - threshold), 0, ceiling)``.

    Only Lipschitz; the returned derivative is the a.e. one, so Fréchet
    checks are meaningless for this rate.
    """
    ge, g = _gain(time_gain)
    s, th, top = float(slope), float(threshold), float(ceiling)
    if s <= 0 or top <= 0:
        raise ValueError("ramp needs positive slope and ceiling")
    fn = lambda t, x: g(t) * np.clip(s * (np.asarray(x) - th), 0.0, top)

    def df(t, x):
        y = s * (np.asarray(x, dtype=float) - th)
        return g(t) * np.where((y > 0) & (y < top), s, 0.0)

    return FiringRate("ramp", fn, df, _scaled(ge, max(top, s)), _scaled(ge, s), k1,
                      _scaled(ge, top),
                      {"slope": s, "threshold": th, "ceiling": top, "time_gain": ge.source})


def power_rate(scale: float = 1.0, exponent: float = 1.0, time_gain="1") -> FiringRate:
    """``scale * x |x|^(exponent - 1)``.

    Default certificates assume ``exponent <= p``; for ``exponent > 1`` the
    rate is not dissipative and ``k1`` is infinite.
    """
    ge, g = _gain(time_gain)
    c, m = float(scale), float(exponent)
    if m < 1:
        raise ValueError("exponent must be >= 1")
    fn = lambda t, x: g(t) * c * np.asarray(x) * np.abs(x) ** (m - 1.0)
    df = lambda t, x: g(t) * c * m * np.abs(x) ** (m - 1.0)
    # a time-varying gain has no constant slope bound unless the user certifies one
    k1 = abs(c) * abs(g(0.0)) + 0.1 if m == 1 and ge.is_constant else math.inf
    return FiringRate("power", fn, df, _scaled(ge, m * abs(c)), _scaled(ge, m * abs(c)), k1,
                      TimeExpression(0), {"scale": c, "exponent": m, "time_gain": ge.source})


def linear_rate(slope: float = 1.0, k1: float | None = None) -> FiringRate:
    r = power_rate(slope, 1.0)
    r = replace(r, name="linear", params={"slope": float(slope)})
    return r if k1 is None else r.with_certificates(k1=k1)


def polynomial_rate(coefficients, time_gain="1") -> FiringRate:
    """``sum_k c_k x^k``; default certificates assume degree <= p."""
    ge, g = _gain(time_gain)
    c = np.asarray(coefficients, dtype=float)
    poly = np.polynomial.Polynomial(c)
    dpoly = poly.deriv()
    fn = lambda t, x: g(t) * poly(np.asarray(x, dtype=float))
    df = lambda t, x: g(t) * dpoly(np.asarray(x, dtype=float))
    k = np.arange(c.size)
    C1 = max(np.abs(c).sum(), (k * np.abs(c)).sum())
    C2 = (k * np.abs(c)).sum()
    deg = int(np.max(np.flatnonzero(c))) if np.any(c) else 0
    k1 = (abs(c[1]) if c.size > 1 else 0.0) + 0.1 if deg <= 1 else math.inf
    k2 = abs(c[0]) if c.size else 0.0
    return FiringRate("polynomial", fn, df, _scaled(ge, C1), _scaled(ge, C2), k1,
                      _scaled(ge, k2), {"coefficients": c.tolist(), "time_gain": ge.source})


_RATES = {
    "zero": zero_rate,
    "tanh": tanh_rate,
    "logistic": logistic_rate,
    "ramp": ramp_rate,
    "linear": linear_rate,
    "power": power_rate,
    "polynomial": polynomial_rate,
}


def firing_rate(name: str, certificates: dict | None = None, **params) -> FiringRate:
    """Built-in rate by name, optionally overriding its certificates."""
    try:
        factory = _RATES[name]
    except KeyError:
        raise ValueError(f"unknown firing rate {name!r}; choose from {sorted(_RATES)}") from None
    rate = factory(**params)
    return rate.with_certificates(**(certificates or {}))


# -- stimuli ------------------------------------------------------------------

class Stimulus:
    """External input ``S(t, x)`` with a certified ``sup_t ||S(t,.)||_p``.

    ``certify(grid, p)`` returns the certified bound; built-in stimuli
    derive it, user-declared bounds override it.
    """

    def __init__(self, fn: Callable[[float, np.ndarray], np.ndarray], name: str,
                 params: dict | None = None, static: bool = False,
                 certify: Callable[[Grid, float], float] | None = None,
                 norm_bound: float | None = None):
        self._fn = fn
        self.name = name
        self.params = dict(params or {})
        self.static = static
        self._certify = certify
        self.norm_bound = norm_bound
        self._cache: dict = {}

    def values(self, t: float, grid: Grid) -> np.ndarray:
        if self.static:
            key = (grid.extent, grid.points)
            if key not in self._cache:
                v = np.array(np.broadcast_to(self._fn(0.0, grid.nodes), (grid.size,)), dtype=float)
                v.flags.writeable = False
                self._cache[key] = v
            return self._cache[key]
        return np.broadcast_to(np.asarray(self._fn(float(t), grid.nodes), dtype=float),
                               (grid.size,))

    def field(self, t: float, grid: Grid) -> Field:
        return Field(grid, self.values(t, grid))

    def norm(self, t: float, grid: Grid, p: float = 2.0) -> float:
        return grid.norm(self.values(t, grid), p)

    def certified_norm(self, grid: Grid, p: float = 2.0) -> float:
        if self.norm_bound is not None:
            return float(self.norm_bound)
        if self._certify is None:
            raise CertificateError(f"stimulus {self.name!r} has no certified norm")
        return float(self._certify(grid, p))

    def with_bound(self, norm_bound: float | None) -> "Stimulus":
        return Stimulus(self._fn, self.name, self.params, self.static, self._certify, norm_bound)

    def __add__(self, other: "Stimulus") -> "Stimulus":
        f, g = self._fn, other._fn
        cert = None
        if self._has_cert() and other._has_cert():
            cert = lambda grid, p: self.certified_norm(grid, p) + other.certified_norm(grid, p)
        return Stimulus(lambda t, x: f(t, x) + g(t, x), f"({self.name}+{other.name})",
                        {"terms": [self.params, other.params]},
                        self.static and other.static, cert)

    def __mul__(self, alpha: float) -> "Stimulus":
        alpha = float(alpha)
        f = self._fn
        cert = (lambda grid, p: abs(alpha) * self.certified_norm(grid, p)) if self._has_cert() else None
        return Stimulus(lambda t, x: alpha * f(t, x), f"{alpha!r}*{self.name}",
                        {"scale": alpha, "base": self.params}, self.static, cert)

    __rmul__ = __mul__

    def _has_cert(self) -> bool:
        return self.norm_bound is not None or self._certify is not None

    def __repr__(self) -> str:
        return f"Stimulus({self.name}, {self.params})"


_CERT_PAD = 1.0 + 1e-12


def zero_stimulus() -> Stimulus:
    return Stimulus(lambda t, x: np.zeros(x.shape[0]), "zero", static=True,
                    certify=lambda grid, p: 0.0)


def constant_stimulus(value: float) -> Stimulus:
    c = float(value)
    return Stimulus(lambda t, x: np.full(x.shape[0], c), "constant", {"value": c}, static=True,
                    certify=lambda grid, p: abs(c) * grid.measure ** (1.0 / p) * _CERT_PAD)


def sinusoidal_stimulus(amplitude: float = 1.0, omega: float = 1.0, phase: float = 0.0,
                        offset: float = 0.0) -> Stimulus:
    """Spatially uniform ``offset + amplitude * sin(omega t + phase)``."""
    A, w, ph, c = float(amplitude), float(omega), float(phase), float(offset)
    return Stimulus(lambda t, x: np.full(x.shape[0], c + A * math.sin(w * t + ph)),
                    "sinusoidal", {"amplitude": A, "omega": w, "phase": ph, "offset": c},
                    static=(A == 0 or w == 0),
                    certify=lambda grid, p: (abs(c) + abs(A)) * grid.measure ** (1.0 / p) * _CERT_PAD)


def bump_stimulus(amplitude: float = 1.0, center=0.5, width: float = 0.1,
                  velocity=0.0) -> Stimulus:
    """Gaussian bump ``A exp(-|x - c - v t|^2 / (2 w^2))``, static when ``v = 0``.

    The certified norm is the lattice sum of the bump over the infinite grid
    (Poisson summation), which bounds every truncated trapezoid sum.
    """
    A, w = float(amplitude), float(width)
    c0 = np.atleast_1d(np.asarray(center, dtype=float))
    v = np.atleast_1d(np.asarray(velocity, dtype=float))
    if w <= 0:
        raise ValueError("bump width must be positive")

    def fn(t, x):
        c = c0 + v * t
        d = x - c[: x.shape[1]] if c.size > 1 else x - c[0]
        return A * np.exp(-np.sum(d * d, axis=1) / (2.0 * w * w))

    def certify(grid: Grid, p: float) -> float:
        sigma = w / math.sqrt(p)
        total = 1.0
        for h in grid.spacing:
            k = np.arange(1, 50)
            theta = 1.0 + 2.0 * np.sum(np.exp(-2.0 * np.pi**2 * k**2 * sigma**2 / h**2))
            total *= math.sqrt(2.0 * np.pi) * sigma * theta
        return abs(A) * total ** (1.0 / p) * _CERT_PAD

    return Stimulus(fn, "bump", {"amplitude": A, "center": c0.tolist(), "width": w,
                                 "velocity": v.tolist()},
                    static=not np.any(v), certify=certify)


# -- model --------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    grid: Grid
    kernel: Kernel
    coefficients: CoefficientPair
    rate: FiringRate
    stimulus: Stimulus
    h: float = 0.0
    p: float = 2.0

    def __post_init__(self):
        if not self.kernel.grid.same_as(self.grid):
            raise GridMismatchError("kernel grid differs from model grid")
        if self.h < 0:
            raise ValueError("threshold h must be nonnegative")
        if not 1 <= self.p < math.inf:
            raise ValueError("p must be finite and >= 1")

    @property
    def dissipative(self) -> bool:
        """Gate ``k1 * b0 < a_minus`` required by the attractor machinery."""
        return self.rate.k1 * self.coefficients.b_zero < self.coefficients.a_minus

    @property
    def q(self) -> float:
        return conjugate_exponent(self.p)

    def with_stimulus(self, stimulus: Stimulus) -> "ModelSpec":
        return replace(self, stimulus=stimulus)

    def forcing(self, t: float) -> np.ndarray:
        """``-h + S(t, .)`` at the nodes."""
        return self.stimulus.values(t, self.grid) - self.h

    def nonlinear(self, t: float, u: np.ndarray) -> np.ndarray:
        """``b(t) K f(t, u) - h + S(t, .)`` for a batch of states."""
        fu = np.asarray(self.rate(t, u), dtype=float)
        _check_finite(fu, "f(t,u)", t)
        kf = self.kernel.apply(fu)
        _check_finite(kf, "K f(t,u)", t)
        return self.coefficients.b(t) * kf + self.forcing(t)

    def rhs(self, t: float, u: np.ndarray) -> np.ndarray:
        out = -self.coefficients.a(t) * u + self.nonlinear(t, u)
        _check_finite(out, "F(t,u)", t)
        return out


def _check_finite(values: np.ndarray, stage: str, t: float) -> None:
    if not np.all(np.isfinite(values)):
        idx = np.flatnonzero(~np.isfinite(values.reshape(-1, values.shape[-1])).any(axis=0))[0]
        raise NonFiniteError(f"non-finite {stage} at node {int(idx)}, t={t:.6g}")


def rhs_F(model: ModelSpec, t: float, u: Field) -> Field:
    if not u.grid.same_as(model.grid):
        raise GridMismatchError("field is not on the model grid")
    return Field(model.grid, model.rhs(t, u.values))


def lipschitz_majorant(model: ModelSpec, t: float, rho_u: float, rho_v: float) -> float:
    """Lipschitz constant of ``F(t, .)`` on the pair of L^p balls of radii
    ``rho_u`` and ``rho_v``: ``a0 + b0 C2(t) ||J||_p (|Omega|^(1/q) + rho_u^(p/q) + rho_v^(p/q))``."""
    if rho_u < 0 or rho_v < 0 or not (math.isfinite(rho_u) and math.isfinite(rho_v)):
        raise ValueError("radii must be finite and nonnegative")
    c = model.coefficients
    C2 = model.rate.C2(t)
    if C2 == 0:
        return c.a_zero
    p, q = model.p, model.q
    if math.isinf(q):
        bracket = 3.0
    else:
        bracket = model.grid.measure ** (1.0 / q) + rho_u ** (p / q) + rho_v ** (p / q)
    return c.a_zero + c.b_zero * C2 * model.kernel.norm(p) * bracket


def frechet_derivative(model: ModelSpec, t: float, u: Field, v: Field) -> Field:
    """``DF(t,u) v = -a(t) v + b(t) K(d2f(t,u) v)``."""
    for w in (u, v):
        if not w.grid.same_as(model.grid):
            raise GridMismatchError("field is not on the model grid")
    return Field(model.grid, frechet_apply(model, t, u.values, v.values))


def frechet_apply(model: ModelSpec, t: float, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    d = np.asarray(model.rate.d2(t, u), dtype=float)
    return -model.coefficients.a(t) * v + model.coefficients.b(t) * model.kernel.apply(d * v)


def estimate_k1(rate: FiringRate, t: float = 0.0, x_range=(10.0, 1e4),
                samples: int = 2000) -> float:
    """Sampled ``max |f(t,x)| / |x|`` over ``x_range <= |x|`` (both signs).

    A lower bound for the ``k1`` a certificate must exceed.
    """
    lo, hi = x_range
    if lo < 1 or hi < lo:
        raise ValueError("x_range must satisfy 1 <= lo <= hi")
    x = np.geomspace(lo, hi, samples)
    vals = np.maximum(np.abs(rate(t, x)), np.abs(rate(t, -x))) / x
    return float(np.max(vals))


# -- certificate validation ---------------------------------------------------

@dataclass
class ConditionResult:
    name: str
    passed: bool
    worst_margin: float
    witness: dict

    def line(self) -> str:
        wit = ",".join(f"{k}:{v:.6g}" for k, v in self.witness.items())
        return (f"{self.name} {'PASS' if self.passed else 'FAIL'} "
                f"worst_margin={self.worst_margin:.6g} witness={wit or 'none'}")


@dataclass
class CertificateReport:
    conditions: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    @property
    def failures(self) -> list:
        return [c for c in self.conditions if not c.passed]

    def __getitem__(self, name: str) -> ConditionResult:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)


_REL_TOL = 1e-12


def _margin(lhs: np.ndarray, bound: np.ndarray):
    """Relative margins and pass mask for ``lhs <= bound``."""
    lhs = np.asarray(lhs, dtype=float)
    bound = np.broadcast_to(np.asarray(bound, dtype=float), lhs.shape)
    ok = lhs <= bound * (1.0 + _REL_TOL) + 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        margin = np.where(bound > 0, (bound - lhs) / bound, np.where(lhs <= 0, 0.0, -np.inf))
    return margin, ok


def _condition(name, lhs, bound, witness_arrays: dict) -> ConditionResult:
    margin, ok = _margin(lhs, bound)
    k = int(np.argmin(margin)) if margin.size else 0
    wit = {key: float(np.ravel(arr)[k]) for key, arr in witness_arrays.items()}
    return ConditionResult(name, bool(np.all(ok)), float(np.ravel(margin)[k]), wit)


def _x_samples(x_max: float, n: int) -> np.ndarray:
    pos = np.geomspace(1e-3, x_max, n)
    return np.concatenate([-pos[::-1], [0.0], pos, np.linspace(-10, 10, 81)])


def _monotone(name: str, expr: TimeExpression, t: np.ndarray) -> ConditionResult:
    v = np.broadcast_to(expr(t), t.shape)
    d = np.diff(v)
    scale = max(1.0, float(np.max(np.abs(v))))
    margin = d / scale
    k = int(np.argmin(margin)) if margin.size else 0
    ok = bool(np.all(d >= -_REL_TOL * scale))
    return ConditionResult(name, ok, float(margin[k]) if margin.size else 0.0,
                           {"t": float(t[k])} if margin.size else {})


def validate_certificates(model: ModelSpec, window=(-50.0, 50.0), samples: int = 10_000,
                          x_max: float = 1e3, seed: int = 0) -> CertificateReport:
    """Sample every certified condition on ``window`` and report margins.

    Margins are relative, ``(bound - lhs) / bound``; negative means violated.
    Conditions: Cf1, Cf2, Condf (derivative growth), dissip2 (linear bound),
    dissip1_k1 (sampled slope below k1), monotonicity of C1, C2, k2,
    coefficient bounds and the stimulus norm certificate.
    """
    rate, p = model.rate, model.p
    t_f = np.linspace(window[0], window[1], 21)
    xs = _x_samples(x_max, 150)
    T, X = np.meshgrid(t_f, xs, indexing="ij")
    F = np.broadcast_to(np.asarray(rate(T, X), dtype=float), X.shape)
    C1 = np.broadcast_to(rate.C1(T), X.shape)
    C2 = np.broadcast_to(rate.C2(T), X.shape)
    k2 = np.broadcast_to(rate.k2(T), X.shape)
    absX = np.abs(X)
    out = [_condition("Cf1", np.abs(F), C1 * (1.0 + absX**p), {"t": T, "x": X})]

    rng = np.random.default_rng(seed)
    n_pairs = 4000
    ti = rng.choice(t_f, n_pairs)
    xa = rng.choice(xs, n_pairs)
    xb = np.where(rng.random(n_pairs) < 0.5, rng.choice(xs, n_pairs),
                  xa + rng.standard_normal(n_pairs) * 1e-3 * (1 + np.abs(xa)))
    fa = np.broadcast_to(np.asarray(rate(ti, xa), dtype=float), xa.shape)
    fb = np.broadcast_to(np.asarray(rate(ti, xb), dtype=float), xb.shape)
    c2 = np.broadcast_to(rate.C2(ti), xa.shape)
    bound = c2 * (1.0 + np.abs(xa) ** (p - 1) + np.abs(xb) ** (p - 1)) * np.abs(xa - xb)
    out.append(_condition("Cf2", np.abs(fa - fb), bound, {"t": ti, "x": xa, "y": xb}))

    if rate.derivative is not None:
        D = np.broadcast_to(np.asarray(rate.d2(T, X), dtype=float), X.shape)
        out.append(_condition("Condf", np.abs(D), C1 * (1.0 + absX ** (p - 1)),
                              {"t": T, "x": X}))
    else:
        out.append(ConditionResult("Condf", True, math.nan, {"skipped": 1.0}))

    if math.isinf(rate.k1):
        # no linear bound claimed
        out.append(ConditionResult("dissip2", True, math.inf, {"k1": math.inf}))
    else:
        out.append(_condition("dissip2", np.abs(F), k2 + rate.k1 * absX, {"t": T, "x": X}))
    # limsup condition: only the tail of |f|/|x| matters
    tail = (max(1.0, x_max), max(1.0, x_max) * 1e3)
    emp = max(estimate_k1(rate, float(t), tail) for t in t_f)
    if math.isinf(rate.k1):
        out.append(ConditionResult("dissip1_k1", True, math.inf, {"k1_sampled": emp}))
    else:
        out.append(_condition("dissip1_k1", np.array([emp]), np.array([rate.k1]),
                              {"k1_sampled": np.array([emp])}))

    t_mono = np.linspace(window[0], window[1], 2001)
    out.append(_monotone("C1_monotone", rate.C1, t_mono))
    out.append(_monotone("C2_monotone", rate.C2, t_mono))
    out.append(_monotone("k2_monotone", rate.k2, t_mono))

    out.extend(model.coefficients.check(window, samples))

    t_s = np.linspace(window[0], window[1], 201)
    try:
        cert = model.stimulus.certified_norm(model.grid, p)
        norms = np.array([model.stimulus.norm(t, model.grid, p) for t in t_s])
        out.append(_condition("stimulus_norm", norms, np.full_like(norms, cert), {"t": t_s}))
    except CertificateError:
        out.append(ConditionResult("stimulus_norm", False, -math.inf, {"missing": 1.0}))
    return CertificateReport(out)
