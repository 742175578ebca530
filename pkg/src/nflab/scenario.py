"""Scenario files: INI-style sections describing one model and one experiment.

Example::

    [scenario]
    name = fixed_point
    experiment = attractor
    seed = 7

    [grid]
    extent = 1.0
    points = 256

    [kernel]
    type = constant

    [firing_rate]
    name = linear
    slope = 0.5
    k1 = 0.6

    [stimulus]
    type = constant
    value = 1.0

    [experiment]
    t = 0
    horizons = 10, 20, 30

Unknown sections or keys are rejected. Certificates are checked while
parsing, so a broken scenario fails before any simulation runs.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import kernels as _k
from .attractor import DissipationBudget, random_ball
from .dynamics import (CertificateError, CertificateReport, CoefficientPair, ModelSpec,
                       Stimulus, bump_stimulus, constant_stimulus, firing_rate,
                       sinusoidal_stimulus, validate_certificates, zero_stimulus)
from .expr import ExpressionError, TimeExpression
from .field import Field, Grid, read_field_csv
from .integrator import ProcessHandle

EXPERIMENTS = ("evolve", "envelope", "attractor", "continuity", "usc", "kernel_bounds",
               "certificates")
GATED = ("envelope", "attractor", "usc")
RANDOMIZED = ("envelope", "attractor", "usc", "kernel_bounds")


class ScenarioError(ValueError):
    """Configuration problem; ``line`` is the 1-based source line when known."""

    def __init__(self, message: str, line: int | None = None, path=None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line else f"{path}: "
        elif line:
            where = f"line {line}: "
        super().__init__(where + message)
        self.line = line


# -- value converters ---------------------------------------------------------

def _float(s: str) -> float:
    s = s.strip()
    if s.lower() in ("inf", "infinity"):
        return math.inf
    try:
        return float(s)
    except ValueError:
        # allow constant expressions such as "exp(-3)" or "pi/2"
        e = TimeExpression(s)
        if not e.is_constant:
            raise ValueError(f"expected a number, got {s!r}") from None
        return e.constant_value


def _int(s: str) -> int:
    return int(s.strip())


def _floats(s: str) -> list[float]:
    return [_float(x) for x in s.split(",") if x.strip()]


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _str(s: str) -> str:
    return s.strip()


def _expr(s: str) -> TimeExpression:
    return TimeExpression(s.strip())


def _scalar_or_list(s: str):
    vals = _floats(s)
    return vals[0] if len(vals) == 1 else vals


SCHEMA: dict[str, dict] = {
    "scenario": {"name": _str, "experiment": _str, "seed": _int,
                 "validation_window": _floats, "delta": _float},
    "grid": {"extent": _scalar_or_list, "points": _scalar_or_list},
    "kernel": {"type": _str, "method": _str, "sigma": _float, "amplitude": _float,
               "sigma_exc": _float, "sigma_inh": _float, "amp_exc": _float,
               "amp_inh": _float, "radius": _float, "value": _float, "path": _str},
    "coefficients": {"a": _expr, "b": _expr, "a_minus": _float, "a_zero": _float,
                     "b_zero": _float},
    "firing_rate": {"name": _str, "amplitude": _float, "gain_x": _float, "time_gain": _str,
                    "beta": _float, "threshold": _float, "slope": _float, "ceiling": _float,
                    "scale": _float, "exponent": _float, "coefficients": _floats,
                    "k1": _float, "C1": _expr, "C2": _expr, "k2": _expr},
    "stimulus": {"type": _str, "value": _float, "amplitude": _float, "omega": _float,
                 "phase": _float, "offset": _float, "center": _scalar_or_list,
                 "width": _float, "velocity": _scalar_or_list, "norm_bound": _float},
    "model": {"h": _float, "p": _float},
    "integrator": {"scheme": _str, "dt": _float, "blowup": _float},
    "experiment": {"tau": _float, "t_end": _float, "t": _float, "L": _float,
                   "initial": _str, "record_every": _int, "deltas": _floats,
                   "ensemble_size": _int, "radius": _float, "initial_radius": _float,
                   "horizons": _floats, "levels": _floats, "horizon": _float,
                   "trials": _int, "p_values": _floats, "expect_value": _float,
                   "expect_expression": _str, "expect_ratio": _float,
                   "expect_linear": _bool, "tolerance": _float, "spread": _bool},
}
SCHEMA["perturbation"] = SCHEMA["stimulus"]

RATE_PARAMS = {"amplitude", "gain_x", "time_gain", "beta", "threshold", "slope", "ceiling",
               "scale", "exponent", "coefficients"}
REQUIRED = {"scenario": ("name", "experiment"), "grid": ("points",)}


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    lines: dict[tuple[str, str], int] = {}
    section = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"^\[([^\]]+)\]$", line)
        if m:
            section = m.group(1).strip()
            lines[(section, "")] = n
        elif section and line and line[0] not in "#;" and ("=" in line or ":" in line):
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip()
            lines[(section, key)] = n
    return lines


# -- scenario -------------------------------------------------------------------

@dataclass
class Scenario:
    name: str
    experiment: str
    seed: int | None
    model: ModelSpec
    scheme: str = "exponential"
    dt: float = 0.01
    blowup: float = 1e12
    delta: float = 1.0
    window: tuple = (-50.0, 50.0)
    perturbation: Stimulus | None = None
    params: dict = field(default_factory=dict)
    certificates: CertificateReport | None = None
    path: Path | None = None

    def handle(self, model: ModelSpec | None = None) -> ProcessHandle:
        return ProcessHandle(model or self.model, self.scheme, self.dt, self.blowup)

    def budget(self, delta: float | None = None) -> DissipationBudget:
        return DissipationBudget.from_model(self.model, self.delta if delta is None else delta)

    def get(self, key: str, default=None):
        return self.params.get(key, default)

    def require(self, key: str):
        if key not in self.params:
            raise ScenarioError(f"experiment {self.experiment!r} needs [experiment] {key}",
                                path=self.path)
        return self.params[key]

    def with_overrides(self, dt: float | None = None, seed: int | None = None) -> "Scenario":
        out = self
        if dt is not None:
            if not dt > 0:
                raise ScenarioError("dt must be positive")
            out = replace(out, dt=float(dt))
        if seed is not None:
            out = replace(out, seed=int(seed))
        return out

    def initial_field(self, spec: str | None = None, stream: str = "initial") -> Field:
        return parse_initial(spec or self.get("initial", "constant:0"), self.model.grid,
                             self.model.p, self.seed, self.path, stream)


def parse_initial(spec: str, grid: Grid, p: float = 2.0, seed: int | None = None,
                  base: Path | None = None, stream: str = "initial") -> Field:
    """``constant:c``, ``random:r`` (uniform in the L^p ball of radius r),
    ``bump:a,c,w`` or ``csv:path``."""
    kind, _, arg = spec.partition(":")
    kind = kind.strip()
    try:
        if kind == "constant":
            return grid.constant(_float(arg))
        if kind == "random":
            if seed is None:
                raise ScenarioError("seed required for a random initial condition")
            return Field(grid, random_ball(grid, _float(arg), 1, p, seed, stream)[0])
        if kind == "bump":
            a, c, w = _floats(arg)
            return bump_stimulus(a, c, w).field(0.0, grid)
        if kind == "csv":
            path = Path(arg.strip())
            if base is not None and not path.is_absolute():
                path = Path(base).parent / path
            return read_field_csv(path, grid)
    except ScenarioError:
        raise
    except (ValueError, OSError) as exc:
        raise ScenarioError(f"bad initial condition {spec!r}: {exc}") from exc
    raise ScenarioError(f"unknown initial condition kind {kind!r}")


def _build_grid(sec: dict) -> Grid:
    return Grid.uniform(sec.get("extent", 1.0), sec["points"])


def _build_kernel(sec: dict, grid: Grid, base: Path | None) -> _k.Kernel:
    kind = sec.pop("type", "gaussian")
    method = sec.pop("method", "auto")
    if kind == "csv":
        path = Path(sec.pop("path"))
        if base is not None and not path.is_absolute():
            path = base.parent / path
        if sec:
            raise TypeError(f"unexpected keys {sorted(sec)}")
        return _k.read_kernel_csv(path, grid)
    factories = {"gaussian": _k.gaussian_kernel, "mexican_hat": _k.mexican_hat_kernel,
                 "bump": _k.bump_kernel, "constant": _k.constant_kernel}
    if kind not in factories:
        raise ValueError(f"unknown kernel type {kind!r}")
    return factories[kind](grid, method=method, **sec)


def _build_stimulus(sec: dict) -> Stimulus:
    kind = sec.pop("type", "zero")
    bound = sec.pop("norm_bound", None)
    factories = {"zero": zero_stimulus, "constant": constant_stimulus,
                 "sinusoidal": sinusoidal_stimulus, "bump": bump_stimulus}
    if kind not in factories:
        raise ValueError(f"unknown stimulus type {kind!r}")
    s = factories[kind](**sec)
    return s.with_bound(bound) if bound is not None else s


def _build_coefficients(sec: dict) -> CoefficientPair:
    a = sec.get("a", TimeExpression(1.0))
    b = sec.get("b", TimeExpression(1.0))

    def bound(key, expr):
        if key in sec:
            return sec[key]
        if expr.is_constant:
            return expr.constant_value
        raise ValueError(f"{key} is required when the coefficient is time dependent")

    return CoefficientPair(a, b, bound("a_minus", a), bound("a_zero", a), bound("b_zero", b))


def parse_scenario(path, text: str | None = None) -> Scenario:
    """Read and fully validate a scenario file."""
    path = Path(path)
    if text is None:
        try:
            text = path.read_text()
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario: {exc}", path=path) from exc
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(path))
    except configparser.MissingSectionHeaderError as exc:
        raise ScenarioError("key outside any section", exc.lineno, path) from exc
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ScenarioError("syntax error", line, path) from exc
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ScenarioError(exc.message.split(": ", 1)[-1], exc.lineno, path) from exc

    lines = _key_lines(text)
    raw: dict[str, dict] = {}
    for name in cp.sections():
        if name not in SCHEMA:
            raise ScenarioError(f"unknown section [{name}]", lines.get((name, "")), path)
        schema = SCHEMA[name]
        raw[name] = {}
        for key, value in cp.items(name):
            line = lines.get((name, key))
            if key not in schema:
                raise ScenarioError(f"unknown key {key!r} in [{name}]", line, path)
            try:
                raw[name][key] = schema[key](value)
            except (ValueError, ExpressionError) as exc:
                raise ScenarioError(f"[{name}] {key}: {exc}", line, path) from exc
    for name, keys in REQUIRED.items():
        for key in keys:
            if key not in raw.get(name, {}):
                raise ScenarioError(f"missing [{name}] {key}", path=path)

    head = raw["scenario"]
    experiment = head["experiment"]
    if experiment not in EXPERIMENTS:
        raise ScenarioError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}",
                            lines.get(("scenario", "experiment")), path)

    def build(section, fn, *args):
        try:
            return fn(dict(raw.get(section, {})), *args)
        except (ValueError, TypeError, CertificateError, OSError) as exc:
            raise ScenarioError(f"[{section}] {exc}", lines.get((section, "")), path) from exc

    grid = build("grid", _build_grid)
    kernel = build("kernel", _build_kernel, grid, path)
    coefficients = build("coefficients", _build_coefficients)

    def make_rate(sec):
        name = sec.pop("name", "zero")
        certs = {k: sec.pop(k) for k in ("C1", "C2", "k2") if k in sec}
        if "k1" in sec and name not in ("tanh", "logistic", "ramp", "linear"):
            certs["k1"] = sec.pop("k1")
        unknown = set(sec) - RATE_PARAMS - {"k1"}
        if unknown:
            raise ValueError(f"unexpected keys {sorted(unknown)}")
        return firing_rate(name, certs, **sec)

    rate = build("firing_rate", make_rate)
    stimulus = build("stimulus", _build_stimulus)
    perturbation = build("perturbation", _build_stimulus) if "perturbation" in raw else None
    model = build("model", lambda sec: ModelSpec(grid, kernel, coefficients, rate, stimulus,
                                                 sec.get("h", 0.0), sec.get("p", 2.0)))
    integ = raw.get("integrator", {})
    scheme = integ.get("scheme", "exponential")
    if scheme not in ("exponential", "rk4"):
        raise ScenarioError(f"unknown scheme {scheme!r}", lines.get(("integrator", "scheme")), path)
    dt = integ.get("dt", 0.01)
    if not dt > 0:
        raise ScenarioError("dt must be positive", lines.get(("integrator", "dt")), path)

    seed = head.get("seed")
    params = raw.get("experiment", {})
    if seed is None and (experiment in RANDOMIZED
                         or str(params.get("initial", "")).startswith("random")):
        raise ScenarioError(f"seed is required for experiment {experiment!r}", path=path)
    if experiment in GATED and not model.dissipative:
        raise ScenarioError("k1*b0 >= a_minus: attractor experiments disabled",
                            lines.get(("firing_rate", "k1")) or lines.get(("firing_rate", "")),
                            path)
    if experiment in ("continuity", "usc") and perturbation is None:
        raise ScenarioError(f"experiment {experiment!r} needs a [perturbation] section", path=path)

    window = tuple(head.get("validation_window", (-50.0, 50.0)))
    if len(window) != 2 or not window[0] < window[1]:
        raise ScenarioError("validation_window needs two increasing values",
                            lines.get(("scenario", "validation_window")), path)
    delta = head.get("delta", 1.0)
    if not delta > 0:
        raise ScenarioError("delta must be positive", lines.get(("scenario", "delta")), path)
    report = validate_certificates(model, window)
    return Scenario(head["name"], experiment, seed, model, scheme, dt,
                    integ.get("blowup", 1e12), delta, window, perturbation, dict(params),
                    report, path)
