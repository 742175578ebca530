"""Experiment dispatch for parsed scenarios.

Every run writes CSV artifacts plus ``summary.txt`` (one ``key=value`` line
per check) into the output directory and returns an exit status: 0 when all
checks pass, 1 when one fails. Configuration problems raise ScenarioError,
which the command line maps to status 2.
"""

from __future__ import annotations

import csv
import math
import warnings
from pathlib import Path

import numpy as np

from .attractor import (ConvergenceWarning, absorbing_radius,
                        continuity_gap, decay_envelope_check, random_ball,
                        sample_attractor_section, upper_semicontinuity_curve)
from .dynamics import CertificateReport
from .expr import TimeExpression
from .field import Field, write_field_csv
from .integrator import BlowUpError, evolve
from .kernels import INEQUALITIES, verify_kernel_bounds
from .scenario import Scenario

DEFAULT_TOL = 1e-6


def fmt(v) -> str:
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    if v is None:
        return "none"
    return str(v).replace(" ", "_")


class Summary:
    """Collects check records; each becomes one line of ``summary.txt``."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.records: list[dict] = []

    def add(self, check: str, passed: bool, **info) -> None:
        rec = {"scenario": self.scenario.name, "experiment": self.scenario.experiment,
               "check": check, "status": "pass" if passed else "fail"}
        rec.update(info)
        self.records.append(rec)

    @property
    def passed(self) -> bool:
        return all(r["status"] == "pass" for r in self.records)

    def lines(self) -> list[str]:
        return [" ".join(f"{k}={fmt(v)}" for k, v in r.items()) for r in self.records]

    def write(self, out_dir: Path) -> None:
        (out_dir / "summary.txt").write_text("".join(line + "\n" for line in self.lines()))


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt_csv(v) for v in row])


def fmt_csv(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return ""
    return str(v)


def _level_tag(x: float) -> str:
    return format(x, "g").replace(".", "p").replace("-", "m")


# -- certificates -------------------------------------------------------------

def _write_certificates(report: CertificateReport, out_dir: Path) -> None:
    rows = []
    for c in report.conditions:
        wit = ";".join(f"{k}:{float(v):.17g}" for k, v in c.witness.items())
        rows.append((c.name, int(c.passed), c.worst_margin, wit))
    _write_rows(out_dir / "certificates.csv", ["condition", "passed", "worst_margin", "witness"],
                rows)


def _certificate_summary(s: Scenario, summary: Summary) -> None:
    rep = s.certificates
    failed = [c.name for c in rep.failures]
    worst = min((c.worst_margin for c in rep.conditions if math.isfinite(c.worst_margin)),
                default=0.0)
    info = {"failed": ",".join(failed) if failed else None, "worst_margin": worst}
    if failed:
        wit = rep.failures[0].witness
        info.update({f"witness_{k}": float(v) for k, v in wit.items()})
    summary.add("certificates", not failed, **info)


# -- experiments ----------------------------------------------------------------

def run_evolve(s: Scenario, out: Path, summary: Summary, summary_only: bool, figures: bool):
    tau = s.get("tau", 0.0)
    t_end = s.require("t_end")
    u0 = s.initial_field()
    traj = evolve(s.handle(), tau, t_end, u0, s.get("record_every", 1))
    p = s.model.p
    if not summary_only:
        traj.write_csv(out / "trajectory.csv")
    traj.write_csv(out / "norms.csv", summary=True, p=p)
    uT = traj.final
    grid = s.model.grid
    write_field_csv(uT, out / "final_field.csv")
    norms = traj.norms(p)
    info = {"t_end": t_end, "final_norm": norms[-1], "initial_norm": norms[0]}
    tol = s.get("tolerance", DEFAULT_TOL)
    checks = []
    if "expect_ratio" in s.params:
        target = s.params["expect_ratio"] * u0.values
        ref = grid.norm(target, p)
        err = grid.norm(uT.values - target, p) / ref if ref > 0 else grid.norm(uT.values, p)
        checks.append(("expect_ratio", err <= tol, {"rel_error": err, "tolerance": tol}))
    if "expect_value" in s.params:
        err = float(np.max(np.abs(uT.values - s.params["expect_value"])))
        checks.append(("expect_value", err <= tol, {"sup_error": err, "tolerance": tol}))
    if "expect_expression" in s.params:
        val = float(TimeExpression(s.params["expect_expression"])(t_end))
        err = float(np.max(np.abs(uT.values - val)))
        checks.append(("expect_expression", err <= tol, {"sup_error": err, "tolerance": tol}))
    summary.add("evolve", True, **info)
    for name, ok, extra in checks:
        summary.add(name, ok, **extra)
    if figures:
        from . import plotting
        plotting.norms_figure(traj.times, norms, out / "norms.png", p, s.name)
        plotting.profile_figure(_x(grid), traj.values[:: max(1, len(traj.values) // 10)],
                                out / "profiles.png", "u(t, x)")


def _x(grid):
    return grid.axes[0] if grid.dimension == 1 else grid.shape


def envelope_ensemble(s: Scenario) -> list[Field]:
    grid, p = s.model.grid, s.model.p
    if "initial" in s.params:
        return [s.initial_field()]
    n = s.get("ensemble_size", 50)
    radius = s.require("radius")
    U = random_ball(grid, radius, n, p, s.seed, "envelope")
    if s.get("spread", True):
        U = U * ((np.arange(n) + 1.0) / n)[:, None]
    return [Field(grid, u) for u in U]


def run_envelope(s: Scenario, out: Path, summary: Summary, summary_only: bool, figures: bool):
    tau = s.get("tau", 0.0)
    t_end = s.require("t_end")
    members = envelope_ensemble(s)
    every = s.get("record_every", 10)
    member_rows = []
    for delta in s.get("deltas", [s.delta]):
        budget = s.budget(delta)
        rep = decay_envelope_check(s.handle(), budget, tau, t_end, members)
        tag = _level_tag(delta)
        rows = np.array(rep.rows, dtype=float)
        n_members = len(members)
        stamp = (np.arange(len(rows)) // n_members)
        keep = rows[stamp % every == 0] if len(rows) else rows
        if not summary_only:
            _write_rows(out / f"envelope_delta_{tag}.csv",
                        ["member", "t", "norm", "radius", "envelope", "outside"],
                        [(int(r[0]), r[1], r[2], r[3], r[4], int(r[5])) for r in keep])
        for k, m in enumerate(members):
            member_rows.append((delta, k, m.grid.norm(m.values, budget.p),
                                rep.entry_times[k], rep.reexits[k]))
        summary.add(f"envelope_delta_{delta:g}", rep.passed, delta=delta,
                    radius=absorbing_radius(budget, tau), worst_margin=rep.worst_margin,
                    violations=len(rep.violations),
                    reexits=sum(e is not None for e in rep.reexits),
                    witness_t=rep.witness_time)
        if figures and len(keep):
            from . import plotting
            plotting.envelope_figure(keep, out / f"envelope_delta_{tag}.png", delta)
    _write_rows(out / "envelope_members.csv",
                ["delta", "member", "initial_norm", "entry_time", "reexit_time"], member_rows)


def run_attractor(s: Scenario, out: Path, summary: Summary, summary_only: bool, figures: bool):
    t = s.get("t", 0.0)
    horizons = s.require("horizons")
    budget = s.budget()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        sec = sample_attractor_section(s.handle(), budget, t, horizons,
                                       s.get("ensemble_size", 20), s.seed,
                                       initial_radius=s.get("initial_radius"))
        with_warn = [w for w in caught if issubclass(w.category, ConvergenceWarning)]
    grid, p = s.model.grid, s.model.p
    _write_rows(out / "horizon_gaps.csv", ["horizon_from", "horizon_to", "gap"],
                [(a, b, g) for a, b, g in zip(sec.horizons, sec.horizons[1:], sec.gaps)])
    if not summary_only:
        _write_rows(out / "section.csv", ["member", "node_index", "value"],
                    [(k, i, v) for k, m in enumerate(sec.members) for i, v in enumerate(m.values)])
    norms = [m.grid.norm(m.values, p) for m in sec.members]
    rows = []
    for delta in s.get("deltas", [0.1, 1.0, 10.0]):
        R = absorbing_radius(budget.with_delta(delta), t)
        rows.append((delta, R, max(norms), int(max(norms) <= R * (1 + 1e-6))))
    _write_rows(out / "containment.csv", ["delta", "radius", "max_member_norm", "contained"], rows)
    summary.add("section", True, t=t, horizon=sec.horizon, members=len(sec.members),
                ensemble=sec.ensemble_size, initial_radius=sec.initial_radius,
                last_gap=sec.last_gap, converged=not with_warn)
    summary.add("gaps_nonincreasing", sec.gaps_nonincreasing,
                gaps=",".join(format(g, ".3g") for g in sec.gaps))
    summary.add("containment", all(r[3] for r in rows),
                worst_ratio=max(r[2] / r[1] for r in rows))
    tol = s.get("tolerance", DEFAULT_TOL)
    target = None
    if "expect_value" in s.params:
        target = s.params["expect_value"]
    elif "expect_expression" in s.params:
        target = float(TimeExpression(s.params["expect_expression"])(t))
    if target is not None:
        err = max(float(np.max(np.abs(m.values - target))) for m in sec.members)
        summary.add("expected_section", err <= tol, sup_error=err, tolerance=tol)
    if figures:
        from . import plotting
        plotting.profile_figure(_x(grid), np.stack([m.values for m in sec.members]),
                                out / "section.png", f"section at t={t:g}")
        if sec.gaps:
            plotting.curve_figure(sec.horizons[1:], sec.gaps, out / "horizon_gaps.png",
                                  "horizon", "gap")


def run_continuity(s: Scenario, out: Path, summary: Summary, summary_only: bool, figures: bool):
    tau = s.get("tau", 0.0)
    L = s.require("L")
    levels = s.get("levels", [0.1, 0.05])
    S0, P = s.model.stimulus, s.perturbation
    u0 = s.initial_field()
    finals, curves = [], {}
    for eta in levels:
        rep = continuity_gap(s.handle(), S0 + eta * P, S0, tau, L, u0)
        tag = _level_tag(eta)
        if not summary_only:
            _write_rows(out / f"continuity_eta_{tag}.csv", ["t", "gap", "majorant", "ratio"],
                        zip(rep.times, rep.gap, rep.majorant, rep.ratio))
        summary.add(f"continuity_eta_{eta:g}", rep.passed, level=eta, gap_L=rep.gap[-1],
                    majorant_L=rep.majorant[-1], stimulus_gap=rep.stimulus_gap, rho=rep.rho,
                    worst_margin=rep.worst_margin, witness_t=rep.witness_time)
        finals.append(rep.gap[-1])
        curves[eta] = (rep.times, rep.gap, rep.majorant)
    for k in range(len(levels) - 1):
        expected = levels[k] / levels[k + 1]
        got = finals[k] / finals[k + 1] if finals[k + 1] > 0 else math.inf
        ok = abs(got / expected - 1.0) <= 0.10
        summary.add(f"gap_ratio_{k}", ok, ratio=got, expected=expected)
    _write_rows(out / "continuity_levels.csv", ["level", "gap_L"], zip(levels, finals))
    if figures:
        from . import plotting
        plotting.continuity_figure(curves, out / "continuity.png")


def run_usc(s: Scenario, out: Path, summary: Summary, summary_only: bool, figures: bool):
    t = s.get("t", 0.0)
    levels = s.require("levels")
    rep = upper_semicontinuity_curve(s.handle(), s.model.stimulus, s.perturbation, t, levels,
                                     s.require("horizon"), s.get("ensemble_size", 20), s.seed,
                                     s.delta)
    grid, p = s.model.grid, s.model.p
    expected = [lvl * s.perturbation.norm(t, grid, p) for lvl in levels]
    _write_rows(out / "usc.csv", ["level", "distance", "linear_law"],
                zip(levels, rep.distances, expected))
    summary.add("usc_nonincreasing", rep.nonincreasing,
                distances=",".join(format(d, ".6g") for d in rep.distances))
    summary.add("usc_final_drop", rep.final_drop,
                ratio=rep.distances[-1] / rep.distances[0] if rep.distances[0] else 0.0)
    if s.get("expect_linear", False):
        tol = s.get("tolerance", DEFAULT_TOL)
        err = max(abs(d - e) for d, e in zip(rep.distances, expected))
        summary.add("usc_linear_law", err <= tol, max_error=err, tolerance=tol)
    if figures:
        from . import plotting
        plotting.curve_figure(levels, rep.distances, out / "usc.png", "level", "distance")


def run_kernel_bounds(s: Scenario, out: Path, summary: Summary, summary_only: bool,
                      figures: bool):
    kernel = s.model.kernel
    rows = []
    for p in s.get("p_values", [s.model.p]):
        rep = verify_kernel_bounds(kernel, s.get("trials", 200), p, s.seed)
        for name in INEQUALITIES:
            nv = sum(v["inequality"] == name for v in rep.violations)
            rows.append((p, name, rep.min_ratio[name], rep.max_ratio[name], nv))
        summary.add(f"kernel_bounds_p_{p:g}", rep.passed, trials=rep.trials,
                    violations=len(rep.violations),
                    min_ratio=min(rep.min_ratio.values()))
    _write_rows(out / "kernel_bounds.csv",
                ["p", "inequality", "min_ratio", "max_ratio", "violations"], rows)
    _write_norms(s, out)


def _write_norms(s: Scenario, out: Path) -> list:
    rows = kernel_norm_rows(s)
    _write_rows(out / "kernel_norms.csv", ["quantity", "value"], rows)
    return rows


def kernel_norm_rows(s: Scenario) -> list:
    kernel, p = s.model.kernel, s.model.p
    rs = sorted({1.0, 2.0, float(p), s.model.q, math.inf})
    rows = [(f"norm_r_{r:g}", kernel.norm(r)) for r in rs]
    mass = kernel.row_integrals()
    rows += [("row_integral_min", float(mass.min())), ("row_integral_max", float(mass.max())),
             ("symmetry_defect", kernel.symmetry_defect()), ("method", kernel.method)]
    return rows


def run_certificates(s: Scenario, out: Path, summary: Summary, summary_only: bool,
                     figures: bool):
    for c in s.certificates.conditions:
        summary.add(c.name, c.passed, worst_margin=c.worst_margin)


RUNNERS = {
    "evolve": run_evolve,
    "envelope": run_envelope,
    "attractor": run_attractor,
    "continuity": run_continuity,
    "usc": run_usc,
    "kernel_bounds": run_kernel_bounds,
    "certificates": run_certificates,
}


def run_experiment(s: Scenario, out_dir, summary_only: bool = False,
                   figures: bool = True) -> tuple[int, Summary]:
    """Run the scenario's experiment; returns ``(exit_status, summary)``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = Summary(s)
    _write_certificates(s.certificates, out)
    _certificate_summary(s, summary)
    if s.certificates.passed:
        try:
            RUNNERS[s.experiment](s, out, summary, summary_only, figures)
        except BlowUpError as exc:
            summary.add("blowup", False, witness_t=exc.t)
    summary.write(out)
    return (0 if summary.passed else 1), summary
