"""Acceptance criteria 1-11, one test each.

Run with ``pytest tests/test_acceptance.py`` (or ``python3 tests/test_acceptance.py``);
the terminal summary prints one PASS/FAIL line per criterion.
"""

import math
import os
import sys
import time

import numpy as np
import pytest

from nflab.attractor import random_ball
from nflab.cli import main
from nflab.dynamics import frechet_derivative, lipschitz_majorant
from nflab.field import Field, Grid
from nflab.integrator import ProcessHandle, evolve_final
from nflab.kernels import bump_kernel, constant_kernel, gaussian_kernel, mexican_hat_kernel, \
    verify_kernel_bounds
from nflab.scenario import parse_initial, parse_scenario

from conftest import SCENARIOS

ALL_SCENARIOS = sorted(p.stem for p in SCENARIOS.glob("*.scn"))
EXPECTED_FAIL = {"broken_certificate", "fixed_point"}


def _run(name, out, *extra):
    code = main(["run", str(SCENARIOS / f"{name}.scn"), "--out", str(out), *extra])
    recs = [dict(kv.split("=", 1) for kv in line.split())
            for line in (out / "summary.txt").read_text().splitlines()]
    return code, {r["check"]: r for r in recs}


def _csv(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), np.array([[float(x) if x else np.nan for x in r.split(",")]
                                          for r in lines[1:]])


def test_c01_kernel_inequalities(acceptance_record):
    g = Grid.uniform(1.0, 512)
    kernels = [constant_kernel(g), gaussian_kernel(g, 0.1), mexican_hat_kernel(g, 0.05, 0.15),
               bump_kernel(g, 0.2)]
    start = time.perf_counter()
    violations = 0
    for p in (1, 2, 4):
        for k in kernels:
            violations += len(verify_kernel_bounds(k, trials=200, p=p, seed=1).violations)
    elapsed = time.perf_counter() - start
    ok = violations == 0 and elapsed < 30
    acceptance_record(1, ok, f"violations={violations} runtime={elapsed:.1f}s")
    assert ok


def test_c02_linear_exactness(tmp_path, acceptance_record):
    code, _ = _run("pure_decay", tmp_path, "--no-figures")
    head, rows = _csv(tmp_path / "norms.csv")
    l2 = rows[:, head.index("l2")]
    t = rows[:, head.index("t")]
    err = abs(l2[-1] / l2[0] - math.exp(-3)) / math.exp(-3)
    ok = code == 0 and t[-1] == 3.0 and err <= 1e-8
    acceptance_record(2, ok, f"relative_error={err:.3g}")
    assert ok


def test_c03_fixed_point_attractor(tmp_path, acceptance_record):
    start = time.perf_counter()
    s = parse_scenario(SCENARIOS / "fixed_point.scn")
    uT = evolve_final(s.handle(), 0.0, 40.0, np.zeros(s.model.grid.size))
    traj_err = float(np.max(np.abs(uT - 2.0)))
    code, checks = _run("fixed_point", tmp_path, "--no-figures")
    elapsed = time.perf_counter() - start
    sec = checks["section"]
    gap = float(sec["last_gap"])
    members = int(sec["members"])
    sup = float(checks["expected_section"]["sup_error"])
    ok = traj_err <= 1e-6 and members == 1 and gap <= 1e-6 and sup <= 1e-6 and elapsed < 60
    acceptance_record(3, ok, f"trajectory_error={traj_err:.3g} members={members} "
                             f"last_gap={gap:.3g} section_error={sup:.3g} runtime={elapsed:.1f}s")
    assert ok


def test_c04_entire_solution(tmp_path, acceptance_record):
    code, checks = _run("linear_sine", tmp_path, "--no-figures")
    sup = float(checks["expected_section"]["sup_error"])
    # independent check straight from section.csv
    head, rows = _csv(tmp_path / "section.csv")
    vals = rows[:, head.index("value")]
    direct = float(np.max(np.abs(vals - (math.sin(math.pi / 2) - math.cos(math.pi / 2)) / 2)))
    ok = code == 0 and checks["section"]["horizon"] == "30" and max(sup, direct) <= 1e-6
    acceptance_record(4, ok, f"sup_error={max(sup, direct):.3g}")
    assert ok


def test_c05_absorbing_and_decay(tmp_path, acceptance_record):
    start = time.perf_counter()
    code, checks = _run("tanh_envelope", tmp_path, "--no-figures")
    elapsed = time.perf_counter() - start
    head, rows = _csv(tmp_path / "envelope_members.csv")
    deltas = sorted(set(rows[:, 0]))
    per_delta = [int(np.sum(rows[:, 0] == d)) for d in deltas]
    max_norm = float(rows[:, head.index("initial_norm")].max())
    env = [checks[f"envelope_delta_{d}"] for d in ("0.1", "1", "10")]
    viol = sum(int(c["violations"]) for c in env)
    reexits = sum(int(c["reexits"]) for c in env)
    ok = (code == 0 and deltas == [0.1, 1.0, 10.0] and per_delta == [50, 50, 50]
          and max_norm <= 100 and viol == 0 and reexits == 0 and elapsed < 120)
    acceptance_record(5, ok, f"violations={viol} reexits={reexits} max_initial_norm={max_norm:.3g} "
                             f"runtime={elapsed:.1f}s")
    assert ok


def _tanh_model():
    return parse_scenario(SCENARIOS / "tanh_continuity.scn").model


def test_c06_frechet(acceptance_record):
    m = _tanh_model()
    g = m.grid
    rng = np.random.default_rng(606)
    eps = 1e-5
    worst = 0.0
    for _ in range(20):
        u, v = rng.standard_normal((2, g.size))
        t = rng.uniform(-10, 10)
        fd = (m.rhs(t, u + eps * v) - m.rhs(t, u - eps * v)) / (2 * eps)
        df = frechet_derivative(m, t, Field(g, u), Field(g, v)).values
        worst = max(worst, g.norm(fd - df, 2) / g.norm(df, 2))
    ok = worst <= 1e-6
    acceptance_record(6, ok, f"worst_relative_error={worst:.3g}")
    assert ok


def test_c07_lipschitz(acceptance_record):
    m = _tanh_model()
    g = m.grid
    U = random_ball(g, 1.0, 200, 2.0, 707, "u")
    V = random_ball(g, 1.0, 200, 2.0, 707, "v")
    ts = np.random.default_rng(707).uniform(-10, 10, 200)
    violations, worst = 0, 0.0
    for u, v, t in zip(U, V, ts):
        q = g.norm(m.rhs(t, u) - m.rhs(t, v), 2) / g.norm(u - v, 2)
        bound = lipschitz_majorant(m, t, g.norm(u, 2), g.norm(v, 2))
        violations += q > bound
        worst = max(worst, q / bound)
    ok = violations == 0
    acceptance_record(7, ok, f"violations={violations} worst_quotient_over_bound={worst:.3g}")
    assert ok


def test_c08_gronwall_continuity(tmp_path, acceptance_record):
    code, checks = _run("tanh_continuity", tmp_path, "--no-figures")
    ratio = float(checks["gap_ratio_0"]["ratio"])
    bounded = all(checks[k]["status"] == "pass" for k in checks if k.startswith("continuity_eta"))
    for f in tmp_path.glob("continuity_eta_*.csv"):
        head, rows = _csv(f)
        bounded &= bool(np.all(rows[:, head.index("gap")] <= rows[:, head.index("majorant")]))
        bounded &= rows[-1, head.index("t")] == 10.0
    ok = code == 0 and bounded and abs(ratio - 2) <= 0.2
    acceptance_record(8, ok, f"gap_below_majorant={bounded} ratio={ratio:.4g}")
    assert ok


def test_c09_upper_semicontinuity(tmp_path, acceptance_record):
    code_t, tanh = _run("tanh_usc", tmp_path / "tanh", "--no-figures")
    code_l, lin = _run("linear_usc", tmp_path / "linear", "--no-figures")
    d = [float(x) for x in tanh["usc_nonincreasing"]["distances"].split(",")]
    mono = all(b <= 1.1 * a for a, b in zip(d, d[1:]))
    drop = d[-1] <= d[0] / 4
    law = float(lin["usc_linear_law"]["max_error"])
    ok = code_t == 0 and code_l == 0 and mono and drop and law <= 1e-6
    acceptance_record(9, ok, f"distances={','.join(f'{x:.3g}' for x in d)} "
                             f"linear_law_error={law:.3g}")
    assert ok


def _order_ratio(s, u0, scheme, dt, ref):
    errs = []
    for h in (dt, dt / 2):
        uT = evolve_final(ProcessHandle(s.model, scheme, h), 0.0, 4.0, u0)
        errs.append(s.model.grid.norm(uT - ref, 2))
    return errs[0] / errs[1]


def test_c10_integrator_orders(acceptance_record):
    s = parse_scenario(SCENARIOS / "tanh_continuity.scn")
    u0 = parse_initial("bump:3.0,0.5,0.2", s.model.grid).values
    ref = evolve_final(ProcessHandle(s.model, "rk4", 1e-3), 0.0, 4.0, u0)
    r_exp = _order_ratio(s, u0, "exponential", 0.02, ref)
    r_rk4 = _order_ratio(s, u0, "rk4", 0.2, ref)
    ok = abs(r_exp - 2) <= 0.3 and abs(r_rk4 - 16) <= 3.2
    acceptance_record(10, ok, f"exponential_ratio={r_exp:.4g} rk4_ratio={r_rk4:.4g}")
    assert ok


def test_c11_determinism(tmp_path, monkeypatch, acceptance_record):
    codes, mismatched, count = {}, [], 0
    for run, threads in (("a", "1"), ("b", "4")):
        monkeypatch.setenv("NFL_THREADS", threads)
        for name in ALL_SCENARIOS:
            codes[name] = main(["run", str(SCENARIOS / f"{name}.scn"),
                                "--out", str(tmp_path / run / name), "--no-figures"])
    for name in ALL_SCENARIOS:
        for f in sorted((tmp_path / "a" / name).glob("*.csv")):
            count += 1
            if f.read_bytes() != (tmp_path / "b" / name / f.name).read_bytes():
                mismatched.append(f"{name}/{f.name}")
    wrong_codes = [n for n, c in codes.items() if c != (1 if n in EXPECTED_FAIL else 0)]
    ok = not mismatched and not wrong_codes
    acceptance_record(11, ok, f"csv_files={count} mismatched={len(mismatched)} "
                              f"unexpected_exit_codes={','.join(wrong_codes) or 'none'}")
    assert ok, mismatched + wrong_codes


if __name__ == "__main__":
    sys.exit(pytest.main([os.path.abspath(__file__), "-q", "-p", "no:cacheprovider"]))
