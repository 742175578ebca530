"""Command line entry point: ``nflab run|validate|norms``.

Exit status: 0 when every check passes, 1 when a check or certificate fails,
2 for configuration errors (unreadable or invalid scenario, bad flags).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiments import fmt, kernel_norm_rows, run_experiment
from .scenario import ScenarioError, parse_scenario

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 already; keep the message short
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="nflab", description="Non-autonomous neural field experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("scenario", type=Path, help="scenario file (.scn)")
        p.add_argument("--dt", type=float, default=None, help="override the integrator step")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")

    run = sub.add_parser("run", help="run the scenario's experiment")
    common(run)
    run.add_argument("--out", type=Path, required=True, help="output directory")
    run.add_argument("--summary-only", action="store_true",
                     help="skip per-node and per-stamp CSVs, keep summaries")
    run.add_argument("--no-figures", action="store_true", help="do not render PNG figures")

    val = sub.add_parser("validate", help="parse the scenario and check its certificates")
    common(val)

    norms = sub.add_parser("norms", help="report kernel norms for the scenario's grid")
    common(norms)
    return ap


def _load(args):
    s = parse_scenario(args.scenario)
    return s.with_overrides(dt=args.dt, seed=args.seed)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        s = _load(args)
        if args.command == "validate":
            for c in s.certificates.conditions:
                print(c.line())
            gate = "open" if s.model.dissipative else "closed"
            print(f"scenario={s.name} experiment={s.experiment} dissipativity_gate={gate} "
                  f"status={'pass' if s.certificates.passed else 'fail'}")
            return EXIT_OK if s.certificates.passed else EXIT_FAIL
        if args.command == "norms":
            for name, value in kernel_norm_rows(s):
                print(f"{name}={fmt(value)}")
            return EXIT_OK
        status, summary = run_experiment(s, args.out, args.summary_only, not args.no_figures)
        for line in summary.lines():
            print(line)
        return status
    except ScenarioError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
