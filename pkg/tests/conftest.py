from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from nflab.dynamics import (CoefficientPair, ModelSpec, bump_stimulus, constant_stimulus,
                            linear_rate, tanh_rate, zero_rate, zero_stimulus)
from nflab.field import Grid
from nflab.kernels import constant_kernel, gaussian_kernel

SCENARIOS = Path(__file__).resolve().parents[1] / "src" / "nflab" / "scenarios"

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def acceptance_record():
    def record(number: int, passed: bool, detail: str) -> None:
        ACCEPTANCE[number] = (bool(passed), detail)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def grid256():
    return Grid.uniform(1.0, 256)


@pytest.fixture
def tanh_model(grid256):
    return ModelSpec(grid256, gaussian_kernel(grid256, 0.1, 0.5), CoefficientPair.constant(1, 1),
                     tanh_rate(), bump_stimulus(1.0, 0.5, 0.1))


@pytest.fixture
def fixed_point_model(grid256):
    return ModelSpec(grid256, constant_kernel(grid256), CoefficientPair.constant(1, 1),
                     linear_rate(0.5, k1=0.6), constant_stimulus(1.0))


@pytest.fixture
def decay_model(grid256):
    return ModelSpec(grid256, gaussian_kernel(grid256, 0.1), CoefficientPair.constant(1, 1),
                     zero_rate(), zero_stimulus())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
