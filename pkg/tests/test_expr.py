import math

import numpy as np
import pytest
from scipy import integrate as spi

from nflab.expr import ExpressionError, TimeExpression, as_expression


def test_constant_folding():
    e = TimeExpression("2*pi - 1")
    assert e.is_constant and e.constant_value == pytest.approx(2 * math.pi - 1)
    assert TimeExpression(3).constant_value == 3.0
    assert not TimeExpression("1 + 0*t").is_constant


def test_vectorized_evaluation():
    e = TimeExpression("exp(-t)*cos(2*t) + t**2")
    t = np.linspace(-2, 2, 9)
    assert np.allclose(e(t), np.exp(-t) * np.cos(2 * t) + t**2, rtol=1e-15)
    assert np.shape(TimeExpression("4")(t)) in ((), (9,))


@pytest.mark.parametrize("src", ["log(t)", "t.real", "__import__('os')", "t if t else 1",
                                 "sin(t, 2)", "x + 1", "'a'", "t[0]", "True"])
def test_rejects_outside_grammar(src):
    with pytest.raises(ExpressionError):
        TimeExpression(src)


@pytest.mark.parametrize("src", ["1 + 0.5*sin(t)", "exp(-t/3)*cos(5*t)", "t**3 - 2*t", "7"])
def test_integration_against_quad(src):
    e = TimeExpression(src)
    f = lambda s: float(e(s))
    for a, b in [(0, 1), (-4, 9), (2.5, 2.5)]:
        ref = spi.quad(f, a, b, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
        assert e.integrate(a, b) == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_as_expression_passthrough():
    e = TimeExpression("t")
    assert as_expression(e) is e
    assert as_expression(2.5).constant_value == 2.5
    assert as_expression("t + 1")(1.0) == 2.0
