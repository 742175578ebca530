import math

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nflab.attractor import DissipationBudget, absorbing_radius, hausdorff_semidist
from nflab.dynamics import CoefficientPair, ModelSpec, bump_stimulus, tanh_rate
from nflab.expr import TimeExpression
from nflab.field import Field, Grid
from nflab.kernels import dense_kernel, gaussian_kernel, mexican_hat_kernel

G = Grid.uniform(1.0, 48)
finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
vectors = arrays(np.float64, 48, elements=finite)
exponents = st.sampled_from([1.0, 1.5, 2.0, 3.0, 4.0, math.inf])


@given(st.integers(2, 300), st.floats(0.1, 20))
def test_grid_weights_sum_to_measure(n, extent):
    g = Grid.uniform(extent, n)
    assert abs(g.weights.sum() - extent) <= 1e-12 * extent


@given(vectors, st.floats(-50, 50).filter(lambda c: c == 0 or abs(c) > 1e-100), exponents)
def test_norm_homogeneous(u, c, p):
    assert math.isclose(G.norm(c * u, p), abs(c) * G.norm(u, p), rel_tol=1e-12, abs_tol=1e-300)


@given(vectors, vectors, exponents)
def test_norm_triangle(u, v, p):
    assert G.norm(u + v, p) <= (G.norm(u, p) + G.norm(v, p)) * (1 + 1e-12) + 1e-300


@st.composite
def kernels(draw):
    kind = draw(st.sampled_from(["gaussian", "mexican", "dense"]))
    if kind == "gaussian":
        return gaussian_kernel(G, draw(st.floats(0.02, 0.5)), draw(st.floats(0.1, 3)))
    if kind == "mexican":
        s = draw(st.floats(0.02, 0.2))
        return mexican_hat_kernel(G, s, s * draw(st.floats(1.5, 4)))
    m = draw(arrays(np.float64, (48, 48), elements=st.floats(-5, 5)))
    return dense_kernel(G, m + m.T)


@settings(max_examples=60, deadline=None)
@given(kernels(), vectors, st.sampled_from([1.0, 1.5, 2.0, 3.0, 4.0]))
def test_kernel_inequalities(k, v, p):
    q = p / (p - 1) if p > 1 else math.inf
    Kv = k.apply(v)
    tol = 1 + 1e-10
    assert G.norm(Kv, p) <= k.norm(p) * G.norm(v, 1) * tol + 1e-300
    assert G.norm(Kv, 1) <= k.norm(q) * G.norm(v, p) * G.measure * tol + 1e-300
    assert G.norm(Kv, p) <= k.norm(q) * G.norm(v, p) * G.measure ** (1 / p) * tol + 1e-300


G5 = Grid.uniform(1.0, 5)
points = arrays(np.float64, st.tuples(st.integers(1, 6), st.just(5)),
                elements=st.integers(-40, 40).map(lambda k: k / 4)).map(lambda a: [Field(G5, r) for r in a])


@given(points, points)
def test_hausdorff_zero_iff_contained(A, B):
    assert hausdorff_semidist(A, A + B) == 0.0
    inside = all(any(np.array_equal(a.values, b.values) for a in A) for b in B)
    assert (hausdorff_semidist(A + B, A) == 0.0) == inside


@given(points, points, points)
def test_hausdorff_triangle(A, B, C):
    dac = hausdorff_semidist(A, C)
    assert dac <= (hausdorff_semidist(A, B) + hausdorff_semidist(B, C)) * (1 + 1e-12)


def _budget(delta):
    m = ModelSpec(G, gaussian_kernel(G, 0.1, 0.5), CoefficientPair.constant(1, 1), tanh_rate(),
                  bump_stimulus(1.0, 0.5, 0.1))
    return DissipationBudget.from_model(m, delta)


@given(st.floats(0.01, 50), st.floats(0.01, 50), st.floats(-20, 20))
def test_absorbing_radius_monotone_in_delta(d1, d2, t):
    assume(d1 < d2 * (1 - 1e-9))
    assert absorbing_radius(_budget(d1), t) < absorbing_radius(_budget(d2), t)


@settings(deadline=None)
@given(st.floats(-5, 5), st.floats(0, 5), st.floats(-3, 3), st.floats(0.1, 4))
def test_expression_integral_additive_and_exact(a, w, c, k):
    e = TimeExpression(f"{c!r} + cos({k!r}*t)")
    b, m = a + w, a + w / 2
    exact = c * w + (math.sin(k * b) - math.sin(k * a)) / k
    assert math.isclose(e.integrate(a, b), exact, rel_tol=1e-11, abs_tol=1e-11)
    assert math.isclose(e.integrate(a, m) + e.integrate(m, b), e.integrate(a, b),
                        rel_tol=1e-12, abs_tol=1e-12)
