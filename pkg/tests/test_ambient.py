import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warplab.ambient import AmbientChart, covariant_derivative, grad_r, hessian_r_fd, metric_at
from warplab.errors import DomainError
from warplab.model_space import ModelSpaceSpec, comparison_hessian_radial, space_form_warping, warping_from_callable, warping_from_expression


def chart(b, n=3, mode="auto"):
    return AmbientChart(ModelSpaceSpec(n, space_form_warping(b)), mode)


E1, E2 = np.array([1.0, 0, 0]), np.array([0, 1.0, 0])


def test_metric_values():
    assert metric_at(chart(0), [0.3, -2, 1], E1, E1) == 1.0
    assert metric_at(chart(-1), [1, 0, 0], E2, E2) == pytest.approx(math.sinh(1.0) ** 2, rel=1e-14)
    assert metric_at(chart(-1), [2, 0, 0], E1, E2) == 0.0


def test_metric_at_pole_is_euclidean():
    A = chart(-1)
    np.testing.assert_allclose(A.metric(np.zeros(3)), np.eye(3))
    np.testing.assert_allclose(A.metric(np.array([1e-9, 0, 0])), np.eye(3), atol=1e-12)


def test_metric_inverse_and_sqrt():
    A = chart(-1)
    X = np.array([[0.3, 2.0, -1.0], [5.0, 0.1, 0.2]])
    G = A.metric(X)
    np.testing.assert_allclose(A.metric_inverse(X) @ G, np.broadcast_to(np.eye(3), G.shape), atol=1e-10)
    S = A.metric_sqrt(X)
    np.testing.assert_allclose(S @ S, G, rtol=1e-12)


def test_point_shape_and_domain_checks():
    with pytest.raises(DomainError):
        chart(0).metric(np.zeros(2))
    with pytest.raises(DomainError):
        chart(1).metric(np.array([3.2, 0, 0]))


def test_grad_r():
    np.testing.assert_allclose(grad_r(chart(-1), [3, 0, 0]), E1)
    X = 5 * np.array([1, 1, 0]) / math.sqrt(2)
    np.testing.assert_allclose(grad_r(chart(-1), X), np.array([1, 1, 0]) / math.sqrt(2))
    with pytest.raises(DomainError):
        grad_r(chart(-1), np.zeros(3))


def test_covariant_derivative_flat_constant_field():
    out = covariant_derivative(chart(0), [1, 2, 3], E2, lambda X: np.array([0.5, -1, 2]))
    np.testing.assert_allclose(out, 0.0, atol=1e-12)


def test_radial_field_is_geodesic():
    A = chart(-1)
    for X in ([1, 0, 0], [0.5, -2, 1], [3, 3, 0.1]):
        X = np.array(X, float)
        out = covariant_derivative(A, X, X / np.linalg.norm(X), lambda P: P / np.linalg.norm(P))
        np.testing.assert_allclose(out, 0.0, atol=1e-6)


def test_covariant_derivative_coordinate_field():
    # Hess r(e2, e2) = e2(e2 r) - <nabla_{e2} e2, grad r>; e2(e2 r) = 1/r = 1 at X = e1
    # and Hess r(e2, e2) = coth(1) sinh^2(1), so the radial part is 1 - sinh(1) cosh(1).
    A = chart(-1)
    out = covariant_derivative(A, E1, E2, lambda X: E2)
    radial = metric_at(A, E1, out, grad_r(A, E1))
    assert radial == pytest.approx(1.0 - math.sinh(1.0) * math.cosh(1.0), abs=1e-8)
    assert radial == pytest.approx(-0.8134302039, abs=1e-8)


def test_hessian_r_fd_examples():
    assert hessian_r_fd(chart(0), [2, 0, 0], E2) == pytest.approx(0.5, abs=1e-4)
    assert hessian_r_fd(chart(-1), [2, 1, 0.3], np.array([2, 1, 0.3]) / math.sqrt(5.09)) == pytest.approx(0.0, abs=1e-6)
    unit = E2 / math.sinh(1.0)
    assert hessian_r_fd(chart(-1), E1, unit) == pytest.approx(1.0 / math.tanh(1.0), abs=1e-4)


def test_hessian_r_fd_pole():
    with pytest.raises(DomainError):
        hessian_r_fd(chart(-1), np.zeros(3), E1)


def test_christoffel_modes_agree():
    A = chart(-1)
    X = np.array([[0.4, 1.1, -0.7], [3.0, -2.0, 1.0]])
    np.testing.assert_allclose(A.christoffel(X, mode="analytic"), A.christoffel(X, mode="finite_difference"), rtol=1e-6, atol=1e-6)


def test_christoffel_mode_selection():
    expr = AmbientChart(ModelSpaceSpec(3, warping_from_expression("r + 0.1*r^3")))
    assert expr.christoffel_mode == "analytic"
    cb = AmbientChart(ModelSpaceSpec(3, warping_from_callable(np.sinh)))
    assert cb.christoffel_mode == "finite_difference"


def test_christoffel_metric_compatibility():
    # d_k g_ij = g_lj Gamma^l_ki + g_il Gamma^l_kj
    A = chart(-1.0)
    X = np.array([0.7, -1.2, 0.5])
    G, dG = A.metric(X), A.metric_derivative(X)
    gam = A.christoffel(X)
    rhs = np.einsum("lj,lki->kij", G, gam) + np.einsum("il,lkj->kij", G, gam)
    np.testing.assert_allclose(dG, rhs, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(
    r=st.floats(0.5, 5.0),
    d=st.lists(st.floats(-1, 1), min_size=3, max_size=3),
    v=st.lists(st.floats(-1, 1), min_size=3, max_size=3),
)
def test_hessian_comparison_equality(r, d, v):
    d, v = np.array(d), np.array(v)
    if np.linalg.norm(d) < 1e-3 or np.linalg.norm(v) < 1e-3:
        return
    A = chart(-1)
    X = r * d / np.linalg.norm(d)
    u = X / r
    nv = math.sqrt(metric_at(A, X, v, v))
    expected = comparison_hessian_radial(A.warping, r, nv, float(v @ u))
    assert hessian_r_fd(A, X, v) == pytest.approx(expected, abs=1e-4 * max(1.0, nv * nv))


@settings(max_examples=50, deadline=None)
@given(b=st.sampled_from([-1.0, 0.0, 0.5]), p=st.lists(st.floats(-1.2, 1.2), min_size=3, max_size=3))
def test_radial_vector_has_unit_length(b, p):
    X = np.array(p)
    if np.linalg.norm(X) < 1e-3:
        return
    A = chart(b)
    u = grad_r(A, X)
    assert metric_at(A, X, u, u) == pytest.approx(1.0, abs=1e-12)
