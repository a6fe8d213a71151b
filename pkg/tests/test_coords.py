import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isospec.coords import (Chart2D, Chart3D, VARIANTS, alpha_gradient_parallel,
                            eta_gradient_parallel, forward_2d, forward_3d, gamma_first_form,
                            inverse_2d, inverse_3d, jacobian_3d, laplacian_2d,
                            laplacian_2d_kappa_eta, laplacian_3d, metric_3d,
                            numerical_jacobian_3d, p_poly, pullback_metric_3d)
from isospec.euclid import ParamsError, make_params
from isospec.fields import SingularPointError

CHART2 = Chart2D(0.4, 1.0, 0.8)
P3 = make_params(3, [1.3, -0.5, 0.0], [0.5, 1.3, 0.7])     # a . c = 0


def chart_points(chart, count, seed, margin=0.2):
    """Uniform points in [-1, 1]^3 away from the chart's singular loci."""
    rng = np.random.default_rng(seed)
    j = VARIANTS[chart.variant][1]
    out = []
    while len(out) < count:
        pts = rng.uniform(-1, 1, (count, 3))
        L = P3.a + pts @ P3.c.T
        _, _, e = forward_3d(chart, pts)
        ok = (np.abs(L[:, j]) > margin) & (np.abs(p_poly(chart, e)) > margin)
        out.extend(pts[ok])
    return np.array(out[:count])


def gauss(r):
    return np.exp(-np.sum((r - 0.2) ** 2, axis=-1))


def gauss_lap(r):
    n = r.shape[-1]
    d2 = np.sum((r - 0.2) ** 2, axis=-1)
    return (4 * d2 - 2 * n) * np.exp(-d2)


def test_chart2d_needs_rotation():
    with pytest.raises(ParamsError):
        Chart2D(1.0, 0.0, 0.0)


def test_forward_2d_values():
    # a = (0, 1), c = 1 at the origin: L = (0, 1), kappa = 1, eta = 0
    kappa, eta, rho, xi = forward_2d(Chart2D(0.0, 1.0, 1.0), np.array([0.0, 0.0]))
    assert (kappa, eta, rho, xi) == (1.0, 0.0, 0.0, 0.0)


def test_forward_2d_singular_line():
    with pytest.raises(SingularPointError):
        forward_2d(Chart2D(0.0, 1.0, 1.0), np.array([1.0, 0.3]))


@settings(max_examples=50, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(-1.5, 1.5))
def test_inverse_2d_round_trip(rho, xi):
    chart = CHART2
    pts = inverse_2d(chart, rho, xi)
    _, _, r2, x2 = forward_2d(chart, pts)
    assert r2 == pytest.approx(rho, abs=1e-12)
    assert x2 == pytest.approx(xi, abs=1e-12)


def test_inverse_2d_branch_guard():
    with pytest.raises(ValueError):
        inverse_2d(CHART2, 0.0, 2.0)


def _orders(errors, steps):
    return np.diff(np.log(errors)) / np.diff(np.log(steps))


def test_laplacian_2d_matches_cartesian_at_order_two():
    point = np.array([-0.4, 0.3])
    exact = gauss_lap(point)

    def F(rho, xi):
        return gauss(inverse_2d(CHART2, rho, xi))

    steps = np.array([0.08, 0.04, 0.02, 0.01])
    err = [abs(laplacian_2d(CHART2, F, point, s) - exact) for s in steps]
    assert np.all(np.abs(_orders(err, steps) - 2) < 0.2)

    def G(kappa, eta):
        th = np.arctan(eta)
        L1, L2 = kappa * np.sin(th), kappa * np.cos(th)
        r = np.stack([(CHART2.a2 - L2) / CHART2.c, (L1 - CHART2.a1) / CHART2.c], axis=-1)
        return gauss(r)

    err = [abs(laplacian_2d_kappa_eta(CHART2, G, point, s) - exact) for s in steps]
    assert np.all(np.abs(_orders(err, steps) - 2) < 0.3)


@pytest.mark.parametrize("variant", sorted(VARIANTS))
def test_forward_3d_gamma_forms_agree(variant):
    chart = Chart3D(P3, variant)
    pts = np.random.default_rng(0).uniform(-1, 1, (40, 3))
    _, g, _ = forward_3d(chart, pts)
    np.testing.assert_allclose(g, gamma_first_form(chart, pts), atol=1e-13)


def test_chart3d_rejects_bad_params():
    with pytest.raises(ParamsError):
        Chart3D(make_params(3, [0, 0, 1], [0, 0, 1]))
    with pytest.raises(ParamsError):
        Chart3D(make_params(3, [1, 0, 0], [0, 1, 0]), "eta")     # c3 = 0


@pytest.mark.parametrize("variant", sorted(VARIANTS))
def test_inverse_3d_round_trip(variant):
    chart = Chart3D(P3, variant)
    pts = np.random.default_rng(3).uniform(-1, 1, (30, 3))
    b, g, e = forward_3d(chart, pts)
    j = VARIANTS[variant][1]
    sign = np.sign((P3.a + pts @ P3.c.T)[:, j])
    back = inverse_3d(chart, b, g, e, branch=1.0)
    back_neg = inverse_3d(chart, b, g, e, branch=-1.0)
    want = np.where(sign[:, None] > 0, back, back_neg)
    np.testing.assert_allclose(want, pts, atol=1e-10)


@pytest.mark.parametrize("variant", sorted(VARIANTS))
def test_jacobian_is_c2_p(variant):
    chart = Chart3D(P3, variant)
    pts = chart_points(chart, 50, 4)
    J = np.linalg.det(numerical_jacobian_3d(chart, pts))
    want = jacobian_3d(chart, pts)
    assert np.max(np.abs(J - want) / np.abs(want)) <= 1e-6


@pytest.mark.parametrize("variant", sorted(VARIANTS))
def test_metric_is_diagonal_and_matches(variant):
    chart = Chart3D(P3, variant)
    pts = chart_points(chart, 20, 5)
    g = pullback_metric_3d(chart, pts)
    diag = np.stack(metric_3d(chart, pts), axis=-1)
    off = g - np.einsum("...i,ij->...ij", np.diagonal(g, axis1=-2, axis2=-1), np.eye(3))
    assert np.max(np.abs(off) / diag.max(axis=-1)[:, None, None]) <= 1e-8
    np.testing.assert_allclose(np.diagonal(g, axis1=-2, axis2=-1), diag, rtol=1e-6)


def test_laplacian_3d_matches_cartesian_at_order_two():
    chart = Chart3D(P3, "eta")
    point = np.array([0.3, -0.2, 0.4])
    exact = gauss_lap(point)
    j = VARIANTS["eta"][1]
    branch = np.sign((P3.a + point @ P3.c.T)[j])

    def F(b, g, e):
        return gauss(inverse_3d(chart, b, g, e, branch))

    steps = np.array([0.04, 0.02, 0.01, 0.005])
    err = [abs(laplacian_3d(chart, F, point, s) - exact) for s in steps]
    assert np.all(np.abs(_orders(err, steps) - 2) < 0.3)


def test_p_is_directional_derivative_of_eta():
    chart = Chart3D(P3, "eta")
    pts = chart_points(chart, 10, 6)
    assert eta_gradient_parallel(chart, pts) <= 1e-5
    _, _, e = forward_3d(chart, pts)
    h = 1e-6
    L = P3.a + pts @ P3.c.T
    Ld = (forward_3d(chart, pts + h * L)[2] - forward_3d(chart, pts - h * L)[2]) / (2 * h)
    np.testing.assert_allclose(Ld, p_poly(chart, e), rtol=1e-6)


def test_eta_gradient_parallel_2d():
    pts = np.random.default_rng(7).uniform(-0.5, 0.5, (10, 2))
    assert eta_gradient_parallel(CHART2, pts) <= 1e-5


@pytest.mark.parametrize("p", [make_params(2, [1.0, 0.5], 1.0), P3])
def test_alpha_gradient_is_parallel_to_L(p):
    pts = np.random.default_rng(7).uniform(-1, 1, (10, p.n))
    assert alpha_gradient_parallel(p, pts, i=0) <= 1e-5      # FD gradient, r.a may be small
