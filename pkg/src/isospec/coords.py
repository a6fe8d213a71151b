"""Separating charts: (kappa, eta) / (rho, xi) in 2D and (beta, gamma, eta) in 3D."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import expr as ex
from .euclid import IntertwinerParams, ParamsError, make_params, vector_field_L
from .fields import SINGULAR_BAND, SingularPointError, fd_gradient

__all__ = [
    "Chart2D", "Chart3D", "VARIANTS",
    "forward_2d", "inverse_2d", "kappa_eta", "laplacian_2d", "laplacian_2d_kappa_eta",
    "forward_3d", "inverse_3d", "gamma_first_form", "p_poly", "p_poly_prime",
    "jacobian_3d", "numerical_jacobian_3d", "metric_3d", "pullback_metric_3d",
    "laplacian_3d", "eta_gradient_parallel", "alpha_gradient_parallel",
    "eta_expr_3d", "cartesian_laplacian",
]


# ---------------------------------------------------------------- 2D

@dataclass(frozen=True)
class Chart2D:
    a1: float
    a2: float
    c: float

    def __post_init__(self):
        if self.c == 0:
            raise ParamsError("the (rho, xi) chart needs c != 0")

    @property
    def params(self) -> IntertwinerParams:
        return make_params(2, (self.a1, self.a2), self.c)

    branch = "principal: L2 = a2 - c x > 0, c xi in (-pi/2, pi/2)"

    def L(self, pts) -> tuple[np.ndarray, np.ndarray]:
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        return self.a1 + self.c * y, self.a2 - self.c * x


def kappa_eta(chart: Chart2D, pts) -> tuple[np.ndarray, np.ndarray]:
    L1, L2 = chart.L(pts)
    if np.any(np.abs(L2) < SINGULAR_BAND):
        raise SingularPointError("eta = L1/L2 is singular where a2 - c x = 0")
    return np.hypot(L1, L2), L1 / L2


def forward_2d(chart: Chart2D, pts):
    """(x, y) -> (kappa, eta, rho, xi)."""
    kappa, eta = kappa_eta(chart, pts)
    if np.any(kappa < SINGULAR_BAND):
        raise SingularPointError("kappa = 0 at the chart centre")
    rho = np.log(kappa) / chart.c
    xi = np.arctan(eta) / chart.c
    return kappa, eta, rho, xi


def inverse_2d(chart: Chart2D, rho, xi) -> np.ndarray:
    """(rho, xi) -> (x, y) on the principal branch (L2 > 0)."""
    c = chart.c
    kappa = np.exp(c * np.asarray(rho, dtype=float))
    theta = c * np.asarray(xi, dtype=float)
    if np.any(np.abs(theta) >= np.pi / 2):
        raise ValueError("c*xi must lie in (-pi/2, pi/2) on the principal branch")
    L1 = kappa * np.sin(theta)
    L2 = kappa * np.cos(theta)
    return np.stack([(chart.a2 - L2) / c, (L1 - chart.a1) / c], axis=-1)


def laplacian_2d(chart: Chart2D, F: Callable, point, step: float = 1e-4) -> np.ndarray:
    """e^{-2 c rho} (F_rho,rho + F_xi,xi) at a Cartesian point; F = F(rho, xi)."""
    _, _, rho, xi = forward_2d(chart, point)
    h = step
    f0 = F(rho, xi)
    frr = (F(rho + h, xi) - 2 * f0 + F(rho - h, xi)) / h**2
    fxx = (F(rho, xi + h) - 2 * f0 + F(rho, xi - h)) / h**2
    return np.exp(-2 * chart.c * rho) * (frr + fxx)


def laplacian_2d_kappa_eta(chart: Chart2D, F: Callable, point, step: float = 1e-4):
    """Displaced-polar form: (c^2/k^2)[k d_k(k d_k F) + (1+e^2) d_e((1+e^2) d_e F)]."""
    kappa, eta = kappa_eta(chart, point)
    h = step
    f0 = F(kappa, eta)
    fk = (F(kappa + h, eta) - F(kappa - h, eta)) / (2 * h)
    fkk = (F(kappa + h, eta) - 2 * f0 + F(kappa - h, eta)) / h**2
    fe = (F(kappa, eta + h) - F(kappa, eta - h)) / (2 * h)
    fee = (F(kappa, eta + h) - 2 * f0 + F(kappa, eta - h)) / h**2
    w = 1 + eta**2
    radial = kappa * fk + kappa**2 * fkk
    angular = w * (2 * eta * fe + w * fee)
    return chart.c**2 / kappa**2 * (radial + angular)


def cartesian_laplacian(G: Callable, point, step: float = 1e-4) -> np.ndarray:
    point = np.asarray(point, dtype=float)
    total = 0.0
    g0 = G(point)
    for j in range(point.shape[-1]):
        e = np.zeros(point.shape[-1])
        e[j] = step
        total = total + (G(point + e) - 2 * g0 + G(point - e)) / step**2
    return total


# ---------------------------------------------------------------- 3D

# variant -> (numerator index, denominator index, third index)
VARIANTS = {"eta": (0, 1, 2), "eta2": (0, 2, 1), "eta3": (1, 2, 0)}


@dataclass(frozen=True)
class Chart3D:
    params: IntertwinerParams
    variant: str = "eta"

    def __post_init__(self):
        p = self.params
        if p.n != 3:
            raise ParamsError("Chart3D needs n = 3")
        if self.variant not in VARIANTS:
            raise ParamsError(f"unknown eta variant {self.variant!r}")
        if p.a @ p.c_vector != 0:
            raise ParamsError(f"a . c = {p.a @ p.c_vector:g} != 0")
        if self.c_num == 0:
            raise ParamsError(f"{self.variant} needs c_{VARIANTS[self.variant][2] + 1} != 0")

    @property
    def cvec(self) -> np.ndarray:
        return self.params.c_vector

    @property
    def c_num(self) -> float:
        """c_ij for eta = L_i/L_j; equals the c-vector component of the third index
        up to sign."""
        i, j, _ = VARIANTS[self.variant]
        return float(self.params.c[i, j])

    @property
    def c2(self) -> float:
        return float(self.cvec @ self.cvec)

    branch = "principal: denominator component of L positive"


def eta_expr_3d(chart: Chart3D, variables=("x", "y", "z")) -> ex.Expr:
    from .euclid import L_exprs
    L = L_exprs(chart.params, variables)
    i, j, _ = VARIANTS[chart.variant]
    return L[i] / L[j]


def p_poly(chart: Chart3D, eta):
    """The quadratic p_v(eta_v) with (L . grad) eta_v = p_v."""
    c1, c2, c3 = chart.cvec
    cc = chart.c2
    eta = np.asarray(eta, dtype=float)
    if chart.variant == "eta":
        return ((cc - c2**2) * eta**2 + 2 * c1 * c2 * eta + (cc - c1**2)) / c3
    if chart.variant == "eta2":
        return -((cc - c3**2) * eta**2 + 2 * c1 * c3 * eta + (cc - c1**2)) / c2
    return ((cc - c3**2) * eta**2 + 2 * c2 * c3 * eta + (cc - c2**2)) / c1


def p_poly_prime(chart: Chart3D, eta):
    c1, c2, c3 = chart.cvec
    cc = chart.c2
    eta = np.asarray(eta, dtype=float)
    if chart.variant == "eta":
        return (2 * (cc - c2**2) * eta + 2 * c1 * c2) / c3
    if chart.variant == "eta2":
        return -(2 * (cc - c3**2) * eta + 2 * c1 * c3) / c2
    return (2 * (cc - c3**2) * eta + 2 * c2 * c3) / c1


def p_expr(chart: Chart3D, eta: ex.Expr) -> ex.Expr:
    c1, c2, c3 = (float(v) for v in chart.cvec)
    cc = chart.c2
    if chart.variant == "eta":
        A, B, C, D = cc - c2**2, 2 * c1 * c2, cc - c1**2, c3
    elif chart.variant == "eta2":
        A, B, C, D = cc - c3**2, 2 * c1 * c3, cc - c1**2, -c2
    else:
        A, B, C, D = cc - c3**2, 2 * c2 * c3, cc - c2**2, c1
    return (A * eta ** 2.0 + B * eta + C) / D


def _den(chart: Chart3D, L):
    _, j, _ = VARIANTS[chart.variant]
    return L[..., j]


def forward_3d(chart: Chart3D, pts):
    """(x, y, z) -> (beta, gamma, eta_v)."""
    p = chart.params
    pts = np.asarray(pts, dtype=float)
    L = vector_field_L(p, pts)
    den = _den(chart, L)
    if np.any(np.abs(den) < SINGULAR_BAND):
        raise SingularPointError(f"{chart.variant} is singular where its denominator vanishes")
    i, _, _ = VARIANTS[chart.variant]
    cv = chart.cvec
    beta = pts @ cv
    axc = np.cross(p.a, cv)
    r2 = np.sum(pts**2, axis=-1)
    gamma = pts @ axc + 0.5 * (beta**2 - chart.c2 * r2)
    return beta, gamma, L[..., i] / den


def gamma_first_form(chart: Chart3D, pts):
    """gamma = (1/2) r . [(a + L) x c]."""
    p = chart.params
    pts = np.asarray(pts, dtype=float)
    L = vector_field_L(p, pts)
    return 0.5 * np.sum(pts * np.cross(p.a + L, chart.cvec), axis=-1)


def inverse_3d(chart: Chart3D, beta, gamma, eta, branch: float = 1.0) -> np.ndarray:
    """(beta, gamma, eta_v) -> (x, y, z).

    L is rebuilt from |L|^2 = a^2 - 2 gamma, the ratio eta_v and L . c = 0;
    ``branch`` is the sign of the denominator component of L.
    """
    p = chart.params
    cv = chart.cvec
    i, j, k = VARIANTS[chart.variant]
    beta, gamma, eta = (np.asarray(v, dtype=float) for v in (beta, gamma, eta))
    L2 = p.a @ p.a - 2 * gamma
    if np.any(L2 <= 0):
        raise SingularPointError("a^2 - 2 gamma <= 0: no real L")
    d = np.zeros(np.broadcast(beta, gamma, eta).shape + (3,))
    d[..., i] = eta
    d[..., j] = 1.0
    d[..., k] = -(cv[i] * eta + cv[j]) / cv[k]
    scale = np.sign(branch) * np.sqrt(L2 / np.sum(d**2, axis=-1))
    L = d * scale[..., None]
    return (beta[..., None] * cv + np.cross(cv, L - p.a)) / chart.c2


def jacobian_3d(chart: Chart3D, point) -> np.ndarray:
    """det d(beta, gamma, eta_v)/d(x, y, z) = c^2 p_v(eta_v)."""
    _, _, eta = forward_3d(chart, point)
    return chart.c2 * p_poly(chart, eta)


def numerical_jacobian_3d(chart: Chart3D, point, step: float = 1e-6) -> np.ndarray:
    """3x3 matrix of central differences of forward_3d (rows: beta, gamma, eta)."""
    point = np.asarray(point, dtype=float)
    J = np.empty(point.shape[:-1] + (3, 3))
    for m in range(3):
        e = np.zeros(3)
        e[m] = step
        fp = np.stack(forward_3d(chart, point + e), axis=-1)
        fm = np.stack(forward_3d(chart, point - e), axis=-1)
        J[..., :, m] = (fp - fm) / (2 * step)
    return J


def metric_3d(chart: Chart3D, point):
    """Diagonal metric (g_bb, g_gg, g_ee) of the orthogonal chart."""
    p = chart.params
    L = vector_field_L(p, np.asarray(point, dtype=float))
    LL = np.sum(L**2, axis=-1)
    den = _den(chart, L)
    if np.any(np.abs(den) < SINGULAR_BAND) or np.any(LL < SINGULAR_BAND):
        raise SingularPointError("metric requested on a singular locus")
    cc = chart.c2
    return np.full_like(LL, 1 / cc), 1 / (cc * LL), den**4 / (chart.c_num**2 * LL)


def pullback_metric_3d(chart: Chart3D, point, step: float = 1e-6) -> np.ndarray:
    """g = (J J^T)^{-1} from the numerical Jacobian of the forward map."""
    J = numerical_jacobian_3d(chart, point, step)
    return np.linalg.inv(J @ np.swapaxes(J, -1, -2))


def laplacian_3d(chart: Chart3D, F: Callable, point, step: float = 1e-4):
    """c^2 [F_bb + d_g(L^2 F_g)] + (p/L^2) d_e(p F_e) with L^2 = a^2 - 2 gamma."""
    b, g, e = forward_3d(chart, point)
    h = step
    f0 = F(b, g, e)
    fbb = (F(b + h, g, e) - 2 * f0 + F(b - h, g, e)) / h**2
    fg = (F(b, g + h, e) - F(b, g - h, e)) / (2 * h)
    fgg = (F(b, g + h, e) - 2 * f0 + F(b, g - h, e)) / h**2
    fe = (F(b, g, e + h) - F(b, g, e - h)) / (2 * h)
    fee = (F(b, g, e + h) - 2 * f0 + F(b, g, e - h)) / h**2
    a = chart.params.a
    LL = a @ a - 2 * g
    p = p_poly(chart, e)
    dp = p_poly_prime(chart, e)
    return chart.c2 * (fbb + LL * fgg - 2 * fg) + p / LL * (dp * fe + p * fee)


def eta_gradient_parallel(chart, point, step: float = 1e-3) -> float:
    """max |grad eta - (c_ij / L_j^2) L| with grad eta by finite differences.

    ``chart`` is a Chart2D or a Chart3D.
    """
    point = np.asarray(point, dtype=float)
    if isinstance(chart, Chart2D):
        p = chart.params

        def eta(q):
            return kappa_eta(chart, q)[1]
        c_ij, j = chart.c, 1
    else:
        p = chart.params

        def eta(q):
            return forward_3d(chart, q)[2]
        c_ij, j = chart.c_num, VARIANTS[chart.variant][1]
    grad = fd_gradient(eta, point, step)
    L = vector_field_L(p, point)
    expected = (c_ij / L[..., j]**2)[..., None] * L
    return float(np.max(np.abs(grad - expected)))


def alpha_gradient_parallel(p: IntertwinerParams, point, i: int = 0,
                            step: float = 1e-3) -> float:
    """Relative component of grad(L_i / r.a) orthogonal to L."""
    point = np.asarray(point, dtype=float)

    def alpha(q):
        return vector_field_L(p, q)[..., i] / (q @ p.a)

    grad = fd_gradient(alpha, point, step)
    L = vector_field_L(p, point)
    Lhat = L / np.linalg.norm(L, axis=-1, keepdims=True)
    perp = grad - np.sum(grad * Lhat, axis=-1, keepdims=True) * Lhat
    return float(np.max(np.linalg.norm(perp, axis=-1) / np.linalg.norm(grad, axis=-1)))
