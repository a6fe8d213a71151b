"""Builders for intertwined potential pairs (V0, V1) with their operator L = L0 + L.grad.

Every builder assembles Cartesian expression trees, so the fields carry exact
derivatives; singular loci are attached as predicates with a guard band.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np
from scipy.stats import qmc

from . import expr as ex
from .coords import VARIANTS, Chart3D, p_expr
from .euclid import IntertwinerParams, L_exprs, ParamsError, make_params, vector_field_L
from .fields import SINGULAR_BAND, ScalarField, coordinate_names

__all__ = [
    "PotentialPair", "HomogeneityError",
    "build_1d_pair", "build_constant_shift", "build_translational",
    "build_general_pair", "build_2d_pair", "solve_riccati_2d", "riccati_residual",
    "riccati_singular", "free_motion_partners_2d", "free_motion_v1_2d",
    "build_3d_pair", "free_motion_partners_3d", "free_motion_v1_3d",
    "orthogonal_basis", "default_pair", "check_homogeneous",
    "gradient_identity_residual", "laplacian_identity_residual", "shift_identity_residual",
    "k_operator_residual",
    "sample_nonsingular",
]

H_TOL = 1e-8
H_SAMPLES = 50


class HomogeneityError(ValueError):
    """h (or g) is not annihilated by the required first-order operator."""


@dataclass(frozen=True)
class PotentialPair:
    kind: str
    params: IntertwinerParams
    V0: ScalarField
    V1: ScalarField
    L0: ScalarField
    f: ex.Expr | None = None
    f_var: str = ""
    h: object = None
    chart: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def P(self) -> ScalarField:
        return self.V1 - self.V0

    @property
    def variables(self) -> tuple[str, ...]:
        return self.params.variables

    def L(self, pts) -> np.ndarray:
        return vector_field_L(self.params, pts)

    def singular_mask(self, pts) -> np.ndarray:
        return self.V0.singular_mask(pts) | self.V1.singular_mask(pts) | self.L0.singular_mask(pts)

    def with_V1(self, V1: ScalarField, note: str) -> "PotentialPair":
        """Copy with V1 replaced (used for negative controls)."""
        chart = dict(self.chart, modified=note)
        return PotentialPair(self.kind, self.params, self.V0, V1, self.L0,
                             self.f, self.f_var, self.h, chart)

    def to_dict(self) -> dict:
        def text(obj):
            if obj is None:
                return None
            if isinstance(obj, ex.Expr):
                return ex.to_string(obj)
            if isinstance(obj, ScalarField):
                return obj.description
            return str(obj)

        return {
            "kind": self.kind,
            "params": self.params.to_dict(),
            "f": text(self.f),
            "f_variable": self.f_var or None,
            "h": text(self.h),
            "V0": text(self.V0),
            "V1": text(self.V1),
            "L0": text(self.L0),
            "chart": self.chart,
        }


def _field(e: ex.Expr, variables, singular=None, description="") -> ScalarField:
    return ScalarField.from_expr(e, variables, singular, description)


def _sum_sq(items) -> ex.Expr:
    out: ex.Expr = ex.Const(0.0)
    for e in items:
        out = out + e ** 2.0
    return out


# ---------------------------------------------------------------- 1D

def build_1d_pair(L0: ex.Expr, b: float = 0.0, variable: str = "x") -> PotentialPair:
    """V0 = L0^2 - L0' + b, V1 = L0^2 + L0' + b with L = L0 + d/dx."""
    W = ex.substitute(L0, {variable: ex.Var("x")}) if variable != "x" else L0
    dW = ex.differentiate(W, "x")
    V0 = W ** 2.0 - dW + b
    V1 = W ** 2.0 + dW + b
    p = make_params(1, [1.0], [[0.0]])
    v = ("x",)
    return PotentialPair("1d", p, _field(V0, v), _field(V1, v), _field(W, v),
                         W, "x", None, {"coordinates": "x"})


# ---------------------------------------------------------------- constant shift

def orthogonal_basis(a) -> np.ndarray:
    """Orthonormal basis of the complement of a, by Gram-Schmidt on e_1..e_n."""
    a = np.asarray(a, dtype=float)
    if not np.any(a):
        raise ParamsError("a must be nonzero")
    vecs = [a / np.linalg.norm(a)]
    for e in np.eye(a.size):
        w = e - sum((e @ v) * v for v in vecs)
        norm = np.linalg.norm(w)
        if norm > 1e-8:
            vecs.append(w / norm)
        if len(vecs) == a.size:
            break
    return np.array(vecs[1:])


def _sample_points(n: int, box=(-2.0, 2.0), count: int = H_SAMPLES, seed: int = 0):
    pts = qmc.Halton(d=n, scramble=True, seed=seed).random(count)
    return box[0] + (box[1] - box[0]) * pts


def check_homogeneous(g: ScalarField, direction_field, box=(-2.0, 2.0),
                      count: int = H_SAMPLES, tol: float = H_TOL) -> float:
    """max |(L . grad) g| over quasi-random non-singular samples; raises if > tol."""
    pts = _sample_points(g.n, box, count * 2)
    pts = pts[~g.singular_mask(pts)][:count]
    if len(pts) == 0:
        raise HomogeneityError("no non-singular sample points for the homogeneity check")
    grad = g.gradient(pts, step=1e-3)
    res = float(np.max(np.abs(np.sum(direction_field(pts) * grad, axis=-1))))
    if res > tol:
        raise HomogeneityError(f"(L . grad) of {g.description or 'field'} reaches {res:.3g}")
    return res


def build_constant_shift(a, p0: float, b=None, g: ex.Expr | None = None,
                         box=(-2.0, 2.0)) -> PotentialPair:
    """V0 = p0^2 r^2/4 + p0 b.r + g, V1 = V0 + p0, L0 = p0 a.r/2 + a.b, c = 0.

    ``g`` may use the Cartesian coordinates or the projections u1..u_{n-1}
    onto the Gram-Schmidt basis of the complement of a.
    """
    a = np.asarray(a, dtype=float)
    n = a.size
    if not np.any(a):
        raise ParamsError("a must be nonzero")
    if p0 == 0:
        raise ParamsError("p0 must be nonzero")
    b = np.zeros(n) if b is None else np.asarray(b, dtype=float)
    v = coordinate_names(n)
    X = [ex.Var(s) for s in v]
    basis = orthogonal_basis(a)
    proj = {f"u{k + 1}": _dot(basis[k], X) for k in range(n - 1)}
    g = ex.Const(0.0) if g is None else ex.substitute(g, proj)
    extra = ex.free_variables(g) - set(v)
    if extra:
        raise ParamsError(f"g uses unknown variables {sorted(extra)}")
    p = make_params(n, a, np.zeros((n, n)))
    check_homogeneous(_field(g, v), lambda pts: np.broadcast_to(a, pts.shape), box)
    V0 = 0.25 * p0**2 * _sum_sq(X) + p0 * _dot(b, X) + g
    V1 = V0 + p0
    L0 = 0.5 * p0 * _dot(a, X) + float(a @ b)
    return PotentialPair("constant-shift", p, _field(V0, v), _field(V1, v), _field(L0, v),
                         None, "", g, {"p0": p0, "b": b.tolist(),
                                       "complement_basis": basis.tolist()})


def _dot(w, X) -> ex.Expr:
    out: ex.Expr = ex.Const(0.0)
    for wk, xk in zip(w, X):
        if wk != 0:
            out = out + float(wk) * xk
    return out


# ---------------------------------------------------------------- translational

def build_translational(a, f: ex.Expr, g: ex.Expr | None = None,
                        box=(-2.0, 2.0)) -> PotentialPair:
    """zeta = a.r/2, L0 = f(zeta), V-+ = f^2/a^2 -+ f'/2, V0 = g/2 + V-, V1 = g/2 + V+."""
    a = np.asarray(a, dtype=float)
    n = a.size
    if not np.any(a):
        raise ParamsError("a must be nonzero")
    v = coordinate_names(n)
    X = [ex.Var(s) for s in v]
    a2 = float(a @ a)
    zeta = 0.5 * _dot(a, X)
    fz = ex.substitute(f, {"zeta": zeta})
    dfz = ex.substitute(ex.differentiate(f, "zeta"), {"zeta": zeta})
    g = ex.Const(0.0) if g is None else g
    check_homogeneous(_field(g, v), lambda pts: np.broadcast_to(a, pts.shape), box)
    Vm = fz ** 2.0 / a2 - 0.5 * dfz
    Vp = fz ** 2.0 / a2 + 0.5 * dfz
    p = make_params(n, a, np.zeros((n, n)))
    return PotentialPair("translational", p, _field(0.5 * g + Vm, v), _field(0.5 * g + Vp, v),
                         _field(fz, v), f, "zeta", g, {"zeta": "a.r/2"})


# ---------------------------------------------------------------- general class

def default_pair(p: IntertwinerParams) -> tuple[int, int]:
    for i in range(p.n):
        for j in range(i + 1, p.n):
            if p.c[i, j] != 0:
                return i, j
    raise ParamsError("all c_jk vanish: no eta variable")


def _eta_singular(p: IntertwinerParams, j: int):
    def pred(pts):
        L = vector_field_L(p, pts)
        return (np.abs(L[..., j]) < SINGULAR_BAND) | (np.sum(L**2, axis=-1) < SINGULAR_BAND)
    return pred


def build_general_pair(p: IntertwinerParams, f: ex.Expr, h=None, pair=None,
                       box=(-2.0, 2.0), validate_h: bool = True) -> PotentialPair:
    """eta = L_i/L_j, L0 = f(eta), V-+ = f^2 -+ c_ij (L^2/L_j^2) f',
    V0 = h/2 + V-/L^2, V1 = h/2 + V+/L^2.

    ``h`` is an expression in the Cartesian coordinates or a ScalarField; it
    is accepted only if (L . grad) h vanishes at quasi-random samples.
    """
    i, j = pair if pair is not None else default_pair(p)
    cij = float(p.c[i, j])
    if cij == 0:
        raise ParamsError(f"c_{i + 1}{j + 1} = 0: eta = L_{i + 1}/L_{j + 1} is not usable")
    v = p.variables
    L = L_exprs(p, v)
    eta = L[i] / L[j]
    L2 = _sum_sq(L)
    fe = ex.substitute(f, {"eta": eta})
    dfe = ex.substitute(ex.differentiate(f, "eta"), {"eta": eta})
    sing = _eta_singular(p, j)
    Vm = fe ** 2.0 - cij * (L2 / L[j] ** 2.0) * dfe
    Vp = fe ** 2.0 + cij * (L2 / L[j] ** 2.0) * dfe
    if h is None:
        h = ex.Const(0.0)
    if isinstance(h, ScalarField):
        h_field = h
    else:
        h_field = _field(h, v, sing)
    if validate_h:
        check_homogeneous(h_field, lambda pts: vector_field_L(p, pts), box)
    if isinstance(h, ScalarField) and not h.exact:
        half_h = h.scaled(0.5)
        V0 = half_h + _field(Vm / L2, v, sing)
        V1 = half_h + _field(Vp / L2, v, sing)
    else:
        he = h.expr if isinstance(h, ScalarField) else h
        V0 = _field(0.5 * he + Vm / L2, v, sing)
        V1 = _field(0.5 * he + Vp / L2, v, sing)
    chart = {"eta": f"L{i + 1}/L{j + 1}", "pair": [i + 1, j + 1],
             "singular": f"L{j + 1} = 0 and L^2 = 0"}
    return PotentialPair("general", p, V0, V1, _field(fe, v, sing), f, "eta", h, chart)


# ---------------------------------------------------------------- 2D

def _kappa_eta_exprs(a1, a2, c):
    x, y = ex.Var("x"), ex.Var("y")
    L1 = a1 + c * y
    L2 = a2 - c * x
    return L1, L2, ex.call("sqrt", L1 ** 2.0 + L2 ** 2.0), L1 / L2


def _singular_2d(a1, a2, c, extra=None):
    def pred(pts):
        pts = np.asarray(pts, dtype=float)
        L1 = a1 + c * pts[..., 1]
        L2 = a2 - c * pts[..., 0]
        mask = (np.abs(L2) < SINGULAR_BAND) | (np.hypot(L1, L2) < SINGULAR_BAND)
        if extra is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                eta = np.where(mask, 0.0, L1 / np.where(mask, 1.0, L2))
            mask = mask | extra(eta)
        return mask
    return pred


def build_2d_pair(a1: float, a2: float, c: float, f: ex.Expr, h: ex.Expr | None = None,
                  f_singular=None) -> PotentialPair:
    """kappa = |L|, eta = L1/L2, V-+ = f^2 -+ c(1+eta^2) f',
    V0 = h(kappa)/2 + V-/kappa^2, V1 = h(kappa)/2 + V+/kappa^2.

    ``h`` is an expression in ``kappa``; ``f_singular`` is an optional mask
    function of eta marking poles of f.
    """
    if c == 0:
        raise ParamsError("c must be nonzero")
    L1, L2, kappa, eta = _kappa_eta_exprs(float(a1), float(a2), float(c))
    fe = ex.substitute(f, {"eta": eta})
    dfe = ex.substitute(ex.differentiate(f, "eta"), {"eta": eta})
    w = 1.0 + eta ** 2.0
    h = ex.Const(0.0) if h is None else h
    hk = ex.substitute(h, {"kappa": kappa})
    k2 = L1 ** 2.0 + L2 ** 2.0
    Vm = fe ** 2.0 - c * w * dfe
    Vp = fe ** 2.0 + c * w * dfe
    sing = _singular_2d(a1, a2, c, f_singular)
    v = ("x", "y")
    p = make_params(2, (a1, a2), c)
    chart = {"eta": "L1/L2", "kappa": "sqrt(L1^2+L2^2)",
             "singular": "a2 - c x = 0, kappa = 0"}
    return PotentialPair("2d", p, _field(0.5 * hk + Vm / k2, v, sing),
                         _field(0.5 * hk + Vp / k2, v, sing), _field(fe, v, sing),
                         f, "eta", h, chart)


def solve_riccati_2d(b: float, b1: float, c: float) -> ex.Expr:
    """Closed-form f(eta) with f^2 - c(1+eta^2) f' = b (principal atan branch)."""
    if c == 0:
        raise ParamsError("c must be nonzero")
    eta = ex.Var("eta")
    at = ex.call("atan", eta)
    if b < 0:
        s = float(np.sqrt(-b))
        return s * ex.call("tan", (s / c) * (at - b1))
    if b > 0:
        s = float(np.sqrt(b))
        return s * ex.call("tanh", (s / c) * (b1 - at))
    return c / (b1 - at)


def riccati_singular(b: float, b1: float, c: float):
    """Mask function of eta marking poles of the Riccati solution."""
    def pred(eta):
        eta = np.asarray(eta, dtype=float)
        if b < 0:
            arg = np.sqrt(-b) / c * (np.arctan(eta) - b1)
            return np.abs(np.cos(arg)) < SINGULAR_BAND
        if b > 0:
            return np.zeros(eta.shape, dtype=bool)
        return np.abs(b1 - np.arctan(eta)) < SINGULAR_BAND
    return pred


def riccati_residual(f: ex.Expr, b: float, c: float, eta) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    fv = ex.evaluate(f, {"eta": eta})
    dfv = ex.evaluate(ex.differentiate(f, "eta"), {"eta": eta})
    return np.asarray(fv**2 - c * (1 + eta**2) * dfv - b)


def free_motion_partners_2d(b: float, b1: float, c: float, a1: float = 0.0,
                            a2: float = 1.0) -> PotentialPair:
    """Partner of free motion: h = -2b/kappa^2 (h = 0 when b = 0), so V0 = 0."""
    f = solve_riccati_2d(b, b1, c)
    kappa = ex.Var("kappa")
    h = ex.Const(0.0) if b == 0 else (-2.0 * b) / kappa ** 2.0
    pair = build_2d_pair(a1, a2, c, f, h, riccati_singular(b, b1, c))
    chart = dict(pair.chart, riccati={"b": b, "b1": b1, "case": "i" if b == 0 else "ii"})
    return PotentialPair("free-motion-2d", pair.params, pair.V0, pair.V1, pair.L0,
                         f, "eta", h, chart)


def free_motion_v1_2d(b: float, b1: float, c: float, a1: float, a2: float, pts) -> np.ndarray:
    """Closed-form V1 of the 2D free-motion partners, evaluated independently."""
    pts = np.asarray(pts, dtype=float)
    L1 = a1 + c * pts[..., 1]
    L2 = a2 - c * pts[..., 0]
    kappa = np.hypot(L1, L2)
    at = np.arctan(L1 / L2)
    if b == 0:
        return 2 * c**2 / (kappa * (b1 - at)) ** 2
    s = np.sqrt(abs(b))
    if b < 0:
        return -2 * b / (kappa * np.cos(s / c * (at - b1))) ** 2
    return -2 * b / (kappa * np.cosh(s / c * (at - b1))) ** 2


# ---------------------------------------------------------------- 3D

def _chart_exprs(chart: Chart3D):
    p = chart.params
    v = p.variables
    X = [ex.Var(s) for s in v]
    L = L_exprs(p, v)
    i, j, _ = VARIANTS[chart.variant]
    cv = chart.cvec
    beta = _dot(cv, X)
    axc = np.cross(p.a, cv)
    gamma = _dot(axc, X) + 0.5 * (beta ** 2.0 - chart.c2 * _sum_sq(X))
    return L, L[i] / L[j], beta, gamma


def _singular_3d(chart: Chart3D, extra=None):
    p = chart.params
    _, j, _ = VARIANTS[chart.variant]
    a2 = float(p.a @ p.a)

    def pred(pts):
        pts = np.asarray(pts, dtype=float)
        L = vector_field_L(p, pts)
        beta = pts @ chart.cvec
        gamma = pts @ np.cross(p.a, chart.cvec) + 0.5 * (
            beta**2 - chart.c2 * np.sum(pts**2, axis=-1))
        mask = (np.abs(L[..., j]) < SINGULAR_BAND) | (a2 - 2 * gamma < SINGULAR_BAND)
        if extra is not None:
            eta = L[..., VARIANTS[chart.variant][0]] / np.where(mask, 1.0, L[..., j])
            mask = mask | extra(eta)
        return mask
    return pred


def build_3d_pair(p: IntertwinerParams, f: ex.Expr, h: ex.Expr | None = None,
                  eta_choice: str = "eta", f_singular=None) -> PotentialPair:
    """V-+ = f^2 -+ p_v(eta) f', L^2 = a^2 - 2 gamma,
    V0 = h(beta, gamma)/2 + V-/L^2, V1 = h(beta, gamma)/2 + V+/L^2."""
    chart = Chart3D(p, eta_choice)
    L, eta, beta, gamma = _chart_exprs(chart)
    v = p.variables
    pe = p_expr(chart, ex.Var("eta"))
    fe = ex.substitute(f, {"eta": eta})
    Vm = ex.substitute(f ** 2.0 - pe * ex.differentiate(f, "eta"), {"eta": eta})
    Vp = ex.substitute(f ** 2.0 + pe * ex.differentiate(f, "eta"), {"eta": eta})
    LL = float(p.a @ p.a) - 2.0 * gamma
    h = ex.Const(0.0) if h is None else h
    hb = ex.substitute(h, {"beta": beta, "gamma": gamma})
    extra = ex.free_variables(hb) - set(v)
    if extra:
        raise ParamsError(f"h uses unknown variables {sorted(extra)}")
    sing = _singular_3d(chart, f_singular)
    i, j, _ = VARIANTS[eta_choice]
    meta = {"eta_variant": eta_choice, "eta": f"L{i + 1}/L{j + 1}",
            "p": ex.to_string(pe), "L^2": "a^2 - 2 gamma",
            "singular": f"L{j + 1} = 0 and a^2 - 2 gamma <= 0"}
    return PotentialPair("3d", p, _field(0.5 * hb + Vm / LL, v, sing),
                         _field(0.5 * hb + Vp / LL, v, sing), _field(fe, v, sing),
                         f, "eta", h, meta)


def _kind_f(chart: Chart3D, kind: int, b1: float):
    eta = ex.Var("eta")
    pe = p_expr(chart, eta)
    dp = ex.differentiate(pe, "eta")
    cabs = float(np.sqrt(chart.c2))
    if kind == 1:
        f = 1.0 / (b1 - ex.call("atan", dp / (2 * cabs)) / cabs)

        def sing(e):
            from .coords import p_poly_prime
            return np.abs(b1 - np.arctan(p_poly_prime(chart, e) / (2 * cabs)) / cabs) \
                < SINGULAR_BAND
        return f, sing
    if kind == 2:
        return 0.5 * dp, None
    if kind == 3:
        return 0.5 * dp + pe / (b1 - eta), (lambda e: np.abs(b1 - e) < SINGULAR_BAND)
    raise ValueError(f"kind must be 1, 2 or 3, got {kind!r}")


def free_motion_partners_3d(p: IntertwinerParams, kind: int, b1: float = 0.0,
                            eta_choice: str = "eta") -> PotentialPair:
    """3D partners of free motion (V0 = 0).

    kind 1: h = 0 and V- = 0; kinds 2, 3: V- = -c^2 and h = 2c^2/L^2.
    """
    chart = Chart3D(p, eta_choice)
    f, sing = _kind_f(chart, kind, b1)
    h = ex.Const(0.0) if kind == 1 else \
        2 * chart.c2 / (float(p.a @ p.a) - 2.0 * ex.Var("gamma"))
    pair = build_3d_pair(p, f, h, eta_choice, sing)
    chart_meta = dict(pair.chart, free_motion_kind=kind, b1=b1)
    return PotentialPair(f"free-motion-3d-{kind}", p, pair.V0, pair.V1, pair.L0,
                         f, "eta", h, chart_meta)


def free_motion_v1_3d(p: IntertwinerParams, kind: int, b1: float, pts,
                      eta_choice: str = "eta") -> np.ndarray:
    """Closed-form V1 of the 3D free-motion partners (independent evaluation)."""
    from .coords import forward_3d, p_poly, p_poly_prime
    chart = Chart3D(p, eta_choice)
    pts = np.asarray(pts, dtype=float)
    L = vector_field_L(p, pts)
    LL = np.sum(L**2, axis=-1)
    _, _, eta = forward_3d(chart, pts)
    dp = p_poly_prime(chart, eta)
    cc = chart.c2
    if kind == 1:
        f1 = 1 / (b1 - np.arctan(dp / (2 * np.sqrt(cc))) / np.sqrt(cc))
        return 2 * f1**2 / LL
    if kind == 2:
        return 2 / LL * (cc + 0.25 * dp**2)
    if kind == 3:
        f = 0.5 * dp + p_poly(chart, eta) / (b1 - eta)
        return 2 / LL * (cc + f**2)
    raise ValueError(f"kind must be 1, 2 or 3, got {kind!r}")


# ---------------------------------------------------------------- identity residuals

def _scaled(lhs, rhs, relative: bool) -> float:
    diff = np.abs(lhs - rhs)
    if relative:
        diff = diff / np.maximum(1.0, np.abs(lhs) + np.abs(rhs))
    return float(np.max(diff))


def gradient_identity_residual(pair: PotentialPair, pts, relative: bool = True) -> float:
    """max |2 d_j L0 - P L_j| (exact derivatives).

    With ``relative`` each point is divided by max(1, |lhs| + |rhs|), so
    samples close to a singular locus are judged on the same footing.
    """
    pts = np.asarray(pts, dtype=float)
    grad = pair.L0.gradient(pts)
    P = pair.P(pts)
    return _scaled(2 * grad, P[..., None] * pair.L(pts), relative)


def laplacian_identity_residual(pair: PotentialPair, pts, step: float = 1e-4,
                                relative: bool = True) -> float:
    """max |lap L0 - (1/2) L.grad P|; exact for expression fields, FD otherwise."""
    pts = np.asarray(pts, dtype=float)
    lap = pair.L0.laplacian(pts, step)
    LdP = np.sum(pair.L(pts) * pair.P.gradient(pts, step), axis=-1)
    return _scaled(lap, 0.5 * LdP, relative)


def shift_identity_residual(pair: PotentialPair, pts, step: float = 1e-4,
                            relative: bool = True) -> float:
    """max |L0 P - (1/2) L.grad(V1 + V0)|."""
    pts = np.asarray(pts, dtype=float)
    S = pair.V1 + pair.V0
    LdS = np.sum(pair.L(pts) * S.gradient(pts, step), axis=-1)
    return _scaled(pair.L0(pts) * pair.P(pts), 0.5 * LdS, relative)


def k_operator_residual(pair: PotentialPair, pts) -> float:
    """max over j<k of |K_jk P + 2 c_jk P| / max|P|, K_jk = L_j d_k - L_k d_j."""
    pts = np.asarray(pts, dtype=float)
    P = pair.P
    Pv = P(pts)
    grad = P.gradient(pts)
    L = pair.L(pts)
    c = pair.params.c
    scale = max(float(np.max(np.abs(Pv))), 1e-300)
    worst = 0.0
    for j in range(pair.n):
        for k in range(j + 1, pair.n):
            K = L[..., j] * grad[..., k] - L[..., k] * grad[..., j]
            worst = max(worst, float(np.max(np.abs(K + 2 * c[j, k] * Pv))))
    return worst / scale


def sample_nonsingular(pair: PotentialPair, count: int = 20, box=(-2.0, 2.0),
                       seed: int = 0, margin: float = 1e-2) -> np.ndarray:
    """Random points whose distance-like margin to the singular loci exceeds ``margin``."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        pts = rng.uniform(box[0], box[1], size=(4 * count, pair.n))
        ok = ~pair.singular_mask(pts)
        for shift in np.eye(pair.n) * margin:
            ok &= ~pair.singular_mask(pts + shift) & ~pair.singular_mask(pts - shift)
        out.extend(pts[ok])
    return np.array(out[:count])
