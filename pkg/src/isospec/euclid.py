"""Intertwiner parameters (a, c), the vector field L and the e(n) generators.

L_j = a_j + sum_k c_jk x_k with c antisymmetric.  The differential part of
the intertwiner is L_d = sum_j a_j T_j + sum_{j<k} c_jk L_jk where
T_j = d_j and L_jk = x_k d_j - x_j d_k.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import expr as ex
from .fields import ScalarField, SingularPointError, coordinate_names, fd_gradient

__all__ = [
    "IntertwinerParams", "ParamsError", "make_params", "params_3d",
    "vector_field_L", "L_exprs", "apply_Ld",
    "Polynomial", "Generator", "translation", "rotation", "generators",
    "commutator_table", "CommutatorReport", "laplacian_commutes",
    "L_polynomials", "random_polynomial",
]


class ParamsError(ValueError):
    pass


@dataclass(frozen=True)
class IntertwinerParams:
    n: int
    a: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.a.setflags(write=False)
        self.c.setflags(write=False)

    @property
    def c_vector(self) -> np.ndarray:
        """(c_23, c_31, c_12) for n = 3."""
        if self.n != 3:
            raise ParamsError("c_vector is defined for n = 3 only")
        c = self.c
        return np.array([c[1, 2], c[2, 0], c[0, 1]])

    @property
    def variables(self) -> tuple[str, ...]:
        return coordinate_names(self.n)

    def to_dict(self) -> dict:
        return {"n": self.n, "a": self.a.tolist(), "c": self.c.tolist()}


def make_params(n: int, a: Sequence[float], c) -> IntertwinerParams:
    """Validate and pack (a, c).

    ``c`` is an n x n antisymmetric matrix; for n = 2 a scalar c_12 and for
    n = 3 the vector (c_23, c_31, c_12) are also accepted.
    """
    if n < 1:
        raise ParamsError("dimension must be >= 1")
    a = np.array(a, dtype=float).reshape(-1)
    if a.shape != (n,):
        raise ParamsError(f"a has {a.size} components, expected {n}")
    c = np.array(c, dtype=float)
    if n == 2 and c.ndim == 0:
        c = np.array([[0.0, float(c)], [-float(c), 0.0]])
    elif n == 3 and c.shape == (3,):
        c1, c2, c3 = c
        c = np.array([[0.0, c3, -c2], [-c3, 0.0, c1], [c2, -c1, 0.0]])
    if c.shape != (n, n):
        raise ParamsError(f"c has shape {c.shape}, expected {(n, n)}")
    # user literals: exact check, no tolerance
    if np.any(c + c.T != 0):
        j, k = np.argwhere(c + c.T != 0)[0]
        raise ParamsError(
            f"c is not antisymmetric: c[{j + 1}{k + 1}] = {c[j, k]!r}, "
            f"c[{k + 1}{j + 1}] = {c[k, j]!r}")
    return IntertwinerParams(n, a, c)


def params_3d(a, c_vec) -> IntertwinerParams:
    return make_params(3, a, np.asarray(c_vec, dtype=float))


def vector_field_L(p: IntertwinerParams, pts) -> np.ndarray:
    """L(x) = a + c x, evaluated on points of shape (..., n)."""
    pts = np.asarray(pts, dtype=float)
    return p.a + pts @ p.c.T


def L_exprs(p: IntertwinerParams, variables: Sequence[str] | None = None) -> list[ex.Expr]:
    variables = tuple(variables or p.variables)
    out = []
    for j in range(p.n):
        e: ex.Expr = ex.Const(float(p.a[j]))
        for k in range(p.n):
            if p.c[j, k] != 0:
                e = e + ex.Const(float(p.c[j, k])) * ex.Var(variables[k])
        out.append(e)
    return out


def apply_Ld(p: IntertwinerParams, phi, pts, step: float = 1e-5) -> np.ndarray:
    """(L . grad phi) at ``pts``.

    Uses exact derivatives when ``phi`` is an expression-backed field,
    otherwise Richardson-extrapolated central differences with ``step``.
    """
    pts = np.asarray(pts, dtype=float)
    if isinstance(phi, ScalarField):
        if np.any(phi.singular_mask(pts)):
            raise SingularPointError("L_d requested inside a singular region")
        grad = phi.gradient(pts, step)
    else:
        grad = fd_gradient(phi, pts, step)
    return np.sum(vector_field_L(p, pts) * grad, axis=-1)


# ---------------------------------------------------------------- polynomials

@dataclass(frozen=True)
class Polynomial:
    """Sparse real polynomial in n variables: {exponent tuple: coefficient}."""

    n: int
    terms: dict = field(default_factory=dict)

    @classmethod
    def constant(cls, n, value):
        return cls(n, {(0,) * n: float(value)} if value else {})

    @classmethod
    def coordinate(cls, n, j):
        e = [0] * n
        e[j] = 1
        return cls(n, {tuple(e): 1.0})

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(self.n, other)
        t = dict(self.terms)
        for k, v in other.terms.items():
            t[k] = t.get(k, 0.0) + v
        return Polynomial(self.n, {k: v for k, v in t.items() if v != 0})

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.n, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, Polynomial) else -other)

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            if other == 0:
                return Polynomial(self.n)
            return Polynomial(self.n, {k: v * other for k, v in self.terms.items()})
        t: dict = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                k = tuple(i + j for i, j in zip(k1, k2))
                t[k] = t.get(k, 0.0) + v1 * v2
        return Polynomial(self.n, {k: v for k, v in t.items() if v != 0})

    __rmul__ = __mul__

    def partial(self, j: int) -> "Polynomial":
        t = {}
        for k, v in self.terms.items():
            if k[j]:
                kk = list(k)
                kk[j] -= 1
                t[tuple(kk)] = v * k[j]
        return Polynomial(self.n, t)

    def laplacian(self) -> "Polynomial":
        out = Polynomial(self.n)
        for j in range(self.n):
            out = out + self.partial(j).partial(j)
        return out

    @property
    def degree(self) -> int:
        return max((sum(k) for k in self.terms), default=0)

    def max_abs_coefficient(self) -> float:
        return max((abs(v) for v in self.terms.values()), default=0.0)

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape[:-1])
        for k, v in self.terms.items():
            out = out + v * np.prod(pts ** np.array(k), axis=-1)
        return out


def random_polynomial(n: int, degree: int, rng: np.random.Generator) -> Polynomial:
    """Dense polynomial of total degree <= ``degree`` with N(0,1) coefficients."""
    terms = {}
    for k in itertools.product(range(degree + 1), repeat=n):
        if sum(k) <= degree:
            terms[k] = float(rng.standard_normal())
    return Polynomial(n, terms)


@dataclass(frozen=True)
class Generator:
    """First-order operator sum_i coeffs[i] d_i with polynomial coefficients."""

    name: str
    coeffs: tuple

    def __call__(self, f: Polynomial) -> Polynomial:
        out = Polynomial(f.n)
        for i, ci in enumerate(self.coeffs):
            if ci.terms:
                out = out + ci * f.partial(i)
        return out


def translation(n: int, j: int) -> Generator:
    coeffs = [Polynomial(n) for _ in range(n)]
    coeffs[j] = Polynomial.constant(n, 1.0)
    return Generator(f"T{j + 1}", tuple(coeffs))


def rotation(n: int, j: int, k: int) -> Generator:
    """L_jk = x_k d_j - x_j d_k (any j, k; L_jj = 0)."""
    coeffs = [Polynomial(n) for _ in range(n)]
    if j != k:
        coeffs[j] = coeffs[j] + Polynomial.coordinate(n, k)
        coeffs[k] = coeffs[k] - Polynomial.coordinate(n, j)
    return Generator(f"L{j + 1}{k + 1}", tuple(coeffs))


def generators(n: int) -> list[Generator]:
    gens = [translation(n, j) for j in range(n)]
    gens += [rotation(n, j, k) for j in range(n) for k in range(j + 1, n)]
    return gens


# Right-hand sides of the e(n) relations as {(kind, indices): coefficient}
# with kind "T" or "L"; L indices may be in any order.

def _rhs(a: tuple, b: tuple) -> dict:
    d = lambda i, j: 1.0 if i == j else 0.0  # noqa: E731
    ka, kb = a[0], b[0]
    if ka == "T" and kb == "T":
        return {}
    if ka == "T" and kb == "L":
        j = a[1]
        k, m = b[1], b[2]
        return {("T", k): d(j, m), ("T", m): -d(j, k)}
    if ka == "L" and kb == "T":
        return {key: -v for key, v in _rhs(b, a).items()}
    j, k = a[1], a[2]
    l, m = b[1], b[2]
    return {("L", l, k): d(j, m), ("L", m, k): -d(j, l),
            ("L", m, j): d(k, l), ("L", l, j): -d(k, m)}


def _apply_combo(n: int, combo: dict, f: Polynomial) -> Polynomial:
    out = Polynomial(n)
    for key, coef in combo.items():
        if coef == 0:
            continue
        g = translation(n, key[1]) if key[0] == "T" else rotation(n, key[1], key[2])
        out = out + g(f) * coef
    return out


def _describe(combo: dict) -> str:
    parts = []
    for key, coef in combo.items():
        if coef == 0:
            continue
        name = f"T{key[1] + 1}" if key[0] == "T" else f"L{key[1] + 1}{key[2] + 1}"
        parts.append(f"{'+' if coef > 0 else '-'}{name}")
    return " ".join(parts) if parts else "0"


@dataclass
class CommutatorReport:
    n: int
    entries: list = field(default_factory=list)   # (A, B, rhs, residual)

    @property
    def max_residual(self) -> float:
        return max((e[3] for e in self.entries), default=0.0)

    def to_dict(self) -> dict:
        return {"n": self.n, "max_residual": self.max_residual,
                "entries": [{"A": a, "B": b, "rhs": r, "residual": res}
                            for a, b, r, res in self.entries]}


def commutator_table(n: int, seed: int = 0, n_functions: int = 3,
                     n_points: int = 10) -> CommutatorReport:
    """Check every [A, B] among {T_j, L_jk} against the e(n) relations.

    Each commutator and its expected right-hand side are applied to random
    cubic polynomials (exact differentiation) and compared at random points.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    keys = [("T", j) for j in range(n)]
    keys += [("L", j, k) for j in range(n) for k in range(j + 1, n)]
    gen = {key: (translation(n, key[1]) if key[0] == "T" else rotation(n, key[1], key[2]))
           for key in keys}
    funcs = [random_polynomial(n, 3, rng) for _ in range(n_functions)]
    pts = rng.uniform(-2.0, 2.0, size=(n_points, n))
    report = CommutatorReport(n)
    for ka, kb in itertools.product(keys, repeat=2):
        A, B = gen[ka], gen[kb]
        combo = _rhs(ka, kb)
        worst = 0.0
        for f in funcs:
            diff = A(B(f)) - B(A(f)) - _apply_combo(n, combo, f)
            worst = max(worst, float(np.max(np.abs(diff(pts)))))
        report.entries.append((A.name, B.name, _describe(combo), worst))
    return report


def L_polynomials(p: IntertwinerParams) -> list[Polynomial]:
    n = p.n
    out = []
    for j in range(n):
        q = Polynomial.constant(n, p.a[j])
        for k in range(n):
            if p.c[j, k]:
                q = q + Polynomial.coordinate(n, k) * p.c[j, k]
        out.append(q)
    return out


def laplacian_commutes(p: IntertwinerParams | None, phi: Polynomial,
                       L: Sequence[Polynomial] | None = None,
                       n_points: int = 20, seed: int = 0) -> float:
    """Max |[lap, L_d] phi| at random points in [-2, 2]^n.

    ``L`` overrides the vector field (used for negative controls).
    """
    if L is None:
        L = L_polynomials(p)
    Ld = Generator("Ld", tuple(L))
    comm = Ld(phi).laplacian() - Ld(phi.laplacian())
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-2.0, 2.0, size=(n_points, phi.n))
    return float(np.max(np.abs(comm(pts))))
