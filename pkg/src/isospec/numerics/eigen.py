"""Dirichlet finite-difference eigensolver for -d^2/dx^2 + V on a uniform grid.

Eigenvalues come from Sturm-sequence bisection on the symmetric tridiagonal
matrix, eigenvectors from inverse iteration.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .. import expr as ex
from ..fields import ScalarField, SingularPointError

__all__ = ["Grid1D", "Spectrum", "sturm_count", "bisect_eigenvalues",
           "inverse_iteration", "tridiagonal", "solve_1d_eigen", "potential_on_grid"]


@dataclass(frozen=True)
class Grid1D:
    lo: float
    hi: float
    N: int

    def __post_init__(self):
        if self.N < 3:
            raise ValueError("need at least 3 interior nodes")
        if not self.hi > self.lo:
            raise ValueError("empty domain")

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / (self.N + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.lo + self.h * np.arange(1, self.N + 1)


@dataclass(frozen=True)
class Spectrum:
    grid: Grid1D
    values: np.ndarray
    vectors: np.ndarray          # (k, N), sum(psi^2) h = 1
    residuals: np.ndarray
    tolerance: float
    potential: np.ndarray = field(repr=False, default=None)

    def __len__(self):
        return len(self.values)

    def to_rows(self) -> list[tuple]:
        return [(i, float(E), float(r)) for i, (E, r) in enumerate(zip(self.values, self.residuals))]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "eigenvalue", "residual"])
        for i, E, r in self.to_rows():
            w.writerow([i, "%.17g" % E, "%.17g" % r])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "grid": {"lo": self.grid.lo, "hi": self.grid.hi, "N": self.grid.N},
            "eigenvalues": [float(v) for v in self.values],
            "residuals": [float(v) for v in self.residuals],
            "tolerance": self.tolerance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def tridiagonal(V: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    d = 2.0 / h**2 + np.asarray(V, dtype=float)
    e = np.full(d.size - 1, -1.0 / h**2)
    return d, e


def sturm_count(d: np.ndarray, e: np.ndarray, x) -> np.ndarray:
    """Number of eigenvalues strictly below each shift in ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    e2 = e**2
    tiny = np.finfo(float).tiny ** 0.5
    q = d[0] - x
    count = (q < 0).astype(int)
    for i in range(1, d.size):
        q = np.where(q == 0, tiny, q)
        q = d[i] - x - e2[i - 1] / q
        count += q < 0
    return count


def bisect_eigenvalues(d: np.ndarray, e: np.ndarray, k: int, max_iter: int = 200) -> np.ndarray:
    """Lowest k eigenvalues, all bisected simultaneously."""
    n = d.size
    if k > n:
        raise ValueError(f"requested {k} eigenvalues from a {n}x{n} matrix")
    off = np.zeros(n)
    off[:-1] += np.abs(e)
    off[1:] += np.abs(e)
    glo, ghi = float(np.min(d - off)), float(np.max(d + off))
    idx = np.arange(k)
    lo = np.full(k, glo)
    hi = np.full(k, ghi)
    eps = np.finfo(float).eps
    scale = max(abs(glo), abs(ghi))
    for _ in range(max_iter):
        width = hi - lo
        if np.all(width <= 4 * eps * scale):
            break
        mid = 0.5 * (lo + hi)
        below = sturm_count(d, e, mid) > idx
        hi = np.where(below, mid, hi)
        lo = np.where(below, lo, mid)
    return 0.5 * (lo + hi)


def _matvec(d, e, x):
    y = d * x
    y[:-1] += e * x[1:]
    y[1:] += e * x[:-1]
    return y


def inverse_iteration(d: np.ndarray, e: np.ndarray, lam: float, iters: int = 4,
                      seed: int = 0) -> np.ndarray:
    """Unit-2-norm eigenvector for eigenvalue ``lam``; sign fixed by the first large entry."""
    n = d.size
    scale = max(1.0, abs(lam), float(np.max(np.abs(d))))
    shift = lam + 8 * np.finfo(float).eps * scale
    ab = np.zeros((3, n))
    ab[0, 1:] = e
    ab[1] = d - shift
    ab[2, :-1] = e
    x = np.random.default_rng(seed).uniform(0.5, 1.5, n)
    for _ in range(iters):
        x = solve_banded((1, 1), ab, x)
        x /= np.linalg.norm(x)
    j = int(np.argmax(np.abs(x) > 1e-3 * np.max(np.abs(x))))
    return x if x[j] > 0 else -x


def potential_on_grid(V, grid: Grid1D) -> np.ndarray:
    """Sample V (ScalarField, Expr in one variable, callable or array) on the nodes."""
    x = grid.nodes
    if isinstance(V, ScalarField):
        vals = V(x[:, None])
    elif isinstance(V, ex.Expr):
        names = sorted(ex.free_variables(V))
        if len(names) > 1:
            raise ValueError(f"potential depends on several variables {names}")
        try:
            vals = ex.evaluate(V, {names[0]: x}) if names else np.full(x.size, ex.evaluate(V, {}))
        except ex.DomainError as err:
            raise SingularPointError(f"potential cannot be evaluated on the grid: {err}") from err
    elif callable(V):
        vals = V(x)
    else:
        vals = V
    vals = np.broadcast_to(np.asarray(vals, dtype=float), x.shape).copy()
    if not np.all(np.isfinite(vals)):
        bad = x[~np.isfinite(vals)][0]
        raise SingularPointError(f"potential is not finite at node x = {bad:.17g}")
    return vals


def solve_1d_eigen(V, grid: Grid1D, k: int, rtol: float = 1e-8) -> Spectrum:
    """Lowest ``k`` eigenpairs of -d^2/dx^2 + V with Dirichlet ends."""
    if k > grid.N:
        raise ValueError(f"k = {k} exceeds the {grid.N} grid nodes")
    Vn = potential_on_grid(V, grid)
    d, e = tridiagonal(Vn, grid.h)
    values = bisect_eigenvalues(d, e, k)
    vecs = np.empty((k, grid.N))
    res = np.empty(k)
    width = float(np.max(d) + 2 / grid.h**2 - np.min(d) + 2 / grid.h**2)
    for i, lam in enumerate(values):
        v = inverse_iteration(d, e, lam)
        v = v / np.sqrt(grid.h)
        vecs[i] = v
        res[i] = np.max(np.abs(_matvec(d, e, v) - lam * v))
    return Spectrum(grid, values, vecs, res, rtol * width, Vn)


def apply_hamiltonian(V: np.ndarray, psi: np.ndarray, h: float) -> np.ndarray:
    """Dirichlet FD (-d^2 + V) psi on the interior nodes."""
    d, e = tridiagonal(V, h)
    return _matvec(d, e, np.asarray(psi, dtype=float))


def as_callable(V) -> Callable:
    if isinstance(V, ex.Expr):
        names = sorted(ex.free_variables(V))
        return lambda x: ex.evaluate(V, {names[0]: x}) if names else ex.evaluate(V, {})
    return V
