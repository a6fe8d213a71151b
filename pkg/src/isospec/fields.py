"""Scalar fields on R^n with optional exact derivatives and singular loci."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import expr as ex

__all__ = [
    "ScalarField", "SingularPointError", "coordinate_names",
    "fd_gradient", "fd_laplacian",
]

SINGULAR_BAND = 1e-6


class SingularPointError(ValueError):
    """Evaluation requested inside the guard band of a singular locus."""


def coordinate_names(n: int) -> tuple[str, ...]:
    if n == 1:
        return ("x",)
    if n == 2:
        return ("x", "y")
    if n == 3:
        return ("x", "y", "z")
    return tuple(f"x{i + 1}" for i in range(n))


def _points(pts, n: int) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    if pts.shape[-1] != n:
        raise ValueError(f"expected points with last axis {n}, got shape {pts.shape}")
    return pts


@dataclass(frozen=True)
class ScalarField:
    """A real function of points ``(..., n)``.

    ``expr`` (with ``variables``) gives exact derivatives; ``singular_at``
    returns a boolean mask of points where evaluation is refused.
    """

    n: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    singular_at: Callable[[np.ndarray], np.ndarray] | None = None
    expr: ex.Expr | None = None
    variables: tuple[str, ...] = ()
    description: str = ""
    _grad_cache: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_expr(cls, e: ex.Expr, variables: Sequence[str],
                  singular_at=None, description: str = "") -> "ScalarField":
        variables = tuple(variables)
        n = len(variables)

        def evaluator(pts):
            cols = {v: pts[..., i] for i, v in enumerate(variables)}
            return np.asarray(ex.evaluate(e, cols), dtype=float)

        return cls(n, evaluator, singular_at, e, variables,
                   description or ex.to_string(e))

    @classmethod
    def constant(cls, n: int, value: float = 0.0) -> "ScalarField":
        return cls.from_expr(ex.Const(float(value)), coordinate_names(n))

    def singular_mask(self, pts) -> np.ndarray:
        pts = _points(pts, self.n)
        if self.singular_at is None:
            return np.zeros(pts.shape[:-1], dtype=bool)
        return np.asarray(self.singular_at(pts), dtype=bool)

    def __call__(self, pts) -> np.ndarray:
        pts = _points(pts, self.n)
        mask = self.singular_mask(pts)
        if np.any(mask):
            bad = pts[mask][0] if mask.ndim else pts
            raise SingularPointError(
                f"{self.description or 'field'} is singular near {np.round(bad, 12).tolist()}")
        out = self.evaluator(pts)
        return np.broadcast_to(out, pts.shape[:-1]).astype(float)

    @property
    def exact(self) -> bool:
        return self.expr is not None

    def partial(self, j: int) -> "ScalarField":
        """Exact ∂_j as a new field (needs ``expr``)."""
        if self.expr is None:
            raise ValueError("exact derivative needs an expression-backed field")
        if j not in self._grad_cache:
            de = ex.differentiate(self.expr, self.variables[j])
            self._grad_cache[j] = ScalarField.from_expr(
                de, self.variables, self.singular_at)
        return self._grad_cache[j]

    def gradient(self, pts, step: float = 1e-5) -> np.ndarray:
        pts = _points(pts, self.n)
        if self.expr is not None:
            return np.stack([self.partial(j)(pts) for j in range(self.n)], axis=-1)
        return fd_gradient(self, pts, step)

    def laplacian(self, pts, step: float = 1e-4) -> np.ndarray:
        pts = _points(pts, self.n)
        if self.expr is not None:
            return sum(self.partial(j).partial(j)(pts) for j in range(self.n))
        return fd_laplacian(self, pts, step)

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return _combine(self, other, 1.0, 1.0)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return _combine(self, other, 1.0, -1.0)

    def scaled(self, s: float) -> "ScalarField":
        if self.expr is not None:
            return ScalarField.from_expr(ex.Const(float(s)) * self.expr, self.variables,
                                         self.singular_at)
        return ScalarField(self.n, lambda p: s * self.evaluator(p), self.singular_at)

    def shifted(self, value: float) -> "ScalarField":
        if self.expr is not None:
            return ScalarField.from_expr(self.expr + float(value), self.variables,
                                         self.singular_at)
        return ScalarField(self.n, lambda p: self.evaluator(p) + value, self.singular_at)


def union_singular(*preds):
    preds = [p for p in preds if p is not None]
    if not preds:
        return None

    def pred(pts):
        mask = np.zeros(np.shape(pts)[:-1], dtype=bool)
        for p in preds:
            mask |= np.asarray(p(pts), dtype=bool)
        return mask

    return pred


def _combine(a: ScalarField, b: ScalarField, sa: float, sb: float) -> ScalarField:
    if a.n != b.n:
        raise ValueError("dimension mismatch")
    sing = union_singular(a.singular_at, b.singular_at)
    if a.expr is not None and b.expr is not None and a.variables == b.variables:
        return ScalarField.from_expr(sa * a.expr + sb * b.expr, a.variables, sing)
    return ScalarField(a.n, lambda p: sa * a.evaluator(p) + sb * b.evaluator(p), sing)


def fd_gradient(f: Callable, pts, step: float = 1e-5, richardson: bool = True) -> np.ndarray:
    """Central-difference gradient, Richardson-extrapolated by default."""
    pts = np.asarray(pts, dtype=float)
    n = pts.shape[-1]
    out = np.empty(pts.shape)

    def central(j, h):
        e = np.zeros(n)
        e[j] = h
        return (f(pts + e) - f(pts - e)) / (2 * h)

    for j in range(n):
        if richardson:
            out[..., j] = (4 * central(j, step / 2) - central(j, step)) / 3
        else:
            out[..., j] = central(j, step)
    return out


def fd_laplacian(f: Callable, pts, step: float = 1e-4) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    n = pts.shape[-1]
    centre = f(pts)
    total = np.zeros(pts.shape[:-1])
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        total = total + (f(pts + e) - 2 * centre + f(pts - e)) / step**2
    return total
