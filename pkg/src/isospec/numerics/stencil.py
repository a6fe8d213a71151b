"""Central-difference operators on tensor blocks and the intertwining verifiers.

A block is an array whose last n axes form a uniform grid with spacing h;
leading axes (if any) enumerate independent patches.  Every operator crops
one layer on each spatial axis, so nested operators stay aligned.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..fields import ScalarField, SingularPointError

__all__ = [
    "GaussianBump", "Block", "patch_block", "grid_block", "crop", "d1", "laplacian",
    "apply_H", "apply_L", "apply_Ldag", "intertwining_field", "intertwining_residual", "symmetry_residual",
    "ladder_check", "ConvergenceTable", "convergence_study", "observed_order", "node_lattice",
]


@dataclass(frozen=True)
class GaussianBump:
    center: tuple
    width: float = 0.5

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        r2 = np.sum((pts - np.asarray(self.center, dtype=float)) ** 2, axis=-1)
        return np.exp(-0.5 * r2 / self.width**2)


@dataclass(frozen=True)
class Block:
    points: np.ndarray    # (..., s_1, ..., s_n, n)
    h: float
    n: int

    def sample(self, F) -> np.ndarray:
        out = F(self.points)
        return np.broadcast_to(np.asarray(out, dtype=float), self.points.shape[:-1])


def patch_block(nodes, h: float, radius: int) -> Block:
    """Stencil patches of half-width ``radius`` around each node."""
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    n = nodes.shape[-1]
    ax = np.arange(-radius, radius + 1) * h
    offs = np.stack(np.meshgrid(*([ax] * n), indexing="ij"), axis=-1)
    pts = nodes.reshape((-1,) + (1,) * n + (n,)) + offs
    return Block(pts, h, n)


def grid_block(lo, hi, h: float) -> Block:
    """Full tensor grid covering [lo, hi] with spacing h."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    axes = [l + h * np.arange(int(round((u - l) / h)) + 1) for l, u in zip(lo, hi)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return Block(pts, h, lo.size)


def _sl(n: int, axis: int, start: int, stop: int | None, r: int) -> tuple:
    """Slice tuple for the last n axes: [start:stop] on ``axis``, [r:-r] elsewhere."""
    out = [Ellipsis]
    for a in range(n):
        if a == axis:
            out.append(slice(start, stop))
        else:
            out.append(slice(r, -r if r else None))
    return tuple(out)


def crop(u: np.ndarray, n: int, r: int = 1) -> np.ndarray:
    if r == 0:
        return u
    return u[(Ellipsis,) + (slice(r, -r),) * n]


def d1(u: np.ndarray, axis: int, h: float, n: int) -> np.ndarray:
    return (u[_sl(n, axis, 2, None, 1)] - u[_sl(n, axis, 0, -2, 1)]) / (2 * h)


def laplacian(u: np.ndarray, h: float, n: int) -> np.ndarray:
    c = crop(u, n)
    out = np.zeros_like(c)
    for a in range(n):
        out += u[_sl(n, a, 2, None, 1)] - 2 * c + u[_sl(n, a, 0, -2, 1)]
    return out / h**2


def apply_H(u, V, h, n):
    """(-lap + V) u; V is sampled on the same block as u."""
    return -laplacian(u, h, n) + crop(V, n) * crop(u, n)


def apply_L(u, L0, Lvec, h, n, sign: float = 1.0):
    """(L0 + sign * L.grad) u; Lvec has a trailing component axis."""
    out = crop(L0, n) * crop(u, n)
    for a in range(n):
        out = out + sign * crop(Lvec[..., a], n) * d1(u, a, h, n)
    return out


def apply_Ldag(u, L0, Lvec, h, n):
    """Formal adjoint L0 - L.grad (div L = 0 for antisymmetric c)."""
    return apply_L(u, L0, Lvec, h, n, sign=-1.0)


@dataclass
class _Sampled:
    psi: np.ndarray
    V0: np.ndarray
    V1: np.ndarray
    L0: np.ndarray
    L: np.ndarray
    h: float
    n: int

    def crop(self, r: int = 1) -> "_Sampled":
        n = self.n
        L = self.L[(Ellipsis,) + (slice(r, -r),) * n + (slice(None),)]
        return _Sampled(crop(self.psi, n, r), crop(self.V0, n, r), crop(self.V1, n, r),
                        crop(self.L0, n, r), L, self.h, n)


def _sample(pair, psi, block: Block) -> _Sampled:
    pts = block.points
    for F in (pair.V0, pair.V1, pair.L0):
        if isinstance(F, ScalarField) and np.any(F.singular_mask(pts)):
            raise SingularPointError("test-function support touches a singular region")
    return _Sampled(block.sample(psi), block.sample(pair.V0), block.sample(pair.V1),
                    block.sample(pair.L0), pair.L(pts), block.h, block.n)


def _layers(s: _Sampled, k: int) -> list[_Sampled]:
    return [s.crop(r) if r else s for r in range(k)]


def _max(u) -> float:
    return float(np.max(np.abs(u)))


def intertwining_field(pair, psi, h: float, nodes=None, box=None) -> np.ndarray:
    """(L H0 - H1 L) psi on the patch centres or on the inner interior of the box grid."""
    block = patch_block(nodes, h, 2) if box is None else grid_block(box[0], box[1], h)
    s = _sample(pair, psi, block)
    s1 = s.crop(1)
    n = s.n
    LH0 = apply_L(apply_H(s.psi, s.V0, h, n), s1.L0, s1.L, h, n)
    H1L = apply_H(apply_L(s.psi, s.L0, s.L, h, n), s1.V1, h, n)
    return LH0 - H1L


def intertwining_residual(pair, psi, h: float, nodes=None, box=None) -> float:
    """max |(L H0 - H1 L) psi| over the evaluation nodes.

    Either ``nodes`` (local stencil patches) or ``box`` = (lo, hi) (full
    tensor grid, residual over its inner interior) must be given.
    """
    return _max(intertwining_field(pair, psi, h, nodes, box))


def symmetry_residual(pair, psi, h: float, nodes=None, box=None) -> tuple[float, float]:
    """(max |[H0, L^dag L] psi|, max |[L L^dag, H1] psi|)."""
    block = patch_block(nodes, h, 3) if box is None else grid_block(box[0], box[1], h)
    s = _sample(pair, psi, block)
    s0, s1, s2 = _layers(s, 3)
    n, u = s.n, s.psi

    def LdL(w, a, b):          # L^dag L with fields on layers a (outer) and b (inner)
        return apply_Ldag(apply_L(w, a.L0, a.L, h, n), b.L0, b.L, h, n)

    def LLd(w, a, b):
        return apply_L(apply_Ldag(w, a.L0, a.L, h, n), b.L0, b.L, h, n)

    r0 = apply_H(LdL(u, s0, s1), s2.V0, h, n) - LdL(apply_H(u, s0.V0, h, n), s1, s2)
    r1 = LLd(apply_H(u, s0.V1, h, n), s1, s2) - apply_H(LLd(u, s0, s1), s2.V1, h, n)
    return _max(r0), _max(r1)


def ladder_check(pair, p0: float, psi, h: float, nodes=None, box=None) -> dict:
    """Residuals of [H0, L] + p0 L, [H0, L^dag] - p0 L^dag and [L, L^dag] - p0 a^2."""
    block = patch_block(nodes, h, 2) if box is None else grid_block(box[0], box[1], h)
    s = _sample(pair, psi, block)
    s0, s1, s2 = _layers(s, 3)
    n, u = s.n, s.psi
    a2 = float(pair.params.a @ pair.params.a)
    HL = apply_H(apply_L(u, s0.L0, s0.L, h, n), s1.V0, h, n)
    LH = apply_L(apply_H(u, s0.V0, h, n), s1.L0, s1.L, h, n)
    Lu = crop(apply_L(u, s0.L0, s0.L, h, n), n)
    HLd = apply_H(apply_Ldag(u, s0.L0, s0.L, h, n), s1.V0, h, n)
    LdH = apply_Ldag(apply_H(u, s0.V0, h, n), s1.L0, s1.L, h, n)
    Ldu = crop(apply_Ldag(u, s0.L0, s0.L, h, n), n)
    LLd = apply_L(apply_Ldag(u, s0.L0, s0.L, h, n), s1.L0, s1.L, h, n)
    LdL = apply_Ldag(apply_L(u, s0.L0, s0.L, h, n), s1.L0, s1.L, h, n)
    return {
        "lowering": _max(HL - LH + p0 * Lu),
        "raising": _max(HLd - LdH - p0 * Ldu),
        "commutator": _max(LLd - LdL - p0 * a2 * s2.psi),
    }


@dataclass
class ConvergenceTable:
    steps: list
    residuals: list
    orders: list = field(default_factory=list)

    @property
    def order(self) -> float:
        """Least-squares slope of log residual against log h."""
        return observed_order(self.steps, self.residuals)

    def to_rows(self) -> list[tuple]:
        rows = []
        for i, (h, r) in enumerate(zip(self.steps, self.residuals)):
            rows.append((h, r, self.orders[i - 1] if i else float("nan")))
        return rows

    def to_dict(self) -> dict:
        return {"h": list(self.steps), "residual": list(self.residuals),
                "pairwise_order": list(self.orders), "fitted_order": self.order}


def observed_order(steps, residuals) -> float:
    h = np.log(np.asarray(steps, dtype=float))
    r = np.log(np.maximum(np.asarray(residuals, dtype=float), 1e-300))
    return float(np.polyfit(h, r, 1)[0])


def convergence_study(pair, psi, h0: float, nodes=None, box=None, halvings: int = 3,
                      kind: str = "intertwining") -> ConvergenceTable:
    """Residual at h0, h0/2, ..., h0/2^halvings, evaluated at the same nodes."""
    steps, res = [], []
    for m in range(halvings + 1):
        h = h0 / 2**m
        if kind == "intertwining" and box is not None:
            # compare only at nodes shared with the coarsest grid
            u = intertwining_field(pair, psi, h, None, box)
            stride = 2**m
            sl = (slice(2 * stride - 2, None, stride),) * u.ndim
            r = _max(u[sl][(slice(0, -1),) * u.ndim] if m else u)
        elif kind == "intertwining":
            r = intertwining_residual(pair, psi, h, nodes, box)
        elif kind == "symmetry":
            r = max(symmetry_residual(pair, psi, h, nodes, box))
        else:
            raise ValueError(f"unknown residual kind {kind!r}")
        steps.append(h)
        res.append(r)
    orders = [float(np.log2(res[i - 1] / res[i])) if res[i] > 0 and res[i - 1] > 0
              else float("nan") for i in range(1, len(res))]
    return ConvergenceTable(steps, res, orders)


def node_lattice(center, half_width: float, count: int = 5) -> np.ndarray:
    """count^n evaluation nodes on a cube around ``center``."""
    center = np.asarray(center, dtype=float)
    ax = np.linspace(-half_width, half_width, count)
    grids = np.meshgrid(*([ax] * center.size), indexing="ij")
    return center + np.stack([g.ravel() for g in grids], axis=-1)
