"""Darboux steps, missing states and chains of 1D partner problems, plus the 2D embedding."""

from __future__ import annotations

import csv
import io
import json
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import expr as ex
from .fields import SINGULAR_BAND, ScalarField, SingularPointError
from .numerics.eigen import Grid1D, Spectrum, potential_on_grid, solve_1d_eigen
from .potentials import PotentialPair
from .euclid import make_params

__all__ = [
    "NodeWarning", "DarbouxStep", "darboux_step", "missing_state", "partner_residual",
    "wronskian", "HierarchyLevel", "Hierarchy", "build_hierarchy", "embed_2d",
]

log = logging.getLogger(__name__)


class NodeWarning(UserWarning):
    """A seed with nodes produces a singular transformed potential."""


def _grid_d1(u: np.ndarray, h: float) -> np.ndarray:
    padded = np.concatenate([[0.0], u, [0.0]])
    return (padded[2:] - padded[:-2]) / (2 * h)


def _ratio_log_derivative(V: np.ndarray, lam: float, h: float, peak: int):
    """(ln phi)' of the discrete eigenvector at ``lam`` from ratio recurrences.

    s_i = phi_{i+1}/phi_i runs from the left edge, t_i = phi_{i-1}/phi_i from
    the right edge; each is used on the side where it is stable.  Returns the
    central-difference log-derivative and the number of sign changes.
    """
    N = V.size
    d = 2.0 + h**2 * (V - lam)
    s = np.empty(N)
    t = np.empty(N)
    s[0] = d[0]
    for i in range(1, peak + 1):
        s[i] = d[i] - 1.0 / s[i - 1]
    t[N - 1] = d[N - 1]
    for i in range(N - 2, peak - 1, -1):
        t[i] = d[i] - 1.0 / t[i + 1]
    w = np.empty(N)
    left = np.arange(peak + 1)
    right = np.arange(peak, N)
    back = np.concatenate([[0.0], 1.0 / s[:peak]])          # t_i = 1/s_{i-1}
    w[left] = (s[left] - back) / (2 * h)
    fwd = np.concatenate([1.0 / t[peak + 1:], [0.0]])        # s_i = 1/t_{i+1}
    w[right] = (fwd - t[right]) / (2 * h)
    changes = int(np.sum(s[:peak] < 0) + np.sum(t[peak + 1:] < 0))
    return w, changes


@dataclass(frozen=True)
class DarbouxStep:
    grid: Grid1D
    seed_energy: float
    seed: np.ndarray
    log_derivative: np.ndarray          # (ln phi)' on the nodes
    V_old: np.ndarray
    V_new: np.ndarray
    has_nodes: bool = False
    V_new_expr: ex.Expr | None = None
    seed_expr: ex.Expr | None = None
    variable: str = "x"

    def state_map(self, psi) -> np.ndarray:
        """psi -> psi' - (ln phi)' psi on the nodes (psi: grid values or Expr)."""
        if isinstance(psi, ex.Expr):
            x = self.grid.nodes
            names = sorted(ex.free_variables(psi)) or [self.variable]
            dpsi = ex.differentiate(psi, names[0])
            return ex.evaluate(dpsi, {names[0]: x}) - self.log_derivative * \
                ex.evaluate(psi, {names[0]: x})
        psi = np.asarray(psi, dtype=float)
        return _grid_d1(psi, self.grid.h) - self.log_derivative * psi

    def state_map_expr(self, psi: ex.Expr) -> ex.Expr:
        if self.seed_expr is None:
            raise ValueError("symbolic state map needs an expression seed")
        v = self.variable
        w = ex.differentiate(self.seed_expr, v) / self.seed_expr
        return ex.differentiate(psi, v) - w * psi


def _single_variable(e: ex.Expr, default: str) -> str:
    names = sorted(ex.free_variables(e))
    if len(names) > 1:
        raise ValueError(f"expected one variable, got {names}")
    return names[0] if names else default


def darboux_step(V, seed, lam: float, grid: Grid1D, variable: str = "x") -> DarbouxStep:
    """V_new = V - 2 (ln phi)'' and psi -> psi' - (ln phi)' psi.

    ``seed`` is an Expr (exact log-derivatives), a grid vector, or a pair
    ("eigen", vector) marking a discrete eigenvector of V at ``lam`` (handled
    by ratio recurrences that stay accurate in the tails).
    """
    Vn = potential_on_grid(V, grid)
    x, h = grid.nodes, grid.h
    V_expr = V if isinstance(V, ex.Expr) else None
    if isinstance(seed, ex.Expr):
        v = _single_variable(seed, variable)
        phi = np.asarray(ex.evaluate(seed, {v: x}), dtype=float) + 0 * x
        if np.any(phi == 0) or not np.all(np.isfinite(phi)):
            raise SingularPointError("seed vanishes at a grid node")
        w_e = ex.differentiate(seed, v) / seed
        dw_e = ex.differentiate(w_e, v)
        w = np.asarray(ex.evaluate(w_e, {v: x}), dtype=float) + 0 * x
        V_new = Vn - 2 * (np.asarray(ex.evaluate(dw_e, {v: x}), dtype=float) + 0 * x)
        new_expr = None
        if V_expr is not None:
            new_expr = ex.substitute(V_expr, {_single_variable(V_expr, v): ex.Var(v)}) - 2.0 * dw_e
        changes = int(np.sum(np.diff(np.sign(phi)) != 0))
        step = DarbouxStep(grid, float(lam), phi, w, Vn, V_new, changes > 0, new_expr, seed, v)
    elif isinstance(seed, tuple) and seed[0] == "eigen":
        phi = np.asarray(seed[1], dtype=float)
        peak = int(np.argmax(np.abs(phi)))
        w, changes = _ratio_log_derivative(Vn, lam, h, peak)
        # the discrete equation gives (ln phi)'' = V - lam - w^2 to O(h^2)
        V_new = 2 * w**2 - Vn + 2 * lam
        step = DarbouxStep(grid, float(lam), phi, w, Vn, V_new, changes > 0)
    else:
        phi = np.asarray(seed, dtype=float)
        if np.any(phi == 0):
            raise SingularPointError("seed vanishes at a grid node")
        w = _grid_d1(phi, h) / phi
        w[0], w[-1] = w[1], w[-2]
        dw = _grid_d1(w, h)
        dw[0], dw[-1] = dw[1], dw[-2]
        V_new = Vn - 2 * dw
        changes = int(np.sum(np.diff(np.sign(phi)) != 0))
        step = DarbouxStep(grid, float(lam), phi, w, Vn, V_new, changes > 0)
    if step.has_nodes:
        warnings.warn("seed has nodes: the transformed potential is singular there",
                      NodeWarning, stacklevel=2)
    return step


def missing_state(phi, grid: Grid1D, variable: str = "x") -> np.ndarray:
    """U = -(1/phi) int_lo^x phi^2 (cumulative trapezoid from the left edge).

    For Expr seeds the integral starts at grid.lo itself; grid seeds are
    taken to vanish there (Dirichlet end).
    """
    x = grid.nodes
    if isinstance(phi, ex.Expr):
        v = _single_variable(phi, variable)
        xs = np.concatenate([[grid.lo], x])
        vals = np.asarray(ex.evaluate(phi, {v: xs}), dtype=float) + 0 * xs
    else:
        vals = np.concatenate([[0.0], np.asarray(phi, dtype=float)])
        xs = np.concatenate([[grid.lo], x])
    body = vals[1:]
    if np.any(np.diff(np.sign(body[np.abs(body) > 1e-12 * np.max(np.abs(body))])) != 0):
        raise ValueError("missing_state needs a nodeless seed")
    integral = cumulative_trapezoid(vals**2, xs, initial=0.0)[1:]
    return -integral / body


def partner_residual(U: np.ndarray, V_partner, lam: float, grid: Grid1D,
                     order: int = 4) -> float:
    """max |(-d^2 + V - lam) U| / max |U| over nodes away from the edges.

    The default 5-point (fourth-order) second difference keeps the check's own
    truncation error (h^2 U^(4)/12 for the 3-point stencil) below the error
    of U itself; ``order=2`` uses the 3-point stencil.
    """
    Vn = potential_on_grid(V_partner, grid)
    U = np.asarray(U, dtype=float)
    h = grid.h
    if order == 4:
        lap = (-U[4:] + 16 * U[3:-1] - 30 * U[2:-2] + 16 * U[1:-3] - U[:-4]) / (12 * h**2)
        core, Vc = U[2:-2], Vn[2:-2]
    elif order == 2:
        lap = (U[2:] - 2 * U[1:-1] + U[:-2]) / h**2
        core, Vc = U[1:-1], Vn[1:-1]
    else:
        raise ValueError("order must be 2 or 4")
    r = -lap + (Vc - lam) * core
    return float(np.max(np.abs(r)) / np.max(np.abs(core)))


def wronskian(u: np.ndarray, v: np.ndarray, grid: Grid1D, at: float) -> float:
    """u v' - u' v at the node nearest ``at``."""
    i = int(np.argmin(np.abs(grid.nodes - at)))
    du, dv = _grid_d1(u, grid.h), _grid_d1(v, grid.h)
    return float(u[i] * dv[i] - du[i] * v[i])


# ---------------------------------------------------------------- chains

@dataclass
class HierarchyLevel:
    level: int
    V: np.ndarray
    spectrum: Spectrum
    deleted: float | None = None
    singular: bool = False


@dataclass
class Hierarchy:
    grid: Grid1D
    levels: list = field(default_factory=list)
    steps: list = field(default_factory=list)

    def summary_rows(self, head: int = 4) -> list[tuple]:
        rows = []
        for lv in self.levels:
            vals = [float(v) for v in lv.spectrum.values[:head]]
            rows.append((lv.level, lv.deleted, lv.singular, vals))
        return rows

    def to_csv(self, head: int = 4) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "deleted_eigenvalue", "singular"] + [f"E{i}" for i in range(head)])
        for level, deleted, singular, vals in self.summary_rows(head):
            w.writerow([level, "" if deleted is None else "%.17g" % deleted, int(singular)]
                       + ["%.17g" % v for v in vals] + [""] * (head - len(vals)))
        return buf.getvalue()

    def to_dict(self, head: int = 4) -> dict:
        return {
            "grid": {"lo": self.grid.lo, "hi": self.grid.hi, "N": self.grid.N},
            "levels": [{"level": lv, "deleted_eigenvalue": d, "singular": s, "spectrum_head": v}
                       for lv, d, s, v in self.summary_rows(head)],
        }

    def to_json(self, head: int = 4) -> str:
        return json.dumps(self.to_dict(head), sort_keys=True, indent=2)


def build_hierarchy(V, seeds, grid: Grid1D, k: int = 4) -> Hierarchy:
    """Apply Darboux steps in sequence.

    Each seed is an int (index into the current level's spectrum) or a pair
    (Expr, eigenvalue).  Level 0 is the input problem.
    """
    Vn = potential_on_grid(V, grid)
    spec = solve_1d_eigen(Vn, grid, k)
    chain = Hierarchy(grid, [HierarchyLevel(0, Vn, spec)])
    current = V if isinstance(V, ex.Expr) else Vn
    for m, seed in enumerate(seeds, start=1):
        if isinstance(seed, (int, np.integer)):
            lam = float(spec.values[seed])
            step = darboux_step(current, ("eigen", spec.vectors[seed]), lam, grid)
        else:
            phi, lam = seed
            step = darboux_step(current, phi, float(lam), grid)
        chain.steps.append(step)
        current = step.V_new_expr if step.V_new_expr is not None else step.V_new
        Vn = step.V_new
        if not np.all(np.isfinite(Vn)):
            chain.levels.append(HierarchyLevel(m, Vn, spec, lam, True))
            log.warning("level %d potential is not finite; chain stopped", m)
            break
        spec = solve_1d_eigen(Vn, grid, k)
        chain.levels.append(HierarchyLevel(m, Vn, spec, lam, step.has_nodes))
        log.info("level %d: deleted %.6g, head %s", m, lam, spec.values[:3])
    return chain


# ---------------------------------------------------------------- 2D embedding

def embed_2d(Vcal: ex.Expr, Hcal: ex.Expr, E_n: float, phi_n: ex.Expr, c: float,
             a1: float = 0.0, a2: float = 1.0, check_points=None,
             seed_tol: float = 1e-6) -> PotentialPair:
    """2D pair from a solvable xi-problem (-d^2 + V) phi_n = E_n phi_n.

    V0 = e^{-2c rho}[V(xi) + H(rho)],
    V1 = e^{-2c rho}[2 (phi_n'/phi_n)^2 + 2 E_n - V(xi) + H(rho)],
    L = f(xi) + d_xi with f = -phi_n'/phi_n.
    """
    if c == 0:
        raise ValueError("c must be nonzero")
    xi_v, rho_v = ex.Var("xi"), ex.Var("rho")
    Vcal = ex.substitute(Vcal, {_single_variable(Vcal, "xi"): xi_v})
    Hcal = ex.substitute(Hcal, {_single_variable(Hcal, "rho"): rho_v})
    phi_n = ex.substitute(phi_n, {_single_variable(phi_n, "xi"): xi_v})
    dphi = ex.differentiate(phi_n, "xi")
    res_e = -ex.differentiate(dphi, "xi") + (Vcal - E_n) * phi_n
    limit = np.pi / (2 * abs(c))
    if check_points is None:
        check_points = np.linspace(-0.9 * limit, 0.9 * limit, 41)
        check_points = check_points[np.abs(check_points) <= 8.0]
    pv = np.asarray(ex.evaluate(phi_n, {"xi": check_points}), dtype=float)
    rv = np.asarray(ex.evaluate(res_e, {"xi": check_points}), dtype=float)
    seed_res = float(np.max(np.abs(rv)) / np.max(np.abs(pv)))
    if seed_res > seed_tol:
        raise ValueError(f"phi_n is not an eigenfunction at E_n: residual {seed_res:.3g}")

    f = -dphi / phi_n
    x, y = ex.Var("x"), ex.Var("y")
    L1 = a1 + c * y
    L2 = a2 - c * x
    k2 = L1 ** 2.0 + L2 ** 2.0
    xi_e = ex.call("atan", L1 / L2) / c
    rho_e = ex.call("ln", k2) / (2 * c)
    sub = {"xi": xi_e, "rho": rho_e}
    V0 = ex.substitute(Vcal + Hcal, sub) / k2
    V1 = ex.substitute(2.0 * f ** 2.0 + 2 * E_n - Vcal + Hcal, sub) / k2
    L0 = ex.substitute(f, sub)

    def sing(pts):
        pts = np.asarray(pts, dtype=float)
        l1 = a1 + c * pts[..., 1]
        l2 = a2 - c * pts[..., 0]
        mask = (np.abs(l2) < SINGULAR_BAND) | (np.hypot(l1, l2) < SINGULAR_BAND)
        xi = np.arctan(l1 / np.where(mask, 1.0, l2)) / c
        ph = np.asarray(ex.evaluate(phi_n, {"xi": xi}), dtype=float) + 0 * xi
        return mask | (np.abs(ph) < SINGULAR_BAND)

    v = ("x", "y")
    p = make_params(2, (a1, a2), c)
    chart = {"xi": "atan(L1/L2)/c", "rho": "ln(kappa)/c", "E_n": E_n,
             "seed_residual": seed_res, "phi_n": ex.to_string(phi_n)}
    return PotentialPair("embedded-2d", p, ScalarField.from_expr(V0, v, sing),
                         ScalarField.from_expr(V1, v, sing), ScalarField.from_expr(L0, v, sing),
                         f, "xi", ex.substitute(2.0 * (Hcal + E_n), sub) / k2, chart)
