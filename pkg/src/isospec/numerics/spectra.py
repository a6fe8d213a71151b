"""Partner spectra in the xi direction and the separated (rho, xi) problem."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .. import expr as ex
from .eigen import Grid1D, Spectrum, apply_hamiltonian, potential_on_grid, solve_1d_eigen

__all__ = ["PartnerReport", "partner_potentials", "partner_spectrum_check",
           "transformed_residuals", "SeparatedReport", "separated_2d_solve",
           "ScanError", "solve_rho_energy"]

ZERO_MODE_TOL = 1e-3


def partner_potentials(f: ex.Expr, variable: str = "xi") -> tuple[ex.Expr, ex.Expr]:
    """V- = f^2 - f', V+ = f^2 + f'."""
    df = ex.differentiate(f, variable)
    return f ** 2.0 - df, f ** 2.0 + df


def _grid_derivative(u: np.ndarray, h: float) -> np.ndarray:
    """Central difference with Dirichlet zeros outside the interior nodes."""
    padded = np.concatenate([[0.0], u, [0.0]])
    return (padded[2:] - padded[:-2]) / (2 * h)


def apply_L_grid(f_nodes: np.ndarray, psi: np.ndarray, h: float) -> np.ndarray:
    """(f + d/dxi) psi on the nodes."""
    return f_nodes * psi + _grid_derivative(psi, h)


def transformed_residuals(spec_minus: Spectrum, f_nodes, V_plus_nodes) -> list[dict]:
    """For each H- eigenpair (E, psi): ||(H+ - E) L psi||_inf / ||L psi||_inf.

    Edge nodes are excluded from the norm (one-sided stencil there).
    States with ||L psi|| below 1e-6 ||psi|| are reported as annihilated.
    """
    h = spec_minus.grid.h
    out = []
    for i, (E, psi) in enumerate(zip(spec_minus.values, spec_minus.vectors)):
        Lpsi = apply_L_grid(f_nodes, psi, h)
        norm = float(np.max(np.abs(Lpsi[2:-2])))
        if norm < 1e-6 * float(np.max(np.abs(psi))) * max(1.0, 1 / h) or norm < 1e-3:
            out.append({"index": i, "energy": float(E), "annihilated": True,
                        "norm": norm, "residual": None})
            continue
        r = apply_hamiltonian(V_plus_nodes, Lpsi, h) - E * Lpsi
        out.append({"index": i, "energy": float(E), "annihilated": False, "norm": norm,
                    "residual": float(np.max(np.abs(r[2:-2]))) / norm})
    return out


@dataclass
class PartnerReport:
    minus: Spectrum
    plus: Spectrum
    unbroken: bool
    pairs: list                  # (index in H+, index in H-, E+, E-, |E+ - E-|)
    transformed: list = field(default_factory=list)

    @property
    def max_deviation(self) -> float:
        return max((p[4] for p in self.pairs), default=0.0)

    def to_dict(self) -> dict:
        return {
            "minus": [float(v) for v in self.minus.values],
            "plus": [float(v) for v in self.plus.values],
            "unbroken": self.unbroken,
            "pairs": [list(p) for p in self.pairs],
            "max_deviation": self.max_deviation,
            "transformed": self.transformed,
        }


def partner_spectrum_check(f: ex.Expr, grid: Grid1D, k: int, variable: str = "xi") -> PartnerReport:
    """Spectra of H-+ = -d^2 + f^2 -+ f' and their pairing.

    If H- has a (numerical) zero mode the pairing is E+_j <-> E-_{j+1};
    otherwise E+_j <-> E-_j.
    """
    Vm, Vp = partner_potentials(f, variable)
    minus = solve_1d_eigen(Vm, grid, k + 1)
    plus = solve_1d_eigen(Vp, grid, k)
    unbroken = abs(float(minus.values[0])) < ZERO_MODE_TOL
    shift = 1 if unbroken else 0
    pairs = []
    for j in range(k):
        jm = j + shift
        if jm < len(minus):
            Ep, Em = float(plus.values[j]), float(minus.values[jm])
            pairs.append((j, jm, Ep, Em, abs(Ep - Em)))
    f_nodes = potential_on_grid(f, grid)
    trans = transformed_residuals(minus, f_nodes, plus.potential)
    return PartnerReport(minus, plus, unbroken, pairs, trans)


# ---------------------------------------------------------------- separated 2D problem

class ScanError(RuntimeError):
    def __init__(self, message: str, trace: list):
        super().__init__(message)
        self.trace = trace


def _rho_level(H_nodes, weight, grid: Grid1D, E0: float, level: int) -> float:
    V = H_nodes - E0 * weight
    return float(solve_1d_eigen(V, grid, level + 1).values[level])


def solve_rho_energy(Hcal: ex.Expr, c: float, target: float, grid: Grid1D,
                     level: int = 0, E0_start: float = 0.0, step: float = 1.0,
                     max_expand: int = 60, xtol: float = 1e-12) -> tuple[float, list]:
    """E0 with mu_level(-d^2 + H(rho) - e^{2 c rho} E0) = target.

    mu decreases monotonically in E0 (the weight e^{2c rho} is positive), so
    the scan walks from ``E0_start`` in steps that double until the mismatch
    changes sign, then refines with Brent's method.  Returns (E0, trace).
    """
    H_nodes = potential_on_grid(Hcal, grid)
    weight = np.exp(2 * c * grid.nodes)
    trace = []

    def mismatch(E0):
        m = _rho_level(H_nodes, weight, grid, E0, level) - target
        trace.append((float(E0), float(m)))
        return m

    m0 = mismatch(E0_start)
    if m0 == 0:
        return E0_start, trace
    direction = 1.0 if m0 > 0 else -1.0
    lo, mlo = E0_start, m0
    s = step
    for _ in range(max_expand):
        hi = E0_start + direction * s
        mhi = mismatch(hi)
        if np.sign(mhi) != np.sign(mlo):
            a, b = sorted((lo, hi))
            E0 = brentq(mismatch, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps)
            return float(E0), trace
        lo, mlo = hi, mhi
        s *= 2
    raise ScanError("no sign change of the rho-eigenvalue mismatch within the scan", trace)


@dataclass
class SeparatedReport:
    xi_spectrum: Spectrum
    n: int
    n_plus: int
    M: float
    E_n: float
    E_n_minus: float
    n_minus_match: int | None
    rho_energies: list           # [(level, E0, rho eigen-residual)]
    annihilation: float          # ||L phi_n||
    transformed_xi_residual: float
    product_residual: float
    scan_traces: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "xi_eigenvalues": [float(v) for v in self.xi_spectrum.values],
            "n": self.n, "n_plus": self.n_plus, "M": self.M,
            "E_n": self.E_n, "E_n_minus": self.E_n_minus,
            "n_minus_match": self.n_minus_match if self.n_minus_match is not None else "no-match",
            "rho_energies": [list(r) for r in self.rho_energies],
            "annihilation": self.annihilation,
            "transformed_xi_residual": self.transformed_xi_residual,
            "product_residual": self.product_residual,
        }


def separated_2d_solve(Vcal: ex.Expr, Hcal: ex.Expr, c: float, n: int, n_plus: int,
                       xi_grid: Grid1D, rho_grid: Grid1D, rho_levels: int = 1,
                       match_tol: float = 5e-3) -> SeparatedReport:
    """Solve the separated equations of the pair built from phi_n of -d^2 + V(xi).

    M = E_{n+} - E_n; the xi-state of H0 is phi_{n+} and the rho-equation
    (-d^2 + H(rho) - e^{2 c rho} E0) R = -E_{n+} R fixes E0 for each radial
    level.  The transformed xi-state L phi_{n+} is checked against
    (-d^2 + 2 (phi_n'/phi_n)^2 - V) U = -(E_n - M) U.
    """
    k = max(n, n_plus) + 3
    xi = solve_1d_eigen(Vcal, xi_grid, k)
    h = xi_grid.h
    E = xi.values
    En, Enp = float(E[n]), float(E[n_plus])
    M = Enp - En
    En_minus = En - M
    close = np.abs(E - En_minus)
    match = int(np.argmin(close)) if float(np.min(close)) <= match_tol else None

    phi_n = xi.vectors[n]
    dphi = _grid_derivative(phi_n, h)
    with np.errstate(divide="ignore", invalid="ignore"):
        f_nodes = -dphi / phi_n
    # stay where phi_n is not tiny so that the log-derivative is meaningful
    core = np.abs(phi_n) > 1e-6 * np.max(np.abs(phi_n))
    core[:2] = core[-2:] = False
    Lphi_n = apply_L_grid(np.where(core, f_nodes, 0.0), phi_n, h)
    annihilation = float(np.max(np.abs(Lphi_n[core]))) / float(np.max(np.abs(phi_n)))

    Vn = xi.potential
    U0 = xi.vectors[n_plus]
    U1 = apply_L_grid(np.where(core, f_nodes, 0.0), U0, h)
    V_xi = np.where(core, 2 * f_nodes**2 - Vn, 0.0)
    r_xi = apply_hamiltonian(V_xi, U1, h) + En_minus * U1
    inner = core.copy()
    inner[1:] &= core[:-1]
    inner[:-1] &= core[1:]
    scale = max(float(np.max(np.abs(U1[inner]))), 1e-300)
    xi_res = float(np.max(np.abs(r_xi[inner]))) / scale

    energies, traces = [], []
    H_nodes = potential_on_grid(Hcal, rho_grid)
    weight = np.exp(2 * c * rho_grid.nodes)
    product = 0.0
    for level in range(rho_levels):
        E0, trace = solve_rho_energy(Hcal, c, -Enp, rho_grid, level)
        traces.append(trace)
        rho_spec = solve_1d_eigen(H_nodes - E0 * weight, rho_grid, level + 1)
        R = rho_spec.vectors[level]
        energies.append((level, E0, float(rho_spec.residuals[level])))
        # H0 (R U0) - E0 (R U0) in the (rho, xi) chart, discrete operators
        HR = apply_hamiltonian(H_nodes, R, rho_grid.h)
        HU = apply_hamiltonian(Vn, U0, h)
        lhs = np.outer(HR, U0) + np.outer(R, HU) - E0 * np.outer(weight * R, U0)
        product = max(product, float(np.max(np.abs(lhs))) /
                      float(np.max(np.abs(np.outer(R, U0)))))
    return SeparatedReport(xi, n, n_plus, M, En, En_minus, match, energies,
                           annihilation, xi_res, product, traces)
