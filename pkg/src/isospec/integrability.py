"""Frobenius integrability conditions for the first-order consistency equations.

The Pfaffian system 2 dL0 = P Gamma (Gamma = L . dr) is integrable when, for
every triple j < k < l, L_j c_kl + L_k c_lj + L_l c_jk vanishes identically.
Expanding L in x this splits into a constant part a_[j c_kl] and one
coefficient per coordinate, c_m[j c_kl].
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .euclid import IntertwinerParams, ParamsError, make_params, vector_field_L

__all__ = [
    "Constraint", "ConstraintReport", "TOL",
    "check_pfaffian_conditions", "check_n4", "solve_n4_translations", "check_n5",
    "triple_identity_residual", "c_vectors_n4", "numeric_rank",
    "Preset", "preset_table1", "PRESETS",
    "brute_force_admissible_c", "random_admissible_params",
]

TOL = 1e-12
RANK_TOL = 1e-10


@dataclass
class Constraint:
    id: str
    value: float

    @property
    def satisfied(self) -> bool:
        return abs(self.value) <= TOL


@dataclass
class ConstraintReport:
    n: int
    constraints: list = field(default_factory=list)
    free_parameters: int | None = None
    rank: int | None = None
    notes: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def satisfied(self) -> bool:
        return all(c.satisfied for c in self.constraints)

    def violated(self) -> list[str]:
        return [c.id for c in self.constraints if not c.satisfied]

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "satisfied": self.satisfied,
            "constraints": {c.id: {"value": c.value, "satisfied": c.satisfied}
                            for c in self.constraints},
        }
        if self.free_parameters is not None:
            out["free_parameters"] = self.free_parameters
        if self.rank is not None:
            out["rank"] = self.rank
        if self.notes:
            out["notes"] = list(self.notes)
        out.update(self.extra)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _cyc_a(a, c, j, k, l):
    return a[j] * c[k, l] + a[k] * c[l, j] + a[l] * c[j, k]


def _cyc_c(c, m, j, k, l):
    return c[m, j] * c[k, l] + c[m, k] * c[l, j] + c[m, l] * c[j, k]


def check_pfaffian_conditions(p: IntertwinerParams) -> ConstraintReport:
    """Coefficient identities a_[j c_kl] = 0 and c_m[j c_kl] = 0.

    For n = 3 the quadratic identities hold automatically and the report
    reduces to the single condition a . c = 0.  For n <= 2 there is no
    triple and the condition holds vacuously.
    """
    n, a, c = p.n, p.a, p.c
    report = ConstraintReport(n)
    if n < 3:
        report.notes.append("Gamma ^ dGamma is a 3-form: vanishes identically for n <= 2")
        return report
    if n == 3:
        report.constraints.append(Constraint("a.c", float(a @ p.c_vector)))
        return report
    for j, k, l in itertools.combinations(range(n), 3):
        tag = f"{j + 1}{k + 1}{l + 1}"
        report.constraints.append(Constraint(f"a[{tag}]", float(_cyc_a(a, c, j, k, l))))
        for m in range(n):
            if m in (j, k, l):
                continue
            report.constraints.append(
                Constraint(f"c{m + 1}[{tag}]", float(_cyc_c(c, m, j, k, l))))
    return report


def triple_identity_residual(p: IntertwinerParams, pts) -> float:
    """max |L_j c_kl + L_k c_lj + L_l c_jk| over triples and points."""
    L = vector_field_L(p, pts)
    c = p.c
    worst = 0.0
    for j, k, l in itertools.combinations(range(p.n), 3):
        r = L[..., j] * c[k, l] + L[..., k] * c[l, j] + L[..., l] * c[j, k]
        worst = max(worst, float(np.max(np.abs(r))))
    return worst


def numeric_rank(M: np.ndarray, rtol: float = RANK_TOL) -> int:
    """Rank by Gaussian elimination with complete pivoting.

    Pivots below ``rtol`` times the largest entry count as zero.
    """
    A = np.array(M, dtype=float)
    scale = np.max(np.abs(A)) if A.size else 0.0
    if scale == 0:
        return 0
    rank = 0
    rows, cols = A.shape
    for r in range(min(rows, cols)):
        sub = np.abs(A[r:, r:])
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        if sub[i, j] <= rtol * scale:
            break
        A[[r, r + i]] = A[[r + i, r]]
        A[:, [r, r + j]] = A[:, [r + j, r]]
        A[r + 1:] -= np.outer(A[r + 1:, r] / A[r, r], A[r])
        rank += 1
    return rank


def c_vectors_n4(c: np.ndarray) -> np.ndarray:
    """Rows c_(1..4) such that a . c_(j) are the four a_[k c_lm] conditions."""
    return np.array([
        [0.0, c[2, 3], -c[1, 3], c[1, 2]],
        [c[2, 3], 0.0, c[3, 0], -c[2, 0]],
        [c[1, 3], c[3, 0], 0.0, c[0, 1]],
        [c[1, 2], c[2, 0], c[0, 1], 0.0],
    ])


def _pf4(c, j, k, l, m):
    return c[j, k] * c[l, m] + c[j, l] * c[m, k] + c[j, m] * c[k, l]


def check_n4(p: IntertwinerParams) -> ConstraintReport:
    if p.n != 4:
        raise ParamsError("check_n4 needs n = 4")
    c, a = p.c, p.a
    report = ConstraintReport(4)
    report.constraints.append(Constraint("c12c34+c13c42+c14c23", float(_pf4(c, 0, 1, 2, 3))))
    M = c_vectors_n4(c)
    for j in range(4):
        report.constraints.append(Constraint(f"a.c({j + 1})", float(a @ M[j])))
    report.rank = numeric_rank(M)
    report.notes.append("coordinate-restricting alternative (constant coordinates) "
                        "not implemented")
    return report


def solve_n4_translations(c) -> np.ndarray:
    """Orthonormal basis (rows) of {a : a . c_(j) = 0 for all j}."""
    p = make_params(4, np.zeros(4), c)
    pf = _pf4(p.c, 0, 1, 2, 3)
    if abs(pf) > TOL:
        raise ParamsError(f"c violates c12c34+c13c42+c14c23 = 0 (value {pf:g}); "
                          "run check_n4 first")
    M = c_vectors_n4(p.c)
    if not np.any(M):
        return np.eye(4)
    _, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > RANK_TOL * s[0]))
    return vt[rank:]


def check_n5(c, a=None) -> ConstraintReport:
    """The five independent quadratic conditions for n = 5 with a = 0.

    ``free_parameters`` counts the 10 entries of c minus the number of
    distinct conditions that are active (imposed).  The local dimension of
    the solution set (10 minus the Jacobian rank of the conditions) is
    reported separately under ``variety_dimension``.
    """
    if a is not None and np.any(np.asarray(a, dtype=float) != 0):
        raise ParamsError("n = 5 is supported only with a = 0")
    p = make_params(5, np.zeros(5), c)
    c = p.c
    report = ConstraintReport(5)
    quads = list(itertools.combinations(range(5), 4))
    for q in quads:
        tag = "".join(str(i + 1) for i in q)
        report.constraints.append(Constraint(f"pf[{tag}]", float(_pf4(c, *q))))
    report.free_parameters = 10 - len(quads)
    if report.satisfied:
        report.extra["variety_dimension"] = 10 - _pf_jacobian_rank(c, quads)
    return report


def _pf_jacobian_rank(c: np.ndarray, quads) -> int:
    pairs = list(itertools.combinations(range(5), 2))
    J = np.zeros((len(quads), len(pairs)))
    for r, (j, k, l, m) in enumerate(quads):
        # Pf = c_jk c_lm - c_jl c_km + c_jm c_kl
        for (u, v), (s, t), sign in (((j, k), (l, m), 1), ((j, l), (k, m), -1),
                                     ((j, m), (k, l), 1)):
            J[r, pairs.index((u, v))] += sign * c[s, t]
            J[r, pairs.index((s, t))] += sign * c[u, v]
    return numeric_rank(J) if np.any(J) else 0


def brute_force_admissible_c(n: int, values=(-1.0, 0.0, 1.0)) -> np.ndarray:
    """Antisymmetric c with entries from ``values`` satisfying every quadratic
    condition c_m[j c_kl] = 0, preferring the most non-zero entries.

    Enumerates all len(values)^(n(n-1)/2) upper triangles, so only small n
    are practical (n = 5 with three values is 59049 candidates).
    """
    pairs = list(itertools.combinations(range(n), 2))
    vals = np.asarray(values, dtype=float)
    grid = np.stack(np.meshgrid(*([vals] * len(pairs)), indexing="ij"), axis=-1)
    grid = grid.reshape(-1, len(pairs))
    C = np.zeros((grid.shape[0], n, n))
    for col, (j, k) in enumerate(pairs):
        C[:, j, k] = grid[:, col]
        C[:, k, j] = 0.0 - grid[:, col]
    ok = np.ones(grid.shape[0], dtype=bool)
    for j, k, l in itertools.combinations(range(n), 3):
        for m in range(n):
            if m not in (j, k, l):
                r = C[:, m, j] * C[:, k, l] + C[:, m, k] * C[:, l, j] + C[:, m, l] * C[:, j, k]
                ok &= np.abs(r) <= TOL
    nonzero = np.count_nonzero(grid, axis=1)
    cand = np.flatnonzero(ok & (nonzero > 0))
    if cand.size == 0:
        raise ParamsError(f"no admissible c with entries in {tuple(values)}")
    best = cand[np.argmax(nonzero[cand])]     # first maximiser: deterministic
    return C[best]


def random_admissible_params(n: int, rng: np.random.Generator) -> IntertwinerParams:
    """Random (a, c) passing :func:`check_pfaffian_conditions`.

    c = u v^T - v u^T has rank two, which satisfies every quadratic condition,
    and a = alpha u + beta v satisfies the linear ones.  For n <= 2 both are
    unconstrained.
    """
    if n <= 2:
        c = rng.standard_normal() if n == 2 else np.zeros((n, n))
        return make_params(n, rng.standard_normal(n), c)
    u, v = rng.standard_normal(n), rng.standard_normal(n)
    c = np.outer(u, v)
    c = c - c.T
    a = rng.standard_normal() * u + rng.standard_normal() * v
    return make_params(n, a, c)


# ---------------------------------------------------------------- three-dimensional presets

@dataclass(frozen=True)
class Preset:
    row: int
    constraints: tuple[str, ...]
    params: IntertwinerParams
    beta: str
    two_gamma: str
    eta: str
    eta_variant: str      # "eta", "eta2" or "eta3"
    polynomial: str       # "p", "p2" or "p3"

    def to_dict(self) -> dict:
        return {"row": self.row, "constraints": list(self.constraints),
                "params": self.params.to_dict(), "beta": self.beta,
                "two_gamma": self.two_gamma, "eta": self.eta,
                "eta_variant": self.eta_variant, "polynomial": self.polynomial}


_GENERAL_2G = "2*(x*(a2*c3 - a3*c2) + y*(a3*c1 - a1*c3) + z*(a1*c2 - a2*c1))" \
              " + (c1*x + c2*y + c3*z)^2 - (c1^2 + c2^2 + c3^2)*(x^2 + y^2 + z^2)"

# (constraints, a, c vector, beta, 2 gamma, eta, variant); representative a, c
# are chosen so that the products in a . c cancel exactly in floating point.
_ROWS = [
    (("a1=0", "a2*c2+a3*c3=0"), (0.0, 1.3, -0.5), (0.7, 0.5, 1.3),
     "c1*x + c2*y + c3*z", _GENERAL_2G, "(c3*y - c2*z)/(a2 - c3*x + c1*z)", "eta"),
    (("a2=0", "a1*c1+a3*c3=0"), (1.3, 0.0, -0.5), (0.5, 0.7, 1.3),
     "c1*x + c2*y + c3*z", _GENERAL_2G, "(a1 + c3*y - c2*z)/(-c3*x + c1*z)", "eta"),
    (("a3=0", "a1*c1+a2*c2=0"), (1.3, -0.5, 0.0), (0.5, 1.3, 0.7),
     "c1*x + c2*y + c3*z", _GENERAL_2G, "(a1 + c3*y - c2*z)/(a2 - c3*x + c1*z)", "eta"),
    (("a1=0=a2", "c3=0"), (0.0, 0.0, 1.3), (0.5, 0.7, 0.0),
     "c1*x + c2*y", "2*a3*(c1*y - c2*x) + (c1*x + c2*y)^2 - (c1^2 + c2^2)*(x^2 + y^2 + z^2)",
     "(-c2*z)/(a3 + c2*x - c1*y)", "eta2"),
    (("a1=0=a3", "c2=0"), (0.0, 1.3, 0.0), (0.5, 0.0, 0.7),
     "c1*x + c3*z", "2*a2*(c3*x - c1*z) + (c1*x + c3*z)^2 - (c1^2 + c3^2)*(x^2 + y^2 + z^2)",
     "(c3*y)/(a2 - c3*x + c1*z)", "eta"),
    (("a2=0=a3", "c1=0"), (1.3, 0.0, 0.0), (0.0, 0.5, 0.7),
     "c2*y + c3*z", "2*a1*(c2*z - c3*y) + (c2*y + c3*z)^2 - (c2^2 + c3^2)*(x^2 + y^2 + z^2)",
     "(a1 + c3*y - c2*z)/(-c3*x)", "eta"),
    # sign of the linear term follows r.(a x c) with a = (0, a2, a3), c = (c1, 0, 0)
    (("a1=0", "c2=0=c3"), (0.0, 1.3, -0.5), (0.7, 0.0, 0.0),
     "c1*x", "2*c1*(a3*y - a2*z) - c1^2*(y^2 + z^2)", "(a2 + c1*z)/(a3 - c1*y)", "eta3"),
    (("a2=0", "c1=0=c3"), (1.3, 0.0, -0.5), (0.0, 0.7, 0.0),
     "c2*y", "2*c2*(-a3*x + a1*z) - c2^2*(x^2 + z^2)", "(a1 - c2*z)/(a3 + c2*x)", "eta2"),
    (("a3=0", "c1=0=c2"), (1.3, -0.5, 0.0), (0.0, 0.0, 0.7),
     "c3*z", "2*c3*(a2*x - a1*y) - c3^2*(x^2 + y^2)", "(a1 + c3*y)/(a2 - c3*x)", "eta"),
    (("a1=a2=a3=0",), (0.0, 0.0, 0.0), (0.5, 0.7, 1.3),
     "c1*x + c2*y + c3*z", "(c1*x + c2*y + c3*z)^2 - (c1^2 + c2^2 + c3^2)*(x^2 + y^2 + z^2)",
     "(c3*y - c2*z)/(-c3*x + c1*z)", "eta"),
]

_POLY = {"eta": "p", "eta2": "p2", "eta3": "p3"}


def preset_table1(row: int) -> Preset:
    """Row ``row`` (1-10, top to bottom) of the n = 3 parameter table."""
    if not isinstance(row, (int, np.integer)) or not 1 <= row <= len(_ROWS):
        raise ValueError(f"preset row must be in 1..{len(_ROWS)}, got {row!r}")
    cons, a, cv, beta, g2, eta, variant = _ROWS[row - 1]
    p = make_params(3, a, np.array(cv))
    return Preset(int(row), cons, p, beta, g2, eta, variant, _POLY[variant])


PRESETS = tuple(range(1, len(_ROWS) + 1))
