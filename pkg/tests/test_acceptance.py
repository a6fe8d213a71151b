"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import json
import time

import numpy as np

from isospec import expr as ex
from isospec.cli import main
from isospec.coords import (Chart2D, Chart3D, VARIANTS, forward_3d, inverse_2d, inverse_3d,
                            jacobian_3d, laplacian_2d, laplacian_3d, numerical_jacobian_3d,
                            p_poly)
from isospec.euclid import commutator_table, laplacian_commutes, make_params, random_polynomial
from isospec.hierarchy import build_hierarchy, embed_2d, missing_state, partner_residual
from isospec.integrability import (PRESETS, brute_force_admissible_c, check_n4, check_n5,
                                   check_pfaffian_conditions, preset_table1,
                                   random_admissible_params, solve_n4_translations)
from isospec.numerics.eigen import Grid1D, solve_1d_eigen
from isospec.numerics.spectra import partner_spectrum_check
from isospec.numerics.stencil import GaussianBump, convergence_study, node_lattice
from isospec.potentials import (build_1d_pair, build_2d_pair, build_3d_pair,
                                build_constant_shift, build_general_pair, build_translational,
                                gradient_identity_residual, laplacian_identity_residual,
                                shift_identity_residual,
                                free_motion_partners_2d, free_motion_partners_3d,
                                riccati_residual, sample_nonsingular, solve_riccati_2d)

P3 = make_params(3, [1.3, -0.5, 0.0], [0.5, 1.3, 0.7])


def E(src, names):
    return ex.parse(src, names)


def test_criterion_01_commutator_table(acceptance_line):
    t0 = time.perf_counter()
    worst = max(commutator_table(n).max_residual for n in range(2, 6))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-10 and dt < 5
    acceptance_line(1, ok, f"e(n) commutators n=2..5: max residual {worst:.2e}, {dt:.2f} s")
    assert ok


def test_criterion_02_laplacian_commutes(acceptance_line):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for n in range(2, 6):
        for _ in range(20):
            p = random_admissible_params(n, rng)
            assert check_pfaffian_conditions(p).satisfied
            phi = random_polynomial(n, 4, rng)
            worst = max(worst, laplacian_commutes(p, phi, seed=int(rng.integers(1 << 30))))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-10 and dt < 5
    acceptance_line(2, ok, f"[lap, L_d] on 80 admissible sets, degree 4: {worst:.2e}, {dt:.2f} s")
    assert ok


def _inverse_square():
    return build_2d_pair(0.0, 1.0, 1.0, E("eta", ["eta"]), E("2/kappa^2", ["kappa"]))


def _calogero():
    return build_2d_pair(0.0, 1.0, 1.0, E("eta", ["eta"]), E("2/kappa^2 + 2*kappa^2", ["kappa"]))


def test_criterion_03_intertwining_order(acceptance_line):
    t0 = time.perf_counter()
    orders = {}
    c2 = (-2.0, 0.3)
    for name, pair, centre in [
        ("inverse-square", _inverse_square(), c2),
        ("calogero", _calogero(), c2),
        ("translational", build_translational([1.0, 0.5], E("sin(zeta)", ["zeta"]),
                                              g=E("(x - 2*y)^2", ["x", "y"])), (0.2, -0.1)),
        ("constant-shift", build_constant_shift([1.0, 0.0], 1.5, b=[0.2, 0.1],
                                                g=E("u1^2", ["u1"])), (0.2, -0.1)),
    ]:
        t = convergence_study(pair, GaussianBump(centre), 0.1, node_lattice(centre, 0.5, 3))
        orders[name] = t.order
    # 3D kind 2 on a full box: h = 1/8 ... 1/64, i.e. 64 intervals per axis at the finest level
    pair = free_motion_partners_3d(P3, 2)
    c = np.array([0.3, 0.2, -0.2])
    t = convergence_study(pair, GaussianBump(tuple(c), 0.15), 1 / 8, box=(c - 0.5, c + 0.5))
    orders["3d-kind2"] = t.order
    dt = time.perf_counter() - t0
    ok = all(abs(o - 2) <= 0.2 for o in orders.values()) and dt < 60
    detail = ", ".join(f"{k} {v:.3f}" for k, v in orders.items())
    acceptance_line(3, ok, f"intertwining orders: {detail}; {dt:.1f} s")
    assert ok


def _builders():
    eta, zeta = ["eta"], ["zeta"]
    return {
        "1d": build_1d_pair(E("tanh(x)", ["x"]), b=0.5),
        "constant-shift": build_constant_shift([1.0, 0.5], 1.5, b=[0.2, -0.1],
                                               g=E("u1^2", ["u1"])),
        "translational": build_translational([1.0, 0.0, 2.0], E("sin(zeta)", zeta),
                                             g=E("y^2", ["x", "y", "z"])),
        "general": build_general_pair(P3, E("eta^3 - eta", eta), h=ex.Const(0.0)),
        "2d": build_2d_pair(0.3, 1.0, 0.8, E("atan(eta)", eta), E("1/kappa^2 + kappa", ["kappa"])),
        "3d": build_3d_pair(P3, E("eta^2", eta), E("beta^2 + gamma", ["beta", "gamma"])),
        "free-2d-b<0": free_motion_partners_2d(-0.5, 0.2, 1.0, 0.0, 1.0),
        "free-2d-b=0": free_motion_partners_2d(0.0, 2.0, 1.0, 0.0, 1.0),
        "free-2d-b>0": free_motion_partners_2d(0.7, 0.3, 1.0, 0.0, 1.0),
        "free-3d-1": free_motion_partners_3d(P3, 1, b1=0.4),
        "free-3d-2": free_motion_partners_3d(P3, 2, eta_choice="eta2"),
        "free-3d-3": free_motion_partners_3d(P3, 3, b1=0.4, eta_choice="eta3"),
        "embedded-2d": embed_2d(E("xi^2", ["xi"]), E("0", ["rho"]), 1.0,
                                E("exp(-xi^2/2)", ["xi"]), 1.0),
    }


def test_criterion_04_consistency_identities(acceptance_line):
    t0 = time.perf_counter()
    worst = {}
    for name, pair in _builders().items():
        box = (-0.5, 0.5) if name == "embedded-2d" else (-2.0, 2.0)
        pts = sample_nonsingular(pair, 20, box=box, seed=4)
        worst[name] = max(gradient_identity_residual(pair, pts), laplacian_identity_residual(pair, pts),
                          shift_identity_residual(pair, pts))
    dt = time.perf_counter() - t0
    m = max(worst.values())
    ok = m <= 1e-6 and dt < 10
    acceptance_line(4, ok, f"identity residuals over {len(worst)} builders: max {m:.2e} "
                           f"({max(worst, key=worst.get)}), {dt:.2f} s")
    assert ok


def test_criterion_05_frobenius_suite(acceptance_line):
    t0 = time.perf_counter()
    presets_ok = all(check_pfaffian_conditions(preset_table1(r).params).satisfied for r in PRESETS)
    c4 = np.zeros((4, 4))
    c4[0, 1] = c4[2, 3] = c4[0, 2] = c4[1, 3] = 1.0
    c4 = c4 - c4.T
    basis = solve_n4_translations(c4)
    rep4 = check_n4(make_params(4, basis.sum(axis=0), c4))
    c5 = brute_force_admissible_c(5)
    rep5 = check_n5(c5)
    dt = time.perf_counter() - t0
    ok = presets_ok and rep4.satisfied and rep4.rank == 2 and rep5.satisfied \
        and rep5.free_parameters == 5 and dt < 5
    acceptance_line(5, ok, f"presets {presets_ok}, n=4 rank {rep4.rank}, n=5 free "
                           f"{rep5.free_parameters}; {dt:.2f} s")
    assert ok


def test_criterion_06_riccati(acceptance_line):
    t0 = time.perf_counter()
    eta = np.linspace(-3, 3, 50)
    res = {}
    for label, (b, b1, c) in {"b<0": (-1.0, 0.2, 1.0), "b=0": (0.0, 2.0, 1.0),
                              "b>0": (1.0, 0.3, 2.0)}.items():
        res[label] = float(np.max(np.abs(riccati_residual(solve_riccati_2d(b, b1, c), b, c, eta))))
    c = 1.7
    f = solve_riccati_2d(-c**2, 0.0, c)
    reduce = float(np.max(np.abs(ex.evaluate(f, {"eta": eta}) - c * eta)))
    dt = time.perf_counter() - t0
    ok = max(res.values()) <= 1e-9 and reduce <= 1e-12 and dt < 2
    detail = ", ".join(f"{k} {v:.1e}" for k, v in res.items())
    acceptance_line(6, ok, f"Riccati residuals {detail}; f - c eta {reduce:.1e}; {dt:.2f} s")
    assert ok


def test_criterion_07_partner_spectra(acceptance_line):
    t0 = time.perf_counter()
    grid = Grid1D(-10, 10, 2000)
    rep = partner_spectrum_check(E("xi", ["xi"]), grid, 4)
    minus_ok = np.allclose(rep.minus.values[:4], [0, 2, 4, 6], atol=2e-3)
    plus_ok = np.allclose(rep.plus.values[:4], [2, 4, 6, 8], atol=2e-3)
    tanh = partner_spectrum_check(E("tanh(xi)", ["xi"]), grid, 1)
    E0 = float(tanh.minus.values[0])
    dt = time.perf_counter() - t0
    ok = rep.max_deviation <= 2e-3 and minus_ok and plus_ok and abs(E0) <= 1e-4 and dt < 30
    acceptance_line(7, ok, f"f=xi pairing deviation {rep.max_deviation:.2e}; f=tanh E0 "
                           f"{E0:.2e}; {dt:.1f} s")
    assert ok


def _chart_points(chart, count, seed, margin=0.2):
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


def _gauss(r):
    return np.exp(-np.sum((r - 0.2) ** 2, axis=-1))


def _gauss_lap(r):
    d2 = np.sum((r - 0.2) ** 2, axis=-1)
    return (4 * d2 - 2 * r.shape[-1]) * np.exp(-d2)


def test_criterion_08_geometry(acceptance_line):
    t0 = time.perf_counter()
    chart = Chart3D(P3)
    pts = _chart_points(chart, 50, 8)
    J = numerical_jacobian_3d(chart, pts)
    det_err = float(np.max(np.abs(np.linalg.det(J) - jacobian_3d(chart, pts))
                           / np.abs(jacobian_3d(chart, pts))))
    # rows of J are the gradients of beta, gamma, eta; orthogonality = vanishing cosines
    G = J @ np.swapaxes(J, -1, -2)
    d = np.sqrt(np.diagonal(G, axis1=-2, axis2=-1))
    cos = G / (d[..., :, None] * d[..., None, :])
    off = float(np.max(np.abs(cos - np.eye(3))))

    steps = np.array([0.04, 0.02, 0.01, 0.005])
    c2 = Chart2D(0.4, 1.0, 0.8)
    p2 = np.array([-0.4, 0.3])
    e2 = [abs(laplacian_2d(c2, lambda r, x: _gauss(inverse_2d(c2, r, x)), p2, s) - _gauss_lap(p2))
          for s in steps]
    p3 = np.array([0.3, -0.2, 0.4])
    branch = np.sign((P3.a + p3 @ P3.c.T)[1])
    e3 = [abs(laplacian_3d(chart, lambda b, g, e: _gauss(inverse_3d(chart, b, g, e, branch)),
                           p3, s) - _gauss_lap(p3)) for s in steps]
    o2 = float(np.polyfit(np.log(steps), np.log(e2), 1)[0])
    o3 = float(np.polyfit(np.log(steps), np.log(e3), 1)[0])
    dt = time.perf_counter() - t0
    ok = det_err <= 1e-6 and off <= 1e-8 and abs(o2 - 2) <= 0.2 and abs(o3 - 2) <= 0.2 and dt < 20
    acceptance_line(8, ok, f"Jacobian rel err {det_err:.1e}, off-diagonal cos {off:.1e}, "
                           f"Laplacian orders 2D {o2:.2f} 3D {o3:.2f}; {dt:.2f} s")
    assert ok


def test_criterion_09_hierarchy(acceptance_line):
    t0 = time.perf_counter()
    grid = Grid1D(-10, 10, 2000)
    chain = build_hierarchy(E("x^2", ["x"]), [0, 0, 0], grid, k=4)
    dev = 0.0
    for m, lv in enumerate(chain.levels):
        dev = max(dev, float(np.max(np.abs(lv.spectrum.values - (2 * m + 1 + 2 * np.arange(4))))))
    deleted = [lv.deleted for lv in chain.levels[1:]]
    del_ok = np.allclose(deleted, [1, 3, 5], atol=5e-3)
    g2 = Grid1D(-10, 10, 4000)
    U = missing_state(E("sech(x)", ["x"]), g2)
    r = partner_residual(U, E("1", ["x"]), 0.0, g2)
    dt = time.perf_counter() - t0
    ok = dev <= 5e-3 and del_ok and r <= 1e-6 and dt < 60
    acceptance_line(9, ok, f"chain deletes {[round(d, 4) for d in deleted]}, max spectral "
                           f"deviation {dev:.1e}; missing-state residual {r:.1e}; {dt:.1f} s")
    assert ok


def test_criterion_10_cli(acceptance_line, tmp_path):
    cfg = tmp_path / "inverse_square.json"
    cfg.write_text(json.dumps({"family": "2d", "a": [0, 1], "c": 1, "f": "eta",
                               "h": "2/kappa^2", "psi": {"center": [-2, 0.3]},
                               "grid": {"lo": [-2, -1], "hi": [0, 1], "N": [5, 5]}}))
    runs = [
        ["construct", "--config", str(cfg)],
        ["verify", "--config", str(cfg)],
        ["spectrum", "--f", "xi", "--k", "3", "--N", "800"],
        ["hierarchy", "--V", "x^2", "--seeds", "0,0", "--k", "3", "--N", "800"],
        ["validate", "--preset", "7"],
    ]
    identical = True
    for i, args in enumerate(runs):
        outs = []
        for rep in range(2):
            j, c = tmp_path / f"{i}_{rep}.json", tmp_path / f"{i}_{rep}.csv"
            code = main(args + ["--output", str(j), "--csv", str(c)])
            assert code == 0, args
            outs.append((j.read_bytes(), c.read_bytes() if c.exists() else b""))
        identical &= outs[0] == outs[1]
    neg3 = main(["verify", "--config", str(cfg), "--corrupt-V1", "0.1",
                 "--output", str(tmp_path / "neg3.json")])
    neg5 = main(["validate", "--n", "3", "--a", "0,0,1", "--c", "0,0,1",
                 "--output", str(tmp_path / "neg5.json")])
    cfg_err = main(["construct", "--config", str(cfg), "--f", "eta +"])
    ok = identical and neg3 == 2 and neg5 == 2 and cfg_err == 1
    acceptance_line(10, ok, f"byte-identical reruns {identical}; exit codes: corrupted V1 {neg3}, "
                            f"inadmissible (a, c) {neg5}, bad expression {cfg_err}")
    assert ok


def test_negative_control_laplacian_commutator():
    # a symmetric c is not a Euclidean generator; the commutator must not vanish
    from isospec.euclid import Polynomial
    x, y = Polynomial.coordinate(2, 0), Polynomial.coordinate(2, 1)
    assert laplacian_commutes(None, x * x * y, L=[y, x]) > 1e-3


def test_negative_control_intertwining():
    pair = _inverse_square()
    bad = pair.with_V1(pair.V1.shifted(0.1), "shifted")
    t = convergence_study(bad, GaussianBump((-2.0, 0.3)), 0.1, node_lattice((-2.0, 0.3), 0.5, 3))
    assert abs(t.order - 2) > 0.2
