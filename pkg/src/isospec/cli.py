"""Command-line driver.

    isospec <command> [--config FILE] [flags]

Commands: validate, construct, verify, spectrum, hierarchy, convert-coords,
presets.  A JSON config supplies any option; explicit flags win.  Exit codes:
0 success, 1 configuration or parse error, 2 verification or constraint
failure.  ISOSPEC_LOG sets the log level (e.g. INFO, DEBUG).
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import expr as ex
from .coords import Chart2D, Chart3D, forward_2d, forward_3d, inverse_2d
from .euclid import ParamsError, make_params
from .fields import SingularPointError, coordinate_names
from .hierarchy import build_hierarchy, embed_2d
from .integrability import (PRESETS, check_n4, check_n5, check_pfaffian_conditions,
                            preset_table1)
from .numerics.eigen import Grid1D
from .numerics.spectra import partner_spectrum_check
from .numerics.stencil import GaussianBump, convergence_study, node_lattice
from .potentials import (HomogeneityError, build_1d_pair, build_2d_pair, build_3d_pair,
                         build_constant_shift, build_general_pair, build_translational,
                         free_motion_partners_2d, gradient_identity_residual,
                         laplacian_identity_residual, shift_identity_residual,
                         free_motion_partners_3d, sample_nonsingular)

log = logging.getLogger("isospec")

EXIT_OK, EXIT_CONFIG, EXIT_FAIL = 0, 1, 2
ORDER_THRESHOLD = 1.8
IDENTITY_TOL = 1e-6


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config helpers

def _num_list(text):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = str(text).strip()
    if text.startswith("["):
        return json.loads(text)
    return [float(v) for v in text.split(",") if v.strip()]


def _get(cfg: dict, key: str, default=None, required: bool = False):
    if key in cfg and cfg[key] is not None:
        return cfg[key]
    if required:
        raise ConfigError(f"missing required setting {key!r}")
    return default


def _expr(cfg: dict, key: str, variables, default: str | None = None):
    src = _get(cfg, key, default)
    if src is None:
        raise ConfigError(f"missing expression {key!r}")
    try:
        return ex.parse(str(src), variables)
    except ex.ExprError as err:
        raise ConfigError(f"{key}: {err}") from err


def _params(cfg: dict):
    if _get(cfg, "preset") is not None:
        return preset_table1(int(cfg["preset"])).params
    n = int(_get(cfg, "n", required=True))
    a = _num_list(_get(cfg, "a", required=True))
    c = _get(cfg, "c", required=True)
    c = np.asarray(json.loads(c) if isinstance(c, str) and c.strip().startswith("[")
                   else (_num_list(c) if isinstance(c, str) else c), dtype=float)
    if c.size == 1:
        c = c.reshape(())
    return make_params(n, a, c)


def load_config(args) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config {args.config}: {err}") from err
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
    for key, value in vars(args).items():
        if key in ("config", "func", "command") or value is None:
            continue
        cfg[key.replace("-", "_")] = value
    return cfg


def _write(text: str, path: str | None):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def _fmt(v) -> str:
    return "%.17g" % v


# ---------------------------------------------------------------- pair construction

FAMILIES = ("1d", "constant-shift", "translational", "general", "2d", "3d",
            "free-motion-2d", "free-motion-3d", "embedded-2d")


def build_pair(cfg: dict):
    family = _get(cfg, "family", required=True)
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")
    if family == "1d":
        return build_1d_pair(_expr(cfg, "f", ["x"]), float(_get(cfg, "b", 0.0)))
    if family == "constant-shift":
        a = _num_list(_get(cfg, "a", required=True))
        n = len(a)
        gvars = list(coordinate_names(n)) + [f"u{k + 1}" for k in range(n - 1)]
        return build_constant_shift(a, float(_get(cfg, "p0", required=True)),
                                    _num_list(_get(cfg, "b_vector")),
                                    _expr(cfg, "g", gvars, "0"))
    if family == "translational":
        a = _num_list(_get(cfg, "a", required=True))
        return build_translational(a, _expr(cfg, "f", ["zeta"]),
                                   _expr(cfg, "g", coordinate_names(len(a)), "0"))
    if family == "general":
        p = _params(cfg)
        pair = _get(cfg, "pair")
        pair = tuple(int(v) - 1 for v in pair) if pair else None
        return build_general_pair(p, _expr(cfg, "f", ["eta"]),
                                  _expr(cfg, "h", p.variables, "0"), pair)
    if family == "2d":
        a = _num_list(_get(cfg, "a", required=True))
        c = float(np.asarray(_num_list(_get(cfg, "c", required=True))).reshape(-1)[0])
        return build_2d_pair(a[0], a[1], c, _expr(cfg, "f", ["eta"]),
                             _expr(cfg, "h", ["kappa"], "0"))
    if family == "3d":
        p = _params(cfg)
        return build_3d_pair(p, _expr(cfg, "f", ["eta"]), _expr(cfg, "h", ["beta", "gamma"], "0"),
                             _get(cfg, "eta", "eta"))
    if family == "free-motion-2d":
        a = _num_list(_get(cfg, "a", [0.0, 1.0]))
        c = float(np.asarray(_num_list(_get(cfg, "c", required=True))).reshape(-1)[0])
        return free_motion_partners_2d(float(_get(cfg, "b", required=True)),
                                       float(_get(cfg, "b1", 0.0)), c, a[0], a[1])
    if family == "free-motion-3d":
        return free_motion_partners_3d(_params(cfg), int(_get(cfg, "kind", required=True)),
                                       float(_get(cfg, "b1", 0.0)), _get(cfg, "eta", "eta"))
    # embedded-2d
    return embed_2d(_expr(cfg, "V", ["xi"]), _expr(cfg, "H", ["rho"], "0"),
                    float(_get(cfg, "E_n", required=True)), _expr(cfg, "phi", ["xi"]),
                    float(np.asarray(_num_list(_get(cfg, "c", required=True))).reshape(-1)[0]),
                    *(_num_list(_get(cfg, "a", [0.0, 1.0]))[:2]))


def _maybe_corrupt(pair, cfg):
    shift = _get(cfg, "corrupt_V1")
    if shift:
        return pair.with_V1(pair.V1.shifted(float(shift)), f"V1 shifted by {shift}")
    return pair


# ---------------------------------------------------------------- commands

def cmd_validate(cfg: dict) -> int:
    p = _params(cfg)
    reports = [check_pfaffian_conditions(p)]
    if p.n == 4:
        reports.append(check_n4(p))
    elif p.n == 5:
        try:
            reports.append(check_n5(p.c, p.a))
        except ParamsError as err:
            reports.append(None)
            log.warning("%s", err)
    ok = all(r is not None and r.satisfied for r in reports)
    out = {"params": p.to_dict(), "satisfied": ok,
           "reports": [r.to_dict() if r is not None else "unsupported" for r in reports]}
    _write(_dump(out), _get(cfg, "output"))
    return EXIT_OK if ok else EXIT_FAIL


def _sample_grid(cfg: dict, n: int) -> np.ndarray:
    grid = _get(cfg, "grid", {})
    lo = np.broadcast_to(np.asarray(grid.get("lo", -1.0), dtype=float), (n,))
    hi = np.broadcast_to(np.asarray(grid.get("hi", 1.0), dtype=float), (n,))
    N = np.broadcast_to(np.asarray(grid.get("N", 5), dtype=int), (n,))
    axes = [np.linspace(l, u, k) for l, u, k in zip(lo, hi, N)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def construct_outputs(cfg: dict) -> tuple[dict, str]:
    pair = _maybe_corrupt(build_pair(cfg), cfg)
    pts = _sample_grid(cfg, pair.n)
    names = list(coordinate_names(pair.n))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names + ["V0", "V1", "L0", "singular"])
    bad = pair.singular_mask(pts)
    for pt, s in zip(pts, bad):
        if s:
            w.writerow([_fmt(v) for v in pt] + ["", "", "", 1])
            continue
        q = pt[None, :]
        vals = [pair.V0(q)[0], pair.V1(q)[0], pair.L0(q)[0]]
        w.writerow([_fmt(v) for v in pt] + [_fmt(v) for v in vals] + [0])
    return pair.to_dict(), buf.getvalue()


def cmd_construct(cfg: dict) -> int:
    sweep = _sweep_configs(cfg)
    if sweep:
        results = _run_sweep(construct_outputs, sweep, cfg)
        desc = [{"settings": s, "pair": d} for s, (d, _) in zip(_sweep_labels(cfg), results)]
        text = "".join(c for _, c in results)
        _write(_dump(desc), _get(cfg, "output"))
        if _get(cfg, "csv"):
            Path(cfg["csv"]).write_text(text)
        return EXIT_OK
    desc, table = construct_outputs(cfg)
    _write(_dump(desc), _get(cfg, "output"))
    if _get(cfg, "csv"):
        Path(cfg["csv"]).write_text(table)
    return EXIT_OK


def verify_outputs(cfg: dict) -> dict:
    pair = _maybe_corrupt(build_pair(cfg), cfg)
    n = pair.n
    psi_cfg = _get(cfg, "psi", {})
    center = np.broadcast_to(np.asarray(psi_cfg.get("center", 0.0), dtype=float), (n,))
    width = float(psi_cfg.get("width", 0.5))
    psi = GaussianBump(tuple(center), width)
    h0 = float(_get(cfg, "h0", 0.1))
    halvings = int(_get(cfg, "halvings", 3))
    nodes = node_lattice(center, float(_get(cfg, "node_half_width", 0.5)),
                         int(_get(cfg, "node_count", 3)))
    table = convergence_study(pair, psi, h0, nodes, halvings=halvings)
    pts = sample_nonsingular(pair, 20, seed=int(_get(cfg, "seed", 0)))
    ident = {"gradient": gradient_identity_residual(pair, pts),
             "laplacian": laplacian_identity_residual(pair, pts),
             "shift": shift_identity_residual(pair, pts)}
    order = table.order
    ok = order >= float(_get(cfg, "order_threshold", ORDER_THRESHOLD)) and \
        all(v <= IDENTITY_TOL for v in ident.values())
    return {"family": pair.kind, "convergence": table.to_dict(), "identities": ident,
            "order": order, "passed": bool(ok)}


def cmd_verify(cfg: dict) -> int:
    sweep = _sweep_configs(cfg)
    if sweep:
        results = _run_sweep(verify_outputs, sweep, cfg)
        out = [{"settings": s, "result": r} for s, r in zip(_sweep_labels(cfg), results)]
        ok = all(r["passed"] for r in results)
    else:
        out = verify_outputs(cfg)
        ok = out["passed"]
    _write(_dump(out), _get(cfg, "output"))
    if _get(cfg, "csv") and not sweep:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["h", "residual", "order"])
        conv = out["convergence"]
        orders = [float("nan")] + conv["pairwise_order"]
        for h, r, o in zip(conv["h"], conv["residual"], orders):
            w.writerow([_fmt(h), _fmt(r), _fmt(o)])
        Path(cfg["csv"]).write_text(buf.getvalue())
    return EXIT_OK if ok else EXIT_FAIL


def _grid1d(cfg: dict, default=(-10.0, 10.0, 2000)) -> Grid1D:
    dom = _num_list(_get(cfg, "domain", list(default[:2])))
    return Grid1D(float(dom[0]), float(dom[1]), int(_get(cfg, "N", default[2])))


def cmd_spectrum(cfg: dict) -> int:
    f = _expr(cfg, "f", ["xi"])
    k = int(_get(cfg, "k", 4))
    rep = partner_spectrum_check(f, _grid1d(cfg), k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["hamiltonian", "index", "eigenvalue", "residual"])
    for name, spec in (("minus", rep.minus), ("plus", rep.plus)):
        for i, E, r in spec.to_rows():
            w.writerow([name, i, _fmt(E), _fmt(r)])
    if _get(cfg, "csv"):
        Path(cfg["csv"]).write_text(buf.getvalue())
    out = rep.to_dict()
    tol = float(_get(cfg, "pair_tol", 2e-3))
    out["pair_tol"] = tol
    out["passed"] = rep.max_deviation <= tol
    _write(_dump(out), _get(cfg, "output"))
    return EXIT_OK if out["passed"] else EXIT_FAIL


def cmd_hierarchy(cfg: dict) -> int:
    V = _expr(cfg, "V", ["x"])
    seeds = [int(s) for s in _num_list(_get(cfg, "seeds", []))]
    chain = build_hierarchy(V, seeds, _grid1d(cfg), int(_get(cfg, "k", 4)))
    out = chain.to_dict()
    if _get(cfg, "csv"):
        Path(cfg["csv"]).write_text(chain.to_csv())
    ok = not any(lv.singular for lv in chain.levels)
    embed = _get(cfg, "embed")
    if embed:
        sub = dict(embed, family="embedded-2d")
        res = verify_outputs(sub)
        out["embed"] = res
        ok = ok and res["passed"]
    out["passed"] = ok
    _write(_dump(out), _get(cfg, "output"))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_convert_coords(cfg: dict) -> int:
    path = _get(cfg, "points", required=True)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as err:
        raise ConfigError(f"cannot read points file: {err}") from err
    header = [h.strip() for h in rows[0]]
    if header not in (["x", "y"], ["x", "y", "z"], ["rho", "xi"]):
        raise ConfigError(f"points header must be x,y[,z] or rho,xi; got {header}")
    pts = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    failed = 0
    if header == ["rho", "xi"] or len(header) == 2:
        a = _num_list(_get(cfg, "a", required=True))
        c = float(np.asarray(_num_list(_get(cfg, "c", required=True))).reshape(-1)[0])
        chart = Chart2D(a[0], a[1], c)
        if header == ["rho", "xi"]:
            w.writerow(["rho", "xi", "x", "y", "singular"])
            for pt in pts:
                try:
                    xy = inverse_2d(chart, pt[0], pt[1])
                    w.writerow([_fmt(v) for v in pt] + [_fmt(v) for v in xy] + [0])
                except (ValueError, SingularPointError):
                    failed += 1
                    w.writerow([_fmt(v) for v in pt] + ["", "", 1])
        else:
            w.writerow(["x", "y", "kappa", "eta", "rho", "xi", "singular"])
            for pt in pts:
                try:
                    vals = forward_2d(chart, pt)
                    w.writerow([_fmt(v) for v in pt] + [_fmt(float(v)) for v in vals] + [0])
                except SingularPointError:
                    failed += 1
                    w.writerow([_fmt(v) for v in pt] + ["", "", "", "", 1])
    else:
        chart = Chart3D(_params(dict(cfg, n=3)), _get(cfg, "eta", "eta"))
        w.writerow(["x", "y", "z", "beta", "gamma", "eta", "singular"])
        for pt in pts:
            try:
                vals = forward_3d(chart, pt)
                w.writerow([_fmt(v) for v in pt] + [_fmt(float(v)) for v in vals] + [0])
            except SingularPointError:
                failed += 1
                w.writerow([_fmt(v) for v in pt] + ["", "", "", 1])
    _write(buf.getvalue(), _get(cfg, "output"))
    log.info("%d of %d points singular", failed, len(pts))
    return EXIT_OK


def cmd_presets(cfg: dict) -> int:
    row = _get(cfg, "row")
    rows = [int(row)] if row is not None else list(PRESETS)
    out = []
    for r in rows:
        pre = preset_table1(r)
        d = pre.to_dict()
        d["check"] = check_pfaffian_conditions(pre.params).satisfied
        out.append(d)
    _write(_dump(out if row is None else out[0]), _get(cfg, "output"))
    return EXIT_OK


# ---------------------------------------------------------------- sweeps

def _sweep_configs(cfg: dict) -> list[dict]:
    spec = _get(cfg, "sweep")
    if not spec:
        return []
    axes = _parse_sweep(spec)
    keys = sorted(axes)
    return [dict(cfg, sweep=None, **dict(zip(keys, combo)))
            for combo in itertools.product(*(axes[k] for k in keys))]


def _sweep_labels(cfg: dict) -> list[dict]:
    axes = _parse_sweep(_get(cfg, "sweep"))
    keys = sorted(axes)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(axes[k] for k in keys))]


def _parse_sweep(spec) -> dict:
    if isinstance(spec, dict):
        axes = {k: [float(v) for v in vals] for k, vals in spec.items()}
    else:
        axes = {}
        for item in spec:
            key, _, vals = str(item).partition("=")
            axes[key.strip()] = [float(v) for v in vals.split(",") if v.strip()]
    for key in axes:
        if key not in ("b", "b1"):
            raise ConfigError(f"sweeps run over b and b1 only, got {key!r}")
    return axes


def _run_sweep(fn, configs: list[dict], cfg: dict) -> list:
    workers = int(_get(cfg, "workers", 1))
    if workers <= 1:
        return [fn(c) for c in configs]
    # results are gathered in submission order, so output stays deterministic
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, configs))


# ---------------------------------------------------------------- argparse

COMMANDS = {
    "validate": cmd_validate, "construct": cmd_construct, "verify": cmd_verify,
    "spectrum": cmd_spectrum, "hierarchy": cmd_hierarchy,
    "convert-coords": cmd_convert_coords, "presets": cmd_presets,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isospec", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--output", help="write the JSON/CSV result here instead of stdout")
        p.add_argument("--csv", help="secondary CSV output path")

    def param_flags(p):
        p.add_argument("--n", type=int)
        p.add_argument("--a", help="comma-separated translation vector")
        p.add_argument("--c", help="c_12 (n=2), c-vector (n=3) or JSON matrix")
        p.add_argument("--preset", type=int, help="parameter preset row 1-10")

    def pair_flags(p):
        param_flags(p)
        p.add_argument("--family", choices=FAMILIES)
        p.add_argument("--f")
        p.add_argument("--h")
        p.add_argument("--g")
        p.add_argument("--b", type=float)
        p.add_argument("--b1", type=float)
        p.add_argument("--p0", type=float)
        p.add_argument("--kind", type=int)
        p.add_argument("--eta", choices=("eta", "eta2", "eta3"))
        p.add_argument("--corrupt-V1", dest="corrupt_V1", type=float,
                       help="add a constant to V1 (negative control)")
        p.add_argument("--sweep", action="append", help="b=v1,v2,... or b1=...")
        p.add_argument("--workers", type=int)

    for name in COMMANDS:
        p = sub.add_parser(name)
        common(p)
        if name == "validate":
            param_flags(p)
        elif name in ("construct", "verify"):
            pair_flags(p)
            if name == "verify":
                p.add_argument("--h0", type=float)
                p.add_argument("--halvings", type=int)
        elif name == "spectrum":
            p.add_argument("--f")
            p.add_argument("--domain")
            p.add_argument("--N", type=int)
            p.add_argument("--k", type=int)
        elif name == "hierarchy":
            p.add_argument("--V")
            p.add_argument("--seeds")
            p.add_argument("--domain")
            p.add_argument("--N", type=int)
            p.add_argument("--k", type=int)
        elif name == "convert-coords":
            param_flags(p)
            p.add_argument("--points", help="CSV with header x,y[,z] or rho,xi")
            p.add_argument("--eta", choices=("eta", "eta2", "eta3"))
        elif name == "presets":
            p.add_argument("--row", type=int)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("ISOSPEC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_CONFIG if err.code else EXIT_OK
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, ex.ExprError, ParamsError, HomogeneityError, KeyError,
            TypeError) as err:
        print(f"isospec: configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularPointError, ValueError, RuntimeError) as err:
        print(f"isospec: {err}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
