"""Command line front end.

Subcommands: mesh (emit a cut disk mesh), eig (single pole solve), rate
(the full moving-pole study), crack (one slit solve or ladder), lprofile
(angle profile of the slit gradient integral), verify (identity and
inequality suites with pass/fail lines).
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .abo import AbConfig, build_pole_mesh, solve_ab
from .crack import (
    hardy_poincare_margins,
    identity_suite,
    moment_constancy,
    solve_we,
    solve_wp,
)
from .crack import extrapolate_L as _extrapolate
from .mesh import write_mesh
from .sweep import (
    StudyConfig,
    default_profile_grid,
    emit_reports,
    run_L_profile_study,
    run_rate_study,
    write_profile_data,
)


def _load_config(path) -> StudyConfig:
    if path is None:
        return StudyConfig()
    with open(path) as fh:
        return StudyConfig.from_json(json.load(fh))


def _cmd_mesh(args) -> int:
    cfg = AbConfig(h=args.h, radius=args.radius,
                   anchor=tuple(args.anchor) if args.anchor else None)
    cm = build_pole_mesh(cfg, tuple(args.pole), args.angle)
    write_mesh(args.out, cm)
    print("wrote %s (%d vertices, %d triangles)"
          % (args.out, cm.base.num_vertices, len(cm.base.triangles)))
    return 0


def _cmd_eig(args) -> int:
    cfg = AbConfig(h=args.h, radius=args.radius,
                   anchor=tuple(args.anchor) if args.anchor else None)
    res = solve_ab(cfg, tuple(args.pole), args.angle, args.n0)
    window = [p.value for p in res.pairs]
    print("lambda_%d = %.12g  (simple: %s)" % (args.n0, res.value, res.simple))
    print("window:", " ".join("%.8g" % v for v in window))
    if res.warning:
        print("warning:", res.warning)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"n0": args.n0, "value": res.value, "window": window,
                       "simple": bool(res.simple), "warning": res.warning},
                      fh, indent=2, sort_keys=True)
            fh.write("\n")
        print("wrote", args.out)
    return 0


def _cmd_rate(args) -> int:
    cfg = _load_config(args.config)
    for warning in cfg.warnings():
        print("config warning:", warning, file=sys.stderr)
    records = run_rate_study(cfg, jobs=args.jobs)
    profile = None
    if args.with_profile:
        profile = run_L_profile_study(cfg, records=records)
    for rec in records:
        print("offset %+.4f: slope_lambda=%.4g limit_lambda=%.6g "
              "slope_E=%.4g limit_E=%.6g pred_C0cos=%.6g pred_L=%.6g"
              % (rec.offset, rec.slope_lambda, rec.limit_lambda,
                 rec.slope_E, rec.limit_E, rec.pred_C0cos, rec.pred_L))
        for flag in rec.flags:
            print("  flag:", flag)
    if args.out:
        for path in emit_reports(records, args.out, args.format,
                                 profile=profile, config=cfg):
            print("wrote", path)
    return 0


def _cmd_crack(args) -> int:
    radii = [args.R, 2 * args.R, 4 * args.R] if args.ladder else [args.R]
    sols = []
    for R in radii:
        if args.alpha is None:
            sols.append(solve_we(k=args.k, R=R, h=args.h))
        else:
            sols.append(solve_wp(args.alpha, k=args.k, R=R, h=args.h))
    for sol in sols:
        line = "R=%-5g J=%.8g L_trunc=%.8g omega1=%.8g" % (
            sol.R, sol.J, sol.L_trunc, sol.omega1)
        if sol.mk is not None:
            line += " mk=%.8g mk_trace=%.8g" % (sol.mk, sol.mk_trace)
        print(line)
    if args.ladder:
        L_inf = _extrapolate(sols)
        print("L extrapolated = %.8g" % L_inf)
        if sols[0].mk is not None:
            mk_inf = _extrapolate([(s.R, s.mk) for s in sols])
            print("mk extrapolated = %.8g" % mk_inf)
    if args.out:
        sols[-1].export(args.out)
        print("wrote export bundle at prefix", args.out)
    return 0


def _cmd_lprofile(args) -> int:
    cfg = _load_config(args.config)
    alphas = args.alphas if args.alphas else default_profile_grid(args.k)
    report = run_L_profile_study(cfg, k=args.k, alphas=alphas)
    for row in report["table"]:
        print("alpha=%-10.6g L=%.8g J=%.8g" % (row["alpha"], row["L"], row["J"]))
    print("evenness residual:", report["evenness"])
    print("period residual:", report["period_residual"])
    if args.out:
        write_profile_data(report, args.out)
        print("wrote", args.out)
    return 0


def _check(name: str, value: float, bound: float, failures: list) -> None:
    ok = value <= bound
    print("%s %-38s measured=%.4g bound=%.4g"
          % ("PASS" if ok else "FAIL", name, value, bound))
    if not ok:
        failures.append(name)


def _cmd_verify(args) -> int:
    failures = []

    we = [solve_we(k=1, R=R, h=0.05) for R in (4.0, 8.0, 16.0)]
    mk = _extrapolate([(s.R, s.mk) for s in we])
    mk_trace = _extrapolate([(s.R, s.mk_trace) for s in we])
    _check("reference constant two routes", abs(mk - mk_trace) / abs(mk),
           0.02, failures)
    _check("reference constant sign", mk, 0.0, failures)

    for alpha in (math.pi / 4, math.pi / 2, 3 * math.pi / 4, math.pi):
        sols = [solve_wp(alpha, k=1, R=R, h=0.05) for R in (8.0, 16.0, 32.0)]
        ids = identity_suite(sols, mk)
        worst = max(ids["r1"], ids["r2"], ids["r3"])
        _check("identity residuals alpha=%.4g" % alpha, worst, 0.02, failures)

    margins = hardy_poincare_margins()
    _check("hardy margin", -min(margins["hardy"]), 1e-3, failures)
    _check("poincare margin", -min(margins["poincare"]), 1e-3, failures)

    sols = [solve_wp(math.pi, k=1, R=R, h=0.05) for R in (8.0, 16.0, 32.0)]
    mom = moment_constancy(sols)
    _check("moment constancy", mom["spread"], 0.02, failures)

    acfg = AbConfig(h=0.05)
    res = solve_ab(acfg, (0.3, 0.0), 0.0, 1)
    rs = res.system
    pair = res.pairs[0]
    resid = rs.K @ pair.vector - pair.value * (rs.M @ pair.vector)
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(20):
        v = rng.standard_normal(rs.K.shape[0])
        scale = math.sqrt(float(v @ (rs.K @ v) + v @ (rs.M @ v)))
        worst = max(worst, abs(float(v @ resid)) / scale)
    _check("weak residual on random fields", worst, 1e-6, failures)

    if failures:
        print("%d of the checks failed" % len(failures))
        return 1
    print("all checks passed")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ablab",
        description="Moving-pole eigenvalue laboratory on the disk.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="build a cut disk mesh and write it")
    p.add_argument("--pole", type=float, nargs=2, required=True)
    p.add_argument("--angle", type=float, default=0.0)
    p.add_argument("--anchor", type=float, nargs=2, default=None)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--h", type=float, default=0.05)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mesh)

    p = sub.add_parser("eig", help="solve one pole position")
    p.add_argument("--pole", type=float, nargs=2, required=True)
    p.add_argument("--angle", type=float, default=0.0)
    p.add_argument("--anchor", type=float, nargs=2, default=None)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--h", type=float, default=0.05)
    p.add_argument("--n0", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_eig)

    p = sub.add_parser("rate", help="run the moving-pole rate study")
    p.add_argument("--config", default=None, help="StudyConfig as JSON")
    p.add_argument("--out", default=None, help="report directory")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--format", default="all",
                   choices=["csv", "json", "plots", "all"])
    p.add_argument("--with-profile", action="store_true",
                   help="also run the angle profile study and merge")
    p.set_defaults(func=_cmd_rate)

    p = sub.add_parser("crack", help="solve a slit problem")
    p.add_argument("--alpha", type=float, default=None,
                   help="slit angle; omit for the reflected axis problem")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--R", type=float, default=4.0)
    p.add_argument("--h", type=float, default=0.05)
    p.add_argument("--ladder", action="store_true",
                   help="solve at R, 2R, 4R and extrapolate")
    p.add_argument("--out", default=None, help="export bundle prefix")
    p.set_defaults(func=_cmd_crack)

    p = sub.add_parser("lprofile", help="angle profile of the slit integral")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--alphas", type=float, nargs="*", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_lprofile)

    p = sub.add_parser("verify", help="identity and inequality suites")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_verify)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
