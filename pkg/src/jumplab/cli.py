"""`lab` command line interface.

Exit codes: 0 (ok), 1 (a configured threshold assertion failed), 2 (error).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import LabError
from .io import ExperimentConfig, jsonable, load_config, run_experiment


def _ints(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x]


def _add_model_flags(p: argparse.ArgumentParser):
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--metric", choices=("linf", "l1"), default="linf")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", dest="out_dir", default=None,
                   help="bundle output directory")
    p.add_argument("--assert-thresholds", action="store_true",
                   help="exit 1 if any headline assertion fails")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lab",
                                 description="jump-process laboratory")
    sub = ap.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("config")
    run.add_argument("--out", dest="out_dir", default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--assert-thresholds", action="store_true")

    heat = sub.add_parser("heat", help="heat kernel row dump")
    _add_model_flags(heat)
    heat.add_argument("--t", type=float, default=1.0)
    heat.add_argument("--r-win", type=int, default=16)
    heat.add_argument("--mode", choices=("killed", "reflected"),
                      default="killed")
    _add_common(heat)

    et = sub.add_parser("exit-time", help="expected exit time sweep")
    _add_model_flags(et)
    et.add_argument("--radii", type=_ints, default=[8, 16, 32])
    _add_common(et)

    pi = sub.add_parser("poincare", help="Poincare constant sweep")
    _add_model_flags(pi)
    pi.add_argument("--radii", type=_ints, default=[4, 8, 16])
    _add_common(pi)

    phi = sub.add_parser("phi", help="parabolic Harnack constant of a box")
    _add_model_flags(phi)
    phi.add_argument("--R", type=int, default=8)
    phi.add_argument("--lam", type=float, default=1.0)
    _add_common(phi)

    ehi = sub.add_parser("ehi", help="elliptic Harnack constant")
    _add_model_flags(ehi)
    ehi.add_argument("--R", type=int, default=8)
    _add_common(ehi)

    cs = sub.add_parser("conditions", help="all-conditions sweep")
    _add_model_flags(cs)
    cs.add_argument("--radii", type=_ints, default=[4, 8, 16])
    _add_common(cs)

    cex = sub.add_parser("cex", help="headline experiments")
    cexsub = cex.add_subparsers(dest="which", required=True)
    sup = cexsub.add_parser("suppressed", help="suppressed-pair experiment")
    sup.add_argument("--alpha", type=float, default=1.0)
    sup.add_argument("--d", type=int, default=1)
    sup.add_argument("--radii", type=_ints, default=[8, 16],
                     help="pair gaps d(0, y0)")
    sup.add_argument("--t-probe", type=float, default=1e-3)
    _add_common(sup)
    lad = cexsub.add_parser("ladder", help="ladder-kernel experiment")
    lad.add_argument("--alpha", type=float, default=1.5)
    lad.add_argument("--ranges", type=_ints, default=[16, 64, 256])
    lad.add_argument("--n-hit", type=int, default=2000)
    lad.add_argument("--n-sup", type=int, default=20000)
    _add_common(lad)
    return ap


def _config_from_args(args) -> ExperimentConfig:
    if args.cmd == "run":
        cfg = load_config(args.config)
        if args.out_dir is not None:
            cfg.out_dir = args.out_dir
        if args.seed is not None:
            cfg.seed = args.seed
        if args.assert_thresholds:
            cfg.assert_thresholds = True
        return cfg
    if args.cmd == "cex":
        if args.which == "suppressed":
            params = {"alpha": args.alpha, "d": args.d, "radii": args.radii,
                      "t_probe": args.t_probe}
            exp = "cex-suppressed"
        else:
            params = {"alpha": args.alpha, "ranges": args.ranges,
                      "n_hit": args.n_hit, "n_sup": args.n_sup}
            exp = "cex-ladder"
        return ExperimentConfig(experiment=exp, params=params, seed=args.seed,
                                out_dir=args.out_dir,
                                assert_thresholds=args.assert_thresholds)
    exp = {"conditions": "conditions-sweep"}.get(args.cmd, args.cmd)
    params = {"alpha": args.alpha, "d": args.d, "metric": args.metric}
    for key in ("t", "r_win", "mode", "radii", "R", "lam"):
        if hasattr(args, key):
            params[key] = getattr(args, key)
    return ExperimentConfig(experiment=exp, params=params, seed=args.seed,
                            out_dir=args.out_dir,
                            assert_thresholds=args.assert_thresholds)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        report, failures = run_experiment(cfg)
    except LabError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    if not cfg.out_dir:
        json.dump(jsonable(report), sys.stdout, sort_keys=True, indent=2)
        sys.stdout.write("\n")
    if failures:
        for a in failures:
            print(f"assertion failed: {a['name']}: value {a['value']} vs "
                  f"threshold {a['threshold']}", file=sys.stderr)
        if cfg.assert_thresholds:
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
