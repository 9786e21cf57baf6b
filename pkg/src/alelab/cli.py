"""Command line entry point: ``alelab {simulate,converge,stability,distance,render}``."""

from __future__ import annotations

import argparse
import json
import sys

from .errors import AleLabError
from .experiments import (
    DEFAULT_LADDER,
    STABILITY_LENGTH,
    cmd_converge,
    cmd_distance,
    cmd_render,
    cmd_simulate,
    cmd_stability,
    load_config,
)


def _floats(s: str):
    return [float(x) for x in s.split(",") if x]


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="alelab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one model from a JSON config")
    s.add_argument("config")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="output root (overrides config output_dir)")
    s.add_argument("--no-render", action="store_true")

    c = sub.add_parser("converge", help="ALE / multinomial against an LPM reference over a capacity ladder")
    c.add_argument("config", help="base config (model field is ignored)")
    c.add_argument("--ladder", type=_floats, default=list(DEFAULT_LADDER))
    c.add_argument("--seeds", type=int, default=20, help="number of seeds, starting at --seed")
    c.add_argument("--seed", type=int, help="first seed (default: config seed)")
    c.add_argument("--models", default="ale,multinomial")
    c.add_argument("--lpm-dt", type=float, default=1e-4)
    c.add_argument("--out")

    st = sub.add_parser("stability", help="three-arm LPM weight-spread probe")
    st.add_argument("--etas", type=_floats, default=[2.0, 4.0])
    st.add_argument("--eps", type=float, default=0.02)
    st.add_argument("--horizon", type=float, default=1.0)
    st.add_argument("--length", type=float, default=STABILITY_LENGTH)
    st.add_argument("--dt", type=float, default=1e-3)
    st.add_argument("--k", type=int, default=3)
    st.add_argument("--seed", type=int, help="accepted for uniformity; the LPM is deterministic")
    st.add_argument("--out", default="runs")

    d = sub.add_parser("distance", help="d_BW between two measure CSV files")
    d.add_argument("a")
    d.add_argument("b")
    d.add_argument("--no-coarsen", action="store_true")

    r = sub.add_parser("render", help="re-render a cluster SVG from a run directory or chain.json")
    r.add_argument("source")
    r.add_argument("--out", required=True)
    r.add_argument("--points", type=int, default=16)
    r.add_argument("--csv")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "simulate":
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg = cfg.with_(seed=args.seed)
            res = cmd_simulate(cfg, root=args.out, render=not args.no_render)
            print(json.dumps({"run_dir": str(res.files["config"].parent), **res.metrics}, sort_keys=True))
        elif args.command == "converge":
            cfg = load_config(args.config)
            first = args.seed if args.seed is not None else cfg.seed
            rep = cmd_converge(cfg, args.ladder, range(first, first + args.seeds), tuple(args.models.split(",")),
                               lpm_dt=args.lpm_dt, root=args.out or cfg.output_dir)
            for s in rep.summary:
                print(f"{s['model']:12s} c={s['c']:<8g} median d_bw={s['median_d_bw']:.5f} "
                      f"tip+weight={s['median_tip_plus_weight']:.5f} ok={s['n_ok']} failed={s['n_failed']}")
            print(f"coarsening bound {rep.coarsening_bound:.5f}; table {rep.files['table']}")
        elif args.command == "stability":
            rep = cmd_stability(args.etas, args.eps, args.horizon, args.k, args.length, args.dt, root=args.out)
            for eta in rep.etas:
                sp = rep.spreads[eta]
                print(f"eta={eta:g} spread {sp[0]:.6f} -> {sp[-1]:.6f} {rep.classification[eta]}")
            print(f"report {rep.files['report']}")
        elif args.command == "distance":
            print(json.dumps(cmd_distance(args.a, args.b, coarse=not args.no_coarsen), sort_keys=True))
        elif args.command == "render":
            lines = cmd_render(args.source, args.out, args.points, args.csv)
            print(f"wrote {args.out} ({len(lines)} polylines)")
    except (AleLabError, OSError, ValueError) as e:
        print(f"alelab {args.command}: error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
