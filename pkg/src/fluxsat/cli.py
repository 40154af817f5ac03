"""Command line entry point: ``fluxsat run|suite|bounds|barrier``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .analytic import BarrierFamily, BarrierSpec, make_barrier
from .config import ConfigError, load_config
from .core import FluxSatError
from .experiments import analytic_bounds, output_dir, run_experiment


def _run_one(path: str, plot: bool) -> bool:
    cfg = load_config(path)
    res = run_experiment(cfg, plot=plot)
    for c in res.checks:
        status = "ok  " if c.holds else "FAIL"
        print(f"[{status}] {cfg.name}: {c.name} measured={c.measured!r} bound={c.bound!r}")
    for pair, dist in res.l1_table.items():
        print(f"       {cfg.name}: L1({pair}) = {dist:.6g}")
    print(f"{cfg.name}: artifacts in {res.out_dir}")
    return res.ok


def _cmd_run(args) -> int:
    return 0 if _run_one(args.config, not args.no_plot) else 1


def _cmd_suite(args) -> int:
    configs = sorted(Path(args.directory).glob("*.cfg"))
    if not configs:
        print(f"fluxsat: no .cfg files in {args.directory}", file=sys.stderr)
        return 2
    ok = True
    for path in configs:
        try:
            ok &= _run_one(str(path), not args.no_plot)
        except FluxSatError as exc:
            print(f"fluxsat: {path.name}: {exc}", file=sys.stderr)
            ok = False
    return 0 if ok else 1


def _cmd_bounds(args) -> int:
    cfg = load_config(args.config)
    print(json.dumps({"name": cfg.name, "bounds": analytic_bounds(cfg)}, indent=1, sort_keys=True))
    return 0


def _param(text: str) -> tuple[str, float]:
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key.strip(), float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{key}: {val!r} is not a number") from None


def _cmd_barrier(args) -> int:
    cfg = load_config(args.config)
    try:
        bs = BarrierSpec(args.family, dict(args.param))
        fn = make_barrier(bs, cfg.spec)
    except ValueError as exc:
        raise ConfigError(f"barrier: {exc}") from None
    x = cfg.grid.centers
    rows = []
    for t in args.times:
        u = np.asarray(fn(t, x), dtype=float)
        rows.extend((float(t), float(xi), float(ui)) for xi, ui in zip(x, u))
    path = Path(args.out) if args.out else output_dir(cfg) / f"barrier_{bs.family.value}.csv"
    io.write_series(path, ("t", "x", "u"), rows)
    print(f"{cfg.name}: {bs.family.value} ({bs.side.value}-solution) at {len(args.times)} times -> {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fluxsat", description="Flux-saturated diffusion experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("config")
    r.add_argument("--no-plot", action="store_true", help="skip rendering the PNG")
    r.set_defaults(func=_cmd_run)
    s = sub.add_parser("suite", help="run every *.cfg in a directory")
    s.add_argument("directory")
    s.add_argument("--no-plot", action="store_true")
    s.set_defaults(func=_cmd_suite)
    b = sub.add_parser("bounds", help="print the closed-form bounds for a config")
    b.add_argument("config")
    b.set_defaults(func=_cmd_bounds)
    e = sub.add_parser("barrier", help="dump a sub- or super-solution on the config's grid as t,x,u CSV")
    e.add_argument("config")
    e.add_argument("family", choices=[f.value for f in BarrierFamily])
    e.add_argument("--param", action="append", type=_param, default=[], metavar="KEY=VALUE")
    e.add_argument("--times", type=float, nargs="+", default=[0.0])
    e.add_argument("--out", help="CSV path (default: <output_dir>/<name>/barrier_<family>.csv)")
    e.set_defaults(func=_cmd_barrier)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FluxSatError, OSError) as exc:
        print(f"fluxsat: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
