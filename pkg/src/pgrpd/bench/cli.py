"""``bench`` command line: run sweeps, plot traces, inspect and write instances.

Exit codes are 0 on success, 1 for configuration errors and 2 for runtime
errors (including any failed run in a sweep).
"""

from __future__ import annotations

import argparse
import logging
import sys

from ..instances import (
    HardInstanceParams,
    RandomQpParams,
    build_hard_instance,
    gen_random_qp,
    spectral_check,
)
from ..io import read_instance, write_instance
from ..model import ConfigurationError
from .config import load_config
from .plotting import plot_dir
from .runner import run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _add_gen_args(p):
    p.add_argument("--gen", choices=("hard", "qp"), default=None)
    p.add_argument("--m1", type=int, default=2)
    p.add_argument("--m2", type=int, default=3)
    p.add_argument("--dbar", type=int, default=5)
    p.add_argument("--lf", type=float, default=1.0)
    p.add_argument("--rho-f", type=float, default=0.1)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--d", type=int, default=100)
    p.add_argument("--kappa", type=float, default=10.0)
    p.add_argument("--rho", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gaussian-v", action="store_true",
                   help="use a raw Gaussian V instead of orthonormalizing it")


def _generate(args):
    if args.gen == "hard":
        params = HardInstanceParams(m1=args.m1, m2=args.m2, dbar=args.dbar, L_f=args.lf,
                                    beta=args.beta, rho_f=args.rho_f, seed=args.seed)
        data, g = build_hard_instance(params)
        return data, g, params
    params = RandomQpParams(d=args.d, kappa=args.kappa, rho=args.rho, seed=args.seed,
                            exact_kappa=not args.gaussian_v, beta=args.beta)
    data, g = gen_random_qp(params)
    return data, g, None


def cmd_run(args):
    cfg = load_config(args.config)
    if args.out:
        cfg.out = args.out
    if args.parallelism:
        if args.parallelism < 1:
            raise ConfigurationError("--parallelism must be at least 1")
        cfg.parallelism = args.parallelism
    rows, failures = run_sweep(cfg)
    for r in rows:
        print(f"{r['instance']:<28} seed={r['seed']:<3} {r['solver']:<8} {r['status']:<10} "
              f"grads_to_eps={r['grads_to_eps']} kkt_p={r['final_kkt_p']:.3e}")
    if cfg.plot:
        for path in plot_dir(cfg.out):
            print(f"wrote {path}")
    if failures:
        print(f"{len(failures)} run(s) failed", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_plot(args):
    written = plot_dir(args.indir, args.out)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_check_instance(args):
    hard = None
    if args.path:
        data, _ = read_instance(args.path)
    elif args.gen:
        data, _, hard = _generate(args)
    else:
        raise ConfigurationError("give --path or --gen")
    report = spectral_check(data, hard=hard)
    for key, val in report.items():
        print(f"{key:<20} {val}")
    if hard is not None and not report["kappa_in_bracket"]:
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_gen(args):
    if not args.gen:
        raise ConfigurationError("--gen is required")
    data, g, _ = _generate(args)
    write_instance(args.out, data, g)
    print(f"wrote {args.out} (d={data.d}, n={data.n}, nbar={data.nbar})")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="bench", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a sweep described by a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="override the output directory")
    p.add_argument("--parallelism", type=int, default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("plot", help="plot all traces in a directory")
    p.add_argument("--in", dest="indir", required=True)
    p.add_argument("--out", default=None, help="directory for the SVG files")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("check-instance", help="print spectral diagnostics")
    p.add_argument("--path", default=None, help="instance file")
    _add_gen_args(p)
    p.set_defaults(func=cmd_check_instance)

    p = sub.add_parser("gen", help="write a generated instance to a file")
    _add_gen_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
