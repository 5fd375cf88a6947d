"""Command-line interface.

Exit codes: 0 = ran and did not reject (or study complete), 1 = rejected
independence, 2 = usage, input or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .aggregation import (
    aggregated_test,
    dyadic_anisotropic_collection,
    dyadic_isotropic_collection,
    scaled_grid_collection,
)
from .datagen import gen_h0_split, generate, mechanism_from_dict
from .errors import HsicError
from .estimator import THREADS_ENV
from .io import read_sample_csv, write_sample_csv
from .kernels import Bandwidths, empirical_bandwidths
from .permutation import single_permuted_test
from .power import estimate_power, load_config, run_metadata, sample_collection, write_power_csv

EXIT_ACCEPT, EXIT_REJECT, EXIT_ERROR = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_ERROR)


def _read(path):
    if path == "-":
        return read_sample_csv(sys.stdin)
    return read_sample_csv(path)


def _emit(record: dict, out) -> None:
    record = dict(record, software="hsicagg", version=__version__)
    text = json.dumps(record, indent=2, sort_keys=True)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_test(args) -> int:
    s = _read(args.csv)
    if args.bw_x is not None or args.bw_y is not None:
        if args.bw_x is None or args.bw_y is None:
            raise HsicError("--bw-x and --bw-y must be given together")
        bw = Bandwidths(args.bw_x, args.bw_y)
    else:
        bw = empirical_bandwidths(s).scaled(args.scale)
    out = single_permuted_test(s, bw, args.alpha, args.b, args.seed)
    rec = out.to_record()
    rec["n"] = s.n
    _emit(rec, args.out)
    return EXIT_REJECT if out.reject else EXIT_ACCEPT


def _collection_for(args, s):
    test = {"collection": args.collection, "r": args.r, "weights": args.weights}
    return sample_collection(test, s)


def cmd_agg_test(args) -> int:
    s = _read(args.csv)
    coll = _collection_for(args, s)
    out = aggregated_test(s, coll, args.alpha, args.b1, args.b2, args.seed)
    rec = out.to_record()
    rec["n"] = s.n
    rec["collection"] = args.collection
    _emit(rec, args.out)
    return EXIT_REJECT if out.reject else EXIT_ACCEPT


def cmd_power(args) -> int:
    cfg = load_config(args.config)
    records = estimate_power(cfg)
    out = args.out or cfg.output
    keys = list(cfg.grid)
    if out:
        write_power_csv(records, out, keys)
        with open(out + ".meta.json", "w") as fh:
            json.dump(run_metadata(cfg, records), fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        write_power_csv(records, sys.stdout, keys)
    return EXIT_ACCEPT


def _mechanism_args(args) -> dict:
    d = {"name": args.mech}
    for key in ("l", "rho"):
        value = getattr(args, key)
        if value is not None:
            d[key] = value
    if args.mech == "perturbed":
        for key in ("p", "q", "delta", "h", "c0", "theta_seed"):
            value = getattr(args, key)
            if value is not None:
                d[key] = value
    if args.bivariate:
        d = {"name": "bivariate", "inner": d}
    return d


def cmd_gen(args) -> int:
    spec = mechanism_from_dict(_mechanism_args(args))
    s = (gen_h0_split if args.h0 else generate)(spec, args.n, args.seed)
    write_sample_csv(s, args.out if args.out else sys.stdout)
    return EXIT_ACCEPT


def cmd_collections(args) -> int:
    if args.kind == "dyadic":
        coll = dyadic_isotropic_collection(args.n, args.p, args.q)
    elif args.kind == "anisotropic":
        coll = dyadic_anisotropic_collection(args.n, args.p, args.q)
    else:
        base_x = args.base_x if args.base_x is not None else [1.0] * args.p
        base_y = args.base_y if args.base_y is not None else [1.0] * args.q
        coll = scaled_grid_collection(Bandwidths(base_x, base_y), args.r, args.weights, args.kind)
    print("index\tlabel\tlambda\tmu\tomega\texp(-omega)")
    for row in coll.rows():
        lam = ",".join(format(v, ".6g") for v in row["lambda"])
        mu = ",".join(format(v, ".6g") for v in row["mu"])
        print(
            f"{row['index']}\t{row['label']}\t{lam}\t{mu}\t{row['omega']:.6f}\t"
            f"{np.exp(-row['omega']):.6f}"
        )
    print(f"# items={len(coll)} sum_exp_neg_omega={coll.weight_mass:.12f}", file=sys.stderr)
    return EXIT_ACCEPT


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hsicagg", description="Aggregated HSIC independence tests.")
    ap.add_argument("--version", action="version", version=f"hsicagg {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("csv", nargs="?", default="-", help="sample CSV (default: stdin)")
        p.add_argument("--alpha", type=float, default=0.05)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="write the JSON record here instead of stdout")

    p = sub.add_parser("test", help="single permuted HSIC test")
    common(p)
    p.add_argument("--b", type=int, default=500, help="number of permutations")
    p.add_argument("--bw-x", type=float, nargs="+", help="X bandwidths (default: empirical)")
    p.add_argument("--bw-y", type=float, nargs="+", help="Y bandwidths (default: empirical)")
    p.add_argument("--scale", type=float, default=1.0, help="factor applied to empirical widths")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("agg-test", help="permuted aggregated HSIC test")
    common(p)
    p.add_argument("--b1", type=int, default=3000)
    p.add_argument("--b2", type=int, default=500)
    p.add_argument(
        "--collection", choices=["diagonal", "grid", "unit-grid", "dyadic", "anisotropic"],
        default="diagonal",
    )
    p.add_argument("--r", type=int, default=7)
    p.add_argument("--weights", choices=["exponential", "uniform"], default="exponential")
    p.set_defaults(func=cmd_agg_test)

    p = sub.add_parser("power", help="replication study from a JSON config")
    p.add_argument("config")
    p.add_argument("--out", help="CSV path (overrides the config's output)")
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("gen", help="emit a sample CSV from a mechanism")
    p.add_argument(
        "--mech", required=True,
        choices=["ishigami", "sin", "circle", "heteroscedastic", "gaussian", "perturbed"],
    )
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--l", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--p", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--c0", type=float)
    p.add_argument("--theta-seed", type=int)
    p.add_argument("--bivariate", action="store_true", help="append independent uniform coordinates")
    p.add_argument("--h0", action="store_true", help="draw from the product of the marginals")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("collections", help="print a weighted bandwidth collection")
    kind = p.add_mutually_exclusive_group(required=True)
    for name in ("dyadic", "anisotropic", "grid", "diagonal"):
        kind.add_argument(f"--{name}", dest="kind", action="store_const", const=name)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--r", type=int, default=5)
    p.add_argument("--weights", choices=["exponential", "uniform"], default="exponential")
    p.add_argument("--base-x", type=float, nargs="+")
    p.add_argument("--base-y", type=float, nargs="+")
    p.set_defaults(func=cmd_collections)
    return ap


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_ERROR
    if os.environ.get(THREADS_ENV):
        try:
            int(os.environ[THREADS_ENV])
        except ValueError:
            print(f"hsicagg: error: {THREADS_ENV} must be an integer", file=sys.stderr)
            return EXIT_ERROR
    try:
        return args.func(args)
    except (HsicError, OSError) as exc:
        print(f"hsicagg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main(argv=None) -> int:
    return run_cli(argv)
