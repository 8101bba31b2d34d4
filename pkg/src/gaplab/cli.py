"""Command-line entry point: ``gaplab <subcommand> [flags]``.

Exit status is 0 on success, 1 on a domain error (message on stderr) and 2 on
a usage error.  Every run that writes to a file also writes
``<file>.manifest.json`` holding the subcommand, the resolved flags, the seed
and the package version; ``replay`` re-runs a manifest.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import GaplabError, InvalidParameter
from .reports import atomic_write, dumps_json, emit_report, sweep_csv

SEED_ENV = "GAPLAB_SEED"
DEFAULT_SEED = 0


# ---------------------------------------------------------------------------
# flag types


def sci_int(text):
    """Integer that may be written in scientific notation (``1e6``)."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not value.is_integer():
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(value)


def int_list(text):
    try:
        return [sci_int(t) for t in text.split(",") if t.strip()]
    except argparse.ArgumentTypeError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}")


def resolve_seed(flag_value):
    """Precedence: explicit --seed, then $GAPLAB_SEED, then the default."""
    if flag_value is not None:
        return flag_value
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            return sci_int(env)
        except argparse.ArgumentTypeError:
            raise InvalidParameter(f"{SEED_ENV}={env!r} is not an integer") from None
    return DEFAULT_SEED


# ---------------------------------------------------------------------------
# helpers


def _load_instance(path):
    from .instance import load_instance

    try:
        return load_instance(path)
    except OSError as exc:
        raise InvalidParameter(f"cannot read instance {path}: {exc}") from None


def _bits(text, inst, name):
    from .instance import as_assignment, parse_bits

    try:
        return as_assignment(parse_bits(text), inst.n_bits)
    except (ValueError, IndexError) as exc:
        raise InvalidParameter(f"--{name}: {exc}") from None


def _write(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        atomic_write(out, text)


def _pair_or_select(inst, args, min_distance):
    from .harness import isolated_solutions
    from .solver import SolutionPair, enumerate_solutions, select_pair

    sols = enumerate_solutions(inst, args.budget)
    if args.sigma1 and args.sigma2:
        return SolutionPair(_bits(args.sigma1, inst, "sigma1"),
                            _bits(args.sigma2, inst, "sigma2")), sols
    if args.sigma1 or args.sigma2:
        raise InvalidParameter("give both --sigma1 and --sigma2, or neither")
    if not sols.complete:
        raise InvalidParameter("solution enumeration hit the node budget")
    pool = isolated_solutions(sols, min_distance - 1)
    pair = select_pair(pool, min_distance)
    if pair is None:
        raise InvalidParameter(f"no isolated solution pair at distance >= {min_distance}")
    return pair, sols


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args):
    from .instance import generate_instance

    m = args.m if args.m is not None else int(round(args.alpha * args.n))
    inst = generate_instance(args.n, m, args.seed)
    _write(inst.dumps() + "\n", args.out)


def cmd_solve(args):
    from .solver import enumerate_solutions

    inst = _load_instance(args.instance)
    sols = enumerate_solutions(inst, args.budget)
    data = sols.to_dict()
    data["count"] = len(sols)
    data["count_with_free"] = len(sols) << sols.n_free
    _write(dumps_json(data), args.out)


def cmd_coeffs(args):
    from .perturbation import series_coefficients, splitting
    from .solver import SolutionPair, enumerate_solutions

    inst = _load_instance(args.instance)
    sigma = _bits(args.sigma, inst, "sigma")
    sols = enumerate_solutions(inst, args.budget)
    sols = sols if sols.complete else None
    if args.sigma2:
        pair = SolutionPair(sigma, _bits(args.sigma2, inst, "sigma2"))
        obj = splitting(inst, pair, args.order, sols, exact=not args.float)
    else:
        obj = series_coefficients(inst, sigma, args.order, sols, exact=not args.float)
    _write(dumps_json(obj.to_dict()), args.out)


def cmd_tunnel(args):
    from .tunneling import MAX_DP_DISTANCE, tunneling_dp, tunneling_mc
    from .solver import SolutionPair

    inst = _load_instance(args.instance)
    pair = SolutionPair(_bits(args.sigma1, inst, "sigma1"), _bits(args.sigma2, inst, "sigma2"))
    method = args.method
    if method == "auto":
        method = "dp" if pair.distance <= MAX_DP_DISTANCE else "mc"
    if method == "dp":
        amp = tunneling_dp(inst, pair)
    else:
        amp = tunneling_mc(inst, pair, args.samples, args.seed)
    data = amp.to_dict()
    if args.lam is not None:
        data["lambda"] = args.lam
        data["v12"] = amp.matrix_element(args.lam)
    _write(dumps_json(data), args.out)


def cmd_diag(args):
    from .reports import gap_curve_csv
    from .spectrum import gap_curve

    inst = _load_instance(args.instance)
    if args.reduce:
        from .instance import reduce_instance

        inst, _ = reduce_instance(inst)
    grid = np.linspace(args.lam_min, args.lam_max, args.points)
    _write(gap_curve_csv(gap_curve(inst, grid, method=args.method)), args.out)


def cmd_xing(args):
    from .harness import build_anticrossing
    from .instance import generate_instance

    if args.instance:
        inst = _load_instance(args.instance)
    elif args.n is not None:
        m = int(round(args.alpha * args.n)) - 1
        inst = generate_instance(args.n, m, args.seed)
    else:
        raise InvalidParameter("give an instance file or --n to draw a fresh instance")
    pair, sols = _pair_or_select(inst, args, max(args.min_distance, 2 * args.order + 1))
    exact = {"auto": None, "yes": True, "no": False}[args.exact]
    report = build_anticrossing(
        inst, pair, args.order, f2=args.f2, lambda_ref=args.lambda_ref, lo=args.lo,
        hi=args.hi, tol=args.tol, solutions=sols if sols.complete else None,
        kappa=args.kappa, exact_check=exact, mc_samples=args.samples, seed=args.seed,
    )
    if report is None:
        raise InvalidParameter("no distinguishing clause penalises the favoured solution")
    emit_report(report, args.out, "json")


def _sweep_config(args):
    from .harness import SweepConfig

    if args.config:
        try:
            cfg = SweepConfig.load(args.config)
        except OSError as exc:
            raise InvalidParameter(f"cannot read config {args.config}: {exc}") from None
        except (TypeError, json.JSONDecodeError) as exc:
            raise InvalidParameter(f"bad config {args.config}: {exc}") from None
        if args.seed_given:
            cfg = SweepConfig.from_dict({**cfg.to_dict(), "master_seed": args.seed})
        return cfg
    return SweepConfig(
        n_values=tuple(args.n_values), alpha=args.alpha, samples_per_n=args.samples,
        master_seed=args.seed, max_order=args.order, min_pair_distance=args.min_distance,
        node_budget=args.budget,
    )


def cmd_stats(args):
    from .harness import fit_sweep, splitting_sweep

    cfg = _sweep_config(args)
    args.seed = cfg.master_seed
    progress = None
    if args.verbose:
        def progress(n, got, tried):
            print(f"N={n}: {got} usable of {tried}", file=sys.stderr)
    result = splitting_sweep(cfg, jobs=args.jobs, progress=progress)
    fits = {}
    for m in range(1, cfg.max_order + 1):
        try:
            fit = fit_sweep(result, m)
        except GaplabError:
            fits[f"m{m}"] = None
            continue
        d = fit.to_dict()
        d["sqrt_slope"] = float(np.sqrt(fit.slope)) if fit.slope > 0 else None
        fits[f"m{m}"] = d
    fit_doc = {"config": cfg.to_dict(), "fits": fits,
               "points": result.to_dict()["points"] if args.raw else None}
    if args.out in (None, "-"):
        sys.stdout.write(sweep_csv(result))
        sys.stdout.write(dumps_json(fit_doc))
        return
    atomic_write(args.out, sweep_csv(result))
    atomic_write(fit_path(args), dumps_json(fit_doc))


def fit_path(args):
    if args.fit_out:
        return args.fit_out
    root, _ = os.path.splitext(args.out)
    return root + ".fit.json"


def cmd_estimate(args):
    from .estimates import (
        adiabatic_time_estimate,
        lambda_cr_estimate,
        lambda_star,
        lambda_from_s,
        min_gap_estimate,
    )

    est = min_gap_estimate(args.n, args.alpha, args.n0, args.a_const, args.f2)
    data = {
        "N": args.n,
        "alpha": args.alpha,
        "f2": args.f2,
        "lambda_star": lambda_star(args.f2, args.n),
        "lambda_cr": lambda_cr_estimate(args.n),
        "v_alpha": est.v_alpha,
        "delta_min": est.delta_min,
        "log_delta_min": est.log_delta_min,
        "epsilon": args.epsilon,
    }
    if est.delta_min > 0:
        data["T"] = adiabatic_time_estimate(est.delta_min, args.epsilon)
    data["log_T"] = -np.log(args.epsilon) - 2 * est.log_delta_min
    if args.s is not None:
        data["s"] = args.s
        data["lambda_from_s"] = lambda_from_s(args.s)
    _write(dumps_json(data), args.out)


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def __init__(self, *a, **kw):
        kw.setdefault("formatter_class", argparse.ArgumentDefaultsHelpFormatter)
        kw.setdefault("allow_abbrev", False)
        super().__init__(*a, **kw)


def _seed_flag(p):
    p.add_argument("--seed", type=sci_int, default=None,
                   help=f"RNG seed (falls back to ${SEED_ENV}, then {DEFAULT_SEED})")


def _out_flag(p):
    p.add_argument("--out", default="-", help="output path ('-' for stdout)")


def build_parser():
    parser = _Parser(prog="gaplab", description="Adiabatic optimisation gap analysis for EC3")
    parser.add_argument("--version", action="version", version=f"gaplab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="draw a random instance")
    p.add_argument("--n", type=sci_int, required=True, help="number of bits")
    p.add_argument("--m", type=sci_int, default=None, help="number of clauses")
    p.add_argument("--alpha", type=float, default=0.62, help="clause density if --m is absent")
    _seed_flag(p)
    _out_flag(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="enumerate all solutions")
    p.add_argument("instance")
    p.add_argument("--budget", type=sci_int, default=10**7, help="search node budget")
    _out_flag(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("coeffs", help="perturbative energy coefficients or a splitting")
    p.add_argument("instance")
    p.add_argument("--sigma", required=True, help="center assignment as a 0/1 string")
    p.add_argument("--sigma2", default=None, help="second assignment (splitting mode)")
    p.add_argument("--order", type=sci_int, default=3, help="highest m in lambda^(2m)")
    p.add_argument("--float", action="store_true", help="floating-point instead of rational")
    p.add_argument("--budget", type=sci_int, default=10**7, help="solver node budget")
    _out_flag(p)
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("tunnel", help="leading-order tunneling amplitude")
    p.add_argument("instance")
    p.add_argument("--sigma1", required=True)
    p.add_argument("--sigma2", required=True)
    p.add_argument("--method", choices=("auto", "dp", "mc"), default="auto")
    p.add_argument("--samples", type=sci_int, default=10**6, help="Monte Carlo paths")
    p.add_argument("--lam", type=float, default=None, help="also report V12 at this lambda")
    _seed_flag(p)
    _out_flag(p)
    p.set_defaults(func=cmd_tunnel)

    p = sub.add_parser("diag", help="exact gap curve over a lambda grid (CSV)")
    p.add_argument("instance")
    p.add_argument("--lam-min", type=float, default=0.0)
    p.add_argument("--lam-max", type=float, default=1.0)
    p.add_argument("--points", type=sci_int, default=51)
    p.add_argument("--method", choices=("auto", "dense", "iterative"), default="auto")
    p.add_argument("--reduce", action="store_true",
                   help="drop free bits first (their levels are split by exactly 2 lambda)")
    _out_flag(p)
    p.set_defaults(func=cmd_diag)

    p = sub.add_parser("xing", help="engineer an anti-crossing by adding one clause")
    p.add_argument("instance", nargs="?", default=None,
                   help="instance with M-1 clauses (omit and give --n to draw one)")
    p.add_argument("--n", type=sci_int, default=None, help="bits for a freshly drawn instance")
    p.add_argument("--alpha", type=float, default=0.62)
    p.add_argument("--sigma1", default=None)
    p.add_argument("--sigma2", default=None)
    p.add_argument("--order", type=sci_int, default=2, help="series order m (lambda^(2m))")
    p.add_argument("--min-distance", type=sci_int, default=5)
    p.add_argument("--f2", type=float, default=0.18)
    p.add_argument("--lambda-ref", type=float, default=None,
                   help="reference coupling; default min(lambda*, 0.5/ln N)")
    p.add_argument("--lo", type=float, default=0.0)
    p.add_argument("--hi", type=float, default=1.5)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--kappa", type=float, default=2.0, help="gap = kappa * |V12(lambda_c)|")
    p.add_argument("--exact", choices=("auto", "yes", "no"), default="auto",
                   help="exact-spectrum cross-check (auto: reduced N <= 12)")
    p.add_argument("--samples", type=sci_int, default=10**5, help="Monte Carlo paths if n > 24")
    p.add_argument("--budget", type=sci_int, default=10**7)
    _seed_flag(p)
    _out_flag(p)
    p.set_defaults(func=cmd_xing)

    p = sub.add_parser("stats", help="splitting statistics sweep (CSV + fit JSON)")
    p.add_argument("--config", default=None, help="JSON file with sweep config fields")
    p.add_argument("--n-values", type=int_list, default=[20, 28, 36, 44, 52, 60])
    p.add_argument("--alpha", type=float, default=0.62)
    p.add_argument("--samples", type=sci_int, default=500, help="usable samples per N")
    p.add_argument("--order", type=sci_int, default=3)
    p.add_argument("--min-distance", type=sci_int, default=7)
    p.add_argument("--budget", type=sci_int, default=10**6)
    p.add_argument("--jobs", type=sci_int, default=1)
    p.add_argument("--fit-out", default=None, help="fit JSON path (default <out>.fit.json)")
    p.add_argument("--raw", action="store_true", help="include per-sample data in the fit JSON")
    p.add_argument("--verbose", action="store_true")
    _seed_flag(p)
    _out_flag(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("estimate", help="closed-form scales: lambda*, gap, lambda_cr, T")
    p.add_argument("--n", type=sci_int, required=True)
    p.add_argument("--alpha", type=float, default=0.62)
    p.add_argument("--f2", type=float, default=0.18)
    p.add_argument("--n0", type=float, default=1.0)
    p.add_argument("--a-const", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--s", type=float, default=None, help="also convert this s to lambda")
    _out_flag(p)
    p.set_defaults(func=cmd_estimate)
    return parser


# ---------------------------------------------------------------------------
# manifests


def manifest_path(out):
    return f"{out}.manifest.json"


def _manifest(argv, args):
    flags = {k: v for k, v in vars(args).items() if k not in ("func", "seed_given")}
    return {
        "subcommand": args.command,
        "argv": list(argv),
        "flags": flags,
        "seed": getattr(args, "seed", None),
        "version": __version__,
    }


def replay(path):
    """Re-run the invocation recorded in a manifest; returns the exit status."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    argv = list(data["argv"])
    if data.get("seed") is not None and "--seed" not in argv and data["subcommand"] in (
        "gen", "tunnel", "xing", "stats"
    ):
        argv += ["--seed", str(data["seed"])]
    return main(argv)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if hasattr(args, "seed"):
            args.seed_given = args.seed is not None or bool(os.environ.get(SEED_ENV))
            args.seed = resolve_seed(args.seed)
        if getattr(args, "jobs", 1) < 1:
            raise InvalidParameter("--jobs must be >= 1")
        args.func(args)
        out = getattr(args, "out", "-")
        if out not in (None, "-"):
            atomic_write(manifest_path(out), dumps_json(_manifest(argv, args)))
    except GaplabError as exc:
        print(f"gaplab {args.command}: {exc.kind}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
