"""Command-line interface.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime error,
4 acceptance check failed (``run --check``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import traceback

import numpy as np

from . import presets
from .config import BUNDLED, resolve_config
from .ensemble import LIC, UIC, poc_experiment, simulate_ensemble, write_snapshots
from .errors import ConfigError
from .experiment import StageError, plan, run_experiment
from .invariant import (beta_fixed_point_iterate, beta_s, dirichlet_fixed_point,
                        solve_perturbation)
from .persistence import face_equilibria, find_p, occupation_ext
from .sde import SCHEMES, IntegratorConfig, Trajectory
from .simplex import MeanSkew, ModelParams, check_c2
from .stats import anderson_darling, tn_test

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHECK = 0, 2, 3, 4


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ helpers

def _parse_matrix(text: str) -> list:
    try:
        rows = [[float(v) for v in r.replace(",", " ").split()] for r in text.split(";")]
    except ValueError:
        raise UsageError(f"cannot parse matrix {text!r}; use '0.5,1;1,0.5'") from None
    return rows


def _model(args) -> ModelParams:
    if args.A is None and args.preset is None:
        raise UsageError("give --preset or --A/--sigma")
    base = presets.get(args.preset) if args.preset else None
    A = _parse_matrix(args.A) if args.A else base.payoff
    sigma = args.sigma if args.sigma is not None else (base.sigma if base else None)
    delta = args.delta if args.delta is not None else (base.delta if base else 0.0)
    if sigma is None:
        raise UsageError("--sigma is required with --A")
    try:
        return ModelParams(A, sigma, delta, MeanSkew())
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None


def _emit(text: str, out) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _read_column(path: str, column: int) -> np.ndarray:
    vals = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            try:
                vals.append(float(row[column]))
            except (ValueError, IndexError):
                if i == 0:
                    continue  # header
                raise UsageError(f"{path}: bad value on row {i + 1}") from None
    if not vals:
        raise UsageError(f"{path}: no data")
    return np.array(vals)


# -------------------------------------------------------------- subcommands

def cmd_run(args) -> int:
    cfg = resolve_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.dry_run:
        print(plan(cfg).describe())
        print("dry run: configuration valid, nothing written")
        return EXIT_OK
    out = args.out or os.path.join("runs", cfg.name)
    summary = run_experiment(cfg, out, workers=args.workers)
    if args.format == "json":
        print(_json(summary))
    else:
        print(f"{cfg.name}: s={summary['theoretical_s']:.4f} "
              f"final mean={summary['final_mean'][0]:.4f} "
              f"rel.err={summary['final_relative_error']:.4f} -> {out}")
        for name, ok in summary["checks"].items():
            print(f"  {name}: {'pass' if ok else 'FAIL'}")
    if args.check and not summary["all_passed"]:
        return EXIT_CHECK
    return EXIT_OK


def cmd_simulate(args) -> int:
    params = _model(args)
    seed = 0 if args.seed is None else args.seed
    config = IntegratorConfig(h=args.h, scheme=args.scheme, seed=seed)
    law = UIC() if args.init == "uic" else LIC()
    snaps = simulate_ensemble(args.N, law, params, args.T, config,
                              snapshot_stride=args.stride, workers=args.workers)
    if args.out:
        write_snapshots(snaps, args.out)
        print(f"wrote {len(snaps)} snapshots to {args.out}")
        return EXIT_OK
    if args.format == "json":
        print(_json({"times": [s.time for s in snaps],
                     "means": [s.mean.tolist() for s in snaps]}))
    else:
        d = params.d
        print(_csv(["t"] + [f"mean_{i + 1}" for i in range(d)],
                   [[f"{s.time:.17g}"] + [f"{v:.17g}" for v in s.mean] for s in snaps]),
              end="")
    return EXIT_OK


def cmd_fixed_point(args) -> int:
    params = _model(args)
    if params.d == 2:
        s = beta_s(params)
        result = {"s": s, "alpha_star": [s, 1 - s]}
        if args.m0 is not None:
            m, k = beta_fixed_point_iterate(params, args.m0, args.tol)
            result.update({"iterate": m, "iterations": k})
    else:
        rep = dirichlet_fixed_point(params, tol=args.tol)
        result = rep.to_dict()
        result["s"] = result["alpha_star"][0]
    if args.format == "json":
        _emit(_json(result), args.out)
    elif args.format == "csv":
        keys = sorted(k for k in result if not isinstance(result[k], list))
        _emit(_csv(keys, [[result[k] for k in keys]]), args.out)
    else:
        _emit(f"{result['s']:.10f}", args.out)
    return EXIT_OK


def cmd_perturb(args) -> int:
    params = _model(args)
    base = check_c2(params.payoff, params.sigma)
    eps, alpha_hat = solve_perturbation(params.payoff, params.sigma, base.alpha,
                                        params.skew, args.delta_eff)
    result = {"alpha": base.alpha.tolist(), "eps": eps.tolist(),
              "alpha_hat": alpha_hat.alpha.tolist(), "delta_eff": args.delta_eff}
    if args.format == "json":
        _emit(_json(result), args.out)
    elif args.format == "csv":
        d = params.d
        _emit(_csv([f"alpha_hat_{i + 1}" for i in range(d)],
                   [[f"{v:.17g}" for v in alpha_hat.alpha]]), args.out)
    else:
        _emit(" ".join(f"{v:.10g}" for v in alpha_hat.alpha), args.out)
    return EXIT_OK


def cmd_test_fit(args) -> int:
    a, b = args.null_beta
    sample = _read_column(args.input, args.column)
    seed = 0 if args.seed is None else args.seed
    if args.method == "tn":
        rep = tn_test(sample, a, b, B=args.B, seed=seed, workers=args.workers)
    else:
        rep = anderson_darling(sample, a, b, B=args.B, seed=seed)
    d = rep.to_dict()
    if args.format == "csv":
        rows = [[lv, q, d["reject"][lv]] for lv, q in d["quantiles"].items()]
        _emit(_csv(["level", "quantile", "reject"], rows) +
              f"# statistic={d['statistic']:.17g}\n", args.out)
    else:
        _emit(_json(d), args.out)
    return EXIT_OK


def cmd_poc(args) -> int:
    params = _model(args)
    seed = 0 if args.seed is None else args.seed
    config = IntegratorConfig(h=args.h, seed=seed)
    rep = poc_experiment(args.N_list, args.M, params, args.T, config, N_ref=args.N_ref)
    if args.format == "csv":
        _emit(_csv(["N", "M", "mean_sup_sq_error", "std_error"],
                   [[r.N, r.M, f"{r.mean_sup_sq_error:.17g}", f"{r.std_error:.17g}"]
                    for r in rep.rows]) + f"# slope={rep.slope:.6f}\n", args.out)
    else:
        _emit(_json(rep.to_dict()), args.out)
    return EXIT_OK


def cmd_persistence(args) -> int:
    params = _model(args)
    eqs = face_equilibria(params.payoff, params.sigma)
    cert = find_p(eqs)
    if args.input and args.format == "csv":
        occ = occupation_ext(Trajectory.from_csv(args.input).states, args.eps)
        _emit(_csv(["eps", "fraction"], [[f"{e:.17g}", f"{f:.17g}"]
                                         for e, f in sorted(occ.items())]), args.out)
        return EXIT_OK
    result = {"certificate": cert.to_dict() if cert else None,
              "equilibria": [e.to_dict() for e in eqs]}
    if args.input:
        occ = occupation_ext(Trajectory.from_csv(args.input).states, args.eps)
        result["occupation"] = {f"{e:g}": f for e, f in occ.items()}
    _emit(_json(result), args.out)
    return EXIT_OK


# ------------------------------------------------------------------- parser

def _model_args(p):
    p.add_argument("--preset", choices=sorted(presets.PRESETS))
    p.add_argument("--A", help="payoff matrix, rows separated by ';'")
    p.add_argument("--sigma", type=float)
    p.add_argument("--delta", type=float)


def _common(p, formats=("csv", "json")):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=formats, default=None)
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfreplicator",
        description="Interacting stochastic replicator simulations and diagnostics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a configured experiment end to end")
    p.add_argument("config", help=f"config path or bundled name {list(BUNDLED)}")
    _common(p)
    p.add_argument("--dry-run", action="store_true")
    p.add_argument("--check", action="store_true",
                   help="exit with status 4 if an acceptance check fails")
    p.set_defaults(func=cmd_run, workers=None)

    p = sub.add_parser("simulate", help="simulate an N-particle system")
    _model_args(p)
    _common(p)
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--T", type=float, default=10.0)
    p.add_argument("--h", type=float, default=0.01)
    p.add_argument("--scheme", choices=SCHEMES, default="direct")
    p.add_argument("--init", choices=("uic", "lic"), default="uic")
    p.add_argument("--stride", type=int, default=100)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fixed-point", help="invariant Beta/Dirichlet parameter")
    _model_args(p)
    _common(p)
    p.add_argument("--m0", type=float, default=None,
                   help="also iterate the fixed-point map from this mean")
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_fixed_point)

    p = sub.add_parser("perturb", help="equilibrium shift under the skew interaction")
    _model_args(p)
    _common(p)
    p.add_argument("--delta-eff", type=float, required=True)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("test-fit", help="goodness of fit against a Beta law")
    _common(p)
    p.add_argument("--null-beta", type=float, nargs=2, required=True, metavar=("A", "B"))
    p.add_argument("--input", required=True, help="CSV file; values in --column")
    p.add_argument("--column", type=int, default=0)
    p.add_argument("--B", type=int, default=5000)
    p.add_argument("--method", choices=("tn", "ad"), default="tn")
    p.set_defaults(func=cmd_test_fit)

    p = sub.add_parser("poc", help="propagation-of-chaos scaling experiment")
    _model_args(p)
    _common(p)
    p.add_argument("--N-list", type=int, nargs="+", default=[100, 400, 1600])
    p.add_argument("--M", type=int, default=50)
    p.add_argument("--T", type=float, default=10.0)
    p.add_argument("--h", type=float, default=0.01)
    p.add_argument("--N-ref", type=int, default=20000)
    p.set_defaults(func=cmd_poc)

    p = sub.add_parser("persistence", help="boundary equilibria and persistence certificate")
    _model_args(p)
    _common(p)
    p.add_argument("--input", help="trajectory CSV (t,x1,..,xd) for occupation statistics")
    p.add_argument("--eps", type=float, nargs="+", default=[0.001, 0.01, 0.1])
    p.set_defaults(func=cmd_persistence)
    return parser


def _provenance(exc: BaseException) -> str:
    if isinstance(exc, StageError):
        return exc.stage
    module = "cli"
    for frame in traceback.extract_tb(exc.__traceback__):
        if os.sep + "mfreplicator" + os.sep in frame.filename:
            module = os.path.splitext(os.path.basename(frame.filename))[0]
    return module


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported with provenance
        print(f"runtime error [{_provenance(exc)}]: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
