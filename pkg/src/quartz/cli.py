"""Command line entry point: ``quartz {solve,eso,speedup,detect-groups,verify}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 no convergence within
the budget.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, verify
from .eso import eso_params, importance_probs, v_serial, v_tau_nice
from .io import DataFormatError, load_libsvm, normalize_columns, synth_instance
from .problem import ProblemInstance, make_loss
from .sampling import (
    DistributedSampling,
    ProductSampling,
    SerialSampling,
    TauNiceSampling,
    detect_product_partition,
    read_partition,
    write_partition,
)
from .solver import ABORTED, BUDGET_EXHAUSTED, CONVERGED, SolverConfig, solve

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NOCONV = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_data_args(p):
    g = p.add_argument_group("data")
    g.add_argument("--data", help="LIBSVM file; a synthetic instance is used when omitted")
    g.add_argument("--n-features", type=int, help="declared feature count d")
    g.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=None,
                   help="scale columns to unit norm (default: on for speedup, off otherwise)")
    g.add_argument("--synth-n", type=int, default=256)
    g.add_argument("--synth-d", type=int, default=64)
    g.add_argument("--synth-density", type=float, default=0.1)
    g.add_argument("--synth-profile", default="uniform",
                   choices=["uniform", "fully-sparse", "fully-dense"])
    g.add_argument("--synth-seed", type=int, default=0)


def _add_problem_args(p):
    g = p.add_argument_group("problem")
    g.add_argument("--loss", default="smoothed-hinge", choices=["smoothed-hinge", "squared-hinge"])
    g.add_argument("--gamma", type=float, default=1.0)
    g.add_argument("--lambda", dest="lam", default="1/n",
                   help="regularization weight: a number or the preset 1/n or 1/sqrt(n)")


def _add_sampling_args(p, choices=("serial", "importance", "tau-nice", "product", "distributed")):
    g = p.add_argument_group("sampling")
    g.add_argument("--sampling", default=choices[0], choices=choices)
    g.add_argument("--tau", type=int, help="mini-batch size (tau-nice) or per-node size (distributed)")
    g.add_argument("--c", type=int, help="node count for distributed sampling")
    g.add_argument("--partition", help="partition file for product/distributed sampling")


def build_parser():
    parser = _Parser(prog="quartz", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("solve", help="run the solver and write trace + summary")
    _add_data_args(p)
    _add_problem_args(p)
    _add_sampling_args(p)
    p.add_argument("--option", default="I", choices=["I", "II"])
    p.add_argument("--beta", type=float, default=1.0, help="primal aggressiveness multiplier")
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--gap-check-every", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=_int_list, help="comma-separated seeds (overrides --seed)")
    p.add_argument("--out-dir", default="quartz-out")

    p = sub.add_parser("eso", help="report v, theta and the omega histogram as JSON")
    _add_data_args(p)
    _add_problem_args(p)
    _add_sampling_args(p)
    p.add_argument("--out", help="JSON output path (default stdout)")

    p = sub.add_parser("speedup", help="theoretical (and measured) speedup factors")
    _add_data_args(p)
    _add_problem_args(p)
    p.add_argument("--sampling", default="tau-nice", choices=["tau-nice", "distributed"])
    p.add_argument("--tau-list", type=_int_list)
    p.add_argument("--c-list", type=_int_list)
    p.add_argument("--grid-points", type=int, default=8, help="log grid size when lists are omitted")
    p.add_argument("--practical", action="store_true", help="also measure iterations to epsilon")
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--max-epochs", type=int, default=2000)
    p.add_argument("--seeds", type=_int_list, default=[0])
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.add_argument("--report", help="JSON report path")

    p = sub.add_parser("detect-groups", help="find a feature-disjoint example partition")
    _add_data_args(p)
    p.add_argument("--balance", type=int, help="merge components into at most this many groups")
    p.add_argument("--out", default="partition.txt")

    p = sub.add_parser("verify", help="run the ESO and contraction self-checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--full", action="store_true", help="full-size battery instead of the quick one")
    return parser


def _load(args, normalize_default):
    normalize = normalize_default if args.normalize is None else args.normalize
    if args.data:
        matrix, _ = load_libsvm(args.data, normalize=normalize, n_features=args.n_features)
        source = {"data": str(args.data)}
    else:
        matrix = synth_instance(args.synth_n, args.synth_d, args.synth_density,
                                args.synth_profile, seed=args.synth_seed)
        if normalize:
            matrix = normalize_columns(matrix)
        source = {"synth": {"n": args.synth_n, "d": args.synth_d,
                            "density": args.synth_density, "profile": args.synth_profile,
                            "seed": args.synth_seed}}
    source["normalize"] = bool(normalize)
    return matrix, source


LAMBDA_PRESETS = {"1/n": lambda n: 1.0 / n, "1/sqrt(n)": lambda n: 1.0 / math.sqrt(n)}


def _lambda(text, n):
    if text in LAMBDA_PRESETS:
        return LAMBDA_PRESETS[text](n)
    try:
        lam = float(text)
    except ValueError:
        raise UsageError(f"--lambda must be a number or one of {sorted(LAMBDA_PRESETS)}") from None
    if not lam > 0:
        raise UsageError(f"--lambda must be positive, got {text}")
    return lam


def _check_sampling_args(args):
    kind = args.sampling
    if args.c is not None and kind != "distributed":
        raise UsageError("--c only applies to distributed sampling")
    if args.tau is not None and kind not in ("tau-nice", "distributed"):
        raise UsageError("--tau only applies to tau-nice or distributed sampling")
    if getattr(args, "partition", None) and kind not in ("product", "distributed"):
        raise UsageError("--partition only applies to product or distributed sampling")
    if kind == "tau-nice" and args.tau is None:
        raise UsageError("tau-nice sampling needs --tau")


def _problem(args, matrix):
    lam = _lambda(args.lam, matrix.n)
    return ProblemInstance(matrix, make_loss(args.loss, args.gamma), lam)


def _scheme(args, prob):
    n = prob.n
    kind = args.sampling
    if kind == "serial":
        return SerialSampling.uniform(n)
    if kind == "importance":
        return SerialSampling(importance_probs(v_serial(prob.matrix), prob.lam, prob.loss.gamma, n))
    if kind == "tau-nice":
        return TauNiceSampling(n, args.tau)
    if kind == "product":
        groups = read_partition(args.partition) if args.partition else detect_product_partition(prob.matrix)
        if groups is None:
            raise UsageError("no product partition: the data has a single connected component")
        return ProductSampling(groups, n=n)
    if kind == "distributed":
        part = read_partition(args.partition) if args.partition else None
        return DistributedSampling(n, args.c or 1, args.tau or 1, part)
    raise UsageError(f"unknown sampling {kind!r}")


def _config_echo(args, source, prob):
    cfg = {k: v for k, v in vars(args).items() if not k.startswith("synth_") and k != "data"}
    cfg["lambda"] = prob.lam
    cfg.pop("lam", None)
    cfg["source"] = source
    return cfg


def _workers():
    try:
        return max(1, int(os.environ.get("QUARTZ_THREADS", "1")))
    except ValueError:
        return 1


def _run_seeds(prob, configs):
    workers = min(_workers(), len(configs))
    if workers <= 1:
        return [solve(prob, c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(solve, [prob] * len(configs), configs))


def cmd_solve(args):
    _check_sampling_args(args)
    matrix, source = _load(args, normalize_default=False)
    prob = _problem(args, matrix)
    scheme = _scheme(args, prob)
    seeds = args.seeds or [args.seed]
    configs = [SolverConfig(scheme, option=args.option, beta=args.beta, epsilon=args.epsilon,
                            max_epochs=args.max_epochs, gap_check_every=args.gap_check_every,
                            seed=s) for s in seeds]
    results = _run_seeds(prob, configs)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    echo = _config_echo(args, source, prob)
    runs = []
    for s, res in zip(seeds, results):
        res.write_trace_csv(out / f"trace_seed{s}.csv")
        runs.append({"seed": s, **res.summary()})
        print(f"seed={s} status={res.status} iterations={res.iterations} "
              f"gap={res.gap:.3e} theta={res.theta:.3e}")
    with open(out / "summary.json", "w") as fh:
        json.dump({"config": echo, "runs": runs}, fh, indent=2, default=_jsonable)
    if any(r.status == ABORTED for r in results):
        for r in results:
            if r.message:
                print(r.message, file=sys.stderr)
        return EXIT_NOCONV
    if any(r.status == BUDGET_EXHAUSTED for r in results):
        return EXIT_NOCONV
    return EXIT_OK


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def cmd_eso(args):
    _check_sampling_args(args)
    matrix, source = _load(args, normalize_default=False)
    prob = _problem(args, matrix)
    scheme = _scheme(args, prob)
    eso = eso_params(matrix, scheme, prob.lam, prob.loss.gamma)
    omega_vals, counts = np.unique(matrix.row_nnz, return_counts=True)
    report = {
        "config": _config_echo(args, source, prob),
        "n": matrix.n,
        "d": matrix.d,
        "nnz": matrix.nnz,
        "theta": eso.theta,
        "lambda_gamma_n": eso.lambda_gamma_n,
        "p": scheme.inclusion_probs().tolist(),
        "v": eso.v.tolist(),
        "omega_histogram": {str(int(k)): int(c) for k, c in zip(omega_vals, counts)},
    }
    text = json.dumps(report, indent=2, default=_jsonable)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_speedup(args):
    matrix, source = _load(args, normalize_default=True)
    prob = _problem(args, matrix)
    n, lam, gamma = matrix.n, prob.lam, prob.loss.gamma
    taus = args.tau_list or analysis.log_grid(n, args.grid_points)
    rows, header = [], None
    report = {"config": _config_echo(args, source, prob)}

    if args.sampling == "tau-nice":
        header = ["tau", "theoretical", "practical"]
        vs = v_serial(matrix)
        serial_traces = None
        if args.practical:
            serial_traces = _traces(prob, SerialSampling.uniform(n), args)
        for tau in taus:
            if not 1 <= tau <= n:
                raise UsageError(f"tau={tau} outside [1, n={n}]")
            theo = analysis.tau_nice_speedup_from_data(matrix, tau, lam, gamma)
            practical = ""
            if args.practical:
                # 1-nice is serial uniform; reuse those runs
                traces = (serial_traces if tau == 1
                          else _traces(prob, TauNiceSampling(n, tau), args))
                practical = analysis.practical_speedup(serial_traces, traces, args.epsilon)
            omega_t = (analysis.omega_tilde_from_v(vs, v_tau_nice(matrix, tau), n, tau)
                       if tau >= 2 else None)
            rows.append([tau, theo, practical])
            report.setdefault("omega_tilde", {})[str(tau)] = omega_t
    else:
        header = ["c", "tau", "T_ctau", "theoretical"]
        cs = args.c_list or [c for c in analysis.log_grid(n, args.grid_points) if n % c == 0]
        for c, tau, Tct, sp in analysis.contour_grid(matrix, lam, gamma, cs, taus):
            rows.append([c, tau, Tct, sp])

    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        wr = csv.writer(fh)
        wr.writerow(header)
        wr.writerows(rows)
    finally:
        if args.out:
            fh.close()
    if args.report:
        report["rows"] = [dict(zip(header, r)) for r in rows]
        Path(args.report).write_text(json.dumps(report, indent=2, default=_jsonable) + "\n")
    return EXIT_OK


def _traces(prob, scheme, args):
    configs = [SolverConfig(scheme, epsilon=args.epsilon, max_epochs=args.max_epochs, seed=s)
               for s in args.seeds]
    results = _run_seeds(prob, configs)
    bad = [r for r in results if r.status != CONVERGED]
    if bad:
        raise _NoConvergence(f"{type(scheme).__name__} run did not reach epsilon={args.epsilon}")
    return [r.trace for r in results]


class _NoConvergence(Exception):
    pass


def cmd_detect_groups(args):
    matrix, _ = _load(args, normalize_default=False)
    groups = detect_product_partition(matrix, n_groups=args.balance)
    if groups is None:
        print("single connected component; no product partition", file=sys.stderr)
        return EXIT_DATA
    write_partition(args.out, groups)
    sizes = [len(g) for g in groups]
    print(f"{len(groups)} groups (sizes min={min(sizes)} max={max(sizes)}) -> {args.out}")
    return EXIT_OK


def cmd_verify(args):
    ok = True
    for name, passed, detail in verify.run_all(seed=args.seed, quick=not args.full):
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
        ok &= passed
    return EXIT_OK if ok else EXIT_NOCONV


COMMANDS = {
    "solve": cmd_solve,
    "eso": cmd_eso,
    "speedup": cmd_speedup,
    "detect-groups": cmd_detect_groups,
    "verify": cmd_verify,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"quartz: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _NoConvergence as exc:
        print(f"quartz: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except (DataFormatError, OSError) as exc:
        print(f"quartz: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # invalid scheme/problem parameters derived from the data
        print(f"quartz: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
