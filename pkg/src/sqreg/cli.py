"""Command-line surface: fit, datagen, lambda-sweep, tau-sweep, bench.

Outputs are JSON for single fits, CSV for sweeps and JSON-lines for benchmark
tables; every randomized command takes --seed and reproduces identical output
bytes apart from wall-time fields. Exit codes: 0 success/convergence, 1 input
error, 2 non-convergence.
"""

import argparse
import concurrent.futures
import json
import os
import sys
import time

import numpy as np

from .admm import AdmmConfig, admm_solve
from .datagen import SyntheticSpec, generate, selection_metrics
from .mscra import MscraConfig, lambda_grid, mscra_fit
from .pdsn import PdsnConfig, SubproblemSpec, ppa_solve
from .problem import load_csv, nonzero_count, standardize
from .report import BenchRun
from .surrogate import from_name


def _write(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _json_dumps(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def _add_common(sub, lam=True):
    sub.add_argument("--tau", type=float, default=0.5)
    if lam:
        group = sub.add_mutually_exclusive_group()
        group.add_argument("--lambda", dest="lam", type=float, default=None)
        group.add_argument("--nu", type=float, default=None)
    sub.add_argument("--surrogate", choices=("capped-l1", "scad", "mcp"), default="scad")
    sub.add_argument("--a", type=float, default=3.7)
    sub.add_argument("--solver", choices=("pdsn", "admm"), default="pdsn")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--threads", type=int, default=0, help="0 = machine parallelism")
    sub.add_argument("--out", default=None)


def _mscra_config(args, default_lam=0.1):
    lam = args.lam
    nu = getattr(args, "nu", None)
    if lam is None and nu is None:
        lam = default_lam
    return MscraConfig(
        tau=args.tau,
        lam=lam if nu is None else None,
        nu=nu,
        surrogate=from_name(args.surrogate, args.a),
        solver=args.solver,
    )


def _synthetic_spec(args, seed=None):
    return SyntheticSpec(
        n=args.n, p=args.p, beta_pattern=args.pattern, covariance=args.cov,
        noise=args.noise, noise_var=args.noise_var, snr=args.snr,
        seed=args.seed if seed is None else seed,
    )


def cmd_fit(args):
    problem = load_csv(args.data, has_header=args.header, add_intercept=args.intercept)
    if args.standardize:
        problem = standardize(problem)
    problem = problem.with_tau(args.tau)
    # default penalty level lambda = max(0.01, 0.1 ||X||_1 / n)
    default_lam = float(lambda_grid(problem, 0.1, 0.1, 1)[0])
    cfg = _mscra_config(args, default_lam)
    t0 = time.perf_counter()
    final, history = mscra_fit(problem, cfg)
    wall = (time.perf_counter() - t0) * 1e3
    beta = final.beta
    nz = np.flatnonzero(np.abs(beta) > 1e-6 * max(1.0, float(np.max(np.abs(beta)))))
    report = {
        "beta": [[int(i), float(beta[i])] for i in nz],
        "nnz": final.nnz,
        "err_k": float(final.err_k),
        "tau": args.tau,
        "lambda": cfg.lam,
        "stages": [s.record() for s in history],
        "converged": final.stop_reason != "max_stages",
        "stop_reason": final.stop_reason,
        "wall_ms": wall,
    }
    _write(_json_dumps(report), args.out)
    return 0 if report["converged"] else 2


def cmd_datagen(args):
    spec = _synthetic_spec(args)
    ds = generate(spec)
    X, y = ds.problem.design, ds.problem.response
    out = args.out or "data"
    lines = [",".join(repr(v) for v in row) + "," + repr(float(yi)) for row, yi in zip(X.tolist(), y.tolist())]
    with open(out + ".csv", "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    sidecar = {
        "beta_true": [[int(i), float(ds.beta_true[i])] for i in ds.support],
        "support": list(ds.support),
        "spec": {
            "n": spec.n, "p": spec.p, "pattern": spec.beta_pattern,
            "covariance": spec.covariance, "noise": spec.noise,
            "noise_var": spec.noise_var, "snr": spec.snr, "seed": spec.seed,
        },
    }
    with open(out + ".json", "w", encoding="utf-8") as fh:
        fh.write(_json_dumps(sidecar))
    return 0


def _subproblem_solve(problem, lam, solver):
    weights = np.full(problem.p, lam)
    spec = SubproblemSpec(problem=problem, weights=weights)
    if solver == "pdsn":
        state, report = ppa_solve(spec, PdsnConfig())
        return state.beta, report
    state, report = admm_solve(spec, AdmmConfig())
    return state.beta, report


def cmd_lambda_sweep(args):
    ds = generate(_synthetic_spec(args))
    problem = ds.problem.with_tau(args.tau)
    lams = lambda_grid(problem, args.gamma_min, args.gamma_max, args.count)
    solvers = [s.strip() for s in args.solvers.split(",") if s.strip()]
    rows = []
    for lam in lams:
        for solver in solvers:
            beta, report = _subproblem_solve(problem, float(lam), solver)
            rows.append((float(lam), solver, report.objective, nonzero_count(beta), report.wall_ms))
    rows.sort(key=lambda r: (r[0], r[1]))
    text = "lambda,solver,objective,nnz,wall_ms\n" + "\n".join(
        f"{r[0]!r},{r[1]},{r[2]!r},{r[3]},{r[4]!r}" for r in rows) + "\n"
    _write(text, args.out)
    return 0


def _tau_sweep_one(payload):
    args_dict, tau, seed = payload
    spec = SyntheticSpec(**args_dict, seed=seed)
    ds = generate(spec)
    # fixed penalty level lambda = 37.5 / n across the whole sweep
    cfg = MscraConfig(tau=tau, lam=37.5 / args_dict["n"], solver="pdsn")
    t0 = time.perf_counter()
    final, _ = mscra_fit(ds.problem, cfg)
    wall = (time.perf_counter() - t0) * 1e3
    metrics = selection_metrics(final.beta, ds)
    return tau, seed, metrics["l2_error"], wall


def cmd_tau_sweep(args):
    taus = [round(t, 10) for t in np.arange(args.tau_min, args.tau_max + 1e-12, args.tau_step).tolist()]
    seeds = [args.seed ^ r for r in range(args.reps)]
    base = {"n": args.n, "p": args.p, "beta_pattern": args.pattern,
            "covariance": args.cov, "noise": args.noise, "noise_var": args.noise_var,
            "snr": args.snr}
    payloads = [(base, t, s) for t in taus for s in seeds]
    results = _run_pool(_tau_sweep_one, payloads, args.threads)
    rows = []
    for t in taus:
        sub = [r for r in results if r[0] == t]
        rows.append((t, float(np.mean([r[2] for r in sub])), float(np.mean([r[3] for r in sub]))))
    text = "tau,l2_error,wall_ms\n" + "\n".join(f"{r[0]!r},{r[1]!r},{r[2]!r}" for r in rows) + "\n"
    _write(text, args.out)
    return 0


def _run_pool(fn, payloads, threads):
    workers = threads if threads and threads > 0 else (os.cpu_count() or 1)
    if workers <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, payloads))


def _bench_one(payload):
    kind = payload["kind"]
    seed = payload["seed"]
    spec = SyntheticSpec(**payload["spec"], seed=seed)
    ds = generate(spec)
    cfg = MscraConfig(tau=payload["tau"], lam=payload["lam"], solver=payload["solver"],
                      surrogate=from_name(payload["surrogate"], payload["a"]))
    t0 = time.perf_counter()
    final, history = mscra_fit(ds.problem, cfg)
    wall = (time.perf_counter() - t0) * 1e3
    solver_ms = sum(s.solver_report.wall_ms for s in history)
    rec = {"rep": payload["rep"], "seed": seed, "stages": len(history),
           "solver_iters": int(sum(s.solver_report.inner_iterations for s in history)),
           "wall_ms": wall, "solver_ms": solver_ms, "nnz": final.nnz}
    if kind == "hetero":
        beta = final.beta
        thr = 1e-6 * max(1.0, float(np.max(np.abs(beta))))
        selected = set(np.flatnonzero(np.abs(beta) > thr).tolist())
        main = {5, 11, 14, 19}
        rec["size"] = len(selected)
        rec["p1"] = 1.0 if main <= selected else 0.0
        rec["p2"] = 1.0 if main <= selected and 0 in selected else 0.0
        rec["ae"] = float(sum(abs(beta[i] - 1.0) for i in main))
    else:
        m = selection_metrics(final.beta, ds)
        rec.update({"l2_error": m["l2_error"], "fp": m["fp"], "fn": m["fn"], "size": m["size"]})
    return rec


def cmd_bench(args):
    kind = args.model
    if kind == "hetero":
        spec = {"n": args.n, "p": args.p, "beta_pattern": "hetero",
                "covariance": args.cov, "noise": "normal", "noise_var": 1.0, "snr": None}
    else:
        spec = {"n": args.n, "p": args.p, "beta_pattern": "fixed16",
                "covariance": args.cov, "noise": args.noise, "noise_var": args.noise_var,
                "snr": None}
    lam = args.lam
    if lam is None:
        gamma = args.gamma if args.gamma is not None else (0.1 if kind == "hetero" else 0.116)
        probe = generate(SyntheticSpec(**spec, seed=args.seed))
        lam = float(lambda_grid(probe.problem, gamma, gamma, 1)[0])
    scenario = f"{args.model}:{args.cov}:{args.noise}:tau{args.tau}"
    payloads = [{"kind": kind, "spec": spec, "seed": args.seed ^ r, "rep": r,
                 "tau": args.tau, "lam": lam, "solver": args.solver,
                 "surrogate": args.surrogate, "a": args.a}
                for r in range(args.reps)]
    records = _run_pool(_bench_one, payloads, args.threads)
    records.sort(key=lambda r: r["rep"])
    run = BenchRun(scenario=scenario, records=records)
    lines = [_json_dumps(r) for r in records]
    agg = run.aggregate()
    agg["aggregate"] = True
    lines.append(_json_dumps(agg))
    _write("".join(lines), args.out)
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="sqreg", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit one CSV dataset")
    fit.add_argument("data")
    fit.add_argument("--header", action="store_true")
    fit.add_argument("--intercept", action="store_true")
    fit.add_argument("--standardize", action="store_true")
    _add_common(fit)
    fit.set_defaults(fn=cmd_fit)

    dg = sub.add_parser("datagen", help="emit a synthetic CSV + JSON sidecar")
    dg.add_argument("--n", type=int, required=True)
    dg.add_argument("--p", type=int, required=True)
    dg.add_argument("--pattern", choices=("alternating-decay", "fixed16", "random-support", "hetero"),
                    default="fixed16")
    dg.add_argument("--cov", default="identity")
    dg.add_argument("--noise", default="normal")
    dg.add_argument("--noise-var", type=float, default=1.0)
    dg.add_argument("--snr", type=float, default=None)
    dg.add_argument("--seed", type=int, default=0)
    dg.add_argument("--out", default=None)
    dg.set_defaults(fn=cmd_datagen)

    ls = sub.add_parser("lambda-sweep", help="sweep the penalty grid on one subproblem")
    ls.add_argument("--n", type=int, default=200)
    ls.add_argument("--p", type=int, default=500)
    ls.add_argument("--pattern", default="alternating-decay")
    ls.add_argument("--cov", default="identity")
    ls.add_argument("--noise", default="normal")
    ls.add_argument("--noise-var", type=float, default=1.0)
    ls.add_argument("--snr", type=float, default=3.0)
    ls.add_argument("--gamma-min", type=float, default=0.02)
    ls.add_argument("--gamma-max", type=float, default=0.25)
    ls.add_argument("--count", type=int, default=50)
    ls.add_argument("--solvers", default="pdsn,admm")
    _add_common(ls, lam=False)
    ls.set_defaults(fn=cmd_lambda_sweep)

    ts = sub.add_parser("tau-sweep", help="sweep the quantile level with full fits")
    ts.add_argument("--n", type=int, default=100)
    ts.add_argument("--p", type=int, default=300)
    ts.add_argument("--pattern", default="random-support")
    ts.add_argument("--cov", default="cs:0.6")
    ts.add_argument("--noise", default="laplace")
    ts.add_argument("--noise-var", type=float, default=1.0)
    ts.add_argument("--snr", type=float, default=None)
    ts.add_argument("--tau-min", type=float, default=0.05)
    ts.add_argument("--tau-max", type=float, default=0.95)
    ts.add_argument("--tau-step", type=float, default=0.05)
    ts.add_argument("--reps", type=int, default=10)
    _add_common(ts, lam=False)
    ts.set_defaults(fn=cmd_tau_sweep)

    bn = sub.add_parser("bench", help="replicated benchmark scenario (JSON-lines)")
    bn.add_argument("--model", choices=("fixed16", "hetero"), default="fixed16")
    bn.add_argument("--n", type=int, default=200)
    bn.add_argument("--p", type=int, default=1000)
    bn.add_argument("--cov", default="identity")
    bn.add_argument("--noise", default="normal")
    bn.add_argument("--noise-var", type=float, default=2.0)
    bn.add_argument("--gamma", type=float, default=None,
                    help="penalty scale; default 0.116 (fixed16) or 0.1 (hetero)")
    bn.add_argument("--reps", type=int, default=10)
    _add_common(bn)
    bn.set_defaults(fn=cmd_bench)

    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if hasattr(args, "tau") and not 0.0 < args.tau < 1.0:
        sys.stderr.write("tau must be in (0,1)\n")
        return 1
    try:
        return args.fn(args)
    except (OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
