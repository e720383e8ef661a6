"""Command-line experiment runner.

Subcommands ``solve``, ``sweep``, ``clt``, ``audit`` and ``check`` all read
a config file (see :mod:`probfw.harness.config`) and write their artifacts
under ``--out``: one trace CSV and one final-measure CSV per replication,
``summary.csv`` and ``report.txt``.

Exit codes: 0 all requested checks passed, 1 a check failed or a run
aborted, 2 the config did not parse, 3 the instance lacks a needed oracle.
"""
import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from ..errors import CapabilityError, SolverError
from ..solvers import run
from . import experiments as ex
from .config import ConfigError, ExperimentConfig, load_config
from .io import csv_text, measure_csv, trace_csv, write_atomic

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CAPABILITY = 0, 1, 2, 3
WORKERS_ENV = "PROBFW_WORKERS"

_MODE_CHECKS = {"clt": ("clt",), "audit": ("oracle_audit", "invariants")}


def _worker(payload):
    name, params, atoms, weights, cfg = payload
    exp = ExperimentConfig(name, params, cfg, mu0_atoms=atoms, mu0_weights=weights)
    inst = exp.build_instance()
    return run(inst, exp.build_mu0(inst), cfg)


def make_runner(exp, inst, mu0, workers=1):
    """Map solver configs to traces, in order, optionally over processes.

    Workers rebuild the instance from the config, so results do not depend
    on the worker count.
    """
    if workers <= 1:
        return lambda cfgs: [run(inst, mu0, c) for c in cfgs]

    def runner(cfgs):
        jobs = [(exp.instance, exp.instance_params, exp.mu0_atoms, exp.mu0_weights, c) for c in cfgs]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_worker, jobs))

    return runner


def _workers():
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def _envelope(inst, cfg, k):
    """``2 L R^2 / (k + 2)`` for dFW when an analytic constant exists."""
    L = inst.truth.smoothness_L
    if cfg.variant != "dfw" or L is None or inst.truth.optimal_value is None:
        return None
    return 2.0 * L * inst.truth.diameter_R ** 2 / (k + 2)


def _summary(inst, exp, seeds, traces):
    header = ("replication", "seed", "k", "objective", "obj_gap", "fw_gap", "atoms", "dfw_envelope", "within")
    rows = []
    for r, (s, tr) in enumerate(zip(seeds, traces)):
        last = tr.rows[-1]
        env = _envelope(inst, exp.solver, last.k)
        within = None if env is None or last.obj_gap is None else bool(last.obj_gap <= env)
        rows.append((r, s, last.k, last.objective, last.obj_gap, last.fw_gap, last.atoms, env, within))
    return csv_text(header, rows)


def _summary_by_k(seeds, traces):
    header = ("k", "replications", "mean_obj_gap", "se_obj_gap", "mean_fw_gap")
    n = min(len(t) for t in traces)
    gaps = np.array([t.column("obj_gap")[:n] for t in traces])
    fw = np.array([t.column("fw_gap")[:n] for t in traces])
    rows = []
    for k in range(n):
        g = gaps[:, k]
        se = g.std(ddof=1) / np.sqrt(len(g)) if len(g) > 1 else None
        f = fw[:, k]
        rows.append((k, len(seeds), g.mean(), se, f.mean() if np.all(np.isfinite(f)) else None))
    return csv_text(header, rows)


def _run_check(name, exp, inst, mu0, runner, traces):
    opt = exp.options
    limit = opt.get("time_limit")
    seeds = exp.seeds()
    if name == "bound_dfw":
        tr = traces[0] if traces and exp.solver.variant == "dfw" else None
        return [ex.check_dfw_bound(inst, exp.solver, mu0, trace=tr, time_limit=limit)]
    if name == "bound_sfw":
        cfg = exp.solver if exp.solver.variant in ("sfw", "fc_sfw") else replace(exp.solver, variant="sfw")
        reuse = traces if exp.solver.variant == cfg.variant else None
        ks = [int(k) for k in opt["ks"]]
        return [ex.check_sfw_bound(inst, cfg, seeds, ks, mu0, runner=runner, time_limit=limit, traces=reuse)]
    if name == "bound_fixed":
        tr = traces[0] if traces and exp.solver.variant == "fixed_sfw" else None
        return [ex.check_fixed_bound(inst, exp.solver, mu0, trace=tr)]
    if name == "gap_nonconvex":
        return [ex.nonconvex_gap_experiment(inst, [int(t) for t in opt["t_list"]], [int(t) for t in opt["check_t"]],
                                            seeds, mu0, runner=runner)]
    if name == "clt":
        cfg = exp.solver if exp.solver.variant in ("sfw", "fc_sfw") else replace(exp.solver, variant="sfw")
        return [ex.check_clt(inst, cfg, [int(n) for n in opt["n_list"]], exp.replications, exp.solver.seed,
                             time_limit=limit, runner=runner)]
    if name == "oracle_audit":
        if not inst.is_stochastic:
            return [ex.CheckResult("oracle_audit", ex.SKIP, f"{inst.name}: no stochastic oracles")]
        return ex.oracle_audit(inst, int(opt["audit_trials"]), ex.RngStream(exp.solver.seed, (6 << 40, 0)))
    if name == "invariants":
        return ex.check_invariants(inst, ex.RngStream(exp.solver.seed, (6 << 40, 1)))
    raise ConfigError(f"unknown check {name!r}")


def run_experiment(exp, out, mode="check", workers=1, emit=print):
    """Run one configured experiment and write its artifacts.

    Returns
    -------
    int
        Exit code; CapabilityError propagates for the caller to map to 3.
    """
    inst = exp.build_instance()
    mu0 = exp.build_mu0(inst)
    runner = make_runner(exp, inst, mu0, workers)
    seeds = exp.seeds()
    lines = [f"# instance={inst.name} variant={exp.solver.variant} seeds={seeds[0]}..{seeds[-1]}"]
    results = []
    traces = None
    if mode in ("solve", "sweep", "check"):
        try:
            traces = runner([replace(exp.solver, seed=s) for s in seeds])
        except SolverError as err:
            if err.trace is not None:
                write_atomic(os.path.join(out, "trace_partial.csv"), trace_csv(err.trace, exp.solver.seed))
            lines.append(f"FAIL run: {err}")
            write_atomic(os.path.join(out, "report.txt"), "\n".join(lines) + "\n")
            emit(lines[-1])
            return EXIT_FAIL
        for r, (s, tr) in enumerate(zip(seeds, traces)):
            write_atomic(os.path.join(out, f"trace_r{r:03d}.csv"), trace_csv(tr, s))
            write_atomic(os.path.join(out, f"measure_r{r:03d}.csv"), measure_csv(tr.final))
        write_atomic(os.path.join(out, "summary.csv"), _summary(inst, exp, seeds, traces))
        if mode == "sweep":
            write_atomic(os.path.join(out, "summary_by_k.csv"), _summary_by_k(seeds, traces))
    for name in _MODE_CHECKS.get(mode, exp.checks):
        for res in _run_check(name, exp, inst, mu0, runner, traces):
            results.append(res)
            emit(res.line())
    lines += [r.line() for r in results]
    write_atomic(os.path.join(out, "report.txt"), "\n".join(lines) + "\n")
    return EXIT_FAIL if any(r.status == ex.FAIL for r in results) else EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment config file")
    common.add_argument("--out", help="output directory (overrides [experiment] output)")
    common.add_argument("--seed", type=int, help="base seed (overrides [solver] seed)")
    common.add_argument("--replications", type=int, help="number of replications")
    common.add_argument("--quiet", action="store_true", help="do not print report lines")
    common.add_argument("--timing", action="store_true", help="record elapsed_ms (breaks byte-identical reruns)")
    p = argparse.ArgumentParser(prog="probfw", description="Frank-Wolfe over probability measures: experiments")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="run the solver and write traces")
    sub.add_parser("sweep", parents=[common], help="replicate runs and write per-k summaries")
    sub.add_parser("clt", parents=[common], help="central-limit replication study")
    sub.add_parser("audit", parents=[common], help="Monte Carlo oracle audit and invariant suite")
    sub.add_parser("check", parents=[common], help="run every check listed in the config")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    emit = (lambda s: None) if args.quiet else print
    try:
        exp = load_config(args.config).with_overrides(args.seed, args.replications, args.timing or None)
        workers = _workers()
        out = args.out or exp.output
        return run_experiment(exp, out, args.command, workers, emit)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except CapabilityError as err:
        print(f"capability error: {err}", file=sys.stderr)
        return EXIT_CAPABILITY


if __name__ == "__main__":
    sys.exit(main())
