"""Execute a benchmark sweep and write traces plus a summary table."""

from __future__ import annotations

import csv
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor

from ..baselines import admm_solve, palm_solve
from ..instances import HardInstanceParams, RandomQpParams, build_hard_instance, gen_random_qp
from ..io import read_instance
from ..solver import solve

__all__ = ["SUMMARY_COLUMNS", "build_instance", "run_one", "run_sweep", "trace_name"]

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = ("solver", "d", "kappa", "rho", "seed", "status", "grads_to_eps",
                   "final_kkt_p", "wall_ms")

_SOLVE = {"pgrpd": solve, "admm": admm_solve, "palm": palm_solve}


def build_instance(spec, seed):
    """Return ``(data, g, meta)`` where ``meta`` holds d, kappa and rho for tables."""
    kw = spec.kwargs
    if spec.gen == "qp":
        p = RandomQpParams(d=int(kw["d"]), kappa=float(kw["kappa"]), rho=float(kw["rho"]),
                           seed=seed, exact_kappa=bool(kw["exact_kappa"]),
                           beta=float(kw["beta"]))
        data, g = gen_random_qp(p)
        return data, g, {"d": p.d, "kappa": p.kappa, "rho": p.rho}
    if spec.gen == "hard":
        p = HardInstanceParams(m1=int(kw["m1"]), m2=int(kw["m2"]), dbar=int(kw["dbar"]),
                               L_f=float(kw["lf"]), beta=float(kw["beta"]),
                               rho_f=float(kw["rho_f"]), seed=seed)
        data, g = build_hard_instance(p)
        return data, g, {"d": p.d, "kappa": float(p.m), "rho": p.rho_f}
    data, g = read_instance(kw["path"], L_f=kw.get("lf"))
    return data, g, {"d": data.d, "kappa": float("nan"), "rho": data.rho_wc}


def trace_name(label, ident, seed):
    return f"trace_{label}_{ident}_{seed}.csv"


def run_one(task):
    """Worker entry point; ``task = (instance, seed, solver, eps, max_grads, out)``."""
    inst, seed, solver, eps, max_grads, out = task
    data, g, meta = build_instance(inst, seed)
    cfg = solver.make_config(eps, max_grads)
    t0 = time.perf_counter()
    sol = _SOLVE[solver.name](data, g, cfg)
    wall_ms = 1e3 * (time.perf_counter() - t0)
    comment = f"solver={solver.label} instance={inst.ident} seed={seed} status={sol.status}"
    sol.trace.to_csv(os.path.join(out, trace_name(solver.label, inst.ident, seed)),
                     comment=comment)
    last = sol.trace[-1].kkt_p if len(sol.trace) else float("nan")
    kkt = [r.kkt_p for r in sol.trace if r.kkt_p == r.kkt_p]
    final = kkt[-1] if kkt else last
    return {
        "solver": solver.label, "d": meta["d"], "kappa": meta["kappa"], "rho": meta["rho"],
        "seed": seed, "status": str(sol.status), "grads_to_eps": sol.trace.grads_to(eps),
        "final_kkt_p": final, "wall_ms": round(wall_ms, 3), "instance": inst.ident,
    }


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_summary(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in SUMMARY_COLUMNS])


def run_sweep(cfg):
    """Run every (instance, seed, solver) tuple.

    Returns
    -------
    rows : list of dict
        Summary rows in task order, with an extra ``instance`` key.
    failures : list of (task, Exception)
    """
    os.makedirs(cfg.out, exist_ok=True)
    tasks = [(inst, seed, s, cfg.eps, cfg.max_grads, cfg.out)
             for inst in cfg.instances for seed in cfg.seeds for s in cfg.solvers]
    rows, failures = [], []
    if cfg.parallelism == 1:
        results = []
        for t in tasks:
            try:
                results.append(run_one(t))
            except Exception as exc:  # noqa: BLE001 - reported per run
                results.append(exc)
    else:
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            futures = [pool.submit(run_one, t) for t in tasks]
            results = []
            for f in futures:
                try:
                    results.append(f.result())
                except Exception as exc:  # noqa: BLE001
                    results.append(exc)
    for t, res in zip(tasks, results):
        if isinstance(res, Exception):
            log.error("run %s seed=%s solver=%s failed: %s", t[0].ident, t[1], t[2].label, res)
            failures.append((t, res))
        else:
            log.info("%s seed=%s %s: %s grads_to_eps=%s", res["instance"], res["seed"],
                     res["solver"], res["status"], res["grads_to_eps"])
            rows.append(res)
    write_summary(rows, os.path.join(cfg.out, "summary.csv"))
    return rows, failures
