"""Inexact proximal gradient outer loop with dual-recovered subproblems.

Each outer step linearizes ``f0`` at ``x_k`` and approximately solves::

    min_{x, y} <grad f0(x_k), x> + tau/2 ||x - x_k||^2 + g(y)
    s.t.       y = Abar x + bbar,  A x + b = 0

through its negative dual (see :mod:`pgrpd.dualsolve`). The primal pair is
then recovered in closed form from the approximate multipliers.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dualsolve import (
    RestartSchedule,
    build_dual,
    compute_hoffman_constants,
    dual_subgradient_min_norm,
    restarted_apg,
    schedule_hoffman,
    schedule_strong,
)
from .kkt import kkt_p_residual, kkt_sp_residuals
from .model import (
    ConfigurationError,
    DualPoint,
    Iterate,
    OracleCounter,
    compute_spectral,
    eval_f0,
    g_value,
    prox_g,
)
from .trace import Solution, Status, Trace, TraceRecord

__all__ = [
    "PgRpdConfig",
    "OuterState",
    "HoffmanRunaway",
    "compute_B_constants",
    "mu_tilde",
    "mu_bar",
    "recover_primal",
    "pg_rpd_step",
    "check_stop_kkt",
    "checkstop",
    "check_stop_descent",
    "initial_state",
    "solve",
    "adaptive_hoffman_solve",
    "outer_iteration_cap",
]

SCHEDULE_MODES = ("TheoreticalSP", "TheoreticalP", "Practical")
DUAL_MODES = ("StrongDual", "Hoffman")
MAX_DOUBLINGS = 64
DIVERGENCE_NORM = 1e12


class HoffmanRunaway(RuntimeError):
    pass


@dataclass
class PgRpdConfig:
    """Solver settings.

    ``tau`` defaults to ``2 L_f`` in the theoretical modes and ``1.1 L_f``
    in the practical mode. ``stop_rule`` defaults to the splitting test
    (``"checkstop"``) in theoretical modes and to ``kkt_p <= eps`` in the
    practical mode.
    """

    eps: float = 1e-3
    sigma: float = 1.0
    tau: float | None = None
    delta: float | None = None
    schedule_mode: str = "Practical"
    dual_mode: str = "StrongDual"
    theta0: float | None = None
    max_outer: int = 100000
    max_grads: int = 10**7
    mu_decay: bool = False
    stationarity_form: str = "squared"
    practical_cycles: int = 20
    practical_steps: int | None = None
    inner_tol: float = 1e-4
    F_lower: float | None = None
    stop_rule: str | None = None
    descent_stop: bool = False
    kkt_every: int = 1
    kkt_active_tol: float | None = None
    record_iterates: bool = False

    def resolved(self, L_f):
        """Copy with data-dependent defaults filled in and validated."""
        cfg = dataclasses.replace(self)
        if cfg.schedule_mode not in SCHEDULE_MODES:
            raise ConfigurationError(f"schedule_mode must be one of {SCHEDULE_MODES}")
        if cfg.dual_mode not in DUAL_MODES:
            raise ConfigurationError(f"dual_mode must be one of {DUAL_MODES}")
        if cfg.tau is None:
            cfg.tau = (1.1 if cfg.schedule_mode == "Practical" else 2.0) * L_f
        if not cfg.tau > L_f:
            raise ConfigurationError("tau must exceed L_f")
        if not 0 < cfg.eps < 1:
            raise ConfigurationError("eps must lie in (0, 1)")
        if not cfg.sigma > 0:
            raise ConfigurationError("sigma must be positive")
        if cfg.schedule_mode == "TheoreticalP" and not (cfg.delta and cfg.delta > 0):
            raise ConfigurationError("TheoreticalP mode needs delta > 0")
        if cfg.dual_mode == "Hoffman" and not (cfg.theta0 and cfg.theta0 > 0):
            raise ConfigurationError("Hoffman mode needs theta0 > 0")
        if cfg.stationarity_form not in ("squared", "linear"):
            raise ConfigurationError("stationarity_form must be 'squared' or 'linear'")
        if cfg.stop_rule is None:
            cfg.stop_rule = "kkt_p" if cfg.schedule_mode == "Practical" else "checkstop"
        if cfg.stop_rule not in ("kkt_p", "checkstop", "none"):
            raise ConfigurationError("stop_rule must be 'kkt_p', 'checkstop' or 'none'")
        if cfg.max_grads < 0 or cfg.max_outer < 0:
            raise ConfigurationError("budgets must be nonnegative")
        if cfg.kkt_active_tol is None:
            cfg.kkt_active_tol = cfg.eps
        return cfg


@dataclass
class OuterState:
    k: int
    x: np.ndarray
    y: np.ndarray
    z: DualPoint
    grad: np.ndarray
    f0: float
    obj: float
    L_f: float
    mu_k: float = math.nan
    l_f_k: float = 0.0
    B1: float = 0.0
    B2: float = 0.0
    B3_k: float = 0.0
    B4_k: float = 0.0
    dx_norm: float = math.inf
    feas_y: float = 0.0
    feas_A: float = 0.0
    counter: OracleCounter = field(default_factory=OracleCounter)
    x_prev: np.ndarray | None = None
    grad_prev: np.ndarray | None = None
    schedule: RestartSchedule | None = None
    apg_info: object = None
    theta: float | None = None


def compute_B_constants(spectral, tau, sigma, l_g, l_f_k):
    nA_, nA, nS = spectral.norm_Abar, spectral.norm_A, spectral.norm_stack
    p = spectral.pinv_norm
    B1 = nA_ * nS / tau + 1.0 / sigma + (nA_ + nA) * nS / tau
    B2 = 1.0 + p * nS
    B3 = p * (l_f_k + nA_ * l_g)
    B4 = (l_f_k + nS * (l_g + B3)) / tau
    return B1, B2, B3, B4


def _safe_div(num, den):
    return math.inf if den == 0 else num / den


def _mu_terms(eps, B1, B2, B3_k, B4_k, L_f, tau, sigma, spectral, l_g):
    nA_, nS = spectral.norm_Abar, spectral.norm_stack
    return [
        _safe_div(eps, B1 * sigma),
        _safe_div(eps, B1),
        _safe_div(eps * eps, 12.0 * L_f * B1 * (B3_k + sigma * nA_ * B4_k + l_g)),
        math.sqrt(_safe_div(eps * eps, 12.0 * L_f * B1 * B2 * (1.0 + sigma * nA_ * nS / tau))),
    ]


def mu_tilde(eps, B1, B2, B3_k, B4_k, L_f, tau, sigma, spectral, l_g):
    """Largest inner accuracy allowed for an eps-KKT point of the split problem."""
    mu = min(_mu_terms(eps, B1, B2, B3_k, B4_k, L_f, tau, sigma, spectral, l_g))
    if not mu > 0:
        raise RuntimeError(f"nonpositive inner tolerance {mu}")
    return mu


def mu_bar(eps, delta, B1, B2, B3_k, B4_k, L_f, tau, sigma, spectral, l_g):
    """Inner accuracy for the (delta, eps) guarantee on the original problem."""
    if not delta > 0:
        raise ConfigurationError("delta must be positive")
    nS = spectral.norm_stack
    terms = _mu_terms(eps, B1, B2, B3_k, B4_k, L_f, tau, sigma, spectral, l_g)
    terms += [
        _safe_div(eps * eps, 480.0 * B1 * l_g * L_f),
        _safe_div(tau * delta, nS),
        _safe_div(eps, 6.0 * nS),
    ]
    mu = min(terms)
    if not mu > 0:
        raise RuntimeError(f"nonpositive inner tolerance {mu}")
    return mu


def outer_iteration_cap(L_f, delta_F, eps, mode="TheoreticalSP"):
    """``ceil(12 L_f dF / eps^2)`` (or ``120 L_f dF / eps^2`` for the P mode)."""
    c = 120.0 if mode == "TheoreticalP" else 12.0
    return max(1, math.ceil(c * L_f * max(delta_F, 0.0) / (eps * eps)))


def recover_primal(z, x_k, grad_k, tau, sigma, data, g, counter=None):
    """Primal pair from approximate multipliers ``z``."""
    x_next = x_k - (data.Abar.T @ z.z1 + data.A.T @ z.z2 + grad_k) / tau
    y_next = prox_g(g, 1.0 / sigma, z.z1 / sigma + data.Abar @ x_next + data.bbar,
                    counter)
    if counter is not None:
        counter.add(matvec_Abart=1, matvec_At=1, matvec_Abar=1)
    return Iterate(x_next, y_next)


def checkstop(dx_norm, feas_y, feas_A, L_f, eps, sigma, form="squared"):
    lhs = 3.0 * L_f * (dx_norm * dx_norm if form == "squared" else dx_norm)
    rhs = eps * eps if form == "squared" else eps
    return bool(lhs <= rhs and feas_y <= eps * min(1.0 / sigma, 1.0) and feas_A <= eps)


def check_stop_kkt(state, cfg):
    if state.k < 1:
        return False
    return checkstop(state.dx_norm, state.feas_y, state.feas_A, state.L_f,
                     cfg.eps, cfg.sigma, cfg.stationarity_form)


def check_stop_descent(trace, K, L_f, eps):
    """Averaged-descent test ``6 L_f (F_0 - F_K) / K <= eps^2 / 2``."""
    if K < 1:
        raise ValueError("K must be at least 1")
    F0 = trace[0].obj
    # the solver appends one record per k, so the last record is usually K
    FK = trace[-1].obj if trace[-1].k == K else next(r.obj for r in trace if r.k == K)
    return 6.0 * L_f * (F0 - FK) / K <= 0.5 * eps * eps


def initial_state(data, g, counter=None):
    """Feasible starting point with zero multipliers."""
    counter = counter if counter is not None else OracleCounter()
    x0, y0 = data.feasible_start()
    f, grad = eval_f0(data, x0, counter)
    return OuterState(
        k=0, x=x0, y=y0, z=DualPoint.zeros(data.nbar, data.n), grad=grad, f0=f,
        obj=f + g_value(g, y0), L_f=data.L_f,
        feas_y=float(np.linalg.norm(y0 - data.Abar @ x0 - data.bbar)),
        feas_A=float(np.linalg.norm(data.A @ x0 + data.b)),
        counter=counter,
    )


def _schedule(state, cfg, data, g, spectral, D, mu):
    tau = cfg.tau
    if cfg.schedule_mode == "Practical":
        j = cfg.practical_steps or max(1, math.ceil(2.0 * math.sqrt(2.0) * spectral.kappa_stack))
        return RestartSchedule("Fixed", j, cfg.practical_cycles)
    if cfg.dual_mode == "StrongDual":
        if not spectral.full_row_rank:
            raise ConfigurationError("StrongDual mode needs [Abar; A] of full row rank")
        xi = dual_subgradient_min_norm(D, g, state.z.stack())
        state.counter.dual_steps(1)
        return schedule_strong(spectral.kappa_stack, spectral.lam_min_plus / tau,
                               float(np.linalg.norm(xi)), mu)
    hc = compute_hoffman_constants(data, g, spectral, state.x, state.grad,
                                   state.l_f_k, state.z, tau)
    return schedule_hoffman(hc, state.theta, D.L_D, mu)


def pg_rpd_step(state, cfg, data, g, spectral, budget=None):
    """One outer iteration; returns the new state (the input is not modified)."""
    tau, sigma = cfg.tau, cfg.sigma
    counter = state.counter
    l_f_k = float(np.linalg.norm(state.grad))
    B1, B2, B3, B4 = compute_B_constants(spectral, tau, sigma, g.l_g, l_f_k)
    consts = (B1, B2, B3, B4, data.L_f, tau, sigma, spectral, g.l_g)
    if cfg.schedule_mode == "TheoreticalP":
        mu = mu_bar(cfg.eps, cfg.delta, *consts)
    else:
        mu = mu_tilde(cfg.eps, *consts)
    if cfg.mu_decay:
        mu /= (state.k + 1) ** 2
    state = dataclasses.replace(state, l_f_k=l_f_k, B1=B1, B2=B2, B3_k=B3, B4_k=B4)
    D = build_dual(data, g, spectral, state.x, state.grad, tau)
    try:
        sched = _schedule(state, cfg, data, g, spectral, D, mu)
        tol = cfg.inner_tol if cfg.schedule_mode == "Practical" else None
        z, info = restarted_apg(D, g, state.z, sched, counter, tol=tol,
                                budget=budget, return_info=True)
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        raise type(exc)(f"inner solve failed at k={state.k}, mu_k={mu:.3e}: {exc}") from exc
    it = recover_primal(z, state.x, state.grad, tau, sigma, data, g, counter)
    f, grad = eval_f0(data, it.x, counter)
    return dataclasses.replace(
        state,
        k=state.k + 1, x=it.x, y=it.y, z=z, grad=grad, f0=f,
        obj=f + g_value(g, it.y),
        mu_k=mu if cfg.schedule_mode != "Practical" else math.nan,
        dx_norm=float(np.linalg.norm(it.x - state.x)),
        feas_y=float(np.linalg.norm(it.y - data.Abar @ it.x - data.bbar)),
        feas_A=float(np.linalg.norm(data.A @ it.x + data.b)),
        x_prev=state.x, grad_prev=state.grad, schedule=sched, apg_info=info,
    )


def _record(state, data, g, cfg, t0, offset, with_kkt):
    sp = kkt_sp_residuals(state.x, state.y, state.z.z1, state.z.z2, data, g,
                          grad=state.grad)
    kp = math.nan
    if with_kkt and g.box() is not None:
        kp = kkt_p_residual(state.x, data, g, active_tol=cfg.kkt_active_tol,
                            grad=state.grad).value
    return TraceRecord(
        k=state.k,
        grad_evals=state.counter.grad_evals + offset,
        obj=state.obj,
        dx_norm=state.dx_norm if state.k > 0 else 0.0,
        feas_y=state.feas_y,
        feas_A=state.feas_A,
        kkt_sp_max=float(np.max(sp)),
        kkt_p=kp,
        mu_k=state.mu_k,
        wall_ms=1e3 * (time.perf_counter() - t0),
    )


def solve(data, g, cfg, theta=None, grad_offset=0):
    """Run the outer loop until a stopping test fires or a budget runs out.

    Parameters
    ----------
    theta : float, optional
        Hoffman estimate for the Hoffman restart schedule (defaults to
        ``cfg.theta0``).
    grad_offset : int
        Added to the ``grad_evals`` column (used when chaining restarts).
    """
    cfg = cfg.resolved(data.L_f)
    if cfg.stop_rule == "kkt_p" and g.box() is None:
        raise ConfigurationError("the kkt_p stop rule needs a box-representable g")
    spectral = compute_spectral(data)
    t0 = time.perf_counter()
    counter = OracleCounter()
    trace = Trace(cadence=cfg.kkt_every)
    x0, y0 = data.feasible_start()
    z0 = DualPoint.zeros(data.nbar, data.n)
    if cfg.max_grads == 0:
        return Solution(x_best=x0, y_best=y0, z_at_best=z0, k_best=0,
                        status=Status.MAX_GRADS, trace=trace, x=x0, y=y0, z=z0,
                        counter=counter)
    state = initial_state(data, g, counter)
    if np.linalg.norm(state.feas_A) > 1e-8 * (1 + np.linalg.norm(data.b)):
        raise ConfigurationError("could not construct a feasible initial point")
    state.theta = theta if theta is not None else cfg.theta0
    trace.append(_record(state, data, g, cfg, t0, grad_offset, True))

    max_outer = cfg.max_outer
    if cfg.schedule_mode != "Practical" and cfg.F_lower is not None:
        max_outer = min(max_outer, outer_iteration_cap(
            data.L_f, state.obj - cfg.F_lower, cfg.eps, cfg.schedule_mode))

    best = (math.inf, 0, state.x, state.y, state.z)
    iterates = []
    status = Status.MAX_OUTER
    while state.k < max_outer:
        budget = cfg.max_grads - counter.grad_evals
        if budget <= 0:
            status = Status.MAX_GRADS
            break
        prev = state
        # one gradient of f0 at the new point is reserved for recovery
        state = pg_rpd_step(state, cfg, data, g, spectral, budget=budget - 1)
        if (not (np.all(np.isfinite(state.x)) and np.isfinite(state.obj))
                or np.linalg.norm(state.x) > DIVERGENCE_NORM):
            status = Status.DIVERGED
            break
        with_kkt = cfg.stop_rule == "kkt_p" or state.k % cfg.kkt_every == 0
        rec = _record(state, data, g, cfg, t0, grad_offset, with_kkt)
        trace.append(rec)
        if cfg.record_iterates:
            iterates.append({
                "k": prev.k, "x_prev": prev.x, "grad_prev": prev.grad, "z_prev": prev.z,
                "x": state.x, "y": state.y, "z": state.z, "mu": state.mu_k,
                "B": (state.B1, state.B2, state.B3_k, state.B4_k),
                "obj_prev": prev.obj, "obj": state.obj, "dx": state.dx_norm,
                "feas_y": state.feas_y, "feas_A": state.feas_A,
                "schedule": state.schedule, "apg": state.apg_info,
            })
        if state.dx_norm < best[0]:
            best = (state.dx_norm, state.k - 1, state.x, state.y, state.z)
        if state.apg_info is not None and state.apg_info.budget_hit:
            status = Status.MAX_GRADS
            break
        if cfg.stop_rule == "checkstop" and check_stop_kkt(state, cfg):
            status = Status.CONVERGED
            break
        if cfg.stop_rule == "kkt_p" and rec.kkt_p <= cfg.eps:
            status = Status.CONVERGED
            break
        if cfg.descent_stop and check_stop_descent(trace, state.k, data.L_f, cfg.eps):
            status = Status.DESCENT_STOP
            break
        if counter.grad_evals >= cfg.max_grads:
            status = Status.MAX_GRADS
            break

    _, k_best, xb, yb, zb = best
    if status == Status.CONVERGED and cfg.stop_rule == "kkt_p":
        # the certified point is the last one
        k_best, xb, yb, zb = state.k - 1, state.x, state.y, state.z
    return Solution(
        x_best=xb, y_best=yb, z_at_best=zb, k_best=k_best, status=status,
        trace=trace, x=state.x, y=state.y, z=state.z, counter=counter,
        iterates=iterates, info={"spectral": spectral, "cfg": cfg},
    )


def adaptive_hoffman_solve(data, g, cfg):
    """Hoffman-mode solve that doubles the estimate after a descent stop.

    Every round restarts from the initial feasible point. The returned
    solution's ``doublings`` counts how often the estimate was doubled and
    its trace's ``grad_evals`` include the work of all earlier rounds.
    """
    cfg = dataclasses.replace(cfg, dual_mode="Hoffman", descent_stop=True)
    if cfg.stop_rule is None:
        cfg.stop_rule = "checkstop"
    theta = cfg.theta0
    if not (theta and theta > 0):
        raise ConfigurationError("adaptive Hoffman solve needs theta0 > 0")
    doublings = 0
    offset = 0
    total = OracleCounter()
    while True:
        sol = solve(data, g, cfg, theta=theta, grad_offset=offset)
        for name, v in sol.counter.snapshot().items():
            total.add(**{name: v})
        offset += sol.counter.grad_evals
        if sol.status != Status.DESCENT_STOP:
            break
        doublings += 1
        if doublings > MAX_DOUBLINGS:
            raise HoffmanRunaway("Hoffman estimate runaway")
        theta *= 2.0
        cfg = dataclasses.replace(cfg, max_grads=max(cfg.max_grads - sol.counter.grad_evals, 0))
    if sol.status == Status.CONVERGED and doublings:
        sol.status = Status.THETA_DOUBLED
    sol.doublings = doublings
    sol.counter = total
    sol.info["theta"] = theta
    return sol
