"""Linearized ADMM and proximal ALM on the splitting problem.

Both use the augmented Lagrangian::

    f0(x) + g(y) + l1'(Abar x + bbar - y) + l2'(A x + b)
        + (beta/2) (||Abar x + bbar - y||^2 + ||A x + b||^2)

so that at a KKT point ``l1`` lies in ``dg(y)`` and
``grad f0(x) + Abar'l1 + A'l2 = 0``, the same sign convention as the
multipliers produced by PG-RPD.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .kkt import kkt_p_residual, kkt_sp_residuals
from .model import ConfigurationError, DualPoint, OracleCounter, eval_f0, g_value, prox_g
from .trace import Solution, Status, Trace, TraceRecord

__all__ = [
    "AdmmConfig",
    "PalmConfig",
    "admm_solve",
    "palm_solve",
    "palm_inner_hessian",
]

DIVERGENCE_NORM = 1e12


@dataclass
class AdmmConfig:
    """Linearized ADMM settings.

    ``x_step="apg"`` minimizes the x-subproblem with ``f0`` linearized at the
    current point (accelerated gradient, stopped at ``inner_tol``);
    ``"linearized"`` takes the single linearized proximal step instead.
    """

    theta: float = 1.0
    beta_pen: float = 1.0
    tau: float | None = None
    max_grads: int = 10**7
    max_iter: int = 10**7
    eps: float = 1e-3
    x_step: str = "apg"
    inner_tol: float = 1e-4
    inner_max: int = 10000
    kkt_every: int = 10
    kkt_active_tol: float | None = None

    def resolved(self, L_f):
        cfg = AdmmConfig(**self.__dict__)
        if cfg.tau is None:
            cfg.tau = 1.1 * L_f
        if not 0 < cfg.theta < 2:
            raise ConfigurationError("theta must lie in (0, 2)")
        if not cfg.beta_pen > 0:
            raise ConfigurationError("beta_pen must be positive")
        if not cfg.tau > L_f:
            raise ConfigurationError("tau must exceed L_f")
        if cfg.x_step not in ("apg", "linearized"):
            raise ConfigurationError("x_step must be 'apg' or 'linearized'")
        if cfg.kkt_active_tol is None:
            cfg.kkt_active_tol = cfg.eps
        return cfg


@dataclass
class PalmConfig:
    """Proximal ALM settings.

    The subproblem adds ``(prox_weight / (2 c)) ||(x, y) - (x_k, y_k)||^2``;
    the default weight 2 keeps it strongly convex at ``c = 1/rho``. The
    penalty defaults to ``10 rho``.
    """

    c: float | None = None
    prox_weight: float = 2.0
    penalty: float | None = None
    inner_tol: float = 1e-4
    inner_max: int = 20000
    max_grads: int = 10**7
    max_outer: int = 10**6
    eps: float = 1e-3
    kkt_every: int = 1
    kkt_active_tol: float | None = None

    def resolved(self, rho):
        cfg = PalmConfig(**self.__dict__)
        if cfg.c is None:
            if not (rho and rho > 0):
                raise ConfigurationError("c defaults to 1/rho, which needs rho > 0")
            cfg.c = 1.0 / rho
        if cfg.penalty is None:
            if not (rho and rho > 0):
                raise ConfigurationError("penalty defaults to 10 rho, which needs rho > 0")
            cfg.penalty = 10.0 * rho
        if not cfg.c > 0 or not cfg.penalty > 0:
            raise ConfigurationError("c and penalty must be positive")
        if not cfg.prox_weight > 0:
            raise ConfigurationError("prox_weight must be positive")
        if cfg.kkt_active_tol is None:
            cfg.kkt_active_tol = cfg.eps
        return cfg


def _make_record(k, counter, obj, dx, data, g, x, y, l1, l2, grad, kkt, t0,
                 active_tol):
    sp = kkt_sp_residuals(x, y, l1, l2, data, g, grad=grad)
    kp = math.nan
    if kkt and g.box() is not None:
        kp = kkt_p_residual(x, data, g, active_tol=active_tol, grad=grad).value
    return TraceRecord(
        k=k, grad_evals=counter.grad_evals, obj=obj, dx_norm=dx,
        feas_y=float(sp[2]), feas_A=float(sp[3]), kkt_sp_max=float(sp.max()),
        kkt_p=kp, mu_k=math.nan, wall_ms=1e3 * (time.perf_counter() - t0),
    )


def _admm_x_apg(data, x_k, grad_k, y, l1, l2, cfg, counter, L, mu, budget):
    """Minimize the x-subproblem with ``f0`` replaced by its linearization."""
    tau, beta = cfg.tau, cfg.beta_pen
    lin = grad_k - tau * x_k + data.Abar.T @ l1 + data.A.T @ l2

    def grad(x):
        ry = data.Abar @ x + data.bbar - y
        ra = data.A @ x + data.b
        return lin + tau * x + beta * (data.Abar.T @ ry + data.A.T @ ra)

    q = math.sqrt(mu / L)
    mom = (1.0 - q) / (1.0 + q)
    x = x_k.copy()
    xh = x
    steps = 0
    while steps < min(cfg.inner_max, budget):
        gr = grad(xh)
        counter.add(grad_evals=1, matvec_A=1, matvec_At=1, matvec_Abar=1, matvec_Abart=1)
        steps += 1
        x_new = xh - gr / L
        if np.linalg.norm(gr) <= cfg.inner_tol:
            x = x_new
            break
        xh = x_new + mom * (x_new - x)
        x = x_new
    return x, steps


def admm_solve(data, g, cfg, x0=None, y0=None, l0=None, max_iter=None):
    """Linearized ADMM; the returned trace samples ``kkt_p`` every ``kkt_every``."""
    cfg = cfg.resolved(data.L_f)
    t0 = time.perf_counter()
    counter = OracleCounter()
    trace = Trace(cadence=cfg.kkt_every)
    if x0 is None:
        x0, y0 = data.feasible_start()
    x = np.array(x0, dtype=np.float64)
    y = np.array(y0 if y0 is not None else data.Abar @ x + data.bbar, dtype=np.float64)
    if l0 is None:
        l1, l2 = np.zeros(data.nbar), np.zeros(data.n)
    else:
        l1, l2 = (np.array(v, dtype=np.float64) for v in l0)
    beta, theta, tau = cfg.beta_pen, cfg.theta, cfg.tau
    if cfg.max_grads == 0:
        z = DualPoint(l1, l2)
        return Solution(x, y, z, 0, Status.MAX_GRADS, trace, x=x, y=y, z=z, counter=counter)
    f, grad = eval_f0(data, x, counter)
    trace.append(_make_record(0, counter, f + g_value(g, y), 0.0, data, g, x, y, l1, l2,
                              grad, True, t0, cfg.kkt_active_tol))
    normS2 = float(np.linalg.norm(data.stacked, 2) ** 2)
    L_x = tau + beta * normS2
    mu_x = tau
    status = Status.MAX_GRADS
    best = (math.inf, 0, x, y, DualPoint(l1.copy(), l2.copy()))
    n_iter = max_iter if max_iter is not None else cfg.max_iter
    k = 0
    while k < n_iter:
        # y-step, then x-step, then relaxed multiplier ascent
        y = prox_g(g, 1.0 / beta, data.Abar @ x + data.bbar + l1 / beta, counter)
        budget = cfg.max_grads - counter.grad_evals - 1
        if budget <= 0:
            status = Status.MAX_GRADS
            break
        if cfg.x_step == "apg":
            x_new, _ = _admm_x_apg(data, x, grad, y, l1, l2, cfg, counter, L_x, mu_x, budget)
        else:
            ry = data.Abar @ x + data.bbar - y
            ra = data.A @ x + data.b
            x_new = x - (grad + data.Abar.T @ (l1 + beta * ry)
                         + data.A.T @ (l2 + beta * ra)) / tau
            counter.add(matvec_A=1, matvec_At=1, matvec_Abar=1, matvec_Abart=1)
        dx = float(np.linalg.norm(x_new - x))
        x = x_new
        l1 = l1 + theta * beta * (data.Abar @ x + data.bbar - y)
        l2 = l2 + theta * beta * (data.A @ x + data.b)
        k += 1
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE_NORM:
            status = Status.DIVERGED
            break
        f, grad = eval_f0(data, x, counter)
        if dx < best[0]:
            best = (dx, k - 1, x, y, DualPoint(l1.copy(), l2.copy()))
        if k % cfg.kkt_every == 0:
            rec = _make_record(k, counter, f + g_value(g, y), dx, data, g, x, y, l1, l2,
                               grad, True, t0, cfg.kkt_active_tol)
            trace.append(rec)
            if rec.kkt_p <= cfg.eps:
                status = Status.CONVERGED
                best = (dx, k - 1, x, y, DualPoint(l1.copy(), l2.copy()))
                break
        if counter.grad_evals >= cfg.max_grads:
            status = Status.MAX_GRADS
            break
    else:
        status = Status.MAX_OUTER
    _, kb, xb, yb, zb = best
    return Solution(xb, yb, zb, kb, status, trace, x=x, y=y, z=DualPoint(l1, l2),
                    counter=counter)


def palm_inner_hessian(Q, data, c, prox_weight=2.0):
    """Hessian in ``(x, y)`` of the proximal-ALM subproblem for quadratic ``f0``."""
    p = 1.0 / c
    w = prox_weight * p
    d, nb = data.d, data.nbar
    Hxx = Q + w * np.eye(d) + p * (data.Abar.T @ data.Abar + data.A.T @ data.A)
    Hxy = -p * data.Abar.T
    Hyy = (w + p) * np.eye(nb)
    return np.block([[Hxx, Hxy], [Hxy.T, Hyy]])


def palm_solve(data, g, cfg, x0=None, y0=None):
    """Proximal method of multipliers with an inner restarted FISTA."""
    cfg = cfg.resolved(data.rho_wc)
    t0 = time.perf_counter()
    counter = OracleCounter()
    trace = Trace(cadence=cfg.kkt_every)
    if x0 is None:
        x0, y0 = data.feasible_start()
    x = np.array(x0, dtype=np.float64)
    y = np.array(y0 if y0 is not None else data.Abar @ x + data.bbar, dtype=np.float64)
    l1, l2 = np.zeros(data.nbar), np.zeros(data.n)
    if cfg.max_grads == 0:
        z = DualPoint(l1, l2)
        return Solution(x, y, z, 0, Status.MAX_GRADS, trace, x=x, y=y, z=z, counter=counter)
    p = cfg.penalty
    w = cfg.prox_weight / cfg.c
    nb = data.nbar
    # Lipschitz constant of the smooth part in (x, y)
    M = np.block([[data.Abar, -np.eye(nb)], [data.A, np.zeros((data.n, nb))]])
    L_in = data.L_f + w + p * float(np.linalg.norm(M, 2) ** 2)
    f, grad = eval_f0(data, x, counter)
    trace.append(_make_record(0, counter, f + g_value(g, y), 0.0, data, g, x, y, l1, l2,
                              grad, True, t0, cfg.kkt_active_tol))
    status = Status.MAX_OUTER
    best = (math.inf, 0, x, y, DualPoint(l1.copy(), l2.copy()))
    k = 0
    while k < cfg.max_outer:
        xk, yk = x, y

        def smooth_grad(u, v, gf):
            ry = data.Abar @ u + data.bbar - v
            ra = data.A @ u + data.b
            wy = l1 + p * ry
            wa = l2 + p * ra
            gx = gf + data.Abar.T @ wy + data.A.T @ wa + w * (u - xk)
            gy = -wy + w * (v - yk)
            return gx, gy

        u, v = x.copy(), y.copy()
        uh, vh = u, v
        t = 1.0
        converged_inner = False
        steps = 0
        while steps < cfg.inner_max:
            if counter.grad_evals >= cfg.max_grads:
                break
            _, gf = eval_f0(data, uh, counter)
            gx, gy = smooth_grad(uh, vh, gf)
            steps += 1
            u_new = uh - gx / L_in
            v_new = prox_g(g, 1.0 / L_in, vh - gy / L_in, counter)
            gm = L_in * math.sqrt(float(np.sum((uh - u_new) ** 2) + np.sum((vh - v_new) ** 2)))
            if gm <= cfg.inner_tol:
                u, v = u_new, v_new
                converged_inner = True
                break
            # gradient-based adaptive restart
            if (float((uh - u_new) @ (u_new - u)) + float((vh - v_new) @ (v_new - v))) > 0:
                t = 1.0
                uh, vh = u_new, v_new
            else:
                t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
                mom = (t - 1.0) / t_new
                uh = u_new + mom * (u_new - u)
                vh = v_new + mom * (v_new - v)
                t = t_new
            u, v = u_new, v_new
        dx = float(np.linalg.norm(u - x))
        x, y = u, v
        l1 = l1 + p * (data.Abar @ x + data.bbar - y)
        l2 = l2 + p * (data.A @ x + data.b)
        k += 1
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE_NORM:
            status = Status.DIVERGED
            break
        f, grad = eval_f0(data, x, counter)
        if dx < best[0]:
            best = (dx, k - 1, x, y, DualPoint(l1.copy(), l2.copy()))
        with_kkt = k % cfg.kkt_every == 0
        rec = _make_record(k, counter, f + g_value(g, y), dx, data, g, x, y, l1, l2,
                           grad, with_kkt, t0, cfg.kkt_active_tol)
        trace.append(rec)
        if with_kkt and rec.kkt_p <= cfg.eps:
            status = Status.CONVERGED
            best = (dx, k - 1, x, y, DualPoint(l1.copy(), l2.copy()))
            break
        if counter.grad_evals >= cfg.max_grads or not converged_inner:
            status = Status.MAX_GRADS
            break
    _, kb, xb, yb, zb = best
    return Solution(xb, yb, zb, kb, status, trace, x=x, y=y, z=DualPoint(l1, l2),
                    counter=counter)
