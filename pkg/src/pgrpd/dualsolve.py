"""Negative Lagrangian dual of the proximal subproblem and its restarted APG.

For the current outer iterate ``x_k`` the subproblem multipliers minimize::

    D(z) = ||S'z + w||^2 / (2 tau) + g*(z1) - z1'bbar - z2'b

with ``S = [Abar; A]`` and ``w = grad f0(x_k) - tau x_k``. The smooth part
has an ``L_D = lam_max(S S') / tau`` Lipschitz gradient and ``g*`` is the
indicator of a polytope, so a projected accelerated method applies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ConfigurationError, DualPoint

__all__ = [
    "DualObjective",
    "RestartSchedule",
    "HoffmanConstants",
    "ApgState",
    "ApgInfo",
    "build_dual",
    "dual_smooth_grad",
    "dual_value",
    "dual_subgradient_min_norm",
    "prox_grad_mapping",
    "apg_cycle",
    "restarted_apg",
    "schedule_strong",
    "schedule_hoffman",
    "compute_hoffman_constants",
    "next_alpha",
]


@dataclass(frozen=True, eq=False)
class DualObjective:
    data: object
    g: object
    tau: float
    shift_w: np.ndarray
    L_D: float
    # gradient of the smooth part is  H z + c  with  H = S S'/tau, c = S w/tau - bs
    H: np.ndarray = field(repr=False)
    c: np.ndarray = field(repr=False)

    @property
    def nbar(self):
        return self.data.nbar

    def smooth_grad_flat(self, z):
        return self.H @ z + self.c

    def smooth_value_flat(self, z):
        s = self.data.stacked.T @ z + self.shift_w
        return float(s @ s) / (2.0 * self.tau) - float(self.data.stacked_rhs @ z)


@dataclass(frozen=True)
class RestartSchedule:
    mode: str
    j_k: int
    i_k: int
    theta: float | None = None

    def __post_init__(self):
        if self.mode not in ("StrongDual", "Hoffman", "Fixed"):
            raise ConfigurationError(f"unknown restart mode {self.mode!r}")
        if self.j_k < 1 or self.i_k < 1:
            raise ConfigurationError("restart schedule needs j_k >= 1 and i_k >= 1")

    @property
    def total_steps(self):
        return self.i_k * self.j_k


@dataclass(frozen=True)
class HoffmanConstants:
    B_rho: float
    B_D: float
    B_z: float
    homogeneous: bool


@dataclass
class ApgState:
    z: np.ndarray
    z_hat: np.ndarray
    alpha: float = 1.0


@dataclass
class ApgInfo:
    steps: int = 0
    cycles: int = 0
    mapping_norm: float = math.inf
    early_exit: bool = False
    budget_hit: bool = False


def next_alpha(alpha):
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * alpha * alpha))


def build_dual(data, g, spectral, x_k, grad_k, tau):
    """Negative dual ``D_k`` for the outer iterate ``x_k``."""
    if not tau > 0:
        raise ConfigurationError("tau must be positive")
    x_k = np.asarray(x_k, dtype=np.float64)
    w = np.asarray(grad_k, dtype=np.float64) - tau * x_k
    w.setflags(write=False)
    S = data.stacked
    H = data.gram / tau
    c = S @ w / tau - data.stacked_rhs
    return DualObjective(
        data=data, g=g, tau=float(tau), shift_w=w,
        L_D=spectral.lam_max / tau, H=H, c=c,
    )


def _count_dual_grad(counter, k=1):
    if counter is not None and k:
        counter.dual_steps(k)


def dual_smooth_grad(D, z, counter=None):
    """Gradient of the smooth part of ``D`` at ``z``, split as ``(g1, g2)``."""
    zf = z.stack() if isinstance(z, DualPoint) else np.asarray(z, dtype=np.float64)
    s = D.data.stacked.T @ zf + D.shift_w
    g1 = D.data.Abar @ s / D.tau - D.data.bbar
    g2 = D.data.A @ s / D.tau - D.data.b
    _count_dual_grad(counter)
    return g1, g2


def dual_value(D, g, z, tol=1e-12):
    """``D(z)``, or ``+inf`` when ``z1`` leaves ``dom(g*)``."""
    zf = z.stack() if isinstance(z, DualPoint) else np.asarray(z, dtype=np.float64)
    if not g.in_conj_domain(zf[: D.nbar], tol):
        return math.inf
    # g* vanishes on its domain for support functions
    return D.smooth_value_flat(zf)


def _project_flat(g, z, nbar):
    out = np.array(z, dtype=np.float64, copy=True)
    out[:nbar] = g.project_conj(z[:nbar])
    return out


def prox_grad_mapping(D, g, z, grad=None):
    """Norm of ``L_D (z - P(z - grad/L_D))``, a stationarity measure for ``D``."""
    zf = z.stack() if isinstance(z, DualPoint) else np.asarray(z, dtype=np.float64)
    if grad is None:
        grad = D.smooth_grad_flat(zf)
    L = D.L_D
    return float(np.linalg.norm(L * (zf - _project_flat(g, zf - grad / L, D.nbar))))


def dual_subgradient_min_norm(D, g, z):
    """Minimal-norm element of ``dD(z)`` (smooth gradient plus normal cone)."""
    zf = z.stack() if isinstance(z, DualPoint) else np.asarray(z, dtype=np.float64)
    grad = D.smooth_grad_flat(zf)
    nb = D.nbar
    xi = grad.copy()
    xi[:nb] = g.normal_cone_min_norm(zf[:nb], grad[:nb])
    return xi


def _run_apg(D, g, z0, j_steps, i_cycles, counter, tol=None, budget=None,
             on_cycle=None, on_step=None):
    """Restarted APG on flat vectors. Returns ``(z, ApgInfo)``."""
    nb = D.nbar
    L = D.L_D
    H, c = D.H, D.c
    z = _project_flat(g, np.asarray(z0, dtype=np.float64), nb)
    info = ApgInfo()
    if budget is not None and budget <= 0:
        info.budget_hit = True
        return z, info
    G = H @ z + c
    _count_dual_grad(counter)
    used = 1
    for cyc in range(i_cycles):
        # restart: alpha <- 1, z_hat <- z
        alpha = 1.0
        z_hat, G_hat = z, G
        for _ in range(j_steps):
            if budget is not None and used >= budget:
                info.budget_hit = True
                info.cycles = cyc
                return z, info
            z_new = _project_flat(g, z_hat - G_hat / L, nb)
            G_new = H @ z_new + c
            _count_dual_grad(counter)
            used += 1
            info.steps += 1
            alpha_new = next_alpha(alpha)
            beta = (alpha - 1.0) / alpha_new
            z_hat = z_new + beta * (z_new - z)
            # the smooth gradient is affine, so extrapolate it too
            G_hat = G_new + beta * (G_new - G)
            z, G, alpha = z_new, G_new, alpha_new
            if on_step is not None:
                on_step(z)
            if tol is not None:
                m = prox_grad_mapping(D, g, z, G)
                info.mapping_norm = m
                if m <= tol:
                    info.early_exit = True
                    info.cycles = cyc + 1
                    if on_cycle is not None:
                        on_cycle(cyc, z)
                    return z, info
        if on_cycle is not None:
            on_cycle(cyc, z)
    info.cycles = i_cycles
    if tol is None:
        info.mapping_norm = prox_grad_mapping(D, g, z, G)
    return z, info


def apg_cycle(D, g, z0, j_steps, counter=None):
    """One APG cycle of ``j_steps`` steps from ``z0`` with fresh momentum."""
    if int(j_steps) < 1:
        raise ConfigurationError("j_steps must be at least 1")
    z, _ = _run_apg(D, g, z0.stack(), int(j_steps), 1, counter)
    return DualPoint.from_stack(z, D.nbar)


def restarted_apg(D, g, z_ini, sched, counter=None, tol=None, budget=None,
                  on_cycle=None, on_step=None, return_info=False):
    """Restarted APG: ``i_k`` cycles of ``j_k`` steps, restarting momentum.

    Parameters
    ----------
    tol : float, optional
        Stop as soon as the prox-gradient mapping norm drops below ``tol``.
    budget : int, optional
        Cap on dual gradient evaluations (including the initial one).
    on_cycle, on_step : callable, optional
        Called with ``(cycle_index, z)`` after each cycle and ``z`` after
        each step (flat vectors).
    """
    z, info = _run_apg(D, g, z_ini.stack(), sched.j_k, sched.i_k, counter,
                       tol=tol, budget=budget, on_cycle=on_cycle, on_step=on_step)
    out = DualPoint.from_stack(z, D.nbar)
    return (out, info) if return_info else out


def _ceil_log2(arg):
    if not arg > 0:
        return 1
    return max(1, math.ceil(math.log2(arg)))


def schedule_strong(kappa_stack, kappa_D, xi_norm, mu_k):
    """Restart schedule when ``D`` is ``kappa_D``-strongly convex."""
    if not mu_k > 0:
        raise ConfigurationError("mu_k must be positive")
    if not kappa_D > 0:
        raise ConfigurationError("kappa_D must be positive")
    j = max(1, math.ceil(2.0 * math.sqrt(2.0) * kappa_stack))
    i = _ceil_log2(xi_norm * xi_norm / (kappa_D * kappa_D * mu_k * mu_k))
    return RestartSchedule("StrongDual", j, i)


def schedule_hoffman(hc, theta, L_D, mu_k):
    """Restart schedule from the computable Hoffman bounds."""
    if not mu_k > 0:
        raise ConfigurationError("mu_k must be positive")
    if not theta > 0:
        raise ConfigurationError("theta must be positive")
    r = hc.B_rho * theta * theta
    j = max(1, math.ceil(2.0 * math.sqrt(2.0 * r * L_D)))
    i = _ceil_log2(2.0 * r * hc.B_D / (mu_k * mu_k))
    return RestartSchedule("Hoffman", j, i, theta=float(theta))


def compute_hoffman_constants(data, g, spectral, x_k, grad_k, l_f_k, z_ini, tau):
    x_k = np.asarray(x_k, dtype=np.float64)
    l_g = g.l_g
    xnorm = float(np.linalg.norm(x_k))
    AAt = data.A @ data.A.T
    sol_b = np.linalg.solve(AAt, data.b)
    B_z = (l_g * spectral.cross_norm + (l_f_k + tau * xnorm) * spectral.pinv_norm
           + tau * float(np.linalg.norm(sol_b)))
    zf = z_ini.stack() if isinstance(z_ini, DualPoint) else np.asarray(z_ini)
    zn = float(np.linalg.norm(zf))
    ns = spectral.norm_stack
    D_hat = (ns * ns * zn / tau + ns * (l_f_k + tau * xnorm) / tau
             + float(np.linalg.norm(data.stacked_rhs)))
    # xi in dg*(z_ini) is taken as 0, which is always admissible on dom(g*)
    B_D = D_hat * (zn + l_g + B_z)
    homogeneous = data.homogeneous
    if homogeneous:
        B_rho = float(tau)
    else:
        B_rho = tau + B_D + 4.0 * tau * (ns * ns * (l_g + B_z) ** 2
                                         + (l_f_k + tau * xnorm) ** 2)
    return HoffmanConstants(B_rho=float(B_rho), B_D=float(B_D), B_z=float(B_z),
                            homogeneous=homogeneous)
