"""KKT residuals for the original and the splitting problem."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import lsq_linear

from .model import ConfigurationError, eval_f0

__all__ = [
    "KktReport",
    "kkt_sp_residuals",
    "kkt_p_residual",
    "default_active_tol",
    "delta_close_check",
]


@dataclass(frozen=True)
class KktReport:
    stat_P: float
    feas_P: float
    sp_residuals: np.ndarray | None = None
    inner_tol: float = 0.0

    @property
    def value(self):
        """``max(stat_P, feas_P)``, the scalar plotted as ``kkt_p``."""
        return max(self.stat_P, self.feas_P)


def kkt_sp_residuals(x, y, z1, z2, data, g, grad=None):
    """The four residuals of the splitting problem with multipliers ``(z1, z2)``.

    Returns
    -------
    ndarray, shape (4,)
        ``dist(0, dg(y) - z1)``, ``||grad f0(x) + Abar'z1 + A'z2||``,
        ``||y - Abar x - bbar||`` and ``||Ax + b||``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z1 = np.asarray(z1, dtype=np.float64)
    z2 = np.asarray(z2, dtype=np.float64)
    if grad is None:
        _, grad = eval_f0(data, x)
    r1 = float(np.linalg.norm(g.subdiff_dist(y, z1)))
    r2 = float(np.linalg.norm(grad + data.Abar.T @ z1 + data.A.T @ z2))
    r3 = float(np.linalg.norm(y - data.Abar @ x - data.bbar))
    r4 = float(np.linalg.norm(data.A @ x + data.b))
    return np.array([r1, r2, r3, r4])


def default_active_tol(u):
    return 1e-7 * (1.0 + float(np.max(np.abs(u), initial=0.0)))


def _null_projector(data):
    """Apply ``I - Q Q'`` with ``Q`` an orthonormal basis of ``range(A')``."""
    Q = data.range_basis_At

    def proj(M):
        return M - Q @ (Q.T @ M)

    return proj


def _box_ls_gap(M, q, xi, lo, hi):
    """Frank-Wolfe gap of ``0.5||M xi + q||^2`` over the box at ``xi``."""
    grad = M.T @ (M @ xi + q)
    vertex = np.where(grad > 0, lo, hi)
    return max(float(grad @ (xi - vertex)), 0.0)


def _box_ls_apg(M, q, xi, lo, hi, iters=5000):
    """Projected accelerated gradient polish for the box least squares."""
    L = float(np.linalg.norm(M, 2) ** 2)
    if L == 0:
        return xi
    z = xi.copy()
    y = xi.copy()
    t = 1.0
    for _ in range(iters):
        z_new = np.clip(y - M.T @ (M @ y + q) / L, lo, hi)
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        y = z_new + ((t - 1) / t_new) * (z_new - z)
        z, t = z_new, t_new
    return z


def kkt_p_residual(x, data, g, active_tol=None, inner_tol=1e-10, grad=None,
                   gamma=None):
    """Stationarity and feasibility of ``x`` for the original problem.

    The stationarity measure is the minimum of
    ``||grad f0(x) + A'gamma + Abar'xi||`` over ``gamma`` and over ``xi`` in
    the subdifferential of ``g`` at ``Abar x + bbar``, where coordinates with
    ``|(Abar x + bbar)_i| <= active_tol`` are treated as zero.

    Parameters
    ----------
    active_tol : float, optional
        Activity threshold; defaults to ``1e-7 (1 + ||Abar x + bbar||_inf)``.
    inner_tol : float
        Required certified accuracy of the inner box least squares.
    gamma : ndarray, optional
        Fix the equality multiplier instead of minimizing over it.
    """
    box = g.box()
    if box is None:
        raise ConfigurationError("kkt_p_residual needs a box-representable g")
    lo, hi = box
    x = np.asarray(x, dtype=np.float64)
    if grad is None:
        _, grad = eval_f0(data, x)
    u = data.Abar @ x + data.bbar
    if active_tol is None:
        active_tol = default_active_tol(u)
    feas = float(np.linalg.norm(data.A @ x + data.b))
    free = np.abs(u) <= active_tol
    xi_fixed = np.where(u > 0, hi, lo)
    v = grad + data.Abar[~free].T @ xi_fixed[~free]
    if gamma is None:
        proj = _null_projector(data)
        q = proj(v)
        M = proj(data.Abar[free].T)
    else:
        q = v + data.A.T @ np.asarray(gamma, dtype=np.float64)
        M = data.Abar[free].T
    if not np.any(free):
        return KktReport(stat_P=float(np.linalg.norm(q)), feas_P=feas, inner_tol=0.0)
    lf, hf = lo[free], hi[free]
    res = lsq_linear(M, -q, bounds=(lf, hf), method="bvls", tol=1e-14)
    xi = np.clip(res.x, lf, hf)
    gap = _box_ls_gap(M, q, xi, lf, hf)
    if gap > 0.5 * inner_tol ** 2:
        xi2 = _box_ls_apg(M, q, xi, lf, hf)
        gap2 = _box_ls_gap(M, q, xi2, lf, hf)
        if gap2 < gap:
            xi, gap = xi2, gap2
    r = float(np.linalg.norm(M @ xi + q))
    # f - f* <= gap with f = r^2/2 bounds r - r* by both expressions below
    cert = math.sqrt(2.0 * gap)
    if r > 0:
        cert = min(cert, 2.0 * gap / r)
    if cert > inner_tol:
        cert = math.inf
    return KktReport(stat_P=r, feas_P=feas, inner_tol=cert)


def delta_close_check(x, x_k_prev, grad_prev, data, g, tau, sigma, delta, eps,
                      active_tol=None):
    """Check that ``x`` is ``delta``-close to a point that is ``eps``-KKT.

    The reference point is the exact proximal-subproblem solution at
    ``x_k_prev``, recovered from the enumerated dual optimum. Returns
    ``(ok, info)``; raises :class:`~pgrpd.exact.EnumerationTooLarge` when the
    instance is too big for enumeration.
    """
    from .exact import exact_subproblem

    x_bar, _, z_bar, _ = exact_subproblem(data, g, np.asarray(x_k_prev),
                                          np.asarray(grad_prev), tau, sigma)
    dist = float(np.linalg.norm(np.asarray(x) - x_bar))
    rep = kkt_p_residual(x_bar, data, g, active_tol=active_tol)
    ok = dist <= delta and rep.value <= eps
    return ok, {"dist": dist, "kkt_p": rep.value, "x_bar": x_bar, "report": rep}
