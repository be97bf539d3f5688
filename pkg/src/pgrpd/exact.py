"""Brute-force oracles for tiny instances.

These are deliberately independent of the iterative solvers: the dual
optimum is found by enumerating which coordinates of ``z1`` sit at the lower
bound, the upper bound or strictly inside the box, and the Hoffman constant
by enumerating linearly independent row subsets.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .linalg import project_polyhedron

__all__ = [
    "EnumerationTooLarge",
    "exact_dual_box",
    "dual_solution_set",
    "project_onto_solution_set",
    "hoffman_constant",
    "exact_subproblem",
    "MAX_ENUM",
]

MAX_ENUM = 12


class EnumerationTooLarge(RuntimeError):
    """The instance is too large for exhaustive enumeration."""


def _box_of(g):
    box = g.box()
    if box is None:
        raise EnumerationTooLarge("sign-pattern enumeration needs a box-type g")
    return box


def exact_dual_box(D, g, tol=1e-9):
    """Exact minimizer and value of the negative dual for box-type ``g``.

    Returns
    -------
    z : ndarray
        One minimizer (the minimum-norm solution on the optimal face).
    value : float
    """
    nb = D.nbar
    N = D.c.size
    if N > MAX_ENUM:
        raise EnumerationTooLarge(f"{N} dual variables exceed the limit {MAX_ENUM}")
    lo, hi = _box_of(g)
    H, c = D.H, D.c
    scale = 1.0 + np.abs(c).max() + np.abs(H).max()
    best = None
    for pattern in itertools.product((0, -1, 1), repeat=nb):
        pattern = np.array(pattern, dtype=int)
        fixed = np.zeros(N, dtype=bool)
        fixed[:nb] = pattern != 0
        z = np.zeros(N)
        z[:nb] = np.where(pattern < 0, lo, np.where(pattern > 0, hi, 0.0))
        free = ~fixed
        if np.any(free):
            rhs = -(c[free] + H[np.ix_(free, fixed)] @ z[fixed])
            Hff = H[np.ix_(free, free)]
            sol = np.linalg.lstsq(Hff, rhs, rcond=None)[0]
            if np.linalg.norm(Hff @ sol - rhs) > tol * scale:
                continue
            z[free] = sol
        grad = H @ z + c
        z1 = z[:nb]
        g1 = grad[:nb]
        inside = pattern == 0
        if np.any(z1[inside] < lo[inside] - tol) or np.any(z1[inside] > hi[inside] + tol):
            continue
        if np.any(g1[pattern < 0] < -tol * scale) or np.any(g1[pattern > 0] > tol * scale):
            continue
        val = 0.5 * float(z @ H @ z) + float(c @ z)
        if best is None or val < best[1] - 1e-14 * (1 + abs(val)):
            best = (z, val)
    if best is None:
        raise RuntimeError("no KKT pattern found; tolerance too tight")
    # exact value including the constant dropped from the quadratic form
    z = best[0]
    return z, D.smooth_value_flat(z)


def dual_solution_set(D, g, z_star=None):
    """Describe ``Omega`` as ``{z : S'z = t, bs'z = s, z1 in P}``.

    Returns a dict with the equality data and the common vector ``nu``.
    """
    if z_star is None:
        z_star, _ = exact_dual_box(D, g)
    S = D.data.stacked
    t = S.T @ z_star
    return {
        "z_star": z_star,
        "E": np.vstack([S.T, D.data.stacked_rhs[None, :]]),
        "e": np.concatenate([t, [float(D.data.stacked_rhs @ z_star)]]),
        "nu": t + D.shift_w,
    }


def _conj_rows(g, nb, N):
    """Inequality rows ``C z1 <= d`` of ``dom(g*)`` embedded in the ``z`` space."""
    box = g.box()
    if box is not None:
        lo, hi = box
        eye = np.eye(nb)
        C = np.vstack([eye, -eye])
        d = np.concatenate([hi, -lo])
    else:
        C, d = g.C, g.dvec
    Cz = np.zeros((C.shape[0], N))
    Cz[:, :nb] = C
    return Cz, d


def project_onto_solution_set(D, g, z, omega=None):
    """Euclidean projection of ``z`` onto the dual solution set."""
    if omega is None:
        omega = dual_solution_set(D, g)
    nb = D.nbar
    N = D.c.size
    H = D.H
    if np.linalg.matrix_rank(H) == N:
        return omega["z_star"].copy()
    Cz, d = _conj_rows(g, nb, N)
    return project_polyhedron(np.asarray(z, dtype=np.float64), Cz, d,
                              eq=(omega["E"], omega["e"]))


def hoffman_constant(data, g, include_rhs_row=None, max_rows=16):
    """Hoffman constant of the dual solution-set system by enumeration.

    The system is ``S'z = t``, optionally ``bs'z = s``, and ``C z1 <= d``.
    Every equality is split into two opposite inequalities, and the value
    ``max 1/sigma_min(M_J)`` over linearly independent row subsets ``J`` of
    the stacked rows is returned; it is a valid Hoffman constant for the
    Euclidean residual.
    """
    nb, n = data.nbar, data.n
    N = nb + n
    if include_rhs_row is None:
        include_rhs_row = not data.homogeneous
    Cz, _ = _conj_rows(g, nb, N)
    rows = [data.stacked.T]
    if include_rhs_row:
        rows.append(data.stacked_rhs[None, :])
    rows.append(Cz)
    M = np.vstack(rows)
    # opposite rows give the same sigma_min, so one copy of each suffices;
    # also collapse parallel duplicates
    uniq = []
    for r in M:
        nr = np.linalg.norm(r)
        if nr == 0:
            continue
        u = r / nr
        if not any(abs(abs(u @ v) - 1.0) < 1e-12 for v, _ in uniq):
            uniq.append((u, r))
    R = np.array([r for _, r in uniq])
    if R.shape[0] > max_rows:
        raise EnumerationTooLarge(f"{R.shape[0]} rows exceed the limit {max_rows}")
    best = 0.0
    rank = np.linalg.matrix_rank(R)
    for size in range(1, rank + 1):
        for J in itertools.combinations(range(R.shape[0]), size):
            s = np.linalg.svd(R[list(J)], compute_uv=False)
            if s[-1] <= 1e-10 * s[0]:
                continue
            best = max(best, 1.0 / s[-1])
    return best


def exact_subproblem(data, g, x_k, grad_k, tau, sigma):
    """Exact subproblem solution recovered from the exact dual optimum.

    Returns ``(x_bar, y_bar, z_bar, D_star)``.
    """
    from .dualsolve import build_dual  # local import keeps this module light
    from .model import compute_spectral

    spec = compute_spectral(data)
    D = build_dual(data, g, spec, x_k, grad_k, tau)
    z, val = exact_dual_box(D, g)
    nb = data.nbar
    x_bar = x_k - (data.stacked.T @ z + grad_k) / tau
    y_bar = g.prox(1.0 / sigma, z[:nb] / sigma + data.Abar @ x_bar + data.bbar)
    return x_bar, y_bar, z, val


def count_patterns(nbar):
    return int(math.pow(3, nbar))
