"""Small dense linear-algebra helpers."""

import numpy as np
from scipy.optimize import nnls

__all__ = ["project_polyhedron", "least_distance"]


def least_distance(G, h):
    """Minimum-norm ``w`` with ``G w >= h``.

    Lawson-Hanson reduction of least-distance programming to NNLS.

    Raises
    ------
    ValueError
        If the system is infeasible.
    """
    G = np.atleast_2d(np.asarray(G, dtype=np.float64))
    h = np.asarray(h, dtype=np.float64)
    m, N = G.shape
    if m == 0 or np.all(h <= 0):
        return np.zeros(N)
    E = np.vstack([G.T, h[None, :]])
    f = np.zeros(N + 1)
    f[-1] = 1.0
    u, _ = nnls(E, f, maxiter=50 * (m + N + 1))
    r = E @ u - f
    if abs(r[-1]) < 1e-14:
        raise ValueError("least-distance problem is infeasible")
    return -r[:N] / r[-1]


def project_polyhedron(v, C, dvec, eq=None, polish=True):
    """Euclidean projection of ``v`` onto ``{u : C u <= dvec, E u = e}``.

    Parameters
    ----------
    v : ndarray
    C : ndarray, shape (l, p)
    dvec : ndarray, shape (l,)
    eq : tuple of ndarray, optional
        ``(E, e)`` equality constraints.
    polish : bool
        Re-solve the equality-constrained projection on the detected active
        set, which tightens the NNLS answer to machine precision.
    """
    v = np.asarray(v, dtype=np.float64)
    C = np.atleast_2d(np.asarray(C, dtype=np.float64)).reshape(-1, v.size)
    dvec = np.asarray(dvec, dtype=np.float64)
    if eq is not None:
        E, e = (np.atleast_2d(np.asarray(eq[0], dtype=np.float64)).reshape(-1, v.size),
                np.asarray(eq[1], dtype=np.float64))
        Cfull = np.vstack([C, E, -E])
        dfull = np.concatenate([dvec, e, -e])
    else:
        E = e = None
        Cfull, dfull = C, dvec
    # w = u - v,  C w <= d - C v  <=>  (-C) w >= C v - d
    w = least_distance(-Cfull, Cfull @ v - dfull)
    u = v + w
    if not polish:
        return u
    scale = 1.0 + np.abs(dfull).max(initial=0.0) + np.abs(v).max(initial=0.0)
    act = C @ u - dvec >= -1e-9 * scale
    rows = [C[act]]
    rhs = [dvec[act]]
    if E is not None:
        rows.append(E)
        rhs.append(e)
    M = np.vstack(rows)
    if M.shape[0] == 0:
        return u
    # min ||u - v|| s.t. M u = rhs, via the minimum-norm correction
    corr = np.linalg.lstsq(M, np.concatenate(rhs) - M @ v, rcond=None)[0]
    cand = v + corr
    viol_new = max(np.max(C @ cand - dvec, initial=0.0), 0.0)
    viol_old = max(np.max(C @ u - dvec, initial=0.0), 0.0)
    if E is not None:
        viol_new = max(viol_new, np.abs(E @ cand - e).max(initial=0.0))
        viol_old = max(viol_old, np.abs(E @ u - e).max(initial=0.0))
    # cand projects v onto an affine superset of the face, so if it is
    # feasible it is the projection itself
    if viol_new <= max(viol_old, 1e-12 * scale) and (
        np.linalg.norm(cand - v) <= np.linalg.norm(u - v) + 1e-9 * scale
    ):
        return cand
    return u
