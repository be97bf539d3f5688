"""Problem data, the nonsmooth term ``g`` and its prox calculus, oracle counting.

The composite problem handled throughout the package is::

    min_x  f0(x) + g(Abar x + bbar)   s.t.  A x + b = 0

and its splitting form with ``y = Abar x + bbar``. ``g`` is always a support
function of a bounded polytope (the l1 norm being the main case), so its
conjugate is the indicator of that polytope.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.optimize import linprog, nnls

from .linalg import project_polyhedron

__all__ = [
    "ConfigurationError",
    "RankDeficientError",
    "ProxUnavailableError",
    "QuadraticObjective",
    "ProblemData",
    "GSpec",
    "L1Norm",
    "PolyhedralSupport",
    "OracleCounter",
    "Iterate",
    "DualPoint",
    "SpectralProfile",
    "eval_f0",
    "g_value",
    "prox_g",
    "prox_g_conj",
    "moreau_prox_conj",
    "compute_spectral",
]

RANK_RTOL = 1e-10


class ConfigurationError(ValueError):
    """Inconsistent dimensions or invalid parameters."""


class RankDeficientError(ValueError):
    """``A`` does not have full row rank."""

    def __init__(self, smallest_singular_value, largest_singular_value):
        self.smallest_singular_value = float(smallest_singular_value)
        self.largest_singular_value = float(largest_singular_value)
        super().__init__(
            f"A is rank deficient: smallest singular value "
            f"{self.smallest_singular_value:.3e} <= {RANK_RTOL:g} * "
            f"{self.largest_singular_value:.3e}"
        )


class ProxUnavailableError(RuntimeError):
    pass


def _frozen_array(a, ndim):
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        if ndim == 2 and arr.ndim == 1 and arr.size == 0:
            arr = arr.reshape(0, 0)
        else:
            raise ConfigurationError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


class QuadraticObjective:
    """``f0(x) = 0.5 x'Qx + c'x`` returning ``(value, gradient)``."""

    def __init__(self, Q, c=None):
        Q = np.array(Q, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ConfigurationError("Q must be square")
        Q = 0.5 * (Q + Q.T)
        Q.setflags(write=False)
        self.Q = Q
        if c is not None:
            c = np.array(c, dtype=np.float64)
            if c.shape != (Q.shape[0],):
                raise ConfigurationError("linear term has the wrong length")
            c.setflags(write=False)
        self.c = c

    def __call__(self, x):
        Qx = self.Q @ x
        if self.c is None:
            return 0.5 * float(x @ Qx), Qx
        return 0.5 * float(x @ Qx) + float(self.c @ x), Qx + self.c

    @property
    def dim(self):
        return self.Q.shape[0]

    def lipschitz(self):
        """Spectral norm of ``Q``."""
        return float(np.max(np.abs(np.linalg.eigvalsh(self.Q))))

    def weak_convexity(self):
        return max(0.0, -float(np.linalg.eigvalsh(self.Q)[0]))


@dataclass(frozen=True, eq=False)
class ProblemData:
    """An instance of the linearly constrained composite problem.

    ``f0`` is a black box returning ``(value, gradient)``; ``L_f`` is the
    Lipschitz constant of its gradient. ``A`` must have full row rank.
    """

    A: np.ndarray
    b: np.ndarray
    Abar: np.ndarray
    bbar: np.ndarray
    f0: Callable[[np.ndarray], tuple]
    L_f: float
    rho_wc: float | None = None

    def __post_init__(self):
        A = _frozen_array(self.A, 2)
        Abar = _frozen_array(self.Abar, 2)
        b = _frozen_array(self.b, 1)
        bbar = _frozen_array(self.bbar, 1)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Abar", Abar)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "bbar", bbar)
        if A.shape[1] != Abar.shape[1]:
            raise ConfigurationError(
                f"A has {A.shape[1]} columns but Abar has {Abar.shape[1]}"
            )
        if b.shape != (A.shape[0],):
            raise ConfigurationError(f"b has shape {b.shape}, expected ({A.shape[0]},)")
        if bbar.shape != (Abar.shape[0],):
            raise ConfigurationError(
                f"bbar has shape {bbar.shape}, expected ({Abar.shape[0]},)"
            )
        if not (np.isfinite(self.L_f) and self.L_f > 0):
            raise ConfigurationError("L_f must be positive")
        object.__setattr__(self, "L_f", float(self.L_f))
        if A.shape[0] == 0:
            raise ConfigurationError("A must have at least one row")
        s = np.linalg.svd(A, compute_uv=False)
        if s[-1] <= RANK_RTOL * s[0] or A.shape[0] > A.shape[1]:
            raise RankDeficientError(s[-1] if A.shape[0] <= A.shape[1] else 0.0, s[0])

    @property
    def d(self):
        return self.A.shape[1]

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def nbar(self):
        return self.Abar.shape[0]

    @cached_property
    def stacked(self):
        """``[Abar; A]``."""
        S = np.vstack([self.Abar, self.A])
        S.setflags(write=False)
        return S

    @cached_property
    def stacked_rhs(self):
        """``[bbar; b]``."""
        bs = np.concatenate([self.bbar, self.b])
        bs.setflags(write=False)
        return bs

    @cached_property
    def gram(self):
        G = self.stacked @ self.stacked.T
        G.setflags(write=False)
        return G

    @cached_property
    def range_basis_At(self):
        """Orthonormal basis (d x n) of the row space of ``A``."""
        Q, _ = np.linalg.qr(self.A.T)
        Q.setflags(write=False)
        return Q

    @property
    def homogeneous(self):
        return not (np.any(self.b) or np.any(self.bbar))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def feasible_start(self):
        """Least-norm solution of ``Ax = -b`` and the matching ``y``."""
        x0 = -np.linalg.lstsq(self.A, self.b, rcond=None)[0]
        y0 = self.Abar @ x0 + self.bbar
        return x0, y0


class GSpec:
    """Support function of a bounded polytope, ``g(y) = max{u'y : u in P}``.

    Subclasses provide projection onto ``P = dom(g*)``; everything else in
    the prox calculus follows from it.
    """

    dim: int

    @property
    def l_g(self) -> float:
        raise NotImplementedError

    def value(self, y):
        raise NotImplementedError

    def project_conj(self, v):
        """Euclidean projection onto ``dom(g*)``."""
        raise NotImplementedError

    def box(self):
        """``(lo, hi)`` if ``dom(g*)`` is an axis-aligned box, else ``None``."""
        return None

    def prox(self, eta, v):
        """Minimizer of ``g(w) + ||w - v||^2 / (2 eta)``."""
        v = np.asarray(v, dtype=np.float64)
        return v - eta * self.project_conj(v / eta)

    def prox_conj(self, eta, v):
        # g* is an indicator, so the step size drops out.
        return self.project_conj(np.asarray(v, dtype=np.float64))

    def conj_violation(self, z):
        """Amount by which ``z`` leaves ``dom(g*)`` (0 inside)."""
        raise NotImplementedError

    def in_conj_domain(self, z, tol=1e-12):
        return self.conj_violation(z) <= tol

    def normal_cone_min_norm(self, z, v):
        """Smallest-norm element of ``v + N_P(z)``."""
        raise NotImplementedError

    def subdiff_dist(self, y, z1):
        """``dist(z1, dg(y))`` (``dg(y)`` is the face of ``P`` maximizing ``u'y``)."""
        raise NotImplementedError


def _box_normal_min_norm(z, v, lo, hi, tol):
    out = np.array(v, dtype=np.float64, copy=True)
    at_hi = z >= hi - tol
    at_lo = z <= lo + tol
    out[at_hi] = np.maximum(out[at_hi], 0.0)
    out[at_lo & ~at_hi] = np.minimum(out[at_lo & ~at_hi], 0.0)
    # degenerate box (lo == hi): the normal cone is the whole line
    out[at_lo & at_hi & (hi - lo <= tol)] = 0.0
    return out


def _box_subdiff_dist(y, z1, lo, hi):
    target_lo = np.where(y > 0, hi, np.where(y < 0, lo, lo))
    target_hi = np.where(y > 0, hi, np.where(y < 0, lo, hi))
    below = np.maximum(target_lo - z1, 0.0)
    above = np.maximum(z1 - target_hi, 0.0)
    return below + above


@dataclass(frozen=True)
class L1Norm(GSpec):
    """``g(y) = beta * ||y||_1`` on ``R^dim``."""

    beta: float
    dim: int

    def __post_init__(self):
        if not self.beta > 0:
            raise ConfigurationError("beta must be positive")
        if self.dim < 1:
            raise ConfigurationError("dim must be positive")

    @property
    def l_g(self):
        # Euclidean Lipschitz constant: max ||u||_2 over the box [-beta, beta]^dim
        return self.beta * np.sqrt(self.dim)

    def value(self, y):
        return self.beta * float(np.sum(np.abs(y)))

    def prox(self, eta, v):
        v = np.asarray(v, dtype=np.float64)
        return np.sign(v) * np.maximum(np.abs(v) - eta * self.beta, 0.0)

    def project_conj(self, v):
        return np.clip(v, -self.beta, self.beta)

    def box(self):
        return np.full(self.dim, -self.beta), np.full(self.dim, self.beta)

    def conj_violation(self, z):
        return float(np.max(np.abs(z), initial=0.0) - self.beta) if len(z) else 0.0

    def in_conj_domain(self, z, tol=1e-12):
        return bool(np.all(np.abs(z) <= self.beta + tol))

    def normal_cone_min_norm(self, z, v, tol=0.0):
        lo, hi = self.box()
        return _box_normal_min_norm(np.asarray(z), v, lo, hi, tol)

    def subdiff_dist(self, y, z1):
        lo, hi = self.box()
        return _box_subdiff_dist(np.asarray(y), np.asarray(z1), lo, hi)

    def as_polyhedral(self):
        eye = np.eye(self.dim)
        return PolyhedralSupport(
            C=np.vstack([eye, -eye]), dvec=np.full(2 * self.dim, self.beta)
        )


@dataclass(frozen=True, eq=False)
class PolyhedralSupport(GSpec):
    """``g(y) = max{u'y : C u <= dvec}`` with a nonempty bounded polytope.

    ``projector`` optionally replaces the built-in projection onto the
    polytope. ``l_g`` defaults to the norm of the polytope's bounding box,
    which upper-bounds ``max ||u||`` over the polytope.
    """

    C: np.ndarray
    dvec: np.ndarray
    projector: Callable | None = None
    lipschitz: float | None = None
    _bounds: tuple = field(init=False, repr=False)

    def __post_init__(self):
        C = _frozen_array(self.C, 2)
        dvec = _frozen_array(self.dvec, 1)
        if C.shape[0] != dvec.shape[0]:
            raise ConfigurationError("C and dvec have inconsistent lengths")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "dvec", dvec)
        lo = np.empty(C.shape[1])
        hi = np.empty(C.shape[1])
        for i in range(C.shape[1]):
            e = np.zeros(C.shape[1])
            e[i] = 1.0
            for sign, out in ((1.0, lo), (-1.0, hi)):
                res = linprog(sign * e, A_ub=C, b_ub=dvec, bounds=(None, None),
                              method="highs")
                if res.status == 2:
                    raise ConfigurationError("polytope {u : Cu <= d} is empty")
                if res.status == 3:
                    raise ConfigurationError("polytope {u : Cu <= d} is unbounded")
                if res.status != 0:
                    raise ConfigurationError(f"LP failed while bounding polytope: {res.message}")
                out[i] = res.x[i]
        object.__setattr__(self, "_bounds", (lo, hi))

    @property
    def dim(self):
        return self.C.shape[1]

    @property
    def l_g(self):
        if self.lipschitz is not None:
            return float(self.lipschitz)
        lo, hi = self._bounds
        return float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))

    @cached_property
    def _box_rows(self):
        """Bounds if every row of C is a signed coordinate vector, else None."""
        C = self.C
        nnz = np.count_nonzero(C, axis=1)
        if np.any(nnz != 1):
            return None
        lo = np.full(self.dim, -np.inf)
        hi = np.full(self.dim, np.inf)
        for row, rhs in zip(C, self.dvec):
            j = int(np.flatnonzero(row)[0])
            if row[j] > 0:
                hi[j] = min(hi[j], rhs / row[j])
            else:
                lo[j] = max(lo[j], rhs / row[j])
        return lo, hi

    def box(self):
        return self._box_rows

    def value(self, y):
        y = np.asarray(y, dtype=np.float64)
        box = self._box_rows
        if box is not None:
            lo, hi = box
            return float(np.sum(np.where(y > 0, hi * y, lo * y)))
        res = linprog(-y, A_ub=self.C, b_ub=self.dvec, bounds=(None, None),
                      method="highs")
        return float(-res.fun)

    def project_conj(self, v):
        v = np.asarray(v, dtype=np.float64)
        if self.projector is not None:
            try:
                u = np.asarray(self.projector(v), dtype=np.float64)
            except Exception as exc:
                raise ProxUnavailableError("prox unavailable") from exc
            if u.shape != v.shape or not np.all(np.isfinite(u)):
                raise ProxUnavailableError("prox unavailable")
            return u
        box = self._box_rows
        if box is not None:
            return np.clip(v, *box)
        try:
            u = project_polyhedron(v, self.C, self.dvec)
        except (RuntimeError, ValueError) as exc:
            raise ProxUnavailableError("prox unavailable") from exc
        if self.conj_violation(u) > 1e-9 * (1.0 + np.abs(self.dvec).max()):
            raise ProxUnavailableError("prox unavailable")
        return u

    def conj_violation(self, z):
        return float(max(np.max(self.C @ z - self.dvec), 0.0))

    def normal_cone_min_norm(self, z, v, tol=1e-10):
        box = self._box_rows
        if box is not None:
            return _box_normal_min_norm(np.asarray(z), v, *box, tol)
        active = self.C @ z - self.dvec >= -tol * (1.0 + np.abs(self.dvec))
        if not np.any(active):
            return np.array(v, dtype=np.float64)
        # min || v + C_a' lam ||, lam >= 0
        lam, _ = nnls(self.C[active].T, -np.asarray(v, dtype=np.float64))
        return v + self.C[active].T @ lam

    def subdiff_dist(self, y, z1):
        y = np.asarray(y, dtype=np.float64)
        box = self._box_rows
        if box is not None:
            return _box_subdiff_dist(y, np.asarray(z1), *box)
        gmax = self.value(y)
        # face {u in P : u'y >= g(y)}
        C = np.vstack([self.C, -y[None, :]])
        dv = np.concatenate([self.dvec, [-gmax + 1e-12 * (1 + abs(gmax))]])
        u = project_polyhedron(np.asarray(z1, dtype=np.float64), C, dv)
        return np.abs(np.asarray(z1) - u)


@dataclass
class OracleCounter:
    """Per-solve oracle tallies. ``grad_evals`` is the unified Grad metric."""

    grad_f0: int = 0
    matvec_A: int = 0
    matvec_At: int = 0
    matvec_Abar: int = 0
    matvec_Abart: int = 0
    prox_g: int = 0
    prox_gstar: int = 0
    grad_evals: int = 0

    def add(self, **counts):
        for name, k in counts.items():
            if k < 0:
                raise ValueError("counters are monotone")
            setattr(self, name, getattr(self, name) + int(k))

    def dual_steps(self, k=1):
        """Record ``k`` dual-gradient passes (one stacked matvec pair each)."""
        self.add(grad_evals=k, matvec_A=k, matvec_At=k, matvec_Abar=k, matvec_Abart=k)

    def reset(self):
        for f in dataclasses.fields(self):
            setattr(self, f.name, 0)

    def snapshot(self):
        return dataclasses.asdict(self)


@dataclass
class Iterate:
    x: np.ndarray
    y: np.ndarray


@dataclass
class DualPoint:
    z1: np.ndarray
    z2: np.ndarray

    def stack(self):
        return np.concatenate([self.z1, self.z2])

    @classmethod
    def from_stack(cls, z, nbar):
        z = np.asarray(z, dtype=np.float64)
        return cls(z[:nbar].copy(), z[nbar:].copy())

    @classmethod
    def zeros(cls, nbar, n):
        return cls(np.zeros(nbar), np.zeros(n))


@dataclass(frozen=True)
class SpectralProfile:
    """Norms and eigenvalues of ``[Abar; A]`` and ``A`` used by the solvers."""

    norm_Abar: float
    norm_A: float
    norm_stack: float
    lam_max: float
    lam_min_plus: float
    kappa_stack: float
    pinv_norm: float
    sigma_min_A: float
    cross_norm: float
    rank_stack: int
    full_row_rank: bool


def eval_f0(data, x, counter=None):
    """Evaluate ``f0`` and its gradient, counting one gradient oracle call."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (data.d,):
        raise ConfigurationError(f"x has shape {x.shape}, expected ({data.d},)")
    val, grad = data.f0(x)
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != (data.d,):
        raise ConfigurationError("f0 returned a gradient of the wrong length")
    if counter is not None:
        counter.add(grad_f0=1, grad_evals=1)
    return float(val), grad


def g_value(g, y):
    return g.value(np.asarray(y, dtype=np.float64))


def prox_g(g, eta, v, counter=None):
    if not eta > 0:
        raise ConfigurationError("eta must be positive")
    out = g.prox(eta, np.asarray(v, dtype=np.float64))
    if counter is not None:
        counter.add(prox_g=1)
    return out


def prox_g_conj(g, eta, v, counter=None):
    """Prox of ``eta * g*``; always lands in ``dom(g*)``."""
    if not eta > 0:
        raise ConfigurationError("eta must be positive")
    out = g.prox_conj(eta, np.asarray(v, dtype=np.float64))
    if counter is not None:
        counter.add(prox_gstar=1)
    return out


def moreau_prox_conj(g, eta, v):
    """``prox_{eta g*}(v)`` via the Moreau identity ``v - eta prox_{g/eta}(v/eta)``."""
    v = np.asarray(v, dtype=np.float64)
    return v - eta * g.prox(1.0 / eta, v / eta)


def compute_spectral(data):
    S = data.stacked
    s = np.linalg.svd(S, compute_uv=False)
    tol = max(S.shape) * np.finfo(float).eps * s[0]
    pos = s[s > tol]
    lam_max = float(s[0] ** 2)
    lam_min_plus = float(pos[-1] ** 2)
    sA = np.linalg.svd(data.A, compute_uv=False)
    if sA[-1] <= RANK_RTOL * sA[0]:
        raise RankDeficientError(sA[-1], sA[0])
    norm_Abar = float(np.linalg.norm(data.Abar, 2)) if data.nbar else 0.0
    # (AA')^{-1} A Abar' = (Abar A^+)'
    pinvA = np.linalg.pinv(data.A)
    cross = float(np.linalg.norm(data.Abar @ pinvA, 2)) if data.nbar else 0.0
    return SpectralProfile(
        norm_Abar=norm_Abar,
        norm_A=float(sA[0]),
        norm_stack=float(s[0]),
        lam_max=lam_max,
        lam_min_plus=lam_min_plus,
        kappa_stack=float(np.sqrt(lam_max / lam_min_plus)),
        pinv_norm=float(1.0 / sA[-1]),
        sigma_min_A=float(sA[-1]),
        cross_norm=cross,
        rank_stack=int(pos.size),
        full_row_rank=bool(pos.size == S.shape[0]),
    )
