"""Instance generators: the Kronecker-difference hard family and random QPs."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import ortho_group

from .model import (
    ConfigurationError,
    L1Norm,
    ProblemData,
    QuadraticObjective,
    compute_spectral,
)

__all__ = [
    "HardInstanceParams",
    "RandomQpParams",
    "build_J",
    "hard_index_set",
    "build_hard_instance",
    "gen_random_qp",
    "spectral_check",
    "hard_lam_min_formula",
    "weakly_convex_quadratic",
]

MAX_DIM = 10**6


@dataclass(frozen=True)
class HardInstanceParams:
    m1: int = 2
    m2: int = 3
    dbar: int = 5
    L_f: float = 1.0
    beta: float = 1.0
    rho_f: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.m1 < 2 or self.m2 < 2 or self.dbar < 2:
            raise ConfigurationError("m1, m2 and dbar must all be at least 2")
        if not (self.L_f > 0 and self.beta > 0 and self.rho_f > 0):
            raise ConfigurationError("L_f, beta and rho_f must be positive")
        if self.rho_f >= self.L_f:
            raise ConfigurationError("rho_f must be smaller than L_f")

    @property
    def m(self):
        return self.m1 * self.m2

    @property
    def d(self):
        return self.m * self.dbar

    @property
    def n(self):
        return (self.m - self.m2) * self.dbar

    @property
    def nbar(self):
        return (self.m2 - 1) * self.dbar


@dataclass(frozen=True)
class RandomQpParams:
    d: int = 100
    kappa: float = 10.0
    rho: float = 0.1
    seed: int = 0
    exact_kappa: bool = True
    beta: float = 1.0

    def __post_init__(self):
        if self.d < 10 or self.d % 10:
            raise ConfigurationError("d must be a positive multiple of 10")
        if not self.kappa >= 1:
            raise ConfigurationError("kappa must be at least 1")
        if not self.rho > 0:
            raise ConfigurationError("rho must be positive")

    @property
    def L_f(self):
        return 10.0 * self.rho

    @property
    def nbar(self):
        return self.d // 2

    @property
    def n(self):
        return 2 * self.d // 5


def build_J(p):
    """``(p-1) x p`` forward-difference matrix."""
    if p < 2:
        raise ConfigurationError("p must be at least 2")
    J = np.zeros((p - 1, p))
    idx = np.arange(p - 1)
    J[idx, idx] = -1.0
    J[idx, idx + 1] = 1.0
    return J


def hard_index_set(m1, m2):
    """1-based block-row indices ``{i m1 : i = 1, ..., m2 - 1}``."""
    return [i * m1 for i in range(1, m2)]


def weakly_convex_quadratic(d, L_f, rho, rng):
    """``Q = R diag((L_f - rho) u) R' - rho I`` with ``u ~ U(0, 1)``."""
    R = ortho_group.rvs(d, random_state=rng) if d > 1 else np.ones((1, 1))
    lam = (L_f - rho) * rng.uniform(0.0, 1.0, d)
    Q = (R * lam) @ R.T - rho * np.eye(d)
    return 0.5 * (Q + Q.T)


def build_hard_instance(params):
    """Hard instance and its l1 term.

    Block rows of ``m L_f (J_m kron I_dbar)`` indexed by the set ``M`` form
    ``Abar`` and the remaining block rows form ``A``; ``b = bbar = 0``.
    """
    p = params
    if p.d > MAX_DIM:
        raise ConfigurationError(f"d = {p.d} exceeds {MAX_DIM}")
    H = p.m * p.L_f * np.kron(build_J(p.m), np.eye(p.dbar))
    M = set(hard_index_set(p.m1, p.m2))
    blocks_bar = [i - 1 for i in range(1, p.m) if i in M]
    blocks = [i - 1 for i in range(1, p.m) if i not in M]

    def rows(bl):
        return np.concatenate([np.arange(b * p.dbar, (b + 1) * p.dbar) for b in bl])

    Abar = H[rows(blocks_bar)]
    A = H[rows(blocks)]
    rng = np.random.default_rng(p.seed)
    Q = weakly_convex_quadratic(p.d, p.L_f, p.rho_f, rng)
    data = ProblemData(
        A=A, b=np.zeros(A.shape[0]), Abar=Abar, bbar=np.zeros(Abar.shape[0]),
        f0=QuadraticObjective(Q), L_f=p.L_f, rho_wc=p.rho_f,
    )
    return data, L1Norm(p.beta, Abar.shape[0])


def gen_random_qp(params):
    """Random weakly convex QP with a prescribed condition number of ``[Abar; A]``."""
    p = params
    rng = np.random.default_rng(p.seed)
    d, nb, n = p.d, p.nbar, p.n
    r = nb + n
    U = ortho_group.rvs(r, random_state=rng)
    V = rng.standard_normal((d, r))
    if p.exact_kappa:
        V, _ = np.linalg.qr(V)
    s = np.linspace(1.0, 1.0 / p.kappa, r)
    S = (U * s) @ V.T
    Q = weakly_convex_quadratic(d, p.L_f, p.rho, rng)
    bbar = rng.standard_normal(nb)
    b = rng.standard_normal(n)
    data = ProblemData(
        A=S[nb:], b=b, Abar=S[:nb], bbar=bbar,
        f0=QuadraticObjective(Q), L_f=p.L_f, rho_wc=p.rho,
    )
    return data, L1Norm(p.beta, nb)


def hard_lam_min_formula(m1, m2, L_f):
    """Closed-form smallest positive eigenvalue ``4 m^2 L_f^2 sin^2(pi / (2 m1))``."""
    m = m1 * m2
    return 4.0 * m * m * L_f * L_f * math.sin(math.pi / (2 * m1)) ** 2


def spectral_check(data, hard=None):
    """Measured spectral quantities; for hard instances also the bracket flags.

    Parameters
    ----------
    hard : HardInstanceParams, optional
    """
    sp = compute_spectral(data)
    eA = np.linalg.eigvalsh(data.A @ data.A.T)
    pos = eA[eA > 1e-12 * eA[-1]]
    report = {
        "kappa": sp.kappa_stack,
        "lam_min_plus_stack": sp.lam_min_plus,
        "lam_max_stack": sp.lam_max,
        "lam_min_plus_AAt": float(pos[0]),
        "sigma_max_A": sp.norm_A,
        "full_row_rank": sp.full_row_rank,
    }
    if hard is not None:
        m = hard.m
        report["m"] = m
        report["kappa_lower"] = m / 4.0
        report["kappa_upper"] = float(m)
        report["kappa_in_bracket"] = bool(m / 4.0 <= sp.kappa_stack < m)
        report["lam_min_formula"] = hard_lam_min_formula(hard.m1, hard.m2, hard.L_f)
    return report
