import numpy as np
import pytest

from pgrpd import L1Norm, PolyhedralSupport, ProblemData, QuadraticObjective


def make_t1(Q=None, beta=1.0):
    """d=2 fixture with orthonormal rows: Abar = [0 1], A = [1 0]."""
    Q = np.eye(2) if Q is None else np.asarray(Q, dtype=float)
    data = ProblemData(
        A=np.array([[1.0, 0.0]]), b=np.zeros(1),
        Abar=np.array([[0.0, 1.0]]), bbar=np.zeros(1),
        f0=QuadraticObjective(Q), L_f=float(max(np.abs(np.linalg.eigvalsh(Q)).max(), 1e-3)),
    )
    return data, L1Norm(beta, 1)


def make_small(d=6, n=2, nbar=3, seed=0, L_f=1.0, rho=0.2, bbar_scale=1.0, beta=1.0):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, d))
    Abar = rng.standard_normal((nbar, d))
    lam = rng.uniform(-rho, L_f, d)
    R, _ = np.linalg.qr(rng.standard_normal((d, d)))
    Q = (R * lam) @ R.T
    data = ProblemData(
        A=A, b=rng.standard_normal(n), Abar=Abar, bbar=bbar_scale * rng.standard_normal(nbar),
        f0=QuadraticObjective(Q), L_f=L_f, rho_wc=rho,
    )
    return data, L1Norm(beta, nbar)


def make_poly():
    """Tiny homogeneous instance with a non-box polyhedral g."""
    C = np.array([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [1.0, -1.0]])
    g = PolyhedralSupport(C, np.array([1.0, 1.0, 1.0, 1.5]))
    data = ProblemData(
        A=np.array([[0.0, 0.0, 1.0, 0.0]]), b=np.zeros(1),
        Abar=np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 1.0]]), bbar=np.zeros(2),
        f0=QuadraticObjective(np.diag([1.0, 0.5, -0.2, 0.8]), np.array([3.0, -2.0, 1.0, 1.0])),
        L_f=1.0, rho_wc=0.2,
    )
    return data, g


@pytest.fixture
def t1():
    return make_t1()


@pytest.fixture
def small():
    return make_small()
