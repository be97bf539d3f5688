import numpy as np
import pytest

from pgrpd import (
    ConfigurationError,
    L1Norm,
    ProblemData,
    QuadraticObjective,
    gen_random_qp,
    kkt_p_residual,
    kkt_sp_residuals,
)
from pgrpd.baselines import (
    AdmmConfig,
    PalmConfig,
    admm_solve,
    palm_inner_hessian,
    palm_solve,
)
from pgrpd.instances import RandomQpParams
from pgrpd.trace import Status

from conftest import make_small


def _t1(c):
    data = ProblemData(A=np.array([[1.0, 0.0]]), b=np.zeros(1), Abar=np.array([[0.0, 1.0]]),
                       bbar=np.zeros(1), f0=QuadraticObjective(np.eye(2), c), L_f=1.0)
    return data, L1Norm(1.0, 1)


@pytest.mark.parametrize("x_step", ["apg", "linearized"])
def test_admm_fixed_point_at_kkt(x_step):
    c = np.array([0.7, -0.4])
    data, g = _t1(c)
    # x = y = 0 with l1 = -c[1] in [-1, 1], l2 = -c[0]
    l0 = (np.array([-c[1]]), np.array([-c[0]]))
    for it in range(1, 11):
        sol = admm_solve(data, g, AdmmConfig(x_step=x_step, kkt_every=1), x0=np.zeros(2),
                         y0=np.zeros(1), l0=l0, max_iter=it)
        r = kkt_sp_residuals(sol.x, sol.y, sol.z.z1, sol.z.z2, data, g)
        assert r.max() <= 1e-8


def test_admm_one_linearized_iteration_by_hand():
    c = np.array([1.0, 0.5])
    data, g = _t1(c)
    sol = admm_solve(data, g, AdmmConfig(x_step="linearized"), x0=np.zeros(2),
                     y0=np.zeros(1), max_iter=1)
    # y = soft(0, 1) = 0; x = -(grad)/tau with grad = c, tau = 1.1
    x1 = -c / 1.1
    np.testing.assert_allclose(sol.x, x1, atol=1e-12)
    np.testing.assert_allclose(sol.y, [0.0], atol=1e-12)
    np.testing.assert_allclose(sol.z.z1, [x1[1]], atol=1e-12)
    np.testing.assert_allclose(sol.z.z2, [x1[0]], atol=1e-12)


def test_admm_multiplier_recursion():
    data, g = make_small(seed=1)
    prev = None
    for it in range(1, 6):
        sol = admm_solve(data, g, AdmmConfig(x_step="linearized", kkt_every=1), max_iter=it)
        assert np.all(np.isfinite(sol.z.z1)) and np.all(np.isfinite(sol.z.z2))
        if prev is not None:
            r3 = data.Abar @ sol.x + data.bbar - sol.y
            r4 = data.A @ sol.x + data.b
            np.testing.assert_allclose(sol.z.z1 - prev.z1, r3, atol=1e-10)
            np.testing.assert_allclose(sol.z.z2 - prev.z2, r4, atol=1e-10)
        prev = sol.z


def test_admm_divergence_guard():
    # a single linearized step is far too long when beta ||S||^2 >> tau
    data, g = gen_random_qp(RandomQpParams(d=100, kappa=10, rho=1.0, seed=0,
                                           exact_kappa=False))
    sol = admm_solve(data, g, AdmmConfig(x_step="linearized", max_grads=100000))
    assert sol.status == Status.DIVERGED


def test_admm_converged_is_certified():
    data, g = gen_random_qp(RandomQpParams(d=30, kappa=5, rho=0.1, seed=7))
    cfg = AdmmConfig(eps=1e-3)
    sol = admm_solve(data, g, cfg)
    assert sol.status == Status.CONVERGED
    rep = kkt_p_residual(sol.x_best, data, g, active_tol=cfg.eps)
    assert rep.value <= 1.05 * cfg.eps


def test_admm_config_errors():
    data, g = make_small()
    for bad in (dict(theta=2.0), dict(beta_pen=0.0), dict(tau=0.5), dict(x_step="newton")):
        with pytest.raises(ConfigurationError):
            admm_solve(data, g, AdmmConfig(**bad))


def test_palm_small_c_limit():
    data, g = make_small(seed=2)
    x0, y0 = data.feasible_start()
    steps = []
    for c in (1e-1, 1e-2, 1e-3, 1e-4):
        sol = palm_solve(data, g, PalmConfig(c=c, penalty=1.0, max_outer=1), x0=x0, y0=y0)
        steps.append(np.linalg.norm(sol.x - x0))
    assert all(a > b for a, b in zip(steps, steps[1:]))
    assert steps[-1] < 1e-2


def test_palm_inner_hessian_eigenvalues():
    rho = 0.2
    data, _ = make_small(seed=3, rho=rho)
    Q = data.f0.Q
    lam = np.linalg.eigvalsh(palm_inner_hessian(Q, data, 1 / (2 * rho), prox_weight=1.0))
    assert lam[0] >= 1 / (1 / (2 * rho)) - rho - 1e-10
    lam = np.linalg.eigvalsh(palm_inner_hessian(Q, data, 1 / rho, prox_weight=1.0))
    assert lam[0] >= -1e-10
    lam = np.linalg.eigvalsh(palm_inner_hessian(Q, data, 1 / rho))
    assert lam[0] >= rho - 1e-10


def test_palm_end_to_end():
    data, g = gen_random_qp(RandomQpParams(d=100, kappa=2, rho=0.1, seed=1))
    sol = palm_solve(data, g, PalmConfig(eps=1e-3))
    assert sol.status == Status.CONVERGED
    assert kkt_p_residual(sol.x_best, data, g, active_tol=1e-3).value <= 1.05e-3


def test_palm_config_errors():
    data, g = make_small()
    for bad in (dict(c=-1.0), dict(penalty=0.0), dict(prox_weight=0.0)):
        with pytest.raises(ConfigurationError):
            palm_solve(data, g, PalmConfig(**bad))


def test_shared_trace_schema():
    data, g = make_small(seed=4)
    a = admm_solve(data, g, AdmmConfig(max_grads=200))
    p = palm_solve(data, g, PalmConfig(max_grads=200))
    assert type(a.trace[0]) is type(p.trace[0])
    assert a.trace.cadence == 10 and p.trace.cadence == 1
    assert a.trace[-1].grad_evals <= 200 + 1 and p.trace[-1].grad_evals <= 200 + 1
