import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pgrpd import ConfigurationError, DualPoint, L1Norm, OracleCounter, compute_spectral
from pgrpd.dualsolve import (
    HoffmanConstants,
    RestartSchedule,
    apg_cycle,
    build_dual,
    compute_hoffman_constants,
    dual_smooth_grad,
    dual_subgradient_min_norm,
    dual_value,
    next_alpha,
    restarted_apg,
    schedule_hoffman,
    schedule_strong,
)
from pgrpd.exact import exact_dual_box
from pgrpd.instances import HardInstanceParams, build_hard_instance

from conftest import make_small, make_t1


def _dual(data, g, x_k=None, grad_k=None, tau=2.0):
    sp = compute_spectral(data)
    x_k = np.zeros(data.d) if x_k is None else np.asarray(x_k, float)
    grad_k = np.zeros(data.d) if grad_k is None else np.asarray(grad_k, float)
    return build_dual(data, g, sp, x_k, grad_k, tau), sp


def test_build_dual_t1():
    data, g = make_t1()
    D, _ = _dual(data, g)
    np.testing.assert_array_equal(D.shift_w, 0.0)
    assert D.L_D == pytest.approx(0.5)
    D2, _ = _dual(data, g, x_k=[1.0, 0.0])
    np.testing.assert_allclose(D2.shift_w, [-2.0, 0.0])


def test_build_dual_hard_L_D():
    data, g = build_hard_instance(HardInstanceParams(2, 3, 5, L_f=1.0))
    D, _ = _dual(data, g)
    lam_max = np.linalg.svd(data.stacked, compute_uv=False)[0] ** 2
    assert D.L_D == pytest.approx(lam_max / 2.0, rel=1e-12)


def test_dual_smooth_grad_examples():
    data, g = make_t1()
    D, _ = _dual(data, g)
    c = OracleCounter()
    g1, g2 = dual_smooth_grad(D, DualPoint(np.array([2.0]), np.array([4.0])), c)
    np.testing.assert_allclose(g1, [1.0])
    np.testing.assert_allclose(g2, [2.0])
    assert c.grad_evals == 1
    data2 = data.replace(bbar=np.array([3.0]), b=np.array([-1.0]))
    D2, _ = _dual(data2, g)
    g1, g2 = dual_smooth_grad(D2, DualPoint.zeros(1, 1))
    np.testing.assert_allclose(g1, [-3.0])
    np.testing.assert_allclose(g2, [1.0])


def test_dual_grad_finite_differences():
    data, g = make_small(seed=4)
    rng = np.random.default_rng(0)
    D, _ = _dual(data, g, x_k=rng.standard_normal(data.d), grad_k=rng.standard_normal(data.d))
    z = rng.standard_normal(data.nbar + data.n)
    grad = D.smooth_grad_flat(z)
    h = 1e-6
    fd = np.array([(D.smooth_value_flat(z + h * e) - D.smooth_value_flat(z - h * e)) / (2 * h)
                   for e in np.eye(z.size)])
    assert np.linalg.norm(fd - grad) <= 1e-6 * max(1.0, np.linalg.norm(grad))


def test_dual_value_examples():
    data, g = make_t1()
    D, _ = _dual(data, g)
    assert dual_value(D, g, DualPoint.zeros(1, 1)) == 0.0
    assert dual_value(D, g, DualPoint(np.array([1.0]), np.array([0.0]))) == pytest.approx(0.25)
    assert dual_value(D, g, DualPoint(np.array([2.0]), np.array([0.0]))) == math.inf


def test_next_alpha_golden_ratio():
    assert next_alpha(1.0) == pytest.approx((1 + math.sqrt(5)) / 2, abs=1e-10)


def test_apg_cycle_fixed_point():
    data, g = make_t1(beta=5.0)
    rng = np.random.default_rng(2)
    D, _ = _dual(data, g, x_k=rng.standard_normal(2), grad_k=rng.standard_normal(2))
    z_star = np.linalg.solve(D.H, -D.c)
    assert np.all(np.abs(z_star[:1]) < 5.0)
    out = apg_cycle(D, g, DualPoint.from_stack(z_star, 1), 7)
    np.testing.assert_allclose(out.stack(), z_star, atol=1e-12)


def test_apg_cycle_t1_matches_enumeration():
    data, g = make_t1()
    rng = np.random.default_rng(5)
    for _ in range(5):
        D, _ = _dual(data, g, x_k=3 * rng.standard_normal(2), grad_k=3 * rng.standard_normal(2))
        z_ref, _ = exact_dual_box(D, g)
        out = apg_cycle(D, g, DualPoint.zeros(1, 1), 50)
        np.testing.assert_allclose(out.stack(), z_ref, atol=1e-6)


def test_apg_cycle_rejects_zero_steps():
    data, g = make_t1()
    D, _ = _dual(data, g)
    with pytest.raises(ConfigurationError):
        apg_cycle(D, g, DualPoint.zeros(1, 1), 0)


def test_restarted_single_cycle_equals_apg_cycle():
    data, g = make_small(seed=1)
    rng = np.random.default_rng(1)
    D, _ = _dual(data, g, x_k=rng.standard_normal(data.d), grad_k=rng.standard_normal(data.d))
    z0 = DualPoint.zeros(data.nbar, data.n)
    a = apg_cycle(D, g, z0, 11)
    b = restarted_apg(D, g, z0, RestartSchedule("StrongDual", 11, 1))
    np.testing.assert_array_equal(a.stack(), b.stack())


def test_restart_halving_on_t1():
    data, g = make_t1()
    for seed in range(10):
        rng = np.random.default_rng(seed)
        D, sp = _dual(data, g, x_k=2 * rng.standard_normal(2), grad_k=2 * rng.standard_normal(2))
        _, d_star = exact_dual_box(D, g)
        gaps = []
        z = DualPoint.zeros(1, 1)
        gaps.append(dual_value(D, g, z) - d_star)
        j = math.ceil(2 * math.sqrt(2) * sp.kappa_stack)
        assert j == 3
        for _ in range(4):
            z = apg_cycle(D, g, z, j)
            gaps.append(dual_value(D, g, z) - d_star)
        for a, b in zip(gaps, gaps[1:]):
            if a > 1e-12:
                assert b <= 0.5 * a * 1.05 + 1e-14


def test_iterates_stay_in_conjugate_domain_and_descend():
    data, g = make_small(seed=2, beta=0.3)
    rng = np.random.default_rng(7)
    D, _ = _dual(data, g, x_k=rng.standard_normal(data.d), grad_k=5 * rng.standard_normal(data.d))
    worst = []
    values = []
    restarted_apg(D, g, DualPoint.zeros(data.nbar, data.n), RestartSchedule("StrongDual", 9, 6),
                  on_step=lambda z: worst.append(np.max(np.abs(z[:data.nbar]))),
                  on_cycle=lambda c, z: values.append(D.smooth_value_flat(z)))
    assert max(worst) <= 0.3 + 1e-12
    for a, b in zip(values, values[1:]):
        assert b <= a + 1e-12 * (1 + abs(a))


def test_schedule_strong_examples():
    s = schedule_strong(1.0, 1.0, 1.0, 1.0)
    assert s.j_k == 3
    assert schedule_strong(1.0, 0.5, 1.0, 0.1).i_k == 9
    assert schedule_strong(1.0, 1.0, 1e-9, 1.0).i_k == 1
    with pytest.raises(ConfigurationError):
        schedule_strong(1.0, 1.0, 1.0, 0.0)


def test_schedule_hoffman_examples():
    hc = HoffmanConstants(B_rho=2.0, B_D=1.0, B_z=0.0, homogeneous=False)
    assert schedule_hoffman(hc, 1.0, 1.0, 1.0).j_k == 4
    hc1 = HoffmanConstants(B_rho=1.0, B_D=0.5, B_z=0.0, homogeneous=False)
    assert schedule_hoffman(hc1, 1.0, 1.0, 1.0).i_k == 1
    tau, theta, lam_max = 3.0, 0.7, 5.0
    hch = HoffmanConstants(B_rho=tau, B_D=1.0, B_z=0.0, homogeneous=True)
    expect = math.ceil(2 * theta * math.sqrt(2 * lam_max) - 1e-12)
    assert schedule_hoffman(hch, theta, lam_max / tau, 1.0).j_k == expect
    with pytest.raises(ConfigurationError):
        schedule_hoffman(hc, 1.0, 1.0, -1.0)


def test_hoffman_constants_homogeneous_and_t1():
    data, g = make_t1()
    sp = compute_spectral(data)
    hc = compute_hoffman_constants(data, g, sp, np.zeros(2), np.zeros(2), 0.0,
                                   DualPoint.zeros(1, 1), 2.0)
    assert hc.homogeneous and hc.B_rho == 2.0
    assert hc.B_z == pytest.approx(0.0, abs=1e-15)


def test_hoffman_B_D_bounds_gap():
    for seed in range(5):
        data, g = make_small(d=6, n=2, nbar=3, seed=seed)
        rng = np.random.default_rng(seed)
        x_k, grad_k = rng.standard_normal(6), rng.standard_normal(6)
        D, sp = _dual(data, g, x_k, grad_k)
        z_ini = DualPoint(rng.uniform(-1, 1, 3), rng.standard_normal(2))
        hc = compute_hoffman_constants(data, g, sp, x_k, grad_k, np.linalg.norm(grad_k),
                                       z_ini, 2.0)
        _, d_star = exact_dual_box(D, g)
        assert hc.B_D >= 0
        assert hc.B_D >= dual_value(D, g, z_ini) - d_star


def test_subgradient_min_norm_interior_is_gradient():
    data, g = make_small(seed=3, beta=10.0)
    D, _ = _dual(data, g)
    z = np.zeros(data.nbar + data.n)
    np.testing.assert_allclose(dual_subgradient_min_norm(D, g, z), D.smooth_grad_flat(z))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_dual_grad_lipschitz(seed):
    data, g = make_small(seed=seed % 7)
    rng = np.random.default_rng(seed)
    D, _ = _dual(data, g, x_k=rng.standard_normal(data.d), grad_k=rng.standard_normal(data.d))
    z, w = rng.standard_normal((2, data.nbar + data.n))
    lhs = np.linalg.norm(D.smooth_grad_flat(z) - D.smooth_grad_flat(w))
    assert lhs <= (1 + 1e-8) * D.L_D * np.linalg.norm(z - w)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_dual_convex_along_segments(seed):
    data, g = make_small(seed=seed % 5)
    rng = np.random.default_rng(seed)
    D, _ = _dual(data, g, x_k=rng.standard_normal(data.d), grad_k=rng.standard_normal(data.d))
    z, w = rng.standard_normal((2, data.nbar + data.n))
    t = rng.uniform()
    mid = D.smooth_value_flat(t * z + (1 - t) * w)
    assert mid <= t * D.smooth_value_flat(z) + (1 - t) * D.smooth_value_flat(w) + 1e-10
