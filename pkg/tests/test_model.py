import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pgrpd import (
    ConfigurationError,
    DualPoint,
    L1Norm,
    OracleCounter,
    PolyhedralSupport,
    ProblemData,
    ProxUnavailableError,
    QuadraticObjective,
    RankDeficientError,
    compute_spectral,
    eval_f0,
    g_value,
    moreau_prox_conj,
    prox_g,
    prox_g_conj,
)
from pgrpd.instances import HardInstanceParams, build_hard_instance

from conftest import make_t1


def _data_with_Q(Q):
    d = Q.shape[0]
    return ProblemData(A=np.eye(1, d), b=np.zeros(1), Abar=np.eye(1, d, 1), bbar=np.zeros(1),
                       f0=QuadraticObjective(Q), L_f=2.0)


def test_eval_f0_zero_and_counter():
    data = _data_with_Q(np.eye(2))
    c = OracleCounter()
    val, grad = eval_f0(data, np.zeros(2), c)
    assert val == 0.0 and np.all(grad == 0)
    assert c.grad_f0 == 1 and c.grad_evals == 1


def test_eval_f0_indefinite_hand_value():
    data = _data_with_Q(np.diag([2.0, -1.0]))
    val, grad = eval_f0(data, np.ones(2))
    assert val == pytest.approx(0.5)
    np.testing.assert_allclose(grad, [2.0, -1.0])
    # finite differences
    h = 1e-6
    fd = [(eval_f0(data, np.ones(2) + h * e)[0] - eval_f0(data, np.ones(2) - h * e)[0]) / (2 * h)
          for e in np.eye(2)]
    np.testing.assert_allclose(fd, grad, atol=1e-6)


def test_eval_f0_dimension_mismatch():
    data = _data_with_Q(np.eye(2))
    with pytest.raises(ConfigurationError):
        eval_f0(data, np.zeros(3))


def test_g_value_examples():
    assert g_value(L1Norm(1.0, 2), np.zeros(2)) == 0.0
    assert g_value(L1Norm(2.0, 2), np.array([1.0, -3.0])) == pytest.approx(8.0)
    interval = PolyhedralSupport(np.array([[1.0], [-1.0]]), np.array([1.0, 1.0]))
    assert g_value(interval, np.array([0.7])) == pytest.approx(0.7, abs=1e-9)


def test_prox_examples():
    g = L1Norm(1.0, 2)
    c = OracleCounter()
    np.testing.assert_allclose(prox_g(g, 1.0, np.array([2.0, -0.5]), c), [1.0, 0.0])
    assert c.prox_g == 1
    np.testing.assert_allclose(prox_g(L1Norm(1.0, 1), 0.25, np.array([1.0])), [0.75])
    np.testing.assert_allclose(prox_g(g, 0.3, np.zeros(2)), 0.0)


def test_prox_matches_grid_minimization():
    rng = np.random.default_rng(3)
    grid = np.linspace(-6, 6, 1_200_001)
    for _ in range(5):
        beta, eta, v = rng.uniform(0.1, 2), rng.uniform(0.1, 2), rng.uniform(-4, 4)
        w = prox_g(L1Norm(beta, 1), eta, np.array([v]))[0]
        obj = beta * np.abs(grid) + (grid - v) ** 2 / (2 * eta)
        assert abs(w - grid[np.argmin(obj)]) <= 1e-5


def test_prox_conj_examples():
    c = OracleCounter()
    np.testing.assert_allclose(prox_g_conj(L1Norm(1.0, 1), 1.0, np.array([2.0]), c), [1.0])
    assert c.prox_gstar == 1
    np.testing.assert_allclose(prox_g_conj(L1Norm(1.0, 1), 1.0, np.array([0.3])), [0.3])
    out = prox_g_conj(L1Norm(2.0, 2), 0.5, np.array([-5.0, 1.0]))
    np.testing.assert_allclose(out, [-2.0, 1.0], atol=1e-12)
    ref = moreau_prox_conj(L1Norm(2.0, 2), 0.5, np.array([-5.0, 1.0]))
    assert np.max(np.abs(out - ref)) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=6),
       st.floats(1e-3, 10), st.floats(1e-3, 10))
def test_moreau_identity_and_domain(v, eta, beta):
    v = np.array(v)
    g = L1Norm(beta, v.size)
    pc = prox_g_conj(g, eta, v)
    ref = v - eta * prox_g(g, 1.0 / eta, v / eta)
    assert np.linalg.norm(pc - ref) <= 1e-10 * (1 + np.linalg.norm(v))
    assert np.max(np.abs(pc)) <= beta + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3),
       st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.floats(1e-2, 5))
def test_prox_nonexpansive(v, w, eta):
    g = L1Norm(0.7, 3)
    v, w = np.array(v), np.array(w)
    assert (np.linalg.norm(prox_g(g, eta, v) - prox_g(g, eta, w))
            <= np.linalg.norm(v - w) + 1e-12)


def test_l1_polyhedral_consistency():
    rng = np.random.default_rng(0)
    for nbar in (1, 2, 3, 4):
        g = L1Norm(1.3, nbar)
        poly = g.as_polyhedral()
        assert poly.l_g == pytest.approx(g.l_g, rel=1e-8)
        for _ in range(5):
            y = rng.standard_normal(nbar)
            # brute force over polytope vertices (the box corners)
            corners = np.array(np.meshgrid(*[[-1.3, 1.3]] * nbar)).reshape(nbar, -1).T
            brute = float(np.max(corners @ y))
            assert g_value(poly, y) == pytest.approx(brute, abs=1e-8)
            assert g_value(g, y) == pytest.approx(brute, abs=1e-8)


def test_l1_lipschitz_constant():
    assert L1Norm(2.0, 9).l_g == pytest.approx(6.0)


def test_polyhedral_prox_matches_l1():
    rng = np.random.default_rng(1)
    g = L1Norm(0.8, 3)
    poly = g.as_polyhedral()
    for _ in range(10):
        v, eta = rng.standard_normal(3) * 2, rng.uniform(0.2, 2)
        np.testing.assert_allclose(prox_g(poly, eta, v), prox_g(g, eta, v), atol=1e-9)
        np.testing.assert_allclose(prox_g_conj(poly, eta, v), prox_g_conj(g, eta, v), atol=1e-9)


def test_polyhedral_non_box_projection():
    # simplex-like triangle {u1 + u2 <= 1, u >= -1}
    C = np.array([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    poly = PolyhedralSupport(C, np.array([1.0, 1.0, 1.0]))
    assert poly.box() is None
    u = poly.project_conj(np.array([3.0, 3.0]))
    np.testing.assert_allclose(u, [0.5, 0.5], atol=1e-10)
    # value at y = (1, 1) is max over the triangle of u1 + u2 = 1
    assert g_value(poly, np.ones(2)) == pytest.approx(1.0, abs=1e-9)


def test_polyhedral_rejects_unbounded_and_empty():
    with pytest.raises(ConfigurationError):
        PolyhedralSupport(np.array([[1.0]]), np.array([1.0]))
    with pytest.raises(ConfigurationError):
        PolyhedralSupport(np.array([[1.0], [-1.0]]), np.array([-1.0, -1.0]))


def test_polyhedral_failing_projector():
    def bad(v):
        raise RuntimeError("no")
    poly = PolyhedralSupport(np.array([[1.0], [-1.0]]), np.ones(2), projector=bad)
    with pytest.raises(ProxUnavailableError, match="prox unavailable"):
        prox_g(poly, 1.0, np.array([2.0]))


def test_spectral_t1():
    data, _ = make_t1()
    sp = compute_spectral(data)
    for name in ("norm_stack", "lam_max", "lam_min_plus", "kappa_stack", "pinv_norm"):
        assert getattr(sp, name) == pytest.approx(1.0, rel=1e-12)


def test_spectral_hard_instance():
    data, _ = build_hard_instance(HardInstanceParams(2, 3, 5, L_f=1.0))
    lam = np.linalg.eigvalsh(data.A @ data.A.T)
    assert lam[lam > 1e-9][0] == pytest.approx(72.0, rel=1e-8)
    sp = compute_spectral(data)
    assert 1.5 <= sp.kappa_stack < 6.0
    assert sp.kappa_stack * np.sqrt(sp.lam_min_plus) == pytest.approx(np.sqrt(sp.lam_max),
                                                                      rel=1e-10)
    assert sp.norm_stack ** 2 == pytest.approx(sp.lam_max, rel=1e-10)


def test_rank_deficient_A():
    A = np.array([[1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(RankDeficientError) as info:
        ProblemData(A=A, b=np.zeros(2), Abar=np.eye(1, 2), bbar=np.zeros(1),
                    f0=QuadraticObjective(np.eye(2)), L_f=1.0)
    assert info.value.smallest_singular_value < 1e-10


def test_problem_data_validation():
    with pytest.raises(ConfigurationError):
        ProblemData(A=np.eye(1, 2), b=np.zeros(2), Abar=np.eye(1, 2), bbar=np.zeros(1),
                    f0=QuadraticObjective(np.eye(2)), L_f=1.0)
    with pytest.raises(ConfigurationError):
        ProblemData(A=np.eye(1, 2), b=np.zeros(1), Abar=np.eye(1, 2), bbar=np.zeros(1),
                    f0=QuadraticObjective(np.eye(2)), L_f=0.0)


def test_dual_point_stack_roundtrip():
    z = DualPoint(np.array([1.0, 2.0]), np.array([3.0]))
    back = DualPoint.from_stack(z.stack(), 2)
    np.testing.assert_array_equal(back.z1, z.z1)
    np.testing.assert_array_equal(back.z2, z.z2)


def test_counter_monotone_and_reset():
    c = OracleCounter()
    c.add(grad_evals=3, matvec_A=1)
    snap = c.snapshot()
    assert snap["grad_evals"] == 3
    c.reset()
    assert c.grad_evals == 0
