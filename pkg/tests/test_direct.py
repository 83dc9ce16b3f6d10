import math

import numpy as np
import pytest

import sensikit as sk
from sensikit.direct import (
    DirectMethodConfig,
    complexstep_gradient,
    default_epsilon,
    direct_gradient,
    fd_gradient,
    fd_jvp,
    forwardad_gradient,
    solver_loss_fn,
)
from sensikit.errors import NumericalBlowupError

THETA = np.array([0.2])
T1 = 10.0
REF = (T1 / 0.2) * math.cos(0.2 * T1) - math.sin(0.2 * T1) / 0.2 ** 2


def analytic_loss(th):
    return np.sin(th[0] * T1) / th[0]


def analytic_loss_real(th):
    return float(np.real(analytic_loss(th)))


def test_fd_exact_for_quadratics():
    for eps in (1e-2, 1e-5, 1e-8):
        g = fd_gradient(lambda th: th[0] ** 2, np.array([3.0]), eps, scheme="centered")
        assert g[0] == pytest.approx(6.0, abs=1e-5)


def test_fd_harmonic_analytic_map():
    g = fd_gradient(analytic_loss_real, THETA, 1e-6, scheme="centered")
    assert g[0] == pytest.approx(REF, abs=1e-4)
    assert g[0] == pytest.approx(-43.5398, abs=1e-3)


def test_fd_cancellation_at_tiny_step():
    # cancellation dominates far below the sweet spot: orders of magnitude
    # worse than the eps = 1e-6 error
    tiny = fd_gradient(analytic_loss_real, THETA, 1e-15, scheme="centered")
    good = fd_gradient(analytic_loss_real, THETA, 1e-6, scheme="centered")
    err_tiny = abs(tiny[0] - REF) / abs(REF)
    err_good = abs(good[0] - REF) / abs(REF)
    assert err_tiny >= 1e4 * err_good
    assert err_tiny > 1e-5


def test_fd_forward_scheme_cost():
    calls = []

    def fn(th):
        calls.append(th.copy())
        return float(th[0] ** 2)

    fd_gradient(fn, np.array([1.0, 2.0]), 1e-6, scheme="forward")
    assert len(calls) == 3  # base + one per component
    calls.clear()
    fd_gradient(fn, np.array([1.0, 2.0]), 1e-6, scheme="centered")
    assert len(calls) == 4  # 2p


def test_fd_propagates_nonfinite_with_component():
    def fn(th):
        return math.inf if th[1] > 2.0 else 1.0

    with pytest.raises(NumericalBlowupError, match="component 1"):
        fd_gradient(fn, np.array([1.0, 2.0]), 1e-3, scheme="centered")


def test_fd_jvp_linear_rhs_exact():
    rng = np.random.default_rng(5)
    A = rng.normal(size=(3, 3))

    def rhs(u, p, t):
        return A @ u

    u = rng.normal(size=3)
    v = rng.normal(size=3)
    got = fd_jvp(rhs, u, np.zeros(1), 0.0, v, 1e-7)
    assert np.allclose(got, A @ v, atol=1e-6)
    assert np.allclose(fd_jvp(rhs, u, np.zeros(1), 0.0, np.zeros(3), 1e-7), 0.0)


def test_fd_jvp_harmonic_jacobian_column():
    ent = sk.make_harmonic(0.2)
    u = np.array([1.0, 0.5])
    got = fd_jvp(ent.problem.rhs, u, THETA, 0.0, np.array([1.0, 0.0]), 1e-7)
    assert np.allclose(got, [0.0, -0.04], atol=1e-6)


def test_complexstep_quadratic():
    g = complexstep_gradient(lambda th: th[0] ** 2, np.array([3.0]), 1e-12)
    assert g[0] == pytest.approx(6.0, rel=1e-12)


def test_complexstep_harmonic_tiny_step():
    g = complexstep_gradient(analytic_loss, THETA, 1e-12)
    assert g[0] == pytest.approx(REF, rel=1e-6)
    assert g[0] == pytest.approx(-43.539778, abs=1e-5)


def test_complexstep_zeroes_on_conjugate_square():
    # |z|^2 written as z * conj(z) is not analytic: derivative comes out 0
    def loss(th):
        z = th[0]
        return z * np.conj(z)

    g = complexstep_gradient(loss, np.array([1.7]), 1e-10)
    assert g[0] == pytest.approx(0.0, abs=1e-12)


def test_absolute_guard_raises_on_complex():
    def loss(th):
        return sk.dual.absolute(th[0]) ** 2

    with pytest.raises(sk.errors.AnalyticityError):
        complexstep_gradient(loss, np.array([1.7]), 1e-10)


def test_default_epsilons():
    assert np.allclose(default_epsilon("centered_fd", [0.2]), 1e-6)
    assert np.allclose(default_epsilon("centered_fd", [50.0]), 5e-5)
    assert np.allclose(default_epsilon("complex_step", [0.2]), 1e-12)


def test_forwardad_zero_gradient_when_theta_unused():
    prob = sk.OdeProblem(
        rhs=lambda u, p, t: np.array([-u[0]]),
        u0=[1.0],
        tspan=(0.0, 1.0),
        theta=[0.7],
    )
    loss = sk.LinearStateLoss([1.0], [[1.0]])
    res = forwardad_gradient(prob, loss, sk.SolverConfig())
    assert np.array_equal(res.gradient, [0.0])


def test_forwardad_predprey_norm_modes():
    ent = sk.make_predprey(1.0)
    base = dict(abstol=1e-12, reltol=1e-12, saveat=ent.loss.times)
    good = forwardad_gradient(
        ent.problem, ent.loss, sk.SolverConfig(norm_mode=sk.JOINT_PRIMAL_DUAL, **base)
    )
    assert good.gradient[0] == pytest.approx(212.71042521681443, rel=1e-6)
    bad = forwardad_gradient(
        ent.problem, ent.loss, sk.SolverConfig(norm_mode=sk.PRIMAL_ONLY, **base)
    )
    assert abs(bad.gradient[0] - 212.71042521681443) > 0.5 * 212.71
    assert "warning" in bad.metadata


def test_direct_dispatcher():
    ent = sk.make_harmonic(0.2)
    cfg = sk.SolverConfig(abstol=1e-10, reltol=1e-10)
    for method in ("forward_fd", "centered_fd", "complex_step", "forward_ad"):
        res = direct_gradient(ent.problem, ent.loss, DirectMethodConfig(method=method, solver_config=cfg))
        assert res.gradient[0] == pytest.approx(REF, rel=1e-4)
        assert res.method in (method, "forward_ad")
    with pytest.raises(ValueError):
        DirectMethodConfig(method="sideways")


def test_v_shape_of_centered_fd_error():
    eps_grid = 10.0 ** np.linspace(-15, -1, 29)
    errs = np.array(
        [
            abs(fd_gradient(analytic_loss_real, THETA, e, scheme="centered")[0] - REF)
            / abs(REF)
            for e in eps_grid
        ]
    )
    i = int(np.argmin(errs))
    assert 1e-8 <= eps_grid[i] <= 1e-4
    assert errs[0] >= 100 * errs[i]
    assert errs[-1] >= 100 * errs[i]


def test_complexstep_error_monotone_in_epsilon():
    errs = []
    for eps in (1e-4, 1e-6, 1e-8, 1e-10, 1e-12):
        g = complexstep_gradient(analytic_loss, THETA, eps)[0]
        errs.append(abs(g - REF) / abs(REF))
    for a, b in zip(errs, errs[1:]):
        assert b <= a + 1e-15


def test_forwardad_tolerance_convergence():
    ent = sk.make_harmonic(0.2)
    grads = {}
    for tau in (1e-6, 1e-9, 1e-12):
        cfg = sk.SolverConfig(abstol=tau, reltol=tau)
        grads[tau] = forwardad_gradient(ent.problem, ent.loss, cfg).gradient[0]
    assert abs(grads[1e-9] - grads[1e-6]) / abs(grads[1e-9]) <= 100 * 1e-6
    assert abs(grads[1e-12] - grads[1e-9]) / abs(grads[1e-12]) <= 100 * 1e-9


def test_forwardad_matches_forward_sensitivity_on_fixed_grid():
    ent = sk.make_harmonic(0.2)
    cfg = sk.SolverConfig(method="rk4", dt=0.02)
    ad = forwardad_gradient(ent.problem, ent.loss, cfg)
    fs = sk.forward_sensitivity(ent.problem, ent.loss, cfg)
    assert ad.gradient[0] == pytest.approx(fs.gradient[0], rel=1e-12)


def test_solver_loss_fn_counts_evaluations():
    ent = sk.make_harmonic(0.2)
    fn = solver_loss_fn(ent.problem, ent.loss, sk.SolverConfig())
    fn(THETA)
    first = fn.stats.rhs_evaluations
    assert first > 0
    fn(THETA)
    assert fn.stats.rhs_evaluations == 2 * first
