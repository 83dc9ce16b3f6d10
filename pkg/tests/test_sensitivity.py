import math

import numpy as np
import pytest

import sensikit as sk
from sensikit.sensitivity import (
    augmented_problem,
    forward_sensitivity,
    jacobian_assembly,
    sensitivity_rhs,
)


def test_sensitivity_rhs_zero_when_autonomous_constant():
    prob = sk.OdeProblem(
        rhs=lambda u, p, t: np.array([1.0, -2.0]),
        u0=[0.0, 0.0],
        tspan=(0.0, 1.0),
        theta=[0.3],
    )
    s = np.zeros((2, 1))
    du, ds = sensitivity_rhs(prob.u0, s, prob.theta, 0.0, prob)
    assert np.array_equal(ds, np.zeros((2, 1)))


def test_sensitivity_rhs_harmonic_formula():
    ent = sk.make_harmonic(0.2)
    u = np.array([1.5, -0.3])
    s = np.array([[2.0], [1.0]])
    du, ds = sensitivity_rhs(u, s, ent.problem.theta, 0.0, ent.problem)
    J = np.array([[0.0, 1.0], [-0.04, 0.0]])
    Jt = np.array([[0.0], [-2 * 0.2 * u[0]]])
    assert np.allclose(du, [u[1], -0.04 * u[0]])
    assert np.allclose(ds, J @ s + Jt)


def test_sensitivity_stays_zero_without_parameter_dependence():
    prob = sk.OdeProblem(
        rhs=lambda u, p, t: -u, u0=[1.0], tspan=(0.0, 1.0), theta=[0.5]
    )
    du, ds = sensitivity_rhs(np.array([1.0]), np.zeros((1, 1)), prob.theta, 0.0, prob)
    assert np.array_equal(ds, np.zeros((1, 1)))


def test_jacobian_assembly_returns_analytic_verbatim():
    sentinel_u = np.full((2, 2), 7.25)
    sentinel_t = np.full((2, 1), -3.5)
    prob = sk.OdeProblem(
        rhs=lambda u, p, t: u,
        u0=[1.0, 1.0],
        tspan=(0.0, 1.0),
        theta=[0.1],
        rhs_jac_u=lambda u, p, t: sentinel_u,
        rhs_jac_theta=lambda u, p, t: sentinel_t,
    )
    J_u, J_t = jacobian_assembly(prob, prob.u0, prob.theta, 0.0)
    assert np.array_equal(J_u, sentinel_u)
    assert np.array_equal(J_t, sentinel_t)


def test_jacobian_assembly_linear_rhs_multidual():
    rng = np.random.default_rng(2)
    A = rng.normal(size=(3, 3))
    B = rng.normal(size=(3, 2))

    def rhs(u, p, t):
        return A @ u + B @ p

    prob = sk.OdeProblem(rhs=rhs, u0=np.zeros(3), tspan=(0.0, 1.0), theta=np.zeros(2))
    J_u, J_t = jacobian_assembly(prob, rng.normal(size=3), rng.normal(size=2), 0.0)
    assert np.allclose(J_u, A, atol=1e-14)
    assert np.allclose(J_t, B, atol=1e-14)


def test_jacobian_assembly_harmonic_theta_column():
    ent = sk.make_harmonic(0.2)
    bare = sk.OdeProblem(
        rhs=ent.problem.rhs, u0=ent.problem.u0, tspan=ent.problem.tspan,
        theta=ent.problem.theta,
    )
    _, J_t = jacobian_assembly(bare, np.array([1.0, 0.0]), np.array([0.2]), 0.0)
    assert np.allclose(J_t, [[0.0], [-0.4]], atol=1e-14)


def test_jacobian_assembly_partial_analytic():
    ent = sk.make_harmonic(0.2)
    only_u = sk.OdeProblem(
        rhs=ent.problem.rhs, u0=ent.problem.u0, tspan=ent.problem.tspan,
        theta=ent.problem.theta, rhs_jac_u=ent.problem.rhs_jac_u,
    )
    u = np.array([0.7, -1.1])
    J_u, J_t = jacobian_assembly(only_u, u, np.array([0.2]), 0.0)
    assert np.allclose(J_u, [[0.0, 1.0], [-0.04, 0.0]])
    assert np.allclose(J_t, [[0.0], [-2 * 0.2 * 0.7]], atol=1e-14)


def test_augmented_layout_state_then_columns():
    ent = sk.make_harmonic(0.2)
    aug = augmented_problem(ent.problem)
    assert aug.u0.shape == (4,)
    assert np.array_equal(aug.u0[:2], ent.problem.u0)
    assert np.array_equal(aug.u0[2:], np.zeros(2))


def test_forward_sensitivity_harmonic_gradient():
    ent = sk.make_harmonic(0.2)
    cfg = sk.SolverConfig(abstol=1e-10, reltol=1e-10)
    res = forward_sensitivity(ent.problem, ent.loss, cfg)
    assert res.gradient[0] == pytest.approx(-43.539778, abs=1e-5)
    assert res.gradient[0] == pytest.approx(ent.analytic_gradient()[0], rel=1e-6)


def test_forward_sensitivity_trajectory_component():
    ent = sk.make_harmonic(0.2)
    cfg = sk.SolverConfig(abstol=1e-12, reltol=1e-12)
    res = forward_sensitivity(ent.problem, ent.loss, cfg)
    s_final = res.sensitivity_trajectory[-1]
    # d(cos(theta t))/dtheta at t=10: -10 sin(2)
    assert s_final[1, 0] == pytest.approx(-10 * math.sin(2.0), rel=1e-8)
    assert s_final[1, 0] == pytest.approx(-9.092974, abs=1e-6)


def test_forward_sensitivity_predprey_reference():
    ent = sk.make_predprey(1.0)
    cfg = sk.SolverConfig(abstol=1e-12, reltol=1e-12)
    res = forward_sensitivity(ent.problem, ent.loss, cfg)
    assert res.gradient[0] == pytest.approx(212.71042521681443, rel=1e-6)


@pytest.mark.parametrize("method,dt", [("euler", 0.01), ("rk4", 0.02)])
def test_fixed_grid_trajectory_matches_forward_ad(method, dt):
    ent = sk.make_harmonic(0.2)
    cfg = sk.SolverConfig(method=method, dt=dt)
    fs = forward_sensitivity(ent.problem, ent.loss, cfg)
    ad = sk.forwardad_gradient(ent.problem, ent.loss, cfg)
    assert fs.trajectory_times.shape == ad.trajectory_times.shape
    scale = np.max(np.abs(fs.sensitivity_trajectory)) or 1.0
    diff = np.max(np.abs(fs.sensitivity_trajectory - ad.sensitivity_trajectory))
    assert diff / scale <= 1e-12


@pytest.mark.parametrize("make", [sk.make_harmonic, sk.make_predprey,
                                  lambda: sk.make_heat1d(16, 0.1)])
def test_gradient_matches_centered_fd(make):
    ent = make() if make.__name__ == "<lambda>" else make()
    cfg = sk.SolverConfig(abstol=1e-10, reltol=1e-10)
    res = forward_sensitivity(ent.problem, ent.loss, cfg)
    fn = sk.direct.solver_loss_fn(ent.problem, ent.loss, cfg)
    fd = sk.fd_gradient(fn, ent.problem.theta, 1e-6, scheme="centered")
    assert np.linalg.norm(res.gradient - fd) / np.linalg.norm(fd) <= 1e-4


def test_zero_parameter_dependence_gives_exact_zero():
    prob = sk.OdeProblem(
        rhs=lambda u, p, t: np.array([-u[0]]),
        u0=[2.0],
        tspan=(0.0, 1.0),
        theta=[0.4],
    )
    loss = sk.LinearStateLoss([1.0], [[1.0]])
    res = forward_sensitivity(prob, loss, sk.SolverConfig())
    assert res.gradient[0] == 0.0


def test_initial_condition_dependence_enters_gradient():
    # theta is the initial condition of du/dt = -u: dL/dtheta = exp(-1)
    prob = sk.OdeProblem(
        rhs=lambda u, p, t: np.array([-u[0]]),
        u0=[1.0],
        tspan=(0.0, 1.0),
        theta=[1.0],
        u0_jacobian=[[1.0]],
    )
    loss = sk.LinearStateLoss([1.0], [[1.0]])
    res = forward_sensitivity(prob, loss, sk.SolverConfig(abstol=1e-10, reltol=1e-10))
    assert res.gradient[0] == pytest.approx(math.exp(-1.0), rel=1e-8)


def test_dual_and_jacobian_routes_agree_on_nontrivial_dynamics():
    # forward AD propagates tangents through the arithmetic; the augmented
    # system uses assembled Jacobians -- mathematically the same ODE under
    # the same error control, so the gradients must coincide
    ent = sk.make_predprey(1.5)
    cfg = sk.SolverConfig(abstol=1e-10, reltol=1e-10)
    fs = forward_sensitivity(ent.problem, ent.loss, cfg).gradient[0]
    ad = sk.forwardad_gradient(
        ent.problem, ent.loss,
        sk.SolverConfig(abstol=1e-10, reltol=1e-10, saveat=ent.loss.times),
    ).gradient[0]
    assert abs(fs - ad) / abs(fs) <= 1e-10
