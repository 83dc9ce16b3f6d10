"""Adaptive Runge-Kutta integration with a scaled error norm.

The Dormand-Prince 5(4) pair estimates the local error from its embedded
lower-order update; the controller keeps the tolerance-scaled error below
one and grows or shrinks the stepsize accordingly.  Dense output comes
from a cubic Hermite interpolant over each accepted step.
"""

import numpy as np

from sensikit import SolverConfig, dense_eval, make_harmonic, solve

ent = make_harmonic(theta=0.2)
print("harmonic oscillator u'' + theta^2 u = 0, theta=0.2, t in [0, 10]")
print(f"analytic u1(10) = sin(2)/0.2 = {ent.analytic_solution(10.0)[0]:.12f}\n")

print(f"{'tolerance':>10} {'steps':>6} {'rejected':>9} {'rhs evals':>10} {'|error(10)|':>12}")
for tol in (1e-3, 1e-6, 1e-9, 1e-12):
    sol = solve(ent.problem, SolverConfig(method="dopri5", abstol=tol, reltol=tol))
    err = np.max(np.abs(sol.final_state() - ent.analytic_solution(10.0)))
    print(f"{tol:>10.0e} {sol.stats.accepted_steps:>6} {sol.stats.rejected_steps:>9} "
          f"{sol.stats.rhs_evaluations:>10} {err:>12.3e}")

# every accepted step satisfied the scaled error bound
sol = solve(ent.problem, SolverConfig(abstol=1e-9, reltol=1e-9))
print(f"\nmax accepted scaled error: {max(sol.step_errors):.3f} (must be <= 1)")

# dense output evaluates anywhere inside the span, exactly at nodes
t = 4.321
u = dense_eval(sol, t)
print(f"dense u({t}) = {u[0]:.10f}, analytic {ent.analytic_solution(t)[0]:.10f}")

# fixed-step methods take uniform steps and shorten only the last one
sol_fixed = solve(ent.problem, SolverConfig(method="rk4", dt=0.3))
print(f"\nrk4 dt=0.3: {sol_fixed.stats.accepted_steps} steps, "
      f"last node lands exactly on t1: {sol_fixed.node_times[-1] == 10.0}")
