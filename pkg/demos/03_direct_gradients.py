"""Direct differentiation of a solver pipeline: the stepsize dilemma.

Finite differences trade truncation error against cancellation, so their
error curve over the perturbation size is V-shaped.  Complex step never
subtracts nearby numbers and tolerates tiny steps.  Forward AD through
dual numbers has no step at all and is exact up to solver error.
"""

import numpy as np

from sensikit import SolverConfig, fd_gradient, complexstep_gradient, make_harmonic
from sensikit.direct import forwardad_gradient, solver_loss_fn
from sensikit.dual import seed, tangents

ent = make_harmonic(theta=0.2)
theta = ent.problem.theta
reference = ent.analytic_gradient()[0]
print(f"d u1(10) / d theta at theta=0.2: {reference:.9f}\n")


def analytic_map(th):
    return np.sin(th[0] * 10.0) / th[0]


print("differentiating the closed form sin(10 theta)/theta:")
print(f"{'eps':>8} {'forward FD':>14} {'centered FD':>14} {'complex step':>14}")
for eps in (1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12):
    fwd = fd_gradient(lambda t: float(np.real(analytic_map(t))), theta, eps, scheme="forward")[0]
    cen = fd_gradient(lambda t: float(np.real(analytic_map(t))), theta, eps, scheme="centered")[0]
    cs = complexstep_gradient(analytic_map, theta, eps)[0]
    def rel(x):
        return abs(x - reference) / abs(reference)
    print(f"{eps:>8.0e} {rel(fwd):>14.2e} {rel(cen):>14.2e} {rel(cs):>14.2e}")

ad = tangents(analytic_map(seed(theta)), 1)[0]
print(f"{'AD':>8} {'':>14} {'':>14} {abs(ad - reference) / abs(reference):>14.2e}")

print("\nsame derivative through the adaptive solver (abstol=reltol=1e-12):")
cfg = SolverConfig(method="dopri5", abstol=1e-12, reltol=1e-12)
fn = solver_loss_fn(ent.problem, ent.loss, cfg)
cen = fd_gradient(fn, theta, 1e-6, scheme="centered")[0]
res = forwardad_gradient(ent.problem, ent.loss, cfg)
print(f"  centered FD eps=1e-6: {cen:.9f} ({fn.stats.rhs_evaluations} rhs evals)")
print(f"  forward AD:           {res.gradient[0]:.9f} ({res.stats.rhs_evaluations} rhs evals)")
