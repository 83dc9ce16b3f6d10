"""Dual numbers: exact first derivatives from plain arithmetic.

A dual number x + eps*t obeys eps**2 = 0, so every arithmetic operation
propagates the tangent t by the chain rule with no truncation error.
Seeding t = 1 and reading the tangent off the result differentiates any
expression the arithmetic can reach.
"""

import math

import numpy as np

from sensikit import DualScalar, MultiDual
from sensikit.dual import seed

# derivative of sin(x^2) at x = 1: push x = 1 + eps through the expression
x = DualScalar(1.0, 1.0)
y = np.sin(x * x)
print("sin(x^2) at x=1")
print(f"  value   {y.value:.15f}  (sin 1 = {math.sin(1.0):.15f})")
print(f"  tangent {y.tangent:.15f}  (2 cos 1 = {2 * math.cos(1.0):.15f})")

# the product rule is exact, not approximate
a, b = DualScalar(2.0, 3.0), DualScalar(4.0, 5.0)
print(f"\n(2 + 3eps)(4 + 5eps) = {(a * b).value} + {(a * b).tangent} eps  (exactly 8 + 22 eps)")

# multidual numbers carry one tangent slot per parameter, which yields a
# full gradient in one sweep
theta = seed([1.0, 2.0, 3.0])


def expression(p):
    return p[0] * p[1] + np.exp(p[2] / 3.0) * p[0]


out = expression(theta)
print("\ngradient of p0*p1 + exp(p2/3)*p0 at (1, 2, 3):")
print(f"  multidual  {out.tangents}")
print(f"  analytic   [{2 + math.e:.6f} {1.0:.6f} {math.e / 3:.6f}]")

# arities are fixed per computation; mixing them is a hard error
try:
    MultiDual(1.0, [1.0]) + MultiDual(1.0, [1.0, 0.0])
except ValueError as err:
    print(f"\nmixing arities raises: {err}")
