"""Butcher tableaus for the explicit Runge-Kutta steppers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class ButcherTableau:
    """Coefficients of an explicit s-stage Runge-Kutta scheme.

    ``a`` is strictly lower triangular, ``b`` the update weights, ``b_hat``
    the lower-order embedded weights when the pair provides an error
    estimate, and ``c`` the stage abscissae.  ``order`` is the convergence
    order of the ``b`` update, ``embedded_order`` that of ``b_hat``.
    """

    name: str
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    order: int
    b_hat: Optional[np.ndarray] = None
    embedded_order: Optional[int] = None
    fsal: bool = False

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        c = np.asarray(self.c, dtype=float)
        s = b.size
        if a.shape != (s, s):
            raise ValueError("a must be s x s")
        if np.any(np.triu(a) != 0.0):
            raise ValueError("explicit tableau requires a[i, j] = 0 for i <= j")
        if abs(b.sum() - 1.0) > 1e-12:
            raise ValueError("weights b must sum to 1 (consistency)")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        if self.b_hat is not None:
            bh = np.asarray(self.b_hat, dtype=float)
            if bh.shape != b.shape:
                raise ValueError("embedded weights must match stage count")
            object.__setattr__(self, "b_hat", bh)

    @property
    def stages(self) -> int:
        return self.b.size

    @property
    def is_embedded(self) -> bool:
        return self.b_hat is not None


EULER = ButcherTableau(
    name="euler",
    a=[[0.0]],
    b=[1.0],
    c=[0.0],
    order=1,
)

RK4 = ButcherTableau(
    name="rk4",
    a=[
        [0.0, 0.0, 0.0, 0.0],
        [0.5, 0.0, 0.0, 0.0],
        [0.0, 0.5, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
    ],
    b=[1 / 6, 1 / 3, 1 / 3, 1 / 6],
    c=[0.0, 0.5, 0.5, 1.0],
    order=4,
)

# Dormand-Prince 5(4): 5th-order update with an embedded 4th-order estimate.
# First-same-as-last: the 7th stage evaluates f at the accepted state, so an
# accepted step hands its last stage to the next step as stage 1.
DOPRI5 = ButcherTableau(
    name="dopri5",
    a=[
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [1 / 5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3 / 40, 9 / 40, 0.0, 0.0, 0.0, 0.0, 0.0],
        [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0, 0.0, 0.0],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0, 0.0, 0.0],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0.0, 0.0],
        [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0],
    ],
    b=[35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0],
    b_hat=[
        5179 / 57600,
        0.0,
        7571 / 16695,
        393 / 640,
        -92097 / 339200,
        187 / 2100,
        1 / 40,
    ],
    c=[0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0],
    order=5,
    embedded_order=4,
    fsal=True,
)

TABLEAUS = {"euler": EULER, "rk4": RK4, "dopri5": DOPRI5}
