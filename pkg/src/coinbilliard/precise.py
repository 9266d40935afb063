"""Extended-precision return map built on mpmath.

Orbits in the horseshoe separate by a factor of roughly ``8E`` per collision,
so a prescribed itinerary of twelve symbols pins the initial angle to far
below double precision.  The double kernel supplies the flight time of the
first crossing (which root to take) and Newton's method on the event function
polishes it to the working precision.
"""

from __future__ import annotations

import math

import mpmath
from mpmath import mp, mpf

from . import kernels as K
from .core import CORNER_TOL, CoinParams
from .dynamics import raise_for_status
from .errors import EnergyDeficit, OffSection, TangencyUnresolved


def auto_dps(n_steps: int, E: float, guard: int = 30) -> int:
    """Decimal digits needed to follow ``n_steps`` expanding collisions at energy ``E``."""
    per_step = math.ceil(math.log10(8.0 * E) + 1.0)
    return guard + (n_steps + 1) * per_step


def mp_return_map(theta, theta_dot, params: CoinParams, corner_tol: float = CORNER_TOL):
    """``(theta1, theta_dot1)`` at the current ``mp.dps``; inputs may be floats or ``mpf``."""
    theta, thd = mpf(theta), mpf(theta_dot)
    E, g = mpf(params.E), mpf(params.g_eff)
    s, c = mpmath.sin(theta), mpmath.cos(theta)
    sg = 1 if s > 0 else -1
    y0 = abs(s)
    rad = 2 * E - 2 * g * y0 - thd * thd
    if rad <= 0:
        raise EnergyDeficit(f"radicand {rad} <= 0")
    yd = -mpmath.sqrt(rad)
    D = 1 + c * c
    thp = (s * s * thd + 2 * c * sg * yd) / D
    ydp = (2 * c * sg * thd - s * s * yd) / D

    t0, th1f, _y1, _yd1, st = K.flight(float(theta), float(y0), float(thp), float(ydp), float(g), corner_tol)
    raise_for_status(st, f"from theta={float(theta)}")
    sg1 = 1 if math.sin(th1f) > 0 else -1

    t = mpf(t0)
    tol = mpf(2) ** (-mp.prec + 8) * abs(t)
    for _ in range(60):
        th = theta + thp * t
        G = y0 + ydp * t - g * t * t / 2 - sg1 * mpmath.sin(th)
        Gp = ydp - g * t - sg1 * mpmath.cos(th) * thp
        dt = G / Gp
        t -= dt
        if abs(dt) <= tol:
            break
    else:
        raise TangencyUnresolved(f"Newton polish of the flight time did not converge at theta={float(theta)}")
    if ydp - g * t >= 0:
        raise OffSection(f"arrival moves upward after launch from theta={float(theta)}")
    return theta + thp * t, thp


def mp_orbit(theta, theta_dot, n: int, params: CoinParams, corner_tol: float = CORNER_TOL):
    pts = [(mpf(theta), mpf(theta_dot))]
    for _ in range(n):
        pts.append(mp_return_map(*pts[-1], params, corner_tol))
    return pts
