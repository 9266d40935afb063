"""Billiard flow: reflection, free flight, return map, inverse and Jacobian."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from . import kernels as K
from .core import CORNER_TOL, CoinParams, FullState, PhasePoint, corner_distance, energy_of
from .errors import (
    BranchCrossing,
    CornerAngle,
    CornerCollision,
    EnergyDeficit,
    OffSection,
    TangencyUnresolved,
)


class FlightParabola(NamedTuple):
    """``y = alpha (theta - beta)**2 + gamma``; ``degenerate`` marks vertical flight."""

    alpha: float
    beta: float
    gamma: float
    degenerate: bool = False

    def height(self, theta):
        return self.alpha * (theta - self.beta) ** 2 + self.gamma


class Jacobian2(NamedTuple):
    d_theta1_d_theta: float
    d_theta1_d_thd: float
    d_thd1_d_theta: float
    d_thd1_d_thd: float

    def as_array(self) -> np.ndarray:
        return np.array([[self.d_theta1_d_theta, self.d_theta1_d_thd], [self.d_thd1_d_theta, self.d_thd1_d_thd]])

    @property
    def det(self) -> float:
        return self.d_theta1_d_theta * self.d_thd1_d_thd - self.d_theta1_d_thd * self.d_thd1_d_theta


def raise_for_status(status: int, where: str = "") -> None:
    if status == K.OK:
        return
    msg = f"{K.STATUS_NAMES[int(status)]} {where}".strip()
    if status == K.CORNER_LAUNCH:
        raise CornerAngle(msg)
    if status == K.CORNER_HIT:
        raise CornerCollision(msg)
    if status == K.ENERGY:
        raise EnergyDeficit(msg)
    if status == K.OFF_SECTION:
        raise OffSection(msg)
    raise TangencyUnresolved(msg)


def parabola_from_launch(theta, y, thd, yd, g) -> FlightParabola:
    if thd == 0.0:
        return FlightParabola(-math.inf, theta, y + yd * yd / (2.0 * g), True)
    beta = theta + thd * yd / g
    gamma = y + yd * yd / (2.0 * g)
    return FlightParabola(-g / (2.0 * thd * thd), beta, gamma)


def reflect(s: FullState, corner_tol: float = CORNER_TOL) -> FullState:
    """Elastic reflection at the footpoint; position unchanged, speed preserved."""
    if corner_distance(s.theta) < corner_tol:
        raise CornerAngle(f"theta={s.theta} is a corner")
    thd, yd = K.reflect_velocity(s.theta, s.theta_dot, s.y_dot)
    side = "post-collision" if s.side == "pre-collision" else "pre-collision"
    return FullState(s.theta, s.y, thd, yd, side)


def fly_to_next_collision(s: FullState, params: CoinParams, corner_tol: float = CORNER_TOL) -> FullState:
    t, th1, y1, yd1, st = K.flight(s.theta, s.y, s.theta_dot, s.y_dot, params.g_eff, corner_tol)
    raise_for_status(st, f"after flight from theta={s.theta}")
    return FullState(th1, y1, s.theta_dot, yd1, "pre-collision")


def flight_time(s: FullState, params: CoinParams, corner_tol: float = CORNER_TOL) -> float:
    t, *_rest, st = K.flight(s.theta, s.y, s.theta_dot, s.y_dot, params.g_eff, corner_tol)
    raise_for_status(st)
    return t


def return_map(p: PhasePoint, params: CoinParams, corner_tol: float = CORNER_TOL):
    """One collision to the next: ``(PhasePoint, FlightParabola)``."""
    th1, thd1, t, thp, ydp, st = K.return_map_scalar(float(p.theta), float(p.theta_dot), params.E, params.g_eff, corner_tol)
    raise_for_status(st, f"from {tuple(p)}")
    parab = parabola_from_launch(p.theta, abs(math.sin(p.theta)), thp, ydp, params.g_eff)
    return PhasePoint(th1, thd1), parab


def inverse_return_map(p: PhasePoint, params: CoinParams, corner_tol: float = CORNER_TOL) -> PhasePoint:
    th, thd, st = K.inverse_map_scalar(float(p.theta), float(p.theta_dot), params.E, params.g_eff, corner_tol)
    raise_for_status(st, f"inverse from {tuple(p)}")
    return PhasePoint(th, thd)


def iterate(p: PhasePoint, n: int, params: CoinParams, corner_tol: float = CORNER_TOL) -> list[PhasePoint]:
    """``[p, f(p), ..., f^n(p)]``."""
    from .errors import StepError, CoinError

    orbit = [PhasePoint(float(p.theta), float(p.theta_dot))]
    for i in range(n):
        try:
            q, _ = return_map(orbit[-1], params, corner_tol)
        except CoinError as exc:
            raise StepError(i, exc) from exc
        orbit.append(q)
    return orbit


def return_map_batch(theta, theta_dot, params: CoinParams, corner_tol: float = CORNER_TOL):
    """Arrays ``(theta1, theta_dot1, status)``; statuses are :mod:`kernels` codes."""
    return K.return_map_batch(theta, theta_dot, params.E, params.g_eff, corner_tol)


def inverse_map_batch(theta, theta_dot, params: CoinParams, corner_tol: float = CORNER_TOL):
    return K.inverse_map_batch(theta, theta_dot, params.E, params.g_eff, corner_tol)


def _collision_data(p: PhasePoint, params: CoinParams, corner_tol: float):
    th1, thd1, t, thp, ydp, st = K.return_map_scalar(float(p.theta), float(p.theta_dot), params.E, params.g_eff, corner_tol)
    raise_for_status(st)
    g = params.g_eff
    yd = -math.sqrt(2.0 * params.E - 2.0 * g * abs(math.sin(p.theta)) - p.theta_dot**2)
    yd1 = ydp - g * t
    return yd, thp, ydp, th1, thd1, yd1


def jacobian_analytic(p: PhasePoint, params: CoinParams, corner_tol: float = CORNER_TOL) -> Jacobian2:
    """Closed-form derivative of the return map, chained through the reflection.

    The arc signs ``sgn(sin theta)`` and ``sgn(sin theta1)`` select the branch
    of the boundary at launch and at arrival.
    """
    theta, thd = float(p.theta), float(p.theta_dot)
    g = params.g_eff
    yd, thp, ydp, th1, thd1, yd1 = _collision_data(p, params, corner_tol)
    s, c = math.sin(theta), math.cos(theta)
    sg = 1.0 if s > 0 else -1.0
    sg1 = 1.0 if math.sin(th1) > 0 else -1.0
    D = 1.0 + c * c

    dthp_dth = (2.0 * thd * math.sin(2.0 * theta) - 2.0 * sg * s**3 * yd - 2.0 * g * c * c * D / yd) / D**2
    dthp_dthd = (s * s - 2.0 * sg * thd * c / yd) / D

    denom = yd1 - sg1 * thd1 * math.cos(th1)
    if abs(denom) < K.TANGENCY_SLOPE:
        raise TangencyUnresolved(f"grazing arrival at theta1={th1}")
    dth1_dthp_pos = yd1 * (ydp - sg * thp * c) / (ydp * denom)
    dth1_dthp_vel = (ydp - yd1) * (ydp * yd1 + thd1 * thd1) / (g * ydp * denom)

    return Jacobian2(
        dth1_dthp_pos + dth1_dthp_vel * dthp_dth,
        dth1_dthp_vel * dthp_dthd,
        dthp_dth,
        dthp_dthd,
    )


def jacobian_determinant(p: PhasePoint, params: CoinParams, corner_tol: float = CORNER_TOL) -> float:
    """Determinant of the return-map Jacobian as a single closed-form product."""
    theta, thd = float(p.theta), float(p.theta_dot)
    yd, thp, ydp, th1, thd1, yd1 = _collision_data(p, params, corner_tol)
    s, c = math.sin(theta), math.cos(theta)
    sg = 1.0 if s > 0 else -1.0
    sg1 = 1.0 if math.sin(th1) > 0 else -1.0
    num = yd1 * (ydp - sg * thd1 * c) * (-2.0 * sg * thd * c + yd * s * s)
    den = yd * ydp * (1.0 + c * c) * (yd1 - sg1 * thd1 * math.cos(th1))
    return num / den


def default_fd_step(p: PhasePoint) -> float:
    return 1e-6 * max(1.0, abs(p.theta_dot))


def jacobian_fd(p: PhasePoint, params: CoinParams, h: float | None = None, corner_tol: float = CORNER_TOL) -> Jacobian2:
    """Central-difference Jacobian; refuses stencils that straddle a corner."""
    if h is None:
        h = default_fd_step(p)
    theta, thd = float(p.theta), float(p.theta_dot)
    if math.floor((theta - h) / math.pi) != math.floor((theta + h) / math.pi):
        raise BranchCrossing(f"stencil [{theta - h}, {theta + h}] straddles a corner")
    pts = [(theta + h, thd), (theta - h, thd), (theta, thd + h), (theta, thd - h)]
    out = []
    for th, td in pts:
        th1, thd1, _t, _p, _y, st = K.return_map_scalar(th, td, params.E, params.g_eff, corner_tol)
        if st not in (K.OK, K.CORNER_HIT):
            raise_for_status(st)
        out.append((th1, thd1))
    arcs = {math.floor(o[0] / math.pi) for o in out}
    if len(arcs) > 1:
        raise BranchCrossing(f"perturbed images land on arcs {sorted(arcs)}")
    (a1, b1), (a2, b2), (a3, b3), (a4, b4) = out
    return Jacobian2((a1 - a2) / (2 * h), (a3 - a4) / (2 * h), (b1 - b2) / (2 * h), (b3 - b4) / (2 * h))


def simulate_full(s0: FullState, n: int, params: CoinParams, corner_tol: float = CORNER_TOL) -> list[FullState]:
    """Alternate reflect and flight ``n`` times from a pre-collision state.

    Works on full states without re-deriving ``y_dot`` from the energy, so the
    energy drift it accumulates is that of the integrator itself.
    """
    states = [s0]
    s = s0
    for _ in range(n):
        s = fly_to_next_collision(reflect(s, corner_tol), params, corner_tol)
        states.append(s)
    return states


__all__ = [
    "FlightParabola",
    "Jacobian2",
    "energy_of",
    "flight_time",
    "fly_to_next_collision",
    "inverse_map_batch",
    "inverse_return_map",
    "iterate",
    "jacobian_analytic",
    "jacobian_determinant",
    "jacobian_fd",
    "reflect",
    "return_map",
    "return_map_batch",
    "simulate_full",
]
