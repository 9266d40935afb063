"""Rigid coin in physical coordinates: two point masses on a rod bouncing on ``Y = 0``.

This simulator shares no code with the billiard map.  Collisions are resolved
with an impulse at the touching endpoint, and flights are searched on the
endpoint heights ``Y_L`` and ``Y_R`` directly.  It serves as an oracle for the
rescaled billiard.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

from scipy.optimize import brentq

from .core import CORNER_TOL, CoinParams, PhasePoint
from .errors import NotInContact, SeparatingContact, SimultaneousContact, TangencyUnresolved
from .kernels import BISECT_REL, LAUNCH_EPS, TANGENCY_SLOPE

CONTACT_TOL = 1e-12


class PhysicalState(NamedTuple):
    Y: float
    theta: float
    Y_dot: float
    theta_dot: float


def endpoint_heights(s: PhysicalState, params: CoinParams) -> tuple[float, float]:
    half = params.l * math.sin(s.theta) / 2.0
    return s.Y - half, s.Y + half


def physical_energy(s: PhysicalState, params: CoinParams) -> float:
    return params.I * s.theta_dot**2 / 2.0 + params.m * s.Y_dot**2 / 2.0 + params.m * params.g * s.Y


def contact_velocity(s: PhysicalState, side: str, params: CoinParams) -> float:
    arm = params.l * math.cos(s.theta) / 2.0
    return s.Y_dot - arm * s.theta_dot if side == "L" else s.Y_dot + arm * s.theta_dot


def endpoint_impulse(s: PhysicalState, side: str, params: CoinParams) -> PhysicalState:
    """Elastic vertical impulse at endpoint ``side`` reversing its vertical velocity."""
    y_l, y_r = endpoint_heights(s, params)
    if (y_l if side == "L" else y_r) > CONTACT_TOL:
        raise NotInContact(f"endpoint {side} is above the floor")
    v_c = contact_velocity(s, side, params)
    if v_c >= 0.0:
        raise SeparatingContact(f"endpoint {side} moves away from the floor (v={v_c})")
    arm = params.l * math.cos(s.theta) / 2.0
    J = -2.0 * v_c / (1.0 / params.m + arm * arm / params.I)
    sign = -1.0 if side == "L" else 1.0
    return PhysicalState(s.Y, s.theta, s.Y_dot + J / params.m, s.theta_dot + sign * J * arm / params.I)


def _clearance(s: PhysicalState, t: float, params: CoinParams) -> float:
    """``min(Y_L, Y_R)`` after free flight for time ``t``."""
    Y = s.Y + s.Y_dot * t - params.g * t * t / 2.0
    return Y - params.l * abs(math.sin(s.theta + s.theta_dot * t)) / 2.0


def _advance(s: PhysicalState, t: float, params: CoinParams) -> PhysicalState:
    return PhysicalState(
        s.Y + s.Y_dot * t - params.g * t * t / 2.0,
        s.theta + s.theta_dot * t,
        s.Y_dot - params.g * t,
        s.theta_dot,
    )


def next_contact(s: PhysicalState, params: CoinParams, corner_tol: float = CORNER_TOL):
    """Flight to the first floor contact: ``(t, state at contact, side)``.

    Advances by steps no longer than ``clearance / rate bound`` so a contact is
    never stepped over, jumping straight across the stretch where the centre is
    higher than half the rod.  The bracketed root is polished with Brent's method.
    """
    g, half = params.g, params.l / 2.0
    ts = max((abs(s.Y_dot) + math.sqrt(s.Y_dot**2 + 2.0 * g * max(s.Y, 0.0))) / g, math.sqrt(2.0 * half / g))
    hmax = 0.1 * math.sqrt(2.0 * half / g)
    if s.theta_dot != 0.0:
        hmax = min(hmax, 0.1 / abs(s.theta_dot))
    t = LAUNCH_EPS * ts
    lo = hi = None
    for _ in range(1_000_000):
        Y = s.Y + s.Y_dot * t - g * t * t / 2.0
        if Y > half * (1.0 + 1e-12):
            t_down = (s.Y_dot + math.sqrt(max(s.Y_dot**2 + 2.0 * g * (s.Y - half), 0.0))) / g
            lo, t = t, max(t_down, t + hmax * 1e-3)
            continue
        c = Y - half * abs(math.sin(s.theta + s.theta_dot * t))
        if c <= 0.0:
            hi = t
            break
        rate = abs(s.Y_dot - g * t) + g * hmax + half * abs(s.theta_dot)
        floor_c = 1e-12 * half + 4.0 * 2.2e-16 * (t * rate + half)
        if c < floor_c:
            th = s.theta + s.theta_dot * t
            slope = s.Y_dot - g * t - half * math.copysign(1.0, math.sin(th)) * math.cos(th) * s.theta_dot
            if slope > -TANGENCY_SLOPE:
                raise TangencyUnresolved(f"grazing contact at t={t}")
            step = 2.0 * c / -slope
            while _clearance(s, t + step, params) > 0.0:
                step *= 2.0
            lo, hi = t, t + step
            break
        lo, t = t, t + min(c / rate, hmax)
    else:
        raise TangencyUnresolved("no contact found")
    if lo is None:
        lo = 0.0
    if _clearance(s, lo, params) > 0.0:
        t = brentq(lambda u: _clearance(s, u, params), lo, hi, xtol=BISECT_REL * ts, rtol=8.9e-16, maxiter=500)
    else:
        t = hi
    c_end = _advance(s, t, params)
    if abs(math.sin(c_end.theta)) * half < corner_tol * half:
        raise SimultaneousContact(f"both endpoints reach the floor at theta={c_end.theta}")
    side = "L" if math.sin(c_end.theta) > 0.0 else "R"
    return t, c_end, side


@dataclass
class CollisionRecord:
    index: int
    t: float
    state: PhysicalState
    side: str


def physical_simulate(s0: PhysicalState, n: int, params: CoinParams, corner_tol: float = CORNER_TOL):
    """Run ``n`` collisions; returns ``(records, coarse word)``.

    Each record holds the state just before the impulse.  A start already in
    contact and approaching the floor counts as the first collision.
    """
    records: list[CollisionRecord] = []
    s, clock = s0, 0.0
    y_l, y_r = endpoint_heights(s, params)
    if min(y_l, y_r) <= CONTACT_TOL:
        side = "L" if y_l <= y_r else "R"
        if contact_velocity(s, side, params) < 0.0:
            records.append(CollisionRecord(0, 0.0, s, side))
            s = endpoint_impulse(s, side, params)
    while len(records) < n:
        dt, s, side = next_contact(s, params, corner_tol)
        clock += dt
        records.append(CollisionRecord(len(records), clock, s, side))
        s = endpoint_impulse(_on_floor(s, side, params), side, params)
    return records, "".join(r.side for r in records)


def _on_floor(s: PhysicalState, side: str, params: CoinParams) -> PhysicalState:
    """Snap the touching endpoint onto ``Y = 0`` (removes root-finding residue)."""
    half = params.l * math.sin(s.theta) / 2.0
    return s._replace(Y=half if side == "L" else -half)


# ---------------------------------------------------------------------------
# coordinate bridge to the billiard


def to_billiard(s: PhysicalState, params: CoinParams) -> tuple[float, float, float, float]:
    """``(theta, y, theta_dot, y_dot)`` with ``y = sqrt(m/I) Y``."""
    r = 1.0 / params.height_scale
    return s.theta, r * s.Y, s.theta_dot, r * s.Y_dot


def from_billiard(theta, y, theta_dot, y_dot, params: CoinParams) -> PhysicalState:
    r = params.height_scale
    return PhysicalState(r * y, theta, r * y_dot, theta_dot)


def from_phase_point(p: PhasePoint, params: CoinParams) -> PhysicalState:
    """Pre-collision physical state for a billiard phase point (energy ``I E``)."""
    rad = 2.0 * params.E - 2.0 * params.g_eff * abs(math.sin(p.theta)) - p.theta_dot**2
    return from_billiard(p.theta, abs(math.sin(p.theta)), p.theta_dot, -math.sqrt(rad), params)


def physical_step(p: PhasePoint, params: CoinParams, corner_tol: float = CORNER_TOL) -> tuple[PhasePoint, str]:
    """One collision of the physical coin started from a billiard phase point."""
    s1, side1 = physical_replay(from_phase_point(p, params), params, corner_tol)
    return PhasePoint(s1.theta, s1.theta_dot), side1


def physical_replay(s: PhysicalState, params: CoinParams, corner_tol: float = CORNER_TOL) -> tuple[PhysicalState, str]:
    """Impulse at the touching endpoint of a pre-collision state, then fly to the next contact."""
    side = "L" if math.sin(s.theta) > 0.0 else "R"
    s = endpoint_impulse(_on_floor(s, side, params), side, params)
    _, c, side1 = next_contact(s, params, corner_tol)
    return c, side1


def write_trajectory_csv(path, records: list[CollisionRecord], params: CoinParams) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "Y", "theta", "Y_dot", "theta_dot", "event", "label"])
        for r in records:
            s = r.state
            w.writerow([repr(r.t), repr(s.Y), repr(s.theta), repr(s.Y_dot), repr(s.theta_dot), "collision", r.side])


# ---------------------------------------------------------------------------
# equivalence report


@dataclass
class CrosscheckReport:
    samples: int
    collisions: int
    max_deviation: float
    label_agreement: float
    free_run_horizon: list
    passed: bool

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "collisions": self.collisions,
            "max_deviation": self.max_deviation,
            "label_agreement": self.label_agreement,
            "free_run_horizon": self.free_run_horizon,
            "pass": self.passed,
        }


def random_phase_points(n: int, seed: int, rng=None) -> list[PhasePoint]:
    """Seeded starts away from the corners on both arcs, with ``|theta_dot| <= 1``."""
    import numpy as np

    rng = rng or np.random.default_rng(seed)
    out = []
    for _ in range(n):
        arc = rng.integers(0, 2)
        theta = arc * math.pi + rng.uniform(0.2, math.pi - 0.2)
        out.append(PhasePoint(float(theta), float(rng.uniform(-1.0, 1.0))))
    return out


def crosscheck(params: CoinParams, n: int = 100, samples: int = 20, seed: int = 0, tol: float = 1e-8, corner_tol: float = CORNER_TOL) -> CrosscheckReport:
    """Compare both simulators collision by collision along billiard orbits.

    The billiard orbit is followed with full states, so arrivals that rise
    into the boundary keep their true vertical velocity.  Each collision is
    replayed by the physical coin from the same state, which isolates the
    per-collision disagreement from the chaotic growth of earlier rounding.
    Deviations compare ``theta``, ``theta_dot`` and ``y_dot`` in billiard
    units.  ``free_run_horizon`` records how many labels two independent free
    runs share before they part.
    """
    from .core import to_full_state
    from .dynamics import fly_to_next_collision, reflect

    worst, agree, total, horizons = 0.0, 0, 0, []
    for p in random_phase_points(samples, seed):
        s = to_full_state(p, params)
        labels = ["L" if math.sin(s.theta) > 0 else "R"]
        for _ in range(n):
            nxt = fly_to_next_collision(reflect(s, corner_tol), params, corner_tol)
            phys, side = physical_replay(from_billiard(s.theta, s.y, s.theta_dot, s.y_dot, params), params, corner_tol)
            th, _y, thd, yd = to_billiard(phys, params)
            worst = max(worst, abs(nxt.theta - th), abs(nxt.theta_dot - thd), abs(nxt.y_dot - yd))
            label = "L" if math.sin(nxt.theta) > 0 else "R"
            agree += side == label
            total += 1
            labels.append(label)
            s = nxt
        _, word = physical_simulate(from_phase_point(p, params), n + 1, params, corner_tol)
        horizons.append(next((i for i, (a, b) in enumerate(zip(word, labels)) if a != b), len(word)))
    rate = agree / total
    return CrosscheckReport(samples, n, worst, rate, horizons, bool(worst <= tol and agree == total))
