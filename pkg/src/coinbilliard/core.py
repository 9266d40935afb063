"""Domain types, energy bookkeeping and cylinder arithmetic.

All billiard quantities live in the rescaled (theta, y) plane where the coin
is a point mass with unit inertia.  With ``I = m l**2 / 4`` the height is
rescaled as ``Y = sqrt(I/m) y`` and the billiard sees

* gravity ``g_eff = g * sqrt(m / I)``
* energy ``E`` per unit inertia, ``theta_dot**2/2 + y_dot**2/2 + g_eff*y``

so the physical energy of the coin is ``I * E``.  With the default constants
``m = 1, l = 2`` both rescalings are the identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import CornerAngle, EnergyDeficit

TWO_PI = 2.0 * math.pi

#: distance from n*pi (radians) below which an angle counts as a corner
CORNER_TOL = 1e-9


@dataclass(frozen=True)
class CoinParams:
    """Physical constants of the coin and the billiard energy ``E``."""

    E: float = 1.0e4
    m: float = 1.0
    l: float = 2.0
    g: float = 1.0

    def __post_init__(self):
        for name in ("m", "l", "g"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.E > self.g_eff:
            raise EnergyDeficit(
                f"E={self.E} must exceed g_eff={self.g_eff} to reach the boundary peak"
            )

    @property
    def I(self) -> float:
        return self.m * self.l**2 / 4.0

    @property
    def g_eff(self) -> float:
        """Gravity seen by the point billiard, ``g sqrt(m/I) = 2 g / l``."""
        return self.g * math.sqrt(self.m / self.I)

    @property
    def height_scale(self) -> float:
        """``sqrt(I/m)``: physical height per unit billiard height."""
        return math.sqrt(self.I / self.m)

    def with_energy(self, E: float) -> "CoinParams":
        return replace(self, E=float(E))


class PhasePoint(NamedTuple):
    """Pre-collision state on the downward section, angle unwrapped."""

    theta: float
    theta_dot: float


class CylinderPoint(NamedTuple):
    theta_mod: float
    theta_dot: float


class FullState(NamedTuple):
    theta: float
    y: float
    theta_dot: float
    y_dot: float
    side: str = "in-flight"  # "pre-collision" | "post-collision" | "in-flight"


def energy_of(s: FullState, p: CoinParams) -> float:
    return 0.5 * s.theta_dot**2 + 0.5 * s.y_dot**2 + p.g_eff * s.y


def corner_distance(theta: float) -> float:
    """Distance from ``theta`` to the nearest multiple of pi."""
    return abs(theta - math.pi * round(theta / math.pi))


def ydot_from(p: PhasePoint, params: CoinParams) -> float:
    """Downward vertical velocity implied by energy conservation at the footpoint."""
    rad = 2.0 * params.E - 2.0 * params.g_eff * abs(math.sin(p.theta)) - p.theta_dot**2
    if not rad > 0:
        raise EnergyDeficit(f"radicand {rad} <= 0 at {tuple(p)}")
    return -math.sqrt(rad)


def to_full_state(p: PhasePoint, params: CoinParams) -> FullState:
    return FullState(p.theta, abs(math.sin(p.theta)), p.theta_dot, ydot_from(p, params), "pre-collision")


def wrap_theta(theta):
    """Map an angle (scalar or array) into ``[0, 2 pi)``."""
    w = np.mod(theta, TWO_PI)
    # np.mod can return exactly 2*pi for tiny negative inputs
    w = np.where(w >= TWO_PI, 0.0, w)
    return float(w) if np.ndim(w) == 0 else w


def to_cylinder(p: PhasePoint) -> CylinderPoint:
    return CylinderPoint(wrap_theta(p.theta), p.theta_dot)


def coarse_label(p, corner_tol: float = CORNER_TOL) -> str:
    """``'L'`` when the left mass hits (sin theta > 0), ``'R'`` otherwise."""
    theta = p.theta if hasattr(p, "theta") else float(p)
    if corner_distance(theta) < corner_tol:
        raise CornerAngle(f"theta={theta} is within {corner_tol} of a corner")
    return "L" if math.sin(theta) > 0 else "R"
