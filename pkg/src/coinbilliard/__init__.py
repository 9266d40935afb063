"""Bouncing-coin billiard: return map, horseshoe strips and symbolic realization."""

from ._backend import backend_name
from .core import (
    CORNER_TOL,
    CoinParams,
    CylinderPoint,
    FullState,
    PhasePoint,
    coarse_label,
    energy_of,
    to_cylinder,
    to_full_state,
    wrap_theta,
    ydot_from,
)
from .dynamics import (
    FlightParabola,
    Jacobian2,
    fly_to_next_collision,
    inverse_return_map,
    jacobian_analytic,
    jacobian_determinant,
    jacobian_fd,
    reflect,
    return_map,
)
from .errors import CoinError

__version__ = "0.1.0"

__all__ = [
    "CORNER_TOL",
    "CoinError",
    "CoinParams",
    "CylinderPoint",
    "FlightParabola",
    "FullState",
    "Jacobian2",
    "PhasePoint",
    "backend_name",
    "coarse_label",
    "energy_of",
    "fly_to_next_collision",
    "inverse_return_map",
    "jacobian_analytic",
    "jacobian_determinant",
    "jacobian_fd",
    "reflect",
    "return_map",
    "to_cylinder",
    "to_full_state",
    "wrap_theta",
    "ydot_from",
]
