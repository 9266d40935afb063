"""Hot loops of the billiard: reflection, first-crossing event search, return map.

Kernels never raise; they return a status code alongside their values so they
can run inside ``numba`` and inside vectorized batches.  The public wrappers in
:mod:`coinbilliard.dynamics` turn codes into exceptions.
"""

import math

import numpy as np

from ._backend import USE_NUMBA, njit, prange

OK = 0
CORNER_LAUNCH = 1
CORNER_HIT = 2
TANGENCY = 3
ENERGY = 4
NO_EVENT = 5
OFF_SECTION = 6

STATUS_NAMES = {
    OK: "ok",
    CORNER_LAUNCH: "corner angle",
    CORNER_HIT: "corner collision",
    TANGENCY: "tangency unresolved",
    ENERGY: "energy deficit",
    NO_EVENT: "no event found",
    OFF_SECTION: "pre-image not on the downward section",
}

#: launch exclusion, in units of the flight time scale
LAUNCH_EPS = 1e-12
#: bisection stops once the bracket is this small relative to the time scale
BISECT_REL = 1e-14
#: event function value below which the root is considered adjacent
F_TOL = 1e-12
#: |dF/dt| below which a contact is treated as grazing
TANGENCY_SLOPE = 1e-9
MAX_STEPS = 200000
EPS = 2.220446049250313e-16


@njit(cache=True)
def corner_dist(theta):
    return abs(theta - math.pi * round(theta / math.pi))


@njit(cache=True)
def reflect_velocity(theta, thd, yd):
    """Mirror reflection of ``(thd, yd)`` across the normal of ``y = |sin theta|``."""
    s = math.sin(theta)
    c = math.cos(theta)
    sg = 1.0 if s > 0.0 else -1.0
    d = 1.0 + c * c
    off = 2.0 * c * sg
    s2 = s * s
    return (s2 * thd + off * yd) / d, (off * thd - s2 * yd) / d


@njit(cache=True)
def _gap(theta0, y0, thd, yd, g, t):
    return y0 + yd * t - 0.5 * g * t * t - abs(math.sin(theta0 + thd * t))


@njit(cache=True)
def _gap_rate(theta0, thd, yd, g, t):
    th = theta0 + thd * t
    sg = 1.0 if math.sin(th) >= 0.0 else -1.0
    return yd - g * t - sg * math.cos(th) * thd


@njit(cache=True)
def time_scale(y0, yd, g):
    ts = (abs(yd) + math.sqrt(yd * yd + 2.0 * g * max(y0, 0.0))) / g
    return max(ts, math.sqrt(2.0 / g))


@njit(cache=True)
def flight(theta0, y0, thd, yd, g, corner_tol):
    """First boundary crossing of the parabola launched at ``(theta0, y0)``.

    Returns ``(t, theta1, y1, yd1, status)`` with the arrival (pre-collision)
    vertical velocity ``yd1``.  The search jumps analytically over the arc
    where ``y > 1`` (no contact is possible above the sine peaks) and elsewhere
    advances by steps that provably cannot skip a root: the gap
    ``y - |sin theta|`` has rate bounded by ``|y_dot| + g h + |thd|``.
    """
    ts = time_scale(y0, yd, g)
    hmax = 0.1 * math.sqrt(2.0 / g)
    if thd != 0.0:
        hmax = min(hmax, 0.1 / abs(thd))
    t = LAUNCH_EPS * ts
    t_lo = t
    t_hi = -1.0
    status = NO_EVENT
    for _ in range(MAX_STEPS):
        y = y0 + yd * t - 0.5 * g * t * t
        if y > 1.0 + 1e-12:
            disc = yd * yd + 2.0 * g * (y0 - 1.0)
            t_down = (yd + math.sqrt(max(disc, 0.0))) / g
            t_lo = t
            if t_down <= t:
                t_down = t + hmax
            t = t_down
            if _gap(theta0, y0, thd, yd, g, t) <= 0.0:
                t_hi = t
                status = OK
                break
            continue
        F = y - abs(math.sin(theta0 + thd * t))
        if F <= 0.0:
            t_hi = t
            status = OK
            break
        # the gap cannot be resolved below the rounding of t itself
        ftol = F_TOL + 4.0 * EPS * (t * (abs(yd - g * t) + abs(thd)) + 1.0)
        if F < ftol:
            Fp = _gap_rate(theta0, thd, yd, g, t)
            if Fp < -TANGENCY_SLOPE:
                h = 2.0 * F / (-Fp) + 1e-300
                t_lo = t
                for _k in range(200):
                    if _gap(theta0, y0, thd, yd, g, t + h) <= 0.0:
                        break
                    h *= 2.0
                t_hi = t + h
                status = OK
                break
            if Fp < TANGENCY_SLOPE:
                return t, theta0 + thd * t, y, yd - g * t, TANGENCY
        L = abs(yd - g * t) + g * hmax + abs(thd)
        h = F / L
        if h > hmax:
            h = hmax
        t_lo = t
        t = t + h
    if status != OK:
        return t, theta0 + thd * t, y0 + yd * t - 0.5 * g * t * t, yd - g * t, NO_EVENT

    tol = BISECT_REL * ts
    for _ in range(400):
        if t_hi - t_lo <= tol:
            break
        tm = 0.5 * (t_lo + t_hi)
        if tm <= t_lo or tm >= t_hi:
            break
        if _gap(theta0, y0, thd, yd, g, tm) > 0.0:
            t_lo = tm
        else:
            t_hi = tm
    t = t_hi
    for _ in range(2):
        Fv = _gap(theta0, y0, thd, yd, g, t)
        Fp = _gap_rate(theta0, thd, yd, g, t)
        if Fp == 0.0:
            break
        tn = t - Fv / Fp
        if tn < t_lo - tol or tn > t_hi + tol:
            break
        t = tn
    Fp = _gap_rate(theta0, thd, yd, g, t)
    th1 = theta0 + thd * t
    y1 = y0 + yd * t - 0.5 * g * t * t
    yd1 = yd - g * t
    if abs(Fp) < TANGENCY_SLOPE:
        return t, th1, y1, yd1, TANGENCY
    if corner_dist(th1) < corner_tol:
        return t, th1, y1, yd1, CORNER_HIT
    return t, th1, y1, yd1, OK


@njit(cache=True)
def return_map_scalar(theta, thd, E, g, corner_tol):
    """``(theta1, thd1, t, thd_plus, yd_plus, status)`` for one collision."""
    if corner_dist(theta) < corner_tol:
        return theta, thd, 0.0, thd, 0.0, CORNER_LAUNCH
    y0 = abs(math.sin(theta))
    rad = 2.0 * E - 2.0 * g * y0 - thd * thd
    if rad <= 0.0:
        return theta, thd, 0.0, thd, 0.0, ENERGY
    yd = -math.sqrt(rad)
    thp, ydp = reflect_velocity(theta, thd, yd)
    t, th1, y1, yd1, st = flight(theta, y0, thp, ydp, g, corner_tol)
    if st == OK and yd1 >= 0.0:
        # rising into the boundary: a collision, but not on the downward section
        st = OFF_SECTION
    return th1, thp, t, thp, ydp, st


@njit(cache=True)
def inverse_map_scalar(theta1, thd1, E, g, corner_tol):
    """Time-reversed return map: ``(theta, thd, status)``."""
    if corner_dist(theta1) < corner_tol:
        return theta1, thd1, CORNER_LAUNCH
    y1 = abs(math.sin(theta1))
    rad = 2.0 * E - 2.0 * g * y1 - thd1 * thd1
    if rad <= 0.0:
        return theta1, thd1, ENERGY
    yd1 = -math.sqrt(rad)
    t, th, y, vy, st = flight(theta1, y1, -thd1, -yd1, g, corner_tol)
    if st == CORNER_HIT:
        return th, thd1, CORNER_HIT
    if st != OK:
        return th, thd1, st
    # negated arrival velocity is the post-collision velocity; reflect is an involution
    thd, yd = reflect_velocity(th, thd1, -vy)
    if yd >= 0.0:
        return th, thd, OFF_SECTION
    return th, thd, OK


@njit(cache=True)
def reflect_plus_scalar(theta, thd, E, g):
    """Post-collision angular velocity only (no flight)."""
    y0 = abs(math.sin(theta))
    rad = 2.0 * E - 2.0 * g * y0 - thd * thd
    if rad <= 0.0:
        return math.nan
    thp, _ = reflect_velocity(theta, thd, -math.sqrt(rad))
    return thp


@njit(cache=True, parallel=False)
def _return_map_batch_nb(theta, thd, E, g, corner_tol, out_theta, out_thd, out_status):
    for i in prange(theta.shape[0]):
        th1, thd1, _t, _tp, _yp, st = return_map_scalar(theta[i], thd[i], E, g, corner_tol)
        out_theta[i] = th1
        out_thd[i] = thd1
        out_status[i] = st


@njit(cache=True, parallel=False)
def _inverse_map_batch_nb(theta, thd, E, g, corner_tol, out_theta, out_thd, out_status):
    for i in prange(theta.shape[0]):
        th, td, st = inverse_map_scalar(theta[i], thd[i], E, g, corner_tol)
        out_theta[i] = th
        out_thd[i] = td
        out_status[i] = st


@njit(cache=True)
def _reflect_plus_batch_nb(theta, thd, E, g, out):
    for i in range(theta.shape[0]):
        out[i] = reflect_plus_scalar(theta[i], thd[i], E, g)


def return_map_batch(theta, thd, E, g, corner_tol):
    """Vectorized return map; ``(theta1, thd1, status)`` arrays."""
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    thd = np.ascontiguousarray(np.broadcast_to(thd, theta.shape), dtype=np.float64)
    if not USE_NUMBA:
        from . import kernels_numpy

        return kernels_numpy.return_map_batch(theta, thd, E, g, corner_tol)
    shape = theta.shape
    th_f, td_f = theta.ravel(), thd.ravel()
    out_t = np.empty_like(th_f)
    out_d = np.empty_like(th_f)
    out_s = np.empty(th_f.shape, dtype=np.int64)
    _return_map_batch_nb(th_f, td_f, float(E), float(g), float(corner_tol), out_t, out_d, out_s)
    return out_t.reshape(shape), out_d.reshape(shape), out_s.reshape(shape)


def inverse_map_batch(theta, thd, E, g, corner_tol):
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    thd = np.ascontiguousarray(np.broadcast_to(thd, theta.shape), dtype=np.float64)
    if not USE_NUMBA:
        from . import kernels_numpy

        return kernels_numpy.inverse_map_batch(theta, thd, E, g, corner_tol)
    shape = theta.shape
    th_f, td_f = theta.ravel(), thd.ravel()
    out_t = np.empty_like(th_f)
    out_d = np.empty_like(th_f)
    out_s = np.empty(th_f.shape, dtype=np.int64)
    _inverse_map_batch_nb(th_f, td_f, float(E), float(g), float(corner_tol), out_t, out_d, out_s)
    return out_t.reshape(shape), out_d.reshape(shape), out_s.reshape(shape)


def reflect_plus_batch(theta, thd, E, g):
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    thd = np.ascontiguousarray(np.broadcast_to(thd, theta.shape), dtype=np.float64)
    if not USE_NUMBA:
        from . import kernels_numpy

        return kernels_numpy.reflect_plus_batch(theta, thd, E, g)
    out = np.empty(theta.size)
    _reflect_plus_batch_nb(theta.ravel(), thd.ravel(), float(E), float(g), out)
    return out.reshape(theta.shape)
