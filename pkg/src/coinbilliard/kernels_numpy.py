"""Vectorized numpy twin of the batch kernels in :mod:`coinbilliard.kernels`.

Same algorithm, run in lockstep over the whole batch with boolean masks.
"""

import numpy as np

from .kernels import (
    BISECT_REL,
    CORNER_HIT,
    CORNER_LAUNCH,
    EPS,
    ENERGY,
    F_TOL,
    LAUNCH_EPS,
    MAX_STEPS,
    NO_EVENT,
    OFF_SECTION,
    OK,
    TANGENCY,
    TANGENCY_SLOPE,
)


def corner_dist(theta):
    return np.abs(theta - np.pi * np.round(theta / np.pi))


def reflect_velocity(theta, thd, yd):
    s = np.sin(theta)
    c = np.cos(theta)
    sg = np.where(s > 0.0, 1.0, -1.0)
    d = 1.0 + c * c
    off = 2.0 * c * sg
    s2 = s * s
    return (s2 * thd + off * yd) / d, (off * thd - s2 * yd) / d


def _gap(theta0, y0, thd, yd, g, t):
    return y0 + yd * t - 0.5 * g * t * t - np.abs(np.sin(theta0 + thd * t))


def _gap_rate(theta0, thd, yd, g, t):
    th = theta0 + thd * t
    sg = np.where(np.sin(th) >= 0.0, 1.0, -1.0)
    return yd - g * t - sg * np.cos(th) * thd


def flight(theta0, y0, thd, yd, g, corner_tol):
    """Batched first-crossing search; returns ``(t, theta1, y1, yd1, status)``."""
    theta0, y0, thd, yd = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (theta0, y0, thd, yd)))
    n = theta0.shape
    ts = np.maximum((np.abs(yd) + np.sqrt(yd * yd + 2.0 * g * np.maximum(y0, 0.0))) / g, np.sqrt(2.0 / g))
    hmax = np.full(n, 0.1 * np.sqrt(2.0 / g))
    nz = thd != 0.0
    hmax[nz] = np.minimum(hmax[nz], 0.1 / np.abs(thd[nz]))

    t = LAUNCH_EPS * ts
    t_lo = t.copy()
    t_hi = np.full(n, -1.0)
    status = np.full(n, NO_EVENT, dtype=np.int64)
    active = np.ones(n, dtype=bool)

    for _ in range(MAX_STEPS):
        if not active.any():
            break
        idx = np.nonzero(active)
        th0, y0a, thda, yda, ta = theta0[idx], y0[idx], thd[idx], yd[idx], t[idx]
        y = y0a + yda * ta - 0.5 * g * ta * ta
        F = y - np.abs(np.sin(th0 + thda * ta))
        new_t = ta.copy()
        new_lo = t_lo[idx].copy()
        new_hi = t_hi[idx].copy()
        new_st = status[idx].copy()
        done = np.zeros(ta.shape, dtype=bool)

        high = y > 1.0 + 1e-12
        if high.any():
            disc = yda[high] ** 2 + 2.0 * g * (y0a[high] - 1.0)
            t_down = (yda[high] + np.sqrt(np.maximum(disc, 0.0))) / g
            t_down = np.where(t_down <= ta[high], ta[high] + hmax[idx][high], t_down)
            new_lo[high] = ta[high]
            new_t[high] = t_down
            hit = _gap(th0[high], y0a[high], thda[high], yda[high], g, t_down) <= 0.0
            hi_idx = np.nonzero(high)[0][hit]
            new_hi[hi_idx] = t_down[hit]
            new_st[hi_idx] = OK
            done[hi_idx] = True

        low = ~high
        crossed = low & (F <= 0.0)
        new_hi[crossed] = ta[crossed]
        new_st[crossed] = OK
        done[crossed] = True

        ftol = F_TOL + 4.0 * EPS * (ta * (np.abs(yda - g * ta) + np.abs(thda)) + 1.0)
        near = low & ~crossed & (F < ftol)
        step = low & ~crossed
        if near.any():
            Fp = _gap_rate(th0[near], thda[near], yda[near], g, ta[near])
            near_idx = np.nonzero(near)[0]
            ahead = Fp < -TANGENCY_SLOPE
            graze = ~ahead & (Fp < TANGENCY_SLOPE)
            if ahead.any():
                ai = near_idx[ahead]
                h = 2.0 * F[ai] / (-Fp[ahead]) + 1e-300
                for _k in range(200):
                    pos = _gap(th0[ai], y0a[ai], thda[ai], yda[ai], g, ta[ai] + h) > 0.0
                    if not pos.any():
                        break
                    h = np.where(pos, 2.0 * h, h)
                new_lo[ai] = ta[ai]
                new_hi[ai] = ta[ai] + h
                new_st[ai] = OK
                done[ai] = True
                step[ai] = False
            if graze.any():
                gi = near_idx[graze]
                new_st[gi] = TANGENCY
                done[gi] = True
                step[gi] = False
        if step.any():
            L = np.abs(yda[step] - g * ta[step]) + g * hmax[idx][step] + np.abs(thda[step])
            h = np.minimum(F[step] / L, hmax[idx][step])
            new_lo[step] = ta[step]
            new_t[step] = ta[step] + h

        t[idx] = new_t
        t_lo[idx] = new_lo
        t_hi[idx] = new_hi
        status[idx] = new_st
        fin = np.zeros(n, dtype=bool)
        fin[idx] = done
        active &= ~fin

    ok = status == OK
    tol = BISECT_REL * ts
    lo = np.where(ok, t_lo, 0.0)
    hi = np.where(ok, t_hi, 0.0)
    for _ in range(400):
        open_ = ok & (hi - lo > tol)
        if not open_.any():
            break
        tm = 0.5 * (lo + hi)
        open_ &= (tm > lo) & (tm < hi)
        if not open_.any():
            break
        pos = _gap(theta0, y0, thd, yd, g, tm) > 0.0
        lo = np.where(open_ & pos, tm, lo)
        hi = np.where(open_ & ~pos, tm, hi)

    t = np.where(ok, hi, t)
    polish = ok.copy()
    for _ in range(2):
        Fv = _gap(theta0, y0, thd, yd, g, t)
        Fp = _gap_rate(theta0, thd, yd, g, t)
        with np.errstate(divide="ignore", invalid="ignore"):
            tn = t - Fv / Fp
        good = polish & (Fp != 0.0) & (tn >= lo - tol) & (tn <= hi + tol)
        polish &= good
        t = np.where(good, tn, t)

    th1 = theta0 + thd * t
    y1 = y0 + yd * t - 0.5 * g * t * t
    yd1 = yd - g * t
    Fp = _gap_rate(theta0, thd, yd, g, t)
    status = np.where(ok & (np.abs(Fp) < TANGENCY_SLOPE), TANGENCY, status)
    status = np.where((status == OK) & (corner_dist(th1) < corner_tol), CORNER_HIT, status)
    return t, th1, y1, yd1, status


def return_map_batch(theta, thd, E, g, corner_tol):
    theta = np.asarray(theta, dtype=np.float64)
    thd = np.asarray(thd, dtype=np.float64)
    y0 = np.abs(np.sin(theta))
    rad = 2.0 * E - 2.0 * g * y0 - thd * thd
    bad_corner = corner_dist(theta) < corner_tol
    bad_energy = ~bad_corner & ~(rad > 0.0)
    good = ~(bad_corner | bad_energy)
    yd = -np.sqrt(np.where(good, rad, 1.0))
    thp, ydp = reflect_velocity(theta, thd, yd)
    out_t = theta.copy()
    out_d = thd.copy()
    st = np.zeros(theta.shape, dtype=np.int64)
    st[bad_corner] = CORNER_LAUNCH
    st[bad_energy] = ENERGY
    if good.any():
        _t, th1, _y1, yd1, fst = flight(theta[good], y0[good], thp[good], ydp[good], g, corner_tol)
        fst = np.where((fst == OK) & (yd1 >= 0.0), OFF_SECTION, fst)
        out_t[good] = th1
        out_d[good] = thp[good]
        st[good] = fst
    return out_t, out_d, st


def inverse_map_batch(theta1, thd1, E, g, corner_tol):
    theta1 = np.asarray(theta1, dtype=np.float64)
    thd1 = np.asarray(thd1, dtype=np.float64)
    y1 = np.abs(np.sin(theta1))
    rad = 2.0 * E - 2.0 * g * y1 - thd1 * thd1
    bad_corner = corner_dist(theta1) < corner_tol
    bad_energy = ~bad_corner & ~(rad > 0.0)
    good = ~(bad_corner | bad_energy)
    yd1 = -np.sqrt(np.where(good, rad, 1.0))
    out_t = theta1.copy()
    out_d = thd1.copy()
    st = np.zeros(theta1.shape, dtype=np.int64)
    st[bad_corner] = CORNER_LAUNCH
    st[bad_energy] = ENERGY
    if good.any():
        _t, th, _y, vy, fst = flight(theta1[good], y1[good], -thd1[good], -yd1[good], g, corner_tol)
        thd, yd = reflect_velocity(th, thd1[good], -vy)
        fst = np.where((fst == OK) & (yd >= 0.0), OFF_SECTION, fst)
        out_t[good] = th
        out_d[good] = np.where((fst == OK) | (fst == OFF_SECTION), thd, thd1[good])
        st[good] = fst
    return out_t, out_d, st


def reflect_plus_batch(theta, thd, E, g):
    theta = np.asarray(theta, dtype=np.float64)
    thd = np.asarray(thd, dtype=np.float64)
    rad = 2.0 * E - 2.0 * g * np.abs(np.sin(theta)) - thd * thd
    with np.errstate(invalid="ignore"):
        thp, _ = reflect_velocity(theta, thd, -np.sqrt(rad))
    return np.where(rad > 0.0, thp, np.nan)
