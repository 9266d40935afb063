"""Horseshoe geometry of the return map: the domain D, its strips and the CM checks.

Every strip boundary here is computed by root finding rather than by sampling
a grid.  The image of a rectangle is a band whose thickness is about ``1/(8E)``
of the rectangle height, far below any practical grid spacing, so membership
grids would miss the strips entirely.

Two facts drive the algorithms.  On D the landing angle ``theta1`` increases
with both ``theta`` and ``theta_dot``, and the post-collision velocity
``theta_dot_plus`` increases with ``theta``.  Hence the level set
``{theta1 = x}`` of a curvilinear rectangle is a single arc.  Its endpoints
lie on the "upper path" (left edge, then top) and on the "lower path" (bottom,
then right edge), and the image fibre over the column ``x`` is the segment
between their images.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.spatial.distance import directed_hausdorff

from . import kernels as K
from .core import CORNER_TOL, CoinParams
from .errors import (
    EnergyDeficit,
    GraphMismatch,
    ImageDisconnected,
    NoBracket,
    StripCountMismatch,
    TangencyUnresolved,
)

LABELS = ("L1", "L2", "L3", "R1", "R2", "R3")
BISECT_ITERS = 62


# ---------------------------------------------------------------------------
# k(E) and the domain


def eval_A(E: float, k: float, params: CoinParams | None = None) -> float:
    """Landing defect of corner point ``a``: zero when ``f(a)`` lands at ``theta_a - pi``.

    ``theta_a = pi/2 - k/E`` is never formed explicitly.  Its sine and cosine
    are ``cos(k/E)`` and ``sin(k/E)``, which keeps the expression accurate at
    large ``E``.
    """
    g = (params or CoinParams()).g_eff
    u = k / E
    s, c = math.cos(u), math.sin(u)
    thd = math.sqrt(2.0) * k / math.sqrt(E)
    rad = 2.0 * E - 2.0 * g * s - thd * thd
    if not rad > 0:
        raise EnergyDeficit(f"corner point a has no downward velocity at E={E}, k={k}")
    yd = -math.sqrt(rad)
    thp = (s * s * thd + 2.0 * c * yd) / (1.0 + c * c)
    rad_p = 2.0 * E - 2.0 * g * s - thp * thp
    if not rad_p > 0:
        raise EnergyDeficit(f"reflected velocity at a exceeds the energy at E={E}, k={k}")
    return (2.0 / g) * thp * math.sqrt(rad_p) + math.pi


def solve_k(E: float, params: CoinParams | None = None) -> float:
    """Root of ``A(E, .)`` in ``(g pi/8, g pi/2)``, with ``g`` the billiard gravity."""
    params = params or CoinParams()
    g = params.g_eff
    lo, hi = g * math.pi / 8.0, g * math.pi / 2.0
    try:
        a_lo, a_hi = eval_A(E, lo, params), eval_A(E, hi, params)
    except EnergyDeficit as exc:
        raise NoBracket(f"A(E, k) undefined on [{lo}, {hi}] at E={E}: {exc}") from exc
    if not (a_lo > 0.0 > a_hi):
        raise NoBracket(f"A(E, k) does not change sign on [{lo}, {hi}] at E={E}: {a_lo}, {a_hi}")
    return brentq(lambda k: eval_A(E, k, params), lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle of phase space; ``label`` is its coarse letter."""

    label: str
    center: float
    half_width: float
    half_height: float

    @property
    def left(self) -> float:
        return self.center - self.half_width

    @property
    def right(self) -> float:
        return self.center + self.half_width

    def contains(self, theta, theta_dot) -> bool:
        return abs(theta - self.center) <= self.half_width and abs(theta_dot) <= self.half_height

    def shifted(self, dtheta: float) -> "Rect":
        return Rect(self.label, self.center + dtheta, self.half_width, self.half_height)


@dataclass(frozen=True)
class DomainPair:
    """The two rectangles ``D_L`` and ``D_R`` built with scale ``K``.

    ``K`` equals ``k`` unless a bifurcation factor was applied.
    """

    k: float
    E: float
    K: float
    L: Rect
    R: Rect

    @property
    def theta_star(self) -> float:
        return self.K / self.E

    @property
    def theta_dot_star(self) -> float:
        return math.sqrt(2.0) * self.K / math.sqrt(self.E)

    @property
    def factor(self) -> float:
        return self.K / self.k

    def rect(self, label: str) -> Rect:
        return self.L if label[0] == "L" else self.R

    def corner_a(self) -> tuple[float, float]:
        return (self.L.left, self.theta_dot_star)

    def locate(self, theta: float, theta_dot: float):
        """``(letter, n)`` with ``theta - 2 pi n`` inside that rectangle, else ``None``."""
        for rect in (self.L, self.R):
            n = round((theta - rect.center) / (2.0 * math.pi))
            if rect.contains(theta - 2.0 * math.pi * n, theta_dot):
                return rect.label, int(n)
        return None

    def to_dict(self) -> dict:
        return {
            "E": self.E,
            "k": self.k,
            "K": self.K,
            "theta_star": self.theta_star,
            "theta_dot_star": self.theta_dot_star,
            "centers": {"L": self.L.center, "R": self.R.center},
        }


def build_domains(E: float, params: CoinParams | None = None, factor: float = 1.0, k: float | None = None) -> DomainPair:
    params = params or CoinParams()
    if k is None:
        k = solve_k(E, params)
    Kv = factor * k
    w = Kv / E
    h = math.sqrt(2.0) * Kv / math.sqrt(E)
    if not w < math.pi / 2:
        raise ValueError(f"half-width {w} reaches a corner")
    return DomainPair(k, float(E), Kv, Rect("L", math.pi / 2, w, h), Rect("R", 1.5 * math.pi, w, h))


def theta_b(dom: DomainPair, params: CoinParams | None = None) -> float:
    """Angle on the top edge of ``D_L`` whose post-collision ``theta_dot`` vanishes."""
    params = params or CoinParams(E=dom.E)
    h = dom.theta_dot_star
    return brentq(
        lambda t: K.reflect_plus_scalar(t, h, dom.E, params.g_eff),
        dom.L.left,
        dom.L.center,
        xtol=1e-16,
        rtol=8.9e-16,
    )


# ---------------------------------------------------------------------------
# curvilinear regions and image fibres


@dataclass(frozen=True, eq=False)
class Region:
    """``{left <= theta <= right, lower(theta) <= theta_dot <= upper(theta)}``.

    Lower and upper boundaries are polylines over ``theta``.
    """

    left: float
    right: float
    xs: np.ndarray
    lo: np.ndarray
    up: np.ndarray

    @classmethod
    def from_rect(cls, r: Rect) -> "Region":
        xs = np.array([r.left, r.right])
        return cls(r.left, r.right, xs, np.full(2, -r.half_height), np.full(2, r.half_height))

    def lower(self, x):
        return np.interp(x, self.xs, self.lo)

    def upper(self, x):
        return np.interp(x, self.xs, self.up)

    def shifted(self, dtheta: float) -> "Region":
        return Region(self.left + dtheta, self.right + dtheta, self.xs + dtheta, self.lo, self.up)


def _map(th, td, params: CoinParams, corner_tol: float):
    t1, d1, st = K.return_map_batch(th, td, params.E, params.g_eff, corner_tol)
    bad = (st == K.TANGENCY) | (st == K.NO_EVENT) | (st == K.ENERGY)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise TangencyUnresolved(f"{K.STATUS_NAMES[int(st[i])]} at ({th[i]}, {td[i]})")
    return t1, d1


def _path_point(reg: Region, s, upper: bool):
    s = np.asarray(s, dtype=np.float64)
    first = s < 1.0
    u = np.where(first, s, s - 1.0)
    if upper:
        # left edge upward, then along the upper boundary
        y_l, y_u = reg.lower(reg.left), reg.upper(reg.left)
        th_b = reg.left + u * (reg.right - reg.left)
        th = np.where(first, reg.left, th_b)
        td = np.where(first, y_l + u * (y_u - y_l), reg.upper(th_b))
    else:
        # along the lower boundary, then right edge upward
        y_l, y_u = reg.lower(reg.right), reg.upper(reg.right)
        th_b = reg.left + u * (reg.right - reg.left)
        th = np.where(first, th_b, reg.right)
        td = np.where(first, reg.lower(th_b), y_l + u * (y_u - y_l))
    return th, td


def _solve_on_path(reg: Region, x, upper: bool, params: CoinParams, corner_tol: float):
    lo = np.zeros_like(x)
    hi = np.full_like(x, 2.0)
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        th, td = _path_point(reg, mid, upper)
        t1, _ = _map(th, td, params, corner_tol)
        right = t1 < x
        lo = np.where(right, mid, lo)
        hi = np.where(right, hi, mid)
    # The final bracket ends are exact points of the path, so their images lie
    # on the image curve.  Interpolating at x avoids the ~8E amplification of
    # the rounding in the pre-image angle.
    t_a, d_a = _map(*_path_point(reg, lo, upper), params, corner_tol)
    t_b, d_b = _map(*_path_point(reg, hi, upper), params, corner_tol)
    span = t_b - t_a
    w = np.divide(x - t_a, span, out=np.full_like(x, 0.5), where=span != 0.0)
    return d_a + np.clip(w, 0.0, 1.0) * (d_b - d_a)


def image_span(reg: Region, params: CoinParams, corner_tol: float = CORNER_TOL) -> tuple[float, float]:
    """``theta1`` at the bottom-left and top-right corners: the extent of ``f(reg)``."""
    th = np.array([reg.left, reg.right])
    td = np.array([reg.lower(reg.left), reg.upper(reg.right)])
    t1, _ = _map(th, td, params, corner_tol)
    return float(t1[0]), float(t1[1])


def image_fibres(reg: Region, x, params: CoinParams, corner_tol: float = CORNER_TOL):
    """``(lo, hi, valid)``: the ``theta_dot`` extent of ``f(reg)`` over each column ``x``."""
    x = np.asarray(x, dtype=np.float64)
    t_min, t_max = image_span(reg, params, corner_tol)
    valid = (x >= t_min) & (x <= t_max)
    xc = np.clip(x, t_min, t_max)
    a = _solve_on_path(reg, xc, True, params, corner_tol)
    b = _solve_on_path(reg, xc, False, params, corner_tol)
    return np.minimum(a, b), np.maximum(a, b), valid


@dataclass(eq=False)
class Component:
    """Connected piece of ``f(origin) ∩ target`` sampled over the target's columns."""

    origin: str
    host: str
    shift: int
    kind: str  # "full" | "corner"
    xs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    clipped: bool = False

    @property
    def width(self) -> float:
        return float(np.max(self.upper - self.lower))

    @property
    def mean_height(self) -> float:
        return float(np.mean(0.5 * (self.lower + self.upper)))


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    runs, start = [], None
    for i, m in enumerate(mask):
        if m and start is None:
            start = i
        elif not m and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(mask)))
    return runs


def intersect_image(
    origin: Region,
    target: Region,
    params: CoinParams,
    n_columns: int,
    corner_tol: float = CORNER_TOL,
    meta: tuple[str, str, int] = ("", "", 0),
) -> list[Component]:
    """Components of ``f(origin) ∩ target`` (both unwrapped), one per run of columns."""
    xs = np.linspace(target.left, target.right, n_columns)
    f_lo, f_hi, valid = image_fibres(origin, xs, params, corner_tol)
    t_lo, t_hi = target.lower(xs), target.upper(xs)
    lo = np.maximum(f_lo, t_lo)
    hi = np.minimum(f_hi, t_hi)
    ok = valid & (lo <= hi)
    clipped = bool(np.any(ok & ((f_lo < t_lo) | (f_hi > t_hi))))
    comps = []
    runs = _runs(ok)
    for a, b in runs:
        kind = "full" if (a == 0 and b == n_columns) else "corner"
        comps.append(Component(meta[0], meta[1], meta[2], kind, xs[a:b], lo[a:b], hi[a:b], clipped))
    return comps


def _target_shifts(dom: DomainPair, origin: Rect, span: tuple[float, float]) -> range:
    w = dom.theta_star
    j0 = math.ceil((span[0] - w - origin.center) / math.pi)
    j1 = math.floor((span[1] + w - origin.center) / math.pi)
    return range(j0, j1 + 1)


def _host_of(origin: Rect, j: int) -> str:
    if j % 2 == 0:
        return origin.label
    return "R" if origin.label == "L" else "L"


def image_census(dom: DomainPair, params: CoinParams, n_columns: int = 256, corner_tol: float = CORNER_TOL) -> list[Component]:
    """All components of ``f(D) ∩ (D + 2 pi Z)``, tagged with origin, host and shift."""
    comps: list[Component] = []
    for origin in (dom.L, dom.R):
        reg = Region.from_rect(origin)
        span = image_span(reg, params, corner_tol)
        for j in _target_shifts(dom, origin, span):
            target = Region.from_rect(origin.shifted(j * math.pi))
            host = _host_of(origin, j)
            comps += intersect_image(reg, target, params, n_columns, corner_tol, (origin.label, host, j))
    return comps


# ---------------------------------------------------------------------------
# strips


@dataclass(eq=False)
class Strip:
    """Horizontal or vertical strip between two polylines.

    Horizontal strips sample ``theta`` in host coordinates (``param``) and
    store ``theta_dot`` bounds.  Vertical strips sample ``theta_dot`` and
    store ``theta`` bounds.  ``origin`` is the rectangle that maps onto the
    strip's horizontal partner.  ``shift`` is ``j`` in ``target = origin + j pi``.
    """

    orientation: str
    label: str
    host: str
    origin: str
    shift: int
    param: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def width(self) -> float:
        return float(np.max(self.upper - self.lower))

    @property
    def slope(self) -> float:
        dp = np.diff(self.param)
        return float(max(np.max(np.abs(np.diff(self.lower) / dp)), np.max(np.abs(np.diff(self.upper) / dp))))

    def region(self, dom: DomainPair) -> Region:
        """Horizontal strip as a :class:`Region` in host coordinates."""
        if self.orientation != "horizontal":
            raise ValueError("only horizontal strips form graph regions over theta")
        r = dom.rect(self.host)
        return Region(r.left, r.right, self.param, self.lower, self.upper)

    def contains(self, theta: float, theta_dot: float) -> bool:
        if self.orientation == "horizontal":
            return bool(np.interp(theta, self.param, self.lower) <= theta_dot <= np.interp(theta, self.param, self.upper))
        return bool(np.interp(theta_dot, self.param, self.lower) <= theta <= np.interp(theta_dot, self.param, self.upper))

    def to_dict(self) -> dict:
        return {
            "orientation": self.orientation,
            "label": self.label,
            "host": self.host,
            "origin": self.origin,
            "shift": self.shift,
            "width": self.width,
            "slope": self.slope,
            "vertices": int(self.param.size),
        }


def _label_components(comps: list[Component]) -> dict[str, Component]:
    labels = {}
    for host in ("L", "R"):
        mine = [c for c in comps if c.host == host]
        same = [c for c in mine if c.origin == host]
        other = sorted((c for c in mine if c.origin != host), key=lambda c: -c.mean_height)
        if len(same) != 1 or len(other) != 2:
            return {}
        labels[host + "2"] = same[0]
        labels[host + "1"], labels[host + "3"] = other
    return labels


def _census_counts(comps: list[Component]) -> dict:
    return {
        "full": sum(c.kind == "full" for c in comps),
        "corner": sum(c.kind == "corner" for c in comps),
        "by_host": {h: sum(c.host == h for c in comps) for h in ("L", "R")},
    }


def extract_horizontal_strips(dom: DomainPair, params: CoinParams, grid_n: int = 512, corner_tol: float = CORNER_TOL) -> list[Strip]:
    """The six full strips of ``f(D) ∩ D`` on the cylinder, labeled by host and origin."""
    if grid_n < 64:
        raise ValueError("grid_n must be at least 64")
    n = max(256, grid_n)
    comps = image_census(dom, params, n, corner_tol)
    full = [c for c in comps if c.kind == "full"]
    labels = _label_components(full) if len(comps) == 6 and len(full) == 6 else {}
    if len(labels) != 6:
        raise StripCountMismatch(len(full), _census_counts(comps))
    strips = []
    for lab in LABELS:
        c = labels[lab]
        origin = dom.rect(c.origin)
        dx = origin.center + c.shift * math.pi - dom.rect(c.host).center
        strips.append(Strip("horizontal", lab, c.host, c.origin, c.shift, c.xs - dx, c.lower, c.upper))
    return strips


def _bisect_rows(fn, lo_x: float, hi_x: float, ys, target: float):
    lo = np.full_like(ys, lo_x)
    hi = np.full_like(ys, hi_x)
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        right = fn(mid, ys) < target
        lo = np.where(right, mid, lo)
        hi = np.where(right, hi, mid)
    return 0.5 * (lo + hi)


def _row_interval(fn, left, right, ys, t_lo, t_hi):
    """Sub-interval of ``[left, right]`` where the increasing ``fn(., y)`` lies in ``[t_lo, t_hi]``."""
    f_l = fn(np.full_like(ys, left), ys)
    f_r = fn(np.full_like(ys, right), ys)
    a = np.where(f_l >= t_lo, left, _bisect_rows(fn, left, right, ys, t_lo))
    b = np.where(f_r <= t_hi, right, _bisect_rows(fn, left, right, ys, t_hi))
    empty = (f_r < t_lo) | (f_l > t_hi)
    return a, b, empty


def extract_vertical_strips(
    dom: DomainPair, hstrips: list[Strip], params: CoinParams, grid_n: int = 512, corner_tol: float = CORNER_TOL
) -> list[Strip]:
    """``V_s = f^-1(H_s) ∩ D``: for each row, the angles landing inside the target rectangle."""
    n = max(256, grid_n)
    h = dom.theta_dot_star
    ys = np.linspace(-h, h, n)
    theta1 = lambda th, td: _map(th, td, params, corner_tol)[0]  # noqa: E731
    thd_plus = lambda th, td: K.reflect_plus_batch(th, td, params.E, params.g_eff)  # noqa: E731
    out = []
    for hs in hstrips:
        origin = dom.rect(hs.origin)
        tc = origin.center + hs.shift * math.pi
        a, b, e1 = _row_interval(theta1, origin.left, origin.right, ys, tc - dom.theta_star, tc + dom.theta_star)
        c, d, e2 = _row_interval(thd_plus, origin.left, origin.right, ys, -h, h)
        left, right = np.maximum(a, c), np.minimum(b, d)
        empty = e1 | e2 | (left > right)
        if np.any(empty):
            raise StripCountMismatch(len(out), {"label": hs.label, "empty_rows": int(empty.sum())})
        out.append(Strip("vertical", hs.label, hs.origin, hs.origin, hs.shift, ys, left, right))
    return out


@dataclass(eq=False)
class StripFamily:
    dom: DomainPair
    horizontal: list[Strip]
    vertical: list[Strip]
    grid_n: int

    @property
    def mu_h(self) -> float:
        return max(s.slope for s in self.horizontal)

    @property
    def mu_v(self) -> float:
        return max(s.slope for s in self.vertical)

    def h(self, label: str) -> Strip:
        return next(s for s in self.horizontal if s.label == label)

    def v(self, label: str) -> Strip:
        return next(s for s in self.vertical if s.label == label)

    def label_for(self, origin: str, shift: int) -> str | None:
        """Label of the strip reached from rectangle ``origin`` with offset ``shift``."""
        for s in self.horizontal:
            if s.origin == origin and s.shift == shift:
                return s.label
        return None

    def widths(self) -> dict:
        return {
            "horizontal": {s.label: s.width for s in self.horizontal},
            "vertical": {s.label: s.width for s in self.vertical},
        }

    def to_dict(self) -> dict:
        return {
            "domain": self.dom.to_dict(),
            "grid_n": self.grid_n,
            "strip_count": {"horizontal": len(self.horizontal), "vertical": len(self.vertical)},
            "mu_h": self.mu_h,
            "mu_v": self.mu_v,
            "widths": self.widths(),
            "strips": [s.to_dict() for s in self.horizontal + self.vertical],
        }


def build_strip_family(E: float, params: CoinParams | None = None, grid_n: int = 512, corner_tol: float = CORNER_TOL, dom: DomainPair | None = None) -> StripFamily:
    params = (params or CoinParams()).with_energy(E)
    dom = dom or build_domains(E, params)
    hs = extract_horizontal_strips(dom, params, grid_n, corner_tol)
    vs = extract_vertical_strips(dom, hs, params, grid_n, corner_tol)
    return StripFamily(dom, hs, vs, grid_n)


# ---------------------------------------------------------------------------
# Conley-Moser checks


def allowed_successors(label: str) -> set[str]:
    """Successors permitted by the subshift rules: the strips whose origin is ``label``'s host."""
    if label[0] == "L":
        return {"R1", "L2", "R3"}
    return {"L1", "R2", "L3"}


def rules_matrix() -> np.ndarray:
    return np.array([[b in allowed_successors(a) for b in LABELS] for a in LABELS], dtype=bool)


def _scaled(points: np.ndarray, dom: DomainPair) -> np.ndarray:
    return points / np.array([dom.theta_star, dom.theta_dot_star])


def _hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    return max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0])


@dataclass
class CMReport:
    E: float
    grid_n: int
    mu_h: float
    mu_v: float
    cm1_value: float
    cm1_pass: bool
    cm2: dict = field(default_factory=dict)
    cm2_tolerance: float = 0.0
    cm2_pass: bool = False
    cm3: dict = field(default_factory=dict)
    cm3_pass: bool = False
    adjacency: np.ndarray | None = None

    @property
    def passed(self) -> bool:
        return self.cm1_pass and self.cm2_pass and self.cm3_pass

    def to_dict(self) -> dict:
        return {
            "E": self.E,
            "grid_n": self.grid_n,
            "mu_h": self.mu_h,
            "mu_v": self.mu_v,
            "cm1": {"value": self.cm1_value, "pass": self.cm1_pass},
            "cm2": {"tolerance": self.cm2_tolerance, "labels": self.cm2, "pass": self.cm2_pass},
            "cm3": {"pairs": self.cm3, "pass": self.cm3_pass},
            "adjacency": None if self.adjacency is None else self.adjacency.astype(int).tolist(),
            "pass": self.passed,
        }


def _cm2_label(fam: StripFamily, label: str, params: CoinParams, corner_tol: float) -> dict:
    dom = fam.dom
    hs, vs = fam.h(label), fam.v(label)
    origin = dom.rect(vs.origin)
    dx = origin.center + vs.shift * math.pi - dom.rect(hs.host).center
    n = vs.param.size

    def image(th, td):
        t1, d1 = _map(np.asarray(th), np.asarray(td), params, corner_tol)
        return _scaled(np.column_stack([t1 - dx, d1]), dom)

    r = dom.rect(hs.host)
    h_left = _scaled(np.column_stack([np.full(n, r.left), np.linspace(hs.lower[0], hs.upper[0], n)]), dom)
    h_right = _scaled(np.column_stack([np.full(n, r.right), np.linspace(hs.lower[-1], hs.upper[-1], n)]), dom)
    h_low = _scaled(np.column_stack([hs.param, hs.lower]), dom)
    h_up = _scaled(np.column_stack([hs.param, hs.upper]), dom)

    v_left = image(vs.lower, vs.param)
    v_right = image(vs.upper, vs.param)
    top = np.linspace(vs.lower[-1], vs.upper[-1], n)
    bot = np.linspace(vs.lower[0], vs.upper[0], n)
    v_top = image(top, np.full(n, vs.param[-1]))
    v_bot = image(bot, np.full(n, vs.param[0]))

    vert = min(
        max(_hausdorff(v_left, h_left), _hausdorff(v_right, h_right)),
        max(_hausdorff(v_left, h_right), _hausdorff(v_right, h_left)),
    )
    horiz = min(
        max(_hausdorff(v_top, h_up), _hausdorff(v_bot, h_low)),
        max(_hausdorff(v_top, h_low), _hausdorff(v_bot, h_up)),
    )
    return {"vertical": vert, "horizontal": horiz}


def strip_image_pieces(fam: StripFamily, s: str, j: str, params: CoinParams, corner_tol: float = CORNER_TOL) -> list[Component]:
    """Components of ``f(H_s) ∩ H_j`` over every ``2 pi`` copy of ``H_j``."""
    dom = fam.dom
    hs, hj = fam.h(s), fam.h(j)
    reg = hs.region(dom)
    span = image_span(reg, params, corner_tol)
    base = hj.region(dom)
    n0 = math.ceil((span[0] - base.right) / (2.0 * math.pi))
    n1 = math.floor((span[1] - base.left) / (2.0 * math.pi))
    comps = []
    for n in range(n0, n1 + 1):
        comps += intersect_image(reg, base.shifted(2.0 * math.pi * n), params, hj.param.size, corner_tol, (s, j, n))
    return comps


def check_conley_moser(fam: StripFamily, params: CoinParams, corner_tol: float = CORNER_TOL, slope_margin: float = 0.05) -> CMReport:
    """Evaluate CM1-CM3 on measured strips; failures are recorded, not raised.

    CM2 compares ``f(boundary of V_s)`` with the boundary of ``H_s`` in
    rectangle units (``theta / theta*``, ``theta_dot / theta_dot*``) and
    tolerates ten grid spacings.  CM3 requires every allowed ``f(H_s) ∩ H_j``
    to be one full strip with slope within ``(1 + slope_margin) mu_h`` and
    thinner than ``H_s``, and every forbidden intersection to be empty.
    """
    params = params.with_energy(fam.dom.E)
    mu_h, mu_v = fam.mu_h, fam.mu_v
    rep = CMReport(fam.dom.E, fam.grid_n, mu_h, mu_v, mu_h * mu_v, bool(0.0 <= mu_h * mu_v < 1.0))

    rep.cm2_tolerance = 10.0 * 2.0 / fam.grid_n
    ok2 = True
    for lab in LABELS:
        d = _cm2_label(fam, lab, params, corner_tol)
        d["pass"] = bool(d["vertical"] <= rep.cm2_tolerance and d["horizontal"] <= rep.cm2_tolerance)
        ok2 &= d["pass"]
        rep.cm2[lab] = d
    rep.cm2_pass = ok2

    adj = np.zeros((6, 6), dtype=bool)
    ok3 = True
    for a, s in enumerate(LABELS):
        d_s = fam.h(s).width
        for b, j in enumerate(LABELS):
            comps = strip_image_pieces(fam, s, j, params, corner_tol)
            allowed = j in allowed_successors(s)
            adj[a, b] = bool(comps)
            entry = {"allowed": allowed, "components": len(comps)}
            if comps:
                widest = max(comps, key=lambda c: c.width)
                dp = np.diff(widest.xs)
                slope = float(max(np.max(np.abs(np.diff(widest.lower) / dp)), np.max(np.abs(np.diff(widest.upper) / dp))))
                entry.update(
                    full=all(c.kind == "full" for c in comps),
                    width=widest.width,
                    ratio=widest.width / d_s,
                    slope=slope,
                )
            if allowed:
                entry["pass"] = bool(
                    len(comps) == 1
                    and entry["full"]
                    and entry["ratio"] < 1.0
                    and entry["slope"] <= (1.0 + slope_margin) * mu_h
                )
            else:
                entry["pass"] = not comps
            ok3 &= entry["pass"]
            rep.cm3[f"{s}->{j}"] = entry
    rep.cm3_pass = ok3
    rep.adjacency = adj
    return rep


@dataclass(frozen=True, eq=False)
class TransitionGraph:
    adjacency: np.ndarray

    def successors(self, label: str) -> set[str]:
        i = LABELS.index(label)
        return {LABELS[j] for j in range(6) if self.adjacency[i, j]}

    def out_degrees(self) -> dict:
        return {lab: int(self.adjacency[i].sum()) for i, lab in enumerate(LABELS)}

    def in_degrees(self) -> dict:
        return {lab: int(self.adjacency[:, i].sum()) for i, lab in enumerate(LABELS)}


def transition_graph(fam: StripFamily, params: CoinParams, report: CMReport | None = None) -> TransitionGraph:
    """Measured adjacency ``s -> j`` iff ``f(H_s) ∩ H_j`` is nonempty; must equal the rules."""
    if report is None:
        report = check_conley_moser(fam, params)
    adj = report.adjacency
    expected = rules_matrix()
    if not np.array_equal(adj, expected):
        diff = [
            f"{LABELS[a]}->{LABELS[b]}: measured {bool(adj[a, b])}, expected {bool(expected[a, b])}"
            for a in range(6)
            for b in range(6)
            if adj[a, b] != expected[a, b]
        ]
        raise GraphMismatch(diff)
    return TransitionGraph(adj.copy())


# ---------------------------------------------------------------------------
# bifurcation in K


@dataclass
class CensusRow:
    factor: float
    K: float
    full: int
    corner: int
    components: list

    @property
    def summary(self) -> str:
        return f"{self.full} full + {self.corner} corner" if self.corner else f"{self.full} full"

    def to_dict(self) -> dict:
        return {
            "factor": self.factor,
            "K": self.K,
            "full": self.full,
            "corner": self.corner,
            "summary": self.summary,
            "components": self.components,
        }


def scan_bifurcation(E: float, factors, params: CoinParams | None = None, n_columns: int = 256, corner_tol: float = CORNER_TOL) -> list[CensusRow]:
    """Classify the pieces of ``f(D(K)) ∩ (D(K) + 2 pi Z)`` for each ``K = factor * k``."""
    params = (params or CoinParams()).with_energy(E)
    k = solve_k(E, params)
    rows = []
    for fac in factors:
        dom = build_domains(E, params, float(fac), k)
        comps = image_census(dom, params, n_columns, corner_tol)
        info = [
            {
                "origin": c.origin,
                "host": c.host,
                "shift": c.shift,
                "kind": c.kind,
                "columns": int(c.xs.size),
                "mean_height": c.mean_height / dom.theta_dot_star,
            }
            for c in comps
        ]
        rows.append(
            CensusRow(
                float(fac),
                dom.K,
                sum(c.kind == "full" for c in comps),
                sum(c.kind == "corner" for c in comps),
                info,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# polylines


def edge_polyline(rect: Rect, edge: str, n: int = 64) -> tuple[np.ndarray, np.ndarray]:
    h = rect.half_height
    if edge in ("top", "bottom"):
        th = np.linspace(rect.left, rect.right, n)
        return th, np.full(n, h if edge == "top" else -h)
    td = np.linspace(-h, h, n)
    return np.full(n, rect.left if edge == "left" else rect.right), td


@dataclass(eq=False)
class ImagePolyline:
    theta: np.ndarray
    theta_dot: np.ndarray
    source_theta: np.ndarray
    source_theta_dot: np.ndarray
    corner_hits: np.ndarray


def forward_image_polyline(
    theta,
    theta_dot,
    params: CoinParams,
    delta: float = 1e-3,
    max_depth: int = 40,
    corner_tol: float = CORNER_TOL,
) -> ImagePolyline:
    """Image of a polyline under the return map, refined until image steps are below ``delta``.

    Samples landing on a corner are kept and flagged; refinement continues
    around them so the neighbourhood of the corner is resolved.
    """
    src_t = np.asarray(theta, dtype=np.float64)
    src_d = np.asarray(theta_dot, dtype=np.float64)
    t1, d1, st = K.return_map_batch(src_t, src_d, params.E, params.g_eff, corner_tol)
    for depth in range(max_depth + 1):
        bad = (st != K.OK) & (st != K.CORNER_HIT)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise TangencyUnresolved(f"{K.STATUS_NAMES[int(st[i])]} at ({src_t[i]}, {src_d[i]})")
        gap = np.abs(np.diff(t1)) >= delta
        if not gap.any():
            return ImagePolyline(t1, d1, src_t, src_d, st == K.CORNER_HIT)
        if depth == max_depth:
            break
        idx = np.flatnonzero(gap)
        mt = 0.5 * (src_t[idx] + src_t[idx + 1])
        md = 0.5 * (src_d[idx] + src_d[idx + 1])
        mt1, md1, mst = K.return_map_batch(mt, md, params.E, params.g_eff, corner_tol)
        src_t = np.insert(src_t, idx + 1, mt)
        src_d = np.insert(src_d, idx + 1, md)
        t1 = np.insert(t1, idx + 1, mt1)
        d1 = np.insert(d1, idx + 1, md1)
        st = np.insert(st, idx + 1, mst)
    raise ImageDisconnected(f"image gaps persist after {max_depth} refinements")


def write_polyline_csv(path, theta, theta_dot) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "theta_dot"])
        for a, b in zip(theta, theta_dot):
            w.writerow([repr(float(a)), repr(float(b))])
