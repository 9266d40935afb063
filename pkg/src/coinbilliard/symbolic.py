"""Symbol sequences over {L1, L2, L3, R1, R2, R3} and their realization by orbits.

Conventions:

* the coarse symbol of a collision is ``L`` or ``R`` by ``sgn(sin theta)``
* the fine symbol ``s_i`` of an orbit is the vertical strip holding ``f^i(p)``.
  Equivalently ``f^(i+1)(p)`` lies in ``H_{s_i}``, so the letter of ``s_i``
  is the coarse symbol of the *next* collision and its subscript records
  where that collision sits in its rectangle.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from itertools import product

from mpmath import mp, mpf

from .core import CORNER_TOL, CoinParams, PhasePoint
from .dynamics import return_map
from .errors import CoinError, NotFound, ResolutionExceeded, StepError
from .horseshoe import LABELS, StripFamily, allowed_successors
from .precise import auto_dps, mp_return_map

_COARSE_RE = re.compile(r"^[LR]+$")
_FINE_RE = re.compile(r"([LR][123])")


def parse_coarse(text: str) -> str:
    word = text.strip().upper()
    if not _COARSE_RE.match(word):
        raise ValueError(f"coarse word must be a nonempty string over L and R, got {text!r}")
    return word


def parse_fine(text: str) -> tuple[str, ...]:
    word = text.strip().upper()
    syms = _FINE_RE.findall(word)
    if not syms or "".join(syms) != word:
        raise ValueError(f"fine word must be a sequence of L1..R3, got {text!r}")
    return tuple(syms)


def validate_word(word) -> tuple[bool, int | None]:
    """``(True, None)`` if every adjacent pair is allowed, else ``(False, i)`` for pair ``i, i+1``."""
    syms = tuple(word)
    for s in syms:
        if s not in LABELS:
            raise ValueError(f"unknown symbol {s!r}")
    for i in range(len(syms) - 1):
        if syms[i + 1] not in allowed_successors(syms[i]):
            return False, i
    return True, None


def lift_coarse(word, start: str | None = None, fallback: bool = False) -> tuple[str, ...]:
    """Fine word projecting onto ``word``.

    A repeated letter takes the subscript-2 symbol.  A change of letter takes
    subscript 1, or subscript 3 when ``fallback`` is set.
    """
    word = parse_coarse("".join(word))
    if start is None:
        start = word[0] + "2"
    if start not in LABELS or start[0] != word[0]:
        raise ValueError(f"start symbol {start!r} does not carry letter {word[0]}")
    out = [start]
    change = "3" if fallback else "1"
    for prev, cur in zip(word, word[1:]):
        out.append(cur + ("2" if cur == prev else change))
    return tuple(out)


def count_words(start: str, n: int) -> int:
    """Valid fine words of length ``n`` beginning with ``start``, by enumeration."""
    if n < 1:
        return 0
    count = 0
    for tail in product(LABELS, repeat=n - 1):
        if validate_word((start,) + tail)[0]:
            count += 1
    return count


# ---------------------------------------------------------------------------
# itineraries


@dataclass
class Itinerary:
    coarse: str
    fine: tuple[str, ...]
    escaped: int | None
    orbit: list
    margins: list = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return self.escaped is None


class _Geometry:
    """Rectangle arithmetic at either double or working mp precision."""

    def __init__(self, fam: StripFamily, precise: bool):
        dom = fam.dom
        self.fam = fam
        if precise:
            self.pi = mp.pi
            E, Kv = mpf(dom.E), mpf(dom.K)
            self.w = Kv / E
            self.h = mp.sqrt(2) * Kv / mp.sqrt(E)
        else:
            self.pi = math.pi
            self.w = dom.theta_star
            self.h = dom.theta_dot_star
        self.centers = {"L": self.pi / 2, "R": 3 * self.pi / 2}

    def locate(self, theta, theta_dot):
        """``(letter, unwrapped center)`` of the rectangle holding the point, or ``None``."""
        if abs(theta_dot) > self.h:
            return None
        for letter, c in self.centers.items():
            n = int(math.floor(float((theta - c) / (2 * self.pi)) + 0.5))
            cc = c + 2 * self.pi * n
            if abs(theta - cc) <= self.w:
                return letter, cc
        return None

    def margin(self, theta, theta_dot, center) -> float:
        return float(min((self.w - abs(theta - center)) / self.w, (self.h - abs(theta_dot)) / self.h))


def _coarse(theta, corner_tol: float) -> str:
    s = math.sin(float(theta) % (2 * math.pi)) if not isinstance(theta, mpf) else mp.sin(theta)
    if abs(float(s)) < corner_tol:
        raise CoinError(f"corner angle {float(theta)}")
    return "L" if s > 0 else "R"


def itinerary_of(
    p,
    n: int,
    fam: StripFamily,
    params: CoinParams,
    dps: int | None = None,
    corner_tol: float = CORNER_TOL,
) -> Itinerary:
    """Coarse and fine symbols of the first ``n`` collisions of ``p``.

    The orbit is followed for ``n + 1`` points so that the last fine symbol is
    defined.  ``escaped`` is the first index whose point is outside D.  The
    orbit runs in mp arithmetic when ``dps`` is given or ``p`` holds ``mpf``.
    """
    params = params.with_energy(fam.dom.E)
    theta, thd = p
    precise = dps is not None or isinstance(theta, mpf)
    ctx = mp.workdps(dps or mp.dps) if precise else _Null()
    with ctx:
        geo = _Geometry(fam, precise)
        pts = [(mpf(theta), mpf(thd))] if precise else [(float(theta), float(thd))]
        for i in range(n):
            try:
                if precise:
                    pts.append(mp_return_map(*pts[-1], params, corner_tol))
                else:
                    q, _ = return_map(PhasePoint(*pts[-1]), params, corner_tol)
                    pts.append((q.theta, q.theta_dot))
            except CoinError as exc:
                raise StepError(i, exc) from exc
        coarse = "".join(_coarse(t, corner_tol) for t, _ in pts[:n])
        locs = [geo.locate(t, d) for t, d in pts]
        escaped = next((i for i, loc in enumerate(locs) if loc is None), None)
        fine, margins = [], []
        for i in range(n):
            if locs[i] is None or locs[i + 1] is None:
                break
            j = int(round(float((locs[i + 1][1] - locs[i][1]) / geo.pi)))
            lab = fam.label_for(locs[i][0], j)
            if lab is None:
                escaped = i + 1
                break
            fine.append(lab)
            margins.append(geo.margin(*pts[i + 1], locs[i + 1][1]))
    return Itinerary(coarse, tuple(fine), escaped, pts, margins)


class _Null:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


# ---------------------------------------------------------------------------
# realization


@dataclass
class RealizationResult:
    word: str
    fine: tuple[str, ...]
    theta: object
    theta_dot: object
    depth: int
    interval_width: object
    dps: int
    nodes: int
    verified: bool
    itinerary: Itinerary | None = None

    @property
    def point(self) -> PhasePoint:
        return PhasePoint(float(self.theta), float(self.theta_dot))

    def to_dict(self) -> dict:
        it = self.itinerary
        return {
            "word": self.word,
            "fine": "".join(self.fine),
            "theta": mp.nstr(self.theta, self.dps) if isinstance(self.theta, mpf) else repr(self.theta),
            "theta_dot": mp.nstr(mpf(self.theta_dot), 5),
            "theta_float": float(self.theta),
            "depth": self.depth,
            "interval_width": float(self.interval_width),
            "dps": self.dps,
            "nodes": self.nodes,
            "verified": self.verified,
            "itinerary": None
            if it is None
            else {
                "coarse": it.coarse,
                "fine": "".join(it.fine),
                "escaped": it.escaped,
                "min_margin": min(it.margins) if it.margins else None,
            },
        }


def _illinois(fn, a, b, fa, fb, tol, max_iter: int = 200):
    """Root of increasing ``fn`` on ``[a, b]`` with ``fa < 0 < fb`` (Illinois false position)."""
    side = 0
    for _ in range(max_iter):
        c = (a * fb - b * fa) / (fb - fa)
        if not (a < c < b):
            c = (a + b) / 2
        fc = fn(c)
        if fc == 0:
            return c
        if fc < 0:
            a, fa = c, fc
            if side == -1:
                fb /= 2
            side = -1
        else:
            b, fb = c, fc
            if side == 1:
                fa /= 2
            side = 1
        if b - a <= tol:
            break
    return (a + b) / 2


def realize_sequence(
    word,
    fam: StripFamily,
    params: CoinParams,
    depth_budget: int = 2000,
    dps: int | None = None,
    start: str | None = None,
    corner_tol: float = CORNER_TOL,
) -> RealizationResult:
    """Initial condition on ``theta_dot = 0`` whose first ``len(word)`` collisions read ``word``.

    The search keeps the interval of initial angles whose orbit has visited
    the targets so far.  At depth ``d`` it narrows the interval to the angles
    whose ``d``-th collision lands in the next target rectangle; ``theta_d``
    and ``theta_dot_d`` both increase with the initial angle, so each
    narrowing is a pair of monotone root solves.  Targets come from the
    lifted fine word, and subscript 3 is tried when subscript 1 dead-ends.
    One extra depth past the word pins the last fine symbol.
    """
    word = parse_coarse("".join(word))
    params = params.with_energy(fam.dom.E)
    n = len(word)
    dps = dps or auto_dps(n, fam.dom.E)
    letters = word + word[-1]
    nodes = 0

    with mp.workdps(dps):
        geo = _Geometry(fam, True)
        w, h = geo.w, geo.h
        floor_width = mpf(2) ** (-mp.prec + 12)

        def state(theta0, d):
            q = (theta0, mpf(0))
            for _ in range(d):
                q = mp_return_map(*q, params, corner_tol)
            return q

        def restrict(lo, hi, d, center):
            """Sub-interval of ``[lo, hi]`` whose ``d``-th point lies in the rectangle at ``center``."""
            tol = (hi - lo) * mpf(10) ** -20
            th = lambda t: state(t, d)[0]  # noqa: E731
            f_lo, f_hi = th(lo), th(hi)
            if f_hi < center - w or f_lo > center + w:
                return None
            a = lo if f_lo >= center - w else _illinois(lambda t: th(t) - (center - w), lo, hi, f_lo - (center - w), f_hi - (center - w), tol)
            b = hi if f_hi <= center + w else _illinois(lambda t: th(t) - (center + w), lo, hi, f_lo - (center + w), f_hi - (center + w), tol)
            td = lambda t: state(t, d)[1]  # noqa: E731
            g_a, g_b = td(a), td(b)
            if g_b < -h or g_a > h:
                return None
            if g_a < -h:
                a = _illinois(lambda t: td(t) + h, a, b, g_a + h, g_b + h, tol)
            if g_b > h:
                b = _illinois(lambda t: td(t) - h, a, b, g_a - h, g_b - h, tol)
            return (a, b) if a < b else None

        def choices(d):
            prev, cur = letters[d - 1], letters[d]
            subs = ("2",) if prev == cur else ("1", "3")
            out = []
            for sub in subs:
                lab = cur + sub
                hs = fam.h(lab)
                out.append((lab, hs.shift))
            return out

        best = [0]

        def search(d, lo, hi, center, path):
            nonlocal nodes
            if d > n:
                return lo, hi, path
            for lab, j in choices(d):
                nodes += 1
                if nodes > depth_budget:
                    raise NotFound(f"node budget {depth_budget} exhausted", best[0])
                c = center + j * geo.pi
                sub = restrict(lo, hi, d, c)
                if sub is None:
                    continue
                if sub[1] - sub[0] < floor_width * abs(sub[0]):
                    raise ResolutionExceeded(
                        f"interval collapsed to working precision at depth {d} (dps={dps})", best[0]
                    )
                best[0] = max(best[0], min(d, n))
                res = search(d + 1, sub[0], sub[1], c, path + (lab,))
                if res is not None:
                    return res
            return None

        c0 = geo.centers[word[0]]
        found = search(1, c0 - w, c0 + w, c0, ())
        if found is None:
            raise NotFound(f"no branch realizes {word}", best[0])
        lo, hi, path = found
        theta0 = (lo + hi) / 2
        width = hi - lo
        it = itinerary_of((theta0, mpf(0)), n, fam, params, dps=dps, corner_tol=corner_tol)
        verified = it.coarse == word and it.complete and tuple(it.fine) == path
        return RealizationResult(word, path, theta0, mpf(0), n, width, dps, nodes, verified, it)
