import math

import numpy as np
import pytest

from coinbilliard.core import CoinParams, PhasePoint
from coinbilliard.horseshoe import build_domains, build_strip_family, check_conley_moser


@pytest.fixture(scope="session")
def params():
    return CoinParams()


@pytest.fixture(scope="session")
def dom(params):
    return build_domains(1e4, params)


@pytest.fixture(scope="session")
def fam(params, dom):
    return build_strip_family(1e4, params, grid_n=512, dom=dom)


@pytest.fixture(scope="session")
def cm_report(fam, params):
    return check_conley_moser(fam, params)


def points_in_rect(rect, n, seed, margin=0.98):
    """Uniform points inside a rectangle, kept slightly off its edges."""
    rng = np.random.default_rng(seed)
    th = rect.center + margin * rect.half_width * rng.uniform(-1.0, 1.0, n)
    td = margin * rect.half_height * rng.uniform(-1.0, 1.0, n)
    return [PhasePoint(float(a), float(b)) for a, b in zip(th, td)]


def points_in_strips(fam, n, seed):
    """Uniform points of the horizontal strips, i.e. of D ∩ f(D)."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        s = fam.horizontal[i % len(fam.horizontal)]
        th = rng.uniform(s.param[1], s.param[-2])
        lo, hi = np.interp(th, s.param, s.lower), np.interp(th, s.param, s.upper)
        out.append(PhasePoint(float(th), float(lo + rng.uniform(0.1, 0.9) * (hi - lo))))
    return out


def log_slope(xs, ys):
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


HALF_PI = math.pi / 2


_CRITERIA = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the lines are printed in the terminal summary."""
    lines = request.config.stash.setdefault(_CRITERIA, [])

    def record(number, ok, detail):
        lines.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
