"""Command-line front end.

Exit codes: 0 success, 2 no bracket for k, 3 dynamics error, 4 strip census
mismatch, 5 realization not found, 6 resolution exceeded, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

from .config import RunConfig
from .core import CoinParams, FullState, PhasePoint, coarse_label, energy_of, to_full_state, wrap_theta
from .errors import (
    CoinError,
    EnergyDeficit,
    GraphMismatch,
    NoBracket,
    NotFound,
    ResolutionExceeded,
    StepError,
    StripCountMismatch,
)

EXIT_OK = 0
EXIT_NO_BRACKET = 2
EXIT_DYNAMICS = 3
EXIT_STRIPS = 4
EXIT_NOT_FOUND = 5
EXIT_RESOLUTION = 6
EXIT_USAGE = 64


SCHEMAS = {
    "strips": "strips_summary.v1.json",
    "bifurcation": "bifurcation.v1.json",
    "realize": "realization.v1.json",
    "crosscheck": "crosscheck.v1.json",
    "simulate": "simulate.v1.json",
}


def load_schema(command: str) -> dict:
    """JSON schema shipped for the JSON output of ``command``."""
    from importlib.resources import files

    return json.loads(files("coinbilliard").joinpath("schemas", SCHEMAS[command]).read_text())


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--energy", "-E", type=float)
    p.add_argument("--gravity", type=float)
    p.add_argument("--mass", type=float)
    p.add_argument("--length", type=float)
    p.add_argument("--grid-n", type=int, dest="grid_n")
    p.add_argument("--corner-tol", type=float, dest="corner_tol")
    p.add_argument("--match-tol", type=float, dest="match_tol")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", dest="out_dir", help="output directory (default $COINBILLIARD_OUT or .)")
    p.add_argument("--format", choices=("csv", "json"))


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="coinbilliard", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve-k", help="solve A(E, k) = 0 for the domain scale k")
    _common(p)

    p = sub.add_parser("simulate", help="iterate the return map from a phase point")
    _common(p)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--theta-dot", type=float, default=0.0, dest="theta_dot")
    p.add_argument("-n", type=int, default=100)

    p = sub.add_parser("strips", help="extract strips, check Conley-Moser, write plot data")
    _common(p)

    p = sub.add_parser("bifurcation", help="census of f(D(K)) for K = factor * k")
    _common(p)
    p.add_argument("--factors", default="0.9,1.0,1.05")

    p = sub.add_parser("realize", help="find an initial condition for a coarse L/R word")
    _common(p)
    p.add_argument("--word", required=True)
    p.add_argument("--dps", type=int, help="mp decimal digits (default: from word length and E)")
    p.add_argument("--budget", type=int, default=2000, help="search node budget")

    p = sub.add_parser("crosscheck", help="compare the physical coin with the billiard")
    _common(p)
    p.add_argument("-n", type=int, default=100)
    p.add_argument("--samples", type=int, default=20)
    return ap


def resolve_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    keys = ("energy", "gravity", "mass", "length", "grid_n", "corner_tol", "match_tol", "seed", "out_dir", "format")
    return cfg.override(**{k: getattr(args, k, None) for k in keys})


def _out(cfg: RunConfig, name: str) -> str:
    os.makedirs(cfg.output_dir, exist_ok=True)
    return os.path.join(cfg.output_dir, name)


def _dump(obj, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_solve_k(cfg: RunConfig) -> int:
    from .horseshoe import eval_A, solve_k

    base = CoinParams(E=max(cfg.energy, 2.0 * cfg.gravity * 2.0 / cfg.length + 1.0), m=cfg.mass, l=cfg.length, g=cfg.gravity)
    g = base.g_eff
    try:
        k = solve_k(cfg.energy, base)
    except NoBracket as exc:
        print(f"no bracket: {exc}", file=sys.stderr)
        return EXIT_NO_BRACKET
    out = {
        "E": cfg.energy,
        "g": g,
        "k": k,
        "A": eval_A(cfg.energy, k, base),
        "bracket": [g * math.pi / 8.0, g * math.pi / 2.0],
        "k_minus_g_pi_over_4": k - g * math.pi / 4.0,
    }
    if cfg.format == "json":
        print(json.dumps(out, sort_keys=True))
    else:
        print(f"k = {k!r}\nA(E, k) = {out['A']!r}\nbracket = ({out['bracket'][0]!r}, {out['bracket'][1]!r})")
    return EXIT_OK


SIMULATE_COLUMNS = ["collision_index", "theta", "theta_dot", "theta_wrapped", "coarse_label", "fine_label", "energy"]


def simulate_rows(cfg: RunConfig, theta: float, theta_dot: float, n: int):
    """Table rows of an orbit; ``fine_label`` is set while consecutive points stay in D."""
    from .dynamics import fly_to_next_collision, reflect
    from .horseshoe import build_strip_family

    params = cfg.params()
    fam = build_strip_family(params.E, params, cfg.grid_n, cfg.corner_tol)
    dom = fam.dom
    s: FullState = to_full_state(PhasePoint(theta, theta_dot), params)
    states = [s]
    for i in range(n):
        try:
            s = fly_to_next_collision(reflect(s, cfg.corner_tol), params, cfg.corner_tol)
        except CoinError as exc:
            raise StepError(i, exc) from exc
        states.append(s)
    locs = [dom.locate(x.theta, x.theta_dot) for x in states]
    rows = []
    for i, x in enumerate(states):
        fine = ""
        if i + 1 < len(states) and locs[i] and locs[i + 1]:
            c0 = dom.rect(locs[i][0]).center + 2 * math.pi * locs[i][1]
            c1 = dom.rect(locs[i + 1][0]).center + 2 * math.pi * locs[i + 1][1]
            fine = fam.label_for(locs[i][0], round((c1 - c0) / math.pi)) or ""
        rows.append(
            {
                "collision_index": i,
                "theta": x.theta,
                "theta_dot": x.theta_dot,
                "theta_wrapped": wrap_theta(x.theta),
                "coarse_label": coarse_label(x.theta, cfg.corner_tol),
                "fine_label": fine,
                "energy": energy_of(x, params),
            }
        )
    return rows


def cmd_simulate(cfg: RunConfig, theta: float, theta_dot: float, n: int) -> int:
    try:
        rows = simulate_rows(cfg, theta, theta_dot, n)
    except StepError as exc:
        print(f"dynamics error at collision {exc.index}: {exc.cause}", file=sys.stderr)
        return EXIT_DYNAMICS
    except CoinError as exc:
        print(f"dynamics error: {exc}", file=sys.stderr)
        return EXIT_DYNAMICS
    if cfg.format == "json":
        path = _out(cfg, "simulate.json")
        _dump({"columns": SIMULATE_COLUMNS, "rows": rows}, path)
    else:
        path = _out(cfg, "simulate.csv")
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=SIMULATE_COLUMNS)
            w.writeheader()
            for r in rows:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    print("".join(r["coarse_label"] for r in rows))
    print(path)
    return EXIT_OK


def cmd_strips(cfg: RunConfig) -> int:
    from . import horseshoe as H

    params = cfg.params()
    try:
        dom = H.build_domains(params.E, params)
        fam = H.build_strip_family(params.E, params, cfg.grid_n, cfg.corner_tol, dom=dom)
    except NoBracket as exc:
        print(f"no bracket: {exc}", file=sys.stderr)
        return EXIT_NO_BRACKET
    except StripCountMismatch as exc:
        print(json.dumps({"error": str(exc), "census": exc.census}, default=str), file=sys.stderr)
        return EXIT_STRIPS
    report = H.check_conley_moser(fam, params, cfg.corner_tol)
    try:
        adjacency = H.transition_graph(fam, params, report).adjacency
    except GraphMismatch as exc:
        print(json.dumps({"error": "graph mismatch", "diff": exc.diff}), file=sys.stderr)
        return EXIT_STRIPS

    for s in fam.horizontal + fam.vertical:
        tag = "H" if s.orientation == "horizontal" else "V"
        with open(_out(cfg, f"strip_{tag}_{s.label}.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "theta_dot_lower", "theta_dot_upper"] if tag == "H" else ["theta_dot", "theta_left", "theta_right"])
            for row in zip(s.param, s.lower, s.upper):
                w.writerow([repr(float(v)) for v in row])
    for rect in (dom.L, dom.R):
        for edge in ("top", "bottom", "left", "right"):
            th, td = H.edge_polyline(rect, edge, 64)
            img = H.forward_image_polyline(th, td, params, corner_tol=cfg.corner_tol)
            H.write_polyline_csv(_out(cfg, f"image_D{rect.label}_{edge}.csv"), img.theta, img.theta_dot)

    summary = {
        "E": params.E,
        "k": dom.k,
        "grid_n": cfg.grid_n,
        "strip_count": len(fam.horizontal),
        "vertical_strip_count": len(fam.vertical),
        "mu_h": fam.mu_h,
        "mu_v": fam.mu_v,
        "widths": fam.widths(),
        "cm1": {"value": report.cm1_value, "pass": report.cm1_pass},
        "cm2": {"pass": report.cm2_pass, "tolerance": report.cm2_tolerance, "labels": report.cm2},
        "cm3": {"pass": report.cm3_pass, "pairs": report.cm3},
        "labels": list(H.LABELS),
        "adjacency": adjacency.astype(int).tolist(),
        "rules_match": True,
    }
    path = _out(cfg, "summary.json")
    _dump(summary, path)
    print(f"strips: {len(fam.horizontal)} horizontal, {len(fam.vertical)} vertical; CM pass: {report.passed}")
    print(path)
    return EXIT_OK


def cmd_bifurcation(cfg: RunConfig, factors: list[float]) -> int:
    from .horseshoe import scan_bifurcation

    params = cfg.params()
    try:
        rows = scan_bifurcation(params.E, factors, params, corner_tol=cfg.corner_tol)
    except NoBracket as exc:
        print(f"no bracket: {exc}", file=sys.stderr)
        return EXIT_NO_BRACKET
    if cfg.format == "json":
        path = _out(cfg, "bifurcation.json")
        _dump({"E": params.E, "rows": [r.to_dict() for r in rows]}, path)
    else:
        path = _out(cfg, "bifurcation.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["factor", "K", "full", "corner", "summary"])
            for r in rows:
                w.writerow([repr(r.factor), repr(r.K), r.full, r.corner, r.summary])
    for r in rows:
        print(f"{r.factor:g}\t{r.summary}")
    print(path)
    return EXIT_OK


def cmd_realize(cfg: RunConfig, word: str, dps: int | None, budget: int) -> int:
    from .horseshoe import build_strip_family
    from .symbolic import parse_coarse, realize_sequence

    try:
        word = parse_coarse(word)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    params = cfg.params()
    fam = build_strip_family(params.E, params, cfg.grid_n, cfg.corner_tol)
    try:
        res = realize_sequence(word, fam, params, depth_budget=budget, dps=dps, corner_tol=cfg.corner_tol)
    except NotFound as exc:
        print(json.dumps({"error": "not found", "detail": str(exc), "longest_prefix": exc.prefix}))
        return EXIT_NOT_FOUND
    except ResolutionExceeded as exc:
        print(json.dumps({"error": "resolution exceeded", "detail": str(exc), "longest_prefix": exc.prefix}))
        return EXIT_RESOLUTION
    out = res.to_dict()
    _dump(out, _out(cfg, "realization.json"))
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK if res.verified else EXIT_NOT_FOUND


def cmd_crosscheck(cfg: RunConfig, n: int, samples: int) -> int:
    from .physical import crosscheck

    params = cfg.params()
    try:
        rep = crosscheck(params, n, samples, cfg.seed, cfg.match_tol, cfg.corner_tol)
    except CoinError as exc:
        print(f"dynamics error: {exc}", file=sys.stderr)
        return EXIT_DYNAMICS
    out = rep.to_dict() | {"E": params.E, "m": params.m, "l": params.l, "seed": cfg.seed}
    _dump(out, _out(cfg, "crosscheck.json"))
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        if args.command == "solve-k":
            return cmd_solve_k(cfg)
        try:
            cfg.params()
        except (ValueError, EnergyDeficit) as exc:
            raise UsageError(str(exc)) from exc
        if args.command == "simulate":
            return cmd_simulate(cfg, args.theta, args.theta_dot, args.n)
        if args.command == "strips":
            return cmd_strips(cfg)
        if args.command == "bifurcation":
            try:
                factors = [float(x) for x in args.factors.split(",") if x.strip()]
            except ValueError as exc:
                raise UsageError(f"bad --factors: {exc}") from exc
            return cmd_bifurcation(cfg, factors)
        if args.command == "realize":
            return cmd_realize(cfg, args.word, args.dps, args.budget)
        if args.command == "crosscheck":
            return cmd_crosscheck(cfg, args.n, args.samples)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
