"""Command-line front end ``fermi``.

    fermi <command> [--config FILE.json] [--out DIR] [--seed U64] [--set KEY=VALUE ...]

Settings are resolved as built-in defaults, then the JSON config, then
``--set`` overrides and ``--seed``.  Every command writes ``<command>.csv``
and ``<command>-summary.csv`` (``key,value`` rows) into ``--out``; the phase
portrait also writes ``phase-portrait.svg``.  Floats are written with 17
significant digits.  Random numbers come from numpy's PCG64 generator seeded
with ``--seed``.  ``FERMI_THREADS`` caps the worker processes used by
``island-area``.

Exit codes: 0 success, 2 configuration error, 3 numerical or verification
failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import arithmetic, fractal, normal_form, orbits
from .core import (
    DomainError,
    DomainExit,
    ResolutionError,
    SystemParams,
    VerificationError,
    flight_time,
    forward,
    iterate,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

MAP_KEYS = {"A": 0.1, "C": 1.0, "gamma": 1.5, "t0": 0.25}

DEFAULTS = {
    "simulate": {**MAP_KEYS, "t": None, "v": None, "n": 100, "v_range": [5.0, 50.0]},
    "phase-portrait": {
        **MAP_KEYS, "seeds": 50, "iterations": 500,
        "window": [0.0, 1.0, 5.0, 50.0], "orbit": None, "rho": None,
        "width": 800, "height": 600,
    },
    "find-orbits": {**MAP_KEYS, "A": 1.0, "T_max": 5.0, "c1": -1.0, "c2": 0.0, "tol": 1e-9},
    "scan-A": {"n": 2, "m": 10, "C": 1.0, "gamma": 1.5, "t0": -0.25, "c1": -1.0, "c2": 0.0, "grid": None},
    "arith-scan": {
        "a": 0.7, "gamma": 1.5, "xi": None, "C1": 0.2, "C2": 0.4,
        "alpha_lo": 0.5, "beta_hi": 0.9, "N": 10_000,
    },
    "island-area": {
        "m_values": [8, 64, 512, 8192], "gamma": 1.5, "C": 1.0, "target": -0.7,
        "A_target": 1.0, "iterations": 1000, "grid": 81,
    },
    "cantor": {"d_slope": 2, "d_offset": 2, "kappa": 0.0, "J0": [0.0, 0.9], "depth": 6},
    "escape-dim": {"A": 0.5, "C": 1.0, "gamma": 1.5, "C_height": 20.0, "depth": 4, "samples": 200},
}


class ConfigError(ValueError):
    pass


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    if x is None:
        return ""
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise RuntimeError(f"row has {len(row)} fields, header has {len(header)}")
            w.writerow([fmt(x) for x in row])


def write_summary(path, summary):
    write_csv(path, ["key", "value"], list(summary.items()))


@contextmanager
def config_stage():
    """Report invalid settings as configuration errors rather than numerical ones."""
    try:
        yield
    except (DomainError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def map_params(cfg):
    with config_stage():
        return SystemParams(A=float(cfg["A"]), C=float(cfg["C"]), gamma=float(cfg["gamma"]), t0=float(cfg["t0"]))


def workers():
    raw = os.environ.get("FERMI_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"FERMI_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise ConfigError(f"FERMI_THREADS must be positive, got {n}")
    return n


def cmd_simulate(cfg, rng, out):
    params = map_params(cfg)
    n = int(cfg["n"])
    if n < 0:
        raise ConfigError(f"n must be non-negative, got {n}")
    t = rng.uniform(0.0, 1.0) if cfg["t"] is None else float(cfg["t"])
    v = rng.uniform(*cfg["v_range"]) if cfg["v"] is None else float(cfg["v"])
    if not v >= params.v_min:
        raise ConfigError(f"initial v={v} is below v_min={params.v_min}")
    flag = ""
    try:
        traj = iterate((t, v), n, params)
    except DomainExit as exc:
        traj = exc.trajectory
        flag = "domain-exit"
    rows = [(i, p.t, p.v, float(flight_time(p.v, params)), "") for i, p in enumerate(traj)]
    if flag:
        i, pt, pv, T, _ = rows[-1]
        rows[-1] = (i, pt, pv, T, flag)
    write_csv(out / "simulate.csv", ["n", "t", "v", "T", "flag"], rows)
    return {"rows": len(rows), "domain_exit": bool(flag)}


def _portrait_orbit(cfg, params):
    spec = cfg["orbit"]
    if spec is None:
        return None
    n, m = int(spec[0]), int(spec[1])
    orb = orbits.find_plus_orbit(n, m, params)
    if orb is None:
        raise DomainError(f"no Plus orbit on ({n},{m}) for A={params.A}")
    return orb


def stay_fraction(p, params, rho, seeds, iterations, rng):
    """Share of random seeds within ``rho`` of ``p`` that stay within ``2 rho`` under ``F^2``."""
    r = rho * np.sqrt(rng.uniform(0, 1, seeds))
    ang = rng.uniform(0, 2 * math.pi, seeds)
    t = p[0] + r * np.cos(ang)
    v = p[1] + r * np.sin(ang)
    alive = np.ones(seeds, dtype=bool)
    for _ in range(iterations):
        for _ in range(2):
            t, v = forward(t, v, params, reduce=True)
        d = np.hypot((t - p[0] + 0.5) % 1.0 - 0.5, v - p[1])
        alive &= d < 2 * rho
        t = np.where(alive, t, p[0])
        v = np.where(alive, v, p[1])
    return float(alive.mean())


def cmd_phase_portrait(cfg, rng, out):
    params = map_params(cfg)
    t_lo, t_hi, v_lo, v_hi = (float(x) for x in cfg["window"])
    if not (t_lo < t_hi and v_lo < v_hi):
        raise ConfigError(f"window {cfg['window']} is empty")
    seeds, iters = int(cfg["seeds"]), int(cfg["iterations"])
    orb = _portrait_orbit(cfg, params)
    t = rng.uniform(t_lo, t_hi, seeds)
    v = rng.uniform(max(v_lo, params.v_min), v_hi, seeds)
    pts = []
    for i in range(iters + 1):
        inside = (t >= t_lo) & (t <= t_hi) & (v >= v_lo) & (v <= v_hi)
        for s in np.flatnonzero(inside):
            pts.append((int(s), i, float(t[s]), float(v[s])))
        t, v = forward(t, v, params)
        v = np.maximum(v, params.v_min)
    pts.sort()
    write_csv(out / "phase-portrait.csv", ["seed", "i", "t", "v"], pts)
    marks = [] if orb is None else [orb.p1, orb.p2]
    write_svg(out / "phase-portrait.svg", pts, marks, (t_lo, t_hi, v_lo, v_hi), int(cfg["width"]), int(cfg["height"]))
    summary = {"points": len(pts), "seeds": seeds}
    if orb is not None:
        rho = cfg["rho"]
        if rho is None:
            slope = normal_form.mean_slope(orb, params)
            # seed disk well inside the island, whose half-width is about 0.01 T'^(-3/2)
            rho = 0.004 * slope**-1.5
        summary["stay_fraction"] = stay_fraction(orb.p2, params, float(rho), 200, 1000, rng)
        summary["rho"] = float(rho)
        summary["classification"] = orbits.stability(orb, params).classification.value
    return summary


def write_svg(path, pts, marks, window, width, height):
    """Scatter in a ``0 0 width height`` viewBox, phase to the right and velocity upwards."""
    t_lo, t_hi, v_lo, v_hi = window

    def xy(t, v):
        return (t - t_lo) / (t_hi - t_lo) * width, (v_hi - v) / (v_hi - v_lo) * height

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" width="{width}" height="{height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    for _, _, t, v in pts:
        x, y = xy(t, v)
        lines.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="0.8" fill="black"/>')
    for p in marks:
        x, y = xy(p.t, p.v)
        lines.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="4" fill="none" stroke="red"/>')
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_find_orbits(cfg, rng, out):
    params = map_params(cfg)
    cat = orbits.scan_orbits(params, float(cfg["T_max"]), float(cfg["c1"]), float(cfg["c2"]), float(cfg["tol"]))
    rows = []
    for e in cat:
        o, r = e.orbit, e.report
        rows.append((o.n, o.m, o.kind.value, o.p1.t, o.p1.v, o.p2.t, o.p2.v, o.residual,
                     r.nu1, r.nu2, r.half_trace, r.classification.value, e.selected, o.tag))
    header = ["n", "m", "kind", "t1", "v1", "t2", "v2", "residual", "nu1", "nu2",
              "half_trace", "classification", "selected", "tag"]
    write_csv(out / "find-orbits.csv", header, rows)
    return {"orbits": len(cat), "elliptic": sum(e.report.classification.value == "Elliptic" for e in cat),
            "failures": len(cat.failures)}


def cmd_scan_A(cfg, rng, out):
    with config_stage():
        n, m = int(cfg["n"]), int(cfg["m"])
        base = SystemParams(A=1.0, C=float(cfg["C"]), gamma=float(cfg["gamma"]), t0=float(cfg["t0"]))
        grid = None if cfg["grid"] is None else np.linspace(*cfg["grid"][:2], int(cfg["grid"][2]))
    win = orbits.elliptic_A_window(n, m, base, float(cfg["c1"]), float(cfg["c2"]), grid=grid)
    rows = []
    if win is not None:
        for A in win[0] + (np.arange(20) + 0.5) / 20 * (win[1] - win[0]):
            p = base.with_A(float(A))
            orb = orbits.find_plus_orbit(n, m, p)
            if orb is None:
                continue
            rep = orbits.stability(orb, p)
            rows.append((float(A), rep.half_trace, rep.classification.value))
    write_csv(out / "scan-A.csv", ["A", "half_trace", "classification"], rows)
    lo, hi = win if win is not None else (None, None)
    return {"n": n, "m": m, "A_lo": lo, "A_hi": hi, "width": None if win is None else hi - lo,
            "anchor": orbits.window_anchor(n, m, base)}


def cmd_arith_scan(cfg, rng, out):
    with config_stage():
        params = arithmetic.ArithmeticParams(
            a=float(cfg["a"]), gamma=float(cfg["gamma"]), xi=None if cfg["xi"] is None else float(cfg["xi"]),
            C1=float(cfg["C1"]), C2=float(cfg["C2"]), alpha_lo=float(cfg["alpha_lo"]), beta_hi=float(cfg["beta_hi"]),
        )
        N = int(cfg["N"])
    hits, count = arithmetic.scan(params, N)
    rows = [(h.n, h.k, h.value, h.window[0], h.window[1]) for h in hits]
    write_csv(out / "arith-scan.csv", ["n", "k", "value", "window_lo", "window_hi"], rows)
    reg = arithmetic.regime(params)
    return {"hits": count, "N": N, "regime": reg.predicted_class.value, "overlapping": reg.overlapping,
            "diverging": reg.diverging, "critical": reg.critical}


def _island_row(job):
    orb, p, iterations, grid = job
    slope = normal_form.mean_slope(orb, p)
    ia = normal_form.island_area(orb, p, iterations=iterations, grid=grid)
    return (orb.n, orb.m, p.A, slope, ia.area, ia.radius, ia.fraction)


def cmd_island_area(cfg, rng, out):
    cat = normal_form.elliptic_catalog([int(m) for m in cfg["m_values"]], float(cfg["gamma"]), float(cfg["C"]),
                                       float(cfg["target"]), float(cfg["A_target"]))
    jobs = [(o, p, int(cfg["iterations"]), int(cfg["grid"])) for o, p in cat]
    n_workers = min(workers(), len(jobs))
    if n_workers > 1:
        with ProcessPoolExecutor(n_workers) as ex:
            rows = list(ex.map(_island_row, jobs))
    else:
        rows = [_island_row(j) for j in jobs]
    write_csv(out / "island-area.csv", ["n", "m", "A", "Tprime", "area", "radius", "fraction"], rows)
    summary = {"islands": len(rows)}
    try:
        summary["slope"] = normal_form.area_scaling([r[3] for r in rows], [r[4] for r in rows])
    except DomainError as exc:
        summary["slope"] = None
        summary["slope_note"] = str(exc)
    return summary


def cmd_cantor(cfg, rng, out):
    with config_stage():
        depth = int(cfg["depth"])
        if depth < 1:
            raise ConfigError(f"depth must be at least 1, got {depth}")
        degrees = [int(cfg["d_slope"]) * k + int(cfg["d_offset"]) for k in range(1, depth + 1)]
        maps = fractal.model_maps(degrees, float(cfg["kappa"]))
        J0 = tuple(float(x) for x in cfg["J0"])
    tree = fractal.build_cantor(maps, J0, depth)
    dims = fractal.level_dimensions(tree)
    bounds = fractal.lower_bounds(tree)
    b = fractal.bounds_of(maps)
    length = tree.J0[1] - tree.J0[0]
    rows = []
    for lvl in range(1, depth + 1):
        lengths = tree.levels[lvl].lengths
        k_lo, k_hi = fractal.k_bounds(b.m_lo[lvl - 1], b.m_hi[lvl - 1], length)
        rows.append((lvl, degrees[lvl - 1], tree.counts[lvl - 1], k_lo, k_hi, len(tree.levels[lvl]),
                     float(lengths.min()), float(lengths.max()), float(dims[lvl - 1]), float(bounds[lvl - 1])))
    header = ["level", "degree", "k", "k_lo", "k_hi", "K", "min_length", "max_length", "min_dimension", "lower_bound"]
    write_csv(out / "cantor.csv", header, rows)
    return {"depth": depth, "final_dimension": float(dims[-1]), "final_bound": float(bounds[-1]),
            "bound_below_observed": bool(np.all(bounds <= dims))}


def cmd_escape_dim(cfg, rng, out):
    with config_stage():
        params = SystemParams(A=float(cfg["A"]), C=float(cfg["C"]), gamma=float(cfg["gamma"]))
        region = fractal.default_region(params, float(cfg["C_height"]))
        J0 = fractal.region_interval(params, region)
        depth = int(cfg["depth"])
        if depth < 1:
            raise ConfigError(f"depth must be at least 1, got {depth}")
    tree = fractal.escape_candidate_tree(params, region, J0, depth)
    rows = []
    for lvl in range(1, depth + 1):
        level = tree.levels[lvl]
        box = fractal.box_dimension(level.left, level.right)
        rows.append((lvl, len(level), float(level.lengths.min()), float(level.lengths.max()),
                     float(fractal.running_dimension(tree, lvl).min()), box.slope, box.global_slope))
    header = ["level", "count", "min_length", "max_length", "min_running_dimension", "box_slope", "box_global_slope"]
    write_csv(out / "escape-dim.csv", header, rows)
    ts = fractal.sample_escape_candidates(params, region, J0, depth, int(cfg["samples"]), rng)
    ok = True
    for n in range(1, depth + 1):
        r = fractal.Fn_derivative(ts, n, region.C_height, params, region)
        ok &= bool(np.all(r.in_region) and np.all(r.value >= r.lower_bound) and np.all(r.value <= r.upper_bound))
    return {"J0_lo": J0[0], "J0_hi": J0[1], "depth": depth, "expansion_sandwich": ok}


COMMANDS = {
    "simulate": cmd_simulate,
    "phase-portrait": cmd_phase_portrait,
    "find-orbits": cmd_find_orbits,
    "scan-A": cmd_scan_A,
    "arith-scan": cmd_arith_scan,
    "island-area": cmd_island_area,
    "cantor": cmd_cantor,
    "escape-dim": cmd_escape_dim,
}


def parse_override(item):
    if "=" not in item:
        raise ConfigError(f"override {item!r} must look like key=value")
    key, raw = item.split("=", 1)
    try:
        return key, json.loads(raw)
    except json.JSONDecodeError:
        return key, raw


def resolve_config(command, config_path, overrides):
    cfg = dict(DEFAULTS[command])
    if config_path is not None:
        try:
            loaded = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}")
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a JSON object")
        cfg.update(loaded)
    cfg.update(dict(parse_override(o) for o in overrides))
    unknown = sorted(set(cfg) - set(DEFAULTS[command]))
    if unknown:
        raise ConfigError(f"unknown keys for {command}: {', '.join(unknown)}")
    return cfg


def build_parser():
    ap = argparse.ArgumentParser(prog="fermi", description="Static-wall Fermi acceleration toolkit.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON object with command settings")
    ap.add_argument("--out", default=".", help="output directory (default: current directory)")
    ap.add_argument("--seed", type=int, default=0, help="PCG64 seed, unsigned 64-bit")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override one setting; VALUE is parsed as JSON when possible")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if not 0 <= args.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {args.seed}")
        cfg = resolve_config(args.command, args.config, args.overrides)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        rng = np.random.Generator(np.random.PCG64(args.seed))
        summary = COMMANDS[args.command](cfg, rng, out)
    except (ConfigError, KeyError, TypeError) as exc:
        print(f"fermi: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, VerificationError, ResolutionError, fractal.ConstructionError, ArithmeticError) as exc:
        print(f"fermi: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    write_summary(out / f"{args.command}-summary.csv", summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
