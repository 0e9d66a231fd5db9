"""Command line surface: flat key=value configs with dotted namespaces,
flag overrides, and JSON/CSV artifact emission.

Reports are deterministic for a fixed config and seed; everything
volatile (wall clock) lives under the single "timestamp" key so that
repeated runs differ in that field only.
"""

import argparse
import datetime
import json
import math
import os
import sys
import time

import numpy as np

from .density import DensityField, GridSpec, write_density_csv
from .energy import p_energy, per_k_set_parts
from .kernel import Kernel, regularize_fractional
from .lattice import Lattice, hexagonal_point, square_point
from .optimizer import SolverParams, ascend, default_start, voronoi_start
from .polygon2d import QuadratureParams, SweepSpec, hexagon_sweep, write_sweep_csv
from .search import search_lattices, write_landscape_csv

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3


class ValidationError(Exception):
    pass


class NumericError(Exception):
    pass


def _coerce(text: str):
    s = text.strip()
    low = s.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        pass
    return s


def parse_config_text(text: str) -> dict:
    """Flat `key = value` lines; # starts a comment; keys are dotted."""
    out = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError("config line %d has no '=': %r" % (ln, raw))
        key, value = line.split("=", 1)
        out[key.strip()] = _coerce(value)
    return out


def parse_overrides(tokens: list) -> dict:
    out = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise ValidationError("expected --key, got %r" % tok)
        body = tok[2:]
        if "=" in body:
            key, value = body.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ValidationError("flag --%s is missing a value" % body)
            key, value = body, tokens[i + 1]
            i += 2
        out[key] = _coerce(value)
    return out


class RunConfig:
    """Key-value store that remembers every key it resolved, so the
    report can embed the full effective configuration."""

    def __init__(self, command: str, values: dict):
        self.command = command
        self.values = dict(values)
        self.resolved = {}

    def get(self, key, default=None):
        value = self.values.get(key, default)
        self.resolved[key] = value
        return value

    def require(self, key, hint=""):
        if key not in self.values:
            msg = "missing required key %r" % key
            if hint:
                msg += "; " + hint
            raise ValidationError(msg)
        return self.get(key)

    def resolved_json(self) -> dict:
        out = {}
        for key in sorted(self.resolved):
            v = self.resolved[key]
            out[key] = float(v) if isinstance(v, float) else v
        return out


def build_lattice(cfg: RunConfig) -> Lattice:
    basis = cfg.get("lattice.basis")
    if basis is not None:
        try:
            rows = [[float(x) for x in row.split(",")]
                    for row in str(basis).split(";")]
            return Lattice(rows)
        except Exception as exc:
            raise ValidationError("invalid lattice basis %r: %s" % (basis, exc))
    name = cfg.get("lattice.name", "square")
    m = float(cfg.get("lattice.covolume", 1.0))
    if not m > 0:
        raise ValidationError("lattice.covolume must be positive")
    if name == "z1":
        return Lattice([[m]])
    if name == "square":
        return square_point(m).lattice()
    if name == "hexagonal":
        return hexagonal_point(m).lattice()
    raise ValidationError("unknown lattice.name %r; expected z1|square|hexagonal "
                          "or give lattice.basis" % name)


def build_kernel(cfg: RunConfig, dim: int) -> Kernel:
    family = cfg.require("kernel.family",
                         "expected gaussian|exponential|fractional|indicator|table")
    dim = int(cfg.get("kernel.dim", dim))
    if family == "gaussian":
        return Kernel.gaussian(float(cfg.get("kernel.alpha", 1.0)), dim)
    if family == "exponential":
        return Kernel.exponential(float(cfg.get("kernel.beta", 1.0)), dim)
    if family == "fractional":
        coeff = float(cfg.get("kernel.coeff", 1.0))
        s = float(cfg.get("kernel.s", 0.5))
        delta = cfg.get("kernel.delta")
        base = Kernel.fractional(coeff, s, dim)
        if delta is None:
            return base
        return regularize_fractional(base, float(delta))
    if family == "indicator":
        return Kernel.indicator(float(cfg.get("kernel.radius", 1.0)), dim)
    if family == "table":
        values = cfg.require("kernel.values", "comma separated profile samples")
        vals = [float(x) for x in str(values).split(",")]
        return Kernel.table(vals, float(cfg.require("kernel.step")), dim)
    raise ValidationError("unknown kernel family %r; expected "
                          "gaussian|exponential|fractional|indicator|table" % family)


def build_grid(cfg: RunConfig, lattice: Lattice) -> GridSpec:
    n = int(cfg.get("grid.n", 8))
    hops = int(cfg.get("grid.hops", 1))
    try:
        return GridSpec(lattice, n=n, hops=hops)
    except ValueError as exc:
        raise ValidationError(str(exc))


def build_solver_params(cfg: RunConfig, seed: int) -> SolverParams:
    step = cfg.get("solver.step_size")
    try:
        return SolverParams(
            step_size=None if step is None else float(step),
            max_iters=int(cfg.get("solver.max_iters", 5000)),
            stop_tol=float(cfg.get("solver.stop_tol", 1e-10)),
            seed=seed,
        )
    except ValueError as exc:
        raise ValidationError(str(exc))


def _require_seed(cfg: RunConfig) -> int:
    if "seed" not in cfg.values:
        raise ValidationError("seed is required for randomized runs; set seed=<int>")
    return int(cfg.get("seed"))


def _start_field(cfg: RunConfig, spec: GridSpec, seed: int,
                 default: str) -> DensityField:
    start = cfg.get("field.start", default)
    if start == "cell":
        return DensityField.indicator_of_cell(spec)
    if start == "voronoi":
        return voronoi_start(spec)
    if start == "uniform":
        return DensityField.uniform(spec)
    if start == "noise":
        return default_start(spec, seed=seed)
    raise ValidationError("unknown field.start %r; expected "
                          "cell|voronoi|uniform|noise" % start)


def _check_finite(*values):
    for v in values:
        if not math.isfinite(v):
            raise NumericError("non-finite energy value %r" % v)


def write_report(out_dir: str, command: str, cfg: RunConfig, payload: dict,
                 wall: float) -> str:
    doc = {"timestamp": {
        "written_at_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "wall_time_s": wall,
    }}
    doc["command"] = command
    doc["config"] = cfg.resolved_json()
    doc.update(payload)
    path = os.path.join(out_dir, "report.json")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def cmd_check(cfg: RunConfig, out_dir: str) -> dict:
    lat = build_lattice(cfg)
    kernel = build_kernel(cfg, lat.dim)
    rep = kernel.check_assumptions()
    l1 = kernel.l1_norm()
    payload = {
        "kernel": kernel.to_config(),
        "assumptions": {
            "satisfies_integrable_class": rep.satisfies_int,
            "satisfies_fractional_class": rep.satisfies_frac,
            "strictly_decreasing": rep.strictly_decreasing,
            "strict_clause": rep.strict_clause,
            "message": rep.message,
        },
        "l1_norm": l1 if math.isfinite(l1) else "inf",
        "support_radius": (kernel.support_radius()
                           if math.isfinite(kernel.support_radius()) else "inf"),
    }
    print("kernel %s: integrable=%s fractional=%s strictly_decreasing=%s "
          "strict_clause=%s" % (kernel.family, rep.satisfies_int,
                                rep.satisfies_frac, rep.strictly_decreasing,
                                rep.strict_clause))
    return payload


def cmd_perimeter(cfg: RunConfig, out_dir: str) -> dict:
    lat = build_lattice(cfg)
    spec = build_grid(cfg, lat)
    kernel = build_kernel(cfg, lat.dim)
    seed = int(cfg.get("seed", 0))
    field = _start_field(cfg, spec, seed, default="cell")
    breakdown = p_energy(field, kernel)
    _check_finite(breakdown.j_value, breakdown.p_value)
    payload = {"energy": breakdown.to_json()}
    if field.binarity_deficit() == 0.0:
        parts = per_k_set_parts(field, kernel)
        _check_finite(parts.value)
        payload["per_k_set"] = {
            "value": parts.value,
            "interior": parts.interior,
            "exterior": parts.exterior,
        }
        print("per_k = %r" % parts.value)
    else:
        print("relaxed perimeter = %r" % breakdown.p_value)
    write_density_csv(field, os.path.join(out_dir, "density.csv"))
    return payload


def cmd_optimize(cfg: RunConfig, out_dir: str) -> dict:
    seed = _require_seed(cfg)
    lat = build_lattice(cfg)
    spec = build_grid(cfg, lat)
    kernel = build_kernel(cfg, lat.dim)
    params = build_solver_params(cfg, seed)
    f0 = _start_field(cfg, spec, seed, default="noise")
    try:
        report = ascend(f0, kernel, params)
    except ValueError as exc:
        raise ValidationError(str(exc))
    _check_finite(float(report.j_trace[-1]))
    write_density_csv(report.final, os.path.join(out_dir, "density.csv"))
    print("J = %r after %d iterations (converged=%s)"
          % (float(report.j_trace[-1]), report.iterations, report.converged))
    return {"optimize": report.to_json()}


def cmd_search(cfg: RunConfig, out_dir: str) -> dict:
    seed = _require_seed(cfg)
    lat_dim = 2
    kernel = build_kernel(cfg, lat_dim)
    params = build_solver_params(cfg, seed)
    threads = int(cfg.get("threads", os.cpu_count() or 1))
    max_seconds = cfg.get("search.max_seconds")
    try:
        result = search_lattices(
            float(cfg.get("search.m", 1.0)), kernel,
            grid_steps=int(cfg.get("search.grid_steps", 6)),
            refine_rounds=int(cfg.get("search.refine_rounds", 2)),
            params=params,
            n=int(cfg.get("search.n", 6)),
            hops=int(cfg.get("search.hops", 1)),
            multistarts=int(cfg.get("search.multistarts", 3)),
            aspect_cap=float(cfg.get("search.aspect_cap", 2.0)),
            threads=threads,
            max_seconds=None if max_seconds is None else float(max_seconds),
        )
    except ValueError as exc:
        raise ValidationError(str(exc))
    _check_finite(float(result.best_report.j_trace[-1]))
    write_landscape_csv(result.landscape, os.path.join(out_dir, "landscape.csv"))
    write_density_csv(result.best_report.final,
                      os.path.join(out_dir, "density.csv"))
    best = result.to_json()["best"]
    print("best lattice a=%r b=%r per_k=%r (visited %d)"
          % (best["a"], best["b"], best["per_k"], len(result.landscape)))
    return {"search": result.to_json()}


def cmd_hexagon_sweep(cfg: RunConfig, out_dir: str) -> dict:
    kernel = build_kernel(cfg, 2)
    quad = QuadratureParams(
        subdiv=int(cfg.get("quad.subdiv", 12)),
        band_refine=int(cfg.get("quad.band_refine", 4)),
        angular_order=int(cfg.get("quad.angular_order", 16)),
    )
    try:
        spec = SweepSpec(
            theta2_range=(math.radians(float(cfg.get("sweep.theta2_min_deg", 35.0))),
                          math.radians(float(cfg.get("sweep.theta2_max_deg", 85.0)))),
            theta3_range=(math.radians(float(cfg.get("sweep.theta3_min_deg", 95.0))),
                          math.radians(float(cfg.get("sweep.theta3_max_deg", 145.0)))),
            steps=int(cfg.get("sweep.steps", 20)),
            q=float(cfg.get("sweep.q", 1.0)),
            quad=quad,
        )
    except ValueError as exc:
        raise ValidationError(str(exc))
    threads = int(cfg.get("threads", os.cpu_count() or 1))
    rows = hexagon_sweep(kernel, spec, threads=threads)
    for r in rows:
        _check_finite(r.per_k)
    write_sweep_csv(rows, os.path.join(out_dir, "sweep.csv"))
    regular = next(r for r in rows if r.is_regular_hexagon)
    square = next(r for r in rows if r.is_square)
    others = [r for r in rows if not r.is_regular_hexagon]
    margin = min(r.per_k - 2.0 * (r.error_estimate + regular.error_estimate)
                 - regular.per_k for r in others)
    payload = {"sweep": {
        "rows": len(rows),
        "regular_hexagon": {"per_k": regular.per_k,
                            "error_estimate": regular.error_estimate},
        "square": {"per_k": square.per_k,
                   "error_estimate": square.error_estimate},
        "min_margin_vs_regular": margin,
        "regular_is_strict_minimum": bool(margin > 0.0
                                          and square.per_k > regular.per_k),
    }}
    print("regular hexagon per_k = %r (margin %r over %d samples)"
          % (regular.per_k, margin, len(others)))
    return payload


COMMANDS = {
    "check": cmd_check,
    "perimeter": cmd_perimeter,
    "optimize": cmd_optimize,
    "search": cmd_search,
    "hexagon-sweep": cmd_hexagon_sweep,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tileopt",
        description="Isoperimetric tilings under nonlocal perimeters: "
                    "density solver, lattice search, hexagon sweep.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="flat key=value config file")
    args, extra = parser.parse_known_args(argv)

    t0 = time.perf_counter()
    try:
        values = {}
        if args.config is not None:
            if not os.path.exists(args.config):
                raise ValidationError("config file not found: %s" % args.config)
            with open(args.config) as fh:
                values.update(parse_config_text(fh.read()))
        values.update(parse_overrides(extra))
        cfg = RunConfig(args.command, values)
        out_dir = str(cfg.get("out", "out"))
        os.makedirs(out_dir, exist_ok=True)
        payload = COMMANDS[args.command](cfg, out_dir)
        path = write_report(out_dir, args.command, cfg, payload,
                            wall=time.perf_counter() - t0)
        print("report: %s" % path)
        return EXIT_OK
    except ValidationError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_VALIDATION
    except NumericError as exc:
        print("numeric failure: %s" % exc, file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
