"""Outer search over the shape space of fixed-covolume planar lattices.

Each visited lattice gets the inner density problem solved by projected
ascent from a few deterministic starts; the landscape is a sweep of the
reduced moduli cell followed by coordinate golden-section refinement
around the incumbent.  Degenerating (thin) lattices are excluded
operationally by a minimum-distance floor.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .density import GridSpec
from .kernel import Kernel
from .lattice import Lattice, ModuliPoint2D, hexagonal_point, moduli_grid, square_point
from .optimizer import (OptimizationReport, SolverParams, ascend, default_start,
                        voronoi_start)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
MIN_DISTANCE_FLOOR_SCALE = 1e-3


def shape_coords(point: ModuliPoint2D) -> tuple:
    """Scale-free coordinates (b/a, m/a^2) of the reduced cell; the
    square sits at (0, 1), the hexagonal lattice at (1/2, sqrt(3)/2)."""
    return point.b / point.a, point.m / point.a ** 2


def point_from_shape(x: float, y: float, m: float) -> ModuliPoint2D:
    a = math.sqrt(m / y)
    return ModuliPoint2D(a=a, b=x * a, m=m)


def moduli_distance(p: ModuliPoint2D, q: ModuliPoint2D) -> float:
    px, py = shape_coords(p)
    qx, qy = shape_coords(q)
    return math.hypot(px - qx, py - qy)


@dataclass
class LandscapeRow:
    point: ModuliPoint2D
    j_best: float
    per_k: float
    binarity: float
    converged: bool


@dataclass
class SearchResult:
    best_point: ModuliPoint2D
    best_lattice: Lattice
    best_report: OptimizationReport
    landscape: list
    nondegeneracy: float
    covolume: float
    kernel_l1: float

    def to_json(self) -> dict:
        bx, by = shape_coords(self.best_point)
        return {
            "covolume": float(self.covolume),
            "kernel_l1": float(self.kernel_l1),
            "best": {
                "a": float(self.best_point.a),
                "b": float(self.best_point.b),
                "shape_x": float(bx),
                "shape_y": float(by),
                "j": float(self.best_report.j_trace[-1]),
                "per_k": float(self.covolume * self.kernel_l1
                               - self.best_report.j_trace[-1]),
                "distance_to_square": float(
                    moduli_distance(self.best_point, square_point(self.covolume))),
                "distance_to_hexagonal": float(
                    moduli_distance(self.best_point, hexagonal_point(self.covolume))),
            },
            "nondegeneracy": float(self.nondegeneracy),
            "visited": len(self.landscape),
            "best_report": self.best_report.to_json(),
        }


def nondegeneracy_check(visited, j_values, floor: float | None = None) -> bool:
    """True when every inner energy is positive and no visited lattice
    is thinner than the floor (default 1e-3 sqrt(covolume)); bounded
    below energy is what rules out degenerating minimizing sequences."""
    if len(visited) != len(j_values):
        raise ValueError("visited and j_values length mismatch")
    if not visited:
        raise ValueError("no samples")
    if floor is None:
        floor = MIN_DISTANCE_FLOOR_SCALE * math.sqrt(visited[0].covolume)
    if min(j_values) <= 0.0:
        return False
    return min(lat.min_distance() for lat in visited) >= floor


def _solve_point(point: ModuliPoint2D, kernel: Kernel, params: SolverParams,
                 n: int, hops: int, multistarts: int) -> OptimizationReport:
    spec = GridSpec(point.lattice(), n=n, hops=hops)
    best = None
    for s in range(multistarts):
        f0 = voronoi_start(spec) if s == 0 else default_start(
            spec, seed=params.seed + 7919 * s)
        rep = ascend(f0, kernel, params)
        if best is None or rep.j_trace[-1] > best.j_trace[-1]:
            best = rep
    return best


def search_lattices(m: float, kernel: Kernel, grid_steps: int = 6,
                    refine_rounds: int = 2, params: SolverParams | None = None,
                    *, n: int = 6, hops: int = 1, multistarts: int = 3,
                    aspect_cap: float = 2.0, threads: int = 1,
                    max_seconds: float | None = None) -> SearchResult:
    """Sweep the reduced moduli cell at fixed covolume m, then refine
    the incumbent by golden-section along each shape coordinate.  The
    incumbent perimeter never increases during refinement."""
    if not m > 0.0:
        raise ValueError("covolume must be positive")
    if not math.isfinite(kernel.l1_norm()):
        raise ValueError("search requires an integrable kernel")
    if params is None:
        params = SolverParams()
    l1 = kernel.l1_norm()
    t0 = time.perf_counter()

    pts = moduli_grid(m, grid_steps, aspect_cap)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(
                lambda p: _solve_point(p, kernel, params, n, hops, multistarts), pts))
    else:
        reports = [_solve_point(p, kernel, params, n, hops, multistarts)
                   for p in pts]

    landscape = []
    visited = []
    for p, rep in zip(pts, reports):
        j = float(rep.j_trace[-1])
        landscape.append(LandscapeRow(p, j, m * l1 - j, rep.binarity, rep.converged))
        visited.append(p.lattice())

    best_i = int(np.argmax([row.j_best for row in landscape]))
    best_point, best_report = pts[best_i], reports[best_i]

    def evaluate(x: float, y: float):
        nonlocal best_point, best_report
        ylo = math.sqrt(max(0.0, 1.0 - x * x))
        p = point_from_shape(x, max(y, ylo + 1e-12), m)
        rep = _solve_point(p, kernel, params, n, hops, multistarts)
        j = float(rep.j_trace[-1])
        landscape.append(LandscapeRow(p, j, m * l1 - j, rep.binarity, rep.converged))
        visited.append(p.lattice())
        if j > best_report.j_trace[-1]:
            best_point, best_report = p, rep
        return m * l1 - j

    # coordinate golden-section around the incumbent, shrinking radius
    for r in range(refine_rounds):
        if max_seconds is not None and time.perf_counter() - t0 > max_seconds:
            break
        radius = 0.5 ** r / max(2, grid_steps)
        for coord in (0, 1):
            x0, y0 = shape_coords(best_point)
            if coord == 0:
                lo, hi = max(0.0, x0 - radius), min(0.5, x0 + radius)
                obj = lambda t: evaluate(t, y0)
            else:
                ylo = math.sqrt(max(0.0, 1.0 - x0 * x0))
                lo, hi = max(ylo, y0 - radius), min(aspect_cap, y0 + radius)
                obj = lambda t: evaluate(x0, t)
            if hi - lo < 1e-12:
                continue
            c = hi - GOLDEN * (hi - lo)
            d = lo + GOLDEN * (hi - lo)
            fc, fd = obj(c), obj(d)
            for _ in range(6):
                if fc < fd:
                    hi, d, fd = d, c, fc
                    c = hi - GOLDEN * (hi - lo)
                    fc = obj(c)
                else:
                    lo, c, fc = c, d, fd
                    d = lo + GOLDEN * (hi - lo)
                    fd = obj(d)

    nondegeneracy = min(lat.min_distance() for lat in visited)
    return SearchResult(best_point=best_point,
                        best_lattice=best_point.lattice(),
                        best_report=best_report,
                        landscape=landscape,
                        nondegeneracy=nondegeneracy,
                        covolume=m,
                        kernel_l1=l1)


def write_landscape_csv(landscape, path) -> None:
    lines = ["a,b,covolume,j_best,per_k,binarity,converged"]
    for row in landscape:
        lines.append(",".join([
            repr(float(row.point.a)),
            repr(float(row.point.b)),
            repr(float(row.point.m)),
            repr(float(row.j_best)),
            repr(float(row.per_k)),
            repr(float(row.binarity)),
            "1" if row.converged else "0",
        ]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
