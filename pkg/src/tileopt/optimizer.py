"""Projected gradient ascent on the window self-interaction energy.

The feasible set is a product of capped simplices, one per translation
orbit, so each ascent step is a gradient move followed by the exact
per-orbit projection.  For positive-definite kernel families the
interaction matrix is PSD and every projected step increases the
energy; a step-halving fallback covers numerically indefinite table
kernels.  The module also carries the first and second order
optimality diagnostics and an exhaustive enumeration oracle for
instances small enough to check by brute force.
"""

import math
import time
from dataclasses import dataclass, field as _field

import numpy as np

from .density import BINARY_TOL, DensityField, GridSpec, project_field
from .energy import PotentialField, interaction_rowsums, potential
from .kernel import Kernel

STOP_PATIENCE = 10
MONOTONE_SLACK = 1e-12
ORACLE_CANDIDATE_CAP = 10 ** 7
TRACE_POINTS = 256


def _center_column(spec: GridSpec) -> int:
    # column index of the base cell inside each orbit row
    return int(np.ravel_multi_index((spec.hops,) * spec.dim,
                                    (spec.copies,) * spec.dim))


def _column_translates(spec: GridSpec) -> np.ndarray:
    """Physical lattice vector attached to each orbit column, shape
    (orbit_size, dim); the base-cell column maps to zero."""
    blocks = np.array(np.unravel_index(np.arange(spec.orbit_size),
                                       (spec.copies,) * spec.dim)).T
    return (blocks - spec.hops).astype(float) @ spec.lattice.basis.T


def stability_step_limit(spec: GridSpec, kernel: Kernel) -> float:
    """Largest admissible ascent step 1/(w^2 L), where L is the
    maximal weighted kernel row sum over the sample window."""
    ones = np.ones(spec.total)
    l_bound = spec.weight * float(np.max(interaction_rowsums(ones, spec, kernel)))
    return 1.0 / (spec.weight ** 2 * l_bound)


@dataclass
class SolverParams:
    """Ascent controls.  step_size None picks 0.9 of the stability
    limit; an explicit value above the limit is rejected."""

    step_size: float | None = None
    max_iters: int = 5000
    stop_tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.stop_tol > 0:
            raise ValueError("stop_tol must be positive")

    def to_json(self) -> dict:
        return {
            "step_size": None if self.step_size is None else float(self.step_size),
            "max_iters": int(self.max_iters),
            "stop_tol": float(self.stop_tol),
            "seed": int(self.seed),
        }


@dataclass
class OptimizationReport:
    final: DensityField
    j_trace: np.ndarray
    converged: bool
    first_order_residuals: dict
    second_order_samples: list
    binarity: float
    support_radius: float
    step_size: float
    iterations: int
    warnings: list = _field(default_factory=list)
    wall_time: float = 0.0
    params: SolverParams | None = None

    def decimated_trace(self, limit: int = TRACE_POINTS) -> list:
        """(iteration, energy) pairs, at most `limit` of them, first and
        last always included."""
        m = len(self.j_trace)
        if m <= limit:
            idx = np.arange(m)
        else:
            idx = np.unique(np.round(np.linspace(0, m - 1, limit)).astype(int))
        return [[int(i), float(self.j_trace[i])] for i in idx]

    def to_json(self) -> dict:
        # deterministic payload; wall clock lives outside so repeated
        # runs serialize identically
        return {
            "params": None if self.params is None else self.params.to_json(),
            "step_size": float(self.step_size),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "j_final": float(self.j_trace[-1]),
            "j_trace": self.decimated_trace(),
            "first_order_residuals": {k: float(v) for k, v
                                      in sorted(self.first_order_residuals.items())},
            "second_order_samples": [float(v) for v in self.second_order_samples],
            "binarity": float(self.binarity),
            "support_radius": float(self.support_radius),
            "warnings": [str(w) for w in self.warnings],
        }


def default_start(spec: GridSpec, seed: int = 0, noise: float = 0.05) -> DensityField:
    """Uniform orbit split plus small seeded noise, re-projected."""
    rng = np.random.default_rng(seed)
    base = np.full(spec.total, 1.0 / spec.orbit_size)
    base += rng.uniform(-noise, noise, size=spec.total)
    return project_field(DensityField.uniform(spec), base)


def voronoi_start(spec: GridSpec) -> DensityField:
    """Indicator of the Voronoi cell of the origin, projected to repair
    boundary ties."""
    pts = spec.sample_points()
    reduced = spec.lattice.reduce_points(pts)
    scale = 1.0 + np.linalg.norm(pts, axis=1)
    inside = np.all(np.abs(reduced - pts) <= 1e-9 * scale[:, None], axis=1)
    return project_field(DensityField.uniform(spec), inside.astype(float))


def _solver_warnings(spec: GridSpec, kernel: Kernel) -> list:
    out = []
    if kernel.check_assumptions().strict_clause != "holds":
        out.append("strict clause unverified")
    sup = kernel.support_radius()
    if math.isfinite(sup) and sup > spec.hops * spec.lattice.min_distance():
        out.append("window truncates kernel support")
    return out


def ascend(f0: DensityField, kernel: Kernel, params: SolverParams | None = None,
           method: str = "fft") -> OptimizationReport:
    """Projected ascent from f0; the report carries the energy trace and
    the optimality diagnostics of the final iterate."""
    if params is None:
        params = SolverParams()
    if f0.constraint_mode != "exact":
        raise ValueError("ascend requires an exact-mode field")
    if not math.isfinite(kernel.l1_norm()):
        raise ValueError("ascend requires an integrable kernel; "
                         "regularize the fractional family first")
    spec = f0.spec
    w2 = spec.weight ** 2
    limit = stability_step_limit(spec, kernel)
    if params.step_size is None:
        step0 = 0.9 * limit
    elif params.step_size > limit * (1.0 + 1e-12):
        raise ValueError("step too large: %.6g exceeds the stability "
                         "limit %.6g" % (params.step_size, limit))
    else:
        step0 = float(params.step_size)

    t0 = time.perf_counter()
    f = f0
    rows = interaction_rowsums(f.values, spec, kernel, method=method)
    j_prev = w2 * float(f.values @ rows)
    trace = [j_prev]
    quiet = 0
    converged = False
    for _ in range(params.max_iters):
        grad = 2.0 * w2 * rows
        step = step0
        cand = project_field(f, f.values + step * grad)
        rows_new = interaction_rowsums(cand.values, spec, kernel, method=method)
        j_new = w2 * float(cand.values @ rows_new)
        halved = 0
        while j_new < j_prev - MONOTONE_SLACK and halved < 60:
            step *= 0.5
            cand = project_field(f, f.values + step * grad)
            rows_new = interaction_rowsums(cand.values, spec, kernel, method=method)
            j_new = w2 * float(cand.values @ rows_new)
            halved += 1
        f, rows = cand, rows_new
        trace.append(j_new)
        rel = (j_new - j_prev) / max(abs(j_new), 1e-30)
        j_prev = j_new
        if rel < params.stop_tol:
            quiet += 1
            if quiet >= STOP_PATIENCE:
                converged = True
                break
        else:
            quiet = 0

    v_field = potential(f, kernel, method=method)
    residuals = first_order_residuals(f, v_field)
    probes = second_order_probe(f, kernel, trials=32, rng_seed=params.seed)
    return OptimizationReport(
        final=f,
        j_trace=np.asarray(trace),
        converged=converged,
        first_order_residuals=residuals,
        second_order_samples=probes,
        binarity=f.binarity_deficit(),
        support_radius=f.support_radius(),
        step_size=step0,
        iterations=len(trace) - 1,
        warnings=_solver_warnings(spec, kernel),
        wall_time=time.perf_counter() - t0,
        params=params,
    )


def first_order_residuals(f: DensityField, v: PotentialField) -> dict:
    """Stationarity violations of the potential across each orbit.

    Base-cell points split by value into the saturated set (f = 1), the
    null set (f = 0), both at tolerance 1e-6, and the fractional set in
    between.  At a maximizer the potential is maximal at saturated
    points, minimal against occupied partners at null points, and level
    across fractional partners.
    """
    spec = f.spec
    if v.spec is not spec and v.spec.to_json() != spec.to_json():
        raise ValueError("field and potential live on different grids")
    forb = spec.to_orbits(f.values)
    vorb = spec.to_orbits(v.values)
    c0 = _center_column(spec)
    fc = forb[:, c0]
    vc = vorb[:, c0]

    sat = fc >= 1.0 - BINARY_TOL
    null = fc <= BINARY_TOL
    frac = ~(sat | null)

    res_s = 0.0
    if np.any(sat):
        res_s = float(np.max(np.clip(vorb[sat] - vc[sat, None], 0.0, None)))
    res_n = 0.0
    if np.any(null):
        occupied = forb[null] > BINARY_TOL
        gap = np.clip(vc[null, None] - vorb[null], 0.0, None)
        res_n = float(np.max(np.where(occupied, gap, 0.0)))
    res_d = 0.0
    if np.any(frac):
        interior = (forb[frac] > BINARY_TOL) & (forb[frac] < 1.0 - BINARY_TOL)
        gap = np.abs(vorb[frac] - vc[frac, None])
        res_d = float(np.max(np.where(interior, gap, 0.0)))
    return {"res_D": res_d, "res_S": res_s, "res_N": res_n}


def second_order_probe(f: DensityField, kernel: Kernel, trials: int = 32,
                       rng_seed: int = 0) -> list:
    """Energy of two-point exchange variations between fractional
    points, w^2 (2K(0) - 2K(g)); positive values certify that a
    maximizer of a strictly decreasing kernel admits no fractional
    pair.  Empty when the fractional set supports no admissible pair.
    """
    spec = f.spec
    forb = spec.to_orbits(f.values)
    c0 = _center_column(spec)
    interior = (forb > BINARY_TOL) & (forb < 1.0 - BINARY_TOL)
    pairs = []
    for i in np.flatnonzero(interior[:, c0]):
        for j in np.flatnonzero(interior[i]):
            if j != c0:
                pairs.append((i, j))
    if not pairs:
        return []
    rng = np.random.default_rng(rng_seed)
    pick = rng.integers(0, len(pairs), size=trials)
    translates = _column_translates(spec)
    k0 = float(kernel.eval(np.zeros(spec.dim)))
    w2 = spec.weight ** 2
    out = []
    for t in pick:
        _, j = pairs[t]
        kg = float(kernel.eval(translates[j]))
        out.append(w2 * (2.0 * k0 - 2.0 * kg))
    return out


def exhaustive_binary_oracle(spec: GridSpec, kernel: Kernel,
                             chunk: int = 4096):
    """Enumerate every binary exact-mode field (one occupied translate
    per orbit) and return (best field, best energy).  Ties resolve to
    the lowest enumeration index, so the result is deterministic.
    """
    orbits = spec.n ** spec.dim
    size = spec.orbit_size
    count = size ** orbits
    if count > ORACLE_CANDIDATE_CAP:
        raise ValueError("instance too large: %d^%d = %d binary candidates "
                         "exceeds the 10^7 enumeration cap"
                         % (size, orbits, count))
    index_map = spec.to_orbits(np.arange(spec.total))
    pts = spec.sample_points()
    m = kernel.eval(pts[:, None, :] - pts[None, :, :])
    w2 = spec.weight ** 2
    radix = size ** np.arange(orbits, dtype=np.int64)

    best_j = -np.inf
    best_digits = None
    rows_idx = np.arange(orbits)
    for start in range(0, count, chunk):
        ids = np.arange(start, min(start + chunk, count), dtype=np.int64)
        digits = (ids[:, None] // radix[None, :]) % size
        c = np.zeros((len(ids), spec.total))
        c[np.arange(len(ids))[:, None], index_map[rows_idx[None, :], digits]] = 1.0
        j = w2 * np.einsum("ip,pq,iq->i", c, m, c)
        t = int(np.argmax(j))
        if j[t] > best_j:
            best_j = float(j[t])
            best_digits = digits[t].copy()
    values = np.zeros(spec.total)
    values[index_map[rows_idx, best_digits]] = 1.0
    return DensityField(spec, values, "exact"), best_j
