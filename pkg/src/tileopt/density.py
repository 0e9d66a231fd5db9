"""Discretized relaxed fundamental densities.

A density lives on a finite window of lattice cells: the union of
(2R+1)^N translates of the fundamental parallelepiped, each sampled by
an n^N cell-centered grid. Points that differ by a lattice vector form
an orbit; the defining constraint is a per-orbit sum, equal to one in
exact mode and at most one in relaxed mode.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .lattice import Lattice

ORBIT_TOL = 1e-12
BINARY_TOL = 1e-6


@dataclass(frozen=True)
class GridSpec:
    """Sampling layout: lattice, samples per axis within a cell, and
    window hops R (the window spans lattice coordinates [-R, R+1] per
    axis). Sample weight is covolume / n^N."""

    lattice: Lattice
    n: int
    hops: int = 1

    def __post_init__(self):
        if self.lattice.dim not in (1, 2):
            raise ValueError("density grids support lattice dimension 1 and 2")
        if self.n < 1:
            raise ValueError("need at least one sample per axis")
        if self.hops < 0:
            raise ValueError("window hops must be nonnegative")

    @property
    def dim(self) -> int:
        return self.lattice.dim

    @property
    def copies(self) -> int:
        """Lattice translates per axis."""
        return 2 * self.hops + 1

    @property
    def per_axis(self) -> int:
        return self.copies * self.n

    @property
    def total(self) -> int:
        return self.per_axis ** self.dim

    @property
    def orbit_size(self) -> int:
        return self.copies ** self.dim

    @property
    def weight(self) -> float:
        return self.lattice.covolume / self.n ** self.dim

    def axis_coords(self) -> np.ndarray:
        """Cell-centered sample coordinates along one lattice axis."""
        return (np.arange(self.per_axis) + 0.5) / self.n - self.hops

    @cached_property
    def _points(self) -> np.ndarray:
        c = self.axis_coords()
        if self.dim == 1:
            t = c[:, None]
        else:
            g0, g1 = np.meshgrid(c, c, indexing="ij")
            t = np.column_stack([g0.ravel(), g1.ravel()])
        pts = t @ self.lattice.basis.T
        pts.setflags(write=False)
        return pts

    def sample_points(self) -> np.ndarray:
        """Physical coordinates of all window samples, flat C order,
        shape (total, dim)."""
        return self._points

    def to_orbits(self, values: np.ndarray) -> np.ndarray:
        """Reshape a flat window array into rows indexed by base-cell
        sample and columns by lattice translate."""
        k, n = self.copies, self.n
        if self.dim == 1:
            return values.reshape(k, n).T
        return (values.reshape(k, n, k, n)
                .transpose(1, 3, 0, 2)
                .reshape(n * n, k * k))

    def from_orbits(self, rows: np.ndarray) -> np.ndarray:
        k, n = self.copies, self.n
        if self.dim == 1:
            return rows.T.reshape(-1).copy()
        return (rows.reshape(n, n, k, k)
                .transpose(2, 0, 3, 1)
                .reshape(-1).copy())

    def central_cell_mask(self) -> np.ndarray:
        u = np.arange(self.per_axis)
        inside = (u // self.n) == self.hops
        if self.dim == 1:
            return inside
        return (inside[:, None] & inside[None, :]).ravel()

    def cell_diameter(self) -> float:
        b = self.lattice.basis
        if self.dim == 1:
            return abs(float(b[0, 0]))
        return max(float(np.linalg.norm(b[:, 0] + b[:, 1])),
                   float(np.linalg.norm(b[:, 0] - b[:, 1])))

    def window_circumradius(self) -> float:
        lo, hi = -float(self.hops), float(self.hops) + 1.0
        if self.dim == 1:
            corners = np.array([[lo], [hi]])
        else:
            corners = np.array([[lo, lo], [lo, hi], [hi, lo], [hi, hi]])
        return float(np.max(np.linalg.norm(corners @ self.lattice.basis.T, axis=1)))

    def to_json(self) -> dict:
        return {"lattice": self.lattice.to_json(), "n": self.n, "hops": self.hops}

    @classmethod
    def from_json(cls, d: dict) -> "GridSpec":
        return cls(Lattice.from_json(d["lattice"]), int(d["n"]), int(d["hops"]))


def project_exact(values_on_orbit) -> np.ndarray:
    """Euclidean projection of one orbit onto {v in [0,1]^k : sum = 1}.

    Exact breakpoint search: the pinned sum as a function of the shift
    parameter is piecewise linear with breakpoints at y_i and y_i - 1;
    the crossing is located and inverted in closed form.
    """
    y = np.asarray(values_on_orbit, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("orbit must be a nonempty vector")
    return _project_rows(y[None, :])[0]


def _project_rows(rows: np.ndarray) -> np.ndarray:
    y = np.asarray(rows, dtype=float)
    q, k = y.shape
    bp = np.concatenate([y, y - 1.0], axis=1)
    bp.sort(axis=1)
    bp = bp[:, ::-1]  # descending, so the pinned sum is nondecreasing
    g = np.sum(np.clip(y[:, None, :] - bp[:, :, None], 0.0, 1.0), axis=2)
    crossed = g >= 1.0
    j = np.argmax(crossed, axis=1)  # first crossing
    # the pinned sum reaches k >= 1 at the final breakpoint, so a row
    # with no flagged crossing lost it to roundoff in y - (y - 1.0);
    # the interpolation below then restores the saturated solution
    j = np.where(crossed.any(axis=1), j, 2 * k - 1)
    rows_i = np.arange(q)
    gj = g[rows_i, j]
    tau = bp[rows_i, j]
    interior = j > 0
    if np.any(interior):
        jm = np.maximum(j - 1, 0)
        g0 = g[rows_i, jm]   # previous breakpoint: larger tau, sum below 1
        t0 = bp[rows_i, jm]
        den = g0 - gj
        adj = np.where((den != 0.0) & interior,
                       (1.0 - gj) * (t0 - tau) / np.where(den == 0.0, 1.0, den),
                       0.0)
        tau = tau + adj
    return np.clip(y - tau[:, None], 0.0, 1.0)


def _project_rows_relaxed(rows: np.ndarray) -> np.ndarray:
    out = np.clip(rows, 0.0, 1.0)
    over = np.sum(out, axis=1) > 1.0
    if np.any(over):
        out[over] = _project_rows(rows[over])
    return out


class DensityField:
    """Values in [0,1] on a window grid, one per sample, with the
    per-orbit sum constraint checked at construction."""

    def __init__(self, spec: GridSpec, values, constraint_mode: str = "exact"):
        if constraint_mode not in ("exact", "relaxed"):
            raise ValueError("constraint_mode must be 'exact' or 'relaxed'")
        v = np.asarray(values, dtype=float).reshape(-1).copy()
        if v.size != spec.total:
            raise ValueError(f"expected {spec.total} values, got {v.size}")
        if np.any(v < -ORBIT_TOL) or np.any(v > 1.0 + ORBIT_TOL):
            raise ValueError("density values must lie in [0, 1]")
        sums = spec.to_orbits(v).sum(axis=1)
        if constraint_mode == "exact":
            if np.max(np.abs(sums - 1.0)) > ORBIT_TOL:
                raise ValueError("exact mode: every orbit must sum to 1")
        elif np.max(sums) > 1.0 + ORBIT_TOL:
            raise ValueError("relaxed mode: orbit sums must not exceed 1")
        v.setflags(write=False)
        self.spec = spec
        self.values = v
        self.constraint_mode = constraint_mode

    # -- constructors -------------------------------------------------

    @classmethod
    def indicator_of_cell(cls, spec: GridSpec) -> "DensityField":
        """One on the central lattice cell, zero elsewhere: the basic
        tiling density."""
        v = np.where(spec.central_cell_mask(), 1.0, 0.0)
        return cls(spec, v, "exact")

    @classmethod
    def uniform(cls, spec: GridSpec) -> "DensityField":
        v = np.full(spec.total, 1.0 / spec.orbit_size)
        return cls(spec, v, "exact")

    @classmethod
    def zeros(cls, spec: GridSpec) -> "DensityField":
        return cls(spec, np.zeros(spec.total), "relaxed")

    @classmethod
    def random(cls, spec: GridSpec, rng, constraint_mode: str = "exact") -> "DensityField":
        raw = spec.to_orbits(rng.uniform(0.0, 1.5, size=spec.total))
        rows = _project_rows(raw) if constraint_mode == "exact" else _project_rows_relaxed(raw)
        return cls(spec, spec.from_orbits(rows), constraint_mode)

    def with_values(self, values) -> "DensityField":
        return DensityField(self.spec, values, self.constraint_mode)

    # -- accounting ---------------------------------------------------

    def mass(self) -> float:
        return self.spec.weight * float(np.sum(self.values))

    def orbit_sums(self) -> np.ndarray:
        return self.spec.to_orbits(self.values).sum(axis=1)

    def periodization(self, base_point_index) -> float:
        """Sum of values over the orbit of a base-cell sample; the
        index is flat C order over the n^dim base grid (a per-axis
        tuple is also accepted)."""
        idx = base_point_index
        if not np.isscalar(idx):
            j = tuple(int(a) for a in idx)
            if len(j) != self.spec.dim:
                raise ValueError("base point index has wrong length")
            idx = j[0] if self.spec.dim == 1 else j[0] * self.spec.n + j[1]
        idx = int(idx)
        if not 0 <= idx < self.spec.n ** self.spec.dim:
            raise ValueError("base point index out of range")
        return float(self.spec.to_orbits(self.values)[idx].sum())

    # -- shape diagnostics --------------------------------------------

    def threshold(self) -> "DensityField":
        """Round to the {0,1} density that keeps, in every orbit, only
        the sample with the largest value. Ties go to the smallest flat
        window index; the orbit constraint is preserved exactly."""
        if self.constraint_mode != "exact":
            raise ValueError("threshold applies to exact-mode fields")
        rows = self.spec.to_orbits(self.values)
        # column C order coincides with increasing flat window index
        # within each orbit, so argmax's first-hit rule is the tie-break
        win = np.argmax(rows, axis=1)
        out = np.zeros_like(rows)
        out[np.arange(rows.shape[0]), win] = 1.0
        return DensityField(self.spec, self.spec.from_orbits(out), "exact")

    def binarity_deficit(self) -> float:
        """Window measure of samples strictly between 0 and 1."""
        v = self.values
        frac = np.sum((v > BINARY_TOL) & (v < 1.0 - BINARY_TOL))
        return self.spec.weight * float(frac)

    def support_radius(self) -> float:
        """Largest |x| over samples carrying value above threshold;
        zero for an empty field."""
        mask = self.values > BINARY_TOL
        if not np.any(mask):
            return 0.0
        pts = self.spec.sample_points()[mask]
        return float(np.max(np.linalg.norm(pts, axis=1)))

    def project(self) -> "DensityField":
        rows = self.spec.to_orbits(self.values)
        rows = _project_rows(rows) if self.constraint_mode == "exact" \
            else _project_rows_relaxed(rows)
        return DensityField(self.spec, self.spec.from_orbits(rows), self.constraint_mode)


def project_field(field: DensityField, values) -> DensityField:
    """Project arbitrary window values onto the field's constraint set
    and wrap them in a new DensityField."""
    rows = field.spec.to_orbits(np.asarray(values, dtype=float))
    rows = _project_rows(rows) if field.constraint_mode == "exact" \
        else _project_rows_relaxed(rows)
    return DensityField(field.spec, field.spec.from_orbits(rows), field.constraint_mode)


# -- serialization ----------------------------------------------------


def _orbit_ids(spec: GridSpec) -> np.ndarray:
    u = np.arange(spec.per_axis) % spec.n
    if spec.dim == 1:
        return u
    return (u[:, None] * spec.n + u[None, :]).ravel()


def write_density_csv(field: DensityField, path) -> None:
    """Dump a field as CSV with a JSON header line. Values use the
    shortest decimal representation that round-trips float64 exactly."""
    spec = field.spec
    header = dict(spec.to_json())
    header["mode"] = field.constraint_mode
    pts = spec.sample_points()
    ids = _orbit_ids(spec)
    cols = [f"x{i}" for i in range(spec.dim)] + ["value", "orbit_id"]
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(header) + "\n")
        writer = csv.writer(fh)
        writer.writerow(cols)
        for p, v, oid in zip(pts, field.values, ids):
            writer.writerow([repr(float(c)) for c in p] + [repr(float(v)), int(oid)])


def read_density_csv(path) -> DensityField:
    with open(path, "r", newline="") as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError("missing JSON header line")
        header = json.loads(first[2:])
        spec = GridSpec.from_json(header)
        reader = csv.reader(fh)
        next(reader)  # column names
        values = np.empty(spec.total)
        count = 0
        for row in reader:
            if count >= spec.total:
                raise ValueError("more rows than grid points")
            values[count] = float(row[spec.dim])
            count += 1
    if count != spec.total:
        raise ValueError("row count does not match the grid")
    field = DensityField(spec, values, header.get("mode", "exact"))
    # spot-check the coordinate columns against the rebuilt grid
    with open(path, "r", newline="") as fh:
        fh.readline()
        reader = csv.reader(fh)
        next(reader)
        row = next(reader)
        expect = spec.sample_points()[0]
        if any(float(row[i]) != expect[i] for i in range(spec.dim)):
            raise ValueError("grid header inconsistent with coordinate columns")
    return field
