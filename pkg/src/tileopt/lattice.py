"""Full-rank Euclidean lattices in dimension 1, 2, 3.

Bases are stored as matrices whose columns generate the lattice. The
reduction routine is Lagrange-Gauss in the plane and a greedy
shortest-vector basis in dimension 3; reduced bases satisfy the product
bound prod |v_i| <= c_dim * covolume with c_2 = 2/sqrt(3), c_3 = 2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .polygon2d import Polygon

PRODUCT_BOUND = {1: 1.0, 2: 2.0 / math.sqrt(3.0), 3: 2.0}


def _lex_sign_fix(basis):
    """Flip column signs so the leading nonzero coordinate of each
    generator is positive. Pure sign choice, the lattice is unchanged."""
    b = basis.copy()
    for j in range(b.shape[1]):
        col = b[:, j]
        scale = float(np.max(np.abs(col))) or 1.0
        for x in col:
            if abs(x) > 1e-12 * scale:
                if x < 0:
                    b[:, j] = -col
                break
    return b


class Lattice:
    """Lattice spanned by the columns of a nonsingular basis matrix."""

    def __init__(self, basis):
        b = np.array(basis, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValueError("basis must be a square matrix")
        n = b.shape[0]
        if n not in (1, 2, 3):
            raise ValueError("supported dimensions are 1, 2, 3")
        if not np.all(np.isfinite(b)):
            raise ValueError("basis entries must be finite")
        det = float(np.linalg.det(b))
        norms = np.linalg.norm(b, axis=0)
        if abs(det) <= 1e-12 * float(np.prod(norms)) or det == 0.0:
            raise ValueError("degenerate lattice basis")
        b.setflags(write=False)
        self._b = b
        self.dim = n
        self.covolume = abs(det)

    @property
    def basis(self):
        return self._b

    def __repr__(self):
        return f"Lattice(dim={self.dim}, covolume={self.covolume:.6g})"

    # -- reduction ----------------------------------------------------

    def reduce(self) -> "Lattice":
        """Reduced basis for the same lattice.

        dim 1: sign normalization. dim 2: Lagrange-Gauss, after which
        |v1| <= |v2| and |<v1,v2>| <= |v1|^2 / 2. dim 3: pairwise size
        reduction followed by a greedy rebuild from enumerated short
        vectors, which attains the successive minima in this dimension.
        """
        b = self._b.copy()
        if self.dim == 1:
            red = b
        elif self.dim == 2:
            red = _gauss_reduce(b)
        else:
            red = _greedy_reduce_3d(b, self.covolume)
        red = _lex_sign_fix(red)
        out = Lattice(red)
        if abs(out.covolume - self.covolume) > 1e-9 * self.covolume:
            raise ValueError("reduction changed the covolume")
        return out

    # -- enumeration --------------------------------------------------

    def points_in_ball(self, radius, include_zero=True):
        """All lattice points with |x| <= radius (closed ball, with a
        1e-9 relative slack on the boundary), as rows of an array."""
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        red = self.reduce() if self.dim > 1 else self
        return _enumerate_ball(red.basis, radius, include_zero)

    def min_distance(self) -> float:
        """Length of a shortest nonzero lattice vector, found by
        enumerating the ball of radius min_i |v_i| of the reduced basis."""
        red = self.reduce()
        r = float(np.min(np.linalg.norm(red.basis, axis=0)))
        pts = _enumerate_ball(red.basis, r * (1.0 + 1e-12), include_zero=False)
        return float(np.min(np.linalg.norm(pts, axis=1)))

    def closest_point(self, x):
        """Lattice point nearest to x (rounding plus a local search,
        exact for reduced bases in these dimensions)."""
        x = np.asarray(x, dtype=float)
        red = self.reduce()
        b = red.basis
        k0 = np.round(np.linalg.solve(b, x))
        best = None
        best_d = math.inf
        for off in product((-1.0, 0.0, 1.0), repeat=self.dim):
            g = b @ (k0 + np.array(off))
            d = float(np.sum((x - g) ** 2))
            if d < best_d - 1e-18 or best is None:
                best, best_d = g, d
        return best

    def reduce_points(self, pts):
        """Translate each point by a lattice vector into the Voronoi
        cell of the origin. Vectorized closest-vector reduction; exact
        for reduced bases in these dimensions."""
        x = np.atleast_2d(np.asarray(pts, dtype=float))
        b = self.reduce().basis
        k0 = np.round(np.linalg.solve(b, x.T)).T
        out = np.empty_like(x)
        best_d = np.full(x.shape[0], math.inf)
        for off in product((-1.0, 0.0, 1.0), repeat=self.dim):
            r = x - (k0 + np.array(off)) @ b.T
            d = np.sum(r * r, axis=1)
            take = d < best_d
            out[take] = r[take]
            best_d = np.minimum(best_d, d)
        return out

    # -- geometry -----------------------------------------------------

    def voronoi_cell(self):
        """Voronoi cell of the origin: interval (dim 1) or Polygon
        (dim 2). Centrally symmetric with area equal to the covolume."""
        if self.dim == 1:
            a = abs(float(self._b[0, 0]))
            return (-0.5 * a, 0.5 * a)
        if self.dim != 2:
            raise ValueError("voronoi_cell supports dimensions 1 and 2")
        red = self.reduce()
        rmax = float(np.max(np.linalg.norm(red.basis, axis=0)))
        nbrs = _enumerate_ball(red.basis, 2.0 * rmax * (1.0 + 1e-12), include_zero=False)
        order = np.lexsort((nbrs[:, 1], nbrs[:, 0], np.linalg.norm(nbrs, axis=1)))
        half = 2.0 * rmax
        cell = [np.array([-half, -half]), np.array([half, -half]),
                np.array([half, half]), np.array([-half, half])]
        for g in nbrs[order]:
            cell = _clip_halfplane(cell, g, 0.5 * float(g @ g))
            if len(cell) < 3:
                raise ValueError("voronoi cell collapsed")
        cell = _dedupe_ring(np.array(cell), 1e-12 * max(rmax, 1.0))
        return Polygon(cell)

    def covering_radius_bound(self):
        """Circumradius of the Voronoi cell (dim <= 2): the farthest any
        point can be from the lattice."""
        if self.dim == 1:
            return 0.5 * abs(float(self._b[0, 0]))
        cell = self.voronoi_cell()
        return float(np.max(np.linalg.norm(cell.vertices, axis=1)))

    # -- serialization ------------------------------------------------

    def to_json(self) -> str:
        cols = [[float(x) for x in self._b[:, j]] for j in range(self.dim)]
        return json.dumps({"dim": self.dim, "basis": cols})

    @classmethod
    def from_json(cls, text) -> "Lattice":
        data = json.loads(text)
        dim = int(data["dim"])
        cols = data["basis"]
        if len(cols) != dim or any(len(c) != dim for c in cols):
            raise ValueError("basis shape does not match dim")
        # covolume is recomputed by the constructor, never trusted
        return cls(np.array(cols, dtype=float).T)


def _gauss_reduce(b):
    # exact ties (hexagonal-style bases sit on both boundaries) must be
    # fixed points, so comparisons carry a relative slack
    v1, v2 = b[:, 0].copy(), b[:, 1].copy()
    for _ in range(1000):
        if v1 @ v1 > (v2 @ v2) * (1.0 + 1e-12):
            v1, v2 = v2, v1
        ratio = float(v1 @ v2) / float(v1 @ v1)
        mu = round(ratio)
        if abs(ratio) <= 0.5 + 1e-12:
            mu = 0
        if mu == 0:
            break
        v2 = v2 - mu * v1
    else:
        raise ValueError("lattice reduction did not terminate")
    if v1 @ v1 > (v2 @ v2) * (1.0 + 1e-12):
        v1, v2 = v2, v1
    return np.column_stack([v1, v2])


def _size_reduce_passes_3d(b):
    for _ in range(100):
        changed = False
        order = np.argsort(np.linalg.norm(b, axis=0), kind="stable")
        b = b[:, order]
        for j in range(1, 3):
            for i in range(j):
                ratio = float(b[:, i] @ b[:, j]) / float(b[:, i] @ b[:, i])
                mu = 0 if abs(ratio) <= 0.5 + 1e-12 else round(ratio)
                if mu != 0:
                    b[:, j] = b[:, j] - mu * b[:, i]
                    changed = True
        if not changed:
            break
    return b


def _greedy_reduce_3d(b, covolume):
    b = _size_reduce_passes_3d(b.copy())
    r = float(np.max(np.linalg.norm(b, axis=0)))
    pts = _enumerate_ball(b, r * (1.0 + 1e-9), include_zero=False)
    norms = np.linalg.norm(pts, axis=1)
    order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0], norms))
    pts = pts[order]
    chosen = []
    for p in pts:
        cand = chosen + [p]
        m = np.array(cand).T
        if len(cand) < 3:
            if np.linalg.matrix_rank(np.array(cand)) == len(cand):
                chosen = cand
        else:
            if abs(abs(float(np.linalg.det(m))) - covolume) <= 1e-9 * covolume:
                chosen = cand
                break
    if len(chosen) != 3:
        raise ValueError("greedy reduction failed to find a basis")
    return np.array(chosen).T


def _enumerate_ball(basis, radius, include_zero):
    n = basis.shape[0]
    binv = np.linalg.inv(basis)
    bounds = [int(math.floor(radius * float(np.linalg.norm(binv[i])) + 1e-9)) for i in range(n)]
    axes = [np.arange(-m, m + 1) for m in bounds]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    pts = grid @ basis.T
    keep = np.linalg.norm(pts, axis=1) <= radius * (1.0 + 1e-9) + 1e-12
    pts = pts[keep]
    if not include_zero:
        pts = pts[np.linalg.norm(pts, axis=1) > 1e-12 * max(radius, 1.0)]
    return pts


def _clip_halfplane(cell, normal, offset):
    """Sutherland-Hodgman clip of a convex ring by <x, normal> <= offset."""
    out = []
    k = len(cell)
    for i in range(k):
        cur, nxt = cell[i], cell[(i + 1) % k]
        c_in = float(cur @ normal) <= offset
        n_in = float(nxt @ normal) <= offset
        if c_in:
            out.append(cur)
        if c_in != n_in:
            t = (offset - float(cur @ normal)) / float((nxt - cur) @ normal)
            out.append(cur + t * (nxt - cur))
    return out


def _dedupe_ring(pts, tol):
    keep = []
    for p in pts:
        if not keep or float(np.linalg.norm(p - keep[-1])) > tol:
            keep.append(p)
    if len(keep) > 1 and float(np.linalg.norm(keep[0] - keep[-1])) <= tol:
        keep.pop()
    return np.array(keep)


def kuratowski_distance(g1: Lattice, g2: Lattice, radius) -> float:
    """Local Hausdorff distance between two lattices.

    Every point of either lattice inside the closed ball B(0, radius)
    is matched against the full other lattice; the result is the larger
    of the two one-sided suprema. Zero exactly when the two point sets
    coincide inside the ball.
    """
    if g1.dim != g2.dim:
        raise ValueError("lattices must share a dimension")
    if radius <= 0:
        raise ValueError("radius must be positive")
    p1 = g1.points_in_ball(radius)
    p2 = g2.points_in_ball(radius)
    # the nearest match of a point p with |p| <= radius lies within
    # |p| of p (the origin belongs to both lattices), hence in B(0, 2r)
    q1 = g1.points_in_ball(2.0 * radius + 1e-9)
    q2 = g2.points_in_ball(2.0 * radius + 1e-9)

    def one_sided(pts, others):
        d2 = np.sum((pts[:, None, :] - others[None, :, :]) ** 2, axis=2)
        return float(np.sqrt(np.max(np.min(d2, axis=1))))

    return max(one_sided(p1, q2), one_sided(p2, q1))


@dataclass(frozen=True)
class ModuliPoint2D:
    """Point of the reduced shape space of planar lattices with fixed
    covolume m: basis v1 = (a, 0), v2 = (b, m/a) with 0 <= b <= a/2 and
    a^2 <= b^2 + (m/a)^2."""

    a: float
    b: float
    m: float

    def __post_init__(self):
        if not (self.a > 0.0 and self.m > 0.0):
            raise ValueError("moduli point needs a > 0 and m > 0")
        tol = 1e-9 * self.a
        if self.b < -tol or self.b > 0.5 * self.a + tol:
            raise ValueError("moduli point outside the reduced cell: b")
        h = self.m / self.a
        if self.a ** 2 > self.b ** 2 + h ** 2 + 1e-9 * self.a ** 2:
            raise ValueError("moduli point outside the reduced cell: a")

    def lattice(self) -> Lattice:
        return Lattice([[self.a, self.b], [0.0, self.m / self.a]])


def square_point(m) -> ModuliPoint2D:
    return ModuliPoint2D(a=math.sqrt(m), b=0.0, m=m)


def hexagonal_point(m) -> ModuliPoint2D:
    a = math.sqrt(2.0 * m / math.sqrt(3.0))
    return ModuliPoint2D(a=a, b=0.5 * a, m=m)


def moduli_grid(m, steps, aspect_cap=2.0):
    """Deterministic sample grid over the reduced moduli cell.

    Parametrized by x = b/a in [0, 1/2] and y = m/a^2 in
    [sqrt(1 - x^2), aspect_cap]; the cell is unbounded toward thin
    lattices, so y is capped. The square and hexagonal points are always
    included, first, exactly.
    """
    if steps < 1:
        raise ValueError("moduli grid needs steps >= 1")
    pts = [square_point(m), hexagonal_point(m)]
    coords = [(p.a, p.b) for p in pts]
    for i in range(steps + 1):
        x = 0.5 * i / steps
        ylo = math.sqrt(max(0.0, 1.0 - x * x))
        for j in range(steps + 1):
            y = ylo + (aspect_cap - ylo) * j / steps
            a = math.sqrt(m / y)
            b = x * a
            if any(abs(a - a0) <= 1e-9 * a and abs(b - b0) <= 1e-9 * a for a0, b0 in coords):
                continue
            p = ModuliPoint2D(a=a, b=b, m=m)
            pts.append(p)
            coords.append((a, b))
    return pts
