"""Interaction kernels: radial families, L1 norms, tail integrals,
assumption checks, and lattice periodization with rigorous truncation
bounds.

Every kernel is radial and nonnegative, so symmetry K(h) = K(-h) holds
structurally. Supported families: fractional (a homogeneous singular
power law, optionally clamped near the origin to make it integrable),
gaussian, exponential, indicator of a ball, and tabulated radial
profiles with linear interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import Lattice

# volume of the unit ball and area of the unit sphere, dims 1..3
_BALL_VOL = {1: 2.0, 2: math.pi, 3: 4.0 * math.pi / 3.0}
_SPHERE_AREA = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}

_FAMILIES = ("fractional", "gaussian", "exponential", "indicator", "table")


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of the structural kernel checks.

    satisfies_frac: bounded below by a positive multiple of the
    singular power law near the origin, with exponent in (0, 1).
    satisfies_int: finite total mass. strict_clause: "holds" when the
    profile strictly decreases from the origin (a certificate that
    nearby translates differ), "fails" when the profile is constant on
    a neighborhood of the origin, "unverified" otherwise.
    """

    satisfies_frac: bool
    satisfies_int: bool
    strictly_decreasing: bool
    strict_clause: str
    message: str = ""


class Kernel:
    """Radial interaction kernel.

    Use the family classmethods rather than the constructor. Instances
    are immutable and safe to share across threads; eval is pure.
    """

    def __init__(self, family, dim, **params):
        if family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {family!r}")
        if dim not in (1, 2, 3):
            raise ValueError("kernel dimension must be 1, 2, or 3")
        self.family = family
        self.dim = int(dim)
        self.is_regularized = bool(params.pop("is_regularized", False))
        self.smooth = family in ("gaussian", "exponential")
        for name, value in params.items():
            setattr(self, name, value)
        self._params = dict(params)

    # -- constructors -------------------------------------------------

    @classmethod
    def gaussian(cls, alpha: float = 1.0, dim: int = 2) -> "Kernel":
        """K(h) = exp(-alpha |h|^2)."""
        if alpha <= 0.0:
            raise ValueError("gaussian width alpha must be positive")
        return cls("gaussian", dim, alpha=float(alpha))

    @classmethod
    def exponential(cls, beta: float = 1.0, dim: int = 2) -> "Kernel":
        """K(h) = exp(-beta |h|)."""
        if beta <= 0.0:
            raise ValueError("exponential rate beta must be positive")
        return cls("exponential", dim, beta=float(beta))

    @classmethod
    def fractional(cls, coeff: float = 1.0, s: float = 0.5, dim: int = 2) -> "Kernel":
        """K(h) = coeff |h|^(-dim-s), singular at the origin."""
        if coeff <= 0.0:
            raise ValueError("fractional coefficient must be positive")
        if not (0.0 < s < 1.0):
            raise ValueError("fractional exponent s must lie in (0, 1)")
        return cls("fractional", dim, coeff=float(coeff), s=float(s), delta=None)

    @classmethod
    def indicator(cls, radius: float = 1.0, dim: int = 2) -> "Kernel":
        """K = 1 on the closed ball of the given radius, else 0."""
        if radius <= 0.0:
            raise ValueError("indicator radius must be positive")
        return cls("indicator", dim, radius=float(radius))

    @classmethod
    def table(cls, values, step: float, dim: int = 2) -> "Kernel":
        """Radial profile sampled at radii 0, step, 2 step, ...; linear
        interpolation between samples, zero beyond the last one.

        Samples must be nonnegative and nonincreasing: the truncation
        bounds used for periodization rely on a nonincreasing profile.
        """
        v = np.asarray(values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("table kernel needs at least two radial samples")
        if step <= 0.0:
            raise ValueError("table sample spacing must be positive")
        if np.any(v < 0.0) or not np.all(np.isfinite(v)):
            raise ValueError("table samples must be finite and nonnegative")
        if np.any(np.diff(v) > 0.0):
            raise ValueError("table samples must be nonincreasing")
        v = v.copy()
        v.setflags(write=False)
        return cls("table", dim, values=v, step=float(step))

    # -- evaluation ---------------------------------------------------

    def _profile(self, r):
        """Kernel value as a function of radius; r is a float array."""
        if self.family == "gaussian":
            return np.exp(-self.alpha * r * r)
        if self.family == "exponential":
            return np.exp(-self.beta * r)
        if self.family == "indicator":
            return np.where(r <= self.radius, 1.0, 0.0)
        if self.family == "table":
            n = self.values.size
            return np.interp(r, np.arange(n) * self.step, self.values,
                             left=self.values[0], right=0.0)
        # fractional, possibly clamped
        with np.errstate(divide="ignore"):
            out = self.coeff * r ** (-self.dim - self.s)
        if self.is_regularized:
            return np.minimum(out, self.coeff * self.delta ** (-self.dim - self.s))
        return out

    def eval(self, h):
        """Evaluate at offset vectors h with shape (..., dim); for
        dim 1 a plain array of coordinates is also accepted. Returns an
        array of shape h.shape[:-1] (or a float for a single vector).
        """
        a = np.asarray(h, dtype=float)
        if self.dim == 1 and (a.ndim == 0 or a.shape[-1] != 1):
            r = np.abs(a)
        else:
            if a.ndim == 0 or a.shape[-1] != self.dim:
                raise ValueError(f"offset vectors must have last axis {self.dim}")
            r = np.sqrt(np.sum(a * a, axis=-1))
        scalar = (r.ndim == 0)
        r = np.atleast_1d(r)
        if self.family == "fractional" and not self.is_regularized and np.any(r == 0.0):
            raise ValueError("singular at origin")
        out = self._profile(r)
        return float(out[0]) if scalar else out

    # -- integrals ----------------------------------------------------

    def l1_norm(self) -> float:
        """Total mass; +inf for the unclamped fractional family."""
        n = self.dim
        if self.family == "gaussian":
            return (math.pi / self.alpha) ** (n / 2.0)
        if self.family == "exponential":
            b = self.beta
            return {1: 2.0 / b, 2: 2.0 * math.pi / (b * b),
                    3: 8.0 * math.pi / b ** 3}[n]
        if self.family == "indicator":
            return _BALL_VOL[n] * self.radius ** n
        if self.family == "table":
            return self._table_mass(0.0)
        if self.is_regularized:
            # clamp value over the inner ball plus the power-law tail
            return self.coeff * _BALL_VOL[n] * self.delta ** (-self.s) * (1.0 + n / self.s)
        return math.inf

    def radial_tail(self, radius: float) -> float:
        """Mass outside the ball of the given radius. Finite for every
        family: the fractional singularity sits at the origin only."""
        r = max(0.0, float(radius))
        n = self.dim
        if self.family == "gaussian":
            a = self.alpha
            if n == 1:
                return math.sqrt(math.pi / a) * math.erfc(math.sqrt(a) * r)
            if n == 2:
                return (math.pi / a) * math.exp(-a * r * r)
            return 4.0 * math.pi * (r * math.exp(-a * r * r) / (2.0 * a)
                                    + math.sqrt(math.pi) * math.erfc(math.sqrt(a) * r)
                                    / (4.0 * a ** 1.5))
        if self.family == "exponential":
            b = self.beta
            e = math.exp(-b * r)
            if n == 1:
                return 2.0 * e / b
            if n == 2:
                return 2.0 * math.pi * e * (r / b + 1.0 / (b * b))
            return 4.0 * math.pi * e * (r * r / b + 2.0 * r / (b * b) + 2.0 / b ** 3)
        if self.family == "indicator":
            if r >= self.radius:
                return 0.0
            return _BALL_VOL[n] * (self.radius ** n - r ** n)
        if self.family == "table":
            return self._table_mass(r)
        if self.is_regularized and r < self.delta:
            head = self.coeff * _BALL_VOL[n] * r ** n * self.delta ** (-n - self.s)
            return self.l1_norm() - head
        if r == 0.0:
            return math.inf if not self.is_regularized else self.l1_norm()
        return self.coeff * _SPHERE_AREA[n] * r ** (-self.s) / self.s

    def _table_mass(self, r_from: float) -> float:
        # the profile is linear on each segment, so the radial integrand
        # profile(r) * r^(n-1) is a polynomial; integrate it exactly
        n = self.dim
        step = self.step
        v = self.values
        total = 0.0
        for i in range(v.size - 1):
            lo, hi = i * step, (i + 1) * step
            a = max(lo, r_from)
            if a >= hi:
                continue
            slope = (v[i + 1] - v[i]) / step
            c0 = v[i] - slope * lo
            c1 = slope

            def antider(r):
                return c0 * r ** n / n + c1 * r ** (n + 1) / (n + 1)

            total += antider(hi) - antider(a)
        return _SPHERE_AREA[n] * total

    def support_radius(self) -> float:
        if self.family == "indicator":
            return self.radius
        if self.family == "table":
            return (self.values.size - 1) * self.step
        return math.inf

    # -- structure checks ---------------------------------------------

    def check_assumptions(self) -> AssumptionReport:
        """Classify the kernel against the two admissible regimes.

        The strict clause asks that translates near the origin stay
        strictly above the value at any fixed nonzero offset. A profile
        that strictly decreases from the origin certifies this; a
        profile constant on a neighborhood of the origin violates it.
        Anything in between is reported as unverified, not failed.
        """
        frac = self.family == "fractional" and not self.is_regularized
        integrable = math.isfinite(self.l1_norm())
        if self.family in ("gaussian", "exponential"):
            return AssumptionReport(False, True, True, "holds")
        if frac:
            return AssumptionReport(True, False, True, "holds",
                                    "not integrable; regularize before periodizing")
        if self.family == "fractional":
            return AssumptionReport(
                False, True, False, "fails",
                f"profile is constant for |h| <= {self.delta:g}, so differences "
                "against nearby translates vanish near the origin")
        if self.family == "indicator":
            return AssumptionReport(
                False, True, False, "fails",
                "profile is constant around the origin, so differences against "
                "nearby translates vanish near the origin")
        # table: certify from the samples
        d = np.diff(self.values)
        if self.values[1] == self.values[0]:
            return AssumptionReport(
                False, integrable, False, "fails",
                "profile is constant around the origin, so differences against "
                "nearby translates vanish near the origin")
        if np.all(d < 0.0):
            return AssumptionReport(False, integrable, True, "holds")
        return AssumptionReport(False, integrable, False, "unverified",
                                "profile has interior plateaus; strict decrease "
                                "near the origin holds but was not certified "
                                "against all offsets")

    # -- config round trip --------------------------------------------

    def to_config(self) -> dict:
        d = {"family": self.family, "dim": self.dim}
        for k, v in self._params.items():
            d[k] = v.tolist() if isinstance(v, np.ndarray) else v
        if self.is_regularized:
            d["is_regularized"] = True
        return d

    @classmethod
    def from_config(cls, cfg: dict) -> "Kernel":
        c = dict(cfg)
        family = c.pop("family")
        dim = int(c.pop("dim", 2))
        if family == "gaussian":
            return cls.gaussian(c.get("alpha", 1.0), dim)
        if family == "exponential":
            return cls.exponential(c.get("beta", 1.0), dim)
        if family == "indicator":
            return cls.indicator(c.get("radius", 1.0), dim)
        if family == "table":
            return cls.table(c["values"], c["step"], dim)
        if family == "fractional":
            k = cls.fractional(c.get("coeff", 1.0), c.get("s", 0.5), dim)
            if c.get("is_regularized"):
                return regularize_fractional(k, c["delta"])
            return k
        raise ValueError(f"unknown kernel family {family!r}")

    def __repr__(self):
        ps = ", ".join(f"{k}={v!r}" for k, v in self._params.items()
                       if not isinstance(v, np.ndarray))
        return f"Kernel({self.family}, dim={self.dim}, {ps})"


def regularize_fractional(kernel: Kernel, delta: float) -> Kernel:
    """Clamp a fractional kernel at its value on the sphere of radius
    delta. The result is integrable, radially nonincreasing, agrees
    with the input for |h| >= delta, and converges monotonically to the
    input pointwise as delta decreases."""
    if kernel.family != "fractional" or kernel.is_regularized:
        raise ValueError("only an unclamped fractional kernel can be regularized")
    if delta <= 0.0:
        raise ValueError("regularization radius delta must be positive")
    return Kernel("fractional", kernel.dim, coeff=kernel.coeff, s=kernel.s,
                  delta=float(delta), is_regularized=True)


class PeriodizedKernel:
    """Lattice periodization of an integrable kernel by a truncated sum
    over translates.

    eval(x) sums K(x + g) over lattice vectors with |g| <= cutoff;
    the argument is first reduced into the Voronoi cell, which both
    stabilizes the truncation bound and makes eval lattice-periodic
    exactly. tail_bound dominates the omitted mass at any point.
    """

    def __init__(self, kernel: Kernel, lattice: Lattice, cutoff_radius: float,
                 tail_bound: float):
        self.kernel = kernel
        self.lattice = lattice.reduce()  # nearest-vector rounding assumes this
        self.cutoff_radius = float(cutoff_radius)
        self.tail_bound = float(tail_bound)
        self._shifts = self.lattice.points_in_ball(self.cutoff_radius)

    def eval(self, x, block: int = 4096):
        """Periodized value at points of shape (..., dim); scalar input
        allowed for dim 1."""
        a = np.asarray(x, dtype=float)
        if self.kernel.dim == 1 and (a.ndim == 0 or a.shape[-1] != 1):
            a = a[..., None]
        scalar = (a.ndim == 1)
        pts = np.atleast_2d(a).reshape(-1, self.kernel.dim)
        red = self.lattice.reduce_points(pts)
        out = np.empty(red.shape[0])
        for start in range(0, red.shape[0], block):
            sl = slice(start, min(start + block, red.shape[0]))
            diff = red[sl, None, :] + self._shifts[None, :, :]
            out[sl] = np.sum(self.kernel.eval(diff), axis=1)
        out = out.reshape(a.shape[:-1])
        return float(out) if scalar else out


def _cell_radii(lattice: Lattice):
    """Circumradius of the Voronoi cell and the cell diameter."""
    if lattice.dim == 1:
        rho = 0.5 * lattice.covolume
    else:
        cell = lattice.voronoi_cell()
        rho = float(np.max(np.hypot(cell.vertices[:, 0], cell.vertices[:, 1])))
    return rho, 2.0 * rho


def periodized_tail_bound(kernel: Kernel, lattice: Lattice, cutoff: float) -> float:
    """Upper bound on the mass omitted by truncating the periodization
    sum at the given cutoff, valid at every point of the Voronoi cell.

    Generic bound: tail integral beyond cutoff - 2 * cell diameter,
    scaled by the covolume (a packing argument needs the profile
    nonincreasing, which every family guarantees). Compactly supported
    kernels short-circuit to zero once no omitted translate can reach
    the support.
    """
    supp = kernel.support_radius()
    rho, diam = _cell_radii(lattice)
    if math.isfinite(supp):
        lam = lattice.min_distance()
        # points reduced into the cell sit within rho of the origin and
        # at least lam - |x| from every other lattice point
        if supp <= 0.5 * lam and cutoff >= supp:
            return 0.0
        if cutoff >= supp + rho:
            return 0.0
    return kernel.radial_tail(max(0.0, cutoff - 2.0 * diam)) / lattice.covolume


def periodize(kernel: Kernel, lattice: Lattice, tail_tolerance: float = 1e-8) -> PeriodizedKernel:
    """Periodize an integrable kernel over a lattice, choosing the
    smallest cutoff radius whose truncation bound meets the tolerance.

    Raises for kernels without finite mass; clamp a fractional kernel
    first. Supported for lattice dimension 1 and 2.
    """
    if not math.isfinite(kernel.l1_norm()):
        raise ValueError("periodization requires integrable kernel")
    if kernel.dim != lattice.dim:
        raise ValueError("kernel and lattice dimensions differ")
    if lattice.dim > 2:
        raise ValueError("periodization supports dimensions 1 and 2")
    if tail_tolerance <= 0.0:
        raise ValueError("tail tolerance must be positive")

    lat = lattice.reduce()

    def bound(r):
        return periodized_tail_bound(kernel, lat, r)

    supp = kernel.support_radius()
    lo = min(supp, lat.min_distance()) if math.isfinite(supp) else 0.0
    if bound(lo) <= tail_tolerance:
        return PeriodizedKernel(kernel, lat, lo, bound(lo))
    hi = max(lo, lat.min_distance())
    while bound(hi) > tail_tolerance:
        hi = 2.0 * hi
        if hi > 1e9:
            raise ValueError("tail tolerance unreachable for this kernel")
    # bisect to the minimal admissible cutoff; the bound is monotone
    a, b = lo, hi
    for _ in range(80):
        mid = 0.5 * (a + b)
        if bound(mid) <= tail_tolerance:
            b = mid
        else:
            a = mid
    return PeriodizedKernel(kernel, lat, b, bound(b))
