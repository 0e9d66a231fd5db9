import math

import numpy as np
import pytest

from tileopt.density import GridSpec
from tileopt.energy import per_k_set
from tileopt.kernel import Kernel
from tileopt.lattice import Lattice
from tileopt.optimizer import voronoi_start
from tileopt.polygon2d import (HexParams, Polygon, QuadratureParams,
                               SweepSpec, hexagon_from_generators,
                               hexagon_sweep, per_k_polygon, regular_hexagon,
                               regularize, rigid_mismatch,
                               steiner_symmetrize, two_step_regularize,
                               unit_square_hexagon, write_sweep_csv)

SQUARE = [[0.5, -0.5], [0.5, 0.5], [-0.5, 0.5], [-0.5, -0.5]]


def regular_hex_params() -> HexParams:
    return hexagon_from_generators((1.0, 0.0), (0.5, math.sqrt(3.0) / 2.0),
                                   (-0.5, math.sqrt(3.0) / 2.0)).unit_area()


def cross2(a, b):
    return float(a[0] * b[1] - a[1] * b[0])


def chord_interval(poly, p0, u, t):
    """Exact chord {d : p0 + t u + d u_perp in poly} from the edge
    half-plane inequalities, which are linear in d."""
    w = np.array([-u[1], u[0]])
    base = np.asarray(p0, dtype=float) + t * np.asarray(u, dtype=float)
    v = poly.vertices
    e = np.roll(v, -1, axis=0) - v
    lo, hi = -np.inf, np.inf
    for i in range(v.shape[0]):
        c0 = (base[0] - v[i, 0]) * e[i, 1] - (base[1] - v[i, 1]) * e[i, 0]
        c1 = w[0] * e[i, 1] - w[1] * e[i, 0]
        if abs(c1) < 1e-14:
            if c0 > 1e-12:
                return None
        elif c1 > 0.0:
            hi = min(hi, -c0 / c1)
        else:
            lo = max(lo, -c0 / c1)
    return (lo, hi) if hi > lo else None


def test_polygon_normalization_and_queries():
    cw = Polygon([[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]])
    assert cw.area == pytest.approx(1.0, abs=1e-15)
    e = np.roll(cw.vertices, -1, axis=0) - cw.vertices
    cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
    assert np.min(cross) >= 0.0
    assert np.allclose(cw.centroid, [0.5, 0.5], atol=1e-14)
    assert cw.support([1.0, 0.0]) == pytest.approx(1.0)
    assert cw.support([[0.0, -1.0]]) == pytest.approx(0.0)
    assert cw.contains([0.5, 0.5]) and not cw.contains([1.5, 0.5])

    sq = Polygon(SQUARE)
    rot = sq.rotated(math.pi / 4.0)
    assert rot.area == pytest.approx(1.0, abs=1e-12)
    assert rot.support([1.0, 0.0]) == pytest.approx(math.sqrt(0.5), abs=1e-12)
    assert sq.translated([2.0, 0.0]).centroid == pytest.approx([2.0, 0.0], abs=1e-12)
    assert sq.scaled(3.0).area == pytest.approx(9.0, abs=1e-12)
    assert sq.to_json() == {"vertices": [[float(x), float(y)] for x, y in sq.vertices]}


def test_polygon_validation():
    with pytest.raises(ValueError):
        Polygon([[0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(ValueError):
        Polygon([[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        Polygon([[0.0, 0.0], [2.0, 0.0], [1.0, 1.0], [1.0, 0.2]])
    with pytest.raises(ValueError):
        Polygon([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(ValueError):
        Polygon([[0.0, 0.0], [1.0, 0.0], [math.nan, 1.0]])
    with pytest.raises(ValueError):
        Polygon(SQUARE).scaled(0.0)


def test_zonogon_area_identity():
    # Minkowski sum of three segments: area is the sum of the pairwise
    # generator cross products
    rng = np.random.default_rng(6)
    for _ in range(10):
        g = rng.uniform(-1.0, 1.0, size=(3, 2))
        want = sum(abs(cross2(g[i], g[j]))
                   for i in range(3) for j in range(i + 1, 3))
        if want < 1e-3:
            continue
        hexa = hexagon_from_generators(*g)
        assert hexa.polygon().area == pytest.approx(want, rel=1e-12)


def test_degeneracy_flags():
    assert unit_square_hexagon().degenerate
    assert not regular_hex_params().degenerate
    assert unit_square_hexagon().polygon().area == pytest.approx(1.0, abs=1e-14)


def test_two_steps_on_the_unit_square():
    # hand propagation of the two reflections gives sides
    # sqrt(9521/28480) (four slanted) and (3/4) sqrt(80/89) (two straight)
    res = two_step_regularize(unit_square_hexagon())
    assert res.area == pytest.approx(1.0, abs=1e-12)
    e = np.roll(res.vertices, -1, axis=0) - res.vertices
    sides = np.sort(np.hypot(e[:, 0], e[:, 1]))
    slanted = math.sqrt(9521.0 / 28480.0)
    straight = 0.75 * math.sqrt(80.0 / 89.0)
    assert np.max(np.abs(sides[:4] - slanted)) <= 1e-12
    assert np.max(np.abs(sides[4:] - straight)) <= 1e-12
    # visibly short of regular: the four-vs-two side split remains
    assert rigid_mismatch(res, regular_hexagon(1.0)) > 0.04


def test_two_steps_fix_the_regular_hexagon():
    res = two_step_regularize(regular_hex_params())
    assert rigid_mismatch(res, regular_hexagon(1.0)) <= 1e-12
    assert res.area == pytest.approx(1.0, abs=1e-12)


def test_regularize_square():
    res = regularize(unit_square_hexagon())
    assert res.residual <= 1e-9
    assert res.steps > 2
    assert not res.two_steps_sufficient
    assert res.two_step_residual > 0.04
    assert res.max_area_drift <= 1e-12
    assert rigid_mismatch(res.polygon, regular_hexagon(1.0)) <= 1e-9


def test_regularize_terminates_immediately_on_regular_input():
    res = regularize(regular_hex_params())
    assert res.steps == 0
    assert res.two_steps_sufficient
    assert res.residual <= 1e-12
    with pytest.raises(RuntimeError):
        regularize(unit_square_hexagon(), max_steps=1)


def test_steiner_preserves_chords():
    rng = np.random.default_rng(15)
    for trial in range(5):
        g = rng.uniform(-1.0, 1.0, size=(3, 2))
        if abs(cross2(g[0], g[1])) < 0.1:
            continue
        poly = hexagon_from_generators(*g).polygon().rotated(rng.uniform(0.0, 2.0))
        p0 = rng.uniform(-0.2, 0.2, size=2)
        ang = rng.uniform(0.0, math.pi)
        u = np.array([math.cos(ang), math.sin(ang)])
        sym = steiner_symmetrize(poly, p0, u)
        assert sym.area == pytest.approx(poly.area, rel=1e-12)
        tv = (poly.vertices - p0) @ u
        tmin, tmax = float(np.min(tv)), float(np.max(tv))
        for q in (0.15, 0.4, 0.55, 0.8):
            t = tmin + q * (tmax - tmin)
            before = chord_interval(poly, p0, u, t)
            after = chord_interval(sym, p0, u, t)
            assert before is not None and after is not None
            assert (after[1] - after[0]) == pytest.approx(
                before[1] - before[0], abs=1e-9)
            # chords end up centered on the axis
            assert abs(after[0] + after[1]) <= 1e-9


def test_steiner_rejects_zero_axis():
    with pytest.raises(ValueError):
        steiner_symmetrize(Polygon(SQUARE), [0.0, 0.0], [0.0, 0.0])


def test_rigid_mismatch_properties():
    sq = Polygon(SQUARE)
    moved = sq.rotated(0.7).translated([3.0, -1.0])
    assert rigid_mismatch(moved, sq) <= 1e-9
    assert rigid_mismatch(sq, regular_hexagon(1.0)) > 0.1
    # different vertex counts fall back to support comparison
    sq6 = unit_square_hexagon().polygon()
    assert sq6.vertices.shape[0] == 6
    assert rigid_mismatch(sq6, sq) <= 1e-9


def test_square_perimeter_closed_form():
    # separable gaussian integral over the unit square:
    # value = pi - (sqrt(pi) erf 1 - 1 + 1/e)^2
    closed = math.pi - (math.sqrt(math.pi) * math.erf(1.0)
                        - 1.0 + math.exp(-1.0)) ** 2
    value, err = per_k_polygon(Polygon(SQUARE), Kernel.gaussian(1.0, dim=2))
    assert err <= 1e-3
    assert abs(value - closed) <= err


def test_polygon_and_grid_perimeters_agree():
    lat = Lattice([[1.0, 0.5], [0.0, math.sqrt(3.0) / 2.0]])
    kernel = Kernel.gaussian(1.0, dim=2)
    value, err = per_k_polygon(lat.voronoi_cell(), kernel)
    field = voronoi_start(GridSpec(lat, n=16, hops=2)).threshold()
    grid_value = per_k_set(field, kernel)
    assert abs(grid_value - value) <= 0.02


def test_fractional_polygon_scaling_is_exact():
    kernel = Kernel.fractional(1.0, 0.5, dim=2)
    sq = Polygon(SQUARE)
    v1, e1 = per_k_polygon(sq, kernel)
    v2, e2 = per_k_polygon(sq.scaled(2.0), kernel)
    assert v1 > 0.0 and e1 > 0.0
    # the triangulation is affine-equivariant, so the quadrature
    # inherits the lambda^(2 - s) scaling identically
    assert v2 == pytest.approx(2.0 ** 1.5 * v1, rel=1e-12)
    assert e2 == pytest.approx(2.0 ** 1.5 * e1, rel=1e-12)


def test_per_k_polygon_kernel_validation():
    sq = Polygon(SQUARE)
    with pytest.raises(ValueError):
        per_k_polygon(sq, Kernel.gaussian(1.0, dim=1))
    with pytest.raises(ValueError):
        per_k_polygon(sq, Kernel.fractional(1.0, 0.5, dim=1))
    v, _ = per_k_polygon(sq, Kernel.indicator(0.8, dim=2),
                         QuadratureParams(subdiv=6))
    assert v > 0.0


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(steps=0)
    with pytest.raises(ValueError):
        SweepSpec(q=0.0)
    with pytest.raises(ValueError):
        SweepSpec(theta2_range=(0.6, 2.0), theta3_range=(1.8, 2.4))


def test_hexagon_sweep_rows(tmp_path):
    spec = SweepSpec(steps=2, quad=QuadratureParams(subdiv=4, band_refine=2,
                                                    angular_order=8))
    kernel = Kernel.gaussian(1.0, dim=2)
    rows = hexagon_sweep(kernel, spec)
    assert len(rows) == 2 * 2 + 2
    assert rows[-2].is_regular_hexagon and not rows[-2].is_square
    assert rows[-1].is_square and not rows[-1].is_regular_hexagon
    assert sum(r.is_regular_hexagon for r in rows) == 1
    assert sum(r.is_square for r in rows) == 1
    for r in rows:
        assert math.isfinite(r.per_k) and r.per_k > 0.0
        assert r.error_estimate >= 0.0
    assert hexagon_sweep(kernel, spec, threads=2) == rows

    path = tmp_path / "sweep.csv"
    write_sweep_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "theta2,theta3,q,per_k,error_estimate,is_regular_hexagon,is_square"
    assert len(lines) == len(rows) + 1
    cells = lines[-2].split(",")
    assert float(cells[3]) == rows[-2].per_k
    assert cells[5] == "1" and cells[6] == "0"
