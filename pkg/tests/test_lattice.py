import json
import math

import numpy as np
import pytest

from tileopt.lattice import (PRODUCT_BOUND, Lattice, ModuliPoint2D,
                             hexagonal_point, kuratowski_distance, moduli_grid,
                             square_point)

SQRT3 = math.sqrt(3.0)


def random_basis(rng, dim, scale=1.0):
    while True:
        b = rng.uniform(-scale, scale, size=(dim, dim))
        if abs(np.linalg.det(b)) > 1e-3 * scale ** dim:
            return b


def brute_min_distance(lat, radius=3.0):
    pts = lat.points_in_ball(radius)
    nz = pts[np.any(pts != 0.0, axis=1)]
    return float(np.min(np.linalg.norm(nz, axis=1)))


def test_covolume_examples():
    assert Lattice([[1.0, 0.0], [0.0, 1.0]]).covolume == 1.0
    hexa = Lattice([[1.0, 0.5], [0.0, SQRT3 / 2.0]])
    assert abs(hexa.covolume - SQRT3 / 2.0) < 1e-15
    assert abs(Lattice([[2.0, 1.0], [0.0, 3.0]]).covolume - 6.0) < 1e-15


def test_degenerate_basis_rejected():
    with pytest.raises(ValueError, match="degenerate lattice"):
        Lattice([[1.0, 2.0], [2.0, 4.0]])


def test_reduce_z2_in_disguise():
    lat = Lattice([[1.0, 1.0], [0.0, 1.0]])
    lengths = sorted(np.linalg.norm(lat.reduce().basis, axis=0))
    assert np.allclose(lengths, [1.0, 1.0], atol=1e-12)


def test_reduce_skew_basis_shortest_vector():
    # generators (1,0) and (0.5,0.1): the combination 2v2 - v1 = (0, 0.2)
    # is the shortest nonzero vector, length 0.2 by ball enumeration
    lat = Lattice([[1.0, 0.5], [0.0, 0.1]])
    assert abs(brute_min_distance(lat) - 0.2) < 1e-12
    assert abs(lat.min_distance() - 0.2) < 1e-12
    red = lat.reduce()
    assert abs(np.linalg.norm(red.basis[:, 0]) - 0.2) < 1e-12
    assert abs(red.covolume - lat.covolume) < 1e-15


def test_reduce_fixed_point_hexagonal():
    hexa = Lattice([[1.0, 0.5], [0.0, SQRT3 / 2.0]])
    red = hexa.reduce()
    assert np.allclose(np.abs(red.basis), np.abs(hexa.basis), atol=1e-12)


def test_min_distance_examples():
    assert abs(Lattice(np.eye(2)).min_distance() - 1.0) < 1e-15
    hexa = Lattice([[1.0, 0.5], [0.0, SQRT3 / 2.0]])
    assert abs(hexa.min_distance() - 1.0) < 1e-12


def test_min_distance_matches_enumeration_oracle():
    rng = np.random.default_rng(0)
    for dim in (1, 2, 3):
        for _ in range(20):
            lat = Lattice(random_basis(rng, dim))
            r = 3.0 * max(1e-3, lat.min_distance())
            assert abs(lat.min_distance() - brute_min_distance(lat, r)) < 1e-12


def test_reduce_preserves_group_and_product_bound():
    rng = np.random.default_rng(1)
    for dim in (2, 3):
        for _ in range(25):
            lat = Lattice(random_basis(rng, dim))
            red = lat.reduce()
            assert abs(red.covolume - lat.covolume) < 1e-9 * lat.covolume
            assert abs(red.min_distance() - lat.min_distance()) < 1e-12
            # unimodular change of basis
            coeffs = np.linalg.solve(lat.basis, red.basis)
            assert np.allclose(coeffs, np.round(coeffs), atol=1e-6)
            assert abs(abs(np.linalg.det(coeffs)) - 1.0) < 1e-6
            prod = float(np.prod(np.linalg.norm(red.basis, axis=0)))
            assert prod <= PRODUCT_BOUND[dim] * red.covolume * (1.0 + 1e-9)


def test_closest_point_and_reduce_points():
    rng = np.random.default_rng(2)
    for _ in range(10):
        lat = Lattice(random_basis(rng, 2))
        xs = rng.uniform(-2.0, 2.0, size=(40, 2))
        cand = lat.points_in_ball(6.0)
        for x in xs:
            d = np.linalg.norm(cand - x, axis=1)
            best = cand[np.argmin(d)]
            got = lat.closest_point(x)
            assert abs(np.linalg.norm(x - got) - d.min()) < 1e-9
        red = lat.reduce_points(xs)
        for x, r in zip(xs, red):
            d = np.linalg.norm(cand - x, axis=1)
            assert abs(np.linalg.norm(r) - d.min()) < 1e-9


def test_voronoi_cell_z2_and_z1():
    cell = Lattice(np.eye(2)).voronoi_cell()
    v = np.asarray(cell.vertices)
    assert v.shape == (4, 2)
    assert np.allclose(np.sort(np.abs(v).ravel()), 0.5)
    lo, hi = Lattice([[1.0]]).voronoi_cell()
    assert (lo, hi) == (-0.5, 0.5)


def test_voronoi_cell_hexagonal():
    hexa = Lattice([[1.0, 0.5], [0.0, SQRT3 / 2.0]])
    cell = hexa.voronoi_cell()
    v = np.asarray(cell.vertices)
    assert v.shape[0] == 6
    assert abs(cell.area - hexa.covolume) < 1e-9
    # regular hexagon with inradius 1/2: edge midpoint distance 0.5
    mids = 0.5 * (v + np.roll(v, -1, axis=0))
    assert np.allclose(np.linalg.norm(mids, axis=1), 0.5, atol=1e-9)


def test_voronoi_area_random():
    rng = np.random.default_rng(3)
    for _ in range(15):
        lat = Lattice(random_basis(rng, 2))
        assert abs(lat.voronoi_cell().area - lat.covolume) < 1e-9


def test_covering_radius_bound():
    rng = np.random.default_rng(4)
    for _ in range(10):
        lat = Lattice(random_basis(rng, 2))
        v = np.asarray(lat.voronoi_cell().vertices)
        circum = float(np.max(np.linalg.norm(v, axis=1)))
        assert lat.covering_radius_bound() >= circum - 1e-9


def test_kuratowski_distance():
    z2 = Lattice(np.eye(2))
    assert kuratowski_distance(z2, z2, 2.0) == 0.0
    same = Lattice([[1.0, 1.0], [0.0, 1.0]])
    assert kuratowski_distance(z2, same, 3.0) < 1e-12
    stretched = Lattice(1.1 * np.eye(2))
    d = kuratowski_distance(z2, stretched, 1.5)
    assert abs(d - 0.1 * math.sqrt(2.0)) < 1e-12
    assert abs(d - kuratowski_distance(stretched, z2, 1.5)) < 1e-15


def test_lattice_json_round_trip():
    lat = Lattice([[1.0, 0.5], [0.0, SQRT3 / 2.0]])
    text = lat.to_json()
    doc = json.loads(text)
    assert doc["dim"] == 2
    back = Lattice.from_json(text)
    assert np.allclose(back.basis, lat.basis, atol=0.0)
    assert abs(back.covolume - lat.covolume) < 1e-15


def test_moduli_points():
    sq = square_point(1.0)
    assert (sq.a, sq.b) == (1.0, 0.0)
    hx = hexagonal_point(1.0)
    assert abs(hx.a - math.sqrt(2.0 / SQRT3)) < 1e-15
    assert abs(hx.b - 0.5 * hx.a) < 1e-15
    assert abs(hx.lattice().covolume - 1.0) < 1e-12
    with pytest.raises(ValueError):
        ModuliPoint2D(a=1.0, b=0.9, m=1.0)


def test_moduli_grid_mandatory_and_valid():
    for steps in (1, 4):
        pts = moduli_grid(1.0, steps)
        assert (pts[0].a, pts[0].b) == (1.0, 0.0)
        assert abs(pts[1].b - 0.5 * pts[1].a) < 1e-15
        for p in pts:
            assert abs(p.lattice().covolume - 1.0) < 1e-9
        coords = {(round(p.a, 12), round(p.b, 12)) for p in pts}
        assert len(coords) == len(pts)
