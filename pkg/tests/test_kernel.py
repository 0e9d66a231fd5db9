import math

import numpy as np
import pytest
from scipy.integrate import quad

from tileopt.kernel import (Kernel, PeriodizedKernel, periodize,
                            periodized_tail_bound, regularize_fractional)
from tileopt.lattice import Lattice

SPHERE_AREA = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}


def shell_integral(kernel, lo, hi):
    dim = kernel.dim
    prof = lambda r: float(kernel.eval(np.array([r] + [0.0] * (dim - 1))))
    f = lambda r: SPHERE_AREA[dim] * r ** (dim - 1) * prof(r)
    if math.isinf(hi):
        # split at a finite point so the infinite-range transform never
        # straddles a kink of the profile
        mid = 8.0 * max(1.0, lo)
        return quad(f, lo, mid, limit=400)[0] + quad(f, mid, np.inf, limit=400)[0], 0.0
    val, err = quad(f, lo, hi, limit=400)
    return val, err


def test_l1_norm_against_quadrature():
    cases = [Kernel.gaussian(1.0, 1), Kernel.gaussian(2.5, 2),
             Kernel.gaussian(0.7, 3),
             Kernel.exponential(1.0, 1), Kernel.exponential(1.7, 2),
             Kernel.exponential(0.9, 3),
             Kernel.indicator(0.7, 1), Kernel.indicator(0.7, 2),
             Kernel.indicator(1.3, 3),
             regularize_fractional(Kernel.fractional(1.0, 0.5, 1), 0.2),
             regularize_fractional(Kernel.fractional(2.0, 0.3, 2), 0.1)]
    for k in cases:
        hi = k.support_radius()
        num, _ = shell_integral(k, 0.0, hi if math.isfinite(hi) else math.inf)
        assert abs(k.l1_norm() - num) < 1e-8 * max(1.0, k.l1_norm()), k.family


def test_l1_closed_forms():
    assert abs(Kernel.gaussian(1.0, 2).l1_norm() - math.pi) < 1e-15
    assert abs(Kernel.exponential(1.0, 1).l1_norm() - 2.0) < 1e-15
    assert abs(Kernel.exponential(2.0, 3).l1_norm() - 8.0 * math.pi / 8.0) < 1e-12
    assert abs(Kernel.indicator(0.5, 2).l1_norm() - math.pi * 0.25) < 1e-15
    k = regularize_fractional(Kernel.fractional(1.0, 0.5, 2), 0.1)
    # pi * delta^{-s} * (1 + 2/s) with s=1/2, delta=1/10
    assert abs(k.l1_norm() - math.pi * math.sqrt(10.0) * 5.0) < 1e-10
    assert Kernel.fractional(1.0, 0.5, 2).l1_norm() == math.inf


def test_radial_tail_against_quadrature():
    cases = [Kernel.gaussian(1.3, 1), Kernel.gaussian(1.0, 2),
             Kernel.gaussian(0.8, 3), Kernel.exponential(1.1, 2),
             Kernel.exponential(1.0, 3),
             regularize_fractional(Kernel.fractional(1.0, 0.4, 2), 0.3)]
    for k in cases:
        for r in (0.05, 0.5, 1.5):
            num, _ = shell_integral(k, r, math.inf)
            assert abs(k.radial_tail(r) - num) < 1e-7 * max(1.0, num), (k.family, r)
    ind = Kernel.indicator(0.7, 2)
    assert ind.radial_tail(0.8) == 0.0
    num, _ = shell_integral(ind, 0.3, 0.7)
    assert abs(ind.radial_tail(0.3) - num) < 1e-10


def test_eval_shapes_and_symmetry():
    k = Kernel.gaussian(1.0, 2)
    grid = np.stack(np.meshgrid(np.linspace(-1, 1, 4), np.linspace(-1, 1, 5),
                                indexing="ij"), axis=-1)
    out = k.eval(grid)
    assert out.shape == (4, 5)
    assert np.allclose(out, k.eval(-grid), atol=0.0)
    k1 = Kernel.exponential(2.0, 1)
    assert abs(float(k1.eval(0.5)) - math.exp(-1.0)) < 1e-15
    assert np.allclose(k1.eval(np.array([-0.5, 0.5])), math.exp(-1.0))


def test_fractional_eval():
    k = Kernel.fractional(1.0, 0.5, 2)
    x = np.array([0.3, 0.4])
    assert abs(float(k.eval(x)) - 0.5 ** -2.5) < 1e-12
    with pytest.raises(ValueError, match="singular at origin"):
        k.eval(np.zeros(2))
    reg = regularize_fractional(k, 0.1)
    assert reg.is_regularized and reg.delta == 0.1
    assert abs(float(reg.eval(np.zeros(2))) - 0.1 ** -2.5) < 1e-9
    assert abs(float(reg.eval(np.array([0.05, 0.0]))) - 0.1 ** -2.5) < 1e-9
    assert abs(float(reg.eval(x)) - float(k.eval(x))) < 1e-12


def test_table_kernel():
    k = Kernel.table([1.0, 0.6, 0.2], 0.5, 2)
    r = np.array([[0.0, 0.0], [0.25, 0.0], [0.0, 0.5], [0.75, 0.0], [1.25, 0.0]])
    assert np.allclose(k.eval(r), [1.0, 0.8, 0.6, 0.4, 0.0], atol=1e-15)
    assert k.support_radius() == 1.0
    num, _ = shell_integral(k, 0.0, 1.0)
    assert abs(k.l1_norm() - num) < 1e-12
    num_tail, _ = shell_integral(k, 0.3, 1.0)
    assert abs(k.radial_tail(0.3) - num_tail) < 1e-12
    with pytest.raises(ValueError):
        Kernel.table([0.5, 0.7, 0.2], 0.5, 2)
    with pytest.raises(ValueError):
        Kernel.table([1.0, -0.1], 0.5, 2)


def test_check_assumptions_states():
    assert Kernel.gaussian(1.0, 2).check_assumptions().strict_clause == "holds"
    assert Kernel.exponential(1.0, 1).check_assumptions().strict_clause == "holds"
    rep = Kernel.indicator(0.7, 2).check_assumptions()
    assert rep.strict_clause == "fails" and rep.satisfies_int
    frac = Kernel.fractional(1.0, 0.5, 2).check_assumptions()
    assert frac.satisfies_frac and not frac.satisfies_int
    assert frac.strict_clause == "holds"
    regf = regularize_fractional(Kernel.fractional(1.0, 0.5, 2), 0.1)
    assert regf.check_assumptions().strict_clause == "fails"
    assert Kernel.table([1.0, 0.6, 0.2], 0.5, 2).check_assumptions().strict_clause == "holds"
    assert Kernel.table([1.0, 1.0, 0.2], 0.5, 2).check_assumptions().strict_clause == "fails"
    assert Kernel.table([1.0, 0.6, 0.6, 0.2], 0.5, 2).check_assumptions().strict_clause == "unverified"


def test_config_round_trip():
    cases = [Kernel.gaussian(1.5, 3), Kernel.exponential(0.8, 1),
             Kernel.indicator(0.4, 2), Kernel.fractional(2.0, 0.7, 2),
             regularize_fractional(Kernel.fractional(1.0, 0.5, 2), 0.05),
             Kernel.table([1.0, 0.3], 0.25, 2)]
    rng = np.random.default_rng(0)
    for k in cases:
        back = Kernel.from_config(k.to_config())
        assert back.family == k.family and back.dim == k.dim
        x = rng.uniform(0.05, 1.5, size=(8, k.dim))
        assert np.allclose(back.eval(x), k.eval(x), atol=0.0)


def test_periodize_compact_support_short_circuit():
    # indicator radius 0.4 on Z^2: support fits inside half the minimum
    # distance, one translate reaches any reduced point, zero tail
    pk = periodize(Kernel.indicator(0.4, 2), Lattice(np.eye(2)))
    assert pk.tail_bound == 0.0
    assert pk.cutoff_radius <= 0.4 + 1e-9
    x = np.array([[0.1, 0.2], [0.9, 0.0], [0.5, 0.5]])
    # direct oracle over a generous shift range
    shifts = Lattice(np.eye(2)).points_in_ball(3.0)
    k = Kernel.indicator(0.4, 2)
    direct = np.array([float(np.sum(k.eval(xi[None, :] + shifts))) for xi in x])
    assert np.allclose(pk.eval(x), direct, atol=0.0)


def test_periodize_exponential_line():
    lat = Lattice([[1.0]])
    k = Kernel.exponential(1.0, 1)
    pk = periodize(k, lat, tail_tolerance=1e-6)
    assert 14.0 <= pk.cutoff_radius <= 22.0
    # omitted mass oracle: quadruple cutoff changes nothing above the tolerance
    wide = PeriodizedKernel(k, lat, 4.0 * pk.cutoff_radius, 0.0)
    xs = np.linspace(-0.5, 0.5, 41)
    assert np.max(np.abs(pk.eval(xs) - wide.eval(xs))) <= 1e-6
    assert pk.tail_bound <= 1e-6


def test_periodized_eval_is_lattice_periodic():
    for lat in (Lattice(np.eye(2)),
                Lattice([[1.0, 0.5], [0.0, math.sqrt(3.0) / 2.0]])):
        pk = periodize(Kernel.gaussian(1.0, 2), lat, 1e-8)
        rng = np.random.default_rng(5)
        x = rng.uniform(-1.0, 1.0, size=(20, 2))
        g = (rng.integers(-2, 3, size=(20, 2)) @ lat.basis.T)
        assert np.max(np.abs(pk.eval(x + g) - pk.eval(x))) < 1e-12


def test_periodized_tail_bound_dominates_truncation():
    lat = Lattice(np.eye(2))
    k = Kernel.gaussian(1.0, 2)
    for cutoff in (2.0, 3.0):
        bound = periodized_tail_bound(k, lat, cutoff)
        pk = PeriodizedKernel(k, lat, cutoff, bound)
        wide = PeriodizedKernel(k, lat, 2.0 * cutoff + 2.0, 0.0)
        xs = np.random.default_rng(6).uniform(-0.5, 0.5, size=(30, 2))
        gap = np.max(np.abs(pk.eval(xs) - wide.eval(xs)))
        assert gap <= bound + 1e-15


def test_periodize_errors():
    with pytest.raises(ValueError, match="integrable"):
        periodize(Kernel.fractional(1.0, 0.5, 2), Lattice(np.eye(2)))
    with pytest.raises(ValueError):
        periodize(Kernel.gaussian(1.0, 3), Lattice(np.eye(3)))
