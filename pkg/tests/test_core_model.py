import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from banachlab.core_model import (
    Enclosure,
    Interval,
    Measure,
    PLFunction,
    abs_integral,
    function_from_dict,
    function_to_dict,
    integrate,
    lin_comb,
    measure_combine,
    measure_from_dict,
    measure_to_dict,
    sup_abs_on,
)
from banachlab.errors import DomainError

from conftest import random_pl


class TestEval:
    def test_linear_interpolation(self):
        f = PLFunction(np.array([0.0, 1.0]), np.array([0.0, 1.0]))
        assert f.eval(0.5) == 0.5

    def test_constant(self):
        assert PLFunction.constant(1.0).eval(0.3) == 1.0

    def test_midpoint_of_piece(self):
        f = PLFunction(np.array([0.0, 0.5, 1.0]), np.array([0.0, 1.0, 0.0]))
        assert f.eval(0.25) == 0.5

    def test_exact_at_breakpoints(self):
        rng = np.random.default_rng(0)
        f = random_pl(rng)
        assert np.array_equal(f.eval(f.breakpoints), f.values)

    def test_outside_domain(self):
        with pytest.raises(DomainError):
            PLFunction.constant(1.0).eval(1.5)

    def test_invalid_breakpoints(self):
        with pytest.raises(DomainError):
            PLFunction(np.array([0.0, 0.5]), np.array([1.0, 1.0]))
        with pytest.raises(DomainError):
            PLFunction(np.array([0.0, 0.5, 0.5, 1.0]), np.zeros(4))


class TestSupAbsOn:
    def test_peak_inside(self):
        tent = PLFunction.tent()
        assert sup_abs_on(tent, Interval(0.4, 0.6)) == 1.0

    def test_monotone_piece_open_endpoint(self):
        tent = PLFunction.tent()
        # sup over the open interval equals the closure value at 0.25
        assert sup_abs_on(tent, Interval(0.0, 0.25)) == 0.5

    def test_absolute_value(self):
        f = PLFunction.constant(-2.0)
        assert sup_abs_on(f, Interval(0.1, 0.9)) == 2.0

    def test_grid_oracle(self):
        rng = np.random.default_rng(1)
        grid = np.linspace(0.0, 1.0, 4001)
        for _ in range(25):
            f = random_pl(rng)
            a, b = sorted(rng.uniform(0.0, 1.0, 2))
            if b - a < 1e-6:
                continue
            iv = Interval(a, b)
            exact = sup_abs_on(f, iv)
            pts = grid[(grid >= a) & (grid <= b)]
            pts = np.concatenate([[a], pts, [b]])
            brute = float(np.max(np.abs(f.eval(pts))))
            assert brute <= exact + 1e-12
            assert exact <= brute + f.lipschitz_bound() * (grid[1] - grid[0])


class TestIntegrate:
    def test_normalization(self):
        assert integrate(PLFunction.constant(1.0), Measure.lebesgue()) == 1.0

    def test_atom_evaluation(self):
        assert integrate(PLFunction.constant(1.0), Measure.dirac(0.5)) == 1.0

    def test_tent_area_with_riemann_oracle(self):
        tent = PLFunction.tent()
        exact = integrate(tent, Measure.lebesgue())
        assert exact == pytest.approx(0.5, abs=1e-15)
        ts = np.linspace(0.0, 1.0, 20001)
        riemann = float(np.trapezoid(tent.eval(ts), ts))
        assert exact == pytest.approx(riemann, abs=1e-6)

    def test_bilinear(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            f, g = random_pl(rng), random_pl(rng)
            m1 = Measure(atoms=((0.3, 0.7),), density=random_pl(rng))
            m2 = Measure(density=random_pl(rng))
            a, b = rng.uniform(-2, 2, 2)
            left = integrate(lin_comb(a, f, b, g), m1)
            right = a * integrate(f, m1) + b * integrate(g, m1)
            assert left == pytest.approx(right, abs=1e-12)
            both = integrate(f, measure_combine(a, m1, b, m2))
            expect = a * integrate(f, m1) + b * integrate(f, m2)
            assert both == pytest.approx(expect, abs=1e-12)

    def test_partial_range_open_atoms(self):
        m = Measure(atoms=((0.5, 1.0),))
        assert integrate(PLFunction.constant(1.0), m, 0.5, 0.7) == 0.0
        assert integrate(PLFunction.constant(1.0), m, 0.4, 0.7) == 1.0


class TestLinComb:
    def test_cancellation(self):
        f = PLFunction.tent()
        z = lin_comb(1.0, f, -1.0, f)
        assert z.is_zero()

    def test_constant_sum(self):
        two = lin_comb(1.0, PLFunction.constant(1.0), 1.0, PLFunction.constant(1.0))
        assert two.eval(0.77) == 2.0

    def test_two_tents_pointwise(self):
        f = PLFunction.tent(0.25)
        g = PLFunction.tent(0.75)
        h = lin_comb(0.5, f, 0.5, g)
        assert h.breakpoints.size >= 4
        ts = np.linspace(0.0, 1.0, 1001)
        assert np.allclose(h.eval(ts), 0.5 * (f.eval(ts) + g.eval(ts)), atol=1e-15)

    def test_random_exactness(self):
        rng = np.random.default_rng(3)
        f, g = random_pl(rng), random_pl(rng)
        a, b = 0.7, -1.3
        h = lin_comb(a, f, b, g)
        ts = rng.uniform(0.0, 1.0, 1000)
        assert np.max(np.abs(h.eval(ts) - (a * f.eval(ts) + b * g.eval(ts)))) < 1e-12


class TestLipschitz:
    def test_constant(self):
        assert PLFunction.constant(3.0).lipschitz_bound() == 0.0

    def test_tent(self):
        assert PLFunction.tent().lipschitz_bound() == 2.0

    def test_steepest_piece(self):
        f = PLFunction(np.array([0.0, 0.1, 1.0]), np.array([0.0, 1.0, 1.0]))
        assert f.lipschitz_bound() == pytest.approx(10.0)

    def test_oscillation_bound(self):
        rng = np.random.default_rng(4)
        f = random_pl(rng)
        lip = f.lipschitz_bound()
        ts = rng.uniform(0.0, 0.9, 200)
        d = 0.05
        assert np.all(np.abs(f.eval(ts + d) - f.eval(ts)) <= lip * d + 1e-12)


class TestMeasure:
    def test_total_variation(self):
        m = Measure(atoms=((0.2, -2.0), (0.8, 1.0)), density=PLFunction.constant(-1.0))
        assert m.total_variation() == pytest.approx(4.0)

    def test_abs_integral_splits_sign(self):
        f = PLFunction(np.array([0.0, 0.5, 1.0]), np.array([-1.0, 1.0, -1.0]))
        assert abs_integral(f) == pytest.approx(0.5)

    def test_duplicate_atoms_rejected(self):
        with pytest.raises(DomainError):
            Measure(atoms=((0.5, 1.0), (0.5, 2.0)))

    def test_abs_mass_open_interval(self):
        m = Measure(atoms=((0.5, -3.0),), density=PLFunction.constant(2.0))
        assert m.abs_mass_on(0.5, 0.75) == pytest.approx(0.5)
        assert m.abs_mass_on(0.4, 0.75) == pytest.approx(3.0 + 0.7)


class TestJsonRoundTrip:
    def test_function_bit_exact(self):
        rng = np.random.default_rng(5)
        f = random_pl(rng)
        d = json.loads(json.dumps(function_to_dict(f)))
        g = function_from_dict(d)
        assert np.array_equal(f.breakpoints, g.breakpoints)
        assert np.array_equal(f.values, g.values)

    def test_measure_bit_exact(self):
        rng = np.random.default_rng(6)
        m = Measure(atoms=((rng.uniform(), rng.standard_normal()),), density=random_pl(rng))
        d = json.loads(json.dumps(measure_to_dict(m)))
        m2 = measure_from_dict(d)
        assert m.atoms == m2.atoms
        assert np.array_equal(m.density.values, m2.density.values)


class TestEnclosure:
    def test_ordering_enforced(self):
        with pytest.raises(DomainError):
            Enclosure(1.0, 0.5)

    def test_contains(self):
        e = Enclosure(0.9, 1.1)
        assert e.contains(1.0) and not e.contains(1.2)
        assert e.width == pytest.approx(0.2)


@settings(max_examples=40, deadline=None)
@given(
    a=st.floats(-3, 3, allow_nan=False),
    b=st.floats(-3, 3, allow_nan=False),
    t=st.floats(0, 1, allow_nan=False),
    seed=st.integers(0, 2**16),
)
def test_lin_comb_pointwise_property(a, b, t, seed):
    rng = np.random.default_rng(seed)
    f, g = random_pl(rng, 6), random_pl(rng, 6)
    h = lin_comb(a, f, b, g)
    assert h.eval(t) == pytest.approx(a * f.eval(t) + b * g.eval(t), abs=1e-10)
