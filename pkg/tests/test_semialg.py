import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from builders import abs_spec, lsc_step_value, pw3_spec, step_closure, step_spec
from polybilevel.poly import Polynomial
from polybilevel.semialg import (BasicSet, ClosedSASet, GrowthBounds, PiecewisePolySpec,
                                 SAFunctionSpec, SASet, SpecError, closure_fiber_extrema,
                                 disjointify, grid_points, member, normalize_index_sets,
                                 piecewise_eval, pooled_family, target_eval, validate_domains,
                                 validate_partition)
from polybilevel import univariate as uv

(X,) = Polynomial.variables(1)
ONE = Polynomial.constant(1, 1)
ZERO = Polynomial.zero(1)
A, B = Polynomial.variables(2)


def line_points(count=401, lo=-3, hi=3):
    return [(v,) for v in grid_points(lo, hi, count)]


def plane_points(count, seed=0, denom=16, span=3):
    rng = np.random.default_rng(seed)
    raw = rng.integers(-span * denom, span * denom + 1, size=(count, 2))
    return [(Fraction(int(a), denom), Fraction(int(b), denom)) for a, b in raw]


def brute_member(b: BasicSet, pt) -> bool:
    """Float-free re-implementation used as an independent oracle."""
    vals = [sum(c * math.prod(Fraction(v) ** k for v, k in zip(pt, e)) for e, c in p.terms.items())
            for p in b.polynomials()]
    return vals[0] == 0 and all(v > 0 for v in vals[1:])


class TestMember:
    def test_point_set(self):
        assert member(BasicSet(1, X, (ONE,)), (0,))

    def test_strictness(self):
        assert not member(BasicSet(1, X, (X,)), (0,))

    def test_closed_union(self):
        assert member(ClosedSASet(1, [(X,), (-X - 1,)]), (-1,))
        assert not member(ClosedSASet(1, [(X,), (-X - 1,)]), (Fraction(-1, 2),))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            member(BasicSet(1, X), (0, 1))

    @given(st.lists(st.fractions(-3, 3, max_denominator=8), min_size=2, max_size=2))
    def test_union_is_monotone(self, pt):
        disk = BasicSet(2, Polynomial.zero(2), (1 - A * A - B * B,))
        half = BasicSet(2, Polynomial.zero(2), (A - B,))
        small = SASet.of(disk)
        assert member(small, pt) <= member(small.union(SASet.of(half)), pt)
        assert member(SASet.of(disk, half), pt) == (brute_member(disk, pt) or brute_member(half, pt))


class TestNormalize:
    def test_widths_padded(self):
        s = SASet.of(BasicSet(1, ZERO, (X,)), BasicSet(1, X - 2, (X, X + 1, X * X)))
        out = normalize_index_sets(s)
        assert [len(b.strict) for b in out.pieces] == [3, 3]
        for (v,) in line_points(101):
            assert member(out, (v,)) == member(s, (v,))

    def test_idempotent(self):
        s = normalize_index_sets(SASet.of(BasicSet(1, ZERO, (X,)), BasicSet(1, X, (ONE,))))
        assert normalize_index_sets(s) == s

    def test_empty_inequality_list(self):
        out = normalize_index_sets(SASet.of(BasicSet(1, X)))
        assert out.pieces[0].strict == (ONE,)

    def test_function_spec_gets_uniform_shape(self):
        spec = normalize_index_sets(step_spec())
        sets = [spec.graph, spec.dom, spec.dom_plus, spec.dom_minus]
        assert len({len(s.pieces) for s in sets}) == 1
        assert len({len(b.strict) for s in sets for b in s.pieces}) == 1
        for (v,) in line_points(41):
            assert target_eval(spec, (v,)) == lsc_step_value(v)

    def test_closed_set(self):
        c = normalize_index_sets(ClosedSASet(1, [(X,), (-X, X + 1, 2 - X)]))
        assert {len(cl) for cl in c.clauses} == {3}
        for (v,) in line_points(61):
            assert member(c, (v,)) == (v >= 0 or -1 <= v <= 0)


class TestDisjointify:
    def test_half_line_and_roots(self):
        s = SASet.of(BasicSet(1, ZERO, (X,)), BasicSet(1, X * X - 1))
        cells = disjointify(s)

        def hits(v):
            return sum(member(c, (v,)) for c in cells)

        assert hits(2) == 1 and hits(-1) == 1 and hits(-2) == 0
        (c2,) = [c for c in cells if member(c, (2,))]
        assert member(c2, (Fraction(3, 2),))  # x > 0 and x^2 - 1 > 0
        (cm1,) = [c for c in cells if member(c, (-1,))]
        assert not member(cm1, (1,))  # x < 0 and x^2 - 1 = 0

    def test_single_basic_set_on_grid(self):
        s = SASet.of(BasicSet(2, Polynomial.zero(2), (1 - A * A - B * B, A * B)))
        cells = disjointify(s)
        g = grid_points(-2, 2, 100)
        for a in g:
            for b in g:
                assert sum(member(c, (a, b)) for c in cells) == int(member(s, (a, b)))

    def test_duplicates_collapse(self):
        once = disjointify(SASet.of(BasicSet(1, ZERO, (X,))))
        twice = disjointify(SASet.of(BasicSet(1, ZERO, (X,)), BasicSet(1, ZERO, (2 * X,))))
        assert once == twice

    def test_family_is_pooled_up_to_scaling(self):
        s = SASet.of(BasicSet(1, ZERO, (X,)), BasicSet(1, ZERO, (-3 * X, X * X - 1)))
        assert len(pooled_family(s)) == 2

    def test_cap(self):
        pieces = [BasicSet(1, ZERO, (X - k,)) for k in range(5)]
        with pytest.raises(SpecError):
            disjointify(SASet.of(*pieces), cap=4)

    def test_empty_union(self):
        assert disjointify(SASet(1)) == []


class TestTargetEval:
    def test_square(self):
        (x, t) = Polynomial.variables(2)
        spec = SAFunctionSpec.total(SASet.of(BasicSet(2, t - x * x)))
        assert target_eval(spec, (3,)) == 9

    def test_dom_plus(self):
        (x, t) = Polynomial.variables(2)
        u = Polynomial.variable(0, 1)
        spec = SAFunctionSpec(1, SASet.of(BasicSet(2, t, (-x,))), SASet.of(BasicSet(1, ZERO, (-u,))),
                              SASet.of(BasicSet(1, ZERO, (u,))), SASet(1))
        assert target_eval(spec, (1,)) == math.inf
        assert target_eval(spec, (-1,)) == 0

    def test_step(self):
        spec = step_spec()
        assert target_eval(spec, (-1,)) == 1
        assert target_eval(spec, (0,)) == 0

    def test_irrational_root_against_numpy(self):
        (x, t) = Polynomial.variables(2)
        # t = positive root of t^3 + t - x, a strictly increasing function of x
        spec = SAFunctionSpec.total(SASet.of(BasicSet(2, t ** 3 + t - x)))
        for xv in (Fraction(1), Fraction(5, 2), Fraction(-7, 3)):
            ref = [r.real for r in np.roots([1, 0, 1, -float(xv)]) if abs(r.imag) < 1e-12]
            assert len(ref) == 1
            assert target_eval(spec, (xv,), tol=1e-14) == pytest.approx(ref[0], abs=1e-12)

    def test_window_too_small(self):
        spec = step_spec()
        with pytest.raises(SpecError):
            target_eval(spec, (-1,), t_window=(Fraction(-1, 2), Fraction(1, 2)))

    def test_domain_overlap_is_an_error(self):
        (x, t) = Polynomial.variables(2)
        spec = SAFunctionSpec(1, SASet.of(BasicSet(2, t)), SASet.everything(1),
                              SASet.everything(1), SASet(1))
        with pytest.raises(SpecError):
            target_eval(spec, (0,))
        assert len(validate_domains(spec, [(0,), (1,)])) == 2

    def test_not_a_function(self):
        (x, t) = Polynomial.variables(2)
        spec = SAFunctionSpec.total(SASet.of(BasicSet(2, t * t - 1)))
        with pytest.raises(SpecError):
            target_eval(spec, (0,))

    @given(st.lists(st.integers(-4, 4), min_size=1, max_size=4), st.fractions(-5, 5, max_denominator=9))
    def test_polynomial_graph_is_exact(self, coeffs, xv):
        (x, t) = Polynomial.variables(2)
        f = sum((c * x ** i for i, c in enumerate(coeffs)), Polynomial.zero(2))
        spec = SAFunctionSpec.total(SASet.of(BasicSet(2, t - f)))
        assert target_eval(spec, (xv,)) == f.evaluate((xv, 0))


class TestPiecewise:
    def test_abs(self):
        spec = abs_spec()
        assert piecewise_eval(spec, (-2,)) == 2
        assert piecewise_eval(spec, (0,)) == 0
        assert piecewise_eval(spec, (Fraction(7, 3),)) == Fraction(7, 3)

    def test_constant(self):
        spec = PiecewisePolySpec(1, [SASet.everything(1)], [Polynomial.constant(7, 1)])
        assert all(piecewise_eval(spec, p) == 7 for p in line_points(11))

    def test_lsc_piecewise_at_boundaries(self):
        spec = pw3_spec()
        assert piecewise_eval(spec, (-1,)) == Fraction(-1, 2)
        assert piecewise_eval(spec, (1,)) == Fraction(-1, 2)
        assert piecewise_eval(spec, (-2,)) == 5

    def test_overlap_flagged(self):
        spec = PiecewisePolySpec(1, [SASet.of(BasicSet(1, ZERO, (X + 1,))), SASet.of(BasicSet(1, ZERO, (1 - X,)))],
                                 [X, X])
        report = validate_partition(spec, [(0,), (5,), (-5,)])
        assert [p for p, _ in report.overlapping] == [(0,)]
        assert not report.ok
        with pytest.raises(SpecError):
            piecewise_eval(spec, (0,))

    def test_valid_partition(self):
        report = validate_partition(abs_spec(), line_points(1000))
        assert report.ok and report.checked == 1000

    def test_gap_flagged(self):
        spec = PiecewisePolySpec(1, [SASet.of(BasicSet(1, ZERO, (X,))), SASet.of(BasicSet(1, ZERO, (-X,)))], [X, X])
        report = validate_partition(spec, line_points(5, -2, 2))
        assert report.uncovered == [(0,)]


class TestClosureFibres:
    def test_step_closure(self):
        c = step_closure()
        assert closure_fiber_extrema(c, (-1,)) == (1, 1)
        assert closure_fiber_extrema(c, (0,)) == (0, 1)
        assert closure_fiber_extrema(c, (1,)) == (0, 0)

    def test_growth_bounds(self):
        b = GrowthBounds(3, 2)
        assert b.factor((1,)) == 4
        with pytest.raises(ValueError):
            GrowthBounds(1, 3)
        with pytest.raises(ValueError):
            GrowthBounds(0, 2)


class TestUnivariate:
    @given(st.lists(st.integers(-6, 6), min_size=1, max_size=4))
    def test_roots_of_product_of_linear_factors(self, roots):
        p = [Fraction(1)]
        for r in roots:
            p = uv.multiply(p, [Fraction(-r), Fraction(1)])
        found = uv.real_roots(p)
        assert sorted(Fraction(r.value()) for r in found) == sorted(set(Fraction(r) for r in roots))

    def test_irrational_root_refines(self):
        (root,) = [r for r in uv.real_roots([Fraction(-2), Fraction(0), Fraction(1)]) if r.sort_key() > 0]
        fine = root.refine(Fraction(1, 10**15))
        assert float(fine.sort_key()) == pytest.approx(math.sqrt(2), abs=1e-14)
