import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import (STEP_BOUNDS, abs_spec, identity_spec, indicator_sets, lsc_step_value, pw3_spec,
                      step_closure, usc_step_value)
from polybilevel.encoder import (OPTIMISTIC, PESSIMISTIC, BilevelProgram, BoundsError,
                                 encode_indicator_convex, encode_lsc_bounded,
                                 encode_piecewise_unbounded, encode_pw_lsc_bounded,
                                 encode_sa_unbounded, lsc_block, moment_lift, normalize_range,
                                 pessimize)
from polybilevel.poly import MonomialBasis, Polynomial
from polybilevel.semialg import (BasicSet, ClosedSASet, GrowthBounds, PiecewisePolySpec, SASet,
                                 SpecError, grid_points, normalize_index_sets, piecewise_eval,
                                 target_eval)
from polybilevel.valuefn import eval_constructed, indicator_witness

(X,) = Polynomial.variables(1)
ZERO1 = Polynomial.zero(1)


def rational_points(rng, count, dim, span=2, denom=32):
    raw = rng.integers(-span * denom, span * denom + 1, size=(count, dim))
    return [[Fraction(int(v), denom) for v in row] for row in raw]


def box_point(rng, prog, span=3, denom=16):
    """A random rational lower point in the box (free coordinates drawn from [-span, span])."""
    out = []
    for lo, hi in prog.box:
        a = lo if math.isfinite(lo) else Fraction(-span)
        b = hi if math.isfinite(hi) else Fraction(span)
        out.append(a + (b - a) * Fraction(int(rng.integers(0, denom + 1)), denom))
    return out


def step_pw_spec(usc=False) -> PiecewisePolySpec:
    """Step function as a piecewise polynomial; ``usc`` puts the jump point in the left cell."""
    one = Polynomial.constant(1, 1)
    if usc:
        cells = [SASet.of(BasicSet(1, ZERO1, (-X,)), BasicSet(1, X)), SASet.of(BasicSet(1, ZERO1, (X,)))]
    else:
        cells = [SASet.of(BasicSet(1, ZERO1, (-X,))), SASet.of(BasicSet(1, ZERO1, (X,)), BasicSet(1, X))]
    closures = [ClosedSASet(1, [(-X,)]), ClosedSASet(1, [(X,)])]
    return PiecewisePolySpec(1, cells, [one, ZERO1], closures)


class TestUnboundedConstruction:
    def test_block_minimizer_closed_form(self):
        # G = (1 - Q z^2)^2 vanishes at z = +-1/sqrt(Q) when Q > 0
        q, z = Polynomial.variables(2)
        g = (1 - q * z * z) ** 2
        assert g.evaluate((4, Fraction(1, 2))) == 0
        assert g.evaluate((4, Fraction(-1, 2))) == 0

    def test_identity_values(self):
        prog = encode_sa_unbounded(normalize_index_sets(identity_spec()))
        for v in (-1, 0, 2, Fraction(7, 3)):
            assert eval_constructed(prog, (v,)) == v

    def test_puncture_is_plus_infinity(self):
        spec = normalize_index_sets(identity_spec(punctured=True))
        prog = encode_sa_unbounded(spec)
        assert eval_constructed(prog, (1,)) == math.inf
        assert eval_constructed(prog, (Fraction(1, 2),)) == Fraction(1, 2)

    def test_layout(self):
        spec = normalize_index_sets(identity_spec(punctured=True))
        prog = encode_sa_unbounded(spec)
        I, J = len(spec.graph.pieces), len(spec.graph.pieces[0].strict)
        assert prog.m == 1 + 3 * I * J + 2 + I * J
        assert list(prog.metadata["roles"]) == ["t", "z", "nu", "nu+", "nu-", "u", "v"]
        assert all(lo == -math.inf and hi == math.inf for lo, hi in prog.box)
        assert prog.P == Polynomial.variable(prog.n, prog.n + prog.m)

    def test_non_normalized_rejected(self):
        spec = identity_spec(punctured=True)
        with pytest.raises(SpecError):
            encode_sa_unbounded(spec)

    def test_lower_objective_is_nonnegative(self):
        prog = encode_sa_unbounded(normalize_index_sets(identity_spec(punctured=True)))
        Q = prog.Q.expand()
        rng = np.random.default_rng(1)
        for pt in rational_points(rng, 300, prog.n + prog.m, span=3):
            assert Q.evaluate(pt) >= 0

    def test_pessimistic_matches_target(self):
        spec = normalize_index_sets(identity_spec(punctured=True))
        prog = encode_sa_unbounded(spec, PESSIMISTIC)
        assert prog.mode == PESSIMISTIC
        assert eval_constructed(prog, (3,)) == 3
        assert eval_constructed(prog, (1,)) == math.inf


class TestLscBounded:
    @pytest.mark.parametrize("p,zstar,gstar", [(1, Fraction(1, 2), 0), (-2, 0, 4)])
    def test_block_minimizer_table(self, p, zstar, gstar):
        pv, z = Polynomial.variables(2)
        g = lsc_block(pv, z)
        assert g.evaluate((p, zstar)) == gstar
        # brute-force oracle over a fine grid of the box [0, 1/2]
        grid = grid_points(0, Fraction(1, 2), 201)
        assert min(g.evaluate((p, v)) for v in grid) == gstar

    @given(st.fractions(-10, 10, max_denominator=20))
    def test_block_minimizer_stays_in_box(self, p):
        zstar = p / (p * p + 1) if p >= 0 else Fraction(0)
        assert 0 <= zstar <= Fraction(1, 2)

    def test_step_values(self):
        prog = encode_lsc_bounded(step_closure(), STEP_BOUNDS)
        assert [eval_constructed(prog, (v,)) for v in (-1, 0, 1)] == [1, 0, 0]

    def test_box_and_shape(self):
        prog = encode_lsc_bounded(step_closure(), STEP_BOUNDS)
        assert prog.box[0] == (-1, 1)
        assert all(b == (0, Fraction(1, 2)) for b in prog.box[1:])
        assert prog.m == 1 + 2 * 3

    def test_usc_step_in_pessimistic_mode(self):
        prog = encode_lsc_bounded(step_closure(), STEP_BOUNDS, PESSIMISTIC)
        for v in grid_points(-2, 2, 41):
            assert eval_constructed(prog, (v,)) == usc_step_value(v)

    def test_bounds_validation(self):
        x, t = Polynomial.variables(2)
        big = ClosedSASet(2, [(t - 10, 10 - t)])  # f = 10
        with pytest.raises(BoundsError):
            encode_lsc_bounded(big, GrowthBounds(1, 2))

    def test_empty_closure_rejected(self):
        with pytest.raises(SpecError):
            encode_lsc_bounded(ClosedSASet(2, []), STEP_BOUNDS)

    def test_sum_of_squares_product_is_nonnegative(self):
        prog = encode_lsc_bounded(step_closure(), STEP_BOUNDS)
        Q = prog.Q.expand()
        rng = np.random.default_rng(2)
        for _ in range(300):
            x = rational_points(rng, 1, 1, span=3)[0]
            assert Q.evaluate(x + box_point(rng, prog)) >= 0


class TestNormalizeRange:
    def test_out_of_range_is_reported(self):
        with pytest.raises(BoundsError):
            normalize_range(Fraction(10), (1,), GrowthBounds(1, 2))

    def test_forward(self):
        assert normalize_range(Fraction(3), (1,), GrowthBounds(3, 2)) == Fraction(3, 4)

    def test_infinities_pass_through(self):
        b = GrowthBounds(1, 2)
        assert normalize_range(math.inf, (5,), b) == math.inf
        assert normalize_range(-math.inf, (5,), b, "backward") == -math.inf

    @given(st.fractions(-1, 1), st.fractions(-4, 4, max_denominator=10))
    def test_round_trip(self, u, x):
        b = GrowthBounds(Fraction(1, 2), 4)
        f = normalize_range(u, (x,), b, "backward")
        assert normalize_range(f, (x,), b) == u


def midpoint_convex(prog, rng, xs_count=100, pairs=3) -> bool:
    Q = prog.Q.expand()
    for _ in range(xs_count):
        x = rational_points(rng, 1, prog.n)[0]
        for _ in range(pairs):
            y1, y2 = box_point(rng, prog), box_point(rng, prog)
            mid = [(a + b) / 2 for a, b in zip(y1, y2)]
            if Q.evaluate(x + mid) > (Q.evaluate(x + y1) + Q.evaluate(x + y2)) / 2:
                return False
    return True


class TestIndicator:
    def test_point_minimizers(self):
        s = indicator_sets()["point"]
        y, gmin = indicator_witness(s, [Fraction(0)])
        assert y == [1, 1, 0]  # w*, z*, t* (t free since P = 0)
        prog = encode_indicator_convex(s)
        assert eval_constructed(prog, (0,)) == 1
        y, _ = indicator_witness(s, [Fraction(3)])
        assert y[-1] == Fraction(1, 3)
        assert eval_constructed(prog, (3,)) == 0

    def test_open_half_line(self):
        prog = encode_indicator_convex(indicator_sets()["half-line"])
        assert [eval_constructed(prog, (v,)) for v in (2, -1, 0)] == [1, 0, 0]

    @pytest.mark.parametrize("name", sorted(indicator_sets()))
    def test_witness_is_a_global_minimizer(self, name):
        prog = encode_indicator_convex(indicator_sets()[name])
        s = prog.metadata["set"]  # padded with 1 > 0 when there are no inequalities
        G = prog.Q.expand()
        rng = np.random.default_rng(3)
        for _ in range(20):
            x = rational_points(rng, 1, prog.n)[0]
            y, gmin = indicator_witness(s, x)
            assert G.evaluate(x + y) == gmin
            assert all(G.evaluate(x + box_point(rng, prog)) >= gmin for _ in range(25))

    @pytest.mark.parametrize("name", sorted(indicator_sets()))
    def test_modes_agree(self, name):
        s = indicator_sets()[name]
        opt, pes = encode_indicator_convex(s), encode_indicator_convex(s, PESSIMISTIC)
        rng = np.random.default_rng(4)
        for x in rational_points(rng, 20, s.num_vars):
            v = eval_constructed(opt, x)
            assert v == eval_constructed(pes, x) == int(s.contains(x))

    @pytest.mark.parametrize("name", sorted(indicator_sets()))
    def test_lower_level_is_convex(self, name):
        prog = encode_indicator_convex(indicator_sets()[name])
        assert midpoint_convex(prog, np.random.default_rng(5), xs_count=30)

    def test_layout(self):
        prog = encode_indicator_convex(indicator_sets()["two-inequalities"])
        assert prog.m == 5
        assert prog.box[:2] == ((0, 1), (0, 1))
        assert all(b == (-math.inf, math.inf) for b in prog.box[2:])


class TestPiecewiseUnbounded:
    def test_abs(self):
        prog = encode_piecewise_unbounded(abs_spec())
        assert [eval_constructed(prog, (v,)) for v in (-2, 0, 3)] == [2, 0, 3]

    def test_constant(self):
        spec = PiecewisePolySpec(1, [SASet.everything(1)], [Polynomial.constant(7, 1)])
        prog = encode_piecewise_unbounded(spec)
        assert all(eval_constructed(prog, (v,)) == 7 for v in grid_points(-3, 3, 13))

    def test_quadratic_pieces_on_grid(self):
        spec = PiecewisePolySpec(1, [SASet.of(BasicSet(1, ZERO1, (1 - X,))),
                                     SASet.of(BasicSet(1, ZERO1, (X - 1,)), BasicSet(1, X - 1))],
                                 [X * X - 3, 2 * X * X + X])
        prog = encode_piecewise_unbounded(spec)
        for v in grid_points(-2, 3, 50):
            assert eval_constructed(prog, (v,)) == piecewise_eval(spec, (v,))

    def test_lower_level_is_convex(self):
        assert midpoint_convex(encode_piecewise_unbounded(pw3_spec()), np.random.default_rng(6), xs_count=20)

    def test_cap(self):
        pieces = [BasicSet(1, ZERO1, (X - k,)) for k in range(5)]
        spec = PiecewisePolySpec(1, [SASet.of(*pieces)], [X])
        with pytest.raises(SpecError):
            encode_piecewise_unbounded(spec, cap=3)


class TestPwLscBounded:
    def test_product_rule(self):
        # inside every clause polynomial the z-minimizers are all 1, outside one is 0
        prog = encode_pw_lsc_bounded(pw3_spec(), STEP_BOUNDS)
        assert prog.box == ((0, 1),) * prog.m
        I, J, K = (prog.metadata["index_sets"][k] for k in "IJK")
        assert prog.m == I * J * K + I * J

    def test_step_values(self):
        prog = encode_pw_lsc_bounded(step_pw_spec(), STEP_BOUNDS)
        assert [eval_constructed(prog, (v,)) for v in (-1, 0, 1)] == [1, 0, 0]

    def test_usc_step_pessimistic(self):
        prog = encode_pw_lsc_bounded(step_pw_spec(usc=True), STEP_BOUNDS, PESSIMISTIC)
        assert eval_constructed(prog, (0,)) == 1
        assert [eval_constructed(prog, (v,)) for v in (-1, 1)] == [1, 0]

    def test_three_pieces(self):
        spec = pw3_spec()
        prog = encode_pw_lsc_bounded(spec, STEP_BOUNDS)
        for v in grid_points(-2, 2, 41):
            assert eval_constructed(prog, (v,)) == piecewise_eval(spec, (v,))

    def test_mode_mismatch_warns(self):
        with pytest.warns(RuntimeWarning):
            encode_pw_lsc_bounded(step_pw_spec(usc=True), STEP_BOUNDS, OPTIMISTIC)

    def test_missing_closures(self):
        with pytest.raises(SpecError):
            encode_pw_lsc_bounded(abs_spec(), STEP_BOUNDS)

    def test_lower_level_is_convex(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            prog = encode_pw_lsc_bounded(pw3_spec(), STEP_BOUNDS)
        assert midpoint_convex(prog, np.random.default_rng(7))


class TestPessimize:
    def toy(self):
        x, t = Polynomial.variables(2)
        return BilevelProgram(1, 1, t, (t * t - x * x) ** 2, [(-1, 1)])

    def test_negates_and_flips(self):
        prog = self.toy()
        neg = pessimize(prog)
        assert neg.P == -prog.P and neg.mode == PESSIMISTIC

    def test_involution(self):
        prog = self.toy()
        back = pessimize(pessimize(prog))
        assert back.P == prog.P and back.mode == prog.mode

    def test_values_on_a_toy_program(self):
        # Theta(x) = {-|x|, |x|} for |x| <= 1, so phi_o = -|x| and phi_p = |x|
        from polybilevel.valuefn import PRECISE, eval_generic

        prog = self.toy()
        flipped = pessimize(prog)
        cfg = PRECISE
        for v in grid_points(-1, 1, 20):
            opt = eval_generic(prog, (v,), cfg).value
            pes = eval_generic(flipped, (v,), cfg).value
            assert opt == pytest.approx(-abs(float(v)), abs=1e-3)
            assert pes == pytest.approx(-opt, abs=1e-12)


class TestMomentLift:
    def square_program(self):
        x, t = Polynomial.variables(2)
        return BilevelProgram(1, 1, t, t * t, [(-1, 1)])

    def test_square(self):
        lp = moment_lift(self.square_program())
        assert lp.basis == MonomialBasis(1, 2)
        assert [lp.coefficient_values((0,)).get(k, 0) for k in range(3)] == [0, 0, 1]
        assert lp.upper_selector == 1

    def test_linearity_certificate(self):
        prog = encode_lsc_bounded(step_closure(), STEP_BOUNDS)
        lp = moment_lift(prog)
        Q = prog.Q.expand()
        rng = np.random.default_rng(8)
        for _ in range(20):
            x = rational_points(rng, 1, 1)[0]
            y = box_point(rng, prog)
            assert lp.objective(x, y) == Q.evaluate(x + y)
        assert lp.basis[lp.upper_selector] == (1,) + (0,) * (prog.m - 1)

    def test_vertex_consistency(self):
        prog = self.square_program()
        lp = moment_lift(prog)
        ys = [[v] for v in grid_points(-1, 1, 9)]
        assert min(lp.objective((0,), y) for y in ys) == min(prog.Q.evaluate([0] + y) for y in ys)

    def test_unbounded_rejected(self):
        with pytest.raises(ValueError):
            moment_lift(encode_indicator_convex(indicator_sets()["point"]))

    def test_p_must_select_one_coordinate(self):
        x, t = Polynomial.variables(2)
        with pytest.raises(ValueError):
            moment_lift(BilevelProgram(1, 1, t * t, t * t, [(-1, 1)]))


@settings(max_examples=25, deadline=None)
@given(st.fractions(-2, 2, max_denominator=16))
def test_lsc_step_matches_target_everywhere(v):
    prog = encode_lsc_bounded(step_closure(), STEP_BOUNDS)
    assert eval_constructed(prog, (v,)) == lsc_step_value(v)


def test_sa_step_against_target_eval():
    from builders import step_spec

    spec = normalize_index_sets(step_spec())
    prog = encode_sa_unbounded(spec)
    for v in grid_points(-2, 2, 21):
        assert eval_constructed(prog, (v,)) == target_eval(spec, (v,))
