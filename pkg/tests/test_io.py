import json
import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from builders import (STEP_BOUNDS, abs_spec, indicator_sets, pw3_spec, step_closure, step_spec)
from polybilevel import io
from polybilevel.encoder import (PESSIMISTIC, encode_indicator_convex, encode_lsc_bounded,
                                 encode_piecewise_unbounded, encode_pw_lsc_bounded,
                                 encode_sa_unbounded)
from polybilevel.hardness import SubsetSumIntervalInstance, reduce_to_bilevel
from polybilevel.poly import Polynomial
from polybilevel.semialg import grid_points, normalize_index_sets
from polybilevel.valuefn import eval_constructed

coeffs = st.fractions(min_value=-10**6, max_value=10**6, max_denominator=10**6)


@st.composite
def polynomials(draw):
    n = draw(st.integers(0, 3))
    terms = draw(st.dictionaries(st.tuples(*[st.integers(0, 5)] * n), coeffs, max_size=6))
    return Polynomial(n, terms)


class TestPolynomialFormat:
    @given(polynomials())
    def test_bit_exact_round_trip(self, p):
        text = io.dumps(p.to_dict())
        back = Polynomial.from_dict(json.loads(text))
        assert back == p
        assert io.dumps(back.to_dict()) == text

    def test_record_shape(self):
        x, y = Polynomial.variables(2)
        rec = (Fraction(-3, 4) * x * y ** 2).to_dict()
        assert rec == {"num_vars": 2, "terms": [{"exponents": [1, 2], "coeff": "-3/4"}]}

    def test_duplicate_exponents_rejected(self):
        rec = {"num_vars": 1, "terms": [{"exponents": [1], "coeff": "1/1"}, {"exponents": [1], "coeff": "2/1"}]}
        with pytest.raises(ValueError):
            Polynomial.from_dict(rec)


class TestValues:
    @pytest.mark.parametrize("v", [Fraction(-7, 3), Fraction(0), math.inf, -math.inf])
    def test_value_round_trip(self, v):
        assert io.parse_value(io.value_str(v)) == v

    def test_sentinels(self):
        assert io.value_str(math.inf) == "+inf" and io.value_str(-math.inf) == "-inf"

    def test_bounds_text(self):
        b = io.parse_bounds("B=3/2,N=4")
        assert (b.B, b.N) == (Fraction(3, 2), 4)
        with pytest.raises(io.FormatError):
            io.parse_bounds("B=1")


class TestSpecRecords:
    @pytest.mark.parametrize("obj", [
        indicator_sets()["two-inequalities"], step_closure(), step_spec(), abs_spec(), pw3_spec(),
        STEP_BOUNDS, SubsetSumIntervalInstance((1, 2, 9), 3, 2),
    ], ids=lambda o: type(o).__name__)
    def test_round_trip(self, obj):
        rec = io.to_record(obj)
        assert rec["type"]
        back = io.from_record(json.loads(io.dumps(rec)))
        assert back == obj

    def test_relations_are_explicit(self):
        rec = io.to_record(indicator_sets()["two-inequalities"])
        assert [c["relation"] for c in rec["constraints"]] == ["=0", ">0", ">0"]
        rec = io.to_record(step_closure())
        assert {c["relation"] for cl in rec["clauses"] for c in cl} == {">=0"}

    def test_unknown_type(self):
        with pytest.raises(io.FormatError):
            io.spec_from_dict({"type": "mystery"})
        # the generic decoder leaves untyped payloads alone
        assert io.from_record({"type": "mystery", "v": [1]}) == {"type": "mystery", "v": [1]}


class TestPrograms:
    def programs(self):
        return {
            "sa": encode_sa_unbounded(normalize_index_sets(step_spec())),
            "lsc": encode_lsc_bounded(step_closure(), STEP_BOUNDS),
            "lsc-pess": encode_lsc_bounded(step_closure(), STEP_BOUNDS, PESSIMISTIC),
            "indicator": encode_indicator_convex(indicator_sets()["circle"]),
            "piecewise": encode_piecewise_unbounded(abs_spec()),
            "pw-lsc": encode_pw_lsc_bounded(pw3_spec(), STEP_BOUNDS),
            "hardness": reduce_to_bilevel(SubsetSumIntervalInstance((1, 2), 0, 2))[0],
        }

    def test_round_trip_preserves_values(self, tmp_path):
        for name, prog in self.programs().items():
            path = tmp_path / f"{name}.json"
            io.save_program(prog, path)
            back = io.load_program(path)
            assert back == prog, name
            assert back.P.expand() == prog.P.expand() and back.Q.expand() == prog.Q.expand()
            pts = ([(v,) for v in grid_points(-2, 2, 9)] if prog.n == 1
                   else [(a, b) for a in (0, 1) for b in (0, 1)] if name == "hardness"
                   else [(Fraction(3, 5), Fraction(4, 5)), (0, 0), (2, 1)])
            for x in pts:
                assert eval_constructed(back, x) == eval_constructed(prog, x), (name, x)

    def test_box_sentinels(self):
        rec = io.program_to_dict(encode_indicator_convex(indicator_sets()["point"]))
        assert rec["box"] == [["0/1", "1/1"], ["-inf", "+inf"], ["-inf", "+inf"]]
        assert rec["mode"] == "optimistic" and rec["metadata"]["construction"] == "indicator"

    def test_canonical_text_is_stable(self):
        prog = encode_lsc_bounded(step_closure(), STEP_BOUNDS)
        a = io.dumps(io.program_to_dict(prog))
        b = io.dumps(io.program_to_dict(io.program_from_dict(json.loads(a))))
        assert a == b and a.endswith("\n")

    def test_wrong_format_tag(self):
        rec = io.program_to_dict(encode_lsc_bounded(step_closure(), STEP_BOUNDS))
        rec["format"] = "other/9"
        with pytest.raises(io.FormatError):
            io.program_from_dict(rec)
