"""Compile semi-algebraic targets and subset-sum-interval instances into
polynomial bilevel programs, and check their value functions."""

from .encoder import (OPTIMISTIC, PESSIMISTIC, BilevelProgram, BoundsError, LiftedProgram,
                      encode_indicator_convex, encode_lsc_bounded, encode_piecewise_unbounded,
                      encode_pw_lsc_bounded, encode_sa_unbounded, moment_lift, pessimize)
from .hardness import (SubsetSumIntervalInstance, oracle_decide, phi_on_binary, reduce_to_bilevel,
                       verify_reduction)
from .poly import MonomialBasis, Polynomial, PolyExpr, monomial_map
from .semialg import (BasicSet, ClosedSASet, GrowthBounds, PiecewisePolySpec, SAFunctionSpec, SASet,
                      SpecError, disjointify, normalize_index_sets, piecewise_eval, target_eval)
from .valuefn import (PRECISE, EvalConfig, EvalResult, cross_validate, eval_constructed,
                      eval_generic, semicontinuity_probe)

__version__ = "0.1.0"

__all__ = [
    "OPTIMISTIC", "PESSIMISTIC", "BilevelProgram", "BoundsError", "LiftedProgram",
    "encode_indicator_convex", "encode_lsc_bounded", "encode_piecewise_unbounded",
    "encode_pw_lsc_bounded", "encode_sa_unbounded", "moment_lift", "pessimize",
    "SubsetSumIntervalInstance", "oracle_decide", "phi_on_binary", "reduce_to_bilevel",
    "verify_reduction", "MonomialBasis", "Polynomial", "PolyExpr", "monomial_map", "BasicSet",
    "ClosedSASet", "GrowthBounds", "PiecewisePolySpec", "SAFunctionSpec", "SASet", "SpecError",
    "disjointify", "normalize_index_sets", "piecewise_eval", "target_eval", "PRECISE", "EvalConfig",
    "EvalResult", "cross_validate", "eval_constructed", "eval_generic", "semicontinuity_probe",
]
