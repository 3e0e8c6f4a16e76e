"""A jump, three ways: compile the lower semicontinuous step into a bounded
bilevel program, read its value exactly, search it numerically, and probe the
jump for semicontinuity.

Run with ``python3 gallery/step_function.py``.
"""

from fractions import Fraction

from polybilevel import (OPTIMISTIC, PESSIMISTIC, PRECISE, ClosedSASet, GrowthBounds, Polynomial,
                         encode_lsc_bounded, eval_constructed, eval_generic, semicontinuity_probe)

x, t = Polynomial.variables(2)

# closure of the graph: {x >= 0, t = 0} together with {x <= 0, t = 1}
closure = ClosedSASet(2, [(x, t, -t), (-x, t - 1, 1 - t)])
bounds = GrowthBounds(1, 2)

lsc = encode_lsc_bounded(closure, bounds, OPTIMISTIC)
usc = encode_lsc_bounded(closure, bounds, PESSIMISTIC)
print(f"lower level has {lsc.m} variables; deg Q = {lsc.Q.expand().degree()}")

print("\n   x   optimistic  pessimistic  grid search")
for v in (Fraction(-1), Fraction(-1, 10), Fraction(0), Fraction(1, 10), Fraction(1)):
    exact_lo = eval_constructed(lsc, (v,))
    exact_hi = eval_constructed(usc, (v,))
    approx = eval_generic(lsc, (v,), PRECISE).value
    print(f"{str(v):>5}  {str(exact_lo):>10}  {str(exact_hi):>11}  {approx:11.6f}")

# Optimistic programs give lower semicontinuous values.  Probing the
# pessimistic program as if it were optimistic exposes the jump at 0.
good = semicontinuity_probe(lsc, (0,))
bad = semicontinuity_probe(usc, (0,), mode=OPTIMISTIC)
print(f"\nprobe at 0, optimistic program: ok={good.ok}")
print(f"probe at 0, pessimistic program read as lsc: ok={bad.ok}, "
      f"worst gap {max(v['magnitude'] for v in bad.violations):.3f}")
