"""Indicator functions of basic sets, and splitting a union into disjoint cells.

Run with ``python3 gallery/sets_and_cells.py``.
"""

from fractions import Fraction

from polybilevel import (PESSIMISTIC, BasicSet, Polynomial, SASet, disjointify,
                         encode_indicator_convex, eval_constructed)

a, b = Polynomial.variables(2)
disc = BasicSet(2, Polynomial.zero(2), (1 - a * a - b * b,))

opt = encode_indicator_convex(disc)
pes = encode_indicator_convex(disc, PESSIMISTIC)
print("indicator of the open unit disc")
for pt in [(0, 0), (Fraction(3, 5), Fraction(4, 5)), (Fraction(1, 2), Fraction(1, 2)), (2, 0)]:
    print(f"  {str(pt[0]):>4}, {str(pt[1]):<4} -> {eval_constructed(opt, pt)} "
          f"(pessimistic {eval_constructed(pes, pt)})")

# the disc overlaps the half-plane a > b; the cells below do not overlap
union = SASet.of(disc, BasicSet(2, Polynomial.zero(2), (a - b,)))
cells = disjointify(union)
print(f"\nunion of 2 basic sets -> {len(cells)} sign-condition cells")
for pt in [(0, 0), (Fraction(1, 2), 0), (2, 1), (-2, -1)]:
    hits = [i for i, c in enumerate(cells) if c.contains(pt)]
    print(f"  {pt}: in union {union.contains(pt)}, cells {hits}")
