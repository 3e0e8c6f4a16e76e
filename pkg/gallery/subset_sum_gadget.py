"""From a subset-sum-interval instance to a degree-5 bilevel program.

The instance asks whether some target in [R, R + 2^r - 1] is missed by every
subset sum of q.  The compiled program has a negative optimal value exactly
when the answer is YES.  Run with ``python3 gallery/subset_sum_gadget.py``.
"""

import itertools

from polybilevel import SubsetSumIntervalInstance, oracle_decide, phi_on_binary, reduce_to_bilevel

for inst in (SubsetSumIntervalInstance((1, 2), 4, 1), SubsetSumIntervalInstance((1, 2), 0, 2)):
    prog, cert = reduce_to_bilevel(inst)
    answer = oracle_decide(inst)
    print(f"q={inst.q} R={inst.R} r={inst.r}: oracle says {answer.answer}"
          + (f" (missed target {answer.witness_S})" if answer.witness_S is not None else ""))
    print(f"  deg P = {cert.deg_P}, deg Q = {cert.deg_Q}, "
          f"largest coefficient {max(cert.max_abs_coeff_P, cert.max_abs_coeff_Q)} <= {cert.coeff_bound}")
    for xb in itertools.product((0, 1), repeat=inst.r):
        sign = phi_on_binary(prog, xb, inst)
        detail = (f"witness t = {sign.witness_t}" if sign.witness_t is not None
                  else f"min H >= {sign.min_H_lower_bound}")
        print(f"  x = {xb}: target F = {sign.F}, value {sign.certificate} ({detail})")
