"""Subset-sum-interval instances and their reduction to degree-5 bilevel programs.

An instance ``(q, R, r)`` asks whether some integer ``S`` in
``[R, R + 2**r - 1]`` is *not* a subset sum of ``q``.  The compiled program
has upper variables ``x`` (``r`` of them) and lower variables ``(z, t_1..t_k)``
in the unit box, with

    F = R + sum_j 2**(j-1) x_j          G = sum_i q_i t_i
    H = sum_i (t_i (1 - t_i))**2 + (F - G)**2
    L = z ((z - 1)**2 + sum_j ((1 - x_j) x_j)**2)
    P = 1 - z (H + 1)                   Q = L + H

so ``phi(x) = 1`` off the binary cube and ``phi(x) = -min_t H(x, t)`` on it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .encoder import OPTIMISTIC, BilevelProgram
from .poly import Polynomial

YES, NO = "YES", "NO"
ZERO, NEGATIVE = "ZERO", "NEGATIVE"
DEFAULT_CAP = 10**6


class TrivialInstanceError(ValueError):
    """``r > k``: there are more targets than subsets, so the answer is YES."""


class OracleCapError(ValueError):
    """The instance is too large for the exhaustive oracle."""


@dataclass(frozen=True)
class SubsetSumIntervalInstance:
    q: tuple
    R: int
    r: int

    def __post_init__(self):
        object.__setattr__(self, "q", tuple(int(v) for v in self.q))
        if not self.q:
            raise ValueError("q must be non-empty")
        if any(v < 1 for v in self.q):
            raise ValueError("all q_i must be positive integers")
        if self.R < 0 or self.r < 1:
            raise ValueError("R must be a non-negative integer and r a positive integer")
        if self.r > self.k:
            raise TrivialInstanceError(f"r={self.r} exceeds k={self.k}; the instance is trivially YES")

    @property
    def k(self) -> int:
        return len(self.q)

    @property
    def targets(self) -> range:
        return range(self.R, self.R + 2 ** self.r)

    @property
    def M(self) -> int:
        return max(max(self.q), 2 ** (self.r - 1), self.R)

    def to_dict(self) -> dict:
        return {"q": list(self.q), "R": self.R, "r": self.r}

    @classmethod
    def from_dict(cls, data) -> "SubsetSumIntervalInstance":
        return cls(tuple(data["q"]), int(data["R"]), int(data["r"]))


@dataclass(frozen=True)
class ReductionCertificate:
    deg_P: int
    deg_Q: int
    M: int
    coeff_bound: int
    max_abs_coeff_P: int
    max_abs_coeff_Q: int
    disjoint_summands: bool

    @property
    def ok(self) -> bool:
        return (self.deg_P == 5 and self.deg_Q == 5 and self.disjoint_summands
                and self.max_abs_coeff_P <= self.coeff_bound
                and self.max_abs_coeff_Q <= self.coeff_bound)

    def to_dict(self) -> dict:
        return {"deg_P": self.deg_P, "deg_Q": self.deg_Q, "M": self.M, "coeff_bound": self.coeff_bound,
                "max_abs_coeff_P": self.max_abs_coeff_P, "max_abs_coeff_Q": self.max_abs_coeff_Q,
                "disjoint_summands": self.disjoint_summands, "ok": self.ok}


def _linear_form(inst: SubsetSumIntervalInstance) -> tuple[int, list[int]]:
    """``F - G`` as ``c + sum a_v y_v`` over the full variable list (z has weight 0)."""
    r, k = inst.r, inst.k
    coeffs = [2 ** j for j in range(r)] + [0] + [-qi for qi in inst.q]
    return inst.R, coeffs


_FRACTIONS: dict[int, Fraction] = {}


def _frac(v: int) -> Fraction:
    f = _FRACTIONS.get(v)
    if f is None:
        f = _FRACTIONS[v] = Fraction(v)
    return f


def _poly(total: int, terms: dict) -> Polynomial:
    # integer-keyed construction: skips the generic validation path
    return Polynomial._from_clean(total, {e: _frac(c) for e, c in terms.items() if c})


def reduction_parts(inst: SubsetSumIntervalInstance) -> dict[str, Polynomial]:
    """The polynomials ``F, G, H, L, P, Q`` in variables ``(x_1..x_r, z, t_1..t_k)``.

    Expanded directly from the closed forms; ``reduction_parts_reference``
    builds the same polynomials by generic arithmetic.
    """
    r, k = inst.r, inst.k
    total = r + 1 + k
    zero = (0,) * total

    def unit(*pairs) -> tuple:
        e = [0] * total
        for i, d in pairs:
            e[i] += d
        return tuple(e)

    c, a = _linear_form(inst)
    H: dict = {zero: c * c}
    nz = [(i, v) for i, v in enumerate(a) if v]
    for i, v in nz:
        H[unit((i, 1))] = H.get(unit((i, 1)), 0) + 2 * c * v
        H[unit((i, 2))] = H.get(unit((i, 2)), 0) + v * v
    for (i, u), (j, v) in itertools.combinations(nz, 2):
        H[unit((i, 1), (j, 1))] = H.get(unit((i, 1), (j, 1)), 0) + 2 * u * v
    for i in range(r + 1, total):
        for d, coef in ((2, 1), (3, -2), (4, 1)):
            key = unit((i, d))
            H[key] = H.get(key, 0) + coef
    zi = r
    L: dict = {unit((zi, 3)): 1, unit((zi, 2)): -2, unit((zi, 1)): 1}
    for j in range(r):
        for d, coef in ((2, 1), (3, -2), (4, 1)):
            L[unit((zi, 1), (j, d))] = coef
    P: dict = {zero: 1, unit((zi, 1)): -1}
    for e, v in H.items():
        key = tuple(x + (1 if i == zi else 0) for i, x in enumerate(e))
        P[key] = P.get(key, 0) - v
    Q = dict(H)
    for e, v in L.items():
        Q[e] = Q.get(e, 0) + v
    F = {zero: inst.R}
    for j in range(r):
        F[unit((j, 1))] = 2 ** j
    G = {unit((r + 1 + i, 1)): qi for i, qi in enumerate(inst.q)}
    raw = {"F": F, "G": G, "H": H, "L": L, "P": P, "Q": Q}
    return {name: _poly(total, d) for name, d in raw.items()}


def reduction_parts_reference(inst: SubsetSumIntervalInstance) -> dict[str, Polynomial]:
    """Same polynomials as :func:`reduction_parts`, built by generic polynomial arithmetic."""
    r, k = inst.r, inst.k
    total = r + 1 + k
    v = Polynomial.variables(total)
    x, z, t = v[:r], v[r], v[r + 1:]
    F = Polynomial.constant(inst.R, total)
    for j in range(r):
        F = F + x[j] * (2 ** j)
    G = Polynomial.zero(total)
    for qi, ti in zip(inst.q, t):
        G = G + ti * qi
    H = (F - G) ** 2
    for ti in t:
        H = H + (ti * (1 - ti)) ** 2
    inner = (z - 1) ** 2
    for xj in x:
        inner = inner + ((1 - xj) * xj) ** 2
    L = z * inner
    P = 1 - z * (H + 1)
    Q = L + H
    return {"F": F, "G": G, "H": H, "L": L, "P": P, "Q": Q}


def _max_abs_int(p) -> int:
    if isinstance(p, dict):
        return max((abs(v) for v in p.values()), default=0)
    c = p.max_abs_coeff()
    if c.denominator != 1:
        raise ValueError("non-integer coefficient in reduction output")
    return int(c)


def certify(inst: SubsetSumIntervalInstance, parts: dict | None = None) -> ReductionCertificate:
    """Degree and coefficient certificate read off the compiled polynomials."""
    parts = parts or reduction_parts(inst)
    M = inst.M
    shared = {e for e, c in parts["L"].terms.items()} & {e for e in parts["H"].terms}
    return ReductionCertificate(
        deg_P=parts["P"].degree(), deg_Q=parts["Q"].degree(), M=M, coeff_bound=2 * (M * M + 1),
        max_abs_coeff_P=_max_abs_int(parts["P"]), max_abs_coeff_Q=_max_abs_int(parts["Q"]),
        disjoint_summands=not shared)


def reduce_to_bilevel(inst: SubsetSumIntervalInstance) -> tuple[BilevelProgram, ReductionCertificate]:
    parts = reduction_parts(inst)
    r, k = inst.r, inst.k
    meta = {"construction": "hardness", "roles": {"z": [0], "t": list(range(1, k + 1))},
            "sign": 1, "instance": inst}
    prog = BilevelProgram(r, k + 1, parts["P"], parts["Q"], [(0, 1)] * (k + 1), OPTIMISTIC, meta)
    return prog, certify(inst, parts)


# -- exhaustive oracle -------------------------------------------------------------

def reachable_sums(q: Sequence[int], cap: int = DEFAULT_CAP) -> int:
    """Bitset whose bit ``s`` is set iff ``s`` is a subset sum of ``q``."""
    total = sum(q)
    if total > cap:
        raise OracleCapError(f"sum of q is {total}, above the cap {cap}")
    reach = 1
    for v in q:
        reach |= reach << v
    return reach


def subset_witness(q: Sequence[int], target: int) -> tuple[int, ...] | None:
    """Binary vector ``t`` with ``sum q_i t_i == target``, or ``None``."""
    if target < 0 or target > sum(q):
        return None
    layers = [1]
    for v in q:
        layers.append(layers[-1] | (layers[-1] << v))
    if not (layers[-1] >> target) & 1:
        return None
    t = [0] * len(q)
    s = target
    for i in range(len(q) - 1, -1, -1):
        if not (layers[i] >> s) & 1:
            t[i] = 1
            s -= q[i]
    return tuple(t)


@dataclass
class OracleAnswer:
    answer: str
    witness_S: int | None = None
    subsets: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"answer": self.answer, "witness_S": self.witness_S,
                "subsets": {str(k): list(v) for k, v in self.subsets.items()}}


def oracle_decide(inst: SubsetSumIntervalInstance, cap: int = DEFAULT_CAP) -> OracleAnswer:
    """Exhaustive answer via reachable-sum dynamic programming."""
    if inst.R + 2 ** inst.r > cap:
        raise OracleCapError(f"target range ends at {inst.R + 2 ** inst.r}, above the cap {cap}")
    reach = reachable_sums(inst.q, cap)
    for S in inst.targets:
        if not (reach >> S) & 1:
            return OracleAnswer(YES, witness_S=S)
    return OracleAnswer(NO, subsets={S: subset_witness(inst.q, S) for S in inst.targets})


def F_value(inst: SubsetSumIntervalInstance, x: Sequence[int]) -> int:
    return inst.R + sum(2 ** j * int(v) for j, v in enumerate(x))


def min_H_lower_bound(inst: SubsetSumIntervalInstance, x: Sequence[int], reach: int | None = None) -> Fraction:
    """Exact lower bound on ``min_t H(x, t)`` over the unit box for binary ``x``.

    With ``g`` the distance from ``F(x)`` to the nearest subset sum and
    ``d_i = min(t_i, 1 - t_i)``, one has ``t_i (1 - t_i) >= d_i / 2`` and
    ``|F - G(t)| >= g - ||q|| ||d||``.  Minimising over ``||d||`` gives
    ``min H >= g**2 / (4 ||q||**2 + 1)``.
    """
    if reach is None:
        reach = reachable_sums(inst.q)
    f = F_value(inst, x)
    sums = [s for s in range(reach.bit_length()) if (reach >> s) & 1]
    g = min(abs(f - s) for s in sums)
    return Fraction(g * g, 4 * sum(v * v for v in inst.q) + 1)


def min_H_estimate(inst: SubsetSumIntervalInstance, x: Sequence[int], starts: int = 8,
                   seed: int = 0) -> tuple[float, tuple]:
    """Numerical ``min_t H(x, t)`` over the unit box (an upper bound on the true minimum)."""
    from scipy.optimize import minimize

    f = float(F_value(inst, x))
    q = np.asarray(inst.q, dtype=float)
    k = inst.k

    def H(t):
        a = t * (1 - t)
        return float(np.sum(a * a) + (f - q @ t) ** 2)

    def grad(t):
        a = t * (1 - t)
        return 2 * a * (1 - 2 * t) - 2 * (f - q @ t) * q

    rng = np.random.default_rng(seed)
    inits = [np.full(k, 0.5)] + [rng.random(k) for _ in range(starts)]
    # rounding candidates: subset sums nearest to F
    reach = reachable_sums(inst.q)
    for target in (math.floor(f), math.ceil(f)):
        for s in (target - 1, target + 1):
            w = subset_witness(inst.q, s)
            if w is not None:
                inits.append(np.asarray(w, dtype=float))
    best, arg = math.inf, None
    for t0 in inits:
        res = minimize(H, t0, jac=grad, method="L-BFGS-B", bounds=[(0.0, 1.0)] * k,
                       options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 2000})
        if res.fun < best:
            best, arg = float(res.fun), tuple(float(v) for v in res.x)
    del reach
    return best, arg


@dataclass
class BinarySign:
    certificate: str  # ZERO or NEGATIVE
    F: int
    witness_t: tuple | None
    min_H_lower_bound: Fraction
    min_H_estimate: float | None = None

    def value(self):
        """``phi(x)``: exactly 0 for ZERO, a float estimate for NEGATIVE."""
        if self.certificate == ZERO:
            return Fraction(0)
        return -self.min_H_estimate if self.min_H_estimate is not None else None


def _is_binary(x: Sequence) -> bool:
    return all(Fraction(v) in (0, 1) for v in x)


def phi_on_binary(prog: BilevelProgram | None, x: Sequence,
                  inst: SubsetSumIntervalInstance | None = None,
                  estimate: bool = False) -> BinarySign:
    """Sign of ``phi(x)`` at a binary ``x``, decided by subset-sum reachability.

    ZERO comes with a binary ``t`` for which the compiled program satisfies
    ``Q(x, 1, t) = 0`` and ``P(x, 1, t) = 0`` (checked exactly when ``prog`` is
    given).  NEGATIVE comes with an exact positive lower bound on
    ``min_t H(x, t)``, so ``phi(x) <= -bound < 0``.
    """
    if inst is None:
        if prog is None:
            raise ValueError("need a program or an instance")
        inst = prog.metadata["instance"]
    if len(x) != inst.r:
        raise ValueError(f"x must have length r={inst.r}")
    if not _is_binary(x):
        raise ValueError("x must be binary")
    xb = [int(Fraction(v)) for v in x]
    f = F_value(inst, xb)
    w = subset_witness(inst.q, f)
    if w is not None:
        if prog is not None:
            pt = xb + [1] + list(w)
            if prog.Q.evaluate(pt) != 0 or prog.P.evaluate(pt) != 0:
                raise AssertionError(f"compiled program does not vanish at the witness for x={xb}")
        return BinarySign(ZERO, f, w, Fraction(0), 0.0)
    lb = min_H_lower_bound(inst, xb)
    est = min_H_estimate(inst, xb)[0] if estimate else None
    if est is not None and est < float(lb) * (1 - 1e-9):
        raise AssertionError(f"numerical minimum {est} undercuts the certified bound {lb}")
    return BinarySign(NEGATIVE, f, None, lb, est)


@dataclass
class ReductionReport:
    instance: SubsetSumIntervalInstance
    oracle: str
    decision_negative: bool
    negative_at: list = field(default_factory=list)
    certificate: ReductionCertificate | None = None
    nonbinary_checks: list = field(default_factory=list)
    mismatches: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def to_dict(self) -> dict:
        return {"instance": self.instance.to_dict(), "oracle": self.oracle,
                "decision_negative": self.decision_negative,
                "negative_at": [list(x) for x in self.negative_at],
                "certificate": self.certificate.to_dict() if self.certificate else None,
                "nonbinary_checks": self.nonbinary_checks, "mismatches": self.mismatches,
                "ok": self.ok}


def verify_reduction(inst: SubsetSumIntervalInstance, nonbinary_points: int = 10, seed: int = 0,
                     generic_cfg=None, estimate: bool = False) -> ReductionReport:
    """Check ``YES <=> some binary x is NEGATIVE`` and ``phi = 1`` at random non-binary points."""
    prog, cert = reduce_to_bilevel(inst)
    oracle = oracle_decide(inst)
    negative = []
    for x in itertools.product((0, 1), repeat=inst.r):
        sign = phi_on_binary(prog, x, inst, estimate=estimate)
        if sign.certificate == NEGATIVE:
            negative.append(x)
    report = ReductionReport(inst, oracle.answer, bool(negative), negative, cert)
    if (oracle.answer == YES) != bool(negative):
        report.mismatches.append({"kind": "biconditional", "oracle": oracle.answer,
                                  "negative_at": [list(x) for x in negative]})
    if oracle.answer == YES and oracle.witness_S is not None:
        xs = [(oracle.witness_S - inst.R) >> j & 1 for j in range(inst.r)]
        if tuple(xs) not in negative:
            report.mismatches.append({"kind": "witness", "x": xs})
    if not cert.ok:
        report.mismatches.append({"kind": "certificate", **cert.to_dict()})
    if nonbinary_points:
        from .valuefn import EvalConfig, eval_generic

        cfg = generic_cfg or EvalConfig(grid_points_per_dim=9, refinement_stages=2)
        rng = np.random.default_rng(seed)
        for _ in range(nonbinary_points):
            x = [Fraction(int(v), 64) for v in rng.integers(-32, 97, size=inst.r)]
            if _is_binary(x):
                x[0] += Fraction(1, 64)
            val = eval_generic(prog, x, cfg).value
            report.nonbinary_checks.append({"x": [str(v) for v in x], "value": float(val)})
            if abs(float(val) - 1.0) > 1e-6:
                report.mismatches.append({"kind": "nonbinary", "x": [str(v) for v in x],
                                          "value": float(val)})
    return report


def generate_instances(count: int, k_max: int, q_max: int, r_max: int, seed: int = 0,
                       R_max: int | None = None) -> list[SubsetSumIntervalInstance]:
    """Balanced random instances: even draws plant a gap (YES-leaning), odd draws use dense ``q`` (NO-leaning)."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        k = int(rng.integers(1, k_max + 1))
        r = int(rng.integers(1, min(r_max, k) + 1))
        if len(out) % 2 == 0:
            q = [int(v) for v in rng.integers(1, q_max + 1, size=k)]
            reach = reachable_sums(q)
            missing = [s for s in range(1, sum(q) + 2) if not (reach >> s) & 1]
            S = int(rng.choice(missing))
            R = max(1, S - int(rng.integers(0, 2 ** r)))
        else:
            small = max(1, min(q_max, 2 ** int(rng.integers(0, 3))))
            q = [int(v) for v in rng.integers(1, small + 1, size=k)]
            total = sum(q)
            hi = max(1, total - 2 ** r + 1)
            R = int(rng.integers(1, hi + 1))
        if R_max is not None:
            R = min(R, R_max)
        out.append(SubsetSumIntervalInstance(tuple(q), R, r))
    return out


def exhaustive_family(k_max: int = 6, q_max: int = 8, r_max: int = 3,
                      R_values: Sequence[int] = (1, 2, 3, 4)) -> list[SubsetSumIntervalInstance]:
    """Every non-decreasing ``q`` with ``len(q) <= k_max`` and entries ``<= q_max``,
    every ``r <= min(r_max, k)`` and every ``R`` in ``R_values``."""
    out = []
    for k in range(1, k_max + 1):
        for q in itertools.combinations_with_replacement(range(1, q_max + 1), k):
            for r in range(1, min(r_max, k) + 1):
                for R in R_values:
                    out.append(SubsetSumIntervalInstance(q, R, r))
    return out
