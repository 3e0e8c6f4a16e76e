"""Exact real-root tools for univariate polynomials with rational coefficients.

Polynomials here are plain lists of :class:`Fraction` coefficients, lowest
degree first.  Roots are isolated with Sturm sequences and refined by
bisection in exact rational arithmetic.  Every rational root is recovered
exactly: once an isolating interval is narrower than ``1 / L**2`` (``L`` the
leading coefficient of the integer-scaled polynomial), it contains at most one
fraction whose denominator divides ``L``, and that candidate is tested exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Sequence

Coeffs = list  # list[Fraction], low degree first


def trim(p: Sequence) -> Coeffs:
    out = [Fraction(c) for c in p]
    while out and out[-1] == 0:
        out.pop()
    return out


def degree(p: Coeffs) -> int:
    """Degree, with -1 for the zero polynomial."""
    return len(trim(p)) - 1


def horner(p: Coeffs, x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(p):
        acc = acc * x + c
    return acc


def sign_at(p: Coeffs, x: Fraction) -> int:
    v = horner(p, x)
    return (v > 0) - (v < 0)


def derivative(p: Coeffs) -> Coeffs:
    return trim([i * c for i, c in enumerate(p)][1:])


def divmod_poly(a: Coeffs, b: Coeffs) -> tuple[Coeffs, Coeffs]:
    a, b = trim(a), trim(b)
    if not b:
        raise ZeroDivisionError("division by zero polynomial")
    q = [Fraction(0)] * max(len(a) - len(b) + 1, 1)
    r = list(a)
    lead = b[-1]
    while len(r) >= len(b) and r:
        shift = len(r) - len(b)
        f = r[-1] / lead
        q[shift] = f
        for i, c in enumerate(b):
            r[shift + i] -= f * c
        r = trim(r)
    return trim(q), r


def monic(p: Coeffs) -> Coeffs:
    p = trim(p)
    if not p:
        return p
    lead = p[-1]
    return [c / lead for c in p]


def gcd(a: Coeffs, b: Coeffs) -> Coeffs:
    a, b = trim(a), trim(b)
    while b:
        _, r = divmod_poly(a, b)
        a, b = b, r
    return monic(a)


def squarefree(p: Coeffs) -> Coeffs:
    """Squarefree part ``p / gcd(p, p')`` (monic)."""
    p = trim(p)
    if len(p) <= 2:
        return monic(p)
    g = gcd(p, derivative(p))
    q, _ = divmod_poly(p, g)
    return monic(q)


def multiply(a: Coeffs, b: Coeffs) -> Coeffs:
    a, b = trim(a), trim(b)
    if not a or not b:
        return []
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def integer_scaled(p: Coeffs) -> list[int]:
    """Primitive integer polynomial with the same roots."""
    p = trim(p)
    den = reduce(lambda u, v: u * v // math.gcd(u, v), (c.denominator for c in p), 1)
    ints = [int(c * den) for c in p]
    g = reduce(math.gcd, ints, 0) or 1
    return [c // g for c in ints]


def cauchy_bound(p: Coeffs) -> Fraction:
    """All real roots lie in the open interval ``(-bound, bound)``."""
    p = trim(p)
    if len(p) <= 1:
        return Fraction(1)
    lead = abs(p[-1])
    return 1 + max(abs(c) for c in p[:-1]) / lead


def sturm_sequence(p: Coeffs) -> list[Coeffs]:
    seq = [trim(p), derivative(p)]
    while seq[-1]:
        _, r = divmod_poly(seq[-2], seq[-1])
        if not r:
            break
        seq.append([-c for c in r])
    return [s for s in seq if s]


def _sign_changes(seq: list[Coeffs], x: Fraction) -> int:
    signs = [s for s in (sign_at(q, x) for q in seq) if s]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def count_roots(seq: list[Coeffs], a: Fraction, b: Fraction) -> int:
    """Distinct roots in ``(a, b]`` for a squarefree polynomial's Sturm sequence."""
    return _sign_changes(seq, a) - _sign_changes(seq, b)


@dataclass(frozen=True)
class RealRoot:
    """A real root of ``poly`` (squarefree) isolated in ``[lo, hi]``.

    ``exact`` is set when the root is rational; then ``lo == hi == exact``.
    """

    poly: tuple
    lo: Fraction
    hi: Fraction
    exact: Fraction | None = None

    def __float__(self) -> float:
        if self.exact is not None:
            return float(self.exact)
        return float((self.lo + self.hi) / 2)

    @property
    def is_rational(self) -> bool:
        return self.exact is not None

    def value(self):
        """Fraction when rational, else a float approximation."""
        return self.exact if self.exact is not None else float(self)

    def refine(self, width: Fraction) -> "RealRoot":
        if self.exact is not None:
            return self
        p = list(self.poly)
        lo, hi = self.lo, self.hi
        slo = sign_at(p, lo)
        while hi - lo > width:
            mid = (lo + hi) / 2
            s = sign_at(p, mid)
            if s == 0:
                return RealRoot(self.poly, mid, mid, mid)
            if s == slo:
                lo = mid
            else:
                hi = mid
        return RealRoot(self.poly, lo, hi, None)

    def sort_key(self) -> Fraction:
        return self.exact if self.exact is not None else self.lo


def _try_rational(p: Coeffs, lo: Fraction, hi: Fraction, lead: int):
    """Find the unique rational root with denominator dividing ``lead`` in ``(lo, hi)``."""
    slo = sign_at(p, lo)
    limit = Fraction(1, 2 * lead * lead)
    while hi - lo > limit:
        mid = (lo + hi) / 2
        s = sign_at(p, mid)
        if s == 0:
            return mid, lo, hi
        if s == slo:
            lo = mid
        else:
            hi = mid
    cand = ((lo + hi) / 2).limit_denominator(lead)
    if lo <= cand <= hi and horner(p, cand) == 0:
        return cand, lo, hi
    return None, lo, hi


def real_roots(p: Sequence, lo: Fraction | None = None, hi: Fraction | None = None,
               exact_rational: bool = True, max_lead: int = 10**12) -> list[RealRoot]:
    """Isolate all distinct real roots of ``p`` in ``[lo, hi]`` (whole line by default).

    Rational roots are returned exactly.  Irrational roots come back as
    isolating intervals.  The rational search is skipped when the integer
    leading coefficient exceeds ``max_lead`` (the root is then reported as an
    interval unless a bisection midpoint happens to hit it).
    """
    p = trim(p)
    if not p:
        raise ValueError("zero polynomial has infinitely many roots")
    if len(p) == 1:
        return []
    sf = squarefree(p)
    bound = cauchy_bound(sf)
    a = -bound if lo is None else Fraction(lo)
    b = bound if hi is None else Fraction(hi)
    if a > b:
        return []
    roots: list[RealRoot] = []
    key = tuple(sf)
    ints = integer_scaled(sf)
    lead = abs(ints[-1])
    # Fast path for linear factors.
    if len(sf) == 2:
        r = -sf[0] / sf[1]
        return [RealRoot(key, r, r, r)] if a <= r <= b else []
    seq = sturm_sequence(sf)
    if sign_at(sf, a) == 0:
        roots.append(RealRoot(key, a, a, a))
    stack = [(a, b)]
    while stack:
        u, v = stack.pop()
        c = count_roots(seq, u, v)
        if c == 0:
            continue
        if c == 1:
            if sign_at(sf, v) == 0:
                roots.append(RealRoot(key, v, v, v))
                continue
            # u itself may be a root counted by the neighbouring interval
            while sign_at(sf, u) == 0:
                mid = (u + v) / 2
                if sign_at(sf, mid) == 0:
                    u = v = mid
                    break
                if count_roots(seq, mid, v):
                    u = mid
                else:
                    v = mid
            if u == v:
                roots.append(RealRoot(key, u, u, u))
                continue
            exact = None
            if exact_rational and lead <= max_lead:
                exact, u, v = _try_rational(sf, u, v, lead)
            roots.append(RealRoot(key, exact, exact, exact) if exact is not None
                         else RealRoot(key, u, v, None))
            continue
        mid = (u + v) / 2
        stack.append((u, mid))
        stack.append((mid, v))
    roots.sort(key=lambda r: r.sort_key())
    return roots


def sign_at_root(q: Sequence, root: RealRoot) -> int:
    """Exact sign of ``q`` at the (possibly irrational) ``root``."""
    q = trim(q)
    if not q:
        return 0
    if root.exact is not None:
        return sign_at(q, root.exact)
    g = gcd(list(root.poly), q)
    if len(g) > 1:
        # q vanishes at root iff the common factor has a root inside the interval.
        gsf = squarefree(g)
        seq = sturm_sequence(gsf)
        if count_roots(seq, root.lo, root.hi) > 0 or sign_at(gsf, root.lo) == 0:
            return 0
    # q has no root at alpha; shrink until q has no root in the interval at all.
    qsf = squarefree(q)
    seq = sturm_sequence(qsf) if len(qsf) > 1 else None
    r = root
    while True:
        if seq is None or (count_roots(seq, r.lo, r.hi) == 0 and sign_at(qsf, r.lo) != 0):
            return sign_at(q, (r.lo + r.hi) / 2)
        r = r.refine((r.hi - r.lo) / 4)
        if r.exact is not None:
            return sign_at(q, r.exact)


def rational_between(a: RealRoot | Fraction, b: RealRoot | Fraction) -> Fraction:
    """A rational strictly between two distinct reals given exactly or by isolation."""
    def hi_of(x):
        return x if isinstance(x, Fraction) else (x.exact if x.exact is not None else x.hi)

    def lo_of(x):
        return x if isinstance(x, Fraction) else (x.exact if x.exact is not None else x.lo)

    while hi_of(a) >= lo_of(b):
        if isinstance(a, RealRoot) and a.exact is None:
            a = a.refine((a.hi - a.lo) / 4)
        if isinstance(b, RealRoot) and b.exact is None:
            b = b.refine((b.hi - b.lo) / 4)
        if (not isinstance(a, RealRoot) or a.exact is not None) and \
                (not isinstance(b, RealRoot) or b.exact is not None) and hi_of(a) >= lo_of(b):
            raise ValueError("values are not strictly increasing")
    return _simplest_between(hi_of(a), lo_of(b))


def _simplest_between(lo: Fraction, hi: Fraction) -> Fraction:
    """A low-denominator rational in the open interval ``(lo, hi)``."""
    mid = (lo + hi) / 2
    den = 1
    while True:
        cand = mid.limit_denominator(den)
        if lo < cand < hi:
            return cand
        den *= 2
