"""Semi-algebraic sets and functions: data model, membership, disjoint
decomposition, and exact reference evaluation of target functions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Iterable, Iterator, Sequence, Union

from .poly import Polynomial, as_fraction
from . import univariate as uv

ExtendedValue = Union[Fraction, float]  # float only for +-inf or irrational roots


class SpecError(ValueError):
    """A specification violates its stated invariants at some point."""


def _sign(v: Fraction) -> int:
    return (v > 0) - (v < 0)


@dataclass(frozen=True)
class BasicSet:
    """``{equality == 0 and q > 0 for q in strict}``."""

    num_vars: int
    equality: Polynomial
    strict: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "strict", tuple(self.strict))
        for p in (self.equality, *self.strict):
            if p.num_vars != self.num_vars:
                raise ValueError(f"polynomial has {p.num_vars} variables, expected {self.num_vars}")

    def contains(self, point: Sequence) -> bool:
        _check_dim(self.num_vars, point)
        if self.equality.evaluate(point) != 0:
            return False
        return all(q.evaluate(point) > 0 for q in self.strict)

    def polynomials(self) -> tuple:
        return (self.equality, *self.strict)

    @classmethod
    def never(cls, num_vars: int, width: int = 0) -> "BasicSet":
        one = Polynomial.constant(1, num_vars)
        return cls(num_vars, one, (one,) * width)


@dataclass(frozen=True)
class SASet:
    """Finite union of basic sets.  An empty union is the empty set."""

    num_vars: int
    pieces: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(self.pieces))
        for b in self.pieces:
            if b.num_vars != self.num_vars:
                raise ValueError("all pieces must share num_vars")

    def contains(self, point: Sequence) -> bool:
        _check_dim(self.num_vars, point)
        return any(b.contains(point) for b in self.pieces)

    @classmethod
    def of(cls, *pieces: BasicSet) -> "SASet":
        if not pieces:
            raise ValueError("use SASet(num_vars) for the empty set")
        return cls(pieces[0].num_vars, pieces)

    @classmethod
    def everything(cls, num_vars: int) -> "SASet":
        return cls(num_vars, (BasicSet(num_vars, Polynomial.zero(num_vars)),))

    def union(self, other: "SASet") -> "SASet":
        if other.num_vars != self.num_vars:
            raise ValueError("dimension mismatch")
        return SASet(self.num_vars, self.pieces + other.pieces)


@dataclass(frozen=True)
class ClosedSASet:
    """``union_i intersection_j {p_ij >= 0}``."""

    num_vars: int
    clauses: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(tuple(c) for c in self.clauses))
        for c in self.clauses:
            for p in c:
                if p.num_vars != self.num_vars:
                    raise ValueError("all clause polynomials must share num_vars")

    def contains(self, point: Sequence) -> bool:
        _check_dim(self.num_vars, point)
        return any(all(p.evaluate(point) >= 0 for p in c) for c in self.clauses)


@dataclass(frozen=True)
class GrowthBounds:
    """``|f(x)| <= B + ||x||**N`` with ``N`` even."""

    B: Fraction
    N: int

    def __post_init__(self):
        object.__setattr__(self, "B", as_fraction(self.B))
        if self.B <= 0:
            raise ValueError("B must be positive")
        if not isinstance(self.N, int) or self.N <= 0 or self.N % 2:
            raise ValueError("N must be a positive even integer")

    def factor(self, x: Sequence) -> Fraction:
        sq = sum((as_fraction(v) ** 2 for v in x), Fraction(0))
        return self.B + sq ** (self.N // 2)

    def factor_float(self, x: Sequence[float]) -> float:
        return float(self.B) + math.fsum(float(v) ** 2 for v in x) ** (self.N // 2)

    def polynomial(self, num_vars: int, n_upper: int) -> Polynomial:
        xs = Polynomial.variables(num_vars)
        sq = reduce(lambda a, b: a + b, (xs[i] * xs[i] for i in range(n_upper)),
                    Polynomial.zero(num_vars))
        return sq ** (self.N // 2) + self.B


@dataclass(frozen=True)
class SAFunctionSpec:
    """Extended-real-valued function: graph over ``n + 1`` variables (``t`` last)
    and the partition of the upper space into dom, dom_plus (value +inf) and
    dom_minus (value -inf)."""

    n: int
    graph: SASet
    dom: SASet
    dom_plus: SASet
    dom_minus: SASet
    bounds: GrowthBounds | None = None

    def __post_init__(self):
        if self.graph.num_vars != self.n + 1:
            raise ValueError("graph must live in n + 1 variables")
        for s in (self.dom, self.dom_plus, self.dom_minus):
            if s.num_vars != self.n:
                raise ValueError("domain sets must live in n variables")

    @classmethod
    def total(cls, graph: SASet, bounds: GrowthBounds | None = None) -> "SAFunctionSpec":
        """A real-valued function defined everywhere."""
        n = graph.num_vars - 1
        return cls(n, graph, SASet.everything(n), SASet(n), SASet(n), bounds)


@dataclass(frozen=True)
class PiecewisePolySpec:
    n: int
    cells: tuple
    polys: tuple
    closures: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        object.__setattr__(self, "polys", tuple(self.polys))
        if self.closures is not None:
            object.__setattr__(self, "closures", tuple(self.closures))
            if len(self.closures) != len(self.cells):
                raise ValueError("one closure per cell is required")
            if any(c.num_vars != self.n for c in self.closures):
                raise ValueError("closures must live in n variables")
        if len(self.cells) != len(self.polys):
            raise ValueError("cells and polys must have equal length")
        if not self.cells:
            raise ValueError("at least one cell is required")
        if any(c.num_vars != self.n for c in self.cells) or any(p.num_vars != self.n for p in self.polys):
            raise ValueError("cells and polys must live in n variables")


def _check_dim(n: int, point: Sequence) -> None:
    if len(point) != n:
        raise ValueError(f"point has dimension {len(point)}, expected {n}")


def member(s: BasicSet | SASet | ClosedSASet, point: Sequence) -> bool:
    """Exact membership by sign evaluation."""
    return s.contains([as_fraction(v) for v in point])


# -- normalisation ----------------------------------------------------------------

def _pad_piece(b: BasicSet, width: int) -> BasicSet:
    one = Polynomial.constant(1, b.num_vars)
    return BasicSet(b.num_vars, b.equality, b.strict + (one,) * (width - len(b.strict)))


def normalize_index_sets(spec):
    """Pad index sets so every piece (clause) has the same number of conditions.

    For function specs the graph and the three domain sets also get the same
    number of pieces, using never-satisfied pieces ``{1 = 0}``.  At least one
    inequality per piece is guaranteed.
    """
    if isinstance(spec, ClosedSASet):
        if not spec.clauses:
            return spec
        width = max(1, max(len(c) for c in spec.clauses))
        zero = Polynomial.zero(spec.num_vars)
        return ClosedSASet(spec.num_vars, [tuple(c) + (zero,) * (width - len(c)) for c in spec.clauses])
    if isinstance(spec, SASet):
        width = max([1] + [len(b.strict) for b in spec.pieces])
        return SASet(spec.num_vars, [_pad_piece(b, width) for b in spec.pieces])
    if isinstance(spec, SAFunctionSpec):
        sets = [spec.graph, spec.dom, spec.dom_plus, spec.dom_minus]
        width = max([1] + [len(b.strict) for s in sets for b in s.pieces])
        count = max(1, max(len(s.pieces) for s in sets))

        def fix(s: SASet) -> SASet:
            pieces = [_pad_piece(b, width) for b in s.pieces]
            pieces += [BasicSet.never(s.num_vars, width)] * (count - len(pieces))
            return SASet(s.num_vars, pieces)

        return SAFunctionSpec(spec.n, fix(spec.graph), fix(spec.dom), fix(spec.dom_plus),
                              fix(spec.dom_minus), spec.bounds)
    raise TypeError(f"cannot normalise {type(spec).__name__}")


def is_normalized(spec: SAFunctionSpec) -> bool:
    sets = [spec.graph, spec.dom, spec.dom_plus, spec.dom_minus]
    counts = {len(s.pieces) for s in sets}
    widths = {len(b.strict) for s in sets for b in s.pieces}
    return len(counts) == 1 and len(widths) == 1 and counts != {0} and widths != {0}


# -- disjoint decomposition ---------------------------------------------------

def _canonical(p: Polynomial) -> Polynomial | None:
    """Positive scalar multiple with leading coefficient 1 (``None`` for constants)."""
    if p.is_constant():
        return None
    _, lead = p.leading_term()
    return p * (1 / lead)


def pooled_family(s: SASet) -> list[Polynomial]:
    """Distinct non-constant polynomials of ``s`` up to nonzero scaling, in first-seen order."""
    seen: dict[Polynomial, None] = {}
    for b in s.pieces:
        for p in b.polynomials():
            c = _canonical(p)
            if c is not None and c not in seen:
                seen[c] = None
    return list(seen)


def _piece_requirements(b: BasicSet, index: dict) -> list[tuple[int, frozenset]] | None:
    """Allowed signs per family member for ``b``; ``None`` when ``b`` is empty."""
    reqs: dict[int, set] = {}

    def need(p: Polynomial, allowed: set[int]) -> bool:
        if p.is_constant():
            return _sign(p.constant_value()) in allowed
        _, lead = p.leading_term()
        flip = 1 if lead > 0 else -1
        k = index[_canonical(p)]
        signs = {flip * a for a in allowed}
        reqs[k] = reqs.get(k, {-1, 0, 1}) & signs
        return True

    if not need(b.equality, {0}):
        return None
    for q in b.strict:
        if not need(q, {1}):
            return None
    if any(not v for v in reqs.values()):
        return None
    return [(k, frozenset(v)) for k, v in reqs.items()]


def sign_cells(s: SASet) -> Iterator[tuple[int, ...]]:
    """Lazily yield sign vectors over the pooled family consistent with some piece of ``s``.

    Each vector is emitted once.  Signs are ``-1``, ``0`` or ``1``.
    """
    family = pooled_family(s)
    index = {p: i for i, p in enumerate(family)}
    reqs = [r for r in (_piece_requirements(b, index) for b in s.pieces) if r is not None]
    per_piece = [dict(r) for r in reqs]
    n = len(family)
    if not per_piece:
        return

    def rec(prefix: list[int], alive: list[dict]):
        i = len(prefix)
        if i == n:
            yield tuple(prefix)
            return
        for sgn in (1, 0, -1):
            still = [r for r in alive if sgn in r.get(i, (-1, 0, 1))]
            if still:
                prefix.append(sgn)
                yield from rec(prefix, still)
                prefix.pop()

    yield from rec([], per_piece)


def cell_to_basic(family: Sequence[Polynomial], signs: Sequence[int], num_vars: int) -> BasicSet:
    eq = Polynomial.zero(num_vars)
    strict = []
    for h, sg in zip(family, signs):
        if sg == 0:
            eq = eq + h * h
        elif sg > 0:
            strict.append(h)
        else:
            strict.append(-h)
    return BasicSet(num_vars, eq, tuple(strict))


def iter_disjoint_cells(s: SASet) -> Iterator[BasicSet]:
    family = pooled_family(s)
    for signs in sign_cells(s):
        yield cell_to_basic(family, signs, s.num_vars)


def disjointify(s: SASet, cap: int = 16) -> list[BasicSet]:
    """Pairwise disjoint basic sets whose union is ``s``.

    Cells are sign conditions over the pooled family of ``s``.  Geometric
    non-emptiness is not decided; an emitted cell may be empty.
    """
    family = pooled_family(s)
    if len(family) > cap:
        raise SpecError(f"pooled family has {len(family)} polynomials, above the cap {cap}")
    return list(iter_disjoint_cells(s))


# -- univariate fibres --------------------------------------------------------

def _fiber_poly(p: Polynomial, x: Sequence[Fraction]) -> list[Fraction]:
    """Restrict ``p(x, t)`` to a univariate polynomial in the last variable."""
    n = p.num_vars - 1
    sub = p.partial({i: x[i] for i in range(n)})
    return uv.trim(sub.univariate(n))


@dataclass(frozen=True)
class _Candidate:
    kind: str  # "ray-", "root", "gap", "ray+", "point"
    at: object  # Fraction | RealRoot

    def sign_of(self, coeffs: list[Fraction]) -> int:
        if isinstance(self.at, uv.RealRoot):
            return uv.sign_at_root(coeffs, self.at)
        return uv.sign_at(coeffs, self.at)


def _candidates(polys: list[list[Fraction]], window: tuple | None) -> list[_Candidate]:
    """Sample points covering every sign configuration of ``polys`` on the line."""
    roots: list[uv.RealRoot] = []
    for c in polys:
        if len(c) > 1:
            for r in uv.real_roots(c):
                if not any(_same_root(r, q) for q in roots):
                    roots.append(r)
    roots = _sorted_roots(roots)
    lo, hi = (None, None) if window is None else (as_fraction(window[0]), as_fraction(window[1]))
    pts: list = []
    if lo is not None:
        pts.append(lo)
    pts += [r for r in roots if (lo is None or _root_ge(r, lo)) and (hi is None or _root_le(r, hi))]
    if hi is not None:
        pts.append(hi)
    # deduplicate exact window endpoints coinciding with roots
    clean: list = []
    for p in pts:
        if clean and _equal(clean[-1], p):
            continue
        clean.append(p)
    out: list[_Candidate] = []
    if lo is None:
        first = clean[0] if clean else None
        out.append(_Candidate("ray-", (_lower(first) - 1) if first is not None else Fraction(-1)))
    for a, b in zip(clean, clean[1:]):
        out.append(_Candidate("root" if isinstance(a, uv.RealRoot) else "point", a))
        out.append(_Candidate("gap", uv.rational_between(a, b)))
    if clean:
        last = clean[-1]
        out.append(_Candidate("root" if isinstance(last, uv.RealRoot) else "point", last))
    if hi is None:
        last = clean[-1] if clean else None
        out.append(_Candidate("ray+", (_upper(last) + 1) if last is not None else Fraction(1)))
    return out


def _lower(v) -> Fraction:
    return v if isinstance(v, Fraction) else (v.exact if v.exact is not None else v.lo)


def _upper(v) -> Fraction:
    return v if isinstance(v, Fraction) else (v.exact if v.exact is not None else v.hi)


def _equal(a, b) -> bool:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    if isinstance(a, Fraction):
        return uv.sign_at_root([-a, Fraction(1)], b) == 0
    if isinstance(b, Fraction):
        return uv.sign_at_root([-b, Fraction(1)], a) == 0
    return _same_root(a, b)


def _root_ge(r: uv.RealRoot, v: Fraction) -> bool:
    return uv.sign_at_root([-v, Fraction(1)], r) >= 0


def _root_le(r: uv.RealRoot, v: Fraction) -> bool:
    return uv.sign_at_root([-v, Fraction(1)], r) <= 0


def _same_root(a: uv.RealRoot, b: uv.RealRoot) -> bool:
    if a.exact is not None and b.exact is not None:
        return a.exact == b.exact
    if a.exact is not None:
        return uv.sign_at_root(list(b.poly), a) == 0 and _root_ge(b, a.exact) and _root_le(b, a.exact)
    if b.exact is not None:
        return _same_root(b, a)
    lo, hi = max(a.lo, b.lo), min(a.hi, b.hi)
    if lo > hi:
        return False
    return uv.sign_at_root(list(b.poly), a) == 0 and uv.sign_at_root(list(a.poly), b) == 0 and \
        _overlap_unique(a, b)


def _overlap_unique(a: uv.RealRoot, b: uv.RealRoot) -> bool:
    # Both are roots of the common factor g.  Equal roots keep overlapping
    # intervals forever; distinct ones separate after enough refinement.
    g = uv.squarefree(uv.gcd(list(a.poly), list(b.poly)))
    seq = uv.sturm_sequence(g)
    while True:
        if max(a.lo, b.lo) > min(a.hi, b.hi):
            return False
        lo, hi = min(a.lo, b.lo), max(a.hi, b.hi)
        if uv.count_roots(seq, lo, hi) + (uv.sign_at(g, lo) == 0) == 1:
            return True
        a = a.refine((a.hi - a.lo) / 4)
        b = b.refine((b.hi - b.lo) / 4)


def _sorted_roots(roots: list[uv.RealRoot]) -> list[uv.RealRoot]:
    def key(r):
        return r.exact if r.exact is not None else r.lo

    # Refine until isolating intervals are disjoint so ordering by lower end is valid.
    changed = True
    while changed:
        changed = False
        roots = sorted(roots, key=key)
        for i in range(len(roots) - 1):
            a, b = roots[i], roots[i + 1]
            if _upper(a) >= _lower(b):
                roots[i] = a.refine((a.hi - a.lo) / 4) if a.exact is None else a
                roots[i + 1] = b.refine((b.hi - b.lo) / 4) if b.exact is None else b
                changed = True
    return roots


def _export(v):
    if isinstance(v, uv.RealRoot):
        return v.value()
    return v


def _refined_value(v, tol: float):
    if isinstance(v, uv.RealRoot) and v.exact is None:
        return v.refine(min(Fraction(tol), Fraction(1, 2**64))).value()
    return _export(v)


def closure_fiber_extrema(closed: ClosedSASet, x: Sequence, window: tuple | None = None,
                          keep_roots: bool = False):
    """(min, max) of ``{t : (x, t) in closed}``, optionally intersected with ``window``.

    Returns ``None`` for an empty fibre and ``-inf``/``inf`` for unbounded
    directions.  Values are exact Fractions for rational endpoints; with
    ``keep_roots`` irrational endpoints stay as :class:`RealRoot` objects.
    """
    xs = [as_fraction(v) for v in x]
    if len(xs) != closed.num_vars - 1:
        raise ValueError("point dimension must be num_vars - 1")
    clauses = [[_fiber_poly(p, xs) for p in c] for c in closed.clauses]
    cands = _candidates([p for c in clauses for p in c], window)

    def inside(cand: _Candidate) -> bool:
        return any(all(cand.sign_of(p) >= 0 for p in c) for c in clauses)

    members = [c for c in cands if inside(c)]
    if not members:
        return None
    first, last = members[0], members[-1]
    lo = -math.inf if first.kind == "ray-" else first.at
    hi = math.inf if last.kind == "ray+" else last.at
    if first.kind == "gap" or last.kind == "gap":
        raise SpecError("fibre is not closed at this point")
    if keep_roots:
        return lo, hi
    return _export(lo), _export(hi)


def graph_fiber(spec_graph: SASet, x: Sequence, window: tuple | None = None) -> list:
    """Distinct values ``t`` (Fraction or RealRoot) with ``(x, t)`` in the graph."""
    xs = [as_fraction(v) for v in x]
    found: list = []
    for piece in spec_graph.pieces:
        eq = _fiber_poly(piece.equality, xs)
        strict = [_fiber_poly(q, xs) for q in piece.strict]
        if not eq:
            # the equality holds for all t: the strict set must be empty on the line
            cands = _candidates(strict, None)
            if any(all(c.sign_of(q) > 0 for q in strict) for c in cands):
                raise SpecError(f"graph fibre at x={x} contains an interval")
            continue
        if len(eq) == 1:
            continue
        lo = None if window is None else as_fraction(window[0])
        hi = None if window is None else as_fraction(window[1])
        for r in uv.real_roots(eq, lo, hi):
            if all(uv.sign_at_root(q, r) > 0 for q in strict):
                if not any(_equal(r, f) for f in found):
                    found.append(r)
    return found


def target_eval(spec: SAFunctionSpec, x: Sequence, t_window: tuple | None = None,
                tol: float = 1e-12) -> ExtendedValue:
    """Reference value of the function described by ``spec`` at ``x``.

    Rational values are exact.  An irrational value is returned as a float
    accurate to ``tol``.  Without ``t_window`` the growth-bounds window is
    used when bounds are attached; otherwise every real root is considered.
    """
    xs = [as_fraction(v) for v in x]
    _check_dim(spec.n, xs)
    hits = [spec.dom.contains(xs), spec.dom_plus.contains(xs), spec.dom_minus.contains(xs)]
    if sum(hits) != 1:
        raise SpecError(f"x={x} lies in {sum(hits)} of the three domain sets")
    if hits[1]:
        return math.inf
    if hits[2]:
        return -math.inf
    if t_window is None and spec.bounds is not None:
        d = spec.bounds.factor(xs)
        t_window = (-d, d)
    found = graph_fiber(spec.graph, xs, t_window)
    if not found:
        raise SpecError(f"no graph value at x={x} inside the window {t_window}")
    if len(found) > 1:
        raise SpecError(f"graph has {len(found)} values at x={x}")
    return _refined_value(found[0], tol)


def piecewise_cell(spec: PiecewisePolySpec, x: Sequence) -> int:
    xs = [as_fraction(v) for v in x]
    idx = [i for i, c in enumerate(spec.cells) if c.contains(xs)]
    if len(idx) != 1:
        raise SpecError(f"x={x} lies in {len(idx)} cells")
    return idx[0]


def piecewise_eval(spec: PiecewisePolySpec, x: Sequence) -> Fraction:
    xs = [as_fraction(v) for v in x]
    return spec.polys[piecewise_cell(spec, xs)].evaluate(xs)


@dataclass
class PartitionReport:
    checked: int = 0
    uncovered: list = field(default_factory=list)
    overlapping: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.uncovered and not self.overlapping


def validate_partition(spec: PiecewisePolySpec, sample_plan: Iterable[Sequence]) -> PartitionReport:
    """Flag sample points lying in no cell or in several cells."""
    report = PartitionReport()
    for pt in sample_plan:
        xs = [as_fraction(v) for v in pt]
        idx = [i for i, c in enumerate(spec.cells) if c.contains(xs)]
        report.checked += 1
        if not idx:
            report.uncovered.append(tuple(xs))
        elif len(idx) > 1:
            report.overlapping.append((tuple(xs), tuple(idx)))
    return report


def validate_domains(spec: SAFunctionSpec, sample_plan: Iterable[Sequence]) -> list:
    """Sample points that do not lie in exactly one of dom, dom_plus, dom_minus."""
    bad = []
    for pt in sample_plan:
        xs = [as_fraction(v) for v in pt]
        k = spec.dom.contains(xs) + spec.dom_plus.contains(xs) + spec.dom_minus.contains(xs)
        if k != 1:
            bad.append((tuple(xs), k))
    return bad


def grid_points(lo, hi, count: int) -> list[Fraction]:
    """``count`` equally spaced rationals from ``lo`` to ``hi`` inclusive."""
    lo, hi = as_fraction(lo), as_fraction(hi)
    if count == 1:
        return [lo]
    return [lo + (hi - lo) * Fraction(k, count - 1) for k in range(count)]


def default_sample_plan(n: int, lo=-2, hi=2, seed: int = 0, count: int = 200) -> list[tuple]:
    """Deterministic rational sample points in the cube ``[lo, hi]**n``.

    A full grid for ``n <= 2`` and seeded random dyadic points otherwise.
    """
    if n == 1:
        return [(v,) for v in grid_points(lo, hi, 41)]
    if n == 2:
        g = grid_points(lo, hi, 11)
        return [(a, b) for a in g for b in g]
    import numpy as np

    rng = np.random.default_rng(seed)
    lo_f, hi_f = as_fraction(lo), as_fraction(hi)
    raw = rng.integers(0, 2**10 + 1, size=(count, n))
    return [tuple(lo_f + (hi_f - lo_f) * Fraction(int(k), 2**10) for k in row) for row in raw]
