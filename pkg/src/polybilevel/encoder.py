"""Compilers from target-function specifications to polynomial bilevel programs.

Every program uses the variable order ``(x_0..x_{n-1}, y_0..y_{m-1})``: upper
variables first, then lower variables.  The ``roles`` table in the metadata
maps each role name to its lower-variable indices.

Pessimistic programs are obtained from the optimistic construction for the
negated target followed by :func:`pessimize`, using
``sup_Theta P = -inf_Theta (-P)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import reduce
from typing import Any, Sequence

from .poly import (MonomialBasis, Polynomial, PolyExpr, as_fraction, embed, monomial_map,
                   pprod, psum)
from .semialg import (BasicSet, ClosedSASet, GrowthBounds, PiecewisePolySpec, SAFunctionSpec,
                      SASet, SpecError, closure_fiber_extrema, default_sample_plan, disjointify,
                      is_normalized, normalize_index_sets, piecewise_eval)

OPTIMISTIC = "optimistic"
PESSIMISTIC = "pessimistic"
MODES = (OPTIMISTIC, PESSIMISTIC)

INF = math.inf


class BoundsError(ValueError):
    """Growth bounds do not dominate the target at some sampled point."""


@dataclass(frozen=True)
class BilevelProgram:
    """``phi(x) = inf/sup { P(x, y) : y in argmin_{y in box} Q(x, y) }``."""

    n: int
    m: int
    P: Any  # Polynomial | PolyExpr over n + m variables
    Q: Any
    box: tuple  # ((lo, hi), ...) with Fraction or +-inf entries
    mode: str = OPTIMISTIC
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "box", tuple((_bound(lo), _bound(hi)) for lo, hi in self.box))
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.P.num_vars != self.n + self.m or self.Q.num_vars != self.n + self.m:
            raise ValueError("P and Q must live in n + m variables")
        if len(self.box) != self.m:
            raise ValueError("box needs one bound pair per lower variable")
        for lo, hi in self.box:
            if lo > hi:
                raise ValueError(f"empty box interval [{lo}, {hi}]")
        roles = self.metadata.get("roles")
        if roles is not None:
            idx = sorted(i for v in roles.values() for i in v)
            if idx != list(range(self.m)):
                raise ValueError("roles must partition the lower coordinates")

    @property
    def construction(self) -> str | None:
        return self.metadata.get("construction")

    @property
    def bounded(self) -> bool:
        return all(math.isfinite(lo) and math.isfinite(hi) for lo, hi in self.box)

    @property
    def sign(self) -> int:
        return self.metadata.get("sign", 1)

    def point(self, x: Sequence, y: Sequence) -> list:
        if len(x) != self.n or len(y) != self.m:
            raise ValueError("dimension mismatch")
        return list(x) + list(y)

    def lower_slice(self, role: str) -> list[int]:
        return list(self.metadata["roles"][role])


def _bound(v):
    if isinstance(v, str):
        if v in ("-inf", "+inf", "inf"):
            return -INF if v.startswith("-") else INF
        return Fraction(v)
    if isinstance(v, float):
        if math.isinf(v):
            return v
        raise TypeError("finite box bounds must be exact rationals")
    return as_fraction(v)


def _roles(layout: Sequence[tuple[str, int]]) -> dict[str, list[int]]:
    out: dict[str, list[int]] = {}
    k = 0
    for name, size in layout:
        out[name] = list(range(k, k + size))
        k += size
    return out


def pessimize(prog: BilevelProgram) -> BilevelProgram:
    """Negate ``P`` and flip the mode, so that the new value is minus the old one."""
    meta = dict(prog.metadata)
    meta["sign"] = -meta.get("sign", 1)
    mode = PESSIMISTIC if prog.mode == OPTIMISTIC else OPTIMISTIC
    neg = -prog.P if isinstance(prog.P, Polynomial) else pprod(Polynomial.constant(-1, prog.P.num_vars), prog.P)
    return BilevelProgram(prog.n, prog.m, neg, prog.Q, prog.box, mode, meta)


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")


# -- unbounded construction for extended-real-valued functions -----------------

def _reflect_t(p: Polynomial) -> Polynomial:
    n = p.num_vars - 1
    return p.substitute(n, -Polynomial.variable(n, p.num_vars))


def negate_spec(spec: SAFunctionSpec) -> SAFunctionSpec:
    """Specification of ``-f``: graph reflected in ``t`` and infinite parts swapped."""
    graph = SASet(spec.graph.num_vars, [
        BasicSet(b.num_vars, _reflect_t(b.equality), tuple(_reflect_t(q) for q in b.strict))
        for b in spec.graph.pieces])
    return SAFunctionSpec(spec.n, graph, spec.dom, spec.dom_minus, spec.dom_plus, spec.bounds)


def sa_block_product(polys_eq: Sequence[Polynomial], polys_strict: Sequence[Sequence[Polynomial]],
                     total: int, aux: Sequence[Sequence[int]]):
    """``prod_i (E_i**2 + sum_j (1 - S_ij * a_ij**2)**2)`` over ``total`` variables."""
    factors = []
    for e, row, idx in zip(polys_eq, polys_strict, aux):
        acc = e * e
        for s, k in zip(row, idx):
            a = Polynomial.variable(k, total)
            g = 1 - s * a * a
            acc = acc + g * g
        factors.append(acc)
    return pprod(*factors)


def sa_factors(spec: SAFunctionSpec) -> dict[str, Any]:
    """The factors ``F, H, H+, H-`` of the unbounded construction (optimistic layout)."""
    n = spec.n
    I = len(spec.graph.pieces)
    J = len(spec.graph.pieces[0].strict)
    m = 4 * I * J + 3
    total = n + m
    roles = _roles([("t", 1), ("z", I * J), ("nu", I * J), ("nu+", I * J), ("nu-", I * J),
                    ("u", 1), ("v", 1)])
    up = list(range(n))
    graph_map = up + [n + roles["t"][0]]

    def grid(role):
        ids = [n + k for k in roles[role]]
        return [ids[i * J:(i + 1) * J] for i in range(I)]

    def domain(s: SASet, role: str):
        return sa_block_product([embed(b.equality, total, up) for b in s.pieces],
                                [[embed(q, total, up) for q in b.strict] for b in s.pieces],
                                total, grid(role))

    F = sa_block_product([embed(b.equality, total, graph_map) for b in spec.graph.pieces],
                         [[embed(q, total, graph_map) for q in b.strict] for b in spec.graph.pieces],
                         total, grid("z"))
    return {"F": F, "H": domain(spec.dom, "nu"), "H+": domain(spec.dom_plus, "nu+"),
            "H-": domain(spec.dom_minus, "nu-"), "roles": roles, "m": m, "I": I, "J": J}


def encode_sa_unbounded(spec: SAFunctionSpec, mode: str = OPTIMISTIC) -> BilevelProgram:
    """Unconstrained lower level whose value function is the target.

    Lower variables are ``(t, z, nu, nu+, nu-, u, v)``; ``P = t`` and
    ``Q = H+ H- F + H H- u**2 + (1 - u v)**2``.
    """
    _check_mode(mode)
    if mode == PESSIMISTIC:
        prog = encode_sa_unbounded(negate_spec(spec), OPTIMISTIC)
        prog.metadata["target_negated"] = True
        return pessimize(prog)
    if not spec.graph.pieces:
        raise SpecError("graph has no pieces")
    if not is_normalized(spec):
        raise SpecError("index sets differ between pieces; apply normalize_index_sets first")
    fac = sa_factors(spec)
    n, m, roles = spec.n, fac["m"], fac["roles"]
    total = n + m
    t = Polynomial.variable(n + roles["t"][0], total)
    u = Polynomial.variable(n + roles["u"][0], total)
    v = Polynomial.variable(n + roles["v"][0], total)
    gadget = (1 - u * v) ** 2
    Q = psum(pprod(fac["H+"], fac["H-"], fac["F"]), pprod(fac["H"], fac["H-"], u * u), gadget)
    meta = {"construction": "sa-unbounded", "roles": roles, "sign": 1, "spec": spec,
            "index_sets": {"I": fac["I"], "J": fac["J"]}}
    return BilevelProgram(n, m, t, Q, [(-INF, INF)] * m, OPTIMISTIC, meta)


# -- bounded-box construction for lower semicontinuous functions -----------------

def normalize_range(fval, x: Sequence, bounds: GrowthBounds, direction: str = "forward"):
    """Divide (``forward``) or multiply (``backward``) by ``B + ||x||**N``.

    Infinite values pass through.  The forward map raises
    :class:`BoundsError` if the result leaves ``[-1, 1]``.
    """
    if isinstance(fval, float) and math.isinf(fval):
        return fval
    d = bounds.factor(x)
    if direction == "forward":
        out = fval / d
        if abs(out) > 1:
            raise BoundsError(f"|f(x)| = {abs(fval)} exceeds B + ||x||^N = {d} at x={tuple(x)}")
        return out
    if direction == "backward":
        return fval * d
    raise ValueError("direction must be 'forward' or 'backward'")


def reflect_closure(closed: ClosedSASet) -> ClosedSASet:
    return ClosedSASet(closed.num_vars, [tuple(_reflect_t(p) for p in c) for c in closed.clauses])


def scaled_closure(closed: ClosedSASet, bounds: GrowthBounds) -> ClosedSASet:
    """Closure of the graph of ``f / D`` given that of ``f``: substitute ``t -> t * D(x)``."""
    n = closed.num_vars - 1
    d = bounds.polynomial(closed.num_vars, n)
    t = Polynomial.variable(n, closed.num_vars)
    return ClosedSASet(closed.num_vars, [tuple(p.substitute(n, t * d) for p in c) for c in closed.clauses])


def validate_closure_bounds(closed: ClosedSASet, bounds: GrowthBounds, sample_plan) -> None:
    """Every sampled fibre must be non-empty and inside ``[-D(x), D(x)]``."""
    for x in sample_plan:
        ext = closure_fiber_extrema(closed, x)
        if ext is None:
            raise BoundsError(f"closure fibre is empty at x={tuple(x)}")
        d = bounds.factor(x)
        lo, hi = ext
        if lo < -d or hi > d:
            raise BoundsError(f"closure fibre [{lo}, {hi}] leaves [-{d}, {d}] at x={tuple(x)}")


def lsc_block(p: Polynomial, z: Polynomial) -> Polynomial:
    """``(p - (p**2 + 1) z)**2``: zero at ``z = p / (p**2 + 1)`` when ``p >= 0``."""
    g = p - (p * p + 1) * z
    return g * g


def encode_lsc_bounded(graph_closure: ClosedSASet, bounds: GrowthBounds, mode: str = OPTIMISTIC,
                       sample_plan=None) -> BilevelProgram:
    """Bounded-box program for a lower semicontinuous target given the closure of its graph.

    The target is rescaled into ``[-1, 1]`` by ``D(x) = B + ||x||**N``; the
    program's ``P = t * D(x)`` undoes the rescaling.  Lower box is
    ``[-1, 1] x [0, 1/2]**(I*J)``.  Pessimistic mode yields the upper
    semicontinuous target with the same closure.
    """
    _check_mode(mode)
    if not graph_closure.clauses:
        raise SpecError("closure has no clauses")
    n = graph_closure.num_vars - 1
    if sample_plan is None:
        sample_plan = default_sample_plan(n)
    validate_closure_bounds(graph_closure, bounds, sample_plan)
    if mode == PESSIMISTIC:
        prog = encode_lsc_bounded(reflect_closure(graph_closure), bounds, OPTIMISTIC, [])
        prog.metadata["target_negated"] = True
        prog.metadata["target_closure"] = graph_closure
        return pessimize(prog)
    closed = normalize_index_sets(graph_closure)
    scaled = scaled_closure(closed, bounds)
    I, J = len(closed.clauses), len(closed.clauses[0])
    m = 1 + I * J
    total = n + m
    up_t = list(range(n + 1))
    blocks = []
    for i, clause in enumerate(scaled.clauses):
        acc = Polynomial.zero(total)
        for j, p in enumerate(clause):
            z = Polynomial.variable(n + 1 + i * J + j, total)
            acc = acc + lsc_block(embed(p, total, up_t), z)
        blocks.append(acc)
    Q = pprod(*blocks)
    t = Polynomial.variable(n, total)
    P = t * bounds.polynomial(total, n)
    box = [(Fraction(-1), Fraction(1))] + [(Fraction(0), Fraction(1, 2))] * (I * J)
    meta = {"construction": "lsc-bounded", "roles": _roles([("t", 1), ("z", I * J)]), "sign": 1,
            "closure": closed, "bounds": bounds, "index_sets": {"I": I, "J": J}}
    return BilevelProgram(n, m, P, Q, box, OPTIMISTIC, meta)


# -- convex lower level: indicator functions --------------------------------------

def pad_basic(s: BasicSet) -> BasicSet:
    if s.strict:
        return s
    return BasicSet(s.num_vars, s.equality, (Polynomial.constant(1, s.num_vars),))


def indicator_parts(s: BasicSet, total: int, up: Sequence[int], offset: int):
    """``(F, G, roles)`` for the indicator of ``s`` with lower variables starting at ``offset``.

    Lower layout: ``w`` (J entries, in [0, 1]), ``z`` (J, free), ``t`` (1, free).
    """
    s = pad_basic(s)
    J = len(s.strict)
    P = embed(s.equality, total, up)
    qs = [embed(q, total, up) for q in s.strict]
    w = [Polynomial.variable(offset + j, total) for j in range(J)]
    z = [Polynomial.variable(offset + J + j, total) for j in range(J)]
    t = Polynomial.variable(offset + 2 * J, total)
    head = 1 - t * P
    F = reduce(lambda a, b: a * b, (w[j] * z[j] * qs[j] for j in range(J)), head)
    G = head * head
    for j in range(J):
        r = 1 - qs[j] * z[j]
        G = G + r * r - qs[j] * w[j]
    return F, G, J


def encode_indicator_convex(s: BasicSet, mode: str = OPTIMISTIC) -> BilevelProgram:
    """Convex lower level whose value function is the indicator of ``s`` in either mode."""
    _check_mode(mode)
    s = pad_basic(s)
    n = s.num_vars
    J = len(s.strict)
    m = 2 * J + 1
    total = n + m
    F, G, _ = indicator_parts(s, total, list(range(n)), n)
    box = [(Fraction(0), Fraction(1))] * J + [(-INF, INF)] * (J + 1)
    meta = {"construction": "indicator", "roles": _roles([("w", J), ("z", J), ("t", 1)]),
            "sign": 1, "set": s}
    return BilevelProgram(n, m, F, G, box, mode, meta)


def encode_piecewise_unbounded(spec: PiecewisePolySpec, mode: str = OPTIMISTIC,
                               cap: int = 16) -> BilevelProgram:
    """Sum of indicator blocks over disjoint basic cells, weighted by the piece polynomials."""
    _check_mode(mode)
    n = spec.n
    cells: list[tuple[int, BasicSet]] = []
    for i, cell in enumerate(spec.cells):
        for b in disjointify(cell, cap=cap):
            cells.append((i, pad_basic(b)))
    if not cells:
        raise SpecError("no cells to encode")
    sizes = [2 * len(b.strict) + 1 for _, b in cells]
    m = sum(sizes)
    total = n + m
    up = list(range(n))
    P_terms: list = []
    Q = Polynomial.zero(total)
    offset = n
    blocks = []
    role_w, role_z, role_t = [], [], []
    for (i, b), size in zip(cells, sizes):
        F, G, J = indicator_parts(b, total, up, offset)
        P_terms.append(embed(spec.polys[i], total, up) * F)
        Q = Q + G
        base = offset - n
        role_w += list(range(base, base + J))
        role_z += list(range(base + J, base + 2 * J))
        role_t.append(base + 2 * J)
        blocks.append({"piece": i, "set": b, "offset": base})
        offset += size
    P = reduce(lambda a, c: a + c, P_terms)
    box = []
    for _, b in cells:
        J = len(b.strict)
        box += [(Fraction(0), Fraction(1))] * J + [(-INF, INF)] * (J + 1)
    meta = {"construction": "piecewise-unbounded", "roles": {"w": role_w, "z": role_z, "t": role_t},
            "sign": 1, "spec": spec, "blocks": blocks}
    return BilevelProgram(n, m, P, Q, box, mode, meta)


# -- convex lower level over a bounded box: semicontinuous piecewise polynomials --

def _closure_layout(closures: Sequence[ClosedSASet], n: int) -> list[list[tuple]]:
    """Pad every closure to the same number of clauses and clause length."""
    if any(not c.clauses for c in closures):
        raise SpecError("every closure needs at least one clause")
    J = max(len(c.clauses) for c in closures)
    K = max(1, max(len(cl) for c in closures for cl in c.clauses))
    zero = Polynomial.zero(n)
    never = (Polynomial.constant(-1, n),)
    out = []
    for c in closures:
        clauses = [tuple(cl) + (zero,) * (K - len(cl)) for cl in c.clauses]
        clauses += [never + (zero,) * (K - 1)] * (J - len(clauses))
        out.append(clauses)
    return out


def check_minimum_selection(spec: PiecewisePolySpec, sample_plan, largest: bool = False) -> list:
    """Points where ``f(x)`` differs from the min (max) of the pieces whose closure holds ``x``."""
    bad = []
    pick = max if largest else min
    for x in sample_plan:
        try:
            fx = piecewise_eval(spec, x)
        except SpecError:
            bad.append((tuple(x), None))
            continue
        vals = [p.evaluate(x) for p, c in zip(spec.polys, spec.closures) if c.contains(list(x))]
        if not vals or pick(vals) != fx:
            bad.append((tuple(x), fx))
    return bad


def encode_pw_lsc_bounded(spec: PiecewisePolySpec, bounds: GrowthBounds, mode: str = OPTIMISTIC,
                          sample_plan=None) -> BilevelProgram:
    """Convex lower level over ``[0, 1]**m`` for a semicontinuous piecewise polynomial.

    Optimistic mode expects a lower semicontinuous target, pessimistic an upper
    semicontinuous one.  A sampled check of that assumption only warns.
    """
    _check_mode(mode)
    if spec.closures is None:
        raise SpecError("closures are required for the bounded-box construction")
    n = spec.n
    if sample_plan is None:
        sample_plan = default_sample_plan(n)
    sample_plan = list(sample_plan)
    bad = check_minimum_selection(spec, sample_plan, largest=(mode == PESSIMISTIC))
    if bad:
        warnings.warn(f"target does not match the {'max' if mode == PESSIMISTIC else 'min'}"
                      f"-selection rule at {len(bad)} sampled points, e.g. x={bad[0][0]}",
                      RuntimeWarning, stacklevel=2)
    if mode == PESSIMISTIC:
        neg = PiecewisePolySpec(n, spec.cells, tuple(-p for p in spec.polys), spec.closures)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            prog = encode_pw_lsc_bounded(neg, bounds, OPTIMISTIC, sample_plan)
        prog.metadata["target_negated"] = True
        prog.metadata["target_spec"] = spec
        return pessimize(prog)
    for x in sample_plan:
        d = bounds.factor(x)
        for p in spec.polys:
            if p.evaluate(x) > d:
                raise BoundsError(f"piece value {p.evaluate(x)} exceeds B + ||x||^N = {d} at x={tuple(x)}")
    layout = _closure_layout(spec.closures, n)
    I, J, K = len(layout), len(layout[0]), len(layout[0][0])
    nz, ns = I * J * K, I * J
    m = nz + ns
    total = n + m
    up = list(range(n))
    D = bounds.polynomial(total, n)

    def zvar(i, j, k):
        return Polynomial.variable(n + (i * J + j) * K + k, total)

    def svar(i, j):
        return Polynomial.variable(n + nz + i * J + j, total)

    P = D
    s_sum = Polynomial.zero(total)
    lin = Polynomial.zero(total)
    for i in range(I):
        r = embed(spec.polys[i], total, up) - D
        for j in range(J):
            prod = svar(i, j)
            for k in range(K):
                prod = prod * zvar(i, j, k)
                lin = lin + embed(layout[i][j][k], total, up) * zvar(i, j, k)
            P = P + r * prod
            s_sum = s_sum + svar(i, j)
    Q = (1 - s_sum) ** 2 - lin
    box = [(Fraction(0), Fraction(1))] * m
    meta = {"construction": "pw-lsc-bounded", "roles": _roles([("z", nz), ("s", ns)]), "sign": 1,
            "spec": spec, "bounds": bounds, "index_sets": {"I": I, "J": J, "K": K}}
    return BilevelProgram(n, m, P, Q, box, OPTIMISTIC, meta)


def pw_layout(prog: BilevelProgram) -> list[list[tuple]]:
    spec = prog.metadata["spec"]
    return _closure_layout(spec.closures, spec.n)


# -- moment lift ---------------------------------------------------------------

@dataclass(frozen=True)
class LiftedProgram:
    """Objective of a bounded-box program rewritten as a linear functional of ``M_d(y)``.

    ``objective_coeffs`` maps basis indices to polynomials in ``x`` (only
    nonzero entries are stored).  The feasible set ``conv(M_d(box))`` stays
    implicit: points of it are produced only as ``monomial_map`` images of box
    points.
    """

    n: int
    basis: MonomialBasis
    objective_coeffs: dict
    upper_selector: int
    multiplier: Polynomial
    box: tuple

    def coefficient_values(self, x: Sequence) -> dict[int, Fraction]:
        return {k: c.evaluate(list(x)) for k, c in self.objective_coeffs.items()}

    def objective(self, x: Sequence, y: Sequence) -> Fraction:
        """``c_Q(x) . M_d(y)`` evaluated exactly."""
        idx = sorted(self.objective_coeffs)
        mono = monomial_map(y, self.basis, idx)
        coeffs = self.coefficient_values(x)
        return sum((coeffs[k] * v for k, v in zip(idx, mono)), Fraction(0))

    def lifted_point(self, y: Sequence) -> list[Fraction]:
        return monomial_map(y, self.basis)

    def upper_objective(self, x: Sequence, lam: Sequence) -> Fraction:
        """``P = c(x) * lambda[t]`` on a lifted point."""
        return self.multiplier.evaluate(list(x)) * lam[self.upper_selector]


def moment_lift(prog: BilevelProgram) -> LiftedProgram:
    """Express ``Q(x, .)`` as ``c_Q(x) . M_d(y)`` with ``d`` the lower-variable degree of ``Q``.

    ``P`` must be ``c(x) * y_k`` for one lower coordinate ``k``.
    """
    if not prog.bounded:
        raise ValueError("moment lift needs a bounded box")
    n, m = prog.n, prog.m
    P = prog.P.expand()
    lower = list(range(n, n + m))
    groups = P.coefficients_in(lower, outer=list(range(n)))
    units = [e for e in groups if sum(e) == 1]
    if len(groups) != 1 or len(units) != 1:
        raise ValueError("P must be a polynomial in x times a single lower coordinate")
    sel_exp = units[0]
    k = sel_exp.index(1)
    multiplier = groups[sel_exp]
    Q = prog.Q.expand()
    d = max(1, Q.degree_in(lower))
    basis = MonomialBasis(m, d)
    coeffs = {basis.index(e): c for e, c in Q.coefficients_in(lower, outer=list(range(n))).items()}
    return LiftedProgram(n, basis, coeffs, basis.index(sel_exp), multiplier, prog.box)


__all__ = [
    "BilevelProgram", "LiftedProgram", "GrowthBounds", "BoundsError", "OPTIMISTIC", "PESSIMISTIC",
    "encode_sa_unbounded", "encode_lsc_bounded", "encode_indicator_convex",
    "encode_piecewise_unbounded", "encode_pw_lsc_bounded", "normalize_range", "moment_lift",
    "pessimize", "negate_spec", "sa_factors", "scaled_closure", "reflect_closure",
]
