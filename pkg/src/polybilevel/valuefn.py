"""Value functions of bilevel programs.

Two independent evaluators:

* :func:`eval_generic` searches the lower box numerically and approximates the
  lower-level solution set by a ``Q``-sublevel set.  It knows nothing about how
  the program was built.
* :func:`eval_constructed` reads the encoder metadata and evaluates the value
  function exactly from the closed-form minimizer sets of each construction.

:func:`cross_validate` compares the two, :func:`semicontinuity_probe` samples
the one-sided continuity that optimistic (pessimistic) values must have.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from itertools import combinations
from typing import Any, Callable, Sequence

import numpy as np

from .encoder import OPTIMISTIC, PESSIMISTIC, BilevelProgram, pw_layout
from .poly import Polynomial, PolyExpr, as_fraction
from .semialg import (BasicSet, SpecError, _refined_value, closure_fiber_extrema, graph_fiber,
                      is_normalized)

FLOAT, EXACT_ON_GRID = "float", "exact-on-grid"


class RecipeError(ValueError):
    """The exact evaluator cannot certify the lower-level solution set at this point."""


class CrossValidationError(AssertionError):
    """The two evaluators disagree beyond tolerance."""


def exact_point(x: Sequence) -> list[Fraction]:
    """Rational coordinates; floats are converted exactly (binary value)."""
    return [Fraction(v) if isinstance(v, float) else as_fraction(v) for v in x]


# -- configuration and results ---------------------------------------------------

@dataclass(frozen=True)
class EvalConfig:
    """Settings of the generic grid-search evaluator.

    Stage ``s`` (counted from 0) searches lines through each incumbent whose
    half-length is ``shrink_factor**-s`` of the box width, with
    ``grid_points_per_dim`` points per line.  The first stage also samples the
    full tensor grid, or a seeded subset of it when the grid would exceed
    ``max_grid_points``.
    """

    grid_points_per_dim: int = 33
    refinement_stages: int = 3
    shrink_factor: int = 4
    argmin_tolerance: float = 1e-6
    numeric_mode: str = FLOAT
    max_grid_points: int = 1 << 12
    incumbents: int = 6
    max_moves_per_stage: int = 16
    pair_lines: bool = True
    seed: int = 0
    unbounded_clip: float | None = None

    def __post_init__(self):
        if self.grid_points_per_dim < 2:
            raise ValueError("empty grid: grid_points_per_dim must be at least 2")
        if self.refinement_stages < 1:
            raise ValueError("refinement_stages must be at least 1")
        if self.shrink_factor < 2:
            raise ValueError("shrink_factor must be at least 2")
        if not self.argmin_tolerance > 0:
            raise ValueError("argmin_tolerance must be positive")
        if self.numeric_mode not in (FLOAT, EXACT_ON_GRID):
            raise ValueError(f"numeric_mode must be {FLOAT!r} or {EXACT_ON_GRID!r}")
        if self.incumbents < 1 or self.max_grid_points < 1:
            raise ValueError("incumbents and max_grid_points must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EvalConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown EvalConfig fields: {sorted(unknown)}")
        return cls(**data)

    def with_overrides(self, **kw) -> "EvalConfig":
        return replace(self, **kw)


# Finer final grid and tighter sublevel threshold for cross-checks at 1e-3.
PRECISE = EvalConfig(refinement_stages=4, shrink_factor=16, argmin_tolerance=1e-12)


@dataclass
class EvalResult:
    value: Any
    argmin_sample: list
    diagnostics: dict = field(default_factory=dict)


# -- float evaluation of polynomials and expressions ---------------------------------

def cascade_sum(rows: np.ndarray) -> np.ndarray:
    """Sum along axis 0 by pairwise TwoSum, adding the rounding errors back at the end."""
    err = np.zeros(rows.shape[1:])
    while rows.shape[0] > 1:
        if rows.shape[0] % 2:
            rows = np.concatenate([rows, np.zeros((1,) + rows.shape[1:])])
        a, b = rows[0::2], rows[1::2]
        s = a + b
        bb = s - a
        err = err + ((a - (s - bb)) + (b - bb)).sum(axis=0)
        rows = s
    return rows[0] + err


class FloatEvaluator:
    """Batch float evaluation of a :class:`Polynomial` or :class:`PolyExpr`."""

    def __init__(self, expr):
        self.num_vars = expr.num_vars
        self._tree = self._compile(expr)
        self._max_deg = max(1, self._max_exponent(self._tree))

    def _compile(self, expr):
        if isinstance(expr, PolyExpr):
            return (expr.op, [self._compile(a) for a in expr.args])
        terms = list(expr.terms.items())
        if not terms:
            return ("const", 0.0)
        exps = np.array([e for e, _ in terms], dtype=np.intp).reshape(len(terms), self.num_vars)
        coeffs = np.array([float(c) for _, c in terms])
        used = [k for k in range(self.num_vars) if exps[:, k].any()]
        if not used:
            return ("const", float(coeffs.sum()))
        return ("leaf", exps[:, used], coeffs, used)

    def _max_exponent(self, node) -> int:
        if node[0] == "leaf":
            return int(node[1].max())
        if node[0] == "const":
            return 0
        return max(self._max_exponent(a) for a in node[1])

    def __call__(self, Y: np.ndarray) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        N = Y.shape[0]
        powers = np.empty((self.num_vars, self._max_deg + 1, N))
        powers[:, 0, :] = 1.0
        for d in range(1, self._max_deg + 1):
            powers[:, d, :] = powers[:, d - 1, :] * Y.T
        return self._eval(self._tree, powers, N)

    def _eval(self, node, powers, N):
        kind = node[0]
        if kind == "const":
            return np.full(N, node[1])
        if kind == "leaf":
            _, exps, coeffs, used = node
            rows = np.repeat(coeffs[:, None], N, axis=1)
            for col, k in enumerate(used):
                rows *= powers[k][exps[:, col]]
            return cascade_sum(rows)
        vals = [self._eval(a, powers, N) for a in node[1]]
        if kind == "sum":
            return cascade_sum(np.stack(vals))
        out = vals[0]
        for v in vals[1:]:
            out = out * v
        return out


def restrict_upper(expr, x: Sequence[Fraction], n: int):
    """Substitute the upper point and drop the upper variables."""
    sub = expr.partial({i: x[i] for i in range(n)})
    return sub.drop_leading(n)


# -- generic evaluator -----------------------------------------------------------------

def _finite_box(prog: BilevelProgram, cfg: EvalConfig) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = [], []
    for a, b in prog.box:
        if not (math.isfinite(a) and math.isfinite(b)):
            if cfg.unbounded_clip is None:
                raise ValueError("eval_generic needs a bounded box (or an explicit unbounded_clip)")
            c = float(cfg.unbounded_clip)
            a = max(a, -c) if math.isfinite(a) else -c
            b = min(b, c) if math.isfinite(b) else c
        lo.append(float(a))
        hi.append(float(b))
    return np.array(lo), np.array(hi)


class _Search:
    """Lexicographic grid search in normalised coordinates ``u`` in ``[0, 1]**m``."""

    def __init__(self, qf, pf, lo, hi, cfg: EvalConfig, direction: int):
        self.qf, self.pf = qf, pf
        self.lo, self.width = lo, hi - lo
        self.cfg = cfg
        self.m = len(lo)
        self.direction = direction
        self.evaluated = 0
        self.g = cfg.grid_points_per_dim
        self.pairs = list(combinations(range(self.m), 2)) if cfg.pair_lines else []

    def to_y(self, U):
        return self.lo + U * self.width

    def q(self, U):
        self.evaluated += U.shape[0]
        return self.qf(self.to_y(U))

    def p(self, U):
        return self.direction * self.pf(self.to_y(U))

    def seeds(self, rng) -> np.ndarray:
        g, m = self.g, self.m
        if g ** m <= self.cfg.max_grid_points:
            axes = np.meshgrid(*([np.linspace(0.0, 1.0, g)] * m), indexing="ij")
            return np.stack([a.ravel() for a in axes], axis=1)
        idx = rng.integers(0, g, size=(self.cfg.max_grid_points, m))
        extra = np.array([[0] * m, [g - 1] * m, [(g - 1) // 2] * m])
        return np.concatenate([idx, extra]) / (g - 1)

    def diverse(self, U, qv, count, min_dist=0.25) -> np.ndarray:
        order = np.argsort(qv, kind="stable")
        chosen: list[int] = []
        for i in order:
            if all(np.max(np.abs(U[i] - U[j])) >= min_dist for j in chosen):
                chosen.append(int(i))
                if len(chosen) == count:
                    break
        return U[chosen]

    def lines(self, c: np.ndarray, h: float, pairs: bool,
              pattern: np.ndarray | None = None) -> np.ndarray:
        """Grid points through ``c``: first the ``m`` axis lines (``g + 1`` points
        each, the last being ``c``), then the line along the previous move
        ``pattern`` and, optionally, the pair-transfer lines ``e_a - e_b``."""
        m, g = self.m, self.g
        steps = np.linspace(0.0, 1.0, g)
        lo, hi = np.maximum(0.0, c - h), np.minimum(1.0, c + h)
        vals = np.concatenate([lo[:, None] + (hi - lo)[:, None] * steps, c[:, None]], axis=1)
        axis = np.repeat(np.repeat(c[None, None, :], m, axis=0), g + 1, axis=1)
        axis[np.arange(m), :, np.arange(m)] = vals
        parts = [axis.reshape(-1, m)]
        if pattern is not None and np.any(pattern):
            d = pattern / np.max(np.abs(pattern))
            t = np.linspace(-2 * h, 2 * h, 2 * g - 1)
            parts.append(np.clip(c + t[:, None] * d, 0.0, 1.0))
        if pairs and self.pairs:
            ia = np.array([a for a, _ in self.pairs])
            ib = np.array([b for _, b in self.pairs])
            s_lo = np.maximum.reduce([-c[ia], c[ib] - 1.0, np.full(len(ia), -h)])
            s_hi = np.minimum.reduce([1.0 - c[ia], c[ib], np.full(len(ia), h)])
            t = s_lo[:, None] + (s_hi - s_lo)[:, None] * steps
            block = np.repeat(np.repeat(c[None, None, :], len(ia), axis=0), g, axis=1)
            rows = np.arange(len(ia))
            block[rows, :, ia] = np.clip(c[ia][:, None] + t, 0.0, 1.0)
            block[rows, :, ib] = np.clip(c[ib][:, None] - t, 0.0, 1.0)
            parts.append(block.reshape(-1, m))
        return np.concatenate(parts)

    def descend(self, inc, h, tau=None, collect=None):
        """Best-move line search from every incumbent until no key improves.

        Without ``tau`` the key is ``Q``; with it the key is
        ``(max(Q - tau, 0), direction * P)`` compared lexicographically.  Each
        round also tries the point combining the best move on every axis.
        """
        use_p = tau is not None
        m, g = self.m, self.g
        C = np.array(inc, dtype=float).reshape(-1, m)
        cq = self.q(C)
        cp = self.p(C) if use_p else np.zeros(len(C))
        patterns: list = [None] * len(C)
        active = list(range(len(C)))
        for _ in range(self.cfg.max_moves_per_stage):
            if not active:
                break
            blocks = [self.lines(C[i], h, use_p, patterns[i]) for i in active]
            U = np.concatenate(blocks)
            qv = self.q(U)
            pv = self.p(U) if use_p else np.zeros(len(U))
            bounds = np.cumsum([0] + [len(b) for b in blocks])
            combos = np.empty((len(active), m))
            for r, i in enumerate(active):
                lo = bounds[r]
                aq = qv[lo:lo + m * (g + 1)].reshape(m, g + 1)
                ap = pv[lo:lo + m * (g + 1)].reshape(m, g + 1)
                j = self._best_rows(aq, ap, tau)
                combos[r] = U[lo:lo + m * (g + 1)].reshape(m, g + 1, m)[np.arange(m), j, np.arange(m)]
            qc = self.q(combos)
            pc = self.p(combos) if use_p else np.zeros(len(combos))
            if collect is not None:
                collect(U, qv, pv)
                collect(combos, qc, pc)
            still = []
            for r, i in enumerate(active):
                lo, hi = bounds[r], bounds[r + 1]
                sq = np.append(qv[lo:hi], qc[r])
                sp = np.append(pv[lo:hi], pc[r])
                j = int(self._best_rows(sq[None, :], sp[None, :], tau)[0])
                if self._key(sq[j], sp[j], tau) < self._key(cq[i], cp[i], tau):
                    new = U[lo + j] if j < hi - lo else combos[r]
                    patterns[i] = new - C[i]
                    C[i], cq[i], cp[i] = new, sq[j], sp[j]
                    still.append(i)
            active = still
        return list(zip(C, cq))

    @staticmethod
    def _key(q, p, tau):
        if tau is None:
            return (q, 0.0)
        return (max(q - tau, 0.0), p)

    @staticmethod
    def _best_rows(qv: np.ndarray, pv: np.ndarray, tau) -> np.ndarray:
        """Row-wise index of the smallest key."""
        if tau is None:
            return np.argmin(qv, axis=1)
        viol = np.maximum(qv - tau, 0.0)
        tie = viol == viol.min(axis=1, keepdims=True)
        return np.argmin(np.where(tie, pv, np.inf), axis=1)


def eval_generic(prog: BilevelProgram, x: Sequence, cfg: EvalConfig | None = None) -> EvalResult:
    """Value function by multi-stage grid search over the lower box.

    The lower-level minimum is approached by line searches on shrinking grids
    around several diverse incumbents.  A second pass then searches the
    ``argmin_tolerance`` sublevel set for the best upper objective.  The
    reported value is the min (optimistic) or max (pessimistic) of ``P`` over
    every evaluated point whose ``Q`` is within tolerance of the final
    incumbent minimum.
    """
    cfg = cfg or EvalConfig()
    xs = exact_point(x)
    if len(xs) != prog.n:
        raise ValueError(f"x has dimension {len(xs)}, expected {prog.n}")
    lo, hi = _finite_box(prog, cfg)
    Qx = restrict_upper(prog.Q, xs, prog.n)
    Px = restrict_upper(prog.P, xs, prog.n)
    direction = 1 if prog.mode == OPTIMISTIC else -1
    search = _Search(FloatEvaluator(Qx), FloatEvaluator(Px), lo, hi, cfg, direction)
    rng = np.random.default_rng(cfg.seed)

    U0 = search.seeds(rng)
    q0 = search.q(U0)
    history = [float(q0.min())]
    inc = search.diverse(U0, q0, cfg.incumbents)
    found = []
    for s in range(cfg.refinement_stages):
        h = float(cfg.shrink_factor) ** -s
        found = search.descend(inc, h)
        found = _dedupe(found, h / (cfg.grid_points_per_dim - 1))
        inc = np.array([c for c, _ in found])
        history.append(min(history[-1], float(min(q for _, q in found))))

    sample_U, sample_q, sample_p = [], [], []

    def collect(U, qv, pv):
        keep = qv <= history[-1] + cfg.argmin_tolerance
        if keep.any():
            sample_U.append(U[keep])
            sample_q.append(qv[keep])
            sample_p.append(pv[keep])

    qmin = history[-1]
    start = np.array([c for c, q in found if q <= qmin + cfg.argmin_tolerance])
    collect(start, np.array([q for _, q in found if q <= qmin + cfg.argmin_tolerance]),
            search.p(start))
    for s in range(cfg.refinement_stages):
        h = float(cfg.shrink_factor) ** -s
        res = search.descend(start, h, tau=qmin + cfg.argmin_tolerance, collect=collect)
        start = np.array([c for c, _ in res])
    Us = np.concatenate(sample_U)
    qs = np.concatenate(sample_q)
    ps = np.concatenate(sample_p)
    q_final = float(qs.min())
    if q_final < qmin:
        history.append(q_final)
    keep = qs <= history[-1] + cfg.argmin_tolerance
    Us, qs, ps = Us[keep], qs[keep], ps[keep]
    Ys = search.to_y(Us)
    if cfg.numeric_mode == EXACT_ON_GRID:
        value, Ys = _exact_on_grid(Qx, Px, Ys, cfg.argmin_tolerance, direction)
    else:
        value = float(direction * ps.min())
    sample = [tuple(float(v) for v in row) for row in _unique_rows(Ys)]
    diag = {"q_min": history[-1], "stage_history": history, "points_evaluated": search.evaluated,
            "sample_size": len(sample)}
    return EvalResult(value, sample, diag)


def _dedupe(found: list, radius: float) -> list:
    """Drop incumbents within ``radius`` (max norm) of a better one."""
    kept: list = []
    for c, q in sorted(found, key=lambda cq: cq[1]):
        if all(np.max(np.abs(c - k)) > radius for k, _ in kept):
            kept.append((c, q))
    return kept


def _unique_rows(Y: np.ndarray, limit: int = 256) -> np.ndarray:
    Y = np.unique(Y, axis=0)
    return Y[:limit]


def _exact_on_grid(Qx, Px, Ys, eps, direction):
    """Re-evaluate the float sample exactly and select within ``eps`` of its exact minimum."""
    Ys = _unique_rows(Ys, limit=len(Ys))
    pts = [[Fraction(float(v)) for v in row] for row in Ys]
    qv = [Qx.evaluate(p) for p in pts]
    qmin = min(qv)
    bound = qmin + Fraction(eps)
    chosen = [i for i, v in enumerate(qv) if v <= bound]
    pv = [Px.evaluate(pts[i]) for i in chosen]
    value = min(pv) if direction == 1 else max(pv)
    return value, Ys[chosen]


# -- exact evaluator -----------------------------------------------------------------

def _range_of(values: Sequence) -> tuple:
    return (min(values), max(values))


def _apply_sign(lo, hi, sign: int) -> tuple:
    return (lo, hi) if sign == 1 else (-hi, -lo)


def _sa_range(prog: BilevelProgram, xs: list[Fraction]) -> tuple:
    spec = prog.metadata["spec"]
    if not is_normalized(spec):
        raise RecipeError("stored specification is not normalised")
    hits = [spec.dom.contains(xs), spec.dom_plus.contains(xs), spec.dom_minus.contains(xs)]
    if sum(hits) != 1:
        raise RecipeError(f"x={xs} lies in {sum(hits)} of the three domain sets")
    if hits[1]:
        return (math.inf, -math.inf)  # the lower level has no minimizer
    if hits[2]:
        return (-math.inf, math.inf)  # t is unconstrained on the solution set
    roots = graph_fiber(spec.graph, xs)
    if len(roots) != 1:
        raise RecipeError(f"graph has {len(roots)} values at x={xs}")
    root = roots[0]
    if root.exact is not None:
        _check_sa_witness(prog, spec, xs, root.exact)
        t = root.exact
    else:
        t = _refined_value(root, 1e-15)
    return _apply_sign(t, t, prog.sign)


def _check_sa_witness(prog, spec, xs, t):
    """``Q`` must vanish at the closed-form minimizer (squares of ``z, nu`` are rational)."""
    roles = prog.metadata["roles"]
    J = prog.metadata["index_sets"]["J"]
    n = prog.n
    pt = list(xs) + [Fraction(0)] * prog.m
    pt[n + roles["t"][0]] = t
    pt[n + roles["u"][0]] = pt[n + roles["v"][0]] = Fraction(1)
    squares = {n + k: Fraction(0) for name in ("z", "nu", "nu+", "nu-") for k in roles[name]}

    def fill(pieces, role, point):
        for i, b in enumerate(pieces):
            if b.contains(point):
                for j, q in enumerate(b.strict):
                    squares[n + roles[role][i * J + j]] = 1 / q.evaluate(point)
                return

    fill(spec.graph.pieces, "z", list(xs) + [t])
    fill(spec.dom.pieces, "nu", xs)
    if prog.Q.evaluate_with_squares(pt, squares) != 0:
        raise RecipeError(f"lower objective does not vanish at the graph witness for x={xs}")


def _lsc_range(prog: BilevelProgram, xs: list[Fraction]) -> tuple:
    closed = prog.metadata["closure"]
    d = prog.metadata["bounds"].factor(xs)
    ext = closure_fiber_extrema(closed, xs, window=(-d, d), keep_roots=True)
    if ext is None:
        raise RecipeError(f"closure fibre is empty inside [-D, D] at x={xs}")
    lo, hi = (_refined_value(v, 1e-15) for v in ext)
    return _apply_sign(lo, hi, prog.sign)


def indicator_witness(s: BasicSet, xs: list[Fraction]) -> tuple[list[Fraction], Fraction]:
    """Minimizer ``(w, z, t)`` of the indicator lower level and the minimum value."""
    P = s.equality.evaluate(xs)
    Qs = [q.evaluate(xs) for q in s.strict]
    w = [Fraction(1) if v > 0 else Fraction(0) for v in Qs]
    z = [1 / v if v else Fraction(0) for v in Qs]
    t = 1 / P if P else Fraction(0)
    # a vanishing P or Q_j leaves its square term at 1 whatever the free variable
    gmin = (P == 0) + sum(v == 0 for v in Qs) - sum((v for v in Qs if v > 0), Fraction(0))
    return w + z + [t], Fraction(gmin)


def _indicator_range(prog: BilevelProgram, xs: list[Fraction]) -> tuple:
    s = prog.metadata["set"]
    y, gmin = indicator_witness(s, xs)
    pt = list(xs) + y
    if prog.Q.evaluate(pt) != gmin:
        raise RecipeError("lower objective misses its closed-form minimum")
    v = prog.P.evaluate(pt)
    return (v, v)  # the upper objective is constant on the solution set


def _piecewise_range(prog: BilevelProgram, xs: list[Fraction]) -> tuple:
    y = [Fraction(0)] * prog.m
    total_min = Fraction(0)
    for block in prog.metadata["blocks"]:
        wit, gmin = indicator_witness(block["set"], xs)
        off = block["offset"]
        y[off:off + len(wit)] = wit
        total_min += gmin
    pt = list(xs) + y
    if prog.Q.evaluate(pt) != total_min:
        raise RecipeError("lower objective misses its closed-form minimum")
    v = prog.P.evaluate(pt)
    return (v, v)


def _pw_lsc_range(prog: BilevelProgram, xs: list[Fraction]) -> tuple:
    spec = prog.metadata["spec"]
    d = prog.metadata["bounds"].factor(xs)
    layout = pw_layout(prog)
    lows, highs = [], []
    for poly, clauses in zip(spec.polys, layout):
        r = poly.evaluate(xs) - d
        for clause in clauses:
            coeffs = [p.evaluate(xs) for p in clause]
            if any(c < 0 for c in coeffs):
                prod_lo = prod_hi = Fraction(0)
            elif any(c == 0 for c in coeffs):
                prod_lo, prod_hi = Fraction(0), Fraction(1)
            else:
                prod_lo = prod_hi = Fraction(1)
            a, b = r * prod_lo, r * prod_hi
            lows.append(min(a, b))
            highs.append(max(a, b))
    return _apply_sign(d + min(lows), d + max(highs), prog.sign)


def _hardness_range(prog: BilevelProgram, xs: list[Fraction]) -> tuple:
    from .hardness import NEGATIVE, _is_binary, min_H_estimate, phi_on_binary

    inst = prog.metadata["instance"]
    if not _is_binary(xs):
        # z = 0 is the unique minimizer off the binary cube
        v = prog.P.evaluate(xs + [Fraction(0)] * prog.m)
        return (v, v)
    sign = phi_on_binary(prog if prog.sign == 1 else None, xs, inst)
    if sign.certificate == NEGATIVE:
        est, _ = min_H_estimate(inst, [int(v) for v in xs])
        if est < float(sign.min_H_lower_bound) * (1 - 1e-9):
            raise RecipeError("numerical minimum undercuts the certified bound")
        return _apply_sign(-est, 1.0, prog.sign)
    return _apply_sign(Fraction(0), Fraction(1), prog.sign)


RECIPES: dict[str, Callable] = {
    "sa-unbounded": _sa_range,
    "lsc-bounded": _lsc_range,
    "indicator": _indicator_range,
    "piecewise-unbounded": _piecewise_range,
    "pw-lsc-bounded": _pw_lsc_range,
    "hardness": _hardness_range,
}


def solution_range(prog: BilevelProgram, x: Sequence) -> tuple:
    """``(inf, sup)`` of ``P(x, .)`` over the lower-level solution set; ``(inf, -inf)`` if empty."""
    tag = prog.construction
    if tag not in RECIPES:
        raise ValueError(f"no exact recipe for construction {tag!r}")
    xs = exact_point(x)
    if len(xs) != prog.n:
        raise ValueError(f"x has dimension {len(xs)}, expected {prog.n}")
    return RECIPES[tag](prog, xs)


def eval_constructed(prog: BilevelProgram, x: Sequence):
    """Exact value function from the construction's closed-form solution sets.

    Rational values come back as Fractions; irrational ones (and the negative
    values of hardness programs) as floats; infinities as ``+-math.inf``.
    """
    lo, hi = solution_range(prog, x)
    return lo if prog.mode == OPTIMISTIC else hi


def has_recipe(prog: BilevelProgram) -> bool:
    return prog.construction in RECIPES


# -- semicontinuity probe ---------------------------------------------------------------

@dataclass
class ProbeReport:
    x: tuple
    mode: str
    value: Any
    neighbors: int
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _probe_directions(n: int, count: int, rng) -> list[list[Fraction]]:
    if n == 1:
        return [[Fraction(-1)], [Fraction(1)]]
    out = []
    for _ in range(count):
        v = rng.normal(size=n)
        v /= np.linalg.norm(v)
        out.append([Fraction(float(c)).limit_denominator(1 << 20) for c in v])
    return out


def semicontinuity_probe(prog: BilevelProgram, x: Sequence, radius=Fraction(1, 10), samples: int = 20,
                         evaluator: Callable | None = None, mode: str | None = None,
                         tol: float = 1e-6, seed: int = 0) -> ProbeReport:
    """Sampled check of lower (optimistic) or upper (pessimistic) semicontinuity at ``x``.

    Neighbours approach ``x`` along a few directions at radii ``radius * 2**-i``.
    Along each direction the limit is estimated by linear extrapolation to
    distance 0 from the two closest neighbours.  In
    optimistic mode a violation is ``phi(x)`` exceeding that estimate by more
    than ``tol``; pessimistic mode checks the reverse.  ``mode`` overrides the
    program's own mode, which is how mismatched compilations are exposed.
    """
    evaluator = evaluator or (eval_constructed if has_recipe(prog) else
                              (lambda p, pt: eval_generic(p, pt).value))
    mode = mode or prog.mode
    xs = exact_point(x)
    radius = Fraction(radius) if isinstance(radius, float) else as_fraction(radius)
    rng = np.random.default_rng(seed)
    dirs = _probe_directions(prog.n, 4, rng)
    per_dir = max(2, samples // len(dirs))
    fx = float(evaluator(prog, xs))
    report = ProbeReport(tuple(xs), mode, fx, per_dir * len(dirs))
    sgn = 1.0 if mode == OPTIMISTIC else -1.0
    for u in dirs:
        vals = []
        for i in range(per_dir):
            step = radius / 2 ** i
            pt = [a + step * b for a, b in zip(xs, u)]
            vals.append((pt, sgn * float(evaluator(prog, pt))))
        near, nearer = vals[-2][1], vals[-1][1]
        est = nearer
        if math.isfinite(near) and math.isfinite(nearer):
            est = 2 * nearer - near
        gap = sgn * fx - est
        if gap > tol:
            report.violations.append({"direction": [str(c) for c in u],
                                      "neighbor": [str(c) for c in vals[-1][0]],
                                      "neighbor_value": sgn * vals[-1][1], "magnitude": gap})
    return report


# -- cross validation ------------------------------------------------------------------

@dataclass
class CrossReport:
    tolerance: float
    entries: list = field(default_factory=list)
    notices: list = field(default_factory=list)

    @property
    def mismatches(self) -> list:
        return [e for e in self.entries if e["status"] == "mismatch"]

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def raise_if_failed(self) -> None:
        if not self.ok:
            first = self.mismatches[0]
            raise CrossValidationError(f"evaluators disagree at x={first['x']}: "
                                       f"exact {first['exact']} vs generic {first['generic']}")

    def to_dict(self) -> dict:
        return {"tolerance": self.tolerance, "entries": self.entries, "notices": self.notices,
                "ok": self.ok}


def cross_validate(prog: BilevelProgram, points: Sequence[Sequence], cfg: EvalConfig | None = None,
                   tol: float = 1e-3) -> CrossReport:
    """Compare :func:`eval_generic` with :func:`eval_constructed` at every point.

    Points where the exact value is infinite are skipped with a notice: a
    sampler cannot certify an empty or unbounded solution set.  The default
    configuration is :data:`PRECISE`.
    """
    cfg = cfg or PRECISE
    report = CrossReport(tol)
    for x in points:
        xs = exact_point(x)
        label = [str(v) for v in xs]
        exact = eval_constructed(prog, xs)
        if isinstance(exact, float) and math.isinf(exact):
            report.notices.append(f"x={label}: exact value {exact} is not checkable by sampling")
            report.entries.append({"x": label, "exact": str(exact), "generic": None,
                                   "diff": None, "status": "skipped"})
            continue
        res = eval_generic(prog, xs, cfg)
        diff = abs(float(exact) - float(res.value))
        report.entries.append({"x": label, "exact": float(exact), "generic": float(res.value),
                               "diff": diff, "status": "ok" if diff <= tol else "mismatch"})
    return report


__all__ = [
    "EvalConfig", "EvalResult", "PRECISE", "FloatEvaluator", "RecipeError", "CrossValidationError",
    "ProbeReport", "CrossReport", "eval_generic", "eval_constructed", "solution_range",
    "semicontinuity_probe", "cross_validate", "cascade_sum", "restrict_upper", "exact_point",
    "indicator_witness", "has_recipe", "FLOAT", "EXACT_ON_GRID",
]
