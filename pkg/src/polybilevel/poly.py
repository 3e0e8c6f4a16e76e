"""Exact sparse multivariate polynomials over the rationals.

A :class:`Polynomial` maps exponent tuples to nonzero :class:`fractions.Fraction`
coefficients.  Instances are immutable; every operation returns a new object.

Large products of sums (the lower-level objectives built by the encoders) are
kept in factored form as :class:`PolyExpr` trees whose leaves are polynomials.
Both classes share the evaluation surface used by the rest of the package
(``evaluate``, ``evaluate_array``, ``partial``, ``expand``...).
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import reduce
from numbers import Rational
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

Exponent = tuple
Number = Union[int, Fraction]


def as_fraction(value) -> Fraction:
    """Convert ints, Fractions and decimal/ratio strings to Fraction.

    Floats are rejected: the exact path never silently absorbs rounding.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        return Fraction(int(value))
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, (np.integer,)):
        return Fraction(int(value))
    raise TypeError(f"cannot convert {type(value).__name__} to an exact rational")


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


def _neumaier_sum(values: Iterable[np.ndarray], shape) -> np.ndarray:
    total = np.zeros(shape)
    comp = np.zeros(shape)
    for v in values:
        t = total + v
        big = np.abs(total) >= np.abs(v)
        comp += np.where(big, (total - t) + v, (v - t) + total)
        total = t
    return total + comp


class Polynomial:
    """Sparse polynomial in ``num_vars`` variables with rational coefficients."""

    __slots__ = ("num_vars", "_terms", "_hash", "_int_form", "_float_terms")

    def __init__(self, num_vars: int, terms: Mapping[Sequence[int], Number] | None = None):
        if num_vars < 0:
            raise ValueError("num_vars must be non-negative")
        self.num_vars = int(num_vars)
        clean: dict[tuple, Fraction] = {}
        for exps, coeff in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != num_vars:
                raise ValueError(f"exponent {exps} has length {len(exps)}, expected {num_vars}")
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            c = as_fraction(coeff)
            if c:
                c = clean.get(exps, 0) + c
                if c:
                    clean[exps] = c
                else:
                    clean.pop(exps, None)
        self._terms = clean
        self._hash = None
        self._int_form = None
        self._float_terms = None

    @classmethod
    def _from_clean(cls, num_vars: int, terms: dict) -> "Polynomial":
        p = cls.__new__(cls)
        p.num_vars = num_vars
        p._terms = terms
        p._hash = None
        p._int_form = None
        p._float_terms = None
        return p

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, num_vars: int) -> "Polynomial":
        return cls._from_clean(num_vars, {})

    @classmethod
    def constant(cls, value: Number, num_vars: int) -> "Polynomial":
        return cls(num_vars, {(0,) * num_vars: value})

    @classmethod
    def variable(cls, index: int, num_vars: int) -> "Polynomial":
        if not 0 <= index < num_vars:
            raise IndexError(f"variable index {index} out of range for {num_vars} variables")
        exps = [0] * num_vars
        exps[index] = 1
        return cls._from_clean(num_vars, {tuple(exps): Fraction(1)})

    @classmethod
    def variables(cls, num_vars: int) -> list["Polynomial"]:
        return [cls.variable(i, num_vars) for i in range(num_vars)]

    # -- basic properties -------------------------------------------------
    @property
    def terms(self) -> Mapping[tuple, Fraction]:
        return MappingProxyType(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(not any(e) for e in self._terms)

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError("polynomial is not constant")
        return self._terms.get((0,) * self.num_vars, Fraction(0))

    def degree(self) -> int:
        """Total degree; the zero polynomial has degree 0 by convention."""
        return max((sum(e) for e in self._terms), default=0)

    degree_bound = degree

    def degree_in(self, indices: Iterable[int]) -> int:
        idx = list(indices)
        return max((sum(e[i] for i in idx) for e in self._terms), default=0)

    def used_variables(self) -> set[int]:
        return {i for e in self._terms for i, k in enumerate(e) if k}

    def max_abs_coeff(self) -> Fraction:
        if not self._terms:
            return Fraction(0)
        den, _, ints = self._integer_form()
        return Fraction(max(abs(c) for _, c, _ in ints), den)

    def leading_term(self) -> tuple[tuple, Fraction]:
        """Largest term in graded-lexicographic order."""
        if not self._terms:
            raise ValueError("zero polynomial has no leading term")
        e = max(self._terms, key=lambda k: (sum(k), k))
        return e, self._terms[e]

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.num_vars != self.num_vars:
                raise ValueError(
                    f"variable-count mismatch: {self.num_vars} vs {other.num_vars}")
            return other
        if isinstance(other, PolyExpr):
            return NotImplemented
        return Polynomial.constant(as_fraction(other), self.num_vars)

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        out = dict(self._terms)
        for e, c in other._terms.items():
            v = out.get(e, 0) + c
            if v:
                out[e] = v
            else:
                out.pop(e, None)
        return Polynomial._from_clean(self.num_vars, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._from_clean(self.num_vars, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, (Polynomial, PolyExpr)):
            c = as_fraction(other)
            if not c:
                return Polynomial.zero(self.num_vars)
            return Polynomial._from_clean(self.num_vars, {e: v * c for e, v in self._terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        out: dict[tuple, Fraction] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                v = out.get(e, 0) + c1 * c2
                if v:
                    out[e] = v
                else:
                    out.pop(e, None)
        return Polynomial._from_clean(self.num_vars, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        c = as_fraction(other)
        return self * (1 / c)

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("exponent must be a non-negative integer")
        result = Polynomial.constant(1, self.num_vars)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.num_vars == other.num_vars and self._terms == other._terms
        if isinstance(other, (int, Fraction)):
            return self.is_constant() and self.constant_value() == other
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.num_vars, frozenset(self._terms.items())))
        return self._hash

    # -- evaluation -------------------------------------------------------
    def _integer_form(self):
        if self._int_form is None:
            den = reduce(_lcm, (c.denominator for c in self._terms.values()), 1)
            deg = self.degree()
            ints = [(e, c.numerator * (den // c.denominator), deg - sum(e))
                    for e, c in self._terms.items()]
            self._int_form = (den, deg, ints)
        return self._int_form

    def evaluate(self, point: Sequence) -> Fraction:
        """Exact value at a rational point."""
        if len(point) != self.num_vars:
            raise ValueError(f"point has length {len(point)}, expected {self.num_vars}")
        if not self._terms:
            return Fraction(0)
        pt = [as_fraction(v) for v in point]
        den_pt = reduce(_lcm, (v.denominator for v in pt), 1)
        nums = [v.numerator * (den_pt // v.denominator) for v in pt]
        den, deg, ints = self._integer_form()
        cache: dict[tuple[int, int], int] = {}
        dpow: dict[int, int] = {}
        total = 0
        for e, c, rest in ints:
            acc = c
            for i, k in enumerate(e):
                if k:
                    key = (i, k)
                    v = cache.get(key)
                    if v is None:
                        v = cache[key] = nums[i] ** k
                    acc *= v
            if rest:
                v = dpow.get(rest)
                if v is None:
                    v = dpow[rest] = den_pt ** rest
                acc *= v
            total += acc
        return Fraction(total, den * den_pt ** deg)

    def evaluate_with_squares(self, point: Sequence, squares: Mapping[int, Fraction]) -> Fraction:
        """Exact value where some coordinates are only known through their squares.

        ``squares[i]`` gives ``y_i**2``; every exponent of variable ``i`` must be even.
        ``point[i]`` is ignored for those indices.
        """
        pt = [as_fraction(v) if i not in squares else Fraction(0) for i, v in enumerate(point)]
        total = Fraction(0)
        for e, c in self._terms.items():
            acc = c
            for i, k in enumerate(e):
                if not k:
                    continue
                if i in squares:
                    if k % 2:
                        raise ValueError(f"variable {i} appears with odd exponent {k}")
                    acc *= as_fraction(squares[i]) ** (k // 2)
                else:
                    acc *= pt[i] ** k
            total += acc
        return total

    def evaluate_float(self, point: Sequence[float]) -> float:
        """Floating evaluation with correctly rounded summation of the terms.

        Each term is formed with at most ``degree + 1`` roundings, so the result
        differs from the exact value by at most about ``(degree + 2) * 2**-53``
        times the absolute sum of the terms ``sum |c_e x**e|``.
        """
        if len(point) != self.num_vars:
            raise ValueError(f"point has length {len(point)}, expected {self.num_vars}")
        x = [float(v) for v in point]
        parts = []
        for e, c in self._terms.items():
            acc = float(c)
            for i, k in enumerate(e):
                if k:
                    acc *= x[i] ** k
            parts.append(acc)
        return math.fsum(parts)

    def _float_term_list(self):
        if self._float_terms is None:
            self._float_terms = [
                (float(c), tuple((i, k) for i, k in enumerate(e) if k))
                for e, c in self._terms.items()
            ]
        return self._float_terms

    def evaluate_array(self, points: np.ndarray) -> np.ndarray:
        """Vectorised float evaluation at the rows of ``points`` (compensated sum)."""
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != self.num_vars:
            raise ValueError(f"expected array of shape (N, {self.num_vars})")
        n = points.shape[0]
        powers: dict[tuple[int, int], np.ndarray] = {}

        def term_values():
            for c, factors in self._float_term_list():
                v = np.full(n, c)
                for key in factors:
                    pw = powers.get(key)
                    if pw is None:
                        pw = powers[key] = points[:, key[0]] ** key[1]
                    v = v * pw
                yield v

        return _neumaier_sum(term_values(), n)

    # -- structural operations --------------------------------------------
    def partial(self, assign: Mapping[int, Number]) -> "Polynomial":
        """Substitute rational values for some variables (``num_vars`` is kept)."""
        if not assign:
            return self
        vals = {i: as_fraction(v) for i, v in assign.items()}
        out: dict[tuple, Fraction] = {}
        for e, c in self._terms.items():
            acc = c
            ne = list(e)
            for i, v in vals.items():
                k = e[i]
                if k:
                    acc *= v ** k
                    ne[i] = 0
            if acc:
                key = tuple(ne)
                s = out.get(key, 0) + acc
                if s:
                    out[key] = s
                else:
                    out.pop(key, None)
        return Polynomial._from_clean(self.num_vars, out)

    def substitute(self, index: int, replacement: "Polynomial") -> "Polynomial":
        """Replace variable ``index`` by the polynomial ``replacement``."""
        replacement = self._coerce(replacement)
        by_power: dict[int, dict[tuple, Fraction]] = {}
        for e, c in self._terms.items():
            k = e[index]
            rest = list(e)
            rest[index] = 0
            by_power.setdefault(k, {})[tuple(rest)] = c
        result = Polynomial.zero(self.num_vars)
        for k, part in sorted(by_power.items()):
            result = result + Polynomial._from_clean(self.num_vars, part) * replacement ** k
        return result

    def univariate(self, index: int) -> list[Fraction]:
        """Coefficients (low to high) in variable ``index``; other variables must be absent."""
        coeffs: dict[int, Fraction] = {}
        for e, c in self._terms.items():
            if any(k for i, k in enumerate(e) if i != index):
                raise ValueError("polynomial depends on other variables")
            coeffs[e[index]] = c
        deg = max(coeffs, default=0)
        return [coeffs.get(i, Fraction(0)) for i in range(deg + 1)]

    def coefficients_in(self, indices: Sequence[int], num_outer: int | None = None,
                        outer: Sequence[int] | None = None) -> dict[tuple, "Polynomial"]:
        """Group terms by the exponents of ``indices``.

        Returns a mapping from exponent tuples (over ``indices``) to polynomials in
        the remaining variables ``outer`` (re-indexed ``0..len(outer)-1``).
        """
        idx = list(indices)
        if outer is None:
            outer = [i for i in range(self.num_vars) if i not in set(idx)]
        nout = len(outer) if num_outer is None else num_outer
        groups: dict[tuple, dict[tuple, Fraction]] = {}
        for e, c in self._terms.items():
            key = tuple(e[i] for i in idx)
            groups.setdefault(key, {})[tuple(e[i] for i in outer)] = c
        return {k: Polynomial._from_clean(nout, v) for k, v in groups.items()}

    def derivative(self, index: int) -> "Polynomial":
        out = {}
        for e, c in self._terms.items():
            k = e[index]
            if k:
                ne = list(e)
                ne[index] = k - 1
                out[tuple(ne)] = c * k
        return Polynomial._from_clean(self.num_vars, out)

    def drop_leading(self, count: int) -> "Polynomial":
        """Remove the first ``count`` variables, which must not occur."""
        out = {}
        for e, c in self._terms.items():
            if any(e[:count]):
                raise ValueError("dropped variables still occur")
            out[e[count:]] = c
        return Polynomial._from_clean(self.num_vars - count, out)

    def expand(self) -> "Polynomial":
        return self

    def to_dict(self) -> dict:
        terms = [
            {"exponents": list(e), "coeff": f"{c.numerator}/{c.denominator}"}
            for e, c in sorted(self._terms.items(), key=lambda kv: (sum(kv[0]), kv[0]))
        ]
        return {"num_vars": self.num_vars, "terms": terms}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Polynomial":
        n = int(data["num_vars"])
        terms: dict[tuple, Fraction] = {}
        for rec in data["terms"]:
            e = tuple(int(k) for k in rec["exponents"])
            if e in terms:
                raise ValueError(f"duplicate exponent {e}")
            terms[e] = Fraction(str(rec["coeff"]))
        return cls(n, terms)

    def __repr__(self) -> str:
        if not self._terms:
            return "0"
        names = [f"x{i}" for i in range(self.num_vars)]
        parts = []
        for e, c in sorted(self._terms.items(), key=lambda kv: (-sum(kv[0]), tuple(-k for k in kv[0]))):
            mono = "*".join(n if k == 1 else f"{n}^{k}" for n, k in zip(names, e) if k)
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append("-" + mono)
            else:
                parts.append(f"{c}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")


class PolyExpr:
    """A sum or product of polynomials (or nested expressions), kept unexpanded."""

    __slots__ = ("op", "args", "num_vars")

    def __init__(self, op: str, args: Sequence[Union[Polynomial, "PolyExpr"]]):
        if op not in ("sum", "prod"):
            raise ValueError(f"unknown op {op!r}")
        if not args:
            raise ValueError("expression needs at least one argument")
        nv = {a.num_vars for a in args}
        if len(nv) != 1:
            raise ValueError(f"variable-count mismatch among arguments: {sorted(nv)}")
        self.op = op
        self.args = tuple(args)
        self.num_vars = nv.pop()

    def leaves(self) -> Iterator[Polynomial]:
        for a in self.args:
            if isinstance(a, PolyExpr):
                yield from a.leaves()
            else:
                yield a

    def degree_bound(self) -> int:
        degs = [a.degree_bound() for a in self.args]
        return sum(degs) if self.op == "prod" else max(degs)

    def degree_in(self, indices: Iterable[int]) -> int:
        idx = list(indices)
        degs = [a.degree_in(idx) for a in self.args]
        return sum(degs) if self.op == "prod" else max(degs)

    def used_variables(self) -> set[int]:
        return set().union(*(a.used_variables() for a in self.args))

    def evaluate(self, point: Sequence) -> Fraction:
        vals = (a.evaluate(point) for a in self.args)
        if self.op == "sum":
            return sum(vals, Fraction(0))
        out = Fraction(1)
        for a in self.args:
            v = a.evaluate(point)
            if not v:
                return Fraction(0)
            out *= v
        return out

    def evaluate_with_squares(self, point, squares) -> Fraction:
        vals = [a.evaluate_with_squares(point, squares) for a in self.args]
        if self.op == "sum":
            return sum(vals, Fraction(0))
        return reduce(lambda u, v: u * v, vals, Fraction(1))

    def evaluate_float(self, point: Sequence[float]) -> float:
        vals = [a.evaluate_float(point) for a in self.args]
        return math.fsum(vals) if self.op == "sum" else math.prod(vals)

    def evaluate_array(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if self.op == "sum":
            return _neumaier_sum((a.evaluate_array(points) for a in self.args), points.shape[0])
        out = np.ones(points.shape[0])
        for a in self.args:
            out = out * a.evaluate_array(points)
        return out

    def partial(self, assign: Mapping[int, Number]):
        return _build(self.op, [a.partial(assign) for a in self.args], collapse=True)

    def drop_leading(self, count: int):
        return _build(self.op, [a.drop_leading(count) for a in self.args])

    def expand(self) -> Polynomial:
        parts = [a.expand() for a in self.args]
        if self.op == "sum":
            return reduce(lambda u, v: u + v, parts)
        parts.sort(key=len)
        return reduce(lambda u, v: u * v, parts)

    def to_dict(self) -> dict:
        return {"op": self.op, "args": [a.to_dict() for a in self.args]}

    @classmethod
    def from_dict(cls, data: Mapping):
        return poly_from_dict(data)

    def __eq__(self, other):
        if not isinstance(other, PolyExpr):
            return NotImplemented
        return self.op == other.op and self.args == other.args

    def __hash__(self):
        return hash((self.op, self.args))

    def __repr__(self):
        sep = " + " if self.op == "sum" else " * "
        return "(" + sep.join(repr(a) for a in self.args) + ")"


def _build(op: str, args: list, collapse: bool = False):
    """Assemble an expression, folding constant factors/summands."""
    nv = args[0].num_vars
    if op == "prod":
        const = Fraction(1)
        rest = []
        for a in args:
            if isinstance(a, Polynomial) and a.is_constant():
                const *= a.constant_value()
            else:
                rest.append(a)
        if not const:
            return Polynomial.zero(nv)
        if not rest:
            return Polynomial.constant(const, nv)
        if const != 1:
            rest.append(Polynomial.constant(const, nv))
    else:
        polys = [a for a in args if isinstance(a, Polynomial)]
        rest = [a for a in args if not isinstance(a, Polynomial)]
        if polys:
            merged = reduce(lambda u, v: u + v, polys)
            if not merged.is_zero() or not rest:
                rest.append(merged)
    if len(rest) == 1:
        return rest[0]
    if collapse and all(isinstance(a, Polynomial) for a in rest) and op == "prod":
        if math.prod(len(a) for a in rest) <= 4096:
            return reduce(lambda u, v: u * v, rest)
    return PolyExpr(op, rest)


def psum(*args):
    """Sum of polynomials/expressions, folding polynomial summands together."""
    return _build("sum", list(args))


def pprod(*args):
    """Product of polynomials/expressions, kept factored."""
    return _build("prod", list(args))


def poly_from_dict(data: Mapping):
    if "op" in data:
        return _build(data["op"], [poly_from_dict(a) for a in data["args"]])
    return Polynomial.from_dict(data)


# -- module-level operations --------------------------------------------------

def poly_arith(a: Polynomial, b: Polynomial, op: str) -> Polynomial:
    """Exact ``a + b``, ``a - b`` or ``a * b``."""
    if a.num_vars != b.num_vars:
        raise ValueError(f"variable-count mismatch: {a.num_vars} vs {b.num_vars}")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown op {op!r}")


def evaluate(p, point: Sequence) -> Fraction:
    return p.evaluate(point)


def embed(p: Polynomial, target_num_vars: int, position_map: Sequence[int]) -> Polynomial:
    """Re-index ``p`` into ``target_num_vars`` variables; variable i goes to slot position_map[i]."""
    position_map = list(position_map)
    if len(position_map) != p.num_vars:
        raise ValueError("position_map length must equal p.num_vars")
    if len(set(position_map)) != len(position_map):
        raise ValueError("position_map is not injective")
    if any(not 0 <= j < target_num_vars for j in position_map):
        raise ValueError("position_map index out of range")
    out = {}
    for e, c in p.terms.items():
        ne = [0] * target_num_vars
        for i, k in enumerate(e):
            ne[position_map[i]] = k
        out[tuple(ne)] = c
    return Polynomial._from_clean(target_num_vars, out)


def embed_expr(q, target_num_vars: int, position_map: Sequence[int]):
    if isinstance(q, Polynomial):
        return embed(q, target_num_vars, position_map)
    return _build(q.op, [embed_expr(a, target_num_vars, position_map) for a in q.args])


class MonomialBasis:
    """All monomials of total degree <= ``degree_bound`` in graded-lex order.

    Degrees ascend; within one degree exponent tuples are in descending
    lexicographic order, so for two variables the order is
    ``1, a, b, a^2, ab, b^2, ...``.  Indices are computed combinatorially,
    so large bases are never materialised unless iterated.
    """

    def __init__(self, num_vars: int, degree_bound: int):
        if num_vars < 1 or degree_bound < 0:
            raise ValueError("need num_vars >= 1 and degree_bound >= 0")
        self.num_vars = num_vars
        self.degree_bound = degree_bound

    def __len__(self) -> int:
        return math.comb(self.num_vars + self.degree_bound, self.num_vars)

    def __eq__(self, other):
        return (isinstance(other, MonomialBasis) and other.num_vars == self.num_vars
                and other.degree_bound == self.degree_bound)

    def __hash__(self):
        return hash((self.num_vars, self.degree_bound))

    def __iter__(self) -> Iterator[tuple]:
        for d in range(self.degree_bound + 1):
            yield from _exponents_of_degree(self.num_vars, d)

    def __getitem__(self, k: int) -> tuple:
        if not 0 <= k < len(self):
            raise IndexError(k)
        n = self.num_vars
        d = 0
        while k >= math.comb(n - 1 + d, n - 1):
            k -= math.comb(n - 1 + d, n - 1)
            d += 1
        exps = []
        rem = d
        for i in range(n - 1):
            slots = n - i - 1
            for v in range(rem, -1, -1):
                block = math.comb(rem - v + slots - 1, slots - 1)
                if k < block:
                    exps.append(v)
                    rem -= v
                    break
                k -= block
        exps.append(rem)
        return tuple(exps)

    def index(self, exps: Sequence[int]) -> int:
        exps = tuple(exps)
        n = self.num_vars
        if len(exps) != n or any(e < 0 for e in exps):
            raise ValueError(f"bad exponent {exps}")
        d = sum(exps)
        if d > self.degree_bound:
            raise KeyError(f"{exps} exceeds degree bound {self.degree_bound}")
        k = math.comb(n + d - 1, n) if d else 0
        rem = d
        for i in range(n - 1):
            slots = n - i - 1
            for v in range(rem, exps[i], -1):
                k += math.comb(rem - v + slots - 1, slots - 1)
            rem -= exps[i]
        return k


def _exponents_of_degree(n: int, d: int) -> Iterator[tuple]:
    if n == 1:
        yield (d,)
        return
    for first in range(d, -1, -1):
        for rest in _exponents_of_degree(n - 1, d - first):
            yield (first,) + rest


def monomial_map(point: Sequence, basis: MonomialBasis,
                 indices: Sequence[int] | None = None) -> list[Fraction]:
    """Vector of monomials of ``basis`` evaluated at ``point`` (exact).

    With ``indices`` only those entries are produced (in the given order).
    """
    if len(point) != basis.num_vars:
        raise ValueError(f"point has length {len(point)}, expected {basis.num_vars}")
    pt = [as_fraction(v) for v in point]
    exps_iter = (basis[k] for k in indices) if indices is not None else iter(basis)
    out = []
    for e in exps_iter:
        acc = Fraction(1)
        for v, k in zip(pt, e):
            if k:
                acc *= v ** k
        out.append(acc)
    return out


def coefficient_vector(p: Polynomial, basis: MonomialBasis) -> list[Fraction]:
    """Dense coefficients of ``p`` in ``basis`` so that ``c . monomial_map(x) == p(x)``."""
    if p.num_vars != basis.num_vars:
        raise ValueError("variable-count mismatch")
    if p.degree() > basis.degree_bound:
        raise ValueError(f"degree {p.degree()} exceeds basis bound {basis.degree_bound}")
    out = [Fraction(0)] * len(basis)
    for e, c in p.terms.items():
        out[basis.index(e)] = c
    return out


def dot(u: Sequence[Fraction], v: Sequence[Fraction]) -> Fraction:
    return sum((a * b for a, b in zip(u, v)), Fraction(0))


def squared_norm_power(num_vars: int, n_upper: int, power: int) -> Polynomial:
    """``(x_0^2 + ... + x_{n_upper-1}^2) ** (power // 2)`` for even ``power``."""
    if power % 2 or power <= 0:
        raise ValueError("power must be a positive even integer")
    xs = Polynomial.variables(num_vars)
    sq = reduce(lambda u, v: u + v, (xs[i] * xs[i] for i in range(n_upper)),
                Polynomial.zero(num_vars))
    return sq ** (power // 2)


__all__ = [
    "Polynomial", "PolyExpr", "MonomialBasis", "as_fraction", "poly_arith", "evaluate",
    "embed", "embed_expr", "monomial_map", "coefficient_vector", "dot", "psum", "pprod",
    "poly_from_dict", "squared_norm_power",
]
