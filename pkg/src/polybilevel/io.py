"""JSON interchange records for polynomials, specifications, programs and instances.

Every record is a plain JSON object.  Composite objects carry a ``"type"`` tag
so that program metadata (which may embed specifications, bounds or
instances) round-trips without a schema on the reader's side.  Rationals are
written as ``"num/den"`` strings, infinite box bounds as ``"-inf"``/``"+inf"``.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Any

from .encoder import BilevelProgram, LiftedProgram
from .hardness import SubsetSumIntervalInstance
from .poly import Polynomial, PolyExpr, poly_from_dict
from .semialg import (BasicSet, ClosedSASet, GrowthBounds, PiecewisePolySpec, SAFunctionSpec,
                      SASet)

PROGRAM_FORMAT = "polybilevel.program/1"


class FormatError(ValueError):
    """A record does not follow the interchange format."""


def frac_str(v: Fraction) -> str:
    return f"{v.numerator}/{v.denominator}"


def value_str(v) -> str:
    """Extended values: exact rationals as ``num/den``, infinities as sentinels."""
    if isinstance(v, float):
        if math.isinf(v):
            return "+inf" if v > 0 else "-inf"
        return repr(v)
    return frac_str(Fraction(v))


def parse_value(s):
    if isinstance(s, (int, Fraction)):
        return Fraction(s)
    if not isinstance(s, str):
        raise FormatError(f"expected a rational string, got {s!r}")
    s = s.strip()
    if s in ("+inf", "inf"):
        return math.inf
    if s == "-inf":
        return -math.inf
    try:
        return Fraction(s)
    except ValueError as exc:
        raise FormatError(f"not a rational: {s!r}") from exc


# -- sets and specifications -----------------------------------------------------------

def basic_to_dict(b: BasicSet) -> dict:
    cons = [{"poly": b.equality.to_dict(), "relation": "=0"}]
    cons += [{"poly": q.to_dict(), "relation": ">0"} for q in b.strict]
    return {"type": "basic-set", "num_vars": b.num_vars, "constraints": cons}


def basic_from_dict(d: dict) -> BasicSet:
    _expect(d, "basic-set")
    n = int(d["num_vars"])
    eq, strict = None, []
    for c in d["constraints"]:
        p = Polynomial.from_dict(c["poly"])
        if c["relation"] == "=0":
            if eq is not None:
                raise FormatError("a basic set has exactly one equality")
            eq = p
        elif c["relation"] == ">0":
            strict.append(p)
        else:
            raise FormatError(f"basic-set relation must be '=0' or '>0', got {c['relation']!r}")
    if eq is None:
        eq = Polynomial.zero(n)
    return BasicSet(n, eq, tuple(strict))


def saset_to_dict(s: SASet) -> dict:
    return {"type": "sa-set", "num_vars": s.num_vars, "pieces": [basic_to_dict(b) for b in s.pieces]}


def saset_from_dict(d: dict) -> SASet:
    _expect(d, "sa-set")
    return SASet(int(d["num_vars"]), tuple(basic_from_dict(b) for b in d["pieces"]))


def closed_to_dict(c: ClosedSASet) -> dict:
    clauses = [[{"poly": p.to_dict(), "relation": ">=0"} for p in cl] for cl in c.clauses]
    return {"type": "closed-sa-set", "num_vars": c.num_vars, "clauses": clauses}


def closed_from_dict(d: dict) -> ClosedSASet:
    _expect(d, "closed-sa-set")
    clauses = []
    for cl in d["clauses"]:
        row = []
        for c in cl:
            if c["relation"] != ">=0":
                raise FormatError("closed-set clauses only hold '>=0' entries")
            row.append(Polynomial.from_dict(c["poly"]))
        clauses.append(tuple(row))
    return ClosedSASet(int(d["num_vars"]), tuple(clauses))


def bounds_to_dict(b: GrowthBounds) -> dict:
    return {"type": "growth-bounds", "B": frac_str(b.B), "N": b.N}


def bounds_from_dict(d: dict) -> GrowthBounds:
    _expect(d, "growth-bounds")
    return GrowthBounds(Fraction(d["B"]), int(d["N"]))


def parse_bounds(text: str) -> GrowthBounds:
    """``"B=1,N=2"`` as used on the command line."""
    fields = {}
    for part in text.split(","):
        key, _, val = part.partition("=")
        fields[key.strip()] = val.strip()
    if set(fields) != {"B", "N"}:
        raise FormatError(f"bounds must look like B=1,N=2, got {text!r}")
    return GrowthBounds(Fraction(fields["B"]), int(fields["N"]))


def safunc_to_dict(s: SAFunctionSpec, closure: ClosedSASet | None = None) -> dict:
    out = {"type": "sa-function", "n": s.n, "graph": saset_to_dict(s.graph),
           "dom": saset_to_dict(s.dom), "dom_plus": saset_to_dict(s.dom_plus),
           "dom_minus": saset_to_dict(s.dom_minus),
           "bounds": bounds_to_dict(s.bounds) if s.bounds else None}
    if closure is not None:
        out["closure"] = closed_to_dict(closure)
    return out


def safunc_from_dict(d: dict) -> SAFunctionSpec:
    _expect(d, "sa-function")
    bounds = bounds_from_dict(d["bounds"]) if d.get("bounds") else None
    return SAFunctionSpec(int(d["n"]), saset_from_dict(d["graph"]), saset_from_dict(d["dom"]),
                          saset_from_dict(d["dom_plus"]), saset_from_dict(d["dom_minus"]), bounds)


def piecewise_to_dict(s: PiecewisePolySpec) -> dict:
    return {"type": "piecewise", "n": s.n, "cells": [saset_to_dict(c) for c in s.cells],
            "polys": [p.to_dict() for p in s.polys],
            "closures": None if s.closures is None else [closed_to_dict(c) for c in s.closures]}


def piecewise_from_dict(d: dict) -> PiecewisePolySpec:
    _expect(d, "piecewise")
    closures = None if d.get("closures") is None else tuple(closed_from_dict(c) for c in d["closures"])
    return PiecewisePolySpec(int(d["n"]), tuple(saset_from_dict(c) for c in d["cells"]),
                             tuple(Polynomial.from_dict(p) for p in d["polys"]), closures)


def instance_to_dict(inst: SubsetSumIntervalInstance) -> dict:
    return inst.to_dict()


def instance_from_dict(d: dict) -> SubsetSumIntervalInstance:
    try:
        return SubsetSumIntervalInstance.from_dict(d)
    except KeyError as exc:
        raise FormatError(f"instance record lacks {exc}") from exc


# -- generic tagged encoding (program metadata) -----------------------------------------

def to_record(obj) -> Any:
    """Encode metadata values: specs, sets, bounds, instances, polynomials and containers."""
    if isinstance(obj, SAFunctionSpec):
        return safunc_to_dict(obj)
    if isinstance(obj, PiecewisePolySpec):
        return piecewise_to_dict(obj)
    if isinstance(obj, ClosedSASet):
        return closed_to_dict(obj)
    if isinstance(obj, SASet):
        return saset_to_dict(obj)
    if isinstance(obj, BasicSet):
        return basic_to_dict(obj)
    if isinstance(obj, GrowthBounds):
        return bounds_to_dict(obj)
    if isinstance(obj, SubsetSumIntervalInstance):
        return {"type": "ssi-instance", **obj.to_dict()}
    if isinstance(obj, (Polynomial, PolyExpr)):
        return {"type": "poly", "expr": obj.to_dict()}
    if isinstance(obj, Fraction):
        return {"type": "rational", "value": frac_str(obj)}
    if isinstance(obj, dict):
        return {str(k): to_record(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_record(v) for v in obj]
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    raise FormatError(f"cannot encode {type(obj).__name__}")


_DECODERS = {
    "sa-function": safunc_from_dict,
    "piecewise": piecewise_from_dict,
    "closed-sa-set": closed_from_dict,
    "sa-set": saset_from_dict,
    "basic-set": basic_from_dict,
    "growth-bounds": bounds_from_dict,
    "ssi-instance": lambda d: SubsetSumIntervalInstance.from_dict(d),
    "poly": lambda d: poly_from_dict(d["expr"]),
    "rational": lambda d: Fraction(d["value"]),
}


def from_record(rec) -> Any:
    if isinstance(rec, list):
        return [from_record(v) for v in rec]
    if isinstance(rec, dict):
        tag = rec.get("type")
        if tag in _DECODERS:
            return _DECODERS[tag](rec)
        return {k: from_record(v) for k, v in rec.items()}
    return rec


def spec_from_dict(d: dict):
    """Any specification record (sa-function, piecewise, closed set, basic set, SA set)."""
    tag = d.get("type")
    if tag not in ("sa-function", "piecewise", "closed-sa-set", "basic-set", "sa-set"):
        raise FormatError(f"unknown specification type {tag!r}")
    return _DECODERS[tag](d)


# -- programs --------------------------------------------------------------------------

def _bound_str(v) -> str:
    return value_str(v)


def program_to_dict(prog: BilevelProgram) -> dict:
    meta = dict(prog.metadata)
    roles = meta.get("roles")
    if roles is not None:
        meta["roles"] = {k: list(v) for k, v in roles.items()}
    return {"format": PROGRAM_FORMAT, "n": prog.n, "m": prog.m, "mode": prog.mode,
            "P": prog.P.to_dict(), "Q": prog.Q.to_dict(),
            "box": [[_bound_str(lo), _bound_str(hi)] for lo, hi in prog.box],
            "metadata": to_record(meta)}


def program_from_dict(d: dict) -> BilevelProgram:
    if d.get("format") != PROGRAM_FORMAT:
        raise FormatError(f"not a program record (format {d.get('format')!r})")
    box = [(parse_value(lo), parse_value(hi)) for lo, hi in d["box"]]
    meta = from_record(d.get("metadata") or {})
    return BilevelProgram(int(d["n"]), int(d["m"]), poly_from_dict(d["P"]), poly_from_dict(d["Q"]),
                          box, d.get("mode", "optimistic"), meta)


def lifted_to_dict(lp: LiftedProgram, limit: int = 0) -> dict:
    """Summary of a lifted program; ``limit`` > 0 also lists that many coefficients."""
    out = {"type": "lifted-program", "n": lp.n, "lower_vars": lp.basis.num_vars,
           "degree": lp.basis.degree_bound, "basis_size": len(lp.basis),
           "nonzero_coefficients": len(lp.objective_coeffs),
           "upper_selector": lp.upper_selector,
           "upper_selector_exponents": list(lp.basis[lp.upper_selector]),
           "multiplier": lp.multiplier.to_dict()}
    if limit:
        out["coefficients"] = [{"index": k, "exponents": list(lp.basis[k]), "coeff": c.to_dict()}
                               for k, c in sorted(lp.objective_coeffs.items())[:limit]]
    return out


# -- files -------------------------------------------------------------------------------

def dumps(record) -> str:
    """Canonical JSON text: sorted keys, fixed separators, trailing newline."""
    return json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n"


def write_json(path, record) -> None:
    Path(path).write_text(dumps(record))


def read_json(path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc


def save_program(prog: BilevelProgram, path) -> None:
    write_json(path, program_to_dict(prog))


def load_program(path) -> BilevelProgram:
    return program_from_dict(read_json(path))


def _expect(d: dict, tag: str) -> None:
    if not isinstance(d, dict) or d.get("type") != tag:
        raise FormatError(f"expected a {tag!r} record, got {d.get('type') if isinstance(d, dict) else d!r}")


__all__ = [
    "FormatError", "PROGRAM_FORMAT", "program_to_dict", "program_from_dict", "save_program",
    "load_program", "spec_from_dict", "safunc_to_dict", "piecewise_to_dict", "closed_to_dict",
    "basic_to_dict", "saset_to_dict", "bounds_to_dict", "parse_bounds", "instance_from_dict",
    "instance_to_dict", "to_record", "from_record", "dumps", "read_json", "write_json",
    "value_str", "parse_value", "lifted_to_dict",
]
