"""Command-line front end: ``polybilevel <verb> ...``.

Exit codes: 0 on success, 1 when a verification fails, 2 on input or format
errors.  Results go to stdout (or ``--out``) as canonical JSON; diagnostics
go to stderr as one JSON record per line.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
import warnings
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io
from .encoder import (OPTIMISTIC, PESSIMISTIC, BoundsError, encode_indicator_convex,
                      encode_lsc_bounded, encode_piecewise_unbounded, encode_pw_lsc_bounded,
                      encode_sa_unbounded, moment_lift)
from .hardness import (OracleCapError, TrivialInstanceError, certify, oracle_decide,
                       reduce_to_bilevel, verify_reduction)
from .semialg import (BasicSet, ClosedSASet, PiecewisePolySpec, SAFunctionSpec, SASet, SpecError,
                      disjointify, normalize_index_sets, piecewise_eval, target_eval)
from .valuefn import (PRECISE, EvalConfig, RecipeError, cross_validate, eval_constructed,
                      eval_generic, semicontinuity_probe)

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
CONSTRUCTIONS = ("sa-unbounded", "lsc-bounded", "indicator", "piecewise-unbounded", "pw-lsc-bounded")


class InputError(Exception):
    """Bad arguments or unreadable inputs (exit code 2)."""


def diag(level: str, kind: str, message: str, **extra) -> None:
    rec = {"level": level, "kind": kind, "message": message, **extra}
    sys.stderr.write(json.dumps(rec, sort_keys=True) + "\n")


def emit(record, out: str | None) -> None:
    text = io.dumps(record)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- argument helpers ------------------------------------------------------------------

def parse_points(text: str, n: int, seed: int) -> list[list[Fraction]]:
    """Point sets: ``grid:[lo,hi]:count`` (tensor grid), ``random:count:[lo,hi]``
    (seeded dyadic rationals), ``file:path.json`` or a literal ``1/2,0;1,1``."""
    kind, _, rest = text.partition(":")
    try:
        if kind == "grid":
            interval, _, count = rest.rpartition(":")
            lo, hi = _interval(interval)
            k = int(count)
            if k < 1:
                raise InputError("grid needs at least one point")
            axis = [lo + (hi - lo) * Fraction(i, max(k - 1, 1)) for i in range(k)]
            return [list(p) for p in itertools.product(axis, repeat=n)]
        if kind == "random":
            count, _, interval = rest.partition(":")
            lo, hi = _interval(interval) if interval else (Fraction(-2), Fraction(2))
            rng = np.random.default_rng(seed)
            ticks = rng.integers(0, 1 << 16, size=(int(count), n))
            return [[lo + (hi - lo) * Fraction(int(v), 1 << 16) for v in row] for row in ticks]
        if kind == "file":
            data = io.read_json(rest)
            return [[io.parse_value(str(v)) for v in row] for row in data]
        rows = [r for r in text.split(";") if r.strip()]
        return [[Fraction(v.strip()) for v in r.split(",")] for r in rows]
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"cannot parse points {text!r}: {exc}") from exc


def _interval(text: str) -> tuple[Fraction, Fraction]:
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise InputError(f"interval must look like [lo,hi], got {text!r}")
    lo, hi = text[1:-1].split(",")
    return Fraction(lo.strip()), Fraction(hi.strip())


def load_config(arg: str | None) -> EvalConfig | None:
    """``--config`` takes a JSON object (inline or ``@file``) or the word ``precise``."""
    if arg is None:
        return None
    if arg == "precise":
        return PRECISE
    try:
        data = io.read_json(arg[1:]) if arg.startswith("@") else json.loads(arg)
        return EvalConfig.from_dict(data)
    except (ValueError, TypeError) as exc:
        raise InputError(f"bad --config: {exc}") from exc


def _read(path: str):
    try:
        return io.read_json(path)
    except FileNotFoundError as exc:
        raise InputError(f"no such file: {path}") from exc


def _label(x) -> list[str]:
    return [io.frac_str(Fraction(v)) for v in x]


# -- verbs ----------------------------------------------------------------------------

def cmd_compile(args) -> int:
    raw = _read(args.spec)
    spec = io.spec_from_dict(raw)
    bounds = io.parse_bounds(args.bounds) if args.bounds else None
    c = args.construction
    if c == "sa-unbounded":
        if not isinstance(spec, SAFunctionSpec):
            raise InputError("sa-unbounded needs an sa-function specification")
        prog = encode_sa_unbounded(normalize_index_sets(spec), args.mode)
    elif c == "lsc-bounded":
        closure = spec if isinstance(spec, ClosedSASet) else None
        if isinstance(spec, SAFunctionSpec):
            if "closure" not in raw:
                raise InputError("lsc-bounded needs the closure of the graph ('closure' field)")
            closure = io.closed_from_dict(raw["closure"])
            bounds = bounds or spec.bounds
        if closure is None:
            raise InputError("lsc-bounded needs a closed-sa-set or an sa-function with a closure")
        if bounds is None:
            raise InputError("lsc-bounded needs --bounds B=..,N=..")
        prog = encode_lsc_bounded(closure, bounds, args.mode)
    elif c == "indicator":
        if not isinstance(spec, BasicSet):
            raise InputError("indicator needs a basic-set specification")
        prog = encode_indicator_convex(spec, args.mode)
    elif c == "piecewise-unbounded":
        if not isinstance(spec, PiecewisePolySpec):
            raise InputError("piecewise-unbounded needs a piecewise specification")
        prog = encode_piecewise_unbounded(spec, args.mode, cap=args.cap)
    else:
        if not isinstance(spec, PiecewisePolySpec):
            raise InputError("pw-lsc-bounded needs a piecewise specification with closures")
        if bounds is None:
            raise InputError("pw-lsc-bounded needs --bounds B=..,N=..")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", RuntimeWarning)
            prog = encode_pw_lsc_bounded(spec, bounds, args.mode)
        for w in caught:
            diag("warning", "selection-rule", str(w.message))
    record = io.program_to_dict(prog)
    emit(record, args.out)
    diag("info", "compiled", f"{c} program with n={prog.n}, m={prog.m}",
         construction=c, n=prog.n, m=prog.m, mode=prog.mode)
    return EXIT_OK


def cmd_reduce(args) -> int:
    inst = io.instance_from_dict(_read(args.instance))
    prog, cert = reduce_to_bilevel(inst)
    emit(io.program_to_dict(prog), args.out)
    if args.certify:
        sys.stdout.write(io.dumps({"certificate": cert.to_dict()}))
        if not cert.ok:
            diag("error", "certificate", "reduction certificate failed", **cert.to_dict())
            return EXIT_FAIL
    return EXIT_OK


def cmd_certify(args) -> int:
    inst = io.instance_from_dict(_read(args.instance))
    cert = certify(inst)
    emit({"certificate": cert.to_dict(), "instance": inst.to_dict()}, args.out)
    return EXIT_OK if cert.ok else EXIT_FAIL


def cmd_oracle(args) -> int:
    inst = io.instance_from_dict(_read(args.instance))
    answer = oracle_decide(inst)
    record = {"instance": inst.to_dict(), "oracle": answer.to_dict()}
    status = EXIT_OK
    if args.check_reduction:
        report = verify_reduction(inst, nonbinary_points=args.nonbinary, seed=args.seed)
        record["reduction"] = report.to_dict()
        if not report.ok:
            diag("error", "reduction-mismatch", "program decision disagrees with the oracle",
                 mismatches=report.mismatches)
            status = EXIT_FAIL
    record["seed"] = args.seed
    emit(record, args.out)
    return status


def _evaluate_one(prog, x, evaluator: str, cfg):
    if evaluator == "exact":
        return io.value_str(eval_constructed(prog, x)), None
    res = eval_generic(prog, x, cfg)
    return io.value_str(res.value), res.diagnostics


def cmd_evaluate(args) -> int:
    prog = io.load_program(args.program)
    if args.mode:
        prog = type(prog)(prog.n, prog.m, prog.P, prog.Q, prog.box, args.mode, prog.metadata)
    cfg = load_config(args.config)
    if cfg is not None or args.seed:
        cfg = (cfg or EvalConfig()).with_overrides(seed=args.seed)
    points = parse_points(args.points, prog.n, args.seed)
    rows = []
    for x in points:
        value, info = _evaluate_one(prog, x, args.evaluator, cfg)
        row = {"x": _label(x), "value": value}
        if info is not None:
            row["q_min"] = info["q_min"]
        rows.append(row)
    if args.dump_grid:
        lines = ["\t".join(r["x"] + [r["value"]]) for r in rows]
        text = "\n".join(lines) + "\n"
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    emit({"evaluator": args.evaluator, "mode": prog.mode, "seed": args.seed,
          "config": cfg.to_dict() if cfg else None, "results": rows}, args.out)
    return EXIT_OK


def _reference(spec, x):
    if isinstance(spec, SAFunctionSpec):
        return target_eval(spec, x)
    if isinstance(spec, PiecewisePolySpec):
        return piecewise_eval(spec, x)
    if isinstance(spec, (BasicSet, SASet)):
        return Fraction(int(spec.contains(x)))
    raise InputError(f"no reference evaluator for {type(spec).__name__}")


def cmd_verify(args) -> int:
    prog = io.load_program(args.program)
    points = parse_points(args.points, prog.n, args.seed)
    if args.cross:
        report = cross_validate(prog, points, load_config(args.config) or PRECISE, tol=args.tol)
        for note in report.notices:
            diag("notice", "skipped", note)
        emit({"check": "cross-validate", "seed": args.seed, **report.to_dict()}, args.out)
        if not report.ok:
            first = report.mismatches[0]
            diag("error", "mismatch", "evaluators disagree", **first)
            return EXIT_FAIL
        return EXIT_OK
    if args.probe:
        bad = []
        for x in points:
            rep = semicontinuity_probe(prog, x, radius=Fraction(args.radius), seed=args.seed)
            if not rep.ok:
                bad.append({"x": _label(x), "violations": rep.violations})
        emit({"check": "semicontinuity", "mode": prog.mode, "points": len(points),
              "violations": bad, "ok": not bad, "seed": args.seed}, args.out)
        if bad:
            diag("error", "semicontinuity", "probe found violations", first=bad[0])
            return EXIT_FAIL
        return EXIT_OK
    if not args.spec:
        raise InputError("verify needs --spec, --cross or --probe")
    spec = io.spec_from_dict(_read(args.spec))
    checked = 0
    for x in points:
        want = _reference(spec, x)
        got = eval_constructed(prog, x)
        checked += 1
        if got != want:
            rec = {"x": _label(x), "expected": io.value_str(want), "got": io.value_str(got)}
            diag("error", "mismatch", "compiled value differs from the specification", **rec)
            emit({"check": "exact", "checked": checked, "ok": False, "first_mismatch": rec}, args.out)
            return EXIT_FAIL
    emit({"check": "exact", "checked": checked, "ok": True}, args.out)
    return EXIT_OK


def cmd_disjointify(args) -> int:
    spec = io.spec_from_dict(_read(args.spec))
    if isinstance(spec, BasicSet):
        spec = SASet.of(spec)
    if not isinstance(spec, SASet):
        raise InputError("disjointify needs an sa-set (or basic-set) record")
    cells = disjointify(spec, cap=args.cap)
    emit(io.saset_to_dict(SASet(spec.num_vars, tuple(cells))), args.out)
    diag("info", "disjointified", f"{len(cells)} disjoint cells", cells=len(cells))
    return EXIT_OK


def cmd_lift(args) -> int:
    prog = io.load_program(args.program)
    lifted = moment_lift(prog)
    emit(io.lifted_to_dict(lifted, limit=args.list), args.out)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polybilevel", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0, help="seed for every sampled point set")
    p.add_argument("--threads", type=int, default=1,
                   help="worker cap (evaluation currently runs on one thread)")
    sub = p.add_subparsers(dest="verb", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        sp.add_argument("--out", help="output file (default: stdout)")
        return sp

    sp = add("compile", cmd_compile, "compile a specification into a bilevel program")
    sp.add_argument("--construction", required=True, choices=CONSTRUCTIONS)
    sp.add_argument("--spec", required=True)
    sp.add_argument("--bounds", help="growth bounds, e.g. B=1,N=2")
    sp.add_argument("--mode", choices=(OPTIMISTIC, PESSIMISTIC), default=OPTIMISTIC)
    sp.add_argument("--cap", type=int, default=16, help="pooled-family cap for disjointification")

    sp = add("reduce", cmd_reduce, "compile a subset-sum-interval instance")
    sp.add_argument("--instance", required=True)
    sp.add_argument("--certify", action="store_true", help="print the degree/coefficient certificate")

    sp = add("certify", cmd_certify, "degree and coefficient certificate of a reduction")
    sp.add_argument("--instance", required=True)

    sp = add("oracle", cmd_oracle, "decide an instance exhaustively")
    sp.add_argument("--instance", required=True)
    sp.add_argument("--check-reduction", action="store_true",
                    help="also compare with the compiled program's sign on the binary cube")
    sp.add_argument("--nonbinary", type=int, default=0, help="random non-binary checks")

    sp = add("evaluate", cmd_evaluate, "evaluate a program's value function")
    sp.add_argument("--program", required=True)
    sp.add_argument("--points", required=True)
    sp.add_argument("--evaluator", choices=("exact", "generic"), default="exact")
    sp.add_argument("--config", help="EvalConfig overrides as JSON, @file or 'precise'")
    sp.add_argument("--mode", choices=(OPTIMISTIC, PESSIMISTIC))
    sp.add_argument("--dump-grid", action="store_true", help="tab-separated x and value columns")

    sp = add("verify", cmd_verify, "check a program against a specification or across evaluators")
    sp.add_argument("--program", required=True)
    sp.add_argument("--points", required=True)
    sp.add_argument("--spec")
    sp.add_argument("--cross", action="store_true", help="compare exact and generic evaluators")
    sp.add_argument("--probe", action="store_true", help="semicontinuity probe at each point")
    sp.add_argument("--radius", default="1/10")
    sp.add_argument("--tol", type=float, default=1e-3)
    sp.add_argument("--config", help="EvalConfig overrides for --cross")

    sp = add("disjointify", cmd_disjointify, "split a union of basic sets into disjoint cells")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--cap", type=int, default=16)

    sp = add("lift", cmd_lift, "linearise the lower objective in the moment basis")
    sp.add_argument("--program", required=True)
    sp.add_argument("--list", type=int, default=0, help="also list this many coefficients")
    return p


def _attach_points(argv: list[str]) -> list[str]:
    # literal points such as "-1;0" would otherwise be read as an option
    out, i = [], 0
    while i < len(argv):
        if argv[i] == "--points" and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"--points={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = _attach_points(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.threads < 1:
        diag("error", "input", "--threads must be positive")
        return EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, io.FormatError, SpecError, BoundsError, TrivialInstanceError,
            OracleCapError, KeyError, TypeError, ValueError, OSError) as exc:
        if isinstance(exc, RecipeError):
            diag("error", "recipe", str(exc))
            return EXIT_FAIL
        diag("error", "input", str(exc), exception=type(exc).__name__)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
