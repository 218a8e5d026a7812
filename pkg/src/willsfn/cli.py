"""Command-line front end: compute, check, reproduce, fuzz.

Exit codes: 0 all verdicts as expected, 1 unexpected violation (or a
counterexample that did not reproduce), 2 inconclusive, 64 usage error,
65 malformed body file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import replace
from itertools import combinations

import numpy as np

from . import bodies as B
from . import checks as C
from . import steiner as S
from . import wills as WL
from .config import DEFAULT_SEED, MCConfig
from .errors import BodySpecError, MissingInput, UnknownCheck

EX_OK, EX_VIOLATED, EX_INCONCLUSIVE, EX_USAGE, EX_DATAERR = 0, 1, 2, 64, 65

REPRODUCE_SAMPLES = 1000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def _param(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError("expected KEY=VALUE")
    key, val = text.split("=", 1)
    try:
        return key, json.loads(val)
    except json.JSONDecodeError:
        return key, val


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--samples", type=int, default=None, help="Monte-Carlo samples per estimate")
    common.add_argument("--seed", type=_u64, default=DEFAULT_SEED, help="64-bit seed (decimal or 0x...)")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out", default=None, help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--tol", type=float, default=None, help="relative round-off floor for verdicts")

    p = _Parser(prog="willsfn", description="Wills functional of convex bodies and its inequalities.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    c = sub.add_parser("compute", parents=[common], help="W, V_i, V_1, circumradius and volume of bodies")
    c.add_argument("--body", action="append", default=[], required=True)
    c.add_argument("--dump-normalized", action="store_true", help="print the parsed bodies as JSON and exit")

    k = sub.add_parser("check", parents=[common], help="run registry entries on bodies")
    k.add_argument("--body", action="append", default=[])
    k.add_argument("--check", action="append", default=[], required=True, help="entry id, name or 'all'")
    k.add_argument("--dim", type=int, default=None, help="dimension for parametric entries")
    k.add_argument("--param", action="append", default=[], type=_param, help="extra KEY=VALUE (JSON value)")

    r = sub.add_parser("reproduce", parents=[common], help="the fixed suite of numeric examples")
    r.add_argument("--dim", type=int, default=None, help="restrict parametric entries to this dimension")

    f = sub.add_parser("fuzz", parents=[common], help="random bodies; smallest margins per entry")
    f.add_argument("--dim", type=int, default=2)
    f.add_argument("--count", type=int, default=10, help="number of random bodies")
    f.add_argument("--check", action="append", default=[])

    sub.add_parser("list", help="print the registry")
    return p


def _config(args) -> MCConfig:
    samples = args.samples if args.samples is not None else 100_000
    if samples < 1:
        raise UsageError("--samples must be positive")
    if args.workers < 1:
        raise UsageError("--workers must be positive")
    cfg = MCConfig(samples=samples, seed=args.seed, workers=args.workers)
    if args.tol is not None:
        if not args.tol >= 0:
            raise UsageError("--tol must be nonnegative")
        cfg = cfg.with_(tol=replace(cfg.tol, verdict_rel=args.tol))
    return cfg


class BodyFileError(Exception):
    def __init__(self, file, message):
        super().__init__(f"{file}: {message}")


def _load(paths) -> list[B.ConvexBody]:
    out = []
    for path in paths:
        try:
            out.append(B.load_body(path))
        except BodySpecError as exc:
            raise BodyFileError(path, str(exc)) from exc
        except OSError as exc:
            raise BodyFileError(path, exc.strerror or str(exc)) from exc
    return out


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _csv_cell(v):
    if isinstance(v, (dict, list)):
        if v and all(isinstance(x, str) for x in v):
            return " | ".join(v)
        return json.dumps(v, sort_keys=True)
    return "" if v is None else v


def render(rows: list[dict], fmt: str, columns=None) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=2, allow_nan=False) + "\n"
    columns = list(columns or (rows[0].keys() if rows else []))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({c: _csv_cell(row.get(c)) for c in columns})
    return buf.getvalue()


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def exit_code(reports) -> int:
    if any(not r.matches_expectation for r in reports):
        return EX_VIOLATED
    if any(r.verdict == C.INCONCLUSIVE for r in reports):
        return EX_INCONCLUSIVE
    return EX_OK


def _summary(reports, stream=None):
    stream = stream or sys.stderr
    for r in reports:
        tag = "" if r.matches_expectation else "  UNEXPECTED"
        exp = f" (expected {r.expected})" if r.expected else ""
        print(f"{r.entry:>3} {r.check_id:<34} {r.verdict:<13}{exp} margin={_fmt(r.margin)} "
              f"uncertainty={_fmt(r.uncertainty)}{tag}", file=stream)


def _fmt(x) -> str:
    return "nan" if x is None or not math.isfinite(x) else f"{x:.6g}"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_compute(args) -> int:
    bodies = _load(args.body)
    if args.dump_normalized:
        rows = [b.to_dict() for b in bodies]
        _emit(json.dumps(rows if len(rows) > 1 else rows[0], indent=2) + "\n", args.out)
        return EX_OK
    cfg = _config(args)
    rows = []
    for path, b in zip(args.body, bodies):
        iv = S.intrinsic_volumes(b, cfg)
        w = iv.total()
        r, exact = B.circumradius(b, return_exact=True)
        vol = S.volume(b, cfg)
        rows.append({
            "body": path, "dim": b.dim, "kind": b.kind,
            "W": w.value, "W_stderr": w.stderr,
            "V": [float(x) for x in iv.values], "V_stderr": [float(x) for x in iv.stderr],
            "V1": float(iv.values[1]) if b.dim >= 1 else 0.0,
            "cir": r, "cir_exact": bool(exact),
            "vol": vol.value, "vol_stderr": vol.stderr,
            "method": iv.method, "seed": cfg.seed, "samples": cfg.samples,
        })
    _emit(render(rows, args.format), args.out)
    return EX_OK


def _selected(names) -> list[C.Entry]:
    out = []
    for name in names:
        if name == "all":
            out.extend(C.entries())
        else:
            try:
                out.append(C.resolve(name))
            except UnknownCheck as exc:
                raise UsageError(exc.args[0]) from exc
    seen, uniq = set(), []
    for e in out:
        if e.id not in seen:
            seen.add(e.id)
            uniq.append(e)
    return sorted(uniq, key=lambda e: e.id)


def _jobs(entries, bodies, dim, params, explicit):
    """(entry, bodies, params) in registry order, then body order."""
    jobs = []
    for e in entries:
        p = dict(params)
        if e.parametric:
            if dim is not None:
                p.setdefault("n", dim)
            jobs.append((e, [], p))
            continue
        if e.bodies == 1:
            if not bodies:
                if explicit:
                    raise UsageError(f"{e.name} needs --body")
                continue
            jobs.extend((e, [b], p) for b in bodies)
        else:
            pairs = [(a, b) for a, b in combinations(bodies, 2)
                     if e.id == 25 or a.dim == b.dim]
            if not pairs:
                if explicit:
                    raise UsageError(f"{e.name} needs two --body inputs")
                continue
            jobs.extend((e, [a, b], p) for a, b in pairs)
    return jobs


def _run_jobs(jobs, cfg):
    reports = []
    for e, bs, p in jobs:
        try:
            reports.append(C.run_check(e, bs, p, cfg))
        except MissingInput as exc:
            raise UsageError(f"{e.name}: {exc}") from exc
    return reports


def cmd_check(args) -> int:
    cfg = _config(args)
    if cfg.samples < C.MIN_SAMPLES:
        raise UsageError(f"check needs --samples >= {C.MIN_SAMPLES}")
    bodies = _load(args.body)
    entries = _selected(args.check)
    explicit = "all" not in args.check
    jobs = _jobs(entries, bodies, args.dim, dict(args.param), explicit)
    reports = _run_jobs(jobs, cfg)
    _emit(render([r.as_dict() for r in reports], args.format, C.REPORT_COLUMNS), args.out)
    _summary(reports)
    return exit_code(reports)


def reproduce_jobs(dim: int | None = None):
    def dims(rng):
        return [d for d in rng if dim is None or d == dim]

    jobs = []
    for n in dims(range(2, 7)):
        jobs.append((12, {"n": n, "exponent": 0.5}))
    for n in dims(range(2, 7)):
        jobs.append((12, {"n": n, "exponent": "1/n"}))
    for n in dims(range(2, 7)):
        jobs.append((13, {"n": n}))
    for n in dims(range(3, 7)):
        jobs.append((14, {"n": n}))
    for k in (1, 2, 4, 5):
        if dim is None or dim == 10:
            jobs.append((19, {"n": 10, "k": k}))
    for n in dims((3, 9)):
        jobs.append((23, {"n": n}))
    return jobs


def cmd_reproduce(args) -> int:
    cfg = MCConfig(samples=REPRODUCE_SAMPLES, seed=args.seed, workers=args.workers)
    if args.tol is not None:
        cfg = cfg.with_(tol=replace(cfg.tol, verdict_rel=args.tol))
    reports = [C.run_check(i, [], p, cfg) for i, p in reproduce_jobs(args.dim)]
    phi = C.solve_phi(0.91)
    table = C.cn_table(20)
    lines = [f"# closed-form routes; samples pinned at {REPRODUCE_SAMPLES} (unused by exact values)",
             f"{'entry':<6}{'params':<30}{'lhs':>22}{'rhs':>22}{'margin':>14}  {'verdict':<13}{'expected':<10}"]
    for r in reports:
        params = json.dumps(r.inputs["params"], sort_keys=True)
        lines.append(f"{r.entry:<6}{params:<30}{r.lhs.value:>22.15g}{r.rhs.value:>22.15g}"
                     f"{r.margin:>14.6g}  {r.verdict:<13}{r.expected or '-':<10}"
                     f"{'' if r.matches_expectation else '  MISMATCH'}")
    lines.append("")
    lines.append("phi(t) = a1 + a2 t + a3 t^2 on [0, 0.91]")
    lines.append(f"  linear solve  a = {', '.join(f'{x:.15g}' for x in phi.coefficients)}")
    lines.append(f"  closed form   a = {', '.join(f'{x:.15g}' for x in phi.closed_form)}")
    lines.append(f"  moment residuals {', '.join(f'{x:.3g}' for x in phi.residuals)}; all positive: {phi.positive}")
    lines.append("")
    lines.append(f"{'n':>3}{'binom(2n,n)':>16}{'8^(n/2)':>22}  C_n branch")
    for row in table:
        if row["n"] >= 2:
            lines.append(f"{row['n']:>3}{row['binom']:>16}{row['eight_pow']:>22.15g}  {row['branch']}")
    text = "\n".join(lines) + "\n"
    if args.out:
        rows = [r.as_dict() for r in reports]
        _emit(render(rows, args.format, C.REPORT_COLUMNS), args.out)
    sys.stdout.write(text)
    ok = phi.positive and np.max(np.abs(phi.residuals)) < 1e-10 and phi.agreement < 1e-10
    code = exit_code(reports)
    return code if ok or code != EX_OK else EX_VIOLATED


def fuzz_bodies(dim: int, count: int, seed: int) -> list[tuple[str, B.ConvexBody]]:
    rng = np.random.default_rng([seed & 0xFFFFFFFF, seed >> 32, dim])
    out = []
    for i in range(count):
        kind = i % 4
        if kind == 0 or kind == 3:
            body = C.random_polytope(dim, rng)
        elif kind == 1:
            body = B.Ball(dim, float(rng.uniform(0.05, 3.0)))
        else:
            lo = rng.normal(size=dim)
            body = B.Box(np.column_stack([lo, lo + rng.uniform(0.05, 3.0, dim)]))
        out.append((f"random {i} ({body.kind})", body))
    return out


def cmd_fuzz(args) -> int:
    cfg = _config(args)
    if cfg.samples < C.MIN_SAMPLES:
        raise UsageError(f"fuzz needs --samples >= {C.MIN_SAMPLES}")
    if args.dim < 2 or args.count < 1:
        raise UsageError("fuzz needs --dim >= 2 and --count >= 1")
    named = fuzz_bodies(args.dim, args.count, cfg.seed)
    bodies = [b for _, b in named]
    entries = [e for e in _selected(args.check or ["all"]) if not e.parametric]
    if args.dim != 2:
        entries = [e for e in entries if e.id != 11]
    reports = []
    for e, bs, p in _jobs(entries, bodies, None, {}, False):
        if e.id in (24, 25):
            continue  # need John-position or orthogonal inputs
        reports.append(C.run_check(e, bs, p, cfg))
    rows = []
    for e in entries:
        mine = [r for r in reports if r.entry == e.id and r.margin is not None and math.isfinite(r.margin)]
        if not mine:
            continue
        worst = min(mine, key=lambda r: r.margin - r.uncertainty)
        rows.append({"check_id": e.name, "entry": e.id, "runs": len(mine), "min_margin": worst.margin,
                     "uncertainty": worst.uncertainty, "verdict": worst.verdict,
                     "bodies": worst.inputs["bodies"], "seed": cfg.seed, "samples": cfg.samples})
    _emit(render(rows, args.format), args.out)
    _summary(reports)
    return exit_code(reports)


def cmd_list(args) -> int:
    for e in C.entries():
        flags = "informational" if e.informational else ("parametric" if e.parametric else "")
        print(f"{e.id:>3} {e.name:<34} {flags:<14} {e.statement}")
    return EX_OK


COMMANDS = {"compute": cmd_compute, "check": cmd_check, "reproduce": cmd_reproduce, "fuzz": cmd_fuzz,
            "list": cmd_list}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EX_USAGE
    except BodyFileError as exc:
        print(f"malformed body: {exc}", file=sys.stderr)
        return EX_DATAERR
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
