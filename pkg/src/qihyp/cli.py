"""Command-line runner: one subcommand per experiment family.

    qihyp <subcommand> --config params.json [--seed N] [--out PATH] [--ceiling-override]

The config file holds the parameter record of the subcommand; unknown keys
are rejected before anything runs. Reports go to ``--out`` (stdout if
omitted) as CSV for tables and JSON for everything else.

Exit status: 0 ok, 1 invalid input or resource ceiling, 2 a checked
mathematical property failed (the report is still written).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from . import freewords, grouplab, packing, product_qi
from .freewords import ResourceCeilingError
from .hyp2 import classify

OK, INVALID, VIOLATION = 0, 1, 2

# with --ceiling-override the ball ceiling is raised to this many elements
LARGE_BALL = 50_000_000


class ConfigError(ValueError):
    pass


class _Field:
    def __init__(self, kind, default=None, required=False, check: Optional[Callable] = None, why: str = ""):
        self.kind = kind
        self.default = default
        self.required = required
        self.check = check
        self.why = why


def _is_kind(value, kind) -> bool:
    if kind is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)
    if kind is int:
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "floats":
        return isinstance(value, list) and value and all(_is_kind(v, float) for v in value)
    if kind == "group":
        return isinstance(value, (str, dict))
    return isinstance(value, kind)


def _parse(obj, schema: Dict[str, _Field], where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected a JSON object")
    unknown = sorted(set(obj) - set(schema))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}; allowed {sorted(schema)}")
    out = {}
    for key, f in schema.items():
        if key not in obj:
            if f.required:
                raise ConfigError(f"{where}: missing required key {key!r}")
            out[key] = f.default
            continue
        value = obj[key]
        if not _is_kind(value, f.kind):
            raise ConfigError(f"{where}: {key!r} has the wrong type ({value!r})")
        if f.check is not None and not f.check(value):
            raise ConfigError(f"{where}: {key!r} = {value!r} but {f.why}")
        out[key] = value
    return out


def _positive(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _listify(v) -> List[float]:
    return [float(x) for x in (v if isinstance(v, list) else [v])]


# -- subcommand schemas ------------------------------------------------------------

PACKING = {
    "spaces": _Field(list, [packing.EUCLIDEAN, packing.HYPERBOLIC],
                     check=lambda v: v and all(s in packing.SPACES for s in v),
                     why=f"each space must be one of {list(packing.SPACES)}"),
    "R": _Field("floats", required=True),
    "r": _Field((int, float, list), required=True),
    "s": _Field((int, float, list), 0.0),
    "rejectSamples": _Field(int, packing.N_REJECT, check=_positive, why="it must be positive"),
}

GROWTH = {
    "group": _Field("group", required=True),
    "epsilon": _Field(float, required=True, check=_positive, why="it must be positive"),
    "variant": _Field(str, grouplab.SEMILOCAL, check=lambda v: v in (grouplab.SEMILOCAL, grouplab.CARRIERE),
                      why=f"it must be {grouplab.SEMILOCAL} or {grouplab.CARRIERE}"),
    "nMax": _Field(int, required=True, check=_nonneg, why="it must be nonnegative"),
    "dedupeQuantum": _Field(float, None),
    "maxSize": _Field(int, grouplab.MAX_BALL, check=_positive, why="it must be positive"),
}

FREEPAIR = {
    "group": _Field("group", required=True),
    "elliptic": _Field(str, None),
    "hyperbolic": _Field(str, None),
    "epsilon0": _Field(float, grouplab.DEFAULT_EPSILON0, check=_positive, why="it must be positive"),
    "maxCheckedLength": _Field(int, 8, check=_nonneg, why="it must be nonnegative"),
    "iMax": _Field(int, 2, check=_nonneg, why="it must be nonnegative"),
}

CONSTANTS = {
    "lambda": _Field(float, 1.0),
    "epsilon": _Field(float, 0.0),
    "delta": _Field(float, 0.0),
    "kappa": _Field(float, None),
    "a": _Field(float, 1.0),
    "r": _Field(float, required=True),
    "h0": _Field(float, required=True),
    "L": _Field(float, required=True),
    "D": _Field(float, required=True),
}

WORDS = {
    "iMax": _Field(int, required=True, check=_nonneg, why="it must be nonnegative"),
}


# -- runners -----------------------------------------------------------------------
# each returns (report text, list of property violations)

def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _fmt(x: float) -> str:
    return repr(float(x))


def run_packing(p: dict, seed: Optional[int], ctx: dict) -> Tuple[str, List[str]]:
    if seed is None:
        raise ConfigError("packing draws random samples; --seed is required")
    rs, ss = _listify(p["r"]), _listify(p["s"])
    rows, violations = [], []
    for space in p["spaces"]:
        for R in p["R"]:
            for r in rs:
                for s in ss:
                    try:
                        cfg = packing.PackingConfig(float(R), r, s, space)
                    except ValueError as exc:
                        raise ConfigError(str(exc)) from None
                    res = packing.greedy_pack(cfg, seed, p["rejectSamples"])
                    bound = packing.packing_bound(cfg)
                    if space == packing.EUCLIDEAN and res.count > bound:
                        violations.append(f"euclidean R={R} r={r} s={s}: count {res.count} > bound {bound}")
                    if space == packing.HYPERBOLIC and res.maximal and bound >= 1 and res.count < bound:
                        violations.append(f"hyperbolic R={R} r={r} s={s}: count {res.count} < bound {bound}")
                    rows.append([space, _fmt(R), _fmt(r), _fmt(s), seed, res.count, _fmt(bound),
                                 str(res.maximal).lower(), res.reject_samples])
    header = ["space", "R", "r", "s", "seed", "count", "bound", "maximal", "reject_samples"]
    return _csv(header, rows), violations


def _load_group(ref, base: Path) -> grouplab.GroupSpec:
    if isinstance(ref, dict):
        return grouplab.GroupSpec.from_json(ref)
    path = Path(ref)
    if not path.is_absolute():
        path = base / path
    if not path.exists():
        raise ConfigError(f"group file {path} does not exist")
    return grouplab.GroupSpec.from_json(_read_json(path))


def run_growth(p: dict, seed: Optional[int], ctx: dict) -> Tuple[str, List[str]]:
    spec = _load_group(p["group"], ctx["base"])
    try:
        cfg = grouplab.MetricConfig(p["epsilon"], p["variant"], p["dedupeQuantum"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    max_size = max(p["maxSize"], LARGE_BALL) if ctx["override"] else p["maxSize"]
    table = grouplab.semilocal_growth(spec, p["nMax"], cfg, max_size)
    violations = []
    rows = []
    for r in table.rows:
        if r.semilocal > r.ball or (r.local is not None and r.local > r.semilocal):
            violations.append(f"n={r.n}: counts not nested (ball {r.ball}, semilocal {r.semilocal}, local {r.local})")
        rows.append([r.n, r.ball, r.semilocal, "" if r.local is None else r.local])
    return _csv(["n", "ball", "semilocal", "local"], rows), violations


def _pick(spec: grouplab.GroupSpec, label: Optional[str], tag: str):
    table = dict(spec.generators)
    if label is not None:
        if label not in table:
            raise ConfigError(f"group has no generator {label!r}")
        return table[label]
    for lab, m in spec.generators:
        if classify(m).tag == tag:
            return m
    raise ConfigError(f"group has no {tag.lower()} generator")


def run_freepair(p: dict, seed: Optional[int], ctx: dict) -> Tuple[str, List[str]]:
    if p["iMax"] > 2 and not ctx["override"]:
        raise ResourceCeilingError("tower level ceiling 2 (iMax > 2 needs --ceiling-override)")
    spec = _load_group(p["group"], ctx["base"])
    elliptic = _pick(spec, p["elliptic"], "Elliptic")
    hyperbolic = _pick(spec, p["hyperbolic"], "Hyperbolic")
    try:
        cert = grouplab.build_free_pair(elliptic, hyperbolic, p["epsilon0"], p["maxCheckedLength"])
    except grouplab.ConstructionError as exc:
        raise ConfigError(f"free pair construction failed: {exc}") from None
    tower = grouplab.commutator_tower_growth(cert, p["iMax"], allow_large=ctx["override"])
    out = cert.to_json()
    out["tower"] = [
        {"i": r.i, "wordLength": r.word_length, "words": r.words, "imagesInN": r.images_in_n, "floor": r.floor}
        for r in tower.rows
    ]
    out["towerViolations"] = tower.violations
    return _json(out), list(tower.violations)


def run_constants(p: dict, seed: Optional[int], ctx: dict) -> Tuple[str, List[str]]:
    try:
        params = product_qi.QIParams(p["lambda"], p["epsilon"], p["delta"], p["kappa"], p["a"])
        report = product_qi.constants_report(params, p["r"], p["h0"], p["L"], p["D"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    violations = []
    if not math.isclose(report["L_of_R_of_L"], p["L"], rel_tol=1e-9, abs_tol=1e-9):
        violations.append(f"L(R(L)) = {report['L_of_R_of_L']} != L = {p['L']}")
    return _json(report), violations


def run_words(p: dict, seed: Optional[int], ctx: dict) -> Tuple[str, List[str]]:
    # W_4 holds 2208 * 2206 words of length 256, too large to enumerate even with the override
    if p["iMax"] > freewords.LEVEL_CEILING:
        raise ResourceCeilingError(f"word level ceiling {freewords.LEVEL_CEILING} (not lifted by --ceiling-override)")
    rows, violations = [], []
    for i in range(p["iMax"] + 1):
        stats = freewords.level_stats(i)
        if stats["c_i"] != freewords.comm_count(i) or stats["distinct_reduced"] != stats["c_i"]:
            violations.append(f"level {i}: c_i {stats['c_i']}, distinct reduced {stats['distinct_reduced']}")
        rows.append(stats)
    return _json({"rows": rows}), violations


SUBCOMMANDS = {
    "packing": (PACKING, run_packing),
    "growth": (GROWTH, run_growth),
    "freepair": (FREEPAIR, run_freepair),
    "constants": (CONSTANTS, run_constants),
    "words": (WORDS, run_words),
}


# -- entry point -------------------------------------------------------------------

def _read_json(path: Path):
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def thread_cap() -> int:
    """Worker cap from QIHYP_THREADS; every run here uses a single worker within it."""
    raw = os.environ.get("QIHYP_THREADS")
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise ConfigError(f"QIHYP_THREADS must be a positive integer, got {raw!r}")
    return n


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qihyp", description="Experiments on H^2 x R quasi-isometry components.")
    ap.add_argument("subcommand", choices=sorted(SUBCOMMANDS))
    ap.add_argument("--config", required=True, type=Path, help="JSON parameter record for the subcommand")
    ap.add_argument("--seed", type=int, default=None, help="seed for every random draw (packing)")
    ap.add_argument("--out", type=Path, default=None, help="report path; stdout if omitted")
    ap.add_argument("--ceiling-override", action="store_true",
                    help="unlock commutator level 3+ and very large balls")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    schema, runner = SUBCOMMANDS[args.subcommand]
    try:
        thread_cap()
        if not args.config.exists():
            raise ConfigError(f"config file {args.config} does not exist")
        params = _parse(_read_json(args.config), schema, f"{args.subcommand} config")
        ctx = {"base": args.config.resolve().parent, "override": args.ceiling_override}
        report, violations = runner(params, args.seed, ctx)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INVALID
    except ResourceCeilingError as exc:
        print(f"resource ceiling: {exc}", file=sys.stderr)
        return INVALID
    except grouplab.AmbiguityError as exc:
        print(f"error: {exc}; try a smaller dedupeQuantum", file=sys.stderr)
        return INVALID
    if args.out is None:
        sys.stdout.write(report)
    else:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="") as fh:
            fh.write(report)
    for v in violations:
        print(f"property violation: {v}", file=sys.stderr)
    return VIOLATION if violations else OK


if __name__ == "__main__":
    sys.exit(main())
