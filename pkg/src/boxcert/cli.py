"""Command-line front end: verify, tightness, falsify.

Exit codes are the only stable scripting contract:
  0  all rows ROBUST (or falsify found nothing)
  1  some row NONROBUST (or falsify found a counterexample)
  2  some row UNKNOWN / timed out and none NONROBUST
  3+ usage, schema, or load/validation errors

Reports are JSON arrays with a stable per-row field order plus run
metadata; ``--csv`` writes a CSV next to (or instead of) the JSON.  With
``--workers 1`` (the default) report bytes are reproducible for a fixed
seed, except for measured wall-clock fields.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

import boxcert
from boxcert.boxes import (
    CornerBox, GroundTruth, decode, h_map, interval_decode_corners, offset_interval_to_region,
)
from boxcert.intervals import Interval
from boxcert.iou_bounds import baseline_iou_bounds, optimal_iou_bounds
from boxcert.model import ParseError, ValidationError, load_image, load_model, save_image
from boxcert.oracle import falsify
from boxcert.perturbations import PerturbationSpec
from boxcert.verifier import (
    InvalidQueryError, NONROBUST, UNKNOWN, VerificationQuery, verify,
)

REPORT_SCHEMA_VERSION = 1

VERIFY_COLUMNS = [
    "image", "perturbation", "angle_deg", "epsilon", "verdict", "wall_time",
    "branches", "max_depth", "bounding", "propagation", "counterexample_t",
    "criterion", "engine_version", "seed", "schema_version",
]

TIGHTNESS_COLUMNS = [
    "range", "count", "mean_improvement_pct", "dominance_violations",
    "engine_version", "seed", "schema_version",
]


class QueryError(Exception):
    """Raised for malformed query files."""


class _Parser(argparse.ArgumentParser):
    # keep exit code 2 reserved for UNKNOWN verdicts
    def error(self, message):  # noqa: D102
        self.exit(3, f"{self.prog}: error: {message}\n")


def _require(doc: dict, key: str, kind, where: str):
    if key not in doc:
        raise QueryError(f"{where}: missing required field {key!r}")
    val = doc[key]
    if kind is float and isinstance(val, int):
        val = float(val)
    if not isinstance(val, kind):
        raise QueryError(f"{where}: field {key!r} must be {kind}, got {type(val).__name__}")
    return val


def load_query_file(path: Path) -> dict:
    """Parse and schema-check a query file; paths resolve relative to it."""
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise QueryError(f"cannot read query file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise QueryError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise QueryError(f"{path}: query must be a JSON object")
    where = str(path)
    out: dict = {}
    out["model"] = path.parent / _require(doc, "model", str, where)
    out["image"] = path.parent / _require(doc, "image", str, where)
    gt = _require(doc, "ground_truth", dict, where)
    box = _require(gt, "box", list, f"{where}: ground_truth")
    if len(box) != 4 or not all(isinstance(v, (int, float)) for v in box):
        raise QueryError(f"{where}: ground_truth.box must be 4 numbers")
    try:
        out["ground_truth"] = GroundTruth(
            CornerBox(*[float(v) for v in box]),
            int(_require(gt, "class_id", int, f"{where}: ground_truth")),
        )
    except ValueError as exc:
        raise QueryError(f"{where}: bad ground truth: {exc}") from exc
    out["tau_iou"] = float(_require(doc, "tau_iou", (int, float), where))
    out["tau_class"] = float(_require(doc, "tau_class", (int, float), where))
    pert = _require(doc, "perturbation", dict, where)
    out["pert_kind"] = _require(pert, "kind", str, f"{where}: perturbation")
    out["pert_angle"] = int(pert.get("angle_deg", 0))
    out["pert_kernel"] = int(pert.get("kernel_size", 5))
    budgets = doc.get("budgets")
    if budgets is None:
        budgets = [pert.get("epsilon")]
    if (not isinstance(budgets, list) or not budgets
            or not all(isinstance(v, (int, float)) for v in budgets)):
        raise QueryError(f"{where}: budgets must be a non-empty list of numbers")
    out["budgets"] = [float(v) for v in budgets]
    solver = doc.get("solver", {})
    if not isinstance(solver, dict):
        raise QueryError(f"{where}: solver must be an object")
    out["bounding"] = solver.get("bounding", "optimal")
    out["propagation"] = solver.get("propagation", "backsub")
    out["max_depth"] = int(solver.get("max_depth", 20))
    out["timeout"] = float(solver.get("timeout", 1800.0))
    out["seed"] = int(solver.get("seed", 0))
    return out


def _build_query(spec: dict, epsilon: float, model, image) -> VerificationQuery:
    pert = PerturbationSpec(
        kind=spec["pert_kind"], epsilon=epsilon,
        angle_deg=spec["pert_angle"], kernel_size=spec["pert_kernel"],
    )
    return VerificationQuery(
        model=model, image=image, ground_truth=spec["ground_truth"],
        tau_iou=spec["tau_iou"], tau_class=spec["tau_class"], perturbation=pert,
        max_depth=spec["max_depth"], timeout=spec["timeout"],
        bounding=spec["bounding"], propagation=spec["propagation"],
    )


def _verify_row(args) -> dict:
    spec, epsilon = args
    model = load_model(spec["model"])
    image = load_image(spec["image"])
    verdict = verify(_build_query(spec, epsilon, model, image))
    return {
        "image": str(spec["image"]),
        "perturbation": spec["pert_kind"],
        "angle_deg": spec["pert_angle"],
        "epsilon": epsilon,
        "verdict": verdict.status,
        "wall_time": round(verdict.wall_time, 6),
        "branches": verdict.branches_explored,
        "max_depth": verdict.max_depth_reached,
        "bounding": spec["bounding"],
        "propagation": spec["propagation"],
        "counterexample_t": None if verdict.counterexample is None else verdict.counterexample.t,
        "criterion": None if verdict.counterexample is None else verdict.counterexample.criterion,
        "engine_version": boxcert.__version__,
        "seed": spec["seed"],
        "schema_version": REPORT_SCHEMA_VERSION,
    }


def _write_report(rows: list[dict], columns: list[str], out: Path | None, as_csv: bool) -> None:
    ordered = [{k: row.get(k) for k in columns} for row in rows]
    text = json.dumps(ordered, indent=1) + "\n"
    if out is None:
        sys.stdout.write(text)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    if as_csv:
        with open(out.with_suffix(".csv"), "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns)
            writer.writeheader()
            writer.writerows(ordered)


def cmd_verify(args) -> int:
    spec = load_query_file(Path(args.query))
    for key in ("bounding", "propagation", "timeout", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            spec[key] = val
    # fail early on unloadable inputs (clear diagnostics, before any workers)
    load_model(spec["model"])
    load_image(spec["image"])
    jobs = [(spec, eps) for eps in spec["budgets"]]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_verify_row, jobs))
    else:
        rows = [_verify_row(j) for j in jobs]
    _write_report(rows, VERIFY_COLUMNS, Path(args.out) if args.out else None, args.csv)
    for row in rows:
        print(
            f"[{row['verdict']:9s}] {row['perturbation']} eps={row['epsilon']} "
            f"branches={row['branches']} time={row['wall_time']:.2f}s",
            file=sys.stderr,
        )
    verdicts = {row["verdict"] for row in rows}
    if UNKNOWN in verdicts:
        return 2
    if NONROBUST in verdicts:
        return 1
    return 0


def sample_tightness_instance(rng: np.random.Generator, kind: str, width_range):
    """One random (offset bounds, anchor, ground truth) comparison instance."""
    if kind == "ssd":
        anchor = (rng.uniform(16, 48), rng.uniform(16, 48), rng.uniform(6, 24), rng.uniform(6, 24))
        scale, variances = None, (0.1, 0.2)
        centers = rng.normal(0.0, 0.6, 4)
    else:
        anchor = (float(rng.integers(0, 4)), float(rng.integers(0, 4)),
                  rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0))
        scale, variances = float(rng.choice([8.0, 16.0, 32.0])), None
        centers = rng.normal(0.0, 0.8, 4)
    widths = rng.uniform(width_range[0], width_range[1], 4)
    o_bounds = tuple(Interval(c - w / 2, c + w / 2) for c, w in zip(centers, widths))
    mid = h_map(decode(kind, centers, anchor, scale, variances))
    dims = (mid.z2 - mid.z0, mid.z3 - mid.z1)
    for _ in range(64):
        jit = rng.uniform(-0.35, 0.35, 4)
        z0 = mid.z0 + jit[0] * dims[0]
        z1 = mid.z1 + jit[1] * dims[1]
        z2 = mid.z2 + jit[2] * dims[0]
        z3 = mid.z3 + jit[3] * dims[1]
        if z2 - z0 > 0.25 and z3 - z1 > 0.25:
            break
    g = GroundTruth(CornerBox(z0, z1, z2, z3), 0)
    return kind, o_bounds, anchor, scale, variances, g


TIGHTNESS_BUCKETS = [(0.0, 0.01)] + [(a / 10, a / 10 + 0.1) for a in range(10)]


def tightness_stats(n: int, seed: int, width_range) -> tuple[list[dict], int]:
    """Bucketed optimal-vs-baseline width comparison over random instances."""
    rng = np.random.default_rng(seed)
    kinds = ("ssd", "yolov2", "yolov3")
    per_bucket: list[list[float]] = [[] for _ in TIGHTNESS_BUCKETS]
    violations = 0
    for i in range(n):
        kind, o_bounds, anchor, scale, variances, g = sample_tightness_instance(
            rng, kinds[i % 3], width_range
        )
        region = offset_interval_to_region(kind, o_bounds, anchor, scale, variances)
        opt = optimal_iou_bounds(region, g)
        base = baseline_iou_bounds(
            interval_decode_corners(kind, o_bounds, anchor, scale, variances), g
        )
        if not opt.within(base, slack=1e-9):
            violations += 1
        improvement = 0.0
        if base.width > 1e-15:
            improvement = 100.0 * (base.width - opt.width) / base.width
        for b, (lo, hi) in enumerate(TIGHTNESS_BUCKETS):
            if lo <= base.width < hi or (hi == 1.0 and base.width == 1.0):
                per_bucket[b].append(improvement)
                break
    rows = []
    for (lo, hi), vals in zip(TIGHTNESS_BUCKETS, per_bucket):
        rows.append({
            "range": f"{lo:.2f}-{hi:.2f}",
            "count": len(vals),
            "mean_improvement_pct": round(float(np.mean(vals)), 4) if vals else None,
        })
    return rows, violations


def cmd_tightness(args) -> int:
    if args.n < 1:
        raise QueryError(f"--n must be >= 1, got {args.n}")
    lo, hi = args.width_range
    if not 0 <= lo <= hi:
        raise QueryError(f"bad --width-range {args.width_range}")
    rows, violations = tightness_stats(args.n, args.seed, (lo, hi))
    for row in rows:
        row.update({
            "dominance_violations": violations,
            "engine_version": boxcert.__version__,
            "seed": args.seed,
            "schema_version": REPORT_SCHEMA_VERSION,
        })
    _write_report(rows, TIGHTNESS_COLUMNS, Path(args.out) if args.out else None, args.csv)
    print(f"instances={args.n} dominance_violations={violations}", file=sys.stderr)
    return 0 if violations == 0 else 1


def cmd_falsify(args) -> int:
    if args.n < 1:
        raise QueryError(f"--n must be >= 1, got {args.n}")
    spec = load_query_file(Path(args.query))
    if args.seed is not None:
        spec["seed"] = args.seed
    model = load_model(spec["model"])
    image = load_image(spec["image"])
    found = None
    for eps in spec["budgets"]:
        query = _build_query(spec, eps, model, image)
        cex = falsify(query, args.n, spec["seed"])
        status = "none" if cex is None else f"t={cex.t:.6f} [{cex.criterion}]"
        print(f"eps={eps}: {status}", file=sys.stderr)
        if cex is not None and found is None:
            found = (eps, cex)
    if found is None:
        return 0
    eps, cex = found
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        save_image(cex.image, out / "counterexample.json")
        (out / "counterexample_meta.json").write_text(json.dumps({
            "epsilon": eps, "t": cex.t, "criterion": cex.criterion,
            "engine_version": boxcert.__version__, "seed": spec["seed"],
        }, indent=1) + "\n")
    return 1


def main(argv=None) -> int:
    parser = _Parser(prog="boxcert", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run a verification query file")
    p_verify.add_argument("--query", required=True, help="query JSON file")
    p_verify.add_argument("--out", help="report JSON path (stdout if omitted)")
    p_verify.add_argument("--csv", action="store_true", help="also write a CSV report")
    p_verify.add_argument("--workers", type=int, default=1)
    p_verify.add_argument("--seed", type=int, default=None)
    p_verify.add_argument("--timeout", type=float, default=None)
    p_verify.add_argument("--bounding", choices=("optimal", "baseline"), default=None)
    p_verify.add_argument("--propagation", choices=("ibp", "backsub"), default=None)

    p_tight = sub.add_parser("tightness", help="optimal-vs-baseline width statistics")
    p_tight.add_argument("--n", type=int, default=10000)
    p_tight.add_argument("--seed", type=int, default=0)
    p_tight.add_argument("--width-range", type=float, nargs=2, default=(0.02, 1.5),
                         metavar=("LO", "HI"), help="offset interval width range")
    p_tight.add_argument("--out", help="report JSON path (stdout if omitted)")
    p_tight.add_argument("--csv", action="store_true")

    p_fals = sub.add_parser("falsify", help="sampling attack without verification")
    p_fals.add_argument("--query", required=True)
    p_fals.add_argument("--n", type=int, default=1000)
    p_fals.add_argument("--seed", type=int, default=None)
    p_fals.add_argument("--out", help="directory for the counterexample, if found")

    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "tightness":
            return cmd_tightness(args)
        return cmd_falsify(args)
    except (QueryError, ParseError, ValidationError, InvalidQueryError) as exc:
        print(f"boxcert: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
