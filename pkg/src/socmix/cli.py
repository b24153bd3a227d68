"""Command-line pipeline: synth, grade, sweep, report.

Each subcommand reads a JSON config, runs the corresponding stage chain, and
writes its outputs atomically into the output directory.  Every output file
embeds the seed and a hash of the resolved config (excluding the output
location), so reruns with the same config are byte-identical.  Exit codes:
0 success, 1 input error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ._tableio import config_hash, write_csv, write_json
from .access import GradeTable, grade_all, standardize
from .design import build_design
from .diagnostics import (
    cluster_descriptives,
    coefficient_table,
    coefficients_to_csv,
    descriptives_to_csv,
    vif,
    vif_to_csv,
)
from .errors import InputError, InvariantViolation, MissingFit, NumericalError, SocmixError
from .geojson import cells_geojson, write_geojson
from .grid import StudyArea, load_cells, load_facilities, save_cells, save_facilities, validate_area
from .mixture import EMConfig, MixtureFit, assign, e_step, load_fit, loglik, ols_fit, save_fit
from .selection import CRITERIA, report_to_csv, sweep
from .synth import SynthSpec, generate, planted_spec, truth_payload

_PLANTED_SPEC_KEYS = {"k", "seed", "n_rows", "n_cols", "separation", "noise_scale", "facility_counts"}


class _StageFailure(Exception):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage} failed: {cause}")


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (SocmixError, OSError, json.JSONDecodeError) as exc:
        raise _StageFailure(name, exc) from exc


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved pipeline settings; ``payload`` is what gets hashed."""

    cells: str
    facilities: str
    grade_table: str | None
    out_dir: str
    k_range: tuple[int, int]
    criterion: str
    fit: EMConfig

    def payload(self) -> dict:
        # out_dir stays out of the hash so reruns into different
        # directories remain byte-identical
        return {
            "cells": self.cells,
            "facilities": self.facilities,
            "grade_table": self.grade_table,
            "k_range": list(self.k_range),
            "criterion": self.criterion,
            "fit": {
                "tol": self.fit.tol,
                "max_iter": self.fit.max_iter,
                "restarts": self.fit.restarts,
                "seed": self.fit.seed,
                "variance_floor_ratio": self.fit.variance_floor_ratio,
            },
        }

    def metadata(self) -> dict:
        return {"seed": self.fit.seed, "config": config_hash(self.payload())}


def _parse_k_range(text: str) -> tuple[int, int]:
    parts = text.split(":")
    try:
        if len(parts) == 1:
            k = int(parts[0])
            return (k, k)
        if len(parts) == 2:
            lo, hi = int(parts[0]), int(parts[1])
            if lo >= 1 and hi >= lo:
                return (lo, hi)
    except ValueError:
        pass
    raise InvariantViolation(f"cannot parse k range {text!r}; expected LO:HI")


def load_config(path, *, out=None, seed=None, k_range=None) -> PipelineConfig:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise InvariantViolation("pipeline config must be a JSON object")
    for key in ("cells", "facilities"):
        if key not in raw:
            raise InvariantViolation(f"pipeline config missing {key!r}")

    kr = raw.get("k_range", [1, 6])
    if not (isinstance(kr, list) and len(kr) == 2 and all(isinstance(v, int) for v in kr)):
        raise InvariantViolation("k_range must be [lo, hi]")
    criterion = raw.get("criterion", "nec")
    if criterion not in CRITERIA:
        raise InvariantViolation(f"criterion must be one of {CRITERIA}")

    fit_raw = raw.get("fit", {})
    if not isinstance(fit_raw, dict):
        raise InvariantViolation("fit must be an object")
    allowed = {"tol", "max_iter", "restarts", "seed", "variance_floor_ratio"}
    unknown = set(fit_raw) - allowed
    if unknown:
        raise InvariantViolation(f"unknown fit settings: {sorted(unknown)}")
    fit = EMConfig(**fit_raw)

    config = PipelineConfig(
        cells=raw["cells"],
        facilities=raw["facilities"],
        grade_table=raw.get("grade_table"),
        out_dir=raw.get("out_dir", "out"),
        k_range=(int(kr[0]), int(kr[1])),
        criterion=criterion,
        fit=fit,
    )
    if out is not None:
        config = replace(config, out_dir=str(out))
    if seed is not None:
        config = replace(config, fit=replace(config.fit, seed=seed))
    if k_range is not None:
        config = replace(config, k_range=_parse_k_range(k_range))
    return config


def _load_area(config: PipelineConfig) -> StudyArea:
    cells = _stage("load_cells", load_cells, config.cells)
    facilities = _stage("load_facilities", load_facilities, config.facilities)
    return _stage("assemble_area", StudyArea, tuple(cells), tuple(facilities))


def _load_table(config: PipelineConfig) -> GradeTable:
    if config.grade_table:
        return _stage("load_grade_table", GradeTable.load, config.grade_table)
    return GradeTable.default()


def _grade_pipeline(config: PipelineConfig, area: StudyArea):
    """Grades for all cells, z-scores over the cells the design will keep."""
    table = _load_table(config)
    report = validate_area(area)
    for message in report.messages:
        print(f"note: {message}", file=sys.stderr)
    grades = _stage("grade_all", grade_all, area, table)
    included = [c.id for c in area.cells if c.population > 0 and c.land_price > 0]
    if not included:
        raise _StageFailure("standardize", InvariantViolation("no cells survive exclusion"))
    z = _stage("standardize", standardize, grades.restrict(included))
    return grades, z


def _grade_csv_rows(matrix):
    for cid, row in zip(matrix.cell_ids, matrix.values):
        yield [cid, *row]


def cmd_grade(args) -> int:
    config = _stage("load_config", load_config, args.config, out=args.out)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    area = _load_area(config)
    grades, z = _grade_pipeline(config, area)
    meta = config.metadata()
    header = ["cell_id"] + [f"grade_{k}" for k in grades.kinds]
    write_csv(out / "grades.csv", header, _grade_csv_rows(grades), meta)
    zheader = ["cell_id"] + [f"z_{k}" for k in z.kinds]
    write_csv(out / "zscores.csv", zheader, _grade_csv_rows(z), meta)
    return 0


def cmd_sweep(args) -> int:
    config = _stage("load_config", load_config, args.config, out=args.out,
                    seed=args.seed, k_range=args.k_range)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    area = _load_area(config)
    _, z = _grade_pipeline(config, area)
    data = _stage("build_design", build_design, area, z)

    lo, hi = config.k_range
    report = _stage("sweep", sweep, data, range(lo, hi + 1), config.fit)
    meta = config.metadata()
    report_to_csv(out / "selection.csv", report, meta)
    for k, fit in sorted(report.fits.items()):
        save_fit(out / f"fit_k{k}.json", fit, data.columns, meta)

    succeeded = [r.k for r in report.rows if r.error is None]
    failed = [r for r in report.rows if r.error is not None]
    for r in failed:
        print(f"note: k={r.k} failed: {r.error}", file=sys.stderr)
    if not succeeded:
        raise _StageFailure("sweep", NumericalError("no component count could be fitted"))
    return 0


def _chosen_k(config: PipelineConfig, out: Path) -> int:
    """The k minimizing the configured criterion in the sweep's table."""
    path = out / "selection.csv"
    if not path.exists():
        raise MissingFit(path)
    import csv as _csv

    best_k, best_v = None, None
    with open(path, newline="", encoding="utf-8") as fh:
        rows = _csv.DictReader(line for line in fh if not line.startswith("#"))
        for row in rows:
            value = row.get(config.criterion)
            if not value:
                continue
            k, v = int(row["k"]), float(value)
            if best_v is None or v < best_v:
                best_k, best_v = k, v
    if best_k is None:
        raise MissingFit(path)
    return best_k


def cmd_report(args) -> int:
    config = _stage("load_config", load_config, args.config, out=args.out)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    k = args.k if args.k else _stage("select", _chosen_k, config, out)

    fit_path = out / f"fit_k{k}.json"
    if not fit_path.exists():
        raise _StageFailure("load_fit", MissingFit(fit_path))
    params, info = _stage("load_fit", load_fit, fit_path)

    area = _load_area(config)
    _, z = _grade_pipeline(config, area)
    data = _stage("build_design", build_design, area, z)

    resp = _stage("e_step", e_step, params, data)
    labels = assign(resp)
    fit = MixtureFit(
        params=params,
        responsibilities=resp,
        loglik=_stage("loglik", loglik, params, data),
        n_iter=info.get("n_iter", 0),
        converged=info.get("converged", True),
        labels=labels,
        seed=info.get("seed"),
        history=(),
    )

    meta = config.metadata()
    label_map = {cid: int(lab) for cid, lab in zip(data.cell_ids, labels)}
    write_csv(
        out / "labels.csv",
        ("cell_id", "component"),
        ([cid, lab + 1] for cid, lab in label_map.items()),
        meta,
    )

    desc = _stage("cluster_descriptives", cluster_descriptives, area, label_map, z)
    descriptives_to_csv(out / "descriptives.csv", desc, meta)

    pooled = _stage("ols_fit", ols_fit, data)
    table = _stage("coefficient_table", coefficient_table, fit, pooled, data)
    coefficients_to_csv(out / "coefficients.csv", table, meta)

    vif_report = _stage("vif", vif, data.X[:, 1:], data.columns[1:])
    vif_to_csv(out / "vif.csv", vif_report, meta)

    max_resp = resp.max(axis=1)
    assignments = {cid: (int(lab), float(mr)) for cid, lab, mr in zip(data.cell_ids, labels, max_resp)}
    write_geojson(out / "cells.geojson", cells_geojson(area, assignments, meta))
    return 0


def _load_synth_spec(path, seed_override=None) -> SynthSpec:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise InvariantViolation("synth config must be a JSON object")
    if seed_override is not None:
        raw = {**raw, "seed": seed_override}
    if "betas" in raw:
        return SynthSpec.from_payload(raw)
    unknown = set(raw) - _PLANTED_SPEC_KEYS
    if unknown:
        raise InvariantViolation(f"unknown synth settings: {sorted(unknown)}")
    if "k" not in raw or "seed" not in raw:
        raise InvariantViolation("synth config needs at least k and seed")
    kwargs = dict(raw)
    k = kwargs.pop("k")
    seed = kwargs.pop("seed")
    return planted_spec(k, seed, **kwargs)


def cmd_synth(args) -> int:
    spec = _stage("load_synth_spec", _load_synth_spec, args.config, args.seed)
    out = Path(args.out or "synth")
    out.mkdir(parents=True, exist_ok=True)
    result = _stage("generate", generate, spec)

    meta = {"seed": spec.seed, "config": config_hash(spec.to_payload())}
    save_cells(out / "cells.csv", result.area.cells, meta)
    save_facilities(out / "facilities.csv", result.area.facilities, meta)
    header = ["cell_id", "y", *result.data.columns]
    rows = (
        [cid, yv, *xrow]
        for cid, yv, xrow in zip(result.data.cell_ids, result.data.y, result.data.X)
    )
    write_csv(out / "design.csv", header, rows, meta)
    write_json(out / "truth.json", truth_payload(result.truth), meta)
    return 0


class _Parser(argparse.ArgumentParser):
    # usage problems are input errors: exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="socmix", description="Accessibility grading and mixture-of-regressions pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    grade = sub.add_parser("grade", help="grade cells and write grade/z-score tables")
    grade.add_argument("--config", required=True)
    grade.add_argument("--out", help="override the output directory")
    grade.set_defaults(fn=cmd_grade)

    sw = sub.add_parser("sweep", help="fit a range of component counts and tabulate criteria")
    sw.add_argument("--config", required=True)
    sw.add_argument("--out", help="override the output directory")
    sw.add_argument("--seed", type=int, help="override the fit seed")
    sw.add_argument("--k-range", help="override the component range, LO:HI")
    sw.set_defaults(fn=cmd_sweep)

    rep = sub.add_parser("report", help="write descriptive/coefficient/vif tables and the map")
    rep.add_argument("--config", required=True)
    rep.add_argument("--out", help="override the output directory")
    rep.add_argument("--k", type=int, help="component count to report (default: criterion winner)")
    rep.set_defaults(fn=cmd_report)

    syn = sub.add_parser("synth", help="generate a synthetic study area with planted structure")
    syn.add_argument("--config", required=True)
    syn.add_argument("--out", help="output directory (default: synth)")
    syn.add_argument("--seed", type=int, help="override the spec seed")
    syn.set_defaults(fn=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except _StageFailure as failure:
        print(f"error: {failure}", file=sys.stderr)
        if isinstance(failure.cause, NumericalError):
            return 2
        return 1
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
