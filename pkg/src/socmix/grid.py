"""Grid cells, facility points, and CSV ingestion.

A study area is a set of square grid cells (each with a centroid, population,
land price, and land-use rates) plus facility points of the nine known kinds.
Loaders validate row by row and report the offending row and column on
failure.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .access import KINDS, FacilityKind
from .errors import InvariantViolation, MissingColumn, ParseError, UnknownFacilityKind

CELL_FIELDS = (
    "id",
    "x",
    "y",
    "population",
    "female_rate",
    "public_land_rate",
    "green_rate",
    "commercial_rate",
    "land_price",
)

_RATE_FIELDS = ("female_rate", "public_land_rate", "green_rate", "commercial_rate")

FACILITY_FIELDS = ("kind", "x", "y")


@dataclass(frozen=True)
class GridCell:
    """One square cell: centroid, demographics, land-use shares, land price."""

    id: str
    centroid_x: float
    centroid_y: float
    population: float
    female_rate: float
    public_land_rate: float
    green_rate: float
    commercial_rate: float
    land_price: float

    def __post_init__(self):
        if self.population < 0:
            raise InvariantViolation("population must be >= 0", field="population")
        if self.land_price < 0:
            raise InvariantViolation("land_price must be >= 0", field="land_price")
        for name in _RATE_FIELDS:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvariantViolation(f"{name} must lie in [0, 1], got {v!r}", field=name)


@dataclass(frozen=True)
class FacilityPoint:
    """One facility of a known kind at a planar location."""

    kind: FacilityKind
    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "kind", FacilityKind(self.kind))


@dataclass(frozen=True)
class StudyArea:
    """All cells and facilities under analysis, plus the cell edge length."""

    cells: tuple[GridCell, ...]
    facilities: tuple[FacilityPoint, ...]
    cell_size_m: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        object.__setattr__(self, "facilities", tuple(self.facilities))
        if not self.cells:
            raise InvariantViolation("study area must contain at least one cell")
        if self.cell_size_m <= 0:
            raise InvariantViolation("cell_size_m must be positive")

    @property
    def cell_ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.cells)


@dataclass(frozen=True)
class ValidationReport:
    """What :func:`validate_area` found.

    ``exclusion_candidates`` are cells the design matrix will drop (zero
    population or zero land price); duplicates and kinds without any point
    are likely data errors but are reported rather than raised.
    """

    exclusion_candidates: tuple[str, ...] = ()
    duplicate_ids: tuple[str, ...] = ()
    missing_kinds: tuple[FacilityKind, ...] = ()
    messages: tuple[str, ...] = field(default=())

    @property
    def clean(self) -> bool:
        return not (self.exclusion_candidates or self.duplicate_ids or self.missing_kinds)


def _parse_float(raw, row_no, column):
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ParseError(row_no, column, raw) from None


def load_cells(path, schema: Mapping[str, str] | None = None) -> list[GridCell]:
    """Read grid cells from a comma-delimited UTF-8 file.

    ``schema`` maps canonical field names (``id``, ``x``, ``y``,
    ``population``, the four rates, ``land_price``) to the column names used
    in the file; fields not mentioned keep their canonical name.
    """
    colmap = dict.fromkeys(CELL_FIELDS)
    for k in colmap:
        colmap[k] = (schema or {}).get(k, k)

    cells = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(_skip_comments(fh))
        header = reader.fieldnames or []
        for field_name, column in colmap.items():
            if column not in header:
                raise MissingColumn(column, path)
        for row_no, row in enumerate(reader, start=2):
            values = {}
            for field_name, column in colmap.items():
                raw = row.get(column)
                if field_name == "id":
                    if raw is None or raw == "":
                        raise ParseError(row_no, column, raw)
                    values["id"] = raw
                else:
                    values[field_name] = _parse_float(raw, row_no, column)
            try:
                cells.append(
                    GridCell(
                        id=values["id"],
                        centroid_x=values["x"],
                        centroid_y=values["y"],
                        population=values["population"],
                        female_rate=values["female_rate"],
                        public_land_rate=values["public_land_rate"],
                        green_rate=values["green_rate"],
                        commercial_rate=values["commercial_rate"],
                        land_price=values["land_price"],
                    )
                )
            except InvariantViolation as exc:
                raise InvariantViolation(str(exc), row=row_no, field=exc.field) from None
    return cells


def load_facilities(path) -> list[FacilityPoint]:
    """Read facility points (``kind,x,y``) from a comma-delimited UTF-8 file."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(_skip_comments(fh))
        header = reader.fieldnames or []
        for column in FACILITY_FIELDS:
            if column not in header:
                raise MissingColumn(column, path)
        for row_no, row in enumerate(reader, start=2):
            raw_kind = row.get("kind")
            try:
                kind = FacilityKind(raw_kind)
            except ValueError:
                raise UnknownFacilityKind(raw_kind, row=row_no) from None
            x = _parse_float(row.get("x"), row_no, "x")
            y = _parse_float(row.get("y"), row_no, "y")
            out.append(FacilityPoint(kind, x, y))
    return out


def save_cells(path, cells: Sequence[GridCell], metadata: Mapping | None = None) -> None:
    """Write cells in the canonical column order; floats survive round-trips."""
    from ._tableio import write_csv

    rows = [
        [
            c.id,
            c.centroid_x,
            c.centroid_y,
            c.population,
            c.female_rate,
            c.public_land_rate,
            c.green_rate,
            c.commercial_rate,
            c.land_price,
        ]
        for c in cells
    ]
    write_csv(path, CELL_FIELDS, rows, metadata)


def save_facilities(path, facilities: Sequence[FacilityPoint], metadata: Mapping | None = None) -> None:
    from ._tableio import write_csv

    rows = [[str(f.kind), f.x, f.y] for f in facilities]
    write_csv(path, FACILITY_FIELDS, rows, metadata)


def validate_area(area: StudyArea) -> ValidationReport:
    """Check an assembled study area for modeling hazards.

    Flags cells that the design matrix will exclude (population or price of
    zero), duplicated cell ids, and facility kinds with no points.
    """
    excl = tuple(c.id for c in area.cells if c.population <= 0 or c.land_price <= 0)

    seen, dupes = set(), []
    for c in area.cells:
        if c.id in seen and c.id not in dupes:
            dupes.append(c.id)
        seen.add(c.id)

    present = {f.kind for f in area.facilities}
    missing = tuple(k for k in KINDS if k not in present)

    messages = []
    if excl:
        messages.append(f"{len(excl)} cell(s) will be excluded from the design (zero population or price)")
    if dupes:
        messages.append(f"duplicate cell ids: {', '.join(dupes)}")
    if missing:
        messages.append("kinds with zero facilities: " + ", ".join(str(k) for k in missing))

    return ValidationReport(excl, tuple(dupes), missing, tuple(messages))


def _skip_comments(fh):
    for line in fh:
        if line.startswith("#"):
            continue
        yield line
