"""Facility accessibility: nearest distances, grade tables, z-scored grades.

Each grid cell gets, per facility kind, a 1..11 accessibility grade: the
smallest grade whose distance threshold covers the cell's nearest facility of
that kind.  Grade 11 means "beyond the grade-10 threshold" (including the case
of no facility of that kind at all).  Graded columns are then standardized to
z-scores for use as regression covariates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Callable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ConstantColumn, InvariantViolation, UnknownFacilityKind

#: Distance reported when a facility kind has no points at all.  Grading maps
#: it to grade 11 through the ordinary threshold comparison.
NO_FACILITY = math.inf

N_GRADES = 10


class FacilityKind(str, Enum):
    """The closed set of facility kinds, in stable column order."""

    KINDERGARTEN = "kindergarten"
    ELEMENTARY_SCHOOL = "elementary_school"
    PUBLIC_LIBRARY = "public_library"
    DAYCARE = "daycare"
    SENIOR_COMMUNITY = "senior_community"
    SENIOR_EDUCATION = "senior_education"
    HEALTH_FACILITY = "health_facility"
    NEIGHBORHOOD_PARK = "neighborhood_park"
    PUBLIC_PARK = "public_park"

    def __str__(self):
        return self.value


#: All kinds in stable order; grade/z matrices use this column order.
KINDS: tuple[FacilityKind, ...] = tuple(FacilityKind)


def euclidean(ax: float, ay: float, bx: float, by: float) -> float:
    """Straight-line distance between two planar points."""
    return math.hypot(ax - bx, ay - by)


@dataclass(frozen=True)
class GradeTable:
    """Distance thresholds defining accessibility grades per facility kind.

    ``thresholds[kind]`` holds exactly 10 strictly increasing positive
    distances; ``thresholds[kind][g - 1]`` is the maximum distance still
    awarded grade ``g``.  Distances beyond the last threshold grade 11.
    """

    thresholds: Mapping[FacilityKind, tuple[float, ...]]

    def __post_init__(self):
        clean = {}
        for kind, seq in self.thresholds.items():
            kind = FacilityKind(kind)
            values = tuple(float(v) for v in seq)
            if len(values) != N_GRADES:
                raise InvariantViolation(
                    f"kind {kind} has {len(values)} thresholds, expected {N_GRADES}"
                )
            if values[0] <= 0:
                raise InvariantViolation(f"kind {kind} has non-positive threshold")
            for a, b in zip(values, values[1:]):
                if b <= a:
                    raise InvariantViolation(
                        f"kind {kind} thresholds are not strictly increasing "
                        f"({a:g} followed by {b:g})"
                    )
            clean[kind] = values
        object.__setattr__(self, "thresholds", clean)

    def __contains__(self, kind) -> bool:
        return kind in self.thresholds

    def __getitem__(self, kind) -> tuple[float, ...]:
        try:
            return self.thresholds[kind]
        except KeyError:
            raise UnknownFacilityKind(kind) from None

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Sequence[float]]) -> "GradeTable":
        """Build a table from ``{kind name: [10 ascending distances]}``."""
        out = {}
        for name, seq in mapping.items():
            try:
                kind = FacilityKind(name)
            except ValueError:
                raise UnknownFacilityKind(name) from None
            out[kind] = seq
        return cls(out)

    @classmethod
    def load(cls, path) -> "GradeTable":
        """Load a table from a JSON file mapping kind names to thresholds."""
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise InvariantViolation(f"grade table {path} must be a JSON object")
        return cls.from_mapping(raw)

    @classmethod
    def default(cls) -> "GradeTable":
        """The bundled default walking-distance schedule.

        One published value in the senior-community column (grade 9) breaks
        monotonicity in its source and is replaced by the geometric mean of
        its neighbors (1656 m).  Both park kinds share one schedule by
        default; override via :meth:`load` to split them.
        """
        ref = resources.files("socmix.data").joinpath("default_grade_table.json")
        with ref.open(encoding="utf-8") as fh:
            return cls.from_mapping(json.load(fh))

    def save(self, path) -> None:
        payload = {str(k): list(v) for k, v in self.thresholds.items()}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")


def nearest_distance(cell, facilities, kind, metric: Callable = euclidean) -> float:
    """Distance from a cell's centroid to the nearest facility of one kind.

    Returns :data:`NO_FACILITY` (+inf) when no facility of that kind exists.
    ``metric`` must be symmetric and nonnegative; the default is Euclidean.
    """
    kind = FacilityKind(kind)
    best = NO_FACILITY
    for fac in facilities:
        if fac.kind is not kind:
            continue
        d = metric(cell.centroid_x, cell.centroid_y, fac.x, fac.y)
        if d < best:
            best = d
    return best


def grade_of(distance: float, kind, table: GradeTable) -> int:
    """Grade (1..11) for a nearest-facility distance under a grade table.

    The grade is the smallest ``g`` with ``distance <= table[kind][g - 1]``;
    distances beyond the grade-10 threshold (including ``NO_FACILITY``) map
    to 11.
    """
    if distance < 0 or math.isnan(distance):
        raise InvariantViolation(f"distance must be nonnegative, got {distance!r}")
    thresholds = table[FacilityKind(kind)]
    for g, t in enumerate(thresholds, start=1):
        if distance <= t:
            return g
    return N_GRADES + 1


@dataclass(frozen=True)
class GradeMatrix:
    """Per-cell, per-kind accessibility grades (integers 1..11)."""

    cell_ids: tuple[str, ...]
    kinds: tuple[FacilityKind, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=int)
        if values.shape != (len(self.cell_ids), len(self.kinds)):
            raise InvariantViolation(
                f"grade matrix shape {values.shape} does not match "
                f"{len(self.cell_ids)} cells x {len(self.kinds)} kinds"
            )
        if values.size and (values.min() < 1 or values.max() > N_GRADES + 1):
            raise InvariantViolation("grades must lie in 1..11")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "cell_ids", tuple(self.cell_ids))
        object.__setattr__(self, "kinds", tuple(self.kinds))

    def restrict(self, cell_ids: Sequence[str]) -> "GradeMatrix":
        """Rows for the given cell ids, in the given order."""
        index = {cid: i for i, cid in enumerate(self.cell_ids)}
        try:
            rows = [index[cid] for cid in cell_ids]
        except KeyError as exc:
            raise InvariantViolation(f"cell id {exc.args[0]!r} not in grade matrix") from None
        return GradeMatrix(tuple(cell_ids), self.kinds, self.values[rows])


@dataclass(frozen=True)
class ZScoreMatrix:
    """Standardized grade columns with the statistics needed to invert them.

    Each column of ``values`` is ``(grade - mean) / sd`` with the sample
    standard deviation (n-1 divisor) of the rows it was computed over.
    """

    cell_ids: tuple[str, ...]
    kinds: tuple[FacilityKind, ...]
    values: np.ndarray
    means: np.ndarray
    sds: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.cell_ids), len(self.kinds)):
            raise InvariantViolation("z matrix shape mismatch")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "means", np.asarray(self.means, dtype=float))
        object.__setattr__(self, "sds", np.asarray(self.sds, dtype=float))
        object.__setattr__(self, "cell_ids", tuple(self.cell_ids))
        object.__setattr__(self, "kinds", tuple(self.kinds))

    def recompose(self) -> np.ndarray:
        """Undo the standardization, recovering the original grade values."""
        return self.values * self.sds + self.means


def grade_all(area, table: GradeTable, metric: Callable = euclidean) -> GradeMatrix:
    """Grade every (cell, kind) pair of a study area.

    Uses a vectorized distance computation for the Euclidean default and the
    scalar path for custom metrics.
    """
    cells = area.cells
    cell_ids = tuple(c.id for c in cells)
    values = np.empty((len(cells), len(KINDS)), dtype=int)

    if metric is euclidean:
        cx = np.array([c.centroid_x for c in cells])
        cy = np.array([c.centroid_y for c in cells])
        by_kind = {k: [] for k in KINDS}
        for fac in area.facilities:
            by_kind[fac.kind].append((fac.x, fac.y))
        for j, kind in enumerate(KINDS):
            pts = by_kind[kind]
            if not pts:
                values[:, j] = N_GRADES + 1
                continue
            fx = np.array([p[0] for p in pts])
            fy = np.array([p[1] for p in pts])
            d2 = (cx[:, None] - fx[None, :]) ** 2 + (cy[:, None] - fy[None, :]) ** 2
            nearest = np.sqrt(d2.min(axis=1))
            # side="left" finds the first threshold >= distance, so ties sit
            # exactly on the inclusive boundary.
            values[:, j] = np.searchsorted(table[kind], nearest, side="left") + 1
    else:
        for i, cell in enumerate(cells):
            for j, kind in enumerate(KINDS):
                d = nearest_distance(cell, area.facilities, kind, metric)
                values[i, j] = grade_of(d, kind, table)

    return GradeMatrix(cell_ids, KINDS, values)


def _column_stats(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    means = values.mean(axis=0)
    sds = values.std(axis=0, ddof=1)
    return means, sds


def standardize(grades: GradeMatrix) -> ZScoreMatrix:
    """Z-score each grade column over the rows of ``grades``.

    Raises :class:`ConstantColumn` when a kind has identical grades in every
    cell, since a zero-variance column cannot be standardized.
    """
    values = grades.values.astype(float)
    if values.shape[0] < 2:
        raise InvariantViolation("need at least 2 rows to standardize")
    means, sds = _column_stats(values)
    for j, sd in enumerate(sds):
        if sd == 0.0:
            raise ConstantColumn(f"z_{grades.kinds[j]}")
    z = (values - means) / sds
    return ZScoreMatrix(grades.cell_ids, grades.kinds, z, means, sds)


class GradeScaler(TransformerMixin, BaseEstimator):
    """Z-score columns with the sample standard deviation (n-1 divisor).

    A thin transformer over the same statistics as :func:`standardize`, for
    composing grade columns into wider pipelines.

    Attributes
    ----------
    means_ : ndarray of shape (n_columns,)
        Column means seen during :meth:`fit`.
    sds_ : ndarray of shape (n_columns,)
        Sample standard deviations seen during :meth:`fit`.
    """

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] < 2:
            raise InvariantViolation("expected a 2-D array with at least 2 rows")
        means, sds = _column_stats(X)
        for j, sd in enumerate(sds):
            if sd == 0.0:
                raise ConstantColumn(f"column {j}")
        self.means_ = means
        self.sds_ = sds
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        return (X - self.means_) / self.sds_

    def inverse_transform(self, X):
        X = np.asarray(X, dtype=float)
        return X * self.sds_ + self.means_
