"""Hedonic design matrix: ln(land price) on accessibility and controls.

The response is the natural log of land price.  The design matrix has 15
named columns: an intercept, the nine z-scored accessibility grades, log
population, and four land-use/demographic controls.  Cells with zero
population or zero land price cannot enter (their logs are undefined) and
are excluded here, mirroring :func:`socmix.grid.validate_area`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .access import KINDS, ZScoreMatrix
from .errors import EmptyAfterExclusion, InvariantViolation, NonFinite

#: Design column order after the intercept and z-scored grades.
CONTROL_COLUMNS = ("ln_population", "female_rate", "public_land_rate", "commercial_rate", "green_rate")

DESIGN_COLUMNS = ("intercept",) + tuple(f"z_{k}" for k in KINDS) + CONTROL_COLUMNS


@dataclass(frozen=True)
class Dataset:
    """A fitted-model-ready response/design pair with named columns.

    ``X`` includes the intercept column, so ``n_predictors`` is one less
    than the column count.
    """

    y: np.ndarray
    X: np.ndarray
    columns: tuple[str, ...]
    cell_ids: tuple[str, ...]

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if y.ndim != 1 or X.ndim != 2:
            raise InvariantViolation("y must be 1-D and X 2-D")
        if X.shape[0] != y.shape[0]:
            raise InvariantViolation("X and y row counts differ")
        if X.shape[1] != len(self.columns):
            raise InvariantViolation("column names do not match X width")
        if len(self.cell_ids) != y.shape[0]:
            raise InvariantViolation("cell ids do not match row count")
        if not np.isfinite(y).all():
            raise NonFinite("y")
        if not np.isfinite(X).all():
            raise NonFinite("X")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "cell_ids", tuple(self.cell_ids))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def n_predictors(self) -> int:
        """Predictor count excluding the intercept column."""
        return self.X.shape[1] - (1 if "intercept" in self.columns else 0)


def build_design(area, z: ZScoreMatrix) -> Dataset:
    """Assemble the response and 15-column design from an area and z-grades.

    Cells with ``population <= 0`` or ``land_price <= 0`` are dropped.  ``z``
    must cover every remaining cell (extra rows are fine and are ignored).

    Raises
    ------
    EmptyAfterExclusion
        If no cell survives the exclusion rule.
    InvariantViolation
        If ``z`` is missing a surviving cell.
    """
    included = [c for c in area.cells if c.population > 0 and c.land_price > 0]
    if not included:
        raise EmptyAfterExclusion()

    zindex = {cid: i for i, cid in enumerate(z.cell_ids)}
    rows = []
    for c in included:
        if c.id not in zindex:
            raise InvariantViolation(f"z matrix does not cover cell {c.id!r}")
        rows.append(zindex[c.id])

    n = len(included)
    X = np.empty((n, len(DESIGN_COLUMNS)))
    X[:, 0] = 1.0
    X[:, 1 : 1 + len(KINDS)] = z.values[rows]
    X[:, 1 + len(KINDS)] = np.log([c.population for c in included])
    X[:, 2 + len(KINDS)] = [c.female_rate for c in included]
    X[:, 3 + len(KINDS)] = [c.public_land_rate for c in included]
    X[:, 4 + len(KINDS)] = [c.commercial_rate for c in included]
    X[:, 5 + len(KINDS)] = [c.green_rate for c in included]

    y = np.log([c.land_price for c in included])
    return Dataset(y, X, DESIGN_COLUMNS, tuple(c.id for c in included))
