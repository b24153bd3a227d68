"""Regression diagnostics and per-component summary tables.

Variance inflation factors flag multicollinearity among the predictors;
cluster descriptives summarize each component's cells; the coefficient table
lays per-component estimates beside the pooled OLS column with significance
stars.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import erfc, sqrt
from typing import Mapping, Sequence

import numpy as np

from .design import Dataset
from .errors import ConstantColumn, InvariantViolation, LabelMismatch
from .grid import StudyArea
from .mixture import MixtureFit, OLSFit, weighted_least_squares

VIF_THRESHOLD = 5.0

#: R^2 at or above this in an auxiliary regression is treated as exact
#: collinearity and reported as an infinite VIF rather than a huge one.
_PERFECT_R2 = 1.0 - 1e-12


def stars(p: float) -> str:
    """Significance stars: * p<.05, ** p<.01, *** p<.001."""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def normal_p_value(estimate: float, se: float) -> float:
    """Two-sided p-value from a normal approximation to estimate/se."""
    if se <= 0:
        return 0.0 if estimate != 0 else 1.0
    return erfc(abs(estimate / se) / sqrt(2.0))


def flag_high(vif_values, threshold: float = VIF_THRESHOLD) -> np.ndarray:
    """True exactly where vif strictly exceeds the threshold."""
    return np.asarray(vif_values, dtype=float) > threshold


@dataclass(frozen=True)
class VifReport:
    """Variance inflation factors with reciprocals, mean, and flags."""

    columns: tuple[str, ...]
    vif: np.ndarray
    inv_vif: np.ndarray
    mean_vif: float
    flags: np.ndarray
    threshold: float = VIF_THRESHOLD


def vif(X, columns: Sequence[str] | None = None, threshold: float = VIF_THRESHOLD) -> VifReport:
    """Variance inflation factor of every predictor column.

    Each column is regressed on all the others plus an intercept;
    ``vif_j = 1 / (1 - R_j^2)``.  ``X`` must not contain the intercept
    column itself.  Perfectly collinear columns get ``vif = inf`` (flagged)
    rather than an error; a zero-variance column raises
    :class:`ConstantColumn`.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] <= X.shape[1] + 1:
        raise InvariantViolation("X must be 2-D with more rows than columns")
    n, m = X.shape
    names = tuple(columns) if columns is not None else tuple(f"x{j}" for j in range(m))
    if len(names) != m:
        raise InvariantViolation("column names do not match X width")

    out = np.empty(m)
    for j in range(m):
        target = X[:, j]
        tss = float(((target - target.mean()) ** 2).sum())
        if tss == 0.0:
            raise ConstantColumn(names[j])
        others = np.column_stack([np.ones(n), np.delete(X, j, axis=1)])
        coef, _, _, _ = np.linalg.lstsq(others, target, rcond=None)
        resid = target - others @ coef
        r2 = 1.0 - float(resid @ resid) / tss
        r2 = min(max(r2, 0.0), 1.0)
        out[j] = np.inf if r2 >= _PERFECT_R2 else 1.0 / (1.0 - r2)

    inv = np.where(np.isinf(out), 0.0, 1.0 / out)
    return VifReport(names, out, inv, float(out.mean()), flag_high(out, threshold), threshold)


@dataclass(frozen=True)
class ComponentSummary:
    """Descriptive statistics of one component's cells."""

    component: int
    n: int
    mean: dict[str, float]
    sd: dict[str, float]
    min: dict[str, float]
    max: dict[str, float]


@dataclass(frozen=True)
class ClusterDescriptives:
    """Per-component summaries, largest component first."""

    components: tuple[ComponentSummary, ...]
    variables: tuple[str, ...]

    @property
    def total_n(self) -> int:
        return sum(c.n for c in self.components)


def cluster_descriptives(area: StudyArea, labels: Mapping[str, int], z=None) -> ClusterDescriptives:
    """Summarize land price, accessibility z-scores, and controls per component.

    ``labels`` maps cell id to component index and must cover exactly the
    cells it claims (ids absent from the area raise
    :class:`LabelMismatch`).  Population is summarized on the log scale to
    match the modeling scale.  Passing the z-score matrix used in the fit
    adds one row per accessibility kind.
    """
    by_id = {c.id: c for c in area.cells}
    unknown = [cid for cid in labels if cid not in by_id]
    if unknown:
        raise LabelMismatch(f"labels reference unknown cell ids: {unknown[:5]}")
    if not labels:
        raise LabelMismatch("labels are empty")

    zindex = {}
    if z is not None:
        zindex = {cid: i for i, cid in enumerate(z.cell_ids)}
        missing = [cid for cid in labels if cid not in zindex]
        if missing:
            raise LabelMismatch(f"z matrix does not cover labeled cells: {missing[:5]}")

    variables = ["land_price"]
    if z is not None:
        variables += [f"z_{k}" for k in z.kinds]
    variables += ["ln_population", "female_rate", "public_land_rate", "green_rate", "commercial_rate"]

    def values_for(cid):
        cell = by_id[cid]
        row = [cell.land_price]
        if z is not None:
            row.extend(z.values[zindex[cid]])
        if cell.population <= 0:
            raise LabelMismatch(f"cell {cid!r} has nonpositive population; it cannot be labeled")
        row.extend(
            [
                float(np.log(cell.population)),
                cell.female_rate,
                cell.public_land_rate,
                cell.green_rate,
                cell.commercial_rate,
            ]
        )
        return row

    groups: dict[int, list[list[float]]] = {}
    for cid, comp in labels.items():
        groups.setdefault(int(comp), []).append(values_for(cid))

    summaries = []
    for comp, rows in groups.items():
        arr = np.asarray(rows, dtype=float)
        ddof = 1 if arr.shape[0] > 1 else 0
        summaries.append(
            ComponentSummary(
                component=comp,
                n=arr.shape[0],
                mean={v: float(m) for v, m in zip(variables, arr.mean(axis=0))},
                sd={v: float(s) for v, s in zip(variables, arr.std(axis=0, ddof=ddof))},
                min={v: float(m) for v, m in zip(variables, arr.min(axis=0))},
                max={v: float(m) for v, m in zip(variables, arr.max(axis=0))},
            )
        )
    summaries.sort(key=lambda s: (-s.n, s.component))
    return ClusterDescriptives(tuple(summaries), tuple(variables))


@dataclass(frozen=True)
class CoefficientColumn:
    """One column of the coefficient table (a component or the pooled fit)."""

    name: str
    coef: np.ndarray
    se: np.ndarray
    p: np.ndarray
    stars: tuple[str, ...]
    mixing_weight: float | None = None
    hard_share: float | None = None
    f_stat: float | None = None
    f_pvalue: float | None = None
    r2: float | None = None


@dataclass(frozen=True)
class CoefficientTable:
    """Per-component and pooled coefficient estimates, side by side."""

    rows: tuple[str, ...]
    components: tuple[CoefficientColumn, ...]
    pooled: CoefficientColumn


def _weighted_se(X, y, beta, w):
    """Classical weighted-OLS standard errors for one component.

    An approximation: responsibilities enter as fixed case weights, and the
    residual variance uses the weighted degrees of freedom.
    """
    n, m = X.shape
    eff = float(w.sum())
    resid = y - X @ beta
    s2 = float((w * resid**2).sum()) / max(eff - m, 1e-12)
    xtwx = X.T @ (X * w[:, None])
    cov = s2 * np.linalg.inv(xtwx)
    return np.sqrt(np.diag(cov))


def coefficient_table(fit: MixtureFit, pooled: OLSFit, data: Dataset) -> CoefficientTable:
    """Lay out per-component estimates beside the pooled OLS column.

    Component standard errors are responsibility-weighted OLS errors
    (fixed-weight approximation); p-values use the normal approximation
    throughout.  Each component column carries its mixing weight and its
    hard-label share; the pooled column carries the F statistic and R².
    """
    X, y = data.X, data.y
    if fit.responsibilities.shape[0] != data.n:
        raise InvariantViolation("fit does not match the dataset rows")

    hard = np.bincount(fit.labels, minlength=fit.k)
    columns = []
    for k in range(fit.k):
        w = fit.responsibilities[:, k]
        beta = fit.params.betas[k]
        se = _weighted_se(X, y, beta, w)
        p = np.array([normal_p_value(b, s) for b, s in zip(beta, se)])
        columns.append(
            CoefficientColumn(
                name=f"component_{k + 1}",
                coef=beta,
                se=se,
                p=p,
                stars=tuple(stars(v) for v in p),
                mixing_weight=float(fit.params.weights[k]),
                hard_share=float(hard[k] / data.n),
            )
        )

    pooled_p = np.array([normal_p_value(b, s) for b, s in zip(pooled.coef, pooled.se)])
    pooled_col = CoefficientColumn(
        name="pooled",
        coef=pooled.coef,
        se=pooled.se,
        p=pooled_p,
        stars=tuple(stars(v) for v in pooled_p),
        f_stat=pooled.f_stat,
        f_pvalue=pooled.f_pvalue,
        r2=pooled.r2,
    )
    return CoefficientTable(tuple(data.columns), tuple(columns), pooled_col)


def vif_to_csv(path, report: VifReport, metadata: Mapping | None = None) -> None:
    """Write one row per predictor plus a Total row carrying the mean vif."""
    from ._tableio import write_csv

    header = ("variable", "vif", "inv_vif", "flag")
    rows = [
        (name, report.vif[j], report.inv_vif[j], "high" if report.flags[j] else "")
        for j, name in enumerate(report.columns)
    ]
    rows.append(("Total", report.mean_vif, "", ""))
    write_csv(path, header, rows, metadata)


def descriptives_to_csv(path, desc: ClusterDescriptives, metadata: Mapping | None = None) -> None:
    from ._tableio import write_csv

    header = ("component", "n", "variable", "mean", "sd", "min", "max")
    rows = []
    for comp in desc.components:
        for v in desc.variables:
            rows.append((comp.component + 1, comp.n, v, comp.mean[v], comp.sd[v], comp.min[v], comp.max[v]))
    write_csv(path, header, rows, metadata)


def coefficients_to_csv(path, table: CoefficientTable, metadata: Mapping | None = None) -> None:
    from ._tableio import write_csv

    header = ("column", "variable", "coef", "se", "p", "stars")
    rows = []
    for col in table.components + (table.pooled,):
        for i, var in enumerate(table.rows):
            rows.append((col.name, var, col.coef[i], col.se[i], col.p[i], col.stars[i]))
        if col.mixing_weight is not None:
            rows.append((col.name, "mixing_weight", col.mixing_weight, "", "", ""))
        if col.hard_share is not None:
            rows.append((col.name, "hard_share", col.hard_share, "", "", ""))
        if col.f_stat is not None:
            rows.append((col.name, "F", col.f_stat, "", col.f_pvalue, stars(col.f_pvalue)))
        if col.r2 is not None:
            rows.append((col.name, "R2", col.r2, "", "", ""))
    write_csv(path, header, rows, metadata)
