"""Component-count selection: information criteria and the entropy criterion.

A k-component fit spends ``k * (p + 2) + (k - 1)`` degrees of freedom
(coefficients and a variance per component, plus the free mixing weights).
AIC and BIC penalize the log-likelihood with that count; the normalized
entropy criterion (NEC) instead weighs how separated the components are
(responsibility entropy) against the likelihood gained over a one-component
fit.  NEC is undefined at k = 1, so sweeps always fit the one-component
model as the baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import xlogy

from .design import Dataset
from .errors import (
    EmptyReport,
    InvariantViolation,
    NonPositiveLikelihoodGain,
    SocmixError,
    UndefinedForK1,
)
from .mixture import EMConfig, MixtureFit, fit_em

CRITERIA = ("aic", "bic", "nec")


def df_of(k: int, p: int) -> int:
    """Parameter count of a k-component fit with p predictors.

    Each component has p + 1 coefficients and a variance; the weights add
    k - 1 free values.
    """
    if k < 1 or p < 0:
        raise InvariantViolation("k must be >= 1 and p >= 0")
    return k * (p + 2) + (k - 1)


def aic(loglik: float, df: int) -> float:
    return 2.0 * df - 2.0 * loglik


def bic(loglik: float, df: int, n: int) -> float:
    if n < 1:
        raise InvariantViolation("n must be >= 1")
    return df * math.log(n) - 2.0 * loglik


def entropy(resp) -> float:
    """Total responsibility entropy, with 0·ln(0) = 0.

    Zero exactly when every row is a hard (one-hot) assignment; at most
    n·ln(k) for uniform rows.
    """
    resp = np.asarray(resp, dtype=float)
    if (resp < 0).any():
        raise InvariantViolation("responsibilities must be nonnegative")
    # + 0.0 normalizes the -0.0 that negating a zero sum would produce
    return float(-xlogy(resp, resp).sum() + 0.0)


def nec(fit_k: MixtureFit, fit_1: MixtureFit) -> float:
    """Normalized entropy criterion: entropy over likelihood gain.

    Raises
    ------
    UndefinedForK1
        If ``fit_k`` has a single component.
    NonPositiveLikelihoodGain
        If ``fit_k`` does not improve on the one-component log-likelihood.
    """
    if fit_k.k == 1:
        raise UndefinedForK1()
    if fit_1.k != 1:
        raise InvariantViolation("baseline fit must have exactly one component")
    gain = fit_k.loglik - fit_1.loglik
    if gain <= 0:
        raise NonPositiveLikelihoodGain(fit_k.loglik, fit_1.loglik)
    return entropy(fit_k.responsibilities) / gain


@dataclass(frozen=True)
class SelectionRow:
    """One candidate component count with its criterion values.

    ``nec`` is ``None`` for k = 1 (undefined) and whenever the k-fit failed;
    a failed fit leaves ``error`` set and the numeric fields ``None``.
    """

    k: int
    loglik: float | None = None
    df: int | None = None
    aic: float | None = None
    bic: float | None = None
    nec: float | None = None
    error: str | None = None

    def value(self, criterion: str) -> float | None:
        if criterion not in CRITERIA:
            raise InvariantViolation(f"unknown criterion {criterion!r}")
        return getattr(self, criterion)


@dataclass(frozen=True)
class SelectionReport:
    """Sweep results: one row per k, the fits, and the per-criterion winners."""

    rows: tuple[SelectionRow, ...]
    fits: Mapping[int, MixtureFit] = field(default_factory=dict)

    def __post_init__(self):
        ks = [r.k for r in self.rows]
        if sorted(ks) != ks or len(set(ks)) != len(ks):
            raise InvariantViolation("rows must be sorted by k without duplicates")

    @property
    def chosen_k(self) -> dict[str, int]:
        out = {}
        for criterion in CRITERIA:
            try:
                out[criterion] = select(self, criterion)
            except EmptyReport:
                pass
        return out

    def row(self, k: int) -> SelectionRow:
        for r in self.rows:
            if r.k == k:
                return r
        raise InvariantViolation(f"no row for k={k}")


def select(report: SelectionReport, criterion: str) -> int:
    """The k minimizing a criterion; ties go to the smaller k."""
    if criterion not in CRITERIA:
        raise InvariantViolation(f"unknown criterion {criterion!r}")
    best_k, best_v = None, None
    for r in report.rows:
        v = r.value(criterion)
        if v is None:
            continue
        if best_v is None or v < best_v:
            best_k, best_v = r.k, v
    if best_k is None:
        raise EmptyReport(criterion)
    return best_k


def sweep(data: Dataset, k_range: Sequence[int], config: EMConfig | None = None) -> SelectionReport:
    """Fit every k in ``k_range`` and tabulate AIC/BIC/NEC.

    The one-component baseline is always fitted (NEC needs it) even when 1
    is not in ``k_range``.  A k whose fit fails contributes an error row
    instead of aborting the sweep; the failure text names the exception.
    """
    ks = sorted(set(int(k) for k in k_range))
    if not ks or ks[0] < 1:
        raise InvariantViolation("k_range must be nonempty with all k >= 1")
    config = config or EMConfig()
    p = data.n_predictors
    n = data.n

    fits: dict[int, MixtureFit] = {}
    errors: dict[int, str] = {}

    def fit_one(k):
        try:
            fits[k] = fit_em(data, k, config)
        except SocmixError as exc:
            errors[k] = f"{type(exc).__name__}: {exc}"

    fit_one(1)
    for k in ks:
        if k != 1:
            fit_one(k)

    rows = []
    for k in ks:
        if k in errors:
            rows.append(SelectionRow(k=k, error=errors[k]))
            continue
        fit = fits[k]
        df = df_of(k, p)
        row_nec = None
        if k > 1 and 1 in fits:
            try:
                row_nec = nec(fit, fits[1])
            except NonPositiveLikelihoodGain:
                row_nec = None
        rows.append(
            SelectionRow(
                k=k,
                loglik=fit.loglik,
                df=df,
                aic=aic(fit.loglik, df),
                bic=bic(fit.loglik, df, n),
                nec=row_nec,
            )
        )
    kept = {k: f for k, f in fits.items() if k in ks or k == 1}
    return SelectionReport(tuple(rows), kept)


def report_to_csv(path, report: SelectionReport, metadata: Mapping | None = None) -> None:
    """Write the selection table (k, loglik, df, aic, bic, nec, error)."""
    from ._tableio import write_csv

    header = ("k", "loglik", "df", "aic", "bic", "nec", "error")
    rows = [
        (r.k, r.loglik, r.df, r.aic, r.bic, r.nec, r.error or "")
        for r in report.rows
    ]
    write_csv(path, header, rows, metadata)
