"""Finite mixture of Gaussian linear regressions, fitted by EM.

Each observation's response is drawn from one of K linear regressions with
its own coefficient vector and noise variance; component membership is
latent with mixing weights on the simplex.  The observed-data log-likelihood

    sum_i ln sum_k a_k Normal(y_i | x_i' beta_k, sigma_k^2)

is climbed by expectation-maximization: the E-step computes responsibilities
in log space, the M-step solves one responsibility-weighted least-squares
problem per component.  Multiple random restarts guard against local optima;
components are relabeled by descending mixing weight so fits are comparable
across runs.

The functional surface (:func:`loglik`, :func:`e_step`, :func:`m_step`,
:func:`fit_em`, :func:`ols_fit`) operates on :class:`~socmix.design.Dataset`;
:class:`MixtureOfRegressions` wraps it behind the scikit-learn estimator
protocol.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.special import logsumexp
from scipy.stats import f as f_dist
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_X_y

from .design import Dataset
from .errors import (
    AllRestartsDegenerate,
    DegenerateComponent,
    InvariantViolation,
    SingularDesign,
    TooFewRows,
)

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class MixtureParams:
    """Mixing weights, per-component coefficients, per-component variances."""

    weights: np.ndarray
    betas: np.ndarray
    sigmas2: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.betas, dtype=float)
        s2 = np.asarray(self.sigmas2, dtype=float)
        if w.ndim != 1 or b.ndim != 2 or s2.ndim != 1:
            raise InvariantViolation("weights/sigmas2 must be 1-D and betas 2-D")
        k = w.shape[0]
        if b.shape[0] != k or s2.shape[0] != k:
            raise InvariantViolation("component counts disagree across parameters")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvariantViolation(f"weights sum to {w.sum()!r}, not 1")
        if (w <= 0).any():
            raise InvariantViolation("all mixing weights must be positive")
        if (s2 <= 0).any() or not np.isfinite(s2).all():
            raise InvariantViolation("all variances must be positive and finite")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise InvariantViolation("non-finite parameter values")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "betas", b)
        object.__setattr__(self, "sigmas2", s2)

    @property
    def k(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class EMConfig:
    """Knobs for :func:`fit_em`.

    ``tol`` is the relative log-likelihood improvement below which a run is
    converged.  The variance floor is ``variance_floor_ratio * var(y)``,
    keeping components from collapsing onto single points.
    """

    tol: float = 1e-8
    max_iter: int = 500
    restarts: int = 10
    seed: int | None = None
    variance_floor_ratio: float = 1e-6

    def __post_init__(self):
        if self.tol < 0 or self.max_iter < 1 or self.restarts < 1:
            raise InvariantViolation("tol must be >= 0; max_iter and restarts >= 1")
        if self.seed is not None and (not isinstance(self.seed, (int, np.integer)) or self.seed < 0):
            raise InvariantViolation("seed must be a nonnegative integer or None")
        if self.variance_floor_ratio < 0:
            raise InvariantViolation("variance_floor_ratio must be >= 0")


@dataclass(frozen=True)
class MixtureFit:
    """A converged (or iteration-capped) EM solution on one dataset.

    ``history`` records the log-likelihood after every E-step of the winning
    restart; EM guarantees it is nondecreasing up to float noise.  ``labels``
    are hard assignments (argmax responsibility, ties to the lowest index).
    Components are ordered by descending mixing weight.
    """

    params: MixtureParams
    responsibilities: np.ndarray
    loglik: float
    n_iter: int
    converged: bool
    labels: np.ndarray
    seed: int | None
    history: tuple[float, ...] = field(default=())

    @property
    def k(self) -> int:
        return self.params.k


def _component_log_density(X, y, params):
    """(n, k) matrix of ln[a_k * Normal(y_i | x_i' beta_k, sigma_k^2)]."""
    resid = y[:, None] - X @ params.betas.T
    s2 = params.sigmas2[None, :]
    return np.log(params.weights)[None, :] - 0.5 * (_LOG_2PI + np.log(s2) + resid**2 / s2)


def _check_dims(params: MixtureParams, data: Dataset) -> None:
    if params.betas.shape[1] != data.X.shape[1]:
        raise InvariantViolation(
            f"betas have {params.betas.shape[1]} columns but the design has {data.X.shape[1]}"
        )


def loglik(params: MixtureParams, data: Dataset) -> float:
    """Observed-data log-likelihood under the mixture."""
    _check_dims(params, data)
    return float(logsumexp(_component_log_density(data.X, data.y, params), axis=1).sum())


def _e_step_arrays(X, y, params):
    log_dens = _component_log_density(X, y, params)
    log_norm = logsumexp(log_dens, axis=1)
    resp = np.exp(log_dens - log_norm[:, None])
    resp /= resp.sum(axis=1, keepdims=True)
    return resp, float(log_norm.sum())


def e_step(params: MixtureParams, data: Dataset) -> np.ndarray:
    """Posterior component probabilities per row; rows sum to one."""
    _check_dims(params, data)
    resp, _ = _e_step_arrays(data.X, data.y, params)
    return resp


def weighted_least_squares(X, y, w) -> np.ndarray:
    """Minimize sum_i w_i (y_i - x_i' beta)^2 via an SVD solve.

    Raises :class:`SingularDesign` when the weighted design is rank
    deficient.
    """
    sw = np.sqrt(w)
    beta, _, rank, _ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    if rank < X.shape[1]:
        raise SingularDesign()
    return beta


def m_step(resp, data: Dataset, variance_floor: float = 0.0) -> MixtureParams:
    """Maximize the expected complete-data log-likelihood given ``resp``.

    Weight ``a_k`` is the mean responsibility; ``beta_k`` solves the
    responsibility-weighted least-squares problem; ``sigma_k^2`` is the
    weighted residual variance, floored at ``variance_floor``.

    Raises
    ------
    DegenerateComponent
        When a component's effective row count (its responsibility sum) is
        too small to identify a regression (not above the coefficient count).
    SingularDesign
        When a component's weighted design is rank deficient.
    """
    X, y = data.X, data.y
    resp = np.asarray(resp, dtype=float)
    n, m = X.shape
    if resp.shape[0] != n or resp.ndim != 2:
        raise InvariantViolation("responsibilities do not match the dataset rows")
    k = resp.shape[1]

    eff = resp.sum(axis=0)
    # eff sums to n up to rounding; dividing by the actual sum keeps the
    # weights on the simplex to float precision
    weights = eff / eff.sum()
    betas = np.empty((k, m))
    sigmas2 = np.empty(k)
    for j in range(k):
        if eff[j] <= m:
            raise DegenerateComponent(j, float(eff[j]))
        try:
            betas[j] = weighted_least_squares(X, y, resp[:, j])
        except SingularDesign:
            raise SingularDesign(component=j) from None
        resid = y - X @ betas[j]
        sigmas2[j] = max(float((resp[:, j] * resid**2).sum() / eff[j]), variance_floor)
    return MixtureParams(weights, betas, sigmas2)


def assign(resp) -> np.ndarray:
    """Hard labels: argmax responsibility, ties resolved to the lowest index."""
    return np.argmax(np.asarray(resp), axis=1)


@dataclass(frozen=True)
class _EMRun:
    params: MixtureParams
    responsibilities: np.ndarray
    loglik: float
    n_iter: int
    converged: bool
    history: tuple[float, ...]


def run_em(data: Dataset, init_resp, *, tol: float = 1e-8, max_iter: int = 500,
           variance_floor: float = 0.0) -> _EMRun:
    """One EM run from an explicit initial responsibility matrix.

    Alternates M- and E-steps until the relative log-likelihood improvement
    drops below ``tol`` or ``max_iter`` iterations elapse.  The returned
    responsibilities and log-likelihood always correspond to the returned
    parameters.
    """
    X, y = data.X, data.y
    params = m_step(init_resp, data, variance_floor)
    history: list[float] = []
    prev = None
    converged = False
    resp, ll = None, None
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        resp, ll = _e_step_arrays(X, y, params)
        history.append(ll)
        if prev is not None and ll - prev <= tol * max(1.0, abs(prev)):
            converged = True
            break
        prev = ll
        params = m_step(resp, data, variance_floor)
    if not converged:
        # the loop exhausted after an M-step; realign with the final params
        resp, ll = _e_step_arrays(X, y, params)
        history.append(ll)
    return _EMRun(params, resp, ll, n_iter, converged, tuple(history))


def _relabel_descending(run: _EMRun) -> _EMRun:
    order = np.argsort(-run.params.weights, kind="stable")
    if (order == np.arange(order.size)).all():
        return run
    params = MixtureParams(
        run.params.weights[order], run.params.betas[order], run.params.sigmas2[order]
    )
    return replace(run, params=params, responsibilities=run.responsibilities[:, order])


def fit_em(data: Dataset, k: int, config: EMConfig | None = None) -> MixtureFit:
    """Fit a k-component mixture of regressions with random restarts.

    Each restart draws initial responsibilities from a symmetric
    Dirichlet(1); the restart with the best final log-likelihood wins, and
    its components are relabeled by descending mixing weight.  All
    randomness derives from ``config.seed`` (one seed, split per restart);
    the seed actually used is recorded on the returned fit.

    Raises
    ------
    TooFewRows
        When ``n <= k * (coefficient count + 1)``, too few rows to identify
        the model.
    AllRestartsDegenerate
        When every restart collapsed a component or hit a singular design.
    """
    if k < 1:
        raise InvariantViolation("k must be >= 1")
    config = config or EMConfig()
    n, m = data.X.shape
    needed = k * (m + 1)
    if n <= needed:
        raise TooFewRows(n, needed)

    seed = config.seed if config.seed is not None else np.random.SeedSequence().entropy
    floor = config.variance_floor_ratio * float(np.var(data.y))

    best: _EMRun | None = None
    last_error: Exception | None = None
    for restart in range(config.restarts):
        rng = np.random.default_rng(np.random.SeedSequence([seed, k, restart]))
        init = rng.dirichlet(np.ones(k), size=n)
        try:
            run = run_em(data, init, tol=config.tol, max_iter=config.max_iter,
                         variance_floor=floor)
        except (DegenerateComponent, SingularDesign) as exc:
            last_error = exc
            continue
        if best is None or run.loglik > best.loglik:
            best = run
    if best is None:
        raise AllRestartsDegenerate(k, config.restarts, last_error)

    best = _relabel_descending(best)
    return MixtureFit(
        params=best.params,
        responsibilities=best.responsibilities,
        loglik=best.loglik,
        n_iter=best.n_iter,
        converged=best.converged,
        labels=assign(best.responsibilities),
        seed=seed,
        history=best.history,
    )


@dataclass(frozen=True)
class OLSFit:
    """Pooled ordinary least squares with classical standard errors."""

    coef: np.ndarray
    se: np.ndarray
    sigma2: float
    r2: float
    f_stat: float
    f_pvalue: float
    n: int
    df_resid: int
    columns: tuple[str, ...]


def ols_fit(data: Dataset) -> OLSFit:
    """Single-equation OLS on the full dataset.

    Classical (homoskedastic) standard errors; the F statistic tests all
    non-intercept coefficients jointly against the intercept-only model.
    """
    X, y = data.X, data.y
    n, m = X.shape
    if n <= m:
        raise TooFewRows(n, m)
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < m:
        raise SingularDesign()
    resid = y - X @ beta
    rss = float(resid @ resid)
    df_resid = n - m
    sigma2 = rss / df_resid
    cov = sigma2 * np.linalg.inv(X.T @ X)
    se = np.sqrt(np.diag(cov))

    has_intercept = "intercept" in data.columns
    tss = float(((y - y.mean()) ** 2).sum()) if has_intercept else float(y @ y)
    r2 = 1.0 - rss / tss if tss > 0 else 0.0
    n_slopes = m - 1 if has_intercept else m
    if n_slopes > 0 and r2 < 1.0:
        f_stat = (tss - rss) / n_slopes / sigma2
        f_pvalue = float(f_dist.sf(f_stat, n_slopes, df_resid))
    else:
        f_stat, f_pvalue = np.inf, 0.0
    return OLSFit(beta, se, sigma2, r2, float(f_stat), f_pvalue, n, df_resid, data.columns)


def save_fit(path, fit: MixtureFit, columns: Sequence[str], metadata: Mapping | None = None) -> None:
    """Serialize a fit's parameters and run facts to JSON (floats exact)."""
    from ._tableio import write_json

    payload = {
        "k": fit.k,
        "columns": list(columns),
        "weights": fit.params.weights.tolist(),
        "betas": fit.params.betas.tolist(),
        "sigmas2": fit.params.sigmas2.tolist(),
        "loglik": fit.loglik,
        "n_iter": fit.n_iter,
        "converged": fit.converged,
        "seed": fit.seed,
    }
    write_json(path, payload, metadata)


def load_fit(path) -> tuple[MixtureParams, dict]:
    """Load parameters saved by :func:`save_fit`, plus the run facts."""
    import json

    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    params = MixtureParams(
        np.array(raw["weights"]), np.array(raw["betas"]), np.array(raw["sigmas2"])
    )
    info = {k: raw[k] for k in ("k", "columns", "loglik", "n_iter", "converged", "seed") if k in raw}
    return params, info


class MixtureOfRegressions(RegressorMixin, BaseEstimator):
    """Mixture of Gaussian linear regressions as a scikit-learn estimator.

    Thin wrapper over :func:`fit_em` so the model composes with pipelines,
    grid search, and cloning.

    Parameters
    ----------
    n_components : int, default=2
        Number of regression components.
    fit_intercept : bool, default=True
        Prepend a constant column to ``X``.
    tol : float, default=1e-8
        Relative log-likelihood improvement declaring convergence.
    max_iter : int, default=500
        EM iteration cap per restart.
    n_init : int, default=10
        Random restarts; the best final log-likelihood wins.
    variance_floor_ratio : float, default=1e-6
        Per-component variance floor as a fraction of ``var(y)``.
    random_state : int or None, default=None
        Seed for the restart initializations.

    Attributes
    ----------
    weights_ : ndarray of shape (n_components,)
        Mixing weights, in descending order.
    betas_ : ndarray of shape (n_components, n_features [+ 1])
        Per-component coefficients on the internal design (intercept first
        when ``fit_intercept``).
    variances_ : ndarray of shape (n_components,)
        Per-component noise variances.
    responsibilities_ : ndarray of shape (n_samples, n_components)
        Posterior component probabilities of the training rows.
    labels_ : ndarray of shape (n_samples,)
        Hard training assignments.
    loglik_ : float
        Final observed-data log-likelihood.
    """

    def __init__(self, n_components=2, *, fit_intercept=True, tol=1e-8, max_iter=500,
                 n_init=10, variance_floor_ratio=1e-6, random_state=None):
        self.n_components = n_components
        self.fit_intercept = fit_intercept
        self.tol = tol
        self.max_iter = max_iter
        self.n_init = n_init
        self.variance_floor_ratio = variance_floor_ratio
        self.random_state = random_state

    def _design(self, X):
        if self.fit_intercept:
            return np.column_stack([np.ones(X.shape[0]), X])
        return np.asarray(X, dtype=float)

    def _dataset(self, X, y):
        design = self._design(X)
        names = ["intercept"] if self.fit_intercept else []
        names += [f"x{j}" for j in range(X.shape[1])]
        ids = tuple(str(i) for i in range(X.shape[0]))
        return Dataset(y, design, tuple(names), ids)

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        config = EMConfig(
            tol=self.tol,
            max_iter=self.max_iter,
            restarts=self.n_init,
            seed=self.random_state,
            variance_floor_ratio=self.variance_floor_ratio,
        )
        fit = fit_em(self._dataset(X, y), self.n_components, config)
        self.fit_ = fit
        self.weights_ = fit.params.weights
        self.betas_ = fit.params.betas
        self.variances_ = fit.params.sigmas2
        self.responsibilities_ = fit.responsibilities
        self.labels_ = fit.labels
        self.loglik_ = fit.loglik
        self.n_iter_ = fit.n_iter
        self.converged_ = fit.converged
        self.n_features_in_ = X.shape[1]
        return self

    def predict_components(self, X):
        """Per-component conditional means, shape (n_samples, n_components)."""
        X = check_array(X)
        return self._design(X) @ self.betas_.T

    def predict(self, X):
        """Mixture-weighted conditional mean of the response."""
        return self.predict_components(X) @ self.weights_

    def responsibilities(self, X, y):
        """Posterior component probabilities for new (X, y) pairs."""
        X, y = check_X_y(X, y, y_numeric=True)
        resp, _ = _e_step_arrays(self._design(X), y, self.fit_.params)
        return resp
