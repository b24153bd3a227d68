import math

import numpy as np
import pytest

from socmix import (
    Dataset,
    EMConfig,
    MixtureFit,
    MixtureOfRegressions,
    MixtureParams,
    assign,
    e_step,
    fit_em,
    load_fit,
    loglik,
    m_step,
    ols_fit,
    run_em,
    save_fit,
    weighted_least_squares,
)
from socmix.errors import (
    AllRestartsDegenerate,
    DegenerateComponent,
    InvariantViolation,
    SingularDesign,
    TooFewRows,
)

from conftest import gaussian_loglik_oracle, hungarian_match, ols_oracle, random_dataset, wls_oracle


def two_component_dataset(rng, n=240, p=3, noise=0.05, weight=0.6, gap=8.0):
    """Two planted regressions whose intercepts differ by ``gap``."""
    X = np.column_stack([np.ones(n), rng.standard_normal((n, p))])
    beta0 = rng.uniform(-1.5, 1.5, size=p + 1)
    beta1 = beta0 + rng.uniform(-0.5, 0.5, size=p + 1)
    beta1[0] = beta0[0] + gap
    labels = (rng.random(n) > weight).astype(int)
    betas = np.stack([beta0, beta1])
    y = (X * betas[labels]).sum(axis=1) + noise * rng.standard_normal(n)
    columns = ("intercept",) + tuple(f"x{j}" for j in range(p))
    ids = tuple(f"r{i}" for i in range(n))
    return Dataset(y, X, columns, ids), betas, labels


def params_for(weights, betas, sigmas2):
    return MixtureParams(np.asarray(weights, float), np.asarray(betas, float), np.asarray(sigmas2, float))


class TestLoglik:
    def test_matches_direct_density_sum(self):
        rng = np.random.default_rng(0)
        data, _ = random_dataset(rng, n=50)
        params = params_for(
            [0.3, 0.7],
            rng.normal(size=(2, data.X.shape[1])),
            [0.5, 1.2],
        )
        dens = np.zeros(data.n)
        for a, beta, s2 in zip(params.weights, params.betas, params.sigmas2):
            mean = data.X @ beta
            dens += a * np.exp(-0.5 * (data.y - mean) ** 2 / s2) / math.sqrt(2 * math.pi * s2)
        assert loglik(params, data) == pytest.approx(np.log(dens).sum(), abs=1e-10)

    def test_k1_matches_gaussian_oracle(self):
        rng = np.random.default_rng(1)
        data, beta = random_dataset(rng, n=70, noise=0.3)
        s2 = 0.09
        params = params_for([1.0], beta[None, :], [s2])
        expected = gaussian_loglik_oracle(data.y, data.X @ beta, s2)
        assert loglik(params, data) == pytest.approx(expected, rel=1e-12)

    def test_duplicating_rows_doubles_loglik(self):
        rng = np.random.default_rng(2)
        data, _ = random_dataset(rng, n=40)
        params = params_for([0.5, 0.5], rng.normal(size=(2, data.X.shape[1])), [1.0, 2.0])
        doubled = Dataset(
            np.concatenate([data.y, data.y]),
            np.vstack([data.X, data.X]),
            data.columns,
            data.cell_ids + tuple(f"{c}b" for c in data.cell_ids),
        )
        assert loglik(params, doubled) == pytest.approx(2.0 * loglik(params, data), rel=1e-12)

    def test_component_permutation_invariant(self):
        rng = np.random.default_rng(3)
        data, _ = random_dataset(rng, n=30)
        betas = rng.normal(size=(3, data.X.shape[1]))
        a = params_for([0.2, 0.3, 0.5], betas, [1.0, 2.0, 3.0])
        b = params_for([0.5, 0.2, 0.3], betas[[2, 0, 1]], [3.0, 1.0, 2.0])
        assert loglik(a, data) == pytest.approx(loglik(b, data), rel=1e-12)

    def test_dimension_mismatch_rejected(self):
        rng = np.random.default_rng(4)
        data, _ = random_dataset(rng, n=20, p=3)
        params = params_for([1.0], np.zeros((1, 2)), [1.0])
        with pytest.raises(InvariantViolation):
            loglik(params, data)


class TestEStep:
    def test_identical_components_share_mass(self):
        rng = np.random.default_rng(5)
        data, beta = random_dataset(rng, n=25)
        betas = np.stack([beta, beta, beta])
        resp = e_step(params_for([1 / 3, 1 / 3, 1 / 3], betas, [1.0, 1.0, 1.0]), data)
        np.testing.assert_allclose(resp, 1.0 / 3.0, atol=1e-14)

    def test_identical_components_follow_weights(self):
        rng = np.random.default_rng(6)
        data, beta = random_dataset(rng, n=25)
        resp = e_step(params_for([0.9, 0.1], np.stack([beta, beta]), [1.0, 1.0]), data)
        np.testing.assert_allclose(resp[:, 0], 0.9, atol=1e-14)
        np.testing.assert_allclose(resp[:, 1], 0.1, atol=1e-14)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            data, _ = random_dataset(rng, n=40)
            params = params_for(
                [0.25, 0.25, 0.5],
                rng.normal(scale=3.0, size=(3, data.X.shape[1])),
                rng.uniform(0.1, 4.0, size=3),
            )
            resp = e_step(params, data)
            np.testing.assert_allclose(resp.sum(axis=1), 1.0, atol=1e-12)
            assert (resp >= 0).all()

    def test_separation_gives_near_one_hot(self):
        rng = np.random.default_rng(8)
        data, betas, labels = two_component_dataset(rng, gap=30.0, noise=0.05)
        params = params_for([0.6, 0.4], betas, [0.0025, 0.0025])
        resp = e_step(params, data)
        assert (resp.max(axis=1) > 0.999).all()
        np.testing.assert_array_equal(assign(resp), labels)


class TestWeightedLeastSquares:
    def test_matches_normal_equations(self):
        rng = np.random.default_rng(9)
        for _ in range(5):
            X = np.column_stack([np.ones(30), rng.standard_normal((30, 3))])
            y = rng.standard_normal(30)
            w = rng.uniform(0.1, 2.0, size=30)
            np.testing.assert_allclose(weighted_least_squares(X, y, w), wls_oracle(X, y, w), atol=1e-10)

    def test_unit_weights_reduce_to_ols(self):
        rng = np.random.default_rng(10)
        data, _ = random_dataset(rng, n=60)
        np.testing.assert_allclose(
            weighted_least_squares(data.X, data.y, np.ones(data.n)),
            ols_oracle(data.X, data.y),
            atol=1e-10,
        )

    def test_rank_deficiency_raises(self):
        X = np.ones((10, 2))
        with pytest.raises(SingularDesign):
            weighted_least_squares(X, np.arange(10.0), np.ones(10))


class TestMStep:
    def test_hard_partition_recovers_per_subset_ols(self):
        rng = np.random.default_rng(11)
        data, _, labels = two_component_dataset(rng, n=200)
        resp = np.zeros((data.n, 2))
        resp[np.arange(data.n), labels] = 1.0
        params = m_step(resp, data)
        for j in range(2):
            mask = labels == j
            np.testing.assert_allclose(params.betas[j], ols_oracle(data.X[mask], data.y[mask]), atol=1e-8)
            resid = data.y[mask] - data.X[mask] @ params.betas[j]
            assert params.sigmas2[j] == pytest.approx(float(resid @ resid) / mask.sum(), rel=1e-10)
        np.testing.assert_allclose(params.weights, [np.mean(labels == 0), np.mean(labels == 1)], atol=1e-12)

    def test_uniform_responsibilities_collapse_to_pooled(self):
        rng = np.random.default_rng(12)
        data, _ = random_dataset(rng, n=90)
        resp = np.full((data.n, 2), 0.5)
        params = m_step(resp, data)
        pooled = ols_oracle(data.X, data.y)
        np.testing.assert_allclose(params.betas[0], pooled, atol=1e-9)
        np.testing.assert_allclose(params.betas[1], pooled, atol=1e-9)
        np.testing.assert_allclose(params.weights, [0.5, 0.5], atol=1e-14)

    def test_single_component_weight_is_one(self):
        rng = np.random.default_rng(13)
        data, _ = random_dataset(rng, n=40)
        params = m_step(np.ones((data.n, 1)), data)
        assert params.weights.tolist() == [1.0]

    def test_degenerate_component_detected(self):
        rng = np.random.default_rng(14)
        data, _ = random_dataset(rng, n=40, p=3)
        resp = np.zeros((data.n, 2))
        resp[:, 0] = 1.0
        resp[0, 0], resp[0, 1] = 0.0, 1.0
        with pytest.raises(DegenerateComponent) as exc:
            m_step(resp, data)
        assert exc.value.component == 1
        assert exc.value.effective_n == pytest.approx(1.0)

    def test_singular_design_reports_component(self):
        rng = np.random.default_rng(15)
        n = 40
        x = rng.standard_normal(n)
        X = np.column_stack([np.ones(n), x, 2.0 * x])
        data = Dataset(rng.standard_normal(n), X, ("intercept", "a", "b"), tuple(f"r{i}" for i in range(n)))
        with pytest.raises(SingularDesign) as exc:
            m_step(np.ones((n, 1)), data)
        assert exc.value.component == 0

    def test_variance_floor_applies(self):
        rng = np.random.default_rng(16)
        data, beta = random_dataset(rng, n=50, noise=0.0)
        params = m_step(np.ones((data.n, 1)), data, variance_floor=0.5)
        assert params.sigmas2[0] == 0.5

    def test_shape_mismatch_rejected(self):
        rng = np.random.default_rng(17)
        data, _ = random_dataset(rng, n=30)
        with pytest.raises(InvariantViolation):
            m_step(np.ones((10, 2)), data)


class TestRunEM:
    def test_history_is_nondecreasing(self):
        rng = np.random.default_rng(18)
        data, _, _ = two_component_dataset(rng)
        init = rng.dirichlet(np.ones(2), size=data.n)
        run = run_em(data, init, tol=1e-10, max_iter=300)
        diffs = np.diff(run.history)
        assert (diffs >= -1e-9).all()
        assert run.converged

    def test_row_order_invariance(self):
        rng = np.random.default_rng(19)
        data, _, _ = two_component_dataset(rng, n=150)
        init = rng.dirichlet(np.ones(2), size=data.n)
        run = run_em(data, init, tol=1e-10, max_iter=300)

        perm = rng.permutation(data.n)
        permuted = Dataset(data.y[perm], data.X[perm], data.columns, tuple(data.cell_ids[i] for i in perm))
        run_p = run_em(permuted, init[perm], tol=1e-10, max_iter=300)

        assert run_p.loglik == pytest.approx(run.loglik, abs=1e-8)
        np.testing.assert_allclose(run_p.responsibilities, run.responsibilities[perm], atol=1e-8)

    def test_final_state_is_consistent(self):
        rng = np.random.default_rng(20)
        data, _, _ = two_component_dataset(rng, n=120)
        init = rng.dirichlet(np.ones(2), size=data.n)
        run = run_em(data, init, tol=1e-9, max_iter=250)
        np.testing.assert_allclose(run.responsibilities, e_step(run.params, data), atol=1e-12)
        assert run.loglik == pytest.approx(loglik(run.params, data), rel=1e-12)
        assert run.history[-1] == run.loglik

    def test_iteration_cap_respected(self):
        rng = np.random.default_rng(21)
        data, _, _ = two_component_dataset(rng, n=120, noise=0.5, gap=0.5)
        init = rng.dirichlet(np.ones(2), size=data.n)
        run = run_em(data, init, tol=0.0, max_iter=3)
        assert run.n_iter == 3
        assert not run.converged


class TestFitEM:
    def test_k1_equals_ols(self):
        rng = np.random.default_rng(22)
        for _ in range(4):
            data, _ = random_dataset(rng, n=60 + int(rng.integers(0, 40)))
            fit = fit_em(data, 1, EMConfig(restarts=1, seed=7))
            np.testing.assert_allclose(fit.params.betas[0], ols_oracle(data.X, data.y), atol=1e-8)
            resid = data.y - data.X @ fit.params.betas[0]
            assert fit.params.sigmas2[0] == pytest.approx(float(resid @ resid) / data.n, rel=1e-8)
            assert fit.params.weights.tolist() == [1.0]

    def test_recovers_planted_two_components(self):
        rng = np.random.default_rng(23)
        data, betas, labels = two_component_dataset(rng, n=300, noise=0.02, gap=6.0)
        fit = fit_em(data, 2, EMConfig(restarts=5, seed=99))
        mapping = hungarian_match(labels, fit.labels, 2)
        agree = np.mean([mapping[f] == t for f, t in zip(fit.labels, labels)])
        assert agree > 0.99
        for f, t in mapping.items():
            np.testing.assert_allclose(fit.params.betas[f], betas[t], rtol=0.01, atol=0.01)

    def test_components_ordered_by_weight(self):
        rng = np.random.default_rng(24)
        data, _, _ = two_component_dataset(rng, n=250, weight=0.7)
        fit = fit_em(data, 2, EMConfig(restarts=3, seed=5))
        assert fit.params.weights[0] >= fit.params.weights[1]

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(25)
        data, _, _ = two_component_dataset(rng, n=180)
        config = EMConfig(restarts=3, seed=1234)
        a = fit_em(data, 2, config)
        b = fit_em(data, 2, config)
        assert a.loglik == b.loglik
        assert np.array_equal(a.params.betas, b.params.betas)
        assert np.array_equal(a.responsibilities, b.responsibilities)
        assert a.history == b.history
        assert a.seed == 1234

    def test_seed_defaults_to_fresh_entropy(self):
        rng = np.random.default_rng(26)
        data, _ = random_dataset(rng, n=60)
        fit = fit_em(data, 1, EMConfig(restarts=1))
        assert fit.seed is not None

    def test_too_few_rows(self):
        rng = np.random.default_rng(27)
        data, _ = random_dataset(rng, n=9, p=3)
        with pytest.raises(TooFewRows) as exc:
            fit_em(data, 2)
        assert exc.value.n == 9
        assert exc.value.needed == 10

    def test_all_restarts_degenerate(self):
        rng = np.random.default_rng(28)
        n = 80
        x = rng.standard_normal(n)
        X = np.column_stack([np.ones(n), x, -x])
        data = Dataset(rng.standard_normal(n), X, ("intercept", "a", "b"), tuple(f"r{i}" for i in range(n)))
        with pytest.raises(AllRestartsDegenerate) as exc:
            fit_em(data, 2, EMConfig(restarts=3, seed=0))
        assert exc.value.k == 2
        assert exc.value.restarts == 3
        assert isinstance(exc.value.last_error, SingularDesign)

    def test_k_must_be_positive(self):
        rng = np.random.default_rng(29)
        data, _ = random_dataset(rng, n=30)
        with pytest.raises(InvariantViolation):
            fit_em(data, 0)

    def test_response_shift_moves_only_intercept(self):
        rng = np.random.default_rng(30)
        data, _, _ = two_component_dataset(rng, n=200)
        shift = math.log(7.5)
        shifted = Dataset(data.y + shift, data.X, data.columns, data.cell_ids)
        config = EMConfig(restarts=2, seed=77)
        base = fit_em(data, 2, config)
        moved = fit_em(shifted, 2, config)
        np.testing.assert_array_equal(base.labels, moved.labels)
        np.testing.assert_allclose(moved.params.betas[:, 0] - base.params.betas[:, 0], shift, atol=1e-6)
        np.testing.assert_allclose(moved.params.betas[:, 1:], base.params.betas[:, 1:], atol=1e-6)
        assert moved.loglik == pytest.approx(base.loglik, abs=1e-6)


class TestAssign:
    def test_argmax(self):
        resp = np.array([[0.2, 0.8], [0.7, 0.3]])
        np.testing.assert_array_equal(assign(resp), [1, 0])

    def test_tie_goes_to_lowest_index(self):
        resp = np.array([[0.5, 0.5], [1 / 3, 1 / 3]])
        np.testing.assert_array_equal(assign(resp), [0, 0])


class TestOLSFit:
    def test_matches_oracle(self):
        rng = np.random.default_rng(31)
        data, _ = random_dataset(rng, n=100)
        fit = ols_fit(data)
        np.testing.assert_allclose(fit.coef, ols_oracle(data.X, data.y), atol=1e-9)
        resid = data.y - data.X @ fit.coef
        rss = float(resid @ resid)
        assert fit.sigma2 == pytest.approx(rss / (data.n - data.X.shape[1]), rel=1e-10)
        cov = fit.sigma2 * np.linalg.inv(data.X.T @ data.X)
        np.testing.assert_allclose(fit.se, np.sqrt(np.diag(cov)), rtol=1e-9)

    def test_r2_and_f_on_pure_noise_vs_pure_signal(self):
        rng = np.random.default_rng(32)
        n = 200
        X = np.column_stack([np.ones(n), rng.standard_normal((n, 2))])
        ids = tuple(f"r{i}" for i in range(n))
        noise = Dataset(rng.standard_normal(n), X, ("intercept", "a", "b"), ids)
        weak = ols_fit(noise)
        assert weak.r2 < 0.1
        assert weak.f_pvalue > 1e-4

        signal = Dataset(X @ np.array([1.0, 2.0, -1.0]) + 0.01 * rng.standard_normal(n), X,
                         ("intercept", "a", "b"), ids)
        strong = ols_fit(signal)
        assert strong.r2 > 0.999
        assert strong.f_pvalue < 1e-12

    def test_too_few_rows(self):
        rng = np.random.default_rng(33)
        X = rng.standard_normal((3, 3))
        data = Dataset(rng.standard_normal(3), X, ("a", "b", "c"), ("r1", "r2", "r3"))
        with pytest.raises(TooFewRows):
            ols_fit(data)

    def test_singular_design(self):
        rng = np.random.default_rng(34)
        n = 20
        x = rng.standard_normal(n)
        X = np.column_stack([np.ones(n), x, x])
        data = Dataset(rng.standard_normal(n), X, ("intercept", "a", "b"), tuple(f"r{i}" for i in range(n)))
        with pytest.raises(SingularDesign):
            ols_fit(data)


class TestSaveLoad:
    def test_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(35)
        data, _, _ = two_component_dataset(rng, n=150)
        fit = fit_em(data, 2, EMConfig(restarts=2, seed=11))
        path = tmp_path / "fit.json"
        save_fit(path, fit, data.columns, metadata={"seed": 11})
        params, info = load_fit(path)
        assert np.array_equal(params.weights, fit.params.weights)
        assert np.array_equal(params.betas, fit.params.betas)
        assert np.array_equal(params.sigmas2, fit.params.sigmas2)
        assert info["loglik"] == fit.loglik
        assert info["k"] == 2
        assert info["columns"] == list(data.columns)
        assert info["seed"] == 11
        assert info["converged"] == fit.converged

    def test_metadata_header_present(self, tmp_path):
        rng = np.random.default_rng(36)
        data, _ = random_dataset(rng, n=50)
        fit = fit_em(data, 1, EMConfig(restarts=1, seed=3))
        path = tmp_path / "fit.json"
        save_fit(path, fit, data.columns, metadata={"config": "deadbeef"})
        import json

        raw = json.loads(path.read_text())
        assert raw["metadata"]["config"] == "deadbeef"


class TestEstimator:
    def _xy(self, rng, n=200):
        X = rng.standard_normal((n, 3))
        labels = (rng.random(n) > 0.5).astype(int)
        betas = np.array([[1.0, 2.0, 0.0, -1.0], [9.0, -1.0, 0.5, 1.0]])
        design = np.column_stack([np.ones(n), X])
        y = (design * betas[labels]).sum(axis=1) + 0.05 * rng.standard_normal(n)
        return X, y

    def test_fit_exposes_solution(self):
        rng = np.random.default_rng(37)
        X, y = self._xy(rng)
        est = MixtureOfRegressions(n_components=2, n_init=3, random_state=0).fit(X, y)
        assert est.weights_.shape == (2,)
        assert est.betas_.shape == (2, 4)
        assert est.variances_.shape == (2,)
        assert est.responsibilities_.shape == (200, 2)
        assert est.labels_.shape == (200,)
        assert est.converged_
        assert est.n_features_in_ == 3
        assert isinstance(est.fit_, MixtureFit)

    def test_predict_is_weighted_mean(self):
        rng = np.random.default_rng(38)
        X, y = self._xy(rng)
        est = MixtureOfRegressions(n_components=2, n_init=3, random_state=1).fit(X, y)
        Xnew = rng.standard_normal((10, 3))
        comps = est.predict_components(Xnew)
        assert comps.shape == (10, 2)
        np.testing.assert_allclose(est.predict(Xnew), comps @ est.weights_, atol=1e-12)

    def test_responsibilities_for_new_rows(self):
        rng = np.random.default_rng(39)
        X, y = self._xy(rng)
        est = MixtureOfRegressions(n_components=2, n_init=3, random_state=2).fit(X, y)
        resp = est.responsibilities(X[:25], y[:25])
        np.testing.assert_allclose(resp.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(resp, est.responsibilities_[:25], atol=1e-10)

    def test_sklearn_protocol(self):
        from sklearn.base import clone

        est = MixtureOfRegressions(n_components=3, tol=1e-6, random_state=4)
        params = est.get_params()
        assert params["n_components"] == 3
        assert params["tol"] == 1e-6
        cloned = clone(est)
        assert cloned.get_params() == params
        est.set_params(n_components=2)
        assert est.n_components == 2

    def test_no_intercept_design(self):
        rng = np.random.default_rng(40)
        n = 150
        X = rng.standard_normal((n, 2))
        y = X @ np.array([2.0, -1.0]) + 0.01 * rng.standard_normal(n)
        est = MixtureOfRegressions(n_components=1, fit_intercept=False, n_init=1, random_state=0).fit(X, y)
        assert est.betas_.shape == (1, 2)
        np.testing.assert_allclose(est.betas_[0], [2.0, -1.0], atol=0.01)
