import time

import numpy as np
import pytest

from socmix import (
    DESIGN_COLUMNS,
    KINDS,
    SynthSpec,
    generate,
    planted_spec,
)
from socmix.errors import InvariantViolation
from socmix.synth import DEFAULT_FACILITY_COUNTS, truth_payload


def small_spec(k=2, seed=77, **kwargs):
    kwargs.setdefault("n_rows", 5)
    kwargs.setdefault("n_cols", 8)
    return planted_spec(k, seed, **kwargs)


class TestPlantedSpec:
    def test_defaults_make_the_reference_grid(self):
        spec = planted_spec(3, seed=1)
        assert spec.n_rows == 8
        assert spec.n_cols == 113
        assert spec.n_cells == 904
        assert spec.k == 3
        assert spec.betas.shape == (3, len(DESIGN_COLUMNS))

    def test_weights_are_distinct_and_decreasing(self):
        spec = planted_spec(4, seed=2)
        w = np.asarray(spec.weights)
        assert np.sum(w) == pytest.approx(1.0, abs=1e-12)
        assert (np.diff(w) < 0).all()

    def test_intercepts_spaced_by_separation(self):
        spec = planted_spec(3, seed=3, separation=40.0)
        intercepts = spec.betas[:, 0]
        gaps = np.diff(intercepts)
        sigma_max = np.sqrt(max(spec.sigmas2))
        np.testing.assert_allclose(gaps, 40.0 * sigma_max, rtol=1e-12)

    def test_zeroed_slopes_are_zero_in_every_component(self):
        found = False
        for seed in range(20):
            spec = planted_spec(3, seed=seed)
            zero_cols = np.where(spec.betas[0, 1:10] == 0.0)[0]
            if zero_cols.size:
                found = True
                for j in zero_cols:
                    assert (spec.betas[:, 1 + j] == 0.0).all()
        assert found

    def test_deterministic_in_seed(self):
        a = planted_spec(3, seed=9)
        b = planted_spec(3, seed=9)
        assert np.array_equal(a.betas, b.betas)
        assert a.weights == b.weights
        assert a.sigmas2 == b.sigmas2
        c = planted_spec(3, seed=10)
        assert not np.array_equal(a.betas, c.betas)

    def test_rejects_bad_arguments(self):
        with pytest.raises(InvariantViolation):
            planted_spec(0, seed=1)
        with pytest.raises(InvariantViolation):
            planted_spec(2, seed=1, separation=-1.0)


class TestSpecValidation:
    def test_payload_round_trip(self):
        spec = small_spec()
        again = SynthSpec.from_payload(spec.to_payload())
        assert again.to_payload() == spec.to_payload()

    def test_missing_fields_rejected(self):
        payload = small_spec().to_payload()
        del payload["weights"]
        with pytest.raises(InvariantViolation):
            SynthSpec.from_payload(payload)

    def test_weights_must_be_simplex(self):
        payload = small_spec().to_payload()
        payload["weights"] = [0.9, 0.9]
        with pytest.raises(InvariantViolation):
            SynthSpec.from_payload(payload)

    def test_betas_shape_enforced(self):
        payload = small_spec().to_payload()
        payload["betas"] = [[1.0, 2.0], [3.0, 4.0]]
        with pytest.raises(InvariantViolation):
            SynthSpec.from_payload(payload)

    def test_unknown_facility_kind_rejected(self):
        payload = small_spec().to_payload()
        payload["facility_counts"] = {"bowling_alley": 3}
        with pytest.raises(ValueError):
            SynthSpec.from_payload(payload)

    def test_negative_noise_scale_rejected(self):
        payload = small_spec().to_payload()
        payload["noise_scale"] = -0.5
        with pytest.raises(InvariantViolation):
            SynthSpec.from_payload(payload)

    def test_facility_counts_filled_with_zeros(self):
        spec = small_spec(facility_counts={"daycare": 3})
        assert spec.facility_counts["daycare"] == 3
        assert spec.facility_counts["public_park"] == 0


class TestGenerate:
    def test_bit_for_bit_deterministic(self):
        a = generate(small_spec())
        b = generate(small_spec())
        assert a.area.cells == b.area.cells
        assert a.area.facilities == b.area.facilities
        assert np.array_equal(a.data.y, b.data.y)
        assert np.array_equal(a.data.X, b.data.X)
        assert np.array_equal(a.truth.labels, b.truth.labels)

    def test_different_seeds_differ(self):
        a = generate(small_spec(seed=1))
        b = generate(small_spec(seed=2))
        assert not np.array_equal(a.data.y, b.data.y)

    def test_grid_geometry(self):
        spec = small_spec()
        result = generate(spec)
        cells = result.area.cells
        assert len(cells) == spec.n_cells
        assert len(set(c.id for c in cells)) == spec.n_cells
        assert cells[0].id == "c00001"
        # row-major layout with centroids at cell centers
        assert cells[0].centroid_x == 0.5 * spec.cell_size_m
        assert cells[0].centroid_y == 0.5 * spec.cell_size_m
        second_row_first = cells[spec.n_cols]
        assert second_row_first.centroid_x == 0.5 * spec.cell_size_m
        assert second_row_first.centroid_y == 1.5 * spec.cell_size_m
        xs = [c.centroid_x for c in cells[: spec.n_cols]]
        np.testing.assert_allclose(np.diff(xs), spec.cell_size_m)

    def test_price_is_exp_of_response(self):
        result = generate(small_spec())
        prices = np.array([c.land_price for c in result.area.cells])
        np.testing.assert_allclose(prices, np.exp(result.data.y), rtol=1e-12)

    def test_design_matches_cells(self):
        result = generate(small_spec())
        data, cells = result.data, result.area.cells
        assert data.columns == DESIGN_COLUMNS
        np.testing.assert_array_equal(data.X[:, 0], 1.0)
        pops = np.array([c.population for c in cells])
        np.testing.assert_allclose(data.X[:, 10], np.log(pops), rtol=1e-12)
        np.testing.assert_allclose(data.X[:, 11], [c.female_rate for c in cells], rtol=1e-12)
        np.testing.assert_allclose(data.X[:, 12], [c.public_land_rate for c in cells], rtol=1e-12)
        np.testing.assert_allclose(data.X[:, 13], [c.commercial_rate for c in cells], rtol=1e-12)
        np.testing.assert_allclose(data.X[:, 14], [c.green_rate for c in cells], rtol=1e-12)

    def test_populations_are_positive_integers(self):
        result = generate(small_spec())
        pops = [c.population for c in result.area.cells]
        assert all(p >= 1 for p in pops)
        assert all(float(p).is_integer() for p in pops)

    def test_zero_noise_reproduces_planted_surface_exactly(self):
        spec = small_spec(k=1, noise_scale=0.0)
        result = generate(spec)
        expected = result.data.X @ spec.betas[0]
        assert np.array_equal(result.data.y, expected)

    def test_label_frequencies_follow_weights(self):
        spec = planted_spec(3, seed=6, n_rows=40, n_cols=50)
        result = generate(spec)
        freq = np.bincount(result.truth.labels, minlength=3) / spec.n_cells
        np.testing.assert_allclose(freq, spec.weights, atol=0.03)

    def test_facility_counts_honored(self):
        counts = {str(k): 2 + i for i, k in enumerate(KINDS)}
        spec = small_spec(facility_counts=counts)
        result = generate(spec)
        by_kind = {}
        for f in result.area.facilities:
            by_kind[str(f.kind)] = by_kind.get(str(f.kind), 0) + 1
        assert by_kind == counts

    def test_facilities_inside_grid(self):
        spec = small_spec()
        result = generate(spec)
        width = spec.n_cols * spec.cell_size_m
        height = spec.n_rows * spec.cell_size_m
        for f in result.area.facilities:
            assert 0.0 <= f.x <= width
            assert 0.0 <= f.y <= height

    def test_truth_matches_spec(self):
        spec = small_spec(k=3)
        result = generate(spec)
        assert result.truth.params.k == 3
        assert np.array_equal(result.truth.params.betas, spec.betas)
        assert result.truth.seed == spec.seed
        assert result.truth.cell_ids == result.data.cell_ids

    def test_default_facility_counts_cover_all_kinds(self):
        assert set(DEFAULT_FACILITY_COUNTS) == {str(k) for k in KINDS}
        result = generate(small_spec())
        present = {str(f.kind) for f in result.area.facilities}
        assert present == {str(k) for k in KINDS}

    def test_reference_grid_is_fast(self):
        start = time.perf_counter()
        generate(planted_spec(4, seed=123))
        assert time.perf_counter() - start < 1.0


class TestTruthPayload:
    def test_payload_fields(self):
        spec = small_spec(k=2)
        result = generate(spec)
        payload = truth_payload(result.truth)
        assert payload["k"] == 2
        assert payload["columns"] == list(DESIGN_COLUMNS)
        assert payload["weights"] == list(spec.weights)
        assert payload["betas"] == spec.betas.tolist()
        assert payload["seed"] == spec.seed
        labels = payload["labels"]
        assert len(labels) == spec.n_cells
        assert labels["c00001"] == int(result.truth.labels[0])
        assert all(isinstance(v, int) for v in labels.values())
