"""Functional-connectivity evaluation tests."""

import numpy as np
import pytest

from fmri4d.fc import (
    FCMatrix,
    RoiTimeSeries,
    bandpass,
    carpet_export,
    pearson_fc,
    roi_average,
)
from fmri4d.phantom import PhantomSpec, make_phantom, region_mean_series


def two_region_labels(shape=(6, 6, 4)):
    labels = np.zeros(shape, dtype=np.int64)
    labels[:3] = 1
    labels[3:] = 2
    return labels


class TestRoiTimeSeries:
    def test_valid_construction(self):
        ts = RoiTimeSeries(np.zeros((2, 5)) + [[1], [2]], (1, 2), 1.5)
        assert ts.n_regions == 2
        assert ts.n_timepoints == 5
        assert ts.tr_s == 1.5

    def test_too_few_timepoints_rejected(self):
        with pytest.raises(ValueError):
            RoiTimeSeries(np.zeros((2, 2)), (1, 2), 1.0)

    def test_nonfinite_rejected(self):
        data = np.zeros((2, 4))
        data[1, 2] = np.nan
        with pytest.raises(ValueError):
            RoiTimeSeries(data, (1, 2), 1.0)

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError):
            RoiTimeSeries(np.zeros((2, 4)), (3, 3), 1.0)

    def test_id_count_mismatch_rejected(self):
        with pytest.raises(ValueError):
            RoiTimeSeries(np.zeros((2, 4)), (1, 2, 3), 1.0)


class TestRoiAverage:
    def test_single_region_constant(self):
        x = np.full((4, 4, 2, 5), 0.7)
        labels = np.ones((4, 4, 2), dtype=np.int64)
        ts = roi_average(x, labels, tr_s=2.0)
        assert ts.region_ids == (1,)
        assert np.allclose(ts.data, 0.7, atol=1e-15)

    def test_two_disjoint_constants(self):
        labels = two_region_labels()
        x = np.zeros(labels.shape + (4,))
        x[labels == 1] = 0.2
        x[labels == 2] = 0.9
        ts = roi_average(x, labels)
        assert ts.region_ids == (1, 2)
        assert np.allclose(ts.data[0], 0.2, atol=1e-15)
        assert np.allclose(ts.data[1], 0.9, atol=1e-15)

    def test_background_excluded(self):
        labels = two_region_labels()
        labels[0, 0, 0] = 0
        x = np.ones(labels.shape + (4,))
        x[0, 0, 0, :] = 100.0
        ts = roi_average(x, labels)
        assert np.allclose(ts.data, 1.0, atol=1e-15)

    def test_explicit_empty_region_rejected(self):
        labels = two_region_labels()
        x = np.zeros(labels.shape + (4,))
        with pytest.raises(ValueError, match="3"):
            roi_average(x, labels, region_ids=(1, 2, 3))

    def test_no_labelled_voxels_rejected(self):
        with pytest.raises(ValueError):
            roi_average(np.zeros((2, 2, 2, 4)), np.zeros((2, 2, 2), dtype=np.int64))

    def test_phantom_means_match_injected_signals(self):
        spec = PhantomSpec()
        truth, labels = make_phantom(spec)
        sigma = 0.005
        noisy = truth.data + sigma * np.random.default_rng(42).standard_normal(
            truth.shape
        )
        exact = roi_average(truth, labels)
        ts = roi_average(noisy, labels, tr_s=spec.tr_s)
        for i, region in enumerate(ts.region_ids):
            want = region_mean_series(spec, region)
            assert np.allclose(exact.data[i], want, atol=1e-12)
            rmse = np.sqrt(np.mean((ts.data[i] - want) ** 2))
            assert rmse < sigma


class TestBandpass:
    def make_ts(self, series_list, tr=1.0):
        data = np.asarray(series_list, dtype=np.float64)
        return RoiTimeSeries(data, tuple(range(1, data.shape[0] + 1)), tr)

    def test_all_pass_is_identity(self):
        rng = np.random.default_rng(0)
        ts = self.make_ts(rng.standard_normal((2, 40)) + 3.0)
        out = bandpass(ts, 0.0, 0.5)
        assert np.allclose(out.data, ts.data, atol=1e-9)
        assert abs(out.data[0].mean() - ts.data[0].mean()) < 1e-9

    def test_out_of_band_frequency_rejected(self):
        t = np.arange(200)
        sig = np.sin(2 * np.pi * 0.2 * t)
        ts = self.make_ts([sig, sig])
        out = bandpass(ts, 0.01, 0.1)
        assert (out.data[0] ** 2).sum() < 1e-6 * (sig**2).sum()

    def test_in_band_amplitude_preserved(self):
        t = np.arange(200)
        sig = np.sin(2 * np.pi * 0.05 * t)
        ts = self.make_ts([sig, 2 * sig])
        out = bandpass(ts, 0.01, 0.1)
        assert np.allclose(out.data[0], sig, atol=1e-6)
        assert np.allclose(out.data[1], 2 * sig, atol=1e-6)

    def test_mean_removed_when_low_positive(self):
        rng = np.random.default_rng(1)
        ts = self.make_ts(rng.standard_normal((2, 64)) + 5.0)
        out = bandpass(ts, 0.01, 0.4)
        assert abs(out.data.mean(axis=1)).max() < 1e-9

    def test_invalid_band_rejected(self):
        ts = self.make_ts(np.zeros((2, 10)))
        for low, high in [(-0.1, 0.2), (0.2, 0.2), (0.3, 0.1), (0.0, 0.6)]:
            with pytest.raises(ValueError):
                bandpass(ts, low, high)

    def test_zero_phase(self):
        # A symmetric pulse must stay centred after filtering.
        n = 101
        sig = np.exp(-0.5 * ((np.arange(n) - 50) / 4.0) ** 2)
        ts = self.make_ts([sig, sig])
        out = bandpass(ts, 0.0, 0.25)
        assert int(np.argmax(out.data[0])) == 50


class TestPearsonFc:
    def test_identical_series_correlate_fully(self):
        rng = np.random.default_rng(2)
        s = rng.standard_normal(30)
        fc = pearson_fc(RoiTimeSeries(np.stack([s, s]), (1, 2), 1.0))
        assert abs(fc.values[0, 1] - 1.0) < 1e-12

    def test_negated_series_anticorrelate(self):
        rng = np.random.default_rng(3)
        s = rng.standard_normal(30)
        fc = pearson_fc(RoiTimeSeries(np.stack([s, -s]), (1, 2), 1.0))
        assert abs(fc.values[0, 1] + 1.0) < 1e-12

    def test_independent_series_nearly_uncorrelated(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal(1000)
        b = rng.standard_normal(1000)
        fc = pearson_fc(RoiTimeSeries(np.stack([a, b]), (1, 2), 1.0))
        assert abs(fc.values[0, 1]) < 0.1

    def test_constant_series_error_names_region(self):
        data = np.stack([np.ones(10), np.arange(10.0)])
        with pytest.raises(ValueError, match="7"):
            pearson_fc(RoiTimeSeries(data, (7, 8), 1.0))

    def test_single_region_rejected(self):
        ts = RoiTimeSeries(np.arange(12.0).reshape(1, 12), (1,), 1.0)
        with pytest.raises(ValueError):
            pearson_fc(ts)

    def test_matrix_invariants(self):
        rng = np.random.default_rng(5)
        ts = RoiTimeSeries(rng.standard_normal((4, 50)), (1, 2, 3, 4), 1.0)
        fc = pearson_fc(ts)
        v = fc.values
        assert np.all(np.diag(v) == 1.0)
        assert np.abs(v - v.T).max() < 1e-12
        assert v.min() >= -1.0 and v.max() <= 1.0

    def test_positive_affine_invariance(self):
        rng = np.random.default_rng(6)
        data = rng.standard_normal((3, 40))
        base = pearson_fc(RoiTimeSeries(data, (1, 2, 3), 1.0)).values
        moved = data * np.array([[2.0], [0.5], [7.0]]) + np.array(
            [[1.0], [-4.0], [0.25]]
        )
        again = pearson_fc(RoiTimeSeries(moved, (1, 2, 3), 1.0)).values
        assert np.abs(base - again).max() < 1e-12


class TestFCMatrix:
    def test_validates_symmetry(self):
        v = np.eye(3)
        v[0, 1] = 0.5
        with pytest.raises(ValueError):
            FCMatrix(v, (1, 2, 3))

    def test_validates_diagonal(self):
        v = np.eye(3) * 0.9
        with pytest.raises(ValueError):
            FCMatrix(v, (1, 2, 3))

    def test_validates_range(self):
        v = np.eye(3)
        v[0, 1] = v[1, 0] = 1.5
        with pytest.raises(ValueError):
            FCMatrix(v, (1, 2, 3))


class TestCarpetExport:
    def test_constant_series_gives_zero_carpet(self):
        labels = two_region_labels()
        x = np.full(labels.shape + (5,), 3.3)
        carpet = carpet_export(x, labels)
        assert np.all(carpet.values == 0.0)

    def test_row_count_matches_labelled_voxels(self):
        labels = two_region_labels()
        labels[0, 0, 0] = 0
        x = np.random.default_rng(7).standard_normal(labels.shape + (5,))
        carpet = carpet_export(x, labels)
        assert carpet.values.shape == (int((labels > 0).sum()), 5)

    def test_rows_grouped_by_region(self):
        labels = two_region_labels()
        x = np.zeros(labels.shape + (4,))
        x[labels == 1] += np.linspace(0, 1, 4)
        x[labels == 2] += np.linspace(1, 0, 4)
        carpet = carpet_export(x, labels)
        assert carpet.region_ids == (1, 2)
        n1 = int((labels == 1).sum())
        assert carpet.boundaries == (0, n1)
        up = carpet.values[0]
        down = carpet.values[-1]
        assert up[0] < up[-1]
        assert down[0] > down[-1]

    def test_rows_are_zscored(self):
        labels = two_region_labels()
        x = np.random.default_rng(8).standard_normal(labels.shape + (6,)) * 4 + 2
        carpet = carpet_export(x, labels)
        assert np.abs(carpet.values.mean(axis=1)).max() < 1e-12
        assert np.abs(carpet.values.std(axis=1) - 1.0).max() < 1e-12

    def test_burst_column_calms_after_cleanup(self):
        # A spike shared by every voxel at one timepoint dominates each
        # row's z-scores; removing it must lower that column's mean |z|.
        labels = two_region_labels()
        rng = np.random.default_rng(9)
        clean = rng.standard_normal(labels.shape + (8,)) * 0.1 + 1.0
        spiky = clean.copy()
        spiky[..., 5] += 3.0
        z_spiky = np.abs(carpet_export(spiky, labels).values[:, 5]).mean()
        z_clean = np.abs(carpet_export(clean, labels).values[:, 5]).mean()
        assert z_clean < z_spiky

    def test_no_labels_rejected(self):
        with pytest.raises(ValueError):
            carpet_export(np.zeros((2, 2, 2, 4)), np.zeros((2, 2, 2), dtype=np.int64))
