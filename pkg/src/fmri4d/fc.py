"""Functional-connectivity evaluation on region-averaged series.

Regions come from an integer label volume (0 = background). The pieces
compose into the usual pipeline: average voxels per region, bandpass the
averages, correlate region pairs. A carpet export gives the z-scored
voxel-by-time matrix for plotting, rows grouped by region.

No nuisance regression happens here, so correlation values are meaningful
relative to each other (observed vs reconstructed), not as absolute
physiological estimates.
"""

from dataclasses import dataclass

import numpy as np

DEFAULT_BAND_HZ = (0.01, 0.1)


def _series_array(x):
    a = np.asarray(getattr(x, "data", x), dtype=np.float64)
    if a.ndim != 4:
        raise ValueError(f"expected a 4D series, got shape {a.shape}")
    return a


def _label_array(labels, spatial_shape):
    lab = np.asarray(labels)
    if not np.issubdtype(lab.dtype, np.integer):
        raise ValueError(f"labels must be integers, got dtype {lab.dtype}")
    if lab.shape != tuple(spatial_shape):
        raise ValueError(
            f"label shape {lab.shape} does not match spatial dims {spatial_shape}"
        )
    if lab.min() < 0:
        raise ValueError("labels must be nonnegative (0 marks background)")
    return lab


@dataclass(frozen=True)
class RoiTimeSeries:
    """Per-region mean time series: one row per region.

    Correlation needs at least two regions; a single-region series is
    still valid for averaging and filtering.
    """

    data: np.ndarray
    region_ids: tuple
    tr_s: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError(f"expected an R x N matrix, got shape {data.shape}")
        if data.shape[0] < 1:
            raise ValueError("need at least one region")
        if data.shape[1] < 3:
            raise ValueError(f"need at least 3 timepoints, got {data.shape[1]}")
        if not np.isfinite(data).all():
            raise ValueError("series contains non-finite values")
        ids = tuple(int(r) for r in self.region_ids)
        if len(ids) != data.shape[0]:
            raise ValueError(
                f"{len(ids)} region ids for {data.shape[0]} series rows"
            )
        if len(set(ids)) != len(ids):
            raise ValueError(f"region ids contain duplicates: {ids}")
        if not (np.isfinite(self.tr_s) and self.tr_s > 0):
            raise ValueError(f"TR must be positive, got {self.tr_s}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "region_ids", ids)
        object.__setattr__(self, "tr_s", float(self.tr_s))

    @property
    def n_regions(self) -> int:
        return self.data.shape[0]

    @property
    def n_timepoints(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class FCMatrix:
    """Pearson correlation between region pairs."""

    values: np.ndarray
    region_ids: tuple

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        r = len(self.region_ids)
        if v.shape != (r, r):
            raise ValueError(
                f"matrix shape {v.shape} does not fit {r} region ids"
            )
        if not np.isfinite(v).all():
            raise ValueError("correlation matrix contains non-finite values")
        if np.abs(v - v.T).max() > 1e-12:
            raise ValueError("correlation matrix is not symmetric")
        if np.any(np.diag(v) != 1.0):
            raise ValueError("correlation matrix diagonal must be exactly 1")
        if v.min() < -1.0 or v.max() > 1.0:
            raise ValueError("correlations must lie in [-1, 1]")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "region_ids", tuple(int(r) for r in self.region_ids))


def roi_average(x, labels, region_ids=None, tr_s=None) -> RoiTimeSeries:
    """Mean time series of every labelled region.

    Regions default to the sorted nonzero labels. Passing ``region_ids``
    selects (and orders) them explicitly; an id without voxels is an
    error. ``tr_s`` defaults to the series' time spacing when ``x`` is a
    spaced volume, else 1.0.
    """
    a = _series_array(x)
    lab = _label_array(labels, a.shape[:3])
    if tr_s is None:
        spacing = getattr(x, "spacing", None)
        tr_s = spacing[3] if spacing is not None else 1.0
    if region_ids is None:
        region_ids = tuple(int(r) for r in np.unique(lab[lab > 0]))
        if not region_ids:
            raise ValueError("label volume has no nonzero regions")
    data = np.empty((len(region_ids), a.shape[3]))
    for i, region in enumerate(region_ids):
        sel = lab == region
        if not sel.any():
            raise ValueError(f"region {region} has no voxels")
        data[i] = a[sel].mean(axis=0)
    return RoiTimeSeries(data, region_ids, tr_s)


def bandpass(ts: RoiTimeSeries, low_hz: float, high_hz: float) -> RoiTimeSeries:
    """Zero-phase bandpass via a frequency-domain mask.

    Keeps bins with low <= f <= high. The DC bin survives only when
    ``low_hz`` is 0, so any positive low edge removes the mean.
    """
    nyquist = 0.5 / ts.tr_s
    if not (0.0 <= low_hz < high_hz):
        raise ValueError(f"need 0 <= low < high, got ({low_hz}, {high_hz})")
    if high_hz > nyquist + 1e-12:
        raise ValueError(f"high edge {high_hz} exceeds Nyquist {nyquist}")
    n = ts.n_timepoints
    freqs = np.fft.rfftfreq(n, d=ts.tr_s)
    keep = (freqs >= low_hz - 1e-12) & (freqs <= high_hz + 1e-12)
    spec = np.fft.rfft(ts.data, axis=1) * keep
    return RoiTimeSeries(np.fft.irfft(spec, n=n, axis=1), ts.region_ids, ts.tr_s)


def pearson_fc(ts: RoiTimeSeries) -> FCMatrix:
    """Pearson correlation matrix over all region pairs."""
    if ts.n_regions < 2:
        raise ValueError("correlation needs at least two regions")
    data = ts.data
    centred = data - data.mean(axis=1, keepdims=True)
    sd = data.std(axis=1)
    for i, region in enumerate(ts.region_ids):
        if sd[i] == 0.0:
            raise ValueError(
                f"region {region} has a constant series; correlation undefined"
            )
    z = centred / sd[:, None]
    r = (z @ z.T) / ts.n_timepoints
    r = np.clip((r + r.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return FCMatrix(r, ts.region_ids)


@dataclass(frozen=True)
class Carpet:
    """Z-scored voxel-by-time matrix with region grouping.

    ``boundaries[i]`` is the first row of region ``region_ids[i]``; rows
    within a region follow array scan order.
    """

    values: np.ndarray
    region_ids: tuple
    boundaries: tuple


def carpet_export(x, labels) -> Carpet:
    """Z-score every labelled voxel's series, rows grouped by region.

    A temporally constant voxel z-scores to all zeros rather than NaN.
    """
    a = _series_array(x)
    lab = _label_array(labels, a.shape[:3])
    region_ids = tuple(int(r) for r in np.unique(lab[lab > 0]))
    if not region_ids:
        raise ValueError("label volume has no nonzero regions")
    blocks = []
    boundaries = []
    row = 0
    for region in region_ids:
        series = a[lab == region]
        mean = series.mean(axis=1, keepdims=True)
        sd = series.std(axis=1, keepdims=True)
        z = np.where(sd > 0, (series - mean) / np.where(sd > 0, sd, 1.0), 0.0)
        blocks.append(z)
        boundaries.append(row)
        row += z.shape[0]
    return Carpet(np.concatenate(blocks, axis=0), region_ids, tuple(boundaries))
