"""Per-volume scattered-data interpolation baselines.

Each acquired volume is treated on its own: slice samples are mapped into
anatomy space by the motion estimate (see
:func:`fmri4d.geometry.compose_grid_positions`), then a regular grid is
re-estimated from the resulting point cloud by kernel gathering. Grid nodes
whose gathered weight mass is negligible are reported as uncovered and set
to zero rather than extrapolated.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import AcquisitionGeometry, GridSpec, MotionTrajectory, compose_grid_positions
from .tensor4d import Volume4D
from ._parallel import parallel_map

# a node counts as covered once the gathered weight mass reaches this
COVERAGE_TOL = 1e-8


@dataclass(frozen=True)
class ScatteredSamples:
    """An irregular cloud of scalar samples with a target grid.

    Parameters
    ----------
    positions : (M, 3) array
        Sample locations in physical mm.
    values : (M,) array
        Sample values.
    target_grid : GridSpec
        Grid the samples will be interpolated onto.
    """

    positions: np.ndarray
    values: np.ndarray
    target_grid: GridSpec

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        val = np.asarray(self.values, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError(f"positions must be (M, 3), got {pos.shape}")
        if val.shape != (pos.shape[0],):
            raise ValueError(
                f"values shape {val.shape} does not match {pos.shape[0]} positions"
            )
        if pos.shape[0] < 1:
            raise ValueError("at least one sample is required")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(val))):
            raise ValueError("positions and values must be finite")
        if not isinstance(self.target_grid, GridSpec):
            raise ValueError("target_grid must be a GridSpec")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "values", val)

    def __len__(self):
        return self.positions.shape[0]


def _tent(t):
    return np.maximum(0.0, 1.0 - np.abs(t))


def _keys_cubic(t):
    # Keys' interpolating cubic with a = -1/2
    a = -0.5
    t = np.abs(t)
    t2 = t * t
    t3 = t2 * t
    near = (a + 2.0) * t3 - (a + 3.0) * t2 + 1.0
    far = a * (t3 - 5.0 * t2 + 8.0 * t - 4.0)
    return np.where(t <= 1.0, near, np.where(t < 2.0, far, 0.0))


def _lanczos3(t):
    out = np.sinc(t) * np.sinc(t / 3.0)
    return np.where(np.abs(t) < 3.0, out, 0.0)


# method name -> (separable kernel, one-sided support in voxels)
KERNELS = {
    "linear": (_tent, 1.0),
    "cubic": (_keys_cubic, 2.0),
    "sinc": (_lanczos3, 3.0),
}


def _gather(positions, values, grid, kernel, support):
    """Normalized kernel gather of scattered samples onto a regular grid.

    Every sample spreads its value to the grid nodes inside ``support``
    voxels along each axis, weighted by the separable kernel; each node
    then divides by its accumulated weight. Nodes with weight mass below
    COVERAGE_TOL are uncovered: value 0, mask False.
    """
    dims = np.asarray(grid.dims)
    spacing = np.asarray(grid.spacing)
    origin = np.asarray(grid.origin)
    g = (positions - origin) / spacing  # voxel coordinates, axis at a time
    base = np.floor(g).astype(np.int64)

    reach = int(np.ceil(support))
    offsets = np.arange(1 - reach, reach + 1)
    # per-axis weights for every (sample, offset) pair, computed once
    axis_w = [kernel(g[:, ax, None] - (base[:, ax, None] + offsets[None, :]))
              for ax in range(3)]
    axis_i = [base[:, ax, None] + offsets[None, :] for ax in range(3)]
    axis_ok = [(idx >= 0) & (idx < dims[ax]) for ax, idx in enumerate(axis_i)]

    n_nodes = int(np.prod(dims))
    wsum = np.zeros(n_nodes)
    vsum = np.zeros(n_nodes)
    strides = (dims[1] * dims[2], dims[2], 1)
    for ob in range(offsets.size):
        wb = axis_w[0][:, ob]
        ib = axis_i[0][:, ob]
        okb = axis_ok[0][:, ob]
        for ok_ in range(offsets.size):
            wbk = wb * axis_w[1][:, ok_]
            ibk = ib * strides[0] + axis_i[1][:, ok_] * strides[1]
            okbk = okb & axis_ok[1][:, ok_]
            for oh in range(offsets.size):
                w = wbk * axis_w[2][:, oh]
                keep = okbk & axis_ok[2][:, oh] & (w != 0.0)
                if not np.any(keep):
                    continue
                flat = ibk[keep] + axis_i[2][keep, oh]
                wk = w[keep]
                wsum += np.bincount(flat, weights=wk, minlength=n_nodes)
                vsum += np.bincount(flat, weights=wk * values[keep],
                                    minlength=n_nodes)

    covered = wsum >= COVERAGE_TOL
    out = np.zeros(n_nodes)
    out[covered] = vsum[covered] / wsum[covered]
    return out.reshape(grid.dims), covered.reshape(grid.dims)


def interpolate_volume(s: ScatteredSamples, method: str = "linear"):
    """Estimate a regular volume from scattered samples.

    Parameters
    ----------
    s : ScatteredSamples
    method : {"linear", "cubic", "sinc"}
        Separable gathering kernel: tent (support 1 voxel), Keys cubic
        (support 2), or Lanczos-3 windowed sinc (support 3).

    Returns
    -------
    volume : (B, K, H) ndarray
        Interpolated values; 0 where uncovered.
    covered : (B, K, H) bool ndarray
        True where the node had enough sample support.
    """
    if method not in KERNELS:
        raise ValueError(f"unknown method {method!r}, expected one of {sorted(KERNELS)}")
    kernel, support = KERNELS[method]
    return _gather(s.positions, s.values, s.target_grid, kernel, support)


def reconstruct_series_3d(t: Volume4D, geom: AcquisitionGeometry,
                          motion: MotionTrajectory, method: str = "linear",
                          threads: int = 1):
    """Interpolate each acquired volume independently onto the HR grid.

    The classical one-volume-at-a-time approach: no information crosses
    timepoints, so motion that pushes samples away from a region leaves
    that region uncovered in the affected volume.

    Returns
    -------
    series : Volume4D
        HR-grid series, 0 where uncovered.
    covered : (B, K, H, N) bool ndarray
        Per-timepoint coverage masks.
    """
    if method not in KERNELS:
        raise ValueError(f"unknown method {method!r}, expected one of {sorted(KERNELS)}")
    if t.shape[:3] != geom.lr_dims:
        raise ValueError(f"series dims {t.shape[:3]} do not match LR dims {geom.lr_dims}")
    if motion.n_timepoints != t.shape[3]:
        raise ValueError(
            f"motion has {motion.n_timepoints} timepoints, series has {t.shape[3]}"
        )

    def one(n):
        return interpolate_volume(compose_grid_positions(t, geom, motion, n), method)

    results = parallel_map(one, range(t.shape[3]), threads)
    series = np.stack([vol for vol, _ in results], axis=-1)
    covered = np.stack([cov for _, cov in results], axis=-1)
    vol4 = Volume4D(series, spacing=(*geom.hr_spacing, t.spacing[3]))
    return vol4, covered
