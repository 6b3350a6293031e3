"""Synthetic 4D ground truth and its degraded acquisition.

The phantom is four concentric ellipsoidal shells on a dark background.
Each shell carries a piecewise-constant base intensity, a static smooth
texture (demeaned per region so it never disturbs regional averages), and
a slow sinusoidal signal plus linear drift shared by all voxels of the
region. Regional mean time series therefore equal the configured
sinusoids exactly, which is what makes oracle-based evaluation possible.

Degradation follows the acquisition model: slice-wise rigid motion from a
bounded random walk in acquisition order (with optional sudden whole-volume
excursions), the blur/decimation operator, and additive Gaussian noise.
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .geometry import AcquisitionGeometry, MotionTrajectory, forward_project
from .tensor4d import Volume4D

# ellipsoid semi-axes as fractions of each half-extent, outermost first
_REGION_FRACTIONS = (0.92, 0.72, 0.50, 0.28)
_TEXTURE_SMOOTHING_VOX = 1.5

_DEFAULT_BOLD = (
    ((0.04, 1.0 / 24.0, 0.0),),
    ((0.04, 1.0 / 24.0, np.pi),),
    ((0.04, 2.0 / 24.0, 0.0),),
    ((0.03, 1.0 / 24.0, 1.0), (0.02, 2.0 / 24.0, 1.0)),
)


@dataclass(frozen=True)
class PhantomSpec:
    """Ground-truth generator parameters.

    bold holds one tuple per region of (amplitude, frequency_hz, phase)
    sinusoid components; drift_per_s is the per-region linear drift slope.
    Frequencies must stay below Nyquist for the given repetition time.
    """

    hr_dims: tuple = (48, 48, 12)
    n_timepoints: int = 24
    tr_s: float = 1.0
    region_intensities: tuple = (0.3, 0.5, 0.65, 0.8)
    texture_amplitude: float = 0.04
    bold: tuple = _DEFAULT_BOLD
    drift_per_s: tuple = (0.0002, -0.0002, 0.0002, -0.0002)
    seed: int = 0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.hr_dims)
        if len(dims) != 3 or any(d < m for d, m in zip(dims, (16, 16, 8))):
            raise ValueError(f"hr_dims must be at least (16, 16, 8), got {self.hr_dims}")
        if self.n_timepoints < 8:
            raise ValueError(f"n_timepoints must be >= 8, got {self.n_timepoints}")
        if not self.tr_s > 0:
            raise ValueError(f"tr_s must be > 0, got {self.tr_s}")
        if len(self.region_intensities) != 4:
            raise ValueError("region_intensities must have 4 entries")
        if any(not 0.0 <= v <= 1.0 for v in self.region_intensities):
            raise ValueError("region intensities must lie in [0, 1]")
        if self.texture_amplitude < 0:
            raise ValueError("texture_amplitude must be >= 0")
        bold = tuple(tuple(tuple(float(x) for x in comp) for comp in region)
                     for region in self.bold)
        if len(bold) != 4:
            raise ValueError("bold must describe 4 regions")
        nyquist = 0.5 / self.tr_s
        for region in bold:
            for comp in region:
                if len(comp) != 3:
                    raise ValueError("bold components are (amplitude, freq_hz, phase)")
                amp, freq, _ = comp
                if amp < 0:
                    raise ValueError(f"bold amplitude must be >= 0, got {amp}")
                if not 0 <= freq < nyquist:
                    raise ValueError(
                        f"bold frequency {freq} Hz outside [0, {nyquist}) Hz")
        if len(self.drift_per_s) != 4:
            raise ValueError("drift_per_s must have 4 entries")
        object.__setattr__(self, "hr_dims", dims)
        object.__setattr__(self, "n_timepoints", int(self.n_timepoints))
        object.__setattr__(self, "bold", bold)
        object.__setattr__(self, "drift_per_s",
                           tuple(float(d) for d in self.drift_per_s))


@dataclass(frozen=True)
class DegradationSpec:
    """Acquisition corruption parameters.

    The motion is a per-slice random walk (uniform steps, clipped to the
    bounds) advanced in interleaved acquisition order. Bursts are
    whole-volume excursions of 85..100% of the bounds added transiently at
    chosen or randomly drawn timepoints; the walk itself continues from
    its pre-burst state.
    """

    max_rotation_deg: float = 15.0
    max_translation_mm: float = 8.0
    walk_step_deg: float = 1.0
    walk_step_mm: float = 0.5
    burst_probability: float = 0.0
    burst_timepoints: tuple = ()
    noise_sigma: float = 0.01
    seed: int = 0

    def __post_init__(self):
        for name in ("max_rotation_deg", "max_translation_mm",
                     "walk_step_deg", "walk_step_mm"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        if not 0.0 <= self.burst_probability <= 1.0:
            raise ValueError(
                f"burst_probability must be in [0, 1], got {self.burst_probability}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        object.__setattr__(self, "burst_timepoints",
                           tuple(int(n) for n in self.burst_timepoints))


def region_labels(dims) -> np.ndarray:
    """Concentric-ellipsoid label map: 0 background, 1..4 outer to inner."""
    axes = [(np.arange(d) - (d - 1) / 2.0) / ((d - 1) / 2.0) for d in dims]
    eb, ek, eh = np.meshgrid(*axes, indexing="ij")
    labels = np.zeros(dims, dtype=np.int64)
    for r, frac in enumerate(_REGION_FRACTIONS, start=1):
        inside = (eb / frac) ** 2 + (ek / frac) ** 2 + (eh / frac) ** 2 <= 1.0
        labels[inside] = r
    return labels


def region_mean_series(spec: PhantomSpec, region: int) -> np.ndarray:
    """The exact mean time series of one region (1..4): base intensity plus
    the configured sinusoids plus drift."""
    if not 1 <= region <= 4:
        raise ValueError(f"region must be 1..4, got {region}")
    t = np.arange(spec.n_timepoints) * spec.tr_s
    out = np.full(spec.n_timepoints, float(spec.region_intensities[region - 1]))
    for amp, freq, phase in spec.bold[region - 1]:
        out += amp * np.sin(2.0 * np.pi * freq * t + phase)
    out += spec.drift_per_s[region - 1] * t
    return out


def make_phantom(spec: PhantomSpec):
    """Build the ground-truth series and its label map.

    Returns
    -------
    truth : Volume4D
        (B, K, H, N), intensities in [0, 1], temporal spacing tr_s.
    labels : (B, K, H) int ndarray
        0 for background, 1..4 for the shells.
    """
    labels = region_labels(spec.hr_dims)
    if any((labels == r).sum() == 0 for r in range(1, 5)):
        raise ValueError(f"dims {spec.hr_dims} leave an ellipsoid shell empty")

    rng = np.random.default_rng(spec.seed)
    texture = gaussian_filter(rng.standard_normal(spec.hr_dims),
                              _TEXTURE_SMOOTHING_VOX)
    texture[labels == 0] = 0.0
    for r in range(1, 5):
        sel = labels == r
        texture[sel] -= texture[sel].mean()
    peak = np.max(np.abs(texture))
    if peak > 0 and spec.texture_amplitude > 0:
        texture *= spec.texture_amplitude / peak
    else:
        texture[:] = 0.0

    base = np.zeros(spec.hr_dims)
    for r in range(1, 5):
        base[labels == r] = spec.region_intensities[r - 1]

    data = np.zeros((*spec.hr_dims, spec.n_timepoints))
    spatial = base + texture
    data += spatial[..., None]
    for r in range(1, 5):
        sel = labels == r
        series = region_mean_series(spec, r) - spec.region_intensities[r - 1]
        data[sel] += series[None, :]

    lo, hi = float(data.min()), float(data.max())
    if lo < 0.0 or hi > 1.0:
        raise ValueError(
            f"phantom intensities [{lo:.4f}, {hi:.4f}] leave [0, 1]; "
            "reduce amplitudes, texture, or drift")
    return Volume4D(data, spacing=(1.0, 1.0, 1.0, spec.tr_s)), labels


def make_motion(spec: DegradationSpec, geom: AcquisitionGeometry,
                n_timepoints: int) -> MotionTrajectory:
    """Random-walk slice motion with optional whole-volume bursts.

    Steps are drawn per acquired slice in geom.interleave order, uniform
    in [-walk_step, walk_step] per component, with the walk state clipped
    to the bounds; consecutive acquisitions therefore never differ by more
    than one step. Burst timepoints (forced via burst_timepoints, or drawn
    with burst_probability) receive an additional transient whole-volume
    offset of 85..100% of each bound with random signs.
    """
    n_timepoints = int(n_timepoints)
    if n_timepoints < 1:
        raise ValueError(f"n_timepoints must be >= 1, got {n_timepoints}")
    n_slices = geom.lr_dims[2]
    for n in spec.burst_timepoints:
        if not 0 <= n < n_timepoints:
            raise ValueError(f"burst timepoint {n} outside 0..{n_timepoints - 1}")

    rng = np.random.default_rng(spec.seed)
    bounds = np.array([spec.max_rotation_deg] * 3 + [spec.max_translation_mm] * 3)
    steps = np.array([spec.walk_step_deg] * 3 + [spec.walk_step_mm] * 3)

    params = np.zeros((n_timepoints, n_slices, 6))
    state = np.zeros(6)
    for n in range(n_timepoints):
        for h in geom.interleave:
            state = np.clip(state + rng.uniform(-steps, steps), -bounds, bounds)
            params[n, h] = state

    burst_at = set(spec.burst_timepoints)
    if spec.burst_probability > 0:
        draws = rng.uniform(0.0, 1.0, n_timepoints)
        burst_at.update(np.nonzero(draws < spec.burst_probability)[0].tolist())
    for n in sorted(burst_at):
        signs = rng.choice([-1.0, 1.0], 6)
        magnitude = rng.uniform(0.85, 1.0, 6)
        offset = signs * magnitude * bounds
        params[n] = np.clip(params[n] + offset[None, :], -bounds, bounds)

    return MotionTrajectory(params)


def degrade(x: Volume4D, geom: AcquisitionGeometry, motion: MotionTrajectory,
            noise_sigma: float, seed: int, threads: int = 1) -> Volume4D:
    """Acquire x through the forward model and add Gaussian noise."""
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")
    observed, _ = forward_project(x, geom, motion, threads)
    if noise_sigma == 0:
        return observed
    noise = np.random.default_rng(seed).standard_normal(observed.shape)
    return observed.with_data(observed.data + noise_sigma * noise)
