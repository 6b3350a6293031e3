"""Slice-wise rigid acquisition geometry: forward and adjoint projection.

The observed low-resolution (LR) series is modelled per timepoint as
``t_n = D S W_n x_n``: trilinear sampling ``W_n`` of the anatomy volume at
rigid-motion-mapped grid positions (one transform per slice), a separable
Gaussian slice-profile / anti-alias blur ``S`` on the high-resolution (HR)
grid, and integer-factor decimation ``D``. ``adjoint_project`` applies the
exact transpose of that chain, which the solver needs for gradients.

Conventions
-----------
Axes (b, k, h) map to physical (x, y, z); all positions are in mm. Both
grids share the physical origin, HR voxel ``(i, j, k)`` sits at
``i*hr_spacing`` etc., and LR voxel centers coincide with the strided HR
samples kept by ``D``. Rotations are intrinsic ``Rz(yaw) @ Ry(pitch) @
Rx(roll)`` in degrees about a given center (the HR volume center for all
projection operators); translation follows rotation.

Samples mapped outside the HR field of view contribute zero and are
excluded via the validity mask that ``forward_project`` returns: an LR
voxel is valid only if (numerically) all of its blur mass came from
in-bounds samples.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from ._parallel import parallel_map
from .errors import NumericError
from .tensor4d import Volume4D

_FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
_FOV_TOL = 1e-9
_MASK_TOL = 1e-6

MOTION_CSV_HEADER = ("n", "h", "roll_deg", "pitch_deg", "yaw_deg", "tx_mm", "ty_mm", "tz_mm")


def _rotation_matrix(roll_deg: float, pitch_deg: float, yaw_deg: float) -> np.ndarray:
    """Intrinsic Rz(yaw) @ Ry(pitch) @ Rx(roll), angles in degrees."""
    r, p, y = (math.radians(a) for a in (roll_deg, pitch_deg, yaw_deg))
    cr, sr = math.cos(r), math.sin(r)
    cp, sp = math.cos(p), math.sin(p)
    cy, sy = math.cos(y), math.sin(y)
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return rz @ ry @ rx


def _angles_from_matrix(m: np.ndarray) -> tuple:
    """Euler angles (roll, pitch, yaw) in degrees for Rz @ Ry @ Rx."""
    pitch = math.asin(min(1.0, max(-1.0, -m[2, 0])))
    if abs(m[2, 0]) < 1.0 - 1e-12:
        roll = math.atan2(m[2, 1], m[2, 2])
        yaw = math.atan2(m[1, 0], m[0, 0])
    else:  # gimbal lock: fold yaw into roll
        roll = math.atan2(-m[1, 2], m[1, 1])
        yaw = 0.0
    return math.degrees(roll), math.degrees(pitch), math.degrees(yaw)


@dataclass(frozen=True)
class RigidTransform:
    """6-DOF rigid map ``p -> R (p - c) + c + t`` about a center ``c``.

    Parameters
    ----------
    rotation_deg : (roll, pitch, yaw) in degrees
        Rotations about the b, k and h axis; composed as
        ``Rz(yaw) @ Ry(pitch) @ Rx(roll)``.
    translation_mm : (tx, ty, tz) in mm.
    """

    rotation_deg: tuple = (0.0, 0.0, 0.0)
    translation_mm: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        rot = tuple(float(v) for v in self.rotation_deg)
        tra = tuple(float(v) for v in self.translation_mm)
        if len(rot) != 3 or len(tra) != 3:
            raise ValueError("rotation_deg and translation_mm must each have 3 entries")
        if not all(np.isfinite(rot + tra)):
            raise ValueError("transform parameters must be finite")
        object.__setattr__(self, "rotation_deg", rot)
        object.__setattr__(self, "translation_mm", tra)

    def matrix(self) -> np.ndarray:
        return _rotation_matrix(*self.rotation_deg)

    def apply(self, points, center=(0.0, 0.0, 0.0)) -> np.ndarray:
        """Map physical points (..., 3) through the transform."""
        p = np.asarray(points, dtype=np.float64)
        c = np.asarray(center, dtype=np.float64)
        t = np.asarray(self.translation_mm)
        return (p - c) @ self.matrix().T + c + t

    def inverse(self) -> "RigidTransform":
        """The rigid map undoing this one (valid for any center)."""
        rt = self.matrix().T
        t_inv = -rt @ np.asarray(self.translation_mm)
        return RigidTransform(_angles_from_matrix(rt), tuple(t_inv))


def transform_point(p, t: RigidTransform, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Apply a rigid transform to one point or an array of points (..., 3)."""
    return t.apply(p, center)


@dataclass(frozen=True)
class MotionTrajectory:
    """Per-slice rigid motion parameters for a whole series.

    ``params`` has shape (N, H, 6): timepoints x slices x
    (roll_deg, pitch_deg, yaw_deg, tx_mm, ty_mm, tz_mm).
    """

    params: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.params, dtype=np.float64)
        if p.ndim != 3 or p.shape[2] != 6:
            raise ValueError(f"params must have shape (N, H, 6), got {p.shape}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError(f"need at least one timepoint and slice, got {p.shape}")
        if not np.isfinite(p).all():
            raise ValueError("motion parameters must be finite")
        object.__setattr__(self, "params", p)

    @property
    def n_timepoints(self) -> int:
        return self.params.shape[0]

    @property
    def n_slices(self) -> int:
        return self.params.shape[1]

    def transform(self, n: int, h: int) -> RigidTransform:
        """Rigid transform of slice ``h`` at timepoint ``n`` (0-based)."""
        row = self.params[n, h]
        return RigidTransform(tuple(row[:3]), tuple(row[3:]))

    @classmethod
    def identity(cls, n_timepoints: int, n_slices: int) -> "MotionTrajectory":
        return cls(np.zeros((n_timepoints, n_slices, 6)))

    def to_csv(self, path):
        """Write `n,h,roll_deg,...,tz_mm` rows; n and h are 1-based on disk."""
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(MOTION_CSV_HEADER)
            for n in range(self.n_timepoints):
                for h in range(self.n_slices):
                    writer.writerow(
                        [n + 1, h + 1] + [repr(float(v)) for v in self.params[n, h]]
                    )

    @classmethod
    def from_csv(cls, path) -> "MotionTrajectory":
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None or tuple(s.strip() for s in header) != MOTION_CSV_HEADER:
                raise ValueError(
                    f"bad motion CSV header in {path}: expected "
                    f"{','.join(MOTION_CSV_HEADER)}"
                )
            rows = {}
            for line in reader:
                if not line:
                    continue
                if len(line) != 8:
                    raise ValueError(f"motion CSV row must have 8 fields: {line}")
                n, h = int(line[0]) - 1, int(line[1]) - 1
                if n < 0 or h < 0:
                    raise ValueError(f"motion CSV indices are 1-based: {line}")
                if (n, h) in rows:
                    raise ValueError(f"duplicate motion CSV entry for n={n + 1}, h={h + 1}")
                rows[(n, h)] = [float(v) for v in line[2:]]
        if not rows:
            raise ValueError(f"motion CSV {path} has no data rows")
        n_time = max(k[0] for k in rows) + 1
        n_slice = max(k[1] for k in rows) + 1
        params = np.full((n_time, n_slice, 6), np.nan)
        for (n, h), vals in rows.items():
            params[n, h] = vals
        if np.isnan(params).any():
            raise ValueError(
                f"motion CSV {path} does not cover every (n, h) pair of "
                f"{n_time} timepoints x {n_slice} slices"
            )
        return cls(params)


@dataclass(frozen=True)
class GridSpec:
    """A regular 3D grid: dims, voxel spacing (mm), physical origin (mm)."""

    dims: tuple
    spacing: tuple
    origin: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        spacing = tuple(float(s) for s in self.spacing)
        origin = tuple(float(o) for o in self.origin)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise ValueError(f"dims must be 3 positive ints, got {self.dims}")
        if len(spacing) != 3 or any(s <= 0 or not np.isfinite(s) for s in spacing):
            raise ValueError(f"spacing must be 3 positive floats, got {self.spacing}")
        if len(origin) != 3 or not all(np.isfinite(origin)):
            raise ValueError(f"origin must be 3 finite floats, got {self.origin}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)

    @property
    def center(self) -> np.ndarray:
        """Physical center of the grid (mm)."""
        d = np.asarray(self.dims, dtype=np.float64)
        return np.asarray(self.origin) + (d - 1.0) / 2.0 * np.asarray(self.spacing)

    def n_voxels(self) -> int:
        return int(np.prod(self.dims))


@dataclass(frozen=True)
class BlurSpec:
    """Separable Gaussian blur given as per-axis FWHM in mm (0 = no blur)."""

    kind: str = "gaussian"
    fwhm_mm: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.kind != "gaussian":
            raise ValueError(f"unsupported blur kind {self.kind!r}")
        fwhm = tuple(float(v) for v in self.fwhm_mm)
        if len(fwhm) != 3 or any(v < 0 or not np.isfinite(v) for v in fwhm):
            raise ValueError(f"fwhm_mm must be 3 nonnegative floats, got {self.fwhm_mm}")
        object.__setattr__(self, "fwhm_mm", fwhm)


def gaussian_kernel_1d(fwhm_mm: float, spacing_mm: float) -> np.ndarray:
    """Discrete normalized Gaussian for a given FWHM, sampled at ``spacing_mm``.

    ``sigma = fwhm / (2 sqrt(2 ln 2))``; support is +-ceil(3 sigma) samples.
    FWHM 0 gives the identity kernel ``[1.0]``.
    """
    if fwhm_mm < 0 or spacing_mm <= 0:
        raise ValueError("fwhm must be >= 0 and spacing > 0")
    if fwhm_mm == 0.0:
        return np.ones(1)
    sigma = fwhm_mm / _FWHM_PER_SIGMA / spacing_mm
    radius = max(1, int(math.ceil(3.0 * sigma)))
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def interleaved_order(n_slices: int) -> tuple:
    """Even slice indices first, then odd (0-based acquisition order)."""
    return tuple(range(0, n_slices, 2)) + tuple(range(1, n_slices, 2))


@dataclass(frozen=True)
class AcquisitionGeometry:
    """Grids and operators of one acquisition setup.

    The LR grid is ``lr_dims`` at ``(in_plane, in_plane, slice_thickness)``
    mm spacing; the HR reconstruction grid refines it by
    ``downsample_factors`` per axis. ``blur=None`` selects the default
    slice-profile model: through-plane FWHM equal to the slice thickness and
    in-plane FWHM of 1.2x the in-plane spacing. ``interleave`` is the slice
    acquisition order (0-based permutation); default interleaved
    (even slices then odd).
    """

    lr_dims: tuple = (48, 48, 12)
    downsample_factors: tuple = (1, 1, 2)
    in_plane_spacing: float = 1.74
    slice_thickness: float = 3.0
    blur: BlurSpec | None = None
    interleave: tuple | None = None

    def __post_init__(self):
        lr = tuple(int(d) for d in self.lr_dims)
        f = tuple(int(v) for v in self.downsample_factors)
        if len(lr) != 3 or any(d < 1 for d in lr):
            raise ValueError(f"lr_dims must be 3 positive ints, got {self.lr_dims}")
        if len(f) != 3 or any(v < 1 for v in f):
            raise ValueError(
                f"downsample_factors must be 3 positive ints, got {self.downsample_factors}"
            )
        if self.in_plane_spacing <= 0 or self.slice_thickness <= 0:
            raise ValueError("spacings must be positive")
        hr = tuple(d * v for d, v in zip(lr, f))
        if any(d < 2 for d in hr):
            raise ValueError(f"HR grid must have >= 2 voxels per axis, got {hr}")
        blur = self.blur
        if blur is None:
            blur = BlurSpec(
                fwhm_mm=(
                    1.2 * self.in_plane_spacing,
                    1.2 * self.in_plane_spacing,
                    self.slice_thickness,
                )
            )
        order = self.interleave
        if order is None:
            order = interleaved_order(lr[2])
        order = tuple(int(i) for i in order)
        if sorted(order) != list(range(lr[2])):
            raise ValueError(
                f"interleave must be a permutation of 0..{lr[2] - 1}, got {order}"
            )
        object.__setattr__(self, "lr_dims", lr)
        object.__setattr__(self, "downsample_factors", f)
        object.__setattr__(self, "in_plane_spacing", float(self.in_plane_spacing))
        object.__setattr__(self, "slice_thickness", float(self.slice_thickness))
        object.__setattr__(self, "blur", blur)
        object.__setattr__(self, "interleave", order)

    @classmethod
    def clinical(cls) -> "AcquisitionGeometry":
        """Adult-scanner-sized preset: 144x144x18 at 1.74x1.74x3 mm, 2x
        through-plane refinement."""
        return cls(lr_dims=(144, 144, 18), downsample_factors=(1, 1, 2))

    @property
    def hr_dims(self) -> tuple:
        return tuple(d * f for d, f in zip(self.lr_dims, self.downsample_factors))

    @property
    def lr_spacing(self) -> tuple:
        return (self.in_plane_spacing, self.in_plane_spacing, self.slice_thickness)

    @property
    def hr_spacing(self) -> tuple:
        return tuple(s / f for s, f in zip(self.lr_spacing, self.downsample_factors))

    def hr_grid(self) -> GridSpec:
        return GridSpec(self.hr_dims, self.hr_spacing)

    def lr_grid(self) -> GridSpec:
        return GridSpec(self.lr_dims, self.lr_spacing)

    @property
    def center(self) -> np.ndarray:
        """Rotation center: the HR volume center (mm)."""
        return self.hr_grid().center


def build_blur_kernel(geom: AcquisitionGeometry) -> tuple:
    """Per-axis 1D kernels of the separable HR-grid blur, each summing to 1."""
    return tuple(
        gaussian_kernel_1d(f, s) for f, s in zip(geom.blur.fwhm_mm, geom.hr_spacing)
    )


def _slice_plane_positions(grid: GridSpec, k_index: int):
    """Physical coordinates of one constant-k plane of a grid, as (B, K) arrays."""
    dims, sp, org = grid.dims, grid.spacing, grid.origin
    pb = org[0] + np.arange(dims[0], dtype=np.float64)[:, None] * sp[0]
    pk = org[1] + np.arange(dims[1], dtype=np.float64)[None, :] * sp[1]
    ph = org[2] + float(k_index) * sp[2]
    zeros = np.zeros((dims[0], dims[1]))
    return pb + zeros, pk + zeros, ph + zeros


class ProjectionOperator:
    """Precomputed forward/adjoint maps for one (geometry, motion) pair.

    The trilinear gather stencils (8 corner indices + weights per HR sample
    point, per timepoint) are cached when they fit in memory, so repeated
    applications inside the solver cost a few vectorized passes each.
    """

    def __init__(self, geom: AcquisitionGeometry, motion: MotionTrajectory, threads: int = 1):
        if motion.n_slices != geom.lr_dims[2]:
            raise ValueError(
                f"motion has {motion.n_slices} slices, geometry expects {geom.lr_dims[2]}"
            )
        self.geom = geom
        self.motion = motion
        self.threads = int(threads)
        self.n_timepoints = motion.n_timepoints
        self._hr_dims = geom.hr_dims
        self._n_hr = int(np.prod(self._hr_dims))
        self._kernels = build_blur_kernel(geom)
        ones = np.ones(self._hr_dims)
        mass = self._convolve(ones)
        # zero-padding loses mass at the volume edge; renormalizing keeps the
        # blur constant-preserving, and its exact adjoint is conv(inv * x)
        self._inv_mass = 1.0 / mass
        est_bytes = self._n_hr * 8 * 12 * self.n_timepoints
        self._cache = {} if est_bytes <= 1_500_000_000 else None
        self._mask = None

    # -- table construction ------------------------------------------------

    def _build_tables(self, n: int):
        geom = self.geom
        dims = self._hr_dims
        sp = geom.hr_spacing
        center = geom.center
        grid = geom.hr_grid()
        d_h = geom.downsample_factors[2]
        qb = np.empty(dims)
        qk = np.empty(dims)
        qh = np.empty(dims)
        for kk in range(dims[2]):
            t = self.motion.transform(n, kk // d_h)
            rot = t.matrix()
            tra = t.translation_mm
            pb, pk, ph = _slice_plane_positions(grid, kk)
            db, dk, dz = pb - center[0], pk - center[1], ph - center[2]
            qb[:, :, kk] = rot[0, 0] * db + rot[0, 1] * dk + rot[0, 2] * dz + center[0] + tra[0]
            qk[:, :, kk] = rot[1, 0] * db + rot[1, 1] * dk + rot[1, 2] * dz + center[1] + tra[1]
            qh[:, :, kk] = rot[2, 0] * db + rot[2, 1] * dk + rot[2, 2] * dz + center[2] + tra[2]

        idx = np.empty((self._n_hr, 8), dtype=np.int64)
        wgt = np.empty((self._n_hr, 8))
        valid = np.ones(self._n_hr, dtype=bool)
        base = []
        frac = []
        coords = [qb.ravel() / sp[0], qk.ravel() / sp[1], qh.ravel() / sp[2]]
        for gv, dim in zip(coords, dims):
            valid &= (gv >= -_FOV_TOL) & (gv <= dim - 1 + _FOV_TOL)
            gc = np.clip(gv, 0.0, dim - 1.0)
            i0 = np.minimum(np.floor(gc), dim - 2).astype(np.int64)
            base.append(i0)
            frac.append(gc - i0)
        strides = (dims[1] * dims[2], dims[2], 1)
        corner = 0
        for db in (0, 1):
            wb = frac[0] if db else 1.0 - frac[0]
            for dk in (0, 1):
                wk = frac[1] if dk else 1.0 - frac[1]
                for dh in (0, 1):
                    wh = frac[2] if dh else 1.0 - frac[2]
                    idx[:, corner] = (
                        (base[0] + db) * strides[0]
                        + (base[1] + dk) * strides[1]
                        + (base[2] + dh)
                    )
                    wgt[:, corner] = wb * wk * wh
                    corner += 1
        wgt[~valid] = 0.0
        idx[~valid] = 0
        return idx, wgt, valid

    def _tables(self, n: int):
        if self._cache is not None:
            tab = self._cache.get(n)
            if tab is None:
                tab = self._build_tables(n)
                self._cache[n] = tab
            return tab
        return self._build_tables(n)

    # -- building blocks ----------------------------------------------------

    def _convolve(self, vol: np.ndarray) -> np.ndarray:
        out = vol
        for axis, k in enumerate(self._kernels):
            if k.size > 1:
                out = correlate1d(out, k, axis=axis, mode="constant", cval=0.0)
        return out

    def _blur(self, vol: np.ndarray) -> np.ndarray:
        return self._convolve(vol) * self._inv_mass

    def _blur_adjoint(self, vol: np.ndarray) -> np.ndarray:
        return self._convolve(vol * self._inv_mass)

    def _decimate(self, vol: np.ndarray) -> np.ndarray:
        fb, fk, fh = self.geom.downsample_factors
        return vol[::fb, ::fk, ::fh]

    def _decimate_adjoint(self, lr: np.ndarray) -> np.ndarray:
        fb, fk, fh = self.geom.downsample_factors
        out = np.zeros(self._hr_dims)
        out[::fb, ::fk, ::fh] = lr
        return out

    # -- public application --------------------------------------------------

    def apply_volume(self, x3: np.ndarray, n: int) -> np.ndarray:
        """Forward-project one HR volume through timepoint ``n``'s motion."""
        idx, wgt, _ = self._tables(n)
        sampled = (x3.ravel()[idx] * wgt).sum(axis=1).reshape(self._hr_dims)
        return np.ascontiguousarray(self._decimate(self._blur(sampled)))

    def apply_adjoint_volume(self, t3: np.ndarray, n: int) -> np.ndarray:
        idx, wgt, _ = self._tables(n)
        z = self._blur_adjoint(self._decimate_adjoint(t3))
        contrib = z.ravel()[:, None] * wgt
        out = np.bincount(idx.ravel(), weights=contrib.ravel(), minlength=self._n_hr)
        return out.reshape(self._hr_dims)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """(B^, K^, H^, N) -> (B, K, H, N) forward projection."""
        if x.shape != (*self._hr_dims, self.n_timepoints):
            raise ValueError(
                f"expected HR series of shape {(*self._hr_dims, self.n_timepoints)}, "
                f"got {x.shape}"
            )
        vols = parallel_map(
            lambda n: self.apply_volume(np.ascontiguousarray(x[..., n]), n),
            range(self.n_timepoints),
            self.threads,
        )
        return np.stack(vols, axis=-1)

    def apply_adjoint(self, t: np.ndarray) -> np.ndarray:
        """(B, K, H, N) -> (B^, K^, H^, N) exact transpose of :meth:`apply`."""
        if t.shape != (*self.geom.lr_dims, self.n_timepoints):
            raise ValueError(
                f"expected LR series of shape {(*self.geom.lr_dims, self.n_timepoints)}, "
                f"got {t.shape}"
            )
        vols = parallel_map(
            lambda n: self.apply_adjoint_volume(np.ascontiguousarray(t[..., n]), n),
            range(self.n_timepoints),
            self.threads,
        )
        return np.stack(vols, axis=-1)

    @property
    def valid_mask(self) -> np.ndarray:
        """Boolean LR mask: True where all blur mass came from in-FOV samples."""
        if self._mask is None:
            def one(n):
                _, _, valid = self._tables(n)
                frac = self._blur(valid.astype(np.float64).reshape(self._hr_dims))
                return self._decimate(frac) >= 1.0 - _MASK_TOL

            vols = parallel_map(one, range(self.n_timepoints), self.threads)
            self._mask = np.stack(vols, axis=-1)
        return self._mask


def _check_series(x: Volume4D, dims: tuple, what: str):
    if x.shape[:3] != tuple(dims):
        raise ValueError(f"{what} grid mismatch: volume {x.shape[:3]}, expected {tuple(dims)}")


def forward_project(x: Volume4D, geom: AcquisitionGeometry, motion: MotionTrajectory,
                    threads: int = 1):
    """Apply the acquisition model to an HR series.

    Returns
    -------
    (Volume4D, ndarray of bool)
        The LR observation and its validity mask (True = the LR voxel saw
        only in-FOV samples).
    """
    _check_series(x, geom.hr_dims, "HR")
    if motion.n_timepoints != x.shape[3]:
        raise ValueError(
            f"motion has {motion.n_timepoints} timepoints, series has {x.shape[3]}"
        )
    op = ProjectionOperator(geom, motion, threads)
    data = op.apply(x.data)
    if not np.isfinite(data).all():
        raise NumericError("forward projection produced non-finite values")
    out = Volume4D(data, spacing=(*geom.lr_spacing, x.spacing[3]))
    return out, op.valid_mask


def adjoint_project(t: Volume4D, geom: AcquisitionGeometry, motion: MotionTrajectory,
                    threads: int = 1) -> Volume4D:
    """Apply the exact transpose of :func:`forward_project` to an LR series."""
    _check_series(t, geom.lr_dims, "LR")
    if motion.n_timepoints != t.shape[3]:
        raise ValueError(
            f"motion has {motion.n_timepoints} timepoints, series has {t.shape[3]}"
        )
    op = ProjectionOperator(geom, motion, threads)
    data = op.apply_adjoint(t.data)
    return Volume4D(data, spacing=(*geom.hr_spacing, t.spacing[3]))


def compose_grid_positions(t: Volume4D, geom: AcquisitionGeometry,
                           motion: MotionTrajectory, n: int):
    """Scatter volume ``n`` of an LR series into anatomy space.

    Every LR voxel becomes one sample: its value, placed at the
    motion-mapped physical position of the voxel center (slice ``h`` uses
    that slice's transform). The result feeds the per-volume
    scattered-data baselines; the default target grid is the HR grid.
    """
    _check_series(t, geom.lr_dims, "LR")
    n = int(n)
    if not 0 <= n < motion.n_timepoints:
        raise ValueError(f"timepoint {n} outside 0..{motion.n_timepoints - 1}")
    if motion.n_slices != geom.lr_dims[2]:
        raise ValueError(
            f"motion has {motion.n_slices} slices, geometry expects {geom.lr_dims[2]}"
        )
    from .interp3d import ScatteredSamples  # local import: interp3d imports geometry

    grid = geom.lr_grid()
    dims = grid.dims
    center = geom.center
    qb = np.empty(dims)
    qk = np.empty(dims)
    qh = np.empty(dims)
    for h in range(dims[2]):
        tr = motion.transform(n, h)
        rot = tr.matrix()
        tra = tr.translation_mm
        pb, pk, ph = _slice_plane_positions(grid, h)
        db, dk, dz = pb - center[0], pk - center[1], ph - center[2]
        qb[:, :, h] = rot[0, 0] * db + rot[0, 1] * dk + rot[0, 2] * dz + center[0] + tra[0]
        qk[:, :, h] = rot[1, 0] * db + rot[1, 1] * dk + rot[1, 2] * dz + center[1] + tra[1]
        qh[:, :, h] = rot[2, 0] * db + rot[2, 1] * dk + rot[2, 2] * dz + center[2] + tra[2]
    positions = np.stack([qb.ravel(), qk.ravel(), qh.ravel()], axis=1)
    values = t.data[..., n].ravel()
    return ScatteredSamples(positions, values, geom.hr_grid())
