"""Dense 4D image series and the low-rank linear algebra on its unfoldings.

A series is a real array of shape ``(B, K, H, N)``: two in-plane axes, the
slice axis, and time. Mode-``i`` unfolding rearranges the tensor into a
matrix whose rows track axis ``i``; the sum of nuclear norms of the four
unfoldings is the rank surrogate minimized by the reconstruction solver.

Unfolding column convention: the remaining axes are enumerated in ascending
axis order with the first-listed axis varying fastest, so the mode-1
unfolding of ``(B, K, H, N)`` has shape ``(B, K*H*N)`` with K fastest.
``fold`` is the exact inverse rearrangement: ``fold(i, x.shape,
unfold(x, i))`` reproduces ``x`` bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError

MODES = (1, 2, 3, 4)

# Singular values at or below this fraction of the largest are treated as zero.
SIGMA_TOL = 1e-12


@dataclass(frozen=True)
class Volume4D:
    """Dense real 4D series with voxel spacing and physical origin.

    Parameters
    ----------
    data : ndarray, shape (B, K, H, N)
        Voxel values; coerced to float64. Must be finite.
    spacing : tuple of 4 floats
        Voxel spacing (mm, mm, mm) for the spatial axes and the repetition
        time (s) for the time axis.
    origin : tuple of 3 floats
        Physical position (mm) of voxel (0, 0, 0).
    """

    data: np.ndarray
    spacing: tuple = (1.0, 1.0, 1.0, 1.0)
    origin: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 4:
            raise ValueError(f"expected a 4D array, got shape {data.shape}")
        if any(s < 1 for s in data.shape):
            raise ValueError(f"all dims must be >= 1, got {data.shape}")
        if not np.isfinite(data).all():
            raise ValueError("volume contains non-finite values")
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 4 or any(s <= 0 or not np.isfinite(s) for s in spacing):
            raise ValueError(f"spacing must be 4 positive floats, got {self.spacing}")
        origin = tuple(float(o) for o in self.origin)
        if len(origin) != 3 or any(not np.isfinite(o) for o in origin):
            raise ValueError(f"origin must be 3 finite floats, got {self.origin}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def with_data(self, data: np.ndarray) -> "Volume4D":
        """Same grid metadata, new voxel values."""
        return Volume4D(data, self.spacing, self.origin)


def _tensor(x) -> np.ndarray:
    """Accept a Volume4D or raw array; return a float64 4D ndarray."""
    if isinstance(x, Volume4D):
        return x.data
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 4:
        raise ValueError(f"expected a 4D tensor, got shape {a.shape}")
    return a


def _matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a 2D matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("matrix contains non-finite values")
    return a


def _check_mode(mode: int):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode}")


def unfold(x, mode: int) -> np.ndarray:
    """Mode-``mode`` unfolding of a 4D tensor into a matrix.

    Rows follow axis ``mode`` (1-based); columns enumerate the remaining
    axes in ascending order, first-listed fastest.
    """
    _check_mode(mode)
    a = _tensor(x)
    moved = np.moveaxis(a, mode - 1, 0)
    return moved.reshape((a.shape[mode - 1], -1), order="F")


def fold(mode: int, shape, m) -> np.ndarray:
    """Inverse of :func:`unfold`: rebuild the 4D tensor from its unfolding."""
    _check_mode(mode)
    shape = tuple(int(s) for s in shape)
    if len(shape) != 4 or any(s < 1 for s in shape):
        raise ValueError(f"shape must be 4 positive ints, got {shape}")
    a = np.asarray(m, dtype=np.float64)
    rest = [shape[i] for i in range(4) if i != mode - 1]
    expected = (shape[mode - 1], int(np.prod(rest)))
    if a.shape != expected:
        raise ValueError(
            f"matrix shape {a.shape} does not match mode-{mode} unfolding "
            f"{expected} of tensor shape {shape}"
        )
    t = a.reshape((shape[mode - 1], *rest), order="F")
    return np.ascontiguousarray(np.moveaxis(t, 0, mode - 1))


def _gram_svd(a: np.ndarray):
    """Thin SVD via the eigendecomposition of the small Gram matrix a @ a.T.

    Assumes a has at least as many columns as rows. Ill-determined
    singular values (below SIGMA_TOL * max) are zeroed along with their
    right singular vectors.
    """
    gram = a @ a.T
    try:
        w, u = np.linalg.eigh(gram)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - pathological
        raise NumericError(f"eigendecomposition failed on shape {a.shape}: {exc}")
    order = np.argsort(w)[::-1]
    w = w[order]
    u = u[:, order]
    s = np.sqrt(np.clip(w, 0.0, None))
    tol = SIGMA_TOL * s[0] if s.size and s[0] > 0 else 0.0
    keep = s > tol
    s = np.where(keep, s, 0.0)
    vt = u.T @ a
    nz = np.nonzero(keep)[0]
    vt[nz] /= s[nz, None]
    vt[~keep] = 0.0
    return u, s, vt


def _thin_svd(a: np.ndarray):
    """Thin SVD U, s, Vt with s descending; Gram shortcut for lopsided shapes."""
    rows, cols = a.shape
    if cols >= 4 * rows:
        return _gram_svd(a)
    if rows >= 4 * cols:
        u, s, vt = _gram_svd(a.T)
        return vt.T, s, u.T
    try:
        return np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD failed to converge on shape {a.shape}: {exc}")


def singular_values(m) -> np.ndarray:
    """Singular values of a matrix, descending."""
    a = _matrix(m)
    return _thin_svd(a)[1]


def trace_norm(m) -> float:
    """Trace (nuclear) norm: the sum of singular values."""
    a = _matrix(m)
    return float(_thin_svd(a)[1].sum())


def rank_surrogate(x, alpha) -> float:
    """Weighted sum of trace norms of the four mode unfoldings.

    ``alpha`` must be four nonnegative weights summing to 1.
    """
    a = _tensor(x)
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (4,):
        raise ValueError(f"alpha must have 4 entries, got shape {alpha.shape}")
    if (alpha < 0).any() or not np.isfinite(alpha).all():
        raise ValueError(f"alpha entries must be nonnegative, got {alpha}")
    if abs(alpha.sum() - 1.0) > 1e-8:
        raise ValueError(f"alpha must sum to 1, got sum {alpha.sum()}")
    total = 0.0
    for i, w in zip(MODES, alpha):
        if w > 0.0:
            total += w * trace_norm(unfold(a, i))
    return float(total)


def svt(m, tau: float) -> np.ndarray:
    """Singular value thresholding: shrink each singular value by ``tau``.

    This is the proximal map of ``tau * trace_norm`` at ``m``:
    ``argmin_Z tau*||Z||_tr + 0.5*||Z - m||_F^2``. ``tau = 0`` returns a
    copy of the input.
    """
    a = _matrix(m)
    tau = float(tau)
    if tau < 0 or not np.isfinite(tau):
        raise ValueError(f"tau must be a finite nonnegative float, got {tau}")
    if tau == 0.0:
        return a.copy()
    u, s, vt = _thin_svd(a)
    shrunk = s - tau
    keep = shrunk > 0
    if not keep.any():
        return np.zeros_like(a)
    nz = np.nonzero(keep)[0]
    return (u[:, nz] * shrunk[nz]) @ vt[nz]


def truncated_svd_reconstruct(m, k: int) -> np.ndarray:
    """Best rank-``k`` approximation in the Frobenius sense (Eckart-Young)."""
    a = _matrix(m)
    k = int(k)
    if not 1 <= k <= min(a.shape):
        raise ValueError(f"k must be in [1, {min(a.shape)}], got {k}")
    u, s, vt = _thin_svd(a)
    return (u[:, :k] * s[:k]) @ vt[:k]
