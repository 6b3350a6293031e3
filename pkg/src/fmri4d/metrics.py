"""Quality metrics for reconstructed series.

Sharpness is the variance of the 6-neighbour discrete Laplacian, temporal
SD is the per-voxel population standard deviation over time, SSIM uses the
standard Gaussian-windowed local statistics, and SNR/PSNR are power ratios
in dB. All metrics take an optional boolean mask restricting evaluation to
a voxel subset; windowed metrics still read neighbouring values near the
mask boundary.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d



_METRIC_KEYS = ("sharpness", "temporal_sd", "ssim", "snr_db", "psnr_db")


def _volume(v, name):
    a = np.asarray(getattr(v, "data", v), dtype=np.float64)
    if a.ndim != 3:
        raise ValueError(f"{name} must be a 3D volume, got shape {a.shape}")
    return a


def _series(v, name):
    a = np.asarray(getattr(v, "data", v), dtype=np.float64)
    if a.ndim != 4:
        raise ValueError(f"{name} must be a 4D series, got shape {a.shape}")
    return a


def _mask_for(shape, mask):
    if mask is None:
        return np.ones(shape, dtype=bool)
    m = np.asarray(mask, dtype=bool)
    if m.shape != tuple(shape):
        raise ValueError(f"mask shape {m.shape} does not match volume {shape}")
    if not m.any():
        raise ValueError("mask selects no voxels")
    return m


def laplacian_6(v):
    """6-neighbour discrete Laplacian with replicated edges."""
    p = np.pad(v, 1, mode="edge")
    return (
        p[:-2, 1:-1, 1:-1]
        + p[2:, 1:-1, 1:-1]
        + p[1:-1, :-2, 1:-1]
        + p[1:-1, 2:, 1:-1]
        + p[1:-1, 1:-1, :-2]
        + p[1:-1, 1:-1, 2:]
        - 6.0 * v
    )


def sharpness_laplacian(v, mask=None) -> float:
    """Variance of the Laplacian over the masked voxels.

    Higher values mean more high-frequency content; a constant volume
    scores exactly 0.
    """
    a = _volume(v, "volume")
    m = _mask_for(a.shape, mask)
    vals = laplacian_6(a)[m]
    return float(vals.var())


def temporal_sd(x, mask=None):
    """Per-voxel SD over time (population N) and its masked mean."""
    a = _series(x, "series")
    if a.shape[3] < 2:
        raise ValueError("temporal SD needs at least 2 timepoints")
    m = _mask_for(a.shape[:3], mask)
    sd_map = a.std(axis=3)
    return sd_map, float(sd_map[m].mean())


def _local_stats(a, weights):
    out = a
    for axis in range(3):
        out = correlate1d(out, weights, axis=axis, mode="mirror")
    return out


def ssim(a, b, mask=None, data_range=None) -> float:
    """Mean local SSIM between two volumes.

    Local statistics use a Gaussian window of sigma 1.5 voxels truncated
    to 11 taps per axis. ``data_range`` defaults to the joint value range
    of both inputs and sets the stabilising constants C1 = (0.01 L)^2 and
    C2 = (0.03 L)^2.
    """
    va = _volume(a, "first volume")
    vb = _volume(b, "second volume")
    if va.shape != vb.shape:
        raise ValueError(f"volume shapes differ: {va.shape} vs {vb.shape}")
    m = _mask_for(va.shape, mask)
    if data_range is None:
        data_range = float(max(va.max(), vb.max()) - min(va.min(), vb.min()))
    if not (data_range > 0):
        raise ValueError("data range must be positive")

    taps = np.arange(-5, 6, dtype=np.float64)
    w = np.exp(-0.5 * (taps / 1.5) ** 2)
    w /= w.sum()

    mu_a = _local_stats(va, w)
    mu_b = _local_stats(vb, w)
    m_aa = _local_stats(va * va, w)
    m_bb = _local_stats(vb * vb, w)
    m_ab = _local_stats(va * vb, w)
    var_a = m_aa - mu_a * mu_a
    var_b = m_bb - mu_b * mu_b
    cov = m_ab - mu_a * mu_b

    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float((num[m] / den[m]).mean())


def _power_ratio_db(num, den):
    if den == 0.0:
        return math.inf
    return 10.0 * math.log10(num / den)


def snr(reference, test, mask=None) -> float:
    """Signal-to-noise ratio in dB: reference power over error power.

    Returns +inf when the inputs agree exactly on the mask.
    """
    ref = np.asarray(getattr(reference, "data", reference), dtype=np.float64)
    tst = np.asarray(getattr(test, "data", test), dtype=np.float64)
    if ref.shape != tst.shape:
        raise ValueError(f"shapes differ: {ref.shape} vs {tst.shape}")
    m = _mask_for(ref.shape[:3], mask)
    if ref.ndim == 4:
        m = np.broadcast_to(m[..., None], ref.shape)
    elif ref.ndim != 3:
        raise ValueError(f"expected a 3D or 4D array, got shape {ref.shape}")
    sig = float((ref[m] ** 2).sum())
    if sig == 0.0:
        raise ValueError("reference has zero power over the mask")
    err = float(((ref[m] - tst[m]) ** 2).sum())
    return _power_ratio_db(sig, err)


def psnr(reference, test, mask=None) -> float:
    """Peak signal-to-noise ratio in dB; peak is max |reference| on the mask."""
    ref = np.asarray(getattr(reference, "data", reference), dtype=np.float64)
    tst = np.asarray(getattr(test, "data", test), dtype=np.float64)
    if ref.shape != tst.shape:
        raise ValueError(f"shapes differ: {ref.shape} vs {tst.shape}")
    m = _mask_for(ref.shape[:3], mask)
    if ref.ndim == 4:
        m = np.broadcast_to(m[..., None], ref.shape)
    elif ref.ndim != 3:
        raise ValueError(f"expected a 3D or 4D array, got shape {ref.shape}")
    peak = float(np.abs(ref[m]).max())
    if peak == 0.0:
        raise ValueError("reference has zero peak over the mask")
    mse = float(((ref[m] - tst[m]) ** 2).mean())
    return _power_ratio_db(peak * peak, mse)


@dataclass(frozen=True)
class MetricsReport:
    """Per-method quality summary with deltas against the observed series."""

    values: dict
    baseline: str = "observed"

    def __post_init__(self):
        if self.baseline not in self.values:
            raise ValueError(
                f"report needs a {self.baseline!r} entry for the deltas"
            )
        for name, m in self.values.items():
            missing = [k for k in _METRIC_KEYS if k not in m]
            if missing:
                raise ValueError(f"method {name!r} is missing {missing}")

    def method_names(self):
        return tuple(self.values)

    def metrics(self, method: str) -> dict:
        return dict(self.values[method])

    def deltas(self, method: str) -> dict:
        base = self.values[self.baseline]
        cur = self.values[method]
        return {k: cur[k] - base[k] for k in _METRIC_KEYS}

    def to_csv_rows(self):
        header = ["method"]
        header += list(_METRIC_KEYS)
        header += [f"delta_{k}" for k in _METRIC_KEYS]
        rows = [header]
        for name in self.values:
            m = self.values[name]
            d = self.deltas(name)
            rows.append(
                [name]
                + [repr(float(m[k])) for k in _METRIC_KEYS]
                + [repr(float(d[k])) for k in _METRIC_KEYS]
            )
        return rows

    def format_table(self) -> str:
        cols = ["method"] + list(_METRIC_KEYS)
        body = []
        for name in self.values:
            m = self.values[name]
            body.append([name] + [f"{float(m[k]):.6g}" for k in _METRIC_KEYS])
        widths = [
            max(len(cols[i]), *(len(r[i]) for r in body)) for i in range(len(cols))
        ]
        lines = [
            "  ".join(c.ljust(w) for c, w in zip(cols, widths)),
            "  ".join("-" * w for w in widths),
        ]
        for r in body:
            lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
        return "\n".join(lines)


def evaluate_methods(series, reference, mask=None, data_range=None) -> MetricsReport:
    """Score each named 4D series against a shared reference.

    ``series`` maps method names to 4D arrays and must contain an
    ``"observed"`` entry, which anchors the report's delta columns.
    Sharpness and SSIM are averaged over timepoints; SNR and PSNR pool
    all masked voxels of the whole series. The SSIM stabilising range
    defaults to the value range of the reference so every method is
    scored on the same scale.
    """
    ref = _series(reference, "reference")
    if "observed" not in series:
        raise ValueError('series map needs an "observed" entry')
    m = _mask_for(ref.shape[:3], mask)
    if data_range is None:
        data_range = float(ref[m].max() - ref[m].min())

    values = {}
    for name, vol in series.items():
        x = _series(vol, name)
        if x.shape != ref.shape:
            raise ValueError(
                f"{name} shape {x.shape} does not match reference {ref.shape}"
            )
        n = x.shape[3]
        sharp = float(
            np.mean([sharpness_laplacian(x[..., t], m) for t in range(n)])
        )
        sim = float(
            np.mean(
                [ssim(x[..., t], ref[..., t], m, data_range) for t in range(n)]
            )
        )
        values[name] = {
            "sharpness": sharp,
            "temporal_sd": temporal_sd(x, m)[1],
            "ssim": sim,
            "snr_db": snr(ref, x, m),
            "psnr_db": psnr(ref, x, m),
        }
    return MetricsReport(values)
