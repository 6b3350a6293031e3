"""Independent oracles used by the test suite.

Everything here is deliberately written from first principles (explicit
loops, closed forms, dense matrices) so it shares no code path with the
package implementation it checks.
"""

import numpy as np


def unfold_by_index_formula(a, mode):
    """Mode unfolding via the explicit column-index formula.

    Column index of element (i1..i4) with axis ``mode``-1 removed:
    remaining axes ascending, first-listed fastest.
    """
    a = np.asarray(a, dtype=np.float64)
    ax = mode - 1
    rest = [d for d in range(4) if d != ax]
    rows = a.shape[ax]
    cols = int(np.prod([a.shape[d] for d in rest]))
    out = np.zeros((rows, cols))
    for idx in np.ndindex(a.shape):
        col = 0
        stride = 1
        for d in rest:
            col += idx[d] * stride
            stride *= a.shape[d]
        out[idx[ax], col] = a[idx]
    return out


def svd_2x2_singular_values(m):
    """Closed-form singular values of a 2x2 matrix from the Gram eigenvalues."""
    m = np.asarray(m, dtype=np.float64)
    g = m.T @ m
    tr = g[0, 0] + g[1, 1]
    det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
    disc = max(tr * tr / 4.0 - det, 0.0)
    lam1 = tr / 2.0 + np.sqrt(disc)
    lam2 = max(tr / 2.0 - np.sqrt(disc), 0.0)
    return np.sqrt(lam1), np.sqrt(lam2)


def dense_operator_matrix(apply_fn, in_shape, out_shape):
    """Assemble the dense matrix of a linear map by probing unit vectors."""
    n_in = int(np.prod(in_shape))
    n_out = int(np.prod(out_shape))
    mat = np.zeros((n_out, n_in))
    for j in range(n_in):
        e = np.zeros(n_in)
        e[j] = 1.0
        mat[:, j] = np.asarray(apply_fn(e.reshape(in_shape))).ravel()
    return mat


def chebyshev_nearest_distance(grid_points_vox, sample_points_vox):
    """Nearest-sample Chebyshev distance (voxel units) for each grid point."""
    from scipy.spatial import cKDTree

    tree = cKDTree(sample_points_vox)
    dist, _ = tree.query(grid_points_vox, k=1, p=np.inf)
    return dist


def ssim_brute_force(a, b, data_range, sigma=1.5, radius=5, k1=0.01, k2=0.03):
    """Direct SSIM map: explicit Gaussian-window sums via padded loops.

    Reflect padding, population (weighted) statistics, the standard
    luminance/contrast-structure product form.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    w1 = np.exp(-0.5 * (t / sigma) ** 2)
    w1 /= w1.sum()
    w = w1[:, None, None] * w1[None, :, None] * w1[None, None, :]

    pad = [(radius, radius)] * 3
    ap = np.pad(a, pad, mode="reflect")
    bp = np.pad(b, pad, mode="reflect")

    shape = a.shape
    mu_a = np.zeros(shape)
    mu_b = np.zeros(shape)
    m_aa = np.zeros(shape)
    m_bb = np.zeros(shape)
    m_ab = np.zeros(shape)
    for di in range(2 * radius + 1):
        for dj in range(2 * radius + 1):
            for dk in range(2 * radius + 1):
                wa = w[di, dj, dk]
                sa = ap[di:di + shape[0], dj:dj + shape[1], dk:dk + shape[2]]
                sb = bp[di:di + shape[0], dj:dj + shape[1], dk:dk + shape[2]]
                mu_a += wa * sa
                mu_b += wa * sb
                m_aa += wa * sa * sa
                m_bb += wa * sb * sb
                m_ab += wa * sa * sb
    var_a = m_aa - mu_a**2
    var_b = m_bb - mu_b**2
    cov = m_ab - mu_a * mu_b
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    return ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    )


def spectral_peak_hz(series, tr_s):
    """Frequency (Hz) of the largest nonzero-frequency FFT magnitude."""
    series = np.asarray(series, dtype=np.float64)
    series = series - series.mean()
    spec = np.abs(np.fft.rfft(series))
    freqs = np.fft.rfftfreq(series.size, d=tr_s)
    return freqs[int(np.argmax(spec))]
