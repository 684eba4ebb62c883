"""Image quality metrics (PSNR, SSIM) against noiseless ground truth and
the linear grid search used to tune the baseline filter parameters.

The data range is always taken from the noiseless reference (its max
minus min).  Reported pipeline metrics are means over the three
ortho-slices.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate

from .fbp import fbp_slice
from .filters import Filter, frequency_scale, gaussian_smooth

__all__ = ["psnr", "ssim", "data_range", "grid_search_baseline", "ortho_average"]


def data_range(ref: np.ndarray) -> float:
    return float(np.max(ref) - np.min(ref))


def psnr(x: np.ndarray, ref: np.ndarray, data_range: float) -> float:
    """10 * log10(range^2 / MSE); +inf for identical images."""
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise ValueError("image shapes must match")
    if data_range <= 0:
        raise ValueError("data_range must be positive")
    mse = np.mean((x - ref) ** 2)
    if mse == 0:
        return np.inf
    return float(10.0 * np.log10(data_range**2 / mse))


def _gaussian_window(sigma: float = 1.5, size: int = 11) -> np.ndarray:
    r = (size - 1) / 2
    j = np.arange(size) - r
    g = np.exp(-(j**2) / (2 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


def ssim(
    x: np.ndarray,
    ref: np.ndarray,
    data_range: float,
    k1: float = 0.01,
    k2: float = 0.03,
    sigma: float = 1.5,
) -> float:
    """Mean local structural similarity with an 11x11 Gaussian window."""
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise ValueError("image shapes must match")
    win = _gaussian_window(sigma=sigma)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2

    mu_x = correlate(x, win, mode="reflect")
    mu_y = correlate(ref, win, mode="reflect")
    xx = correlate(x * x, win, mode="reflect") - mu_x**2
    yy = correlate(ref * ref, win, mode="reflect") - mu_y**2
    xy = correlate(x * ref, win, mode="reflect") - mu_x * mu_y

    num = (2 * mu_x * mu_y + c1) * (2 * xy + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (xx + yy + c2)
    return float(np.mean(num / den))


def ortho_average(metric, slices, refs, rng_value) -> float:
    """Mean of a metric over paired ortho-slice reconstructions."""
    return float(
        np.mean([metric(s, r, rng_value) for s, r in zip(slices, refs)])
    )


def grid_search_baseline(
    s,
    gt_slices,
    base_filter: Filter,
    orientations,
    kind: str,
    grid,
) -> tuple[float, list[tuple[float, float]]]:
    """Pick the filter parameter maximizing ortho-averaged SSIM.

    ``kind`` selects Gaussian smoothing of the filter or frequency
    scaling.  Ties break toward the smaller parameter (less smoothing).
    Returns the winner and the full (parameter, score) table.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("parameter grid must be non-empty")
    if kind not in ("gaussian", "freqscale"):
        raise ValueError("kind must be 'gaussian' or 'freqscale'")
    refs = [np.asarray(r) for r in gt_slices]
    rng_value = data_range(np.concatenate([r.ravel() for r in refs]))

    from .filters import convolve_sinogram
    from .projector import backproject_slice

    scores = []
    for param in grid:
        if kind == "gaussian":
            f = gaussian_smooth(base_filter, param)
        else:
            f = frequency_scale(base_filter, param)
        # One convolution per parameter, shared by all slices.
        filtered = convolve_sinogram(s, f)
        recs = [backproject_slice(filtered, o).data for o in orientations]
        scores.append((param, ortho_average(ssim, recs, refs, rng_value)))
    best = max(sorted(scores, key=lambda t: t[0]), key=lambda t: t[1])
    return best[0], scores
