"""Benchmark harness: dataset construction at the standard desk scale and
the four reproducible experiments (accuracy vs noise level, splitting
hyperparameters, training-set size, timing).

Desk scale means a 128^3 volume observed over 256 angles on a 128 x 192
detector, with a foam phantom of 1000 voids calibrated to 10% mean
absorption.  Every experiment is deterministic given its seed; results
are returned as flat row dictionaries ready for CSV export.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .fbp import fbp_slice, filter_and_cache
from .filters import ram_lak
from .geometry import SliceOrientation, make_parallel_geometry, ortho_slices
from .metrics import data_range, grid_search_baseline, ortho_average, psnr, ssim
from .phantom import (
    NoiseSpec,
    apply_poisson_noise,
    calibrate_density,
    generate_foam,
    project_foam,
    voxelize_foam,
)
from .pipeline import (
    build_cache,
    default_basis,
    default_volume_shape,
    reconstruct_slice_n2f,
    train_nnfbp_supervised,
    train_noise2filter,
)
from .projector import Sinogram, sample_volume_on_slice

__all__ = [
    "DeskScale",
    "build_desk_dataset",
    "ground_truth_slices",
    "random_orientation",
    "bench_accuracy",
    "bench_hyper",
    "bench_voxels",
    "bench_timing",
    "write_csv",
]

SIGMA_GRID = (0.5, 0.8, 1.2, 1.8, 2.7, 4.0)
FSC_GRID = (0.1, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0)


@dataclass(frozen=True)
class DeskScale:
    """Default experiment scale; shrink ``n`` for quick runs."""

    n: int = 128
    n_angles: int = 256
    n_balls: int = 1000
    absorption: float = 0.1
    supersampling: int = 2

    @property
    def det_rows(self) -> int:
        return self.n

    @property
    def det_cols(self) -> int:
        return self.n + self.n // 2

    def geometry(self, cor_shift: float = 0.0):
        return make_parallel_geometry(
            self.n_angles, self.det_rows, self.det_cols, cor_shift=cor_shift
        )

    def phantom_kwargs(self, seed: int) -> dict:
        radius = 0.4 * self.n
        return {
            "n_balls": self.n_balls,
            "seed": seed,
            "cylinder_radius": radius,
            "cylinder_half_height": radius,
        }


def build_desk_dataset(
    scale: DeskScale,
    i0: float,
    phantom_seed: int = 0,
    noise_seed: int = 0,
    cor_shift: float = 0.0,
):
    """Phantom, clean projections, and noisy projections at desk scale.

    Returns (phantom, clean Sinogram, noisy Sinogram).  The phantom
    density is calibrated against the zero-shift geometry so all noise
    levels share identical clean data.
    """
    g = scale.geometry(cor_shift=cor_shift)
    p = generate_foam(**scale.phantom_kwargs(phantom_seed))
    p = calibrate_density(
        p, scale.geometry(), scale.absorption, supersampling=scale.supersampling
    )
    clean = project_foam(p, g, supersampling=scale.supersampling)
    noisy = apply_poisson_noise(clean, NoiseSpec(i0=i0, seed=noise_seed))
    return p, clean, noisy


def ground_truth_slices(p, scale: DeskScale, orientations=None):
    """Noiseless reference images on the ortho-slices."""
    shape = (scale.n, scale.n, scale.n)
    if orientations is None:
        orientations = ortho_slices(shape)
    vol = voxelize_foam(p, shape)
    return [sample_volume_on_slice(vol, o).data for o in orientations]


def random_orientation(rng, size: int) -> SliceOrientation:
    """Uniformly oriented centered plane of the given pixel size."""
    u = rng.normal(size=3)
    u /= np.linalg.norm(u)
    v = rng.normal(size=3)
    v -= (v @ u) * u
    v /= np.linalg.norm(v)
    return SliceOrientation(np.zeros(3), u, v, size, size)


def _method_slices(method, noisy, orientations, gt, **kw):
    """Ortho-slice reconstructions for one named method."""
    g = noisy.geometry
    base = ram_lak(g.det_cols - 1, g.pixel_size)
    if method == "fbp":
        stack = filter_and_cache(noisy, [base])
        return [stack.slice_recon(0, o).data for o in orientations], {}
    if method in ("fbp_g", "fbp_sc"):
        kind = "gaussian" if method == "fbp_g" else "freqscale"
        grid = SIGMA_GRID if method == "fbp_g" else FSC_GRID
        param, _ = grid_search_baseline(noisy, gt, base, orientations, kind, grid)
        from .filters import frequency_scale, gaussian_smooth

        f = gaussian_smooth(base, param) if kind == "gaussian" else frequency_scale(base, param)
        stack = filter_and_cache(noisy, [f])
        return [stack.slice_recon(0, o).data for o in orientations], {"param": param}
    if method == "n2f":
        model = train_noise2filter(
            noisy,
            n_splits=kw.get("n_splits", 3),
            strategy=kw.get("strategy", "1x"),
            n_train=kw.get("n_train", 50_000),
            seed=kw.get("seed", 0),
        )
        cache = build_cache(model, noisy)
        recs = [reconstruct_slice_n2f(model, cache, o).data for o in orientations]
        return recs, {"n_iterations": model.report.n_iterations}
    raise ValueError(f"unknown method {method!r}")


def _score(recs, gt):
    rng_value = data_range(np.concatenate([r.ravel() for r in gt]))
    return (
        ortho_average(psnr, recs, gt, rng_value),
        ortho_average(ssim, recs, gt, rng_value),
    )


def bench_accuracy(
    scale: DeskScale,
    i0_list=(1000, 2000, 4000, 8000, 16000, 32000),
    trials: int = 20,
    n_train: int = 50_000,
    seed: int = 0,
    progress=None,
) -> list[dict]:
    """Accuracy of all five methods across noise levels.

    Per trial, the phantom and noise seeds are derived from the base seed.
    The supervised network is trained on an independent phantom (distinct
    seed offset) and evaluated on the trial phantom.  Returns one row per
    (method, i0, trial).
    """
    rows = []
    orientations = ortho_slices((scale.n, scale.n, scale.n))
    # The supervised-training sample pool is the three ortho-slices of a
    # single full reconstruction; cap the request accordingly.
    sup_pool = 3 * scale.n * scale.n
    sup_train = min(n_train, int(0.8 * sup_pool))
    for i0 in i0_list:
        for trial in range(trials):
            pseed = seed + 1000 * trial
            nseed = seed + 1000 * trial + 1
            p, _, noisy = build_desk_dataset(scale, i0, pseed, nseed)
            gt = ground_truth_slices(p, scale, orientations)

            for method in ("fbp", "fbp_g", "fbp_sc", "n2f"):
                t0 = time.perf_counter()
                recs, extra = _method_slices(
                    method, noisy, orientations, gt,
                    n_train=n_train, seed=seed + trial,
                )
                ps, ss = _score(recs, gt)
                rows.append(
                    {
                        "method": method,
                        "i0": i0,
                        "trial": trial,
                        "psnr": ps,
                        "ssim": ss,
                        "seconds": time.perf_counter() - t0,
                        **extra,
                    }
                )

            # Supervised reference: train on a held-out phantom, same noise level.
            t0 = time.perf_counter()
            p_tr, _, noisy_tr = build_desk_dataset(
                scale, i0, pseed + 500_000, nseed + 500_000
            )
            vol_tr = voxelize_foam(p_tr, (scale.n, scale.n, scale.n))
            model = train_nnfbp_supervised(
                noisy_tr, vol_tr, n_train=sup_train, seed=seed + trial
            )
            cache = build_cache(model, noisy)
            recs = [
                reconstruct_slice_n2f(model, cache, o).data for o in orientations
            ]
            ps, ss = _score(recs, gt)
            rows.append(
                {
                    "method": "nnfbp",
                    "i0": i0,
                    "trial": trial,
                    "psnr": ps,
                    "ssim": ss,
                    "seconds": time.perf_counter() - t0,
                }
            )
            if progress is not None:
                progress(i0, trial)
    return rows


def bench_hyper(
    scale: DeskScale,
    splits_list=(2, 3, 4, 5, 6),
    strategies=("x1", "1x"),
    i0: float = 1000,
    trials: int = 5,
    n_train: int = 50_000,
    seed: int = 0,
) -> list[dict]:
    """Splitting hyperparameter sweep at a fixed noise level."""
    rows = []
    orientations = ortho_slices((scale.n, scale.n, scale.n))
    for trial in range(trials):
        pseed = seed + 1000 * trial
        p, _, noisy = build_desk_dataset(scale, i0, pseed, pseed + 1)
        gt = ground_truth_slices(p, scale, orientations)
        for n_splits in splits_list:
            for strategy in strategies:
                t0 = time.perf_counter()
                recs, extra = _method_slices(
                    "n2f", noisy, orientations, gt,
                    n_splits=n_splits, strategy=strategy,
                    n_train=n_train, seed=seed + trial,
                )
                ps, ss = _score(recs, gt)
                rows.append(
                    {
                        "n_splits": n_splits,
                        "strategy": strategy,
                        "i0": i0,
                        "trial": trial,
                        "psnr": ps,
                        "ssim": ss,
                        "seconds": time.perf_counter() - t0,
                        **extra,
                    }
                )
    return rows


def bench_voxels(
    scale: DeskScale,
    ntrain_list=(1000, 5000, 20_000, 50_000, 200_000),
    i0: float = 1000,
    trials: int = 10,
    seed: int = 0,
) -> list[dict]:
    """Training-set size sweep (diminishing-returns curve)."""
    rows = []
    orientations = ortho_slices((scale.n, scale.n, scale.n))
    for trial in range(trials):
        pseed = seed + 1000 * trial
        p, _, noisy = build_desk_dataset(scale, i0, pseed, pseed + 1)
        gt = ground_truth_slices(p, scale, orientations)
        for n_train in ntrain_list:
            t0 = time.perf_counter()
            recs, extra = _method_slices(
                "n2f", noisy, orientations, gt,
                n_train=n_train, seed=seed + trial,
            )
            ps, ss = _score(recs, gt)
            rows.append(
                {
                    "n_train": n_train,
                    "i0": i0,
                    "trial": trial,
                    "psnr": ps,
                    "ssim": ss,
                    "seconds": time.perf_counter() - t0,
                    **extra,
                }
            )
    return rows


def bench_timing(
    scale: DeskScale,
    i0: float = 1000,
    n_requests: int = 100,
    seed: int = 0,
) -> dict:
    """Serving-path timing: data preparation plus warm per-slice latency.

    The FBP path backprojects one cached filtered sinogram; the learned
    path backprojects one per hidden filter and applies the pointwise
    non-linearity.  Latencies are medians over randomly oriented slices.
    """
    _, _, noisy = build_desk_dataset(scale, i0, seed, seed + 1)

    # Three splits of three ortho-slices; stay comfortably inside the pool.
    pool = 3 * 3 * scale.n * scale.n
    n_train = min(50_000, int(0.8 * pool))

    t0 = time.perf_counter()
    model = train_noise2filter(noisy, n_train=n_train, seed=seed)
    train_seconds = time.perf_counter() - t0

    t0 = time.perf_counter()
    n2f_cache = build_cache(model, noisy)
    fbp_cache = filter_and_cache(
        noisy, [ram_lak(noisy.geometry.det_cols - 1, noisy.geometry.pixel_size)]
    )
    prep_seconds = time.perf_counter() - t0

    rng = np.random.default_rng(seed)
    orientations = [random_orientation(rng, scale.n) for _ in range(n_requests)]
    # Warm both paths before measuring.
    fbp_cache.slice_recon(0, orientations[0])
    reconstruct_slice_n2f(model, n2f_cache, orientations[0])

    fbp_ms, n2f_ms = [], []
    for o in orientations:
        t0 = time.perf_counter()
        fbp_cache.slice_recon(0, o)
        fbp_ms.append(1000 * (time.perf_counter() - t0))
        t0 = time.perf_counter()
        reconstruct_slice_n2f(model, n2f_cache, o)
        n2f_ms.append(1000 * (time.perf_counter() - t0))

    fbp_med = float(np.median(fbp_ms))
    n2f_med = float(np.median(n2f_ms))
    return {
        "train_seconds": train_seconds,
        "prep_seconds": prep_seconds,
        "n_requests": n_requests,
        "fbp_slice_ms": fbp_med,
        "n2f_slice_ms": n2f_med,
        "ratio": n2f_med / fbp_med,
    }


def write_csv(rows: list[dict], path) -> None:
    """Flat CSV with the union of all row keys, in first-seen order."""
    if not rows:
        raise ValueError("no rows to write")
    fields = []
    for row in rows:
        for key in row:
            if key not in fields:
                fields.append(key)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
