"""The three-step self-supervised pipeline: data preparation on the
ortho-slices, training against angular-subset targets, and filtered-cache
slice reconstruction.  Supervised training against a noiseless volume is
provided for comparison.

Two training strategies exist.  With ``X:1`` the network input is the
basis reconstruction of a single angular subset and the target is the
mean FBP of the remaining subsets; ``1:X`` swaps those roles (input from
the complement average, target from the single subset).  Either way the
same per-subset reconstructions are reused, so data preparation costs
``3 * (n_basis + 1)`` full-data-equivalent slice FBPs regardless of the
number of splits.

Inference never averages subsets: the learned filters are applied to the
full measured data and the pointwise non-linearity is evaluated per slice
pixel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fbp import FilteredStack, filter_and_cache, filters_fingerprint
from .filters import (
    ExpBinBasis,
    Filter,
    basis_element,
    convolve_sinogram_bank,
    make_basis,
    ram_lak,
)
from .geometry import (
    AngularSplit,
    Geometry,
    SliceOrientation,
    ortho_slices,
    split_angles,
)
from .mlp import (
    MLPParams,
    ScalingRecord,
    TrainingSet,
    TrainReport,
    extract_filters,
    train_lma,
)
from .projector import (
    SliceImage,
    Sinogram,
    Volume,
    backproject_slice,
    sample_volume_on_slice,
)

__all__ = [
    "N2FModel",
    "PrepData",
    "default_volume_shape",
    "default_basis",
    "prepare_data",
    "sample_voxels",
    "train_noise2filter",
    "train_nnfbp_supervised",
    "build_cache",
    "reconstruct_slice_n2f",
    "sigmoid",
]

STRATEGIES = ("x1", "1x")


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))


def default_volume_shape(g: Geometry) -> tuple[int, int, int]:
    """Cubic N^3 grid with N = detector rows (detector columns are wider
    so the rotated volume stays inside the field of view)."""
    n = g.det_rows
    return (n, n, n)


def default_basis(g: Geometry) -> ExpBinBasis:
    """Filter spanning the detector width: half_width = det_cols - 1."""
    return make_basis(g.det_cols - 1)


@dataclass(frozen=True)
class PrepData:
    """Per-subset ortho-slice reconstructions for training.

    ``target_single[s][j]`` is the FBP of subset ``j`` on ortho-slice
    ``s`` with the target filter; ``input_single[s][j, i]`` the
    reconstruction with basis element ``i``.  Complement averages are the
    per-subset means over the other subsets.
    """

    geometry: Geometry
    basis: ExpBinBasis
    split: AngularSplit
    orientations: tuple
    target_single: tuple  # per slice: (n_splits, H, W)
    input_single: tuple  # per slice: (n_splits, n_basis, H, W)

    @property
    def n_splits(self) -> int:
        return self.split.n_splits

    def target_complement(self, slice_idx: int) -> np.ndarray:
        """Mean of the other subsets' target FBPs, per subset."""
        t = self.target_single[slice_idx]
        return np.stack(
            [
                np.mean(np.delete(t, j, axis=0), axis=0)
                for j in range(self.n_splits)
            ]
        )

    def input_complement(self, slice_idx: int) -> np.ndarray:
        z = self.input_single[slice_idx]
        return np.stack(
            [
                np.mean(np.delete(z, j, axis=0), axis=0)
                for j in range(self.n_splits)
            ]
        )


def prepare_data(
    s: Sinogram,
    n_splits: int,
    basis: ExpBinBasis | None = None,
    target_filter: Filter | None = None,
    orientations: tuple | None = None,
) -> PrepData:
    """Compute all per-subset ortho-slice reconstructions.

    Each basis element and the target filter are convolved once over the
    full sinogram; subset reconstructions then reuse the filtered rows,
    so the total backprojection work sums to one full reconstruction per
    filter and slice.
    """
    g = s.geometry
    if basis is None:
        basis = default_basis(g)
    if target_filter is None:
        target_filter = ram_lak(basis.half_width, g.pixel_size)
    if orientations is None:
        orientations = ortho_slices(default_volume_shape(g), g.pixel_size)
    split = split_angles(g, n_splits)

    bank = [basis_element(basis, i) for i in range(basis.n_elems)]
    *filtered_basis, filtered_target = convolve_sinogram_bank(
        s, bank + [target_filter]
    )

    target_single = []
    input_single = []
    for o in orientations:
        tgt = np.stack(
            [
                backproject_slice(filtered_target, o, angle_indices=sub).data
                for sub in split.subsets
            ]
        )
        inp = np.stack(
            [
                np.stack(
                    [
                        backproject_slice(fb, o, angle_indices=sub).data
                        for fb in filtered_basis
                    ]
                )
                for sub in split.subsets
            ]
        )
        target_single.append(tgt)
        input_single.append(inp)
    return PrepData(
        geometry=g,
        basis=basis,
        split=split,
        orientations=tuple(orientations),
        target_single=tuple(target_single),
        input_single=tuple(input_single),
    )


def sample_voxels(
    prep: PrepData,
    n_samples: int,
    seed: int = 0,
    strategy: str = "1x",
    with_replacement: bool = False,
) -> TrainingSet:
    """Uniform sample of (subset, ortho-slice, pixel) triples.

    Rows pair the basis-reconstruction inputs with the matching subset
    target under the chosen strategy; roughly one eleventh of the sample
    is carved off for validation.  ``with_replacement`` permits samples
    larger than the unique-voxel pool (bootstrap sampling); without it,
    oversampling is an error.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}")
    sizes = [t.shape[1] * t.shape[2] for t in prep.target_single]
    pool = prep.n_splits * sum(sizes)
    if n_samples > pool and not with_replacement:
        raise ValueError(f"cannot sample {n_samples} from {pool} voxels")

    if strategy == "x1":
        input_arrays = prep.input_single
        target_arrays = [
            prep.target_complement(k) for k in range(len(prep.orientations))
        ]
    else:
        input_arrays = [
            prep.input_complement(k) for k in range(len(prep.orientations))
        ]
        target_arrays = prep.target_single

    # Flatten to (n_splits * n_pixels_total, n_basis) / (...,) tables.
    inputs_flat = np.concatenate(
        [z.transpose(0, 2, 3, 1).reshape(-1, prep.basis.n_elems) for z in input_arrays]
    )
    targets_flat = np.concatenate([t.reshape(-1) for t in target_arrays])

    rng = np.random.default_rng(seed)
    chosen = rng.choice(
        len(targets_flat), size=n_samples, replace=with_replacement
    )
    n_train = int(round(n_samples / 1.1))
    return TrainingSet(
        inputs=inputs_flat[chosen],
        targets=targets_flat[chosen],
        train_idx=np.arange(n_train),
        val_idx=np.arange(n_train, n_samples),
    )


@dataclass(frozen=True)
class N2FModel:
    """Trained reconstruction model: network parameters plus the learned
    dense filters extracted from them."""

    params: MLPParams
    scaling: ScalingRecord
    basis: ExpBinBasis
    learned_filters: tuple
    filter_biases: np.ndarray
    strategy: str
    n_splits: int
    geometry_fingerprint: dict
    report: TrainReport | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def n_filters(self) -> int:
        return len(self.learned_filters)

    def filters_fingerprint(self) -> str:
        return filters_fingerprint(list(self.learned_filters))


def _finalize_model(
    params: MLPParams,
    scaling: ScalingRecord,
    basis: ExpBinBasis,
    g: Geometry,
    strategy: str,
    n_splits: int,
    report: TrainReport,
    metadata: dict,
) -> N2FModel:
    filters, biases = extract_filters(params, basis, scaling)
    return N2FModel(
        params=params,
        scaling=scaling,
        basis=basis,
        learned_filters=tuple(filters),
        filter_biases=biases,
        strategy=strategy,
        n_splits=n_splits,
        geometry_fingerprint=g.fingerprint(),
        report=report,
        metadata=metadata,
    )


def train_noise2filter(
    s: Sinogram,
    n_splits: int = 3,
    strategy: str = "1x",
    n_train: int = 50_000,
    n_hidden: int = 4,
    seed: int = 0,
    basis: ExpBinBasis | None = None,
    orientations: tuple | None = None,
    with_replacement: bool = False,
    progress_callback=None,
) -> N2FModel:
    """Self-supervised training from a single noisy dataset."""
    if progress_callback is not None:
        progress_callback("prepare", 0.0)
    prep = prepare_data(s, n_splits, basis=basis, orientations=orientations)
    data = sample_voxels(
        prep, n_train, seed=seed, strategy=strategy,
        with_replacement=with_replacement,
    )
    if progress_callback is not None:
        progress_callback("train", 0.3)
        lma_cb = lambda i, n: progress_callback("train", 0.3 + 0.65 * i / n)
    else:
        lma_cb = None
    params, scaling, report = train_lma(
        data, n_hidden=n_hidden, seed=seed, progress_callback=lma_cb
    )
    return _finalize_model(
        params,
        scaling,
        prep.basis,
        s.geometry,
        strategy,
        n_splits,
        report,
        {"mode": "self-supervised", "n_train": n_train, "seed": seed},
    )


def train_nnfbp_supervised(
    noisy: Sinogram,
    ground_truth: Volume,
    n_train: int = 50_000,
    n_hidden: int = 4,
    seed: int = 0,
    basis: ExpBinBasis | None = None,
    orientations: tuple | None = None,
) -> N2FModel:
    """Supervised training: inputs from the full noisy data, targets from
    the noiseless volume, sampled on the ortho-slices."""
    g = noisy.geometry
    if basis is None:
        basis = default_basis(g)
    if orientations is None:
        orientations = ortho_slices(default_volume_shape(g), g.pixel_size)

    filtered = convolve_sinogram_bank(
        noisy, [basis_element(basis, i) for i in range(basis.n_elems)]
    )
    inputs_flat = []
    targets_flat = []
    for o in orientations:
        stack = np.stack([backproject_slice(fb, o).data for fb in filtered])
        inputs_flat.append(stack.transpose(1, 2, 0).reshape(-1, basis.n_elems))
        targets_flat.append(sample_volume_on_slice(ground_truth, o).data.reshape(-1))
    inputs_flat = np.concatenate(inputs_flat)
    targets_flat = np.concatenate(targets_flat)

    if n_train > len(targets_flat):
        raise ValueError(
            f"cannot sample {n_train} from {len(targets_flat)} voxels"
        )
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(targets_flat), size=n_train, replace=False)
    n_tr = int(round(n_train / 1.1))
    data = TrainingSet(
        inputs=inputs_flat[chosen],
        targets=targets_flat[chosen],
        train_idx=np.arange(n_tr),
        val_idx=np.arange(n_tr, n_train),
    )
    params, scaling, report = train_lma(data, n_hidden=n_hidden, seed=seed)
    return _finalize_model(
        params,
        scaling,
        basis,
        g,
        "supervised",
        1,
        report,
        {"mode": "supervised", "n_train": n_train, "seed": seed},
    )


def build_cache(model: N2FModel, s: Sinogram) -> FilteredStack:
    """Convolve the full measured data with the model's learned filters."""
    if s.geometry.fingerprint() != model.geometry_fingerprint:
        raise ValueError("sinogram geometry does not match the trained model")
    return filter_and_cache(s, list(model.learned_filters))


def reconstruct_slice_n2f(
    model: N2FModel,
    cache: FilteredStack,
    o: SliceOrientation,
    cor_shift: float | None = None,
) -> SliceImage:
    """Learned-filter slice reconstruction from a warm cache.

    Backprojects each cached filtered sinogram onto the plane and applies
    the pointwise non-linearity; the result is mapped back to physical
    units through the model's output scaling.
    """
    if cache.fingerprint != model.filters_fingerprint():
        raise ValueError("cache was built with different filters than the model")
    hidden = np.stack(
        [
            cache.slice_recon(k, o, cor_shift=cor_shift).data
            for k in range(model.n_filters)
        ]
    )
    act = sigmoid(hidden - model.filter_biases[:, None, None])
    out = sigmoid(
        np.tensordot(model.params.output_weights, act, axes=(0, 0))
        - model.params.output_bias
    )
    sc = model.scaling
    return SliceImage(orientation=o, data=(out - sc.out_offset) / sc.out_scale)
