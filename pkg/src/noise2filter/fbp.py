"""Filtered backprojection of volumes and slices, angular-subset
reconstructions, and the filtered-sinogram cache used for real-time
slice serving.

Filtering and backprojection are separable: ``fbp_slice`` is literally
``backproject_slice(convolve_sinogram(s, f), o)``, and a
:class:`FilteredStack` stores the convolution results so that subsequent
slice reconstructions pay for backprojection only.

Subset reconstructions are weighted ``pi / n_angles_in_subset`` so every
subset FBP is an unbiased estimate of the full reconstruction and the
complement reconstruction equals the mean of the single-subset ones
exactly (for equal subset sizes).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .filters import Filter, convolve_sinogram, convolve_sinogram_bank
from .geometry import AngularSplit, SliceOrientation
from .projector import SliceImage, Sinogram, Volume, backproject_slice, backproject_volume

__all__ = [
    "fbp_slice",
    "fbp_volume",
    "fbp_subset_slice",
    "FilteredStack",
    "filter_and_cache",
    "filters_fingerprint",
]


def fbp_slice(
    s: Sinogram,
    f: Filter,
    o: SliceOrientation,
    angle_indices=None,
    cor_shift: float | None = None,
) -> SliceImage:
    """Filter the sinogram rows, then backproject onto the plane."""
    filtered = convolve_sinogram(s, f)
    return backproject_slice(
        filtered, o, angle_indices=angle_indices, cor_shift=cor_shift
    )


def fbp_volume(
    s: Sinogram,
    f: Filter,
    shape: tuple[int, int, int] | None = None,
    voxel_size: float | None = None,
) -> Volume:
    """Full-volume FBP; used for cross-checks, not the serving path."""
    filtered = convolve_sinogram(s, f)
    return backproject_volume(filtered, shape=shape, voxel_size=voxel_size)


def fbp_subset_slice(
    s: Sinogram,
    split: AngularSplit,
    j: int,
    f: Filter,
    o: SliceOrientation,
    mode: str = "single",
) -> SliceImage:
    """FBP restricted to angular subset ``j`` or to all other subsets."""
    if not 0 <= j < split.n_splits:
        raise IndexError(f"subset index {j} out of range")
    if mode == "single":
        idx = split.subsets[j]
    elif mode == "complement":
        idx = split.complement(j)
    else:
        raise ValueError("mode must be 'single' or 'complement'")
    return fbp_slice(s, f, o, angle_indices=idx)


def filters_fingerprint(filters: list[Filter]) -> str:
    """Stable digest of a filter bank's dense coefficients."""
    digest = hashlib.sha256()
    for f in filters:
        digest.update(np.int64(f.half_width).tobytes())
        digest.update(np.ascontiguousarray(f.coeffs, dtype=np.float64).tobytes())
    return digest.hexdigest()


@dataclass(frozen=True)
class FilteredStack:
    """Immutable stack of convolved sinograms, one per filter.

    Safe for arbitrary concurrent slice reconstructions; this is the
    state held by the real-time serving path.
    """

    sinogram: Sinogram
    filtered: tuple
    fingerprint: str

    @property
    def n_filters(self) -> int:
        return len(self.filtered)

    def slice_recon(
        self, k: int, o: SliceOrientation, cor_shift: float | None = None
    ) -> SliceImage:
        """Backproject the k-th cached filtered sinogram onto a plane."""
        return backproject_slice(self.filtered[k], o, cor_shift=cor_shift)


def filter_and_cache(s: Sinogram, filters: list[Filter]) -> FilteredStack:
    """Convolve the sinogram with every filter and freeze the results."""
    if len(filters) == 0:
        raise ValueError("at least one filter is required")
    if len({f.half_width for f in filters}) == 1:
        filtered = tuple(convolve_sinogram_bank(s, filters))
    else:
        filtered = tuple(convolve_sinogram(s, f) for f in filters)
    return FilteredStack(
        sinogram=s, filtered=filtered, fingerprint=filters_fingerprint(filters)
    )
