"""Acquisition geometry, angular subset splitting, and slice orientations.

Conventions used throughout the package:

* The volume is centered at the world origin.  A volume of shape
  ``(nx, ny, nz)`` has voxel centers at ``(i - (n - 1) / 2) * voxel_size``
  along each axis, so voxel centers sit at half-integer offsets for even
  sizes.
* The rotation axis is the z-axis.  At angle ``theta`` a point ``(x, y, z)``
  projects to detector coordinate ``t = x cos(theta) + y sin(theta)`` and
  detector height ``z``.
* Detector column ``j`` samples ``t = (j - (det_cols - 1) / 2 - cor_shift)
  * pixel_size``; detector row ``r`` samples ``z = (r - (det_rows - 1) / 2)
  * pixel_size``.  ``cor_shift`` is therefore a pure horizontal offset of
  the rotation axis on the detector, in detector columns.
* Angles cover ``[0, pi)`` with equal spacing (half rotation, parallel
  beam).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Geometry",
    "SliceOrientation",
    "AngularSplit",
    "make_parallel_geometry",
    "split_angles",
    "ortho_slices",
]


@dataclass(frozen=True)
class Geometry:
    """3D parallel-beam acquisition description."""

    n_angles: int
    angles: np.ndarray
    det_rows: int
    det_cols: int
    pixel_size: float = 1.0
    cor_shift: float = 0.0

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=np.float64)
        object.__setattr__(self, "angles", angles)
        if self.n_angles < 1 or self.det_rows < 1 or self.det_cols < 1:
            raise ValueError("n_angles, det_rows and det_cols must be >= 1")
        if angles.shape != (self.n_angles,):
            raise ValueError("angles length must equal n_angles")
        if np.any(angles < 0) or np.any(angles >= 2 * np.pi):
            raise ValueError("angles must lie in [0, 2*pi)")
        if self.n_angles > 1 and np.any(np.diff(angles) <= 0):
            raise ValueError("angles must be strictly increasing")
        # Make the array read-only so instances are safely shareable.
        angles.setflags(write=False)

    def fingerprint(self) -> dict:
        """Hashable description used to detect model/dataset mismatch."""
        return {
            "n_angles": self.n_angles,
            "det_rows": self.det_rows,
            "det_cols": self.det_cols,
            "pixel_size": self.pixel_size,
        }


@dataclass(frozen=True)
class SliceOrientation:
    """Arbitrary reconstruction plane: origin plus two orthonormal axes.

    ``origin`` is the center of the slice in world coordinates.  Pixel
    ``(iv, iu)`` of the slice image sits at::

        origin + (iu - (width - 1) / 2) * pixel_size * u_axis
               + (iv - (height - 1) / 2) * pixel_size * v_axis
    """

    origin: np.ndarray
    u_axis: np.ndarray
    v_axis: np.ndarray
    width: int
    height: int
    pixel_size: float = 1.0

    def __post_init__(self):
        for name in ("origin", "u_axis", "v_axis"):
            vec = np.asarray(getattr(self, name), dtype=np.float64)
            if vec.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            vec.setflags(write=False)
            object.__setattr__(self, name, vec)
        if self.width < 1 or self.height < 1:
            raise ValueError("width and height must be >= 1")
        for name in ("u_axis", "v_axis"):
            if abs(np.linalg.norm(getattr(self, name)) - 1.0) > 1e-9:
                raise ValueError(f"{name} must be unit-norm")
        if abs(float(self.u_axis @ self.v_axis)) >= 1e-9:
            raise ValueError("u_axis and v_axis must be orthogonal")

    def pixel_positions(self) -> np.ndarray:
        """World positions of all slice pixels, shape (height, width, 3)."""
        iu = (np.arange(self.width) - (self.width - 1) / 2) * self.pixel_size
        iv = (np.arange(self.height) - (self.height - 1) / 2) * self.pixel_size
        return (
            self.origin[None, None, :]
            + iu[None, :, None] * self.u_axis[None, None, :]
            + iv[:, None, None] * self.v_axis[None, None, :]
        )


@dataclass(frozen=True)
class AngularSplit:
    """Round-robin partition of angle indices into disjoint subsets."""

    n_splits: int
    subsets: tuple = field(default_factory=tuple)

    def __post_init__(self):
        subsets = tuple(np.asarray(s, dtype=np.intp) for s in self.subsets)
        for s in subsets:
            s.setflags(write=False)
        object.__setattr__(self, "subsets", subsets)
        if len(subsets) != self.n_splits:
            raise ValueError("subset count must equal n_splits")

    def complement(self, j: int) -> np.ndarray:
        """All angle indices not in subset ``j``, sorted."""
        others = [s for l, s in enumerate(self.subsets) if l != j]
        return np.sort(np.concatenate(others))


def make_parallel_geometry(
    n_angles: int,
    det_rows: int,
    det_cols: int,
    cor_shift: float = 0.0,
    pixel_size: float = 1.0,
) -> Geometry:
    """Equally-spaced parallel-beam geometry over a half rotation."""
    if n_angles < 1 or det_rows < 1 or det_cols < 1:
        raise ValueError("n_angles, det_rows and det_cols must be >= 1")
    angles = np.arange(n_angles) * (np.pi / n_angles)
    return Geometry(
        n_angles=n_angles,
        angles=angles,
        det_rows=det_rows,
        det_cols=det_cols,
        pixel_size=pixel_size,
        cor_shift=cor_shift,
    )


def split_angles(g: Geometry, n_splits: int) -> AngularSplit:
    """Assign successive angles round-robin to ``n_splits`` subsets.

    Subset ``j`` receives exactly the indices ``i`` with
    ``i % n_splits == j``, so each subset keeps a uniform angular step of
    ``n_splits`` times the original one.
    """
    if n_splits < 2 or n_splits > g.n_angles:
        raise ValueError("n_splits must satisfy 2 <= n_splits <= n_angles")
    idx = np.arange(g.n_angles)
    subsets = tuple(idx[idx % n_splits == j] for j in range(n_splits))
    return AngularSplit(n_splits=n_splits, subsets=subsets)


def ortho_slices(
    volume_shape: tuple[int, int, int], pixel_size: float = 1.0
) -> tuple[SliceOrientation, SliceOrientation, SliceOrientation]:
    """Central axial, frontal and longitudinal slices of a volume.

    All three planes pass through the world origin (the volume midpoint).
    For even sizes the midplane falls between two voxel layers; its
    backprojection equals the average of the two adjacent voxel planes
    because detector interpolation is linear.
    """
    nx, ny, nz = volume_shape
    if nx < 1 or ny < 1 or nz < 1:
        raise ValueError("volume shape components must be >= 1")
    origin = np.zeros(3)
    ex = np.array([1.0, 0.0, 0.0])
    ey = np.array([0.0, 1.0, 0.0])
    ez = np.array([0.0, 0.0, 1.0])
    axial = SliceOrientation(origin, ex, ey, nx, ny, pixel_size)
    frontal = SliceOrientation(origin, ex, ez, nx, nz, pixel_size)
    longitudinal = SliceOrientation(origin, ey, ez, ny, nz, pixel_size)
    return axial, frontal, longitudinal
