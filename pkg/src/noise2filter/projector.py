"""Forward projection and backprojection for 3D parallel-beam geometry.

The forward projector is ray-driven: each detector pixel's value is the
line integral through the volume along the parallel ray, computed by
sampling the ray at voxel-size steps with trilinear interpolation.

The backprojector is pixel-driven: each output voxel (or slice pixel) is
projected onto the detector per angle and the filtered data is read back
with bilinear interpolation.  Out-of-detector samples contribute zero.

Both operators are linear and approximately adjoint (exact up to
interpolation).  Backprojection carries an angular weight of
``pi / n_angles_used`` so that FBP with a Ram-Lak filter is correctly
scaled; pass ``weight=1.0`` to obtain the plain adjoint.

Because the rotation axis is the z-axis, detector rows decouple from the
in-plane (x, y) computation; the inner loops exploit this separability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Geometry, SliceOrientation

__all__ = [
    "Sinogram",
    "Volume",
    "SliceImage",
    "forward_project",
    "backproject_volume",
    "backproject_slice",
    "sample_volume_on_slice",
]


@dataclass(frozen=True)
class Sinogram:
    """Projection stack tied to a geometry, [n_angles, det_rows, det_cols]."""

    geometry: Geometry
    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        g = self.geometry
        if data.shape != (g.n_angles, g.det_rows, g.det_cols):
            raise ValueError(
                f"sinogram shape {data.shape} does not match geometry "
                f"({g.n_angles}, {g.det_rows}, {g.det_cols})"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("sinogram values must be finite")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    def padded(self) -> np.ndarray:
        """Detector data with a one-pixel zero border, cached.

        Backprojection reads out-of-detector samples as zero through this
        border; caching it makes repeated backprojections of the same
        sinogram cheap.  Idempotent, so benign under concurrent first use.
        """
        cached = self.__dict__.get("_padded")
        if cached is None:
            cached = np.pad(self.data, ((0, 0), (1, 1), (1, 1)))
            cached.setflags(write=False)
            object.__setattr__(self, "_padded", cached)
        return cached


@dataclass(frozen=True)
class Volume:
    """Reconstruction volume, data indexed [ix, iy, iz], centered at origin."""

    data: np.ndarray
    voxel_size: float = 1.0

    def __post_init__(self):
        data = np.ascontiguousarray(self.data)
        if data.ndim != 3:
            raise ValueError("volume data must be 3D")
        if not np.all(np.isfinite(data)):
            raise ValueError("volume values must be finite")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True)
class SliceImage:
    """2D reconstruction on an oriented plane, data indexed [iv, iu]."""

    orientation: SliceOrientation
    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data)
        o = self.orientation
        if data.shape != (o.height, o.width):
            raise ValueError(
                f"slice shape {data.shape} does not match orientation "
                f"({o.height}, {o.width})"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("slice values must be finite")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)


def _pad_zero_border(a: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    pad = [(1, 1) if ax in axes else (0, 0) for ax in range(a.ndim)]
    return np.pad(a, pad)


def _interp_coords(coord: np.ndarray, n: int):
    """Indices/weights for linear interpolation into a zero-padded axis.

    Returns (i0, i1, w) such that ``padded[i0] * (1 - w) + padded[i1] * w``
    linearly interpolates an array padded with one zero sample on each
    side; coordinates outside [-1, n] resolve to the zero border.
    """
    i0 = np.floor(coord).astype(np.intp)
    w = coord - i0
    i1 = np.clip(i0 + 1, -1, n) + 1
    i0 = np.clip(i0, -1, n) + 1
    return i0, i1, w


def forward_project(v: Volume, g: Geometry) -> Sinogram:
    """Line integrals through ``v`` along the parallel rays of ``g``."""
    if v.voxel_size <= 0:
        raise ValueError("voxel_size must be positive")
    nx, ny, nz = v.shape
    h = v.voxel_size
    nr, nc, na = g.det_rows, g.det_cols, g.n_angles

    # Padded volume flattened over (x, y) for fast 2D gathers per z-column.
    padded = _pad_zero_border(v.data.astype(np.float64), axes=(0, 1))
    vol2d = padded.reshape((nx + 2) * (ny + 2), nz)

    # Detector sampling coordinates.
    t_cols = (np.arange(nc) - (nc - 1) / 2 - g.cor_shift) * g.pixel_size
    z_rows = (np.arange(nr) - (nr - 1) / 2) * g.pixel_size
    # Volume z-layer coordinate of each detector row.
    lz = z_rows / h + (nz - 1) / 2
    lz0, lz1, wz = _interp_coords(lz, nz)

    # Ray sampling range: cover the in-plane diagonal of the volume.
    half_span = 0.5 * np.hypot(nx * h, ny * h) + h
    n_steps = int(np.ceil(2 * half_span / h))
    s_steps = (np.arange(n_steps) + 0.5) * h - half_span

    out = np.empty((na, nr, nc), dtype=np.float32)
    for a, theta in enumerate(g.angles):
        ct, st = np.cos(theta), np.sin(theta)
        # acc[c, iz]: in-plane path integral per column and volume layer.
        acc = np.zeros((nc, nz))
        for s in s_steps:
            x = t_cols * ct - s * st
            y = t_cols * st + s * ct
            ix0, ix1, wx = _interp_coords(x / h + (nx - 1) / 2, nx)
            iy0, iy1, wy = _interp_coords(y / h + (ny - 1) / 2, ny)
            base0 = ix0 * (ny + 2)
            base1 = ix1 * (ny + 2)
            acc += (
                vol2d[base0 + iy0] * ((1 - wx) * (1 - wy))[:, None]
                + vol2d[base0 + iy1] * ((1 - wx) * wy)[:, None]
                + vol2d[base1 + iy0] * (wx * (1 - wy))[:, None]
                + vol2d[base1 + iy1] * (wx * wy)[:, None]
            )
        acc *= h
        # Interpolate volume layers onto detector rows.
        accp = _pad_zero_border(acc, axes=(1,))
        sino_a = accp[:, lz0] * (1 - wz) + accp[:, lz1] * wz
        out[a] = sino_a.T
    return Sinogram(geometry=g, data=out)


def _resolve_angles(g: Geometry, angle_indices) -> np.ndarray:
    if angle_indices is None:
        return np.arange(g.n_angles)
    idx = np.asarray(angle_indices, dtype=np.intp)
    if idx.size == 0 or np.any(idx < 0) or np.any(idx >= g.n_angles):
        raise ValueError("angle indices out of range")
    return idx


def backproject_volume(
    s: Sinogram,
    shape: tuple[int, int, int] | None = None,
    voxel_size: float | None = None,
    angle_indices=None,
    weight: float | None = None,
    cor_shift: float | None = None,
) -> Volume:
    """Pixel-driven backprojection onto a centered voxel grid.

    By default the grid is ``det_cols x det_cols x det_rows`` voxels of
    detector pixel size.  ``weight`` defaults to ``pi / n_angles_used``;
    ``cor_shift`` overrides the geometry's value when given.
    """
    g = s.geometry
    if shape is None:
        shape = (g.det_cols, g.det_cols, g.det_rows)
    nx, ny, nz = shape
    h = voxel_size if voxel_size is not None else g.pixel_size
    shift = g.cor_shift if cor_shift is None else cor_shift
    idx = _resolve_angles(g, angle_indices)
    w = np.pi / len(idx) if weight is None else weight

    padded = s.padded()

    xs = (np.arange(nx) - (nx - 1) / 2) * h
    ys = (np.arange(ny) - (ny - 1) / 2) * h
    zs = (np.arange(nz) - (nz - 1) / 2) * h
    xg = np.repeat(xs, ny)
    yg = np.tile(ys, nx)

    # Row interpolation depends only on z; precompute once.
    r = zs / g.pixel_size + (g.det_rows - 1) / 2
    r0, r1, wr = _interp_coords(r, g.det_rows)

    out = np.zeros((nx * ny, nz))
    for a in idx:
        theta = g.angles[a]
        t = xg * np.cos(theta) + yg * np.sin(theta)
        c = t / g.pixel_size + (g.det_cols - 1) / 2 + shift
        c0, c1, wc = _interp_coords(c, g.det_cols)
        plane = padded[a]
        # cols[r_padded, point]: column-interpolated detector rows.
        cols = plane[:, c0] * (1 - wc) + plane[:, c1] * wc
        out += cols[r0].T * (1 - wr) + cols[r1].T * wr
    out *= w
    return Volume(data=out.reshape(nx, ny, nz), voxel_size=h)


def backproject_slice(
    s: Sinogram,
    o: SliceOrientation,
    angle_indices=None,
    weight: float | None = None,
    cor_shift: float | None = None,
) -> SliceImage:
    """Pixel-driven backprojection onto an arbitrarily oriented plane.

    Identical sampling and weighting to :func:`backproject_volume`; the
    cost is independent of the volume depth.
    """
    g = s.geometry
    shift = g.cor_shift if cor_shift is None else cor_shift
    idx = _resolve_angles(g, angle_indices)
    w = np.pi / len(idx) if weight is None else weight

    # float32 samples promote exactly; all arithmetic below is float64.
    padded = s.padded()
    ncp = padded.shape[2]
    flat = padded.reshape(g.n_angles, -1)

    pos = o.pixel_positions().reshape(-1, 3)
    xs, ys, zs = pos[:, 0], pos[:, 1], pos[:, 2]

    r = zs / g.pixel_size + (g.det_rows - 1) / 2
    r0, r1, wr = _interp_coords(r, g.det_rows)
    # Flat offsets of the two detector rows; the hot loop below gathers
    # with np.take on the flattened plane, which is markedly faster than
    # 2D fancy indexing.
    b0, b1 = r0 * ncp, r1 * ncp
    wr0, wr1 = 1 - wr, wr

    col_center = (g.det_cols - 1) / 2 + shift
    out = np.zeros(len(pos))
    for a in idx:
        theta = g.angles[a]
        t = xs * np.cos(theta) + ys * np.sin(theta)
        c = t / g.pixel_size + col_center
        c0, c1, wc = _interp_coords(c, g.det_cols)
        plane = flat[a]
        wc0 = 1 - wc
        out += wr0 * (plane.take(b0 + c0) * wc0 + plane.take(b0 + c1) * wc) + wr1 * (
            plane.take(b1 + c0) * wc0 + plane.take(b1 + c1) * wc
        )
    out *= w
    return SliceImage(orientation=o, data=out.reshape(o.height, o.width))


def sample_volume_on_slice(v: Volume, o: SliceOrientation) -> SliceImage:
    """Trilinear sample of a volume on an oriented plane (zero outside).

    For an axis-aligned plane halfway between two voxel layers this gives
    exactly the average of the adjacent layers, matching the behavior of
    linear detector interpolation in the backprojector.
    """
    nx, ny, nz = v.shape
    h = v.voxel_size
    padded = _pad_zero_border(v.data.astype(np.float64), axes=(0, 1, 2))
    pos = o.pixel_positions().reshape(-1, 3)
    ix0, ix1, wx = _interp_coords(pos[:, 0] / h + (nx - 1) / 2, nx)
    iy0, iy1, wy = _interp_coords(pos[:, 1] / h + (ny - 1) / 2, ny)
    iz0, iz1, wz = _interp_coords(pos[:, 2] / h + (nz - 1) / 2, nz)
    out = np.zeros(len(pos))
    for iz, w_z in ((iz0, 1 - wz), (iz1, wz)):
        out += w_z * (
            (1 - wx) * (1 - wy) * padded[ix0, iy0, iz]
            + (1 - wx) * wy * padded[ix0, iy1, iz]
            + wx * (1 - wy) * padded[ix1, iy0, iz]
            + wx * wy * padded[ix1, iy1, iz]
        )
    return SliceImage(orientation=o, data=out.reshape(o.height, o.width))
