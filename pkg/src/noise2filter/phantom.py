"""Foam phantom generation, analytic projection, voxelization, and
Poisson noise corruption.

The phantom is a solid cylinder (axis = rotation axis) with randomly
placed non-overlapping spherical voids.  Projections are computed in
closed form: each ray's value is ``density * (chord through the cylinder
- sum of chords through the voids)`` with chords ``2 * sqrt(r^2 - d^2)``,
optionally averaged over ``supersampling^2`` sub-rays per detector pixel.

Noise follows the physical model: photon counts ``c ~ Poisson(I0 *
exp(-p))`` per pixel, log-transformed back to line integrals with the
count clamped at 1 to keep the result finite.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .geometry import Geometry
from .projector import Sinogram, Volume

__all__ = [
    "FoamPhantom",
    "NoiseSpec",
    "generate_foam",
    "project_foam",
    "voxelize_foam",
    "apply_poisson_noise",
    "calibrate_density",
]

_MAX_CONSECUTIVE_REJECTS = 1_000_000


@dataclass(frozen=True)
class FoamPhantom:
    cylinder_radius: float
    cylinder_half_height: float
    balls: np.ndarray  # (n, 4): center x, y, z and radius
    density: float = 1.0
    seed: int = 0

    def __post_init__(self):
        balls = np.asarray(self.balls, dtype=np.float64).reshape(-1, 4)
        balls.setflags(write=False)
        object.__setattr__(self, "balls", balls)
        if self.cylinder_radius <= 0 or self.cylinder_half_height <= 0:
            raise ValueError("cylinder dimensions must be positive")
        if len(balls) and np.any(balls[:, 3] <= 0):
            raise ValueError("ball radii must be positive")


@dataclass(frozen=True)
class NoiseSpec:
    i0: float  # expected incident photons per pixel
    seed: int = 0

    def __post_init__(self):
        if self.i0 <= 0:
            raise ValueError("photon count must be positive")


def generate_foam(
    n_balls: int,
    seed: int = 0,
    radius_range: tuple[float, float] | None = None,
    cylinder_radius: float = 51.2,
    cylinder_half_height: float = 51.2,
    density: float = 1.0,
) -> FoamPhantom:
    """Rejection-sample non-overlapping voids inside the cylinder.

    Default void radii span 2% to 12% of the cylinder radius; deterministic
    for a fixed seed.
    """
    if n_balls < 0:
        raise ValueError("n_balls must be >= 0")
    if radius_range is None:
        radius_range = (0.02 * cylinder_radius, 0.12 * cylinder_radius)
    r_lo, r_hi = radius_range
    if not 0 < r_lo <= r_hi:
        raise ValueError("invalid radius range")

    rng = np.random.default_rng(seed)
    centers = np.empty((n_balls, 3))
    radii = np.empty(n_balls)
    accepted = 0
    rejects = 0
    while accepted < n_balls:
        r = rng.uniform(r_lo, r_hi)
        # Uniform in the shrunken cylinder that keeps the ball inside.
        r_max = cylinder_radius - r
        h_max = cylinder_half_height - r
        if r_max <= 0 or h_max <= 0:
            raise RuntimeError("ball radius does not fit inside the cylinder")
        rho = r_max * np.sqrt(rng.uniform())
        phi = rng.uniform(0, 2 * np.pi)
        z = rng.uniform(-h_max, h_max)
        center = np.array([rho * np.cos(phi), rho * np.sin(phi), z])
        if accepted:
            d2 = np.sum((centers[:accepted] - center) ** 2, axis=1)
            if np.any(d2 < (radii[:accepted] + r) ** 2):
                rejects += 1
                if rejects > _MAX_CONSECUTIVE_REJECTS:
                    raise RuntimeError(
                        "phantom capacity exceeded: too many rejected placements"
                    )
                continue
        centers[accepted] = center
        radii[accepted] = r
        accepted += 1
        rejects = 0
    balls = np.concatenate([centers, radii[:, None]], axis=1)
    return FoamPhantom(
        cylinder_radius=cylinder_radius,
        cylinder_half_height=cylinder_half_height,
        balls=balls,
        density=density,
        seed=seed,
    )


def project_foam(p: FoamPhantom, g: Geometry, supersampling: int = 2) -> Sinogram:
    """Closed-form projection of the foam phantom.

    Per detector pixel, the value is the average over ``supersampling^2``
    equally spaced sub-rays.
    """
    if supersampling < 1:
        raise ValueError("supersampling must be >= 1")
    ss = supersampling
    nr, nc = g.det_rows, g.det_cols
    pix = g.pixel_size
    sub = ((np.arange(ss) + 0.5) / ss - 0.5) * pix

    # Sub-ray coordinates across the detector, finest grid first.
    base_t = (np.arange(nc) - (nc - 1) / 2 - g.cor_shift) * pix
    base_z = (np.arange(nr) - (nr - 1) / 2) * pix
    tt = (base_t[:, None] + sub[None, :]).ravel()
    zz = (base_z[:, None] + sub[None, :]).ravel()

    radius, half_h = p.cylinder_radius, p.cylinder_half_height
    cyl_t = np.clip(radius**2 - tt**2, 0.0, None)
    cyl_chord = 2.0 * np.sqrt(cyl_t)
    z_inside = np.abs(zz) <= half_h

    balls = p.balls
    out = np.empty((g.n_angles, nr, nc), dtype=np.float32)
    fine = np.empty((nr * ss, nc * ss))
    for a, theta in enumerate(g.angles):
        fine[:] = cyl_chord[None, :] * z_inside[:, None]
        ct, st = np.cos(theta), np.sin(theta)
        for bx, by, bz, br in balls:
            t_q = bx * ct + by * st
            i0 = np.searchsorted(tt, t_q - br)
            i1 = np.searchsorted(tt, t_q + br, side="right")
            j0 = np.searchsorted(zz, bz - br)
            j1 = np.searchsorted(zz, bz + br, side="right")
            if i0 >= i1 or j0 >= j1:
                continue
            dt2 = (tt[i0:i1] - t_q) ** 2
            dz2 = (zz[j0:j1] - bz) ** 2
            chord2 = br**2 - dz2[:, None] - dt2[None, :]
            np.clip(chord2, 0.0, None, out=chord2)
            fine[j0:j1, i0:i1] -= 2.0 * np.sqrt(chord2)
        # Average sub-rays back to the pixel grid.
        coarse = fine.reshape(nr, ss, nc, ss).mean(axis=(1, 3))
        out[a] = p.density * coarse
    return Sinogram(geometry=g, data=out)


def voxelize_foam(
    p: FoamPhantom, shape: tuple[int, int, int], voxel_size: float = 1.0
) -> Volume:
    """Discretize the phantom with 8-point subsampling at boundaries."""
    nx, ny, nz = shape
    if nx < 1 or ny < 1 or nz < 1:
        raise ValueError("shape components must be >= 1")
    h = voxel_size
    xs = (np.arange(nx) - (nx - 1) / 2) * h
    ys = (np.arange(ny) - (ny - 1) / 2) * h
    zs = (np.arange(nz) - (nz - 1) / 2) * h

    acc = np.zeros(shape)
    offsets = h / 4 * np.array([-1.0, 1.0])
    for ox in offsets:
        x2 = (xs + ox) ** 2
        for oy in offsets:
            y2 = (ys + oy) ** 2
            rho2 = x2[:, None] + y2[None, :]
            for oz in offsets:
                z_sub = zs + oz
                occ = (
                    (rho2[:, :, None] <= p.cylinder_radius**2)
                    & (np.abs(z_sub)[None, None, :] <= p.cylinder_half_height)
                ).astype(np.float64)
                for bx, by, bz, br in p.balls:
                    ix = np.flatnonzero(np.abs(xs + ox - bx) <= br)
                    iy = np.flatnonzero(np.abs(ys + oy - by) <= br)
                    iz = np.flatnonzero(np.abs(z_sub - bz) <= br)
                    if not (len(ix) and len(iy) and len(iz)):
                        continue
                    dx2 = (xs[ix] + ox - bx) ** 2
                    dy2 = (ys[iy] + oy - by) ** 2
                    dz2 = (z_sub[iz] - bz) ** 2
                    inside = (
                        dx2[:, None, None] + dy2[None, :, None] + dz2[None, None, :]
                        <= br**2
                    )
                    patch = occ[np.ix_(ix, iy, iz)]
                    patch[inside] = 0.0
                    occ[np.ix_(ix, iy, iz)] = patch
                acc += occ
    return Volume(data=p.density * acc / 8.0, voxel_size=h)


def apply_poisson_noise(s: Sinogram, spec: NoiseSpec) -> Sinogram:
    """Photon-count Poisson noise on line integrals.

    Uses a counter-based generator (Philox) so draws are deterministic
    for a fixed seed independent of evaluation order.
    """
    p = np.asarray(s.data, dtype=np.float64)
    if np.any(p < 0):
        raise ValueError("line integrals must be non-negative")
    rng = np.random.Generator(np.random.Philox(key=spec.seed))
    counts = rng.poisson(spec.i0 * np.exp(-p))
    noisy = np.log(spec.i0) - np.log(np.maximum(counts, 1))
    return Sinogram(geometry=s.geometry, data=noisy.astype(np.float32))


def calibrate_density(
    p: FoamPhantom,
    g: Geometry,
    target_absorption: float,
    supersampling: int = 2,
) -> FoamPhantom:
    """Rescale density so mean absorption over cylinder-hitting rays hits
    the target.

    Absorption per ray is ``1 - exp(-p)``; the mean is taken over rays
    that intersect the cylinder.
    """
    if target_absorption == 0:
        return replace(p, density=0.0)
    if not 0 < target_absorption < 1:
        raise ValueError("target absorption must lie in [0, 1)")
    unit = project_foam(replace(p, density=1.0), g, supersampling=supersampling)
    p0 = np.asarray(unit.data, dtype=np.float64)
    p0 = p0[p0 > 0]
    if p0.size == 0:
        raise ValueError("no rays intersect the cylinder; target unreachable")

    def absorption(scale):
        return np.mean(1.0 - np.exp(-scale * p0)) - target_absorption

    hi = 1.0
    while absorption(hi) < 0:
        hi *= 2.0
        if hi > 1e12:
            raise ValueError("target absorption unreachable")
    scale = brentq(absorption, 0.0, hi, xtol=1e-12, rtol=1e-12)
    return replace(p, density=scale)
