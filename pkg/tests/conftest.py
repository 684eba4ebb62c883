import numpy as np
import pytest

from noise2filter.experiments import DeskScale, build_desk_dataset, ground_truth_slices
from noise2filter.geometry import make_parallel_geometry, ortho_slices
from noise2filter.phantom import (
    NoiseSpec,
    apply_poisson_noise,
    calibrate_density,
    generate_foam,
    project_foam,
)


def rel_err(a, b):
    """Relative L2 error of ``a`` against reference ``b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.linalg.norm(b)
    if denom == 0:
        return float(np.linalg.norm(a))
    return float(np.linalg.norm(a - b) / denom)


@pytest.fixture(scope="session")
def small_geometry():
    return make_parallel_geometry(48, 32, 48)


@pytest.fixture(scope="session")
def small_phantom(small_geometry):
    p = generate_foam(
        60, seed=3, cylinder_radius=12.8, cylinder_half_height=12.8
    )
    return calibrate_density(p, small_geometry, 0.1)


@pytest.fixture(scope="session")
def small_clean(small_phantom, small_geometry):
    return project_foam(small_phantom, small_geometry)


@pytest.fixture(scope="session")
def small_noisy(small_clean):
    return apply_poisson_noise(small_clean, NoiseSpec(i0=1000, seed=7))


@pytest.fixture(scope="session")
def small_orientations():
    return ortho_slices((32, 32, 32))


@pytest.fixture(scope="session")
def desk_scale():
    return DeskScale()


@pytest.fixture(scope="session")
def desk_clean(desk_scale):
    """Full-scale phantom and noiseless projections, built once per run."""
    p, clean, _ = build_desk_dataset(desk_scale, i0=1000, phantom_seed=0, noise_seed=0)
    return p, clean


@pytest.fixture(scope="session")
def desk_ground_truth(desk_clean, desk_scale):
    p, _ = desk_clean
    return ground_truth_slices(p, desk_scale)
