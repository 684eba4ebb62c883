"""Self-supervised learned-filter tomography.

Train a small filter network from a single noisy parallel-beam dataset
by splitting the projection angles into subsets, then reconstruct
arbitrarily oriented slices in real time with the extracted filters.
"""

from .experiments import DeskScale, build_desk_dataset, ground_truth_slices
from .fbp import FilteredStack, fbp_slice, fbp_subset_slice, fbp_volume, filter_and_cache
from .io import (
    FormatError,
    load_dataset,
    load_model,
    save_dataset,
    save_model,
    save_slice_image,
)
from .filters import (
    ExpBinBasis,
    Filter,
    basis_element,
    convolve_sinogram,
    expand_filter,
    frequency_scale,
    gaussian_smooth,
    make_basis,
    ram_lak,
)
from .geometry import (
    AngularSplit,
    Geometry,
    SliceOrientation,
    make_parallel_geometry,
    ortho_slices,
    split_angles,
)
from .metrics import data_range, grid_search_baseline, psnr, ssim
from .mlp import MLPParams, ScalingRecord, TrainingSet, extract_filters, train_lma
from .phantom import (
    FoamPhantom,
    NoiseSpec,
    apply_poisson_noise,
    calibrate_density,
    generate_foam,
    project_foam,
    voxelize_foam,
)
from .pipeline import (
    N2FModel,
    build_cache,
    prepare_data,
    reconstruct_slice_n2f,
    sample_voxels,
    train_nnfbp_supervised,
    train_noise2filter,
)
from .projector import (
    SliceImage,
    Sinogram,
    Volume,
    backproject_slice,
    backproject_volume,
    forward_project,
    sample_volume_on_slice,
)

__version__ = "1.0.0"
