"""Command-line surface: phantom generation, noise simulation, training,
slice reconstruction, the benchmark suite, and the HTTP service.

All commands exit nonzero with a one-line diagnostic on failure and are
deterministic for a fixed ``--seed``.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import io as nio
from .experiments import (
    DeskScale,
    bench_accuracy,
    bench_hyper,
    bench_timing,
    bench_voxels,
    write_csv,
)
from .fbp import fbp_slice
from .filters import frequency_scale, gaussian_smooth, ram_lak
from .geometry import SliceOrientation, ortho_slices
from .phantom import (
    NoiseSpec,
    apply_poisson_noise,
    calibrate_density,
    generate_foam,
    project_foam,
)
from .pipeline import (
    build_cache,
    default_volume_shape,
    reconstruct_slice_n2f,
    train_nnfbp_supervised,
    train_noise2filter,
)


def _fail(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


@click.group()
def main():
    """Self-supervised learned-filter tomography toolkit."""


@main.group()
def phantom():
    """Synthetic foam phantom datasets."""


@phantom.command("gen")
@click.argument("out", type=click.Path())
@click.option("--size", default=128, show_default=True, help="Volume size N.")
@click.option("--angles", default=256, show_default=True)
@click.option("--balls", default=1000, show_default=True)
@click.option("--absorption", default=0.1, show_default=True)
@click.option("--cor-shift", default=0.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
def phantom_gen(out, size, angles, balls, absorption, cor_shift, seed):
    """Generate a foam phantom and write its clean projections to OUT."""
    try:
        scale = DeskScale(n=size, n_angles=angles, n_balls=balls, absorption=absorption)
        g = scale.geometry(cor_shift=cor_shift)
        p = generate_foam(**scale.phantom_kwargs(seed))
        p = calibrate_density(p, scale.geometry(), absorption)
        clean = project_foam(p, g, supersampling=scale.supersampling)
        nio.save_dataset(
            out,
            clean,
            phantom={
                "n_balls": balls,
                "seed": seed,
                "radius_range": [0.02 * p.cylinder_radius, 0.12 * p.cylinder_radius],
                "cylinder_radius": p.cylinder_radius,
                "cylinder_half_height": p.cylinder_half_height,
                "density": p.density,
            },
            seed=seed,
        )
    except Exception as exc:
        _fail(str(exc))
    click.echo(f"wrote clean dataset to {out} (density {p.density:.6g})")


@main.group()
def noise():
    """Photon-count noise simulation."""


@noise.command("apply")
@click.argument("dataset", type=click.Path(exists=True))
@click.argument("out", type=click.Path())
@click.option("--i0", required=True, type=float, help="Incident photons per pixel.")
@click.option("--seed", default=0, show_default=True)
def noise_apply(dataset, out, i0, seed):
    """Apply Poisson noise to a clean dataset."""
    try:
        s, manifest = nio.load_dataset(dataset)
        noisy = apply_poisson_noise(s, NoiseSpec(i0=i0, seed=seed))
        nio.save_dataset(
            out,
            noisy,
            phantom=manifest.phantom,
            noise={"i0": i0, "seed": seed},
            seed=manifest.seed,
        )
    except Exception as exc:
        _fail(str(exc))
    click.echo(f"wrote noisy dataset to {out} (I0={i0:g}, seed={seed})")


@main.group()
def train():
    """Model training."""


@train.command("n2f")
@click.argument("dataset", type=click.Path(exists=True))
@click.argument("out", type=click.Path())
@click.option("--splits", default=3, show_default=True)
@click.option("--strategy", default="1x", type=click.Choice(["x1", "1x"]), show_default=True)
@click.option("--ntrain", default=50_000, show_default=True)
@click.option("--seed", default=0, show_default=True)
def train_n2f(dataset, out, splits, strategy, ntrain, seed):
    """Self-supervised training from a single noisy dataset."""
    try:
        s, _ = nio.load_dataset(dataset)
        model = train_noise2filter(
            s, n_splits=splits, strategy=strategy, n_train=ntrain, seed=seed
        )
        nio.save_model(out, model)
    except Exception as exc:
        _fail(str(exc))
    r = model.report
    click.echo(
        f"wrote model to {out} ({r.n_iterations} iterations, "
        f"{r.seconds:.1f} s, best val MSE {r.best_val_loss:.3e})"
    )


@train.command("nnfbp")
@click.argument("dataset", type=click.Path(exists=True))
@click.argument("out", type=click.Path())
@click.option("--ntrain", default=40_000, show_default=True)
@click.option("--seed", default=0, show_default=True)
def train_nnfbp(dataset, out, ntrain, seed):
    """Supervised training; the dataset manifest must include a phantom."""
    try:
        s, manifest = nio.load_dataset(dataset)
        p = nio.phantom_from_manifest(manifest)
        if p is None:
            raise ValueError("supervised training needs a phantom in the manifest")
        from .phantom import voxelize_foam

        shape = default_volume_shape(s.geometry)
        model = train_nnfbp_supervised(
            s, voxelize_foam(p, shape), n_train=ntrain, seed=seed
        )
        nio.save_model(out, model)
    except Exception as exc:
        _fail(str(exc))
    r = model.report
    click.echo(f"wrote model to {out} ({r.n_iterations} iterations, {r.seconds:.1f} s)")


def _parse_orientation(spec: str, g) -> SliceOrientation:
    shape = default_volume_shape(g)
    named = dict(zip(("axial", "frontal", "longitudinal"), ortho_slices(shape, g.pixel_size)))
    if spec in named:
        return named[spec]
    if spec == "custom":
        raise ValueError("custom slices need --orientation-json")
    raise ValueError(f"unknown slice {spec!r}")


@main.command("recon")
@click.argument("dataset", type=click.Path(exists=True))
@click.argument("out", type=click.Path())
@click.option(
    "--method",
    default="fbp",
    type=click.Choice(["fbp", "fbp-g", "fbp-sc", "n2f"]),
    show_default=True,
)
@click.option(
    "--slice",
    "slice_spec",
    default="axial",
    type=click.Choice(["axial", "frontal", "longitudinal", "custom"]),
    show_default=True,
)
@click.option(
    "--orientation-json",
    default=None,
    help='Custom plane: {"origin": [...], "u": [...], "v": [...], "width": n, "height": n}.',
)
@click.option("--model", "model_path", default=None, type=click.Path(exists=True))
@click.option("--cor-shift", default=None, type=float, help="Override the stored shift.")
@click.option("--sigma", default=1.5, show_default=True, help="fbp-g smoothing width.")
@click.option("--f-sc", default=0.5, show_default=True, help="fbp-sc frequency cutoff.")
def recon(dataset, out, method, slice_spec, orientation_json, model_path, cor_shift, sigma, f_sc):
    """Reconstruct one slice to a 16-bit image plus raw float dump."""
    try:
        s, _ = nio.load_dataset(dataset)
        g = s.geometry
        if orientation_json is not None:
            d = json.loads(orientation_json)
            o = SliceOrientation(
                np.asarray(d["origin"], dtype=float),
                np.asarray(d["u"], dtype=float),
                np.asarray(d["v"], dtype=float),
                int(d["width"]),
                int(d["height"]),
                float(d.get("pixel_size", g.pixel_size)),
            )
        else:
            o = _parse_orientation(slice_spec, g)

        if method == "n2f":
            if model_path is None:
                raise ValueError("method n2f needs --model")
            model = nio.load_model(model_path)
            cache = build_cache(model, s)
            img = reconstruct_slice_n2f(model, cache, o, cor_shift=cor_shift)
        else:
            f = ram_lak(g.det_cols - 1, g.pixel_size)
            if method == "fbp-g":
                f = gaussian_smooth(f, sigma)
            elif method == "fbp-sc":
                f = frequency_scale(f, f_sc)
            img = fbp_slice(s, f, o, cor_shift=cor_shift)
        nio.save_slice_image(out, img.data)
    except Exception as exc:
        _fail(str(exc))
    click.echo(f"wrote {out}.png / {out}.raw ({img.data.shape[1]}x{img.data.shape[0]})")


def _parse_list(text, cast):
    return tuple(cast(x) for x in text.split(",") if x.strip())


@main.group()
def bench():
    """Reproducible benchmark suite (CSV output)."""


_SCALE_OPTS = [
    click.option("--size", default=128, show_default=True),
    click.option("--angles", default=256, show_default=True),
    click.option("--balls", default=1000, show_default=True),
]


def _scale_opts(fn):
    for opt in reversed(_SCALE_OPTS):
        fn = opt(fn)
    return fn


@bench.command("accuracy")
@click.argument("out", type=click.Path())
@_scale_opts
@click.option("--i0-list", default="1000,2000,4000,8000,16000,32000", show_default=True)
@click.option("--trials", default=20, show_default=True)
@click.option("--ntrain", default=50_000, show_default=True)
@click.option("--seed", default=0, show_default=True)
def bench_accuracy_cmd(out, size, angles, balls, i0_list, trials, ntrain, seed):
    """Accuracy of all five methods across noise levels."""
    try:
        scale = DeskScale(n=size, n_angles=angles, n_balls=balls)
        rows = bench_accuracy(
            scale,
            i0_list=_parse_list(i0_list, float),
            trials=trials,
            n_train=ntrain,
            seed=seed,
            progress=lambda i0, t: click.echo(f"  i0={i0:g} trial={t} done", err=True),
        )
        write_csv(rows, out)
    except Exception as exc:
        _fail(str(exc))
    click.echo(f"wrote {len(rows)} rows to {out}")


@bench.command("hyper")
@click.argument("out", type=click.Path())
@_scale_opts
@click.option("--splits", default="2,3,4,5,6", show_default=True)
@click.option("--strategies", default="x1,1x", show_default=True)
@click.option("--i0", default=1000.0, show_default=True)
@click.option("--trials", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
def bench_hyper_cmd(out, size, angles, balls, splits, strategies, i0, trials, seed):
    """Splitting strategy and subset-count sweep."""
    try:
        scale = DeskScale(n=size, n_angles=angles, n_balls=balls)
        rows = bench_hyper(
            scale,
            splits_list=_parse_list(splits, int),
            strategies=_parse_list(strategies, str),
            i0=i0,
            trials=trials,
            seed=seed,
        )
        write_csv(rows, out)
    except Exception as exc:
        _fail(str(exc))
    click.echo(f"wrote {len(rows)} rows to {out}")


@bench.command("voxels")
@click.argument("out", type=click.Path())
@_scale_opts
@click.option("--ntrain-list", default="1000,5000,20000,50000,200000", show_default=True)
@click.option("--i0", default=1000.0, show_default=True)
@click.option("--trials", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
def bench_voxels_cmd(out, size, angles, balls, ntrain_list, i0, trials, seed):
    """Training-set size sweep."""
    try:
        scale = DeskScale(n=size, n_angles=angles, n_balls=balls)
        rows = bench_voxels(
            scale,
            ntrain_list=_parse_list(ntrain_list, int),
            i0=i0,
            trials=trials,
            seed=seed,
        )
        write_csv(rows, out)
    except Exception as exc:
        _fail(str(exc))
    click.echo(f"wrote {len(rows)} rows to {out}")


@bench.command("timing")
@_scale_opts
@click.option("--i0", default=1000.0, show_default=True)
@click.option("--requests", default=100, show_default=True)
@click.option("--seed", default=0, show_default=True)
def bench_timing_cmd(size, angles, balls, i0, requests, seed):
    """Data-preparation and warm per-slice latency report."""
    try:
        scale = DeskScale(n=size, n_angles=angles, n_balls=balls)
        res = bench_timing(scale, i0=i0, n_requests=requests, seed=seed)
    except Exception as exc:
        _fail(str(exc))
    click.echo(f"training:        {res['train_seconds']:8.2f} s")
    click.echo(f"cache build:     {res['prep_seconds']:8.2f} s")
    click.echo(f"fbp slice:       {res['fbp_slice_ms']:8.2f} ms (median of {res['n_requests']})")
    click.echo(f"learned slice:   {res['n2f_slice_ms']:8.2f} ms (median of {res['n_requests']})")
    click.echo(f"slice ratio:     {res['ratio']:8.2f}")


@main.command("serve")
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", default=None, type=click.Path(exists=True))
@click.option("--threads", default=1, show_default=True)
def serve(port, host, dataset, model_path, threads):
    """Start the real-time slice reconstruction service."""
    try:
        import uvicorn

        from .service import create_app

        app = create_app(dataset, model_path=model_path)
    except Exception as exc:
        _fail(str(exc))
    uvicorn.run(app, host=host, port=port, workers=1, log_level="warning")


if __name__ == "__main__":
    main()
