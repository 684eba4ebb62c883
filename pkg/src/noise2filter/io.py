"""Dataset and model persistence plus image export.

A dataset is a directory holding ``sinogram.raw`` (little-endian 32-bit
floats in [angle][row][col] order) and ``manifest.json`` describing the
geometry, the phantom recipe (if synthetic), and the applied noise.  The
phantom is stored as its generation parameters, not its ball list: the
generator is deterministic given the seed.

Models are JSON files carrying the basis knots, network weights, scaling
record, and a geometry fingerprint; learned filters are re-derived on
load so they can never drift out of sync with the stored weights.

Slice images are exported as 16-bit PGM or PNG with the window recorded
in a JSON sidecar; a raw float32 dump remains the source of truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Geometry
from .mlp import MLPParams, ScalingRecord
from .phantom import FoamPhantom, generate_foam
from .filters import ExpBinBasis
from .pipeline import N2FModel, _finalize_model
from .projector import Sinogram

__all__ = [
    "DatasetManifest",
    "FormatError",
    "save_dataset",
    "load_dataset",
    "phantom_from_manifest",
    "save_model",
    "load_model",
    "save_slice_image",
]

FORMAT_VERSION = 1
SINO_FILE = "sinogram.raw"
MANIFEST_FILE = "manifest.json"


class FormatError(Exception):
    """Corrupt, truncated, or incompatible on-disk data."""


@dataclass(frozen=True)
class DatasetManifest:
    geometry: dict
    phantom: dict | None = None
    noise: dict | None = None
    seed: int | None = None
    format_version: int = FORMAT_VERSION

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "geometry": self.geometry,
            "phantom": self.phantom,
            "noise": self.noise,
            "seed": self.seed,
            "sinogram_file": SINO_FILE,
            "dtype": "float32-le",
            "order": "[angle][row][col]",
        }


def _geometry_to_dict(g: Geometry) -> dict:
    return {
        "n_angles": g.n_angles,
        "det_rows": g.det_rows,
        "det_cols": g.det_cols,
        "pixel_size": g.pixel_size,
        "cor_shift": g.cor_shift,
    }


def _geometry_from_dict(d: dict) -> Geometry:
    from .geometry import make_parallel_geometry

    return make_parallel_geometry(
        n_angles=int(d["n_angles"]),
        det_rows=int(d["det_rows"]),
        det_cols=int(d["det_cols"]),
        cor_shift=float(d.get("cor_shift", 0.0)),
        pixel_size=float(d.get("pixel_size", 1.0)),
    )


def save_dataset(
    path,
    s: Sinogram,
    phantom: dict | None = None,
    noise: dict | None = None,
    seed: int | None = None,
) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = DatasetManifest(
        geometry=_geometry_to_dict(s.geometry),
        phantom=phantom,
        noise=noise,
        seed=seed,
    )
    data = np.ascontiguousarray(s.data, dtype="<f4")
    (path / SINO_FILE).write_bytes(data.tobytes())
    (path / MANIFEST_FILE).write_text(json.dumps(manifest.to_dict(), indent=2))


def load_dataset(path) -> tuple[Sinogram, DatasetManifest]:
    path = Path(path)
    try:
        raw = json.loads((path / MANIFEST_FILE).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read manifest in {path}: {exc}") from exc
    if raw.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported dataset format version {raw.get('format_version')}")
    g = _geometry_from_dict(raw["geometry"])
    expected = g.n_angles * g.det_rows * g.det_cols * 4
    blob = (path / raw.get("sinogram_file", SINO_FILE)).read_bytes()
    if len(blob) != expected:
        raise FormatError(
            f"sinogram file has {len(blob)} bytes, geometry requires {expected}"
        )
    data = np.frombuffer(blob, dtype="<f4").reshape(
        g.n_angles, g.det_rows, g.det_cols
    )
    manifest = DatasetManifest(
        geometry=raw["geometry"],
        phantom=raw.get("phantom"),
        noise=raw.get("noise"),
        seed=raw.get("seed"),
    )
    return Sinogram(geometry=g, data=data), manifest


def phantom_from_manifest(manifest: DatasetManifest) -> FoamPhantom | None:
    """Regenerate the synthetic phantom recorded in a manifest."""
    spec = manifest.phantom
    if spec is None:
        return None
    p = generate_foam(
        n_balls=int(spec["n_balls"]),
        seed=int(spec["seed"]),
        radius_range=tuple(spec["radius_range"]),
        cylinder_radius=float(spec["cylinder_radius"]),
        cylinder_half_height=float(spec["cylinder_half_height"]),
    )
    from dataclasses import replace

    return replace(p, density=float(spec["density"]))


MODEL_VERSION = 1


def save_model(path, model: N2FModel) -> None:
    record = {
        "format_version": MODEL_VERSION,
        "basis": {
            "half_width": model.basis.half_width,
            "knots": model.basis.knots.tolist(),
        },
        "params": {
            "hidden_weights": model.params.hidden_weights.tolist(),
            "hidden_biases": model.params.hidden_biases.tolist(),
            "output_weights": model.params.output_weights.tolist(),
            "output_bias": model.params.output_bias,
        },
        "scaling": {
            "in_scale": model.scaling.in_scale,
            "in_offset": model.scaling.in_offset,
            "out_scale": model.scaling.out_scale,
            "out_offset": model.scaling.out_offset,
        },
        "strategy": model.strategy,
        "n_splits": model.n_splits,
        "geometry_fingerprint": model.geometry_fingerprint,
        "metadata": model.metadata,
    }
    Path(path).write_text(json.dumps(record, indent=2))


def load_model(path) -> N2FModel:
    try:
        record = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read model file {path}: {exc}") from exc
    if record.get("format_version") != MODEL_VERSION:
        raise FormatError(f"unsupported model format version {record.get('format_version')}")
    basis = ExpBinBasis(
        half_width=int(record["basis"]["half_width"]),
        knots=np.asarray(record["basis"]["knots"]),
    )
    p = record["params"]
    params = MLPParams(
        hidden_weights=np.asarray(p["hidden_weights"]),
        hidden_biases=np.asarray(p["hidden_biases"]),
        output_weights=np.asarray(p["output_weights"]),
        output_bias=float(p["output_bias"]),
    )
    sc = record["scaling"]
    scaling = ScalingRecord(
        in_scale=float(sc["in_scale"]),
        in_offset=float(sc["in_offset"]),
        out_scale=float(sc["out_scale"]),
        out_offset=float(sc["out_offset"]),
    )

    class _FP:
        def fingerprint(self):
            return record["geometry_fingerprint"]

    model = _finalize_model(
        params,
        scaling,
        basis,
        _FP(),
        record["strategy"],
        int(record["n_splits"]),
        None,
        record.get("metadata", {}),
    )
    return model


def save_slice_image(path, data: np.ndarray, window=None, fmt: str = "png"):
    """16-bit image export plus raw float dump and window sidecar.

    ``path`` is the stem; writes ``<path>.png`` (or ``.pgm``),
    ``<path>.raw`` and ``<path>.json``.
    """
    path = Path(path)
    data = np.asarray(data, dtype=np.float64)
    lo, hi = (float(np.min(data)), float(np.max(data))) if window is None else window
    span = hi - lo if hi > lo else 1.0
    scaled = np.clip((data - lo) / span, 0.0, 1.0)
    img16 = (scaled * 65535).astype(np.uint16)

    if fmt == "png":
        from PIL import Image

        Image.fromarray(img16).save(path.with_suffix(".png"))
        img_file = path.with_suffix(".png").name
    elif fmt == "pgm":
        header = f"P5\n{data.shape[1]} {data.shape[0]}\n65535\n".encode()
        path.with_suffix(".pgm").write_bytes(header + img16.astype(">u2").tobytes())
        img_file = path.with_suffix(".pgm").name
    else:
        raise ValueError("fmt must be 'png' or 'pgm'")

    path.with_suffix(".raw").write_bytes(
        np.ascontiguousarray(data, dtype="<f4").tobytes()
    )
    path.with_suffix(".json").write_text(
        json.dumps(
            {
                "image": img_file,
                "raw": path.with_suffix(".raw").name,
                "shape": list(data.shape),
                "window": [lo, hi],
                "min": float(np.min(data)),
                "max": float(np.max(data)),
            },
            indent=2,
        )
    )
