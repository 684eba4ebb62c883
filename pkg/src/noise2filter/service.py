"""Real-time slice reconstruction service.

The server holds one noisy dataset plus an optional trained model.  All
serving state (filtered caches, the model) is immutable; swapping in a
newly trained model is a single attribute assignment, so concurrent
slice requests always see one consistent model version.  The center of
rotation is a per-request parameter applied at backprojection time,
which is what makes interactive calibration cheap: the cached filtered
data never changes.

Routes live under ``/v1``; see the individual handlers for the wire
format.
"""

from __future__ import annotations

import io as _io
import threading
import uuid
from collections import OrderedDict

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response
from pydantic import BaseModel, Field

from . import io as nio
from .fbp import FilteredStack, filter_and_cache
from .filters import frequency_scale, gaussian_smooth, ram_lak
from .geometry import SliceOrientation, ortho_slices
from .metrics import data_range, psnr, ssim
from .phantom import voxelize_foam
from .pipeline import (
    build_cache,
    default_volume_shape,
    reconstruct_slice_n2f,
    train_noise2filter,
)
from .projector import sample_volume_on_slice

__all__ = ["create_app"]

METHODS = ("fbp", "fbp_g", "fbp_sc", "n2f")


class OrientationSpec(BaseModel):
    origin: list[float] = Field(default=[0.0, 0.0, 0.0])
    u: list[float]
    v: list[float]
    width: int
    height: int
    pixel_size: float = 1.0


class SliceRequest(BaseModel):
    orientation: OrientationSpec
    method: str = "fbp"
    params: dict = Field(default_factory=dict)
    cor_shift: float = 0.0
    window: list[float] | None = None


class TrainRequest(BaseModel):
    splits: int = 3
    strategy: str = "1x"
    n_train: int = 50_000
    seed: int = 0


def _orientation_from_spec(spec: OrientationSpec) -> SliceOrientation:
    try:
        return SliceOrientation(
            np.asarray(spec.origin, dtype=float),
            np.asarray(spec.u, dtype=float),
            np.asarray(spec.v, dtype=float),
            spec.width,
            spec.height,
            spec.pixel_size,
        )
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=f"bad orientation: {exc}")


class _State:
    """Mutable server state with immutable building blocks."""

    def __init__(self, dataset_path, model_path=None):
        self.sinogram, self.manifest = nio.load_dataset(dataset_path)
        g = self.sinogram.geometry
        self.base_filter = ram_lak(g.det_cols - 1, g.pixel_size)
        self.fbp_cache = filter_and_cache(self.sinogram, [self.base_filter])
        # Small LRU of filtered stacks for the parametrized baselines.
        self._stacks: OrderedDict[tuple, FilteredStack] = OrderedDict()
        self._stacks_lock = threading.Lock()

        # (model, cache) swapped atomically; None means FBP-only mode.
        self.active: tuple | None = None
        if model_path is not None:
            model = nio.load_model(model_path)
            if model.geometry_fingerprint != g.fingerprint():
                raise ValueError("model geometry does not match the dataset")
            self.active = (model, build_cache(model, self.sinogram))

        self.job_lock = threading.Lock()
        self.job: dict | None = None

        self._gt_lock = threading.Lock()
        self._gt_volume = None

    def baseline_stack(self, method: str, param: float) -> FilteredStack:
        key = (method, round(float(param), 9))
        with self._stacks_lock:
            if key in self._stacks:
                self._stacks.move_to_end(key)
                return self._stacks[key]
        f = (
            gaussian_smooth(self.base_filter, param)
            if method == "fbp_g"
            else frequency_scale(self.base_filter, param)
        )
        stack = filter_and_cache(self.sinogram, [f])
        with self._stacks_lock:
            self._stacks[key] = stack
            while len(self._stacks) > 8:
                self._stacks.popitem(last=False)
        return stack

    def ground_truth_volume(self):
        phantom = nio.phantom_from_manifest(self.manifest)
        if phantom is None:
            return None
        with self._gt_lock:
            if self._gt_volume is None:
                shape = default_volume_shape(self.sinogram.geometry)
                self._gt_volume = voxelize_foam(phantom, shape)
            return self._gt_volume


def _reconstruct(state: _State, req: SliceRequest, o: SliceOrientation) -> np.ndarray:
    if req.method == "fbp":
        return state.fbp_cache.slice_recon(0, o, cor_shift=req.cor_shift).data
    if req.method in ("fbp_g", "fbp_sc"):
        name = "sigma" if req.method == "fbp_g" else "f_sc"
        default = 1.5 if req.method == "fbp_g" else 0.5
        param = float(req.params.get(name, default))
        stack = state.baseline_stack(req.method, param)
        return stack.slice_recon(0, o, cor_shift=req.cor_shift).data
    if req.method == "n2f":
        active = state.active
        if active is None:
            raise HTTPException(
                status_code=503, detail="no trained model available yet"
            )
        model, cache = active
        return reconstruct_slice_n2f(model, cache, o, cor_shift=req.cor_shift).data
    raise HTTPException(status_code=400, detail=f"unknown method {req.method!r}")


def _png_bytes(data: np.ndarray, window) -> bytes:
    from PIL import Image

    lo, hi = window
    span = hi - lo if hi > lo else 1.0
    img16 = (np.clip((data - lo) / span, 0.0, 1.0) * 65535).astype(np.uint16)
    buf = _io.BytesIO()
    Image.fromarray(img16).save(buf, format="PNG")
    return buf.getvalue()


def _run_training(state: _State, req: TrainRequest, job: dict):
    try:
        def progress(phase, fraction):
            job["phase"] = phase
            job["progress"] = round(float(fraction), 4)

        model = train_noise2filter(
            state.sinogram,
            n_splits=req.splits,
            strategy=req.strategy,
            n_train=req.n_train,
            seed=req.seed,
            progress_callback=progress,
        )
        job["phase"] = "cache"
        job["progress"] = 0.95
        cache = build_cache(model, state.sinogram)
        state.active = (model, cache)
        job["status"] = "done"
        job["progress"] = 1.0
        job["model"] = model.metadata
    except Exception as exc:
        job["status"] = "failed"
        job["error"] = str(exc)
    finally:
        state.job_lock.release()


def create_app(dataset_path, model_path=None) -> FastAPI:
    state = _State(dataset_path, model_path=model_path)
    app = FastAPI(title="slice reconstruction service", version="1")
    app.state.n2f = state

    @app.get("/v1/info")
    def info():
        g = state.sinogram.geometry
        active = state.active
        return {
            "geometry": g.fingerprint(),
            "cor_shift": g.cor_shift,
            "methods": [
                m for m in METHODS if m != "n2f" or active is not None
            ],
            "model": active[0].metadata if active is not None else None,
            "has_ground_truth": state.manifest.phantom is not None,
            "volume_shape": list(default_volume_shape(g)),
        }

    @app.post("/v1/slice")
    def slice_endpoint(req: SliceRequest, request: Request):
        o = _orientation_from_spec(req.orientation)
        data = np.asarray(_reconstruct(state, req, o), dtype=np.float64)
        lo, hi = float(np.min(data)), float(np.max(data))
        headers = {"X-Min": repr(lo), "X-Max": repr(hi)}

        if "application/octet-stream" in request.headers.get("accept", ""):
            return Response(
                content=np.ascontiguousarray(data, dtype="<f4").tobytes(),
                media_type="application/octet-stream",
                headers=headers,
            )
        window = tuple(req.window) if req.window else (lo, hi)
        return Response(
            content=_png_bytes(data, window),
            media_type="image/png",
            headers=headers,
        )

    @app.post("/v1/train", status_code=202)
    def train_endpoint(req: TrainRequest):
        if not state.job_lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="a training job is running")
        job = {
            "id": uuid.uuid4().hex,
            "status": "running",
            "phase": "queued",
            "progress": 0.0,
        }
        state.job = job
        thread = threading.Thread(
            target=_run_training, args=(state, req, job), daemon=True
        )
        thread.start()
        return {"id": job["id"]}

    @app.get("/v1/train/{job_id}")
    def train_status(job_id: str):
        job = state.job
        if job is None or job["id"] != job_id:
            raise HTTPException(status_code=404, detail="unknown job id")
        return job

    @app.get("/v1/metrics/{slice_spec}")
    def metrics(slice_spec: str, method: str = "fbp", cor_shift: float = 0.0):
        g = state.sinogram.geometry
        shape = default_volume_shape(g)
        named = dict(
            zip(("axial", "frontal", "longitudinal"), ortho_slices(shape, g.pixel_size))
        )
        if slice_spec not in named:
            raise HTTPException(
                status_code=400, detail=f"unknown slice {slice_spec!r}"
            )
        vol = state.ground_truth_volume()
        if vol is None:
            raise HTTPException(
                status_code=404, detail="dataset has no ground-truth phantom"
            )
        o = named[slice_spec]
        ref = sample_volume_on_slice(vol, o).data
        req = SliceRequest(
            orientation=OrientationSpec(
                u=list(o.u_axis), v=list(o.v_axis),
                width=o.width, height=o.height, pixel_size=o.pixel_size,
            ),
            method=method,
            cor_shift=cor_shift,
        )
        rec = _reconstruct(state, req, o)
        rng_value = data_range(ref)
        return {
            "slice": slice_spec,
            "method": method,
            "psnr": psnr(rec, ref, rng_value),
            "ssim": ssim(rec, ref, rng_value),
        }

    return app
