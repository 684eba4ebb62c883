"""Driving the HTTP slice service programmatically.

Builds a small noisy dataset, starts the service in-process, kicks off a
training job through the API, polls it to completion, and then requests
slices from both the plain and the learned reconstruction paths.

The same endpoints are served over the network by::

    n2f serve --dataset <dir> --port 8000

This demo uses the in-process test client so it needs no open port.
"""

import time
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from noise2filter import DeskScale, build_desk_dataset, save_dataset
from noise2filter.service import create_app

OUT = Path(__file__).parent / "service_out"
OUT.mkdir(exist_ok=True)

scale = DeskScale(n=48, n_angles=96, n_balls=200)
print("building dataset ...")
phantom, _, noisy = build_desk_dataset(scale, i0=1000, phantom_seed=0, noise_seed=1)
ds = OUT / "dataset"
save_dataset(
    ds,
    noisy,
    phantom={
        "n_balls": scale.n_balls,
        "seed": 0,
        "radius_range": [0.02 * phantom.cylinder_radius, 0.12 * phantom.cylinder_radius],
        "cylinder_radius": phantom.cylinder_radius,
        "cylinder_half_height": phantom.cylinder_half_height,
        "density": phantom.density,
    },
    noise={"i0": 1000, "seed": 1},
)

client = TestClient(create_app(ds))
info = client.get("/v1/info").json()
print(f"service up: methods {info['methods']}, volume {info['volume_shape']}")

axial = {"origin": [0, 0, 0], "u": [1, 0, 0], "v": [0, 1, 0],
         "width": scale.n, "height": scale.n}

# Plain FBP slice, raw float32 payload.
r = client.post(
    "/v1/slice",
    json={"orientation": axial, "method": "fbp"},
    headers={"accept": "application/octet-stream"},
)
fbp = np.frombuffer(r.content, dtype="<f4").reshape(scale.n, scale.n)
print(f"fbp slice: {fbp.shape}, range [{r.headers['X-Min']}, {r.headers['X-Max']}]")

# Train through the API and poll the job.
job = client.post("/v1/train", json={"splits": 3, "n_train": 20000}).json()
print(f"training job {job['id']} submitted")
while True:
    status = client.get(f"/v1/train/{job['id']}").json()
    print(f"  {status['phase']:8s} {100 * status['progress']:5.1f}%")
    if status["status"] != "running":
        break
    time.sleep(0.5)
assert status["status"] == "done", status

# The learned method is now live; compare quality against ground truth.
for method in ("fbp", "n2f"):
    m = client.get("/v1/metrics/axial", params={"method": method}).json()
    print(f"  {method:4s} PSNR {m['psnr']:6.2f} dB   SSIM {m['ssim']:.3f}")

# PNG rendering with an explicit display window.
r = client.post(
    "/v1/slice",
    json={"orientation": axial, "method": "n2f", "window": [0.0, 1.2 * phantom.density]},
)
(OUT / "learned_axial.png").write_bytes(r.content)
print(f"wrote {OUT / 'learned_axial.png'}")
