"""One-hidden-layer perceptron over basis-filtered reconstructions,
Levenberg-Marquardt training, intensity scaling, and learned-filter
extraction.

The network computes, for a vector ``z`` of basis-reconstruction values
at one voxel::

    sigmoid( sum_k a_k * sigmoid( sum_i H[k, i] * z~_i - b_k ) - b0 )

where ``z~`` is the affine input scaling of ``z``.  Because the hidden
weights live in filter space, row ``k`` of ``H`` expands to a dense
filter; reconstructing with those filters and applying the outer
non-linearity pointwise reproduces the network output exactly.  That
equivalence is what makes slice-local inference possible.

Targets are affine-mapped into [0.05, 0.95] (sigmoid output range) using
the training-split min/max; inputs share the same map since inputs and
targets are reconstructions in the same physical units.  The inverse map
is applied at inference.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .filters import ExpBinBasis, Filter, expand_filter

__all__ = [
    "MLPParams",
    "ScalingRecord",
    "TrainingSet",
    "TrainReport",
    "mlp_forward",
    "mlp_forward_batch",
    "train_lma",
    "extract_filters",
    "make_scaling",
]


@dataclass(frozen=True)
class MLPParams:
    hidden_weights: np.ndarray  # (n_hidden, n_basis): binned filters
    hidden_biases: np.ndarray  # (n_hidden,)
    output_weights: np.ndarray  # (n_hidden,)
    output_bias: float

    def __post_init__(self):
        hw = np.asarray(self.hidden_weights, dtype=np.float64)
        hb = np.asarray(self.hidden_biases, dtype=np.float64)
        ow = np.asarray(self.output_weights, dtype=np.float64)
        if hw.ndim != 2 or hw.shape[0] < 1:
            raise ValueError("hidden_weights must be (n_hidden, n_basis)")
        if hb.shape != (hw.shape[0],) or ow.shape != (hw.shape[0],):
            raise ValueError("bias/weight shapes inconsistent with n_hidden")
        for arr in (hw, hb, ow):
            if not np.all(np.isfinite(arr)):
                raise ValueError("parameters must be finite")
            arr.setflags(write=False)
        object.__setattr__(self, "hidden_weights", hw)
        object.__setattr__(self, "hidden_biases", hb)
        object.__setattr__(self, "output_weights", ow)

    @property
    def n_hidden(self) -> int:
        return self.hidden_weights.shape[0]

    @property
    def n_basis(self) -> int:
        return self.hidden_weights.shape[1]

    @property
    def n_free(self) -> int:
        return self.n_hidden * (self.n_basis + 2) + 1


@dataclass(frozen=True)
class ScalingRecord:
    in_scale: float
    in_offset: float
    out_scale: float
    out_offset: float

    def __post_init__(self):
        if self.in_scale == 0 or self.out_scale == 0:
            raise ValueError("scales must be nonzero")

    @classmethod
    def identity(cls) -> "ScalingRecord":
        return cls(1.0, 0.0, 1.0, 0.0)


@dataclass(frozen=True)
class TrainingSet:
    inputs: np.ndarray  # (n_samples, n_basis)
    targets: np.ndarray  # (n_samples,)
    train_idx: np.ndarray
    val_idx: np.ndarray

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.float64)
        if inputs.ndim != 2 or targets.shape != (inputs.shape[0],):
            raise ValueError("inputs must be (n, n_basis) with matching targets")
        ti = np.asarray(self.train_idx, dtype=np.intp)
        vi = np.asarray(self.val_idx, dtype=np.intp)
        if np.intersect1d(ti, vi).size:
            raise ValueError("train and validation splits must be disjoint")
        for arr in (inputs, targets, ti, vi):
            arr.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "train_idx", ti)
        object.__setattr__(self, "val_idx", vi)


@dataclass
class TrainReport:
    train_loss: list = field(default_factory=list)  # MSE after each iteration
    val_loss: list = field(default_factory=list)  # MSE after each iteration
    accepted: list = field(default_factory=list)
    best_val_loss: float = np.inf
    n_iterations: int = 0
    seconds: float = 0.0


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))


def make_scaling(
    train_targets: np.ndarray, lo: float = 0.05, hi: float = 0.95
) -> ScalingRecord:
    """Affine map of the target range onto [lo, hi]; inputs share the map."""
    tmin, tmax = float(np.min(train_targets)), float(np.max(train_targets))
    if tmax <= tmin:
        raise ValueError("degenerate (constant) training targets")
    scale = (hi - lo) / (tmax - tmin)
    offset = lo - scale * tmin
    return ScalingRecord(
        in_scale=scale, in_offset=offset, out_scale=scale, out_offset=offset
    )


def _forward_scaled(p: MLPParams, z_scaled: np.ndarray) -> np.ndarray:
    """Network output in scaled space for scaled inputs (n, n_basis)."""
    hidden = _sigmoid(z_scaled @ p.hidden_weights.T - p.hidden_biases)
    return _sigmoid(hidden @ p.output_weights - p.output_bias)


def mlp_forward_batch(
    p: MLPParams, scale: ScalingRecord, z: np.ndarray
) -> np.ndarray:
    """Physical-units network output for raw inputs of shape (..., n_basis)."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != p.n_basis:
        raise ValueError("input length does not match the filter basis")
    flat = z.reshape(-1, p.n_basis)
    out = _forward_scaled(p, scale.in_scale * flat + scale.in_offset)
    return ((out - scale.out_offset) / scale.out_scale).reshape(z.shape[:-1])


def mlp_forward(p: MLPParams, scale: ScalingRecord, z: np.ndarray) -> float:
    """Network output at a single voxel."""
    return float(mlp_forward_batch(p, scale, np.asarray(z)[None, :])[0])


def _pack(p: MLPParams) -> np.ndarray:
    return np.concatenate(
        [
            p.hidden_weights.ravel(),
            p.hidden_biases,
            p.output_weights,
            [p.output_bias],
        ]
    )


def _unpack(theta: np.ndarray, n_hidden: int, n_basis: int) -> MLPParams:
    nh, ne = n_hidden, n_basis
    return MLPParams(
        hidden_weights=theta[: nh * ne].reshape(nh, ne),
        hidden_biases=theta[nh * ne : nh * ne + nh],
        output_weights=theta[nh * ne + nh : nh * ne + 2 * nh],
        output_bias=float(theta[-1]),
    )


def _residuals_and_jacobian(p: MLPParams, z_scaled, t_scaled):
    """Residuals and analytic Jacobian w.r.t. the packed parameters."""
    u = z_scaled @ p.hidden_weights.T - p.hidden_biases  # (n, nh)
    hidden = _sigmoid(u)
    v = hidden @ p.output_weights - p.output_bias
    out = _sigmoid(v)
    r = out - t_scaled

    dout = out * (1 - out)  # (n,)
    dhid = hidden * (1 - hidden)  # (n, nh)
    chain = dout[:, None] * p.output_weights * dhid  # (n, nh): df/du_k

    n, nh = hidden.shape
    ne = p.n_basis
    jac = np.empty((n, nh * ne + 2 * nh + 1))
    # d/dH[k, i] = chain_k * z_i
    jac[:, : nh * ne] = (chain[:, :, None] * z_scaled[:, None, :]).reshape(n, -1)
    jac[:, nh * ne : nh * ne + nh] = -chain  # d/db_k
    jac[:, nh * ne + nh : nh * ne + 2 * nh] = dout[:, None] * hidden  # d/da_k
    jac[:, -1] = -dout  # d/db0
    return r, jac


def train_lma(
    data: TrainingSet,
    n_hidden: int = 4,
    seed: int = 0,
    lambda0: float = 1e-2,
    max_iterations: int = 200,
    patience: int = 25,
    progress_callback=None,
) -> tuple[MLPParams, ScalingRecord, TrainReport]:
    """Levenberg-Marquardt fit of the network to the training split.

    Damping starts at ``lambda0``, is multiplied by 10 on a rejected step
    and divided by 10 on an accepted one.  Training stops after
    ``patience`` consecutive iterations without validation improvement or
    after ``max_iterations``; the parameters with the best validation
    error are returned.  Deterministic for a fixed seed.
    """
    n_basis = data.inputs.shape[1]
    n_free = n_hidden * (n_basis + 2) + 1
    if len(data.train_idx) < 10 * n_free:
        raise ValueError(
            f"need at least {10 * n_free} training samples for "
            f"{n_free} free parameters"
        )
    t0 = time.perf_counter()

    train_t = data.targets[data.train_idx]
    scale = make_scaling(train_t)
    z_train = scale.in_scale * data.inputs[data.train_idx] + scale.in_offset
    t_train = scale.out_scale * train_t + scale.out_offset
    z_val = scale.in_scale * data.inputs[data.val_idx] + scale.in_offset
    t_val = scale.out_scale * data.targets[data.val_idx] + scale.out_offset

    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(n_basis)
    theta = rng.uniform(-bound, bound, size=n_free)

    lam = lambda0
    report = TrainReport()
    params = _unpack(theta, n_hidden, n_basis)
    r, jac = _residuals_and_jacobian(params, z_train, t_train)
    train_mse = float(np.mean(r**2))
    best_theta = theta.copy()
    no_improve = 0

    for _ in range(max_iterations):
        a = jac.T @ jac
        g = jac.T @ r
        delta = np.linalg.solve(a + lam * np.eye(n_free), -g)
        candidate = theta + delta
        cand_params = _unpack(candidate, n_hidden, n_basis)
        r_new, jac_new = _residuals_and_jacobian(cand_params, z_train, t_train)
        cand_mse = float(np.mean(r_new**2))

        accepted = cand_mse < train_mse
        if accepted:
            theta, params = candidate, cand_params
            r, jac = r_new, jac_new
            train_mse = cand_mse
            lam = max(lam / 10.0, 1e-12)
        else:
            lam = min(lam * 10.0, 1e12)

        val_mse = float(
            np.mean((_forward_scaled(params, z_val) - t_val) ** 2)
        ) if len(t_val) else train_mse

        report.train_loss.append(train_mse)
        report.val_loss.append(val_mse)
        report.accepted.append(accepted)
        report.n_iterations += 1

        if val_mse < report.best_val_loss:
            report.best_val_loss = val_mse
            best_theta = theta.copy()
            no_improve = 0
        else:
            no_improve += 1

        if progress_callback is not None:
            progress_callback(report.n_iterations, max_iterations)
        if no_improve >= patience:
            break

    report.seconds = time.perf_counter() - t0
    return _unpack(best_theta, n_hidden, n_basis), scale, report


def extract_filters(
    p: MLPParams, basis: ExpBinBasis, scale: ScalingRecord
) -> tuple[list[Filter], np.ndarray]:
    """Dense learned filters plus effective hidden biases.

    The input scaling is folded into the filter coefficients and biases,
    so convolving *raw* projection data with filter ``k`` and subtracting
    bias ``k`` reproduces the scaled hidden pre-activation exactly::

        sum_i H[k, i] * z~_i - b_k  ==  FBP(y, filter_k) - bias_k
    """
    if basis.n_elems != p.n_basis:
        raise ValueError("basis size does not match the network input width")
    filters = [
        expand_filter(basis, scale.in_scale * p.hidden_weights[k])
        for k in range(p.n_hidden)
    ]
    biases = p.hidden_biases - scale.in_offset * p.hidden_weights.sum(axis=1)
    return filters, biases
