"""Rank-3 array layer primitives with hand-derived backward passes.

Feature maps are float64 arrays of shape (batch, time, channels). Every
backward function is the exact adjoint of its forward map; the test suite
checks each one against central finite differences. All operations are
deterministic, so identical inputs produce bit-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .errors import ConsistencyError, DimensionError, NumericError


def require_feature_map(x: np.ndarray, name: str = "input") -> np.ndarray:
    """Validate that ``x`` is a rank-3 (batch, time, channels) array."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise DimensionError(
            f"{name} must have shape (batch, time, channels); got rank {x.ndim}"
        )
    return x


# ---------------------------------------------------------------------------
# Convolution
# ---------------------------------------------------------------------------

@dataclass
class ConvParams:
    """Kernels and per-channel biases of one 1-D convolution, plus grad slots.

    ``kernels`` has shape (kernel_width, in_channels, out_channels) with an
    odd kernel width so zero same-padding preserves the time length.
    """

    kernels: np.ndarray
    biases: np.ndarray
    kernels_grad: np.ndarray = None
    biases_grad: np.ndarray = None

    def __post_init__(self):
        self.kernels = np.asarray(self.kernels, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.kernels.ndim != 3:
            raise DimensionError("kernels must be (width, in_channels, out_channels)")
        if self.kernels.shape[0] % 2 == 0:
            raise DimensionError("kernel width must be odd for same-padding")
        if self.biases.shape != (self.kernels.shape[2],):
            raise DimensionError("biases must be one value per output channel")
        if self.kernels_grad is None:
            self.kernels_grad = np.zeros_like(self.kernels)
        if self.biases_grad is None:
            self.biases_grad = np.zeros_like(self.biases)

    @property
    def width(self) -> int:
        return self.kernels.shape[0]

    @property
    def in_channels(self) -> int:
        return self.kernels.shape[1]

    @property
    def out_channels(self) -> int:
        return self.kernels.shape[2]


def _padded_windows(x: np.ndarray, width: int) -> np.ndarray:
    """Zero same-pad along time and return a (B, T, C, width) sliding view."""
    pad = (width - 1) // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
    return np.lib.stride_tricks.sliding_window_view(xp, width, axis=1)


def conv1d_forward(x: np.ndarray, params: ConvParams, activate: bool = False) -> np.ndarray:
    """Same-padded 1-D convolution over time, optionally followed by ReLU.

    Output position t correlates the kernel with input rows
    t - (width-1)/2 .. t + (width-1)/2, with zeros outside the array.
    """
    x = require_feature_map(x)
    if x.shape[2] != params.in_channels:
        raise DimensionError(
            f"channel axis mismatch: input has {x.shape[2]} channels, "
            f"kernels expect {params.in_channels}",
            axis="channel",
        )
    if x.shape[1] < 1:
        raise DimensionError("time axis must have at least one step", axis="time")
    windows = _padded_windows(x, params.width)  # (B, T, C_in, k)
    out = np.einsum("btik,kio->bto", windows, params.kernels) + params.biases
    if activate:
        out = np.maximum(out, 0.0)
    return out


def conv1d_backward(
    x: np.ndarray, params: ConvParams, upstream: np.ndarray
) -> np.ndarray:
    """Backward of the linear convolution (no activation).

    Accumulates kernel and bias gradients into the params' grad slots and
    returns the gradient with respect to the input. When the forward pass
    applied ReLU, mask the upstream gradient before calling this.
    """
    x = require_feature_map(x)
    upstream = require_feature_map(upstream, "upstream gradient")
    batch, steps, _ = x.shape
    if upstream.shape != (batch, steps, params.out_channels):
        raise DimensionError(
            f"upstream gradient shape {upstream.shape} does not match forward "
            f"output {(batch, steps, params.out_channels)}"
        )
    windows = _padded_windows(x, params.width)
    params.biases_grad += upstream.sum(axis=(0, 1))
    params.kernels_grad += np.einsum("btik,bto->kio", windows, upstream)

    # Scatter each kernel tap's contribution back onto the padded input.
    pad = (params.width - 1) // 2
    dxp = np.zeros((batch, steps + 2 * pad, params.in_channels))
    for k in range(params.width):
        dxp[:, k : k + steps, :] += np.einsum("bto,io->bti", upstream, params.kernels[k])
    return dxp[:, pad : pad + steps, :]


# ---------------------------------------------------------------------------
# ReLU
# ---------------------------------------------------------------------------

def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(pre_activation: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """ReLU adjoint; the subgradient at exactly zero is taken as zero."""
    return upstream * (pre_activation > 0.0)


# ---------------------------------------------------------------------------
# Max pooling
# ---------------------------------------------------------------------------

@dataclass
class PoolIndices:
    """Winning time positions of a pooling pass, kept for the backward pass."""

    indices: np.ndarray  # (B, T_out, C) absolute time index of each maximum
    input_timesteps: int


def maxpool_forward(x: np.ndarray, width: int, stride: int) -> tuple[np.ndarray, PoolIndices]:
    """Max pooling over time; ties go to the lowest time index.

    Output length is floor((T - width) / stride) + 1; a trailing partial
    window is dropped.
    """
    x = require_feature_map(x)
    if width < 1 or stride < 1:
        raise ValueError("pool width and stride must be >= 1")
    batch, steps, channels = x.shape
    if steps < width:
        raise DimensionError(
            f"time axis ({steps}) shorter than pooling window ({width})", axis="time"
        )
    out_steps = (steps - width) // stride + 1
    out = np.empty((batch, out_steps, channels))
    idx = np.empty((batch, out_steps, channels), dtype=np.int64)
    for m in range(out_steps):
        segment = x[:, m * stride : m * stride + width, :]
        local = segment.argmax(axis=1)  # first maximum wins ties
        idx[:, m, :] = m * stride + local
        out[:, m, :] = np.take_along_axis(segment, local[:, None, :], axis=1)[:, 0, :]
    return out, PoolIndices(idx, steps)


def maxpool_backward(pool: PoolIndices, upstream: np.ndarray) -> np.ndarray:
    """Route gradient to each window's argmax position; all others get zero."""
    upstream = require_feature_map(upstream, "upstream gradient")
    if upstream.shape != pool.indices.shape:
        raise DimensionError(
            f"upstream gradient shape {upstream.shape} does not match pooled "
            f"shape {pool.indices.shape}"
        )
    if pool.indices.size and (
        pool.indices.min() < 0 or pool.indices.max() >= pool.input_timesteps
    ):
        raise ConsistencyError("pooling argmax index out of input range")
    batch, out_steps, channels = upstream.shape
    dx = np.zeros((batch, pool.input_timesteps, channels))
    bb = np.arange(batch)[:, None, None]
    cc = np.arange(channels)[None, None, :]
    # add.at accumulates when overlapping windows share a winner
    np.add.at(dx, (bb, pool.indices, cc), upstream)
    return dx


# ---------------------------------------------------------------------------
# Upsampling
# ---------------------------------------------------------------------------

def upsample_forward(x: np.ndarray, factor: int) -> np.ndarray:
    """Nearest-neighbour repetition along time; T -> T * factor."""
    x = require_feature_map(x)
    if factor < 1:
        raise ValueError("upsample factor must be >= 1")
    return np.repeat(x, factor, axis=1)


def upsample_backward(upstream: np.ndarray, factor: int) -> np.ndarray:
    """Adjoint of repetition: sum the gradient over each repeated block."""
    upstream = require_feature_map(upstream, "upstream gradient")
    batch, steps, channels = upstream.shape
    if steps % factor != 0:
        raise DimensionError(
            f"upstream time length {steps} is not a multiple of factor {factor}",
            axis="time",
        )
    return upstream.reshape(batch, steps // factor, factor, channels).sum(axis=2)


# ---------------------------------------------------------------------------
# Dense projection
# ---------------------------------------------------------------------------

@dataclass
class DenseParams:
    """Weights (out, in) and bias (out,) of an affine map, plus grad slots."""

    weights: np.ndarray
    bias: np.ndarray
    weights_grad: np.ndarray = None
    bias_grad: np.ndarray = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2:
            raise DimensionError("dense weights must be (out_features, in_features)")
        if self.bias.shape != (self.weights.shape[0],):
            raise DimensionError("dense bias must be one value per output feature")
        if self.weights_grad is None:
            self.weights_grad = np.zeros_like(self.weights)
        if self.bias_grad is None:
            self.bias_grad = np.zeros_like(self.bias)


def dense_forward(x: np.ndarray, params: DenseParams) -> np.ndarray:
    """Affine map W @ x + b for a single vector or a stack of row vectors."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    rows = x[None, :] if single else x
    if rows.ndim != 2 or rows.shape[1] != params.weights.shape[1]:
        raise DimensionError(
            f"dense input with {rows.shape[-1]} features does not match "
            f"weights expecting {params.weights.shape[1]}",
            axis="feature",
        )
    out = rows @ params.weights.T + params.bias
    return out[0] if single else out


def dense_backward(x: np.ndarray, params: DenseParams, upstream: np.ndarray) -> np.ndarray:
    """Accumulate weight/bias gradients and return the input gradient."""
    x = np.asarray(x, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    single = x.ndim == 1
    rows = x[None, :] if single else x
    up = upstream[None, :] if single else upstream
    if up.shape != (rows.shape[0], params.weights.shape[0]):
        raise DimensionError(
            f"upstream gradient shape {upstream.shape} does not match dense output"
        )
    params.weights_grad += up.T @ rows
    params.bias_grad += up.sum(axis=0)
    dx = up @ params.weights
    return dx[0] if single else dx


# ---------------------------------------------------------------------------
# Softmax
# ---------------------------------------------------------------------------

def softmax(scores: np.ndarray, axis: int = -1) -> np.ndarray:
    """Stable softmax (max-subtracted) along ``axis``."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("softmax requires a non-empty score vector")
    if not np.all(np.isfinite(scores)):
        raise NumericError("softmax scores must be finite")
    shifted = scores - scores.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_backward(weights: np.ndarray, upstream: np.ndarray, axis: int = -1) -> np.ndarray:
    """Adjoint of softmax given its output ``weights``."""
    inner = (weights * upstream).sum(axis=axis, keepdims=True)
    return weights * (upstream - inner)


# ---------------------------------------------------------------------------
# Parameter storage
# ---------------------------------------------------------------------------

class ParamStore:
    """Ordered collection of named float64 parameter arrays with grad slots."""

    def __init__(self):
        self._params: dict[str, np.ndarray] = {}
        self._grads: dict[str, np.ndarray] = {}

    def add(self, name: str, values: np.ndarray) -> np.ndarray:
        if name in self._params:
            raise ValueError(f"duplicate parameter block name '{name}'")
        array = np.array(values, dtype=np.float64)
        self._params[name] = array
        self._grads[name] = np.zeros_like(array)
        return array

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def param(self, name: str) -> np.ndarray:
        return self._params[name]

    def grad(self, name: str) -> np.ndarray:
        return self._grads[name]

    def items(self) -> Iterable[tuple[str, np.ndarray, np.ndarray]]:
        for name, param in self._params.items():
            yield name, param, self._grads[name]

    def zero_grads(self) -> None:
        for grad in self._grads.values():
            grad.fill(0.0)

    @property
    def total_size(self) -> int:
        return sum(p.size for p in self._params.values())

    def snapshot(self) -> dict[str, np.ndarray]:
        """Deep copy of the current parameter values."""
        return {name: param.copy() for name, param in self._params.items()}

    def restore(self, snapshot: dict[str, np.ndarray]) -> None:
        """Copy saved values back into the existing arrays, in place."""
        if set(snapshot) != set(self._params):
            raise ConsistencyError("snapshot does not match the store's block names")
        for name, values in snapshot.items():
            self._params[name][...] = values


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    """Adam moment estimates keyed by parameter-block name."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)


def adam_update(params, state: AdamState) -> None:
    """One bias-corrected Adam step over every (name, param, grad) triple.

    ``params`` must provide ``items()`` yielding those triples and
    ``zero_grads()``; gradients are zeroed after the step. Parameters are
    updated in place in iteration order, so the step is deterministic.
    """
    state.step_count += 1
    t = state.step_count
    for name, param, grad in params.items():
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"non-finite gradient in parameter block '{name}'")
        m = state.first_moment.setdefault(name, np.zeros_like(param))
        v = state.second_moment.setdefault(name, np.zeros_like(param))
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        param -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    params.zero_grads()


# ---------------------------------------------------------------------------
# Finite-difference gradient checking
# ---------------------------------------------------------------------------

@dataclass
class GradientCheckReport:
    max_relative_error: float
    worst_block: str
    worst_index: int
    probes: int
    tolerance: float
    passed: bool


def gradient_check(
    loss_fn: Callable[[], float],
    params,
    probes: int = 100,
    h: float = 1e-5,
    tolerance: float = 1e-4,
    seed: int = 0,
) -> GradientCheckReport:
    """Compare analytic gradients with central finite differences.

    ``loss_fn`` must deterministically recompute the loss from the current
    parameter values and leave fresh analytic gradients in ``params``.
    ``probes`` coordinates are sampled uniformly over all parameters by a
    generator seeded with ``seed``. The relative error denominator is
    floored at 1e-6 so near-zero gradients do not blow up the ratio.
    """
    if h <= 0:
        raise ValueError("finite-difference step h must be positive")
    loss_fn()
    analytic = {name: grad.copy() for name, _, grad in params.items()}
    blocks = [(name, param) for name, param, _ in params.items()]
    sizes = np.array([p.size for _, p in blocks])
    total = int(sizes.sum())
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    rng = np.random.default_rng(seed)
    worst = (0.0, "", -1)
    for _ in range(probes):
        flat = int(rng.integers(total))
        block_id = int(np.searchsorted(offsets, flat, side="right") - 1)
        name, param = blocks[block_id]
        idx = flat - offsets[block_id]
        original = param.flat[idx]
        param.flat[idx] = original + h
        f_plus = loss_fn()
        param.flat[idx] = original - h
        f_minus = loss_fn()
        param.flat[idx] = original
        numeric = (f_plus - f_minus) / (2.0 * h)
        a = analytic[name].flat[idx]
        rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
        if rel > worst[0]:
            worst = (rel, name, idx)
    loss_fn()  # leave gradients consistent with the unperturbed parameters
    return GradientCheckReport(
        max_relative_error=worst[0],
        worst_block=worst[1],
        worst_index=worst[2],
        probes=probes,
        tolerance=tolerance,
        passed=worst[0] < tolerance,
    )
