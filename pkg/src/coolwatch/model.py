"""Convolutional autoencoder with an attention gate at the bottleneck.

The encoder stacks two convolution + ReLU + max-pool layers; the decoder
mirrors it with upsample + convolution stages and a linear final layer so
standardized (negative) values remain reconstructible. Between the two, an
optional attention gate rescales each bottleneck time position by its
softmax weight times the bottleneck length, which makes uniform attention
an exact identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericError
from .layers import (
    ConvParams,
    DenseParams,
    ParamStore,
    conv1d_backward,
    conv1d_forward,
    dense_backward,
    dense_forward,
    maxpool_backward,
    maxpool_forward,
    relu,
    relu_backward,
    softmax,
    softmax_backward,
    upsample_backward,
    upsample_forward,
)

ENCODER_DEPTH = 2  # two conv+pool stages, decoder is their mirror


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture description; parameter shapes are derived from it."""

    input_timesteps: int = 24
    input_channels: int = 2
    encoder_filters: tuple[int, int] = (16, 8)
    kernel_width: int = 3
    pool_width: int = 2
    pool_stride: int = 2
    attention_hidden: int = 8
    attention_enabled: bool = True

    def __post_init__(self):
        if self.kernel_width < 1 or self.kernel_width % 2 == 0:
            raise DimensionError("kernel_width must be a positive odd integer")
        if len(self.encoder_filters) != ENCODER_DEPTH:
            raise DimensionError(f"encoder_filters must list {ENCODER_DEPTH} layer widths")
        if min(self.encoder_filters) < 1 or self.input_channels < 1:
            raise DimensionError("channel counts must be positive")
        if self.pool_width != self.pool_stride:
            raise DimensionError(
                "pool_width must equal pool_stride so the decoder mirror "
                "restores the exact input length"
            )
        if self.pool_stride < 1:
            raise DimensionError("pool_stride must be positive")
        factor = self.pool_stride**ENCODER_DEPTH
        if self.input_timesteps < factor or self.input_timesteps % factor != 0:
            raise DimensionError(
                f"input_timesteps ({self.input_timesteps}) must be divisible by "
                f"the squared pool factor ({factor})"
            )
        if self.attention_hidden < 1:
            raise DimensionError("attention_hidden must be positive")

    @property
    def bottleneck_timesteps(self) -> int:
        return self.input_timesteps // self.pool_stride**ENCODER_DEPTH


@dataclass
class AttentionTrace:
    """Per-window attention weights and their pre-softmax scores."""

    weights: np.ndarray  # (batch, bottleneck_timesteps), rows sum to 1
    scores: np.ndarray   # (batch, bottleneck_timesteps)


def _block_rng(seed: int, name: str) -> np.random.Generator:
    """Generator keyed by (seed, block name) so shared blocks draw the same
    values whether or not the attention blocks exist."""
    return np.random.default_rng(np.random.SeedSequence([seed, *name.encode()]))


def _uniform_init(rng, shape, fan_in, fan_out) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(spec: NetworkSpec, seed: int) -> ParamStore:
    """Fresh parameter store with uniform +-sqrt(6/(fan_in+fan_out)) blocks."""
    store = ParamStore()
    k = spec.kernel_width
    f1, f2 = spec.encoder_filters
    conv_shapes = [
        ("enc1", spec.input_channels, f1),
        ("enc2", f1, f2),
        ("dec1", f2, f1),
        ("dec2", f1, spec.input_channels),
    ]
    for name, c_in, c_out in conv_shapes:
        rng = _block_rng(seed, name)
        fan_in, fan_out = k * c_in, k * c_out
        store.add(f"{name}.kernels", _uniform_init(rng, (k, c_in, c_out), fan_in, fan_out))
        store.add(f"{name}.biases", _uniform_init(rng, (c_out,), fan_in, fan_out))
    if spec.attention_enabled:
        h = spec.attention_hidden
        rng = _block_rng(seed, "attn.proj")
        store.add("attn.proj.weights", _uniform_init(rng, (h, f2), f2, h))
        store.add("attn.proj.bias", _uniform_init(rng, (h,), f2, h))
        rng = _block_rng(seed, "attn.score")
        store.add("attn.score.vector", _uniform_init(rng, (h,), h, 1))
    return store


def parameter_count(spec: NetworkSpec) -> int:
    """Total learnable parameter count as a pure function of the spec."""
    k = spec.kernel_width
    f1, f2 = spec.encoder_filters
    c = spec.input_channels
    count = 0
    for c_in, c_out in [(c, f1), (f1, f2), (f2, f1), (f1, c)]:
        count += k * c_in * c_out + c_out
    if spec.attention_enabled:
        count += spec.attention_hidden * f2 + spec.attention_hidden  # projection
        count += spec.attention_hidden  # score vector
    return count


def mae_loss(reconstruction: np.ndarray, target: np.ndarray) -> float:
    """Mean absolute deviation over all entries of two equal-shape arrays."""
    reconstruction = np.asarray(reconstruction, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if reconstruction.shape != target.shape:
        raise DimensionError(
            f"shape mismatch: reconstruction {reconstruction.shape} vs target {target.shape}"
        )
    return float(np.mean(np.abs(reconstruction - target)))


def window_mae(reconstruction: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Per-window mean absolute error for a (batch, time, channels) pair."""
    if reconstruction.shape != target.shape:
        raise DimensionError(
            f"shape mismatch: reconstruction {reconstruction.shape} vs target {target.shape}"
        )
    return np.abs(reconstruction - target).mean(axis=(1, 2))


class Autoencoder:
    """Encoder, attention gate and mirrored decoder over one ParamStore."""

    def __init__(self, spec: NetworkSpec, seed: int = 0, params: ParamStore | None = None):
        self.spec = spec
        self.seed = seed
        self.params = params if params is not None else init_params(spec, seed)
        expected = parameter_count(spec)
        if self.params.total_size != expected:
            raise DimensionError(
                f"parameter store holds {self.params.total_size} values, "
                f"spec requires {expected}"
            )

    # -- parameter block views -------------------------------------------

    def _conv(self, name: str) -> ConvParams:
        return ConvParams(
            kernels=self.params.param(f"{name}.kernels"),
            biases=self.params.param(f"{name}.biases"),
            kernels_grad=self.params.grad(f"{name}.kernels"),
            biases_grad=self.params.grad(f"{name}.biases"),
        )

    def _attn_proj(self) -> DenseParams:
        return DenseParams(
            weights=self.params.param("attn.proj.weights"),
            bias=self.params.param("attn.proj.bias"),
            weights_grad=self.params.grad("attn.proj.weights"),
            bias_grad=self.params.grad("attn.proj.bias"),
        )

    # -- forward ------------------------------------------------------------

    def _check_window_dims(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 3:
            raise DimensionError("expected a (batch, time, channels) array")
        if batch.shape[1] != self.spec.input_timesteps:
            raise DimensionError(
                f"window length {batch.shape[1]} does not match the network's "
                f"{self.spec.input_timesteps}",
                axis="time",
            )
        if batch.shape[2] != self.spec.input_channels:
            raise DimensionError(
                f"window has {batch.shape[2]} channels, network expects "
                f"{self.spec.input_channels}",
                axis="channel",
            )
        return batch

    def _require_finite(self, array: np.ndarray, stage: str) -> None:
        if not np.all(np.isfinite(array)):
            raise NumericError(f"non-finite values produced at stage '{stage}'")

    def _encode_cached(self, batch: np.ndarray, cache: dict) -> np.ndarray:
        w, s = self.spec.pool_width, self.spec.pool_stride
        cache["x0"] = batch
        cache["z1"] = conv1d_forward(batch, self._conv("enc1"))
        a1 = relu(cache["z1"])
        p1, cache["idx1"] = maxpool_forward(a1, w, s)
        cache["p1"] = p1
        cache["z2"] = conv1d_forward(p1, self._conv("enc2"))
        a2 = relu(cache["z2"])
        p2, cache["idx2"] = maxpool_forward(a2, w, s)
        cache["p2"] = p2
        self._require_finite(p2, "encoder")
        return p2

    def _attend_cached(self, bottleneck: np.ndarray, cache: dict) -> tuple[np.ndarray, AttentionTrace]:
        batch, steps, channels = bottleneck.shape
        proj = self._attn_proj()
        flat = bottleneck.reshape(batch * steps, channels)
        pre = dense_forward(flat, proj).reshape(batch, steps, -1)
        hidden = np.tanh(pre)
        scores = hidden @ self.params.param("attn.score.vector")  # (batch, steps)
        weights = softmax(scores, axis=1)
        gated = bottleneck * (weights * steps)[:, :, None]
        cache.update(attn_flat=flat, attn_hidden=hidden, attn_weights=weights)
        self._require_finite(gated, "attention")
        return gated, AttentionTrace(weights=weights, scores=scores)

    def _decode_cached(self, gated: np.ndarray, cache: dict) -> np.ndarray:
        s = self.spec.pool_stride
        cache["u1"] = upsample_forward(gated, s)
        cache["z3"] = conv1d_forward(cache["u1"], self._conv("dec1"))
        a3 = relu(cache["z3"])
        cache["u2"] = upsample_forward(a3, s)
        recon = conv1d_forward(cache["u2"], self._conv("dec2"))  # final layer linear
        self._require_finite(recon, "decoder")
        return recon

    def encode(self, batch: np.ndarray) -> np.ndarray:
        """Map windows to the (batch, T/4, filters[1]) bottleneck."""
        return self._encode_cached(self._check_window_dims(batch), {})

    def attend(self, bottleneck: np.ndarray) -> tuple[np.ndarray, AttentionTrace]:
        """Rescale bottleneck positions by softmax weight times length."""
        bottleneck = np.asarray(bottleneck, dtype=np.float64)
        if bottleneck.shape[1:] != (self.spec.bottleneck_timesteps, self.spec.encoder_filters[1]):
            raise DimensionError(
                f"bottleneck shape {bottleneck.shape[1:]} does not match spec "
                f"({self.spec.bottleneck_timesteps}, {self.spec.encoder_filters[1]})"
            )
        if not self.spec.attention_enabled:
            raise DimensionError("attention is disabled in this network spec")
        return self._attend_cached(bottleneck, {})

    def decode(self, gated: np.ndarray) -> np.ndarray:
        """Reconstruct windows from a (batch, T/4, filters[1]) feature map."""
        gated = np.asarray(gated, dtype=np.float64)
        if gated.shape[1:] != (self.spec.bottleneck_timesteps, self.spec.encoder_filters[1]):
            raise DimensionError(
                f"decoder input shape {gated.shape[1:]} does not match the bottleneck"
            )
        return self._decode_cached(gated, {})

    def _forward(self, batch: np.ndarray, cache: dict) -> np.ndarray:
        bottleneck = self._encode_cached(batch, cache)
        if self.spec.attention_enabled:
            gated, trace = self._attend_cached(bottleneck, cache)
            cache["trace"] = trace
        else:
            gated = bottleneck
        return self._decode_cached(gated, cache)

    def reconstruct(self, batch: np.ndarray) -> np.ndarray:
        """Full forward pass without touching gradients."""
        return self._forward(self._check_window_dims(batch), {})

    def window_errors(self, batch: np.ndarray) -> np.ndarray:
        """Per-window reconstruction MAE."""
        batch = self._check_window_dims(batch)
        return window_mae(self.reconstruct(batch), batch)

    def attention_trace(self, batch: np.ndarray) -> AttentionTrace:
        cache: dict = {}
        self._forward(self._check_window_dims(batch), cache)
        return cache["trace"]

    # -- backward ---------------------------------------------------------

    def _attend_backward(self, cache: dict, upstream: np.ndarray) -> np.ndarray:
        bottleneck = cache["p2"]
        batch, steps, channels = bottleneck.shape
        weights = cache["attn_weights"]
        hidden = cache["attn_hidden"]
        vector = self.params.param("attn.score.vector")

        d_weights = (upstream * bottleneck).sum(axis=2) * steps
        d_bottleneck = upstream * (weights * steps)[:, :, None]
        d_scores = softmax_backward(weights, d_weights, axis=1)
        self.params.grad("attn.score.vector")[...] += np.einsum("bt,bth->h", d_scores, hidden)
        d_hidden = d_scores[:, :, None] * vector
        d_pre = d_hidden * (1.0 - hidden**2)
        d_flat = dense_backward(
            cache["attn_flat"], self._attn_proj(), d_pre.reshape(batch * steps, -1)
        )
        return d_bottleneck + d_flat.reshape(batch, steps, channels)

    def forward_backward(
        self, batch: np.ndarray, target: np.ndarray | None = None
    ) -> tuple[float, np.ndarray]:
        """Compute batch MAE and populate gradients for every parameter.

        Returns (loss, per-window errors). ``target`` defaults to the input
        batch, the usual reconstruction objective. Gradient slots are reset
        before the backward pass, so they hold exactly this batch's
        gradients afterwards.
        """
        batch = self._check_window_dims(batch)
        target = batch if target is None else self._check_window_dims(target)
        cache: dict = {}
        recon = self._forward(batch, cache)
        per_window = window_mae(recon, target)
        loss = float(per_window.mean())
        if not np.isfinite(loss):
            raise NumericError("non-finite loss at stage 'loss'")

        self.params.zero_grads()
        s = self.spec.pool_stride
        grad = np.sign(recon - target) / recon.size  # MAE subgradient, 0 at ties
        grad = conv1d_backward(cache["u2"], self._conv("dec2"), grad)
        grad = upsample_backward(grad, s)
        grad = relu_backward(cache["z3"], grad)
        grad = conv1d_backward(cache["u1"], self._conv("dec1"), grad)
        grad = upsample_backward(grad, s)
        if self.spec.attention_enabled:
            grad = self._attend_backward(cache, grad)
        grad = maxpool_backward(cache["idx2"], grad)
        grad = relu_backward(cache["z2"], grad)
        grad = conv1d_backward(cache["p1"], self._conv("enc2"), grad)
        grad = maxpool_backward(cache["idx1"], grad)
        grad = relu_backward(cache["z1"], grad)
        conv1d_backward(cache["x0"], self._conv("enc1"), grad)
        return loss, per_window
