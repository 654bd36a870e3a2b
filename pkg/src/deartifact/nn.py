"""Residual post-processing network: forward pass, weights, initialization.

Images are numpy arrays of shape (channels, height, width); weights live in
small dataclasses so they can be serialized field by field.  Everything runs
on the CPU in float32 by default, but all operations follow the dtype of
their input so tests can re-run the same math in float64.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatchError

SELU_LAMBDA = 1.0507009873554805
SELU_ALPHA = 1.6732632423543772


@dataclass
class NetworkConfig:
    """Architecture hyperparameters: depth, width, kernel, residual scales."""

    blocks: int = 32
    feature_maps: int = 96
    kernel: int = 3
    block_scale: float = 0.1
    global_scale: float = 0.1

    def __post_init__(self):
        if self.blocks < 1:
            raise ValueError(f"blocks must be >= 1, got {self.blocks}")
        if self.feature_maps < 1:
            raise ValueError(f"feature_maps must be >= 1, got {self.feature_maps}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError(f"kernel must be odd and positive, got {self.kernel}")


@dataclass
class ConvWeights:
    """One convolution layer: weight[out][in][ky][kx] and per-out-channel bias."""

    weight: np.ndarray
    bias: np.ndarray

    @property
    def out_channels(self):
        return self.weight.shape[0]

    @property
    def in_channels(self):
        return self.weight.shape[1]

    @property
    def kernel(self):
        return self.weight.shape[2]


@dataclass
class ResidualBlockWeights:
    conv1: ConvWeights
    conv2: ConvWeights


@dataclass
class ModelWeights:
    """Full ordered weight set: head, B residual blocks, tail, output conv."""

    config: NetworkConfig
    head: ConvWeights
    blocks: list
    tail: ConvWeights
    output: ConvWeights
    channel_means: np.ndarray = field(default_factory=lambda: np.zeros(3, np.float32))


def conv_layers(m):
    """All conv layers in serialization order: head, blocks, tail, output."""
    yield m.head
    for b in m.blocks:
        yield b.conv1
        yield b.conv2
    yield m.tail
    yield m.output


def iter_params(m):
    """Flat iteration over every parameter array (weight then bias per layer)."""
    for layer in conv_layers(m):
        yield layer.weight
        yield layer.bias


def parameter_count(cfg):
    """Exact scalar-parameter count of the assembled network."""
    n, k, b = cfg.feature_maps, cfg.kernel, cfg.blocks
    k2 = k * k
    head = 3 * n * k2 + n
    block = 2 * (n * n * k2 + n)
    tail = n * n * k2 + n
    out = 3 * n * k2 + 3
    return head + b * block + tail + out


def conv_layer_count(cfg):
    """Number of conv layers on the input-to-output path: 2B + 3."""
    return 2 * cfg.blocks + 3


def conv2d(x, w, exact=False):
    """Same-size zero-padded convolution, stride 1.

    `exact=True` uses a fixed per-pixel accumulation order (ky, kx, in-channel)
    so tiled and whole-image runs can be compared bit for bit; the default path
    contracts in-channels with einsum per kernel tap, which is much faster.
    """
    if x.ndim != 3:
        raise ShapeMismatchError(f"expected (C,H,W) input, got shape {x.shape}")
    if x.shape[0] != w.in_channels:
        raise ShapeMismatchError(
            f"input has {x.shape[0]} channels, conv expects {w.in_channels}"
        )
    return _conv_forward(x[None], w, exact)[0]


def _conv_forward(x, w, exact=False):
    """Batched conv core on (B, C, H, W); dtype follows the input."""
    batch, _, height, width = x.shape
    k = w.kernel
    pad = (k - 1) // 2
    dtype = x.dtype
    weight = w.weight.astype(dtype, copy=False)
    bias = w.bias.astype(dtype, copy=False)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out = np.empty((batch, w.out_channels, height, width), dtype)
    out[:] = bias[None, :, None, None]
    if exact:
        for ky in range(k):
            for kx in range(k):
                win = xp[:, :, ky:ky + height, kx:kx + width]
                for ci in range(w.in_channels):
                    out += weight[:, ci, ky, kx][None, :, None, None] * win[:, ci:ci + 1]
    else:
        for ky in range(k):
            for kx in range(k):
                win = xp[:, :, ky:ky + height, kx:kx + width]
                out += np.einsum("oi,bihw->bohw", weight[:, :, ky, kx], win)
    return out


def _im2col(x, k, pad):
    """Column matrix (B*H*W, Ci*k*k) of all kernel windows of the padded input."""
    from numpy.lib.stride_tricks import sliding_window_view

    batch, ci, height, width = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(xp, (k, k), axis=(2, 3))  # B,Ci,H,W,k,k
    col = win.transpose(0, 2, 3, 1, 4, 5).reshape(batch * height * width, ci * k * k)
    return np.ascontiguousarray(col)


def _conv_forward_gemm(x, w):
    """GEMM-based batched conv for the training path (faster, shape-dependent
    float summation order, so inference sticks to _conv_forward)."""
    batch, _, height, width = x.shape
    k = w.kernel
    dtype = x.dtype
    weight = w.weight.astype(dtype, copy=False)
    bias = w.bias.astype(dtype, copy=False)
    col = _im2col(x, k, (k - 1) // 2)
    out = col @ weight.reshape(w.out_channels, -1).T
    out += bias
    return out.reshape(batch, height, width, w.out_channels).transpose(0, 3, 1, 2)


def _conv_backward(x, w, grad_out):
    """Gradients of a conv layer: (d_input, d_weight, d_bias) for batched x."""
    batch, ci, height, width = x.shape
    k = w.kernel
    pad = (k - 1) // 2
    dtype = x.dtype
    weight = w.weight.astype(dtype, copy=False)
    col = _im2col(x, k, pad)
    dy = grad_out.transpose(0, 2, 3, 1).reshape(batch * height * width, w.out_channels)
    d_weight = (dy.T @ col).reshape(weight.shape)
    d_bias = dy.sum(axis=0)
    d_col = (dy @ weight.reshape(w.out_channels, -1)).reshape(
        batch, height, width, ci, k, k
    )
    d_xp = np.zeros((batch, ci, height + 2 * pad, width + 2 * pad), dtype)
    for ky in range(k):
        for kx in range(k):
            d_xp[:, :, ky:ky + height, kx:kx + width] += d_col[
                :, :, :, :, ky, kx
            ].transpose(0, 3, 1, 2)
    if pad:
        d_x = d_xp[:, :, pad:-pad, pad:-pad]
    else:
        d_x = d_xp
    return d_x, d_weight, d_bias


def selu(x):
    """Scaled exponential linear unit, elementwise."""
    out = SELU_LAMBDA * x
    neg = x <= 0
    out[neg] = SELU_LAMBDA * SELU_ALPHA * np.expm1(x[neg])
    return out


def selu_grad(x):
    """Derivative of selu with respect to its input, elementwise."""
    out = np.full_like(x, SELU_LAMBDA)
    neg = x <= 0
    out[neg] = SELU_LAMBDA * SELU_ALPHA * np.exp(x[neg])
    return out


def residual_block_forward(x, block, scale, exact=False):
    """x + scale * conv2(selu(conv1(x))); x itself is left untouched."""
    branch = conv2d(x, block.conv1, exact)
    branch = selu(branch)
    branch = conv2d(branch, block.conv2, exact)
    return x + np.asarray(scale, x.dtype) * branch


def network_forward(img, m, exact=False):
    """Whole-network forward pass with the scaled global input shortcut."""
    if img.shape[0] != 3:
        raise ShapeMismatchError(f"expected 3-channel image, got {img.shape[0]}")
    cfg = m.config
    dtype = img.dtype
    x = img - m.channel_means.astype(dtype, copy=False)[:, None, None]
    h = conv2d(x, m.head, exact)
    z = h
    for b in m.blocks:
        z = residual_block_forward(z, b, cfg.block_scale, exact)
    body = conv2d(z, m.tail, exact) + h
    y = conv2d(body, m.output, exact)
    return img + np.asarray(cfg.global_scale, dtype) * y


def init_weights(cfg, seed=0):
    """He-style fan-in-scaled Gaussian initialization; deterministic per seed."""
    rng = np.random.default_rng(seed)

    def make(out_c, in_c):
        k = cfg.kernel
        std = np.sqrt(2.0 / (in_c * k * k))
        w = rng.normal(0.0, std, size=(out_c, in_c, k, k)).astype(np.float32)
        b = np.zeros(out_c, np.float32)
        return ConvWeights(w, b)

    n = cfg.feature_maps
    head = make(n, 3)
    blocks = [ResidualBlockWeights(make(n, n), make(n, n)) for _ in range(cfg.blocks)]
    tail = make(n, n)
    output = make(3, n)
    return ModelWeights(cfg, head, blocks, tail, output, np.zeros(3, np.float32))


def zeros_like_weights(m):
    """A ModelWeights of all-zero arrays mirroring m's shapes (for gradients)."""
    def z(layer):
        return ConvWeights(np.zeros_like(layer.weight), np.zeros_like(layer.bias))

    return ModelWeights(
        m.config,
        z(m.head),
        [ResidualBlockWeights(z(b.conv1), z(b.conv2)) for b in m.blocks],
        z(m.tail),
        z(m.output),
        np.zeros_like(m.channel_means),
    )


def copy_weights(m):
    """Deep copy of every array in m."""
    def c(layer):
        return ConvWeights(layer.weight.copy(), layer.bias.copy())

    return ModelWeights(
        m.config,
        c(m.head),
        [ResidualBlockWeights(c(b.conv1), c(b.conv2)) for b in m.blocks],
        c(m.tail),
        c(m.output),
        m.channel_means.copy(),
    )


def cast_weights(m, dtype):
    """Copy of m with every array cast to dtype (tests re-run math in float64)."""
    def c(layer):
        return ConvWeights(layer.weight.astype(dtype), layer.bias.astype(dtype))

    return ModelWeights(
        m.config,
        c(m.head),
        [ResidualBlockWeights(c(b.conv1), c(b.conv2)) for b in m.blocks],
        c(m.tail),
        c(m.output),
        m.channel_means.astype(dtype),
    )
