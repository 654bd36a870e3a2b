"""Training loop: MSE loss, backpropagation, Adam, LR schedule, early stopping.

The loop is deterministic per seed: each epoch draws one random crop from
every training image, shuffles them into batches, and takes one Adam step per
batch.  A held-out split of the dataset is scored by PSNR after every epoch;
training stops once that score has not improved for `patience` epochs and the
best-scoring weights are returned.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ShapeMismatchError
from .metrics import psnr
from .nn import (
    _conv_backward,
    _conv_forward_gemm,
    copy_weights,
    init_weights,
    iter_params,
    selu,
    selu_grad,
    zeros_like_weights,
)


@dataclass
class TrainingConfig:
    batch_size: int = 16
    crop: int = 96
    lr0: float = 0.001
    lr_half_period: int = 500
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    patience: int = 50
    seed: int = 0
    max_epochs: int = 1000
    val_fraction: float = 0.1
    codec_quality: float = 40.0
    keep_partial_batch: bool = True

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigurationError("beta1 and beta2 must lie in (0, 1)")
        if self.patience < 1:
            raise ConfigurationError("patience must be >= 1")
        if self.batch_size < 1 or self.crop < 1:
            raise ConfigurationError("batch_size and crop must be >= 1")


@dataclass
class OptimizerState:
    m: list
    v: list
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_weights(cls, weights, cfg=None):
        params = list(iter_params(weights))
        state = cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )
        if cfg is not None:
            state.beta1, state.beta2, state.epsilon = cfg.beta1, cfg.beta2, cfg.epsilon
        return state

    @classmethod
    def for_arrays(cls, params, **kwargs):
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            **kwargs,
        )


@dataclass
class PatchPair:
    degraded: np.ndarray
    target: np.ndarray


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    val_psnr: float


def lr_at(epoch, cfg):
    """lr0 halved at every lr_half_period-th epoch."""
    return cfg.lr0 * 2.0 ** (-(epoch // cfg.lr_half_period))


def mse_loss(pred, target):
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred.astype(np.float64) - target.astype(np.float64)
    return float(np.mean(diff * diff))


def compute_channel_means(images):
    """One mean per channel pooled over every pixel of every image."""
    if not images:
        raise ConfigurationError("cannot compute channel means of an empty dataset")
    channels = images[0].shape[0]
    totals = np.zeros(channels, np.float64)
    count = 0
    for img in images:
        totals += img.reshape(channels, -1).sum(axis=1, dtype=np.float64)
        count += img.shape[1] * img.shape[2]
    return (totals / count).astype(np.float32)


def _pad_to(img, size):
    _, h, w = img.shape
    ph = max(0, size - h)
    pw = max(0, size - w)
    if ph == 0 and pw == 0:
        return img
    return np.pad(img, ((0, 0), (0, ph), (0, pw)), mode="reflect")


def sample_crop(pristine, degraded, size, rng):
    """One aligned random crop; images smaller than `size` are reflect-padded."""
    if pristine.shape != degraded.shape:
        raise ShapeMismatchError("pristine and degraded images differ in shape")
    pristine = _pad_to(pristine, size)
    degraded = _pad_to(degraded, size)
    _, h, w = pristine.shape
    top = int(rng.integers(0, h - size + 1))
    left = int(rng.integers(0, w - size + 1))
    return PatchPair(
        degraded=degraded[:, top:top + size, left:left + size].copy(),
        target=pristine[:, top:top + size, left:left + size].copy(),
    )


def _forward_cached(x, m):
    """Batched forward pass keeping the intermediates backward needs."""
    cfg = m.config
    cache = {"x0": x}
    h = _conv_forward_gemm(x, m.head)
    cache["h"] = h
    z = h
    block_caches = []
    for b in m.blocks:
        a = _conv_forward_gemm(z, b.conv1)
        s = selu(a.copy())
        c = _conv_forward_gemm(s, b.conv2)
        block_caches.append((z, a, s))
        z = z + np.asarray(cfg.block_scale, x.dtype) * c
    cache["blocks"] = block_caches
    cache["z"] = z
    body = _conv_forward_gemm(z, m.tail) + h
    cache["body"] = body
    y = _conv_forward_gemm(body, m.output)
    cache["y"] = y
    return cache


def backward(m, batch):
    """Mean-MSE gradients over a batch of PatchPairs.

    Returns (grads, loss) where grads mirrors the ModelWeights layout.
    """
    if not batch:
        raise ConfigurationError("backward needs a non-empty batch")
    cfg = m.config
    dtype = batch[0].degraded.dtype
    means = m.channel_means.astype(dtype, copy=False)[:, None, None]
    imgs = np.stack([p.degraded for p in batch])
    targets = np.stack([p.target for p in batch])
    x0 = imgs - means[None]
    cache = _forward_cached(x0, m)
    gscale = np.asarray(cfg.global_scale, dtype)
    pred = imgs + gscale * cache["y"]

    grads = zeros_like_weights(m)
    diff = pred - targets
    loss = float(np.mean(diff.astype(np.float64) ** 2))
    d_pred = (2.0 / diff.size) * diff
    d_y = gscale * d_pred

    d_body, gw, gb = _conv_backward(cache["body"], m.output, d_y)
    grads.output.weight += gw
    grads.output.bias += gb

    d_z, gw, gb = _conv_backward(cache["z"], m.tail, d_body)
    grads.tail.weight += gw
    grads.tail.bias += gb
    d_h = d_body.copy()  # body skip

    bscale = np.asarray(cfg.block_scale, dtype)
    for b, gblock, (z_in, a, s) in zip(
        reversed(m.blocks), reversed(grads.blocks), reversed(cache["blocks"])
    ):
        d_c = bscale * d_z
        d_s, gw, gb = _conv_backward(s, b.conv2, d_c)
        gblock.conv2.weight += gw
        gblock.conv2.bias += gb
        d_a = d_s * selu_grad(a)
        d_zin, gw, gb = _conv_backward(z_in, b.conv1, d_a)
        gblock.conv1.weight += gw
        gblock.conv1.bias += gb
        d_z = d_z + d_zin
    d_h += d_z

    _, gw, gb = _conv_backward(cache["x0"], m.head, d_h)
    grads.head.weight += gw
    grads.head.bias += gb
    return grads, loss


def adam_step_arrays(params, grads, state, lr):
    """Bias-corrected Adam update on lists of arrays, in place."""
    state.t += 1
    t = state.t
    b1, b2 = state.beta1, state.beta2
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        p -= lr * m_hat / (np.sqrt(v_hat) + state.epsilon)


def adam_step(weights, grads, state, lr):
    """Adam update applied to every ModelWeights parameter, in place."""
    adam_step_arrays(list(iter_params(weights)), list(iter_params(grads)), state, lr)


def _validation_psnr(weights, pairs):
    """Mean PSNR of the network output over held-out (pristine, degraded) pairs."""
    from .nn import network_forward

    scores = []
    for pristine, degraded in pairs:
        out = network_forward(degraded, weights)
        out = np.clip(out, 0.0, 255.0)
        scores.append(psnr(out, pristine))
    return float(np.mean(scores))


def train(dataset, net_cfg, cfg, codec, initial_weights=None):
    """Train on pristine images degraded once through `codec`.

    Returns (best_weights, history).  `dataset` is a list of (3, H, W) arrays
    with 8-bit-range values; `codec` degrades each image once, up front, at
    cfg.codec_quality.
    """
    if not dataset:
        raise ConfigurationError("empty dataset")
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(dataset))
    n_val = max(1, int(round(cfg.val_fraction * len(dataset)))) if len(dataset) > 1 else 0
    val_idx = set(order[:n_val].tolist())
    train_imgs = [dataset[i] for i in range(len(dataset)) if i not in val_idx]
    val_imgs = [dataset[i] for i in sorted(val_idx)]
    if len(train_imgs) < cfg.batch_size:
        raise ConfigurationError(
            f"{len(train_imgs)} training images cannot fill a batch of {cfg.batch_size}"
        )

    degraded_train = [codec.decode(codec.encode(im, cfg.codec_quality)) for im in train_imgs]
    val_pairs = [
        (im, codec.decode(codec.encode(im, cfg.codec_quality))) for im in val_imgs
    ]

    weights = initial_weights if initial_weights is not None else init_weights(net_cfg, cfg.seed)
    weights.channel_means = compute_channel_means(dataset)
    state = OptimizerState.for_weights(weights, cfg)

    best_psnr = -np.inf
    best_weights = copy_weights(weights)
    stall = 0
    history = []

    for epoch in range(cfg.max_epochs):
        epoch_rng = np.random.default_rng([cfg.seed, epoch])
        crops = [
            sample_crop(p, d, cfg.crop, epoch_rng)
            for p, d in zip(train_imgs, degraded_train)
        ]
        epoch_rng.shuffle(crops)
        lr = lr_at(epoch, cfg)
        losses = []
        for start in range(0, len(crops), cfg.batch_size):
            batch = crops[start:start + cfg.batch_size]
            if len(batch) < cfg.batch_size and not cfg.keep_partial_batch:
                continue
            grads, loss = backward(weights, batch)
            adam_step(weights, grads, state, lr)
            losses.append(loss)
        val_psnr = _validation_psnr(weights, val_pairs) if val_pairs else float("inf")
        history.append(EpochRecord(epoch, lr, float(np.mean(losses)), val_psnr))
        if val_psnr > best_psnr:
            best_psnr = val_psnr
            best_weights = copy_weights(weights)
            stall = 0
        else:
            stall += 1
            if stall >= cfg.patience:
                break
    return best_weights, history


def write_history(path, history):
    """Line-delimited JSON records: epoch, lr, train_loss, val_psnr."""
    with open(path, "w") as fh:
        for rec in history:
            fh.write(
                json.dumps(
                    {
                        "epoch": rec.epoch,
                        "lr": rec.lr,
                        "train_loss": rec.train_loss,
                        "val_psnr": rec.val_psnr,
                    }
                )
                + "\n"
            )
