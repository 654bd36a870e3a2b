"""Binary weights format and the optimizer-state sidecar.

Layout (all little-endian): magic "MVGL", format version u8 = 1, network id
u8, B u16, n u16, k u16, block_scale f32, global_scale f32, three f32 channel
means, then every conv layer in order head, (block1.conv1, block1.conv2, ...,
blockB.conv2), tail, output — weights [out][in][ky][kx] as f32 then biases
as f32.
"""

import struct

import numpy as np

from .errors import TruncationError
from .nn import (
    ConvWeights,
    ModelWeights,
    NetworkConfig,
    ResidualBlockWeights,
    conv_layers,
)

MAGIC = b"MVGL"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sBBHHHfffff")

_F32 = np.dtype("<f4")


def save_weights(path, m, network_id=0):
    with open(path, "wb") as fh:
        fh.write(weights_to_bytes(m, network_id))


def load_weights(path):
    with open(path, "rb") as fh:
        return weights_from_bytes(fh.read())


def weights_to_bytes(m, network_id=0):
    cfg = m.config
    parts = [
        _HEADER.pack(
            MAGIC,
            FORMAT_VERSION,
            network_id,
            cfg.blocks,
            cfg.feature_maps,
            cfg.kernel,
            cfg.block_scale,
            cfg.global_scale,
            *(float(v) for v in m.channel_means),
        )
    ]
    for layer in conv_layers(m):
        parts.append(np.ascontiguousarray(layer.weight, _F32).tobytes())
        parts.append(np.ascontiguousarray(layer.bias, _F32).tobytes())
    return b"".join(parts)


def weights_from_bytes(data):
    """Parse a weights blob; returns (ModelWeights, network_id)."""
    if len(data) < _HEADER.size:
        raise TruncationError("weights blob shorter than the fixed header")
    magic, version, network_id, b, n, k, bscale, gscale, m0, m1, m2 = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported weights format version {version}")
    cfg = NetworkConfig(b, n, k, bscale, gscale)
    offset = _HEADER.size

    def read_f32(count):
        nonlocal offset
        end = offset + 4 * count
        if end > len(data):
            raise TruncationError("weights blob ended inside a parameter array")
        arr = np.frombuffer(data, _F32, count, offset).astype(np.float32)
        offset = end
        return arr

    def read_conv(out_c, in_c):
        w = read_f32(out_c * in_c * k * k).reshape(out_c, in_c, k, k)
        bias = read_f32(out_c)
        return ConvWeights(w, bias)

    head = read_conv(n, 3)
    blocks = [ResidualBlockWeights(read_conv(n, n), read_conv(n, n)) for _ in range(b)]
    tail = read_conv(n, n)
    output = read_conv(3, n)
    if offset != len(data):
        raise ValueError(f"{len(data) - offset} trailing bytes after weights")
    means = np.array([m0, m1, m2], np.float32)
    return ModelWeights(cfg, head, blocks, tail, output, means), network_id


def save_optimizer_state(path, state):
    """Sidecar: all first-moment arrays f32 LE, then second moments, then t u64."""
    with open(path, "wb") as fh:
        for arr in state.m:
            fh.write(np.ascontiguousarray(arr, _F32).tobytes())
        for arr in state.v:
            fh.write(np.ascontiguousarray(arr, _F32).tobytes())
        fh.write(struct.pack("<Q", state.t))


def load_optimizer_state(path, weights, state_cls):
    """Read a sidecar shaped to match `weights`; returns state_cls instance."""
    with open(path, "rb") as fh:
        data = fh.read()
    shapes = [arr.shape for arr in _param_arrays(weights)]
    total = sum(int(np.prod(s)) for s in shapes)
    if len(data) != 2 * 4 * total + 8:
        raise TruncationError("optimizer sidecar size does not match the model")
    offset = 0

    def read_group():
        nonlocal offset
        out = []
        for shape in shapes:
            count = int(np.prod(shape))
            out.append(
                np.frombuffer(data, _F32, count, offset)
                .astype(np.float32)
                .reshape(shape)
            )
            offset += 4 * count
        return out

    m = read_group()
    v = read_group()
    (t,) = struct.unpack_from("<Q", data, offset)
    return state_cls(m=m, v=v, t=t)


def _param_arrays(weights):
    from .nn import iter_params

    return list(iter_params(weights))
