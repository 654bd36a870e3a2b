"""Deterministic 8x8 block-DCT toy codec used as a hermetic base codec.

Per channel, per 8x8 block (edge-padded to a multiple of 8): orthonormal
DCT-II, uniform quantization with step = quality, zigzag scan, zero-run
coding as (run u8, value i16 LE) pairs with a 0xFF end-of-block marker.
Payload header: magic "TOYC", width u32 LE, height u32 LE, step f32 LE.
"""

import struct

import numpy as np
from scipy.fft import dctn, idctn

from .errors import CodecError, TruncationError

MAGIC = b"TOYC"
_HEADER = struct.Struct("<4sIIf")
_BLOCK = 8
_EOB = 0xFF


def _zigzag_order(n=_BLOCK):
    coords = sorted(
        ((y, x) for y in range(n) for x in range(n)),
        key=lambda yx: (yx[0] + yx[1], yx[1] if (yx[0] + yx[1]) % 2 else yx[0]),
    )
    return np.array([y * n + x for y, x in coords])


_ZIGZAG = _zigzag_order()
_UNZIGZAG = np.argsort(_ZIGZAG)


def _pad_to_blocks(plane):
    h, w = plane.shape
    ph = (-h) % _BLOCK
    pw = (-w) % _BLOCK
    if ph or pw:
        plane = np.pad(plane, ((0, ph), (0, pw)), mode="edge")
    return plane


def _pack_block(q):
    """Zero-run code one quantized 8x8 block given in zigzag order."""
    out = bytearray()
    run = 0
    for v in q:
        if v == 0:
            run += 1
            continue
        out.append(run)
        out += struct.pack("<h", int(v))
        run = 0
    out.append(_EOB)
    return bytes(out)


class ToyCodec:
    """encode(img, quality) -> bytes / decode(bytes) -> (3, H, W) float image."""

    def encode(self, img, quality):
        step = float(quality)
        if step <= 0:
            raise CodecError(f"quantization step must be positive, got {step}")
        channels, height, width = img.shape
        if channels != 3:
            raise CodecError(f"toy codec expects 3 channels, got {channels}")
        parts = [_HEADER.pack(MAGIC, width, height, step)]
        for c in range(channels):
            plane = _pad_to_blocks(img[c].astype(np.float64) - 128.0)
            ph, pw = plane.shape
            for by in range(0, ph, _BLOCK):
                for bx in range(0, pw, _BLOCK):
                    block = plane[by:by + _BLOCK, bx:bx + _BLOCK]
                    coef = dctn(block, norm="ortho")
                    q = np.rint(coef / step).astype(np.int64).ravel()[_ZIGZAG]
                    parts.append(_pack_block(q))
        return b"".join(parts)

    def decode(self, payload):
        if len(payload) < _HEADER.size:
            raise TruncationError("toy codec payload shorter than its header")
        magic, width, height, step = _HEADER.unpack_from(payload)
        if magic != MAGIC:
            raise CodecError(f"bad toy codec magic {magic!r}")
        ph = height + (-height) % _BLOCK
        pw = width + (-width) % _BLOCK
        offset = _HEADER.size
        out = np.empty((3, height, width), np.float32)
        for c in range(3):
            plane = np.empty((ph, pw), np.float64)
            for by in range(0, ph, _BLOCK):
                for bx in range(0, pw, _BLOCK):
                    q, offset = self._unpack_block(payload, offset)
                    coef = (q[_UNZIGZAG] * step).reshape(_BLOCK, _BLOCK)
                    plane[by:by + _BLOCK, bx:bx + _BLOCK] = idctn(coef, norm="ortho")
            restored = np.clip(plane[:height, :width] + 128.0, 0.0, 255.0)
            out[c] = np.floor(restored + 0.5)
        if offset != len(payload):
            raise CodecError(f"{len(payload) - offset} trailing bytes in toy payload")
        return out

    @staticmethod
    def _unpack_block(payload, offset):
        q = np.zeros(_BLOCK * _BLOCK, np.float64)
        pos = 0
        while True:
            if offset >= len(payload):
                raise TruncationError("toy codec payload ended inside a block")
            run = payload[offset]
            offset += 1
            if run == _EOB:
                return q, offset
            pos += run
            if pos >= q.size or offset + 2 > len(payload):
                raise CodecError("corrupt block coding in toy payload")
            (val,) = struct.unpack_from("<h", payload, offset)
            offset += 2
            q[pos] = val
            pos += 1


def roundtrip_error_bound(step):
    """Max abs pixel error of decode(encode(x)) for in-range x.

    Each of the 64 coefficients is off by at most step/2 and the largest
    basis-function magnitude of the orthonormal 2D DCT-II is 1/4, plus 1/2
    for the final rounding to integers.
    """
    return 64 * 0.25 * (step / 2.0) + 0.5
