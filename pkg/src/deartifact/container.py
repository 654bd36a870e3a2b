"""Container format and base-codec bindings.

A container is one selector byte naming the post-processing network,
followed verbatim by the base codec's payload.  The codec is pluggable:
`ToyCodec` for hermetic use, or `ExternalCodec` which shells out to
configured encoder/decoder command templates (e.g. real BPG tools).
"""

import shlex
import subprocess
import tempfile
from pathlib import Path

import numpy as np

from .errors import CodecError, TruncationError, UnsupportedNetworkError
from .ppm import read_ppm, write_ppm
from .tiling import tiled_forward
from .toycodec import ToyCodec

NETWORK_A = 0x00
NETWORK_B = 0x01
NETWORK_C = 0x02
PASSTHROUGH = 0xFF
VALID_IDS = frozenset({NETWORK_A, NETWORK_B, NETWORK_C, PASSTHROUGH})


def wrap(network_id, payload):
    """Prepend the selector byte; the payload is never inspected or altered."""
    if network_id not in VALID_IDS:
        raise UnsupportedNetworkError(network_id)
    return bytes([network_id]) + bytes(payload)


def unwrap(stream):
    """Split a container into (network_id, payload)."""
    if len(stream) < 1:
        raise TruncationError("empty container stream")
    network_id = stream[0]
    if network_id not in VALID_IDS:
        raise UnsupportedNetworkError(network_id)
    return network_id, bytes(stream[1:])


def quantize_8bit(img):
    """Clamp to [0, 255] and round half away from zero."""
    return np.floor(np.clip(img, 0.0, 255.0) + 0.5).astype(np.float32)


def encode_image(img, quality, network_id, codec):
    """wrap(id, codec.encode(img, quality))."""
    return wrap(network_id, codec.encode(img, quality))


def decode_image(stream, models, codec, grid=(2, 2)):
    """Decode a container: base codec, then the selected network, tiled.

    `models` maps network id bytes to ModelWeights.  The passthrough id skips
    post-processing entirely; otherwise the output is clamped and quantized
    back to 8-bit values.
    """
    network_id, payload = unwrap(stream)
    decoded = codec.decode(payload)
    if network_id == PASSTHROUGH:
        return decoded
    if network_id not in models:
        raise KeyError(f"no model weights available for network id 0x{network_id:02X}")
    restored = tiled_forward(decoded, models[network_id], grid)
    return quantize_8bit(restored)


class ExternalCodec:
    """Base codec bound to external encoder/decoder command templates.

    Templates use {input}, {output} and {quality} placeholders; images are
    exchanged with the tools as binary PPM files unless the template names a
    different extension via encode_input_suffix / decode_output_suffix.
    """

    def __init__(self, encode_cmd, decode_cmd,
                 encode_input_suffix=".ppm", decode_output_suffix=".ppm"):
        self.encode_cmd = encode_cmd
        self.decode_cmd = decode_cmd
        self.encode_input_suffix = encode_input_suffix
        self.decode_output_suffix = decode_output_suffix

    def _run(self, template, **fields):
        cmd = [part.format(**fields) for part in shlex.split(template)]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        if proc.returncode != 0:
            raise CodecError(
                f"codec command {cmd[0]!r} exited {proc.returncode}: "
                f"{proc.stderr.strip() or proc.stdout.strip()}"
            )

    def encode(self, img, quality):
        with tempfile.TemporaryDirectory(prefix="deartifact-enc-") as tmp:
            src = Path(tmp) / f"in{self.encode_input_suffix}"
            dst = Path(tmp) / "out.bin"
            write_ppm(src, img)
            self._run(self.encode_cmd, input=src, output=dst, quality=quality)
            if not dst.exists():
                raise CodecError(f"encoder produced no output file {dst}")
            return dst.read_bytes()

    def decode(self, payload):
        with tempfile.TemporaryDirectory(prefix="deartifact-dec-") as tmp:
            src = Path(tmp) / "in.bin"
            dst = Path(tmp) / f"out{self.decode_output_suffix}"
            src.write_bytes(payload)
            self._run(self.decode_cmd, input=src, output=dst, quality=0)
            if not dst.exists():
                raise CodecError(f"decoder produced no output file {dst}")
            return read_ppm(dst)


def parse_codec_config(text):
    """Parse a TOML-style key/value codec config into a dict.

    Recognized keys: codec ("toy" or "external"), encode_cmd, decode_cmd,
    encode_input_suffix, decode_output_suffix.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"codec config line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        value = value.strip()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        values[key.strip()] = value
    return values


def load_codec(path=None):
    """Build a codec from a config file; no path means the toy codec."""
    if path is None:
        return ToyCodec()
    values = parse_codec_config(Path(path).read_text())
    kind = values.get("codec", "external")
    if kind == "toy":
        return ToyCodec()
    if kind != "external":
        raise ValueError(f"unknown codec kind {kind!r}")
    try:
        encode_cmd = values["encode_cmd"]
        decode_cmd = values["decode_cmd"]
    except KeyError as exc:
        raise ValueError(f"codec config missing required key {exc}") from None
    return ExternalCodec(
        encode_cmd,
        decode_cmd,
        values.get("encode_input_suffix", ".ppm"),
        values.get("decode_output_suffix", ".ppm"),
    )
