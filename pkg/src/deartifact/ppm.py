"""Binary PPM (P6, maxval 255) reading and writing.

Images are (3, H, W) float32 arrays holding 8-bit-range values.  Other
formats (PNG etc.) are read through Pillow when it is installed.
"""

import numpy as np


def _read_token(fh):
    token = b""
    while True:
        ch = fh.read(1)
        if not ch:
            raise ValueError("unexpected end of PPM header")
        if ch.isspace():
            if token:
                return token
            continue
        if ch == b"#":
            while ch not in (b"\n", b""):
                ch = fh.read(1)
            continue
        token += ch


def read_ppm(path):
    with open(path, "rb") as fh:
        if _read_token(fh) != b"P6":
            raise ValueError(f"{path}: not a binary PPM (P6) file")
        width = int(_read_token(fh))
        height = int(_read_token(fh))
        maxval = int(_read_token(fh))
        if maxval != 255:
            raise ValueError(f"{path}: only maxval 255 is supported, got {maxval}")
        raw = fh.read(3 * width * height)
    if len(raw) != 3 * width * height:
        raise ValueError(f"{path}: truncated pixel data")
    pixels = np.frombuffer(raw, np.uint8).reshape(height, width, 3)
    return pixels.transpose(2, 0, 1).astype(np.float32)


def write_ppm(path, img):
    channels, height, width = img.shape
    if channels != 3:
        raise ValueError(f"PPM needs 3 channels, got {channels}")
    data = np.clip(np.floor(np.asarray(img, np.float64) + 0.5), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (width, height))
        fh.write(data.transpose(1, 2, 0).tobytes())


def load_image(path):
    """Read an image file: PPM natively, anything else via Pillow if present."""
    path = str(path)
    if path.lower().endswith(".ppm"):
        return read_ppm(path)
    try:
        from PIL import Image
    except ImportError:
        raise ValueError(
            f"{path}: only .ppm is supported without Pillow installed"
        ) from None
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"))
    return arr.transpose(2, 0, 1).astype(np.float32)
