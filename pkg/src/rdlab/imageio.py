"""8-bit image buffers and PPM/PGM (P6/P5) reading and writing.

PNG is available when Pillow is installed (``pip install artifact[png]``).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

__all__ = ["ImageBuffer", "ImageFormatError", "load_image", "save_image"]


class ImageFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """``samples`` is a uint8 array of shape (height, width, channels)."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim == 2:
            s = s[:, :, None]
        if s.ndim != 3 or s.shape[2] not in (1, 3):
            raise ValueError(f"expected (H, W, 1|3) samples, got shape {s.shape}")
        if s.shape[0] < 1 or s.shape[1] < 1:
            raise ValueError("image must have at least one pixel")
        if s.dtype != np.uint8:
            if s.min() < 0 or s.max() > 255 or not np.all(s == np.round(s)):
                raise ValueError("samples must be integers in [0, 255]")
            s = s.astype(np.uint8)
        object.__setattr__(self, "samples", np.ascontiguousarray(s))

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def channels(self) -> int:
        return self.samples.shape[2]

    def __eq__(self, other):
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return self.samples.shape == other.samples.shape and bool(
            np.array_equal(self.samples, other.samples)
        )


def _read_pnm(data: bytes) -> ImageBuffer:
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError(f"unsupported PNM magic {magic!r}")
    fields = []
    pos = 2
    n = len(data)
    while len(fields) < 3:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated PNM header")
        token = data[start:pos]
        if not token.isdigit():
            raise ImageFormatError(f"malformed PNM header field {token!r}")
        fields.append(int(token))
    if pos >= n or not data[pos : pos + 1].isspace():
        raise ImageFormatError("missing whitespace after PNM header")
    pos += 1
    width, height, maxval = fields
    if maxval != 255:
        raise ImageFormatError(f"unsupported bit depth: maxval {maxval} (only 255)")
    if width < 1 or height < 1:
        raise ImageFormatError(f"invalid dimensions {width}x{height}")
    channels = 3 if magic == b"P6" else 1
    size = width * height * channels
    payload = data[pos : pos + size]
    if len(payload) < size:
        raise ImageFormatError(f"truncated payload: {len(payload)} of {size} bytes")
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    return ImageBuffer(arr.copy())


def load_image(path) -> ImageBuffer:
    path = os.fspath(path)
    with open(path, "rb") as f:
        data = f.read()
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return _read_png(path)
    return _read_pnm(data)


def encode_pnm(img: ImageBuffer) -> bytes:
    magic = b"P6" if img.channels == 3 else b"P5"
    return magic + b"\n%d %d\n255\n" % (img.width, img.height) + img.samples.tobytes()


def save_image(img: ImageBuffer, path) -> None:
    """Write PPM/PGM, or PNG if the path ends in ``.png``."""
    path = os.fspath(path)
    if path.lower().endswith(".png"):
        _write_png(img, path)
        return
    with open(path, "wb") as f:
        f.write(encode_pnm(img))


def _pil():
    try:
        from PIL import Image
    except ImportError as e:  # pragma: no cover - depends on environment
        raise ImageFormatError("PNG support needs Pillow (install the 'png' extra)") from e
    return Image


def _read_png(path) -> ImageBuffer:
    Image = _pil()
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            if im.mode in ("I;16", "I", "F") or "16" in im.mode:
                raise ImageFormatError(f"unsupported bit depth: PNG mode {im.mode}")
            im = im.convert("RGB")
        return ImageBuffer(np.array(im, dtype=np.uint8))


def _write_png(img: ImageBuffer, path) -> None:
    Image = _pil()
    arr = img.samples[:, :, 0] if img.channels == 1 else img.samples
    Image.fromarray(arr).save(path, format="PNG")
