"""Dense tensor helpers and bit-exact PGM/PPM/WTEN file I/O.

Tensors are plain ``numpy.ndarray`` objects of rank 1-4, stored as float32.
Verification code may pass float64 arrays through every numeric routine; the
routines compute in the dtype they are given.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

WTEN_MAGIC = b"WTEN\x01"
MAX_RANK = 4


class TensorFormatError(ValueError):
    """Raised when a tensor or image file cannot be parsed."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class MalformedHeaderError(TensorFormatError):
    pass


class TruncatedPayloadError(TensorFormatError):
    pass


class UnsupportedMaxvalError(TensorFormatError):
    pass


def as_tensor(data, dtype=np.float32) -> np.ndarray:
    """Validate ``data`` as a rank 1-4 tensor with positive extents."""
    arr = np.asarray(data, dtype=dtype)
    if not 1 <= arr.ndim <= MAX_RANK:
        raise ValueError(f"tensor rank must be 1..{MAX_RANK}, got {arr.ndim}")
    if any(n < 1 for n in arr.shape):
        raise ValueError(f"all tensor extents must be >= 1, got {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """8-bit image, row-major with interleaved channels."""

    width: int
    height: int
    channels: int
    samples: bytes

    def __post_init__(self):
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        if self.width < 1 or self.height < 1:
            raise ValueError("image extents must be >= 1")
        if len(self.samples) != self.width * self.height * self.channels:
            raise ValueError(
                f"sample count {len(self.samples)} != "
                f"{self.width}*{self.height}*{self.channels}"
            )

    def __eq__(self, other):
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.channels == other.channels
            and bytes(self.samples) == bytes(other.samples)
        )

    def to_array(self) -> np.ndarray:
        """Return a uint8 array of shape (H, W, channels)."""
        return np.frombuffer(bytes(self.samples), dtype=np.uint8).reshape(
            self.height, self.width, self.channels
        )

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ImageBuffer":
        arr = np.asarray(arr)
        if arr.dtype != np.uint8:
            raise ValueError(f"expected uint8 samples, got {arr.dtype}")
        if arr.ndim == 2:
            arr = arr[:, :, None]
        h, w, c = arr.shape
        return cls(width=w, height=h, channels=c, samples=arr.tobytes())


# -- netpbm -------------------------------------------------------------------


def _is_space(b: int) -> bool:
    return b in b" \t\r\n\x0b\x0c"


def _read_token(data: bytes, pos: int) -> tuple[bytes, int, int]:
    # skip whitespace and comments
    while pos < len(data):
        if _is_space(data[pos]):
            pos += 1
        elif data[pos] == ord("#"):
            while pos < len(data) and data[pos] not in b"\r\n":
                pos += 1
        else:
            break
    start = pos
    while pos < len(data) and not _is_space(data[pos]) and data[pos] != ord("#"):
        pos += 1
    if start == pos:
        raise MalformedHeaderError("unexpected end of header", start)
    return data[start:pos], start, pos


def decode_netpbm(data: bytes) -> ImageBuffer:
    """Parse binary P5/P6 bytes with maxval 255."""
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise MalformedHeaderError(f"unsupported magic {magic!r}", 0)
    channels = 1 if magic == b"P5" else 3
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        tok, tok_start, pos = _read_token(data, pos)
        if not tok.isdigit():
            raise MalformedHeaderError(f"invalid {name} {tok!r}", tok_start)
        fields.append((int(tok), tok_start))
    (width, w_off), (height, h_off), (maxval, m_off) = fields
    if width < 1:
        raise MalformedHeaderError("width must be >= 1", w_off)
    if height < 1:
        raise MalformedHeaderError("height must be >= 1", h_off)
    if maxval != 255:
        raise UnsupportedMaxvalError(f"unsupported maxval {maxval}", m_off)
    if pos >= len(data) or not _is_space(data[pos]):
        raise MalformedHeaderError("missing whitespace after maxval", pos)
    pos += 1
    n = width * height * channels
    payload = data[pos : pos + n]
    if len(payload) < n:
        raise TruncatedPayloadError(
            f"payload truncated: expected {n} bytes, got {len(payload)}", pos + len(payload)
        )
    return ImageBuffer(width, height, channels, bytes(payload))


def encode_netpbm(buffer: ImageBuffer) -> bytes:
    magic = b"P5" if buffer.channels == 1 else b"P6"
    header = b"%s\n%d %d\n255\n" % (magic, buffer.width, buffer.height)
    return header + bytes(buffer.samples)


def read_image(path: str | os.PathLike) -> ImageBuffer:
    with open(path, "rb") as f:
        return decode_netpbm(f.read())


def write_image(buffer: ImageBuffer, path: str | os.PathLike) -> None:
    with open(path, "wb") as f:
        f.write(encode_netpbm(buffer))


def image_to_tensor(buffer: ImageBuffer, dtype=np.float32) -> np.ndarray:
    """Convert to a channel-planar C x H x W tensor with values sample/255."""
    arr = buffer.to_array().transpose(2, 0, 1)
    return (arr.astype(np.float64) / 255.0).astype(dtype)


def tensor_to_image(t: np.ndarray) -> ImageBuffer:
    """Quantize a C x H x W (or H x W) tensor in [0, 1] to 8 bits, clipping."""
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 2:
        t = t[None]
    if t.ndim != 3 or t.shape[0] not in (1, 3):
        raise ValueError(f"expected 1xHxW or 3xHxW tensor, got shape {t.shape}")
    q = np.floor(np.clip(t, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    return ImageBuffer.from_array(q.transpose(1, 2, 0))


def mask_to_image(mask: np.ndarray) -> ImageBuffer:
    """Encode a boolean H x W mask as a grayscale buffer (255 = set)."""
    return ImageBuffer.from_array(np.where(np.asarray(mask, bool), 255, 0).astype(np.uint8))


def image_to_mask(buffer: ImageBuffer) -> np.ndarray:
    """Decode a mask image; any nonzero sample in any channel counts as set."""
    return buffer.to_array().max(axis=2) > 0


# -- WTEN -----------------------------------------------------------------------


def encode_tensor(t: np.ndarray) -> bytes:
    t = np.asarray(t)
    if not 1 <= t.ndim <= MAX_RANK:
        raise ValueError(f"tensor rank must be 1..{MAX_RANK}, got {t.ndim}")
    head = WTEN_MAGIC + struct.pack("<B", t.ndim) + struct.pack(f"<{t.ndim}I", *t.shape)
    return head + np.ascontiguousarray(t, dtype="<f4").tobytes()


def decode_tensor(data: bytes) -> np.ndarray:
    if data[: len(WTEN_MAGIC)] != WTEN_MAGIC:
        raise MalformedHeaderError("bad WTEN magic", 0)
    pos = len(WTEN_MAGIC)
    if len(data) < pos + 1:
        raise MalformedHeaderError("missing rank byte", pos)
    rank = data[pos]
    if not 1 <= rank <= MAX_RANK:
        raise MalformedHeaderError(f"rank must be 1..{MAX_RANK}, got {rank}", pos)
    pos += 1
    if len(data) < pos + 4 * rank:
        raise MalformedHeaderError("truncated extents", len(data))
    dims = struct.unpack_from(f"<{rank}I", data, pos)
    if any(d < 1 for d in dims):
        raise MalformedHeaderError(f"extents must be >= 1, got {dims}", pos)
    pos += 4 * rank
    expected = 4 * int(np.prod(dims))
    actual = len(data) - pos
    if actual != expected:
        raise TruncatedPayloadError(
            f"payload length mismatch: expected {expected} bytes, got {actual}", pos
        )
    return np.frombuffer(data, dtype="<f4", offset=pos).reshape(dims).astype(np.float32)


def read_tensor(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as f:
        return decode_tensor(f.read())


def write_tensor(t: np.ndarray, path: str | os.PathLike) -> None:
    with open(path, "wb") as f:
        f.write(encode_tensor(t))


def load_any(path: str | os.PathLike) -> np.ndarray:
    """Load a .wten tensor or a PGM/PPM image as a float32 tensor."""
    path = os.fspath(path)
    if path.endswith(".wten"):
        return read_tensor(path)
    return image_to_tensor(read_image(path))
