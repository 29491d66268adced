"""Binary netpbm (P6 color / P5 grayscale) reading and mask writing.

Only the binary variants with maxval 255 are handled; ASCII P2/P3 and
16-bit files are rejected up front. Header tokens may be separated by any
whitespace and '#' comments. Pixels are scaled to [0, 1]; masks go out as
P5 with foreground 255 and background 0, so a written mask reads back as
exact ones and zeros.
"""

import numpy as np

from .container import FormatError

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


def _read_tokens(data: bytes, count: int, start: int) -> tuple[list[int], int]:
    """Parse whitespace/comment separated integers from a netpbm header."""
    tokens: list[int] = []
    pos = start
    while len(tokens) < count:
        if pos >= len(data):
            raise FormatError("truncated header", pos)
        c = data[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isdigit():
            end = pos
            while end < len(data) and data[end : end + 1].isdigit():
                end += 1
            tokens.append(int(data[pos:end]))
            pos = end
        else:
            raise FormatError(f"unexpected header byte {c!r}", pos)
    return tokens, pos


def _read_netpbm(path, magic: bytes, channels: int) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if data[:2] in (b"P2", b"P3") and magic in (b"P5", b"P6"):
        raise FormatError(f"ASCII netpbm {data[:2].decode()} is not supported, use binary", 0)
    if data[:2] != magic:
        raise FormatError(f"bad magic {data[:2]!r}, expected {magic!r}", 0)
    (width, height, maxval), pos = _read_tokens(data, 3, 2)
    if maxval != 255:
        raise FormatError(f"maxval {maxval} not supported, expected 255", 2)
    pos += 1  # single whitespace byte before the raster
    need = width * height * channels
    raster = data[pos : pos + need]
    if len(raster) < need:
        raise FormatError(f"truncated raster: expected {need} bytes, got {len(raster)}", pos)
    pixels = np.frombuffer(raster, dtype=np.uint8).astype(np.float32) / 255.0
    if channels == 3:
        return pixels.reshape(1, height, width, 3).transpose(0, 3, 1, 2).copy()
    return pixels.reshape(1, 1, height, width)


def read_ppm(path) -> np.ndarray:
    """Binary P6 color image as a (1, 3, h, w) tensor in [0, 1]."""
    return _read_netpbm(path, b"P6", 3)


def read_pgm(path) -> np.ndarray:
    """Binary P5 grayscale image as a (1, 1, h, w) tensor in [0, 1]."""
    return _read_netpbm(path, b"P5", 1)


def read_image(path) -> np.ndarray:
    """Dispatch on the magic: P6 -> (1, 3, h, w), P5 -> (1, 1, h, w)."""
    with open(path, "rb") as f:
        magic = f.read(2)
    if magic == b"P6":
        return read_ppm(path)
    if magic == b"P5":
        return read_pgm(path)
    raise FormatError(f"unrecognized image magic {magic!r}", 0)


def write_pgm_mask(mask: np.ndarray, path) -> None:
    """Write a binary mask as P5: nonzero -> 255, zero -> 0."""
    mask = np.asarray(mask)
    if mask.ndim == 4:
        if mask.shape[0] != 1 or mask.shape[1] != 1:
            raise ValueError(f"mask must be (1, 1, h, w) or (h, w), got {mask.shape}")
        mask = mask[0, 0]
    if mask.ndim != 2:
        raise ValueError(f"mask must be (1, 1, h, w) or (h, w), got {mask.shape}")
    h, w = mask.shape
    raster = np.where(mask != 0, 255, 0).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(raster.tobytes())


def normalize(x: np.ndarray) -> np.ndarray:
    """Standard per-channel normalization for 3-channel [0, 1] input."""
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 4 or x.shape[1] != 3:
        raise ValueError(f"normalize expects (n, 3, h, w), got {x.shape}")
    mean = np.array(IMAGENET_MEAN, dtype=np.float64)[None, :, None, None]
    std = np.array(IMAGENET_STD, dtype=np.float64)[None, :, None, None]
    return ((x.astype(np.float64) - mean) / std).astype(np.float32)
