"""Raster-image preprocessing: letterbox resize and the augmentation set.

Images are 8-bit gray or RGB buffers; files are binary PGM (P5) / PPM (P6)
with maxval 255.  Resizing preserves aspect ratio and letterboxes onto a
square canvas of a configurable pad color.  Augmentation composes, in fixed
order, horizontal flip, rotation within +/-45 degrees, contrast adjustment in
[0.7, 1.3] around the per-channel mean, and Gaussian blur, with every
parameter drawn from a seeded generator so results reproduce exactly.

All interpolation is bilinear.  Intermediate arithmetic runs in float64 and
rounds half-up once at the end, which makes the nominal identities (flip twice,
rotate 0, contrast 1.0 on integer pixels, blur 0) exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, ValidationError

ROTATION_LIMIT_DEGREES = 45.0
CONTRAST_LIMITS = (0.7, 1.3)
DEFAULT_PAD_RGB = (128, 128, 128)


@dataclass(frozen=True)
class RasterImage:
    """An 8-bit image: (height, width, channels) with channels 1 or 3."""

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=np.uint8)
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise ValidationError(
                f"image data must be (h, w, 1|3) uint8, got shape {data.shape}"
            )
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValidationError("image dimensions must be positive")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @classmethod
    def from_flat(cls, width: int, height: int, channels: int, pixels) -> "RasterImage":
        buf = np.frombuffer(bytes(pixels), dtype=np.uint8)
        if buf.size != width * height * channels:
            raise ValidationError(
                f"pixel buffer has {buf.size} bytes, expected {width * height * channels}"
            )
        return cls(buf.reshape(height, width, channels))

    def flat_pixels(self) -> bytes:
        return self.data.tobytes()


def _pad_vector(channels: int, pad_rgb) -> np.ndarray:
    pad = tuple(int(v) for v in pad_rgb)
    if len(pad) != 3 or any(not 0 <= v <= 255 for v in pad):
        raise ConfigError(f"pad color must be three bytes, got {pad_rgb!r}")
    if channels == 1:
        return np.array([pad[0]], dtype=np.float64)
    return np.array(pad, dtype=np.float64)


def _to_uint8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(values + 0.5), 0.0, 255.0).astype(np.uint8)


def _resize_bilinear(data: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = data.shape[:2]
    f = data.astype(np.float64)
    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    rows = f[y0] * (1.0 - fy) + f[y1] * fy
    return rows[:, x0] * (1.0 - fx) + rows[:, x1] * fx


def resize_pad(img: RasterImage, size: int, pad_rgb=DEFAULT_PAD_RGB) -> RasterImage:
    """Scale so the longer side equals ``size``, then center on a padded square.

    When the padding is odd, the extra row/column goes to the bottom/right.
    """
    if size < 1:
        raise ConfigError("target size must be >= 1")
    factor = size / max(img.width, img.height)
    new_w = max(1, int(math.floor(img.width * factor + 0.5)))
    new_h = max(1, int(math.floor(img.height * factor + 0.5)))
    scaled = _to_uint8(_resize_bilinear(img.data, new_h, new_w))
    pad = _pad_vector(img.channels, pad_rgb).astype(np.uint8)
    canvas = np.empty((size, size, img.channels), dtype=np.uint8)
    canvas[:, :] = pad
    top = (size - new_h) // 2
    left = (size - new_w) // 2
    canvas[top : top + new_h, left : left + new_w] = scaled
    return RasterImage(canvas)


def flip_h(img: RasterImage) -> RasterImage:
    """Horizontal mirror (an involution)."""
    return RasterImage(img.data[:, ::-1])


def rotate(img: RasterImage, degrees: float, pad_rgb=DEFAULT_PAD_RGB) -> RasterImage:
    """Rotate about the image center; dimensions are preserved.

    Destination pixels sample the source bilinearly; taps that fall outside
    the source take the pad color.
    """
    if not -ROTATION_LIMIT_DEGREES <= degrees <= ROTATION_LIMIT_DEGREES:
        raise ConfigError(
            f"rotation must be within +/-{ROTATION_LIMIT_DEGREES} degrees, got {degrees!r}"
        )
    h, w = img.height, img.width
    pad = _pad_vector(img.channels, pad_rgb)
    theta = math.radians(degrees)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    xx, yy = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    dx, dy = xx - cx, yy - cy
    sx = cos_t * dx + sin_t * dy + cx
    sy = -sin_t * dx + cos_t * dy + cy
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    fx = (sx - x0)[:, :, None]
    fy = (sy - y0)[:, :, None]
    f = img.data.astype(np.float64)

    def tap(yi, xi):
        inside = (yi >= 0) & (yi < h) & (xi >= 0) & (xi < w)
        vals = f[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)]
        vals[~inside] = pad
        return vals

    out = (
        tap(y0, x0) * (1.0 - fy) * (1.0 - fx)
        + tap(y0, x0 + 1) * (1.0 - fy) * fx
        + tap(y0 + 1, x0) * fy * (1.0 - fx)
        + tap(y0 + 1, x0 + 1) * fy * fx
    )
    return RasterImage(_to_uint8(out))


def adjust_contrast(img: RasterImage, factor: float) -> RasterImage:
    """Scale deviations from the per-channel mean by ``factor``."""
    lo, hi = CONTRAST_LIMITS
    if not lo <= factor <= hi:
        raise ConfigError(f"contrast factor must be in [{lo}, {hi}], got {factor!r}")
    f = img.data.astype(np.float64)
    mean = f.mean(axis=(0, 1), keepdims=True)
    return RasterImage(_to_uint8(mean + factor * (f - mean)))


def gaussian_blur(img: RasterImage, sigma: float) -> RasterImage:
    """Separable Gaussian blur; kernel radius ceil(3*sigma), edges replicate."""
    if sigma < 0.0:
        raise ConfigError("sigma must be >= 0")
    if sigma == 0.0:
        return img
    radius = int(math.ceil(3.0 * sigma))
    offsets = np.arange(-radius, radius + 1)
    kernel = np.exp(-(offsets.astype(np.float64) ** 2) / (2.0 * sigma * sigma))
    kernel /= kernel.sum()
    f = img.data.astype(np.float64)
    h, w = img.height, img.width
    horiz = np.zeros_like(f)
    cols = np.arange(w)
    for off, k in zip(offsets, kernel):
        horiz += k * f[:, np.clip(cols + off, 0, w - 1)]
    out = np.zeros_like(f)
    rows = np.arange(h)
    for off, k in zip(offsets, kernel):
        out += k * horiz[np.clip(rows + off, 0, h - 1), :]
    return RasterImage(_to_uint8(out))


@dataclass(frozen=True)
class AugmentConfig:
    """Parameter ranges for the augmentation pipeline.

    Ranges must sit inside the hard limits enforced by the individual
    operations (rotation within +/-45, contrast within [0.7, 1.3]).
    """

    flip_prob: float = 0.5
    rotation: tuple[float, float] = (-ROTATION_LIMIT_DEGREES, ROTATION_LIMIT_DEGREES)
    contrast: tuple[float, float] = CONTRAST_LIMITS
    blur_sigma: tuple[float, float] = (0.0, 1.0)
    pad_rgb: tuple[int, int, int] = DEFAULT_PAD_RGB
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ConfigError("flip_prob must be in [0, 1]")
        for name, (lo, hi), (cap_lo, cap_hi) in (
            ("rotation", self.rotation, (-ROTATION_LIMIT_DEGREES, ROTATION_LIMIT_DEGREES)),
            ("contrast", self.contrast, CONTRAST_LIMITS),
        ):
            if lo > hi or lo < cap_lo or hi > cap_hi:
                raise ConfigError(
                    f"{name} range {lo, hi} must lie within [{cap_lo}, {cap_hi}]"
                )
        b_lo, b_hi = self.blur_sigma
        if b_lo > b_hi or b_lo < 0.0:
            raise ConfigError("blur_sigma range must be ordered and nonnegative")
        _pad_vector(3, self.pad_rgb)


def augment(img: RasterImage, config: AugmentConfig, seed: int | None = None) -> RasterImage:
    """Apply flip, rotation, contrast, blur in that fixed order.

    All four parameters are drawn from the generator (in that order) even when
    an operation ends up being the identity, so the random stream does not
    depend on earlier outcomes.  ``seed`` defaults to ``config.seed``.
    """
    rng = np.random.default_rng(config.seed if seed is None else seed)
    do_flip = rng.random() < config.flip_prob
    degrees = float(rng.uniform(*config.rotation))
    factor = float(rng.uniform(*config.contrast))
    sigma = float(rng.uniform(*config.blur_sigma))
    out = img
    if do_flip:
        out = flip_h(out)
    out = rotate(out, degrees, config.pad_rgb)
    out = adjust_contrast(out, factor)
    out = gaussian_blur(out, sigma)
    return out


def read_image(path: str | Path) -> RasterImage:
    """Read a binary PGM (P5) or PPM (P6) file with maxval 255."""
    raw = Path(path).read_bytes()
    pos = 0

    def next_token() -> bytes:
        nonlocal pos
        while pos < len(raw):
            ch = raw[pos : pos + 1]
            if ch == b"#":
                while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                    pos += 1
            elif ch.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated header")
        return raw[start:pos]

    magic = next_token()
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"{path}: unsupported magic {magic!r} (want P5 or P6)")
    channels = 1 if magic == b"P5" else 3
    try:
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError:
        raise FormatError(f"{path}: non-numeric header field") from None
    if maxval != 255:
        raise FormatError(f"{path}: maxval must be 255, got {maxval}")
    pos += 1  # single whitespace byte separates header from raster
    expected = width * height * channels
    pixels = raw[pos : pos + expected]
    if len(pixels) != expected:
        raise FormatError(
            f"{path}: raster has {len(pixels)} bytes, expected {expected}"
        )
    return RasterImage.from_flat(width, height, channels, pixels)


def write_image(img: RasterImage, path: str | Path) -> None:
    """Write canonical binary PGM/PPM: 'P5|P6\\n{w} {h}\\n255\\n' + raster."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    magic = b"P5" if img.channels == 1 else b"P6"
    header = magic + b"\n" + f"{img.width} {img.height}".encode() + b"\n255\n"
    path.write_bytes(header + img.flat_pixels())
