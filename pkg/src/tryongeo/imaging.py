"""Raster, label-map and mask primitives shared by the whole pipeline.

Images are 8-bit RGB; all arithmetic happens on a float view in [0, 1]
and results are rounded back to 8 bits only when a Raster is materialized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

# Semantic parse labels. External 20-label human parses must be reduced
# to this set before ingestion (see README for a suggested mapping).
LABEL_BACKGROUND = 0
LABEL_HEAD = 1
LABEL_ARMS = 2
LABEL_TORSO_CLOTHES = 3
LABEL_BOTTOM = 4
LABEL_FUSED = 5

VALID_LABELS = frozenset(
    (LABEL_BACKGROUND, LABEL_HEAD, LABEL_ARMS, LABEL_TORSO_CLOTHES, LABEL_BOTTOM, LABEL_FUSED)
)

BODY_PART_LABELS = frozenset((LABEL_HEAD, LABEL_ARMS, LABEL_BOTTOM))


def _check_same_shape(a, b, what: str) -> None:
    if (a.height, a.width) != (b.height, b.width):
        raise ValueError(
            f"{what}: dimension mismatch {a.height}x{a.width} vs {b.height}x{b.width}"
        )


@dataclass(frozen=True)
class Raster:
    """H x W RGB image with 8-bit channels. Treat as immutable."""

    data: np.ndarray  # (H, W, 3) uint8

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.uint8)
        if data.ndim != 3 or data.shape[2] != 3:
            raise ValueError(f"Raster data must be (H, W, 3), got {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError("Raster must be at least 1x1")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 3

    def to_float(self) -> np.ndarray:
        """Float view in [0, 1], shape (H, W, 3)."""
        return self.data.astype(np.float64) / 255.0

    @classmethod
    def from_float(cls, arr: np.ndarray) -> "Raster":
        """Round a float image in [0, 1] to the nearest 8-bit raster."""
        arr = np.clip(np.asarray(arr, dtype=np.float64), 0.0, 1.0)
        return cls(np.rint(arr * 255.0).astype(np.uint8))

    @classmethod
    def load(cls, path) -> "Raster":
        with Image.open(path) as im:
            return cls(np.asarray(im.convert("RGB")))

    def save(self, path) -> None:
        Image.fromarray(self.data, mode="RGB").save(path)


@dataclass(frozen=True)
class LabelMap:
    """H x W semantic parse with values from VALID_LABELS."""

    labels: np.ndarray  # (H, W) uint8

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.uint8)
        if labels.ndim != 2:
            raise ValueError(f"LabelMap must be (H, W), got {labels.shape}")
        bad = set(np.unique(labels)) - VALID_LABELS
        if bad:
            raise ValueError(f"LabelMap contains unknown labels {sorted(bad)}")
        object.__setattr__(self, "labels", labels)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @classmethod
    def load(cls, path) -> "LabelMap":
        with Image.open(path) as im:
            return cls(np.asarray(im.convert("L")))

    def save(self, path) -> None:
        Image.fromarray(self.labels, mode="L").save(path)


@dataclass(frozen=True)
class BinaryMask:
    """H x W {0, 1} mask."""

    bits: np.ndarray  # (H, W) uint8 in {0, 1}

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.dtype == bool:
            bits = bits.astype(np.uint8)
        bits = bits.astype(np.uint8, copy=False)
        if bits.ndim != 2:
            raise ValueError(f"BinaryMask must be (H, W), got {bits.shape}")
        if not np.isin(bits, (0, 1)).all():
            raise ValueError("BinaryMask values must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def as_bool(self) -> np.ndarray:
        return self.bits.astype(bool)

    @classmethod
    def load(cls, path) -> "BinaryMask":
        with Image.open(path) as im:
            raw = np.asarray(im.convert("L"))
        if not np.isin(raw, (0, 255)).all():
            raise ValueError(f"mask PNG {path} must contain only 0 and 255")
        return cls((raw > 0).astype(np.uint8))

    def save(self, path) -> None:
        Image.fromarray(self.bits * np.uint8(255), mode="L").save(path)


@dataclass(frozen=True)
class AlphaMap:
    """H x W blending coefficients in [0, 1]."""

    alpha: np.ndarray  # (H, W) float64

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=np.float64)
        if alpha.ndim != 2:
            raise ValueError(f"AlphaMap must be (H, W), got {alpha.shape}")
        if not (np.isfinite(alpha).all() and (alpha >= 0.0).all() and (alpha <= 1.0).all()):
            raise ValueError("AlphaMap values must lie in [0, 1]")
        object.__setattr__(self, "alpha", alpha)

    @property
    def height(self) -> int:
        return self.alpha.shape[0]

    @property
    def width(self) -> int:
        return self.alpha.shape[1]


def bilinear_sample(img: np.ndarray, x, y) -> np.ndarray:
    """Sample a float image at fractional coordinates with zero padding.

    Interpolates the four pixels around (x, y); neighbors outside
    [0, W-1] x [0, H-1] contribute zero, so samples fade to zero over a
    one-pixel band around the frame and are exactly zero beyond it.

    Args:
        img: (H, W, C) or (H, W) float array.
        x, y: scalars or equally-shaped arrays of coordinates
            (x along width, y along height).

    Returns:
        Sampled values, shape broadcast(x, y).shape + (C,) for channel
        images, broadcast(x, y).shape for single-channel.
    """
    squeeze_channels = img.ndim == 2
    if squeeze_channels:
        img = img[:, :, None]
    h, w, c = img.shape

    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    scalar = x.ndim == 0 and y.ndim == 0
    x, y = np.broadcast_arrays(x, y)

    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = x - x0
    fy = y - y0

    def grab(yi, xi):
        inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        vals = img[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)]
        return np.where(inside[..., None], vals, 0.0)

    v00 = grab(y0, x0)
    v01 = grab(y0, x0 + 1)
    v10 = grab(y0 + 1, x0)
    v11 = grab(y0 + 1, x0 + 1)

    fx = fx[..., None]
    fy = fy[..., None]
    out = (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11)

    if squeeze_channels:
        out = out[..., 0]
        if scalar:
            return float(out)
    return out


def label_mask(parse: LabelMap, labels) -> BinaryMask:
    """Binary mask of the pixels whose parse value is in ``labels``."""
    labels = set(labels)
    unknown = labels - VALID_LABELS
    if unknown:
        raise ValueError(f"unknown label ids {sorted(unknown)}")
    bits = np.isin(parse.labels, sorted(labels))
    return BinaryMask(bits.astype(np.uint8))


def mask_apply(img: Raster, m: BinaryMask) -> Raster:
    """Zero out the pixels where the mask is 0 (elementwise product)."""
    _check_same_shape(img, m, "mask_apply")
    return Raster(img.data * m.bits[:, :, None])
