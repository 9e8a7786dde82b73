"""Part vocabularies, soft spatial masks, and the toy half-plane segmenter.

Masks are soft maps in [0, 1]; hard segmenter outputs are the {0, 1} special
case. Segmentation is a frozen supervision source: it is evaluated on images
but no gradient ever flows back through it.
"""
from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, ShapeMismatch, UnknownPart

AGGREGATION_MODES = ("average", "union", "intersection")


@dataclass(frozen=True)
class PartLabel:
    """A named semantic region within one segmenter's vocabulary."""

    name: str
    id: int


@dataclass(frozen=True)
class SegmentationMask:
    """Soft per-pixel mask for one part at a fixed resolution."""

    values: np.ndarray
    part: PartLabel

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise InvalidInput(f"mask must be a non-empty 2-d array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidInput("mask contains non-finite entries")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise InvalidInput("mask entries must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def resolution(self) -> tuple[int, int]:
        h, w = self.values.shape
        return h, w


def aggregate_part_masks(m1: SegmentationMask, m2: SegmentationMask, mode: str = "average") -> SegmentationMask:
    """Combine two masks of the same part: pointwise mean, max, or min."""
    if m1.part != m2.part:
        raise InvalidInput(f"cannot aggregate masks of different parts: {m1.part.name!r} vs {m2.part.name!r}")
    if m1.resolution != m2.resolution:
        raise ShapeMismatch(f"mask resolutions differ: {m1.resolution} vs {m2.resolution}")
    if mode == "average":
        values = (m1.values + m2.values) / 2.0
    elif mode == "union":
        values = np.maximum(m1.values, m2.values)
    elif mode == "intersection":
        values = np.minimum(m1.values, m2.values)
    else:
        raise InvalidInput(f"unknown aggregation mode {mode!r}; expected one of {AGGREGATION_MODES}")
    return SegmentationMask(values, m1.part)


def _bilinear_resize(values: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Resample onto the target grid using half-pixel-centred bilinear weights."""
    src_h, src_w = values.shape
    ys = (np.arange(target_h) + 0.5) * (src_h / target_h) - 0.5
    xs = (np.arange(target_w) + 0.5) * (src_w / target_w) - 0.5
    y0f = np.floor(ys)
    x0f = np.floor(xs)
    ty = ys - y0f
    tx = xs - x0f
    y0 = np.clip(y0f.astype(int), 0, src_h - 1)
    y1 = np.clip(y0f.astype(int) + 1, 0, src_h - 1)
    x0 = np.clip(x0f.astype(int), 0, src_w - 1)
    x1 = np.clip(x0f.astype(int) + 1, 0, src_w - 1)
    top = values[np.ix_(y0, x0)] * (1 - tx) + values[np.ix_(y0, x1)] * tx
    bottom = values[np.ix_(y1, x0)] * (1 - tx) + values[np.ix_(y1, x1)] * tx
    out = top * (1 - ty)[:, None] + bottom * ty[:, None]
    return out


def downsample_mask(mask: SegmentationMask, target: tuple[int, int]) -> SegmentationMask:
    """Reduce a mask to a coarser resolution.

    Evenly divisible targets use area-average (box) pooling, which preserves
    the global mean exactly; other targets fall back to bilinear resampling
    clamped to [0, 1].
    """
    target_h, target_w = int(target[0]), int(target[1])
    src_h, src_w = mask.resolution
    if target_h < 1 or target_w < 1:
        raise ShapeMismatch(f"target resolution must be positive, got {(target_h, target_w)}")
    if target_h > src_h or target_w > src_w:
        raise ShapeMismatch(f"target {(target_h, target_w)} exceeds mask resolution {(src_h, src_w)}")
    if (target_h, target_w) == (src_h, src_w):
        return mask
    if src_h % target_h == 0 and src_w % target_w == 0:
        fh = src_h // target_h
        fw = src_w // target_w
        values = mask.values.reshape(target_h, fh, target_w, fw).mean(axis=(1, 3))
    else:
        values = np.clip(_bilinear_resize(mask.values, target_h, target_w), 0.0, 1.0)
    return SegmentationMask(values, mask.part)


class SegmenterBackend(abc.ABC):
    """Deterministic oracle mapping an image and a part label to a soft mask."""

    vocabulary: tuple[PartLabel, ...]
    native_resolution: tuple[int, int]

    def part_by_name(self, name: str) -> PartLabel:
        for part in self.vocabulary:
            if part.name == name:
                return part
        raise UnknownPart(f"part {name!r} not in vocabulary {[p.name for p in self.vocabulary]}")

    def _require_part(self, part: PartLabel) -> None:
        if part not in self.vocabulary:
            raise UnknownPart(f"part {part.name!r} (id {part.id}) not in vocabulary")

    @abc.abstractmethod
    def segment(self, image: np.ndarray, part: PartLabel) -> SegmentationMask:
        """Return the part mask for an image of shape (3, H, W)."""


class HalfPlaneSegmenter(SegmenterBackend):
    """Toy segmenter matched to the planted generator.

    "left" is columns [0, W/2), "right" is columns [W/2, W), regardless of
    pixel content. The two parts partition the image exactly.
    """

    def __init__(self, resolution: tuple[int, int] = (16, 16)):
        h, w = int(resolution[0]), int(resolution[1])
        if h < 1 or w < 2:
            raise InvalidInput(f"resolution too small for half planes: {(h, w)}")
        self.native_resolution = (h, w)
        self.vocabulary = (PartLabel("left", 0), PartLabel("right", 1))
        left = np.zeros((h, w))
        left[:, : w // 2] = 1.0
        self._mask_values = {"left": left, "right": 1.0 - left}

    @classmethod
    def for_backend(cls, backend) -> "HalfPlaneSegmenter":
        """Build a segmenter sized to a generator backend's output image."""
        _, h, w = backend.image_shape
        return cls((h, w))

    def segment(self, image: np.ndarray, part: PartLabel) -> SegmentationMask:
        self._require_part(part)
        image = np.asarray(image)
        expected = (3, *self.native_resolution)
        if image.shape != expected:
            raise ShapeMismatch(f"expected image of shape {expected}, got {image.shape}")
        return SegmentationMask(self._mask_values[part.name], part)
