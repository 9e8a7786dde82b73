"""Lossless PNG round-trip for float images in [-1, 1].

Quantization to 8 bits happens once here; the bytes the service returns are
exactly the bytes tests and the UI compare, so "same pixels" means "same
file".
"""
from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image

from .errors import InvalidInput


def image_to_uint8(image: np.ndarray) -> np.ndarray:
    """(3, H, W) float in [-1, 1] -> (H, W, 3) uint8."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[0] != 3:
        raise InvalidInput(f"expected image of shape (3, H, W), got {image.shape}")
    scaled = np.clip(np.rint((image + 1.0) * 127.5), 0, 255).astype(np.uint8)
    return scaled.transpose(1, 2, 0)


def encode_png(image: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    Image.fromarray(image_to_uint8(image), mode="RGB").save(buffer, format="PNG")
    return buffer.getvalue()


def encode_png_base64(image: np.ndarray) -> str:
    return base64.b64encode(encode_png(image)).decode("ascii")


def decode_png(data: bytes) -> np.ndarray:
    """PNG bytes -> (H, W, 3) uint8."""
    with Image.open(io.BytesIO(data)) as img:
        return np.asarray(img.convert("RGB"))
