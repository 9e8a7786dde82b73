"""Generator backends: the abstract interface and a seeded planted toy generator.

The planted generator maps an 8-d latent through two dense stages with a
smooth tanh squashing. Latent coordinates 0-3 feed only the left half-plane
of every activation map and the image, coordinates 4-7 only the right half;
the separation comes from block-structured weights, so it holds exactly
(bitwise), not approximately. This gives the rest of the package a desk-scale
generator with a known ground-truth answer for "which direction edits which
region".
"""
from __future__ import annotations

import abc
import hashlib
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidInput, ShapeMismatch, SpaceMismatch, UnsupportedCapability
from .latent import LatentCode, LatentSpace, SpaceKind

VjpFn = Callable[[Sequence[np.ndarray], np.ndarray], np.ndarray]


class FeatureMapSet:
    """Per-layer activations plus the final image for one forward pass.

    ``layers`` holds intermediate activations ordered coarse to fine; the
    image is kept separately but participates as the last scored map.
    """

    __slots__ = ("layers", "image")

    def __init__(self, layers: Sequence[np.ndarray], image: np.ndarray):
        frozen = []
        prev_res = None
        for i, arr in enumerate(layers):
            arr = np.asarray(arr, dtype=np.float64)
            if arr.ndim != 3:
                raise InvalidInput(f"layer {i} must be (channels, height, width), got shape {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise InvalidInput(f"layer {i} contains non-finite values")
            if prev_res is not None and (arr.shape[1] < prev_res[0] or arr.shape[2] < prev_res[1]):
                raise InvalidInput("layer resolutions must be non-decreasing")
            prev_res = arr.shape[1:]
            arr.setflags(write=False)
            frozen.append(arr)
        image = np.asarray(image, dtype=np.float64)
        if image.ndim != 3 or image.shape[0] != 3:
            raise InvalidInput(f"image must be (3, H, W), got shape {image.shape}")
        if not np.all(np.isfinite(image)):
            raise InvalidInput("image contains non-finite values")
        if prev_res is not None and (image.shape[1] < prev_res[0] or image.shape[2] < prev_res[1]):
            raise InvalidInput("image resolution must not be below the last layer's")
        image.setflags(write=False)
        self.layers = tuple(frozen)
        self.image = image

    def scored_maps(self) -> tuple[np.ndarray, ...]:
        """All maps entering the localization objective, image last."""
        return (*self.layers, self.image)


class GeneratorBackend(abc.ABC):
    """The generator abstraction: latent code in, featuremaps and image out."""

    differentiable: bool = False

    @property
    @abc.abstractmethod
    def space(self) -> LatentSpace: ...

    @property
    @abc.abstractmethod
    def layer_shapes(self) -> tuple[tuple[int, int, int], ...]:
        """Shapes of the intermediate activation maps (channels, height, width)."""

    @property
    @abc.abstractmethod
    def image_shape(self) -> tuple[int, int, int]: ...

    @property
    def scored_shapes(self) -> tuple[tuple[int, int, int], ...]:
        return (*self.layer_shapes, self.image_shape)

    @property
    @abc.abstractmethod
    def fingerprint(self) -> str:
        """Stable content hash of backend identity plus parameters."""

    @abc.abstractmethod
    def forward(self, code: LatentCode) -> FeatureMapSet: ...

    def forward_with_vjp(self, code: LatentCode) -> tuple[FeatureMapSet, VjpFn]:
        """Forward pass plus a vector-Jacobian product closure.

        The closure takes seed gradients on every intermediate layer and on
        the image, and returns the gradient with respect to the latent code.
        """
        raise UnsupportedCapability(f"{type(self).__name__} does not provide gradients")

    def forward_with_gradients(self, code: LatentCode, layer_seeds: Sequence[np.ndarray], image_seed: np.ndarray) -> np.ndarray:
        """Gradient of sum(seed * featuremap) over all maps w.r.t. the code."""
        _, vjp = self.forward_with_vjp(code)
        return vjp(layer_seeds, image_seed)

    def _check_space(self, code: LatentCode) -> None:
        if code.space != self.space:
            raise SpaceMismatch(f"code space {code.space} does not match backend space {self.space}")


class PlantedGenerator(GeneratorBackend):
    """Deterministic two-stage generator with planted half-plane structure.

    latent (8,) -> layer 0 (4, 8, 8) -> image (3, 16, 16)

    Each image half is produced by an independent dense sub-network reading
    only its own 4 latent coordinates. ``linear=True`` disables the tanh
    squashing, making the map affine (used by closed-form oracles and the
    least-squares inverter); the affine variant does not bound the image to
    [-1, 1].
    """

    LATENT_DIM = 8
    _HALF_IN = 4
    _LAYER0_HALF = (4, 8, 4)
    _IMAGE_HALF = (3, 16, 8)

    differentiable = True

    def __init__(self, seed: int = 0, linear: bool = False):
        self.seed = int(seed)
        self.linear = bool(linear)
        self._space = LatentSpace(SpaceKind.Z, (self.LATENT_DIM,))
        rng = np.random.default_rng(self.seed)
        n0 = int(np.prod(self._LAYER0_HALF))
        n1 = int(np.prod(self._IMAGE_HALF))
        # Scales keep pre-activations mostly inside tanh's responsive band at
        # working edit strengths, so gradients stay informative while the map
        # remains visibly nonlinear.
        halves = []
        for _ in range(2):
            w0 = rng.standard_normal((n0, self._HALF_IN)) * (0.35 / np.sqrt(self._HALF_IN))
            b0 = rng.standard_normal(n0) * 0.15
            w1 = rng.standard_normal((n1, n0)) * (0.8 / np.sqrt(n0))
            b1 = rng.standard_normal(n1) * 0.15
            for arr in (w0, b0, w1, b1):
                arr.setflags(write=False)
            halves.append((w0, b0, w1, b1))
        self._halves = tuple(halves)
        self._fingerprint = self._compute_fingerprint()

    @property
    def space(self) -> LatentSpace:
        return self._space

    @property
    def layer_shapes(self) -> tuple[tuple[int, int, int], ...]:
        c, h, hw = self._LAYER0_HALF
        return ((c, h, 2 * hw),)

    @property
    def image_shape(self) -> tuple[int, int, int]:
        c, h, hw = self._IMAGE_HALF
        return (c, h, 2 * hw)

    @property
    def fingerprint(self) -> str:
        return self._fingerprint

    def _compute_fingerprint(self) -> str:
        digest = hashlib.sha256()
        digest.update(b"planted-generator/v1")
        digest.update(f"seed={self.seed};linear={self.linear}".encode())
        for params in self._halves:
            for arr in params:
                digest.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return digest.hexdigest()

    def descriptor(self) -> dict:
        """Parameters sufficient to reconstruct this backend."""
        return {"kind": "planted", "seed": self.seed, "linear": self.linear}

    @classmethod
    def from_descriptor(cls, desc: dict) -> "PlantedGenerator":
        if desc.get("kind") != "planted":
            raise InvalidInput(f"not a planted-generator descriptor: {desc!r}")
        return cls(seed=int(desc.get("seed", 0)), linear=bool(desc.get("linear", False)))

    def _act(self, a: np.ndarray) -> np.ndarray:
        return a if self.linear else np.tanh(a)

    def _dact(self, activated: np.ndarray) -> np.ndarray:
        return np.ones_like(activated) if self.linear else 1.0 - activated**2

    def _forward_halves(self, values: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per half: (hidden activations flat, image activations flat)."""
        parts = []
        for half, (w0, b0, w1, b1) in enumerate(self._halves):
            x = values[half * self._HALF_IN : (half + 1) * self._HALF_IN]
            h0 = self._act(w0 @ x + b0)
            img = self._act(w1 @ h0 + b1)
            parts.append((h0, img))
        return parts

    def _assemble(self, parts) -> FeatureMapSet:
        layer0 = np.concatenate([h.reshape(self._LAYER0_HALF) for h, _ in parts], axis=2)
        image = np.concatenate([im.reshape(self._IMAGE_HALF) for _, im in parts], axis=2)
        return FeatureMapSet(layers=(layer0,), image=image)

    def forward(self, code: LatentCode) -> FeatureMapSet:
        self._check_space(code)
        return self._assemble(self._forward_halves(code.values))

    def forward_with_vjp(self, code: LatentCode) -> tuple[FeatureMapSet, VjpFn]:
        self._check_space(code)
        parts = self._forward_halves(code.values)
        fms = self._assemble(parts)

        def vjp(layer_seeds: Sequence[np.ndarray], image_seed: np.ndarray) -> np.ndarray:
            if len(layer_seeds) != 1:
                raise ShapeMismatch(f"expected 1 layer seed, got {len(layer_seeds)}")
            g_layer0 = np.asarray(layer_seeds[0], dtype=np.float64)
            g_image = np.asarray(image_seed, dtype=np.float64)
            if g_layer0.shape != self.layer_shapes[0]:
                raise ShapeMismatch(f"layer seed shape {g_layer0.shape} != {self.layer_shapes[0]}")
            if g_image.shape != self.image_shape:
                raise ShapeMismatch(f"image seed shape {g_image.shape} != {self.image_shape}")
            grads = []
            hw0 = self._LAYER0_HALF[2]
            hw1 = self._IMAGE_HALF[2]
            for half, ((w0, _, w1, _), (h0, img)) in enumerate(zip(self._halves, parts)):
                gh = g_layer0[:, :, half * hw0 : (half + 1) * hw0].reshape(-1)
                gi = g_image[:, :, half * hw1 : (half + 1) * hw1].reshape(-1)
                g_a1 = gi * self._dact(img)
                g_h0 = gh + w1.T @ g_a1
                g_a0 = g_h0 * self._dact(h0)
                grads.append(w0.T @ g_a0)
            return np.concatenate(grads)

        return fms, vjp


def backend_from_spec(spec: str) -> PlantedGenerator:
    """Parse a backend spec string like "planted:3" or "planted-linear:3"."""
    kind, _, seed_str = spec.partition(":")
    seed = int(seed_str) if seed_str else 0
    if kind == "planted":
        return PlantedGenerator(seed=seed)
    if kind == "planted-linear":
        return PlantedGenerator(seed=seed, linear=True)
    raise InvalidInput(f"unknown backend spec {spec!r}; expected planted[:SEED] or planted-linear[:SEED]")


def backend_from_descriptor(desc: dict) -> PlantedGenerator:
    return PlantedGenerator.from_descriptor(desc)
