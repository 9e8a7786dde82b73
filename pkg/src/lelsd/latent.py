"""Latent spaces, codes, directions, and the additive edit algebra.

Codes and directions are stored as flat float64 vectors; per-layer structure
is recovered from the space's dim_per_layer offsets. Directions are kept at
unit L2 norm so that the edit strength alpha carries all magnitude and stays
comparable across directions.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidEdit, InvalidInput, SpaceMismatch
from .segmentation import PartLabel

UNIT_NORM_TOL = 1e-6


class SpaceKind(enum.Enum):
    """Latent families a generator may expose; Z and W are flat, the rest per-layer."""

    Z = "z"
    W = "w"
    WPLUS = "w+"
    S = "s"
    ZPLUS = "z+"


FLAT_KINDS = frozenset({SpaceKind.Z, SpaceKind.W})


def _as_vector(values, what: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInput(f"{what} must be a flat vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{what} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LatentSpace:
    kind: SpaceKind
    dim_per_layer: tuple[int, ...]

    def __post_init__(self) -> None:
        kind = self.kind if isinstance(self.kind, SpaceKind) else SpaceKind(str(self.kind))
        dims = tuple(int(d) for d in self.dim_per_layer)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "dim_per_layer", dims)
        if not dims:
            raise InvalidInput("dim_per_layer must have at least one entry")
        if any(d <= 0 for d in dims):
            raise InvalidInput(f"layer dimensions must be positive, got {dims}")
        if kind in FLAT_KINDS and len(dims) != 1:
            raise InvalidInput(f"{kind.value} is a flat space and takes exactly one dimension entry, got {len(dims)}")

    @property
    def n_layers(self) -> int:
        return len(self.dim_per_layer)

    @property
    def total_dim(self) -> int:
        return sum(self.dim_per_layer)

    def layer_slice(self, layer: int) -> slice:
        if not 0 <= layer < self.n_layers:
            raise InvalidInput(f"layer {layer} out of range for {self.n_layers}-layer space")
        offset = sum(self.dim_per_layer[:layer])
        return slice(offset, offset + self.dim_per_layer[layer])


@dataclass(frozen=True)
class LatentCode:
    """A point in a latent space."""

    space: LatentSpace
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = _as_vector(self.values, "latent code")
        if arr.size != self.space.total_dim:
            raise InvalidInput(f"code length {arr.size} does not match space dimension {self.space.total_dim}")
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True)
class LatentDirection:
    """A unit-norm direction performing one semantic edit.

    layer_range is the inclusive [lo, hi] span of layer blocks the edit is
    applied to; blocks outside it are zeroed before scaling. Flat spaces
    treat the whole vector as layer 0.
    """

    space: LatentSpace
    values: np.ndarray
    part: PartLabel
    layer_range: tuple[int, int]
    name: str = ""

    def __post_init__(self) -> None:
        arr = _as_vector(self.values, "direction")
        if arr.size != self.space.total_dim:
            raise InvalidInput(f"direction length {arr.size} does not match space dimension {self.space.total_dim}")
        norm = float(np.linalg.norm(arr))
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            raise InvalidInput(f"direction must be unit-norm within {UNIT_NORM_TOL}, got norm {norm}")
        lo, hi = int(self.layer_range[0]), int(self.layer_range[1])
        if not (0 <= lo <= hi < self.space.n_layers):
            raise InvalidInput(f"layer_range {(lo, hi)} invalid for {self.space.n_layers}-layer space")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "layer_range", (lo, hi))

    @classmethod
    def from_values(
        cls,
        space: LatentSpace,
        values,
        part: PartLabel,
        layer_range: tuple[int, int] | None = None,
        name: str = "",
    ) -> "LatentDirection":
        """Normalize arbitrary non-zero values into a unit direction."""
        arr = np.array(values, dtype=np.float64)
        norm = float(np.linalg.norm(arr))
        if not math.isfinite(norm) or norm < 1e-12:
            raise InvalidInput("cannot build a direction from a zero or non-finite vector")
        if layer_range is None:
            layer_range = (0, space.n_layers - 1)
        return cls(space, arr / norm, part, layer_range, name)


@dataclass(frozen=True)
class EditOp:
    """A direction paired with a signed strength."""

    direction: LatentDirection
    alpha: float

    def __post_init__(self) -> None:
        try:
            a = float(self.alpha)
        except (TypeError, ValueError) as exc:
            raise InvalidEdit(f"alpha must be a real number, got {self.alpha!r}") from exc
        if not math.isfinite(a):
            raise InvalidEdit(f"alpha must be finite, got {a!r}")
        object.__setattr__(self, "alpha", a)


def masked_values(direction: LatentDirection) -> np.ndarray:
    """Direction values with layer blocks outside layer_range zeroed."""
    lo, hi = direction.layer_range
    space = direction.space
    if lo == 0 and hi == space.n_layers - 1:
        return direction.values
    out = np.zeros(space.total_dim)
    for layer in range(lo, hi + 1):
        sl = space.layer_slice(layer)
        out[sl] = direction.values[sl]
    return out


def mask_vector_to_layers(space: LatentSpace, values: np.ndarray, layer_range: tuple[int, int]) -> np.ndarray:
    """Zero the blocks of an arbitrary vector outside an inclusive layer range."""
    lo, hi = int(layer_range[0]), int(layer_range[1])
    if not (0 <= lo <= hi < space.n_layers):
        raise InvalidInput(f"layer_range {(lo, hi)} invalid for {space.n_layers}-layer space")
    if lo == 0 and hi == space.n_layers - 1:
        return np.asarray(values, dtype=np.float64)
    out = np.zeros(space.total_dim)
    for layer in range(lo, hi + 1):
        sl = space.layer_slice(layer)
        out[sl] = values[sl]
    return out


def apply_edit(code: LatentCode, op: EditOp) -> LatentCode:
    """Move a code along a direction: code + alpha * direction (layer-masked)."""
    if code.space != op.direction.space:
        raise SpaceMismatch(f"code space {code.space.kind.value} does not match direction space {op.direction.space.kind.value}")
    if not math.isfinite(op.alpha):
        raise InvalidEdit(f"alpha must be finite, got {op.alpha!r}")
    return LatentCode(code.space, code.values + op.alpha * masked_values(op.direction))


def compose_edits(code: LatentCode, ops: Sequence[EditOp]) -> LatentCode:
    """Apply a sequence of edits as one summed displacement.

    Accumulating alpha_k * u_k before adding to the code makes exact
    cancellation (pushing +a then -a) bit-exact; it agrees with the left
    fold of apply_edit to relative rounding error.
    """
    if not ops:
        return code
    delta = np.zeros(code.space.total_dim)
    for op in ops:
        if op.direction.space != code.space:
            raise SpaceMismatch(f"op direction space {op.direction.space.kind.value} does not match code space {code.space.kind.value}")
        delta += op.alpha * masked_values(op.direction)
    return LatentCode(code.space, code.values + delta)
