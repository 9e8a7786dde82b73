"""Localization scoring of latent edits, summed across layers, plus the
multi-direction decorrelation regularizer and the combined objective.

The per-layer score is the fraction of squared featuremap change that falls
inside the (downsampled) part mask:

    score = sum_ij m[i,j] * d[i,j] / (sum_ij d[i,j] + eps)

where d[i,j] is the squared change at pixel (i,j) summed over channels. The
score is dimensionless, scale-invariant in the change, and lies in [0, 1].
A small eps in the denominator makes a no-op edit score 0 instead of 0/0.

Masks are constants: they are computed from the base and edited images but
no gradient flows back through the segmenter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInput, ShapeMismatch
from .generators import GeneratorBackend
from .latent import EditOp, LatentCode, LatentDirection, LatentSpace, apply_edit, mask_vector_to_layers
from .segmentation import (
    AGGREGATION_MODES,
    SegmentationMask,
    SegmenterBackend,
    PartLabel,
    aggregate_part_masks,
    downsample_mask,
)

CORR_MODES = ("cosine", "pearson")


@dataclass(frozen=True)
class ObjectiveConfig:
    aggregation: str = "average"
    epsilon: float = 1e-8
    layer_weights: tuple[float, ...] | None = None
    corr_mode: str = "cosine"

    def __post_init__(self) -> None:
        if self.aggregation not in AGGREGATION_MODES:
            raise InvalidInput(f"unknown aggregation mode {self.aggregation!r}")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise InvalidInput(f"epsilon must be a positive real, got {self.epsilon!r}")
        if self.corr_mode not in CORR_MODES:
            raise InvalidInput(f"unknown corr mode {self.corr_mode!r}")
        if self.layer_weights is not None:
            weights = tuple(float(w) for w in self.layer_weights)
            if any(not math.isfinite(w) or w < 0 for w in weights):
                raise InvalidInput("layer weights must be finite and non-negative")
            object.__setattr__(self, "layer_weights", weights)


DEFAULT_CONFIG = ObjectiveConfig()


@dataclass(frozen=True)
class ScoreBreakdown:
    """Per-layer localization scores plus the assembled objective value.

    per_layer entries are averaged over the batch and over directions, so
    they stay in [0, 1]; direction_totals carries each direction's weighted
    layer sum, and objective = sum(direction_totals) + c * regularizer.
    """

    per_layer: tuple[float, ...]
    total: float
    regularizer: float
    objective: float
    direction_totals: tuple[float, ...]


def _layer_weights(cfg: ObjectiveConfig, n_layers: int) -> np.ndarray:
    if cfg.layer_weights is None:
        return np.ones(n_layers)
    if len(cfg.layer_weights) != n_layers:
        raise InvalidInput(f"{len(cfg.layer_weights)} layer weights for {n_layers} scored layers")
    return np.asarray(cfg.layer_weights, dtype=np.float64)


def localization_score_layer(
    r: np.ndarray,
    r_edit: np.ndarray,
    mask: SegmentationMask,
    cfg: ObjectiveConfig = DEFAULT_CONFIG,
) -> float:
    """Masked fraction of squared change in one activation map."""
    r = np.asarray(r, dtype=np.float64)
    r_edit = np.asarray(r_edit, dtype=np.float64)
    if r.shape != r_edit.shape:
        raise ShapeMismatch(f"featuremap shapes differ: {r.shape} vs {r_edit.shape}")
    if r.ndim != 3:
        raise ShapeMismatch(f"featuremaps must be (channels, height, width), got {r.shape}")
    if mask.resolution != r.shape[1:]:
        raise ShapeMismatch(f"mask resolution {mask.resolution} does not match layer resolution {r.shape[1:]}")
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(r_edit))):
        raise InvalidInput("featuremaps contain non-finite values")
    d = ((r - r_edit) ** 2).sum(axis=0)
    num = float((mask.values * d).sum())
    den = float(d.sum()) + cfg.epsilon
    return num / den


def _aggregated_mask(
    segmenter: SegmenterBackend,
    base_image: np.ndarray,
    edited_image: np.ndarray,
    part: PartLabel,
    cfg: ObjectiveConfig,
) -> SegmentationMask:
    m1 = segmenter.segment(base_image, part)
    m2 = segmenter.segment(edited_image, part)
    return aggregate_part_masks(m1, m2, cfg.aggregation)


def _mask_pyramid(mask: SegmentationMask, shapes: Sequence[tuple[int, int, int]]) -> list[SegmentationMask]:
    return [downsample_mask(mask, (h, w)) for _, h, w in shapes]


def _direction_values(direction, space: LatentSpace, layer_range: tuple[int, int] | None):
    """Accept either a LatentDirection or a raw vector (for gradient probes)."""
    if isinstance(direction, LatentDirection):
        return direction.values, direction.layer_range
    arr = np.asarray(direction, dtype=np.float64)
    if arr.shape != (space.total_dim,):
        raise InvalidInput(f"direction vector shape {arr.shape} does not match space dimension {space.total_dim}")
    if layer_range is None:
        layer_range = (0, space.n_layers - 1)
    return arr, layer_range


def localization_score(
    backend: GeneratorBackend,
    segmenter: SegmenterBackend,
    code: LatentCode,
    direction: LatentDirection,
    alpha: float,
    part: PartLabel,
    cfg: ObjectiveConfig = DEFAULT_CONFIG,
) -> ScoreBreakdown:
    """Full pipeline score for one code and one direction.

    Renders the code and its edit, segments both images, aggregates the two
    masks, downsamples per layer, and scores every intermediate layer plus
    the final image (the last entry of per_layer).
    """
    op = EditOp(direction, alpha)
    base = backend.forward(code)
    edited = backend.forward(apply_edit(code, op))
    mask = _aggregated_mask(segmenter, base.image, edited.image, part, cfg)
    masks = _mask_pyramid(mask, backend.scored_shapes)
    per_layer = tuple(
        localization_score_layer(r, r_e, m, cfg)
        for r, r_e, m in zip(base.scored_maps(), edited.scored_maps(), masks)
    )
    weights = _layer_weights(cfg, len(per_layer))
    total = float(weights @ np.asarray(per_layer))
    return ScoreBreakdown(per_layer, total, 0.0, total, (total,))


def _corr_offdiagonal(vectors: np.ndarray, mode: str) -> np.ndarray:
    """Pairwise correlation matrix with the (identically 1) diagonal zeroed."""
    v = vectors - vectors.mean(axis=1, keepdims=True) if mode == "pearson" else vectors
    norms = np.linalg.norm(v, axis=1)
    if np.any(norms < 1e-12):
        raise InvalidInput("regularizer requires non-degenerate direction vectors")
    unit = v / norms[:, None]
    corr = unit @ unit.T
    np.fill_diagonal(corr, 0.0)
    return corr


def _stack_direction_vectors(directions) -> np.ndarray:
    rows = []
    for d in directions:
        if isinstance(d, LatentDirection):
            rows.append(d.values)
        else:
            rows.append(np.asarray(d, dtype=np.float64))
    arr = np.stack(rows)
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("direction vectors contain non-finite values")
    return arr


def regularizer(directions: Sequence, mode: str = "cosine") -> float:
    """Decorrelation penalty: -0.5 * Frobenius norm of (Corr - I).

    Always <= 0, and 0 exactly iff the directions are mutually orthogonal
    (cosine mode) or uncorrelated (pearson mode). A single direction gives 0.
    """
    if mode not in CORR_MODES:
        raise InvalidInput(f"unknown corr mode {mode!r}")
    vectors = _stack_direction_vectors(directions)
    if vectors.shape[0] == 1:
        return 0.0
    off = _corr_offdiagonal(vectors, mode)
    return float(-0.5 * np.sqrt((off**2).sum()))


def regularizer_with_grad(directions: Sequence, active: int, mode: str = "cosine") -> tuple[float, np.ndarray]:
    """Regularizer value and its gradient w.r.t. the active direction only.

    The other directions are treated as frozen, so the penalty acts as a
    repulsion of the active direction from the rest. At the orthogonal
    optimum the Frobenius norm vanishes and the (sub)gradient is zero.
    """
    vectors = _stack_direction_vectors(directions)
    k_total, dim = vectors.shape
    if k_total == 1:
        return 0.0, np.zeros(dim)
    centered = vectors - vectors.mean(axis=1, keepdims=True) if mode == "pearson" else vectors
    norms = np.linalg.norm(centered, axis=1)
    if np.any(norms < 1e-12):
        raise InvalidInput("regularizer requires non-degenerate direction vectors")
    unit = centered / norms[:, None]
    corr = unit @ unit.T
    np.fill_diagonal(corr, 0.0)
    frob = float(np.sqrt((corr**2).sum()))
    value = -0.5 * frob
    if frob < 1e-12:
        return value, np.zeros(dim)
    row = corr[active]
    # d/du_k of cos(u_k, u_j) is (unit_j - corr_kj * unit_k) / ||u_k||
    summed = row @ unit
    grad = -(summed - (row @ row) * unit[active]) / (frob * norms[active])
    if mode == "pearson":
        grad = grad - grad.mean()
    return value, grad


def evaluate_objective(
    backend: GeneratorBackend,
    segmenter: SegmenterBackend,
    codes: Sequence[LatentCode],
    directions: Sequence,
    alphas,
    part: PartLabel,
    c: float,
    cfg: ObjectiveConfig = DEFAULT_CONFIG,
    layer_range: tuple[int, int] | None = None,
) -> ScoreBreakdown:
    """Batch objective: sum of per-direction mean localization scores plus
    c times the decorrelation regularizer.

    ``directions`` may be LatentDirection objects or raw vectors (useful for
    finite-difference probes, which perturb off the unit sphere); ``alphas``
    is a scalar applied to every direction or one strength per direction.
    """
    if not (math.isfinite(c) and c >= 0):
        raise InvalidInput(f"regularizer coefficient must be >= 0, got {c!r}")
    if not codes:
        raise InvalidInput("need at least one latent code")
    if not directions:
        raise InvalidInput("need at least one direction")
    alphas = _broadcast_alphas(alphas, len(directions))
    n_scored = len(backend.scored_shapes)
    weights = _layer_weights(cfg, n_scored)
    layer_means = np.zeros((len(directions), n_scored))
    for k, direction in enumerate(directions):
        values, lr = _direction_values(direction, backend.space, layer_range)
        for code in codes:
            layer_means[k] += _pipeline_scores(backend, segmenter, code, values, lr, alphas[k], part, cfg)
    layer_means /= len(codes)
    direction_totals = tuple(float(weights @ layer_means[k]) for k in range(len(directions)))
    per_layer = tuple(float(x) for x in layer_means.mean(axis=0))
    total = float(weights @ layer_means.mean(axis=0))
    reg = regularizer(directions, cfg.corr_mode) if len(directions) > 1 else 0.0
    objective = float(sum(direction_totals) + c * reg)
    return ScoreBreakdown(per_layer, total, reg, objective, direction_totals)


def _broadcast_alphas(alphas, k: int) -> list[float]:
    if np.isscalar(alphas):
        out = [float(alphas)] * k
    else:
        out = [float(a) for a in alphas]
        if len(out) != k:
            raise InvalidInput(f"{len(out)} alphas for {k} directions")
    if any(not math.isfinite(a) for a in out):
        raise InvalidInput("alphas must be finite")
    return out


def _pipeline_scores(
    backend: GeneratorBackend,
    segmenter: SegmenterBackend,
    code: LatentCode,
    values: np.ndarray,
    layer_range: tuple[int, int],
    alpha: float,
    part: PartLabel,
    cfg: ObjectiveConfig,
) -> np.ndarray:
    masked = mask_vector_to_layers(backend.space, values, layer_range)
    edited_code = LatentCode(backend.space, code.values + alpha * masked)
    base = backend.forward(code)
    edited = backend.forward(edited_code)
    mask = _aggregated_mask(segmenter, base.image, edited.image, part, cfg)
    masks = _mask_pyramid(mask, backend.scored_shapes)
    return np.array(
        [
            localization_score_layer(r, r_e, m, cfg)
            for r, r_e, m in zip(base.scored_maps(), edited.scored_maps(), masks)
        ]
    )


def localization_score_with_grad(
    backend: GeneratorBackend,
    segmenter: SegmenterBackend,
    code: LatentCode,
    values: np.ndarray,
    layer_range: tuple[int, int],
    alpha: float,
    part: PartLabel,
    cfg: ObjectiveConfig = DEFAULT_CONFIG,
) -> tuple[np.ndarray, float, np.ndarray]:
    """Per-layer scores, weighted total, and the total's gradient w.r.t. the
    raw direction vector for one latent code.

    The gradient treats masks as constants and flows through the edited
    featuremaps only (the base pass does not depend on the direction).
    """
    space = backend.space
    masked = mask_vector_to_layers(space, np.asarray(values, dtype=np.float64), layer_range)
    edited_code = LatentCode(space, code.values + alpha * masked)
    base = backend.forward(code)
    edited, vjp = backend.forward_with_vjp(edited_code)
    mask = _aggregated_mask(segmenter, base.image, edited.image, part, cfg)
    masks = _mask_pyramid(mask, backend.scored_shapes)
    weights = _layer_weights(cfg, len(backend.scored_shapes))

    per_layer = []
    seeds = []
    for w, r, r_e, m in zip(weights, base.scored_maps(), edited.scored_maps(), masks):
        diff = r_e - r
        d = (diff**2).sum(axis=0)
        den = float(d.sum()) + cfg.epsilon
        score = float((m.values * d).sum()) / den
        per_layer.append(score)
        # d(score)/d(r_edit) = 2 * diff * (m - score) / den, per channel
        seeds.append(w * 2.0 * diff * ((m.values - score) / den)[None, :, :])
    grad_code = vjp(seeds[:-1], seeds[-1])
    grad = mask_vector_to_layers(space, alpha * grad_code, layer_range)
    per_layer_arr = np.asarray(per_layer)
    total = float(weights @ per_layer_arr)
    return per_layer_arr, total, grad


def objective_value_and_grad(
    backend: GeneratorBackend,
    segmenter: SegmenterBackend,
    codes: Sequence[LatentCode],
    directions: Sequence,
    active: int,
    alpha: float,
    part: PartLabel,
    c: float,
    cfg: ObjectiveConfig = DEFAULT_CONFIG,
    layer_range: tuple[int, int] | None = None,
) -> tuple[float, np.ndarray]:
    """The slice of the objective the active direction sees, and its gradient.

    Value is the active direction's batch-mean weighted score plus c times
    the regularizer; gradient is w.r.t. the active direction's raw vector
    with all other directions frozen. Since the other directions' scores do
    not depend on the active one, this gradient equals the gradient of the
    full objective w.r.t. the active direction.
    """
    if not (math.isfinite(c) and c >= 0):
        raise InvalidInput(f"regularizer coefficient must be >= 0, got {c!r}")
    vectors = [_direction_values(d, backend.space, layer_range) for d in directions]
    values, lr = vectors[active]
    grad = np.zeros(backend.space.total_dim)
    mean_total = 0.0
    for code in codes:
        _, total, g = localization_score_with_grad(backend, segmenter, code, values, lr, alpha, part, cfg)
        mean_total += total
        grad += g
    mean_total /= len(codes)
    grad /= len(codes)
    if len(directions) > 1:
        reg, reg_grad = regularizer_with_grad([v for v, _ in vectors], active, cfg.corr_mode)
    else:
        reg, reg_grad = 0.0, np.zeros_like(grad)
    value = mean_total + c * reg
    grad = grad + c * reg_grad
    return value, grad
