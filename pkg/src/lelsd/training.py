"""Stochastic gradient ascent on the localization objective.

The recipe: draw fresh standard-normal latent codes every step, evaluate the
objective on a small batch at strength +/- alpha_train, take an adaptive-
moment ascent step on one direction at a time (round-robin when training
several), and re-project onto the unit sphere after every update. The
learning rate starts at lr0 and halves every halve_every updates of a
direction. The sample budget scales linearly with the number of directions.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import InvalidInput, SpaceMismatch, TrainingDiverged, UnknownPart, UnsupportedCapability
from .generators import GeneratorBackend
from .latent import LatentCode, LatentDirection, LatentSpace
from .objective import ObjectiveConfig, objective_value_and_grad, regularizer, evaluate_objective
from .segmentation import PartLabel, SegmenterBackend

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainingConfig:
    space: LatentSpace
    part: PartLabel
    num_samples: int = 800
    batch_size: int = 4
    lr0: float = 1e-3
    halve_every: int = 50
    k: int = 1
    reg_c: float = 0.0
    seed: int = 0
    alpha_train: float = 3.0
    layer_range: tuple[int, int] | None = None
    aggregation: str = "average"
    corr_mode: str = "cosine"

    def __post_init__(self) -> None:
        if self.num_samples < 1 or self.batch_size < 1:
            raise InvalidInput("num_samples and batch_size must be positive")
        if self.num_samples % self.batch_size != 0:
            raise InvalidInput(f"num_samples ({self.num_samples}) must be divisible by batch_size ({self.batch_size})")
        if self.k < 1:
            raise InvalidInput("k must be >= 1")
        if not (math.isfinite(self.lr0) and self.lr0 > 0):
            raise InvalidInput("lr0 must be positive")
        if self.halve_every < 1:
            raise InvalidInput("halve_every must be >= 1")
        if not (math.isfinite(self.reg_c) and self.reg_c >= 0):
            raise InvalidInput("reg_c must be >= 0")
        if not math.isfinite(self.alpha_train):
            raise InvalidInput("alpha_train must be finite")

    def objective_config(self) -> ObjectiveConfig:
        return ObjectiveConfig(aggregation=self.aggregation, corr_mode=self.corr_mode)

    def resolved_layer_range(self) -> tuple[int, int]:
        if self.layer_range is None:
            return (0, self.space.n_layers - 1)
        lo, hi = int(self.layer_range[0]), int(self.layer_range[1])
        if not (0 <= lo <= hi < self.space.n_layers):
            raise InvalidInput(f"layer_range {(lo, hi)} invalid for {self.space.n_layers}-layer space")
        return (lo, hi)

    def snapshot(self) -> dict:
        """JSON-friendly copy embedded in banks and reports for provenance."""
        out = asdict(self)
        out["space"] = {"kind": self.space.kind.value, "dim_per_layer": list(self.space.dim_per_layer)}
        out["part"] = {"name": self.part.name, "id": self.part.id}
        out["layer_range"] = list(self.resolved_layer_range())
        out["adam"] = {"beta1": ADAM_BETA1, "beta2": ADAM_BETA2, "eps": ADAM_EPS}
        return out


@dataclass(frozen=True)
class TrainingReport:
    objective_trace: tuple[float, ...]
    final_scores: tuple[float, ...]
    final_regularizer: float
    wall_time_seconds: float
    steps: int
    config_snapshot: dict = field(default_factory=dict)


def lr_schedule(step: int, cfg: TrainingConfig) -> float:
    """lr0 halved once per halve_every updates, no floor."""
    if step < 0:
        raise InvalidInput(f"step must be >= 0, got {step}")
    return cfg.lr0 * 0.5 ** (step // cfg.halve_every)


def sample_latents(space: LatentSpace, n: int, seed: int) -> list[LatentCode]:
    """n i.i.d. standard-normal codes from a seeded generator."""
    if n < 1:
        raise InvalidInput("n must be >= 1")
    rng = np.random.default_rng(seed)
    draws = rng.standard_normal((n, space.total_dim))
    return [LatentCode(space, row) for row in draws]


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int

    @classmethod
    def zeros(cls, dim: int) -> "AdamState":
        return cls(np.zeros(dim), np.zeros(dim), 0)


def adam_step(
    params: np.ndarray,
    gradient: np.ndarray,
    state: AdamState,
    lr: float,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    eps: float = ADAM_EPS,
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected adaptive-moment ascent step."""
    gradient = np.asarray(gradient, dtype=np.float64)
    if gradient.shape != params.shape:
        raise InvalidInput(f"gradient shape {gradient.shape} does not match params {params.shape}")
    if not np.all(np.isfinite(gradient)):
        raise TrainingDiverged("non-finite gradient")
    t = state.t + 1
    m = beta1 * state.m + (1 - beta1) * gradient
    v = beta2 * state.v + (1 - beta2) * gradient**2
    m_hat = m / (1 - beta1**t)
    v_hat = v / (1 - beta2**t)
    new_params = params + lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(m, v, t)


def train_directions(
    backend: GeneratorBackend,
    segmenter: SegmenterBackend,
    cfg: TrainingConfig,
) -> tuple[list[LatentDirection], TrainingReport]:
    """Train k unit directions that localize edits to cfg.part.

    Step t updates direction t mod k; the regularizer's gradient flows only
    into the active direction, so the frozen rest acts as a repulsive set.
    Fully deterministic given (seed, config, backend fingerprint).
    """
    if not backend.differentiable:
        raise UnsupportedCapability(f"{type(backend).__name__} is not differentiable; cannot train")
    if cfg.space != backend.space:
        raise SpaceMismatch(f"config space {cfg.space} does not match backend space {backend.space}")
    if cfg.part not in segmenter.vocabulary:
        raise UnknownPart(f"part {cfg.part.name!r} not in segmenter vocabulary")
    layer_range = cfg.resolved_layer_range()
    obj_cfg = cfg.objective_config()
    dim = cfg.space.total_dim

    rng = np.random.default_rng(cfg.seed)
    directions = []
    for _ in range(cfg.k):
        raw = rng.standard_normal(dim)
        directions.append(raw / np.linalg.norm(raw))
    states = [AdamState.zeros(dim) for _ in range(cfg.k)]

    steps = cfg.k * cfg.num_samples // cfg.batch_size
    trace: list[float] = []
    start = time.perf_counter()
    for t in range(steps):
        active = t % cfg.k
        lr = lr_schedule(t // cfg.k, cfg)
        batch = [LatentCode(cfg.space, row) for row in rng.standard_normal((cfg.batch_size, dim))]
        sign = 1.0 if rng.random() < 0.5 else -1.0
        value, grad = objective_value_and_grad(
            backend,
            segmenter,
            batch,
            directions,
            active,
            sign * cfg.alpha_train,
            cfg.part,
            cfg.reg_c,
            obj_cfg,
            layer_range,
        )
        if not math.isfinite(value):
            raise TrainingDiverged(f"objective became non-finite at step {t}")
        new_params, states[active] = adam_step(directions[active], grad, states[active], lr)
        norm = float(np.linalg.norm(new_params))
        if norm < 1e-12 or not math.isfinite(norm):
            raise TrainingDiverged(f"direction collapsed at step {t}")
        directions[active] = new_params / norm
        trace.append(value)
    wall = time.perf_counter() - start

    eval_codes = [LatentCode(cfg.space, row) for row in rng.standard_normal((32, dim))]
    final_scores = []
    for k in range(cfg.k):
        totals = [
            evaluate_objective(
                backend, segmenter, eval_codes, [directions[k]], sign * cfg.alpha_train,
                cfg.part, 0.0, obj_cfg, layer_range,
            ).total
            for sign in (1.0, -1.0)
        ]
        final_scores.append(float(np.mean(totals)))
    final_reg = regularizer(directions, cfg.corr_mode) if cfg.k > 1 else 0.0

    trained = [
        LatentDirection(cfg.space, d / np.linalg.norm(d), cfg.part, layer_range, name=f"{cfg.part.name}_{i}")
        for i, d in enumerate(directions)
    ]
    report = TrainingReport(
        objective_trace=tuple(trace),
        final_scores=tuple(final_scores),
        final_regularizer=float(final_reg),
        wall_time_seconds=wall,
        steps=steps,
        config_snapshot=cfg.snapshot(),
    )
    return trained, report
