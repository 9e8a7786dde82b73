"""Discovery and application of latent directions that edit one semantic
region of a generated image while leaving the rest unchanged.
"""

from .bank import BankEntry, DirectionBank, bank_from_training, load_bank, save_bank
from .editing import (
    DistanceMetric,
    EditSession,
    InversionBackend,
    LeastSquaresInverter,
    MeanPixelL2,
    calibrate_alpha,
    pop_edit,
    push_edit,
    render,
    session_from_document,
    session_to_document,
)
from .errors import LelsdError
from .generators import FeatureMapSet, GeneratorBackend, PlantedGenerator, backend_from_spec
from .latent import (
    EditOp,
    LatentCode,
    LatentDirection,
    LatentSpace,
    SpaceKind,
    apply_edit,
    compose_edits,
)
from .objective import (
    ObjectiveConfig,
    ScoreBreakdown,
    evaluate_objective,
    localization_score,
    localization_score_layer,
    objective_value_and_grad,
    regularizer,
)
from .segmentation import (
    HalfPlaneSegmenter,
    PartLabel,
    SegmentationMask,
    SegmenterBackend,
    aggregate_part_masks,
    downsample_mask,
)
from .training import (
    AdamState,
    TrainingConfig,
    TrainingReport,
    adam_step,
    lr_schedule,
    sample_latents,
    train_directions,
)

__all__ = [
    "AdamState",
    "BankEntry",
    "DirectionBank",
    "DistanceMetric",
    "EditOp",
    "EditSession",
    "FeatureMapSet",
    "GeneratorBackend",
    "HalfPlaneSegmenter",
    "InversionBackend",
    "LatentCode",
    "LatentDirection",
    "LatentSpace",
    "LeastSquaresInverter",
    "LelsdError",
    "MeanPixelL2",
    "ObjectiveConfig",
    "PartLabel",
    "PlantedGenerator",
    "ScoreBreakdown",
    "SegmentationMask",
    "SegmenterBackend",
    "SpaceKind",
    "TrainingConfig",
    "TrainingReport",
    "adam_step",
    "aggregate_part_masks",
    "apply_edit",
    "backend_from_spec",
    "bank_from_training",
    "calibrate_alpha",
    "compose_edits",
    "downsample_mask",
    "evaluate_objective",
    "load_bank",
    "localization_score",
    "localization_score_layer",
    "lr_schedule",
    "objective_value_and_grad",
    "pop_edit",
    "push_edit",
    "regularizer",
    "render",
    "sample_latents",
    "save_bank",
    "session_from_document",
    "session_to_document",
    "train_directions",
]

__version__ = "0.1.0"
