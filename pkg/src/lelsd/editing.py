"""Edit sessions, distance-calibrated strength search, and latent inversion.

A session is an immutable value: a base code plus a stack of edits, bound to
one generator by fingerprint. Rendering composes the stack into a single
displacement, so edits commute and cancel exactly in latent space.
"""
from __future__ import annotations

import abc
import base64
import math
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .errors import (
    CalibrationOutOfRange,
    FingerprintMismatch,
    InvalidInput,
    NonMonotoneDistance,
    ShapeMismatch,
    SpaceMismatch,
    UnknownDirection,
    UnsupportedCapability,
)
from .generators import GeneratorBackend
from .latent import EditOp, LatentCode, LatentDirection, LatentSpace, SpaceKind, apply_edit, compose_edits

SESSION_FORMAT_VERSION = 1

# Strength search: brackets grow 1, 2, 4, ... up to 2**20, then bisect.
MAX_BRACKET_DOUBLINGS = 21
MAX_BISECT_ITERATIONS = 40
CALIBRATION_REL_TOL = 1e-3


@dataclass(frozen=True)
class EditSession:
    session_id: str
    base_code: LatentCode
    backend_fingerprint: str
    edit_stack: tuple[EditOp, ...] = ()

    def current_code(self) -> LatentCode:
        return compose_edits(self.base_code, self.edit_stack)


def push_edit(session: EditSession, op: EditOp) -> EditSession:
    if op.direction.space != session.base_code.space:
        raise SpaceMismatch("edit direction space does not match session space")
    return replace(session, edit_stack=(*session.edit_stack, op))


def pop_edit(session: EditSession) -> EditSession:
    """Undo the most recent edit; popping an empty stack is a no-op."""
    if not session.edit_stack:
        return session
    return replace(session, edit_stack=session.edit_stack[:-1])


def render(session: EditSession, backend: GeneratorBackend) -> np.ndarray:
    if session.backend_fingerprint != backend.fingerprint:
        raise FingerprintMismatch(
            f"session is bound to generator {session.backend_fingerprint[:12]}..., active is {backend.fingerprint[:12]}..."
        )
    return backend.forward(session.current_code()).image


class DistanceMetric(abc.ABC):
    """Image dissimilarity: zero at identity, non-negative, symmetric."""

    name: str = "metric"

    @abc.abstractmethod
    def distance(self, a: np.ndarray, b: np.ndarray) -> float: ...

    def __call__(self, a: np.ndarray, b: np.ndarray) -> float:
        return self.distance(a, b)


class MeanPixelL2(DistanceMetric):
    """Mean over pixels of the per-pixel channel L2 norm.

    Degree-1 homogeneous in the image difference, so on an affine generator
    the distance grows exactly linearly in |alpha|.
    """

    name = "mean_pixel_l2"

    def distance(self, a: np.ndarray, b: np.ndarray) -> float:
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if a.shape != b.shape:
            raise ShapeMismatch(f"image shapes differ: {a.shape} vs {b.shape}")
        return float(np.sqrt(((a - b) ** 2).sum(axis=0)).mean())


def calibrate_alpha(
    session: EditSession,
    direction: LatentDirection,
    target_d: float,
    metric: DistanceMetric,
    backend: GeneratorBackend,
) -> tuple[float, float]:
    """Find the negative and positive strengths whose edit sits at the target
    distance from the session's current render.

    Assumes distance grows with |alpha| on each sign branch: expands a
    geometric bracket, then bisects until |distance - target| <=
    1e-3 * max(target, 1e-6). A strictly decreasing run of three expansion
    probes raises NonMonotoneDistance; exceeding the bracket cap raises
    CalibrationOutOfRange.
    """
    if not (math.isfinite(target_d) and target_d >= 0):
        raise InvalidInput(f"target distance must be >= 0, got {target_d!r}")
    if session.backend_fingerprint != backend.fingerprint:
        raise FingerprintMismatch("session is bound to a different generator")
    if target_d == 0.0:
        return (0.0, 0.0)
    current = session.current_code()
    base_image = backend.forward(current).image

    def dist_at(alpha: float) -> float:
        edited = apply_edit(current, EditOp(direction, alpha))
        return metric.distance(base_image, backend.forward(edited).image)

    tol = CALIBRATION_REL_TOL * max(target_d, 1e-6)
    alpha_pos = _solve_branch(dist_at, +1.0, target_d, tol)
    alpha_neg = _solve_branch(dist_at, -1.0, target_d, tol)
    return (alpha_neg, alpha_pos)


def _solve_branch(dist_at, sign: float, target: float, tol: float) -> float:
    lo, lo_d = 0.0, 0.0
    hi = None
    magnitude = 1.0
    prev_d = None
    decreasing_run = 0
    for _ in range(MAX_BRACKET_DOUBLINGS):
        d = dist_at(sign * magnitude)
        if prev_d is not None and d < prev_d - max(1e-12, 1e-9 * prev_d):
            decreasing_run += 1
            if decreasing_run >= 2:
                raise NonMonotoneDistance(f"distance decreased while expanding the bracket near alpha={sign * magnitude}")
        else:
            decreasing_run = 0
        if d >= target:
            hi = magnitude
            break
        lo, lo_d = magnitude, d
        prev_d = d
        magnitude *= 2.0
    if hi is None:
        raise CalibrationOutOfRange(f"target distance {target} not reached within |alpha| <= {magnitude / 2.0}")
    best_alpha, best_err = hi, abs(dist_at(sign * hi) - target)
    if best_err <= tol:
        return sign * hi
    for _ in range(MAX_BISECT_ITERATIONS):
        mid = 0.5 * (lo + hi)
        d = dist_at(sign * mid)
        err = abs(d - target)
        if err < best_err:
            best_alpha, best_err = mid, err
        if err <= tol:
            return sign * mid
        if d < target:
            lo = mid
        else:
            hi = mid
    raise CalibrationOutOfRange(f"bisection did not reach the target distance within tolerance (best error {best_err})")


class InversionBackend(abc.ABC):
    """Projects an image into a generator's latent space."""

    target_space: LatentSpace

    @abc.abstractmethod
    def invert(self, image: np.ndarray) -> LatentCode: ...


class LeastSquaresInverter(InversionBackend):
    """Exact pseudo-inverse preimage for affine generators.

    Builds the effective linear map by forwarding basis vectors; only valid
    for backends whose forward is affine in the code (the planted generator
    with the squashing disabled).
    """

    def __init__(self, backend: GeneratorBackend):
        if not getattr(backend, "linear", False):
            raise UnsupportedCapability(f"{type(backend).__name__} is not affine; no reference inverter available")
        self._backend = backend
        self.target_space = backend.space
        dim = backend.space.total_dim
        origin = LatentCode(backend.space, np.zeros(dim))
        self._offset = backend.forward(origin).image.ravel()
        columns = []
        for i in range(dim):
            basis = np.zeros(dim)
            basis[i] = 1.0
            columns.append(backend.forward(LatentCode(backend.space, basis)).image.ravel() - self._offset)
        self._matrix = np.stack(columns, axis=1)
        self._pinv = np.linalg.pinv(self._matrix)

    def invert(self, image: np.ndarray) -> LatentCode:
        image = np.asarray(image, dtype=np.float64)
        if image.shape != self._backend.image_shape:
            raise ShapeMismatch(f"expected image shape {self._backend.image_shape}, got {image.shape}")
        values = self._pinv @ (image.ravel() - self._offset)
        return LatentCode(self.target_space, values)


def session_to_document(session: EditSession) -> dict:
    """Portable structured-text form: exact base code plus named edits."""
    space = session.base_code.space
    payload = base64.b64encode(np.ascontiguousarray(session.base_code.values, dtype="<f8").tobytes()).decode("ascii")
    return {
        "format_version": SESSION_FORMAT_VERSION,
        "session_id": session.session_id,
        "backend_fingerprint": session.backend_fingerprint,
        "space": {"kind": space.kind.value, "dim_per_layer": list(space.dim_per_layer)},
        "base_code": payload,
        "edits": [{"direction": op.direction.name, "alpha": op.alpha} for op in session.edit_stack],
    }


def session_from_document(doc: dict, directions: Mapping[str, LatentDirection]) -> EditSession:
    """Rebuild a session from its export, resolving direction names."""
    try:
        version = int(doc["format_version"])
        space = LatentSpace(SpaceKind(doc["space"]["kind"]), tuple(doc["space"]["dim_per_layer"]))
        raw = base64.b64decode(doc["base_code"].encode("ascii"), validate=True)
        edits = doc["edits"]
        session_id = doc["session_id"]
        fingerprint = doc["backend_fingerprint"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"malformed session document: {exc}") from exc
    if version != SESSION_FORMAT_VERSION:
        raise InvalidInput(f"unsupported session format version {version}")
    values = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    base = LatentCode(space, values)
    ops = []
    for entry in edits:
        name = entry["direction"]
        if name not in directions:
            raise UnknownDirection(f"direction {name!r} not available to replay session")
        ops.append(EditOp(directions[name], float(entry["alpha"])))
    return EditSession(session_id, base, fingerprint, tuple(ops))
