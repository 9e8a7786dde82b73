"""Versioned persistence for trained direction collections.

A bank is a JSON document: human-readable metadata, base64-encoded 32-bit
little-endian floats for the vectors (bit-exact round trip), a snapshot of
the training configuration for provenance, and the fingerprint of the
generator the directions were trained against. Files are written atomically.
"""
from __future__ import annotations

import base64
import binascii
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import MalformedBank, UnknownDirection, UnsupportedVersion
from .latent import LatentDirection, LatentSpace, SpaceKind
from .segmentation import PartLabel

BANK_FORMAT_VERSION = 1
BANK_SUFFIX = ".lelsd.json"


@dataclass(frozen=True)
class BankEntry:
    name: str
    part: PartLabel
    layer_range: tuple[int, int]
    vector: np.ndarray
    training_config: dict = field(default_factory=dict)
    final_score: float = 0.0

    def __post_init__(self) -> None:
        vec = np.ascontiguousarray(self.vector, dtype=np.float32)
        if vec.ndim != 1:
            raise MalformedBank(f"entry {self.name!r}: vector must be flat, got shape {vec.shape}")
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)
        object.__setattr__(self, "layer_range", (int(self.layer_range[0]), int(self.layer_range[1])))


@dataclass(frozen=True)
class DirectionBank:
    generator_fingerprint: str
    space: LatentSpace
    entries: tuple[BankEntry, ...]
    format_version: int = BANK_FORMAT_VERSION
    backend_descriptor: dict | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.generator_fingerprint:
            raise MalformedBank("bank has no generator fingerprint")
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise MalformedBank(f"duplicate direction names in bank: {sorted(names)}")
        for entry in self.entries:
            if entry.vector.size != self.space.total_dim:
                raise MalformedBank(
                    f"entry {entry.name!r}: vector length {entry.vector.size} does not match space dimension {self.space.total_dim}"
                )

    def direction(self, name: str) -> LatentDirection:
        for entry in self.entries:
            if entry.name == name:
                return LatentDirection(
                    self.space, entry.vector.astype(np.float64), entry.part, entry.layer_range, name=entry.name
                )
        raise UnknownDirection(f"no direction named {name!r} in bank")

    def names(self) -> list[str]:
        return [e.name for e in self.entries]


def bank_from_training(backend, directions: Sequence[LatentDirection], report, cfg) -> DirectionBank:
    """Package trained directions with their provenance."""
    entries = tuple(
        BankEntry(
            name=d.name,
            part=d.part,
            layer_range=d.layer_range,
            vector=d.values.astype(np.float32),
            training_config=cfg.snapshot(),
            final_score=float(report.final_scores[i]),
        )
        for i, d in enumerate(directions)
    )
    descriptor = backend.descriptor() if hasattr(backend, "descriptor") else None
    return DirectionBank(backend.fingerprint, backend.space, entries, backend_descriptor=descriptor)


def _encode_vector(vec: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(vec, dtype="<f4").tobytes()).decode("ascii")


def _decode_vector(payload: str, entry_name: str) -> np.ndarray:
    try:
        raw = base64.b64decode(payload.encode("ascii"), validate=True)
    except (binascii.Error, UnicodeEncodeError, AttributeError) as exc:
        raise MalformedBank(f"entry {entry_name!r}: vector payload is not valid base64") from exc
    if len(raw) % 4 != 0:
        raise MalformedBank(f"entry {entry_name!r}: vector payload is truncated ({len(raw)} bytes)")
    return np.frombuffer(raw, dtype="<f4").astype(np.float32)


def bank_to_document(bank: DirectionBank) -> dict:
    return {
        "format_version": bank.format_version,
        "generator_fingerprint": bank.generator_fingerprint,
        "backend_descriptor": bank.backend_descriptor,
        "space": {"kind": bank.space.kind.value, "dim_per_layer": list(bank.space.dim_per_layer)},
        "entries": [
            {
                "name": e.name,
                "part": {"name": e.part.name, "id": e.part.id},
                "layer_range": list(e.layer_range),
                "vector_payload": _encode_vector(e.vector),
                "training_config": e.training_config,
                "final_score": e.final_score,
            }
            for e in bank.entries
        ],
    }


def bank_from_document(doc: dict) -> DirectionBank:
    if not isinstance(doc, dict):
        raise MalformedBank("bank document must be a JSON object")
    version = doc.get("format_version")
    if version is None:
        raise MalformedBank("bank document has no format_version")
    if version != BANK_FORMAT_VERSION:
        raise UnsupportedVersion(f"bank format version {version} is not supported (expected {BANK_FORMAT_VERSION})")
    fingerprint = doc.get("generator_fingerprint")
    if not fingerprint:
        raise MalformedBank("bank document has no generator_fingerprint")
    try:
        space = LatentSpace(SpaceKind(doc["space"]["kind"]), tuple(doc["space"]["dim_per_layer"]))
        raw_entries = doc["entries"]
    except Exception as exc:
        raise MalformedBank(f"bank document structure invalid: {exc}") from exc
    entries = []
    for raw in raw_entries:
        try:
            name = raw["name"]
            part = PartLabel(raw["part"]["name"], int(raw["part"]["id"]))
            layer_range = (int(raw["layer_range"][0]), int(raw["layer_range"][1]))
            payload = raw["vector_payload"]
            training_config = raw.get("training_config", {})
            final_score = float(raw.get("final_score", 0.0))
        except Exception as exc:
            raise MalformedBank(f"bank entry malformed: {exc}") from exc
        vector = _decode_vector(payload, name)
        entries.append(BankEntry(name, part, layer_range, vector, training_config, final_score))
    return DirectionBank(fingerprint, space, tuple(entries), backend_descriptor=doc.get("backend_descriptor"))


def save_bank(bank: DirectionBank, path: str | Path) -> None:
    """Serialize atomically: write a sibling temp file, then rename over."""
    path = Path(path)
    text = json.dumps(bank_to_document(bank), indent=2)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
            handle.write("\n")
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def load_bank(path: str | Path) -> DirectionBank:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise MalformedBank(f"cannot read bank file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedBank(f"bank file {path} is not valid JSON: {exc}") from exc
    return bank_from_document(doc)
