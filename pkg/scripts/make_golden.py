#!/usr/bin/env python3
"""Regenerate the frozen origin featuremaps for the planted generator.

Only run this when the generator construction intentionally changes; the
test suite compares against the committed file bit-for-bit.
"""
from pathlib import Path

import numpy as np

from lelsd import LatentCode, PlantedGenerator

OUT = Path(__file__).resolve().parent.parent / "tests" / "golden" / "planted_seed0_origin.npz"


def main() -> int:
    backend = PlantedGenerator(seed=0)
    fm = backend.forward(LatentCode(backend.space, np.zeros(backend.space.total_dim)))
    OUT.parent.mkdir(parents=True, exist_ok=True)
    np.savez(OUT, layer0=fm.layers[0], image=fm.image)
    print(f"wrote {OUT}")
    print(f"generator fingerprint: {backend.fingerprint}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
