#!/usr/bin/env python3
"""Write a demo bank of exact axis directions for the planted generator.

The planted coordinate axes are perfect localized directions by
construction, so this bank needs no training; it backs UI demos and
end-to-end tests.
"""
import argparse
from pathlib import Path

import numpy as np

from lelsd import BankEntry, DirectionBank, PartLabel, PlantedGenerator, save_bank


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("demo.lelsd.json"))
    parser.add_argument("--backend-seed", type=int, default=0)
    args = parser.parse_args()

    backend = PlantedGenerator(seed=args.backend_seed)
    left = PartLabel("left", 0)
    right = PartLabel("right", 1)
    entries = []
    for i, part in ((0, left), (1, left), (4, right), (5, right)):
        vec = np.zeros(backend.space.total_dim, dtype=np.float32)
        vec[i] = 1.0
        entries.append(
            BankEntry(
                name=f"{part.name}_axis{i}",
                part=part,
                layer_range=(0, 0),
                vector=vec,
                training_config={"synthetic": True},
                final_score=1.0,
            )
        )
    bank = DirectionBank(
        backend.fingerprint, backend.space, tuple(entries), backend_descriptor=backend.descriptor()
    )
    save_bank(bank, args.out)
    print(f"wrote {args.out} with {len(entries)} axis directions")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
