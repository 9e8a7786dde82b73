"""Command-line interface: train directions, apply edits, calibrate strengths,
evaluate banks, list parts, and serve the HTTP API.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .bank import bank_from_training, load_bank, save_bank
from .editing import EditSession, MeanPixelL2, calibrate_alpha, push_edit, render
from .errors import InvalidInput, LelsdError, SpaceMismatch
from .generators import PlantedGenerator, backend_from_descriptor, backend_from_spec
from .imaging import encode_png
from .latent import EditOp, SpaceKind
from .objective import ObjectiveConfig, evaluate_objective
from .segmentation import HalfPlaneSegmenter
from .training import TrainingConfig, sample_latents, train_directions

DEFAULT_BACKEND = "planted:0"


def _add_backend_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--backend",
        default=None,
        help="generator spec, e.g. planted:0 or planted-linear:0 (default: bank descriptor or planted:0)",
    )


def _resolve_backend(args, bank=None) -> PlantedGenerator:
    if getattr(args, "backend", None):
        return backend_from_spec(args.backend)
    if bank is not None and bank.backend_descriptor:
        return backend_from_descriptor(bank.backend_descriptor)
    return backend_from_spec(DEFAULT_BACKEND)


def _parse_layer_range(text: str | None):
    if text is None:
        return None
    lo, _, hi = text.partition(":")
    try:
        return (int(lo), int(hi))
    except ValueError as exc:
        raise InvalidInput(f"--layer-range expects LO:HI, got {text!r}") from exc


def _parse_apply(text: str):
    name, sep, alpha = text.rpartition(":")
    if not sep or not name:
        raise InvalidInput(f"--apply expects NAME:ALPHA, got {text!r}")
    try:
        return name, float(alpha)
    except ValueError as exc:
        raise InvalidInput(f"--apply strength must be a number, got {alpha!r}") from exc


def cmd_train(args) -> int:
    backend = _resolve_backend(args)
    segmenter = HalfPlaneSegmenter.for_backend(backend)
    part = segmenter.part_by_name(args.part)
    if SpaceKind(args.space) != backend.space.kind:
        raise SpaceMismatch(f"backend exposes space {backend.space.kind.value!r}, not {args.space!r}")
    cfg = TrainingConfig(
        space=backend.space,
        part=part,
        num_samples=args.samples,
        batch_size=args.batch,
        lr0=args.lr,
        halve_every=args.halve_every,
        k=args.k,
        reg_c=args.reg_c,
        seed=args.seed,
        alpha_train=args.alpha_train,
        layer_range=_parse_layer_range(args.layer_range),
        aggregation=args.aggregation,
    )
    directions, report = train_directions(backend, segmenter, cfg)
    bank = bank_from_training(backend, directions, report, cfg)
    save_bank(bank, args.out)
    print(f"steps={report.steps}")
    print(f"wall_time_seconds={report.wall_time_seconds:.3f}")
    print(f"final_regularizer={report.final_regularizer:.6f}")
    for direction, score in zip(directions, report.final_scores):
        print(f"final_score[{direction.name}]={score:.6f}")
    print(f"bank={args.out}")
    if args.report:
        Path(args.report).write_text(
            json.dumps(
                {
                    "objective_trace": list(report.objective_trace),
                    "final_scores": list(report.final_scores),
                    "final_regularizer": report.final_regularizer,
                    "wall_time_seconds": report.wall_time_seconds,
                    "steps": report.steps,
                    "config": report.config_snapshot,
                },
                indent=2,
            )
            + "\n"
        )
    return 0


def cmd_edit(args) -> int:
    bank = load_bank(args.bank)
    backend = _resolve_backend(args, bank)
    code = sample_latents(backend.space, 1, args.seed)[0]
    session = EditSession("cli", code, backend.fingerprint)
    if bank.generator_fingerprint != backend.fingerprint:
        raise SpaceMismatch(f"bank {args.bank} was trained against a different generator")
    for item in args.apply or []:
        name, alpha = _parse_apply(item)
        session = push_edit(session, EditOp(bank.direction(name), alpha))
    image = render(session, backend)
    Path(args.out).write_bytes(encode_png(image))
    print(f"wrote {args.out} ({len(session.edit_stack)} edits)")
    return 0


def cmd_calibrate(args) -> int:
    bank = load_bank(args.bank)
    backend = _resolve_backend(args, bank)
    code = sample_latents(backend.space, 1, args.seed)[0]
    session = EditSession("cli", code, backend.fingerprint)
    alpha_neg, alpha_pos = calibrate_alpha(session, bank.direction(args.direction), args.distance, MeanPixelL2(), backend)
    print(f"alpha_neg={alpha_neg!r}")
    print(f"alpha_pos={alpha_pos!r}")
    return 0


def cmd_eval(args) -> int:
    bank = load_bank(args.bank)
    backend = _resolve_backend(args, bank)
    segmenter = HalfPlaneSegmenter.for_backend(backend)
    codes = sample_latents(backend.space, args.samples, args.seed)
    cfg = ObjectiveConfig(aggregation=args.aggregation)
    for name in bank.names():
        direction = bank.direction(name)
        totals = [
            evaluate_objective(backend, segmenter, codes, [direction], sign * args.alpha, direction.part, 0.0, cfg)
            for sign in (1.0, -1.0)
        ]
        per_layer = np.mean([b.per_layer for b in totals], axis=0)
        total = float(np.mean([b.total for b in totals]))
        layers = ",".join(f"{s:.6f}" for s in per_layer)
        print(f"direction={name} part={direction.part.name} per_layer={layers} total={total:.6f}")
    return 0


def cmd_parts(args) -> int:
    backend = _resolve_backend(args)
    segmenter = HalfPlaneSegmenter.for_backend(backend)
    for part in segmenter.vocabulary:
        print(f"{part.id}\t{part.name}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceState, create_app

    bank = load_bank(args.bank) if args.bank else None
    backend = _resolve_backend(args, bank)
    segmenter = HalfPlaneSegmenter.for_backend(backend)
    banks = (bank,) if bank else ()
    state = ServiceState(backend, segmenter, banks)
    app = create_app(state)
    if args.ui:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=args.ui, html=True), name="ui")
    port = args.port if args.port is not None else int(os.environ.get("LELSD_PORT", "8000"))
    uvicorn.run(app, host=args.host, port=port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lelsd", description="Localized latent-direction editing toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train directions and write a bank")
    p_train.add_argument("--space", default="z", help="latent space kind (default z)")
    p_train.add_argument("--part", default="left", help="part label to localize on")
    p_train.add_argument("--k", type=int, default=1, help="number of directions")
    p_train.add_argument("--reg-c", type=float, default=0.0, dest="reg_c", help="decorrelation coefficient")
    p_train.add_argument("--samples", type=int, default=800, help="latent sample budget per direction")
    p_train.add_argument("--batch", type=int, default=4, help="batch size")
    p_train.add_argument("--lr", type=float, default=1e-3, help="initial learning rate")
    p_train.add_argument("--halve-every", type=int, default=50, dest="halve_every", help="halve lr every N updates")
    p_train.add_argument("--alpha-train", type=float, default=3.0, dest="alpha_train", help="edit strength during training")
    p_train.add_argument("--seed", type=int, default=0, help="training seed")
    p_train.add_argument("--layer-range", default=None, dest="layer_range", help="inclusive LO:HI layer blocks to edit")
    p_train.add_argument("--aggregation", default="average", choices=["average", "union", "intersection"])
    p_train.add_argument("--out", required=True, help="bank file to write")
    p_train.add_argument("--report", default=None, help="optional JSON report path")
    _add_backend_flag(p_train)
    p_train.set_defaults(func=cmd_train)

    p_edit = sub.add_parser("edit", help="apply bank directions to a sampled code and write a PNG")
    p_edit.add_argument("--bank", required=True)
    p_edit.add_argument("--seed", type=int, default=0, help="seed for the base latent code")
    p_edit.add_argument("--apply", action="append", metavar="NAME:ALPHA", help="edit to apply (repeatable)")
    p_edit.add_argument("--out", required=True, help="output PNG path")
    _add_backend_flag(p_edit)
    p_edit.set_defaults(func=cmd_edit)

    p_cal = sub.add_parser("calibrate", help="find +/- strengths at a target distance")
    p_cal.add_argument("--bank", required=True)
    p_cal.add_argument("--seed", type=int, default=0)
    p_cal.add_argument("--direction", required=True)
    p_cal.add_argument("--distance", type=float, required=True)
    _add_backend_flag(p_cal)
    p_cal.set_defaults(func=cmd_calibrate)

    p_eval = sub.add_parser("eval", help="recompute localization scores for a bank on fresh samples")
    p_eval.add_argument("--bank", required=True)
    p_eval.add_argument("--samples", type=int, default=64)
    p_eval.add_argument("--seed", type=int, default=1234)
    p_eval.add_argument("--alpha", type=float, default=3.0)
    p_eval.add_argument("--aggregation", default="average", choices=["average", "union", "intersection"])
    _add_backend_flag(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_parts = sub.add_parser("parts", help="list the segmenter vocabulary")
    _add_backend_flag(p_parts)
    p_parts.set_defaults(func=cmd_parts)

    p_serve = sub.add_parser("serve", help="run the HTTP editing service")
    p_serve.add_argument("--port", type=int, default=None, help="port (default: LELSD_PORT or 8000)")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--bank", default=None, help="bank file to load")
    p_serve.add_argument("--ui", default=None, help="directory of built UI assets to serve at /")
    _add_backend_flag(p_serve)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LelsdError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
