"""Command-line interface.

Subcommands: ``gen`` builds a synthetic corpus on disk, ``decode`` turns one
heatmap file into a JSON landmark, ``sweep`` runs the accuracy grid,
``bench`` measures decode throughput, and ``losses`` evaluates the loss
formulas on a corpus pair.  Exit status is 0 on success and 2 on any
domain/configuration error, so reports can gate CI.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .bench import (
    REPORT_FORMATS,
    SweepSpec,
    default_sweep_spec,
    default_throughput_spec,
    emit_report,
    run_accuracy_sweep,
    run_throughput,
)
from .codec import EncodingConfig, EncodingMode, read_heatmap, read_heatmap_json
from .decoders import DECODERS, DecodeConfig, decode
from .errors import HeatdecError
from .metrics import combined_loss, ma_loss, mse_loss
from .synth import (
    HeatmapStack,
    NoiseKind,
    NoiseSpec,
    build_corpus,
    gen_landmarks,
    load_corpus,
    save_corpus,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heatdec",
        description="Sub-pixel landmark decoding from Gaussian heatmaps, with benchmarks.",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the spec/corpus seed")
    parser.add_argument("--config", type=Path, default=None, help="JSON sweep spec")
    parser.add_argument("--out", type=Path, default=None, help="write output here instead of stdout")
    parser.add_argument("--format", choices=REPORT_FORMATS, default="json", help="report format")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic corpus directory")
    gen.add_argument("out_dir", type=Path)
    gen.add_argument("--count", type=int, default=100)
    gen.add_argument("--image-size", type=int, default=256)
    gen.add_argument("--resolution", type=int, default=64, help="square heatmap side")
    gen.add_argument("--sigma", type=float, default=2.0)
    gen.add_argument("--mode", choices=[m.value for m in EncodingMode], default="unbiased")
    gen.add_argument("--noise", choices=[k.value for k in NoiseKind], default="none")
    gen.add_argument("--amplitude", type=float, default=0.0)

    dec = sub.add_parser("decode", help="decode one heatmap file to a JSON landmark")
    dec.add_argument("heatmap", type=Path, help=".hmap container or .json debug form")
    dec.add_argument("--decoder", choices=DECODERS, default="pppsc")
    dec.add_argument("--k", type=int, default=10)
    dec.add_argument("--tau", type=int, default=10)
    dec.add_argument("--window", type=float, default=1.0)
    dec.add_argument("--max-iter", type=int, default=20)
    dec.add_argument("--conv-tol", type=float, default=1e-8)
    dec.add_argument("--sigma", type=float, default=None, help="override the container sigma")

    sub.add_parser("sweep", help="run the accuracy sweep (default or --config spec)")
    sub.add_parser("bench", help="run the throughput benchmark (default or --config spec)")

    losses = sub.add_parser("losses", help="evaluate losses on a prediction/ground-truth corpus pair")
    losses.add_argument("pred_dir", type=Path)
    losses.add_argument("gt_dir", type=Path)
    losses.add_argument("--k", type=int, default=10)
    losses.add_argument("--weight", type=float, default=6.0)
    losses.add_argument("--mask-source", choices=("gt", "pred"), default="gt")
    return parser


def _emit(args: argparse.Namespace, text: str) -> None:
    if args.out is not None:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _load_spec(args: argparse.Namespace, default: SweepSpec) -> SweepSpec:
    spec = default
    if args.config is not None:
        spec = SweepSpec.from_json_dict(json.loads(args.config.read_text(encoding="utf-8")))
    if args.seed is not None and not isinstance(spec.corpus, str):
        corpus = dataclasses.replace(
            spec.corpus,
            seed=args.seed,
            noise=dataclasses.replace(spec.corpus.noise, seed=args.seed),
        )
        spec = dataclasses.replace(spec, corpus=corpus)
    return spec


def _cmd_gen(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else 7
    side = args.resolution
    if args.image_size % side != 0:
        raise HeatdecError(f"image size {args.image_size} is not divisible by resolution {side}")
    cfg = EncodingConfig(
        downsample=args.image_size // side,
        sigma=args.sigma,
        heatmap_h=side,
        heatmap_w=side,
        mode=EncodingMode(args.mode),
    )
    noise = NoiseSpec(kind=NoiseKind(args.noise), amplitude=args.amplitude, seed=seed)
    landmarks = gen_landmarks(args.count, (args.image_size, args.image_size), seed)
    items = build_corpus(landmarks, cfg, noise)
    manifest = save_corpus(args.out_dir, items, cfg, noise)
    _emit(args, json.dumps({"manifest": str(manifest), "items": len(items)}))
    return 0


def _cmd_decode(args: argparse.Namespace) -> int:
    if args.heatmap.suffix == ".json":
        heatmap, header = read_heatmap_json(args.heatmap)
    else:
        heatmap, header = read_heatmap(args.heatmap)
    sigma = args.sigma if args.sigma is not None else header.sigma
    cfg = DecodeConfig(
        k=args.k,
        tau=args.tau,
        window=args.window,
        max_iter=args.max_iter,
        conv_tol=args.conv_tol,
        sigma=sigma,
    )
    result = decode(heatmap, args.decoder, cfg)
    _emit(args, json.dumps(result.to_json_dict(args.decoder)))
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    spec = _load_spec(args, default_sweep_spec(args.seed if args.seed is not None else 7))
    report = run_accuracy_sweep(spec)
    _emit(args, emit_report(report, args.format))
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    spec = _load_spec(args, default_throughput_spec(args.seed if args.seed is not None else 7))
    report = run_throughput(spec)
    _emit(args, emit_report(report, args.format))
    return 0


def _corpus_stack(directory: Path) -> HeatmapStack:
    items, _cfg, _noise = load_corpus(directory)
    maps = tuple(m for item in items for m in item.stack.maps)
    ids = tuple(str(i) for i in range(len(maps)))
    return HeatmapStack(maps=maps, landmark_ids=ids)


def _cmd_losses(args: argparse.Namespace) -> int:
    pred = _corpus_stack(args.pred_dir)
    gt = _corpus_stack(args.gt_dir)
    mse = mse_loss(pred, gt)
    ma = ma_loss(pred, gt, args.k, args.mask_source)
    combined = combined_loss(pred, gt, args.k, args.weight, args.mask_source)
    _emit(
        args,
        json.dumps(
            {
                "mse": mse.value,
                "ma": ma.value,
                "combined": combined.to_json_dict(),
                "k": args.k,
                "weight": args.weight,
                "mask_source": args.mask_source,
            },
            indent=2,
        ),
    )
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "decode": _cmd_decode,
    "sweep": _cmd_sweep,
    "bench": _cmd_bench,
    "losses": _cmd_losses,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except HeatdecError as exc:
        print(f"heatdec: error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"heatdec: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
