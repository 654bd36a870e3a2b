"""Command-line entry point: train, encode, decode, allocate, evaluate.

Exit codes: 0 success, 2 usage, 3 I/O or data errors, 4 infeasible budget,
5 base-codec failure.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import allocator, container, figures, metrics, training, weights_io
from .errors import CodecError, ConfigurationError, InfeasibleError
from .nn import NetworkConfig, parameter_count
from .ppm import load_image, write_ppm
from .tiling import grid_for_budget

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INFEASIBLE = 4
EXIT_CODEC = 5

IMAGE_SUFFIXES = {".ppm", ".png", ".jpg", ".jpeg", ".bmp"}


def _parse_grid(text):
    try:
        rows, cols = text.lower().split("x")
        return int(rows), int(cols)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 2x2, got {text!r}")


def _gather_images(directory):
    """Readable images from a directory, sorted by name; bad files are skipped."""
    paths = sorted(
        p for p in Path(directory).iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
    )
    names, images = [], []
    for p in paths:
        try:
            images.append(load_image(p))
            names.append(p.name)
        except (OSError, ValueError) as exc:
            print(f"warning: skipping unreadable image {p}: {exc}", file=sys.stderr)
    return names, images


def _load_models(weights_dir):
    models = {}
    for path in sorted(Path(weights_dir).glob("*.weights")):
        weights, network_id = weights_io.load_weights(path)
        models[network_id] = weights
    return models


def cmd_train(args):
    names, images = _gather_images(args.dataset_dir)
    if not images:
        print(f"error: no readable images in {args.dataset_dir}", file=sys.stderr)
        return EXIT_DATA
    codec = container.load_codec(args.codec_config)
    net_cfg = NetworkConfig(args.blocks, args.features, args.kernel)
    train_cfg = training.TrainingConfig(
        batch_size=args.batch_size,
        crop=args.crop,
        patience=args.patience,
        seed=args.seed,
        max_epochs=args.epochs,
        codec_quality=args.quality,
    )
    weights, history = training.train(images, net_cfg, train_cfg, codec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    weights_io.save_weights(out, weights, args.network_id)
    history_path = args.history or out.with_suffix(".history.jsonl")
    training.write_history(history_path, history)
    figure_path = out.with_suffix(".training.png")
    figures.plot_training_history(history, figure_path)
    print(
        f"trained {parameter_count(net_cfg)} parameters over {len(history)} epochs; "
        f"weights -> {out}, history -> {history_path}, figure -> {figure_path}"
    )
    return EXIT_OK


def cmd_encode(args):
    img = load_image(args.image)
    codec = container.load_codec(args.codec_config)
    stream = container.encode_image(img, args.quality, args.network_id, codec)
    Path(args.out).write_bytes(stream)
    _, h, w = img.shape
    print(f"{args.out}: {len(stream)} bytes, {metrics.bpp(len(stream), w, h):.4f} bpp")
    return EXIT_OK


def cmd_decode(args):
    stream = Path(args.container).read_bytes()
    codec = container.load_codec(args.codec_config)
    models = _load_models(args.weights_dir) if args.weights_dir else {}
    grid = args.grid
    if args.mem_budget is not None:
        network_id, payload = container.unwrap(stream)
        if network_id != container.PASSTHROUGH:
            if network_id not in models:
                raise KeyError(f"no model for network id 0x{network_id:02X}")
            probe = codec.decode(payload)
            grid = grid_for_budget(
                probe.shape[1], probe.shape[2],
                models[network_id].config, args.mem_budget,
            )
    img = container.decode_image(stream, models, codec, grid)
    write_ppm(args.out, img)
    print(f"{args.out}: {img.shape[2]}x{img.shape[1]}, grid {grid[0]}x{grid[1]}")
    return EXIT_OK


def _build_corpus_instance(args, codec):
    names, images = _gather_images(args.corpus)
    if not images:
        raise ConfigurationError(f"no readable images in {args.corpus}")
    qualities = [float(q) for q in args.qualities.split(",")]
    n, m = len(images), len(qualities)
    f = np.empty((n, m))
    b = np.empty((n, m))
    for i, img in enumerate(images):
        for j, q in enumerate(qualities):
            stream = container.encode_image(img, q, container.PASSTHROUGH, codec)
            decoded = codec.decode(stream[1:])
            diff = img.astype(np.float64) - decoded.astype(np.float64)
            f[i, j] = float(np.sum(diff * diff))
            b[i, j] = len(stream)
    return names, allocator.AllocationInstance(f, b, args.limit)


def cmd_allocate(args):
    if args.instance:
        names = None
        inst = allocator.parse_instance(Path(args.instance).read_text())
    else:
        codec = container.load_codec(args.codec_config)
        names, inst = _build_corpus_instance(args, codec)
    try:
        alloc = allocator.solve(inst)
    except InfeasibleError as exc:
        print(
            f"error: budget {inst.limit:g} infeasible; minimum achievable total "
            f"size is {exc.min_total_size:g}",
            file=sys.stderr,
        )
        return EXIT_INFEASIBLE
    obj = allocator.objective(inst, alloc)
    size = allocator.total_size(inst, alloc)
    lines = [
        "choices: " + " ".join(str(c) for c in alloc.choice),
        f"objective: {obj:g}",
        f"total_size: {size:g}",
    ]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    if args.figures_dir:
        fig_dir = Path(args.figures_dir)
        fig_dir.mkdir(parents=True, exist_ok=True)
        figures.plot_rate_distortion(
            inst.b, inst.f, alloc.choice, inst.limit, fig_dir / "allocation.png"
        )
    return EXIT_OK


def cmd_evaluate(args):
    orig_names, originals = _gather_images(args.originals)
    dec_names, decoded = _gather_images(args.decoded)
    if len(originals) != len(decoded):
        print(
            f"error: {len(originals)} originals but {len(decoded)} decoded images",
            file=sys.stderr,
        )
        return EXIT_DATA
    streams = sorted(Path(args.streams).iterdir()) if args.streams else None
    if streams is not None and len(streams) != len(originals):
        print(
            f"error: {len(originals)} originals but {len(streams)} streams",
            file=sys.stderr,
        )
        return EXIT_DATA
    sizes = [p.stat().st_size for p in streams] if streams else [0] * len(originals)
    per_image, aggregate = metrics.corpus_report(list(zip(originals, decoded)), sizes)

    rows = [
        {"name": name, "psnr_db": r.psnr_db, "ms_ssim": r.ms_ssim, "bpp": r.bpp}
        for name, r in zip(orig_names, per_image)
    ]
    rows.append(
        {
            "name": "__aggregate__",
            "psnr_db": aggregate.psnr_db,
            "ms_ssim": aggregate.ms_ssim,
            "bpp": aggregate.bpp,
        }
    )
    if args.format == "csv":
        lines = ["name,psnr_db,ms_ssim,bpp"]
        lines += [
            f"{r['name']},{r['psnr_db']},{r['ms_ssim']},{r['bpp']}" for r in rows
        ]
        text = "\n".join(lines) + "\n"
    else:
        text = "".join(json.dumps(r) + "\n" for r in rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.figures_dir:
        fig_dir = Path(args.figures_dir)
        fig_dir.mkdir(parents=True, exist_ok=True)
        figures.plot_quality_report(
            orig_names, per_image, aggregate, fig_dir / "quality.png"
        )
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="deartifact",
        description="Residual-CNN post-processing pipeline for compressed images",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--codec-config", default=None,
                        help="codec config file; default is the built-in toy codec")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train a model on a directory of images")
    p.add_argument("dataset_dir")
    p.add_argument("--out", required=True, help="output weights file")
    p.add_argument("--history", default=None, help="history file (json lines)")
    p.add_argument("--blocks", type=int, default=2)
    p.add_argument("--features", type=int, default=16)
    p.add_argument("--kernel", type=int, default=3)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--crop", type=int, default=48)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--patience", type=int, default=50)
    p.add_argument("--quality", type=float, default=40.0)
    p.add_argument("--network-id", type=lambda s: int(s, 0), default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("encode", parents=[common], help="encode an image to a container")
    p.add_argument("image")
    p.add_argument("--out", required=True)
    p.add_argument("--quality", type=float, default=40.0)
    p.add_argument("--network-id", type=lambda s: int(s, 0), default=container.PASSTHROUGH)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", parents=[common], help="decode a container to an image")
    p.add_argument("container")
    p.add_argument("--out", required=True)
    p.add_argument("--weights-dir", default=None)
    p.add_argument("--grid", type=_parse_grid, default=(2, 2))
    p.add_argument("--mem-budget", type=int, default=None,
                   help="derive the smallest grid fitting this many bytes")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("allocate", parents=[common],
                       help="pick per-image qualities under a size budget")
    p.add_argument("--instance", default=None, help="instance interchange file")
    p.add_argument("--corpus", default=None, help="directory of images")
    p.add_argument("--qualities", default=None, help="comma-separated quality steps")
    p.add_argument("--limit", type=float, default=None, help="total size budget, bytes")
    p.add_argument("--out", default=None)
    p.add_argument("--figures-dir", default=None)
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("evaluate", parents=[common], help="quality report for a corpus")
    p.add_argument("--originals", required=True)
    p.add_argument("--decoded", required=True)
    p.add_argument("--streams", default=None)
    p.add_argument("--format", choices=("csv", "json-lines"), default="csv")
    p.add_argument("--out", default=None)
    p.add_argument("--figures-dir", default=None)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "allocate":
        if not args.instance and not (args.corpus and args.qualities and args.limit is not None):
            parser.error("allocate needs --instance or --corpus with --qualities and --limit")
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except CodecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CODEC
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
