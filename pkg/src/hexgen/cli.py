"""Command-line interface: transform, metrics, train, generate, render.

Exit codes: 0 success, 1 invariant failure, 2 usage or I/O error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import dataio, models, plotting
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .metrics import metric_report
from .pooling import MappingIntegrityError
from .resample import METHODS, DimensionError, SquareImage, compute_overlap_map, fit_hex_geometry, square_to_hex

DATASETS = ("mnist", "cifar10")


class UsageError(Exception):
    pass


def _echo(args: argparse.Namespace) -> None:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    print(json.dumps(cfg, sort_keys=True, default=str))


# -- transform / metrics / render --------------------------------------------------
def cmd_transform(args) -> int:
    data = dataio.load_png(args.input)
    h, w = data.shape[:2]
    geom = fit_hex_geometry(h, w)
    hex_img = square_to_hex(SquareImage(data.astype(np.float64)), geom, args.method)
    hex_img = type(hex_img)(geom, hex_img.data.astype(np.float32))
    dataio.write_hex_image(args.output, hex_img)
    print(f"rows={geom.rows} cols={geom.cols} circumradius={geom.circumradius!r}")
    return 0


def cmd_metrics(args) -> int:
    sq = dataio.load_png(args.square).astype(np.float64)
    hx = dataio.read_hex_image(args.hex)
    h, w = sq.shape[:2]
    geom = fit_hex_geometry(h, w)
    if hx.geometry.shape != geom.shape:
        raise DimensionError(f"hex grid {hx.geometry.shape} does not fit a {h}x{w} image ({geom.shape})")
    report = metric_report(sq, hx.data.astype(np.float64), compute_overlap_map(geom, h, w))
    print(report.csv_header())
    print(report.csv_row())
    return 0


def cmd_render(args) -> int:
    img = dataio.read_hex_image(args.input)
    out = dataio.render_hex_to_png(img, args.output, args.scale)
    print(f"wrote {args.output} ({out.shape[1]}x{out.shape[0]})")
    return 0


# -- datasets ------------------------------------------------------------------------
def data_root(args) -> Path:
    if args.data_root:
        return Path(args.data_root)
    return Path(os.environ.get("HEXGEN_DATA", "data"))


def load_dataset(args, split: str) -> dataio.Dataset:
    name = args.dataset
    root = data_root(args)
    if name == "mnist":
        ds = dataio.load_mnist(root / "mnist", split)
    elif name == "cifar10":
        ds = dataio.load_cifar10(root / "cifar10", split)
    elif Path(name).is_dir():
        ds = dataio.load_image_folder(name, split)
    else:
        raise UsageError(f"unknown dataset {name!r} (expected {', '.join(DATASETS)} or a folder)")
    return ds.limit(args.limit)


# -- train ---------------------------------------------------------------------------
def model_config(args, class_count: int) -> models.ModelConfig:
    if args.family == "swwae":
        return models.ModelConfig(family="swwae", lattice=args.lattice, seed=args.seed, class_count=class_count)
    return models.acgan_config(args.lattice, seed=args.seed, class_count=class_count)


def cmd_train(args) -> int:
    ds = load_dataset(args, "train")
    if len(ds) == 0:
        raise UsageError("dataset is empty")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "checkpoint.hxck"
    config = model_config(args, ds.class_count)
    built = models.build_models(config)
    if config.family == "swwae":
        optimizers = {"model": models.Adam(built.named_parameters(), args.lr, args.beta1, args.beta2)}
    else:
        trainer = models.ACGANTrainer(*built, args.lr, args.beta1, args.beta2)
        optimizers = {"generator": trainer.g_opt, "discriminator": trainer.d_opt}

    start = 0
    log_path = out / "epochs.jsonl"
    if args.resume and ckpt.exists():
        start = models.restore_checkpoint(built, optimizers, load_checkpoint(ckpt))
        print(f"resumed from {ckpt} at epoch {start}")
    elif log_path.exists():
        log_path.unlink()
    (out / "config.json").write_text(json.dumps(config.to_dict(), sort_keys=True, indent=2) + "\n")

    def log_epoch(entry):
        with log_path.open("a") as f:
            f.write(json.dumps(entry, sort_keys=True) + "\n")
        print(json.dumps(entry, sort_keys=True))

    if config.family == "swwae":
        models.train_swwae(built, ds.images, args.epochs, args.batch_size, optimizer=optimizers["model"],
                           start_epoch=start, on_epoch=log_epoch)
        final = models.evaluate_generation(built, ds.images, batch=args.batch_size)
        extra = {}
    else:
        gen, disc = built
        models.train_acgan(gen, disc, ds.images, ds.labels, args.epochs, args.batch_size, trainer=trainer,
                           start_epoch=start, on_epoch=log_epoch)
        ref = _reference_split(args, ds)
        final = models.evaluate_generation(gen, ref.images, ref.labels, batch=args.batch_size, seed=args.seed)
        held = models.acgan_inputs(gen, ref.images[:args.batch_size])
        extra = {"disc_accuracy": trainer.real_fake_accuracy(held, args.seed)}

    save_checkpoint(ckpt, models.checkpoint_tensors(built, optimizers, start + args.epochs))
    counts = models.parameter_counts(built)
    header = "family,lattice,epochs," + ",".join(f"params_{k}" for k in counts) + "," + final.csv_header()
    row = f"{config.family},{config.lattice},{start + args.epochs}," + ",".join(map(str, counts.values()))
    row += "," + final.csv_row()
    for k, v in extra.items():
        header += f",{k}"
        row += f",{v!r}"
    (out / "report.csv").write_text(header + "\n" + row + "\n")
    print(header)
    print(row)
    entries = [json.loads(line) for line in log_path.read_text().splitlines()]
    plotting.loss_curve(entries, out / "loss.png")
    return 0


def _reference_split(args, train: dataio.Dataset) -> dataio.Dataset:
    """Test split for class-paired evaluation, falling back to the training data."""
    try:
        return load_dataset(argparse.Namespace(**{**vars(args), "limit": None}), "test")
    except (FileNotFoundError, dataio.DataFormatError):
        return train


# -- generate ------------------------------------------------------------------------
def load_trained(checkpoint: Path):
    cfg_path = checkpoint.parent / "config.json"
    if not cfg_path.exists():
        raise UsageError(f"missing model config {cfg_path}")
    config = models.ModelConfig.from_dict(json.loads(cfg_path.read_text()))
    built = models.build_models(config)
    models.restore_checkpoint(built, {}, load_checkpoint(checkpoint))
    return config, built


def cmd_generate(args) -> int:
    config, built = load_trained(Path(args.checkpoint))
    if config.family != "acgan":
        raise UsageError("generate needs an acgan checkpoint")
    gen, _ = built
    classes = args.classes if args.classes else list(range(config.class_count))
    if min(classes) < 0 or max(classes) >= config.class_count:
        raise UsageError(f"classes must lie in [0, {config.class_count})")
    labels = np.repeat(classes, args.samples)
    images = models.generate(gen, labels, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    shown, titles = [], []
    for n, (k, img) in enumerate(zip(labels, images)):
        i = n % args.samples
        path = out / f"class{k}_sample{i}.png"
        if config.lattice == "hex":
            geom = fit_hex_geometry(*config.input_shape[:2])
            img = dataio.render_hex_to_png(dataio.HexImage(geom, img), path, args.scale)
        else:
            dataio.save_png(path, img)
        shown.append(img)
        titles.append(f"{k}/{i}")
        print(path)
    plotting.image_grid(shown, titles, out / "samples.png", cols=min(10, len(shown)))
    return 0


# -- entry ---------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = argparse.ArgumentParser(prog="hexgen", description="Hexagonal lattice image tools.", formatter_class=fmt)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("transform", help="square PNG -> HEXI hexagonal image", formatter_class=fmt)
    t.add_argument("input", help="input PNG")
    t.add_argument("output", help="output .hexi file")
    t.add_argument("--method", choices=METHODS, default="area", help="resampling method")
    t.set_defaults(func=cmd_transform)

    m = sub.add_parser("metrics", help="area-weighted MSE/PSNR/MAE as CSV", formatter_class=fmt)
    m.add_argument("square", help="square PNG")
    m.add_argument("hex", help="HEXI file")
    m.set_defaults(func=cmd_metrics)

    tr = sub.add_parser("train", help="train an SWWAE or ACGAN", formatter_class=fmt)
    tr.add_argument("--family", choices=("swwae", "acgan"), default="swwae")
    tr.add_argument("--lattice", choices=("square", "hex"), default="hex")
    tr.add_argument("--dataset", default="mnist", help="mnist, cifar10 or a class-per-folder directory")
    tr.add_argument("--data-root", default=None, help="dataset root (default: $HEXGEN_DATA or ./data)")
    tr.add_argument("--limit", type=int, default=None, help="use only the first N training images")
    tr.add_argument("--epochs", type=int, default=1)
    tr.add_argument("--batch-size", type=int, default=100)
    tr.add_argument("--lr", type=float, default=2e-4)
    tr.add_argument("--beta1", type=float, default=0.5)
    tr.add_argument("--beta2", type=float, default=0.999)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--out", default="run", help="output directory")
    tr.add_argument("--resume", action="store_true", help="continue from OUT/checkpoint.hxck")
    tr.set_defaults(func=cmd_train)

    g = sub.add_parser("generate", help="render ACGAN samples per class", formatter_class=fmt)
    g.add_argument("checkpoint", help="checkpoint.hxck with config.json alongside")
    g.add_argument("--out", default="samples")
    g.add_argument("--classes", type=int, nargs="*", default=None, help="class ids (default: all)")
    g.add_argument("--samples", type=int, default=1, help="samples per class")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--scale", type=float, default=8.0, help="pixels per unit length for hex rendering")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("render", help="HEXI -> PNG with filled hexagons", formatter_class=fmt)
    r.add_argument("input")
    r.add_argument("output")
    r.add_argument("--scale", type=float, default=8.0, help="pixels per unit length (>= 4)")
    r.set_defaults(func=cmd_render)
    return p


IO_ERRORS = (OSError, UsageError, dataio.DataFormatError, CheckpointError, DimensionError,
             models.ConfigError, KeyError, ValueError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _echo(args)
    try:
        return args.func(args)
    except (AssertionError, MappingIntegrityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except IO_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
