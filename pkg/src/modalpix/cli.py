"""Command-line entry point: ``modalpix <subcommand> [flags]``.

Every subcommand takes ``--seed``; all randomness is derived from it with
:func:`modalpix.seeding.derive_seed`.  Each run writes a JSON echo of its
resolved configuration next to its outputs.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

from .compositor import debug_sheet, fused_anchor, make_composite
from .dataset import SyntheticSpec, generate_synthetic, load_manifest, split, write_dataset
from .modality_mask import AvailabilitySpec
from .pixel_encoder import LayoutSpec, TextEncoder, save_png
from .seeding import derive_seed
from .text_embedding import (
    SkipGramConfig,
    build_vocab,
    load_embeddings,
    save_embeddings,
    tokenize,
    train_skipgram,
)
from .train_eval import METRICS, TrainConfig, evaluate, run_sweep, train
from .visual_net import ArchSpec, band_share, init_model, load_checkpoint, saliency_maps, save_checkpoint

log = logging.getLogger("modalpix")


class UsageError(Exception):
    """Raised for invalid flag values; reported with exit code 1."""


def _jsonable(obj):
    if is_dataclass(obj):
        return {k: _jsonable(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_config_echo(out_dir: Path, command: str, args: argparse.Namespace, **resolved) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    flags = {k: v for k, v in vars(args).items() if k not in ("func", "verbose")}
    payload = {"command": command, "flags": _jsonable(flags), "resolved": _jsonable(resolved)}
    path = out_dir / f"{command}.config.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _pair(text: str) -> tuple[int, int]:
    vals = _int_list(text.replace("x", ","))
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}")
    return vals


def _grid(text: str) -> list[tuple[int, int, int, int]]:
    cells = []
    for part in text.split(";"):
        if part.strip():
            cell = _int_list(part)
            if len(cell) != 4:
                raise argparse.ArgumentTypeError(f"grid cell needs 4 values, got {part!r}")
            cells.append(cell)
    return cells


def _layout(args, table) -> LayoutSpec:
    return LayoutSpec.for_table(table, block_scale=args.block_scale, grid_width=args.grid_width,
                                max_words=args.max_words)


def _arch(args, num_classes) -> ArchSpec:
    return ArchSpec(input_size=tuple(args.size), channels=tuple(args.channels),
                    hidden_dim=args.hidden, num_classes=num_classes)


def _train_cfg(args, train_img=100, train_txt=100) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size, learning_rate=args.lr,
        momentum=args.momentum, seed=derive_seed(args.seed, "train"), variant=args.variant,
        availability=AvailabilitySpec(train_img, train_txt, seed=derive_seed(args.seed, "train-mask")),
    )


def _load_split(args):
    records, k = load_manifest(args.manifest, size=tuple(args.size))
    train_set, test_set = split(records, args.train_fraction, derive_seed(args.seed, "split"))
    return train_set, test_set, k


# -- subcommands ------------------------------------------------------------

def cmd_synth(args):
    spec = SyntheticSpec(
        num_classes=args.classes, samples_per_class=args.per_class, image_size=tuple(args.size),
        keywords_per_class=args.keywords, words_per_sample=args.words,
        filler_vocab_size=args.fillers, image_noise_std=args.noise,
        text_keyword_prob=args.keyword_prob, image_confusion_prob=args.confusion,
        seed=derive_seed(args.seed, "synth"),
    )
    records, _ = generate_synthetic(spec)
    manifest = write_dataset(records, args.out)
    write_config_echo(Path(args.out), "synth", args, spec=spec)
    print(manifest)


def cmd_embed(args):
    records, _ = load_manifest(args.manifest, size=None)
    corpus = [tokenize(r.text) for r in records]
    cfg = SkipGramConfig(dim=args.dim, window=args.window, negatives=args.negatives, epochs=args.epochs,
                         learning_rate=args.lr, min_count=args.min_count, seed=derive_seed(args.seed, "embed"))
    vocab = build_vocab(corpus, cfg.min_count)
    corpus = [[t for t in sent if t in vocab] for sent in corpus]
    table = train_skipgram(corpus, vocab, cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_embeddings(table, out)
    write_config_echo(out.parent, "embed", args, skipgram=cfg, vocab_size=len(vocab))
    print(out)


def cmd_encode(args):
    table = load_embeddings(args.emb)
    layout = _layout(args, table)
    enc = TextEncoder(table, layout).encode(args.text)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_png(enc.pixels, out)
    write_config_echo(out.parent, "encode", args, layout=layout, word_count=enc.word_count,
                      oov_count=enc.oov_count)
    print(out)


def cmd_compose(args):
    records, _ = load_manifest(args.manifest, size=tuple(args.size))
    table = load_embeddings(args.emb)
    layout = _layout(args, table)
    encoder = TextEncoder(table, layout)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for rec in records[: args.limit]:
        save_png(debug_sheet(rec.image, encoder(rec), tuple(args.size)), out / f"{rec.id}_sheet.png")
    write_config_echo(out, "compose", args, layout=layout)


def cmd_train(args):
    cfg = _train_cfg(args, args.train_img, args.train_txt)
    train_set, _, k = _load_split(args)
    table = load_embeddings(args.emb)
    encoder = TextEncoder(table, _layout(args, table))
    arch = _arch(args, k)
    params = init_model(arch, derive_seed(args.seed, "init"))
    params, hist = train(params, train_set, cfg, encoder)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(params, out / "model.ckpt")
    lines = ["epoch,loss,train_accuracy"]
    lines += [f"{i},{l:.6f},{a:.4f}" for i, (l, a) in enumerate(zip(hist.loss, hist.train_accuracy))]
    (out / "history.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_config_echo(out, "train", args, arch=arch, train=cfg, layout=encoder.layout)
    print(out / "model.ckpt")


def cmd_eval(args):
    _, test_set, k = _load_split(args)
    params = load_checkpoint(args.ckpt)
    table = load_embeddings(args.emb)
    encoder = TextEncoder(table, _layout(args, table))
    vals = evaluate(params, test_set, args.test_img, args.test_txt, derive_seed(args.seed, "test-mask"),
                    args.variant, encoder, args.metrics)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {m: round(100 * v, 1) for m, v in vals.items()}
    (out / "metrics.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    write_config_echo(out, "eval", args, arch=params.arch)
    for m, v in report.items():
        print(f"{m}\t{v:.1f}")


def cmd_sweep(args):
    cfg = _train_cfg(args)
    grid = args.grid or [(100, 100, 100, t) for t in args.test_txt_levels]
    for cell in grid:
        AvailabilitySpec(*cell)
    if not args.seeds:
        raise UsageError("--seeds must list at least one seed")
    train_set, test_set, k = _load_split(args)
    table = load_embeddings(args.emb)
    encoder = TextEncoder(table, _layout(args, table))
    arch = _arch(args, k)
    out = Path(args.out)
    report = run_sweep(arch, train_set, test_set, cfg, grid, args.seeds, encoder,
                       args.metrics, checkpoint_dir=out / "checkpoints",
                       metadata={"dataset": str(args.manifest), "seed": args.seed})
    report.write(out)
    write_config_echo(out, "sweep", args, arch=arch, grid=grid, layout=encoder.layout)
    sys.stdout.write(report.to_table())


def cmd_saliency(args):
    _, test_set, _ = _load_split(args)
    params = load_checkpoint(args.ckpt)
    table = load_embeddings(args.emb)
    encoder = TextEncoder(table, _layout(args, table))
    size = params.arch.input_size
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["id,label,band_share_with_text,band_share_without_text"]
    for rec in test_set[: args.limit]:
        enc = encoder(rec)
        with_text = make_composite(rec.image, enc, "fused", size, rec.label).canvases[0]
        maps = saliency_maps(params, np.stack([with_text, rec.image]), [rec.label] * 2)
        r0 = fused_anchor(size, enc.pixels.shape[:2])[0]
        shares = [band_share(m, r0) for m in maps]
        lines.append(f"{rec.id},{rec.label},{shares[0]:.4f},{shares[1]:.4f}")
        heat = [np.repeat((m * 255 + 0.5).astype(np.uint8)[..., None], 3, axis=2) for m in maps]
        sep = np.full((size[0], 2, 3), 255, dtype=np.uint8)
        save_png(np.concatenate([with_text, sep, heat[0], sep, rec.image, sep, heat[1]], axis=1),
                 out / f"{rec.id}_saliency.png")
    (out / "saliency.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_config_echo(out, "saliency", args, arch=params.arch)


# -- parser -----------------------------------------------------------------

def _add_layout(p):
    p.add_argument("--block-scale", type=int, default=4)
    p.add_argument("--grid-width", type=int, default=16, help="logical pixels per row")
    p.add_argument("--max-words", type=int, default=4)


def _add_data(p, ckpt=False):
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--emb", required=True, type=Path)
    if ckpt:
        p.add_argument("--ckpt", required=True, type=Path)
    p.add_argument("--size", type=_pair, default=(64, 64), help="model input HxW")
    p.add_argument("--train-fraction", type=float, default=0.75)
    _add_layout(p)


def _add_model(p):
    p.add_argument("--variant", choices=("joint", "fused"), default="joint")
    p.add_argument("--channels", type=_int_list, default=(16, 32, 64))
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.005)
    p.add_argument("--momentum", type=float, default=0.9)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modalpix", description="Text-as-pixels image+text classification.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--seed", type=int, default=0)
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, "write a synthetic image+text dataset")
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--per-class", type=int, default=200)
    p.add_argument("--size", type=_pair, default=(64, 64))
    p.add_argument("--keywords", type=int, default=3)
    p.add_argument("--words", type=int, default=4)
    p.add_argument("--fillers", type=int, default=20)
    p.add_argument("--noise", type=float, default=60.0)
    p.add_argument("--keyword-prob", type=float, default=0.6)
    p.add_argument("--confusion", type=float, default=0.15)
    p.add_argument("--out", required=True, type=Path)

    p = add("embed", cmd_embed, "train skip-gram embeddings on manifest texts")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--dim", type=int, default=36)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.025)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--out", required=True, type=Path)

    p = add("encode", cmd_encode, "encode a text as a PNG")
    p.add_argument("--text", required=True)
    p.add_argument("--emb", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    _add_layout(p)

    p = add("compose", cmd_compose, "write image | text canvas | fused debug sheets")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--emb", required=True, type=Path)
    p.add_argument("--size", type=_pair, default=(64, 64))
    p.add_argument("--limit", type=int, default=10)
    p.add_argument("--out", required=True, type=Path)
    _add_layout(p)

    p = add("train", cmd_train, "train a visual classifier")
    _add_data(p)
    _add_model(p)
    p.add_argument("--train-img", type=int, default=100)
    p.add_argument("--train-txt", type=int, default=100)
    p.add_argument("--out", required=True, type=Path)

    p = add("eval", cmd_eval, "evaluate a checkpoint on the test split")
    _add_data(p, ckpt=True)
    p.add_argument("--variant", choices=("joint", "fused"), default="joint")
    p.add_argument("--test-img", type=int, default=100)
    p.add_argument("--test-txt", type=int, default=100)
    p.add_argument("--metrics", type=lambda s: tuple(s.split(",")), default=("accuracy",))
    p.add_argument("--out", required=True, type=Path)

    p = add("sweep", cmd_sweep, "train/evaluate over an availability grid")
    _add_data(p)
    _add_model(p)
    p.add_argument("--seeds", type=_int_list, default=(0, 1, 2))
    p.add_argument("--test-txt-levels", type=_int_list, default=(100, 90, 70, 50, 30, 10))
    p.add_argument("--grid", type=_grid, default=None,
                   help="cells 'trainImg,trainTxt,testImg,testTxt;...' (overrides --test-txt-levels)")
    p.add_argument("--metrics", type=lambda s: tuple(s.split(",")), default=("accuracy",))
    p.add_argument("--out", required=True, type=Path)

    p = add("saliency", cmd_saliency, "input-gradient saliency for fused samples")
    _add_data(p, ckpt=True)
    p.add_argument("--limit", type=int, default=8)
    p.add_argument("--out", required=True, type=Path)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "metrics", None):
        bad = [m for m in args.metrics if m not in METRICS]
        if bad:
            print(f"modalpix: error: unknown metric(s) {', '.join(bad)}", file=sys.stderr)
            return 1
    try:
        args.func(args)
    except (ValueError, KeyError, OSError, FloatingPointError, UsageError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"modalpix: error: {msg}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
