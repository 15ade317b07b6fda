"""Training loop and metrics, plus the missing-modality sweep harness."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .modality_mask import AvailabilitySpec, apply_plan, make_plan
from .seeding import derive_seed
from .visual_net import (
    ArchSpec,
    Parameters,
    cross_entropy_step,
    flatten_batch,
    init_model,
    load_checkpoint,
    predict_proba,
    save_checkpoint,
    to_input,
)

log = logging.getLogger(__name__)

METRICS = ("accuracy", "auroc", "f1_macro")


# -- metrics ----------------------------------------------------------------

def accuracy(predictions, labels) -> float:
    predictions, labels = np.asarray(predictions), np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError(f"length mismatch: {predictions.shape} vs {labels.shape}")
    if predictions.size < 1:
        raise ValueError("need at least one prediction")
    return float(np.mean(predictions == labels))


def auroc(scores, labels) -> float:
    """Mann-Whitney AUROC: P(score_pos > score_neg), ties counted half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be binary 0/1")
    pos, neg = scores[labels == 1], scores[labels == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("auroc needs both classes present")
    # rank-sum form with midranks for ties
    allv = np.concatenate([pos, neg])
    order = np.argsort(allv, kind="mergesort")
    sorted_v = allv[order]
    ranks = np.empty(len(allv))
    uniq, start, counts = np.unique(sorted_v, return_index=True, return_counts=True)
    mid = start + (counts + 1) / 2.0
    ranks[order] = np.repeat(mid, counts)
    u = ranks[: len(pos)].sum() - len(pos) * (len(pos) + 1) / 2.0
    return float(u / (len(pos) * len(neg)))


def multiclass_auroc(probs: np.ndarray, labels) -> float:
    """Binary AUROC on the positive-class probability; macro one-vs-rest for K > 2."""
    probs, labels = np.asarray(probs), np.asarray(labels)
    if probs.shape[1] == 2:
        return auroc(probs[:, 1], labels)
    vals = [auroc(probs[:, k], (labels == k).astype(int)) for k in range(probs.shape[1])
            if 0 < (labels == k).sum() < len(labels)]
    if not vals:
        raise ValueError("auroc needs at least two classes present")
    return float(np.mean(vals))


def f1_macro(predictions, labels, num_classes: int) -> float:
    predictions, labels = np.asarray(predictions), np.asarray(labels)
    if predictions.shape != labels.shape or predictions.size < 1:
        raise ValueError("predictions and labels must be equal-length and non-empty")
    if labels.min() < 0 or labels.max() >= num_classes:
        raise ValueError(f"labels must lie in [0, {num_classes})")
    total = Fraction(0)
    for k in range(num_classes):
        tp = int(np.sum((predictions == k) & (labels == k)))
        fp = int(np.sum((predictions == k) & (labels != k)))
        fn = int(np.sum((predictions != k) & (labels == k)))
        # 2PR/(P+R) == 2tp/(2tp+fp+fn); zero when tp == 0
        if tp:
            total += Fraction(2 * tp, 2 * tp + fp + fn)
    # exact rational mean, rounded once
    return float(total / num_classes)


# -- training ---------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 0.005
    momentum: float = 0.9
    seed: int = 0
    variant: str = "joint"
    availability: AvailabilitySpec = field(default_factory=AvailabilitySpec)
    max_steps: int | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.variant not in ("joint", "fused"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.max_steps is not None and self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")


@dataclass
class History:
    loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    steps: int = 0


def compose(records, image_pct, text_pct, seed, variant, encode, size):
    plan = make_plan([r.id for r in records], image_pct, text_pct, seed)
    return apply_plan(records, plan, variant, encode, size)


def train(params: Parameters, records, cfg: TrainConfig, encode: Callable):
    """Mini-batch SGD with momentum on composites of ``records``.

    Train-side availability is drawn once per run, so a sample keeps the same
    modalities in every epoch.  Returns a new parameter set and the history;
    ``params`` is left untouched.
    """
    if len(records) == 0:
        raise ValueError("empty training set")
    av = cfg.availability
    samples = compose(records, av.train_image_pct, av.train_text_pct,
                      derive_seed(av.seed, "train-mask"), cfg.variant, encode, params.arch.input_size)
    params = params.copy()
    velocity = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    rng = np.random.default_rng(derive_seed(cfg.seed, "train-order"))
    hist = History()
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(samples))
        loss_sum = correct = n_canvas = 0.0
        for start in range(0, len(order), cfg.batch_size):
            if cfg.max_steps is not None and hist.steps >= cfg.max_steps:
                break
            batch = [samples[i] for i in order[start:start + cfg.batch_size]]
            canvases, labels = flatten_batch(batch)
            losses, probs, grads = cross_entropy_step(params, to_input(canvases), labels)
            if not np.isfinite(losses).all():
                raise FloatingPointError(f"loss diverged at epoch {epoch}, step {hist.steps}")
            for k, g in grads.items():
                velocity[k] *= cfg.momentum
                velocity[k] -= cfg.learning_rate * g
                params.tensors[k] += velocity[k]
            hist.steps += 1
            loss_sum += losses.sum()
            n_canvas += len(labels)
            # per-sample prediction: mean of that sample's canvas probabilities
            pos = 0
            for s in batch:
                k = len(s.canvases)
                correct += int(probs[pos:pos + k].mean(axis=0).argmax() == s.label)
                pos += k
        if n_canvas == 0:
            break
        hist.loss.append(loss_sum / n_canvas)
        hist.train_accuracy.append(correct / len(samples))
        log.info("epoch %d loss %.4f train acc %.3f", epoch, hist.loss[-1], hist.train_accuracy[-1])
    return params, hist


def evaluate(params: Parameters, records, image_pct: int, text_pct: int, seed: int,
             variant: str, encode: Callable, metrics: Iterable[str] = ("accuracy",)) -> dict[str, float]:
    """Metrics on ``records`` composed under the given test availability.

    Joint samples are scored by the mean of their per-canvas softmax, fused
    samples by the softmax of their single canvas.
    """
    samples = compose(records, image_pct, text_pct, seed, variant, encode, params.arch.input_size)
    probs = predict_proba(params, samples)
    labels = np.array([s.label for s in samples])
    preds = probs.argmax(axis=1)
    out = {}
    for name in metrics:
        if name == "accuracy":
            out[name] = accuracy(preds, labels)
        elif name == "auroc":
            out[name] = multiclass_auroc(probs, labels)
        elif name == "f1_macro":
            out[name] = f1_macro(preds, labels, params.arch.num_classes)
        else:
            raise ValueError(f"unknown metric {name!r}")
    return out


# -- sweeps -----------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    train_img: int
    train_txt: int
    test_img: int
    test_txt: int
    metric: str
    value: float  # percent, one decimal
    seed: int


@dataclass
class SweepReport:
    rows: list[SweepRow]
    metadata: dict

    CSV_HEADER = ("train_img", "train_txt", "test_img", "test_txt", "metric", "value", "seed")

    def values(self, metric: str, train=None, test=None) -> dict[int, float]:
        """``seed -> value`` for one cell."""
        return {
            r.seed: r.value for r in self.rows
            if r.metric == metric
            and (train is None or (r.train_img, r.train_txt) == tuple(train))
            and (test is None or (r.test_img, r.test_txt) == tuple(test))
        }

    def mean(self, metric: str, train, test) -> float:
        vals = list(self.values(metric, train, test).values())
        return float(np.mean(vals))

    def cells(self) -> list[tuple[int, int, int, int]]:
        seen = {}
        for r in self.rows:
            seen.setdefault((r.train_img, r.train_txt, r.test_img, r.test_txt), None)
        return list(seen)

    def metrics(self) -> list[str]:
        return list(dict.fromkeys(r.metric for r in self.rows))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_HEADER)
        for r in self.rows:
            w.writerow([r.train_img, r.train_txt, r.test_img, r.test_txt, r.metric, f"{r.value:.1f}", r.seed])
        return buf.getvalue()

    def to_table(self) -> str:
        """Fixed-width table: one line per cell, a column per seed and a mean column."""
        seeds = sorted({r.seed for r in self.rows})
        lines = []
        for key, val in self.metadata.items():
            lines.append(f"# {key}: {val}")
        head = ["Train Img", "Train Txt", "Test Img", "Test Txt", "Metric"]
        head += [f"seed {s}" for s in seeds] + ["mean"]
        body = []
        for cell in self.cells():
            for m in self.metrics():
                vals = self.values(m, cell[:2], cell[2:])
                if not vals:
                    continue
                row = [f"{cell[0]}%", f"{cell[1]}%", f"{cell[2]}%", f"{cell[3]}%", m]
                row += [f"{vals[s]:.1f}" if s in vals else "-" for s in seeds]
                row.append(f"{np.mean(list(vals.values())):.1f}")
                body.append(row)
        widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]
        fmt = lambda r: " | ".join(c.rjust(wd) for c, wd in zip(r, widths))
        lines.append(fmt(head))
        lines.append("-+-".join("-" * wd for wd in widths))
        lines.extend(fmt(r) for r in body)
        return "\n".join(lines) + "\n"

    def to_plot_data(self) -> str:
        """Whitespace-separated mean metric per test availability, for external plotting."""
        lines = ["# train_img train_txt test_img test_txt metric mean"]
        for cell in self.cells():
            for m in self.metrics():
                vals = self.values(m, cell[:2], cell[2:])
                if vals:
                    lines.append(" ".join(map(str, cell)) + f" {m} {np.mean(list(vals.values())):.2f}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str | Path, stem: str = "sweep") -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"{stem}.csv").write_text(self.to_csv(), encoding="utf-8")
        (out_dir / f"{stem}.txt").write_text(self.to_table(), encoding="utf-8")
        (out_dir / f"{stem}_plot.dat").write_text(self.to_plot_data(), encoding="utf-8")


def _as_cell(c) -> tuple[int, int, int, int]:
    if isinstance(c, AvailabilitySpec):
        return c.train_image_pct, c.train_text_pct, c.test_image_pct, c.test_text_pct
    cell = tuple(int(v) for v in c)
    AvailabilitySpec(*cell)  # validates
    return cell


def run_sweep(arch: ArchSpec, train_records, test_records, cfg: TrainConfig, grid,
              seeds: Sequence[int], encode: Callable, metrics: Sequence[str] = ("accuracy",),
              checkpoint_dir: str | Path | None = None, metadata: dict | None = None) -> SweepReport:
    """Train once per (seed, train availability) and evaluate every test cell.

    ``grid`` holds ``(train_img, train_txt, test_img, test_txt)`` tuples or
    :class:`AvailabilitySpec` objects.  With ``checkpoint_dir`` set, trained
    models are saved there and reused when present.
    """
    cells = [_as_cell(c) for c in grid]
    if not cells:
        raise ValueError("empty grid")
    if not seeds:
        raise ValueError("need at least one seed")
    rows = []
    for seed in seeds:
        models: dict[tuple[int, int], Parameters] = {}
        for cell in cells:
            train_av = cell[:2]
            if train_av not in models:
                models[train_av] = _trained_model(arch, train_records, cfg, train_av, seed,
                                                  encode, checkpoint_dir)
            vals = evaluate(models[train_av], test_records, cell[2], cell[3],
                            derive_seed(seed, "test-mask"), cfg.variant, encode, metrics)
            for m in metrics:
                rows.append(SweepRow(*cell, m, round(100.0 * vals[m], 1), int(seed)))
    meta = {"arch": arch, "variant": cfg.variant}
    meta.update(metadata or {})
    return SweepReport(rows, meta)


def _trained_model(arch, records, cfg, train_av, seed, encode, checkpoint_dir):
    path = None
    if checkpoint_dir is not None:
        path = Path(checkpoint_dir) / f"model_seed{seed}_img{train_av[0]}_txt{train_av[1]}.ckpt"
        if path.exists():
            return load_checkpoint(path, arch)
    run_cfg = TrainConfig(
        epochs=cfg.epochs, batch_size=cfg.batch_size, learning_rate=cfg.learning_rate,
        momentum=cfg.momentum, seed=derive_seed(seed, "train"), variant=cfg.variant,
        availability=AvailabilitySpec(train_av[0], train_av[1], seed=seed),
        max_steps=cfg.max_steps,
    )
    params = init_model(arch, derive_seed(seed, "init"))
    params, _ = train(params, records, run_cfg, encode)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_checkpoint(params, path)
    return params
