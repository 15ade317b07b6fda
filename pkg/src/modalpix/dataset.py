"""Multimodal samples: manifest I/O, a synthetic generator, stratified splits."""
from __future__ import annotations

import colorsys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .pixel_encoder import load_png, save_png

MANIFEST_NAME = "manifest.tsv"


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class SampleRecord:
    id: str
    image: np.ndarray = field(repr=False)
    text: str
    label: int
    image_ref: str | None = None


def resize_nearest(pixels: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    h, w = pixels.shape[:2]
    rows = np.arange(size[0]) * h // size[0]
    cols = np.arange(size[1]) * w // size[1]
    return pixels[rows[:, None], cols[None, :]]


def load_manifest(path: str | Path, size: tuple[int, int] | None = (64, 64)):
    """Read a tab-separated ``id, image_path, label, text`` manifest.

    Image paths are resolved relative to the manifest's directory, decoded
    to 8-bit RGB and nearest-neighbor resized to ``size`` (unless ``None``).

    Returns ``(records, num_classes)`` with ``num_classes = 1 + max label``.
    """
    path = Path(path)
    base = path.parent
    records, seen = [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t", 3)
            if len(parts) < 3:
                raise ManifestError(f"{path}:{lineno}: expected id<TAB>image<TAB>label<TAB>text")
            sid, image_path, label_s = parts[:3]
            text = parts[3] if len(parts) == 4 else ""
            if not sid:
                raise ManifestError(f"{path}:{lineno}: empty id")
            try:
                label = int(label_s)
            except ValueError:
                raise ManifestError(f"{path}:{lineno}: bad label {label_s!r}") from None
            if label < 0:
                raise ManifestError(f"{path}:{lineno}: negative label {label}")
            if sid in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate id {sid!r}")
            seen.add(sid)
            img_file = base / image_path
            if not img_file.is_file():
                raise ManifestError(f"{path}:{lineno}: missing image file {img_file}")
            try:
                pixels = load_png(img_file)
            except Exception as exc:
                raise ManifestError(f"{path}:{lineno}: cannot decode {img_file}: {exc}") from None
            if size is not None and pixels.shape[:2] != tuple(size):
                pixels = resize_nearest(pixels, size)
            records.append(SampleRecord(sid, pixels, text, label, image_path))
    if not records:
        raise ManifestError(f"{path}: no records")
    return records, 1 + max(r.label for r in records)


def write_dataset(records: Sequence[SampleRecord], out_dir: str | Path) -> Path:
    """Write PNGs under ``out_dir/images`` plus a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    lines = []
    for rec in records:
        if any(c in rec.text for c in "\t\n\r"):
            raise ValueError(f"text of {rec.id!r} contains tab or newline")
        rel = f"images/{rec.id}.png"
        save_png(rec.image, out_dir / rel)
        lines.append(f"{rec.id}\t{rel}\t{rec.label}\t{rec.text}")
    manifest = out_dir / MANIFEST_NAME
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


@dataclass(frozen=True)
class SyntheticSpec:
    num_classes: int = 5
    samples_per_class: int = 200
    image_size: tuple[int, int] = (64, 64)
    keywords_per_class: int = 3
    words_per_sample: int = 4
    filler_vocab_size: int = 20
    image_noise_std: float = 60.0
    text_keyword_prob: float = 0.6
    image_confusion_prob: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be >= 1")
        if min(self.image_size) < 8:
            raise ValueError("image_size must be at least 8x8")
        if self.keywords_per_class < 1 or self.filler_vocab_size < 1:
            raise ValueError("need at least one keyword per class and one filler word")
        if self.words_per_sample < 1:
            raise ValueError("words_per_sample must be >= 1")
        if self.image_noise_std < 0:
            raise ValueError("image_noise_std must be >= 0")
        if not 0 < self.text_keyword_prob <= 1:
            raise ValueError("text_keyword_prob must be in (0, 1]")
        if not 0 <= self.image_confusion_prob < 1:
            raise ValueError("image_confusion_prob must be in [0, 1)")


def class_color(c: int, num_classes: int) -> np.ndarray:
    r, g, b = colorsys.hsv_to_rgb(c / num_classes, 0.85, 0.9)
    return np.array([r, g, b]) * 255.0


def class_keywords(c: int, spec: SyntheticSpec) -> list[str]:
    return [f"key{c}w{j}" for j in range(spec.keywords_per_class)]


def filler_words(spec: SyntheticSpec) -> list[str]:
    return [f"fill{j}" for j in range(spec.filler_vocab_size)]


@dataclass(frozen=True)
class ShapeGeometry:
    center: tuple[float, float]
    radius: float


def random_geometry(rng: np.random.Generator, size: tuple[int, int]) -> ShapeGeometry:
    h, w = size
    radius = rng.uniform(0.12, 0.25) * min(h, w)
    cy = rng.uniform(radius, h - radius)
    cx = rng.uniform(radius, w - radius)
    return ShapeGeometry((cy, cx), radius)


def render_shape(c: int, geom: ShapeGeometry, spec: SyntheticSpec, rng=None) -> np.ndarray:
    """Draw class ``c``'s shape on black and add Gaussian noise.

    Even classes get a square, odd classes a disc, both in the class hue.
    With ``image_noise_std == 0`` the result depends only on ``c`` and ``geom``.
    """
    h, w = spec.image_size
    yy, xx = np.mgrid[0:h, 0:w] + 0.5
    dy, dx = yy - geom.center[0], xx - geom.center[1]
    if c % 2 == 0:
        inside = (np.abs(dy) <= geom.radius) & (np.abs(dx) <= geom.radius)
    else:
        inside = dy * dy + dx * dx <= geom.radius ** 2
    img = np.zeros((h, w, 3))
    img[inside] = class_color(c, spec.num_classes)
    if spec.image_noise_std > 0:
        img += rng.normal(0.0, spec.image_noise_std, img.shape)
    return np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)


def generate_synthetic(spec: SyntheticSpec):
    """Generate ``num_classes * samples_per_class`` labeled image/text pairs.

    Both modalities carry the label independently: the image through hue and
    shape, the text through class keywords mixed with shared filler words.
    With ``image_confusion_prob > 0`` that fraction of images (in expectation)
    shows a uniformly chosen other class, which caps image-only accuracy and
    leaves the text something to contribute.

    Returns ``(records, num_classes)``.
    """
    rng = np.random.default_rng(spec.seed)
    fillers = filler_words(spec)
    records = []
    width = len(str(spec.num_classes * spec.samples_per_class - 1))
    for c in range(spec.num_classes):
        keys = class_keywords(c, spec)
        for _ in range(spec.samples_per_class):
            idx = len(records)
            geom = random_geometry(rng, spec.image_size)
            shown = c
            if rng.random() < spec.image_confusion_prob:
                shown = (c + rng.integers(1, spec.num_classes)) % spec.num_classes
            image = render_shape(shown, geom, spec, rng)
            use_key = rng.random(spec.words_per_sample) < spec.text_keyword_prob
            key_pick = rng.integers(0, len(keys), spec.words_per_sample)
            fill_pick = rng.integers(0, len(fillers), spec.words_per_sample)
            words = [keys[k] if u else fillers[f] for u, k, f in zip(use_key, key_pick, fill_pick)]
            records.append(SampleRecord(f"s{idx:0{width}d}", image, " ".join(words), c))
    return records, spec.num_classes


def split(records: Sequence[SampleRecord], train_fraction: float, seed: int):
    """Stratified train/test split; each class sends ``floor(f * n_c)`` samples to train."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    by_class: dict[int, list[SampleRecord]] = {}
    for rec in records:
        by_class.setdefault(rec.label, []).append(rec)
    train, test = [], []
    for label in sorted(by_class):
        members = by_class[label]
        n_train = int(np.floor(train_fraction * len(members)))
        if n_train == len(members):
            raise ValueError(f"class {label} would have an empty test set")
        order = rng.permutation(len(members))
        train.extend(members[i] for i in order[:n_train])
        test.extend(members[i] for i in order[n_train:])
    return train, test


def nearest_mean_color_accuracy(records: Sequence[SampleRecord], num_classes: int) -> float:
    """Sanity oracle: classify by the chromaticity of the mean image color.

    On noiseless synthetic images the background is black, so the mean color
    is a positive multiple of the class hue and its chromaticity is exact.
    """
    def chroma(img):
        m = img.reshape(-1, 3).mean(axis=0)
        return m / max(m.sum(), 1e-12)

    feats = np.array([chroma(r.image) for r in records])
    labels = np.array([r.label for r in records])
    centers = np.array([feats[labels == c].mean(axis=0) for c in range(num_classes)])
    pred = np.argmin(((feats[:, None, :] - centers[None]) ** 2).sum(-1), axis=1)
    return float((pred == labels).mean())
