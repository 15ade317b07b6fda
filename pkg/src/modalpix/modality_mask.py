"""Sample-level modality availability plans.

A plan says, per sample, whether its image and its text are available.
Percentages are realized exactly (``floor(pct * n / 100)`` samples keep the
degraded modality) and the kept sets are nested: one seeded shuffle ranks
the samples and each percentage keeps a prefix of that ranking.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .compositor import CompositeSample, make_composite


@dataclass(frozen=True)
class AvailabilitySpec:
    train_image_pct: int = 100
    train_text_pct: int = 100
    test_image_pct: int = 100
    test_text_pct: int = 100
    seed: int = 0

    def __post_init__(self):
        for name in ("train_image_pct", "train_text_pct", "test_image_pct", "test_text_pct"):
            _check_pct(getattr(self, name), name)
        if max(self.train_image_pct, self.train_text_pct) != 100:
            raise ValueError("train split must keep one modality at 100%")
        if max(self.test_image_pct, self.test_text_pct) != 100:
            raise ValueError("test split must keep one modality at 100%")

    @property
    def train(self) -> tuple[int, int]:
        return self.train_image_pct, self.train_text_pct

    @property
    def test(self) -> tuple[int, int]:
        return self.test_image_pct, self.test_text_pct


def _check_pct(pct, name="pct"):
    if not isinstance(pct, (int, np.integer)) or not 0 <= pct <= 100:
        raise ValueError(f"{name} must be an integer in [0, 100], got {pct!r}")


@dataclass(frozen=True)
class MaskEntry:
    sample_id: str
    image_present: bool
    text_present: bool


@dataclass(frozen=True)
class MaskPlan:
    entries: tuple[MaskEntry, ...]
    image_pct: int
    text_pct: int
    seed: int

    def __len__(self) -> int:
        return len(self.entries)

    def by_id(self) -> dict[str, MaskEntry]:
        return {e.sample_id: e for e in self.entries}

    def kept(self, modality: str) -> set[str]:
        attr = {"image": "image_present", "text": "text_present"}[modality]
        return {e.sample_id for e in self.entries if getattr(e, attr)}


def keep_count(pct: int, n: int) -> int:
    return pct * n // 100


def make_plan(sample_ids: Sequence, image_pct: int, text_pct: int, seed: int) -> MaskPlan:
    """Decide modality presence for every id in ``sample_ids``.

    At most one modality may be degraded.  The degraded modality is kept for
    the first ``floor(pct * n / 100)`` ids of a seeded permutation, so plans
    with the same ids and seed are nested across percentages.
    """
    _check_pct(image_pct, "image_pct")
    _check_pct(text_pct, "text_pct")
    if max(image_pct, text_pct) != 100:
        raise ValueError("one modality must be fully available (100%)")
    ids = [str(s) for s in sample_ids]
    n = len(ids)
    if n < 1:
        raise ValueError("need at least one sample")
    if len(set(ids)) != n:
        raise ValueError("sample ids must be unique")

    rank = np.empty(n, dtype=np.int64)
    rank[np.random.default_rng(seed).permutation(n)] = np.arange(n)
    image_keep = rank < keep_count(image_pct, n)
    text_keep = rank < keep_count(text_pct, n)
    entries = tuple(
        MaskEntry(sid, bool(img), bool(txt)) for sid, img, txt in zip(ids, image_keep, text_keep)
    )
    return MaskPlan(entries, image_pct, text_pct, seed)


def apply_plan(
    samples: Sequence,
    plan: MaskPlan,
    variant: str,
    encode: Callable[[object], object],
    size: tuple[int, int],
) -> list[CompositeSample]:
    """Compose every sample with modalities dropped according to ``plan``.

    ``samples`` are records with ``id``, ``image`` and ``label`` attributes;
    ``encode(record)`` returns the record's :class:`EncodedText`.  It is only
    called for samples whose text is kept, and images of image-less samples
    are never touched.
    """
    flags = plan.by_id()
    ids = [str(s.id) for s in samples]
    if len(ids) != len(flags) or set(ids) != set(flags):
        missing = sorted(set(ids) ^ set(flags))[:5]
        raise ValueError(f"plan and dataset ids differ (e.g. {missing})")
    out = []
    for rec in samples:
        entry = flags[str(rec.id)]
        image = rec.image if entry.image_present else None
        enc = encode(rec) if entry.text_present else None
        out.append(make_composite(image, enc, variant, size, rec.label, sample_id=str(rec.id)))
    return out


def save_plan(plan: MaskPlan, path: str | Path) -> None:
    lines = [f"{e.sample_id} {int(e.image_present)} {int(e.text_present)}" for e in plan.entries]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_plan(path: str | Path, seed: int = 0) -> MaskPlan:
    entries = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3 or parts[1] not in ("0", "1") or parts[2] not in ("0", "1"):
            raise ValueError(f"{path}:{lineno}: expected '<id> <0|1> <0|1>'")
        entries.append(MaskEntry(parts[0], parts[1] == "1", parts[2] == "1"))
    n = len(entries)
    image_pct = 100 * sum(e.image_present for e in entries) // max(n, 1)
    text_pct = 100 * sum(e.text_present for e in entries) // max(n, 1)
    return MaskPlan(tuple(entries), image_pct, text_pct, seed)
