"""Turn word vectors into RGB pixel runs and lay them out on a grid."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .text_embedding import EmbeddingTable, lookup, tokenize


@dataclass(frozen=True)
class LayoutSpec:
    """Geometry of an encoded text grid.

    ``grid_width`` and the derived number of rows are in logical pixels; each
    logical pixel is drawn as a ``block_scale`` x ``block_scale`` square.
    """

    pixels_per_word: int = 12
    block_scale: int = 4
    grid_width: int = 16
    max_words: int = 4
    background: tuple[int, int, int] = (0, 0, 0)

    def __post_init__(self):
        if self.pixels_per_word < 1:
            raise ValueError("pixels_per_word must be >= 1")
        if self.block_scale < 1:
            raise ValueError("block_scale must be >= 1")
        if self.grid_width < self.pixels_per_word:
            raise ValueError("grid_width must be at least pixels_per_word")
        if self.max_words < 1:
            raise ValueError("max_words must be >= 1")
        if len(self.background) != 3 or not all(0 <= b <= 255 for b in self.background):
            raise ValueError("background must be an RGB byte triple")

    @classmethod
    def for_table(cls, table: EmbeddingTable, **kwargs) -> "LayoutSpec":
        return cls(pixels_per_word=table.dim // 3, **kwargs)

    @property
    def words_per_row(self) -> int:
        return self.grid_width // self.pixels_per_word

    @property
    def rows(self) -> int:
        return -(-self.max_words // self.words_per_row)

    @property
    def shape(self) -> tuple[int, int]:
        """Pixel (height, width) of the encoded grid after block scaling."""
        return self.rows * self.block_scale, self.grid_width * self.block_scale


@dataclass(frozen=True)
class EncodedText:
    pixels: np.ndarray  # (h, w, 3) uint8
    word_count: int
    layout: LayoutSpec
    oov_count: int = 0

    @property
    def is_empty(self) -> bool:
        return self.word_count == 0


def normalize_vector(v, lo: float, hi: float) -> np.ndarray:
    """Affinely map ``[lo, hi]`` onto bytes ``[0, 255]`` with round-half-up.

    A degenerate range (``lo == hi``) maps everything to 127.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size < 1:
        raise ValueError("cannot normalize an empty vector")
    if hi < lo:
        raise ValueError(f"invalid range lo={lo} > hi={hi}")
    if hi == lo:
        return np.full(v.shape, 127, dtype=np.uint8)
    scaled = (v - lo) / (hi - lo) * 255.0
    return np.clip(np.floor(scaled + 0.5), 0, 255).astype(np.uint8)


def pack_rgb(values) -> np.ndarray:
    """Group consecutive byte triples into RGB pixels, shape ``(len // 3, 3)``."""
    values = np.asarray(values, dtype=np.uint8)
    if values.ndim != 1 or values.size % 3:
        raise ValueError(f"length must be divisible by 3, got {values.size}")
    return values.reshape(-1, 3)


def encode_text(tokens: Sequence[str], table: EmbeddingTable, layout: LayoutSpec) -> EncodedText:
    """Encode ``tokens`` as a pixel grid.

    Each in-vocabulary word becomes a contiguous run of ``pixels_per_word``
    logical pixels.  Runs are placed left to right and wrap to the next row
    rather than straddle it.  Unknown tokens are skipped, and at most
    ``layout.max_words`` words are encoded.
    """
    if layout.pixels_per_word * 3 != table.dim:
        raise ValueError(
            f"layout has {layout.pixels_per_word} pixels per word but the "
            f"embedding dim {table.dim} needs {table.dim // 3}"
        )
    ppw, per_row = layout.pixels_per_word, layout.words_per_row
    logical = np.empty((layout.rows, layout.grid_width, 3), dtype=np.uint8)
    logical[:] = layout.background
    count = oov = 0
    for tok in tokens:
        if count == layout.max_words:
            break
        vec = lookup(table, tok)
        if vec is None:
            oov += 1
            continue
        r, slot = divmod(count, per_row)
        run = pack_rgb(normalize_vector(vec, table.global_min, table.global_max))
        logical[r, slot * ppw:(slot + 1) * ppw] = run
        count += 1
    s = layout.block_scale
    pixels = np.repeat(np.repeat(logical, s, axis=0), s, axis=1)
    return EncodedText(pixels=pixels, word_count=count, layout=layout, oov_count=oov)


def save_png(pixels: np.ndarray, path: str | Path) -> None:
    pixels = np.asarray(pixels)
    if pixels.dtype != np.uint8 or pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ValueError("expected an (h, w, 3) uint8 array")
    Image.fromarray(pixels).save(path, format="PNG")


def load_png(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


class TextEncoder:
    """Callable mapping a record (anything with ``.text``) to its encoding.

    Encodings are cached per distinct text string.
    """

    def __init__(self, table: EmbeddingTable, layout: LayoutSpec | None = None):
        self.table = table
        self.layout = layout if layout is not None else LayoutSpec.for_table(table)
        self._cache: dict[str, EncodedText] = {}

    def encode(self, text: str) -> EncodedText:
        enc = self._cache.get(text)
        if enc is None:
            enc = encode_text(tokenize(text), self.table, self.layout)
            self._cache[text] = enc
        return enc

    def __call__(self, record) -> EncodedText:
        return self.encode(record.text)
