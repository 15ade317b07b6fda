"""Build model inputs for the joint and fused variants.

Joint: the encoded text is drawn on a black canvas of its own, and the image
and text canvases are fed one after the other to the same network.
Fused: the encoded text overwrites a band of the image itself.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .pixel_encoder import EncodedText

Variant = Literal["joint", "fused"]
VARIANTS = ("joint", "fused")


@dataclass(frozen=True)
class CompositeSample:
    variant: str
    canvases: tuple[np.ndarray, ...]
    label: int
    image_present: bool
    text_present: bool
    sample_id: str = ""

    @property
    def presence(self) -> tuple[bool, bool]:
        return self.image_present, self.text_present


def _check_canvas(canvas: np.ndarray) -> np.ndarray:
    canvas = np.asarray(canvas)
    if canvas.dtype != np.uint8 or canvas.ndim != 3 or canvas.shape[2] != 3:
        raise ValueError("canvas must be an (h, w, 3) uint8 array")
    if canvas.shape[0] < 1 or canvas.shape[1] < 1:
        raise ValueError("canvas must be at least 1x1")
    return canvas


def _patch(dst: np.ndarray, enc: EncodedText, anchor: tuple[int, int]) -> None:
    if enc.is_empty:
        return
    ph, pw = enc.pixels.shape[:2]
    r, c = anchor
    if r < 0 or c < 0 or r + ph > dst.shape[0] or c + pw > dst.shape[1]:
        raise ValueError(
            f"{ph}x{pw} patch at {anchor} exceeds {dst.shape[0]}x{dst.shape[1]} canvas"
        )
    dst[r:r + ph, c:c + pw] = enc.pixels


def render_text_canvas(enc: EncodedText, size: tuple[int, int], anchor=(0, 0)) -> np.ndarray:
    """Copy the encoded grid verbatim onto a black canvas of ``size``."""
    canvas = np.zeros((size[0], size[1], 3), dtype=np.uint8)
    _patch(canvas, enc, anchor)
    return canvas


def compose_fused(host: np.ndarray, enc: EncodedText, anchor) -> np.ndarray:
    """Return a copy of ``host`` with the encoded grid written over it at ``anchor``."""
    out = _check_canvas(host).copy()
    _patch(out, enc, anchor)
    return out


def fused_anchor(size: tuple[int, int], enc_shape: tuple[int, int]) -> tuple[int, int]:
    """Bottom-left placement of the text band."""
    return size[0] - enc_shape[0], 0


def make_composite(
    image: np.ndarray | None,
    enc: EncodedText | None,
    variant: str,
    size: tuple[int, int],
    label: int,
    anchor: tuple[int, int] | None = None,
    sample_id: str = "",
) -> CompositeSample:
    """Assemble one model input, dropping whichever modality is ``None``.

    ``anchor`` defaults to top-left for the joint variant and to the
    bottom-left band for the fused variant, including its text-only
    fallback, so the text sits where the fused model learned to find it.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if image is None and enc is None:
        raise ValueError("at least one modality must be present")
    if image is not None:
        image = _check_canvas(image)
        if image.shape[:2] != tuple(size):
            raise ValueError(f"image is {image.shape[:2]}, expected {tuple(size)}")

    if anchor is None and enc is not None:
        anchor = (0, 0) if variant == "joint" else fused_anchor(size, enc.pixels.shape[:2])

    def text_canvas():
        return render_text_canvas(enc, size, anchor)

    if image is not None and enc is not None:
        if variant == "joint":
            canvases = (image, text_canvas())
        else:
            canvases = (compose_fused(image, enc, anchor),)
    elif image is not None:
        canvases = (image,)
    else:
        canvases = (text_canvas(),)
    return CompositeSample(
        variant=variant,
        canvases=canvases,
        label=int(label),
        image_present=image is not None,
        text_present=enc is not None,
        sample_id=sample_id,
    )


def debug_sheet(image: np.ndarray, enc: EncodedText, size: tuple[int, int], gap: int = 2) -> np.ndarray:
    """Side-by-side strip: image | text canvas | fused, separated by white gaps."""
    text = render_text_canvas(enc, size)
    fused = compose_fused(image, enc, fused_anchor(size, enc.pixels.shape[:2]))
    sep = np.full((size[0], gap, 3), 255, dtype=np.uint8)
    return np.concatenate([image, sep, text, sep, fused], axis=1)
