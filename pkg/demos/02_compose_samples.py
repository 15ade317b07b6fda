# Two ways of showing text to an image classifier.
#
# joint: the encoded text sits on its own black canvas, and the network sees
#        the image and the text canvas as two inputs with shared weights.
# fused: the encoded text is pasted over the bottom band of the image itself.
from pathlib import Path

import numpy as np

from modalpix.compositor import debug_sheet, make_composite
from modalpix.dataset import SyntheticSpec, generate_synthetic
from modalpix.pixel_encoder import TextEncoder, save_png
from modalpix.text_embedding import SkipGramConfig, build_vocab, tokenize, train_skipgram

out = Path("demo_out")
out.mkdir(exist_ok=True)

spec = SyntheticSpec(num_classes=4, samples_per_class=10, seed=3)
records, k = generate_synthetic(spec)
corpus = [tokenize(r.text) for r in records]
encoder = TextEncoder(train_skipgram(corpus, build_vocab(corpus), SkipGramConfig(seed=0)))

r = records[0]
print(f"sample {r.id}: class {r.label}, text {r.text!r}")
enc = encoder(r)
print("encoded text grid:", enc.pixels.shape, "for a", r.image.shape, "image")

joint = make_composite(r.image, enc, "joint", spec.image_size, r.label)
fused = make_composite(r.image, enc, "fused", spec.image_size, r.label)
print("joint canvases:", len(joint.canvases), " fused canvases:", len(fused.canvases))

# a missing modality is just a missing canvas (joint) or an untouched image (fused)
text_only = make_composite(None, enc, "fused", spec.image_size, r.label)
image_only = make_composite(r.image, None, "joint", spec.image_size, r.label)
print("text-only presence", text_only.presence, " image-only presence", image_only.presence)

sheets = [debug_sheet(rec.image, encoder(rec), spec.image_size) for rec in records[::10]]
gap = np.full((2, sheets[0].shape[1], 3), 255, np.uint8)
grid = np.concatenate([x for s in sheets for x in (s, gap)][:-1])
save_png(grid, out / "compose_sheets.png")
print("wrote", out / "compose_sheets.png", "(image | text canvas | fused, one row per class)")
