# Turning words into pixels.
#
# A skip-gram model gives every word a 36-d vector.  Each vector is squeezed
# into bytes with one min/max shared by the whole table, and consecutive byte
# triples become RGB pixels: 36 numbers -> 12 pixels per word.
from pathlib import Path

import numpy as np

from modalpix.pixel_encoder import LayoutSpec, encode_text, normalize_vector, pack_rgb, save_png
from modalpix.text_embedding import SkipGramConfig, build_vocab, lookup, tokenize, train_skipgram

out = Path("demo_out")
out.mkdir(exist_ok=True)

corpus = [tokenize(s) for s in [
    "they extol the craft of the tailor",
    "a tailor needs sharp scissors",
    "scissors cut cloth and paper",
    "we extol good craft and good tools",
    "paper craft needs scissors and glue",
] * 20]
vocab = build_vocab(corpus)
table = train_skipgram(corpus, vocab, SkipGramConfig(dim=36, epochs=20, seed=0))
print(f"{len(table)} words, dim {table.dim}, value range [{table.global_min:.3f}, {table.global_max:.3f}]")

# one word, step by step
v = lookup(table, "scissors")
b = normalize_vector(v, table.global_min, table.global_max)
px = pack_rgb(b)
print("first 6 components:", np.round(v[:6], 3))
print("as bytes:          ", b[:6])
print("as pixels:         ", px[:2].tolist(), f"... ({len(px)} pixels)")

# a whole phrase on the default 16x4 logical grid, 4x4 blocks per logical pixel
layout = LayoutSpec.for_table(table)
enc = encode_text(tokenize("extol craft scissors, zebra"), table, layout)
print(f"encoded {enc.word_count} words, skipped {enc.oov_count} unknown; grid {enc.pixels.shape}")
save_png(enc.pixels, out / "extol_craft_scissors.png")

# the dim-15 arrangement: three 5-pixel runs side by side on one row
small = train_skipgram(corpus, vocab, SkipGramConfig(dim=15, epochs=20, seed=0))
row = encode_text(["extol", "craft", "scissors"], small,
                  LayoutSpec(pixels_per_word=5, block_scale=8, grid_width=15, max_words=3))
save_png(row.pixels, out / "three_words_dim15.png")
print("wrote", out / "extol_craft_scissors.png", "and", out / "three_words_dim15.png")
