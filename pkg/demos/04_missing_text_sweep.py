# How gracefully does a jointly trained model lose its text?
#
# Small and quick: 3 classes, 32x32 images, two seeds.  The shapes are
# noisy and 15% of images show the wrong class, so the image alone is not
# enough and accuracy should fall as text goes missing at test time.
import time

from modalpix.dataset import SyntheticSpec, generate_synthetic, split
from modalpix.pixel_encoder import LayoutSpec, TextEncoder
from modalpix.text_embedding import SkipGramConfig, build_vocab, tokenize, train_skipgram
from modalpix.train_eval import TrainConfig, run_sweep
from modalpix.visual_net import ArchSpec

t0 = time.time()
records, k = generate_synthetic(SyntheticSpec(num_classes=3, samples_per_class=150, image_size=(32, 32), seed=1))
train, test = split(records, 0.75, seed=2)
corpus = [tokenize(r.text) for r in train]
table = train_skipgram(corpus, build_vocab(corpus), SkipGramConfig(seed=3))
encoder = TextEncoder(table, LayoutSpec.for_table(table, block_scale=2))

grid = [(100, 100, 100, t) for t in (100, 70, 30, 0)] + [(100, 100, 0, 100)]
report = run_sweep(ArchSpec(input_size=(32, 32), channels=(16, 32), hidden_dim=64, num_classes=k),
                   train, test, TrainConfig(), grid, seeds=[0, 1], encode=encoder,
                   metrics=("accuracy", "f1_macro"))
print(report.to_table())
print(f"done in {time.time() - t0:.0f}s")
