"""Render text as pixels so a single image classifier can read both modalities.

Words are mapped to skip-gram vectors, the vectors are quantized into RGB
blocks, and the blocks are either shown beside the image (``joint``) or
pasted into its bottom band (``fused``).  A small numpy CNN is trained on the
result, with per-sample modality dropout controlled by :mod:`modality_mask`.
"""
from .compositor import CompositeSample, debug_sheet, make_composite
from .dataset import SampleRecord, SyntheticSpec, generate_synthetic, load_manifest, split, write_dataset
from .modality_mask import AvailabilitySpec, MaskPlan, apply_plan, make_plan
from .pixel_encoder import EncodedText, LayoutSpec, TextEncoder, encode_text
from .seeding import derive_seed
from .text_embedding import EmbeddingTable, SkipGramConfig, build_vocab, tokenize, train_skipgram
from .train_eval import SweepReport, TrainConfig, evaluate, run_sweep, train
from .visual_net import ArchSpec, Parameters, band_share, forward, init_model, saliency_map

__version__ = "0.1.0"

__all__ = [
    "ArchSpec", "AvailabilitySpec", "band_share", "CompositeSample", "EmbeddingTable", "EncodedText", "LayoutSpec",
    "MaskPlan", "Parameters", "SampleRecord", "SkipGramConfig", "SweepReport", "SyntheticSpec",
    "TextEncoder", "TrainConfig", "apply_plan", "build_vocab", "debug_sheet", "derive_seed",
    "encode_text", "evaluate", "forward", "generate_synthetic", "init_model", "load_manifest",
    "make_composite", "make_plan", "run_sweep", "saliency_map", "split", "tokenize", "train",
    "train_skipgram", "write_dataset",
]
