"""A small convolutional classifier with hand-written backpropagation.

Layout is channels-last throughout: canvases are ``(N, H, W, 3)`` and each
conv block is ``3x3 conv (same padding) -> ReLU -> 2x2 max-pool``, followed
by one hidden dense layer with ReLU and a linear output layer.  Everything
runs in float64.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

CKPT_MAGIC = b"MODALPIX-CKPT v1\n"


@dataclass(frozen=True)
class ArchSpec:
    input_size: tuple[int, int] = (64, 64)
    channels: tuple[int, ...] = (16, 32, 64)
    hidden_dim: int = 128
    num_classes: int = 5

    def __post_init__(self):
        object.__setattr__(self, "input_size", tuple(int(v) for v in self.input_size))
        object.__setattr__(self, "channels", tuple(int(v) for v in self.channels))
        if not self.channels:
            raise ValueError("need at least one conv block")
        if min(self.channels) < 1 or self.hidden_dim < 1:
            raise ValueError("layer widths must be positive")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        h, w = self.feature_size
        if h < 1 or w < 1:
            raise ValueError(f"input {self.input_size} vanishes after {len(self.channels)} pools")

    @property
    def feature_size(self) -> tuple[int, int]:
        h, w = self.input_size
        for _ in self.channels:
            h, w = h // 2, w // 2
        return h, w

    @property
    def flat_dim(self) -> int:
        h, w = self.feature_size
        return h * w * self.channels[-1]

    def shapes(self) -> dict[str, tuple[int, ...]]:
        out, c_in = {}, 3
        for i, c in enumerate(self.channels):
            out[f"conv{i}.w"] = (c, c_in, 3, 3)
            out[f"conv{i}.b"] = (c,)
            c_in = c
        out["fc1.w"] = (self.flat_dim, self.hidden_dim)
        out["fc1.b"] = (self.hidden_dim,)
        out["fc2.w"] = (self.hidden_dim, self.num_classes)
        out["fc2.b"] = (self.num_classes,)
        return out


@dataclass
class Parameters:
    arch: ArchSpec
    tensors: dict[str, np.ndarray]
    seed: int = 0

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def copy(self) -> "Parameters":
        return Parameters(self.arch, {k: v.copy() for k, v in self.tensors.items()}, self.seed)

    def equal(self, other: "Parameters") -> bool:
        return (
            self.arch == other.arch
            and list(self.tensors) == list(other.tensors)
            and all(np.array_equal(self.tensors[k], other.tensors[k]) for k in self.tensors)
        )


def init_model(arch: ArchSpec, seed: int = 0) -> Parameters:
    """He-normal weights scaled by fan-in, zero biases."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in arch.shapes().items():
        if name.endswith(".b"):
            tensors[name] = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[1:])) if name.startswith("conv") else shape[0]
            tensors[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), shape)
    return Parameters(arch, tensors, seed)


def to_input(canvases) -> np.ndarray:
    """Stack uint8 canvases into a float64 ``(N, H, W, 3)`` batch in [0, 1]."""
    if isinstance(canvases, np.ndarray) and canvases.ndim == 3:
        canvases = canvases[None]
    x = np.asarray(canvases, dtype=np.float64)
    if x.ndim != 4 or x.shape[-1] != 3:
        raise ValueError(f"expected (N, H, W, 3) canvases, got shape {x.shape}")
    return x / 255.0


# -- layers -----------------------------------------------------------------

def _conv_forward(x, w, b):
    # im2col with column order (ky, kx, c_in)
    n, h, wd, c = x.shape
    f = w.shape[0]
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    cols = np.concatenate(
        [xp[:, i:i + h, j:j + wd, :] for i in range(3) for j in range(3)], axis=-1
    ).reshape(n * h * wd, 9 * c)
    wmat = w.transpose(0, 2, 3, 1).reshape(f, 9 * c)
    out = cols @ wmat.T + b
    return out.reshape(n, h, wd, f), cols


def _conv_backward(dout, cols, w, x_shape, need_dx=True):
    n, h, wd, c = x_shape
    f = w.shape[0]
    d2 = dout.reshape(-1, f)
    dw = (d2.T @ cols).reshape(f, 3, 3, c).transpose(0, 3, 1, 2)
    db = d2.sum(axis=0)
    if not need_dx:
        return None, dw, db
    dcols = (d2 @ w.transpose(0, 2, 3, 1).reshape(f, 9 * c)).reshape(n, h, wd, 9, c)
    dxp = np.zeros((n, h + 2, wd + 2, c))
    for i in range(3):
        for j in range(3):
            dxp[:, i:i + h, j:j + wd, :] += dcols[:, :, :, 3 * i + j, :]
    return dxp[:, 1:-1, 1:-1, :], dw, db


def _pool_forward(x):
    n, h, w, c = x.shape
    ph, pw = h // 2, w // 2
    blocks = (
        x[:, :2 * ph, :2 * pw]
        .reshape(n, ph, 2, pw, 2, c)
        .transpose(0, 1, 3, 5, 2, 4)
        .reshape(n, ph, pw, c, 4)
    )
    idx = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]
    return out, idx


def _pool_backward(dout, idx, x_shape):
    n, h, w, c = x_shape
    ph, pw = h // 2, w // 2
    dblocks = np.zeros((n, ph, pw, c, 4))
    np.put_along_axis(dblocks, idx[..., None], dout[..., None], axis=-1)
    dx = np.zeros(x_shape)
    dx[:, :2 * ph, :2 * pw] = (
        dblocks.reshape(n, ph, pw, c, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(n, 2 * ph, 2 * pw, c)
    )
    return dx


def _forward(params: Parameters, x: np.ndarray):
    arch = params.arch
    if x.shape[1:3] != arch.input_size:
        raise ValueError(f"input is {x.shape[1:3]}, model expects {arch.input_size}")
    cache = []
    a = x
    for i in range(len(arch.channels)):
        z, cols = _conv_forward(a, params[f"conv{i}.w"], params[f"conv{i}.b"])
        r = np.maximum(z, 0.0)
        p, idx = _pool_forward(r)
        cache.append((a.shape, cols, z > 0, r.shape, idx))
        a = p
    flat = a.reshape(len(a), -1)
    h_pre = flat @ params["fc1.w"] + params["fc1.b"]
    hid = np.maximum(h_pre, 0.0)
    logits = hid @ params["fc2.w"] + params["fc2.b"]
    return logits, (cache, a.shape, flat, h_pre > 0, hid)


def _backward(params: Parameters, state, dlogits, need_dx=False):
    cache, pooled_shape, flat, h_mask, hid = state
    grads = {}
    grads["fc2.w"] = hid.T @ dlogits
    grads["fc2.b"] = dlogits.sum(axis=0)
    dh = (dlogits @ params["fc2.w"].T) * h_mask
    grads["fc1.w"] = flat.T @ dh
    grads["fc1.b"] = dh.sum(axis=0)
    da = (dh @ params["fc1.w"].T).reshape(pooled_shape)
    for i in reversed(range(len(cache))):
        in_shape, cols, relu_mask, r_shape, idx = cache[i]
        dz = _pool_backward(da, idx, r_shape) * relu_mask
        da, grads[f"conv{i}.w"], grads[f"conv{i}.b"] = _conv_backward(
            dz, cols, params[f"conv{i}.w"], in_shape, need_dx=need_dx or i > 0
        )
    ordered = {name: grads[name] for name in params.tensors}
    return ordered, da


# -- public API -------------------------------------------------------------

def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward(params: Parameters, canvases, chunk: int = 128) -> np.ndarray:
    """Logits for one canvas ``(H, W, 3)`` -> ``(K,)`` or a batch -> ``(N, K)``."""
    single = np.ndim(canvases) == 3
    x = to_input(canvases)
    out = np.concatenate([_forward(params, x[i:i + chunk])[0] for i in range(0, len(x), chunk)])
    return out[0] if single else out


def forward_joint(params: Parameters, canvases: Sequence[np.ndarray]) -> np.ndarray:
    """Class probabilities for one sample given one or two canvases.

    Every canvas goes through the same parameters; the result is the mean of
    the per-canvas softmax vectors.
    """
    if not 1 <= len(canvases) <= 2:
        raise ValueError(f"expected 1 or 2 canvases, got {len(canvases)}")
    probs = softmax(forward(params, np.stack(canvases)))
    return probs.mean(axis=0)


def predict_proba(params: Parameters, samples) -> np.ndarray:
    """Per-sample probabilities for a sequence of composites, batched."""
    canvases, owner = [], []
    for i, s in enumerate(samples):
        canvases.extend(s.canvases)
        owner.extend([i] * len(s.canvases))
    probs = softmax(forward(params, np.stack(canvases)))
    owner = np.asarray(owner)
    counts = np.bincount(owner, minlength=len(samples))
    out = np.zeros((len(samples), probs.shape[1]))
    np.add.at(out, owner, probs)
    return out / counts[:, None]


def flatten_batch(samples) -> tuple[np.ndarray, np.ndarray]:
    """Canvases and labels of a batch, one row per canvas."""
    canvases, labels = [], []
    for s in samples:
        canvases.extend(s.canvases)
        labels.extend([s.label] * len(s.canvases))
    return np.stack(canvases), np.asarray(labels, dtype=np.int64)


def cross_entropy_step(params: Parameters, x: np.ndarray, labels: np.ndarray):
    """Per-row losses, softmax probabilities and gradients of the mean loss."""
    logits, state = _forward(params, x)
    z = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(z).sum(axis=1))
    m = len(x)
    losses = logz - z[np.arange(m), labels]
    probs = np.exp(z - logz[:, None])
    dlogits = probs.copy()
    dlogits[np.arange(m), labels] -= 1.0
    grads, _ = _backward(params, state, dlogits / m)
    return losses, probs, grads


def loss_and_grads_arrays(params: Parameters, x: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over rows of ``x`` (already scaled to [0, 1]) and its gradient."""
    losses, _, grads = cross_entropy_step(params, x, labels)
    return float(losses.mean()), grads


def loss_and_grads(params: Parameters, samples):
    """Mean cross-entropy over all canvases of ``samples``, with exact gradients.

    A joint sample carrying both canvases contributes two terms with its
    shared label.
    """
    if len(samples) == 0:
        raise ValueError("empty batch")
    canvases, labels = flatten_batch(samples)
    if labels.min() < 0 or labels.max() >= params.arch.num_classes:
        raise ValueError("label out of range")
    return loss_and_grads_arrays(params, to_input(canvases), labels)


def saliency_map(params: Parameters, canvas: np.ndarray, class_index: int) -> np.ndarray:
    """Per-pixel channel L2 norm of d logit[class] / d input, scaled to max 1."""
    return saliency_maps(params, canvas[None], [class_index])[0]


def saliency_maps(params: Parameters, canvases, class_indices) -> np.ndarray:
    x = to_input(canvases)
    logits, state = _forward(params, x)
    seed = np.zeros_like(logits)
    seed[np.arange(len(x)), np.asarray(class_indices)] = 1.0
    _, dx = _backward(params, state, seed, need_dx=True)
    mag = np.sqrt((dx ** 2).sum(axis=-1))
    peak = mag.reshape(len(x), -1).max(axis=1)
    safe = np.where(peak > 0, peak, 1.0)
    return np.where(peak[:, None, None] > 0, mag / safe[:, None, None], 0.0)


def band_share(saliency: np.ndarray, row0: int) -> float:
    """Fraction of total saliency mass in rows ``row0:`` (0 for an all-zero map).

    Unlike the band mean of a max-normalized map, this is invariant to the
    overall gradient scale, so maps of different inputs compare directly.
    """
    saliency = np.asarray(saliency, dtype=np.float64)
    total = saliency.sum()
    return float(saliency[row0:].sum() / total) if total > 0 else 0.0

# -- checkpoints ------------------------------------------------------------

def save_checkpoint(params: Parameters, path: str | Path) -> None:
    header = {
        "arch": asdict(params.arch),
        "seed": int(params.seed),
        "tensors": [[name, list(t.shape)] for name, t in params.tensors.items()],
    }
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode("ascii") + b"\n")
        for t in params.tensors.values():
            fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path, arch: ArchSpec | None = None) -> Parameters:
    """Read a checkpoint; if ``arch`` is given it must match the stored one."""
    with open(path, "rb") as fh:
        if fh.readline() != CKPT_MAGIC:
            raise ValueError(f"{path}: not a {CKPT_MAGIC.decode().strip()} checkpoint")
        header = json.loads(fh.readline())
        stored = ArchSpec(**header["arch"])
        if arch is not None and stored != arch:
            raise ValueError(f"{path}: checkpoint arch {stored} does not match {arch}")
        expected = stored.shapes()
        tensors = {}
        for name, shape in header["tensors"]:
            if expected.get(name) != tuple(shape):
                raise ValueError(f"{path}: tensor {name} has shape {tuple(shape)}, expected {expected.get(name)}")
            count = int(np.prod(shape))
            raw = fh.read(8 * count)
            if len(raw) != 8 * count:
                raise ValueError(f"{path}: truncated tensor {name}")
            tensors[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
        if set(tensors) != set(expected):
            raise ValueError(f"{path}: missing tensors {sorted(set(expected) - set(tensors))}")
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes")
    return Parameters(stored, tensors, header["seed"])
