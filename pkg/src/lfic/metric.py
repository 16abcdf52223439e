"""Differentiable distortion metrics.

Every metric returns a loss value and its gradient with respect to the
reconstruction, in sample units (0..255). The semantic metric compares
embeddings from a small fixed convolutional network whose weights come
from an ``LFW1`` file.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import WeightsFormatError

WEIGHTS_MAGIC = b"LFW1"
KERNEL = 3
STRIDE = 2
DEFAULT_WIDTHS = (8, 16, 32)
FIXTURE_PATH = Path(__file__).parent / "data" / "fixture.lfw"
FIXTURE_SEED = 2018

# Adversarial weight used in training; only meaningful with a plug-in.
REFERENCE_ADV_WEIGHT = 0.1


class MetricPlugin(Protocol):
    def loss(self, xhat: np.ndarray, x: np.ndarray) -> float: ...

    def grad(self, xhat: np.ndarray, x: np.ndarray) -> np.ndarray: ...


@dataclass
class EmbeddingNet:
    """Conv(3x3, stride 2, pad 1) + ReLU stages followed by a global mean."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if not self.weights or len(self.weights) != len(self.biases):
            raise WeightsFormatError("need one bias vector per convolution stage")
        prev = None
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 4 or w.shape[2:] != (KERNEL, KERNEL):
                raise WeightsFormatError(f"bad filter bank shape {w.shape}")
            if b.shape != (w.shape[0],):
                raise WeightsFormatError(f"bias shape {b.shape} for {w.shape[0]} filters")
            if prev is not None and w.shape[1] != prev:
                raise WeightsFormatError("stage input width does not match previous output")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise WeightsFormatError("non-finite weights")
            prev = w.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights[0].shape[1]

    @property
    def dim(self) -> int:
        return self.weights[-1].shape[0]

    @classmethod
    def random(cls, in_channels=3, widths=DEFAULT_WIDTHS, seed=FIXTURE_SEED):
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        c = in_channels
        for o in widths:
            std = np.sqrt(2.0 / (c * KERNEL * KERNEL))
            weights.append(rng.normal(0.0, std, size=(o, c, KERNEL, KERNEL)))
            biases.append(rng.normal(0.0, 0.05, size=o))
            c = o
        return cls(weights, biases)

    @classmethod
    def zeros(cls, in_channels=3, widths=DEFAULT_WIDTHS):
        net = cls.random(in_channels, widths)
        return cls([np.zeros_like(w) for w in net.weights], [np.zeros_like(b) for b in net.biases])

    def to_bytes(self) -> bytes:
        out = [WEIGHTS_MAGIC, struct.pack("<I", len(self.weights))]
        for w in self.weights:
            out.append(struct.pack("<II", w.shape[1], w.shape[0]))
        for w, b in zip(self.weights, self.biases):
            out.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
            out.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "EmbeddingNet":
        if data[:4] != WEIGHTS_MAGIC:
            raise WeightsFormatError(f"bad weights magic {data[:4]!r}")
        try:
            (stages,) = struct.unpack_from("<I", data, 4)
            if not 1 <= stages <= 64:
                raise WeightsFormatError(f"implausible stage count {stages}")
            dims = [struct.unpack_from("<II", data, 8 + 8 * s) for s in range(stages)]
        except struct.error as exc:
            raise WeightsFormatError("weights header truncated") from exc
        pos = 8 + 8 * stages
        weights, biases = [], []
        for cin, cout in dims:
            nw = cout * cin * KERNEL * KERNEL
            need = 8 * (nw + cout)
            if pos + need > len(data):
                raise WeightsFormatError("weights payload truncated")
            flat = np.frombuffer(data, dtype="<f8", count=nw + cout, offset=pos)
            weights.append(flat[:nw].reshape(cout, cin, KERNEL, KERNEL).astype(np.float64))
            biases.append(flat[nw:].astype(np.float64))
            pos += need
        if pos != len(data):
            raise WeightsFormatError("trailing bytes after weights payload")
        return cls(weights, biases)

    @classmethod
    def load(cls, path) -> "EmbeddingNet":
        return cls.from_bytes(Path(path).read_bytes())

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())


def load_fixture() -> EmbeddingNet:
    return EmbeddingNet.load(FIXTURE_PATH)


def _conv_forward(x, w, b):
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    patches = sliding_window_view(xp, (KERNEL, KERNEL), axis=(0, 1))[::STRIDE, ::STRIDE]
    return np.tensordot(patches, w, axes=([2, 3, 4], [1, 2, 3])) + b


def _conv_backward(dout, w, in_shape):
    h, wd, _ = in_shape
    ho, wo = dout.shape[:2]
    dpatch = np.tensordot(dout, w, axes=([2], [0]))  # (ho, wo, cin, 3, 3)
    dxp = np.zeros((h + 2, wd + 2, in_shape[2]))
    for a in range(KERNEL):
        for c in range(KERNEL):
            dxp[a : a + STRIDE * ho : STRIDE, c : c + STRIDE * wo : STRIDE] += dpatch[:, :, :, a, c]
    return dxp[1:-1, 1:-1]


def _prepare(img, net: EmbeddingNet):
    x = np.asarray(img, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
    k = x.shape[2]
    if k == net.in_channels:
        return x / 255.0, False
    if k == 1 and net.in_channels == 3:
        return np.repeat(x, 3, axis=2) / 255.0, True
    raise WeightsFormatError(f"network expects {net.in_channels} channels, image has {k}")


def _forward_cache(img, net):
    x, replicated = _prepare(img, net)
    acts = [x]
    pre = []
    for w, b in zip(net.weights, net.biases):
        z = _conv_forward(acts[-1], w, b)
        pre.append(z)
        acts.append(np.maximum(z, 0.0))
    return acts, pre, replicated


def embed_forward(img, net: EmbeddingNet) -> np.ndarray:
    acts, _, _ = _forward_cache(img, net)
    return acts[-1].mean(axis=(0, 1))


def embed_backward(img, net: EmbeddingNet, grad_emb) -> np.ndarray:
    """Gradient of ``grad_emb . embed(img)`` with respect to the image samples."""
    grad_emb = np.asarray(grad_emb, dtype=np.float64)
    if grad_emb.shape != (net.dim,):
        raise ValueError(f"embedding gradient must have shape ({net.dim},)")
    acts, pre, replicated = _forward_cache(img, net)
    top = acts[-1]
    g = np.broadcast_to(grad_emb / (top.shape[0] * top.shape[1]), top.shape)
    for s in range(len(net.weights) - 1, -1, -1):
        g = np.where(pre[s] > 0, g, 0.0)
        g = _conv_backward(g, net.weights[s], acts[s].shape)
    g = g / 255.0
    if replicated:
        g = g.sum(axis=2, keepdims=True)
    return g


def con_loss(xhat, x):
    """Mean absolute error and its (sub)gradient, with sign(0) = 0."""
    xhat = np.asarray(xhat, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    d = xhat - x
    return float(np.mean(np.abs(d))), np.sign(d) / d.size


def sem_loss(xhat, x, net: EmbeddingNet):
    """Squared L2 distance between embeddings and its gradient in ``xhat``."""
    diff = embed_forward(xhat, net) - embed_forward(x, net)
    return float(diff @ diff), embed_backward(xhat, net, 2.0 * diff)


@dataclass(frozen=True)
class LossWeights:
    con: float = 0.01
    sem: float = 10.0
    adv: float = 0.0

    def __post_init__(self):
        if min(self.con, self.sem, self.adv) < 0:
            raise ValueError("loss weights must be non-negative")


def total_loss(xhat, x, net: EmbeddingNet | None, weights: LossWeights = LossWeights(),
               adv: MetricPlugin | None = None):
    """Weighted sum of content, semantic and (optional) adversarial terms.

    With ``net=None`` the semantic term is dropped (pixel metric only).
    """
    xhat = np.asarray(xhat, dtype=np.float64)
    value = 0.0
    grad = np.zeros_like(xhat)
    if weights.con:
        v, g = con_loss(xhat, x)
        value += weights.con * v
        grad += weights.con * g
    if weights.sem and net is not None:
        v, g = sem_loss(xhat, x, net)
        value += weights.sem * v
        grad += weights.sem * g
    if weights.adv and adv is not None:
        value += weights.adv * adv.loss(xhat, x)
        grad += weights.adv * np.asarray(adv.grad(xhat, x), dtype=np.float64)
    return value, grad


@dataclass
class ContentMetric:
    def loss(self, xhat, x):
        return con_loss(xhat, x)[0]

    def grad(self, xhat, x):
        return con_loss(xhat, x)[1]


@dataclass
class SemanticMetric:
    net: EmbeddingNet

    def loss(self, xhat, x):
        return sem_loss(xhat, x, self.net)[0]

    def grad(self, xhat, x):
        return sem_loss(xhat, x, self.net)[1]


@dataclass
class TotalMetric:
    net: EmbeddingNet | None = None
    weights: LossWeights = field(default_factory=LossWeights)
    adv: MetricPlugin | None = None

    def value_and_grad(self, xhat, x):
        return total_loss(xhat, x, self.net, self.weights, self.adv)

    def loss(self, xhat, x):
        return self.value_and_grad(xhat, x)[0]

    def grad(self, xhat, x):
        return self.value_and_grad(xhat, x)[1]
