"""MLP embedding network and row-wise L2 normalization.

The forward path is plain linear/relu stages. No normalization stage exists
inside the network; when a baseline configuration wants unit-norm embeddings
it applies :func:`l2_normalize` explicitly, so distance-regularized runs can
assert structurally that nothing rescales the embedding space.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .optim import ParamStore
from .tensor import Tensor, matmul, relu, tsqrt, tsum

log = logging.getLogger(__name__)

# Rows with squared norm below this are treated as degenerate by l2_normalize.
_DEGENERATE_SQ = 1e-18


@dataclass
class EmbeddingBatch:
    """A batch of embedding rows (on the graph) with their integer labels."""

    embeddings: Tensor
    labels: np.ndarray = field(default=None)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.embeddings.ndim != 2:
            raise ConfigError(f"embeddings must be 2-D, got shape {self.embeddings.shape}")
        if self.labels.shape != (self.embeddings.shape[0],):
            raise ConfigError(
                f"labels shape {self.labels.shape} does not match "
                f"batch size {self.embeddings.shape[0]}"
            )

    @property
    def size(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]


class MlpEmbedder:
    """Fully-connected embedder: input -> relu hidden stack -> linear output.

    Weights use uniform He-style initialization scaled by fan-in, seeded for
    reproducibility; biases start at zero.
    """

    def __init__(self, store: ParamStore, input_dim: int, hidden_dims, embed_dim: int,
                 seed: int = 0, prefix: str = "embedder"):
        widths = [int(input_dim), *(int(w) for w in hidden_dims), int(embed_dim)]
        if any(w < 1 for w in widths):
            raise ConfigError(f"layer widths must be >= 1, got {widths}")
        self.input_dim = widths[0]
        self.embed_dim = widths[-1]
        self.widths = widths
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for k, (fan_in, fan_out) in enumerate(zip(widths, widths[1:])):
            limit = math.sqrt(6.0 / fan_in)
            w = store.add(f"{prefix}.layer{k}.weight",
                          rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            b = store.add(f"{prefix}.layer{k}.bias", np.zeros(fan_out))
            self.weights.append(w)
            self.biases.append(b)

    def architecture(self) -> list:
        """Stage names in forward order; lets tests assert no normalization stage."""
        stages = []
        for k, (fan_in, fan_out) in enumerate(zip(self.widths, self.widths[1:])):
            stages.append(f"linear({fan_in}->{fan_out})")
            if k < len(self.weights) - 1:
                stages.append("relu")
        return stages

    def forward(self, inputs) -> Tensor:
        x = inputs if isinstance(inputs, Tensor) else Tensor(inputs)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ConfigError(
                f"embedder expects inputs of width {self.input_dim}, got shape {x.shape}"
            )
        h = x
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = matmul(h, w) + b
            if k < last:
                h = relu(h)
        return h

    def embed(self, features, labels) -> EmbeddingBatch:
        return EmbeddingBatch(self.forward(features), labels)

    def forward_values(self, inputs: np.ndarray) -> np.ndarray:
        """Graph-free forward pass for evaluation; same kernels, same results."""
        h = np.asarray(inputs, dtype=np.float64)
        if h.ndim != 2 or h.shape[1] != self.input_dim:
            raise ConfigError(
                f"embedder expects inputs of width {self.input_dim}, got shape {h.shape}"
            )
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.data + b.data
            if k < last:
                h = np.where(h > 0.0, h, 0.0)
        return h


def l2_normalize(batch):
    """Scale each embedding row to unit two-norm.

    Degenerate (zero) rows cannot be normalized; they are replaced by the
    first basis vector with no gradient contribution, and a warning is
    logged. Accepts a Tensor or an EmbeddingBatch and returns the same kind.
    """
    if isinstance(batch, EmbeddingBatch):
        return EmbeddingBatch(l2_normalize(batch.embeddings), batch.labels)
    emb = batch
    sq = (emb.data * emb.data).sum(axis=1)
    degenerate = sq < _DEGENERATE_SQ
    if degenerate.any():
        log.warning("l2_normalize: %d zero row(s) replaced by a fixed unit vector",
                    int(degenerate.sum()))
        keep = Tensor(np.where(degenerate, 0.0, 1.0)[:, None])
        emb = emb * keep
    sumsq = tsum(emb * emb, axis=1, keepdims=True)
    norm = tsqrt(sumsq + 1e-24)
    out = emb / norm
    if degenerate.any():
        basis = np.zeros(emb.shape)
        basis[degenerate, 0] = 1.0
        out = out + Tensor(basis)
    return out
