"""The network: marker-augmented embeddings, shared attention experts,
per-task gates, task heads.

Every token embedding is the concatenation of its word vector and a
trainable 2-row marker embedding selected by the token's lexicon bit.
A shared bank of expert units (multi-head self-attention, a feed-forward
layer, dual max/mean pooling, a two-layer feed-forward head) maps each
sequence to fixed-size vectors; each task mixes the experts with its own
softmax gate and applies its own affine head. No residual connections or
layer normalization anywhere.

Ops accept a single sequence (seq_len, model_dim) or a batch
(batch, seq_len, model_dim); masks carry True for real positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import PAD_ID, TASK_IDS, EmbeddingTable
from .errors import ConfigError, UsageError
from .tensor import (
    MASK_FILL,
    Tensor,
    add,
    add_const,
    concat_last,
    dropout,
    embedding_lookup,
    masked_max,
    masked_mean,
    matmul,
    mul,
    relu,
    reshape,
    scale,
    slice_last,
    softmax,
    transpose_last,
)

# Attention score denominators: "dim" divides by d1 itself, "sqrt_dim" by
# sqrt(d1). Both modes agree when d1 == 1.
SCALE_MODES = ("dim", "sqrt_dim")


@dataclass
class ModelConfig:
    vocab_size: int
    word_dim: int = 300
    marker_dim: int = 100
    num_heads: int = 4
    ff1_dim: int = 400
    ff2_hidden: int = 200
    ff2_out: int = 200
    num_experts: int = 4
    classes_per_task: tuple[int, ...] = (2, 2)
    dropout: float = 0.1
    attention_scale: str = "dim"
    use_gate: bool = True
    max_seq_len: int = 128

    @property
    def model_dim(self) -> int:
        return self.word_dim + self.marker_dim

    @property
    def num_tasks(self) -> int:
        return len(self.classes_per_task)

    def validate(self) -> None:
        dims = {
            "vocab_size": self.vocab_size, "word_dim": self.word_dim,
            "marker_dim": self.marker_dim, "num_heads": self.num_heads,
            "ff1_dim": self.ff1_dim, "ff2_hidden": self.ff2_hidden,
            "ff2_out": self.ff2_out, "num_experts": self.num_experts,
            "max_seq_len": self.max_seq_len,
        }
        for name, value in dims.items():
            if value < 1:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.model_dim % self.num_heads != 0:
            raise ConfigError(
                f"model_dim {self.model_dim} not divisible by num_heads {self.num_heads}"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.attention_scale not in SCALE_MODES:
            raise ConfigError(
                f"attention_scale must be one of {SCALE_MODES}, got {self.attention_scale!r}"
            )
        if len(self.classes_per_task) != len(TASK_IDS):
            raise ConfigError(
                f"classes_per_task needs {len(TASK_IDS)} entries, got {self.classes_per_task}"
            )
        if any(c < 2 for c in self.classes_per_task):
            raise ConfigError(f"each task needs >= 2 classes: {self.classes_per_task}")


class _Init:
    """Xavier-uniform weights, zero biases, one rng stream."""

    def __init__(self, rng: np.random.Generator, dtype):
        self.rng = rng
        self.dtype = dtype

    def weight(self, fan_in: int, fan_out: int) -> Tensor:
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        w = self.rng.uniform(-limit, limit, size=(fan_in, fan_out))
        return Tensor(w.astype(self.dtype), requires_grad=True)

    def bias(self, dim: int) -> Tensor:
        return Tensor(np.zeros(dim, dtype=self.dtype), requires_grad=True)


class ExpertUnit:
    def __init__(self, cfg: ModelConfig, init: _Init):
        d, head_dim = cfg.model_dim, cfg.model_dim // cfg.num_heads
        self.wq = [init.weight(d, head_dim) for _ in range(cfg.num_heads)]
        self.wk = [init.weight(d, head_dim) for _ in range(cfg.num_heads)]
        self.wv = [init.weight(d, head_dim) for _ in range(cfg.num_heads)]
        self.wo = init.weight(d, d)
        self.w1 = init.weight(d, cfg.ff1_dim)
        self.b1 = init.bias(cfg.ff1_dim)
        self.w2a = init.weight(2 * cfg.ff1_dim, cfg.ff2_hidden)
        self.b2a = init.bias(cfg.ff2_hidden)
        self.w2b = init.weight(cfg.ff2_hidden, cfg.ff2_out)
        self.b2b = init.bias(cfg.ff2_out)

    def named_params(self, prefix: str) -> list[tuple[str, Tensor]]:
        out = []
        for h in range(len(self.wq)):
            out += [(f"{prefix}.h{h}.wq", self.wq[h]),
                    (f"{prefix}.h{h}.wk", self.wk[h]),
                    (f"{prefix}.h{h}.wv", self.wv[h])]
        out += [(f"{prefix}.wo", self.wo),
                (f"{prefix}.w1", self.w1), (f"{prefix}.b1", self.b1),
                (f"{prefix}.w2a", self.w2a), (f"{prefix}.b2a", self.b2a),
                (f"{prefix}.w2b", self.w2b), (f"{prefix}.b2b", self.b2b)]
        return out


# ------------------------------------------------------------- forward ops


def embed_with_markers(token_ids: np.ndarray, marker_bits: np.ndarray,
                       table: Tensor, markers: Tensor) -> Tensor:
    """(..., s) ids and bits -> (..., s, word_dim + marker_dim)."""
    token_ids = np.asarray(token_ids)
    marker_bits = np.asarray(marker_bits)
    if token_ids.shape != marker_bits.shape:
        raise UsageError(
            f"ids shape {token_ids.shape} != marker bits shape {marker_bits.shape}"
        )
    words = embedding_lookup(table, token_ids, pad_id=PAD_ID)
    marks = embedding_lookup(markers, marker_bits)
    return concat_last([words, marks])


def attention(q: Tensor, k: Tensor, v: Tensor, scale_mode: str = "dim",
              key_mask: np.ndarray | None = None) -> Tensor:
    """softmax(q k^T / denom) v with masked positions forced to ~zero weight."""
    if scale_mode not in SCALE_MODES:
        raise ConfigError(f"unknown attention scale mode {scale_mode!r}")
    d1 = q.shape[-1]
    denom = float(d1) if scale_mode == "dim" else math.sqrt(d1)
    scores = scale(matmul(q, transpose_last(k)), 1.0 / denom)  # (..., sq, sk)
    if key_mask is not None:
        if not key_mask.any(axis=-1).all():
            raise UsageError("attention: every position is masked")
        bias = np.where(key_mask, 0.0, MASK_FILL).astype(scores.dtype)
        scores = add_const(scores, bias[..., None, :])
    return matmul(softmax(scores), v)


def expert_forward(unit: ExpertUnit, x: Tensor, mask: np.ndarray,
                   training: bool = False, dropout_rate: float = 0.0,
                   rng: np.random.Generator | None = None,
                   scale_mode: str = "dim") -> Tensor:
    """x (..., s, model_dim) -> (..., ff2_out)."""
    single = x.ndim == 2
    if single:
        x = reshape(x, (1, *x.shape))
        mask = np.asarray(mask)[None]
    heads = [attention(matmul(x, wq), matmul(x, wk), matmul(x, wv),
                       scale_mode, mask)
             for wq, wk, wv in zip(unit.wq, unit.wk, unit.wv)]
    h = matmul(concat_last(heads), unit.wo)            # (b, s, model_dim)
    h = dropout(h, dropout_rate, training, rng)
    h = relu(add(matmul(h, unit.w1), unit.b1))         # (b, s, ff1)
    h = dropout(h, dropout_rate, training, rng)
    pooled = concat_last([masked_max(h, mask), masked_mean(h, mask)])
    z = relu(add(matmul(pooled, unit.w2a), unit.b2a))
    z = add(matmul(z, unit.w2b), unit.b2b)             # (b, ff2_out)
    z = dropout(z, dropout_rate, training, rng)
    return reshape(z, (z.shape[-1],)) if single else z


def gate_weights(w_gn: Tensor, x: Tensor, mask: np.ndarray) -> Tensor:
    """Mean of unmasked embedding rows through w_gn, softmaxed: (..., experts)."""
    single = x.ndim == 2
    if single:
        x = reshape(x, (1, *x.shape))
        mask = np.asarray(mask)[None]
    w = softmax(matmul(masked_mean(x, mask), w_gn))
    return reshape(w, (w.shape[-1],)) if single else w


# -------------------------------------------------------------------- model


class MoeClassifier:
    def __init__(self, cfg: ModelConfig, embedding: EmbeddingTable,
                 rng: np.random.Generator, dtype=np.float32):
        cfg.validate()
        if embedding.matrix.shape != (cfg.vocab_size, cfg.word_dim):
            raise ConfigError(
                f"embedding shape {embedding.matrix.shape} does not match "
                f"config ({cfg.vocab_size}, {cfg.word_dim})"
            )
        self.cfg = cfg
        self.embedding = embedding
        init = _Init(rng, dtype)
        limit = math.sqrt(6.0 / (2 + cfg.marker_dim))
        self.markers = Tensor(
            rng.uniform(-limit, limit, size=(2, cfg.marker_dim)).astype(dtype),
            requires_grad=True,
        )
        self.experts = [ExpertUnit(cfg, init) for _ in range(cfg.num_experts)]
        # Gates are created even when use_gate is off so that the init
        # stream, and with it every other parameter, matches the gated model.
        self.gates = [init.weight(cfg.model_dim, cfg.num_experts)
                      for _ in range(cfg.num_tasks)]
        self.heads = [(init.weight(cfg.ff2_out, c), init.bias(c))
                      for c in cfg.classes_per_task]

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = [("embedding", self.embedding.matrix), ("markers", self.markers)]
        for i, unit in enumerate(self.experts):
            out += unit.named_params(f"expert{i}")
        out += [(f"gate{k}", g) for k, g in enumerate(self.gates)]
        for k, (w, b) in enumerate(self.heads):
            out += [(f"head{k}.w", w), (f"head{k}.b", b)]
        return out

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def task_index(self, task_id: str) -> int:
        if task_id not in TASK_IDS:
            raise ConfigError(f"unknown task_id {task_id!r}")
        return TASK_IDS.index(task_id)

    def pad_batch(self, batch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """list of (token_ids, marker_bits, ...) -> ids, bits, mask arrays."""
        if not batch:
            raise UsageError("forward needs a non-empty batch")
        width = max(len(ex[0]) for ex in batch)
        ids = np.full((len(batch), width), PAD_ID, dtype=np.int64)
        bits = np.zeros((len(batch), width), dtype=np.int64)
        mask = np.zeros((len(batch), width), dtype=bool)
        for r, ex in enumerate(batch):
            n = len(ex[0])
            ids[r, :n] = ex[0]
            bits[r, :n] = ex[1]
            mask[r, :n] = True
        return ids, bits, mask

    def forward(self, batch, task_id: str, training: bool = False,
                rng: np.random.Generator | None = None) -> Tensor:
        """batch of (token_ids, marker_bits) -> logits (batch, classes)."""
        k = self.task_index(task_id)
        cfg = self.cfg
        ids, bits, mask = self.pad_batch(batch)
        x = embed_with_markers(ids, bits, self.embedding.matrix, self.markers)
        outs = [expert_forward(unit, x, mask, training, cfg.dropout, rng,
                               cfg.attention_scale)
                for unit in self.experts]
        if cfg.use_gate:
            gw = gate_weights(self.gates[k], x, mask)  # (b, experts)
            mixed = None
            for i, f in enumerate(outs):
                term = mul(slice_last(gw, i, i + 1), f)
                mixed = term if mixed is None else add(mixed, term)
        else:
            total = outs[0]
            for f in outs[1:]:
                total = add(total, f)
            mixed = scale(total, 1.0 / cfg.num_experts)
        w, b = self.heads[k]
        return add(matmul(mixed, w), b)

    def predict(self, batch, task_id: str) -> list[int]:
        """Argmax class per example; ties go to the lowest index."""
        logits = self.forward(batch, task_id, training=False)
        return [int(i) for i in np.argmax(logits.data, axis=1)]

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.named_parameters()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, t in self.named_parameters():
            if name not in arrays:
                raise UsageError(f"missing parameter {name!r} in state")
            if arrays[name].shape != t.data.shape:
                raise UsageError(
                    f"parameter {name!r}: shape {arrays[name].shape} != {t.data.shape}"
                )
            t.data = arrays[name].astype(t.data.dtype, copy=True)
