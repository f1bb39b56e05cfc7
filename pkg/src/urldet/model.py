"""Full detector: dual-channel encoder, layer pyramid, conv refinement, head.

A tokenized URL enters as two aligned streams. The word stream is a learned
subword embedding plus a position embedding; the character stream is the
BiGRU boundary readout of the raw characters. The encoder stack mixes the
streams at every depth, the per-depth outputs are fused and stacked into a
depth-channel map, and the multi-scale and pyramid-attention stages refine
that map before the pooled linear classifier.

``last_k`` on :meth:`UrlClassifier.forward` evaluates the model as if only
the deepest k encoder depths existed, by slicing the channel dimension of
every stage that indexes depth. With k equal to the configured depth the
sliced path is the ordinary one.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .char_channel import CharChannel
from .encoder import EncoderStack
from .multiscale import MultiScaleConv
from .nn_init import uniform_
from .pyramid import LayerFuse, select_layers, stack_layers
from .spa import ClassifierHead, PyramidAttention, apply_attention, spatial_pyramid
from .tokenizer import CharVocab, TokenSequence, flatten_chars

_TUPLE_FIELDS = ("interaction_windows", "dilation_rates", "pyramid_grids")


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    num_classes: int = 2
    max_len: int = 200
    d_model: int = 64
    n_layers: int = 4
    n_heads: int = 4
    d_ff: int = 256
    d_char: int = 16
    dropout: float = 0.1
    char_vocab_size: int = CharVocab.size
    interaction_windows: tuple[int, ...] = (1, 3)
    dilation_rates: tuple[int, ...] = (1, 2, 4, 8)
    include_common: bool = True
    pyramid_grids: tuple[int, ...] = (4, 2, 1)
    spa_hidden_factor: int = 4
    spa_inner_gelu: bool = True

    def __post_init__(self) -> None:
        if self.vocab_size < 1 or self.char_vocab_size < 1:
            raise ValueError("vocabulary sizes must be positive")
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        if self.max_len < 3:
            raise ValueError("max_len must be at least 3")
        if self.d_model % 2 != 0:
            raise ValueError("d_model must be even (split across GRU directions)")
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if self.n_layers < 1:
            raise ValueError("need at least one encoder layer")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        fixed = dict(data)
        for name in _TUPLE_FIELDS:
            if name in fixed:
                fixed[name] = tuple(fixed[name])
        return cls(**fixed)

    @classmethod
    def full_scale(cls, vocab_size: int, **overrides) -> "ModelConfig":
        """The large configuration: 12 layers of width 768 over 200 tokens."""
        base = dict(vocab_size=vocab_size, max_len=200, d_model=768,
                    n_layers=12, n_heads=12, d_ff=3072, d_char=64)
        base.update(overrides)
        return cls(**base)


@dataclass
class Batch:
    """Collated tensors for a list of equally padded token sequences."""

    token_ids: torch.Tensor     # (batch, width) int64
    token_mask: torch.Tensor    # (batch, width) int64, 1 on real tokens
    char_ids: torch.Tensor      # (batch, max_chars) int64
    char_lengths: torch.Tensor  # (batch,) int64
    first_index: torch.Tensor   # (batch, width) int64 into the char axis
    last_index: torch.Tensor    # (batch, width) int64
    labels: torch.Tensor | None = None

    def __len__(self) -> int:
        return self.token_ids.shape[0]


def collate(seqs: list[TokenSequence], labels=None) -> Batch:
    if not seqs:
        raise ValueError("cannot collate an empty batch")
    width = seqs[0].subword_ids.shape[0]
    for s in seqs[1:]:
        if s.subword_ids.shape[0] != width:
            raise ValueError("all sequences in a batch must share max_len")

    token_ids = np.stack([s.subword_ids for s in seqs]).astype(np.int64)
    token_mask = np.stack([s.attention_mask for s in seqs]).astype(np.int64)

    flats = []
    bounds = []
    for s in seqs:
        flat, b = flatten_chars(s)
        flats.append(flat)
        bounds.append(b)
    max_chars = max(f.shape[0] for f in flats)
    batch = len(seqs)
    char_ids = np.full((batch, max_chars), CharVocab.PAD_CHAR_ID, dtype=np.int64)
    char_lengths = np.zeros(batch, dtype=np.int64)
    first_index = np.zeros((batch, width), dtype=np.int64)
    last_index = np.zeros((batch, width), dtype=np.int64)
    for i, (flat, b) in enumerate(zip(flats, bounds)):
        char_ids[i, :flat.shape[0]] = flat
        char_lengths[i] = flat.shape[0]
        for t, (first, last) in enumerate(b):
            first_index[i, t] = first
            last_index[i, t] = last

    label_tensor = None
    if labels is not None:
        label_tensor = torch.as_tensor(np.asarray(labels, dtype=np.int64))
    return Batch(
        token_ids=torch.from_numpy(token_ids),
        token_mask=torch.from_numpy(token_mask),
        char_ids=torch.from_numpy(char_ids),
        char_lengths=torch.from_numpy(char_lengths),
        first_index=torch.from_numpy(first_index),
        last_index=torch.from_numpy(last_index),
        labels=label_tensor,
    )


class UrlClassifier(nn.Module):
    def __init__(self, config: ModelConfig,
                 generator: torch.Generator | None = None) -> None:
        super().__init__()
        self.config = config
        d = config.d_model
        self.word_embedding = nn.Embedding(config.vocab_size, d)
        uniform_(self.word_embedding.weight, d, generator)
        self.position_embedding = nn.Parameter(torch.empty(config.max_len, d))
        uniform_(self.position_embedding, d, generator)
        self.char_channel = CharChannel(
            config.char_vocab_size, config.d_char, d // 2, generator)
        self.encoder = EncoderStack(
            config.n_layers, d, config.n_heads, config.d_ff, config.dropout,
            config.interaction_windows, generator)
        self.layer_fuse = LayerFuse(d, generator)
        self.multiscale = MultiScaleConv(
            config.n_layers, config.dilation_rates, config.include_common,
            generator)
        self.attention = PyramidAttention(
            config.n_layers, config.pyramid_grids, config.spa_hidden_factor,
            config.spa_inner_gelu, generator)
        self.head = ClassifierHead(
            config.n_layers, d, config.num_classes, config.dropout, generator)

    def input_embeddings(self, batch: Batch) -> tuple[torch.Tensor, torch.Tensor]:
        width = batch.token_ids.shape[1]
        if width > self.config.max_len:
            raise ValueError(
                f"sequence width {width} exceeds max_len {self.config.max_len}")
        word = self.word_embedding(batch.token_ids)
        word = word + self.position_embedding[:width].unsqueeze(0)
        char = self.char_channel(
            batch.char_ids, batch.char_lengths,
            batch.first_index, batch.last_index, batch.token_mask)
        return word, char

    def encode(self, batch: Batch) -> list[tuple[torch.Tensor, torch.Tensor]]:
        word, char = self.input_embeddings(batch)
        return self.encoder(word, char, batch.token_mask)

    def features(self, batch: Batch, last_k: int | None = None) -> torch.Tensor:
        """Stacked per-depth fused features, shape (batch, k, width, d)."""
        outputs = self.encode(batch)
        if last_k is not None:
            outputs = select_layers(outputs, last_k)
        fused = [self.layer_fuse(w, c) for w, c in outputs]
        return stack_layers(fused)

    def forward(self, batch: Batch, last_k: int | None = None) -> torch.Tensor:
        stacked = self.features(batch, last_k)
        refined = self.multiscale(stacked, last_k)
        summary = spatial_pyramid(refined, self.config.pyramid_grids)
        weights = self.attention(summary, last_k)
        weighted = apply_attention(refined, weights)
        return self.head(weighted, last_k)

    def attention_weights(self, batch: Batch, last_k: int | None = None
                          ) -> torch.Tensor:
        """Per-channel sigmoid attention weights, shape (batch, k)."""
        refined = self.multiscale(self.features(batch, last_k), last_k)
        return self.attention(spatial_pyramid(refined, self.config.pyramid_grids),
                              last_k)


def predict_probs(model: UrlClassifier, seqs: list[TokenSequence],
                  batch_size: int = 64, last_k: int | None = None) -> np.ndarray:
    """Class probabilities for each sequence, shape (n, num_classes)."""
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    model.eval()
    rows = []
    with torch.no_grad():
        for start in range(0, len(seqs), batch_size):
            chunk = seqs[start:start + batch_size]
            logits = model(collate(chunk), last_k=last_k)
            rows.append(torch.softmax(logits, dim=-1).cpu().numpy())
    if not rows:
        return np.zeros((0, model.config.num_classes))
    return np.concatenate(rows, axis=0)
