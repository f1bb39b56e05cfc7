"""Training loop, optimizer, gradient checking, and checkpoint files.

The optimizer is a plain AdamW written out explicitly: decoupled weight decay
scales each parameter before the bias-corrected moment update. Model
selection keeps the epoch with the lowest validation loss.

Checkpoints are single binary files: a four-byte magic, a version, a JSON
header describing parameters, configuration, the label map, and the full
vocabulary, then the raw little-endian parameter payload in header order.
Everything needed to score URLs again lives in the one file.
"""

from __future__ import annotations

import dataclasses
import json
import struct
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from .data import LabeledUrlSet
from .model import Batch, ModelConfig, UrlClassifier, collate
from .seeding import derive_seed, numpy_rng
from .tokenizer import (BpeVocab, TokenSequence, tokenize, vocab_from_json_dict,
                        vocab_sha256, vocab_to_json_dict)

CHECKPOINT_MAGIC = b"URLD"
CHECKPOINT_VERSION = 1

_NP_DTYPES = {"float32": "<f4", "float64": "<f8"}
_TORCH_DTYPES = {"float32": torch.float32, "float64": torch.float64}


class OptimizerError(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    batch_size: int = 64
    lr: float = 2e-5
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    shuffle_seed: int | None = None
    precision: int = 32

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.lr <= 0 or self.eps <= 0:
            raise ValueError("lr and eps must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must be in [0, 1)")
        if self.precision not in (32, 64):
            raise ValueError("precision must be 32 or 64")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)

    @property
    def effective_shuffle_seed(self) -> int:
        if self.shuffle_seed is not None:
            return self.shuffle_seed
        return derive_seed(self.seed, "shuffle")


def cross_entropy(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean negative log-likelihood, stabilized by max subtraction."""
    if logits.ndim != 2 or labels.ndim != 1 or logits.shape[0] != labels.shape[0]:
        raise ValueError("logits must be (batch, classes) with matching labels")
    shifted = logits - logits.max(dim=-1, keepdim=True).values
    log_z = shifted.exp().sum(dim=-1).log()
    picked = shifted[torch.arange(labels.shape[0]), labels]
    return (log_z - picked).mean()


class AdamW:
    """Decoupled weight decay, then the bias-corrected Adam step.

    A non-finite gradient aborts the step with the offending parameter named,
    so a diverging run fails loudly instead of silently corrupting weights.
    """

    def __init__(self, named_params: list[tuple[str, torch.nn.Parameter]],
                 lr: float, weight_decay: float = 0.0,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.named_params = list(named_params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state: dict[str, dict] = {
            name: {"step": 0,
                   "m": torch.zeros_like(p, memory_format=torch.contiguous_format),
                   "v": torch.zeros_like(p, memory_format=torch.contiguous_format)}
            for name, p in self.named_params
        }

    def zero_grad(self) -> None:
        for _, p in self.named_params:
            p.grad = None

    @torch.no_grad()
    def step(self) -> None:
        for name, p in self.named_params:
            g = p.grad
            if g is None:
                continue
            if not torch.isfinite(g).all():
                raise OptimizerError(f"non-finite gradient in parameter {name}")
            st = self.state[name]
            st["step"] += 1
            t = st["step"]
            p.mul_(1.0 - self.lr * self.weight_decay)
            st["m"].mul_(self.beta1).add_(g, alpha=1.0 - self.beta1)
            st["v"].mul_(self.beta2).addcmul_(g, g, value=1.0 - self.beta2)
            m_hat = st["m"] / (1.0 - self.beta1 ** t)
            v_hat = st["v"] / (1.0 - self.beta2 ** t)
            p.addcdiv_(m_hat, v_hat.sqrt().add_(self.eps), value=-self.lr)


def tokenize_set(dset: LabeledUrlSet, vocab: BpeVocab, max_len: int
                 ) -> tuple[list[TokenSequence], np.ndarray]:
    seqs = [tokenize(r.url, vocab, max_len=max_len) for r in dset.records]
    labels = np.array([r.label for r in dset.records], dtype=np.int64)
    return seqs, labels


def iter_batches(seqs: list[TokenSequence], labels: np.ndarray,
                 order: np.ndarray, batch_size: int):
    for start in range(0, len(order), batch_size):
        idx = order[start:start + batch_size]
        yield collate([seqs[i] for i in idx], labels[idx])


def evaluate_loss(model: UrlClassifier, seqs: list[TokenSequence],
                  labels: np.ndarray, batch_size: int) -> float:
    """Mean cross-entropy over a fixed set, dropout disabled."""
    model.eval()
    order = np.arange(len(seqs))
    total = 0.0
    with torch.no_grad():
        for batch in iter_batches(seqs, labels, order, batch_size):
            loss = cross_entropy(model(batch), batch.labels)
            total += loss.item() * len(batch)
    return total / max(1, len(seqs))


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    val_loss: float
    seconds: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class TrainResult:
    best_val_loss: float
    best_epoch: int
    log: list[EpochLog] = field(default_factory=list)


def train(model: UrlClassifier, train_set: LabeledUrlSet, val_set: LabeledUrlSet,
          vocab: BpeVocab, config: TrainConfig) -> TrainResult:
    """Optimize the model and leave it holding the best-validation weights.

    Shuffling draws a fresh permutation per epoch from the shuffle seed, so
    every epoch still visits each training example exactly once. Dropout
    noise comes from the run seed.
    """
    if config.precision == 64:
        model.double()
    torch.manual_seed(derive_seed(config.seed, "dropout"))

    max_len = model.config.max_len
    train_seqs, train_labels = tokenize_set(train_set, vocab, max_len)
    val_seqs, val_labels = tokenize_set(val_set, vocab, max_len)

    opt = AdamW(list(model.named_parameters()), lr=config.lr,
                weight_decay=config.weight_decay, beta1=config.beta1,
                beta2=config.beta2, eps=config.eps)

    result = TrainResult(best_val_loss=float("inf"), best_epoch=0)
    best_state: dict[str, torch.Tensor] | None = None
    for epoch in range(1, config.epochs + 1):
        started = time.monotonic()
        rng = numpy_rng(config.effective_shuffle_seed, f"epoch-{epoch}")
        order = rng.permutation(len(train_seqs))
        model.train()
        seen = 0
        running = 0.0
        for batch in iter_batches(train_seqs, train_labels, order,
                                  config.batch_size):
            opt.zero_grad()
            loss = cross_entropy(model(batch), batch.labels)
            loss.backward()
            opt.step()
            running += loss.item() * len(batch)
            seen += len(batch)
        val_loss = evaluate_loss(model, val_seqs, val_labels, config.batch_size)
        result.log.append(EpochLog(
            epoch=epoch, train_loss=running / max(1, seen),
            val_loss=val_loss, seconds=time.monotonic() - started))
        if val_loss < result.best_val_loss:
            result.best_val_loss = val_loss
            result.best_epoch = epoch
            best_state = {n: p.detach().clone()
                          for n, p in model.named_parameters()}
    if best_state is not None:
        with torch.no_grad():
            for name, p in model.named_parameters():
                p.copy_(best_state[name])
    return result


def grad_check(model: UrlClassifier, batch: Batch, step: float = 1e-5,
               probes: int = 3, floor: float = 1e-7, seed: int = 0
               ) -> dict[str, float]:
    """Compare autograd against central finite differences, per parameter.

    For each parameter the entry with the largest analytic gradient plus
    random extra entries are probed. Returns the worst relative error per
    parameter name; entries where both estimates fall below ``floor`` are
    treated as agreeing. Dropout is disabled for the comparison.
    """
    model.eval()
    if batch.labels is None:
        raise ValueError("grad check needs a labeled batch")
    named = [(n, p) for n, p in model.named_parameters() if p.requires_grad]

    def loss_value() -> torch.Tensor:
        return cross_entropy(model(batch), batch.labels)

    loss = loss_value()
    grads = torch.autograd.grad(loss, [p for _, p in named], allow_unused=True)

    rng = numpy_rng(seed, "grad-check")
    report: dict[str, float] = {}
    for (name, p), g in zip(named, grads):
        flat = p.data.view(-1)
        gflat = (torch.zeros_like(flat) if g is None
                 else g.reshape(-1))
        n = flat.shape[0]
        indices = {int(gflat.abs().argmax().item())}
        while len(indices) < min(probes, n):
            indices.add(int(rng.integers(0, n)))
        worst = 0.0
        with torch.no_grad():
            for i in sorted(indices):
                original = flat[i].item()
                flat[i] = original + step
                plus = loss_value().item()
                flat[i] = original - step
                minus = loss_value().item()
                flat[i] = original
                fd = (plus - minus) / (2.0 * step)
                an = gflat[i].item()
                denom = max(abs(fd), abs(an))
                rel = 0.0 if denom < floor else abs(fd - an) / denom
                worst = max(worst, rel)
        report[name] = worst
    return report


@dataclass
class Checkpoint:
    model_config: ModelConfig
    train_config: TrainConfig
    label_map: dict[str, int]
    vocab: BpeVocab
    vocab_digest: str
    best_val_loss: float
    best_epoch: int
    dtype: str
    params: dict[str, np.ndarray]

    def build_model(self) -> UrlClassifier:
        model = UrlClassifier(self.model_config)
        if self.dtype == "float64":
            model.double()
        state = {name: torch.from_numpy(arr.copy())
                 for name, arr in self.params.items()}
        model.load_state_dict(state, strict=True)
        return model


def save_checkpoint(path: str, model: UrlClassifier, *, train_config: TrainConfig,
                    label_map: dict[str, int], vocab: BpeVocab,
                    best_val_loss: float, best_epoch: int) -> None:
    params = [(name, p.detach().cpu().numpy()) for name, p in
              model.named_parameters()]
    dtype = {np.float32: "float32", np.float64: "float64"}.get(
        params[0][1].dtype.type)
    if dtype is None:
        raise CheckpointError(f"unsupported parameter dtype {params[0][1].dtype}")
    header = {
        "params": [{"name": n, "shape": list(a.shape)} for n, a in params],
        "dtype": dtype,
        "model_config": model.config.to_dict(),
        "train_config": train_config.to_dict(),
        "label_map": dict(label_map),
        "vocab": vocab_to_json_dict(vocab),
        "vocab_sha256": vocab_sha256(vocab),
        "best_val_loss": float(best_val_loss),
        "best_epoch": int(best_epoch),
    }
    header_bytes = json.dumps(header, sort_keys=True,
                              separators=(",", ":")).encode("utf-8")
    np_code = _NP_DTYPES[dtype]
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for _, arr in params:
            fh.write(np.ascontiguousarray(arr).astype(np_code).tobytes())


def load_checkpoint(path: str) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError("bad magic: not a checkpoint file")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (header_len,) = struct.unpack_from("<Q", blob, 8)
    header_start = 16
    header_end = header_start + header_len
    if header_end > len(blob):
        raise CheckpointError("truncated header")
    try:
        header = json.loads(blob[header_start:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable header: {exc}") from exc

    dtype = header["dtype"]
    if dtype not in _NP_DTYPES:
        raise CheckpointError(f"unsupported payload dtype {dtype}")
    np_code = _NP_DTYPES[dtype]
    item = np.dtype(np_code).itemsize

    params: dict[str, np.ndarray] = {}
    offset = header_end
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        end = offset + count * item
        if end > len(blob):
            raise CheckpointError(f"truncated payload at {entry['name']}")
        arr = np.frombuffer(blob, dtype=np_code, count=count, offset=offset)
        params[entry["name"]] = arr.reshape(shape).copy()
        offset = end
    if offset != len(blob):
        raise CheckpointError("trailing bytes after parameter payload")

    vocab = vocab_from_json_dict(header["vocab"])
    digest = vocab_sha256(vocab)
    if digest != header["vocab_sha256"]:
        raise CheckpointError("vocabulary digest mismatch")
    return Checkpoint(
        model_config=ModelConfig.from_dict(header["model_config"]),
        train_config=TrainConfig.from_dict(header["train_config"]),
        label_map={str(k): int(v) for k, v in header["label_map"].items()},
        vocab=vocab,
        vocab_digest=digest,
        best_val_loss=float(header["best_val_loss"]),
        best_epoch=int(header["best_epoch"]),
        dtype=dtype,
        params=params,
    )
