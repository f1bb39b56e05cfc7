"""Malicious URL detection with dual-channel transformer features."""

from .data import LabeledUrlSet, UrlRecord, load_dataset, save_dataset
from .model import Batch, ModelConfig, UrlClassifier, collate, predict_probs
from .tokenizer import BpeVocab, CharVocab, TokenSequence, tokenize, train_bpe
from .training import TrainConfig, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "Batch", "BpeVocab", "CharVocab", "LabeledUrlSet", "ModelConfig",
    "TokenSequence", "TrainConfig", "UrlClassifier", "UrlRecord", "collate",
    "load_checkpoint", "load_dataset", "predict_probs", "save_checkpoint",
    "save_dataset", "tokenize", "train", "train_bpe", "__version__",
]
