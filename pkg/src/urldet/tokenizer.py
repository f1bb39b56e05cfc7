"""URL tokenization: BPE subwords plus per-token character sequences.

A URL is pre-split on URL delimiter characters (each delimiter becomes a
standalone single-character token), the remaining runs are segmented by
greedy longest match against a trained BPE vocabulary, and every token also
carries its raw byte sequence for the character channel.  Continuation
pieces inside a run are marked with a leading "##" in the token text; the
marker never enters the character sequence and does not change the token id.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass

import numpy as np

URL_DELIMITERS = ":/.-_?=&#@%~+"

CLS_TOKEN = "[CLS]"
SEP_TOKEN = "[SEP]"
PAD_TOKEN = "[PAD]"
UNK_TOKEN = "[UNK]"
CONTINUATION = "##"
SPECIAL_TOKENS = (PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN)

N_BYTE_SYMBOLS = 256


class TokenizerError(ValueError):
    pass


class CharVocab:
    """Byte-level character alphabet plus one symbol per special token.

    Ids 0..255 are raw byte values.  [PAD_CHAR] pads flattened character
    arrays in batches; each special token owns a single dedicated id so its
    character length is exactly 1.
    """

    PAD_CHAR_ID = 256
    CLS_CHAR_ID = 257
    SEP_CHAR_ID = 258
    PAD_TOKEN_CHAR_ID = 259

    size = 260

    @staticmethod
    def ids_for_text(symbol_text: str) -> list[int]:
        """Character ids of a token text (one id per raw byte)."""
        return [ord(c) for c in symbol_text]


@dataclass(frozen=True)
class BpeVocab:
    """Trained merge list and the dense token-id table.

    Ids: specials 0..3 ([PAD], [UNK], [CLS], [SEP]), byte symbols 4..259,
    merged symbols 260 onward in merge order.
    """

    merges: tuple[tuple[str, str], ...]
    token_to_id: dict[str, int]

    def __post_init__(self):
        ids = sorted(self.token_to_id.values())
        if ids != list(range(len(ids))):
            raise TokenizerError("token ids must be dense 0..V-1")
        for a, b in self.merges:
            if a + b not in self.token_to_id:
                raise TokenizerError(f"merge result {a + b!r} missing from tokens")

    @property
    def size(self) -> int:
        return len(self.token_to_id)

    @property
    def pad_id(self) -> int:
        return self.token_to_id[PAD_TOKEN]

    @property
    def unk_id(self) -> int:
        return self.token_to_id[UNK_TOKEN]

    @property
    def cls_id(self) -> int:
        return self.token_to_id[CLS_TOKEN]

    @property
    def sep_id(self) -> int:
        return self.token_to_id[SEP_TOKEN]

    def symbol_set(self) -> set[str]:
        return {t for t in self.token_to_id if t not in SPECIAL_TOKENS}


@dataclass(frozen=True)
class TokenSequence:
    """Dual representation of one URL: subword ids and per-token characters.

    ``subword_ids`` and ``attention_mask`` are padded to the fixed width;
    ``char_ids`` holds one list of character ids per real token only.
    """

    token_texts: tuple[str, ...]
    subword_ids: np.ndarray
    attention_mask: np.ndarray
    char_ids: tuple[tuple[int, ...], ...]

    @property
    def num_tokens(self) -> int:
        return len(self.token_texts)

    @property
    def token_char_lengths(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.char_ids)

    @property
    def total_chars(self) -> int:
        return sum(len(c) for c in self.char_ids)

    def validate(self) -> None:
        m = self.num_tokens
        if self.attention_mask.sum() != m:
            raise TokenizerError("attention mask does not match token count")
        if not (self.attention_mask[:m] == 1).all():
            raise TokenizerError("attention mask ones must form a prefix")
        if self.token_texts[0] != CLS_TOKEN or self.token_texts[-1] != SEP_TOKEN:
            raise TokenizerError("sequence must start [CLS] and end [SEP]")
        if len(self.char_ids) != m:
            raise TokenizerError("char_ids must cover every real token")


def presplit(url: str) -> list[tuple[str, bool]]:
    """Split a URL into (unit, is_delimiter) pieces, preserving all bytes."""
    symbol = url.encode("utf-8").decode("latin-1")
    units: list[tuple[str, bool]] = []
    run: list[str] = []
    for ch in symbol:
        if ch in URL_DELIMITERS:
            if run:
                units.append(("".join(run), False))
                run = []
            units.append((ch, True))
        else:
            run.append(ch)
    if run:
        units.append(("".join(run), False))
    return units


def train_bpe(corpus: list[str], vocab_size: int, seed: int = 0) -> BpeVocab:
    """Learn greedy most-frequent-pair merges from a URL corpus.

    The result is fully determined by the corpus: ties between equally
    frequent pairs break toward the lexicographically smallest pair, so the
    ``seed`` argument exists only for interface uniformity.
    """
    del seed
    if not corpus:
        raise TokenizerError("empty training corpus")
    base = N_BYTE_SYMBOLS + len(SPECIAL_TOKENS)
    if vocab_size <= base:
        raise TokenizerError(
            f"vocab_size {vocab_size} must exceed base alphabet + specials ({base})"
        )
    budget = vocab_size - base

    word_counts: Counter[tuple[str, ...]] = Counter()
    for url in corpus:
        for unit, is_delim in presplit(url):
            if not is_delim:
                word_counts[tuple(unit)] += 1

    merges: list[tuple[str, str]] = []
    words = dict(word_counts)
    while len(merges) < budget:
        pair_counts: Counter[tuple[str, str]] = Counter()
        for word, count in words.items():
            for a, b in zip(word, word[1:]):
                pair_counts[(a, b)] += count
        if not pair_counts:
            break
        best = min(pair_counts, key=lambda p: (-pair_counts[p], p))
        merges.append(best)
        merged_symbol = best[0] + best[1]
        new_words: dict[tuple[str, ...], int] = {}
        for word, count in words.items():
            out: list[str] = []
            i = 0
            while i < len(word):
                if i + 1 < len(word) and (word[i], word[i + 1]) == best:
                    out.append(merged_symbol)
                    i += 2
                else:
                    out.append(word[i])
                    i += 1
            key = tuple(out)
            new_words[key] = new_words.get(key, 0) + count
        words = new_words

    token_to_id: dict[str, int] = {}
    for tok in SPECIAL_TOKENS:
        token_to_id[tok] = len(token_to_id)
    for b in range(N_BYTE_SYMBOLS):
        token_to_id[chr(b)] = len(token_to_id)
    for a, b in merges:
        sym = a + b
        if sym not in token_to_id:
            token_to_id[sym] = len(token_to_id)
    return BpeVocab(merges=tuple(merges), token_to_id=token_to_id)


def _segment(word: str, symbols: set[str], max_sym_len: int) -> list[str]:
    pieces: list[str] = []
    pos = 0
    while pos < len(word):
        end = min(len(word), pos + max_sym_len)
        piece = None
        for stop in range(end, pos, -1):
            cand = word[pos:stop]
            if cand in symbols:
                piece = cand
                break
        if piece is None:
            piece = word[pos]  # single bytes are always in the vocabulary
        pieces.append(piece)
        pos += len(piece)
    return pieces


def tokenize(url: str, vocab: BpeVocab, max_len: int = 200) -> TokenSequence:
    """Tokenize one URL into the padded dual representation.

    Truncates to ``max_len - 1`` tokens and appends [SEP]; pads with [PAD]
    up to ``max_len``.  Pure: identical inputs give identical output.
    """
    if max_len < 3:
        raise TokenizerError("max_len must be at least 3")
    symbols = vocab.symbol_set()
    max_sym_len = max((len(s) for s in symbols), default=1)

    texts: list[str] = [CLS_TOKEN]
    ids: list[int] = [vocab.cls_id]
    chars: list[list[int]] = [[CharVocab.CLS_CHAR_ID]]
    for unit, is_delim in presplit(url):
        if is_delim:
            pieces = [unit]
        else:
            pieces = _segment(unit, symbols, max_sym_len)
        for k, piece in enumerate(pieces):
            marked = piece if (is_delim or k == 0) else CONTINUATION + piece
            texts.append(marked)
            ids.append(vocab.token_to_id.get(piece, vocab.unk_id))
            chars.append(CharVocab.ids_for_text(piece))

    if len(texts) >= max_len:
        texts = texts[: max_len - 1]
        ids = ids[: max_len - 1]
        chars = chars[: max_len - 1]
    texts.append(SEP_TOKEN)
    ids.append(vocab.sep_id)
    chars.append([CharVocab.SEP_CHAR_ID])

    m = len(texts)
    subword_ids = np.full(max_len, vocab.pad_id, dtype=np.int64)
    subword_ids[:m] = ids
    mask = np.zeros(max_len, dtype=np.int64)
    mask[:m] = 1
    return TokenSequence(
        token_texts=tuple(texts),
        subword_ids=subword_ids,
        attention_mask=mask,
        char_ids=tuple(tuple(c) for c in chars),
    )


def flatten_chars(seq: TokenSequence) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Concatenate per-token character ids; return flat array and the
    (first, last) flat index of every real token."""
    if seq.num_tokens == 0:
        raise TokenizerError("cannot flatten an empty token sequence")
    flat: list[int] = []
    boundaries: list[tuple[int, int]] = []
    for token_chars in seq.char_ids:
        start = len(flat)
        flat.extend(token_chars)
        boundaries.append((start, len(flat) - 1))
    return np.asarray(flat, dtype=np.int64), boundaries


def joined_text(seq: TokenSequence) -> str:
    """Reassemble the URL bytes from token texts (specials dropped)."""
    out: list[str] = []
    for text in seq.token_texts:
        if text in SPECIAL_TOKENS:
            continue
        out.append(text[len(CONTINUATION):] if text.startswith(CONTINUATION) else text)
    return "".join(out)


def vocab_to_json_dict(vocab: BpeVocab) -> dict:
    return {
        "specials": {
            "cls": CLS_TOKEN,
            "sep": SEP_TOKEN,
            "pad": PAD_TOKEN,
            "unk": UNK_TOKEN,
            "continuation": CONTINUATION,
        },
        "merges": [[a, b] for a, b in vocab.merges],
        "tokens": vocab.token_to_id,
    }


def vocab_from_json_dict(payload: dict) -> BpeVocab:
    try:
        merges = tuple((a, b) for a, b in payload["merges"])
        tokens = {str(t): int(i) for t, i in payload["tokens"].items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise TokenizerError(f"bad vocabulary payload: {exc}") from None
    return BpeVocab(merges=merges, token_to_id=tokens)


def canonical_vocab_bytes(vocab: BpeVocab) -> bytes:
    return json.dumps(
        vocab_to_json_dict(vocab), sort_keys=True, separators=(",", ":")
    ).encode("utf-8")


def vocab_sha256(vocab: BpeVocab) -> str:
    return hashlib.sha256(canonical_vocab_bytes(vocab)).hexdigest()


def save_vocab(vocab: BpeVocab, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(vocab_to_json_dict(vocab), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_vocab(path: str) -> BpeVocab:
    with open(path, "r", encoding="utf-8") as fh:
        return vocab_from_json_dict(json.load(fh))
