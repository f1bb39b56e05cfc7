"""Compound-attack adversarial URLs and the adversarial evaluation set.

A benign URL is decomposed losslessly into scheme prefix, host labels, and
suffix. Each label is sub-split at existing hyphens and at digit/letter
transitions. The attack inserts hyphens at sub-split boundaries at random
and swaps the registrable domain (the last two labels) for a drawn entry
from a malicious domain list, leaving everything outside the host untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import LabeledUrlSet, UrlRecord
from .seeding import numpy_rng

BENIGN_CLASS = "benign"
MALICIOUS_CLASS = "malicious"


class AttackError(ValueError):
    pass


@dataclass(frozen=True)
class AttackConfig:
    malicious_domains: tuple[str, ...]
    hyphen_probability: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.malicious_domains:
            raise ValueError("malicious domain list must be non-empty")
        if not 0.0 <= self.hyphen_probability <= 1.0:
            raise ValueError("hyphen probability must be in [0, 1]")


@dataclass(frozen=True)
class AdvTestSpec:
    benign_count: int
    malicious_count: int
    adversarial_count: int
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.benign_count, self.malicious_count,
               self.adversarial_count) < 1:
            raise ValueError("all counts must be at least 1")


@dataclass(frozen=True)
class SplitLabel:
    """One dot-delimited host label as segments and remembered separators.

    ``separators[i]`` sits between ``segments[i]`` and ``segments[i + 1]``
    and is either an original hyphen or the empty string marking a
    digit/letter transition.
    """

    segments: tuple[str, ...]
    separators: tuple[str, ...]

    def rejoin(self) -> str:
        parts = [self.segments[0]]
        for sep, seg in zip(self.separators, self.segments[1:]):
            parts.append(sep)
            parts.append(seg)
        return "".join(parts)


@dataclass(frozen=True)
class SplitUrl:
    """Lossless decomposition: prefix + host labels + suffix."""

    prefix: str
    labels: tuple[SplitLabel, ...]
    suffix: str

    @property
    def host(self) -> str:
        return ".".join(label.rejoin() for label in self.labels)

    def rejoin(self) -> str:
        return self.prefix + self.host + self.suffix


def _char_class(c: str) -> str:
    if c.isdigit():
        return "digit"
    if c.isalpha():
        return "letter"
    return "other"


def split_label(label: str) -> SplitLabel:
    """Cut a host label at hyphens and digit/letter transitions."""
    segments: list[str] = []
    separators: list[str] = []
    current: list[str] = []
    prev_class: str | None = None
    for c in label:
        if c == "-":
            segments.append("".join(current))
            separators.append("-")
            current = []
            prev_class = None
            continue
        cls = _char_class(c)
        if (prev_class is not None and {prev_class, cls} == {"digit", "letter"}):
            segments.append("".join(current))
            separators.append("")
            current = []
        current.append(c)
        prev_class = cls
    segments.append("".join(current))
    return SplitLabel(tuple(segments), tuple(separators))


def split_host(url: str) -> SplitUrl:
    """Lossless split into prefix, dot-separated host labels, and suffix.

    A host exists only when the text contains ``://``; anything else comes
    back with an empty label list and the full text as the suffix. Userinfo
    stays in the prefix and the port stays in the suffix, so only the host
    proper is exposed for editing.
    """
    if not url:
        raise AttackError("empty URL")
    marker = url.find("://")
    if marker < 0:
        return SplitUrl(prefix="", labels=(), suffix=url)
    authority_start = marker + 3
    end = len(url)
    for i in range(authority_start, len(url)):
        if url[i] in "/?#":
            end = i
            break
    authority = url[authority_start:end]
    at = authority.rfind("@")
    host_part = authority[at + 1:]
    colon = host_part.find(":")
    if colon >= 0:
        host = host_part[:colon]
        port = host_part[colon:]
    else:
        host = host_part
        port = ""
    if not host:
        return SplitUrl(prefix="", labels=(), suffix=url)
    prefix = url[:authority_start + at + 1]
    suffix = port + url[end:]
    labels = tuple(split_label(piece) for piece in host.split("."))
    return SplitUrl(prefix=prefix, labels=labels, suffix=suffix)


def _hyphenate(label: SplitLabel, probability: float,
               rng: np.random.Generator) -> str:
    """Insert hyphens at transition boundaries; existing hyphens stay single."""
    parts = [label.segments[0]]
    for sep, seg in zip(label.separators, label.segments[1:]):
        if sep == "" and rng.random() < probability:
            parts.append("-")
        else:
            parts.append(sep)
        parts.append(seg)
    return "".join(parts)


def compound_attack(url: str, cfg: AttackConfig,
                    rng: np.random.Generator | None = None) -> UrlRecord:
    """Hyphenate the retained labels and swap in a malicious domain.

    The registrable domain (last two labels, or the whole host when it has
    fewer) is replaced by a uniform draw from the configured list. Only the
    host section of the URL changes. Raises AttackError when the input has
    no host.
    """
    split = split_host(url)
    if not split.labels:
        raise AttackError(f"no host to attack in {url!r}")
    if rng is None:
        rng = numpy_rng(cfg.seed, "attack")
    domain = cfg.malicious_domains[int(rng.integers(0, len(cfg.malicious_domains)))]
    kept = split.labels[:-2]
    pieces = [_hyphenate(label, cfg.hyphen_probability, rng) for label in kept]
    pieces.append(domain)
    new_url = split.prefix + ".".join(pieces) + split.suffix
    return UrlRecord(url=new_url, label=1, class_name=MALICIOUS_CLASS)


def load_domain_list(path: str) -> tuple[str, ...]:
    with open(path, "r", encoding="utf-8") as fh:
        domains = tuple(line.strip() for line in fh if line.strip())
    if not domains:
        raise AttackError(f"no domains in {path}")
    return domains


def build_advtest(benign_pool: Sequence[str], malicious_pool: Sequence[str],
                  spec: AdvTestSpec, cfg: AttackConfig
                  ) -> tuple[LabeledUrlSet, int]:
    """Assemble benign + original-malicious + adversarial records, shuffled.

    Benign URLs are sampled without replacement; adversarial inputs come
    from the benign pool outside the retained benign subset, so no source
    URL appears both clean and attacked. Returns the set and the number of
    host-less candidates skipped.
    """
    rng = numpy_rng(spec.seed, "advtest")
    if len(benign_pool) < spec.benign_count:
        raise AttackError(
            f"benign pool {len(benign_pool)} < requested {spec.benign_count}")
    if len(malicious_pool) < spec.malicious_count:
        raise AttackError(
            f"malicious pool {len(malicious_pool)} < requested "
            f"{spec.malicious_count}")

    benign_perm = rng.permutation(len(benign_pool))
    retained = [benign_pool[i] for i in benign_perm[:spec.benign_count]]
    candidates = benign_perm[spec.benign_count:]

    attack_rng = numpy_rng(cfg.seed, "attack")
    adversarial: list[str] = []
    skipped = 0
    for i in candidates:
        if len(adversarial) == spec.adversarial_count:
            break
        try:
            adversarial.append(compound_attack(benign_pool[i], cfg,
                                               attack_rng).url)
        except AttackError:
            skipped += 1
    if len(adversarial) < spec.adversarial_count:
        raise AttackError(
            f"benign pool exhausted: produced {len(adversarial)} of "
            f"{spec.adversarial_count} adversarial URLs "
            f"({skipped} host-less skips)")

    malicious_perm = rng.permutation(len(malicious_pool))
    originals = [malicious_pool[i] for i in malicious_perm[:spec.malicious_count]]

    records = ([UrlRecord(u, 0, BENIGN_CLASS) for u in retained]
               + [UrlRecord(u, 1, MALICIOUS_CLASS) for u in originals]
               + [UrlRecord(u, 1, MALICIOUS_CLASS) for u in adversarial])
    order = rng.permutation(len(records))
    shuffled = tuple(records[i] for i in order)
    return LabeledUrlSet(shuffled, 2, (BENIGN_CLASS, MALICIOUS_CLASS)), skipped
