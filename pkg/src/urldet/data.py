"""Labeled URL dataset loading, statistics, and reproducible splits."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from .seeding import numpy_rng

TLD_BUCKETS = ("com", "cctld", "other")


class DatasetError(ValueError):
    """Raised for unreadable, malformed, or inconsistent dataset inputs."""


@dataclass(frozen=True)
class UrlRecord:
    url: str
    label: int
    class_name: str | None = None


@dataclass(frozen=True)
class LabeledUrlSet:
    """An immutable ordered collection of labeled URLs.

    Labels are dense ids ``0..num_classes-1``; ``class_names[label]`` gives
    the original label text.
    """

    records: tuple[UrlRecord, ...]
    num_classes: int
    class_names: tuple[str, ...]

    def __post_init__(self):
        if self.num_classes < 2:
            raise DatasetError("a labeled set needs at least 2 classes")
        if len(self.class_names) != self.num_classes:
            raise DatasetError("class_names must have num_classes entries")
        for rec in self.records:
            if not rec.url.strip():
                raise DatasetError("record with empty URL")
            if not 0 <= rec.label < self.num_classes:
                raise DatasetError(f"label {rec.label} out of range")

    def __len__(self) -> int:
        return len(self.records)

    def class_counts(self) -> list[int]:
        counts = [0] * self.num_classes
        for rec in self.records:
            counts[rec.label] += 1
        return counts

    def class_indices(self) -> list[list[int]]:
        per_class: list[list[int]] = [[] for _ in range(self.num_classes)]
        for i, rec in enumerate(self.records):
            per_class[rec.label].append(i)
        return per_class

    def subset(self, indices) -> "LabeledUrlSet":
        return LabeledUrlSet(
            records=tuple(self.records[i] for i in indices),
            num_classes=self.num_classes,
            class_names=self.class_names,
        )


@dataclass
class DatasetStats:
    class_counts: dict[str, int] = field(default_factory=dict)
    avg_length: dict[str, float] = field(default_factory=dict)
    tld: dict[str, dict[str, float]] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "classes": self.class_counts,
            "avg_length": self.avg_length,
            "tld": self.tld,
        }


def _detect_delimiter(header_line: str) -> str:
    return "\t" if "\t" in header_line else ","


def load_dataset(
    path: str,
    url_col: str = "url",
    label_col: str = "label",
    class_names: list[str] | None = None,
) -> LabeledUrlSet:
    """Load a delimited text file of (url, label-text) rows.

    The delimiter (comma or tab) is autodetected from the header line and
    quoted fields are honored.  Label texts become dense ids in first-seen
    order, unless a fixed ``class_names`` list is supplied, in which case an
    unknown label text is an error.
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise DatasetError(f"dataset file not found: {path}") from None
    if not text.strip():
        raise DatasetError(f"no records in {path}")

    first_line = text.splitlines()[0]
    delim = _detect_delimiter(first_line)
    reader = csv.reader(io.StringIO(text), delimiter=delim)
    header = next(reader)
    header = [h.strip().lstrip("﻿") for h in header]
    try:
        url_idx = header.index(url_col)
        label_idx = header.index(label_col)
    except ValueError:
        raise DatasetError(
            f"header {header!r} lacks required columns {url_col!r}/{label_col!r}"
        ) from None

    fixed = class_names is not None
    names: list[str] = list(class_names) if fixed else []
    name_to_id = {n: i for i, n in enumerate(names)}
    records: list[UrlRecord] = []
    for row_no, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) <= max(url_idx, label_idx):
            raise DatasetError(f"malformed row {row_no}: {row!r}")
        url = row[url_idx]
        label_text = row[label_idx].strip()
        if not url.strip():
            raise DatasetError(f"malformed row {row_no}: empty URL")
        if label_text not in name_to_id:
            if fixed:
                raise DatasetError(
                    f"row {row_no}: unknown label {label_text!r} "
                    f"(expected one of {names})"
                )
            name_to_id[label_text] = len(names)
            names.append(label_text)
        records.append(
            UrlRecord(url=url, label=name_to_id[label_text], class_name=label_text)
        )

    if not records:
        raise DatasetError(f"no records in {path}")
    if len(names) < 2:
        raise DatasetError(f"only one label value present in {path}")
    return LabeledUrlSet(
        records=tuple(records), num_classes=len(names), class_names=tuple(names)
    )


def save_dataset(dset: LabeledUrlSet, path: str, url_col: str = "url",
                 label_col: str = "label") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([url_col, label_col])
        for rec in dset.records:
            writer.writerow([rec.url, dset.class_names[rec.label]])


def host_of(url: str) -> str:
    """Best-effort host section of a URL; empty string when unparseable."""
    rest = url
    if "://" in rest:
        rest = rest.split("://", 1)[1]
    for stop in "/?#":
        idx = rest.find(stop)
        if idx >= 0:
            rest = rest[:idx]
    if "@" in rest:
        rest = rest.rsplit("@", 1)[1]
    rest = rest.split(":", 1)[0]
    return rest


def tld_bucket(url: str) -> str:
    """Classify by the last dot-separated host label.

    Exactly "com" -> com; a two-letter alphabetic label -> cctld; anything
    else (including hostless inputs) -> other.
    """
    host = host_of(url)
    labels = [p for p in host.split(".") if p]
    if not labels:
        return "other"
    last = labels[-1].lower()
    if last == "com":
        return "com"
    if len(last) == 2 and last.isalpha():
        return "cctld"
    return "other"


def dataset_stats(dset: LabeledUrlSet) -> DatasetStats:
    """Per-class sample counts, mean URL character lengths, TLD fractions."""
    if len(dset) == 0:
        raise DatasetError("cannot compute stats of an empty set")
    stats = DatasetStats()
    for cid, name in enumerate(dset.class_names):
        urls = [rec.url for rec in dset.records if rec.label == cid]
        stats.class_counts[name] = len(urls)
        stats.avg_length[name] = (
            sum(len(u) for u in urls) / len(urls) if urls else 0.0
        )
        buckets = {b: 0 for b in TLD_BUCKETS}
        for u in urls:
            buckets[tld_bucket(u)] += 1
        total = max(1, len(urls))
        stats.tld[name] = {b: buckets[b] / total for b in TLD_BUCKETS}
    return stats


def _largest_remainder_alloc(n: int, ratios: list[float]) -> list[int]:
    """Split n items into len(ratios) buckets, each within 1 of n*ratio."""
    exact = [n * r for r in ratios]
    counts = [int(e) for e in exact]
    leftover = n - sum(counts)
    order = sorted(
        range(len(ratios)), key=lambda i: (-(exact[i] - counts[i]), i)
    )
    for i in order[:leftover]:
        counts[i] += 1
    return counts


def stratified_split(
    dset: LabeledUrlSet, ratios: tuple[float, float, float], seed: int
) -> tuple[LabeledUrlSet, LabeledUrlSet, LabeledUrlSet]:
    """Deterministic per-class split into (train, val, test).

    Per-class counts in each part stay within one record of the exact
    proportional allocation.  Indices within each part keep their original
    file order.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DatasetError("ratios must sum to 1")
    if any(r < 0 for r in ratios):
        raise DatasetError("ratios must be non-negative")
    n_positive = sum(1 for r in ratios if r > 0)
    counts = dset.class_counts()
    if n_positive == 3 and min(counts) < 3:
        raise DatasetError(
            f"class {dset.class_names[counts.index(min(counts))]!r} has "
            f"{min(counts)} records; too small to appear in all splits"
        )

    rng = numpy_rng(seed, "stratified-split")
    parts: list[list[int]] = [[], [], []]
    for cid, indices in enumerate(dset.class_indices()):
        shuffled = [indices[i] for i in rng.permutation(len(indices))]
        alloc = _largest_remainder_alloc(len(indices), list(ratios))
        for part_id, take in enumerate(alloc):
            if take == 0 and ratios[part_id] > 0:
                raise DatasetError(
                    f"class {dset.class_names[cid]!r} too small to appear "
                    "in all splits"
                )
            parts[part_id].extend(shuffled[:take])
            shuffled = shuffled[take:]
    return tuple(dset.subset(sorted(p)) for p in parts)  # type: ignore[return-value]


def subsample(dset: LabeledUrlSet, fraction: float, seed: int) -> LabeledUrlSet:
    """Class-ratio-preserving random subset of ``fraction`` of the records."""
    if not 0 < fraction <= 1.0:
        raise DatasetError("fraction must be in (0, 1]")
    counts = dset.class_counts()
    for cid, n in enumerate(counts):
        if fraction * n < 1.0:
            raise DatasetError(
                f"fraction {fraction} empties class {dset.class_names[cid]!r}"
            )
    rng = numpy_rng(seed, "subsample")
    keep: list[int] = []
    for indices in dset.class_indices():
        take = int(fraction * len(indices) + 0.5)
        shuffled = rng.permutation(len(indices))
        keep.extend(indices[i] for i in shuffled[:take])
    return dset.subset(sorted(keep))
