"""Dataset splitting and JSON-lines manifests.

Sources are directories laid out as <root>/<category>/*.{png,jpg,jpeg}.
Splits are stratified per source and per category, and test entries are
kept separate per source so an ideal and a non-ideal collection report
their accuracies independently after mixed training.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from pathlib import Path

CATEGORIES = ("cardboard", "glass", "metal", "paper", "plastic")
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

DEFAULT_SPLIT = (72, 18, 10)


class DatasetError(ValueError):
    """A source tree or manifest is unusable."""


@dataclass(frozen=True)
class ManifestEntry:
    file: str
    label: str
    source: str

    def __post_init__(self):
        if self.label not in CATEGORIES:
            raise DatasetError(f"{self.file}: unknown category {self.label!r}")


@dataclass
class SplitManifests:
    """The three manifest sets produced by a split."""

    train: list
    val: list
    test_by_source: dict

    @property
    def test(self) -> list:
        return [entry for entries in self.test_by_source.values() for entry in entries]

    def all_entries(self) -> list:
        return self.train + self.val + self.test

    def write(self, out_dir) -> dict:
        """Write train/val/per-source-test manifests; returns name -> path."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = {}
        groups = {"train": self.train, "val": self.val}
        for source, entries in sorted(self.test_by_source.items()):
            groups[f"test_{source}"] = entries
        for name, entries in groups.items():
            path = out_dir / f"{name}.jsonl"
            write_manifest(entries, path)
            written[name] = path
        return written


def write_manifest(entries, path) -> Path:
    path = Path(path)
    lines = [
        json.dumps(
            {"file": e.file, "label": e.label, "source": e.source}, sort_keys=True
        )
        for e in entries
    ]
    path.write_text("\n".join(lines) + ("\n" if lines else ""))
    return path


def read_manifest(path) -> list:
    path = Path(path)
    entries = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
        for key in ("file", "label", "source"):
            if key not in row:
                raise DatasetError(f"{path}:{lineno}: missing {key!r}")
        entries.append(ManifestEntry(row["file"], row["label"], row["source"]))
    return entries


def scan_source(name: str, root) -> list:
    """Collect labelled entries from one directory tree."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"{root}: not a directory")
    entries = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        if sub.name not in CATEGORIES:
            raise DatasetError(f"{sub}: unknown category {sub.name!r}")
        for file in sorted(sub.iterdir()):
            if file.is_file() and file.suffix.lower() in IMAGE_SUFFIXES:
                entries.append(ManifestEntry(str(file), sub.name, name))
    if not entries:
        raise DatasetError(f"{root}: source contains no images")
    return entries


def _check_no_overlap(entries_by_source: dict) -> None:
    """Reject identical image content appearing in more than one source."""
    seen: dict = {}
    for source, entries in entries_by_source.items():
        for entry in entries:
            digest = hashlib.sha256(Path(entry.file).read_bytes()).digest()
            previous = seen.get(digest)
            if previous is not None and previous[0] != source:
                raise DatasetError(
                    f"content overlap between sources: {previous[1]} "
                    f"({previous[0]}) and {entry.file} ({source})"
                )
            seen[digest] = (source, entry.file)


def split_entries(entries_by_source: dict, split=DEFAULT_SPLIT, seed: int = 0):
    """Stratified split of pre-scanned entries (the pure core of
    split_dataset).

    For each (source, category) bucket: the test fraction is drawn first,
    then the validation share of the remainder, matching a
    held-out-test-then-validate protocol. Shuffling is seeded, so the split
    is a pure function of (entries, split, seed).
    """
    train_part, val_part, test_part = split
    total = train_part + val_part + test_part
    if total <= 0 or min(split) < 0:
        raise DatasetError(f"bad split {split}")
    test_frac = test_part / total
    val_frac_of_rest = val_part / (train_part + val_part)

    rng = random.Random(seed)
    result = SplitManifests(train=[], val=[], test_by_source={})
    for source in sorted(entries_by_source):
        entries = entries_by_source[source]
        if not entries:
            raise DatasetError(f"source {source!r} is empty")
        result.test_by_source[source] = []
        buckets: dict = {}
        for entry in entries:
            buckets.setdefault(entry.label, []).append(entry)
        for label in sorted(buckets):
            bucket = sorted(buckets[label], key=lambda e: e.file)
            rng.shuffle(bucket)
            n = len(bucket)
            n_test = round(n * test_frac)
            n_val = round((n - n_test) * val_frac_of_rest)
            result.test_by_source[source].extend(bucket[:n_test])
            result.val.extend(bucket[n_test : n_test + n_val])
            result.train.extend(bucket[n_test + n_val :])
    return result


def split_dataset(sources, split=DEFAULT_SPLIT, seed: int = 0) -> SplitManifests:
    """Scan one or more labelled directories and split them.

    sources: mapping of name -> directory, or a single path, or a list of
    paths (named by their basenames). Identical image content in two
    different sources is rejected.
    """
    if isinstance(sources, (str, Path)):
        sources = [sources]
    if not isinstance(sources, dict):
        named = {}
        for path in sources:
            name = Path(path).name or f"source{len(named)}"
            while name in named:
                name += "_"
            named[name] = path
        sources = named
    if not sources:
        raise DatasetError("no sources given")
    entries_by_source = {
        name: scan_source(name, root) for name, root in sources.items()
    }
    if len(entries_by_source) > 1:
        _check_no_overlap(entries_by_source)
    return split_entries(entries_by_source, split=split, seed=seed)
