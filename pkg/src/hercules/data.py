"""ICEWS-style quadruple ingestion, vocabularies, augmentation, filtering.

Input files are UTF-8 TSVs with exactly four columns (subject, relation,
object, timestamp). Timestamps are opaque discrete labels; no calendar
arithmetic is done. Relations are doubled by inverse augmentation so
subject prediction reduces to object prediction over inverse queries.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DataError(Exception):
    """Raised for malformed input files or inconsistent indices."""


RawQuadruple = tuple[str, str, str, str]


def parse_split(path) -> list[RawQuadruple]:
    """Read one TSV split, order-preserving; errors carry line numbers."""
    path = Path(path)
    rows: list[RawQuadruple] = []
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line == "":
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise DataError(
                f"{path}:{lineno}: expected 4 tab-separated fields, got {len(fields)}"
            )
        rows.append(tuple(fields))
    if not rows:
        raise DataError(f"{path}: empty split")
    return rows


@dataclass(frozen=True)
class Vocabulary:
    """Bijective string<->index maps for entities, relations, timestamps.

    Index order is first occurrence scanning train, then valid, then test,
    which keeps checkpoints reproducible for fixed input files. Relation
    indices cover the base relations only; the inverse copy of relation p
    is addressed as p + n_relations.
    """

    entities: tuple[str, ...]
    relations: tuple[str, ...]
    timestamps: tuple[str, ...]

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    @property
    def n_timestamps(self) -> int:
        return len(self.timestamps)

    def __post_init__(self):
        object.__setattr__(self, "_ent_idx", {s: i for i, s in enumerate(self.entities)})
        object.__setattr__(self, "_rel_idx", {s: i for i, s in enumerate(self.relations)})
        object.__setattr__(self, "_time_idx", {s: i for i, s in enumerate(self.timestamps)})

    def entity_index(self, name: str) -> int:
        return self._ent_idx[name]

    def relation_index(self, name: str) -> int:
        return self._rel_idx[name]

    def timestamp_index(self, name: str) -> int:
        return self._time_idx[name]

    def relation_label(self, p: int) -> str:
        """Human-readable label, inverse relations suffixed."""
        if p < self.n_relations:
            return self.relations[p]
        return self.relations[p - self.n_relations] + "^-1"

    def hash(self) -> str:
        """Stable digest used to tie checkpoints to their vocabulary."""
        h = hashlib.sha256()
        for section in (self.entities, self.relations, self.timestamps):
            for name in section:
                h.update(name.encode("utf-8"))
                h.update(b"\x00")
            h.update(b"\x01")
        return h.hexdigest()

    def dump_tsv(self, path):
        """Write index<->string tables (one section per symbol kind)."""
        with open(path, "w", encoding="utf-8") as fh:
            for kind, section in (("entity", self.entities),
                                  ("relation", self.relations),
                                  ("timestamp", self.timestamps)):
                for i, name in enumerate(section):
                    fh.write(f"{kind}\t{i}\t{name}\n")


def build_vocab(train, valid, test) -> Vocabulary:
    entities: dict[str, None] = {}
    relations: dict[str, None] = {}
    timestamps: dict[str, None] = {}
    for split in (train, valid, test):
        for s, p, o, t in split:
            entities.setdefault(s)
            entities.setdefault(o)
            relations.setdefault(p)
            timestamps.setdefault(t)
    return Vocabulary(tuple(entities), tuple(relations), tuple(timestamps))


def index_quadruples(raw, vocab: Vocabulary) -> np.ndarray:
    """Map string rows to an (N, 4) int64 array of (s, p, o, t) indices."""
    out = np.empty((len(raw), 4), dtype=np.int64)
    for i, (s, p, o, t) in enumerate(raw):
        try:
            out[i] = (vocab.entity_index(s), vocab.relation_index(p),
                      vocab.entity_index(o), vocab.timestamp_index(t))
        except KeyError as exc:
            raise DataError(f"symbol {exc} missing from vocabulary") from None
    return out


def augment_inverse(quadruples: np.ndarray, n_relations: int) -> np.ndarray:
    """Append the reversed copy <o, p + |R|, s, t> of every fact.

    The endpoints are swapped so that subject-side queries on the original
    relation become object-side queries on the inverse relation.
    """
    quadruples = np.asarray(quadruples, dtype=np.int64)
    if quadruples.size and quadruples[:, 1].max() >= n_relations:
        raise DataError("input already contains inverse relations; refusing to augment twice")
    inverse = quadruples[:, [2, 1, 0, 3]].copy()
    inverse[:, 1] += n_relations
    return np.concatenate([quadruples, inverse], axis=0)


class FilterIndex:
    """(s, p, t) -> all objects completing a known-true fact.

    Built from the augmented union of train/valid/test, so both query
    directions are covered by the single object-side lookup.
    """

    def __init__(self, augmented_quadruples: np.ndarray):
        table: dict[tuple[int, int, int], set[int]] = {}
        for s, p, o, t in np.asarray(augmented_quadruples, dtype=np.int64):
            table.setdefault((int(s), int(p), int(t)), set()).add(int(o))
        self._table = {key: np.array(sorted(objs), dtype=np.int64)
                       for key, objs in table.items()}

    def lookup(self, s: int, p: int, t: int) -> np.ndarray:
        """Sorted known-true objects for the key; empty for unseen keys."""
        return self._table.get((s, p, t), np.empty(0, dtype=np.int64))

    def __len__(self):
        return len(self._table)


def build_filter_index(*augmented_splits) -> FilterIndex:
    return FilterIndex(np.concatenate([np.asarray(s) for s in augmented_splits], axis=0))


@dataclass(frozen=True)
class Dataset:
    """Fully ingested dataset: vocabulary, indexed splits, filter index."""

    vocab: Vocabulary
    train: np.ndarray        # unaugmented (N, 4)
    valid: np.ndarray
    test: np.ndarray
    train_aug: np.ndarray    # 2N training rows
    valid_aug: np.ndarray
    test_aug: np.ndarray
    filter_index: FilterIndex


def _find_split(directory: Path, stem: str) -> Path:
    for candidate in (directory / stem, directory / f"{stem}.txt", directory / f"{stem}.tsv"):
        if candidate.exists():
            return candidate
    raise DataError(f"no {stem} split found in {directory}")


def load_dataset(directory) -> Dataset:
    """Ingest train/valid/test from a directory and build all indices."""
    directory = Path(directory)
    raw = {stem: parse_split(_find_split(directory, stem))
           for stem in ("train", "valid", "test")}
    vocab = build_vocab(raw["train"], raw["valid"], raw["test"])
    indexed = {stem: index_quadruples(rows, vocab) for stem, rows in raw.items()}
    augmented = {stem: augment_inverse(arr, vocab.n_relations)
                 for stem, arr in indexed.items()}
    return Dataset(
        vocab=vocab,
        train=indexed["train"], valid=indexed["valid"], test=indexed["test"],
        train_aug=augmented["train"], valid_aug=augmented["valid"],
        test_aug=augmented["test"],
        filter_index=build_filter_index(*augmented.values()),
    )
