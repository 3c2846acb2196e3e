"""Corpus model: community vocabulary, sparse per-user count vectors, loaders, splits.

A corpus row is one user's participation profile: a sparse vector of
non-negative integer counts over a fixed community vocabulary, plus an
optional binary class label (-1 marks unlabeled rows).
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DataError

# Counts above this are treated as corrupt input rather than real activity.
MAX_COUNT = 2**31 - 1


@dataclass(frozen=True)
class CommunityVocabulary:
    """Ordered, duplicate-free community name list; position = feature index."""

    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) == 0:
            raise DataError("vocabulary is empty")
        if any(not isinstance(n, str) or n == "" for n in self.names):
            raise DataError("vocabulary entries must be non-empty strings")
        if len(set(self.names)) != len(self.names):
            seen, dups = set(), []
            for n in self.names:
                if n in seen:
                    dups.append(n)
                seen.add(n)
            raise DataError(f"duplicate vocabulary entries: {sorted(set(dups))[:5]}")

    @property
    def size(self) -> int:
        return len(self.names)

    @property
    def index(self) -> dict[str, int]:
        # cached in __dict__; frozen dataclass allows direct dict writes
        cached = self.__dict__.get("_index")
        if cached is None:
            cached = {name: i for i, name in enumerate(self.names)}
            self.__dict__["_index"] = cached
        return cached


@dataclass(frozen=True)
class SparseActivityVector:
    """One user's counts, held as aligned (indices, counts) arrays.

    Canonical form: indices strictly increasing, every count >= 1.
    Use :meth:`from_pairs` to build from raw (index, count) pairs; it
    sorts, merges duplicate indices, and validates.
    """

    user_id: str
    indices: np.ndarray
    counts: np.ndarray

    @classmethod
    def from_pairs(cls, user_id: str, pairs) -> "SparseActivityVector":
        acc: dict[int, int] = {}
        for j, c in pairs:
            j = int(j)
            c = int(c)
            if j < 0:
                raise DataError(f"user {user_id!r}: negative community index {j}")
            if c < 1:
                raise DataError(f"user {user_id!r}: count {c} below 1")
            acc[j] = acc.get(j, 0) + c
            if acc[j] > MAX_COUNT:
                raise DataError(f"user {user_id!r}: count for index {j} exceeds {MAX_COUNT}")
        if not acc:
            raise DataError(f"user {user_id!r}: empty activity vector")
        idx = np.array(sorted(acc), dtype=np.int64)
        cnt = np.array([acc[j] for j in idx], dtype=np.int64)
        return cls(user_id=user_id, indices=idx, counts=cnt)

    def total(self) -> int:
        """Total activity: sum of all counts."""
        return int(self.counts.sum())

    def merge(self, other: "SparseActivityVector") -> "SparseActivityVector":
        """Entry-wise sum of two vectors for the same user."""
        if other.user_id != self.user_id:
            raise DataError(f"cannot merge vectors for {self.user_id!r} and {other.user_id!r}")
        pairs = list(zip(self.indices.tolist(), self.counts.tolist()))
        pairs += list(zip(other.indices.tolist(), other.counts.tolist()))
        return SparseActivityVector.from_pairs(self.user_id, pairs)

    def to_dense(self, d: int) -> np.ndarray:
        out = np.zeros(d, dtype=np.float64)
        out[self.indices] = self.counts
        return out


@dataclass
class LabeledCorpus:
    """Aligned rows and labels over a shared vocabulary.

    labels[i] is in {-1, 0, ..., k-1}; -1 means unlabeled. Rows are
    treated as immutable once the corpus is built.
    """

    vocabulary: CommunityVocabulary
    rows: list[SparseActivityVector]
    labels: np.ndarray
    k: int = 2

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.k < 2:
            raise DataError(f"k must be >= 2, got {self.k}")
        if len(self.rows) != len(self.labels):
            raise DataError(
                f"rows/labels misaligned: {len(self.rows)} rows, {len(self.labels)} labels"
            )
        if self.labels.size and (self.labels.min() < -1 or self.labels.max() >= self.k):
            raise DataError(f"labels must lie in -1..{self.k - 1}")
        d = self.vocabulary.size
        for r in self.rows:
            if len(r.indices) and r.indices[-1] >= d:
                raise DataError(
                    f"user {r.user_id!r}: community index {int(r.indices[-1])} "
                    f"outside vocabulary of size {d}"
                )

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def d(self) -> int:
        return self.vocabulary.size

    @property
    def labeled_mask(self) -> np.ndarray:
        return self.labels >= 0

    def class_counts(self) -> np.ndarray:
        """Number of labeled rows per class, shape (k,)."""
        out = np.zeros(self.k, dtype=np.int64)
        for y in range(self.k):
            out[y] = int((self.labels == y).sum())
        return out

    def to_csr(self) -> sp.csr_matrix:
        """Row-major sparse count matrix, float64, shape (n, d). Cached."""
        cached = self.__dict__.get("_csr")
        if cached is None:
            indptr = np.zeros(self.n + 1, dtype=np.int64)
            for i, r in enumerate(self.rows):
                indptr[i + 1] = indptr[i] + len(r.indices)
            indices = (
                np.concatenate([r.indices for r in self.rows])
                if self.rows
                else np.zeros(0, dtype=np.int64)
            )
            values = (
                np.concatenate([r.counts for r in self.rows]).astype(np.float64)
                if self.rows
                else np.zeros(0, dtype=np.float64)
            )
            cached = sp.csr_matrix((values, indices, indptr), shape=(self.n, self.d))
            self.__dict__["_csr"] = cached
        return cached

    def activities(self) -> np.ndarray:
        """Total activity per row, float64, shape (n,)."""
        return np.array([r.total() for r in self.rows], dtype=np.float64)

    def subset(self, indices) -> "LabeledCorpus":
        """New corpus holding the given rows (shared row objects)."""
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledCorpus(
            vocabulary=self.vocabulary,
            rows=[self.rows[i] for i in idx],
            labels=self.labels[idx].copy(),
            k=self.k,
        )


@dataclass
class LoadReport:
    """What happened during a corpus load."""

    lines_read: int = 0
    users_kept: int = 0
    users_rejected_empty: int = 0
    unknown_community_pairs: int = 0
    merged_duplicate_users: int = 0


def load_vocabulary(path) -> CommunityVocabulary:
    """Read one community name per line; blank lines ignored."""
    names = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        name = line.strip()
        if name:
            names.append(name)
    return CommunityVocabulary(tuple(names))


def _check_count(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise DataError(f"{where}: count must be an integer, got {value!r}")
    if value < 1:
        raise DataError(f"{where}: count {value} below 1")
    if value > MAX_COUNT:
        raise DataError(f"{where}: count {value} exceeds {MAX_COUNT}")
    return value


def _check_label(value, k: int, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise DataError(f"{where}: label must be an integer, got {value!r}")
    if value != -1 and not (0 <= value < k):
        raise DataError(f"{where}: label {value} outside -1..{k - 1}")
    return value


class _Accumulator:
    """Merges per-user counts and labels in first-appearance order."""

    def __init__(self, vocabulary: CommunityVocabulary, k: int):
        self.vocabulary = vocabulary
        self.k = k
        self.order: list[str] = []
        self.counts: dict[str, dict[int, int]] = {}
        self.labels: dict[str, int] = {}
        self.report = LoadReport()

    def add_user(self, user: str, pairs, label: int, where: str):
        if user in self.counts:
            self.report.merged_duplicate_users += 1
        else:
            self.order.append(user)
            self.counts[user] = {}
            self.labels[user] = -1
        acc = self.counts[user]
        for j, c in pairs:
            acc[j] = acc.get(j, 0) + c
            if acc[j] > MAX_COUNT:
                raise DataError(f"{where}: merged count for user {user!r} exceeds {MAX_COUNT}")
        if label != -1:
            prev = self.labels[user]
            if prev != -1 and prev != label:
                raise DataError(
                    f"{where}: user {user!r} has conflicting labels {prev} and {label}"
                )
            self.labels[user] = label

    def finish(self) -> tuple[LabeledCorpus, LoadReport]:
        rows, labels = [], []
        for user in self.order:
            acc = self.counts[user]
            if not acc:
                self.report.users_rejected_empty += 1
                continue
            idx = np.array(sorted(acc), dtype=np.int64)
            cnt = np.array([acc[j] for j in idx], dtype=np.int64)
            rows.append(SparseActivityVector(user_id=user, indices=idx, counts=cnt))
            labels.append(self.labels[user])
        self.report.users_kept = len(rows)
        if self.report.unknown_community_pairs:
            warnings.warn(
                f"dropped {self.report.unknown_community_pairs} activity pairs "
                "referencing communities outside the vocabulary",
                stacklevel=3,
            )
        corpus = LabeledCorpus(
            vocabulary=self.vocabulary,
            rows=rows,
            labels=np.array(labels, dtype=np.int64),
            k=self.k,
        )
        return corpus, self.report


def _load_jsonl(path, vocabulary: CommunityVocabulary, k: int) -> tuple[LabeledCorpus, LoadReport]:
    acc = _Accumulator(vocabulary, k)
    index = vocabulary.index
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            acc.report.lines_read += 1
            where = f"{path}:{lineno}"
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{where}: invalid JSON ({e.msg})") from e
            if not isinstance(rec, dict) or "user" not in rec:
                raise DataError(f"{where}: expected an object with a 'user' field")
            user = rec["user"]
            if not isinstance(user, str) or not user:
                raise DataError(f"{where}: 'user' must be a non-empty string")
            counts = rec.get("counts", {})
            if not isinstance(counts, dict):
                raise DataError(f"{where}: 'counts' must be an object")
            pairs = []
            for name, c in counts.items():
                c = _check_count(c, where)
                j = index.get(name)
                if j is None:
                    acc.report.unknown_community_pairs += 1
                    continue
                pairs.append((j, c))
            label = _check_label(rec.get("label", -1), k, where)
            acc.add_user(user, pairs, label, where)
    return acc.finish()


def _load_triplets(
    path, vocabulary: CommunityVocabulary, k: int, labels_path=None
) -> tuple[LabeledCorpus, LoadReport]:
    acc = _Accumulator(vocabulary, k)
    index = vocabulary.index
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["user", "community", "count"]:
            raise DataError(f"{path}: expected header 'user,community,count'")
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            acc.report.lines_read += 1
            where = f"{path}:{lineno}"
            if len(rec) != 3:
                raise DataError(f"{where}: expected 3 fields, got {len(rec)}")
            user, name, raw = rec[0], rec[1], rec[2]
            if not user:
                raise DataError(f"{where}: empty user id")
            try:
                c = int(raw)
            except ValueError:
                raise DataError(f"{where}: count must be an integer, got {raw!r}") from None
            c = _check_count(c, where)
            j = index.get(name)
            if j is None:
                acc.report.unknown_community_pairs += 1
                acc.add_user(user, [], -1, where)
            else:
                acc.add_user(user, [(j, c)], -1, where)
    if labels_path is not None:
        with open(labels_path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:2]] != ["user", "label"]:
                raise DataError(f"{labels_path}: expected header 'user,label'")
            for lineno, rec in enumerate(reader, start=2):
                if not rec:
                    continue
                where = f"{labels_path}:{lineno}"
                if len(rec) != 2:
                    raise DataError(f"{where}: expected 2 fields, got {len(rec)}")
                user, raw = rec[0], rec[1]
                try:
                    label = int(raw)
                except ValueError:
                    raise DataError(f"{where}: label must be an integer, got {raw!r}") from None
                label = _check_label(label, k, where)
                if user not in acc.counts:
                    raise DataError(f"{where}: label for unknown user {user!r}")
                if label != -1:
                    prev = acc.labels[user]
                    if prev != -1 and prev != label:
                        raise DataError(
                            f"{where}: user {user!r} has conflicting labels {prev} and {label}"
                        )
                    acc.labels[user] = label
    return acc.finish()


def load_corpus(
    path,
    vocabulary: CommunityVocabulary,
    fmt: str = "jsonl",
    labels_path=None,
    k: int = 2,
) -> tuple[LabeledCorpus, LoadReport]:
    """Load a corpus from disk.

    Formats:
      jsonl    one object per line: {"user": str, "counts": {community: int},
               "label": int (optional, -1 = unlabeled)}
      triplets CSV 'user,community,count' plus an optional labels CSV
               'user,label' given via labels_path.

    Duplicate users are merged by entry-wise count sum. Unknown
    communities are dropped (counted in the report, single warning).
    Users left with no in-vocabulary activity are rejected, not errors.
    Conflicting labels for one user raise DataError.
    """
    if fmt == "jsonl":
        if labels_path is not None:
            raise DataError("labels_path only applies to fmt='triplets'")
        return _load_jsonl(path, vocabulary, k)
    if fmt == "triplets":
        return _load_triplets(path, vocabulary, k, labels_path)
    raise DataError(f"unknown corpus format {fmt!r}")


@dataclass(frozen=True)
class SplitSpec:
    """Train/test split parameters.

    Fractions apply to labeled rows; unlabeled rows always go to train.
    When train_fraction + test_fraction == 1 the remainder row counts
    are assigned to train, otherwise a middle slice is discarded.
    """

    train_fraction: float = 0.7
    test_fraction: float = 0.3
    stratify: bool = True
    oversample: bool = False
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.train_fraction < 1.0) or not (0.0 < self.test_fraction < 1.0):
            raise DataError("split fractions must lie strictly between 0 and 1")
        if self.train_fraction + self.test_fraction > 1.0 + 1e-12:
            raise DataError("train_fraction + test_fraction must not exceed 1")


def _partition_indices(pool: np.ndarray, spec: SplitSpec, rng) -> tuple[list, list]:
    """Shuffle one pool of indices and cut test then train slices."""
    shuffled = pool.copy()
    rng.shuffle(shuffled)
    n = len(shuffled)
    n_test = int(np.floor(spec.test_fraction * n))
    if abs(spec.train_fraction + spec.test_fraction - 1.0) <= 1e-12:
        n_train = n - n_test
    else:
        n_train = int(np.floor(spec.train_fraction * n))
    test = shuffled[:n_test].tolist()
    train = shuffled[n_test : n_test + n_train].tolist()
    return train, test


def split(corpus: LabeledCorpus, spec: SplitSpec) -> tuple[LabeledCorpus, LabeledCorpus]:
    """Seeded train/test split; stratified over labels by default.

    Returns (train, test). Row order within each side follows the
    original corpus order. With spec.oversample the train side is
    additionally passed through random_oversample.
    """
    if isinstance(spec.seed, np.random.SeedSequence):
        seq = spec.seed  # evaluation protocols pass spawned children directly
    else:
        seq = np.random.SeedSequence(spec.seed)
    split_seed, over_seed = seq.spawn(2)
    rng = np.random.default_rng(split_seed)
    labeled_idx = np.flatnonzero(corpus.labeled_mask)
    train_idx: list[int] = []
    test_idx: list[int] = []
    if spec.stratify:
        for y in range(corpus.k):
            pool = labeled_idx[corpus.labels[labeled_idx] == y]
            if len(pool) < 2:
                raise DataError(
                    f"stratified split needs >= 2 labeled rows per class, "
                    f"class {y} has {len(pool)}"
                )
            tr, te = _partition_indices(pool, spec, rng)
            train_idx += tr
            test_idx += te
    else:
        if len(labeled_idx) < 2:
            raise DataError("split needs >= 2 labeled rows")
        tr, te = _partition_indices(labeled_idx, spec, rng)
        train_idx += tr
        test_idx += te
    train_idx += np.flatnonzero(~corpus.labeled_mask).tolist()
    train = corpus.subset(sorted(train_idx))
    test = corpus.subset(sorted(test_idx))
    if spec.oversample:
        train = random_oversample(train, seed=over_seed)
    return train, test


def random_oversample(corpus: LabeledCorpus, seed=0) -> LabeledCorpus:
    """Balance labeled classes by duplicating minority rows with replacement.

    Every class must have at least one labeled row. Unlabeled rows pass
    through unchanged. Original rows keep their order; duplicates are
    appended, grouped by class. A balanced corpus comes back unchanged.
    """
    counts = corpus.class_counts()
    if counts.min() < 1:
        missing = int(np.flatnonzero(counts == 0)[0])
        raise DataError(f"oversampling needs >= 1 labeled row per class, class {missing} has 0")
    target = int(counts.max())
    rng = np.random.default_rng(seed)
    extra: list[int] = []
    for y in range(corpus.k):
        deficit = target - int(counts[y])
        if deficit == 0:
            continue
        pool = np.flatnonzero(corpus.labels == y)
        extra += rng.choice(pool, size=deficit, replace=True).tolist()
    if not extra:
        return corpus
    keep = list(range(corpus.n)) + extra
    return corpus.subset(keep)
