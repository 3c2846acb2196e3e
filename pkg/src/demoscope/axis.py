"""Embedding-axis baseline: score users along a seeded semantic direction.

An axis is the difference between the mean embedding of two curated
community pole sets. Every community in the table gets a cosine
similarity to the axis, z-standardized over the whole table. A user's
score is the activity-weighted average of the z scores of the
communities they participate in; class 1 iff the score exceeds the
threshold (default 0). Communities absent from the embedding table are
ignored; users with no embeddable activity are unscorable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibrate import IsotonicMap, apply_map
from .data import CommunityVocabulary, LabeledCorpus, SparseActivityVector
from .errors import DataError


@dataclass(frozen=True)
class EmbeddingTable:
    """Community name -> dense vector, all rows the same dimension."""

    names: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.vectors, dtype=np.float64)
        object.__setattr__(self, "vectors", vec)
        if len(self.names) == 0:
            raise DataError("embedding table is empty")
        if len(set(self.names)) != len(self.names):
            raise DataError("duplicate community names in embedding table")
        if vec.ndim != 2 or vec.shape[0] != len(self.names):
            raise DataError("vectors must be a 2-d array aligned with names")
        if not np.all(np.isfinite(vec)):
            raise DataError("embedding vectors must be finite")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def index(self) -> dict[str, int]:
        cached = self.__dict__.get("_index")
        if cached is None:
            cached = {name: i for i, name in enumerate(self.names)}
            self.__dict__["_index"] = cached
        return cached


def load_embeddings(path) -> EmbeddingTable:
    """Read a TSV of 'name\\tv1\\tv2...' rows into an EmbeddingTable."""
    names: list[str] = []
    rows: list[list[float]] = []
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise DataError(f"{path}:{lineno}: expected 'name<TAB>values...'")
            try:
                vec = [float(v) for v in parts[1:]]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric embedding value") from None
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise DataError(
                    f"{path}:{lineno}: dimension {len(vec)} differs from first row ({dim})"
                )
            names.append(parts[0])
            rows.append(vec)
    if not names:
        raise DataError(f"{path}: no embedding rows")
    return EmbeddingTable(tuple(names), np.array(rows, dtype=np.float64))


@dataclass
class AxisModel:
    """A fitted axis: per-community z scores plus the decision threshold."""

    attribute: str
    communities: tuple[str, ...]
    z: np.ndarray
    pole_a: tuple[str, ...]
    pole_b: tuple[str, ...]
    threshold: float = 0.0
    projection: str = "cosine"
    calibrator: IsotonicMap | None = None

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=np.float64)
        if self.z.shape != (len(self.communities),):
            raise DataError("z must align with communities")

    @property
    def z_of(self) -> dict[str, float]:
        cached = self.__dict__.get("_z_of")
        if cached is None:
            cached = {name: float(v) for name, v in zip(self.communities, self.z)}
            self.__dict__["_z_of"] = cached
        return cached


def _cosine(vectors: np.ndarray, axis_vec: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1) * np.linalg.norm(axis_vec)
    dots = vectors @ axis_vec
    out = np.zeros(len(vectors), dtype=np.float64)
    ok = norms > 0
    out[ok] = dots[ok] / norms[ok]
    return out


def build_axis(
    table: EmbeddingTable,
    pole_a,
    pole_b,
    attribute: str = "",
    projection: str = "cosine",
    threshold: float = 0.0,
) -> AxisModel:
    """Build an axis from two disjoint pole community sets.

    The axis direction is mean(pole_a vectors) - mean(pole_b vectors),
    so pole_a communities land on the positive side. Pole names missing
    from the table are warned about and skipped; each pole needs at
    least one resolvable name. Raw projections (cosine by default, dot
    as the alternative) are z-standardized over the full table.
    Swapping the poles exactly negates every z score.
    """
    pole_a = tuple(pole_a)
    pole_b = tuple(pole_b)
    if not pole_a or not pole_b:
        raise DataError("both poles must be non-empty")
    if set(pole_a) & set(pole_b):
        raise DataError(f"poles overlap: {sorted(set(pole_a) & set(pole_b))}")
    if projection not in ("cosine", "dot"):
        raise DataError(f"unknown projection {projection!r}")

    def resolve(pole, tag):
        found = [table.index[n] for n in pole if n in table.index]
        missing = [n for n in pole if n not in table.index]
        if missing:
            warnings.warn(f"{tag}: {len(missing)} pole communities not in table: {missing}")
        if not found:
            raise DataError(f"{tag}: no pole community found in the embedding table")
        return np.array(found, dtype=np.int64)

    ia = resolve(pole_a, "pole_a")
    ib = resolve(pole_b, "pole_b")
    axis_vec = table.vectors[ia].mean(axis=0) - table.vectors[ib].mean(axis=0)
    if np.linalg.norm(axis_vec) == 0.0:
        raise DataError("degenerate axis: pole means coincide")
    if projection == "cosine":
        raw = _cosine(table.vectors, axis_vec)
    else:
        raw = table.vectors @ axis_vec
    std = raw.std()
    if std == 0.0:
        raise DataError("degenerate axis: all communities project identically")
    z = (raw - raw.mean()) / std
    return AxisModel(
        attribute=attribute,
        communities=table.names,
        z=z,
        pole_a=pole_a,
        pole_b=pole_b,
        threshold=threshold,
        projection=projection,
    )


def _z_for_vocabulary(axis: AxisModel, vocabulary: CommunityVocabulary):
    """Align axis z scores to a vocabulary: (values, coverage mask)."""
    z_of = axis.z_of
    values = np.zeros(vocabulary.size, dtype=np.float64)
    mask = np.zeros(vocabulary.size, dtype=bool)
    for j, name in enumerate(vocabulary.names):
        v = z_of.get(name)
        if v is not None:
            values[j] = v
            mask[j] = True
    return values, mask


def score_user(axis: AxisModel, x: SparseActivityVector, vocabulary: CommunityVocabulary) -> float:
    """Activity-weighted mean z over the user's embeddable communities.

    Raises DataError when none of the user's communities are in the
    axis table (the batch API reports NaN instead).
    """
    z_of = axis.z_of
    num = 0.0
    den = 0.0
    for j, c in zip(x.indices.tolist(), x.counts.tolist()):
        v = z_of.get(vocabulary.names[j])
        if v is not None:
            num += c * v
            den += c
    if den == 0.0:
        raise DataError(f"user {x.user_id!r}: no activity in embedded communities")
    return num / den


def score_corpus(axis: AxisModel, corpus: LabeledCorpus) -> np.ndarray:
    """Axis score per row; NaN for rows with no embeddable activity."""
    values, mask = _z_for_vocabulary(axis, corpus.vocabulary)
    X = corpus.to_csr()
    num = X @ (values * mask)
    den = X @ mask.astype(np.float64)
    out = np.full(corpus.n, np.nan, dtype=np.float64)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return out


def axis_predict(axis: AxisModel, scores) -> np.ndarray:
    """Class per score: 1 iff score > threshold, 0 otherwise, -1 for NaN."""
    s = np.asarray(scores, dtype=np.float64)
    out = np.where(s > axis.threshold, 1, 0).astype(np.int64)
    out[~np.isfinite(s)] = -1
    return out


def score_to_proba(axis: AxisModel, scores):
    """Squash axis scores to (0, 1) with a unit-slope logistic at the threshold.

    When a calibrator is attached it post-processes the squashed value.
    NaN passes through. Scalar in, scalar out.
    """
    s = np.asarray(scores, dtype=np.float64)
    with np.errstate(over="ignore"):
        p = 1.0 / (1.0 + np.exp(-(s - axis.threshold)))
    if axis.calibrator is not None:
        finite = np.isfinite(p)
        p = np.where(finite, apply_map(axis.calibrator, np.where(finite, p, 0.5)), np.nan)
    if np.ndim(scores) == 0:
        return float(p)
    return p
