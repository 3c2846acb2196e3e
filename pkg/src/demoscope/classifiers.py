"""Uniform classifier interface over the model families.

Evaluation and quantification only need three things from a model:
probability-like scores for class 1, hard predictions, and whether the
scores are calibrated. Scores are NaN (and predictions -1) for rows a
model cannot score; downstream code drops those rows and reports the
count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol, runtime_checkable

import numpy as np

from . import axis as axis_mod
from . import bayes
from .data import LabeledCorpus
from .errors import DataError


@runtime_checkable
class ScoringClassifier(Protocol):
    def scores(self, corpus: LabeledCorpus) -> np.ndarray: ...

    def predict(self, corpus: LabeledCorpus) -> np.ndarray: ...

    @property
    def calibrated(self) -> bool: ...


@dataclass
class NaiveBayesClassifier:
    """Adapter over a fitted binary NaiveBayesModel."""

    model: bayes.NaiveBayesModel

    def __post_init__(self):
        if self.model.k != 2:
            raise DataError("classifier adapters are binary; model has k != 2")

    def scores(self, corpus: LabeledCorpus) -> np.ndarray:
        return bayes.predict_proba_matrix(self.model, corpus)[:, 1]

    def predict(self, corpus: LabeledCorpus) -> np.ndarray:
        return bayes.classify(self.model, corpus)

    @property
    def calibrated(self) -> bool:
        return self.model.calibrator is not None


@dataclass
class AxisClassifier:
    """Adapter over an AxisModel; thresholds raw z, squashes for scores."""

    model: axis_mod.AxisModel

    def raw_scores(self, corpus: LabeledCorpus) -> np.ndarray:
        return axis_mod.score_corpus(self.model, corpus)

    def scores(self, corpus: LabeledCorpus) -> np.ndarray:
        return np.asarray(axis_mod.score_to_proba(self.model, self.raw_scores(corpus)))

    def predict(self, corpus: LabeledCorpus) -> np.ndarray:
        return axis_mod.axis_predict(self.model, self.raw_scores(corpus))

    @property
    def calibrated(self) -> bool:
        return self.model.calibrator is not None


@dataclass
class MajorityClassifier:
    """Predicts the majority training class; scores are the class-1 rate."""

    majority: int
    rate: float

    @classmethod
    def fit(cls, corpus: LabeledCorpus) -> "MajorityClassifier":
        counts = corpus.class_counts()
        if counts.sum() == 0:
            raise DataError("majority fit needs labeled rows")
        majority = int(np.argmax(counts))  # tie resolves to class 0
        rate = float(counts[1] / counts.sum())
        return cls(majority=majority, rate=rate)

    def scores(self, corpus: LabeledCorpus) -> np.ndarray:
        return np.full(corpus.n, self.rate, dtype=np.float64)

    def predict(self, corpus: LabeledCorpus) -> np.ndarray:
        return np.full(corpus.n, self.majority, dtype=np.int64)

    @property
    def calibrated(self) -> bool:
        return False


TrainFn = Callable[[LabeledCorpus], ScoringClassifier]


def nb_factory(
    alpha1: float = 1.0,
    alpha2: float = 1.0,
    use_log_normal: bool = False,
    semi_supervised: bool = False,
    pooled_activity: bool = False,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> TrainFn:
    """Training closure for evaluation protocols.

    Supervised mode drops unlabeled rows before fitting; semi-supervised
    mode keeps them for EM.
    """

    def train(corpus: LabeledCorpus) -> NaiveBayesClassifier:
        if semi_supervised:
            model, _ = bayes.fit_semisupervised(
                corpus,
                alpha1=alpha1,
                alpha2=alpha2,
                use_log_normal=use_log_normal,
                pooled_activity=pooled_activity,
                max_iter=max_iter,
                tol=tol,
            )
        else:
            labeled = corpus.subset(np.flatnonzero(corpus.labeled_mask))
            model, _ = bayes.fit_supervised(
                labeled,
                alpha1=alpha1,
                alpha2=alpha2,
                use_log_normal=use_log_normal,
                pooled_activity=pooled_activity,
            )
        return NaiveBayesClassifier(model)

    return train


def axis_factory(model: axis_mod.AxisModel) -> TrainFn:
    """Constant closure: the axis does not retrain per split."""

    def train(corpus: LabeledCorpus) -> AxisClassifier:
        return AxisClassifier(model)

    return train


def majority_factory() -> TrainFn:
    return MajorityClassifier.fit
