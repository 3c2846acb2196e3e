"""Evaluation protocols: ranking metrics, bootstrap, cross-validation, curves.

All metrics are computed on labeled rows only. Rows a classifier cannot
score are dropped and counted, never imputed.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .classifiers import TrainFn
from .data import LabeledCorpus, SplitSpec, random_oversample, split
from .errors import DataError
from .quantify import QuantifierModel, evaluate_quantifier, fit_quantifier

EPS_PROB = 1e-12


def roc_auc(scores, labels) -> float:
    """Rank-based ROC AUC; tied scores contribute half concordance.

    Equivalent to the Mann-Whitney U statistic normalized by n0 * n1.
    A constant scorer gets exactly 0.5.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.ndim != 1 or s.shape != y.shape or s.size == 0:
        raise DataError("scores and labels must be non-empty 1-d arrays of equal length")
    if not np.all(np.isfinite(s)):
        raise DataError("scores must be finite; drop unscorable rows first")
    if not np.isin(y, (0, 1)).all():
        raise DataError("labels must be 0 or 1")
    n1 = int((y == 1).sum())
    n0 = int((y == 0).sum())
    if n1 == 0 or n0 == 0:
        raise DataError("ROC AUC needs both classes present")
    ranks = rankdata(s)
    u = ranks[y == 1].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n0 * n1))


def f1(predictions, labels, positive: int = 1) -> float:
    """F1 of the positive class; 0.0 when there are no true positives."""
    p = np.asarray(predictions)
    y = np.asarray(labels)
    if p.shape != y.shape or p.ndim != 1 or p.size == 0:
        raise DataError("predictions and labels must be non-empty 1-d arrays of equal length")
    tp = int(((p == positive) & (y == positive)).sum())
    fp = int(((p == positive) & (y != positive)).sum())
    fn = int(((p != positive) & (y == positive)).sum())
    if tp == 0:
        return 0.0
    return float(2 * tp / (2 * tp + fp + fn))


def roc_curve(scores, labels):
    """ROC points swept over score thresholds, (fpr, tpr, thresholds).

    Starts at (0, 0) and ends at (1, 1); one point per distinct score.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    order = np.argsort(-s, kind="stable")
    s = s[order]
    y = y[order]
    n1 = int((y == 1).sum())
    n0 = int((y == 0).sum())
    if n1 == 0 or n0 == 0:
        raise DataError("ROC curve needs both classes present")
    distinct = np.flatnonzero(np.diff(s)) if s.size > 1 else np.array([], dtype=np.int64)
    cut = np.concatenate([distinct, [s.size - 1]])
    tp = np.cumsum(y == 1)[cut]
    fp = np.cumsum(y == 0)[cut]
    fpr = np.concatenate([[0.0], fp / n0])
    tpr = np.concatenate([[0.0], tp / n1])
    thresholds = np.concatenate([[np.inf], s[cut]])
    return fpr, tpr, thresholds


@dataclass
class MetricReport:
    """Replicate-level metric values plus mean/std summaries."""

    model_tag: str
    n_replicates: int
    metrics: dict[str, np.ndarray]
    dropped_rows: int = 0

    def summary(self) -> dict[str, dict[str, float]]:
        out = {}
        for name, vals in self.metrics.items():
            std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
            out[name] = {"mean": float(vals.mean()), "std": std}
        return out


@dataclass
class CurveData:
    """A plotted series: x, y, optional spread, named auxiliary series."""

    kind: str
    x: np.ndarray
    y: np.ndarray
    y_std: np.ndarray | None = None
    aux: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def to_csv(self, path):
        cols = ["x", "y"] + (["y_std"] if self.y_std is not None else []) + list(self.aux)
        lines = [",".join(cols)]
        for i in range(len(self.x)):
            row = [repr(float(self.x[i])), repr(float(self.y[i]))]
            if self.y_std is not None:
                row.append(repr(float(self.y_std[i])))
            for name in self.aux:
                row.append(repr(float(self.aux[name][i])))
            lines.append(",".join(row))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


def _scored_subset(classifier, corpus: LabeledCorpus):
    """Scores, predictions, labels on labeled scorable rows, plus drop count."""
    labels = corpus.labels
    scores = np.asarray(classifier.scores(corpus), dtype=np.float64)
    preds = np.asarray(classifier.predict(corpus))
    ok = (labels >= 0) & np.isfinite(scores) & (preds >= 0)
    dropped = int(((labels >= 0) & ~(np.isfinite(scores) & (preds >= 0))).sum())
    return scores[ok], preds[ok], labels[ok], dropped


def bootstrap_eval(
    factory: TrainFn,
    corpus: LabeledCorpus,
    n_boot: int = 100,
    test_fraction: float = 0.2,
    oversample: bool = True,
    seed: int = 0,
    model_tag: str = "model",
    threads: int = 1,
) -> MetricReport:
    """Repeated stratified holdout: train on (oversampled) 1 - test_fraction,
    score ROC AUC and F1 on the held-out rows.

    Replicates are independent and deterministic given (seed, replicate
    index), so the thread count never changes the numbers.
    """
    if n_boot < 1:
        raise DataError(f"n_boot must be >= 1, got {n_boot}")
    if not (0.0 < test_fraction < 1.0):
        raise DataError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    rep_seeds = np.random.SeedSequence(seed).spawn(n_boot)

    def one(b: int):
        spec = SplitSpec(
            train_fraction=1.0 - test_fraction,
            test_fraction=test_fraction,
            stratify=True,
            oversample=oversample,
            seed=rep_seeds[b],
        )
        train, test = _split_with_seedseq(corpus, spec)
        clf = factory(train)
        scores, preds, labels, dropped = _scored_subset(clf, test)
        if scores.size == 0 or len(set(labels.tolist())) < 2:
            raise DataError(f"replicate {b}: test side lost a class after dropping rows")
        return roc_auc(scores, labels), f1(preds, labels), dropped

    results = _run_replicates(one, n_boot, threads)
    aucs = np.array([r[0] for r in results])
    f1s = np.array([r[1] for r in results])
    dropped = int(sum(r[2] for r in results))
    return MetricReport(
        model_tag=model_tag,
        n_replicates=n_boot,
        metrics={"roc_auc": aucs, "f1": f1s},
        dropped_rows=dropped,
    )


def _split_with_seedseq(corpus, spec: SplitSpec):
    # SplitSpec carries an int seed in configs; protocols pass SeedSequence
    # children directly for independence across replicates
    return split(corpus, spec)


def _run_replicates(fn, n: int, threads: int):
    if threads <= 1:
        return [fn(b) for b in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))


def cv_roc(
    factory: TrainFn,
    corpus: LabeledCorpus,
    folds: int = 10,
    oversample: bool = True,
    seed: int = 0,
    model_tag: str = "model",
) -> CurveData:
    """Pooled ROC from stratified k-fold cross-validation.

    Out-of-fold scores for every labeled row are pooled into one curve.
    Unlabeled rows join every training fold. Each class needs at least
    `folds` labeled rows.
    """
    if folds < 2:
        raise DataError(f"folds must be >= 2, got {folds}")
    rng = np.random.default_rng(seed)
    labels = corpus.labels
    assignment = np.full(corpus.n, -1, dtype=np.int64)
    for y in (0, 1):
        pool = np.flatnonzero(labels == y)
        if pool.size < folds:
            raise DataError(f"class {y} has {pool.size} labeled rows, needs >= {folds}")
        shuffled = pool.copy()
        rng.shuffle(shuffled)
        assignment[shuffled] = np.arange(shuffled.size) % folds
    unlabeled_idx = np.flatnonzero(~corpus.labeled_mask)
    over_seeds = np.random.SeedSequence(seed).spawn(folds)

    pooled_scores = np.full(corpus.n, np.nan, dtype=np.float64)
    for fold in range(folds):
        test_idx = np.flatnonzero(assignment == fold)
        train_idx = np.flatnonzero((assignment >= 0) & (assignment != fold))
        train = corpus.subset(np.sort(np.concatenate([train_idx, unlabeled_idx])))
        if oversample:
            train = random_oversample(train, seed=over_seeds[fold])
        clf = factory(train)
        test = corpus.subset(test_idx)
        pooled_scores[test_idx] = np.asarray(clf.scores(test), dtype=np.float64)

    labeled_idx = np.flatnonzero(corpus.labeled_mask)
    ok = labeled_idx[np.isfinite(pooled_scores[labeled_idx])]
    dropped = int(labeled_idx.size - ok.size)
    fpr, tpr, _ = roc_curve(pooled_scores[ok], labels[ok])
    auc = roc_auc(pooled_scores[ok], labels[ok])
    return CurveData(
        kind="roc",
        x=fpr,
        y=tpr,
        meta={"auc": auc, "folds": folds, "model_tag": model_tag, "dropped_rows": dropped},
    )


def learning_curve(
    factory: TrainFn,
    corpus: LabeledCorpus,
    sizes,
    repeats: int = 30,
    cohort_size: int = 200,
    calibration_fraction: float = 0.25,
    mode: str = "acc",
    seed: int = 0,
    model_tag: str = "model",
) -> CurveData:
    """Quantification error as a function of labeled training-set size.

    One 70/30 split provides a training pool and an evaluation pool.
    For each size s: draw a stratified subsample of s labeled pool rows,
    hold out calibration_fraction of it to measure correction rates,
    train on the (oversampled) rest, then score MAE over NPP cohorts
    from the evaluation pool at its natural prevalence.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) == 0 or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise DataError("sizes must be strictly increasing")
    if not (0.0 < calibration_fraction < 1.0):
        raise DataError("calibration_fraction must lie in (0, 1)")
    root = np.random.SeedSequence(seed)
    split_seed, sub_seed, npp_seed = root.spawn(3)
    train_pool, eval_pool = split(
        corpus,
        SplitSpec(train_fraction=0.7, test_fraction=0.3, stratify=True, seed=split_seed),
    )
    lab_idx = np.flatnonzero(train_pool.labeled_mask)
    if sizes[-1] > lab_idx.size:
        raise DataError(
            f"largest size {sizes[-1]} exceeds the {lab_idx.size} labeled rows "
            "in the training pool"
        )
    unlabeled_idx = np.flatnonzero(~train_pool.labeled_mask)
    sub_rng = np.random.default_rng(sub_seed)
    npp_children = npp_seed.spawn(len(sizes))

    maes = np.empty(len(sizes), dtype=np.float64)
    stds = np.empty(len(sizes), dtype=np.float64)
    for i, s in enumerate(sizes):
        take = _stratified_subsample(train_pool.labels, lab_idx, s, sub_rng)
        n_cal = max(2, int(round(calibration_fraction * take.size)))
        if n_cal >= take.size:
            raise DataError(f"size {s} too small to carve a calibration split")
        cal_idx = take[:n_cal]
        fit_idx = np.concatenate([take[n_cal:], unlabeled_idx])
        fit_part = random_oversample(
            train_pool.subset(np.sort(fit_idx)), seed=sub_rng.integers(2**63)
        )
        cal_part = train_pool.subset(np.sort(cal_idx))
        clf = factory(fit_part)
        quant = fit_quantifier(clf, cal_part, mode=mode)
        rep = evaluate_quantifier(
            quant,
            eval_pool,
            repeats=repeats,
            size=cohort_size,
            seed=int(np.random.default_rng(npp_children[i]).integers(2**31)),
        )
        maes[i] = rep.mae
        stds[i] = rep.ae_std
    return CurveData(
        kind="learning",
        x=np.array(sizes, dtype=np.float64),
        y=maes,
        y_std=stds,
        meta={"model_tag": model_tag, "mode": mode, "repeats": repeats},
    )


def _stratified_subsample(labels, lab_idx, s: int, rng) -> np.ndarray:
    """Class-proportional draw of s labeled rows (at least one per class)."""
    idx1 = lab_idx[labels[lab_idx] == 1]
    idx0 = lab_idx[labels[lab_idx] == 0]
    n1 = int(round(s * idx1.size / lab_idx.size))
    n1 = min(max(n1, 1), s - 1)
    n0 = s - n1
    if n1 > idx1.size or n0 > idx0.size:
        raise DataError(f"cannot draw {s} rows with class balance from the pool")
    take1 = rng.choice(idx1, size=n1, replace=False)
    take0 = rng.choice(idx0, size=n0, replace=False)
    out = np.concatenate([take1, take0])
    rng.shuffle(out)
    return out


def robustness_sweep(
    classifier,
    corpus: LabeledCorpus,
    taus,
    model_tag: str = "model",
) -> CurveData:
    """Confidence-filtered AUC: keep rows scored <= tau or >= 1 - tau.

    tau = 0.5 keeps everything. Points where the retained set is empty
    or single-class hold NaN. Auxiliary series 'retained' records the
    kept fraction of scorable labeled rows.
    """
    taus = np.asarray(list(taus), dtype=np.float64)
    if taus.size == 0 or np.any(taus < 0.0) or np.any(taus > 0.5):
        raise DataError("taus must be a non-empty list within [0, 0.5]")
    scores, preds, labels, dropped = _scored_subset(classifier, corpus)
    if scores.size == 0:
        raise DataError("no scorable labeled rows")
    aucs = np.full(taus.size, np.nan)
    retained = np.zeros(taus.size)
    for i, tau in enumerate(taus):
        keep = (scores <= tau + EPS_PROB) | (scores >= 1.0 - tau - EPS_PROB)
        retained[i] = keep.mean()
        if keep.any() and len(set(labels[keep].tolist())) == 2:
            aucs[i] = roc_auc(scores[keep], labels[keep])
    return CurveData(
        kind="robustness",
        x=taus,
        y=aucs,
        aux={"retained": retained},
        meta={"model_tag": model_tag, "dropped_rows": dropped},
    )
