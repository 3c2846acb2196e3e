"""Multinomial Naive Bayes over community counts, with two extensions.

The generative story for a user with class y, count vector x, and total
activity a = sum(x):

    p(x, y) = p(y) * prod_j p(j | y)^x_j            (plain model)
    p(x, y) = p(y) * p(a | y) * prod_j p(j | y)^x_j (activity model)

p(a | y) is a discretized log-normal: the mass assigned to total
activity a is CDF(a + 1) - CDF(a) for a log-normal with per-class
parameters (mu_y, sigma_y). All computation is carried in log space.

Training is either fully supervised (closed-form smoothed counts) or
semi-supervised EM where labeled rows keep hard one-hot responsibilities
and unlabeled rows get posterior responsibilities. Both paths share one
maximization routine, so EM with zero unlabeled rows reproduces the
supervised fit bit for bit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import log_softmax, logsumexp
from scipy.stats import norm

from .calibrate import IsotonicMap, apply_map
from .data import LabeledCorpus, SparseActivityVector
from .errors import DataError, NumericError

# smallest log mass assigned to any activity bin; exp(-745) is the
# smallest positive normal-range double
LOG_FLOOR = -745.0

SIGMA_FLOOR = 1e-6


@dataclass
class NaiveBayesModel:
    """Fitted parameters, all stored in log space.

    activity is None for the plain model, else an array of shape (k, 2)
    holding (mu_y, sigma_y) per class. An optional isotonic calibrator
    post-processes the class-1 posterior (binary models only).
    """

    k: int
    d: int
    log_prior: np.ndarray
    log_cond: np.ndarray
    activity: np.ndarray | None = None
    alpha1: float = 1.0
    alpha2: float = 1.0
    calibrator: IsotonicMap | None = None

    def __post_init__(self):
        self.log_prior = np.asarray(self.log_prior, dtype=np.float64)
        self.log_cond = np.asarray(self.log_cond, dtype=np.float64)
        if self.log_prior.shape != (self.k,):
            raise DataError(f"log_prior must have shape ({self.k},)")
        if self.log_cond.shape != (self.k, self.d):
            raise DataError(f"log_cond must have shape ({self.k}, {self.d})")
        if self.activity is not None:
            self.activity = np.asarray(self.activity, dtype=np.float64)
            if self.activity.shape != (self.k, 2):
                raise DataError(f"activity must have shape ({self.k}, 2)")
            if np.any(self.activity[:, 1] <= 0):
                raise DataError("activity sigma must be positive")


@dataclass
class FitReport:
    """Trace of one training run.

    log_likelihood holds the smoothed training objective: the observed-
    data log likelihood plus the pseudo-count penalty alpha1 * sum log
    p(y) + alpha2 * sum log p(j|y). The smoothed M-step maximizes
    exactly this penalized objective, so the trace is non-decreasing;
    the raw likelihood alone is not guaranteed monotone once alpha > 0.
    """

    iterations: int
    log_likelihood: list[float] = field(default_factory=list)
    converged: bool = True
    n_labeled: int = 0
    n_unlabeled: int = 0


def _log1mexp(x: np.ndarray) -> np.ndarray:
    """log(1 - exp(x)) for x <= 0, numerically stable on both ends."""
    out = np.empty_like(x)
    small = x < -np.log(2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[small] = np.log1p(-np.exp(x[small]))
        out[~small] = np.log(-np.expm1(x[~small]))
    return out


def log_activity_pmf(a, mu: float, sigma: float) -> np.ndarray:
    """log[ CDF(a + 1) - CDF(a) ] under LogNormal(mu, sigma).

    Computed as a difference of normal log-CDFs of ln(t), so the result
    stays finite far into the tails; floored at LOG_FLOOR.
    """
    a = np.asarray(a, dtype=np.float64)
    if np.any(a < 1):
        raise DataError("total activity must be >= 1")
    hi = norm.logcdf((np.log(a + 1.0) - mu) / sigma)
    lo = norm.logcdf((np.log(a) - mu) / sigma)
    out = hi + _log1mexp(np.minimum(lo - hi, 0.0))
    return np.maximum(out, LOG_FLOOR)


def _activity_log_matrix(activities: np.ndarray, activity: np.ndarray) -> np.ndarray:
    """Per-row, per-class log activity mass, shape (n, k)."""
    cols = [log_activity_pmf(activities, mu, sigma) for mu, sigma in activity]
    return np.stack(cols, axis=1)


def _m_step(
    X: sp.csr_matrix,
    log_activities: np.ndarray,
    resp: np.ndarray,
    alpha1: float,
    alpha2: float,
    use_log_normal: bool,
    pooled_activity: bool = False,
):
    """Smoothed maximization given responsibilities resp of shape (n, k).

    Returns (log_prior, log_cond, activity or None). Priors use
    pseudo-count alpha1 per class; conditionals use alpha2 per
    (class, community) cell. Activity parameters are the responsibility-
    weighted mean and population std of log totals per class; with
    pooled_activity=True every class instead gets the unweighted pooled
    statistics over all rows.
    """
    n, d = X.shape
    k = resp.shape[1]
    n_y = resp.sum(axis=0)
    prior = (alpha1 + n_y) / (alpha1 * k + n)
    counts = np.asarray((X.T @ resp).T)
    totals = counts.sum(axis=1)
    cond = (alpha2 + counts) / (alpha2 * d + totals)[:, None]
    activity = None
    if use_log_normal:
        activity = np.empty((k, 2), dtype=np.float64)
        if pooled_activity:
            mu = float(log_activities.mean())
            sigma = float(log_activities.std())
            activity[:, 0] = mu
            activity[:, 1] = sigma
        else:
            if np.any(n_y <= 0):
                raise NumericError("a class lost all responsibility mass")
            mu = (resp * log_activities[:, None]).sum(axis=0) / n_y
            centered_sq = (log_activities[:, None] - mu[None, :]) ** 2
            var = (resp * centered_sq).sum(axis=0) / n_y
            activity[:, 0] = mu
            activity[:, 1] = np.sqrt(var)
        if np.any(activity[:, 1] < SIGMA_FLOOR):
            warnings.warn("activity sigma hit the floor; totals are near-constant")
            activity[:, 1] = np.maximum(activity[:, 1], SIGMA_FLOOR)
    return np.log(prior), np.log(cond), activity


def _one_hot(labels: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((labels.size, k), dtype=np.float64)
    out[np.arange(labels.size), labels] = 1.0
    return out


def log_joint_matrix(model: NaiveBayesModel, X: sp.csr_matrix, activities=None) -> np.ndarray:
    """log p(x, y) for every row and class, shape (n, k)."""
    lj = np.asarray(X @ model.log_cond.T) + model.log_prior[None, :]
    if model.activity is not None:
        if activities is None:
            activities = np.asarray(X.sum(axis=1)).ravel()
        lj = lj + _activity_log_matrix(np.asarray(activities, dtype=np.float64), model.activity)
    return lj


def log_joint(model: NaiveBayesModel, x: SparseActivityVector) -> np.ndarray:
    """log p(x, y) for one row, shape (k,)."""
    if len(x.indices) and x.indices[-1] >= model.d:
        raise DataError(
            f"user {x.user_id!r}: community index {int(x.indices[-1])} "
            f"outside model vocabulary of size {model.d}"
        )
    lj = model.log_prior + (model.log_cond[:, x.indices] * x.counts).sum(axis=1)
    if model.activity is not None:
        lj = lj + _activity_log_matrix(np.array([float(x.total())]), model.activity)[0]
    return lj


def predict_proba_matrix(model: NaiveBayesModel, corpus: LabeledCorpus) -> np.ndarray:
    """Posterior p(y | x) per row, shape (n, k); calibrated if attached."""
    lj = log_joint_matrix(model, corpus.to_csr(), corpus.activities())
    proba = np.exp(log_softmax(lj, axis=1))
    if model.calibrator is not None:
        if model.k != 2:
            raise DataError("calibration only applies to binary models")
        p1 = apply_map(model.calibrator, proba[:, 1])
        proba = np.stack([1.0 - p1, p1], axis=1)
    return proba


def predict_proba(model: NaiveBayesModel, x: SparseActivityVector) -> np.ndarray:
    """Posterior p(y | x) for one row, shape (k,)."""
    lj = log_joint(model, x)
    proba = np.exp(lj - logsumexp(lj))
    if model.calibrator is not None:
        if model.k != 2:
            raise DataError("calibration only applies to binary models")
        p1 = apply_map(model.calibrator, float(proba[1]))
        proba = np.array([1.0 - p1, p1])
    return proba


def classify(model: NaiveBayesModel, corpus: LabeledCorpus) -> np.ndarray:
    """Hard class per row; posterior ties resolve to the lower class."""
    return np.argmax(predict_proba_matrix(model, corpus), axis=1).astype(np.int64)


def fit_supervised(
    corpus: LabeledCorpus,
    alpha1: float = 1.0,
    alpha2: float = 1.0,
    use_log_normal: bool = False,
    pooled_activity: bool = False,
) -> tuple[NaiveBayesModel, FitReport]:
    """Closed-form smoothed fit on a fully labeled corpus.

    Every row must carry a label and every class must be represented.
    """
    _validate_hyper(alpha1, alpha2)
    if corpus.n == 0:
        raise DataError("cannot fit on an empty corpus")
    if not corpus.labeled_mask.all():
        n_un = int((~corpus.labeled_mask).sum())
        raise DataError(f"supervised fit requires labels on all rows; {n_un} unlabeled")
    counts = corpus.class_counts()
    if counts.min() < 1:
        missing = int(np.flatnonzero(counts == 0)[0])
        raise DataError(f"class {missing} has no labeled rows")
    X = corpus.to_csr()
    log_act = np.log(corpus.activities())
    resp = _one_hot(corpus.labels, corpus.k)
    log_prior, log_cond, activity = _m_step(
        X, log_act, resp, alpha1, alpha2, use_log_normal, pooled_activity
    )
    model = NaiveBayesModel(
        k=corpus.k,
        d=corpus.d,
        log_prior=log_prior,
        log_cond=log_cond,
        activity=activity,
        alpha1=alpha1,
        alpha2=alpha2,
    )
    lj = log_joint_matrix(model, X, corpus.activities())
    ll = _observed_log_likelihood(lj, corpus.labels) + _smoothing_penalty(model)
    report = FitReport(
        iterations=0,
        log_likelihood=[ll],
        converged=True,
        n_labeled=corpus.n,
        n_unlabeled=0,
    )
    return model, report


def _observed_log_likelihood(lj: np.ndarray, labels: np.ndarray) -> float:
    """Joint likelihood of labeled rows plus marginal of unlabeled rows."""
    labeled = labels >= 0
    ll = 0.0
    if labeled.any():
        ll += float(lj[np.flatnonzero(labeled), labels[labeled]].sum())
    if (~labeled).any():
        ll += float(logsumexp(lj[~labeled], axis=1).sum())
    return ll


def _smoothing_penalty(model: NaiveBayesModel) -> float:
    """Pseudo-count penalty the smoothed M-step maximizes jointly with Q."""
    return float(
        model.alpha1 * model.log_prior.sum() + model.alpha2 * model.log_cond.sum()
    )


def fit_semisupervised(
    corpus: LabeledCorpus,
    alpha1: float = 1.0,
    alpha2: float = 1.0,
    use_log_normal: bool = False,
    pooled_activity: bool = False,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> tuple[NaiveBayesModel, FitReport]:
    """EM over a partially labeled corpus.

    Labeled rows keep hard one-hot responsibilities throughout; unlabeled
    rows get posterior responsibilities each E step. Initialization is
    the supervised fit on the labeled rows alone. Stops when the relative
    change of the smoothed training objective (see FitReport) drops to
    tol, or after max_iter maximizations. The trace in the report starts
    with the objective of the initial model.
    """
    _validate_hyper(alpha1, alpha2)
    if max_iter < 1:
        raise DataError(f"max_iter must be >= 1, got {max_iter}")
    if not tol > 0:
        raise DataError(f"tol must be > 0, got {tol}")
    labeled = corpus.labeled_mask
    if not labeled.any():
        raise DataError("semi-supervised fit needs at least one labeled row")
    counts = corpus.class_counts()
    if counts.min() < 1:
        missing = int(np.flatnonzero(counts == 0)[0])
        raise DataError(f"class {missing} has no labeled rows")

    X = corpus.to_csr()
    activities = corpus.activities()
    log_act = np.log(activities)
    k = corpus.k
    hard = _one_hot(np.maximum(corpus.labels, 0), k)

    # init: maximize on labeled rows only (no-op slice when fully labeled,
    # which keeps the zero-unlabeled case bit-identical to fit_supervised)
    lab_idx = np.flatnonzero(labeled)
    if lab_idx.size == corpus.n:
        X_init, act_init, resp_init = X, log_act, hard
    else:
        X_init, act_init, resp_init = X[lab_idx], log_act[lab_idx], hard[lab_idx]
    log_prior, log_cond, activity = _m_step(
        X_init, act_init, resp_init, alpha1, alpha2, use_log_normal, pooled_activity
    )
    model = NaiveBayesModel(
        k=k,
        d=corpus.d,
        log_prior=log_prior,
        log_cond=log_cond,
        activity=activity,
        alpha1=alpha1,
        alpha2=alpha2,
    )

    lj = log_joint_matrix(model, X, activities)
    ll = _observed_log_likelihood(lj, corpus.labels) + _smoothing_penalty(model)
    if not np.isfinite(ll):
        raise NumericError("non-finite log likelihood at initialization")
    trace = [ll]
    converged = False
    iterations = 0
    for it in range(1, max_iter + 1):
        resp = np.exp(log_softmax(lj, axis=1))
        resp[labeled] = hard[labeled]
        log_prior, log_cond, activity = _m_step(
            X, log_act, resp, alpha1, alpha2, use_log_normal, pooled_activity
        )
        if use_log_normal and not pooled_activity:
            # the weighted closed form maximizes a density surrogate of
            # the binned activity mass and can slip near convergence;
            # keep the previous parameters for any class it would hurt,
            # which preserves the EM ascent guarantee
            q_prev = (resp * _activity_log_matrix(activities, model.activity)).sum(axis=0)
            q_cand = (resp * _activity_log_matrix(activities, activity)).sum(axis=0)
            keep = q_cand >= q_prev
            activity = np.where(keep[:, None], activity, model.activity)
        model.log_prior = log_prior
        model.log_cond = log_cond
        model.activity = activity
        lj = log_joint_matrix(model, X, activities)
        ll_new = _observed_log_likelihood(lj, corpus.labels) + _smoothing_penalty(model)
        iterations = it
        if not np.isfinite(ll_new):
            raise NumericError(f"non-finite log likelihood at iteration {it}")
        trace.append(ll_new)
        if abs(ll_new - ll) <= tol * abs(ll):
            converged = True
            break
        ll = ll_new
    report = FitReport(
        iterations=iterations,
        log_likelihood=trace,
        converged=converged,
        n_labeled=int(labeled.sum()),
        n_unlabeled=int((~labeled).sum()),
    )
    return model, report


def _validate_hyper(alpha1: float, alpha2: float):
    if not (alpha1 > 0 and np.isfinite(alpha1)):
        raise DataError(f"alpha1 must be positive and finite, got {alpha1}")
    if not (alpha2 > 0 and np.isfinite(alpha2)):
        raise DataError(f"alpha2 must be positive and finite, got {alpha2}")


def feature_log_odds(model: NaiveBayesModel) -> np.ndarray:
    """Per-community evidence direction log p(j|1) - log p(j|0).

    Positive entries push posterior mass toward class 1. Binary only.
    """
    if model.k != 2:
        raise DataError(f"log odds need a binary model, got k={model.k}")
    return model.log_cond[1] - model.log_cond[0]


def feature_log_odds_dispersion(
    corpus: LabeledCorpus,
    n_boot: int = 50,
    seed: int = 0,
    alpha1: float = 1.0,
    alpha2: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Bootstrap mean and sample std of the per-community log odds.

    Refits a supervised plain model on n_boot stratified resamples
    (labeled rows only, resampled with replacement within class).
    """
    if n_boot < 2:
        raise DataError(f"n_boot must be >= 2, got {n_boot}")
    lab_idx = np.flatnonzero(corpus.labeled_mask)
    if lab_idx.size == 0:
        raise DataError("log-odds dispersion needs labeled rows")
    labeled = corpus.subset(lab_idx)
    counts = labeled.class_counts()
    if counts.min() < 1:
        missing = int(np.flatnonzero(counts == 0)[0])
        raise DataError(f"class {missing} has no labeled rows")
    rng = np.random.default_rng(seed)
    draws = np.empty((n_boot, corpus.d), dtype=np.float64)
    class_pools = [np.flatnonzero(labeled.labels == y) for y in range(labeled.k)]
    for b in range(n_boot):
        take: list[int] = []
        for pool in class_pools:
            take += rng.choice(pool, size=pool.size, replace=True).tolist()
        boot = labeled.subset(sorted(take))
        model, _ = fit_supervised(boot, alpha1=alpha1, alpha2=alpha2)
        draws[b] = feature_log_odds(model)
    return draws.mean(axis=0), draws.std(axis=0, ddof=1)
