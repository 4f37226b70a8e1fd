"""scikit-learn style wrappers around the rating and disc solvers.

Inputs follow one convention: ``X`` is an (n, 2) array of model ids and ``y``
is 1 where the first model won. ``predict_proba`` returns the two columns
``[P(second wins), P(first wins)]`` so ``classes_ == [0, 1]``.
"""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_known, check_pairs
from .core import DEFAULT_ANCHOR, ELO_ALPHA, ComparisonMatrices, RatingVector, matrices_from_indices
from .disc import disc_probabilities, fit_disc, transitivity_report
from .rating import EloConfig, SolverConfig, elo_update, fit_bt_mle, win_prob


def _roster_and_index(first, second, roster=None):
    if roster is None:
        roster = sorted(set(first) | set(second))
    roster = [str(m) for m in roster]
    return roster, {m: i for i, m in enumerate(roster)}


def _pairs_to_matrices(first, second, y, roster=None) -> ComparisonMatrices:
    roster, index = _roster_and_index(first, second, roster)
    a = check_known(first, index)
    b = check_known(second, index)
    winners = np.where(y == 1, a, b)
    losers = np.where(y == 1, b, a)
    return matrices_from_indices(len(roster), winners, losers, roster)


class _PairClassifier(ClassifierMixin, BaseEstimator):
    def _pair_prob(self, a, b):  # pragma: no cover - abstract
        raise NotImplementedError

    def predict_proba(self, X):
        check_is_fitted(self, "index_")
        first, second, _ = check_pairs(X)
        p = self._pair_prob(check_known(first, self.index_), check_known(second, self.index_))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] > 0.5).astype(np.int8)


class BradleyTerryRanker(_PairClassifier):
    """Maximum-likelihood Bradley-Terry ratings on the Elo scale.

    Parameters
    ----------
    alpha : float
        Logistic scale; the default ln(10)/400 matches Elo.
    max_iter, tol : solver limits (tolerance on the gradient max-norm).
    regularization : float
        Virtual wins and losses added to every observed pair.
    gauge_anchor : float
        Mean of the fitted ratings.
    roster : list of str, optional
        Fixed model order; defaults to the sorted ids seen in ``fit``.
    """

    def __init__(
        self,
        alpha=ELO_ALPHA,
        max_iter=100,
        tol=1e-8,
        regularization=0.0,
        gauge_anchor=DEFAULT_ANCHOR,
        roster=None,
    ):
        self.alpha = alpha
        self.max_iter = max_iter
        self.tol = tol
        self.regularization = regularization
        self.gauge_anchor = gauge_anchor
        self.roster = roster

    def _solver(self):
        return SolverConfig(self.alpha, self.max_iter, self.tol, self.regularization, self.gauge_anchor)

    def fit(self, X, y=None):
        first, second, y = check_pairs(X, y)
        matrices = _pairs_to_matrices(first, second, y, self.roster)
        return self.fit_matrices(matrices)

    def fit_matrices(self, matrices: ComparisonMatrices):
        self.matrices_ = matrices
        self.ratings_ = fit_bt_mle(matrices, self._solver())
        self.models_ = np.array([m.id for m in matrices.roster])
        self.index_ = {m: i for i, m in enumerate(self.models_)}
        self.classes_ = np.array([0, 1])
        return self

    def _pair_prob(self, a, b):
        s = self.ratings_.scores
        return np.atleast_1d(win_prob(s[a], s[b], self.alpha))

    def transform(self, models):
        """Ratings for a list of model ids."""
        check_is_fitted(self, "index_")
        return self.ratings_.scores[check_known(np.asarray(models, dtype=str), self.index_)]

    def leaderboard(self):
        """(model, rating) pairs, strongest first."""
        check_is_fitted(self, "ratings_")
        order = np.argsort(-self.ratings_.scores, kind="stable")
        return [(self.models_[i], float(self.ratings_.scores[i])) for i in order]


class EloRanker(_PairClassifier):
    """Sequential Elo. Results depend on the order of the battles."""

    def __init__(self, k_factor=32.0, lambda_scale=400.0, symmetric_update=True, initial_rating=DEFAULT_ANCHOR):
        self.k_factor = k_factor
        self.lambda_scale = lambda_scale
        self.symmetric_update = symmetric_update
        self.initial_rating = initial_rating

    def fit(self, X, y=None):
        for attr in ("scores_", "index_"):
            if hasattr(self, attr):
                delattr(self, attr)
        return self.partial_fit(X, y)

    def partial_fit(self, X, y=None):
        first, second, y = check_pairs(X, y)
        if not hasattr(self, "scores_"):
            self.scores_ = {}
        cfg = EloConfig(self.k_factor, self.lambda_scale, self.symmetric_update)
        for a, b, yi in zip(first, second, y):
            ua = self.scores_.setdefault(a, float(self.initial_rating))
            ub = self.scores_.setdefault(b, float(self.initial_rating))
            self.scores_[a], self.scores_[b] = elo_update(ua, ub, int(yi), cfg)
        self.models_ = np.array(list(self.scores_))
        self.index_ = {m: i for i, m in enumerate(self.models_)}
        self.classes_ = np.array([0, 1])
        return self

    @property
    def ratings_(self) -> RatingVector:
        check_is_fitted(self, "scores_")
        scores = np.array([self.scores_[m] for m in self.models_])
        return RatingVector(list(self.models_), scores, math.log(10) / self.lambda_scale, float(scores.mean()))

    def _pair_prob(self, a, b):
        s = self.ratings_.scores
        return np.atleast_1d(win_prob(s[a], s[b], math.log(10) / self.lambda_scale))


class DiscRanker(_PairClassifier):
    """Two-dimensional disc scores, able to represent cyclic preferences."""

    def __init__(self, iterations=5000, learning_rate=1.0, seed=0, roster=None):
        self.iterations = iterations
        self.learning_rate = learning_rate
        self.seed = seed
        self.roster = roster

    def fit(self, X, y=None):
        first, second, y = check_pairs(X, y)
        return self.fit_matrices(_pairs_to_matrices(first, second, y, self.roster))

    def fit_matrices(self, matrices: ComparisonMatrices):
        self.scores_ = fit_disc(matrices, self.iterations, self.learning_rate, self.seed)
        self.models_ = np.array([m.id for m in matrices.roster])
        self.index_ = {m: i for i, m in enumerate(self.models_)}
        self.classes_ = np.array([0, 1])
        return self

    def _pair_prob(self, a, b):
        u, v = self.scores_.u, self.scores_.v
        return disc_probabilities(u, v)[a, b]

    def transform(self, models):
        """(u, v) coordinates for a list of model ids."""
        check_is_fitted(self, "scores_")
        idx = check_known(np.asarray(models, dtype=str), self.index_)
        return np.column_stack([self.scores_.u[idx], self.scores_.v[idx]])

    def transitivity_report(self, threshold=0.25):
        check_is_fitted(self, "scores_")
        return transitivity_report(self.scores_, threshold)
