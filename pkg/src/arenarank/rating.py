"""Win probabilities, online Elo updates and the batch Bradley-Terry MLE.

The solver works in natural units ``x = alpha * u`` and maximises

    l(x) = sum_ij W_ij * log sigmoid(x_i - x_j)

by damped Newton steps restricted to the subspace orthogonal to the all-ones
vector (the likelihood is flat along it).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.special import expit, log_expit

from .core import DEFAULT_ANCHOR, ELO_ALPHA, ComparisonMatrices, RatingVector
from .exceptions import ConvergenceFailure, DisconnectedGraph, InputError, NoFiniteMaximizer


@dataclass(frozen=True)
class EloConfig:
    k_factor: float = 32.0
    lambda_scale: float = 400.0
    symmetric_update: bool = True

    def __post_init__(self):
        if not self.k_factor > 0 or not self.lambda_scale > 0:
            raise InputError("k_factor and lambda_scale must be positive")


@dataclass(frozen=True)
class SolverConfig:
    alpha: float = ELO_ALPHA
    max_iterations: int = 100
    tolerance: float = 1e-8
    regularization: float = 0.0
    gauge_anchor: float = DEFAULT_ANCHOR

    def __post_init__(self):
        if not self.alpha > 0:
            raise InputError("alpha must be positive")
        if not self.tolerance > 0 or self.max_iterations < 1:
            raise InputError("tolerance must be > 0 and max_iterations >= 1")
        if self.regularization < 0:
            raise InputError("regularization must be nonnegative")


def win_prob(u_i, u_j, alpha: float = ELO_ALPHA):
    """P(i beats j) = 1 / (1 + exp(-alpha (u_i - u_j))). Works elementwise."""
    if not alpha > 0:
        raise InputError("alpha must be positive")
    p = expit(alpha * (np.asarray(u_i, dtype=float) - np.asarray(u_j, dtype=float)))
    return float(p) if np.ndim(p) == 0 else p


def elo_update(u_i: float, u_j: float, outcome: int, cfg: EloConfig = EloConfig()):
    """One Elo step after i played j; ``outcome`` is 1 if i won.

    ``outcome`` may also be a real expected score in [0, 1].
    """
    p = win_prob(u_i, u_j, math.log(10) / cfg.lambda_scale)
    delta = cfg.k_factor * (outcome - p)
    return u_i + delta, (u_j - delta if cfg.symmetric_update else u_j)


def elo_ratings(records, roster, cfg: EloConfig = EloConfig(), initial: float = DEFAULT_ANCHOR):
    """Sequential Elo over a record stream. Result depends on record order."""
    scores = {m.id if hasattr(m, "id") else str(m): float(initial) for m in roster}
    for rec in records:
        a, b = rec.model_a.id, rec.model_b.id
        scores[a], scores[b] = elo_update(scores[a], scores[b], rec.outcome, cfg)
    ids = list(scores)
    return ids, np.array([scores[i] for i in ids])


# --- likelihood ------------------------------------------------------------

def log_likelihood(scores, matrices: ComparisonMatrices, alpha: float = ELO_ALPHA) -> float:
    """Bernoulli log-likelihood of the observed wins at Elo-unit ``scores``."""
    x = alpha * np.asarray(scores, dtype=float)
    wins = matrices.wins
    mask = wins > 0
    diff = x[:, None] - x[None, :]
    return float(np.sum(wins[mask] * log_expit(diff[mask])))


def log_likelihood_gradient(scores, matrices: ComparisonMatrices, alpha: float = ELO_ALPHA):
    """d l / d u (Elo units)."""
    return alpha * _natural_gradient(alpha * np.asarray(scores, dtype=float), matrices)


def _natural_gradient(x, matrices):
    p = expit(x[:, None] - x[None, :])
    resid = matrices.wins - matrices.counts * p
    return resid.sum(axis=1)


def _natural_hessian_neg(x, counts):
    """Negative Hessian in natural units: the Laplacian with weights N p (1-p)."""
    p = expit(x[:, None] - x[None, :])
    w = counts * p * (1.0 - p)
    np.fill_diagonal(w, 0.0)
    return np.diag(w.sum(axis=1)) - w


# --- identifiability -------------------------------------------------------

def check_identifiable(matrices: ComparisonMatrices) -> None:
    """Raise if the MLE is unidentifiable (disconnected) or infinite.

    A finite maximiser exists iff the directed "i beat j" graph is strongly
    connected, which in particular rules out models with only wins or only
    losses.
    """
    comps = matrices.components()
    if len(comps) > 1:
        raise DisconnectedGraph([[matrices.roster[i].id for i in c] for c in comps])
    n_strong, labels = connected_components(matrices.wins > 0, directed=True, connection="strong")
    if n_strong > 1:
        # report models outside the largest strongly connected component
        sizes = np.bincount(labels)
        main = int(np.argmax(sizes))
        raise NoFiniteMaximizer([matrices.roster[i].id for i in np.flatnonzero(labels != main)])


def _regularized_wins(matrices: ComparisonMatrices, pseudo: float) -> np.ndarray:
    wins = matrices.wins.astype(float)
    if pseudo > 0:
        wins = wins + pseudo * (matrices.counts > 0)
    return wins


def fit_bt_mle(matrices: ComparisonMatrices, cfg: SolverConfig = SolverConfig()) -> RatingVector:
    """Maximum-likelihood Bradley-Terry ratings on the Elo scale.

    Raises :class:`DisconnectedGraph` or :class:`NoFiniteMaximizer` when the
    data cannot pin down finite relative ratings (``regularization`` only helps
    with the latter).
    """
    n = matrices.n_models
    if n < 2:
        raise InputError("need at least two models")
    if matrices.n_battles == 0:
        raise InputError("need at least one battle")
    if cfg.regularization == 0:
        check_identifiable(matrices)
    elif not matrices.is_connected():
        comps = matrices.components()
        raise DisconnectedGraph([[matrices.roster[i].id for i in c] for c in comps])

    wins = _regularized_wins(matrices, cfg.regularization)
    counts = wins + wins.T
    x = _newton(wins, counts, cfg)
    return RatingVector.centered(matrices.roster, x / cfg.alpha, cfg.alpha, cfg.gauge_anchor)


def _objective(x, wins):
    mask = wins > 0
    diff = x[:, None] - x[None, :]
    return float(np.sum(wins[mask] * log_expit(diff[mask])))


def _gradient(x, wins, counts):
    p = expit(x[:, None] - x[None, :])
    return (wins - counts * p).sum(axis=1)


def _newton(wins, counts, cfg: SolverConfig):
    n = wins.shape[0]
    x = np.zeros(n)
    ones = np.full((n, n), 1.0 / n)
    f = _objective(x, wins)
    for _ in range(cfg.max_iterations):
        g = _gradient(x, wins, counts)
        if np.max(np.abs(g)) <= cfg.tolerance:
            return x
        # the gradient sums to zero, so adding the rank-one ones/n term
        # leaves the step orthogonal to the flat gauge direction
        hess = _natural_hessian_neg(x, counts)
        try:
            step = np.linalg.solve(hess + ones, g)
            if not np.all(np.isfinite(step)) or g @ step <= 0:
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            step = g / max(np.max(np.abs(np.diag(hess))), 1.0)
        step -= step.mean()
        t = 1.0
        gnorm = np.max(np.abs(g))
        flat = 16 * np.finfo(float).eps * max(abs(f), 1.0)
        accepted = False
        while t >= 1e-10:
            x_new = x + t * step
            f_new = _objective(x_new, wins)
            if f_new >= f + 1e-4 * t * (g @ step):
                accepted = True
                break
            # near the optimum the objective stops resolving the gain; the
            # gradient still does
            if abs(f_new - f) <= flat and np.max(np.abs(_gradient(x_new, wins, counts))) < gnorm:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        x, f = x_new, max(f, f_new)
    g = _gradient(x, wins, counts)
    # tolerance is absolute; at very large counts float rounding sets a floor
    floor = 64 * np.finfo(float).eps * float(counts.sum())
    if np.max(np.abs(g)) <= max(cfg.tolerance, floor):
        return x
    raise ConvergenceFailure(
        f"gradient max-norm {np.max(np.abs(g)):.3g} above tolerance after "
        f"{cfg.max_iterations} iterations"
    )
