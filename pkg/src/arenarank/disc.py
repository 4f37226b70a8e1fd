"""Disc decomposition: two-dimensional scores with P(i beats j) = sigmoid(u_i v_j - v_i u_j).

The cross product ``u_i v_j - v_i u_j`` is a 2x2 determinant, so predictions are
unchanged by any common linear map of determinant one (rotations, squeezes,
shears). Reported scores are put in a canonical gauge: principal axis of the
cloud along u, mean v positive and rescaled to 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

from .core import ComparisonMatrices, ModelRef
from .exceptions import DisconnectedGraph, InputError


@dataclass(frozen=True, eq=False)
class DiscScores:
    roster: tuple[ModelRef, ...]
    u: np.ndarray
    v: np.ndarray
    final_loss: float
    iterations: int
    loss_trace: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.u) != len(self.roster) or len(self.v) != len(self.roster):
            raise ValueError("u, v and roster lengths differ")
        if len(self.roster) == 0:
            raise ValueError("empty roster")

    def win_matrix(self) -> np.ndarray:
        """Predicted P(i beats j) for every ordered pair."""
        return disc_probabilities(self.u, self.v)


def disc_probabilities(u, v) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return expit(np.outer(u, v) - np.outer(v, u))


def disc_loss(u, v, wins) -> float:
    """Mean binary cross-entropy over observed battles."""
    wins = np.asarray(wins, dtype=float)
    total = wins.sum()
    s = np.outer(u, v) - np.outer(v, u)
    mask = wins > 0
    return float(-np.sum(wins[mask] * log_expit(s[mask])) / total)


def disc_gradient(u, v, wins):
    """Gradient of :func:`disc_loss` with respect to (u, v)."""
    wins = np.asarray(wins, dtype=float)
    total = wins.sum()
    s = np.outer(u, v) - np.outer(v, u)
    g = -wins * expit(-s) / total  # d loss / d s_ij
    grad_u = g @ v - g.T @ v
    grad_v = g.T @ u - g @ u
    return grad_u, grad_v


def fit_disc(
    matrices: ComparisonMatrices,
    iterations: int = 5000,
    learning_rate: float = 1.0,
    seed: int = 0,
    checkpoint_every: int = 100,
) -> DiscScores:
    """Fit disc scores by plain gradient descent from a small random start.

    The step is halved whenever a checkpoint shows the loss went up, so the
    recorded losses never increase.
    """
    n = matrices.n_models
    if n < 3:
        raise InputError("disc decomposition needs at least three models")
    if matrices.n_battles == 0:
        raise InputError("no battles to fit")
    if not matrices.is_connected():
        comps = matrices.components()
        raise DisconnectedGraph([[matrices.roster[i].id for i in c] for c in comps])
    if iterations < 1 or not learning_rate > 0:
        raise InputError("iterations must be >= 1 and learning_rate > 0")

    wins = matrices.wins.astype(float)
    rng = np.random.default_rng(seed)
    u = rng.normal(scale=0.1, size=n)
    v = rng.normal(scale=0.1, size=n)
    lr = learning_rate
    best = (u.copy(), v.copy(), disc_loss(u, v, wins))
    trace = [best[2]]
    for it in range(1, iterations + 1):
        gu, gv = disc_gradient(u, v, wins)
        u = u - lr * gu
        v = v - lr * gv
        if it % checkpoint_every == 0 or it == iterations:
            loss = disc_loss(u, v, wins)
            if loss > best[2]:
                u, v = best[0].copy(), best[1].copy()
                lr *= 0.5
            else:
                best = (u.copy(), v.copy(), loss)
            trace.append(best[2])
    u, v = canonical_gauge(best[0], best[1])
    return DiscScores(matrices.roster, u, v, best[2], iterations, tuple(trace))


def rotate(u, v, angle: float):
    c, s = np.cos(angle), np.sin(angle)
    return c * u - s * v, s * u + c * v


def canonical_gauge(u, v):
    """Rotate the principal axis onto u, flip so mean v >= 0, squeeze to mean v = 1."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    pts = np.column_stack([u, v])
    centered = pts - pts.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    axis = vt[0]
    u2, v2 = rotate(u, v, -np.arctan2(axis[1], axis[0]))
    if v2.mean() < 0:
        u2, v2 = -u2, -v2
    m = v2.mean()
    if m > 1e-12:
        u2, v2 = u2 * m, v2 / m
    return u2, v2


@dataclass(frozen=True)
class TransitivityReport:
    mean_v: float
    std_v: float
    dispersion: float  # std(v) / |mean(v)|
    transitive: bool


def transitivity_report(scores: DiscScores, threshold: float = 0.25) -> TransitivityReport:
    """Spread of the v coordinate; a small spread means u alone explains the data."""
    u, v = canonical_gauge(scores.u, scores.v)
    mean_v = float(v.mean())
    std_v = float(v.std())
    if std_v == 0.0:
        dispersion = 0.0
    elif mean_v == 0.0:
        dispersion = float("inf")
    else:
        dispersion = std_v / abs(mean_v)
    return TransitivityReport(mean_v, std_v, dispersion, dispersion < threshold)
