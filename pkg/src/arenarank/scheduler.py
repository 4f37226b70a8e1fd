"""Battle scheduling: proximity sampling and placement matches for new models."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .core import ComparisonMatrices, ModelRef, RatingVector, same_roster
from .exceptions import (
    AlreadyFinished,
    BadRoundTotal,
    InputError,
    RosterMismatch,
    RosterNotSorted,
    RosterTooSmall,
)


@dataclass(frozen=True)
class ProximityConfig:
    h: float = 150.0
    tau: float = 1.0
    sample_size_k: int = 2
    min_proximity_n_m: int = 3

    def __post_init__(self):
        if not self.h > 0 or not self.tau > 0:
            raise InputError("h and tau must be positive")
        if self.sample_size_k < 2 or self.min_proximity_n_m < 2:
            raise InputError("sample_size_k and min_proximity_n_m must be >= 2")


def _check_inputs(theta: RatingVector, matrices: ComparisonMatrices):
    if not same_roster(theta.roster, matrices.roster):
        raise RosterMismatch("theta and matrices must share one roster order")
    if len(theta.roster) < 2:
        raise RosterTooSmall("proximity sampling needs at least two models")
    if not theta.is_sorted_descending():
        raise RosterNotSorted("roster must be sorted by score, highest first")


def proximity_sets(scores, h: float, n_m: int) -> np.ndarray:
    """Row i marks the proximity interval of model i (model i included).

    Models within ``h`` when there are at least ``n_m`` of them, otherwise the
    ``n_m - 1`` closest others plus model i itself.
    """
    u = np.asarray(scores, dtype=float)
    n = len(u)
    gaps = np.abs(u[:, None] - u[None, :])
    within = gaps < h
    masks = within.copy()
    need = n_m - 1
    for i in np.flatnonzero(within.sum(axis=1) < n_m):
        d = gaps[i].copy()
        d[i] = np.inf
        closest = np.argsort(d, kind="stable")[: min(need, n - 1)]
        masks[i] = False
        masks[i, closest] = True
        masks[i, i] = True
    return masks


class ProximitySampler:
    """Proximity sampling with the neighbourhoods precomputed for fixed ratings.

    The battle counts change between calls, the ratings do not, so repeated
    draws (simulation) reuse the neighbourhood masks.
    """

    def __init__(self, scores, cfg: ProximityConfig):
        u = np.asarray(scores, dtype=float)
        if len(u) < 2:
            raise RosterTooSmall("proximity sampling needs at least two models")
        if np.any(np.diff(u) > 0):
            raise RosterNotSorted("roster must be sorted by score, highest first")
        self.scores = u
        self.cfg = cfg
        self.delta = proximity_sets(u, cfg.h, cfg.min_proximity_n_m)
        self._others = self.delta & ~np.eye(len(u), dtype=bool)
        self._close = np.abs(u[:, None] - u[None, :]) < cfg.h

    def initial_weights(self, counts) -> np.ndarray:
        counts = np.asarray(counts)
        s_max = counts.max()
        if s_max == 0:
            return np.ones(len(self.scores))
        n_min = np.where(self._others, counts, np.iinfo(np.int64).max).min(axis=1)
        return 1.0 - n_min / s_max

    def sample(self, counts, rng: np.random.Generator) -> list[int]:
        counts = np.asarray(counts)
        n = len(self.scores)
        w = self.initial_weights(counts)
        total = w.sum()
        # every model already has its neighbourhood maxed out: fall back to uniform
        first = int(rng.choice(n, p=w / total)) if total > 0 else int(rng.integers(n))
        chosen = [first]
        remaining = self._others[first].copy()
        while len(chosen) < self.cfg.sample_size_k and remaining.any():
            cand = np.flatnonzero(remaining)
            ecc = counts[np.ix_(cand, chosen)].min(axis=1)
            logits = -ecc / self.cfg.tau
            prob = np.exp(logits - logits.max())
            prob /= prob.sum()
            new = int(cand[rng.choice(len(cand), p=prob)])
            chosen.append(new)
            remaining[new] = False
            remaining &= self._close[new]
        return chosen


def initial_weights(theta: RatingVector, matrices: ComparisonMatrices, cfg: ProximityConfig) -> np.ndarray:
    """Initial per-model sampling weights ``1 - PCC_i / max(N)``.

    All ones when no battle has been played yet.
    """
    _check_inputs(theta, matrices)
    return ProximitySampler(theta.scores, cfg).initial_weights(matrices.counts)


def proximity_sample(
    theta: RatingVector,
    matrices: ComparisonMatrices,
    cfg: ProximityConfig,
    rng: np.random.Generator | int | None = None,
) -> list[ModelRef]:
    """Draw one battle set of 2..K models, in selection order."""
    _check_inputs(theta, matrices)
    rng = np.random.default_rng(rng)
    idx = ProximitySampler(theta.scores, cfg).sample(matrices.counts, rng)
    return [theta.roster[i] for i in idx]


# --- placement matches -----------------------------------------------------

@dataclass(frozen=True)
class PlacementConfig:
    battles_per_round: int = 10
    winrate_band: float = 0.05
    min_interval: int = 3
    max_offset: float = 150.0  # Elo headroom past the strongest/weakest roster model
    estimator: str = "last_round"  # or "all_rounds": 1-D MLE over every round

    def __post_init__(self):
        if self.battles_per_round < 1:
            raise InputError("battles_per_round must be >= 1")
        if not 0 < self.winrate_band < 0.5:
            raise InputError("winrate_band must lie in (0, 0.5)")
        if self.min_interval < 2:
            raise InputError("min_interval must be >= 2")
        if not self.max_offset > 0:
            raise InputError("max_offset must be positive")
        if self.estimator not in ("last_round", "all_rounds"):
            raise InputError(f"unknown estimator {self.estimator!r}")


@dataclass(frozen=True)
class PlacementRound:
    opponent: ModelRef
    wins: int
    losses: int


@dataclass(frozen=True)
class PlacementState:
    """Binary-search interval over 1-based ranks (1 = strongest)."""

    lo: int
    hi: int
    rounds: tuple[PlacementRound, ...] = ()
    finished: bool = False
    final_rating: float | None = None
    initial_width: int = field(default=0)
    model: str = ""

    def __post_init__(self):
        if self.initial_width == 0:
            object.__setattr__(self, "initial_width", self.hi - self.lo + 1)

    @classmethod
    def start(cls, roster_size: int, lo: int = 1, hi: int | None = None, model: str = ""):
        hi = roster_size if hi is None else hi
        if not 1 <= lo < hi <= roster_size:
            raise InputError(f"need 1 <= lo < hi <= {roster_size}, got [{lo}, {hi}]")
        return cls(lo=lo, hi=hi, model=model)

    @property
    def max_rounds(self) -> int:
        return math.ceil(math.log2(self.initial_width)) + 1


def _check_sorted(theta: RatingVector):
    if not theta.is_sorted_descending():
        raise RosterNotSorted("roster must be sorted by score, highest first")


def next_placement_opponent(state: PlacementState, theta: RatingVector) -> ModelRef:
    if state.finished:
        raise AlreadyFinished("placement session is finished")
    _check_sorted(theta)
    return theta.roster[(state.lo + state.hi) // 2 - 1]


def winrate_to_offset(wr: float, lambda_scale: float = 400.0) -> float:
    """Rating gap implied by a win rate (inverse of the Elo curve); +-inf at 0/1."""
    if wr <= 0.0:
        return -math.inf
    if wr >= 1.0:
        return math.inf
    return lambda_scale / math.log(10) * math.log(wr / (1.0 - wr))


def placement_step(
    state: PlacementState,
    theta: RatingVector,
    round_result: tuple[int, int],
    cfg: PlacementConfig = PlacementConfig(),
) -> PlacementState:
    """Record one round of T battles against the interval midpoint."""
    if state.finished:
        raise AlreadyFinished("placement session is finished")
    _check_sorted(theta)
    wins, losses = (int(v) for v in round_result)
    if wins < 0 or losses < 0 or wins + losses != cfg.battles_per_round:
        raise BadRoundTotal(
            f"round must total {cfg.battles_per_round} battles, got {wins}+{losses}"
        )
    mid = (state.lo + state.hi) // 2
    opponent = theta.roster[mid - 1]
    rounds = state.rounds + (PlacementRound(opponent, wins, losses),)
    wr = wins / (wins + losses)

    def finish(lo, hi):
        # the estimate may not leave the last bracket, except past the ends of the roster
        upper = theta.scores[lo - 1] + (cfg.max_offset if lo == 1 else 0.0)
        lower = theta.scores[hi - 1] - (cfg.max_offset if hi == len(theta) else 0.0)
        if cfg.estimator == "all_rounds":
            rating = _rounds_mle(rounds, theta, lower, upper)
        else:
            rating = float(theta.scores[mid - 1]) + winrate_to_offset(wr)
        rating = float(min(max(rating, lower), upper))
        return replace(state, lo=lo, hi=hi, rounds=rounds, finished=True, final_rating=rating)

    if abs(wr - 0.5) <= cfg.winrate_band:
        return finish(state.lo, state.hi)
    lo, hi = (state.lo, mid) if wr > 0.5 else (mid, state.hi)
    if hi - lo + 1 < cfg.min_interval:
        return finish(lo, hi)
    return replace(state, lo=lo, hi=hi, rounds=rounds)


def _rounds_mle(rounds, theta: RatingVector, lower: float, upper: float) -> float:
    """Rating maximising the likelihood of every placement round, within bounds."""
    opp = np.array([theta[r.opponent] for r in rounds])
    wins = np.array([r.wins for r in rounds], dtype=float)
    games = np.array([r.wins + r.losses for r in rounds], dtype=float)
    alpha = theta.alpha

    def score(x):
        return float(np.sum(wins - games / (1.0 + np.exp(-alpha * (x - opp)))))

    if score(lower) <= 0:
        return lower
    if score(upper) >= 0:
        return upper
    return float(brentq(score, lower, upper, xtol=1e-9))


def placement_rank(final_rating: float, theta: RatingVector) -> int:
    """1-based rank the placed model would take in ``theta``'s roster."""
    return int(np.sum(theta.scores > final_rating)) + 1


def run_placement(
    theta: RatingVector,
    play_round,
    cfg: PlacementConfig = PlacementConfig(),
    lo: int = 1,
    hi: int | None = None,
    model: str = "",
) -> PlacementState:
    """Drive a session to completion. ``play_round(opponent)`` returns (wins, losses)."""
    state = PlacementState.start(len(theta), lo, hi, model)
    while not state.finished:
        opponent = next_placement_opponent(state, theta)
        state = placement_step(state, theta, play_round(opponent), cfg)
    return state
