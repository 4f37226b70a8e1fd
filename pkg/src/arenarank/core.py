"""Domain types, battle records and the comparison matrices built from them."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .exceptions import RosterMismatch, SelfBattle, UnknownModel

ELO_ALPHA = math.log(10) / 400
DEFAULT_ANCHOR = 1000.0


@dataclass(frozen=True)
class ModelRef:
    id: str
    display_name: str = field(default="", compare=False)

    def __str__(self):
        return self.id


class Source(str, enum.Enum):
    LIVE = "live"
    SIMULATED = "simulated"
    REPLAY = "replay"


@dataclass(frozen=True)
class BattleRecord:
    """One pairwise outcome. ``outcome`` is 1 when ``model_a`` won."""

    model_a: ModelRef
    model_b: ModelRef
    outcome: int
    timestamp: int | str | None = None
    source: Source = Source.LIVE
    valid: bool = True
    group: str | None = None

    def __post_init__(self):
        if self.model_a == self.model_b:
            raise SelfBattle(-1, self.model_a.id)
        if self.outcome not in (0, 1):
            raise ValueError(f"outcome must be 0 or 1, got {self.outcome!r}")

    @property
    def winner(self) -> ModelRef:
        return self.model_a if self.outcome == 1 else self.model_b

    @property
    def loser(self) -> ModelRef:
        return self.model_b if self.outcome == 1 else self.model_a


def as_roster(models: Iterable[ModelRef | str]) -> tuple[ModelRef, ...]:
    roster = tuple(m if isinstance(m, ModelRef) else ModelRef(str(m)) for m in models)
    ids = [m.id for m in roster]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate model ids in roster")
    return roster


def _roster_ids(roster: Sequence[ModelRef]) -> list[str]:
    return [m.id for m in roster]


@dataclass(frozen=True, eq=False)
class ComparisonMatrices:
    """Symmetric battle counts ``counts`` and directed wins ``wins``.

    ``wins[i, j]`` is the number of times model i beat model j, so
    ``counts = wins + wins.T``.
    """

    roster: tuple[ModelRef, ...]
    counts: np.ndarray
    wins: np.ndarray

    def __post_init__(self):
        n = len(self.roster)
        counts = np.asarray(self.counts, dtype=np.int64)
        wins = np.asarray(self.wins, dtype=np.int64)
        if counts.shape != (n, n) or wins.shape != (n, n):
            raise ValueError(f"matrices must be {n}x{n}")
        if (wins < 0).any():
            raise ValueError("negative win counts")
        if not np.array_equal(counts, wins + wins.T) or np.diag(wins).any():
            raise ValueError("counts must equal wins + wins.T with a zero diagonal")
        counts.setflags(write=False)
        wins.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "wins", wins)

    @classmethod
    def from_wins(cls, roster, wins) -> "ComparisonMatrices":
        wins = np.asarray(wins, dtype=np.int64)
        return cls(as_roster(roster), wins + wins.T, wins)

    @classmethod
    def empty(cls, roster) -> "ComparisonMatrices":
        roster = as_roster(roster)
        n = len(roster)
        z = np.zeros((n, n), dtype=np.int64)
        return cls(roster, z, z.copy())

    @property
    def n_models(self) -> int:
        return len(self.roster)

    @property
    def n_battles(self) -> int:
        return int(self.wins.sum())

    def index(self, model: ModelRef | str) -> int:
        key = model.id if isinstance(model, ModelRef) else model
        for i, m in enumerate(self.roster):
            if m.id == key:
                return i
        raise KeyError(key)

    def components(self) -> list[list[int]]:
        """Connected components of the graph with edges where counts > 0."""
        n = self.n_models
        if n == 0:
            return []
        _, labels = connected_components(self.counts > 0, directed=False)
        comps: dict[int, list[int]] = {}
        for i, lab in enumerate(labels):
            comps.setdefault(int(lab), []).append(i)
        return list(comps.values())

    def is_connected(self) -> bool:
        return len(self.components()) == 1

    def reindex(self, roster: Sequence[ModelRef | str]) -> "ComparisonMatrices":
        """Same data re-expressed in another roster order (same id set)."""
        roster = as_roster(roster)
        if sorted(_roster_ids(roster)) != sorted(_roster_ids(self.roster)):
            raise RosterMismatch("reindex requires the same set of models")
        perm = [self.index(m) for m in roster]
        return ComparisonMatrices.from_wins(roster, self.wins[np.ix_(perm, perm)])

    def __add__(self, other: "ComparisonMatrices") -> "ComparisonMatrices":
        if _roster_ids(self.roster) != _roster_ids(other.roster):
            raise RosterMismatch("cannot add matrices over different rosters")
        return ComparisonMatrices.from_wins(self.roster, self.wins + other.wins)

    def __eq__(self, other):
        if not isinstance(other, ComparisonMatrices):
            return NotImplemented
        return (
            _roster_ids(self.roster) == _roster_ids(other.roster)
            and np.array_equal(self.counts, other.counts)
            and np.array_equal(self.wins, other.wins)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class RatingVector:
    """Elo-unit scores for a roster, pinned so that their mean equals the anchor."""

    roster: tuple[ModelRef, ...]
    scores: np.ndarray
    alpha: float = ELO_ALPHA
    gauge_anchor: float = DEFAULT_ANCHOR

    def __post_init__(self):
        scores = np.array(self.scores, dtype=float)
        if scores.shape != (len(self.roster),):
            raise ValueError("scores and roster lengths differ")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        scores.setflags(write=False)
        object.__setattr__(self, "roster", as_roster(self.roster))
        object.__setattr__(self, "scores", scores)

    @classmethod
    def centered(cls, roster, scores, alpha=ELO_ALPHA, gauge_anchor=DEFAULT_ANCHOR):
        """Shift ``scores`` so their mean sits exactly on ``gauge_anchor``."""
        scores = np.asarray(scores, dtype=float)
        shifted = scores - scores.mean() + gauge_anchor
        # one correction pass absorbs the rounding of the first shift
        shifted = shifted - (shifted.mean() - gauge_anchor)
        return cls(as_roster(roster), shifted, alpha, gauge_anchor)

    def __len__(self):
        return len(self.roster)

    def __getitem__(self, model: ModelRef | str) -> float:
        return float(self.scores[self.index(model)])

    def index(self, model: ModelRef | str) -> int:
        key = model.id if isinstance(model, ModelRef) else model
        for i, m in enumerate(self.roster):
            if m.id == key:
                return i
        raise KeyError(key)

    def as_dict(self) -> dict[str, float]:
        return {m.id: float(s) for m, s in zip(self.roster, self.scores)}

    def is_sorted_descending(self) -> bool:
        return bool(np.all(np.diff(self.scores) <= 0))

    def sorted(self) -> "RatingVector":
        """Copy with roster reordered by descending score (stable)."""
        order = np.argsort(-self.scores, kind="stable")
        return RatingVector(
            tuple(self.roster[i] for i in order),
            self.scores[order],
            self.alpha,
            self.gauge_anchor,
        )

    def reindex(self, roster: Sequence[ModelRef | str]) -> "RatingVector":
        roster = as_roster(roster)
        if sorted(_roster_ids(roster)) != sorted(_roster_ids(self.roster)):
            raise RosterMismatch("reindex requires the same set of models")
        perm = [self.index(m) for m in roster]
        return RatingVector(roster, self.scores[perm], self.alpha, self.gauge_anchor)

    def __eq__(self, other):
        if not isinstance(other, RatingVector):
            return NotImplemented
        return (
            _roster_ids(self.roster) == _roster_ids(other.roster)
            and np.array_equal(self.scores, other.scores)
            and self.alpha == other.alpha
            and self.gauge_anchor == other.gauge_anchor
        )

    __hash__ = None


def same_roster(a: Sequence[ModelRef], b: Sequence[ModelRef]) -> bool:
    return _roster_ids(a) == _roster_ids(b)


def matrices_from_indices(n, winners, losers, roster=None) -> ComparisonMatrices:
    """Tally winner/loser index arrays into matrices (fast path for simulations)."""
    winners = np.asarray(winners, dtype=np.int64)
    losers = np.asarray(losers, dtype=np.int64)
    wins = np.bincount(winners * n + losers, minlength=n * n).reshape(n, n)
    if roster is None:
        roster = [f"m{i:03d}" for i in range(n)]
    return ComparisonMatrices.from_wins(roster, wins)


def build_matrices(
    records: Sequence[BattleRecord], roster: Sequence[ModelRef | str]
) -> ComparisonMatrices:
    """Aggregate records into count and win matrices indexed by ``roster`` order."""
    roster = as_roster(roster)
    pos = {m.id: i for i, m in enumerate(roster)}
    n = len(roster)
    winners = np.empty(len(records), dtype=np.int64)
    losers = np.empty(len(records), dtype=np.int64)
    for k, rec in enumerate(records):
        a, b = rec.model_a.id, rec.model_b.id
        if a not in pos:
            raise UnknownModel(k, a)
        if b not in pos:
            raise UnknownModel(k, b)
        if a == b:
            raise SelfBattle(k, a)
        if not rec.valid:
            raise ValueError(f"record {k} is marked invalid")
        ia, ib = pos[a], pos[b]
        winners[k], losers[k] = (ia, ib) if rec.outcome == 1 else (ib, ia)
    return matrices_from_indices(n, winners, losers, roster)


def payoff(matrices: ComparisonMatrices) -> np.ma.MaskedArray:
    """Empirical win rates; cells with no battles (and the diagonal) are masked."""
    counts = matrices.counts
    undefined = counts == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        rates = np.where(undefined, 0.0, matrices.wins / np.where(undefined, 1, counts))
    return np.ma.MaskedArray(rates, mask=undefined)


def roster_from_records(records: Iterable[BattleRecord]) -> tuple[ModelRef, ...]:
    """Models in order of first appearance."""
    seen: dict[str, ModelRef] = {}
    for rec in records:
        for m in (rec.model_a, rec.model_b):
            seen.setdefault(m.id, m)
    return tuple(seen.values())
