"""Ranking-quality metrics and bootstrap stability of fitted ratings."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .core import BattleRecord, ComparisonMatrices, ModelRef, RatingVector, as_roster, matrices_from_indices
from .exceptions import DisconnectedOriginal, InputError, NumericalError, RosterMismatch
from .rating import SolverConfig, fit_bt_mle


@dataclass(frozen=True)
class RankMetrics:
    spearman_rho: float
    kendall_tau: float
    avg_rank_diff: float
    rmse: float

    @property
    def mse(self) -> float:
        return self.rmse**2


def ranks_descending(scores) -> np.ndarray:
    """1-based ranks, highest score first, ties sharing their average rank."""
    return stats.rankdata(-np.asarray(scores, dtype=float), method="average")


_PAIRWISE_LIMIT = 4000


def kendall_tau_b(x, y) -> float:
    """Kendall tau-b. Exact +-1 for identical or reversed orderings.

    Small inputs are counted pairwise in integers with a single square root in
    the denominator; large ones go to scipy's O(n log n) routine.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    if n > _PAIRWISE_LIMIT:
        return float(stats.kendalltau(x, y, variant="b").statistic)
    i, j = np.triu_indices(n, k=1)
    sx = np.sign(x[i] - x[j]).astype(np.int64)
    sy = np.sign(y[i] - y[j]).astype(np.int64)
    s = int(np.sum(sx * sy))
    denom = int(np.count_nonzero(sx)) * int(np.count_nonzero(sy))
    if denom == 0:
        return float("nan")
    return s / np.sqrt(denom)


def _aligned(estimated: RatingVector, golden: RatingVector):
    est_ids = [m.id for m in estimated.roster]
    gold_ids = [m.id for m in golden.roster]
    if sorted(est_ids) != sorted(gold_ids):
        raise RosterMismatch("estimated and golden ratings cover different models")
    if est_ids != gold_ids:
        estimated = estimated.reindex(golden.roster)
    return np.asarray(estimated.scores, float), np.asarray(golden.scores, float)


def rank_metrics(estimated: RatingVector, golden: RatingVector) -> RankMetrics:
    est, gold = _aligned(estimated, golden)
    return rank_metrics_arrays(est, gold)


def rank_metrics_arrays(est, gold) -> RankMetrics:
    est = np.asarray(est, dtype=float)
    gold = np.asarray(gold, dtype=float)
    if est.shape != gold.shape or est.ndim != 1 or len(est) < 2:
        raise InputError("need two equal-length vectors of at least two scores")
    r_est, r_gold = ranks_descending(est), ranks_descending(gold)
    de, dg = r_est - r_est.mean(), r_gold - r_gold.mean()
    sxx, syy = float(de @ de), float(dg @ dg)
    rho = float(de @ dg) / np.sqrt(sxx * syy) if sxx and syy else float("nan")
    tau = kendall_tau_b(est, gold)
    diff = (est - est.mean()) - (gold - gold.mean())
    return RankMetrics(
        spearman_rho=float(np.clip(rho, -1.0, 1.0)),
        kendall_tau=float(np.clip(tau, -1.0, 1.0)),
        avg_rank_diff=float(np.mean(np.abs(r_est - r_gold))),
        rmse=float(np.sqrt(np.mean(diff**2))),
    )


# --- bootstrap ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BootstrapRun:
    """Ratings from every bootstrap round of one dataset (rows = rounds)."""

    label: str
    roster: tuple[ModelRef, ...]
    ratings: np.ndarray
    redraws: int
    seed: int

    @property
    def rounds(self) -> int:
        return self.ratings.shape[0]

    @property
    def variance(self) -> np.ndarray:
        return self.ratings.var(axis=0, ddof=1)

    @property
    def mean(self) -> np.ndarray:
        return self.ratings.mean(axis=0)

    def quantiles(self, qs=(0.025, 0.5, 0.975)) -> np.ndarray:
        return np.quantile(self.ratings, qs, axis=0)

    def __eq__(self, other):
        if not isinstance(other, BootstrapRun):
            return NotImplemented
        return (
            self.label == other.label
            and [m.id for m in self.roster] == [m.id for m in other.roster]
            and np.array_equal(self.ratings, other.ratings)
            and self.redraws == other.redraws
            and self.seed == other.seed
        )

    __hash__ = None


@dataclass(frozen=True)
class BootstrapReport:
    runs: dict[str, BootstrapRun]
    baseline: str | None = None
    candidate: str | None = None
    variance_reduction: np.ndarray | None = field(default=None, compare=False)

    @property
    def rounds(self) -> int:
        return next(iter(self.runs.values())).rounds

    @property
    def mean_variance_reduction(self) -> float | None:
        if self.variance_reduction is None:
            return None
        return float(np.mean(self.variance_reduction))

    def __eq__(self, other):
        if not isinstance(other, BootstrapReport):
            return NotImplemented
        same_reduction = (
            (self.variance_reduction is None and other.variance_reduction is None)
            or (
                self.variance_reduction is not None
                and other.variance_reduction is not None
                and np.array_equal(self.variance_reduction, other.variance_reduction)
            )
        )
        return (
            self.runs == other.runs
            and self.baseline == other.baseline
            and self.candidate == other.candidate
            and same_reduction
        )


def _records_to_arrays(records, roster):
    pos = {m.id: i for i, m in enumerate(roster)}
    winners = np.fromiter((pos[r.winner.id] for r in records), dtype=np.int64, count=len(records))
    losers = np.fromiter((pos[r.loser.id] for r in records), dtype=np.int64, count=len(records))
    return winners, losers


def bootstrap_arrays(
    winners,
    losers,
    roster,
    rounds: int = 100,
    seed: int = 0,
    solver: SolverConfig = SolverConfig(),
    label: str = "data",
    workers: int = 1,
) -> BootstrapRun:
    """Bootstrap BT-MLE ratings from winner/loser index arrays.

    Rounds whose resample cannot be fitted (disconnected, or a model with no
    loss or no win) are redrawn; at most ``10 * rounds`` extra attempts.
    """
    roster = as_roster(roster)
    n = len(roster)
    if rounds < 2:
        raise InputError("need at least two bootstrap rounds")
    # canonical order makes the result independent of input record order
    key = np.lexsort((losers, winners))
    winners = np.asarray(winners, dtype=np.int64)[key]
    losers = np.asarray(losers, dtype=np.int64)[key]
    size = len(winners)
    if size < n:
        raise InputError("fewer records than models")
    original = matrices_from_indices(n, winners, losers, roster)
    if not original.is_connected():
        comps = original.components()
        raise DisconnectedOriginal([[roster[i].id for i in c] for c in comps])

    children = np.random.SeedSequence(seed).spawn(rounds)
    cap = 10 * rounds

    def one_round(r):
        rng = np.random.default_rng(children[r])
        redraws = 0
        while True:
            idx = rng.integers(0, size, size)
            mats = matrices_from_indices(n, winners[idx], losers[idx], roster)
            try:
                return fit_bt_mle(mats, solver).scores, redraws
            except NumericalError:
                redraws += 1
                if redraws > cap:
                    raise

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one_round, range(rounds)))
    else:
        results = [one_round(r) for r in range(rounds)]
    ratings = np.vstack([r[0] for r in results])
    redraws = sum(r[1] for r in results)
    if redraws > cap:
        raise NumericalError(f"more than {cap} bootstrap redraws needed")
    return BootstrapRun(label, roster, ratings, redraws, seed)


def bootstrap_variance(
    records: list[BattleRecord],
    rounds: int = 100,
    seed: int = 0,
    solver: SolverConfig = SolverConfig(),
    label: str = "data",
    roster=None,
) -> BootstrapReport:
    """Single-dataset bootstrap; the report holds one run under ``label``."""
    if roster is None:
        roster = sorted({m.id for r in records for m in (r.model_a, r.model_b)})
    roster = as_roster(roster)
    winners, losers = _records_to_arrays(records, roster)
    run = bootstrap_arrays(winners, losers, roster, rounds, seed, solver, label)
    return BootstrapReport({label: run})


def compare_bootstrap(baseline: BootstrapRun, candidate: BootstrapRun) -> BootstrapReport:
    """Per-model variance reduction ``var(baseline) - var(candidate)``."""
    if [m.id for m in baseline.roster] != [m.id for m in candidate.roster]:
        raise RosterMismatch("bootstrap runs cover different rosters")
    reduction = baseline.variance - candidate.variance
    return BootstrapReport(
        {baseline.label: baseline, candidate.label: candidate},
        baseline=baseline.label,
        candidate=candidate.label,
        variance_reduction=reduction,
    )
