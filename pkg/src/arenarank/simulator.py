"""Synthetic battles and the experiment protocols built on them.

* :func:`threshold_sweep` - rating recovery versus proximity threshold and budget.
* :func:`fim_sweep` - total variance ``tr[I^-1]`` versus threshold, either with
  the ideal even allocation or with counts produced by repeated proximity draws.
* :func:`replay_experiment` - chronological replay of a battle log with cold
  start, placement matches for newcomers and periodic refits.
* :func:`bootstrap_experiment` - rating variance of proximity versus uniform
  datasets of the same size.
"""
from __future__ import annotations

import csv
import io
import math
from collections import defaultdict, deque
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Iterable, Sequence

import numpy as np

from .analysis import BootstrapReport, bootstrap_arrays, compare_bootstrap, rank_metrics, rank_metrics_arrays
from .core import (
    ELO_ALPHA,
    BattleRecord,
    ComparisonMatrices,
    ModelRef,
    RatingVector,
    Source,
    as_roster,
    build_matrices,
    matrices_from_indices,
)
from .exceptions import ArenaError, DatasetUnavailable, EmptyProximitySet, InputError, NumericalError
from .information import ideal_allocation, trace_inv_fim
from .rating import SolverConfig, fit_bt_mle, win_prob
from .scheduler import PlacementConfig, PlacementState, ProximityConfig, ProximitySampler, placement_step


@dataclass(frozen=True)
class SyntheticWorld:
    """Golden ratings (sorted, strongest first) plus the noise level of proximity data."""

    golden: RatingVector
    seed: int = 0
    noise_fraction: float = 0.05

    def __post_init__(self):
        if not 0 <= self.noise_fraction < 1:
            raise InputError("noise_fraction must lie in [0, 1)")
        if not self.golden.is_sorted_descending():
            object.__setattr__(self, "golden", self.golden.sorted())

    @classmethod
    def uniform(
        cls,
        n_models: int,
        low: float = 400.0,
        high: float = 1400.0,
        seed: int = 0,
        noise_fraction: float = 0.05,
        alpha: float = ELO_ALPHA,
    ) -> "SyntheticWorld":
        """Golden scores drawn uniformly on (low, high)."""
        rng = np.random.default_rng(seed)
        scores = rng.uniform(low, high, n_models)
        while np.any(scores <= low):  # keep the interval open
            bad = scores <= low
            scores[bad] = rng.uniform(low, high, bad.sum())
        scores = np.sort(scores)[::-1]
        roster = [f"m{i:03d}" for i in range(n_models)]
        golden = RatingVector(roster, scores, alpha, float(scores.mean()))
        return cls(golden, seed, noise_fraction)

    @property
    def n_models(self) -> int:
        return len(self.golden)

    @property
    def scores(self) -> np.ndarray:
        return self.golden.scores

    @property
    def span(self) -> float:
        return float(self.scores.max() - self.scores.min())


@dataclass(frozen=True)
class Strategy:
    kind: str  # "proximity" | "uniform"
    h: float | None = None

    def __post_init__(self):
        if self.kind not in ("proximity", "uniform"):
            raise InputError(f"unknown strategy {self.kind!r}")
        if self.kind == "proximity" and not (self.h is not None and self.h > 0):
            raise InputError("proximity strategy needs h > 0")

    @classmethod
    def proximity(cls, h: float) -> "Strategy":
        return cls("proximity", float(h))

    @classmethod
    def uniform(cls) -> "Strategy":
        return cls("uniform")

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        """``"uniform"`` or ``"proximity:150"``."""
        kind, _, h = text.partition(":")
        return cls(kind, float(h)) if h else cls(kind)

    def __str__(self):
        return self.kind if self.h is None else f"{self.kind}:{self.h:g}"


def _cell_seed(seed: int, *keys) -> np.random.SeedSequence:
    ints = [int(seed)]
    for k in keys:
        ints.append(int(round(float(k) * 1000)) if isinstance(k, float) else int(k))
    return np.random.SeedSequence([abs(i) for i in ints])


def _all_pairs(n):
    i, j = np.triu_indices(n, k=1)
    return i, j


def draw_pairs(world: SyntheticWorld, strategy: Strategy, budget: int, rng: np.random.Generator):
    """Index arrays (a, b) of ``budget`` battles, orientation randomised.

    Proximity draws come evenly from pairs closer than ``h``; a
    ``noise_fraction`` share is drawn from all pairs instead.
    """
    if budget < 1:
        raise InputError("budget must be >= 1")
    n = world.n_models
    all_i, all_j = _all_pairs(n)
    if strategy.kind == "uniform":
        pick = rng.integers(0, len(all_i), budget)
        a, b = all_i[pick], all_j[pick]
    else:
        u = world.scores
        close = np.abs(u[all_i] - u[all_j]) < strategy.h
        n_noise = int(round(world.noise_fraction * budget))
        n_prox = budget - n_noise
        if n_prox > 0 and not close.any():
            raise EmptyProximitySet(f"no pair of models lies within h={strategy.h:g}")
        prox_i, prox_j = all_i[close], all_j[close]
        pick = rng.integers(0, len(prox_i), n_prox)
        noise = rng.integers(0, len(all_i), n_noise)
        a = np.concatenate([prox_i[pick], all_i[noise]])
        b = np.concatenate([prox_j[pick], all_j[noise]])
        order = rng.permutation(budget)
        a, b = a[order], b[order]
    flip = rng.random(budget) < 0.5
    return np.where(flip, b, a), np.where(flip, a, b)


def sample_outcomes(world: SyntheticWorld, a, b, rng: np.random.Generator) -> np.ndarray:
    """1 where model ``a`` beats ``b``, drawn from the golden win probabilities."""
    p = win_prob(world.scores[a], world.scores[b], world.golden.alpha)
    return (rng.random(np.shape(a)) < p).astype(np.int8)


def sample_outcome(world: SyntheticWorld, i: int, j: int, rng: np.random.Generator, timestamp=None) -> BattleRecord:
    if i == j:
        raise InputError("a model cannot battle itself")
    y = int(sample_outcomes(world, np.array([i]), np.array([j]), rng)[0])
    roster = world.golden.roster
    return BattleRecord(roster[i], roster[j], y, timestamp, Source.SIMULATED)


def _to_records(world, a, b, y, start=0):
    roster = world.golden.roster
    return [
        BattleRecord(roster[ai], roster[bi], int(yi), start + k, Source.SIMULATED)
        for k, (ai, bi, yi) in enumerate(zip(a.tolist(), b.tolist(), y.tolist()))
    ]


def generate_battles(world: SyntheticWorld, strategy: Strategy, budget: int, rng) -> list[BattleRecord]:
    rng = np.random.default_rng(rng)
    a, b = draw_pairs(world, strategy, budget, rng)
    y = sample_outcomes(world, a, b, rng)
    return _to_records(world, a, b, y)


def _matrices(world, a, b, y) -> ComparisonMatrices:
    winners = np.where(y == 1, a, b)
    losers = np.where(y == 1, b, a)
    return matrices_from_indices(world.n_models, winners, losers, world.golden.roster)


# --- sweep results -------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    h: float
    budget: int
    strategy: str
    seed: int
    rmse: float = math.nan
    mse: float = math.nan
    kendall_tau: float = math.nan
    spearman_rho: float = math.nan
    avg_rank_diff: float = math.nan
    trace_inv_fim: float = math.inf
    connected: bool = False
    status: str = "ok"


@dataclass
class SweepResult:
    rows: list[SweepRow]
    config: dict = field(default_factory=dict)

    def filter(self, **conds) -> list[SweepRow]:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in conds.items())]

    def mean_over_seeds(self, column: str, **conds) -> dict[float, float]:
        """Mean of ``column`` per h over rows matching ``conds``."""
        groups: dict[float, list[float]] = defaultdict(list)
        for r in self.filter(**conds):
            groups[r.h].append(getattr(r, column))
        return {h: float(np.mean(v)) for h, v in sorted(groups.items())}

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("# " + " ".join(f"{k}={v}" for k, v in self.config.items()) + "\n")
        writer = csv.writer(buf)
        names = [f.name for f in fields(SweepRow)]
        writer.writerow(names)
        for r in self.rows:
            writer.writerow([_fmt(getattr(r, n)) for n in names])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _evaluate_cell(world, matrices, row: SweepRow, solver: SolverConfig) -> SweepRow:
    connected = matrices.is_connected()
    tr = trace_inv_fim(world.scores, matrices.counts, world.golden.alpha)
    try:
        est = fit_bt_mle(matrices, solver)
    except ArenaError as exc:
        return replace(row, trace_inv_fim=tr, connected=connected, status=f"{type(exc).__name__}")
    m = rank_metrics_arrays(est.scores, world.scores)
    return replace(
        row,
        rmse=m.rmse,
        mse=m.mse,
        kendall_tau=m.kendall_tau,
        spearman_rho=m.spearman_rho,
        avg_rank_diff=m.avg_rank_diff,
        trace_inv_fim=tr,
        connected=connected,
    )


def threshold_cell(world, h, budget, strategy_kind, seed, solver=SolverConfig()) -> SweepRow:
    strategy = Strategy.uniform() if strategy_kind == "uniform" else Strategy.proximity(h)
    code = 0 if strategy_kind == "proximity" else 1
    rng = np.random.default_rng(_cell_seed(seed, world.seed, float(h), int(budget), code))
    row = SweepRow(h=float(h), budget=int(budget), strategy=strategy_kind, seed=int(seed))
    try:
        a, b = draw_pairs(world, strategy, int(budget), rng)
    except EmptyProximitySet:
        return replace(row, status="EmptyProximitySet")
    y = sample_outcomes(world, a, b, rng)
    return _evaluate_cell(world, _matrices(world, a, b, y), row, solver)


def threshold_sweep(
    world: SyntheticWorld,
    h_values: Sequence[float],
    budgets: Sequence[int],
    strategies: Sequence[str] = ("proximity",),
    seeds: Sequence[int] = (0,),
    solver: SolverConfig = SolverConfig(),
) -> SweepResult:
    """Fit BT-MLE on simulated data for every (h, budget, strategy, seed) cell.

    Cells that cannot be fitted keep NaN metrics and name the failure in
    ``status``; the sweep carries on.
    """
    rows = [
        threshold_cell(world, h, c, s, seed, solver)
        for c in budgets
        for s in strategies
        for h in h_values
        for seed in seeds
    ]
    config = dict(
        experiment="threshold_sweep",
        models=world.n_models,
        world_seed=world.seed,
        noise_fraction=world.noise_fraction,
        seeds=",".join(map(str, seeds)),
    )
    return SweepResult(rows, config)


def practical_counts(scores, h: float, budget: int, rng, tau: float = 1.0, n_m: int = 3) -> np.ndarray:
    """Pair counts from ``budget`` rounds of two-model proximity sampling."""
    sampler = ProximitySampler(scores, ProximityConfig(h=h, tau=tau, sample_size_k=2, min_proximity_n_m=n_m))
    n = len(scores)
    counts = np.zeros((n, n), dtype=np.int64)
    for _ in range(int(budget)):
        i, j = sampler.sample(counts, rng)
        counts[i, j] += 1
        counts[j, i] += 1
    return counts


def fim_cell(world, h, budget, mode, seed, tau=1.0, n_m=3) -> SweepRow:
    row = SweepRow(h=float(h), budget=int(budget), strategy=mode, seed=int(seed))
    alpha = world.golden.alpha
    if mode == "ideal":
        try:
            counts = ideal_allocation(world.golden, h, budget)
        except EmptyProximitySet:
            return replace(row, status="EmptyProximitySet")
    elif mode == "practical":
        rng = np.random.default_rng(_cell_seed(seed, world.seed, float(h), int(budget), 2))
        counts = practical_counts(world.scores, h, budget, rng, tau, n_m)
    else:
        raise InputError(f"unknown mode {mode!r}")
    tr = trace_inv_fim(world.scores, counts, alpha)
    return replace(row, trace_inv_fim=tr, connected=math.isfinite(tr))


def fim_sweep(
    world: SyntheticWorld,
    h_values: Sequence[float],
    budgets: Sequence[int],
    mode: str = "ideal",
    seeds: Sequence[int] = (0,),
    tau: float = 1.0,
    n_m: int = 3,
) -> SweepResult:
    """``tr[I(theta)^-1]`` at the golden ratings for every (h, budget, seed) cell."""
    rows = [fim_cell(world, h, c, mode, s, tau, n_m) for c in budgets for h in h_values for s in seeds]
    config = dict(
        experiment="fim_sweep",
        mode=mode,
        models=world.n_models,
        world_seed=world.seed,
        seeds=",".join(map(str, seeds)),
    )
    return SweepResult(rows, config)


# --- replay -------------------------------------------------------------------

@dataclass(frozen=True)
class ReplayPoint:
    position: int
    consumed: int
    consumed_fraction: float
    n_models: int
    spearman_rho: float
    kendall_tau: float
    avg_rank_diff: float
    rmse: float
    kendall_tau_golden: float = math.nan
    rmse_golden: float = math.nan
    status: str = "ok"


@dataclass
class ReplayResult:
    timeline: list[ReplayPoint]
    ratings: RatingVector | None
    reference: RatingVector
    consumed: int
    total: int
    placements: dict[str, PlacementState]
    config: dict = field(default_factory=dict)

    @property
    def final(self) -> ReplayPoint:
        return self.timeline[-1]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("# " + " ".join(f"{k}={v}" for k, v in self.config.items()) + "\n")
        writer = csv.writer(buf)
        names = [f.name for f in fields(ReplayPoint)]
        writer.writerow(names)
        for p in self.timeline:
            writer.writerow([_fmt(getattr(p, n)) for n in names])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _sub_metrics(ratings: RatingVector, target: RatingVector):
    ids = [m.id for m in ratings.roster]
    tpos = {m.id: i for i, m in enumerate(target.roster)}
    keep = [k for k, i in enumerate(ids) if i in tpos]
    if len(keep) < 2:
        return None
    est = ratings.scores[keep]
    ref = target.scores[[tpos[ids[k]] for k in keep]]
    return rank_metrics_arrays(est, ref)


def replay_experiment(
    records: Sequence[BattleRecord] | None,
    cold_start_fraction: float = 0.2,
    refit_interval: int = 5000,
    strategy: Strategy = Strategy.uniform(),
    placement: PlacementConfig = PlacementConfig(),
    seed: int = 0,
    golden: RatingVector | None = None,
    solver: SolverConfig = SolverConfig(),
    consume_probability: float = 1.0,
) -> ReplayResult:
    """Replay a chronological battle log under a sampling strategy.

    The first ``cold_start_fraction`` of the log is taken as-is. After that a
    record is kept only if the strategy accepts it: always for ``uniform``
    (optionally thinned by ``consume_probability``), and for ``proximity`` when
    the current ratings of its two models differ by less than ``h``. A model
    first seen after the cold start is placed first: each placement round pulls
    up to T later records between it and the round's opponent. Ratings are
    refitted every ``refit_interval`` log positions and at the end; each refit
    adds a timeline point measured against the full-log fit.
    """
    if not records:
        raise DatasetUnavailable("replay needs a non-empty battle log")
    if not 0 < cold_start_fraction <= 1:
        raise InputError("cold_start_fraction must lie in (0, 1]")
    if refit_interval < 1:
        raise InputError("refit_interval must be >= 1")
    if not 0 < consume_probability <= 1:
        raise InputError("consume_probability must lie in (0, 1]")
    records = list(records)
    total = len(records)
    full_roster = sorted({m.id for r in records for m in (r.model_a, r.model_b)})
    reference = fit_bt_mle(build_matrices(records, full_roster), solver)
    rng = np.random.default_rng(_cell_seed(seed, 7))

    used = np.zeros(total, dtype=bool)
    by_pair: dict[frozenset, deque] = defaultdict(deque)
    for k, r in enumerate(records):
        by_pair[frozenset((r.model_a.id, r.model_b.id))].append(k)

    n_cold = max(1, math.ceil(cold_start_fraction * total))
    consumed: list[int] = list(range(n_cold))
    used[:n_cold] = True
    known = {m.id for k in consumed for m in (records[k].model_a, records[k].model_b)}
    ratings: dict[str, float] = {}
    timeline: list[ReplayPoint] = []
    placements: dict[str, PlacementState] = {}
    fitted: RatingVector | None = None
    last_fit_size = -1

    def refit(position):
        nonlocal fitted, last_fit_size
        kept = [records[k] for k in consumed]
        roster = sorted({m.id for r in kept for m in (r.model_a, r.model_b)})
        status = "ok"
        try:
            fitted = fit_bt_mle(build_matrices(kept, roster), solver)
        except NumericalError as exc:
            status = type(exc).__name__
            try:
                fitted = fit_bt_mle(build_matrices(kept, roster), replace(solver, regularization=0.5))
                status += "+regularized"
            except NumericalError:
                pass
        last_fit_size = len(consumed)
        if fitted is not None:
            ratings.update(fitted.as_dict())
        m = _sub_metrics(fitted, reference) if fitted is not None else None
        g = _sub_metrics(fitted, golden) if (fitted is not None and golden is not None) else None
        timeline.append(
            ReplayPoint(
                position=position,
                consumed=len(consumed),
                consumed_fraction=len(consumed) / total,
                n_models=len(fitted) if fitted is not None else 0,
                spearman_rho=m.spearman_rho if m else math.nan,
                kendall_tau=m.kendall_tau if m else math.nan,
                avg_rank_diff=m.avg_rank_diff if m else math.nan,
                rmse=m.rmse if m else math.nan,
                kendall_tau_golden=g.kendall_tau if g else math.nan,
                rmse_golden=g.rmse if g else math.nan,
                status=status,
            )
        )

    def place(newcomer, position):
        rated = RatingVector(
            [mid for mid in ratings], [ratings[mid] for mid in ratings]
        ).sorted()
        if len(rated) < 2:
            return None
        state = PlacementState.start(len(rated), model=newcomer)
        while not state.finished:
            mid = (state.lo + state.hi) // 2
            opponent = rated.roster[mid - 1].id
            queue = by_pair[frozenset((newcomer, opponent))]
            wins = losses = 0
            while queue and wins + losses < placement.battles_per_round:
                k = queue.popleft()
                if k <= position or used[k]:
                    continue
                used[k] = True
                consumed.append(k)
                if records[k].winner.id == newcomer:
                    wins += 1
                else:
                    losses += 1
            if wins + losses == 0:
                # no data left for this pairing: settle at the opponent's rating
                state = replace(state, finished=True, final_rating=float(rated[opponent]))
                break
            state = placement_step(
                state, rated, (wins, losses), replace(placement, battles_per_round=wins + losses)
            )
        placements[newcomer] = state
        return state.final_rating

    refit(n_cold)
    h = strategy.h
    for k in range(n_cold, total):
        rec = records[k]
        for m in (rec.model_a.id, rec.model_b.id):
            if m not in known:
                known.add(m)
                if m not in ratings:
                    rating = place(m, k - 1)
                    if rating is not None:
                        ratings[m] = rating
        if not used[k] and rec.model_a.id in ratings and rec.model_b.id in ratings:
            if strategy.kind == "uniform":
                take = consume_probability >= 1.0 or rng.random() < consume_probability
            else:
                take = abs(ratings[rec.model_a.id] - ratings[rec.model_b.id]) < h
            if take:
                used[k] = True
                consumed.append(k)
        if (k + 1 - n_cold) % refit_interval == 0:
            refit(k + 1)
    if len(consumed) != last_fit_size:
        refit(total)
    config = dict(
        experiment="replay",
        strategy=str(strategy),
        cold_start_fraction=cold_start_fraction,
        refit_interval=refit_interval,
        seed=seed,
        placement_T=placement.battles_per_round,
    )
    return ReplayResult(timeline, fitted, reference, len(consumed), total, placements, config)


def synthetic_stream(
    world: SyntheticWorld,
    budget: int,
    seed: int = 0,
    late_fraction: float = 0.25,
) -> list[BattleRecord]:
    """Chronological log of uniformly paired battles where some models join late.

    ``late_fraction`` of the roster arrives at random points in the last 80%
    of the log; every battle pairs two models already present.
    """
    rng = np.random.default_rng(_cell_seed(seed, world.seed, 11))
    n = world.n_models
    n_late = int(round(late_fraction * n))
    arrival = np.zeros(n, dtype=np.int64)
    late = rng.choice(n, n_late, replace=False)
    arrival[late] = rng.integers(int(0.2 * budget), int(0.8 * budget), n_late)
    order = np.argsort(arrival, kind="stable")
    a = np.empty(budget, dtype=np.int64)
    b = np.empty(budget, dtype=np.int64)
    present = int(np.sum(arrival == 0))
    if present < 2:
        raise InputError("at least two models must be present from the start")
    for t in range(budget):
        while present < n and arrival[order[present]] <= t:
            present += 1
        pool = order[:present]
        i, j = rng.choice(pool, 2, replace=False)
        a[t], b[t] = i, j
    y = sample_outcomes(world, a, b, rng)
    records = _to_records(world, a, b, y)
    return [replace(r, source=Source.REPLAY) for r in records]


def threshold_for_fraction(scores, fraction: float) -> float:
    """Smallest h whose proximity set holds at least ``fraction`` of all pairs."""
    u = np.asarray(scores, dtype=float)
    i, j = _all_pairs(len(u))
    gaps = np.sort(np.abs(u[i] - u[j]))
    k = min(len(gaps) - 1, max(0, math.ceil(fraction * len(gaps)) - 1))
    return float(np.nextafter(gaps[k], np.inf))


# --- bootstrap experiment -----------------------------------------------------

def bootstrap_experiment(
    world: SyntheticWorld,
    budget: int,
    h: float,
    rounds: int = 100,
    seed: int = 0,
    solver: SolverConfig = SolverConfig(),
) -> BootstrapReport:
    """Bootstrap variance of a proximity dataset against a uniform one of equal size.

    Both datasets share the golden ratings and the budget; outcomes are drawn
    from the golden win probabilities.
    """
    roster = world.golden.roster
    datasets = {}
    for code, strategy in ((0, Strategy.proximity(h)), (1, Strategy.uniform())):
        rng = np.random.default_rng(_cell_seed(seed, world.seed, int(budget), code, 3))
        a, b = draw_pairs(world, strategy, budget, rng)
        y = sample_outcomes(world, a, b, rng)
        datasets[strategy.kind] = (np.where(y == 1, a, b), np.where(y == 1, b, a))
    runs = {
        label: bootstrap_arrays(w, l, roster, rounds, seed, solver, label)
        for label, (w, l) in datasets.items()
    }
    return compare_bootstrap(runs["uniform"], runs["proximity"])
