import math

import numpy as np
import pytest

from arenarank.core import RatingVector, build_matrices
from arenarank.exceptions import DatasetUnavailable, EmptyProximitySet, InputError
from arenarank.rating import fit_bt_mle
from arenarank.simulator import (
    Strategy,
    SyntheticWorld,
    draw_pairs,
    fim_cell,
    fim_sweep,
    generate_battles,
    replay_experiment,
    sample_outcome,
    sample_outcomes,
    synthetic_stream,
    threshold_cell,
    threshold_for_fraction,
    threshold_sweep,
)


def _world(scores, noise=0.0):
    return SyntheticWorld(RatingVector([f"w{i}" for i in range(len(scores))], scores), 0, noise)


@pytest.mark.parametrize("gap, expected", [(0.0, 0.5), (400.0, 10 / 11)])
def test_empirical_win_rate(gap, expected):
    world = _world([1000.0 + gap, 1000.0])
    rng = np.random.default_rng(1)
    y = sample_outcomes(world, np.zeros(100_000, int), np.ones(100_000, int), rng)
    assert abs(y.mean() - expected) < 0.01


def test_sample_outcome_is_seeded():
    world = _world([1100.0, 1000.0, 900.0])
    a = [sample_outcome(world, 0, 2, np.random.default_rng(4)) for _ in range(3)]
    b = [sample_outcome(world, 0, 2, np.random.default_rng(4)) for _ in range(3)]
    assert a == b
    with pytest.raises(InputError):
        sample_outcome(world, 1, 1, np.random.default_rng(0))


def test_world_uniform_is_sorted_and_open():
    w = SyntheticWorld.uniform(100, seed=3)
    assert w.golden.is_sorted_descending()
    assert np.all((w.scores > 400) & (w.scores < 1400))


def test_proximity_pairs_respect_gap():
    world = SyntheticWorld.uniform(100, seed=0, noise_fraction=0.0)
    a, b = draw_pairs(world, Strategy.proximity(150), 100_000, np.random.default_rng(0))
    assert np.all(np.abs(world.scores[a] - world.scores[b]) < 150)
    assert np.all(a != b)


def test_noise_share_is_drawn_from_all_pairs():
    world = SyntheticWorld.uniform(50, seed=0, noise_fraction=0.2)
    a, b = draw_pairs(world, Strategy.proximity(100), 20_000, np.random.default_rng(0))
    far = np.abs(world.scores[a] - world.scores[b]) >= 100
    assert 0 < far.mean() <= 0.2


def test_wide_threshold_matches_uniform_distribution():
    world = _world(np.linspace(1300, 700, 6))
    span = 10 * world.span
    counts = {}
    for s in (Strategy.proximity(span), Strategy.uniform()):
        a, b = draw_pairs(world, s, 60_000, np.random.default_rng(2))
        counts[s.kind] = np.bincount(np.minimum(a, b) * 6 + np.maximum(a, b), minlength=36)
    assert np.allclose(counts["proximity"] / 60_000, counts["uniform"] / 60_000, atol=0.01)


def test_threshold_below_every_gap_fails():
    world = _world([1200.0, 1000.0, 800.0])
    with pytest.raises(EmptyProximitySet):
        generate_battles(world, Strategy.proximity(50), 10, 0)


def test_strategy_parse():
    assert Strategy.parse("proximity:150") == Strategy.proximity(150)
    assert str(Strategy.parse("uniform")) == "uniform"
    with pytest.raises(InputError):
        Strategy("random")


def test_threshold_cell_deterministic():
    world = SyntheticWorld.uniform(20, seed=1)
    assert threshold_cell(world, 300, 5000, "proximity", 2) == threshold_cell(world, 300, 5000, "proximity", 2)


def test_threshold_sweep_rows_and_csv():
    world = SyntheticWorld.uniform(15, seed=1)
    res = threshold_sweep(world, [200, 1000], [3000], ["proximity", "uniform"], [0, 1])
    assert len(res.rows) == 8
    text = res.to_csv()
    assert text.startswith("# experiment=threshold_sweep")
    assert text.splitlines()[1].startswith("h,budget,strategy,seed,rmse")
    means = res.mean_over_seeds("rmse", strategy="proximity")
    assert set(means) == {200.0, 1000.0}


def test_failed_cells_are_reported_not_raised():
    world = _world(np.array([1400.0, 1390, 600, 590]), noise=0.0)
    row = threshold_cell(world, 50, 500, "proximity", 0)
    assert row.status == "DisconnectedGraph" and math.isnan(row.rmse) and not row.connected


def test_ideal_fim_scales_with_budget():
    world = SyntheticWorld.uniform(30, seed=0, noise_fraction=0.0)
    res = fim_sweep(world, [150, 300, 1000], [10_000, 100_000], "ideal")
    small = res.mean_over_seeds("trace_inv_fim", budget=10_000)
    big = res.mean_over_seeds("trace_inv_fim", budget=100_000)
    for h, v in small.items():
        if math.isfinite(v):
            assert big[h] == pytest.approx(v / 10, rel=1e-12)


def test_fim_cell_modes():
    world = SyntheticWorld.uniform(20, seed=0, noise_fraction=0.0)
    assert fim_cell(world, 1e-3, 100, "ideal", 0).status == "EmptyProximitySet"
    row = fim_cell(world, 1000, 2000, "practical", 0)
    assert row.connected and math.isfinite(row.trace_inv_fim)
    with pytest.raises(InputError):
        fim_cell(world, 100, 100, "optimal", 0)


def test_threshold_for_fraction():
    scores = np.array([400.0, 300, 200, 100])  # gaps: 100 x3, 200 x2, 300 x1
    h = threshold_for_fraction(scores, 0.5)
    assert np.triu(np.abs(scores[:, None] - scores[None, :]) < h, 1).sum() == 3


def test_replay_full_cold_start_equals_direct_fit():
    world = SyntheticWorld.uniform(8, seed=2)
    stream = synthetic_stream(world, 4000, seed=1)
    res = replay_experiment(stream, cold_start_fraction=1.0)
    assert len(res.timeline) == 1 and res.consumed == res.total == 4000
    direct = fit_bt_mle(build_matrices(stream, sorted({m.id for r in stream for m in (r.model_a, r.model_b)})))
    assert res.ratings == direct and res.final.rmse == 0.0 and res.final.kendall_tau == 1.0


def test_replay_places_late_models():
    world = SyntheticWorld.uniform(12, seed=2)
    stream = synthetic_stream(world, 20_000, seed=1, late_fraction=0.25)
    res = replay_experiment(stream, strategy=Strategy.proximity(400), golden=world.golden, refit_interval=4000)
    assert len(res.placements) > 0
    assert all(p.finished for p in res.placements.values())
    assert res.consumed < res.total
    assert [p.position for p in res.timeline] == sorted(p.position for p in res.timeline)
    assert res.to_csv().splitlines()[1].startswith("position,consumed")


def test_replay_requires_data():
    with pytest.raises(DatasetUnavailable):
        replay_experiment([])


def _uniform_at_equal_consumption(stream, world, target):
    """Uniform replay thinned until it keeps as many records as ``target``."""
    cold = 0.2 * len(stream)
    p = target.final.consumed_fraction
    first = replay_experiment(stream, strategy=Strategy.uniform(), golden=world.golden, consume_probability=p)
    # the thinned part of the consumption is linear in p
    p = min(1.0, p * (target.consumed - cold) / max(first.consumed - cold, 1))
    return replay_experiment(stream, strategy=Strategy.uniform(), golden=world.golden, consume_probability=p)


def test_proximity_replay_no_worse_than_uniform_on_average():
    prox_rmse, unif_rmse = [], []
    for ws in range(8):
        world = SyntheticWorld.uniform(20, seed=ws, noise_fraction=0.0)
        stream = synthetic_stream(world, 100_000, seed=ws)
        h = threshold_for_fraction(world.scores, 0.56)
        px = replay_experiment(stream, strategy=Strategy.proximity(h), golden=world.golden)
        un = _uniform_at_equal_consumption(stream, world, px)
        assert abs(un.consumed - px.consumed) <= 0.005 * len(stream)
        prox_rmse.append(px.final.rmse_golden)
        unif_rmse.append(un.final.rmse_golden)
    assert np.mean(prox_rmse) <= np.mean(unif_rmse)
