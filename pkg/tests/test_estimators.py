import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.model_selection import cross_val_score

from arenarank.estimators import BradleyTerryRanker, DiscRanker, EloRanker
from arenarank.exceptions import NoFiniteMaximizer
from arenarank.simulator import SyntheticWorld, draw_pairs, sample_outcomes, Strategy


def _pairs(n_models=6, n=3000, seed=0):
    world = SyntheticWorld.uniform(n_models, seed=seed)
    rng = np.random.default_rng(seed)
    a, b = draw_pairs(world, Strategy.uniform(), n, rng)
    y = sample_outcomes(world, a, b, rng)
    ids = np.array([m.id for m in world.golden.roster])
    return np.column_stack([ids[a], ids[b]]), y, world


def test_bt_two_model_closed_form():
    X = [["A", "B"]] * 4
    y = [1, 1, 1, 0]
    est = BradleyTerryRanker().fit(X, y)
    assert est.ratings_["A"] - est.ratings_["B"] == pytest.approx(400 * math.log10(3), abs=1e-6)
    proba = est.predict_proba([["A", "B"], ["B", "A"]])
    assert proba[0, 1] == pytest.approx(0.75) and proba[1, 1] == pytest.approx(0.25)
    assert est.predict([["A", "B"]]).tolist() == [1]


def test_y_defaults_to_first_column_winning():
    est = BradleyTerryRanker().fit([["A", "B"], ["A", "B"], ["B", "A"]])
    assert est.ratings_["A"] > est.ratings_["B"]


def test_bt_recovers_order_and_scores_well():
    X, y, world = _pairs()
    est = BradleyTerryRanker().fit(X, y)
    assert [m for m, _ in est.leaderboard()] == [m.id for m in world.golden.roster]
    assert est.score(X, y) > 0.6
    assert est.transform(["m000"]).shape == (1,)


def test_params_clone_and_cross_validation():
    X, y, _ = _pairs(n=1500)
    est = BradleyTerryRanker(regularization=0.5)
    assert est.get_params()["regularization"] == 0.5
    assert clone(est).set_params(max_iter=10).max_iter == 10
    scores = cross_val_score(BradleyTerryRanker(), X, y, cv=3)
    assert np.all(scores > 0.55)


def test_validation_errors():
    est = BradleyTerryRanker()
    with pytest.raises(NotFittedError):
        est.predict([["a", "b"]])
    with pytest.raises(ValueError):
        est.fit([["a", "a"]], [1])
    with pytest.raises(ValueError):
        est.fit([["a", "b", "c"]], [1])
    with pytest.raises(ValueError):
        est.fit([["a", "b"], ["b", "a"]], [1, 2])
    est.fit([["a", "b"], ["b", "a"]], [1, 1])
    with pytest.raises(ValueError, match="not seen"):
        est.predict([["a", "zzz"]])


def test_numerical_failures_propagate():
    with pytest.raises(NoFiniteMaximizer):
        BradleyTerryRanker().fit([["a", "b"], ["a", "c"], ["b", "c"], ["c", "b"]])


def test_elo_ranker_partial_fit_matches_fit():
    X, y, _ = _pairs(n=500)
    full = EloRanker().fit(X, y)
    part = EloRanker()
    for k in range(0, 500, 100):
        part.partial_fit(X[k:k + 100], y[k:k + 100])
    assert full.scores_ == part.scores_
    first = EloRanker(k_factor=32).fit([["a", "b"]], [1])
    assert first.scores_ == {"a": 1016.0, "b": 984.0}
    assert first.predict_proba([["a", "b"]])[0, 1] > 0.5


def test_disc_ranker_on_cycle():
    X = [["r", "s"]] * 80 + [["s", "r"]] * 20 + [["s", "p"]] * 80 + [["p", "s"]] * 20 + [["p", "r"]] * 80 + [["r", "p"]] * 20
    est = DiscRanker(iterations=3000).fit(X)
    p = est.predict_proba([["r", "s"], ["s", "p"], ["p", "r"]])[:, 1]
    assert np.all(np.abs(p - 0.8) < 0.05)
    assert not est.transitivity_report().transitive
    assert est.transform(["r", "s"]).shape == (2, 2)
