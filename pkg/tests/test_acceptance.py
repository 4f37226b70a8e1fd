"""Acceptance criteria, one test each.

Every check prints a single ``criterion N: PASS|FAIL ...`` line at the end of
the pytest run (see ``conftest.py``); ``python tests/test_acceptance.py`` runs
them without pytest.
"""
import itertools
import math
import sys
import time

import numpy as np
import pytest
from scipy import stats

from arenarank.analysis import kendall_tau_b, rank_metrics, rank_metrics_arrays
from arenarank.core import ComparisonMatrices, RatingVector
from arenarank.disc import disc_probabilities, fit_disc, rotate, transitivity_report
from arenarank.information import (
    delta_phi_report,
    fim_vs_hessian_check,
    fisher_matrix,
    laplacian,
    optimal_threshold,
    spectrum_pinv_trace,
)
from arenarank.rating import ELO_ALPHA, fit_bt_mle
from arenarank.scheduler import (
    PlacementConfig,
    ProximityConfig,
    ProximitySampler,
    placement_rank,
    proximity_sets,
    run_placement,
)
from arenarank.simulator import (
    Strategy,
    SyntheticWorld,
    bootstrap_experiment,
    fim_sweep,
    replay_experiment,
    synthetic_stream,
    threshold_for_fraction,
    threshold_sweep,
)

RESULTS = {}


def _record(number, title, ok, detail, seconds, limit=None):
    timing = f"{seconds:.2f}s" + (f" (limit {limit:g}s)" if limit else "")
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {title}: {detail} [{timing}]"
    RESULTS[number] = line
    print(line)
    return ok


def _timed(fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    return ok, detail, time.perf_counter() - t0


# --- 1 ------------------------------------------------------------------------

def criterion_1():
    def run():
        m = ComparisonMatrices.from_wins(["A", "B"], [[0, 3], [1, 0]])
        r = fit_bt_mle(m)
        gap = r["A"] - r["B"]
        err = abs(gap - 400 * math.log10(3))
        return err <= 1e-3, f"gap {gap:.6f} vs 400*log10(3), |err| {err:.2e}"

    ok, detail, dt = _timed(run)
    return _record(1, "two-model closed form", ok and dt < 1.0, detail, dt, 1)


# --- 2 ------------------------------------------------------------------------

def criterion_2():
    def run():
        rng = np.random.default_rng(2024)
        ids = [f"m{i}" for i in range(5)]
        wins = rng.integers(1, 50, (5, 5))
        np.fill_diagonal(wins, 0)
        m = ComparisonMatrices.from_wins(ids, wins)
        theta = RatingVector(ids, rng.uniform(600, 1400, 5))
        fd_err = fim_vs_hessian_check(theta, m, step=1e-3)
        info = fisher_matrix(theta, m)
        lap_err = np.max(np.abs(info.fim - ELO_ALPHA**2 * info.laplacian)) / np.max(np.abs(info.fim))
        ok = fd_err < 1e-4 and lap_err <= 1e-12
        return ok, f"FD-Hessian rel err {fd_err:.2e} (<1e-4), |I - a^2 L| rel {lap_err:.2e} (<=1e-12)"

    ok, detail, dt = _timed(run)
    return _record(2, "FIM correctness", ok and dt < 1.0, detail, dt, 1)


# --- 3 ------------------------------------------------------------------------

def criterion_3():
    def run():
        path = spectrum_pinv_trace(laplacian([[0, 1, 0], [1, 0, 1], [0, 1, 0]]))[0]
        k3 = spectrum_pinv_trace(laplacian(np.ones((3, 3))))[0]
        ok = abs(path - 4 / 3) <= 1e-9 and abs(k3 - 2 / 3) <= 1e-9
        return ok, f"path {path:.12f} (4/3), K3 {k3:.12f} (2/3)"

    ok, detail, dt = _timed(run)
    return _record(3, "Laplacian oracles", ok, detail, dt)


# --- 4 ------------------------------------------------------------------------

H_FIG4 = [50, 100, 150, 200, 300, 500, 700, 1000]


def criterion_4():
    def run():
        world = SyntheticWorld.uniform(100, 400, 1400, seed=0, noise_fraction=0.05)
        res = threshold_sweep(world, H_FIG4, [100_000], ["proximity"], seeds=range(5))
        rmse = res.mean_over_seeds("rmse")
        tau = res.mean_over_seeds("kendall_tau")
        h_star = min(rmse, key=rmse.get)
        ok = 100 <= h_star <= 300 and rmse[h_star] < rmse[1000] and tau[h_star] > tau[1000]
        curve = " ".join(f"{h:g}:{v:.2f}" for h, v in rmse.items())
        return ok, (
            f"argmin h={h_star:g}, RMSE {rmse[h_star]:.2f} vs {rmse[1000]:.2f} at h=1000, "
            f"tau {tau[h_star]:.4f} vs {tau[1000]:.4f}; mean RMSE {curve}"
        )

    ok, detail, dt = _timed(run)
    return _record(4, "threshold sweep (RMSE/tau vs h)", ok and dt <= 600, detail, dt, 600)


# --- 5 ------------------------------------------------------------------------

H_FIG8 = [100, 150, 200, 250, 300, 400, 500, 600, 700, 800, 900, 1000]


def criterion_5():
    def run():
        world = SyntheticWorld.uniform(100, 0, 1000, seed=0, noise_fraction=0.0)
        notes, ok = [], True
        for c in (10_000, 100_000, 1_000_000):
            curve = fim_sweep(world, H_FIG8, [c], "ideal").mean_over_seeds("trace_inv_fim")
            finite = {h: v for h, v in curve.items() if math.isfinite(v)}
            hs = sorted(finite)
            h_min = min(finite, key=finite.get)
            u_shaped = hs[0] < h_min < hs[-1] and all(finite[h_min] < finite[h] for h in (hs[0], hs[-1]))
            ok &= u_shaped
            notes.append(f"ideal C={c:.0e}: min at h={h_min:g} ({'U' if u_shaped else 'not U'})")
        practical = fim_sweep(world, H_FIG8, [10_000], "practical").mean_over_seeds("trace_inv_fim")
        best = min(practical, key=practical.get)
        reduction = 1 - practical[best] / practical[1000]
        ok &= reduction >= 0.25
        notes.append(f"practical C=1e4: best h={best:g}, reduction {100 * reduction:.1f}% (>=25%)")
        return ok, "; ".join(notes)

    ok, detail, dt = _timed(run)
    return _record(5, "trace of inverse FIM vs h", ok and dt <= 600, detail, dt, 600)


# --- 6 ------------------------------------------------------------------------

def criterion_6():
    def run():
        theta = RatingVector([f"m{i}" for i in range(10)], 1450.0 - 100.0 * np.arange(10))
        report = delta_phi_report(theta, 10_000)
        entries = report.entries
        signs_ok = all(e.benefit > 0 and e.cost > 0 for e in entries)
        scale = max(abs(e.actual_delta_phi) for e in entries)
        checked = [e for e in entries if abs(e.approx_delta_phi) > 0.1 * scale]
        agree = [e for e in checked if np.sign(e.actual_delta_phi) == np.sign(e.approx_delta_phi)]
        overall = sum(np.sign(e.actual_delta_phi) == np.sign(e.approx_delta_phi) for e in entries)
        ok = signs_ok and len(agree) == len(checked) and len(entries) > 0
        return ok, (
            f"{len(entries)} connected breakpoints (skipped disconnected {report.skipped}), "
            f"A>0 and B>0 at all: {signs_ok}; sign agreement {len(agree)}/{len(checked)} outside the crossing, "
            f"{overall}/{len(entries)} overall"
        )

    ok, detail, dt = _timed(run)
    return _record(6, "benefit/cost decomposition", ok and dt < 60, detail, dt, 60)


# --- 7 ------------------------------------------------------------------------

def _draws(sampler, counts, seed, n):
    rng = np.random.default_rng(seed)
    return [tuple(sampler.sample(counts, rng)) for _ in range(n)]


def criterion_7():
    def run():
        world = SyntheticWorld.uniform(20, seed=7)
        h = 250.0
        cfg = ProximityConfig(h=h, tau=1.0, sample_size_k=3, min_proximity_n_m=3)
        # threshold regime: every model has at least n_m members within h
        regime = np.all((np.abs(world.scores[:, None] - world.scores[None, :]) < h).sum(axis=1) >= cfg.min_proximity_n_m)
        sampler = ProximitySampler(world.scores, cfg)
        counts = np.full((20, 20), 5, dtype=np.int64)
        np.fill_diagonal(counts, 0)
        draws = _draws(sampler, counts, 11, 10_000)
        violations = sum(
            abs(world.scores[a] - world.scores[b]) >= h
            for d in draws for a, b in itertools.combinations(d, 2)
        )
        # equal counts: the second member is uniform over the first member's neighbourhood
        others = proximity_sets(world.scores, h, 3) & ~np.eye(20, dtype=bool)
        chi2, dof = 0.0, 0
        for f in range(20):
            cand = np.flatnonzero(others[f])
            seconds = [d[1] for d in draws if d[0] == f]
            if len(cand) < 2 or not seconds:
                continue
            obs = np.array([seconds.count(c) for c in cand])
            chi2 += stats.chisquare(obs).statistic
            dof += len(cand) - 1
        p = float(stats.chi2.sf(chi2, dof))
        same = _draws(sampler, counts, 11, 10_000) == draws
        ok = bool(regime) and violations == 0 and p > 0.01 and same
        return ok, f"threshold regime {bool(regime)}, violations {violations}/10^4 draws, chi-square p={p:.3f} (dof {dof}), reproducible {same}"

    ok, detail, dt = _timed(run)
    return _record(7, "proximity sampling properties", ok, detail, dt)


# --- 8 ------------------------------------------------------------------------

def criterion_8(sessions=500):
    def run():
        cfg = PlacementConfig(battles_per_round=10)
        hits, max_rounds = 0, 0
        bound = math.ceil(math.log2(20)) + 1
        for s in range(sessions):
            rng = np.random.default_rng([8, s])
            theta = RatingVector([f"g{i:02d}" for i in range(20)], np.sort(rng.uniform(400, 1400, 20))[::-1])
            true = rng.uniform(400, 1400)

            def play(opponent):
                p = 1 / (1 + 10 ** ((theta[opponent] - true) / 400))
                w = int(rng.binomial(10, p))
                return w, 10 - w

            state = run_placement(theta, play, cfg)
            max_rounds = max(max_rounds, len(state.rounds))
            hits += abs(placement_rank(state.final_rating, theta) - placement_rank(true, theta)) <= 2
        acc = hits / sessions
        ok = acc >= 0.9 and max_rounds <= bound
        return ok, f"rank within 2 in {100 * acc:.1f}% of {sessions} sessions (need 90%), max rounds {max_rounds} (<= {bound})"

    ok, detail, dt = _timed(run)
    return _record(8, "placement accuracy", ok and dt < 60, detail, dt, 60)


# --- 9 ------------------------------------------------------------------------

def criterion_9():
    def run():
        per = 10_000
        wins = np.zeros((3, 3), dtype=int)
        for i, j in ((0, 1), (1, 2), (2, 0)):
            wins[i, j], wins[j, i] = int(0.8 * per), per - int(0.8 * per)
        cyc = fit_disc(ComparisonMatrices.from_wins(["rock", "scissors", "paper"], wins), iterations=5000)
        p = cyc.win_matrix()
        worst = max(abs(p[i, j] - 0.8) for i, j in ((0, 1), (1, 2), (2, 0)))
        rot = max(
            np.max(np.abs(disc_probabilities(*rotate(cyc.u, cyc.v, a)) - p)) for a in np.linspace(-3, 3, 13)
        )
        x = np.array([0.0, 0.6, 1.2, 1.8, 2.4])
        tw = np.rint(2000 / (1 + np.exp(-(x[:, None] - x[None, :])))).astype(int)
        np.fill_diagonal(tw, 0)
        trans = fit_disc(ComparisonMatrices.from_wins([f"t{i}" for i in range(5)], tw), iterations=5000)
        d_t, d_c = transitivity_report(trans).dispersion, transitivity_report(cyc).dispersion
        ok = worst <= 0.05 and rot <= 1e-12 and d_t < d_c
        return ok, f"max |p - 0.8| {worst:.4f}, rotation drift {rot:.1e}, v-dispersion transitive {d_t:.3f} < cyclic {d_c:.3g}"

    ok, detail, dt = _timed(run)
    return _record(9, "disc decomposition", ok, detail, dt)


# --- 10 -----------------------------------------------------------------------

def criterion_10():
    def run():
        world = SyntheticWorld.uniform(20, seed=0, noise_fraction=0.05)
        budget = 20_000
        h = optimal_threshold(world.golden, budget, [100, 150, 200, 250, 300, 400, 500, 700, 1000])
        a = bootstrap_experiment(world, budget, h, rounds=100, seed=1)
        b = bootstrap_experiment(world, budget, h, rounds=100, seed=1)
        red = a.mean_variance_reduction
        ok = red > 0 and a == b
        return ok, f"h={h:g}, mean variance reduction {red:.2f} Elo^2 (>0), identical on rerun {a == b}"

    ok, detail, dt = _timed(run)
    return _record(10, "bootstrap variance reduction", ok and dt <= 300, detail, dt, 300)


# --- 11 -----------------------------------------------------------------------

def _brute_tau_b(x, y):
    conc = disc = tx = ty = 0
    for i, j in itertools.combinations(range(len(x)), 2):
        dx, dy = x[i] - x[j], y[i] - y[j]
        if dx == 0 and dy == 0:
            continue
        if dx == 0:
            tx += 1
        elif dy == 0:
            ty += 1
        elif dx * dy > 0:
            conc += 1
        else:
            disc += 1
    return (conc - disc) / math.sqrt((conc + disc + tx) * (conc + disc + ty))


def criterion_11():
    def run():
        rng = np.random.default_rng(11)
        worst = 0.0
        for k in range(100):
            n = int(rng.integers(2, 51))
            x = rng.normal(size=n) if k % 2 else rng.integers(0, 6, n).astype(float)
            y = rng.normal(size=n) if k % 3 else rng.integers(0, 6, n).astype(float)
            if np.ptp(x) == 0 or np.ptp(y) == 0:
                continue
            worst = max(worst, abs(kendall_tau_b(x, y) - _brute_tau_b(x, y)))
        g = RatingVector([f"m{i}" for i in range(30)], rng.normal(1000, 200, 30))
        ident = rank_metrics(g, g)
        rev = rank_metrics_arrays(-g.scores, g.scores)
        exact = ident.kendall_tau == 1.0 and ident.spearman_rho == 1.0 and rev.kendall_tau == -1.0 and rev.spearman_rho == -1.0
        ok = worst <= 1e-12 and exact
        return ok, f"max |tau - brute force| {worst:.1e} over 100 pairs; identity/reversal exact {exact}"

    ok, detail, dt = _timed(run)
    return _record(11, "rank metrics oracle", ok, detail, dt)


# --- 12 -----------------------------------------------------------------------

def criterion_12():
    def run():
        world = SyntheticWorld.uniform(20, seed=0, noise_fraction=0.0)
        stream = synthetic_stream(world, 100_000, seed=0)
        h = threshold_for_fraction(world.scores, 0.56)
        res = replay_experiment(stream, strategy=Strategy.proximity(h), golden=world.golden, seed=0)
        tau = res.final.kendall_tau_golden
        return tau >= 0.95, (
            f"final Kendall tau vs golden {tau:.4f} (>=0.95), h={h:.1f}, "
            f"consumed {100 * res.final.consumed_fraction:.1f}% of {res.total}"
        )

    ok, detail, dt = _timed(run)
    return _record(12, "end-to-end replay", ok, detail, dt)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11, criterion_12]


@pytest.mark.parametrize("check", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 13)])
def test_acceptance(check):
    assert check(), RESULTS.get(CRITERIA.index(check) + 1)


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    print(f"{sum(results)}/{len(results)} criteria pass")
    sys.exit(0 if all(results) else 1)
