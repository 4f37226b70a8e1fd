"""Command-line entry point: ``arenarank <command> ...``.

Exit status is 0 on success, 2 for bad input or arguments and 3 when the
numbers have no answer (disconnected comparison graph, no finite maximizer).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import bootstrap_variance, compare_bootstrap, rank_metrics
from .core import build_matrices, roster_from_records
from .disc import fit_disc, transitivity_report
from .exceptions import ArenaError, InputError, NumericalError
from .information import fisher_matrix
from .io import (
    StateSnapshot,
    config_fingerprint,
    ingest,
    load_state,
    read_ratings_csv,
    save_state,
)
from .rating import SolverConfig, fit_bt_mle
from .scheduler import (
    PlacementConfig,
    PlacementState,
    ProximityConfig,
    ProximitySampler,
    next_placement_opponent,
    placement_rank,
    placement_step,
)
from .simulator import (
    Strategy,
    SyntheticWorld,
    fim_sweep,
    replay_experiment,
    synthetic_stream,
    threshold_for_fraction,
    threshold_sweep,
)

log = logging.getLogger("arenarank")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    return [int(x) for x in _floats(text)]


def _comment(args, **extra) -> str:
    skip = {"func", "out", "verbose"}
    items = {k: v for k, v in vars(args).items() if k not in skip}
    items.update(extra)
    return " ".join(f"{k}={v}" for k, v in items.items())


def _write_text(out, text):
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
        log.info("wrote %s", out)


def _load_records(path):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: no such file")
    result = ingest(path)
    for rej in result.rejections:
        log.warning("%s:%d rejected: %s", path, rej.line, rej.reason)
    if not result.records:
        raise InputError(f"{path}: no valid battles")
    return result.records


def _load_snapshot(path):
    if not Path(path).is_file():
        raise InputError(f"{path}: no such file")
    snap = load_state(path)
    if snap.ratings is None:
        raise InputError(f"{path}: snapshot has no ratings; run `rank` first")
    return snap


def _solver(args):
    return SolverConfig(regularization=args.regularization)


# --- commands -------------------------------------------------------------------

def cmd_rank(args):
    records = _load_records(args.log)
    roster = roster_from_records(records)
    matrices = build_matrices(records, roster)
    ratings = fit_bt_mle(matrices, _solver(args))
    print(f"{'rank':>4}  {'model':<24} {'rating':>9} {'battles':>8}")
    battles = matrices.counts.sum(axis=1)
    for r, i in enumerate(np.argsort(-ratings.scores, kind="stable"), start=1):
        print(f"{r:>4}  {roster[i].id:<24} {ratings.scores[i]:9.2f} {battles[i]:8d}")
    fp = config_fingerprint({"command": "rank", "regularization": args.regularization})
    save_state(args.out, StateSnapshot(roster, ratings, matrices, config_fingerprint=fp))
    log.info("snapshot written to %s", args.out)


def cmd_schedule(args):
    snap = _load_snapshot(args.snapshot)
    theta = snap.ratings.sorted()
    counts = snap.matrices.reindex(theta.roster).counts.copy()
    cfg = ProximityConfig(h=args.h, tau=args.tau, sample_size_k=args.k, min_proximity_n_m=args.n_m)
    sampler = ProximitySampler(theta.scores, cfg)
    rng = np.random.default_rng(args.seed)
    lines = []
    for _ in range(args.sets):
        chosen = sampler.sample(counts, rng)
        lines.append(json.dumps({"models": [theta.roster[i].id for i in chosen]}))
        # later sets in the same batch see the pairs just scheduled
        for a in chosen:
            for b in chosen:
                if a != b:
                    counts[a, b] += 1
    _write_text(args.out, "\n".join(lines) + "\n")


def _read_results(path):
    """Per-round results: ``wins,losses`` or ``opponent,wins,losses`` per line."""
    rows = []
    with Path(path).open(newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            row = [c.strip() for c in row]
            if not row or row[0].startswith("#") or row[0].lower() in ("wins", "opponent"):
                continue
            try:
                if len(row) == 2:
                    rows.append((None, int(row[0]), int(row[1])))
                elif len(row) == 3:
                    rows.append((row[0], int(row[1]), int(row[2])))
                else:
                    raise ValueError
            except ValueError:
                raise InputError(f"{path}:{line_no}: expected wins,losses or opponent,wins,losses") from None
    return rows


def cmd_place(args):
    snap = _load_snapshot(args.snapshot)
    theta = snap.ratings.sorted()
    if args.new_model in {m.id for m in theta.roster}:
        raise InputError(f"{args.new_model!r} is already rated")
    cfg = PlacementConfig(battles_per_round=args.t, winrate_band=args.band)
    state = snap.placements.get(args.new_model) or PlacementState.start(len(theta), model=args.new_model)
    for opponent, wins, losses in _read_results(args.results) if args.results else []:
        expected = next_placement_opponent(state, theta)
        if opponent is not None and opponent != expected.id:
            raise InputError(f"round {len(state.rounds) + 1}: expected opponent {expected.id}, got {opponent}")
        state = placement_step(state, theta, (wins, losses), cfg)
        print(f"round {len(state.rounds)}: vs {expected.id} {wins}-{losses} -> ranks [{state.lo}, {state.hi}]")
        if state.finished:
            break
    if state.finished:
        print(f"{args.new_model}: rating {state.final_rating:.2f}, rank {placement_rank(state.final_rating, theta)}")
    else:
        print(f"next opponent: {next_placement_opponent(state, theta).id} ({args.t} battles)")
    placements = dict(snap.placements)
    placements[args.new_model] = state
    out = args.out or args.snapshot
    save_state(
        out,
        StateSnapshot(snap.roster, snap.ratings, snap.matrices, placements, snap.config_fingerprint),
    )
    log.info("snapshot written to %s", out)


def cmd_sweep_threshold(args):
    world = SyntheticWorld.uniform(args.models, args.low, args.high, args.world_seed, args.noise)
    seeds = [args.seed + s for s in range(args.seeds)]
    result = threshold_sweep(world, args.h, args.budgets, args.strategies, seeds, _solver(args))
    result.config.update(seed=args.seed, h=",".join(map(str, args.h)), budgets=",".join(map(str, args.budgets)))
    _write_text(args.out, result.to_csv())


def cmd_sweep_fim(args):
    world = SyntheticWorld.uniform(args.models, args.low, args.high, args.world_seed, 0.0)
    seeds = [args.seed + s for s in range(args.seeds)]
    result = fim_sweep(world, args.h, args.budgets, args.mode, seeds, args.tau, args.n_m)
    result.config.update(seed=args.seed, h=",".join(map(str, args.h)), budgets=",".join(map(str, args.budgets)))
    _write_text(args.out, result.to_csv())


def cmd_replay(args):
    if args.log:
        records = _load_records(args.log)
        golden = None
        reference_h = None
    else:
        world = SyntheticWorld.uniform(args.models, args.low, args.high, args.world_seed, 0.0)
        records = synthetic_stream(world, args.budget, args.seed)
        golden = world.golden
        reference_h = threshold_for_fraction(world.scores, args.fraction) if args.h is None else None
    if args.strategy == "uniform":
        strategy = Strategy.uniform()
    else:
        h = args.h if args.h is not None else reference_h
        if h is None:
            raise InputError("--h is required for proximity replay of an external log")
        strategy = Strategy.proximity(h)
    result = replay_experiment(
        records,
        cold_start_fraction=args.cold_start,
        refit_interval=args.refit_interval,
        strategy=strategy,
        placement=PlacementConfig(battles_per_round=args.t),
        seed=args.seed,
        golden=golden,
        solver=_solver(args),
    )
    f = result.final
    log.info(
        "consumed %d/%d (%.1f%%), kendall tau %.4f, rmse %.3f",
        result.consumed, result.total, 100 * f.consumed_fraction, f.kendall_tau, f.rmse,
    )
    _write_text(args.out, result.to_csv())


def cmd_disc_fit(args):
    records = _load_records(args.log)
    matrices = build_matrices(records, roster_from_records(records))
    scores = fit_disc(matrices, args.iterations, args.learning_rate, args.seed)
    rep = transitivity_report(scores, args.threshold)
    print(
        f"loss {scores.final_loss:.6f}  mean_v {rep.mean_v:.4f}  std_v {rep.std_v:.4f}  "
        f"dispersion {rep.dispersion:.4f}  {'transitive' if rep.transitive else 'non-transitive'}"
    )
    lines = [f"# {_comment(args, final_loss=scores.final_loss, dispersion=rep.dispersion)}", "model,u,v"]
    lines += [f"{m.id},{u!r},{v!r}" for m, u, v in zip(scores.roster, scores.u.tolist(), scores.v.tolist())]
    _write_text(args.out, "\n".join(lines) + "\n")


def cmd_bootstrap(args):
    base = _load_records(args.log)
    roster = roster_from_records(base)
    report = bootstrap_variance(base, args.rounds, args.seed, _solver(args), "baseline", roster)
    run = report.runs["baseline"]
    columns = ["model", "mean", "variance", "q025", "q975"]
    reduction = None
    if args.candidate:
        cand = _load_records(args.candidate)
        if {m.id for m in roster_from_records(cand)} != {m.id for m in roster}:
            raise InputError("candidate log covers a different set of models")
        cand_run = bootstrap_variance(cand, args.rounds, args.seed, _solver(args), "candidate", roster).runs["candidate"]
        report = compare_bootstrap(run, cand_run)
        reduction = report.variance_reduction
        columns += ["candidate_variance", "variance_reduction"]
        print(f"mean variance reduction: {report.mean_variance_reduction:.4f}")
    q = run.quantiles((0.025, 0.975))
    lines = [f"# {_comment(args, redraws=run.redraws)}", ",".join(columns)]
    for k, m in enumerate(run.roster):
        row = [m.id, repr(float(run.mean[k])), repr(float(run.variance[k])), repr(float(q[0, k])), repr(float(q[1, k]))]
        if reduction is not None:
            row += [repr(float(report.runs["candidate"].variance[k])), repr(float(reduction[k]))]
        lines.append(",".join(row))
    _write_text(args.out, "\n".join(lines) + "\n")


def cmd_metrics(args):
    est = read_ratings_csv(args.estimated)
    gold = read_ratings_csv(args.golden)
    m = rank_metrics(est, gold)
    doc = {
        "spearman_rho": m.spearman_rho,
        "kendall_tau": m.kendall_tau,
        "avg_rank_diff": m.avg_rank_diff,
        "rmse": m.rmse,
        "mse": m.mse,
    }
    _write_text(args.out, json.dumps(doc, indent=2) + "\n")


def cmd_fim(args):
    snap = _load_snapshot(args.snapshot)
    info = fisher_matrix(snap.ratings, snap.matrices)
    print(f"tr[I^-1] = {info.trace_inv_fim!r}  connected = {info.connected}")


# --- parser ------------------------------------------------------------------------

def _common(out=None):
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--out", default=out, help=f"output path, '-' for stdout (default {out or 'stdout'})")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _solver_args():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--regularization", type=float, default=0.0,
                   help="virtual wins and losses per observed pair")
    return p


def _world(models=100):
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--models", type=int, default=models)
    p.add_argument("--low", type=float, default=400.0)
    p.add_argument("--high", type=float, default=1400.0)
    p.add_argument("--world-seed", type=int, default=0, help="seed of the golden ratings")
    return p


def build_parser() -> argparse.ArgumentParser:
    # parent parsers are built per command: argparse shares their actions, so
    # per-command defaults would otherwise leak between commands
    p = argparse.ArgumentParser(prog="arenarank", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("rank", parents=[_common("state.json"), _solver_args()], help="fit ratings and write a snapshot")
    s.add_argument("log", help="battle log (JSON lines)")
    s.set_defaults(func=cmd_rank)

    s = sub.add_parser("schedule", parents=[_common()], help="draw battle sets by proximity sampling")
    s.add_argument("snapshot")
    s.add_argument("--k", type=int, default=2, help="models per battle set")
    s.add_argument("--h", type=float, default=150.0, help="proximity threshold (Elo)")
    s.add_argument("--tau", type=float, default=1.0, help="softmax temperature")
    s.add_argument("--n-m", type=int, default=3, help="minimum proximity set size")
    s.add_argument("--sets", type=int, default=1, help="number of battle sets to emit")
    s.set_defaults(func=cmd_schedule)

    s = sub.add_parser("place", parents=[_common()], help="run placement matches for a new model")
    s.add_argument("snapshot")
    s.add_argument("--new-model", required=True)
    s.add_argument("--t", type=int, default=10, help="battles per round")
    s.add_argument("--band", type=float, default=0.05, help="early stop when |winrate - 0.5| <= band")
    s.add_argument("--results", help="per-round results, one 'wins,losses' line per round")
    s.set_defaults(func=cmd_place)

    sim = sub.add_parser("simulate", help="synthetic experiments").add_subparsers(dest="protocol", required=True)

    s = sim.add_parser("sweep-threshold", parents=[_common(), _solver_args(), _world()],
                       help="rating error across proximity thresholds")
    s.add_argument("--h", type=_floats, default=[50, 100, 150, 200, 300, 500, 700, 1000])
    s.add_argument("--budgets", type=_ints, default=[100_000])
    s.add_argument("--strategies", type=lambda t: t.split(","), default=["proximity"])
    s.add_argument("--seeds", type=int, default=5, help="number of seeds, starting at --seed")
    s.add_argument("--noise", type=float, default=0.05, help="fraction of out-of-threshold battles")
    s.set_defaults(func=cmd_sweep_threshold)

    s = sim.add_parser("sweep-fim", parents=[_common(), _world()], help="tr[I^-1] across thresholds")
    s.add_argument("--mode", choices=["ideal", "practical"], default="ideal")
    s.add_argument("--h", type=_floats, default=[50, 100, 150, 200, 250, 300, 400, 500, 700, 1000])
    s.add_argument("--budgets", type=_ints, default=[10_000, 100_000, 1_000_000])
    s.add_argument("--seeds", type=int, default=1)
    s.add_argument("--tau", type=float, default=1.0)
    s.add_argument("--n-m", type=int, default=3)
    s.set_defaults(func=cmd_sweep_fim)

    s = sim.add_parser("replay", parents=[_common(), _solver_args(), _world(models=20)], help="replay a battle stream")
    s.add_argument("--log", help="external battle log; a synthetic stream is generated otherwise")
    s.add_argument("--budget", type=int, default=100_000, help="length of the synthetic stream")
    s.add_argument("--strategy", choices=["proximity", "uniform"], default="proximity")
    s.add_argument("--h", type=float, default=None, help="proximity threshold")
    s.add_argument("--fraction", type=float, default=0.56,
                   help="without --h: choose h covering this fraction of pairs")
    s.add_argument("--cold-start", type=float, default=0.2)
    s.add_argument("--refit-interval", type=int, default=5000)
    s.add_argument("--t", type=int, default=10, help="placement battles per round")
    s.set_defaults(func=cmd_replay)

    s = sub.add_parser("disc-fit", parents=[_common()], help="fit disc scores and test transitivity")
    s.add_argument("log")
    s.add_argument("--iterations", type=int, default=5000)
    s.add_argument("--learning-rate", type=float, default=1.0)
    s.add_argument("--threshold", type=float, default=0.25, help="dispersion below this is transitive")
    s.set_defaults(func=cmd_disc_fit)

    s = sub.add_parser("bootstrap", parents=[_common(), _solver_args()], help="bootstrap rating variance")
    s.add_argument("log")
    s.add_argument("--rounds", type=int, default=100)
    s.add_argument("--candidate", help="second log; report its variance reduction against the first")
    s.set_defaults(func=cmd_bootstrap)

    s = sub.add_parser("metrics", parents=[_common()], help="compare estimated ratings with golden ones")
    s.add_argument("estimated", help="model,rating CSV")
    s.add_argument("golden", help="model,rating CSV")
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("fim", parents=[_common()], help="trace of the inverse Fisher information of a snapshot")
    s.add_argument("snapshot")
    s.set_defaults(func=cmd_fim)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        args.func(args)
    except NumericalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ArenaError as exc:  # pragma: no cover - every concrete error is in one family
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
