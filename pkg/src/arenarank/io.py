"""Battle-log ingestion and rating-state snapshots.

Battle logs are JSON lines. Each line carries ``schema_version`` (currently 1)
and either a pairwise battle::

    {"schema_version": 1, "timestamp": 17, "model_a": "x", "model_b": "y", "winner": "x"}

or a K-way round whose winner beat every other participant::

    {"schema_version": 1, "models": ["x", "y", "z"], "winner": "x", "battle_group": "r42"}

which expands into K-1 pairwise records. Optional keys: ``battle_group``,
``app_id``.

Snapshots are one JSON document ``{"format", "version", "payload", "sha256"}``;
floats are stored as hex strings so ratings survive bit for bit.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .core import BattleRecord, ComparisonMatrices, ModelRef, RatingVector, Source, as_roster
from .exceptions import CorruptSnapshot, InputError, SchemaVersionUnsupported
from .scheduler import PlacementRound, PlacementState

SCHEMA_VERSION = 1
SNAPSHOT_FORMAT = "arenarank-snapshot"
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class Rejection:
    line: int
    reason: str


@dataclass
class IngestResult:
    records: list[BattleRecord]
    rejections: list[Rejection] = field(default_factory=list)


def _parse_line(obj, line_no, source):
    if not isinstance(obj, dict):
        raise ValueError("line is not a JSON object")
    if "schema_version" not in obj:
        raise ValueError("missing schema_version")
    version = obj["schema_version"]
    if version != SCHEMA_VERSION:
        raise SchemaVersionUnsupported(f"line {line_no}: schema_version {version!r} is not supported")
    winner = obj.get("winner")
    if not isinstance(winner, str) or not winner:
        raise ValueError("missing or non-string winner")
    timestamp = obj.get("timestamp")
    group = obj.get("battle_group")
    group = None if group is None else str(group)
    if "models" in obj:
        models = obj["models"]
        if not isinstance(models, list) or len(models) < 2 or not all(isinstance(m, str) and m for m in models):
            raise ValueError("models must list at least two model ids")
        if len(set(models)) != len(models):
            raise ValueError("self-battle: a model appears twice in the round")
        if winner not in models:
            raise ValueError(f"winner {winner!r} is not among the participants")
        w = ModelRef(winner)
        return [
            BattleRecord(w, ModelRef(m), 1, timestamp, source, True, group)
            for m in models
            if m != winner
        ]
    a, b = obj.get("model_a"), obj.get("model_b")
    if not isinstance(a, str) or not isinstance(b, str) or not a or not b:
        raise ValueError("model_a and model_b must be non-empty strings")
    if a == b:
        raise ValueError("self-battle")
    if winner not in (a, b):
        raise ValueError(f"winner {winner!r} is neither model_a nor model_b")
    return [BattleRecord(ModelRef(a), ModelRef(b), 1 if winner == a else 0, timestamp, source, True, group)]


def ingest(path, source: Source = Source.LIVE) -> IngestResult:
    """Read a battle log; invalid lines are skipped and reported with their 1-based number."""
    path = Path(path)
    result = IngestResult([])
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                result.records.extend(_parse_line(obj, line_no, source))
            except SchemaVersionUnsupported:
                raise
            except (ValueError, TypeError) as exc:
                result.rejections.append(Rejection(line_no, str(exc)))
    return result


def write_battle_log(path, records) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in records:
            line = {
                "schema_version": SCHEMA_VERSION,
                "timestamp": r.timestamp,
                "model_a": r.model_a.id,
                "model_b": r.model_b.id,
                "winner": r.winner.id,
            }
            if r.group is not None:
                line["battle_group"] = r.group
            fh.write(json.dumps(line) + "\n")


# --- rating tables ------------------------------------------------------------

def read_ratings_csv(path) -> RatingVector:
    """Two-column CSV (``model,rating``) into a rating vector."""
    ids, scores = [], []
    with Path(path).open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise InputError(f"{path}: no rows")
    if rows[0][0].strip().lower() in ("model", "id"):
        rows = rows[1:]
    for r in rows:
        if len(r) < 2:
            raise InputError(f"{path}: expected model,rating rows")
        ids.append(r[0].strip())
        try:
            scores.append(float(r[1]))
        except ValueError as exc:
            raise InputError(f"{path}: bad rating {r[1]!r}") from exc
    scores = np.array(scores)
    return RatingVector(ids, scores, gauge_anchor=float(scores.mean()))


def write_ratings_csv(path, ratings: RatingVector, comment: str = "") -> None:
    with Path(path).open("w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(["model", "rating"])
        for m, s in zip(ratings.roster, ratings.scores):
            w.writerow([m.id, repr(float(s))])


# --- snapshots -------------------------------------------------------------------

@dataclass(eq=False)
class StateSnapshot:
    roster: tuple[ModelRef, ...]
    ratings: RatingVector | None
    matrices: ComparisonMatrices
    placements: dict[str, PlacementState] = field(default_factory=dict)
    config_fingerprint: str = ""
    created_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def __post_init__(self):
        self.roster = as_roster(self.roster)
        ids = [m.id for m in self.roster]
        if [m.id for m in self.matrices.roster] != ids:
            raise InputError("matrices roster differs from snapshot roster")
        if self.ratings is not None and [m.id for m in self.ratings.roster] != ids:
            raise InputError("ratings roster differs from snapshot roster")

    @classmethod
    def empty(cls, roster=()):
        roster = as_roster(roster)
        return cls(roster, None, ComparisonMatrices.empty(roster))

    def __eq__(self, other):
        if not isinstance(other, StateSnapshot):
            return NotImplemented
        return (
            [m.id for m in self.roster] == [m.id for m in other.roster]
            and [m.display_name for m in self.roster] == [m.display_name for m in other.roster]
            and self.ratings == other.ratings
            and self.matrices == other.matrices
            and self.placements == other.placements
            and self.config_fingerprint == other.config_fingerprint
            and self.created_at == other.created_at
        )


def config_fingerprint(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _hexf(x):
    return None if x is None else float(x).hex()


def _unhexf(s):
    return None if s is None else float.fromhex(s)


def _placement_to_json(p: PlacementState):
    return {
        "lo": p.lo,
        "hi": p.hi,
        "rounds": [[r.opponent.id, r.wins, r.losses] for r in p.rounds],
        "finished": p.finished,
        "final_rating": _hexf(p.final_rating),
        "initial_width": p.initial_width,
        "model": p.model,
    }


def _placement_from_json(d):
    return PlacementState(
        lo=int(d["lo"]),
        hi=int(d["hi"]),
        rounds=tuple(PlacementRound(ModelRef(o), int(w), int(l)) for o, w, l in d["rounds"]),
        finished=bool(d["finished"]),
        final_rating=_unhexf(d["final_rating"]),
        initial_width=int(d["initial_width"]),
        model=d.get("model", ""),
    )


def _payload(s: StateSnapshot) -> dict:
    r = s.ratings
    return {
        "roster": [[m.id, m.display_name] for m in s.roster],
        "ratings": None
        if r is None
        else {
            "scores": [_hexf(v) for v in r.scores],
            "alpha": _hexf(r.alpha),
            "gauge_anchor": _hexf(r.gauge_anchor),
        },
        "wins": s.matrices.wins.tolist(),
        "placements": {k: _placement_to_json(v) for k, v in sorted(s.placements.items())},
        "config_fingerprint": s.config_fingerprint,
        "created_at": s.created_at,
    }


def _digest(payload) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def save_state(path, snapshot: StateSnapshot) -> None:
    payload = _payload(snapshot)
    doc = {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "payload": payload,
        "sha256": _digest(payload),
    }
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc, sort_keys=True, indent=1))
    tmp.replace(path)


def load_state(path) -> StateSnapshot:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptSnapshot(f"{path}: not valid JSON ({exc.msg})") from exc
    if not isinstance(doc, dict) or doc.get("format") != SNAPSHOT_FORMAT:
        raise CorruptSnapshot(f"{path}: not a snapshot file")
    if doc.get("version") != SNAPSHOT_VERSION:
        raise CorruptSnapshot(f"{path}: unsupported snapshot version {doc.get('version')!r}")
    payload = doc.get("payload")
    if _digest(payload) != doc.get("sha256"):
        raise CorruptSnapshot(f"{path}: checksum mismatch")
    try:
        roster = tuple(ModelRef(i, name) for i, name in payload["roster"])
        matrices = ComparisonMatrices.from_wins(roster, np.array(payload["wins"], dtype=np.int64).reshape(len(roster), len(roster)))
        rd = payload["ratings"]
        ratings = None
        if rd is not None:
            ratings = RatingVector(
                roster,
                np.array([_unhexf(v) for v in rd["scores"]]),
                _unhexf(rd["alpha"]),
                _unhexf(rd["gauge_anchor"]),
            )
        placements = {k: _placement_from_json(v) for k, v in payload["placements"].items()}
        return StateSnapshot(
            roster,
            ratings,
            matrices,
            placements,
            payload["config_fingerprint"],
            payload["created_at"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptSnapshot(f"{path}: malformed payload ({exc})") from exc
