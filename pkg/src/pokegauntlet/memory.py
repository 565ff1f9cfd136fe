"""Long-term battle memory: an append-only JSONL store with scored recall.

Records describe past battles in one line of text plus structured
entities. Retrieval is deliberately simple: exact species-pair and
location matches dominate, with a linear level-closeness bonus.
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from pokegauntlet.engine.model import Action, ActionKind, BattleState
from pokegauntlet.agentio import ActionMenu

SPECIES_PAIR_WEIGHT = 2.0
LOCATION_WEIGHT = 1.0
LEVEL_TOLERANCE = 5
# A remembered loss argues for running when the old enemy was no stronger
# than the current one, give or take two levels.
RULE_LEVEL_MARGIN = 2

OUTCOMES = ("won", "lost", "escaped")


class MemoryStoreError(RuntimeError):
    """The backing JSONL file is missing, unreadable, or malformed."""


@dataclass(frozen=True)
class BattleEntities:
    """Who fought whom, where. Absent fields simply score nothing."""

    ally_species: Optional[str] = None
    ally_level: Optional[int] = None
    enemy_species: Optional[str] = None
    enemy_level: Optional[int] = None
    location: Optional[str] = None

    def as_dict(self) -> dict[str, object]:
        return {
            "ally_species": self.ally_species,
            "ally_level": self.ally_level,
            "enemy_species": self.enemy_species,
            "enemy_level": self.enemy_level,
            "location": self.location,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "BattleEntities":
        return cls(
            ally_species=payload.get("ally_species"),
            ally_level=payload.get("ally_level"),
            enemy_species=payload.get("enemy_species"),
            enemy_level=payload.get("enemy_level"),
            location=payload.get("location"),
        )


@dataclass(frozen=True)
class MemoryRecord:
    id: str
    text: str
    outcome: str  # one of OUTCOMES
    entities: BattleEntities
    created_at: str  # ISO-8601, UTC

    def as_dict(self) -> dict[str, object]:
        return {
            "id": self.id,
            "text": self.text,
            "outcome": self.outcome,
            "entities": self.entities.as_dict(),
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MemoryRecord":
        missing = {"id", "text", "outcome", "entities"} - set(payload)
        if missing:
            raise ValueError(f"record missing fields {sorted(missing)}")
        if payload["outcome"] not in OUTCOMES:
            raise ValueError(f"record outcome {payload['outcome']!r} unknown")
        return cls(
            id=str(payload["id"]),
            text=str(payload["text"]),
            outcome=payload["outcome"],
            entities=BattleEntities.from_dict(payload["entities"]),
            created_at=str(payload.get("created_at", "")),
        )


@dataclass(frozen=True)
class MemoryQuery:
    entities: BattleEntities
    limit: int = 3


def _level_closeness(a: Optional[int], b: Optional[int]) -> float:
    if a is None or b is None:
        return 0.0
    return max(0.0, 1.0 - abs(a - b) / LEVEL_TOLERANCE)


def score_record(record: BattleEntities, query: BattleEntities) -> float:
    """Similarity of a stored battle to the current one.

    +2 when both species match, +1 for the location, plus up to 1 for
    each side's level closeness (linear falloff over 5 levels).
    """
    score = 0.0
    if (
        record.ally_species is not None
        and record.ally_species == query.ally_species
        and record.enemy_species is not None
        and record.enemy_species == query.enemy_species
    ):
        score += SPECIES_PAIR_WEIGHT
    if record.location is not None and record.location == query.location:
        score += LOCATION_WEIGHT
    score += _level_closeness(record.ally_level, query.ally_level)
    score += _level_closeness(record.enemy_level, query.enemy_level)
    return score


class MemoryStore:
    """JSONL-backed store. Appends on insert; ``compact`` rewrites."""

    def __init__(self, path: Path | str):
        self.path = Path(path)
        self._records: list[MemoryRecord] = []
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        try:
            text = self.path.read_text(encoding="utf-8")
        except OSError as exc:
            raise MemoryStoreError(f"cannot read {self.path}: {exc}") from exc
        for line_number, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
                record = MemoryRecord.from_dict(payload)
            except (json.JSONDecodeError, ValueError) as exc:
                raise MemoryStoreError(
                    f"{self.path}:{line_number}: bad record: {exc}"
                ) from exc
            self._records.append(record)

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> list[MemoryRecord]:
        return list(self._records)

    def insert(
        self,
        text: str,
        outcome: str,
        entities: BattleEntities,
        *,
        record_id: Optional[str] = None,
        created_at: Optional[str] = None,
    ) -> MemoryRecord:
        if outcome not in OUTCOMES:
            raise ValueError(f"outcome must be one of {OUTCOMES}, got {outcome!r}")
        record = MemoryRecord(
            id=record_id or uuid.uuid4().hex,
            text=text,
            outcome=outcome,
            entities=entities,
            created_at=created_at
            or datetime.now(timezone.utc).isoformat(timespec="seconds"),
        )
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(record.as_dict()) + "\n")
        except OSError as exc:
            raise MemoryStoreError(f"cannot append to {self.path}: {exc}") from exc
        self._records.append(record)
        return record

    def retrieve(self, query: MemoryQuery) -> list[tuple[MemoryRecord, float]]:
        """Top matches, highest score first; ties go to the newest record."""
        scored = [
            (record, score_record(record.entities, query.entities), position)
            for position, record in enumerate(self._records)
        ]
        scored.sort(key=lambda item: (-item[1], -item[2]))
        return [(record, score) for record, score, _ in scored[: query.limit]]

    def compact(self) -> int:
        """Rewrite the file, dropping duplicate ids (last one wins).

        Returns the number of lines removed.
        """
        by_id: dict[str, MemoryRecord] = {}
        for record in self._records:
            by_id[record.id] = record
        kept = list(by_id.values())
        removed = len(self._records) - len(kept)
        tmp_path = self.path.with_suffix(".tmp")
        try:
            with tmp_path.open("w", encoding="utf-8") as handle:
                for record in kept:
                    handle.write(json.dumps(record.as_dict()) + "\n")
            tmp_path.replace(self.path)
        except OSError as exc:
            raise MemoryStoreError(f"cannot compact {self.path}: {exc}") from exc
        self._records = kept
        return removed


def format_snippets(results: Sequence[tuple[MemoryRecord, float]]) -> list[str]:
    """Prompt-ready lines: ``[outcome] text``."""
    return [f"[{record.outcome}] {record.text}" for record, _ in results]


def memory_aware_rule(
    state: BattleState,
    retrieved: Sequence[tuple[MemoryRecord, float]],
    menu: ActionMenu,
) -> Optional[Action]:
    """Recommend fleeing when memory says this match-up went badly.

    Fires when a retrieved loss names the current enemy species at a
    recorded level no higher than the current level + 2, and running is
    actually on the menu. Returns None when memory has no advice.
    """
    run_actions = [a for a in menu.actions if a.kind is ActionKind.RUN]
    if not run_actions:
        return None
    enemy_species = state.enemy.species.name
    for record, _score in retrieved:
        entities = record.entities
        if (
            record.outcome == "lost"
            and entities.enemy_species == enemy_species
            and entities.enemy_level is not None
            and entities.enemy_level <= state.enemy.level + RULE_LEVEL_MARGIN
        ):
            return run_actions[0]
    return None
