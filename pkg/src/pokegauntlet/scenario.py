"""Wild-encounter tables and saved checkpoints."""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from pokegauntlet.engine.mechanics import create_monster
from pokegauntlet.engine.model import Bag, DvSpread, Monster
from pokegauntlet.gamedata import (
    DataError,
    GameData,
    STRUGGLE_NAME,
    SCHEMA_VERSION,
    _read_json,
    _require,
)

WILD_MOVE_LIMIT = 4


@dataclass(frozen=True)
class EncounterEntry:
    species: str
    weight: float
    levels: tuple[int, ...]

    @property
    def mean_level(self) -> float:
        return sum(self.levels) / len(self.levels)


@dataclass(frozen=True)
class EncounterTable:
    location: str
    entries: tuple[EncounterEntry, ...]

    @property
    def mean_level(self) -> float:
        """Expected level implied by the table itself."""
        return sum(entry.weight * entry.mean_level for entry in self.entries)

    def frequencies(self) -> dict[str, float]:
        return {entry.species: entry.weight for entry in self.entries}


def load_encounter_table(data: GameData, path: Path | str) -> EncounterTable:
    path = Path(path)
    payload = _read_json(path)
    version = _require(payload, "schema_version", int, path)
    if version != SCHEMA_VERSION:
        raise DataError(path, f"unsupported schema_version {version}")
    location = _require(payload, "location", str, path)
    slots = _require(payload, "slots", list, path)
    if not slots:
        raise DataError(path, "field 'slots' must not be empty")
    entries = []
    for i, raw in enumerate(slots):
        if not isinstance(raw, dict):
            raise DataError(path, f"slots[{i}] must be an object")
        species = _require(raw, "species", str, path)
        if species not in data.species:
            raise DataError(path, f"slots[{i}] species {species!r} unknown")
        weight = _require(raw, "weight", float, path)
        if not 0 < weight <= 1:
            raise DataError(path, f"slots[{i}] weight must be in (0, 1]")
        levels = _require(raw, "levels", list, path)
        if not levels or not all(isinstance(v, int) and 1 <= v <= 100 for v in levels):
            raise DataError(path, f"slots[{i}] levels must be ints in [1, 100]")
        entries.append(
            EncounterEntry(species=species, weight=weight, levels=tuple(levels))
        )
    total = sum(entry.weight for entry in entries)
    if abs(total - 1.0) > 1e-9:
        raise DataError(path, f"slot weights must sum to 1, got {total}")
    return EncounterTable(location=location, entries=tuple(entries))


def sample_encounter(
    table: EncounterTable, rng: random.Random
) -> tuple[str, int]:
    """Pick (species, level): one weighted slot draw, one uniform level draw."""
    roll = rng.random()
    cumulative = 0.0
    entry = table.entries[-1]  # guard against float round-off at the top end
    for candidate in table.entries:
        cumulative += candidate.weight
        if roll < cumulative:
            entry = candidate
            break
    level = rng.choice(entry.levels)
    return entry.species, level


def spawn_wild(
    data: GameData, species_name: str, level: int, rng: random.Random
) -> Monster:
    """Create a wild monster with freshly rolled determinant values.

    Exactly five uniform draws from [0, 15], in hp, attack, defense,
    speed, special order. Moves come from the learnset (latest four).
    """
    species = data.species_named(species_name)
    dvs = DvSpread(
        hp=rng.randint(0, 15),
        attack=rng.randint(0, 15),
        defense=rng.randint(0, 15),
        speed=rng.randint(0, 15),
        special=rng.randint(0, 15),
    )
    return create_monster(species, level, dvs)


@dataclass
class Checkpoint:
    name: str
    party: list[Monster]
    bag: Bag

    def clone_party(self) -> list[Monster]:  # pragma: no cover - convenience
        import copy

        return copy.deepcopy(self.party)


def load_checkpoint(data: GameData, path: Path | str) -> Checkpoint:
    """Load a saved party; errors name the file and field."""
    path = Path(path)
    payload = _read_json(path)
    version = _require(payload, "schema_version", int, path)
    if version != SCHEMA_VERSION:
        raise DataError(path, f"unsupported schema_version {version}")
    name = _require(payload, "name", str, path)
    party_raw = _require(payload, "party", list, path)
    if not 1 <= len(party_raw) <= 6:
        raise DataError(path, f"party must have 1-6 members, got {len(party_raw)}")
    party = []
    for i, raw in enumerate(party_raw):
        if not isinstance(raw, dict):
            raise DataError(path, f"party[{i}] must be an object")
        species_name = _require(raw, "species", str, path)
        if species_name not in data.species:
            raise DataError(path, f"party[{i}] species {species_name!r} unknown")
        level = _require(raw, "level", int, path)
        dvs_raw = _require(raw, "dvs", dict, path)
        try:
            dvs = DvSpread(
                hp=_require(dvs_raw, "hp", int, path),
                attack=_require(dvs_raw, "attack", int, path),
                defense=_require(dvs_raw, "defense", int, path),
                speed=_require(dvs_raw, "speed", int, path),
                special=_require(dvs_raw, "special", int, path),
            )
        except ValueError as exc:
            raise DataError(path, f"party[{i}] dvs: {exc}") from exc
        move_names = _require(raw, "moves", list, path)
        if not 1 <= len(move_names) <= 4:
            raise DataError(path, f"party[{i}] must carry 1-4 moves")
        moves = []
        for move_name in move_names:
            if not isinstance(move_name, str) or move_name not in data.moves:
                raise DataError(path, f"party[{i}] move {move_name!r} unknown")
            if move_name == STRUGGLE_NAME:
                raise DataError(path, f"party[{i}] may not carry {STRUGGLE_NAME!r}")
            moves.append(data.moves[move_name])
        if len(set(move_names)) != len(move_names):
            raise DataError(path, f"party[{i}] lists a duplicate move")
        try:
            party.append(
                create_monster(data.species_named(species_name), level, dvs, moves)
            )
        except ValueError as exc:
            raise DataError(path, f"party[{i}]: {exc}") from exc
    bag_raw = _require(payload, "bag", dict, path)
    potions = _require(bag_raw, "potions", int, path)
    if potions < 0:
        raise DataError(path, "bag potions must be >= 0")
    return Checkpoint(name=name, party=party, bag=Bag(potions=potions))
