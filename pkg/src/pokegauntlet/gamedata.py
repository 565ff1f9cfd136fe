"""Load and validate the JSON data files that parameterise the engine.

Validation errors always name the file and the offending field so a bad
edit is diagnosable from the message alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from pokegauntlet.engine.mechanics import Ruleset
from pokegauntlet.engine.model import (
    EffectKind,
    LearnsetEntry,
    MoveCategory,
    MoveEffect,
    MoveSpec,
    SpeciesSpec,
    StatName,
    TypeId,
)
from pokegauntlet.paths import find_root

SCHEMA_VERSION = 1

STRUGGLE_NAME = "struggle"


class DataError(ValueError):
    """A data file failed validation."""

    def __init__(self, path: Path | str, message: str):
        self.path = str(path)
        super().__init__(f"{path}: {message}")


def _read_json(path: Path) -> Any:
    if not path.is_file():
        raise DataError(path, "file not found")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(path, f"invalid JSON: {exc}") from exc


def _require(payload: dict, field: str, kind: type, path: Path) -> Any:
    if field not in payload:
        raise DataError(path, f"missing field {field!r}")
    value = payload[field]
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise DataError(
            path, f"field {field!r} must be {kind.__name__}, got {type(value).__name__}"
        )
    return value


def _check_schema(payload: dict, path: Path) -> None:
    version = _require(payload, "schema_version", int, path)
    if version != SCHEMA_VERSION:
        raise DataError(path, f"unsupported schema_version {version}")


def _parse_type(value: str, path: Path, field: str) -> TypeId:
    try:
        return TypeId(value)
    except ValueError:
        raise DataError(path, f"field {field!r} has unknown type {value!r}") from None


def load_type_chart(path: Path) -> dict[tuple[TypeId, TypeId], float]:
    payload = _read_json(path)
    _check_schema(payload, path)
    entries = _require(payload, "multipliers", dict, path)
    chart: dict[tuple[TypeId, TypeId], float] = {}
    for attacking, row in entries.items():
        atk = _parse_type(attacking, path, "multipliers")
        if not isinstance(row, dict):
            raise DataError(path, f"multipliers[{attacking!r}] must be an object")
        for defending, value in row.items():
            dfn = _parse_type(defending, path, f"multipliers[{attacking!r}]")
            if not isinstance(value, (int, float)) or float(value) not in (0.0, 0.5, 2.0):
                raise DataError(
                    path,
                    f"multipliers[{attacking!r}][{defending!r}] must be 0, 0.5, or 2",
                )
            chart[(atk, dfn)] = float(value)
    return chart


def _load_ratio_table(payload: dict, field: str, path: Path) -> tuple[tuple[int, int], ...]:
    rows = _require(payload, field, list, path)
    if len(rows) != 13:
        raise DataError(path, f"field {field!r} must list 13 stages, got {len(rows)}")
    table = []
    for i, row in enumerate(rows):
        stage = i - 6
        if (
            not isinstance(row, list)
            or len(row) != 2
            or not all(isinstance(v, int) and v > 0 for v in row)
        ):
            raise DataError(
                path, f"{field}[{i}] (stage {stage:+d}) must be [numerator, denominator]"
            )
        table.append((row[0], row[1]))
    if table[6][0] != table[6][1]:
        raise DataError(path, f"{field} stage 0 must be neutral")
    return tuple(table)


def load_stage_tables(path: Path) -> tuple[tuple[tuple[int, int], ...], tuple[tuple[int, int], ...]]:
    payload = _read_json(path)
    _check_schema(payload, path)
    return (
        _load_ratio_table(payload, "battle_stats", path),
        _load_ratio_table(payload, "accuracy_evasion", path),
    )


_EFFECT_KINDS = {kind.value: kind for kind in EffectKind}
_STAT_NAMES = {stat.value: stat for stat in StatName}


def _parse_effect(payload: Optional[dict], path: Path, move: str) -> MoveEffect:
    if payload is None:
        return MoveEffect()
    kind_raw = _require(payload, "kind", str, path)
    if kind_raw not in _EFFECT_KINDS:
        raise DataError(path, f"move {move!r} effect kind {kind_raw!r} unknown")
    kind = _EFFECT_KINDS[kind_raw]
    kwargs: dict[str, Any] = {"kind": kind}
    if kind in (EffectKind.LOWER_STAT, EffectKind.RAISE_STAT):
        stat_raw = _require(payload, "stat", str, path)
        if stat_raw not in _STAT_NAMES:
            raise DataError(path, f"move {move!r} effect stat {stat_raw!r} unknown")
        kwargs["stat"] = _STAT_NAMES[stat_raw]
        kwargs["stages"] = payload.get("stages", 1)
    if kind is EffectKind.DRAIN:
        fraction = payload.get("fraction", [1, 2])
        if (
            not isinstance(fraction, list)
            or len(fraction) != 2
            or not all(isinstance(v, int) and v > 0 for v in fraction)
        ):
            raise DataError(path, f"move {move!r} drain fraction must be [num, den]")
        kwargs["drain_numerator"], kwargs["drain_denominator"] = fraction
    try:
        return MoveEffect(**kwargs)
    except ValueError as exc:
        raise DataError(path, f"move {move!r}: {exc}") from exc


def load_moves(path: Path) -> dict[str, MoveSpec]:
    payload = _read_json(path)
    _check_schema(payload, path)
    entries = _require(payload, "moves", dict, path)
    moves: dict[str, MoveSpec] = {}
    for name, raw in entries.items():
        if not isinstance(raw, dict):
            raise DataError(path, f"moves[{name!r}] must be an object")
        category_raw = _require(raw, "category", str, path)
        try:
            category = MoveCategory(category_raw)
        except ValueError:
            raise DataError(
                path, f"move {name!r} category {category_raw!r} unknown"
            ) from None
        accuracy = raw.get("accuracy")
        if accuracy is not None and not isinstance(accuracy, int):
            raise DataError(path, f"move {name!r} accuracy must be int or null")
        try:
            moves[name] = MoveSpec(
                name=name,
                move_type=_parse_type(_require(raw, "type", str, path), path, name),
                category=category,
                power=_require(raw, "power", int, path),
                accuracy=accuracy,
                max_pp=_require(raw, "pp", int, path),
                priority=raw.get("priority", 0),
                effect=_parse_effect(raw.get("effect"), path, name),
            )
        except ValueError as exc:
            raise DataError(path, f"move {name!r}: {exc}") from exc
    if STRUGGLE_NAME not in moves:
        raise DataError(path, f"moves must define {STRUGGLE_NAME!r}")
    return moves


def load_species(path: Path, moves: dict[str, MoveSpec]) -> dict[str, SpeciesSpec]:
    payload = _read_json(path)
    _check_schema(payload, path)
    entries = _require(payload, "species", dict, path)
    species: dict[str, SpeciesSpec] = {}
    for name, raw in entries.items():
        if not isinstance(raw, dict):
            raise DataError(path, f"species[{name!r}] must be an object")
        types = _require(raw, "types", list, path)
        if not 1 <= len(types) <= 2 or not all(isinstance(t, str) for t in types):
            raise DataError(path, f"species {name!r} must list one or two types")
        stats = _require(raw, "base_stats", dict, path)
        learnset_raw = _require(raw, "learnset", list, path)
        learnset: list[LearnsetEntry] = []
        previous_level = 0
        for i, item in enumerate(learnset_raw):
            if (
                not isinstance(item, list)
                or len(item) != 2
                or not isinstance(item[0], int)
                or not isinstance(item[1], str)
            ):
                raise DataError(
                    path, f"species {name!r} learnset[{i}] must be [level, move]"
                )
            level, move_name = item
            if move_name == STRUGGLE_NAME:
                raise DataError(
                    path, f"species {name!r} learnset may not teach {STRUGGLE_NAME!r}"
                )
            if move_name not in moves:
                raise DataError(
                    path, f"species {name!r} learnset move {move_name!r} unknown"
                )
            if level < previous_level:
                raise DataError(
                    path, f"species {name!r} learnset must be sorted by level"
                )
            previous_level = level
            learnset.append(LearnsetEntry(level=level, move=moves[move_name]))
        try:
            species[name] = SpeciesSpec(
                name=name,
                type1=_parse_type(types[0], path, name),
                type2=_parse_type(types[1], path, name) if len(types) == 2 else None,
                base_hp=_require(stats, "hp", int, path),
                base_attack=_require(stats, "attack", int, path),
                base_defense=_require(stats, "defense", int, path),
                base_speed=_require(stats, "speed", int, path),
                base_special=_require(stats, "special", int, path),
                learnset=tuple(learnset),
            )
        except ValueError as exc:
            raise DataError(path, f"species {name!r}: {exc}") from exc
        if not learnset or min(entry.level for entry in learnset) > 1:
            raise DataError(path, f"species {name!r} needs a level-1 move")
    return species


@dataclass(frozen=True)
class GameData:
    """Everything the engine and scenario layers need, fully validated."""

    root: Path
    ruleset: Ruleset
    moves: dict[str, MoveSpec]
    species: dict[str, SpeciesSpec]

    def move(self, name: str) -> MoveSpec:
        if name not in self.moves:
            raise KeyError(f"unknown move {name!r}")
        return self.moves[name]

    def species_named(self, name: str) -> SpeciesSpec:
        if name not in self.species:
            raise KeyError(f"unknown species {name!r}")
        return self.species[name]


def load_game_data(root: Path | str | None = None) -> GameData:
    root_path = find_root(root)
    data = root_path / "data"
    moves = load_moves(data / "moves" / "moves.json")
    stat_table, accuracy_table = load_stage_tables(data / "stages" / "stage_tables.json")
    ruleset = Ruleset(
        type_chart=load_type_chart(data / "types" / "type_chart.json"),
        stat_stage_ratios=stat_table,
        accuracy_stage_ratios=accuracy_table,
        struggle=moves[STRUGGLE_NAME],
    )
    species = load_species(data / "species" / "species.json", moves)
    return GameData(root=root_path, ruleset=ruleset, moves=moves, species=species)
